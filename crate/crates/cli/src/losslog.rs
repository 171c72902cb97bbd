//! Loss logging: a training observer that streams one whitespace-delimited
//! record per optimizer step to a temp file, renamed into place when the run
//! completes. Floats print in shortest round-trip form, so a parsed log
//! reproduces the training values bit for bit.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use aqshift_core::train::{StepRecord, TrainObserver};

use crate::error::AppError;

pub struct TrainLogger {
    writer: BufWriter<File>,
    tmp: PathBuf,
    path: PathBuf,
    last: Instant,
    failure: Option<std::io::Error>,
}

impl TrainLogger {
    pub fn create(path: &Path) -> Result<Self, AppError> {
        let mut name = path.file_name().unwrap_or_default().to_os_string();
        name.push(".tmp");
        let tmp = path.with_file_name(name);
        let file = File::create(&tmp)
            .map_err(|e| AppError::data(format!("cannot create loss log {}: {e}", tmp.display())))?;
        let mut writer = BufWriter::new(file);
        if let Err(e) = writeln!(writer, "# step pixel uicm edge total ms") {
            return Err(AppError::data(format!("cannot write loss log header: {e}")));
        }
        Ok(TrainLogger {
            writer,
            tmp,
            path: path.to_path_buf(),
            last: Instant::now(),
            failure: None,
        })
    }

    /// Flush and move the log to its final name. Reports any write error
    /// swallowed during the run.
    pub fn finish(mut self) -> Result<(), AppError> {
        if let Some(e) = self.failure.take() {
            return Err(AppError::data(format!("loss log write failed mid-run: {e}")));
        }
        self.writer
            .flush()
            .map_err(|e| AppError::data(format!("cannot flush loss log: {e}")))?;
        drop(self.writer);
        std::fs::rename(&self.tmp, &self.path)
            .map_err(|e| AppError::data(format!("cannot finalize {}: {e}", self.path.display())))?;
        Ok(())
    }
}

impl TrainObserver for TrainLogger {
    fn on_step(&mut self, record: &StepRecord) {
        if self.failure.is_some() {
            return;
        }
        let ms = self.last.elapsed().as_millis();
        self.last = Instant::now();
        let l = &record.losses;
        if let Err(e) = writeln!(
            self.writer,
            "{} {} {} {} {} {ms}",
            record.step, l.pixel, l.uicm, l.edge, l.total
        ) {
            self.failure = Some(e);
        }
    }
}
