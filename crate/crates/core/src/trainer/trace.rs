use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use super::{LossBreakdown, StepOutcome};
use crate::{Error, Result};

pub const TRACE_HEADER: &str = "iter,recon_nll,kl_weighted,collision,total,relieved";

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TraceRow {
    pub iter: u64,
    pub loss: LossBreakdown,
    pub relieved: usize,
}

impl From<&StepOutcome> for TraceRow {
    fn from(o: &StepOutcome) -> Self {
        TraceRow {
            iter: o.iter,
            loss: o.loss,
            relieved: o.relieved,
        }
    }
}

impl std::fmt::Display for TraceRow {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let l = &self.loss;
        write!(
            f,
            "{},{},{},{},{},{}",
            self.iter, l.recon_nll, l.kl_weighted, l.collision, l.total, self.relieved
        )
    }
}

/// CSV trace sink. Floats are written in shortest round-trip form, so equal
/// traces are byte-identical files.
pub struct TraceWriter<W: Write = BufWriter<File>> {
    out: W,
    path: PathBuf,
}

impl TraceWriter {
    /// New file with the header line.
    pub fn create(path: &Path) -> Result<Self> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = TraceWriter::new(BufWriter::new(file), path);
        w.line(TRACE_HEADER)?;
        Ok(w)
    }

    /// Appends rows to an existing trace, writing the header only if the file
    /// is new or empty.
    pub fn append(path: &Path) -> Result<Self> {
        let fresh = std::fs::metadata(path).map(|m| m.len() == 0).unwrap_or(true);
        let file = std::fs::OpenOptions::new()
            .create(true)
            .append(true)
            .open(path)
            .map_err(|e| Error::io(path, e))?;
        let mut w = TraceWriter::new(BufWriter::new(file), path);
        if fresh {
            w.line(TRACE_HEADER)?;
        }
        Ok(w)
    }
}

impl<W: Write> TraceWriter<W> {
    pub fn new(out: W, path: &Path) -> Self {
        TraceWriter {
            out,
            path: path.to_path_buf(),
        }
    }

    fn line(&mut self, text: &str) -> Result<()> {
        writeln!(self.out, "{text}").map_err(|e| Error::io(&self.path, e))
    }

    pub fn write(&mut self, row: &TraceRow) -> Result<()> {
        writeln!(self.out, "{row}").map_err(|e| Error::io(&self.path, e))
    }

    pub fn finish(mut self) -> Result<W> {
        self.out.flush().map_err(|e| Error::io(&self.path, e))?;
        Ok(self.out)
    }
}
