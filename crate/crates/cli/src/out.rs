use std::io::{self, BufWriter, Write};
use std::path::Path;

use anyhow::{Context, Result};
use tempfile::NamedTempFile;

/// Stdout, or a file that only appears at its destination once complete.
/// Dropping an uncommitted file output deletes the temporary file.
pub enum Output {
    Stdout(io::Stdout),
    File { tmp: BufWriter<NamedTempFile>, dest: std::path::PathBuf },
}

impl Output {
    pub fn new(path: Option<&Path>) -> Result<Self> {
        match path {
            Some(p) => Self::file(p),
            None => Ok(Output::Stdout(io::stdout())),
        }
    }

    pub fn file(path: &Path) -> Result<Self> {
        let dir = match path.parent() {
            Some(d) if !d.as_os_str().is_empty() => d,
            _ => Path::new("."),
        };
        let tmp = tempfile::Builder::new()
            .prefix(".gramlog-")
            .suffix(".partial")
            .tempfile_in(dir)
            .with_context(|| format!("creating output next to {}", path.display()))?;
        Ok(Output::File { tmp: BufWriter::new(tmp), dest: path.to_path_buf() })
    }

    pub fn commit(mut self) -> Result<()> {
        self.flush()?;
        if let Output::File { tmp, dest } = self {
            let tmp = tmp.into_inner().map_err(|e| e.into_error())?;
            tmp.persist(&dest).with_context(|| format!("writing {}", dest.display()))?;
        }
        Ok(())
    }
}

impl Write for Output {
    fn write(&mut self, buf: &[u8]) -> io::Result<usize> {
        match self {
            Output::Stdout(s) => s.write(buf),
            Output::File { tmp, .. } => tmp.write(buf),
        }
    }

    fn flush(&mut self) -> io::Result<()> {
        match self {
            Output::Stdout(s) => s.flush(),
            Output::File { tmp, .. } => tmp.flush(),
        }
    }
}
