//! CSV output directory. Every file opens with a `# config_hash=<hex>`
//! comment line followed by the header row.

use std::fs::File;
use std::io::Write;
use std::path::{Path, PathBuf};

use super::ExperimentConfig;
use crate::Result;

#[derive(Debug, Clone)]
pub struct Output {
    dir: PathBuf,
    hash: String,
}

impl Output {
    /// Creates `dir` and writes the resolved configuration to `config.toml`.
    pub fn create(dir: &Path, cfg: &ExperimentConfig) -> Result<Self> {
        std::fs::create_dir_all(dir)?;
        let out = Self { dir: dir.to_path_buf(), hash: cfg.hash()? };
        std::fs::write(dir.join("config.toml"), cfg.to_toml()?)?;
        Ok(out)
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn hash(&self) -> &str {
        &self.hash
    }

    /// Opens `name` for writing with the hash comment already in place.
    pub fn csv(&self, name: &str) -> Result<csv::Writer<File>> {
        let mut f = File::create(self.dir.join(name))?;
        writeln!(f, "# config_hash={}", self.hash)?;
        Ok(csv::Writer::from_writer(f))
    }
}

#[derive(Debug, Clone)]
pub struct CsvTable {
    pub hash: String,
    pub header: csv::StringRecord,
    pub rows: Vec<csv::StringRecord>,
}

/// Reads a CSV written by [`Output::csv`], splitting off the hash comment.
pub fn read_csv(path: &Path) -> Result<CsvTable> {
    let text = std::fs::read_to_string(path)?;
    let (first, rest) = text.split_once('\n').unwrap_or((&text, ""));
    let hash = first.strip_prefix("# config_hash=").unwrap_or_default().to_string();
    let mut rd = csv::Reader::from_reader(rest.as_bytes());
    let header = rd.headers()?.clone();
    let rows = rd.records().collect::<std::result::Result<Vec<_>, _>>()?;
    Ok(CsvTable { hash, header, rows })
}
