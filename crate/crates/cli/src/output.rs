//! CSV emission. Every numeric field is written with 17 significant digits.

use std::fs::File;
use std::path::{Path, PathBuf};

use crate::error::CliError;

pub const SCHEMA_VERSION: &str = "1";

pub fn num(v: f64) -> String {
    format!("{v:.16e}")
}

pub struct Table {
    path: PathBuf,
    writer: csv::Writer<File>,
}

impl Table {
    pub fn create(dir: &Path, name: &str, header: &[&str]) -> Result<Table, CliError> {
        let path = dir.join(name);
        let mut writer = csv::Writer::from_path(&path).map_err(|e| CliError::csv(&path, e))?;
        writer.write_record(header).map_err(|e| CliError::csv(&path, e))?;
        Ok(Table { path, writer })
    }

    pub fn row<I, S>(&mut self, fields: I) -> Result<(), CliError>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<[u8]>,
    {
        self.writer
            .write_record(fields)
            .map_err(|e| CliError::csv(&self.path, e))
    }

    pub fn finish(mut self) -> Result<(), CliError> {
        self.writer.flush().map_err(|e| CliError::Io {
            path: self.path.display().to_string(),
            source: e,
        })
    }
}

pub fn prepare_dir(dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::Io {
        path: dir.display().to_string(),
        source: e,
    })?;
    let marker = dir.join("SCHEMA_VERSION");
    std::fs::write(&marker, format!("{SCHEMA_VERSION}\n")).map_err(|e| CliError::Io {
        path: marker.display().to_string(),
        source: e,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn numbers_round_trip() {
        for v in [0.1, -5.0, 1.0e8 + 3.0, std::f64::consts::PI, 6.02e-23] {
            let s = num(v);
            assert_eq!(s.parse::<f64>().unwrap(), v);
        }
        assert_eq!(num(2.0), "2.0000000000000000e0");
    }
}
