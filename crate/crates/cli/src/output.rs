//! CSV and JSON writers. Every number is printed with 17 significant digits so
//! identical runs give byte-identical files.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::config::RunConfig;
use crate::error::{CliError, CliResult};

pub fn num(x: f64) -> String {
    if x == 0.0 {
        // Avoid "-0" and normalize the sign of exact zeros.
        return format!("{:.16e}", 0.0);
    }
    format!("{x:.16e}")
}

pub fn maybe(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

pub fn ensure_dir(dir: &Path) -> CliResult<()> {
    fs::create_dir_all(dir).map_err(CliError::io(dir))
}

/// A table whose header block carries the resolved configuration and free-form notes.
pub struct CsvTable {
    columns: Vec<String>,
    rows: Vec<Vec<String>>,
    notes: Vec<String>,
}

impl CsvTable {
    pub fn new<S: Into<String>>(columns: impl IntoIterator<Item = S>) -> Self {
        CsvTable {
            columns: columns.into_iter().map(Into::into).collect(),
            rows: Vec::new(),
            notes: Vec::new(),
        }
    }

    pub fn note(&mut self, line: impl Into<String>) -> &mut Self {
        self.notes.push(line.into());
        self
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn write(&self, path: &Path, config: &RunConfig) -> CliResult<PathBuf> {
        let io = CliError::io(path);
        let file = File::create(path).map_err(CliError::io(path))?;
        let mut out = BufWriter::new(file);
        let mut text = String::new();
        for line in &self.notes {
            text.push_str("# ");
            text.push_str(line);
            text.push('\n');
        }
        text.push_str("# config:\n");
        for line in config.to_pretty_json().lines() {
            text.push_str("# ");
            text.push_str(line);
            text.push('\n');
        }
        out.write_all(text.as_bytes()).map_err(CliError::io(path))?;
        let mut writer = csv::Writer::from_writer(out);
        let result = (|| -> csv::Result<()> {
            writer.write_record(&self.columns)?;
            for row in &self.rows {
                writer.write_record(row)?;
            }
            writer.flush()?;
            Ok(())
        })();
        result.map_err(|e| io(std::io::Error::other(e)))?;
        Ok(path.to_path_buf())
    }
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult<PathBuf> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::io(path)(std::io::Error::other(e)))?;
    text.push('\n');
    fs::write(path, text).map_err(CliError::io(path))?;
    Ok(path.to_path_buf())
}

/// Runs `f` on every item with up to `workers` threads and returns results in input order.
pub fn parallel_map<T, R, F>(items: &[T], workers: usize, f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync,
{
    let workers = workers.clamp(1, items.len().max(1));
    if workers == 1 {
        return items.iter().map(&f).collect();
    }
    let chunk = items.len().div_ceil(workers);
    std::thread::scope(|scope| {
        let handles: Vec<_> = items
            .chunks(chunk)
            .map(|part| {
                let f = &f;
                scope.spawn(move || part.iter().map(f).collect::<Vec<R>>())
            })
            .collect();
        handles
            .into_iter()
            .flat_map(|h| h.join().expect("worker thread panicked"))
            .collect()
    })
}
