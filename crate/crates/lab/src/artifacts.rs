//! CSV tables and the run manifest. Floats are written in a fixed scientific
//! format so that identical runs produce identical bytes.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use serde::Serialize;

pub fn num(x: f64) -> String {
    format!("{x:.15e}")
}

#[derive(Clone, Debug, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new<S: Into<String>>(header: impl IntoIterator<Item = S>) -> Self {
        Table {
            header: header.into_iter().map(Into::into).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn push_nums(&mut self, row: &[f64]) {
        self.push(row.iter().copied().map(num).collect());
    }

    pub fn render(&self) -> String {
        let mut out = self.header.join(",");
        out.push('\n');
        for r in &self.rows {
            out.push_str(&r.join(","));
            out.push('\n');
        }
        out
    }

    pub fn parse(src: &str) -> Option<Table> {
        let mut lines = src.lines().filter(|l| !l.trim().is_empty());
        let header: Vec<String> = lines.next()?.split(',').map(|s| s.trim().to_string()).collect();
        let rows = lines
            .map(|l| l.split(',').map(|s| s.trim().to_string()).collect())
            .collect();
        Some(Table { header, rows })
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.header.iter().position(|h| h == name)
    }
}

/// Collects the files an experiment run writes, in order.
#[derive(Debug)]
pub struct ArtifactDir {
    root: PathBuf,
    written: Vec<String>,
}

impl ArtifactDir {
    pub fn create(root: &Path) -> io::Result<Self> {
        fs::create_dir_all(root)?;
        Ok(ArtifactDir {
            root: root.to_path_buf(),
            written: Vec::new(),
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn written(&self) -> &[String] {
        &self.written
    }

    pub fn write_table(&mut self, name: &str, table: &Table) -> io::Result<()> {
        self.write_text(name, &table.render())
    }

    pub fn write_text(&mut self, name: &str, text: &str) -> io::Result<()> {
        fs::write(self.root.join(name), text)?;
        if !self.written.iter().any(|w| w == name) {
            self.written.push(name.to_string());
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Constants {
    pub lipschitz: f64,
    pub existence_time: f64,
    pub radius: f64,
    pub growth_constant: f64,
    pub grid_nodes: usize,
    pub grid_tolerance: f64,
    pub grid_volume_error: f64,
    pub f_norm_sq_grid: f64,
    pub f_norm_sq_exact: f64,
    pub c_hbar: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct Manifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub core_version: &'static str,
    pub timestamp_unix: u64,
    pub status: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub failure: Option<String>,
    pub config: serde_json::Value,
    pub constants: Constants,
    pub artifacts: Vec<String>,
    pub summaries: serde_json::Map<String, serde_json::Value>,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_renders_and_parses_back() {
        let mut t = Table::new(["t", "drift"]);
        t.push_nums(&[0.0, 1.5e-9]);
        let text = t.render();
        assert_eq!(text, "t,drift\n0.000000000000000e0,1.500000000000000e-9\n");
        assert_eq!(Table::parse(&text).unwrap(), t);
        assert!(Table::parse("").is_none());
    }
}
