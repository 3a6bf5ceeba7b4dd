//! CSV tables and JSON-lines draw files, each stamped with config hash and seed.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;

#[derive(Debug, Clone, Serialize)]
pub struct Provenance {
    pub config_sha256: String,
    pub seed: u64,
}

impl Provenance {
    fn comment(&self) -> String {
        format!("# config_sha256={}; seed={}", self.config_sha256, self.seed)
    }
}

/// Writes result files into one directory.
#[derive(Debug, Clone)]
pub struct OutputDir {
    root: PathBuf,
    provenance: Provenance,
}

fn quote(field: &str) -> String {
    if field.contains([',', '"', '\n']) {
        format!("\"{}\"", field.replace('"', "\"\""))
    } else {
        field.to_string()
    }
}

/// Shortest round-trip formatting; deterministic across runs.
pub fn num(v: f64) -> String {
    format!("{v:?}")
}

pub fn opt_num(v: Option<f64>) -> String {
    v.map(num).unwrap_or_default()
}

impl OutputDir {
    pub fn create(root: &Path, provenance: Provenance) -> std::io::Result<Self> {
        std::fs::create_dir_all(root)?;
        Ok(Self {
            root: root.to_path_buf(),
            provenance,
        })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }

    pub fn provenance(&self) -> &Provenance {
        &self.provenance
    }

    pub fn csv(&self, name: &str, header: &[&str], rows: &[Vec<String>]) -> std::io::Result<()> {
        let mut w = BufWriter::new(File::create(self.path(name))?);
        writeln!(w, "{}", self.provenance.comment())?;
        writeln!(w, "{}", header.join(","))?;
        for row in rows {
            let cells: Vec<String> = row.iter().map(|c| quote(c)).collect();
            writeln!(w, "{}", cells.join(","))?;
        }
        w.flush()
    }

    /// First line is the provenance record, then one record per item.
    pub fn jsonl<T: Serialize>(&self, name: &str, records: &[T]) -> std::io::Result<()> {
        let mut w = BufWriter::new(File::create(self.path(name))?);
        writeln!(w, "{}", serde_json::to_string(&self.provenance)?)?;
        for r in records {
            writeln!(w, "{}", serde_json::to_string(r)?)?;
        }
        w.flush()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_has_provenance_header_and_quotes() {
        let dir = tempfile::tempdir().unwrap();
        let out = OutputDir::create(
            dir.path(),
            Provenance {
                config_sha256: "ab".into(),
                seed: 3,
            },
        )
        .unwrap();
        out.csv("t.csv", &["a", "b"], &[vec!["1".into(), "x,y".into()]]).unwrap();
        let text = std::fs::read_to_string(out.path("t.csv")).unwrap();
        assert_eq!(text, "# config_sha256=ab; seed=3\na,b\n1,\"x,y\"\n");
    }
}
