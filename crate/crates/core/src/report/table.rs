use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};

/// A CSV table whose column names carry their unit as a suffix
/// (`_db`, `_km`, `_ps`, `_db2`), or none for counts.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(columns: &[&'static str]) -> Self {
        Table {
            columns: columns.to_vec(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn write<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "{}", self.columns.join(","))?;
        for row in &self.rows {
            writeln!(w, "{}", row.join(","))?;
        }
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let file = File::create(path).map_err(|e| Error::file(path, e))?;
        let mut w = BufWriter::new(file);
        self.write(&mut w)?;
        w.flush().map_err(|e| Error::file(path, e))
    }
}

/// Shortest decimal that round-trips, so reruns are byte-identical.
pub fn num(x: f64) -> String {
    format!("{x}")
}

/// Missing values print as `nan`.
pub fn opt(x: Option<f64>) -> String {
    x.map_or_else(|| "nan".to_string(), num)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn writes_header_and_rows() {
        let mut t = Table::new(&["distance_km", "sigma_mdg_db"]);
        t.push(vec![num(59.0), opt(None)]);
        t.push(vec![num(118.0), num(0.1 + 0.2)]);
        let mut out = Vec::new();
        t.write(&mut out).unwrap();
        assert_eq!(
            String::from_utf8(out).unwrap(),
            "distance_km,sigma_mdg_db\n59,nan\n118,0.30000000000000004\n"
        );
    }
}
