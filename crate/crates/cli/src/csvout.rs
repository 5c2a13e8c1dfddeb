//! Minimal RFC-4180 CSV emission. Fields are numbers or simple tokens,
//! so quoting only triggers defensively; floats use the shortest
//! round-trip rendering, which keeps reruns byte-identical.

use std::fmt::Write as _;
use std::path::Path;

use carmo_core::Result;

pub struct Csv {
    buf: String,
    cols: usize,
}

impl Csv {
    pub fn new(header: &[&str]) -> Self {
        let mut c = Csv {
            buf: String::new(),
            cols: header.len(),
        };
        c.raw_row(header.iter().map(|s| s.to_string()));
        c
    }

    pub fn row(&mut self, fields: &[CsvField]) {
        debug_assert_eq!(fields.len(), self.cols);
        self.raw_row(fields.iter().map(CsvField::render));
    }

    fn raw_row(&mut self, fields: impl Iterator<Item = String>) {
        let mut first = true;
        for f in fields {
            if !first {
                self.buf.push(',');
            }
            first = false;
            if f.contains([',', '"', '\n']) {
                let _ = write!(self.buf, "\"{}\"", f.replace('"', "\"\""));
            } else {
                self.buf.push_str(&f);
            }
        }
        self.buf.push_str("\r\n");
    }

    pub fn write_to(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.buf.as_bytes())?;
        Ok(())
    }
}

pub enum CsvField {
    U(u64),
    F(f64),
    S(String),
    Empty,
}

impl CsvField {
    fn render(&self) -> String {
        match self {
            CsvField::U(v) => v.to_string(),
            CsvField::F(v) => format!("{v}"),
            CsvField::S(s) => s.clone(),
            CsvField::Empty => String::new(),
        }
    }
}
