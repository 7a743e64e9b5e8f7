//! CSV and JSON encodings. Every CSV starts with a `# schema-version: 1`
//! line, then optional `# key=value` comments, then a header row.

use std::path::Path;

use lrising_core::model::CouplingMatrix;
use lrising_core::{ProductState, Provenance};
use serde::Serialize;

use crate::error::{TaskError, TaskResult};

pub const SCHEMA_VERSION: u32 = 1;

/// An in-memory CSV table written with the schema line.
#[derive(Debug, Clone, Default)]
pub struct Table {
    pub comments: Vec<String>,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new<S: AsRef<str>>(header: &[S]) -> Self {
        Table { comments: Vec::new(), header: header.iter().map(|s| s.as_ref().to_owned()).collect(), rows: Vec::new() }
    }

    pub fn comment(mut self, text: impl Into<String>) -> Self {
        self.comments.push(text.into());
        self
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = format!("# schema-version: {SCHEMA_VERSION}\n").into_bytes();
        for c in &self.comments {
            out.extend_from_slice(format!("# {c}\n").as_bytes());
        }
        let mut w = csv::Writer::from_writer(out);
        w.write_record(&self.header).expect("in-memory write");
        for r in &self.rows {
            w.write_record(r).expect("in-memory write");
        }
        w.into_inner().expect("in-memory flush")
    }

    pub fn read(path: &Path) -> TaskResult<Self> {
        let text = read_text(path)?;
        Self::parse(&text).map_err(|m| TaskError::malformed(path, m))
    }

    pub fn parse(text: &str) -> Result<Self, String> {
        let mut lines = text.lines();
        match lines.next() {
            Some(l) if l.trim() == format!("# schema-version: {SCHEMA_VERSION}") => {}
            Some(l) => return Err(format!("expected schema line, found `{l}`")),
            None => return Err("empty file".into()),
        }
        let comments: Vec<String> = text
            .lines()
            .skip(1)
            .take_while(|l| l.starts_with('#'))
            .map(|l| l.trim_start_matches('#').trim().to_owned())
            .collect();
        let mut r = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(text.as_bytes());
        let header = r.headers().map_err(|e| e.to_string())?.iter().map(str::to_owned).collect();
        let rows = r
            .records()
            .map(|rec| rec.map(|r| r.iter().map(str::to_owned).collect()))
            .collect::<Result<_, _>>()
            .map_err(|e| e.to_string())?;
        Ok(Table { comments, header, rows })
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.header.iter().position(|h| h == name)
    }

    /// Parses column `name` as floats; empty cells become `None`.
    pub fn floats(&self, name: &str) -> Result<Vec<Option<f64>>, String> {
        let k = self.column(name).ok_or_else(|| format!("no column `{name}`"))?;
        self.rows
            .iter()
            .map(|r| {
                let s = r[k].trim();
                if s.is_empty() {
                    Ok(None)
                } else {
                    s.parse().map(Some).map_err(|_| format!("`{s}` in column `{name}` is not a number"))
                }
            })
            .collect()
    }

    pub fn required_floats(&self, name: &str) -> Result<Vec<f64>, String> {
        self.floats(name)?.into_iter().map(|v| v.ok_or_else(|| format!("empty cell in column `{name}`"))).collect()
    }

    /// Value of a `key=value` comment, if present.
    pub fn meta(&self, key: &str) -> Option<&str> {
        self.comments.iter().flat_map(|c| c.split(", ")).find_map(|kv| kv.strip_prefix(key)?.strip_prefix('='))
    }
}

pub fn num(x: f64) -> String {
    format!("{x}")
}

pub fn opt(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

pub fn read_text(path: &Path) -> TaskResult<String> {
    std::fs::read_to_string(path).map_err(|e| {
        if e.kind() == std::io::ErrorKind::NotFound {
            TaskError::MissingInput(path.into())
        } else {
            TaskError::io(path, e)
        }
    })
}

pub fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> TaskResult<T> {
    serde_json::from_str(&read_text(path)?).map_err(|e| TaskError::malformed(path, e))
}

pub fn json_bytes<T: Serialize>(value: &T) -> Vec<u8> {
    let mut v = serde_json::to_vec_pretty(value).expect("serializable");
    v.push(b'\n');
    v
}

/// Directory-safe label for a field value, e.g. `g0.31`.
pub fn field_label(g: f64) -> String {
    format!("g{g}")
}

#[derive(Debug, Clone, PartialEq, Serialize, serde::Deserialize)]
pub struct CouplingMeta {
    pub size: usize,
    pub gamma: Option<f64>,
    pub provenance: String,
    pub j: f64,
    pub max_entry: f64,
    pub min_offdiagonal: f64,
    pub row_sums: Vec<f64>,
    pub distance_profile: Vec<f64>,
}

/// Row-major CSV with the size, decay rate and provenance as comments.
pub fn couplings_table(c: &CouplingMatrix) -> Table {
    let n = c.size();
    let header: Vec<String> = (0..n).map(|j| format!("j{j}")).collect();
    let gamma = c.gamma().map(num).unwrap_or_else(|| "none".into());
    let mut t = Table::new(&header).comment(format!("L={n}, gamma={gamma}, provenance={}", c.provenance()));
    for i in 0..n {
        t.push(c.row(i).iter().copied().map(num).collect());
    }
    t
}

pub fn couplings_from_table(t: &Table) -> Result<CouplingMatrix, String> {
    let n = t.header.len();
    if t.rows.len() != n {
        return Err(format!("{} rows for {n} columns", t.rows.len()));
    }
    let entries = t
        .rows
        .iter()
        .flatten()
        .map(|s| s.parse::<f64>().map_err(|_| format!("`{s}` is not a number")))
        .collect::<Result<Vec<_>, _>>()?;
    let provenance: Provenance = t.meta("provenance").unwrap_or("ideal").parse().map_err(|e: lrising_core::Error| e.to_string())?;
    let gamma = t.meta("gamma").and_then(|g| g.parse().ok());
    CouplingMatrix::from_row_major(n, entries, provenance, gamma).map_err(|e| e.to_string())
}

pub fn coupling_meta(c: &CouplingMatrix, j: f64) -> CouplingMeta {
    CouplingMeta {
        size: c.size(),
        gamma: c.gamma(),
        provenance: c.provenance().to_string(),
        j,
        max_entry: c.max_entry(),
        min_offdiagonal: c.min_offdiagonal(),
        row_sums: c.row_sums(),
        distance_profile: c.distance_profile(),
    }
}

/// `u`/`d` string with `@tilt` when the tilt is nonzero.
pub fn state_label(s: &ProductState) -> String {
    s.to_string()
}

#[cfg(test)]
mod tests {
    use super::*;
    use lrising_core::model::build_ideal_couplings;

    #[test]
    fn table_round_trip() {
        let mut t = Table::new(&["t", "sx2"]).comment("L=3, g=0.5");
        t.push(vec![num(0.0), num(1.0)]);
        t.push(vec![num(0.1), String::new()]);
        let bytes = t.to_bytes();
        assert!(bytes.starts_with(b"# schema-version: 1\n# L=3, g=0.5\nt,sx2\n"));
        let back = Table::parse(std::str::from_utf8(&bytes).unwrap()).unwrap();
        assert_eq!(back.meta("g"), Some("0.5"));
        assert_eq!(back.floats("sx2").unwrap(), vec![Some(1.0), None]);
        assert!(Table::parse("t,sx2\n0,1\n").is_err());
    }

    #[test]
    fn couplings_round_trip_exactly() {
        let c = build_ideal_couplings(6, 10.8, 1.0).unwrap();
        let t = Table::parse(std::str::from_utf8(&couplings_table(&c).to_bytes()).unwrap()).unwrap();
        assert_eq!(couplings_from_table(&t).unwrap(), c);
    }
}
