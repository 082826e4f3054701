//! Result tables and their CSV form.
//!
//! A CSV file starts with `#` metadata lines (tool version, experiment, seed,
//! timestamp, the resolved config as one JSON line, then one line per
//! check), followed by a header row and the data rows. Floats are written
//! with 17 significant digits, so parsing them back is exact.

use std::fmt::Write as _;
use std::io::Write;
use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use crate::error::{LabError, Result};

/// Prefix of the only metadata line that varies between identical runs.
pub const TIMESTAMP_PREFIX: &str = "# generated_at_unix:";

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Int(i64),
    Float(f64),
    Bool(bool),
    Text(String),
    Empty,
}

impl Cell {
    pub fn render(&self) -> String {
        match self {
            Cell::Int(v) => v.to_string(),
            Cell::Float(v) => format_float(*v),
            Cell::Bool(v) => v.to_string(),
            Cell::Text(s) => s.clone(),
            Cell::Empty => String::new(),
        }
    }

    pub fn as_f64(&self) -> Option<f64> {
        match self {
            Cell::Float(v) => Some(*v),
            Cell::Int(v) => Some(*v as f64),
            _ => None,
        }
    }

    pub fn as_bool(&self) -> Option<bool> {
        match self {
            Cell::Bool(v) => Some(*v),
            _ => None,
        }
    }

    pub fn as_str(&self) -> Option<&str> {
        match self {
            Cell::Text(s) => Some(s),
            _ => None,
        }
    }
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Float(v)
    }
}

impl From<bool> for Cell {
    fn from(v: bool) -> Self {
        Cell::Bool(v)
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Text(v.to_owned())
    }
}

impl From<String> for Cell {
    fn from(v: String) -> Self {
        Cell::Text(v)
    }
}

impl From<Option<f64>> for Cell {
    fn from(v: Option<f64>) -> Self {
        v.map_or(Cell::Empty, Cell::Float)
    }
}

macro_rules! int_cell {
    ($($t:ty),*) => {$(
        impl From<$t> for Cell {
            fn from(v: $t) -> Self {
                Cell::Int(v as i64)
            }
        }
    )*};
}
int_cell!(i32, i64, u32, u64, usize);

/// `{:.16e}` for finite values; `NaN`, `inf` and `-inf` otherwise.
pub fn format_float(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else if v.is_nan() {
        "NaN".into()
    } else if v > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

/// A named postcondition evaluated by a runner.
#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    pub fn new(name: impl Into<String>, passed: bool, detail: impl Into<String>) -> Self {
        Check {
            name: name.into(),
            passed,
            detail: detail.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResultTable {
    columns: Vec<String>,
    rows: Vec<Vec<Cell>>,
    /// `(key, value)` pairs written as `# key: value`.
    pub metadata: Vec<(String, String)>,
    pub checks: Vec<Check>,
}

impl ResultTable {
    pub fn new(columns: &[&str]) -> Self {
        ResultTable {
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
            metadata: Vec::new(),
            checks: Vec::new(),
        }
    }

    pub fn columns(&self) -> &[String] {
        &self.columns
    }

    pub fn rows(&self) -> &[Vec<Cell>] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Panics when the row width differs from the column count.
    pub fn push(&mut self, row: Vec<Cell>) {
        assert_eq!(row.len(), self.columns.len(), "row width must match the header");
        self.rows.push(row);
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    /// Values of one column; panics on an unknown name.
    pub fn column(&self, name: &str) -> Vec<&Cell> {
        let i = self
            .column_index(name)
            .unwrap_or_else(|| panic!("no column named {name}"));
        self.rows.iter().map(|r| &r[i]).collect()
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn all_checks_pass(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    /// The CSV text, with `timestamp` (seconds since the epoch) on the
    /// timestamp line.
    pub fn to_csv_string(&self, timestamp: u64) -> Result<String> {
        let mut head = String::new();
        writeln!(head, "# npivlab {}", env!("CARGO_PKG_VERSION")).unwrap();
        for (k, v) in &self.metadata {
            writeln!(head, "# {k}: {}", single_line(v)).unwrap();
        }
        writeln!(head, "{TIMESTAMP_PREFIX} {timestamp}").unwrap();
        for c in &self.checks {
            let verdict = if c.passed { "PASS" } else { "FAIL" };
            writeln!(head, "# check {}: {verdict} {}", c.name, single_line(&c.detail)).unwrap();
        }
        let mut w = csv::Writer::from_writer(head.into_bytes());
        w.write_record(&self.columns)?;
        for row in &self.rows {
            w.write_record(row.iter().map(Cell::render))?;
        }
        let bytes = w.into_inner().map_err(|e| LabError::Io {
            path: "<memory>".into(),
            source: e.into_error(),
        })?;
        Ok(String::from_utf8(bytes).expect("csv output is UTF-8"))
    }
}

fn single_line(s: &str) -> String {
    s.replace(['\r', '\n'], " ")
}

fn now_unix() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs())
}

/// Writes the table to `path`.
pub fn emit_csv(table: &ResultTable, path: &Path) -> Result<()> {
    let text = table.to_csv_string(now_unix())?;
    std::fs::write(path, text).map_err(|source| LabError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Writes the table to any writer (stdout for the CLI).
pub fn write_csv(table: &ResultTable, mut out: impl Write) -> Result<()> {
    let text = table.to_csv_string(now_unix())?;
    out.write_all(text.as_bytes()).map_err(|source| LabError::Io {
        path: "<stdout>".into(),
        source,
    })
}

/// A CSV file read back: metadata lines (without `# `) and string records.
#[derive(Debug, Clone, PartialEq)]
pub struct ParsedCsv {
    pub metadata: Vec<String>,
    pub header: Vec<String>,
    pub records: Vec<Vec<String>>,
}

impl ParsedCsv {
    pub fn parse(text: &str) -> Result<Self> {
        let mut metadata = Vec::new();
        let mut body_start = 0;
        for line in text.split_inclusive('\n') {
            match line.strip_prefix('#') {
                Some(rest) => {
                    metadata.push(rest.trim_end_matches(['\r', '\n']).trim_start().to_owned());
                    body_start += line.len();
                }
                None => break,
            }
        }
        let mut r = csv::ReaderBuilder::new()
            .has_headers(true)
            .from_reader(&text.as_bytes()[body_start..]);
        let header = r.headers()?.iter().map(str::to_owned).collect();
        let records = r
            .records()
            .map(|rec| rec.map(|rec| rec.iter().map(str::to_owned).collect()))
            .collect::<Result<_, _>>()?;
        Ok(ParsedCsv {
            metadata,
            header,
            records,
        })
    }

    /// Value of a `key: value` metadata line.
    pub fn meta(&self, key: &str) -> Option<&str> {
        self.metadata
            .iter()
            .find_map(|l| l.strip_prefix(key).and_then(|rest| rest.strip_prefix(": ")))
    }

    pub fn column(&self, name: &str) -> Option<Vec<&str>> {
        let i = self.header.iter().position(|h| h == name)?;
        Some(self.records.iter().map(|r| r[i].as_str()).collect())
    }
}

/// Drops the timestamp line so two runs can be compared byte for byte.
pub fn without_timestamp(text: &str) -> String {
    text.split_inclusive('\n')
        .filter(|l| !l.starts_with(TIMESTAMP_PREFIX))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sample_table() -> ResultTable {
        let mut t = ResultTable::new(&["n", "value", "ok", "label", "maybe"]);
        t.metadata.push(("experiment".into(), "test".into()));
        t.checks.push(Check::new("positive", true, "all > 0"));
        t.push(vec![3u32.into(), 0.1f64.into(), true.into(), "a,b \"c\"".into(), Cell::Empty]);
        t.push(vec![4u32.into(), (1.0f64 / 3.0).into(), false.into(), "plain".into(), Some(2.5).into()]);
        t
    }

    #[test]
    fn floats_use_seventeen_significant_digits() {
        assert_eq!(format_float(0.1), "1.0000000000000001e-1");
        assert_eq!(format_float(-2.0), "-2.0000000000000000e0");
        assert_eq!(format_float(f64::NAN), "NaN");
        assert_eq!(format_float(f64::NEG_INFINITY), "-inf");
    }

    #[test]
    fn layout_and_round_trip() {
        let text = sample_table().to_csv_string(42).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], format!("# npivlab {}", env!("CARGO_PKG_VERSION")));
        assert_eq!(lines[1], "# experiment: test");
        assert_eq!(lines[2], "# generated_at_unix: 42");
        assert_eq!(lines[3], "# check positive: PASS all > 0");
        assert_eq!(lines[4], "n,value,ok,label,maybe");

        let parsed = ParsedCsv::parse(&text).unwrap();
        assert_eq!(parsed.meta("experiment"), Some("test"));
        assert_eq!(parsed.records.len(), 2);
        assert_eq!(parsed.records[0][3], "a,b \"c\"");
        assert_eq!(parsed.records[0][4], "");
        let v: f64 = parsed.records[1][1].parse().unwrap();
        assert_eq!(v, 1.0 / 3.0);
    }

    #[test]
    fn empty_table_is_metadata_and_header() {
        let t = ResultTable::new(&["a", "b"]);
        let text = t.to_csv_string(0).unwrap();
        let parsed = ParsedCsv::parse(&text).unwrap();
        assert_eq!(parsed.header, ["a", "b"]);
        assert!(parsed.records.is_empty());
        assert_eq!(text.lines().filter(|l| !l.starts_with('#')).count(), 1);
    }

    #[test]
    #[should_panic(expected = "row width")]
    fn ragged_rows_are_rejected() {
        ResultTable::new(&["a", "b"]).push(vec![1u32.into()]);
    }

    #[test]
    fn timestamp_is_the_only_varying_line() {
        let t = sample_table();
        let a = t.to_csv_string(1).unwrap();
        let b = t.to_csv_string(2).unwrap();
        assert_ne!(a, b);
        assert_eq!(without_timestamp(&a), without_timestamp(&b));
    }

    #[test]
    fn unwritable_path_names_the_path() {
        let path = Path::new("/nonexistent-dir/sub/out.csv");
        let err = emit_csv(&sample_table(), path).unwrap_err();
        assert!(err.to_string().contains("/nonexistent-dir/sub/out.csv"), "{err}");
    }

    proptest! {
        #[test]
        fn floats_round_trip_exactly(bits in any::<u64>()) {
            let v = f64::from_bits(bits);
            prop_assume!(v.is_finite());
            let mut t = ResultTable::new(&["v"]);
            t.push(vec![v.into()]);
            let parsed = ParsedCsv::parse(&t.to_csv_string(0).unwrap()).unwrap();
            let back: f64 = parsed.records[0][0].parse().unwrap();
            prop_assert_eq!(back.to_bits(), v.to_bits());
        }
    }
}
