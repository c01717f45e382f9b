use std::fmt;
use std::path::Path;

use crate::{Error, Result};

/// Threshold above which [`compare_tables`] flags a difference.
pub const COMPARE_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Text(String),
    Int(i64),
    Num(f64),
    Missing,
}

/// Reals with 17 significant digits, enough to round-trip any `f64`.
pub fn fmt_num(x: f64) -> String {
    format!("{x:.16e}")
}

impl fmt::Display for Cell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Cell::Text(s) => f.write_str(s),
            Cell::Int(v) => write!(f, "{v}"),
            Cell::Num(v) => f.write_str(&fmt_num(*v)),
            Cell::Missing => Ok(()),
        }
    }
}

impl From<f64> for Cell {
    fn from(v: f64) -> Cell {
        Cell::Num(v)
    }
}

impl From<Option<f64>> for Cell {
    fn from(v: Option<f64>) -> Cell {
        v.map_or(Cell::Missing, Cell::Num)
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Cell {
        Cell::Int(v as i64)
    }
}

impl From<u64> for Cell {
    fn from(v: u64) -> Cell {
        Cell::Int(v as i64)
    }
}

impl From<bool> for Cell {
    fn from(v: bool) -> Cell {
        Cell::Int(v as i64)
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Cell {
        Cell::Text(v.to_string())
    }
}

impl From<String> for Cell {
    fn from(v: String) -> Cell {
        Cell::Text(v)
    }
}

/// A CSV table with a fixed header.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ResultTable {
    pub header: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl ResultTable {
    pub fn new(header: &[&str]) -> ResultTable {
        ResultTable { header: header.iter().map(|s| s.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<Cell>) -> Result<()> {
        if row.len() != self.header.len() {
            return Err(Error::Schema(format!("row of {} cells for {} columns", row.len(), self.header.len())));
        }
        if let Some(Cell::Num(v)) = row.iter().find(|c| matches!(c, Cell::Num(v) if !v.is_finite())) {
            return Err(Error::Data(format!("non-finite value {v} in table row")));
        }
        self.rows.push(row);
        Ok(())
    }

    pub fn to_csv(&self) -> String {
        let mut s = self.header.join(",");
        s.push('\n');
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(|c| c.to_string()).collect();
            s += &cells.join(",");
            s.push('\n');
        }
        s
    }

    /// Reads CSV text; numeric-looking fields become [`Cell::Num`] or
    /// [`Cell::Int`], empty fields [`Cell::Missing`].
    pub fn from_csv(text: &str) -> Result<ResultTable> {
        let mut lines = text.lines();
        let header: Vec<String> = lines
            .next()
            .ok_or_else(|| Error::Schema("empty table".into()))?
            .split(',')
            .map(str::to_string)
            .collect();
        let mut table = ResultTable { header, rows: Vec::new() };
        for (i, line) in lines.enumerate() {
            let row: Vec<Cell> = line.split(',').map(parse_cell).collect();
            if row.len() != table.header.len() {
                return Err(Error::Schema(format!("row {} has {} fields, header has {}", i + 1, row.len(), table.header.len())));
            }
            table.rows.push(row);
        }
        Ok(table)
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.header.iter().position(|h| h == name)
    }
}

fn parse_cell(s: &str) -> Cell {
    if s.is_empty() {
        Cell::Missing
    } else if let Ok(v) = s.parse::<i64>() {
        Cell::Int(v)
    } else if let Ok(v) = s.parse::<f64>() {
        Cell::Num(v)
    } else {
        Cell::Text(s.to_string())
    }
}

fn numeric(c: &Cell) -> Option<f64> {
    match c {
        Cell::Int(v) => Some(*v as f64),
        Cell::Num(v) => Some(*v),
        _ => None,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ColumnDelta {
    pub column: String,
    pub max_abs: f64,
    pub max_rel: f64,
}

/// One differing cell; `row` counts data rows from 1.
#[derive(Debug, Clone, PartialEq)]
pub struct Flag {
    pub row: usize,
    pub column: String,
    pub a: String,
    pub b: String,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct CompareReport {
    pub columns: Vec<ColumnDelta>,
    pub flags: Vec<Flag>,
}

impl CompareReport {
    pub fn is_clean(&self) -> bool {
        self.flags.is_empty()
    }
}

/// Per-column maximum absolute and relative differences of two tables with
/// the same schema; cells differing by more than [`COMPARE_TOL`] are flagged.
pub fn compare_tables(a: &ResultTable, b: &ResultTable) -> Result<CompareReport> {
    if a.header != b.header {
        return Err(Error::Schema(format!("headers differ: [{}] vs [{}]", a.header.join(","), b.header.join(","))));
    }
    if a.rows.len() != b.rows.len() {
        return Err(Error::Schema(format!("{} rows vs {} rows", a.rows.len(), b.rows.len())));
    }
    if let Some(col) = a.column("experiment") {
        if let Some((i, _)) = a.rows.iter().zip(&b.rows).enumerate().find(|(_, (x, y))| x[col] != y[col]) {
            return Err(Error::Schema(format!(
                "row {}: experiment {} vs {}",
                i + 1,
                a.rows[i][col],
                b.rows[i][col]
            )));
        }
    }
    let mut report = CompareReport::default();
    for (j, name) in a.header.iter().enumerate() {
        let mut delta = ColumnDelta { column: name.clone(), max_abs: 0.0, max_rel: 0.0 };
        for (i, (ra, rb)) in a.rows.iter().zip(&b.rows).enumerate() {
            let (ca, cb) = (&ra[j], &rb[j]);
            let (abs, rel) = match (numeric(ca), numeric(cb)) {
                (Some(x), Some(y)) => {
                    let abs = (x - y).abs();
                    let scale = x.abs().max(y.abs());
                    (abs, if scale > 0.0 { abs / scale } else { 0.0 })
                }
                _ if ca == cb => (0.0, 0.0),
                _ => (f64::INFINITY, f64::INFINITY),
            };
            delta.max_abs = delta.max_abs.max(abs);
            delta.max_rel = delta.max_rel.max(rel);
            if abs > COMPARE_TOL || rel > COMPARE_TOL {
                report.flags.push(Flag { row: i + 1, column: name.clone(), a: ca.to_string(), b: cb.to_string() });
            }
        }
        report.columns.push(delta);
    }
    Ok(report)
}

pub fn compare_runs(a: &Path, b: &Path) -> Result<CompareReport> {
    let read = |p: &Path| std::fs::read_to_string(p).map_err(|e| Error::from(e).context(p.display().to_string()));
    compare_tables(&ResultTable::from_csv(&read(a)?)?, &ResultTable::from_csv(&read(b)?)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> ResultTable {
        let mut t = ResultTable::new(&["experiment", "h", "lhs", "note"]);
        t.push(vec!["inverse".into(), Cell::Num(0.125), Cell::Num(1.0 / 3.0), Cell::Missing]).unwrap();
        t.push(vec!["inverse".into(), Cell::Num(0.0625), Cell::Num(2.0f64.sqrt()), "x".into()]).unwrap();
        t
    }

    #[test]
    fn round_trip_is_exact() {
        let t = sample();
        let back = ResultTable::from_csv(&t.to_csv()).unwrap();
        assert_eq!(back, t);
    }

    #[test]
    fn identical_tables_have_zero_deltas() {
        let r = compare_tables(&sample(), &sample()).unwrap();
        assert!(r.is_clean());
        assert!(r.columns.iter().all(|c| c.max_abs == 0.0 && c.max_rel == 0.0));
    }

    #[test]
    fn perturbation_is_flagged() {
        let mut b = sample();
        b.rows[1][2] = Cell::Num(2.0f64.sqrt() + 1e-6);
        let r = compare_tables(&sample(), &b).unwrap();
        assert_eq!(r.flags.len(), 1);
        assert_eq!((r.flags[0].row, r.flags[0].column.as_str()), (2, "lhs"));
    }

    #[test]
    fn schema_mismatches() {
        let mut b = sample();
        b.rows[0][0] = "technique".into();
        assert!(matches!(compare_tables(&sample(), &b), Err(Error::Schema(_))));
        let c = ResultTable::new(&["experiment", "h"]);
        assert!(matches!(compare_tables(&sample(), &c), Err(Error::Schema(_))));
    }

    #[test]
    fn rejects_non_finite_and_ragged_rows() {
        let mut t = ResultTable::new(&["a"]);
        assert!(t.push(vec![Cell::Num(f64::NAN)]).is_err());
        assert!(t.push(vec![Cell::Num(1.0), Cell::Num(2.0)]).is_err());
    }
}
