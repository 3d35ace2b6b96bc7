//! Summary and table output. Every number goes through [`sig12`] so that
//! identical runs produce identical bytes.

use std::fs;
use std::path::Path;

use anyhow::Context;
use serde::Serialize;
use serde_json::Value;

/// `x` rounded to 12 significant digits.
pub fn sig12(x: f64) -> f64 {
    if !x.is_finite() || x == 0.0 {
        return x;
    }
    format!("{x:.11e}").parse().unwrap_or(x)
}

/// CSV text for `x`: 12 significant digits, trailing zeros dropped.
pub fn fmt12(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return x.to_string();
    }
    let s = format!("{x:.11e}");
    let (mantissa, exp) = s.split_once('e').unwrap();
    let mantissa = if mantissa.contains('.') { mantissa.trim_end_matches('0').trim_end_matches('.') } else { mantissa };
    let exp: i32 = exp.parse().unwrap();
    if (-5..12).contains(&exp) {
        // Plain notation reads better in spreadsheets when it is short.
        let plain: f64 = format!("{mantissa}e{exp}").parse().unwrap();
        let text = plain.to_string();
        if text.len() <= 18 {
            return text;
        }
    }
    format!("{mantissa}e{exp}")
}

/// JSON number, rounded; non-finite values become `null`.
pub fn num(x: f64) -> Value {
    serde_json::Number::from_f64(sig12(x)).map(Value::Number).unwrap_or(Value::Null)
}

pub fn nums(xs: &[f64]) -> Value {
    Value::Array(xs.iter().map(|&x| num(x)).collect())
}

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub id: String,
    pub passed: bool,
    pub value: Value,
    pub relation: &'static str,
    pub bound: Value,
}

impl Check {
    pub fn at_most(id: impl Into<String>, value: f64, bound: f64) -> Self {
        Self { id: id.into(), passed: value <= bound, value: num(value), relation: "<=", bound: num(bound) }
    }

    pub fn at_least(id: impl Into<String>, value: f64, bound: f64) -> Self {
        Self { id: id.into(), passed: value >= bound, value: num(value), relation: ">=", bound: num(bound) }
    }

    pub fn above(id: impl Into<String>, value: f64, bound: f64) -> Self {
        Self { id: id.into(), passed: value > bound, value: num(value), relation: ">", bound: num(bound) }
    }

    pub fn below(id: impl Into<String>, value: f64, bound: f64) -> Self {
        Self { id: id.into(), passed: value < bound, value: num(value), relation: "<", bound: num(bound) }
    }

    pub fn within(id: impl Into<String>, value: f64, lo: f64, hi: f64) -> Self {
        Self {
            id: id.into(),
            passed: (lo..=hi).contains(&value),
            value: num(value),
            relation: "in",
            bound: nums(&[lo, hi]),
        }
    }

    pub fn holds(id: impl Into<String>, passed: bool) -> Self {
        Self { id: id.into(), passed, value: Value::Bool(passed), relation: "==", bound: Value::Bool(true) }
    }

    pub fn prefixed(mut self, prefix: &str) -> Self {
        self.id = format!("{prefix}/{}", self.id);
        self
    }
}

#[derive(Debug, Clone)]
pub struct Table {
    pub file: &'static str,
    pub header: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn new(file: &'static str, header: Vec<String>) -> Self {
        Self { file, header, rows: Vec::new() }
    }

    pub fn with_columns(file: &'static str, header: &[&str]) -> Self {
        Self::new(file, header.iter().map(|s| s.to_string()).collect())
    }

    pub fn push(&mut self, row: Vec<f64>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    fn write(&self, dir: &Path) -> anyhow::Result<()> {
        let path = dir.join(self.file);
        let mut w = csv::Writer::from_path(&path).with_context(|| format!("writing {}", path.display()))?;
        w.write_record(&self.header)?;
        for row in &self.rows {
            w.write_record(row.iter().map(|&x| fmt12(x)))?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Coordinate column names `x0, x1, …`.
pub fn coordinate_columns(dim: usize) -> Vec<String> {
    (0..dim).map(|i| format!("x{i}")).collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct Summary {
    pub scenario: String,
    pub command: &'static str,
    pub passed: bool,
    pub checks: Vec<Check>,
    pub results: Value,
}

pub struct Report {
    pub checks: Vec<Check>,
    pub results: Value,
    pub tables: Vec<Table>,
}

impl Report {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn write(&self, dir: &Path, scenario: &str, command: &'static str) -> anyhow::Result<Summary> {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        let summary = Summary {
            scenario: scenario.to_string(),
            command,
            passed: self.passed(),
            checks: self.checks.clone(),
            results: self.results.clone(),
        };
        let mut text = serde_json::to_string_pretty(&summary)?;
        text.push('\n');
        let path = dir.join("summary.json");
        fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
        for table in &self.tables {
            table.write(dir)?;
        }
        Ok(summary)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn twelve_digits() {
        assert_eq!(fmt12(2.0), "2");
        assert_eq!(fmt12(1.0 / 3.0), "0.333333333333");
        assert_eq!(fmt12(-1234.5), "-1234.5");
        assert_eq!(fmt12(6.02214076e23), "6.02214076e23");
        assert_eq!(fmt12(1e-9), "1e-9");
        assert_eq!(fmt12(0.1 + 0.2), "0.3");
        assert_eq!(sig12(0.1 + 0.2), 0.3);
    }

    #[test]
    fn checks_compare() {
        assert!(Check::at_most("a", 1.0, 1.0).passed);
        assert!(!Check::above("a", 1.0, 1.0).passed);
        assert!(Check::within("a", 4.0, 3.5, 4.5).passed);
        assert!(!Check::at_most("a", f64::NAN, 1.0).passed);
        assert_eq!(Check::holds("b", true).prefixed("p").id, "p/b");
    }
}
