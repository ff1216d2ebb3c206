//! CSV and JSON emission.

use std::io::Write;

use serde::Serialize;

use crate::routes::{AmplitudeRow, CompareRow, PartitionRow};
use crate::CliError;

/// Version tag shared by the CSV comment line and the JSON `schema` field.
pub const SCHEMA: &str = "rabi-ising/v1";

/// Full precision: 17 significant digits.
fn num(x: f64) -> String {
    format!("{x:.16e}")
}

pub trait CsvRow {
    const HEADER: &'static [&'static str];
    fn fields(&self) -> Vec<String>;
}

impl CsvRow for AmplitudeRow {
    const HEADER: &'static [&'static str] = &[
        "time", "route", "re", "im", "abs", "stderr", "n_used", "m_used", "samples",
    ];
    fn fields(&self) -> Vec<String> {
        vec![
            num(self.time),
            self.route.to_string(),
            num(self.re),
            num(self.im),
            num(self.abs),
            num(self.stderr),
            self.n_used.to_string(),
            self.m_used.to_string(),
            self.samples.to_string(),
        ]
    }
}

impl CsvRow for PartitionRow {
    const HEADER: &'static [&'static str] = &[
        "tau", "spectral", "series", "stderr", "rel_dev", "n_used", "m_used", "samples",
    ];
    fn fields(&self) -> Vec<String> {
        vec![
            num(self.tau),
            num(self.spectral),
            num(self.series),
            num(self.stderr),
            num(self.rel_dev),
            self.n_used.to_string(),
            self.m_used.to_string(),
            self.samples.to_string(),
        ]
    }
}

impl CsvRow for CompareRow {
    const HEADER: &'static [&'static str] = &["time", "check", "value", "tolerance", "pass"];
    fn fields(&self) -> Vec<String> {
        vec![
            num(self.time),
            self.check.clone(),
            num(self.value),
            num(self.tolerance),
            self.pass.to_string(),
        ]
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Fig1Row {
    pub preset: &'static str,
    #[serde(flatten)]
    pub row: AmplitudeRow,
}

impl CsvRow for Fig1Row {
    const HEADER: &'static [&'static str] = &[
        "preset", "time", "route", "re", "im", "abs", "stderr", "n_used", "m_used", "samples",
    ];
    fn fields(&self) -> Vec<String> {
        let mut f = vec![self.preset.to_string()];
        f.extend(self.row.fields());
        f
    }
}

pub fn write_csv<R: CsvRow, W: Write>(command: &str, rows: &[R], out: W) -> Result<(), CliError> {
    let mut out = out;
    writeln!(out, "# {SCHEMA} {command}")?;
    let mut w = csv::Writer::from_writer(out);
    w.write_record(R::HEADER)?;
    for r in rows {
        w.write_record(r.fields())?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Serialize)]
pub struct Document<'a, C: Serialize, R: Serialize> {
    pub schema: &'static str,
    pub command: &'a str,
    pub config: C,
    pub seed: u64,
    pub rows: &'a [R],
    pub warnings: &'a [String],
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pass: Option<bool>,
}

pub fn write_json<C: Serialize, R: Serialize, W: Write>(
    doc: &Document<C, R>,
    mut out: W,
) -> Result<(), CliError> {
    serde_json::to_writer_pretty(&mut out, doc).map_err(std::io::Error::from)?;
    writeln!(out)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn numbers_carry_seventeen_significant_digits() {
        assert_eq!(num(0.1), "1.0000000000000001e-1");
        assert_eq!(num(-2.0), "-2.0000000000000000e0");
        let x = 0.123_456_789_012_345_68_f64;
        assert_eq!(num(x).parse::<f64>().unwrap(), x);
    }

    #[test]
    fn csv_has_version_line_and_header() {
        let rows = vec![CompareRow {
            time: 1.0,
            check: "pair:oracle-series".into(),
            value: 0.5,
            tolerance: 0.02,
            pass: false,
        }];
        let mut buf = Vec::new();
        write_csv("compare", &rows, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "# rabi-ising/v1 compare");
        assert_eq!(lines[1], "time,check,value,tolerance,pass");
        assert!(lines[2].ends_with(",false"));
    }
}
