//! Per-run tabular records, CSV emission, cross-seed aggregation and
//! long-format plot data.

use std::collections::BTreeMap;
use std::path::Path;

use crate::error::{Error, Result};
use crate::sign::quantile_sorted;

/// Float formatting used in every emitted CSV: 17 significant digits.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

#[derive(Clone, Debug, PartialEq)]
pub struct RecordRow {
    pub step: u64,
    /// Aligned with [`RunRecord::columns`]; `None` is emitted as an empty field.
    pub values: Vec<Option<f64>>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunRecord {
    series: String,
    step_column: String,
    columns: Vec<String>,
    rows: Vec<RecordRow>,
    summary: Vec<(String, f64)>,
}

impl RunRecord {
    pub fn new(series: impl Into<String>, step_column: impl Into<String>, columns: Vec<String>) -> Self {
        RunRecord {
            series: series.into(),
            step_column: step_column.into(),
            columns,
            rows: Vec::new(),
            summary: Vec::new(),
        }
    }

    /// Appends a row. Panics when `values` does not match the column count.
    pub fn push(&mut self, step: u64, values: Vec<Option<f64>>) {
        assert_eq!(values.len(), self.columns.len(), "row width must match the declared columns");
        self.rows.push(RecordRow { step, values });
    }

    pub fn push_summary(&mut self, name: impl Into<String>, value: f64) {
        self.summary.push((name.into(), value));
    }

    pub fn series(&self) -> &str {
        &self.series
    }

    pub fn set_series(&mut self, series: impl Into<String>) {
        self.series = series.into();
    }

    pub fn step_column(&self) -> &str {
        &self.step_column
    }

    pub fn columns(&self) -> &[String] {
        &self.columns
    }

    pub fn rows(&self) -> &[RecordRow] {
        &self.rows
    }

    pub fn summary(&self) -> &[(String, f64)] {
        &self.summary
    }

    pub fn summary_value(&self, name: &str) -> Option<f64> {
        self.summary.iter().find(|(k, _)| k == name).map(|&(_, v)| v)
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    pub fn column(&self, name: &str) -> Option<Vec<Option<f64>>> {
        let i = self.column_index(name)?;
        Some(self.rows.iter().map(|r| r.values[i]).collect())
    }

    /// Last non-empty value of a column.
    pub fn last_value(&self, name: &str) -> Option<f64> {
        let i = self.column_index(name)?;
        self.rows.iter().rev().find_map(|r| r.values[i])
    }

    /// Fails on the first NaN or infinite value, naming the column.
    pub fn check_finite(&self) -> Result<()> {
        for row in &self.rows {
            for (i, v) in row.values.iter().enumerate() {
                if let Some(v) = v {
                    if !v.is_finite() {
                        return Err(Error::Config(format!(
                            "non-finite value {v} in column '{}' at {} {}",
                            self.columns[i], self.step_column, row.step
                        )));
                    }
                }
            }
        }
        for (k, v) in &self.summary {
            if !v.is_finite() {
                return Err(Error::Config(format!("non-finite summary value {v} for '{k}'")));
            }
        }
        Ok(())
    }

    pub fn write_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec![self.step_column.clone()];
        header.extend(self.columns.iter().cloned());
        w.write_record(&header)?;
        for row in &self.rows {
            let mut fields = vec![row.step.to_string()];
            fields.extend(row.values.iter().map(|v| v.map(fmt_f64).unwrap_or_default()));
            w.write_record(&fields)?;
        }
        w.flush().map_err(|e| Error::io("<csv>", e))?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> Result<String> {
        let mut buf = Vec::new();
        self.write_csv(&mut buf)?;
        Ok(String::from_utf8(buf).expect("csv output is UTF-8"))
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_csv(std::io::BufWriter::new(file))
    }

    /// Reads back a file written by [`RunRecord::write_csv`].
    pub fn read_csv(path: &Path, series: &str) -> Result<RunRecord> {
        let mut r = csv::Reader::from_path(path)?;
        let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
        let (step_column, columns) = header
            .split_first()
            .ok_or_else(|| Error::Config(format!("{} has no header", path.display())))?;
        let mut record = RunRecord::new(series, step_column.clone(), columns.to_vec());
        for line in r.records() {
            let line = line?;
            let step = line[0]
                .parse::<u64>()
                .map_err(|e| Error::Config(format!("bad step '{}': {e}", &line[0])))?;
            let values = line
                .iter()
                .skip(1)
                .map(|f| {
                    if f.is_empty() {
                        Ok(None)
                    } else {
                        f.parse::<f64>()
                            .map(Some)
                            .map_err(|e| Error::Config(format!("bad value '{f}': {e}")))
                    }
                })
                .collect::<Result<Vec<_>>>()?;
            record.push(step, values);
        }
        Ok(record)
    }
}

/// Cross-seed statistics for one `(series, step, metric)` cell.
#[derive(Clone, Debug, PartialEq)]
pub struct AggregateRow {
    pub series: String,
    pub step: u64,
    pub metric: String,
    pub n: usize,
    pub mean: f64,
    pub median: f64,
    /// Sample standard deviation over `sqrt(n)`; zero when `n = 1`.
    pub stderr: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Stats {
    pub n: usize,
    pub mean: f64,
    pub median: f64,
    pub stderr: f64,
}

pub fn stats(values: &[f64]) -> Option<Stats> {
    if values.is_empty() {
        return None;
    }
    let n = values.len();
    let mean = values.iter().sum::<f64>() / n as f64;
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let stderr = if n > 1 {
        let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64;
        (var / n as f64).sqrt()
    } else {
        0.0
    };
    Some(Stats {
        n,
        mean,
        median: quantile_sorted(&sorted, 0.5),
        stderr,
    })
}

/// Groups rows by `(series, step)` across records and summarizes every column.
/// Empty cells are skipped; cells with no values produce no row.
pub fn aggregate(records: &[RunRecord]) -> Result<Vec<AggregateRow>> {
    if records.is_empty() {
        return Err(Error::EmptyWindow);
    }
    let mut cells: BTreeMap<(String, u64, usize, String), Vec<f64>> = BTreeMap::new();
    let mut order: Vec<String> = Vec::new();
    for rec in records {
        for (ci, name) in rec.columns.iter().enumerate() {
            let pos = match order.iter().position(|c| c == name) {
                Some(p) => p,
                None => {
                    order.push(name.clone());
                    order.len() - 1
                }
            };
            for row in &rec.rows {
                if let Some(v) = row.values[ci] {
                    cells
                        .entry((rec.series.clone(), row.step, pos, name.clone()))
                        .or_default()
                        .push(v);
                }
            }
        }
    }
    Ok(cells
        .into_iter()
        .filter_map(|((series, step, _, metric), vals)| {
            stats(&vals).map(|s| AggregateRow {
                series,
                step,
                metric,
                n: s.n,
                mean: s.mean,
                median: s.median,
                stderr: s.stderr,
            })
        })
        .collect())
}

pub fn write_aggregate_csv<W: std::io::Write>(rows: &[AggregateRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["series", "step", "metric", "n", "mean", "median", "stderr"])?;
    for r in rows {
        w.write_record([
            r.series.clone(),
            r.step.to_string(),
            r.metric.clone(),
            r.n.to_string(),
            fmt_f64(r.mean),
            fmt_f64(r.median),
            fmt_f64(r.stderr),
        ])?;
    }
    w.flush().map_err(|e| Error::io("<csv>", e))?;
    Ok(())
}

#[derive(Clone, Debug, PartialEq)]
pub struct PlotPoint {
    pub series: String,
    pub x: u64,
    pub y: f64,
}

/// One `(series, x, y)` row per record row that has a value in `metric`.
pub fn emit_plotdata(records: &[RunRecord], metric: &str) -> Result<Vec<PlotPoint>> {
    if records.is_empty() {
        return Err(Error::EmptyWindow);
    }
    let axis = records[0].step_column();
    let mut out = Vec::new();
    for rec in records {
        if rec.step_column() != axis {
            return Err(Error::Config(format!(
                "series '{}' uses step axis '{}', expected '{axis}'",
                rec.series,
                rec.step_column()
            )));
        }
        let i = rec.column_index(metric).ok_or_else(|| Error::UnknownId {
            kind: "metric",
            id: metric.to_string(),
        })?;
        out.extend(rec.rows.iter().filter_map(|row| {
            row.values[i].map(|y| PlotPoint {
                series: rec.series.clone(),
                x: row.step,
                y,
            })
        }));
    }
    Ok(out)
}

pub fn write_plotdata_csv<W: std::io::Write>(points: &[PlotPoint], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["series", "x", "y"])?;
    for p in points {
        w.write_record([p.series.clone(), p.x.to_string(), fmt_f64(p.y)])?;
    }
    w.flush().map_err(|e| Error::io("<csv>", e))?;
    Ok(())
}
