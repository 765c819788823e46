//! Lower-triangular performance matrix and the summary metrics over it.
//!
//! Row `i` holds the accuracies on tasks `1..=i` measured right after
//! training on task `i`. Indices in the public API are 1-based task
//! ordinals.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Default)]
pub struct PerformanceMatrix {
    rows: Vec<Vec<f64>>,
}

impl PerformanceMatrix {
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let mut m = PerformanceMatrix::default();
        for r in rows {
            m.push_row(r)?;
        }
        Ok(m)
    }

    /// Appends the row for the next task; it must have one more entry than
    /// the previous row.
    pub fn push_row(&mut self, row: Vec<f64>) -> Result<()> {
        let want = self.rows.len() + 1;
        if row.len() != want {
            return Err(Error::InvalidArgument(format!("row {want} needs {want} entries, got {}", row.len())));
        }
        if let Some(v) = row.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::InvalidArgument(format!("accuracy {v} outside [0, 1]")));
        }
        self.rows.push(row);
        Ok(())
    }

    pub fn num_tasks(&self) -> usize {
        self.rows.len()
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    /// `m_{i,j}`, 1-based, defined for `j <= i`.
    pub fn get(&self, i: usize, j: usize) -> Option<f64> {
        self.rows.get(i.checked_sub(1)?)?.get(j.checked_sub(1)?).copied()
    }

    fn check(&self, k: usize) -> Result<()> {
        if k == 0 || k > self.rows.len() {
            return Err(Error::InvalidArgument(format!("task {k} outside 1..={}", self.rows.len())));
        }
        Ok(())
    }

    /// Average accuracy over tasks `1..=k` after learning task `k`.
    pub fn ap(&self, k: usize) -> Result<f64> {
        self.check(k)?;
        Ok(self.rows[k - 1].iter().sum::<f64>() / k as f64)
    }

    /// Mean of `ap(1..=k)`.
    pub fn ap_mean(&self, k: usize) -> Result<f64> {
        self.check(k)?;
        let total: f64 = (1..=k).map(|i| self.ap(i)).sum::<Result<f64>>()?;
        Ok(total / k as f64)
    }

    /// Backward transfer after task `k`; `None` at `k = 1`, where no earlier
    /// task exists.
    pub fn bwt(&self, k: usize) -> Result<Option<f64>> {
        self.check(k)?;
        if k == 1 {
            return Ok(None);
        }
        let row = &self.rows[k - 1];
        let sum: f64 = (0..k - 1).map(|i| row[i] - self.rows[i][i]).sum();
        Ok(Some(sum / (k - 1) as f64))
    }

    pub fn report(&self) -> MetricsReport {
        let ks = 1..=self.rows.len();
        MetricsReport {
            ap: ks.clone().map(|k| self.ap(k).unwrap()).collect(),
            ap_mean: ks.clone().map(|k| self.ap_mean(k).unwrap()).collect(),
            bwt: ks.map(|k| self.bwt(k).unwrap()).collect(),
        }
    }

    /// One line per task, six significant digits per entry.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(|&v| format_sig(v, 6)).collect();
            writeln!(out, "{}", cells.join(",")).unwrap();
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut m = PerformanceMatrix::default();
        for (lineno, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let row = line
                .split(',')
                .map(|s| {
                    s.trim()
                        .parse::<f64>()
                        .map_err(|_| Error::InvalidArgument(format!("line {}: `{s}` is not a number", lineno + 1)))
                })
                .collect::<Result<Vec<_>>>()?;
            m.push_row(row)
                .map_err(|e| Error::InvalidArgument(format!("line {}: {e}", lineno + 1)))?;
        }
        Ok(m)
    }
}

/// Per-checkpoint metrics; `bwt[0]` is always absent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub ap: Vec<f64>,
    pub ap_mean: Vec<f64>,
    pub bwt: Vec<Option<f64>>,
}

impl MetricsReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("metrics serialize") + "\n"
    }
}

/// Renders an optional metric, with absent values as `N/A`.
pub fn display_metric(v: Option<f64>) -> String {
    v.map_or_else(|| "N/A".to_string(), |v| format_sig(v, 6))
}

/// Fixed-point rendering with `sig` significant digits.
pub fn format_sig(v: f64, sig: usize) -> String {
    if v == 0.0 || !v.is_finite() {
        return format!("{:.*}", sig.saturating_sub(1), v);
    }
    let magnitude = v.abs().log10().floor() as i64;
    let decimals = (sig as i64 - 1 - magnitude).max(0) as usize;
    let s = format!("{v:.decimals$}");
    // rounding may carry into a new digit, e.g. 0.9999996 -> 1.000000
    let digits = s.chars().filter(char::is_ascii_digit).skip_while(|&c| c == '0').count();
    if digits > sig && decimals > 0 {
        format!("{v:.prec$}", prec = decimals - 1)
    } else {
        s
    }
}
