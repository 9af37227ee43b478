use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::Path;

use nalgebra::{DMatrix, DVector};

use super::config::ExperimentConfig;

/// One CSV row.
#[derive(Debug, Clone, PartialEq)]
pub struct LogRow {
    pub t: usize,
    pub cost: f64,
    pub avg_cost: f64,
    pub state_norm: f64,
    /// Norm of each actuator's total control.
    pub u_norms: Vec<f64>,
    pub failed: bool,
}

/// Ordered `key = value` pairs.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Summary {
    entries: Vec<(String, String)>,
}

impl Summary {
    pub fn set(&mut self, key: &str, value: impl ToString) {
        let value = value.to_string();
        match self.entries.iter_mut().find(|(k, _)| k == key) {
            Some(entry) => entry.1 = value,
            None => self.entries.push((key.to_string(), value)),
        }
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }

    pub fn get_f64(&self, key: &str) -> Option<f64> {
        self.get(key)?.parse().ok()
    }

    pub fn entries(&self) -> &[(String, String)] {
        &self.entries
    }

    pub fn to_text(&self) -> String {
        self.entries
            .iter()
            .fold(String::new(), |mut s, (k, v)| {
                let _ = writeln!(s, "{k} = {v}");
                s
            })
    }
}

/// A complete run: per-step rows, raw trajectories and a summary.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentLog {
    pub config: ExperimentConfig,
    pub rows: Vec<LogRow>,
    /// `x_0 … x_T`.
    pub states: Vec<DVector<f64>>,
    /// Learned control that reached the plant at each step (zero for linear baselines).
    pub learned: Vec<DVector<f64>>,
    /// Total joint control at each step.
    pub controls: Vec<DVector<f64>>,
    pub disturbances: Vec<DVector<f64>>,
    /// Parameters played by each agent at each step; empty for linear baselines.
    pub thetas: Vec<Vec<DMatrix<f64>>>,
    /// Largest gap between an agent's oracle value and the realized cost, per step.
    pub oracle_gap: Vec<Option<f64>>,
    pub summary: Summary,
}

impl ExperimentLog {
    pub fn horizon(&self) -> usize {
        self.rows.len()
    }

    pub fn total_cost(&self) -> f64 {
        self.rows.iter().map(|r| r.cost).sum()
    }

    /// Sum of costs over `t ∈ range`.
    pub fn cost_between(&self, from: usize, to: usize) -> f64 {
        self.rows[from.min(self.rows.len())..to.min(self.rows.len())]
            .iter()
            .map(|r| r.cost)
            .sum()
    }

    pub fn max_state_norm(&self, from: usize, to: usize) -> f64 {
        self.rows[from.min(self.rows.len())..to.min(self.rows.len())]
            .iter()
            .map(|r| r.state_norm)
            .fold(0.0, f64::max)
    }

    pub fn csv_header(&self) -> String {
        let k = self.rows.first().map_or(0, |r| r.u_norms.len());
        let mut h = String::from("t,cost,avg_cost,state_norm");
        for i in 1..=k {
            let _ = write!(h, ",u{i}");
        }
        h.push_str(",failed");
        h
    }

    pub fn to_csv(&self) -> String {
        let mut s = self.csv_header();
        s.push('\n');
        for r in &self.rows {
            let _ = write!(s, "{},{},{},{}", r.t, r.cost, r.avg_cost, r.state_norm);
            for u in &r.u_norms {
                let _ = write!(s, ",{u}");
            }
            let _ = writeln!(s, ",{}", u8::from(r.failed));
        }
        s
    }

    /// Write `<stem>.csv` and `<stem>.summary.txt` into `dir`.
    pub fn persist(&self, dir: &Path, stem: &str) -> io::Result<()> {
        fs::create_dir_all(dir)?;
        fs::write(dir.join(format!("{stem}.csv")), self.to_csv())?;
        fs::write(dir.join(format!("{stem}.summary.txt")), self.summary.to_text())?;
        Ok(())
    }
}
