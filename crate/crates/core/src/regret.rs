//! Offline comparators and regret from a full reward table.
//!
//! All argmax choices break ties toward the lowest index so witnesses are
//! reproducible.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::partitions::{PartitionFunction, PartitionSet};

/// Rewards `x_i(t)` of every arm at every step, in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct RewardMatrix {
    num_arms: usize,
    horizon: usize,
    /// Row-major by arm: `values[arm * horizon + t]`.
    values: Vec<f64>,
}

impl RewardMatrix {
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let num_arms = rows.len();
        if num_arms == 0 {
            return Err(Error::RewardMatrix("no arms".into()));
        }
        let horizon = rows[0].len();
        if rows.iter().any(|r| r.len() != horizon) {
            return Err(Error::RewardMatrix("rows have different lengths".into()));
        }
        let values: Vec<f64> = rows.into_iter().flatten().collect();
        if let Some(bad) = values.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::RewardMatrix(format!("reward {bad} outside [0, 1]")));
        }
        Ok(Self {
            num_arms,
            horizon,
            values,
        })
    }

    pub fn zeros(num_arms: usize, horizon: usize) -> Self {
        Self {
            num_arms,
            horizon,
            values: vec![0.0; num_arms * horizon],
        }
    }

    pub fn num_arms(&self) -> usize {
        self.num_arms
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    #[inline]
    pub fn get(&self, arm: usize, t: usize) -> f64 {
        self.values[arm * self.horizon + t]
    }

    /// Sets one entry, clipping into `[0, 1]`.
    pub fn set(&mut self, arm: usize, t: usize, value: f64) {
        self.values[arm * self.horizon + t] = value.clamp(0.0, 1.0);
    }

    pub fn row(&self, arm: usize) -> &[f64] {
        &self.values[arm * self.horizon..(arm + 1) * self.horizon]
    }

    /// CSV layout: one line per arm, one column per step, no header.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::WriterBuilder::new()
            .has_headers(false)
            .from_writer(writer);
        for arm in 0..self.num_arms {
            w.write_record(self.row(arm).iter().map(|v| v.to_string()))?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut r = csv::ReaderBuilder::new()
            .has_headers(false)
            .from_reader(reader);
        let mut rows = Vec::new();
        for record in r.records() {
            let record = record?;
            let row = record
                .iter()
                .map(|s| {
                    s.trim()
                        .parse::<f64>()
                        .map_err(|e| Error::RewardMatrix(format!("`{s}`: {e}")))
                })
                .collect::<Result<Vec<_>>>()?;
            rows.push(row);
        }
        Self::from_rows(rows)
    }
}

/// Best comparator found and how it compares with an algorithm's total.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegretReport {
    pub opt_total: f64,
    pub alg_total: f64,
    pub regret: f64,
    pub witness: Witness,
}

/// The maximizing partition (index into the set, when one applies) and the
/// arm chosen for each of its labels.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Witness {
    pub partition: Option<usize>,
    pub arms: Vec<usize>,
}

/// Comparator restricted to one fixed arm.
pub fn weak_opt(rm: &RewardMatrix) -> (usize, f64) {
    let mut best = (0, f64::NEG_INFINITY);
    for arm in 0..rm.num_arms() {
        let total: f64 = rm.row(arm).iter().sum();
        if total > best.1 {
            best = (arm, total);
        }
    }
    best
}

/// Comparator free to pick any arm at every step.
pub fn full_opt(rm: &RewardMatrix) -> f64 {
    (0..rm.horizon())
        .map(|t| {
            (0..rm.num_arms())
                .map(|arm| rm.get(arm, t))
                .fold(f64::NEG_INFINITY, f64::max)
        })
        .sum()
}

/// Comparator playing one arm per label of `f`.
pub fn periodic_opt(f: &PartitionFunction, rm: &RewardMatrix) -> Result<(Witness, f64)> {
    if f.horizon() != rm.horizon() {
        return Err(Error::HorizonMismatch {
            expected: rm.horizon(),
            actual: f.horizon(),
        });
    }
    let k = rm.num_arms();
    let mut label_sums = vec![0.0; f.num_labels() * k];
    for arm in 0..k {
        for (t, x) in rm.row(arm).iter().enumerate() {
            label_sums[f.label(t) * k + arm] += x;
        }
    }
    let mut arms = Vec::with_capacity(f.num_labels());
    let mut total = 0.0;
    for sums in label_sums.chunks(k) {
        let (arm, best) = sums
            .iter()
            .enumerate()
            .fold(
                (0, f64::NEG_INFINITY),
                |acc, (i, &s)| if s > acc.1 { (i, s) } else { acc },
            );
        arms.push(arm);
        total += best;
    }
    Ok((
        Witness {
            partition: None,
            arms,
        },
        total,
    ))
}

/// Best comparator over every partition in the set.
pub fn generalized_periodic_opt(set: &PartitionSet, rm: &RewardMatrix) -> Result<(Witness, f64)> {
    let mut best: Option<(Witness, f64)> = None;
    for (fi, f) in set.functions().iter().enumerate() {
        let (mut witness, total) = periodic_opt(f, rm)?;
        if best.as_ref().is_none_or(|(_, b)| total > *b) {
            witness.partition = Some(fi);
            best = Some((witness, total));
        }
    }
    best.ok_or_else(|| Error::Partition("partition set is empty".into()))
}

/// Regret of a realized reward trace against a comparator total.
pub fn regret_of_trace(opt_total: f64, witness: Witness, trace: &[f64]) -> RegretReport {
    let alg_total: f64 = trace.iter().sum();
    RegretReport {
        opt_total,
        alg_total,
        regret: opt_total - alg_total,
        witness,
    }
}
