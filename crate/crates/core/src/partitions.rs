//! Partition functions over a finite horizon and sets of them.
//!
//! A partition function assigns every time step a label; the comparator
//! in periodic regret must play one arm per label. Two partitions that
//! differ only by a renaming of labels are the same partition, so every
//! [`PartitionFunction`] is stored in canonical first-use order: label `0`
//! is the label of the first step, label `1` the next new label to appear,
//! and so on.
//!
//! Indexing is zero-based throughout: time steps are `0..horizon` and labels
//! are `0..num_labels`. Where a count of elapsed steps is needed (the set
//! `f([t])` of labels seen during the first `t` steps) it is passed as a
//! count in `1..=horizon`.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// How a period `tau` is laid out over time.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum PartitionStyle {
    /// `label(t) = t mod tau` over the global step index.
    Modular,
    /// Each iteration is cut into `tau` contiguous segments labeled in
    /// chronological order; labels repeat every iteration.
    #[default]
    Contiguous,
}

/// A canonical labeling of `horizon` time steps.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PartitionFunction {
    labels: Vec<u32>,
    num_labels: usize,
}

impl PartitionFunction {
    /// Builds a partition from arbitrary label values, relabeling them into
    /// first-use order.
    pub fn from_labels<L: Copy + Ord>(raw: &[L]) -> Result<Self> {
        if raw.is_empty() {
            return Err(Error::Partition("horizon must be at least 1".into()));
        }
        let mut seen = std::collections::BTreeMap::new();
        let mut labels = Vec::with_capacity(raw.len());
        for &value in raw {
            let next = seen.len() as u32;
            let label = *seen.entry(value).or_insert(next);
            labels.push(label);
        }
        Ok(Self {
            num_labels: seen.len(),
            labels,
        })
    }

    /// The single-label partition; the comparator is a fixed arm.
    pub fn constant(horizon: usize) -> Result<Self> {
        Self::from_labels(&vec![0u32; horizon])
    }

    pub fn horizon(&self) -> usize {
        self.labels.len()
    }

    /// `P_f`, the number of distinct labels used.
    pub fn num_labels(&self) -> usize {
        self.num_labels
    }

    /// Canonical label sequence.
    pub fn labels(&self) -> &[u32] {
        &self.labels
    }

    /// Label of step `t` (zero-based). Panics when `t >= horizon`.
    #[inline]
    pub fn label(&self, t: usize) -> usize {
        self.labels[t] as usize
    }

    /// Labels as one-based values, for display and interchange.
    pub fn one_based_labels(&self) -> Vec<u32> {
        self.labels.iter().map(|l| l + 1).collect()
    }

    /// `f([steps])`: labels used by the first `steps` time steps.
    ///
    /// In canonical form this is always a prefix `0..m` of the labels.
    pub fn labels_seen(&self, steps: usize) -> Result<BTreeSet<usize>> {
        Ok((0..self.seen_count(steps)?).collect())
    }

    /// `|f([steps])|`.
    pub fn seen_count(&self, steps: usize) -> Result<usize> {
        if steps == 0 || steps > self.horizon() {
            return Err(Error::TimeOutOfRange {
                t: steps,
                horizon: self.horizon(),
            });
        }
        let max = self.labels[..steps].iter().copied().max().unwrap_or(0);
        Ok(max as usize + 1)
    }

    /// Number of steps carrying each label.
    pub fn label_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.num_labels];
        for &l in &self.labels {
            counts[l as usize] += 1;
        }
        counts
    }
}

/// Builds `f_tau(t) = (t mod tau) + 1` over steps `t = 1..=horizon`, then
/// canonicalizes.
pub fn make_modular_partition(tau: usize, horizon: usize) -> Result<PartitionFunction> {
    if tau == 0 {
        return Err(Error::Partition("period must be at least 1".into()));
    }
    if tau > horizon {
        return Err(Error::Partition(format!(
            "label never used: period {tau} exceeds horizon {horizon}"
        )));
    }
    let raw: Vec<usize> = (1..=horizon).map(|t| (t % tau) + 1).collect();
    PartitionFunction::from_labels(&raw)
}

/// Cuts each iteration of `iteration_length` slots into `tau` contiguous
/// segments. Slot `s` (one-based within the iteration) gets label
/// `ceil(s * tau / iteration_length)`, so segment lengths differ by at most
/// one when `tau` does not divide the iteration.
pub fn make_contiguous_periodic_partition(
    tau: usize,
    iteration_length: usize,
    horizon: usize,
) -> Result<PartitionFunction> {
    if tau == 0 || iteration_length == 0 {
        return Err(Error::Partition(
            "period and iteration length must be at least 1".into(),
        ));
    }
    if tau > iteration_length {
        return Err(Error::Partition(format!(
            "label never used: period {tau} exceeds iteration length {iteration_length}"
        )));
    }
    if horizon == 0 || !horizon.is_multiple_of(iteration_length) {
        return Err(Error::Partition(format!(
            "horizon {horizon} is not a positive multiple of iteration length {iteration_length}"
        )));
    }
    let one_iteration: Vec<u32> = (1..=iteration_length)
        .map(|s| (s * tau).div_ceil(iteration_length) as u32 - 1)
        .collect();
    let labels: Vec<u32> = one_iteration
        .iter()
        .copied()
        .cycle()
        .take(horizon)
        .collect();
    Ok(PartitionFunction {
        labels,
        num_labels: tau,
    })
}

/// Builds the partition of period `tau` in the requested style.
pub fn make_periodic_partition(
    tau: usize,
    style: PartitionStyle,
    iteration_length: usize,
    horizon: usize,
) -> Result<PartitionFunction> {
    match style {
        PartitionStyle::Modular => make_modular_partition(tau, horizon),
        PartitionStyle::Contiguous => {
            make_contiguous_periodic_partition(tau, iteration_length, horizon)
        }
    }
}

/// Whether two partitions are equal up to a renaming of labels.
pub fn canonical_equal(f: &PartitionFunction, g: &PartitionFunction) -> Result<bool> {
    if f.horizon() != g.horizon() {
        return Err(Error::HorizonMismatch {
            expected: f.horizon(),
            actual: g.horizon(),
        });
    }
    // Both sides are stored canonically.
    Ok(f.labels == g.labels)
}

/// A non-empty family of distinct partitions over a common horizon.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PartitionSet {
    functions: Vec<PartitionFunction>,
    max_labels: usize,
}

impl PartitionSet {
    /// Collects partitions, dropping later duplicates (up to relabeling).
    pub fn new(functions: Vec<PartitionFunction>) -> Result<Self> {
        let Some(first) = functions.first() else {
            return Err(Error::Partition("partition set is empty".into()));
        };
        let horizon = first.horizon();
        let mut unique: Vec<PartitionFunction> = Vec::with_capacity(functions.len());
        for f in functions {
            if f.horizon() != horizon {
                return Err(Error::HorizonMismatch {
                    expected: horizon,
                    actual: f.horizon(),
                });
            }
            if !unique.iter().any(|g| g.labels == f.labels) {
                unique.push(f);
            }
        }
        let max_labels = unique.iter().map(|f| f.num_labels()).max().unwrap_or(1);
        Ok(Self {
            functions: unique,
            max_labels,
        })
    }

    pub fn functions(&self) -> &[PartitionFunction] {
        &self.functions
    }

    pub fn len(&self) -> usize {
        self.functions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.functions.is_empty()
    }

    pub fn horizon(&self) -> usize {
        self.functions[0].horizon()
    }

    /// `P`, the largest label count over the set.
    pub fn max_labels(&self) -> usize {
        self.max_labels
    }
}

/// The set `{partition(tau) : tau in periods}`.
pub fn make_period_set(
    periods: &[usize],
    iteration_length: usize,
    horizon: usize,
    style: PartitionStyle,
) -> Result<PartitionSet> {
    let functions = periods
        .iter()
        .map(|&tau| make_periodic_partition(tau, style, iteration_length, horizon))
        .collect::<Result<Vec<_>>>()?;
    PartitionSet::new(functions)
}

/// The set of periods `1..=max_period`.
pub fn make_period_range_set(
    max_period: usize,
    iteration_length: usize,
    horizon: usize,
    style: PartitionStyle,
) -> Result<PartitionSet> {
    if max_period == 0 {
        return Err(Error::Partition("max period must be at least 1".into()));
    }
    let periods: Vec<usize> = (1..=max_period).collect();
    make_period_set(&periods, iteration_length, horizon, style)
}
