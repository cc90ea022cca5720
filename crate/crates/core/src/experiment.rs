//! Experiment orchestration: many seeded runs of a scenario, aggregated
//! into a [`RunSummary`] and optionally written out as per-run CSV plus a
//! summary JSON.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::netsim::{run_simulation, SimulationOutput, StepRecord};
use crate::policies::{NumericMode, PolicyKind, Variant};
use crate::regret::generalized_periodic_opt;
use crate::scenario::{CompiledScenario, PeriodSetSpec, Scenario};
use crate::seeds::derive_seed;

/// Bumped whenever the per-run CSV columns change.
pub const CSV_FORMAT_VERSION: u32 = 1;
/// Bumped whenever the summary JSON layout changes.
pub const SUMMARY_FORMAT_VERSION: u32 = 1;

/// Period sets of the standard sweep.
pub const SWEEP_PERIOD_SETS: &[&[usize]] = &[
    &[1],
    &[4],
    &[1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12, 13, 14, 15],
    &[
        1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12, 13, 14, 15, 16, 17, 18, 19, 20, 21, 22, 23, 24,
    ],
    &[
        1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12, 13, 14, 15, 16, 17, 18, 19, 20, 21, 22, 23, 24, 25,
        26, 27, 28, 29, 30, 31, 32, 33, 34, 35, 36, 37, 38, 39, 40, 41, 42, 43, 44, 45,
    ],
];

const MBPS_SLOT_TO_GB: f64 = 60.0 / 8.0 / 1000.0;

/// Converts summed per-slot Mbps into GB, one slot being one minute.
pub fn mbps_slots_to_gb(mbps: f64) -> f64 {
    mbps * MBPS_SLOT_TO_GB
}

/// Seed of run `index` under `master`.
pub fn run_seed(master: u64, index: usize) -> u64 {
    derive_seed(master, index as u64)
}

#[derive(Debug, Clone)]
pub struct ExperimentOptions {
    pub runs: usize,
    /// Worker threads; 0 lets the pool decide.
    pub parallelism: usize,
    /// Compute regret against the best periodic comparator. Needs the full
    /// counterfactual reward table of every device in memory.
    pub regret: bool,
}

impl ExperimentOptions {
    pub fn new(runs: usize) -> Self {
        Self {
            runs,
            parallelism: 0,
            regret: true,
        }
    }

    pub fn with_parallelism(mut self, parallelism: usize) -> Self {
        self.parallelism = parallelism;
        self
    }

    pub fn with_regret(mut self, regret: bool) -> Self {
        self.regret = regret;
        self
    }
}

/// Median, spread and range of a sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stats {
    pub count: usize,
    pub mean: f64,
    pub median: f64,
    /// Population standard deviation.
    pub std: f64,
    pub min: f64,
    pub max: f64,
}

impl Stats {
    pub fn of(values: &[f64]) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::Simulation("statistics of an empty sample".into()));
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        let mut sorted = values.to_vec();
        sorted.sort_by(|a, b| a.total_cmp(b));
        let mid = sorted.len() / 2;
        let median = if sorted.len() % 2 == 1 {
            sorted[mid]
        } else {
            (sorted[mid - 1] + sorted[mid]) / 2.0
        };
        Ok(Self {
            count: values.len(),
            mean,
            median,
            std: var.sqrt(),
            min: sorted[0],
            max: sorted[sorted.len() - 1],
        })
    }
}

/// Regret of one device against the best comparator in the period set,
/// on the normalized reward scale.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviceRegret {
    pub opt_total: f64,
    pub alg_total: f64,
    pub regret: f64,
    /// Index of the maximizing partition in the period set.
    pub partition: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub index: usize,
    pub seed: u64,
    pub cumulative_gb: Vec<f64>,
    /// Std of the cumulative gain across devices within this run.
    pub fairness_std_gb: f64,
    pub distance_by_iteration: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub regret: Option<Vec<DeviceRegret>>,
    pub fallbacks: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegretSummary {
    pub mean_regret: f64,
    pub max_regret: f64,
    pub mean_opt_total: f64,
    pub mean_alg_total: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub format_version: u32,
    pub scenario: String,
    pub policy: String,
    pub variant: Variant,
    pub numeric: NumericMode,
    pub devices: usize,
    pub networks: usize,
    pub iteration_length: usize,
    pub iterations: usize,
    pub master_seed: u64,
    /// Per-device cumulative GB pooled over devices and runs.
    pub cumulative_gb: Stats,
    /// Mean over runs of the within-run std across devices.
    pub mean_fairness_std_gb: f64,
    /// Mean over runs of each iteration's mean distance.
    pub distance_by_iteration: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub regret: Option<RegretSummary>,
    pub fallbacks: usize,
    pub runs: Vec<RunResult>,
}

impl RunSummary {
    pub fn first_iteration_distance(&self) -> f64 {
        self.distance_by_iteration.first().copied().unwrap_or(0.0)
    }

    pub fn final_iteration_distance(&self) -> f64 {
        self.distance_by_iteration.last().copied().unwrap_or(0.0)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Per-run CSV header for `devices` devices and the given network ids.
pub fn csv_header(devices: usize, network_ids: &[String]) -> Vec<String> {
    let mut h = vec!["slot".to_string(), "iteration".to_string()];
    h.extend((0..devices).map(|d| format!("choice_{d}")));
    h.extend((0..devices).map(|d| format!("gain_{d}")));
    h.extend(["min_rate", "opt_min", "distance_pct"].map(String::from));
    h.extend(network_ids.iter().map(|id| format!("prob_{id}")));
    h
}

/// Writes the step records of one run as CSV.
pub fn write_records_csv<W: Write>(
    writer: W,
    devices: usize,
    network_ids: &[String],
    records: &[StepRecord],
) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(csv_header(devices, network_ids))?;
    let mut row: Vec<String> = Vec::new();
    for r in records {
        row.clear();
        row.push(r.slot.to_string());
        row.push(r.iteration.to_string());
        row.extend(r.choices.iter().map(|c| c.to_string()));
        row.extend(r.gains.iter().map(|g| g.to_string()));
        row.push(r.min_rate.to_string());
        row.push(r.optimal_min_rate.to_string());
        row.push(r.distance_pct.to_string());
        row.extend(r.combined_probs.iter().map(|p| p.to_string()));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

fn device_regrets(
    compiled: &CompiledScenario,
    out: &SimulationOutput,
) -> Result<Option<Vec<DeviceRegret>>> {
    let Some(cf) = &out.counterfactual else {
        return Ok(None);
    };
    cf.iter()
        .zip(&out.realized_rewards)
        .map(|(rm, realized)| {
            let (witness, opt_total) = generalized_periodic_opt(&compiled.partitions, rm)?;
            let alg_total: f64 = realized.iter().sum();
            Ok(DeviceRegret {
                opt_total,
                alg_total,
                regret: opt_total - alg_total,
                partition: witness.partition.unwrap_or(0),
            })
        })
        .collect::<Result<Vec<_>>>()
        .map(Some)
}

fn execute_run(
    compiled: &CompiledScenario,
    index: usize,
    options: &ExperimentOptions,
    out_dir: Option<&Path>,
) -> Result<RunResult> {
    let seed = run_seed(compiled.scenario.master_seed, index);
    let out = run_simulation(compiled, seed, options.regret)?;
    if let Some(dir) = out_dir {
        let ids: Vec<String> = compiled
            .scenario
            .networks
            .iter()
            .map(|n| n.id.clone())
            .collect();
        let file = File::create(dir.join(format!("run_{index:03}.csv")))?;
        write_records_csv(
            BufWriter::new(file),
            compiled.num_devices(),
            &ids,
            &out.records,
        )?;
    }
    let cumulative_gb: Vec<f64> = out
        .cumulative_mbps
        .iter()
        .map(|&m| mbps_slots_to_gb(m))
        .collect();
    Ok(RunResult {
        index,
        seed,
        fairness_std_gb: Stats::of(&cumulative_gb)?.std,
        cumulative_gb,
        distance_by_iteration: out.distance_by_iteration(compiled.scenario.iteration_length),
        regret: device_regrets(compiled, &out)?,
        fallbacks: out.fallbacks,
    })
}

fn in_pool<T: Send>(parallelism: usize, job: impl FnOnce() -> T + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(parallelism)
        .build()
        .map_err(|e| Error::Simulation(format!("worker pool: {e}")))?;
    Ok(pool.install(job))
}

/// Runs the scenario `options.runs` times with seeds derived from its
/// master seed and aggregates the results.
///
/// With `out_dir`, writes `run_NNN.csv` for every run and `summary.json`.
/// Run `i` always gets the same seed, so per-run output does not depend on
/// scheduling.
pub fn run_experiment(
    scenario: &Scenario,
    options: &ExperimentOptions,
    out_dir: Option<&Path>,
) -> Result<RunSummary> {
    if options.runs == 0 {
        return Err(Error::config("runs", "must be at least 1"));
    }
    let compiled = scenario.compile()?;
    if let Some(dir) = out_dir {
        fs::create_dir_all(dir)?;
    }
    let runs = in_pool(options.parallelism, || {
        (0..options.runs)
            .into_par_iter()
            .map(|i| execute_run(&compiled, i, options, out_dir))
            .collect::<Result<Vec<_>>>()
    })??;
    let summary = summarize(&compiled, runs)?;
    if let Some(dir) = out_dir {
        fs::write(dir.join("summary.json"), summary.to_json()? + "\n")?;
    }
    Ok(summary)
}

fn summarize(compiled: &CompiledScenario, runs: Vec<RunResult>) -> Result<RunSummary> {
    let s = &compiled.scenario;
    let pooled: Vec<f64> = runs
        .iter()
        .flat_map(|r| r.cumulative_gb.iter().copied())
        .collect();
    let n_runs = runs.len() as f64;
    let mut distance = vec![0.0; s.iterations];
    for r in &runs {
        for (acc, d) in distance.iter_mut().zip(&r.distance_by_iteration) {
            *acc += d / n_runs;
        }
    }
    let regret = if runs.iter().all(|r| r.regret.is_some()) {
        let all: Vec<&DeviceRegret> = runs
            .iter()
            .flat_map(|r| r.regret.iter().flatten())
            .collect();
        let n = all.len() as f64;
        Some(RegretSummary {
            mean_regret: all.iter().map(|d| d.regret).sum::<f64>() / n,
            max_regret: all
                .iter()
                .map(|d| d.regret)
                .fold(f64::NEG_INFINITY, f64::max),
            mean_opt_total: all.iter().map(|d| d.opt_total).sum::<f64>() / n,
            mean_alg_total: all.iter().map(|d| d.alg_total).sum::<f64>() / n,
        })
    } else {
        None
    };
    Ok(RunSummary {
        format_version: SUMMARY_FORMAT_VERSION,
        scenario: s.name.clone(),
        policy: s.policy.kind.name().to_string(),
        variant: s.policy.variant,
        numeric: s.policy.numeric,
        devices: compiled.num_devices(),
        networks: compiled.num_networks(),
        iteration_length: s.iteration_length,
        iterations: s.iterations,
        master_seed: s.master_seed,
        cumulative_gb: Stats::of(&pooled)?,
        mean_fairness_std_gb: runs.iter().map(|r| r.fairness_std_gb).sum::<f64>() / n_runs,
        distance_by_iteration: distance,
        regret,
        fallbacks: runs.iter().map(|r| r.fallbacks).sum(),
        runs,
    })
}

/// Several policies run on the same environment seeds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyComparison {
    pub summaries: Vec<RunSummary>,
}

impl PolicyComparison {
    pub fn policies(&self) -> Vec<&str> {
        self.summaries.iter().map(|s| s.policy.as_str()).collect()
    }

    /// One row per iteration: the iteration number, then each policy's mean
    /// distance.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header = vec!["iteration".to_string()];
        header.extend(self.policies().iter().map(|p| p.to_string()));
        w.write_record(&header)?;
        let iterations = self
            .summaries
            .first()
            .map_or(0, |s| s.distance_by_iteration.len());
        for it in 0..iterations {
            let mut row = vec![(it + 1).to_string()];
            row.extend(
                self.summaries
                    .iter()
                    .map(|s| s.distance_by_iteration[it].to_string()),
            );
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Runs every policy in `kinds` on the scenario. The master seed is shared,
/// so every policy faces the same bandwidth draws.
///
/// With `out_dir`, each policy gets a subdirectory named after it and the
/// aligned series go to `comparison.csv`.
pub fn compare_policies(
    scenario: &Scenario,
    kinds: &[PolicyKind],
    options: &ExperimentOptions,
    out_dir: Option<&Path>,
) -> Result<PolicyComparison> {
    if kinds.is_empty() {
        return Err(Error::config("policies", "no policy to compare"));
    }
    let mut summaries = Vec::with_capacity(kinds.len());
    for kind in kinds {
        let mut s = scenario.clone();
        s.policy.kind = *kind;
        let dir = out_dir.map(|d| d.join(kind.name()));
        summaries.push(run_experiment(&s, options, dir.as_deref())?);
    }
    let comparison = PolicyComparison { summaries };
    if let Some(dir) = out_dir {
        comparison.write_csv(BufWriter::new(File::create(dir.join("comparison.csv"))?))?;
    }
    Ok(comparison)
}

/// Short label for a period set: `1`, `4`, `1-15`.
pub fn period_set_label(periods: &[usize]) -> String {
    match periods {
        [p] => p.to_string(),
        [first, .., last] if periods.windows(2).all(|w| w[1] == w[0] + 1) => {
            format!("{first}-{last}")
        }
        _ => periods
            .iter()
            .map(|p| p.to_string())
            .collect::<Vec<_>>()
            .join("_"),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepEntry {
    pub periods: Vec<usize>,
    pub label: String,
    pub summary: RunSummary,
}

/// Runs the scenario once per period set, keeping the partition style the
/// scenario already uses.
///
/// With `out_dir`, each set gets a `periods_<label>` subdirectory and the
/// per-iteration distances go to `sweep.csv`.
pub fn period_sweep(
    scenario: &Scenario,
    sets: &[&[usize]],
    options: &ExperimentOptions,
    out_dir: Option<&Path>,
) -> Result<Vec<SweepEntry>> {
    let style = match &scenario.period_set {
        PeriodSetSpec::Range { style, .. } | PeriodSetSpec::Periods { style, .. } => *style,
        PeriodSetSpec::Explicit { .. } => Default::default(),
    };
    let mut entries = Vec::with_capacity(sets.len());
    for periods in sets {
        let mut s = scenario.clone();
        s.period_set = PeriodSetSpec::Periods {
            periods: periods.to_vec(),
            style,
        };
        let label = period_set_label(periods);
        let dir = out_dir.map(|d| d.join(format!("periods_{label}")));
        let summary = run_experiment(&s, options, dir.as_deref())?;
        entries.push(SweepEntry {
            periods: periods.to_vec(),
            label,
            summary,
        });
    }
    if let Some(dir) = out_dir {
        let comparison = PolicyComparison {
            summaries: entries
                .iter()
                .map(|e| RunSummary {
                    policy: format!("periods_{}", e.label),
                    ..e.summary.clone()
                })
                .collect(),
        };
        comparison.write_csv(BufWriter::new(File::create(dir.join("sweep.csv"))?))?;
    }
    Ok(entries)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stats_of_small_samples() {
        let s = Stats::of(&[3.0, 1.0, 2.0]).unwrap();
        assert_eq!((s.median, s.min, s.max, s.mean), (2.0, 1.0, 3.0, 2.0));
        assert!((s.std - (2.0f64 / 3.0).sqrt()).abs() < 1e-15);
        assert_eq!(Stats::of(&[1.0, 4.0]).unwrap().median, 2.5);
        assert!(Stats::of(&[]).is_err());
    }

    #[test]
    fn labels_for_period_sets() {
        assert_eq!(period_set_label(&[1]), "1");
        assert_eq!(period_set_label(&[1, 2, 3]), "1-3");
        assert_eq!(period_set_label(&[2, 5]), "2_5");
    }

    #[test]
    fn gb_conversion() {
        // 10 Mbps for one minute is 75 MB
        assert!((mbps_slots_to_gb(10.0) - 0.075).abs() < 1e-15);
    }

    #[test]
    fn header_layout() {
        let h = csv_header(2, &["a".into(), "b".into(), "c".into()]);
        assert_eq!(
            h.join(","),
            "slot,iteration,choice_0,choice_1,gain_0,gain_1,min_rate,opt_min,distance_pct,prob_a,prob_b,prob_c"
        );
    }
}
