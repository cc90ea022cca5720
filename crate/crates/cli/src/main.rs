use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use pexp4_core::experiment::{
    compare_policies, period_sweep, run_experiment, ExperimentOptions, RunSummary,
    SWEEP_PERIOD_SETS,
};
use pexp4_core::policies::{NumericMode, PolicyKind, Variant};
use pexp4_core::scenario::{PeriodSetSpec, Scenario};
use pexp4_core::Error;

/// Run network-selection experiments with Periodic EXP4 and its baselines.
#[derive(Parser)]
#[command(name = "pexp4", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one policy over several seeds and summarize.
    Run(RunArgs),
    /// Run several policies on the same environment seeds.
    Compare {
        #[command(flatten)]
        common: RunArgs,
        /// Comma-separated policies to compare.
        #[arg(
            long,
            value_delimiter = ',',
            default_value = "periodic_exp4,exp3,optimal_random"
        )]
        policies: Vec<String>,
    },
    /// Run the standard period-set sweep: {1}, {4}, {1..15}, {1..24}, {1..45}.
    Sweep(RunArgs),
    /// Print a scenario as JSON, after applying any overrides.
    ShowScenario(RunArgs),
    /// List the built-in scenarios.
    ListScenarios,
}

#[derive(Args)]
struct RunArgs {
    /// Built-in scenario name or path to a JSON scenario file.
    #[arg(long, default_value = "discrete")]
    scenario: String,
    /// Policy every device runs; overrides the scenario's.
    #[arg(long)]
    policy: Option<String>,
    /// Number of seeded runs; defaults to the scenario's.
    #[arg(long)]
    runs: Option<usize>,
    /// Master seed; run seeds are derived from it.
    #[arg(long)]
    seed: Option<u64>,
    /// Number of iterations (repetitions of the base pattern).
    #[arg(long)]
    iterations: Option<usize>,
    /// Use periods 1..=N as the period set.
    #[arg(long)]
    period_max: Option<usize>,
    #[arg(long, value_enum)]
    variant: Option<VariantArg>,
    #[arg(long, value_enum)]
    numeric: Option<NumericArg>,
    /// Directory for per-run CSVs and the summary JSON.
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// Worker threads for independent runs; 0 picks automatically.
    #[arg(long, default_value_t = 0)]
    parallel: usize,
    /// Skip the regret computation (saves memory on long horizons).
    #[arg(long)]
    no_regret: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum VariantArg {
    AsWritten,
    Corrected,
}

#[derive(Clone, Copy, ValueEnum)]
enum NumericArg {
    Exact,
    Max,
}

impl RunArgs {
    fn scenario(&self) -> Result<Scenario, Error> {
        let mut s = Scenario::load(&self.scenario)?;
        if let Some(name) = &self.policy {
            s.policy.kind = parse_policy(name)?;
        }
        if let Some(runs) = self.runs {
            s.runs = runs;
        }
        if let Some(seed) = self.seed {
            s.master_seed = seed;
        }
        if let Some(iterations) = self.iterations {
            s.iterations = iterations;
        }
        if let Some(max_period) = self.period_max {
            let style = match &s.period_set {
                PeriodSetSpec::Range { style, .. } | PeriodSetSpec::Periods { style, .. } => *style,
                PeriodSetSpec::Explicit { .. } => Default::default(),
            };
            s.period_set = PeriodSetSpec::Range { max_period, style };
        }
        if let Some(v) = self.variant {
            s.policy.variant = match v {
                VariantArg::AsWritten => Variant::AsWritten,
                VariantArg::Corrected => Variant::Corrected,
            };
        }
        if let Some(n) = self.numeric {
            s.policy.numeric = match n {
                NumericArg::Exact => NumericMode::Exact,
                NumericArg::Max => NumericMode::MaxApprox,
            };
        }
        s.validate()?;
        Ok(s)
    }

    fn options(&self, scenario: &Scenario) -> ExperimentOptions {
        ExperimentOptions::new(scenario.runs)
            .with_parallelism(self.parallel)
            .with_regret(!self.no_regret)
    }
}

fn parse_policy(name: &str) -> Result<PolicyKind, Error> {
    PolicyKind::parse(name).ok_or_else(|| Error::PolicyConfig(format!("unknown policy `{name}`")))
}

fn print_table(rows: &[(String, &RunSummary)]) {
    println!(
        "{:<22} {:>6} {:>12} {:>10} {:>12} {:>12} {:>12}",
        "policy", "runs", "median GB", "std GB", "first dist%", "final dist%", "mean regret"
    );
    for (label, s) in rows {
        let regret = s
            .regret
            .as_ref()
            .map_or("-".to_string(), |r| format!("{:.1}", r.mean_regret));
        println!(
            "{:<22} {:>6} {:>12.3} {:>10.3} {:>12.2} {:>12.2} {:>12}",
            label,
            s.runs.len(),
            s.cumulative_gb.median,
            s.cumulative_gb.std,
            s.first_iteration_distance(),
            s.final_iteration_distance(),
            regret
        );
    }
}

fn execute(command: Command) -> Result<(), Error> {
    match command {
        Command::Run(args) => {
            let s = args.scenario()?;
            let summary = run_experiment(&s, &args.options(&s), args.out_dir.as_deref())?;
            println!("scenario {} ({} iterations)", s.name, s.iterations);
            print_table(&[(summary.policy.clone(), &summary)]);
        }
        Command::Compare { common, policies } => {
            let s = common.scenario()?;
            let kinds = policies
                .iter()
                .map(|p| parse_policy(p.trim()))
                .collect::<Result<Vec<_>, _>>()?;
            let cmp = compare_policies(&s, &kinds, &common.options(&s), common.out_dir.as_deref())?;
            println!("scenario {} ({} iterations)", s.name, s.iterations);
            let rows: Vec<_> = cmp
                .summaries
                .iter()
                .map(|x| (x.policy.clone(), x))
                .collect();
            print_table(&rows);
        }
        Command::Sweep(args) => {
            let s = args.scenario()?;
            let entries = period_sweep(
                &s,
                SWEEP_PERIOD_SETS,
                &args.options(&s),
                args.out_dir.as_deref(),
            )?;
            println!(
                "scenario {} ({} iterations), policy {}",
                s.name,
                s.iterations,
                s.policy.kind.name()
            );
            let rows: Vec<_> = entries
                .iter()
                .map(|e| (format!("periods {}", e.label), &e.summary))
                .collect();
            print_table(&rows);
        }
        Command::ShowScenario(args) => {
            println!("{}", args.scenario()?.to_json()?);
        }
        Command::ListScenarios => {
            for name in Scenario::builtin_names() {
                println!("{name}");
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_config_error() { 1 } else { 2 })
        }
    }
}
