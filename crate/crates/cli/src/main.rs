use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use pgsm_cli::commands::bench::{self, BenchOptions, ProbeConfig};
use pgsm_cli::commands::enumcheck::{self, EnumcheckOptions};
use pgsm_cli::commands::{gen_data, run};
use pgsm_cli::{CliError, CliResult, ExperimentConfig};

#[derive(Parser)]
#[command(name = "pgsm", version, about = "Particle Gibbs split-merge experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run replicate chains and write one trace per replicate plus a manifest.
    Run(ConfigArgs),
    /// Compare kernels with the enumerated posterior of a tiny dataset.
    Enumcheck(EnumcheckArgs),
    /// Time-vs-metric series for several schedules and the per-weight timing probe.
    Bench(BenchArgs),
    /// Write the configured synthetic dataset as CSV.
    GenData(GenDataArgs),
}

/// Flags that set configuration keys. They are applied after the file and
/// before `--set`.
#[derive(Args, Clone)]
struct ConfigArgs {
    /// TOML configuration file.
    #[arg(short, long)]
    config: Option<PathBuf>,
    /// Override any key, e.g. `--set sampler.particles=50`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// seed
    #[arg(long)]
    seed: Option<u64>,
    /// replicates
    #[arg(long)]
    replicates: Option<usize>,
    /// dataset.path (switches dataset.source to csv)
    #[arg(long)]
    data: Option<PathBuf>,
    /// dataset.labels
    #[arg(long)]
    labels: Option<PathBuf>,
    /// model.kind
    #[arg(long)]
    model: Option<String>,
    /// prior.kind
    #[arg(long)]
    prior: Option<String>,
    /// sampler.schedule
    #[arg(long)]
    schedule: Option<String>,
    /// sampler.particles
    #[arg(long)]
    particles: Option<usize>,
    /// sampler.ess_threshold
    #[arg(long)]
    ess_threshold: Option<f64>,
    /// sampler.proposal
    #[arg(long)]
    proposal: Option<String>,
    /// sampler.initialization
    #[arg(long)]
    initialization: Option<String>,
    /// budget.iterations
    #[arg(long)]
    iterations: Option<u64>,
    /// budget.wall_seconds
    #[arg(long)]
    wall_seconds: Option<f64>,
    /// budget.trace_stride
    #[arg(long)]
    trace_stride: Option<u64>,
    /// output.dir (the PGSM_OUTPUT_DIR environment variable takes precedence)
    #[arg(short, long)]
    output_dir: Option<PathBuf>,
    /// output.emit_timing = false
    #[arg(long)]
    no_timing: bool,
}

fn quoted(s: &str) -> String {
    toml::Value::String(s.to_string()).to_string()
}

impl ConfigArgs {
    fn load(&self) -> CliResult<ExperimentConfig> {
        let mut o = Vec::new();
        let mut push = |key: &str, value: Option<String>| {
            if let Some(v) = value {
                o.push(format!("{key}={v}"));
            }
        };
        push("seed", self.seed.map(|v| v.to_string()));
        push("replicates", self.replicates.map(|v| v.to_string()));
        if let Some(p) = &self.data {
            push("dataset.source", Some(quoted("csv")));
            push("dataset.path", Some(quoted(&p.display().to_string())));
        }
        push(
            "dataset.labels",
            self.labels.as_ref().map(|p| quoted(&p.display().to_string())),
        );
        push("model.kind", self.model.as_deref().map(quoted));
        push("prior.kind", self.prior.as_deref().map(quoted));
        push("sampler.schedule", self.schedule.as_deref().map(quoted));
        push("sampler.particles", self.particles.map(|v| v.to_string()));
        push("sampler.ess_threshold", self.ess_threshold.map(|v| format!("{v:?}")));
        push("sampler.proposal", self.proposal.as_deref().map(quoted));
        push("sampler.initialization", self.initialization.as_deref().map(quoted));
        push("budget.iterations", self.iterations.map(|v| v.to_string()));
        push("budget.wall_seconds", self.wall_seconds.map(|v| format!("{v:?}")));
        push("budget.trace_stride", self.trace_stride.map(|v| v.to_string()));
        push(
            "output.dir",
            self.output_dir.as_ref().map(|p| quoted(&p.display().to_string())),
        );
        if self.no_timing {
            push("output.emit_timing", Some("false".into()));
        }
        o.extend(self.overrides.iter().cloned());
        ExperimentConfig::load(self.config.as_deref(), &o)
    }
}

#[derive(Args)]
struct EnumcheckArgs {
    #[command(flatten)]
    config: ConfigArgs,
    /// Kernel schedule to check. Repeatable; defaults to gibbs, sams+gibbs and pgsm.
    #[arg(long = "kernel")]
    kernels: Vec<String>,
    /// Chain iterations counted per schedule.
    #[arg(long = "check-iterations", default_value_t = enumcheck::DEFAULT_ITERATIONS)]
    check_iterations: u64,
    #[arg(long, default_value_t = enumcheck::DEFAULT_BURN_IN)]
    burn_in: u64,
    /// Largest accepted total variation distance.
    #[arg(long, default_value_t = enumcheck::DEFAULT_TOLERANCE)]
    tolerance: f64,
    #[arg(long, hide = true)]
    negate_log_weights: bool,
}

#[derive(Args)]
struct BenchArgs {
    #[command(flatten)]
    config: ConfigArgs,
    /// Schedule to benchmark. Repeatable; defaults to pgsm+gibbs+alpha, sams+gibbs+alpha and gibbs+alpha.
    #[arg(long = "bench-schedule")]
    schedules: Vec<String>,
    /// Moving-average window of the smoothed series.
    #[arg(long, default_value_t = bench::DEFAULT_WINDOW)]
    window: usize,
    /// Skip the per-weight timing probe.
    #[arg(long)]
    no_probe: bool,
    /// Outside-cluster counts compared by the probe.
    #[arg(long, value_delimiter = ',', default_values_t = [10usize, 1000])]
    probe_clusters: Vec<usize>,
}

#[derive(Args)]
struct GenDataArgs {
    #[command(flatten)]
    config: ConfigArgs,
    /// Output CSV file.
    #[arg(long)]
    out: PathBuf,
    /// Labels file; defaults to the data path with a `.labels` extension.
    #[arg(long)]
    labels_out: Option<PathBuf>,
}

fn print_json<T: serde::Serialize>(value: &T) {
    println!("{}", serde_json::to_string_pretty(value).expect("value serialises"));
}

fn execute(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Run(args) => {
            let config = args.load()?;
            let (dir, manifest) = run::run(&config)?;
            eprintln!(
                "wrote {} trace file(s) and {} to {}",
                manifest.replicates.len(),
                run::MANIFEST_FILE,
                dir.display()
            );
            Ok(())
        }
        Command::Enumcheck(args) => {
            let config = args.config.load()?;
            let options = EnumcheckOptions {
                schedules: if args.kernels.is_empty() {
                    enumcheck::default_schedules()
                } else {
                    args.kernels
                },
                iterations: args.check_iterations,
                burn_in: args.burn_in,
                tolerance: args.tolerance,
                negate_log_weights: args.negate_log_weights,
            };
            let report = enumcheck::enumcheck(&config, &options)?;
            print_json(&report);
            if report.pass {
                Ok(())
            } else {
                let failed: Vec<String> = report
                    .checks
                    .iter()
                    .filter(|c| !c.pass)
                    .map(|c| format!("{} (tv {:.4})", c.schedule, c.tv))
                    .collect();
                Err(CliError::CheckFailed(format!(
                    "total variation above {} for {}",
                    report.tolerance,
                    failed.join(", ")
                )))
            }
        }
        Command::Bench(args) => {
            let config = args.config.load()?;
            let options = BenchOptions {
                schedules: if args.schedules.is_empty() {
                    bench::default_schedules()
                } else {
                    args.schedules
                },
                window: args.window,
                probe: (!args.no_probe).then(|| ProbeConfig {
                    contexts: args.probe_clusters,
                    ..ProbeConfig::default()
                }),
            };
            let report = bench::bench(&config, &options)?;
            print!("{}", bench::format_table(&report));
            Ok(())
        }
        Command::GenData(args) => {
            let config = args.config.load()?;
            let written = gen_data::gen_data(&config, &args.out, args.labels_out.as_deref())?;
            eprintln!(
                "wrote {} rows to {} and labels to {}",
                written.rows,
                written.data.display(),
                written.labels.display()
            );
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.to_json());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
