use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Map, Value};

use permanent_bp::bench::{
    accuracy_count, run_accuracy_study, run_runtime_study_at, AccuracyOptions, SamplingMode,
    METHODS,
};
use permanent_bp::kernel::{gram_psd_check, normalize_to_unit_box, PointSetCollection};
use permanent_bp::sampler::{sample_permanent, Budget};
use permanent_bp::{
    brute_force_permanent, compute_beliefs, determinant, parse_matrix, random_uniform_matrix,
    run_bp, ryser_permanent, scaled_diagonal, serialize_matrix, BpConfig, Error, Init,
    MatrixFormat, RngSpec, SquareMatrix, ZeroEntryPolicy,
};

const EXIT_USAGE: u8 = 1;
const EXIT_INPUT: u8 = 2;
const EXIT_NUMERIC: u8 = 3;

#[derive(Parser)]
#[command(
    name = "permbp",
    version,
    about = "Approximate matrix permanents with belief propagation"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Bethe-permanent estimate by belief propagation
    Approx {
        #[command(flatten)]
        input: InputArgs,
        #[command(flatten)]
        bp: BpArgs,
        /// Add the belief matrix B and F_Bethe to the output
        #[arg(long)]
        emit_beliefs: bool,
        #[arg(long)]
        no_timing: bool,
    },
    /// Exact permanent
    Exact {
        #[command(flatten)]
        input: InputArgs,
        #[arg(long, value_enum, default_value_t = ExactMethod::Ryser)]
        method: ExactMethod,
    },
    /// Monte Carlo estimate from uniformly drawn permutations
    Sample {
        #[command(flatten)]
        input: InputArgs,
        /// Number of sampled permutations
        #[arg(long, conflicts_with = "budget_ms")]
        samples: Option<u64>,
        /// Sample for this many milliseconds instead of a fixed count
        #[arg(long)]
        budget_ms: Option<u64>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        no_timing: bool,
    },
    /// Determinant or scaled diagonal product
    Baseline {
        #[command(flatten)]
        input: InputArgs,
        #[arg(long, value_enum)]
        method: BaselineMethod,
    },
    /// Ranking accuracy of every method on random matrices (Kendall distance)
    BenchAccuracy {
        #[arg(long, default_value_t = 8)]
        n: usize,
        /// Number of matrices [default: 200, or 1000 with --full-scale; 50/200 at n = 10]
        #[arg(long)]
        count: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Fixed sample count per matrix instead of matching BP's wall time
        #[arg(long)]
        samples: Option<u64>,
        /// Write the per-matrix CSV report here
        #[arg(long)]
        report: Option<PathBuf>,
        #[arg(long)]
        full_scale: bool,
        #[command(flatten)]
        bp: BpArgs,
        #[command(flatten)]
        jobs: JobArgs,
        /// Write zeros in the CSV timing columns
        #[arg(long)]
        no_timing: bool,
    },
    /// BP iterations and wall time against matrix size
    BenchRuntime {
        #[arg(long, default_value_t = 5)]
        n_min: usize,
        #[arg(long, default_value_t = 50)]
        n_max: usize,
        /// Size increment [default: 5, or 1 with --full-scale]
        #[arg(long)]
        step: Option<usize>,
        /// Trials per size [default: 5, or 20 with --full-scale]
        #[arg(long)]
        trials: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        report: Option<PathBuf>,
        #[arg(long)]
        full_scale: bool,
        #[command(flatten)]
        bp: BpArgs,
    },
    /// Permanent-kernel Gram matrix of point sets and its PSD check
    Kernel {
        /// JSON file {"sets": [[[x, ...], ...], ...]}, or - for stdin
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value_t = 0.5)]
        sigma: f64,
        /// Rescale all coordinates into the unit box first
        #[arg(long)]
        normalize: bool,
        #[command(flatten)]
        bp: BpArgs,
        #[command(flatten)]
        jobs: JobArgs,
    },
    /// Random matrix with uniform entries
    Gen {
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 0.0)]
        low: f64,
        #[arg(long, default_value_t = 50.0)]
        high: f64,
        #[arg(long, default_value_t = MatrixFormat::DenseText)]
        format: MatrixFormat,
        /// Write here instead of stdout
        #[arg(long)]
        output: Option<PathBuf>,
    },
}

#[derive(Args)]
struct InputArgs {
    /// Matrix file, or - for stdin
    #[arg(long)]
    input: PathBuf,
    /// Input format [default: from the file extension, else dense-text]
    #[arg(long)]
    format: Option<MatrixFormat>,
}

#[derive(Args)]
struct BpArgs {
    /// Log-space damping rate in (0, 1]
    #[arg(long, default_value_t = 0.5)]
    epsilon: f64,
    #[arg(long, default_value_t = 1e-10)]
    tol: f64,
    #[arg(long, default_value_t = 10_000)]
    max_iters: usize,
    #[arg(long, value_enum, default_value_t = InitKind::Uniform)]
    init: InitKind,
    /// Seed for --init random
    #[arg(long, default_value_t = 0)]
    init_seed: u64,
    /// Floor zero entries at this fraction of the largest entry
    #[arg(long, default_value_t = 1e-12, conflicts_with = "reject_zeros")]
    clamp: f64,
    /// Fail on zero entries instead of clamping
    #[arg(long)]
    reject_zeros: bool,
}

impl BpArgs {
    fn config(&self) -> BpConfig {
        BpConfig {
            damping: self.epsilon,
            tolerance: self.tol,
            max_iterations: self.max_iters,
            init: match self.init {
                InitKind::Uniform => Init::Uniform,
                InitKind::Random => Init::Random {
                    seed: self.init_seed,
                },
            },
            zero_entry_policy: if self.reject_zeros {
                ZeroEntryPolicy::Reject
            } else {
                ZeroEntryPolicy::Clamp {
                    relative_floor: self.clamp,
                }
            },
            record_trace: false,
        }
    }
}

#[derive(Args)]
struct JobArgs {
    /// Worker threads for batch items [default: logical processors]
    #[arg(long)]
    jobs: Option<usize>,
}

impl JobArgs {
    fn install(&self) -> Result<bool, Failure> {
        if let Some(j) = self.jobs {
            if j == 0 {
                return Err(Failure::usage("--jobs must be at least 1"));
            }
            rayon::ThreadPoolBuilder::new()
                .num_threads(j)
                .build_global()
                .map_err(|e| Failure::usage(e.to_string()))?;
        }
        Ok(rayon::current_num_threads() > 1)
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum ExactMethod {
    Ryser,
    BruteForce,
}

#[derive(Clone, Copy, ValueEnum)]
enum BaselineMethod {
    Det,
    Diag,
}

#[derive(Clone, Copy, ValueEnum)]
enum InitKind {
    Uniform,
    Random,
}

struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn usage(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_USAGE,
            message: message.into(),
        }
    }

    fn input(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_INPUT,
            message: message.into(),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Self {
            code: if e.is_numeric() {
                EXIT_NUMERIC
            } else {
                EXIT_INPUT
            },
            message: e.to_string(),
        }
    }
}

fn read_input(path: &Path) -> Result<Vec<u8>, Failure> {
    if path == Path::new("-") {
        let mut buf = Vec::new();
        std::io::Read::read_to_end(&mut std::io::stdin(), &mut buf)
            .map_err(|e| Failure::input(format!("stdin: {e}")))?;
        Ok(buf)
    } else {
        std::fs::read(path).map_err(|e| Failure::input(format!("{}: {e}", path.display())))
    }
}

fn write_file(path: &Path, contents: &[u8]) -> Result<(), Failure> {
    std::fs::write(path, contents).map_err(|e| Failure::input(format!("{}: {e}", path.display())))
}

fn load_matrix(args: &InputArgs) -> Result<SquareMatrix, Failure> {
    let format = args
        .format
        .unwrap_or_else(|| MatrixFormat::from_path(&args.input));
    Ok(parse_matrix(&read_input(&args.input)?, format)?)
}

/// `log_estimate`, plus the linear value when it fits a finite double.
fn estimate_fields(out: &mut Map<String, Value>, log_estimate: f64) {
    out.insert("log_estimate".into(), json!(log_estimate));
    let linear = log_estimate.exp();
    if linear.is_finite() {
        out.insert("estimate".into(), json!(linear));
    }
}

fn run(cli: Cli) -> Result<Value, Failure> {
    match cli.command {
        Command::Approx {
            input,
            bp,
            emit_beliefs,
            no_timing,
        } => {
            let m = load_matrix(&input)?;
            let cfg = bp.config();
            let (state, r) = if m.n() == 1 {
                (None, permanent_bp::estimate_permanent(&m, &cfg)?)
            } else {
                let (s, r) = run_bp(&m, &cfg)?;
                (Some(s), r)
            };
            if !r.converged {
                eprintln!(
                    "warning: no convergence after {} iterations (residual {:e})",
                    r.iterations, r.residual
                );
            }
            let mut out = Map::new();
            out.insert("method".into(), json!("bethe"));
            out.insert("n".into(), json!(m.n()));
            estimate_fields(&mut out, r.log_estimate);
            out.insert("converged".into(), json!(r.converged));
            out.insert("iterations".into(), json!(r.iterations));
            out.insert("residual".into(), json!(r.residual));
            if !no_timing {
                out.insert("message_passing_secs".into(), json!(r.message_passing_secs));
                out.insert("energy_secs".into(), json!(r.energy_secs));
            }
            if emit_beliefs {
                out.insert("f_bethe".into(), json!(r.f_bethe));
                let rows: Vec<Vec<f64>> = match &state {
                    Some(s) => compute_beliefs(&m, s, &cfg)?
                        .belief_matrix
                        .rows()
                        .map(<[f64]>::to_vec)
                        .collect(),
                    None => vec![vec![1.0]],
                };
                out.insert("beliefs".into(), json!(rows));
            }
            Ok(Value::Object(out))
        }
        Command::Exact { input, method } => {
            let m = load_matrix(&input)?;
            let (name, per) = match method {
                ExactMethod::Ryser => ("ryser", ryser_permanent(&m)?),
                ExactMethod::BruteForce => ("brute-force", brute_force_permanent(&m)?),
            };
            let mut out = Map::new();
            out.insert("method".into(), json!(name));
            out.insert("n".into(), json!(m.n()));
            estimate_fields(&mut out, per.ln());
            Ok(Value::Object(out))
        }
        Command::Sample {
            input,
            samples,
            budget_ms,
            seed,
            no_timing,
        } => {
            let m = load_matrix(&input)?;
            let budget = match (samples, budget_ms) {
                (_, Some(ms)) => Budget::WallTime(Duration::from_millis(ms)),
                (Some(s), None) => Budget::Count(s),
                (None, None) => Budget::Count(100_000),
            };
            let e = sample_permanent(&m, budget, &RngSpec::new(seed))?;
            let mut out = Map::new();
            out.insert("method".into(), json!("sampling"));
            out.insert("n".into(), json!(m.n()));
            estimate_fields(&mut out, e.log_estimate);
            out.insert("samples_used".into(), json!(e.samples_used));
            if !no_timing {
                out.insert("elapsed_secs".into(), json!(e.elapsed_secs));
            }
            Ok(Value::Object(out))
        }
        Command::Baseline { input, method } => {
            let m = load_matrix(&input)?;
            let mut out = Map::new();
            out.insert("n".into(), json!(m.n()));
            match method {
                BaselineMethod::Det => {
                    let d = determinant(&m);
                    out.insert("method".into(), json!("det"));
                    // log of |det|; the sign is reported separately
                    out.insert("log_estimate".into(), json!(d.log_magnitude));
                    out.insert("sign".into(), json!(d.sign));
                    if let Some(x) = d.finite_linear() {
                        out.insert("estimate".into(), json!(x));
                    }
                }
                BaselineMethod::Diag => {
                    out.insert("method".into(), json!("diag"));
                    estimate_fields(&mut out, scaled_diagonal(&m).ln());
                }
            }
            Ok(Value::Object(out))
        }
        Command::BenchAccuracy {
            n,
            count,
            seed,
            samples,
            report,
            full_scale,
            bp,
            jobs,
            no_timing,
        } => {
            let parallel = jobs.install()?;
            let count = count.unwrap_or_else(|| accuracy_count(n, full_scale));
            let options = AccuracyOptions {
                sampling: match samples {
                    Some(samples) => SamplingMode::Count { samples },
                    None => SamplingMode::TimeMatched,
                },
                parallel,
            };
            eprintln!("accuracy study: n = {n}, {count} matrices");
            let r = run_accuracy_study(n, count, &RngSpec::new(seed), &bp.config(), options)?;
            for method in METHODS {
                if let Some(d) = r.kendall.get(method) {
                    eprintln!("  {method:<10} {d:.6}");
                }
            }
            if let Some(path) = report {
                write_file(&path, r.to_csv(!no_timing).as_bytes())?;
            }
            Ok(r.summary_json())
        }
        Command::BenchRuntime {
            n_min,
            n_max,
            step,
            trials,
            seed,
            report,
            full_scale,
            bp,
        } => {
            let step = step.unwrap_or(if full_scale { 1 } else { 5 });
            let trials = trials.unwrap_or(if full_scale { 20 } else { 5 });
            if step == 0 || n_min > n_max {
                return Err(Failure::usage("need --step >= 1 and --n-min <= --n-max"));
            }
            let sizes: Vec<usize> = (n_min..=n_max).step_by(step).collect();
            let r = run_runtime_study_at(&sizes, trials, &RngSpec::new(seed), &bp.config())?;
            eprintln!(
                "{:>4} {:>10} {:>12} {:>10}",
                "n", "iters", "ms", "converged"
            );
            for row in &r.rows {
                eprintln!(
                    "{:>4} {:>10.1} {:>12.3} {:>10.2}",
                    row.n,
                    row.mean_iterations,
                    row.mean_wall_secs * 1e3,
                    row.convergence_rate
                );
            }
            if let Some(path) = report {
                write_file(&path, r.to_csv().as_bytes())?;
            }
            serde_json::to_value(&r).map_err(|e| Failure::input(e.to_string()))
        }
        Command::Kernel {
            input,
            sigma,
            normalize,
            bp,
            jobs,
        } => {
            jobs.install()?;
            let text = String::from_utf8(read_input(&input)?)
                .map_err(|e| Failure::input(e.to_string()))?;
            let mut sets = PointSetCollection::from_json(&text)?.sets;
            if normalize {
                sets = normalize_to_unit_box(&sets)?;
            }
            let r = gram_psd_check(&sets, sigma, &bp.config())?;
            if !r.psd {
                eprintln!(
                    "Gram matrix is not PSD: min eigenvalue {:e}",
                    r.min_eigenvalue
                );
            }
            serde_json::to_value(&r).map_err(|e| Failure::input(e.to_string()))
        }
        Command::Gen {
            n,
            seed,
            low,
            high,
            format,
            output,
        } => {
            let m = random_uniform_matrix(n, low, high, &RngSpec::new(seed))?;
            let bytes = serialize_matrix(&m, format);
            match output {
                Some(path) => {
                    write_file(&path, &bytes)?;
                    Ok(json!({ "n": n, "seed": seed, "output": path }))
                }
                None => {
                    print!("{}", String::from_utf8_lossy(&bytes));
                    Ok(Value::Null)
                }
            }
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(EXIT_USAGE)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli) {
        Ok(Value::Null) => ExitCode::SUCCESS,
        Ok(v) => {
            println!(
                "{}",
                serde_json::to_string_pretty(&v).expect("JSON values serialize")
            );
            ExitCode::SUCCESS
        }
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
