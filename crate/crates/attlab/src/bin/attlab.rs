//! Batch front end: every subcommand wraps a sweep driver from the
//! library and emits a deterministic CSV or JSON table.
//!
//! Exit codes: 0 success, 2 usage error, 3 resource/cutoff error,
//! 4 invariant violation.

use std::fs;
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use attlab::error::Error;
use attlab::fock::{TruncatedDensityMatrix, DEFAULT_TAIL_TOL};
use attlab::protocol::{EtaShape, SigmaZero, ThermalizationModel, TriggerPlan};
use attlab::sweep::{self, Cell, EntropyGapGrid, IcohGrid, NbarGrid, OutputFormat, Table};

#[derive(Parser)]
#[command(name = "attlab", version, about = "Attenuator-channel laboratory")]
struct Cli {
    /// Flat key/value JSON config; command-line flags override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Worker threads for sweeps (default: available cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Output format.
    #[arg(long, global = true, value_parser = ["csv", "json"])]
    format: Option<String>,
    /// Output path (default: stdout).
    #[arg(long, global = true)]
    output: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Coherent information I_coh(Φ_{λ,|n⟩⟨n|}, τ_N) over a (λ, N, n) grid.
    IcohSweep(IcohArgs),
    /// Threshold n̄_N(λ) scan and the K(N) fit.
    Nbar(NbarArgs),
    /// Entropy gap H(q) − H(p) of the λ → 0 limit distributions.
    EntropyGap(EntropyGapArgs),
    /// ℓ1 convergence of the finite-n distributions toward q and p.
    ProbConvergence(ProbConvArgs),
    /// One noise-attenuation protocol run: moments, bounds, exact distance.
    Protocol(ProtocolArgs),
    /// Single-trigger rate z(λ, N, n) against the pure-loss C_ea.
    AppendixB(AppendixBArgs),
    /// One-trigger limiting distance 2[1 − e^{−(2ν+1)}I₀(2√(ν(ν+1)))].
    AppendixC(AppendixCArgs),
    /// Fibre length ↔ transmissivity conversion.
    Fiber(FiberArgs),
    /// Run the deterministic invariant suite.
    Selftest,
}

#[derive(Args)]
struct IcohArgs {
    /// Energy constraints N (comma separated).
    #[arg(long, value_delimiter = ',')]
    energy: Option<Vec<f64>>,
    /// Environment Fock numbers n (comma separated).
    #[arg(long, value_delimiter = ',')]
    n_list: Option<Vec<usize>>,
    #[arg(long)]
    lambda_min: Option<f64>,
    #[arg(long)]
    lambda_max: Option<f64>,
    #[arg(long)]
    lambda_step: Option<f64>,
}

#[derive(Args)]
struct NbarArgs {
    #[arg(long, value_delimiter = ',')]
    energy: Option<Vec<f64>>,
    #[arg(long)]
    lambda_min: Option<f64>,
    #[arg(long)]
    lambda_max: Option<f64>,
    /// Grid step; the published-figure resolution 0.0002 is available but
    /// far slower than the default 0.005.
    #[arg(long)]
    lambda_step: Option<f64>,
    #[arg(long)]
    n_cap: Option<usize>,
}

#[derive(Args)]
struct EntropyGapArgs {
    #[arg(long, value_delimiter = ',')]
    energy: Option<Vec<f64>>,
    /// Offsets α for c(N) = N + α.
    #[arg(long, value_delimiter = ',')]
    alpha: Option<Vec<f64>>,
    /// Fixed c values (in addition to the α family).
    #[arg(long, value_delimiter = ',')]
    c_list: Option<Vec<f64>>,
}

#[derive(Args)]
struct ProbConvArgs {
    #[arg(long)]
    energy: Option<f64>,
    #[arg(long)]
    c: Option<f64>,
    #[arg(long, value_delimiter = ',')]
    n_list: Option<Vec<usize>>,
}

#[derive(Args)]
struct ProtocolArgs {
    /// Target environment Fock number.
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    lambda: Option<f64>,
    /// Trigger count.
    #[arg(long)]
    k: Option<usize>,
    /// Stationary state: "vacuum" or "thermal".
    #[arg(long)]
    sigma0: Option<String>,
    /// Mean photon number of a thermal σ₀.
    #[arg(long)]
    nu: Option<f64>,
    /// Delay between signals (0 disables thermalisation).
    #[arg(long)]
    delta_t: Option<f64>,
    /// Thermalisation reset time t_E.
    #[arg(long)]
    t_e: Option<f64>,
    /// Relaxation shape: "linear" or "exp".
    #[arg(long)]
    therm: Option<String>,
}

#[derive(Args)]
struct AppendixBArgs {
    #[arg(long)]
    energy: Option<f64>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    lambda_list: Option<Vec<f64>>,
}

#[derive(Args)]
struct AppendixCArgs {
    #[arg(long, value_delimiter = ',')]
    nu_list: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    lambda_list: Option<Vec<f64>>,
}

#[derive(Args)]
struct FiberArgs {
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    length_km: Option<f64>,
    /// Attenuation exponent γ in λ = 10^(−γL/10 km).
    #[arg(long)]
    gamma: Option<f64>,
}

/// Flat key/value config; flags override these entries.
struct Config(serde_json::Map<String, serde_json::Value>);

impl Config {
    fn load(path: &Option<PathBuf>) -> Result<Self, Error> {
        let Some(path) = path else {
            return Ok(Self(serde_json::Map::new()));
        };
        let text = fs::read_to_string(path)
            .map_err(|e| Error::Usage(format!("cannot read config {}: {e}", path.display())))?;
        let value: serde_json::Value = serde_json::from_str(&text)
            .map_err(|e| Error::Usage(format!("config is not valid JSON: {e}")))?;
        match value {
            serde_json::Value::Object(map) => Ok(Self(map)),
            _ => Err(Error::Usage("config must be a JSON object".into())),
        }
    }

    fn f64(&self, key: &str) -> Option<f64> {
        self.0.get(key).and_then(|v| v.as_f64())
    }

    fn usize(&self, key: &str) -> Option<usize> {
        self.0.get(key).and_then(|v| v.as_u64()).map(|v| v as usize)
    }

    fn string(&self, key: &str) -> Option<String> {
        self.0.get(key).and_then(|v| v.as_str()).map(str::to_owned)
    }

    fn f64_list(&self, key: &str) -> Option<Vec<f64>> {
        self.0.get(key).and_then(|v| v.as_array()).map(|a| {
            a.iter().filter_map(|x| x.as_f64()).collect()
        })
    }

    fn usize_list(&self, key: &str) -> Option<Vec<usize>> {
        self.0.get(key).and_then(|v| v.as_array()).map(|a| {
            a.iter()
                .filter_map(|x| x.as_u64())
                .map(|v| v as usize)
                .collect()
        })
    }
}

fn lambda_grid(min: f64, max: f64, step: f64) -> Result<Vec<f64>, Error> {
    if !(step > 0.0) || max < min {
        return Err(Error::Usage(format!(
            "bad λ grid: min {min}, max {max}, step {step}"
        )));
    }
    let mut grid = Vec::new();
    let count = ((max - min) / step).round() as usize;
    for i in 0..=count {
        let v = min + step * i as f64;
        if v <= max + 1e-12 {
            grid.push(v);
        }
    }
    Ok(grid)
}

fn tail_tolerance() -> f64 {
    std::env::var("ATTLAB_TAIL_TOL")
        .ok()
        .and_then(|v| v.parse::<f64>().ok())
        .unwrap_or(DEFAULT_TAIL_TOL)
}

fn run(cli: Cli) -> Result<(), Error> {
    if let Some(jobs) = cli.jobs {
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
            .map_err(|e| Error::Usage(format!("cannot configure --jobs: {e}")))?;
    }
    let cfg = Config::load(&cli.config)?;
    let format = match cli
        .format
        .or_else(|| cfg.string("format"))
        .unwrap_or_else(|| "csv".to_string())
        .as_str()
    {
        "json" => OutputFormat::Json,
        _ => OutputFormat::Csv,
    };

    let table = match cli.command {
        Command::IcohSweep(a) => {
            let grid = IcohGrid {
                energies: a
                    .energy
                    .or_else(|| cfg.f64_list("energy"))
                    .unwrap_or_else(|| vec![0.5]),
                fock_numbers: a
                    .n_list
                    .or_else(|| cfg.usize_list("n-list"))
                    .unwrap_or_else(|| vec![3, 10, 30, 100]),
                lambdas: lambda_grid(
                    a.lambda_min.or_else(|| cfg.f64("lambda-min")).unwrap_or(0.02),
                    a.lambda_max.or_else(|| cfg.f64("lambda-max")).unwrap_or(0.98),
                    a.lambda_step
                        .or_else(|| cfg.f64("lambda-step"))
                        .unwrap_or(0.02),
                )?,
            };
            sweep::icoh_sweep(&grid)?
        }
        Command::Nbar(a) => {
            let grid = NbarGrid {
                energies: a
                    .energy
                    .or_else(|| cfg.f64_list("energy"))
                    .unwrap_or_else(|| vec![0.25, 0.5, 1.0, 2.0]),
                lambdas: lambda_grid(
                    a.lambda_min.or_else(|| cfg.f64("lambda-min")).unwrap_or(0.01),
                    a.lambda_max.or_else(|| cfg.f64("lambda-max")).unwrap_or(0.1),
                    a.lambda_step
                        .or_else(|| cfg.f64("lambda-step"))
                        .unwrap_or(0.005),
                )?,
                n_cap: a
                    .n_cap
                    .or_else(|| cfg.usize("n-cap"))
                    .unwrap_or(attlab::search::DEFAULT_N_CAP),
            };
            sweep::nbar_table(&grid)?
        }
        Command::EntropyGap(a) => {
            let grid = EntropyGapGrid {
                energies: a
                    .energy
                    .or_else(|| cfg.f64_list("energy"))
                    .unwrap_or_else(|| vec![0.25, 0.5, 1.0, 2.0, 4.0]),
                alphas: a
                    .alpha
                    .or_else(|| cfg.f64_list("alpha"))
                    .unwrap_or_else(|| vec![2.0]),
                fixed_c: a.c_list.or_else(|| cfg.f64_list("c-list")).unwrap_or_default(),
            };
            sweep::entropy_gap_table(&grid)?
        }
        Command::ProbConvergence(a) => sweep::prob_convergence_table(
            a.energy.or_else(|| cfg.f64("energy")).unwrap_or(2.0),
            a.c.or_else(|| cfg.f64("c")).unwrap_or(3.0),
            &a.n_list
                .or_else(|| cfg.usize_list("n-list"))
                .unwrap_or_else(|| vec![50, 100, 200, 400]),
        )?,
        Command::Protocol(a) => {
            let sigma0 = match a
                .sigma0
                .or_else(|| cfg.string("sigma0"))
                .unwrap_or_else(|| "vacuum".to_string())
                .as_str()
            {
                "vacuum" => SigmaZero::Vacuum,
                "thermal" => {
                    SigmaZero::Thermal(a.nu.or_else(|| cfg.f64("nu")).unwrap_or(0.5))
                }
                other => {
                    return Err(Error::Usage(format!(
                        "unknown σ₀ '{other}' (vacuum|thermal)"
                    )))
                }
            };
            let mut plan = TriggerPlan::new(
                a.n.or_else(|| cfg.usize("n")).unwrap_or(2),
                a.lambda.or_else(|| cfg.f64("lambda")).unwrap_or(0.3),
                a.k.or_else(|| cfg.usize("k")).unwrap_or(3),
                sigma0,
            )?;
            let delta_t = a.delta_t.or_else(|| cfg.f64("delta-t")).unwrap_or(0.0);
            if delta_t > 0.0 {
                let shape = match a
                    .therm
                    .or_else(|| cfg.string("therm"))
                    .unwrap_or_else(|| "linear".to_string())
                    .as_str()
                {
                    "exp" => EtaShape::Exponential,
                    _ => EtaShape::Linear,
                };
                let t_e = a.t_e.or_else(|| cfg.f64("t-e")).unwrap_or(1.0);
                plan = plan.with_delay(delta_t, ThermalizationModel::new(t_e, shape)?)?;
            }
            sweep::protocol_report(&plan)?
        }
        Command::AppendixB(a) => sweep::appendix_b_table(
            a.energy.or_else(|| cfg.f64("energy")).unwrap_or(0.5),
            a.n.or_else(|| cfg.usize("n")).unwrap_or(100),
            &a.lambda_list
                .or_else(|| cfg.f64_list("lambda-list"))
                .unwrap_or_else(|| vec![0.002, 0.005, 0.01, 0.02, 0.05]),
        )?,
        Command::AppendixC(a) => sweep::appendix_c_table(
            &a.nu_list
                .or_else(|| cfg.f64_list("nu-list"))
                .unwrap_or_else(|| vec![0.0, 0.5, 1.0, 2.0]),
            &a.lambda_list
                .or_else(|| cfg.f64_list("lambda-list"))
                .unwrap_or_else(|| vec![0.1, 0.05, 0.02]),
        )?,
        Command::Fiber(a) => sweep::fiber_table(
            a.lambda.or_else(|| cfg.f64("lambda")),
            a.length_km.or_else(|| cfg.f64("length-km")),
            a.gamma.or_else(|| cfg.f64("gamma")).unwrap_or(0.2),
        )?,
        Command::Selftest => {
            let (lines, ok) = sweep::selftest();
            let mut out = open_output(&cli.output)?;
            for line in lines {
                writeln!(out, "{line}").map_err(io_err)?;
            }
            if !ok {
                return Err(Error::InvariantViolation(
                    "selftest reported failures".into(),
                ));
            }
            return Ok(());
        }
    };

    warn_on_tails(&table);
    let mut out = open_output(&cli.output)?;
    table.write(&mut out, format).map_err(io_err)?;
    Ok(())
}

fn open_output(path: &Option<PathBuf>) -> Result<Box<dyn Write>, Error> {
    match path {
        Some(p) => {
            let f = fs::File::create(p)
                .map_err(|e| Error::Usage(format!("cannot create {}: {e}", p.display())))?;
            Ok(Box::new(std::io::BufWriter::new(f)))
        }
        None => Ok(Box::new(std::io::BufWriter::new(std::io::stdout()))),
    }
}

fn io_err(e: std::io::Error) -> Error {
    Error::Usage(format!("write failed: {e}"))
}

/// Surface truncation budgets above the (env-overridable) tail tolerance.
fn warn_on_tails(table: &Table) {
    let tol = tail_tolerance();
    for (ci, col) in table.columns.iter().enumerate() {
        if col.contains("tail") || col.contains("audit") {
            let worst = table
                .rows
                .iter()
                .filter_map(|r| match r.get(ci) {
                    Some(Cell::Float(v)) => Some(*v),
                    _ => None,
                })
                .fold(0.0_f64, f64::max);
            if worst > tol {
                eprintln!(
                    "warning: column '{col}' reaches {worst:.3e}, above the tail tolerance {tol:.1e}"
                );
            }
        }
    }
}

// Exercised here so the explicit-matrix σ₀ surface stays linked into the
// binary even though no subcommand constructs one directly.
#[allow(dead_code)]
fn _explicit_sigma0(m: TruncatedDensityMatrix) -> SigmaZero {
    SigmaZero::Explicit(m)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
