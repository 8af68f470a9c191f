//! Command-line interface.
//!
//! Exit codes: 0 on success, 1 when a computation fails (for example an
//! out-of-domain `κ`), 2 on usage or configuration errors.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::error::{Error, Result};
use crate::experiments::{run_amp_lv, run_figure, write_amp_table, ExperimentConfig, FigureName};
use crate::fixed_point::{solve_system, GrowthLaw};
use crate::lcp::{equilibrium, Solver};
use crate::lv_stats::survival_fraction;
use crate::rand_matrix::{sample_elliptic, sample_normalized_elliptic};

/// Environment variable naming the default output directory.
pub const OUTPUT_DIR_ENV: &str = "ELLIPTIC_AMP_OUTPUT_DIR";

#[derive(Debug, Parser)]
#[command(name = "elliptic-amp", version, about = "AMP for elliptic random matrices and random Lotka-Volterra equilibria")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Sample an elliptic matrix and print it as JSON.
    SampleMatrix {
        #[arg(long)]
        n: usize,
        #[arg(long, allow_hyphen_values = true)]
        rho: f64,
        #[arg(long)]
        seed: Option<u64>,
        /// Divide by √n.
        #[arg(long)]
        normalized: bool,
        /// Write to this file instead of standard output.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Solve the (δ, σ, γ) system and print the solution as JSON.
    SolveSystem {
        #[arg(long)]
        kappa: f64,
        #[arg(long, allow_hyphen_values = true)]
        rho: f64,
        #[command(flatten)]
        growth: GrowthArgs,
    },
    /// Compute the equilibrium of one random Lotka-Volterra system.
    Equilibrium {
        #[command(flatten)]
        common: ScenarioArgs,
        #[arg(long, value_enum)]
        solver: Option<SolverArg>,
        /// Print the full abundance vector.
        #[arg(long)]
        full: bool,
    },
    /// Run AMP as a Lotka-Volterra solver and compare with density evolution.
    AmpRun {
        #[command(flatten)]
        common: ScenarioArgs,
        /// Number of AMP iterations.
        #[arg(long)]
        depth: Option<usize>,
        #[arg(long)]
        output_dir: Option<PathBuf>,
    },
    /// Run a figure experiment and write its CSV files.
    Figure {
        /// One of prop, dist, truncdist, exchangeability.
        name: String,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        output_dir: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
    },
}

#[derive(Debug, Clone, Copy, clap::ValueEnum)]
pub enum SolverArg {
    Contraction,
    Lemke,
    Auto,
}

impl From<SolverArg> for Solver {
    fn from(s: SolverArg) -> Self {
        match s {
            SolverArg::Contraction => Solver::Contraction,
            SolverArg::Lemke => Solver::Lemke,
            SolverArg::Auto => Solver::Auto,
        }
    }
}

#[derive(Debug, Args)]
pub struct GrowthArgs {
    /// Growth-rate atoms. Defaults to r ≡ 1.
    #[arg(long = "r", num_args = 1.., value_delimiter = ',')]
    pub r: Vec<f64>,
    /// Atom weights; uniform when omitted.
    #[arg(long, num_args = 1.., value_delimiter = ',')]
    pub weights: Vec<f64>,
}

impl GrowthArgs {
    fn law(&self) -> Result<Option<GrowthLaw>> {
        if self.r.is_empty() {
            if !self.weights.is_empty() {
                return Err(Error::Config("--weights given without --r".into()));
            }
            return Ok(None);
        }
        let weights = if self.weights.is_empty() {
            vec![1.0 / self.r.len() as f64; self.r.len()]
        } else if self.weights.len() == self.r.len() {
            self.weights.clone()
        } else {
            return Err(Error::Config("--weights must have one entry per --r value".into()));
        };
        GrowthLaw::new(self.r.iter().copied().zip(weights).collect())
            .map(Some)
            .map_err(|e| Error::Config(e.to_string()))
    }
}

/// Flags shared by the commands that read a scenario; flags override the
/// config file.
#[derive(Debug, Args)]
pub struct ScenarioArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub kappa: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub rho: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[command(flatten)]
    pub growth: GrowthArgs,
}

impl ScenarioArgs {
    fn resolve(&self) -> Result<ExperimentConfig> {
        let mut cfg = load_config(self.config.as_deref())?;
        if let Some(n) = self.n {
            cfg.n = n;
        }
        if let Some(k) = self.kappa {
            cfg.kappa = k;
        }
        if let Some(r) = self.rho {
            cfg.rho = r;
        }
        if let Some(s) = self.seed {
            cfg.seed = Some(s);
        }
        if let Some(law) = self.growth.law()? {
            cfg.growth = Some(law);
            cfg.blocks = None;
        }
        Ok(cfg)
    }
}

fn load_config(path: Option<&Path>) -> Result<ExperimentConfig> {
    match path {
        Some(p) => ExperimentConfig::load(p),
        None => Ok(ExperimentConfig::default()),
    }
}

/// Flag, then config, then the environment variable, then the current
/// directory.
fn output_dir(flag: Option<&Path>, cfg: &ExperimentConfig) -> PathBuf {
    flag.map(Path::to_path_buf)
        .or_else(|| cfg.output_dir.clone())
        .or_else(|| std::env::var_os(OUTPUT_DIR_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("."))
}

fn require_seed(seed: Option<u64>) -> Result<u64> {
    seed.ok_or_else(|| Error::Config("--seed is required for this command".into()))
}

fn to_json<T: serde::Serialize>(value: &T) -> Result<String> {
    Ok(serde_json::to_string_pretty(value)?)
}

fn emit(out: &mut dyn Write, text: &str) -> Result<()> {
    writeln!(out, "{text}").map_err(Error::from)
}

fn execute(cmd: Command, out: &mut dyn Write) -> Result<()> {
    match cmd {
        Command::SampleMatrix { n, rho, seed, normalized, output } => {
            let seed = require_seed(seed)?;
            let m = if normalized { sample_normalized_elliptic(n, rho, seed)? } else { sample_elliptic(n, rho, seed)? };
            let text = to_json(&serde_json::json!({ "n": n, "rho": rho, "seed": seed, "normalized": normalized, "rows": m.to_rows() }))?;
            match output {
                Some(path) => std::fs::write(&path, text + "\n")
                    .map_err(|e| Error::Io(format!("cannot write {}: {e}", path.display()))),
                None => emit(out, &text),
            }
        }
        Command::SolveSystem { kappa, rho, growth } => {
            let law = growth.law()?.map_or_else(|| GrowthLaw::constant(1.0), Ok)?;
            let sol = solve_system(kappa, rho, &law)?;
            emit(out, &to_json(&sol)?)
        }
        Command::Equilibrium { common, solver, full } => {
            let mut cfg = common.resolve()?;
            if let Some(s) = solver {
                cfg.solver = s.into();
            }
            cfg.validate()?;
            let seed = cfg.require_seed()?;
            let a = sample_normalized_elliptic(cfg.n, cfg.rho, seed)?;
            let r = cfg.growth_vector()?;
            let res = equilibrium(&a, cfg.kappa, &r, cfg.solver)?;
            let mut value = serde_json::json!({
                "n": cfg.n,
                "kappa": cfg.kappa,
                "rho": cfg.rho,
                "seed": seed,
                "gate_passed": res.gate_passed,
                "norm_a": res.norm_a,
                "norm_symmetric": res.norm_symmetric,
                "solver": res.solver,
                "survival_fraction": survival_fraction(&res.x_star, 0.0),
                "residuals": res.residuals,
            });
            if full {
                value["x_star"] = serde_json::to_value(&res.x_star)?;
            }
            emit(out, &to_json(&value)?)
        }
        Command::AmpRun { common, depth, output_dir: dir } => {
            let mut cfg = common.resolve()?;
            if let Some(k) = depth {
                cfg.depth = k;
            }
            cfg.validate()?;
            cfg.require_seed()?;
            let report = run_amp_lv(&cfg)?;
            let dir = output_dir(dir.as_deref(), &cfg);
            std::fs::create_dir_all(&dir).map_err(|e| Error::Io(format!("cannot create {}: {e}", dir.display())))?;
            write_amp_table(&report, &cfg, &dir.join("amp_lv.csv"))?;
            emit(out, &to_json(&report)?)
        }
        Command::Figure { name, config, output_dir: dir, seed } => {
            let name: FigureName = name.parse()?;
            let mut cfg = load_config(config.as_deref())?;
            if let Some(s) = seed {
                cfg.seed = Some(s);
            }
            if name != FigureName::Truncdist {
                cfg.require_seed()?;
            }
            let dir = output_dir(dir.as_deref(), &cfg);
            let result = run_figure(name, &cfg, &dir)?;
            let summary_path = dir.join(format!("{}_summary.json", name.as_str()));
            std::fs::write(&summary_path, to_json(&result.summary)? + "\n")
                .map_err(|e| Error::Io(format!("cannot write {}: {e}", summary_path.display())))?;
            for f in &result.files {
                emit(out, &f.display().to_string())?;
            }
            Ok(())
        }
    }
}

fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Config(_) => 2,
        _ => 1,
    }
}

/// Parses `args` (including the program name) and runs the command.
pub fn run_with<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let text = e.render().to_string();
            if code == 0 {
                let _ = write!(out, "{text}");
            } else {
                let _ = write!(err, "{text}");
            }
            return code;
        }
    };
    match execute(cli.command, out) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            exit_code(&e)
        }
    }
}

/// Runs the CLI on the process arguments.
pub fn run() -> i32 {
    let stdout = std::io::stdout();
    let stderr = std::io::stderr();
    run_with(std::env::args_os(), &mut stdout.lock(), &mut stderr.lock())
}
