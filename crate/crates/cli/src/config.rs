//! Flag parsing and run configuration: which computation to run, on which
//! window of which graph, and with which numeric parameters.  Defaults that
//! depend on the graph (the spectral shift, the window itself) are resolved
//! later, by the command implementations.

use clap::{Parser, ValueEnum};
use schrograph_core::{Summary, Vertex};
use std::path::PathBuf;

/// Grid used for `--k-grid` and `--r-grid` when the flag is absent.
pub const DEFAULT_GRID: [f64; 5] = [1.0, 2.0, 4.0, 8.0, 16.0];

#[derive(Debug, Parser)]
#[command(
    name = "schrograph",
    version,
    about = "Finite-section computations on weighted graphs: validation, \
             spectra, resolvents, and truncation-convergence experiments"
)]
pub struct Cli {
    /// Path to the graph description file (JSON).
    #[arg(long)]
    pub graph: PathBuf,

    /// Computation to run.
    #[arg(long = "cmd", value_enum)]
    pub cmd: CommandKind,

    /// Vertex the window grows from.
    #[arg(long, default_value_t = 0)]
    pub root: u64,

    /// Use the ball of this radius around --root as the window.
    #[arg(long, conflicts_with = "size")]
    pub radius: Option<usize>,

    /// Use the first SIZE vertices discovered from --root as the window.
    /// For the growth probe this is the number of recursion steps instead.
    #[arg(long)]
    pub size: Option<usize>,

    /// Spectral shift for resolvent solves; derived from the window's ground
    /// energy when omitted.
    #[arg(long)]
    pub alpha: Option<f64>,

    /// Solver tolerance and invariant-check slack.
    #[arg(long, default_value_t = 1e-10)]
    pub tol: f64,

    /// Seed for the deterministic random sweeps.
    #[arg(long, default_value_t = 42)]
    pub seed: u64,

    /// Comma-separated truncation depths (defaults to 1,2,4,8,16).
    #[arg(long = "k-grid", value_delimiter = ',')]
    pub k_grid: Vec<f64>,

    /// Comma-separated resolvent parameters (defaults to 1,2,4,8,16).
    #[arg(long = "r-grid", value_delimiter = ',')]
    pub r_grid: Vec<f64>,

    /// Directory the CSV and JSON artifacts are written to.
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum CommandKind {
    /// Check symmetry, signs, and degree consistency on the window.
    Validate,
    /// Sum `b(x,y)^2 / mu(y)` per window vertex.
    Fc,
    /// Assemble the window matrix and dump it in coordinate format.
    Assemble,
    /// Smallest eigenvalue of the window matrix, with residual certificate.
    Lambda0,
    /// Solve `(H + alpha) u = v` for a seeded random nonnegative `v`.
    Resolvent,
    /// Resolvents of nonnegative vectors stay nonnegative: 100 random trials.
    Positivity,
    /// Discrete Green's identity on 100 random complex vector pairs.
    Greens,
    /// Pointwise eigenvalue inequality for absolute values, all eigenpairs.
    Kato,
    /// The two assembly routes for a split potential produce one matrix.
    Coincide,
    /// Truncation convergence for the negative part of the potential.
    CoreApprox,
    /// Truncation convergence for the positive part, plus the resolvent
    /// contraction along the parameter axis.
    Stability,
    /// Signed-log growth probe for birth–death chains.
    Deficiency,
}

impl CommandKind {
    pub fn name(self) -> &'static str {
        match self {
            CommandKind::Validate => "validate",
            CommandKind::Fc => "fc",
            CommandKind::Assemble => "assemble",
            CommandKind::Lambda0 => "lambda0",
            CommandKind::Resolvent => "resolvent",
            CommandKind::Positivity => "positivity",
            CommandKind::Greens => "greens",
            CommandKind::Kato => "kato",
            CommandKind::Coincide => "coincide",
            CommandKind::CoreApprox => "core_approx",
            CommandKind::Stability => "stability",
            CommandKind::Deficiency => "deficiency",
        }
    }
}

#[derive(Debug)]
pub struct RunConfig {
    pub graph: PathBuf,
    pub cmd: CommandKind,
    pub root: Vertex,
    pub radius: Option<usize>,
    pub size: Option<usize>,
    pub alpha: Option<f64>,
    pub tol: f64,
    pub seed: u64,
    pub k_grid: Vec<f64>,
    pub r_grid: Vec<f64>,
    pub out_dir: PathBuf,
}

impl RunConfig {
    pub fn from_cli(cli: Cli) -> Result<Self, String> {
        if !(cli.tol.is_finite() && cli.tol > 0.0) {
            return Err(format!("--tol must be a positive number, got {}", cli.tol));
        }
        if let Some(a) = cli.alpha {
            if !a.is_finite() {
                return Err(format!("--alpha must be finite, got {a}"));
            }
        }
        if let Some(s) = cli.size {
            if s == 0 {
                return Err("--size must be at least 1".into());
            }
        }
        let k_grid = if cli.k_grid.is_empty() {
            DEFAULT_GRID.to_vec()
        } else {
            cli.k_grid
        };
        let r_grid = if cli.r_grid.is_empty() {
            DEFAULT_GRID.to_vec()
        } else {
            cli.r_grid
        };
        for &k in &k_grid {
            if !(k.is_finite() && k >= 0.0) {
                return Err(format!("--k-grid entries must be nonnegative, got {k}"));
            }
        }
        for &r in &r_grid {
            if !(r.is_finite() && r > 0.0) {
                return Err(format!("--r-grid entries must be positive, got {r}"));
            }
        }
        Ok(RunConfig {
            graph: cli.graph,
            cmd: cli.cmd,
            root: cli.root,
            radius: cli.radius,
            size: cli.size,
            alpha: cli.alpha,
            tol: cli.tol,
            seed: cli.seed,
            k_grid,
            r_grid,
            out_dir: cli.out,
        })
    }

    /// Record the flag values verbatim, so identical invocations produce
    /// identical summaries.
    pub fn record_params(&self, summary: &mut Summary) {
        summary.param("graph", self.graph.display());
        summary.param("root", self.root);
        if let Some(r) = self.radius {
            summary.param("radius", r);
        }
        if let Some(s) = self.size {
            summary.param("size", s);
        }
        if let Some(a) = self.alpha {
            summary.param("alpha_flag", a);
        }
        summary.param("tol", self.tol);
        summary.param("seed", self.seed);
        summary.param("k_grid", join_floats(&self.k_grid));
        summary.param("r_grid", join_floats(&self.r_grid));
    }
}

fn join_floats(xs: &[f64]) -> String {
    xs.iter()
        .map(|x| x.to_string())
        .collect::<Vec<_>>()
        .join(",")
}

/// Size the global thread pool from `GS_THREADS` when the variable is set.
pub fn init_threads() -> Result<(), String> {
    match std::env::var("GS_THREADS") {
        Err(_) => Ok(()),
        Ok(raw) => {
            let n: usize = raw
                .parse()
                .map_err(|_| format!("GS_THREADS must be a positive integer, got `{raw}`"))?;
            if n == 0 {
                return Err("GS_THREADS must be a positive integer, got `0`".into());
            }
            rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build_global()
                .map_err(|e| format!("cannot size the thread pool: {e}"))
        }
    }
}
