//! Implementations of the subcommands: window selection on the parsed graph,
//! the computations themselves, and the CSV/JSON artifacts each run leaves in
//! the output directory.
//!
//! Every run writes `summary.json` with the verbatim parameters, a pass/fail
//! line per checked invariant, and the worst margins observed; commands with
//! tabular output additionally write `<command>.csv`.  All randomness flows
//! from the `--seed` flag through one counter-based generator, and parallel
//! sweeps draw their inputs sequentially before solving, so identical
//! invocations produce byte-identical artifacts regardless of thread count.

use num_complex::Complex64;
use rand::Rng;
use rayon::prelude::*;
use std::collections::HashMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use schrograph_core::{
    ball_exhaustion, check_fc, dense_eigenpairs, deficiency_probe_birth_death,
    dirichlet_section, form_q, formsum_vs_friedrichs, greens_identity_residual,
    kato_inequality_check, lambda0, load_graph_spec, positive_core_approximation,
    positivity_check, resolvent_apply, seeded_rng, stability_pipeline, validate,
    ExperimentError, Fc, FiniteSection, FormsError, GraphError, GraphFn, GraphSpecError,
    OperatorError, ParsedSpec, Potential, SolverError, Summary, Vertex, Violation,
    WeightedGraph, CONVERGENCE_CSV_HEADER, DENSE_LIMIT,
};

use crate::config::{CommandKind, RunConfig};

/// Per-vertex neighbor-enumeration cap for window growth and validation.
const ENUM_CAP: usize = 1 << 20;
/// Window size when neither `--radius` nor `--size` is given and the graph
/// is infinite (or too large to take whole).
const DEFAULT_WINDOW: usize = 32;
/// Trial counts for the randomized sweeps.
const POSITIVITY_TRIALS: usize = 100;
const GREENS_TRIALS: usize = 100;
/// Slack for entrywise-nonnegativity checks.
const SIGN_SLACK: f64 = 1e-12;

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error("{0}")]
    Spec(#[from] GraphSpecError),
    #[error("{0}")]
    Graph(#[from] GraphError),
    #[error("{0}")]
    Operator(#[from] OperatorError),
    #[error("{0}")]
    Forms(#[from] FormsError),
    #[error("{0}")]
    Solver(#[from] SolverError),
    #[error("{0}")]
    Experiment(#[from] ExperimentError),
    #[error("cannot write {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("{0}")]
    Usage(String),
}

impl RunError {
    /// 1 = an invariant the run was checking failed; 2 = the input or
    /// configuration is unusable; 3 = a solver did not converge.
    pub fn exit_code(&self) -> u8 {
        match self {
            RunError::Solver(e) => solver_exit(e),
            RunError::Experiment(ExperimentError::Solver(e)) => solver_exit(e),
            RunError::Experiment(ExperimentError::SelectionFailure { .. }) => 1,
            _ => 2,
        }
    }
}

fn solver_exit(e: &SolverError) -> u8 {
    match e {
        SolverError::NoConvergence { .. } => 3,
        SolverError::MonotonicityViolation { .. } => 1,
        _ => 2,
    }
}

/// Run the configured command.  `Ok(true)` means every checked invariant
/// held; `Ok(false)` means the run completed but an invariant failed.
pub fn run(config: &RunConfig) -> Result<bool, RunError> {
    fs::create_dir_all(&config.out_dir).map_err(|e| io_error(&config.out_dir, e))?;
    let mut summary = Summary::new(config.cmd.name());
    config.record_params(&mut summary);
    match execute(config, &mut summary) {
        Ok(()) => {
            write_text(&config.out_dir.join("summary.json"), &summary.to_json())?;
            Ok(summary.pass)
        }
        Err(err) => {
            // Leave a record of the aborted run; the error itself decides
            // the exit code.
            summary.check("completed", false, None);
            let _ = fs::write(config.out_dir.join("summary.json"), summary.to_json());
            Err(err)
        }
    }
}

fn execute(config: &RunConfig, summary: &mut Summary) -> Result<(), RunError> {
    let spec = load_graph_spec(&config.graph)?;
    summary.param("graph_kind", &spec.kind);
    match config.cmd {
        CommandKind::Validate => cmd_validate(config, &spec, summary),
        CommandKind::Fc => cmd_fc(config, &spec, summary),
        CommandKind::Assemble => cmd_assemble(config, &spec, summary),
        CommandKind::Lambda0 => cmd_lambda0(config, &spec, summary),
        CommandKind::Resolvent => cmd_resolvent(config, &spec, summary),
        CommandKind::Positivity => cmd_positivity(config, &spec, summary),
        CommandKind::Greens => cmd_greens(config, &spec, summary),
        CommandKind::Kato => cmd_kato(config, &spec, summary),
        CommandKind::Coincide => cmd_coincide(config, &spec, summary),
        CommandKind::CoreApprox => cmd_core_approx(config, &spec, summary),
        CommandKind::Stability => cmd_stability(config, &spec, summary),
        CommandKind::Deficiency => cmd_deficiency(config, &spec, summary),
    }
}

// ---------------------------------------------------------------------------
// Window selection
// ---------------------------------------------------------------------------

/// Pick the window: the ball of `--radius`, the first `--size` vertices in
/// breadth-first discovery order, or (by default) the whole graph when it is
/// finite and of dense-solver size, else the first [`DEFAULT_WINDOW`].
/// The result is sorted, so section indices are in vertex order.
fn select_window(config: &RunConfig, g: &WeightedGraph) -> Result<Vec<Vertex>, RunError> {
    check_root(config.root, g)?;
    let mut s: Vec<Vertex> = if let Some(radius) = config.radius {
        ball_exhaustion(g, config.root, &[radius.max(1)], ENUM_CAP)?
            .largest()
            .to_vec()
    } else if let Some(size) = config.size {
        first_discovered(g, config.root, size)?
    } else {
        match g.vertex_count() {
            Some(count) if count <= DENSE_LIMIT => {
                let direct: Option<Vec<Vertex>> =
                    (0..count).map(|i| g.vertex_by_index(i)).collect();
                match direct {
                    Some(all) => all,
                    None => first_discovered(g, config.root, DEFAULT_WINDOW)?,
                }
            }
            _ => first_discovered(g, config.root, DEFAULT_WINDOW)?,
        }
    };
    s.sort_unstable();
    s.dedup();
    if s.is_empty() {
        return Err(RunError::Usage("the selected window is empty".into()));
    }
    Ok(s)
}

/// Reject roots that are not vertices of a finite graph before any oracle
/// gets queried with them.
fn check_root(root: Vertex, g: &WeightedGraph) -> Result<(), RunError> {
    if let Some(count) = g.vertex_count() {
        let known = (0..count).any(|i| g.vertex_by_index(i) == Some(root));
        if !known {
            return Err(RunError::Usage(format!(
                "--root {root} is not a vertex of this {count}-vertex graph"
            )));
        }
    }
    Ok(())
}

/// First `target` vertices in breadth-first discovery order from `root`,
/// or the whole component when it is smaller.
fn first_discovered(
    g: &WeightedGraph,
    root: Vertex,
    target: usize,
) -> Result<Vec<Vertex>, RunError> {
    let mut radius = 1usize;
    let mut prev_len = 0usize;
    loop {
        let ball = ball_exhaustion(g, root, &[radius], ENUM_CAP)?;
        let ball = ball.largest();
        if ball.len() >= target {
            return Ok(ball[..target].to_vec());
        }
        if ball.len() == prev_len {
            // The ball stopped growing: that is the whole component.
            return Ok(ball.to_vec());
        }
        prev_len = ball.len();
        radius *= 2;
    }
}

// ---------------------------------------------------------------------------
// Shared helpers
// ---------------------------------------------------------------------------

fn io_error(path: &Path, source: std::io::Error) -> RunError {
    RunError::Io {
        path: path.display().to_string(),
        source,
    }
}

fn write_text(path: &Path, content: &str) -> Result<(), RunError> {
    fs::write(path, content).map_err(|e| io_error(path, e))
}

fn write_csv(config: &RunConfig, content: &str) -> Result<(), RunError> {
    let path = config.out_dir.join(format!("{}.csv", config.cmd.name()));
    write_text(&path, content)
}

/// `--alpha` when given, else one above the window's spectral floor.
fn resolve_alpha(config: &RunConfig, section: &FiniteSection) -> Result<f64, RunError> {
    match config.alpha {
        Some(a) => Ok(a),
        None => {
            let l0 = lambda0(section, config.tol.min(1e-8))?.value;
            Ok(1.0 + (-l0).max(0.0))
        }
    }
}

/// Pointwise negative part `min(V, 0)` of the potential on the window.
fn negative_split(v: &Potential, window: &[Vertex]) -> Potential {
    let map: HashMap<Vertex, f64> = window
        .iter()
        .map(|&x| (x, v.value(x).min(0.0)))
        .collect();
    Potential::from_map(map)
}

/// Pointwise positive part `max(V, 0)` of the potential on the window.
fn positive_split(v: &Potential, window: &[Vertex]) -> Potential {
    let map: HashMap<Vertex, f64> = window
        .iter()
        .map(|&x| (x, v.value(x).max(0.0)))
        .collect();
    Potential::from_map(map)
}

fn draw_uniform(rng: &mut impl Rng, n: usize, lo: f64, hi: f64) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(lo..hi)).collect()
}

/// Threshold the matrix-coincidence checks scale with: a few ulps at the
/// magnitude of the largest diagonal entry.
fn coincidence_threshold(section: &FiniteSection) -> f64 {
    let max_diag = section
        .diagonal()
        .iter()
        .fold(0.0f64, |acc, &d| acc.max(d.abs()));
    (1.0 + max_diag) * 2.0f64.powi(-45)
}

fn convergence_csv(rows: &[schrograph_core::ConvergenceRow]) -> String {
    let mut out = String::from(CONVERGENCE_CSV_HEADER);
    out.push('\n');
    for row in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            row.k_or_r, row.alpha, row.vector_id, row.l2_error, row.form_error, row.section_size
        );
    }
    out
}

// ---------------------------------------------------------------------------
// Commands
// ---------------------------------------------------------------------------

fn cmd_validate(
    config: &RunConfig,
    spec: &ParsedSpec,
    summary: &mut Summary,
) -> Result<(), RunError> {
    let window = select_window(config, &spec.graph)?;
    let report = validate(&spec.graph, &window, ENUM_CAP);
    let mut csv = String::from("kind,x,y,detail\n");
    for v in &report.violations {
        let (kind, x, y, detail) = describe_violation(v);
        let _ = writeln!(csv, "{kind},{x},{y},{detail}");
    }
    write_csv(config, &csv)?;
    summary.param("window", window.len());
    summary.param("checked_vertices", report.checked_vertices);
    summary.param("checked_pairs", report.checked_pairs);
    summary.check(
        "no_violations",
        report.is_ok(),
        Some(-(report.violations.len() as f64)),
    );
    Ok(())
}

fn describe_violation(v: &Violation) -> (&'static str, String, String, String) {
    match *v {
        Violation::AsymmetricWeight { x, y, bxy, byx } => (
            "asymmetric_weight",
            x.to_string(),
            y.to_string(),
            format!("b(x;y)={bxy} b(y;x)={byx}"),
        ),
        Violation::SelfLoop { x, weight } => (
            "self_loop",
            x.to_string(),
            String::new(),
            format!("weight={weight}"),
        ),
        Violation::NegativeWeight { x, y, weight } => (
            "negative_weight",
            x.to_string(),
            y.to_string(),
            format!("weight={weight}"),
        ),
        Violation::NonPositiveMeasure { x, mu } => (
            "nonpositive_measure",
            x.to_string(),
            String::new(),
            format!("mu={mu}"),
        ),
        Violation::DegreeMismatch {
            x,
            listed_sum,
            degree,
        } => (
            "degree_mismatch",
            x.to_string(),
            String::new(),
            format!("listed={listed_sum} degree={degree}"),
        ),
    }
}

fn cmd_fc(config: &RunConfig, spec: &ParsedSpec, summary: &mut Summary) -> Result<(), RunError> {
    let window = select_window(config, &spec.graph)?;
    let mut csv = String::from("vertex,fc_value,exact\n");
    let mut all_finite = true;
    let mut max_fc = 0.0f64;
    for &x in &window {
        match check_fc(&spec.graph, x, None, ENUM_CAP)? {
            Fc::Finite { value, exact } => {
                let _ = writeln!(csv, "{x},{value},{exact}");
                all_finite &= value.is_finite();
                max_fc = max_fc.max(value);
            }
            Fc::Infinite => {
                let _ = writeln!(csv, "{x},inf,true");
                all_finite = false;
            }
        }
    }
    write_csv(config, &csv)?;
    summary.param("window", window.len());
    summary.param("max_fc", max_fc);
    summary.check("fc_finite", all_finite, None);
    Ok(())
}

fn cmd_assemble(
    config: &RunConfig,
    spec: &ParsedSpec,
    summary: &mut Summary,
) -> Result<(), RunError> {
    let window = select_window(config, &spec.graph)?;
    let section = dirichlet_section(&spec.graph, &spec.potential, &window)?;
    let coo = section.to_coo_string();
    write_csv(config, &coo)?;
    let entries = coo.lines().count();
    summary.param("window", window.len());
    summary.param("stored_entries", entries);
    let diag_finite = section.diagonal().iter().all(|d| d.is_finite());
    summary.check("diagonal_finite", diag_finite, None);
    Ok(())
}

fn cmd_lambda0(
    config: &RunConfig,
    spec: &ParsedSpec,
    summary: &mut Summary,
) -> Result<(), RunError> {
    let window = select_window(config, &spec.graph)?;
    let section = dirichlet_section(&spec.graph, &spec.potential, &window)?;
    let l0 = lambda0(&section, config.tol)?;
    let mut csv = String::from("n,lambda0,residual,iterations\n");
    let _ = writeln!(
        csv,
        "{},{},{},{}",
        window.len(),
        l0.value,
        l0.residual,
        l0.iterations
    );
    write_csv(config, &csv)?;
    summary.param("window", window.len());
    summary.param("lambda0", l0.value);
    summary.check("lambda0_finite", l0.value.is_finite(), None);
    Ok(())
}

fn cmd_resolvent(
    config: &RunConfig,
    spec: &ParsedSpec,
    summary: &mut Summary,
) -> Result<(), RunError> {
    let window = select_window(config, &spec.graph)?;
    let section = dirichlet_section(&spec.graph, &spec.potential, &window)?;
    let alpha = resolve_alpha(config, &section)?;
    let mut rng = seeded_rng(config.seed);
    let rhs = draw_uniform(&mut rng, window.len(), 0.0, 1.0);
    let res = resolvent_apply(&section, alpha, &rhs, config.tol)?;
    let mut csv = String::from("index,vertex,rhs,solution\n");
    for (i, &x) in window.iter().enumerate() {
        let _ = writeln!(csv, "{i},{x},{},{}", rhs[i], res.solution[i]);
    }
    write_csv(config, &csv)?;
    let min_entry = res
        .solution
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min);
    summary.param("window", window.len());
    summary.param("alpha", alpha);
    summary.param("residual", res.residual);
    summary.shift = Some(alpha);
    summary.check(
        "entrywise_nonnegative",
        min_entry >= -SIGN_SLACK,
        Some(min_entry + SIGN_SLACK),
    );
    Ok(())
}

fn cmd_positivity(
    config: &RunConfig,
    spec: &ParsedSpec,
    summary: &mut Summary,
) -> Result<(), RunError> {
    let window = select_window(config, &spec.graph)?;
    let section = dirichlet_section(&spec.graph, &spec.potential, &window)?;
    let alpha = resolve_alpha(config, &section)?;
    let report = positivity_check(&section, alpha, POSITIVITY_TRIALS, SIGN_SLACK, config.seed)?;
    let mut csv = String::from("trial,min_entry\n");
    for (i, m) in report.per_trial.iter().enumerate() {
        let _ = writeln!(csv, "{i},{m}");
    }
    write_csv(config, &csv)?;
    summary.param("window", window.len());
    summary.param("alpha", alpha);
    summary.param("trials", report.trials);
    summary.shift = Some(alpha);
    summary.check(
        "entrywise_nonnegative",
        report.pass,
        Some(report.worst_margin + SIGN_SLACK),
    );
    Ok(())
}

fn cmd_greens(
    config: &RunConfig,
    spec: &ParsedSpec,
    summary: &mut Summary,
) -> Result<(), RunError> {
    let window = select_window(config, &spec.graph)?;
    let g = &spec.graph;
    let w = &spec.potential;
    // Inputs are drawn sequentially from the seeded stream, then the trials
    // run in parallel; collection order is trial order either way.
    let mut rng = seeded_rng(config.seed);
    let mut inputs: Vec<(GraphFn, GraphFn)> = Vec::with_capacity(GREENS_TRIALS);
    for _ in 0..GREENS_TRIALS {
        let mut draw = || {
            GraphFn::from_pairs(window.iter().map(|&x| {
                let re = rng.random_range(-1.0..1.0);
                let im = rng.random_range(-1.0..1.0);
                (x, Complex64::new(re, im))
            }))
        };
        let f = draw();
        let u = draw();
        inputs.push((f, u));
    }
    let results: Vec<(f64, f64)> = inputs
        .par_iter()
        .map(|(f, u)| -> Result<(f64, f64), RunError> {
            let residual = greens_identity_residual(g, w, f, u)?;
            let scale = form_q(g, w, f, u)?.total.norm();
            Ok((residual, scale))
        })
        .collect::<Result<_, _>>()?;
    let mut csv = String::from("trial,residual,scale\n");
    let mut worst = f64::INFINITY;
    for (i, (residual, scale)) in results.iter().enumerate() {
        let _ = writeln!(csv, "{i},{residual},{scale}");
        worst = worst.min(config.tol * (1.0 + scale) - residual);
    }
    write_csv(config, &csv)?;
    summary.param("window", window.len());
    summary.param("trials", GREENS_TRIALS);
    summary.check("greens_identity", worst >= 0.0, Some(worst));
    Ok(())
}

fn cmd_kato(config: &RunConfig, spec: &ParsedSpec, summary: &mut Summary) -> Result<(), RunError> {
    let window = select_window(config, &spec.graph)?;
    if window.len() > DENSE_LIMIT {
        return Err(RunError::Usage(format!(
            "the eigenpair sweep needs a window of at most {DENSE_LIMIT} vertices, got {}",
            window.len()
        )));
    }
    let section = dirichlet_section(&spec.graph, &spec.potential, &window)?;
    let w0 = negative_split(&spec.potential, &window);
    let pairs = dense_eigenpairs(&section);
    let mut csv = String::from("pair,beta,eigen_residual,min_margin,interior_count\n");
    let mut all_pass = true;
    let mut worst_margin = f64::INFINITY;
    for (idx, (beta, f)) in pairs.iter().enumerate() {
        let eig_tol = config.tol.max(1e-12) * (1.0 + beta.abs());
        let report = kato_inequality_check(&section, &w0, f, *beta, eig_tol)?;
        all_pass &= report.passes(config.tol);
        let margin_text = match report.min_margin() {
            Some(m) => {
                worst_margin = worst_margin.min(m);
                m.to_string()
            }
            None => String::new(),
        };
        let _ = writeln!(
            csv,
            "{idx},{beta},{},{margin_text},{}",
            report.eigen_residual,
            report.interior.len()
        );
    }
    write_csv(config, &csv)?;
    summary.param("window", window.len());
    summary.param("pairs", pairs.len());
    let margin = worst_margin.is_finite().then_some(worst_margin);
    summary.check("absolute_value_bound", all_pass, margin);
    Ok(())
}

fn cmd_coincide(
    config: &RunConfig,
    spec: &ParsedSpec,
    summary: &mut Summary,
) -> Result<(), RunError> {
    let window = select_window(config, &spec.graph)?;
    let v1 = negative_split(&spec.potential, &window);
    let v2 = positive_split(&spec.potential, &window);
    let result = formsum_vs_friedrichs(&spec.graph, &v1, &v2, &window)?;
    write_csv(config, &convergence_csv(&result.drift_rows))?;
    let section = dirichlet_section(&spec.graph, &spec.potential, &window)?;
    let matrix_threshold = coincidence_threshold(&section);
    summary.param("window", window.len());
    summary.param("alpha", result.alpha);
    summary.shift = Some(result.alpha);
    summary.check(
        "assembly_paths_coincide",
        result.max_matrix_discrepancy <= matrix_threshold,
        Some(matrix_threshold - result.max_matrix_discrepancy),
    );
    summary.check(
        "resolvent_drift_small",
        result.max_drift <= config.tol,
        Some(config.tol - result.max_drift),
    );
    Ok(())
}

fn cmd_core_approx(
    config: &RunConfig,
    spec: &ParsedSpec,
    summary: &mut Summary,
) -> Result<(), RunError> {
    let window = select_window(config, &spec.graph)?;
    let v1 = negative_split(&spec.potential, &window);
    let section = dirichlet_section(&spec.graph, &v1, &window)?;
    let alpha = resolve_alpha(config, &section)?;
    let mut rng = seeded_rng(config.seed);
    let u = draw_uniform(&mut rng, window.len(), 0.0, 1.0);
    let trace = positive_core_approximation(
        &spec.graph,
        &v1,
        &window,
        &u,
        &config.k_grid,
        &config.r_grid,
        alpha,
    )?;
    write_csv(config, &trace.to_csv())?;
    summary.param("window", window.len());
    summary.param("alpha", alpha);
    summary.shift = Some(trace.shift);
    summary.check(
        "entrywise_nonnegative",
        trace.worst_min_entry >= -SIGN_SLACK,
        Some(trace.worst_min_entry + SIGN_SLACK),
    );
    summary.check(
        "energy_estimate",
        trace.worst_estimate_margin >= -config.tol,
        Some(trace.worst_estimate_margin + config.tol),
    );
    let all_met = trace.selected.iter().all(|s| s.met_rule);
    summary.check("selection_rule_met", all_met, None);
    Ok(())
}

fn cmd_stability(
    config: &RunConfig,
    spec: &ParsedSpec,
    summary: &mut Summary,
) -> Result<(), RunError> {
    let window = select_window(config, &spec.graph)?;
    let v1 = negative_split(&spec.potential, &window);
    let v2 = positive_split(&spec.potential, &window);
    let base = dirichlet_section(&spec.graph, &v1, &window)?;
    let alpha = resolve_alpha(config, &base)?;
    let mut rng = seeded_rng(config.seed);
    let mut u = draw_uniform(&mut rng, window.len(), -1.0, 1.0);
    let norm = base.mu_norm(&u);
    if norm > 0.0 {
        for x in &mut u {
            *x /= norm;
        }
    }
    let report = stability_pipeline(
        &spec.graph,
        &v1,
        &v2,
        &window,
        &u,
        alpha,
        &config.k_grid,
        &config.r_grid,
    )?;
    write_csv(config, &report.to_csv())?;
    let full = dirichlet_section(&spec.graph, &spec.potential, &window)?;
    let matrix_threshold = coincidence_threshold(&full);
    summary.param("window", window.len());
    summary.param("alpha", alpha);
    summary.param("bound_slope", report.a1);
    summary.param("bound_offset", report.a2);
    summary.param("fit_rms", report.fit_rms);
    summary.shift = Some(report.shift);
    summary.check(
        "split_assembly_coincides",
        report.identity_max_diff <= matrix_threshold,
        Some(matrix_threshold - report.identity_max_diff),
    );
    summary.check(
        "resolvent_domination",
        report.domination_worst <= config.tol,
        Some(config.tol - report.domination_worst),
    );
    summary.check(
        "commutation_identity",
        report.commutation_worst <= config.tol,
        Some(config.tol - report.commutation_worst),
    );
    summary.check(
        "selection_rule_met",
        report.worst_selection_margin >= 0.0,
        Some(report.worst_selection_margin),
    );
    Ok(())
}

fn cmd_deficiency(
    config: &RunConfig,
    spec: &ParsedSpec,
    summary: &mut Summary,
) -> Result<(), RunError> {
    let Some((b_seq, mu_seq)) = spec.chain.as_ref() else {
        return Err(RunError::Usage(
            "the growth probe needs a birth_death graph description".into(),
        ));
    };
    let steps = config.size.unwrap_or(1000);
    if steps < 2 {
        return Err(RunError::Usage(
            "the growth probe needs --size of at least 2".into(),
        ));
    }
    // Array-backed chains only reach as far as their tables: the recursion
    // reads b(0..steps-1) and mu(0..steps).
    let cap = match (b_seq.table_len(), mu_seq.table_len()) {
        (None, None) => None,
        (Some(nb), None) => Some(nb),
        (None, Some(nm)) => Some(nm.saturating_sub(1)),
        (Some(nb), Some(nm)) => Some(nb.min(nm.saturating_sub(1))),
    };
    if let Some(cap) = cap {
        if steps > cap {
            return Err(RunError::Usage(format!(
                "the chain's weight tables support at most {cap} recursion steps, \
                 got --size {steps}"
            )));
        }
    }
    let alpha = match config.alpha {
        Some(a) if a < 0.0 => {
            return Err(RunError::Usage(format!(
                "the growth probe needs a nonnegative --alpha, got {a}"
            )));
        }
        Some(a) => a,
        None => {
            // One above the ground energy of a leading window.
            let head: Vec<Vertex> = (0..steps.min(256) as Vertex).collect();
            let section = dirichlet_section(&spec.graph, &spec.potential, &head)?;
            resolve_alpha(config, &section)?
        }
    };
    let report = deficiency_probe_birth_death(b_seq, mu_seq, &spec.potential, alpha, steps)?;
    let mut csv = String::from("n,log_abs_u,sign,log_partial_sum\n");
    for ((n, log_u, sign), (_, log_p)) in report
        .checkpoints
        .iter()
        .zip(report.partial_log_sums.iter())
    {
        let _ = writeln!(csv, "{n},{log_u},{sign},{log_p}");
    }
    write_csv(config, &csv)?;
    summary.param("steps", steps);
    summary.param("alpha", alpha);
    summary.param("classification", report.classification.as_str());
    summary.param("growth_ratio", report.growth_ratio);
    summary.param(
        "u_head",
        report
            .u_head
            .iter()
            .map(|x| x.to_string())
            .collect::<Vec<_>>()
            .join(","),
    );
    let track_ok = report
        .checkpoints
        .iter()
        .all(|&(_, log_u, sign)| sign == 0 || log_u.is_finite());
    summary.check("log_track_finite", track_ok, None);
    Ok(())
}
