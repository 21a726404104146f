//! Linear algebra on finite sections: smallest eigenvalues with residual
//! certificates, shifted solves `(A + alpha)^{-1} v`, positivity and
//! resolvent-domination checks, and the truncation-convergence monitor.
//!
//! Everything runs on the symmetrized matrix `B`; solutions are mapped back
//! to function coordinates through `D^{1/2}`.  Dense factorizations handle
//! sections up to [`DENSE_LIMIT`] vertices; beyond that eigenvalues come
//! from Lanczos with full reorthogonalization and solves from a
//! Jacobi-preconditioned conjugate gradient.

use nalgebra::DMatrix;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::accum::Neumaier;
use crate::operator::FiniteSection;

/// Largest section size handled by dense factorizations.
pub const DENSE_LIMIT: usize = 2000;

/// How far above `-lambda0` a shift must sit before a solve is attempted.
pub const SHIFT_MARGIN: f64 = 1e-8;

#[derive(Debug, Error)]
pub enum SolverError {
    #[error("{what} did not converge in {iterations} iterations (residual {residual:.3e})")]
    NoConvergence {
        what: String,
        iterations: usize,
        residual: f64,
    },
    #[error(
        "shift {alpha} is too close to the spectral edge: needs alpha > {threshold:.6e} \
         (smallest eigenvalue ~ {lambda0:.6e})"
    )]
    ShiftTooSmall {
        alpha: f64,
        lambda0: f64,
        threshold: f64,
    },
    #[error("sections do not share a vertex set and index map")]
    IndexMismatch,
    #[error(
        "sampled quadratic forms are not monotone toward the limit \
         (defect {defect:.3e} at family index {index})"
    )]
    MonotonicityViolation { index: usize, defect: f64 },
    #[error("perturbation is negative at section index {index} ({value})")]
    NegativePerturbation { index: usize, value: f64 },
}

/// A deterministic RNG for test vectors; one fixed seed, one stream.
pub fn seeded_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = Neumaier::new();
    for (x, y) in a.iter().zip(b) {
        acc.add(x * y);
    }
    acc.total()
}

fn norm2(a: &[f64]) -> f64 {
    dot(a, a).max(0.0).sqrt()
}

/// Rough magnitude of `B` (an infinity-norm bound); tolerances on residuals
/// are scaled by it so large potentials do not trip absolute thresholds.
fn matrix_scale(section: &FiniteSection) -> f64 {
    let mut scale = 0.0f64;
    let mut row_off = vec![0.0f64; section.n()];
    for &(i, j, v) in section.upper_pairs() {
        row_off[i as usize] += v.abs();
        row_off[j as usize] += v.abs();
    }
    for (i, &d) in section.diagonal().iter().enumerate() {
        scale = scale.max(d.abs() + row_off[i]);
    }
    scale.max(1.0)
}

// ---------------------------------------------------------------------------
// Smallest eigenvalue
// ---------------------------------------------------------------------------

/// Smallest-eigenvalue result with its residual certificate
/// `||B v - value * v|| = residual` for the (normalized) computed vector.
#[derive(Debug, Clone, Copy)]
pub struct Lambda0 {
    pub value: f64,
    pub residual: f64,
    pub iterations: usize,
}

/// Smallest eigenvalue of the symmetrized section matrix, to a residual of
/// `tol` scaled by the matrix magnitude.  Dense up to [`DENSE_LIMIT`],
/// Lanczos above.
pub fn lambda0(section: &FiniteSection, tol: f64) -> Result<Lambda0, SolverError> {
    if let Some((lower, upper)) = section.cached_lambda0_bounds() {
        let residual = (upper - lower) / 2.0;
        if residual <= tol * matrix_scale(section) {
            return Ok(Lambda0 {
                value: (lower + upper) / 2.0,
                residual,
                iterations: 0,
            });
        }
    }
    if section.n() <= DENSE_LIMIT {
        let out = lambda0_dense(section);
        if out.residual <= tol * matrix_scale(section) {
            Ok(out)
        } else {
            Err(SolverError::NoConvergence {
                what: "dense eigensolve".into(),
                iterations: out.iterations,
                residual: out.residual,
            })
        }
    } else {
        lambda0_lanczos(section, tol, 600)
    }
}

/// Dense symmetric eigensolve; returns the smallest eigenvalue with the
/// measured residual of its eigenvector.
pub fn lambda0_dense(section: &FiniteSection) -> Lambda0 {
    let n = section.n();
    assert!(n > 0, "empty section has no spectrum");
    let b = section.dense_sym();
    let eig = b.symmetric_eigen();
    let mut idx = 0;
    for i in 1..n {
        if eig.eigenvalues[i] < eig.eigenvalues[idx] {
            idx = i;
        }
    }
    let value = eig.eigenvalues[idx];
    let v: Vec<f64> = (0..n).map(|i| eig.eigenvectors[(i, idx)]).collect();
    let bv = section.apply_sym(&v);
    let mut res = Neumaier::new();
    for i in 0..n {
        let r = bv[i] - value * v[i];
        res.add(r * r);
    }
    let residual = res.total().max(0.0).sqrt() / norm2(&v);
    section.store_lambda0_bounds(value - residual, value + residual);
    Lambda0 {
        value,
        residual,
        iterations: 1,
    }
}

/// Lanczos iteration with full reorthogonalization.  The returned residual
/// is measured on the assembled Ritz vector, not estimated from the
/// tridiagonal coefficients.
pub fn lambda0_lanczos(
    section: &FiniteSection,
    tol: f64,
    max_steps: usize,
) -> Result<Lambda0, SolverError> {
    let n = section.n();
    assert!(n > 0, "empty section has no spectrum");
    if n == 1 {
        let value = section.diagonal()[0];
        section.store_lambda0_bounds(value, value);
        return Ok(Lambda0 {
            value,
            residual: 0.0,
            iterations: 0,
        });
    }
    let scale = matrix_scale(section);
    let tol_abs = tol * scale;
    let mut rng = seeded_rng(0x5eed_1a0b);
    let mut v: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
    let nv = norm2(&v);
    v.iter_mut().for_each(|x| *x /= nv);
    let mut basis: Vec<Vec<f64>> = vec![v];
    let mut alphas: Vec<f64> = Vec::new();
    let mut betas: Vec<f64> = Vec::new();
    let steps = max_steps.min(n);
    let assemble = |alphas: &[f64], betas: &[f64], basis: &[Vec<f64>]| -> (f64, Vec<f64>) {
        let m = alphas.len();
        let mut t = DMatrix::zeros(m, m);
        for i in 0..m {
            t[(i, i)] = alphas[i];
            if i + 1 < m {
                t[(i, i + 1)] = betas[i];
                t[(i + 1, i)] = betas[i];
            }
        }
        let eig = t.symmetric_eigen();
        let mut idx = 0;
        for i in 1..m {
            if eig.eigenvalues[i] < eig.eigenvalues[idx] {
                idx = i;
            }
        }
        let theta = eig.eigenvalues[idx];
        let mut ritz = vec![0.0; n];
        for (j, base) in basis.iter().enumerate().take(m) {
            let c = eig.eigenvectors[(j, idx)];
            for i in 0..n {
                ritz[i] += c * base[i];
            }
        }
        let nr = norm2(&ritz);
        ritz.iter_mut().for_each(|x| *x /= nr);
        (theta, ritz)
    };
    for j in 0..steps {
        let mut w = section.apply_sym(&basis[j]);
        if j > 0 {
            let beta = betas[j - 1];
            for i in 0..n {
                w[i] -= beta * basis[j - 1][i];
            }
        }
        let a = dot(&w, &basis[j]);
        for i in 0..n {
            w[i] -= a * basis[j][i];
        }
        // Full reorthogonalization keeps the basis usable at high accuracy.
        for base in &basis {
            let c = dot(&w, base);
            for i in 0..n {
                w[i] -= c * base[i];
            }
        }
        alphas.push(a);
        let b = norm2(&w);
        let exhausted = b <= 1e-14 * scale || j + 1 == steps;
        let check_now = exhausted || (j >= 10 && j % 10 == 0);
        if check_now {
            let (theta, ritz) = assemble(&alphas, &betas, &basis);
            let bv = section.apply_sym(&ritz);
            let mut res = Neumaier::new();
            for i in 0..n {
                let r = bv[i] - theta * ritz[i];
                res.add(r * r);
            }
            let residual = res.total().max(0.0).sqrt();
            if residual <= tol_abs || exhausted {
                if residual <= tol_abs {
                    section.store_lambda0_bounds(theta - residual, theta + residual);
                    return Ok(Lambda0 {
                        value: theta,
                        residual,
                        iterations: j + 1,
                    });
                }
                return Err(SolverError::NoConvergence {
                    what: "Lanczos eigensolve".into(),
                    iterations: j + 1,
                    residual,
                });
            }
        }
        betas.push(b);
        let vnext: Vec<f64> = w.iter().map(|x| x / b).collect();
        basis.push(vnext);
    }
    unreachable!("loop returns at the exhaustion step");
}

// ---------------------------------------------------------------------------
// Shifted solves
// ---------------------------------------------------------------------------

/// Result of a shifted solve `(A + alpha) u = v` in function coordinates.
#[derive(Debug, Clone)]
pub struct ResolventResult {
    pub solution: Vec<f64>,
    pub alpha: f64,
    /// `||(B + alpha) w - rhs||` in symmetrized coordinates.
    pub residual: f64,
    pub iterations: usize,
}

/// Ensure `alpha` clears the spectral edge by [`SHIFT_MARGIN`], computing
/// the smallest eigenvalue once per section (cached afterwards).
fn require_valid_shift(section: &FiniteSection, alpha: f64) -> Result<(), SolverError> {
    let (lower, upper) = match section.cached_lambda0_bounds() {
        Some(bounds) => bounds,
        None => {
            let l = lambda0(section, 1e-10)?;
            (l.value - l.residual, l.value + l.residual)
        }
    };
    let threshold = -lower + SHIFT_MARGIN;
    if alpha <= threshold {
        return Err(SolverError::ShiftTooSmall {
            alpha,
            lambda0: upper,
            threshold,
        });
    }
    Ok(())
}

/// Solve `(B + alpha) w = rhs` in symmetrized coordinates.
fn solve_shifted_sym(
    section: &FiniteSection,
    alpha: f64,
    rhs: &[f64],
    tol: f64,
) -> Result<(Vec<f64>, f64, usize), SolverError> {
    let n = section.n();
    let (w, iterations) = if n <= DENSE_LIMIT {
        let mut m = section.dense_sym();
        for i in 0..n {
            m[(i, i)] += alpha;
        }
        let chol = m.cholesky().ok_or_else(|| {
            // The shift check passed, so this is numerical borderline.
            SolverError::ShiftTooSmall {
                alpha,
                lambda0: f64::NAN,
                threshold: f64::NAN,
            }
        })?;
        let sol = chol.solve(&nalgebra::DVector::from_column_slice(rhs));
        (sol.iter().copied().collect::<Vec<f64>>(), 1)
    } else {
        let diag_inv: Vec<f64> = section
            .diagonal()
            .iter()
            .map(|&d| 1.0 / (d + alpha))
            .collect();
        pcg(section, alpha, rhs, &diag_inv, tol, 20 * n)?
    };
    // Residual measured with the sparse apply, independent of the factorization.
    let bw = section.apply_sym(&w);
    let mut res = Neumaier::new();
    for i in 0..n {
        let r = bw[i] + alpha * w[i] - rhs[i];
        res.add(r * r);
    }
    Ok((w, res.total().max(0.0).sqrt(), iterations))
}

fn pcg(
    section: &FiniteSection,
    alpha: f64,
    rhs: &[f64],
    diag_inv: &[f64],
    tol: f64,
    max_iter: usize,
) -> Result<(Vec<f64>, usize), SolverError> {
    let n = section.n();
    let apply = |v: &[f64]| -> Vec<f64> {
        let mut out = section.apply_sym(v);
        for i in 0..n {
            out[i] += alpha * v[i];
        }
        out
    };
    let rhs_norm = norm2(rhs);
    if rhs_norm == 0.0 {
        return Ok((vec![0.0; n], 0));
    }
    let target = tol * rhs_norm;
    let mut x = vec![0.0; n];
    let mut r = rhs.to_vec();
    let mut z: Vec<f64> = r.iter().zip(diag_inv).map(|(ri, di)| ri * di).collect();
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    for it in 0..max_iter {
        if norm2(&r) <= target {
            return Ok((x, it));
        }
        let ap = apply(&p);
        let pap = dot(&p, &ap);
        if pap <= 0.0 {
            return Err(SolverError::NoConvergence {
                what: "conjugate gradient (matrix not positive definite)".into(),
                iterations: it,
                residual: norm2(&r),
            });
        }
        let gamma = rz / pap;
        for i in 0..n {
            x[i] += gamma * p[i];
            r[i] -= gamma * ap[i];
        }
        z = r.iter().zip(diag_inv).map(|(ri, di)| ri * di).collect();
        let rz_next = dot(&r, &z);
        let beta = rz_next / rz;
        rz = rz_next;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    if norm2(&r) <= target {
        Ok((x, max_iter))
    } else {
        Err(SolverError::NoConvergence {
            what: "conjugate gradient".into(),
            iterations: max_iter,
            residual: norm2(&r),
        })
    }
}

/// Apply the resolvent: solve `(A + alpha) u = v` for a function-coordinate
/// right-hand side `v`, through the symmetrized system
/// `(B + alpha)(D^{1/2} u) = D^{1/2} v`.
pub fn resolvent_apply(
    section: &FiniteSection,
    alpha: f64,
    v: &[f64],
    tol: f64,
) -> Result<ResolventResult, SolverError> {
    assert_eq!(v.len(), section.n());
    require_valid_shift(section, alpha)?;
    let rhs: Vec<f64> = v
        .iter()
        .zip(section.sqrt_mu())
        .map(|(&vi, &s)| vi * s)
        .collect();
    let (w, residual, iterations) = solve_shifted_sym(section, alpha, &rhs, tol)?;
    let solution: Vec<f64> = w
        .iter()
        .zip(section.sqrt_mu())
        .map(|(&wi, &s)| wi / s)
        .collect();
    Ok(ResolventResult {
        solution,
        alpha,
        residual,
        iterations,
    })
}

// ---------------------------------------------------------------------------
// Positivity and domination
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct PositivityReport {
    pub trials: usize,
    /// Smallest resolvent entry seen across all trials.
    pub worst_margin: f64,
    /// Smallest entry per trial, in trial order.
    pub per_trial: Vec<f64>,
    pub pass: bool,
}

/// Resolvents of nonnegative vectors must be entrywise nonnegative; check
/// this on `trials` random vectors with entries in `[0, 1)`.
pub fn positivity_check(
    section: &FiniteSection,
    alpha: f64,
    trials: usize,
    tol: f64,
    seed: u64,
) -> Result<PositivityReport, SolverError> {
    let mut rng = seeded_rng(seed);
    let n = section.n();
    let mut worst = f64::INFINITY;
    let mut per_trial = Vec::with_capacity(trials);
    for _ in 0..trials {
        let v: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..1.0)).collect();
        let res = resolvent_apply(section, alpha, &v, 1e-12)?;
        let trial_min = res
            .solution
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min);
        per_trial.push(trial_min);
        worst = worst.min(trial_min);
    }
    if trials == 0 {
        worst = 0.0;
    }
    Ok(PositivityReport {
        trials,
        worst_margin: worst,
        per_trial,
        pass: worst >= -tol,
    })
}

#[derive(Debug, Clone)]
pub struct DominationReport {
    /// `max_i (|high_i| - low_i)`; nonpositive (up to tolerance) on pass.
    pub max_violation: f64,
    pub pass: bool,
    /// `(r^{-1} A_high + 1)^{-1} u`.
    pub high: Vec<f64>,
    /// `(r^{-1} A_low + 1)^{-1} |u|`, the majorant.
    pub low: Vec<f64>,
}

/// Check `|(r^{-1} A_high + 1)^{-1} u| <= (r^{-1} A_low + 1)^{-1} |u|`
/// entrywise, where `A_high = A_low + W` with `W >= 0` on the diagonal.
pub fn domination_check(
    low: &FiniteSection,
    high: &FiniteSection,
    r: f64,
    u: &[f64],
    tol: f64,
) -> Result<DominationReport, SolverError> {
    assert!(r > 0.0, "the resolvent parameter must be positive");
    if low.vertices() != high.vertices() || low.mu() != high.mu() {
        return Err(SolverError::IndexMismatch);
    }
    for (i, (dl, dh)) in low
        .diagonal()
        .iter()
        .zip(high.diagonal())
        .enumerate()
    {
        let w = dh - dl;
        if w < -1e-12 * (1.0 + dl.abs()) {
            return Err(SolverError::NegativePerturbation { index: i, value: w });
        }
    }
    // (r^{-1} A + 1)^{-1} u = (A + r)^{-1} (r u).
    let scaled: Vec<f64> = u.iter().map(|&x| r * x).collect();
    let hi = resolvent_apply(high, r, &scaled, 1e-12)?.solution;
    let scaled_abs: Vec<f64> = u.iter().map(|&x| r * x.abs()).collect();
    let lo = resolvent_apply(low, r, &scaled_abs, 1e-12)?.solution;
    let mut max_violation = f64::NEG_INFINITY;
    for i in 0..u.len() {
        max_violation = max_violation.max(hi[i].abs() - lo[i]);
    }
    if u.is_empty() {
        max_violation = 0.0;
    }
    Ok(DominationReport {
        max_violation,
        pass: max_violation <= tol,
        high: hi,
        low: lo,
    })
}

// ---------------------------------------------------------------------------
// Truncation-convergence monitor
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy)]
pub struct ConvergenceRow {
    pub k_or_r: f64,
    pub alpha: f64,
    pub vector_id: usize,
    pub l2_error: f64,
    pub form_error: f64,
    pub section_size: usize,
}

#[derive(Debug, Clone)]
pub struct ConvergenceReport {
    pub rows: Vec<ConvergenceRow>,
    /// Both error columns non-increasing along the family, per vector.
    pub monotone_flag: bool,
    /// Final family member within `tol` of the limit for every vector.
    pub converged: bool,
}

pub const CONVERGENCE_CSV_HEADER: &str = "k_or_r,alpha,vector_id,l2_error,form_error,section_size";

impl ConvergenceReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from(CONVERGENCE_CSV_HEADER);
        out.push('\n');
        for row in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                row.k_or_r, row.alpha, row.vector_id, row.l2_error, row.form_error, row.section_size
            ));
        }
        out
    }
}

/// Watch the resolvents of a monotone truncation family approach the limit
/// operator's resolvent.
///
/// The family must share the limit's vertex set, and the sampled quadratic
/// forms `<B_k u, u>` must approach `<B u, u>` monotonically (from above for
/// families cut on the negative side, from below for capped nonnegative
/// perturbations) — otherwise the hypotheses behind resolvent convergence
/// fail and [`SolverError::MonotonicityViolation`] is raised.
pub fn src_monitor(
    family: &[FiniteSection],
    k_values: &[f64],
    limit: &FiniteSection,
    alpha: f64,
    test_vectors: &[Vec<f64>],
    tol: f64,
) -> Result<ConvergenceReport, SolverError> {
    assert_eq!(family.len(), k_values.len());
    for sec in family {
        if sec.vertices() != limit.vertices() || sec.mu() != limit.mu() {
            return Err(SolverError::IndexMismatch);
        }
    }
    // Monotonicity of the sampled forms along the family, toward the limit.
    for u in test_vectors {
        let qs: Vec<f64> = family.iter().map(|s| s.quad_sym(u)).collect();
        let q_lim = limit.quad_sym(u);
        let slack = tol.max(1e-12) * (1.0 + q_lim.abs());
        let decreasing = qs.windows(2).all(|w| w[1] <= w[0] + slack)
            && qs.iter().all(|&q| q >= q_lim - slack);
        let increasing = qs.windows(2).all(|w| w[1] >= w[0] - slack)
            && qs.iter().all(|&q| q <= q_lim + slack);
        if !(decreasing || increasing) {
            // Report the first adjacent defect.
            let mut index = 0;
            let mut defect = 0.0;
            for (i, w) in qs.windows(2).enumerate() {
                let d = (w[1] - w[0]).abs();
                if d > defect {
                    defect = d;
                    index = i + 1;
                }
            }
            return Err(SolverError::MonotonicityViolation { index, defect });
        }
    }

    let mut limit_solutions = Vec::with_capacity(test_vectors.len());
    for v in test_vectors {
        limit_solutions.push(resolvent_apply(limit, alpha, v, 1e-12)?.solution);
    }
    let mut rows = Vec::new();
    for (sec, &k) in family.iter().zip(k_values) {
        for (vid, v) in test_vectors.iter().enumerate() {
            let sol = resolvent_apply(sec, alpha, v, 1e-12)?.solution;
            let diff: Vec<f64> = sol
                .iter()
                .zip(&limit_solutions[vid])
                .map(|(a, b)| a - b)
                .collect();
            let l2_error = limit.mu_norm(&diff);
            let form_error = crate::forms::form_norm_eval(limit, &diff, 1.0)
                .map_err(|e| SolverError::NoConvergence {
                    what: format!("form norm for the error vector: {e}"),
                    iterations: 0,
                    residual: f64::NAN,
                })?
                .value;
            rows.push(ConvergenceRow {
                k_or_r: k,
                alpha,
                vector_id: vid,
                l2_error,
                form_error,
                section_size: limit.n(),
            });
        }
    }
    let mut monotone_flag = true;
    for vid in 0..test_vectors.len() {
        let series: Vec<&ConvergenceRow> = rows.iter().filter(|r| r.vector_id == vid).collect();
        for w in series.windows(2) {
            let slack_l2 = 1e-12 * (1.0 + w[0].l2_error);
            let slack_fn = 1e-12 * (1.0 + w[0].form_error);
            if w[1].l2_error > w[0].l2_error + slack_l2
                || w[1].form_error > w[0].form_error + slack_fn
            {
                monotone_flag = false;
            }
        }
    }
    let converged = match family.len() {
        0 => false,
        m => rows
            .iter()
            .filter(|r| r.k_or_r == k_values[m - 1])
            .all(|r| r.l2_error <= tol),
    };
    Ok(ConvergenceReport {
        rows,
        monotone_flag,
        converged,
    })
}

// ---------------------------------------------------------------------------
// Dense helpers for property tests and oracles
// ---------------------------------------------------------------------------

/// Full eigensystem of a section by the dense path, ascending by eigenvalue.
///
/// Vectors come back in the function representation (the similarity
/// `f = w / sqrt(mu)` applied to the symmetric matrix's eigenvectors), so
/// they are orthonormal in the `mu`-weighted inner product and satisfy
/// `apply_action(f) = lambda * f` up to rounding.
pub fn dense_eigenpairs(section: &FiniteSection) -> Vec<(f64, Vec<f64>)> {
    let n = section.n();
    assert!(
        n <= DENSE_LIMIT,
        "dense eigensolves are restricted to sections of at most {DENSE_LIMIT}"
    );
    let eig = section.dense_sym().symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let mu = section.mu();
    order
        .into_iter()
        .map(|j| {
            let col = eig.eigenvectors.column(j);
            let f: Vec<f64> = (0..n).map(|i| col[i] / mu[i].sqrt()).collect();
            (eig.eigenvalues[j], f)
        })
        .collect()
}

/// Symmetric PSD square root via eigendecomposition (negative eigenvalues
/// from rounding are clamped to zero).  Only for modest sizes.
pub fn dense_sqrt_psd(m: &DMatrix<f64>) -> DMatrix<f64> {
    assert!(
        m.nrows() <= DENSE_LIMIT,
        "dense square roots are restricted to sections of at most {DENSE_LIMIT}"
    );
    let eig = m.clone().symmetric_eigen();
    let vals = eig.eigenvalues.map(|v| v.max(0.0).sqrt());
    &eig.eigenvectors * DMatrix::from_diagonal(&vals) * eig.eigenvectors.transpose()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{WeightSeq, WeightedGraph};
    use crate::operator::dirichlet_section;
    use crate::potential::Potential;

    fn path_section(n: usize, v: Potential) -> FiniteSection {
        let g =
            WeightedGraph::birth_death(WeightSeq::Const(1.0), WeightSeq::Const(1.0), Some(n))
                .unwrap();
        let s: Vec<u64> = (0..n as u64).collect();
        dirichlet_section(&g, &v, &s).unwrap()
    }

    #[test]
    fn flat_sections_have_zero_ground_energy() {
        // Whole finite path: constant vector in the kernel.
        let sec = path_section(2, Potential::zero());
        let l = lambda0(&sec, 1e-10).unwrap();
        assert!(l.value.abs() <= 1e-12, "lambda0 = {}", l.value);
        let sec3 = path_section(3, Potential::zero());
        let l3 = lambda0(&sec3, 1e-10).unwrap();
        assert!(l3.value.abs() <= 1e-12);
        // Constant potential shifts the whole spectrum.
        let sec_c = path_section(2, Potential::constant(2.5));
        let lc = lambda0(&sec_c, 1e-10).unwrap();
        assert!((lc.value - 2.5).abs() <= 1e-12);
    }

    #[test]
    fn lanczos_agrees_with_the_dense_eigensolve() {
        let v = Potential::from_fn(|x| ((x * 37 % 11) as f64) * 0.3 - 1.0);
        let sec = path_section(80, v);
        let dense = lambda0_dense(&sec);
        let lan = lambda0_lanczos(&sec, 1e-9, 600).unwrap();
        assert!(
            (dense.value - lan.value).abs() <= 1e-7,
            "dense {} vs lanczos {}",
            dense.value,
            lan.value
        );
        assert!(lan.residual <= 1e-9 * 10.0); // scaled tolerance
    }

    #[test]
    fn two_point_resolvent_matches_the_hand_inverse() {
        let sec = path_section(2, Potential::zero());
        let res = resolvent_apply(&sec, 1.0, &[1.0, 0.0], 1e-12).unwrap();
        assert!((res.solution[0] - 2.0 / 3.0).abs() <= 1e-12);
        assert!((res.solution[1] - 1.0 / 3.0).abs() <= 1e-12);
        assert!(res.residual <= 1e-12);

        // Zero right-hand side.
        let res = resolvent_apply(&sec, 1.0, &[0.0, 0.0], 1e-12).unwrap();
        assert_eq!(res.solution, vec![0.0, 0.0]);
    }

    #[test]
    fn diagonal_sections_decouple() {
        let g = WeightedGraph::explicit(2, &[], vec![1.0, 1.0]).unwrap();
        let v = Potential::from_values(vec![3.0, 7.0]);
        let sec = dirichlet_section(&g, &v, &[0, 1]).unwrap();
        let res = resolvent_apply(&sec, 1.0, &[1.0, 0.0], 1e-12).unwrap();
        assert!((res.solution[0] - 0.25).abs() <= 1e-14);
        assert!(res.solution[1].abs() <= 1e-14);
    }

    #[test]
    fn shifts_below_the_margin_are_rejected() {
        let sec = path_section(2, Potential::zero()); // lambda0 = 0
        assert!(matches!(
            resolvent_apply(&sec, -0.5, &[1.0, 0.0], 1e-12),
            Err(SolverError::ShiftTooSmall { .. })
        ));
        assert!(matches!(
            resolvent_apply(&sec, 1e-9, &[1.0, 0.0], 1e-12),
            Err(SolverError::ShiftTooSmall { .. })
        ));
        assert!(resolvent_apply(&sec, 1e-7, &[1.0, 0.0], 1e-12).is_ok());
    }

    #[test]
    fn resolvents_of_nonnegative_vectors_stay_nonnegative() {
        let v = Potential::from_values(vec![0.0, -1.0, 2.0, -0.5, 0.0, 1.0]);
        let sec = path_section(6, v);
        let l = lambda0(&sec, 1e-10).unwrap().value;
        let report = positivity_check(&sec, 1.0 + (-l).max(0.0), 50, 1e-12, 42).unwrap();
        assert!(report.pass, "worst margin {}", report.worst_margin);
        assert!(report.worst_margin >= 0.0);
    }

    #[test]
    fn domination_on_the_two_point_graph() {
        let low = path_section(2, Potential::zero());
        let high = path_section(2, Potential::from_values(vec![10.0, 0.0]));
        let report = domination_check(&low, &high, 1.0, &[1.0, 1.0], 1e-12).unwrap();
        assert!(report.pass);
        assert!((report.high[0] - 3.0 / 23.0).abs() <= 1e-12);
        assert!((report.high[1] - 13.0 / 23.0).abs() <= 1e-12);
        assert!((report.low[0] - 1.0).abs() <= 1e-12);
        assert!((report.low[1] - 1.0).abs() <= 1e-12);
        // Strict inequality here.
        assert!(report.max_violation < 0.0);
    }

    #[test]
    fn domination_requires_matching_sections_and_nonnegative_perturbation() {
        let low = path_section(2, Potential::zero());
        let other = path_section(3, Potential::zero());
        assert!(matches!(
            domination_check(&low, &other, 1.0, &[1.0, 1.0], 1e-12),
            Err(SolverError::IndexMismatch)
        ));
        let lower = path_section(2, Potential::constant(-1.0));
        assert!(matches!(
            domination_check(&low, &lower, 1.0, &[1.0, 1.0], 1e-12),
            Err(SolverError::NegativePerturbation { .. })
        ));
    }

    #[test]
    fn domination_is_equality_for_identical_operators_on_nonnegative_input() {
        let sec = path_section(4, Potential::constant(0.5));
        let u = [0.3, 0.0, 1.2, 0.7];
        let report = domination_check(&sec, &sec, 2.0, &u, 1e-12).unwrap();
        assert!(report.max_violation.abs() <= 1e-12);
    }

    #[test]
    fn truncation_monitor_sees_monotone_decay_to_exact_zero() {
        // Chain of 50, V2(n) = n capped at k: once k >= 49 the operators
        // coincide and the error must be exactly zero.
        let n = 50usize;
        let g =
            WeightedGraph::birth_death(WeightSeq::Const(1.0), WeightSeq::Const(1.0), Some(n))
                .unwrap();
        let s: Vec<u64> = (0..n as u64).collect();
        let v2 = Potential::from_fn(|x| x as f64);
        let limit = dirichlet_section(&g, &v2, &s).unwrap();
        let ks = [1.0, 2.0, 5.0, 10.0, 30.0, 49.0, 60.0];
        let family: Vec<FiniteSection> = ks
            .iter()
            .map(|&k| dirichlet_section(&g, &v2.capped_at(k), &s).unwrap())
            .collect();
        let mut delta0 = vec![0.0; n];
        delta0[0] = 1.0;
        let report = src_monitor(&family, &ks, &limit, 1.0, &[delta0], 1e-8).unwrap();
        assert!(report.monotone_flag);
        assert!(report.converged);
        let errors: Vec<f64> = report.rows.iter().map(|r| r.l2_error).collect();
        for w in errors.windows(2) {
            assert!(w[1] <= w[0] + 1e-15, "errors not non-increasing: {errors:?}");
        }
        // Strict decrease while the truncation is active.
        assert!(errors[1] < errors[0]);
        assert!(errors[2] < errors[1]);
        // Exact coincidence once the cap clears the maximum of V2.
        assert_eq!(errors[5], 0.0);
        assert_eq!(errors[6], 0.0);
        let form_errors: Vec<f64> = report.rows.iter().map(|r| r.form_error).collect();
        assert_eq!(form_errors[6], 0.0);
    }

    #[test]
    fn non_monotone_families_are_rejected() {
        let limit = path_section(3, Potential::zero());
        let too_big = path_section(3, Potential::constant(5.0));
        let small = path_section(3, Potential::constant(1.0));
        // 5 then 1: not monotone toward 0 from either side... actually it is
        // decreasing toward 0 — make it non-monotone: 1, 5.
        let family = vec![small, too_big];
        let ks = [1.0, 2.0];
        let u = vec![1.0, 0.0, 0.0];
        let got = src_monitor(&family, &ks, &limit, 1.0, &[u], 1e-8);
        assert!(matches!(
            got,
            Err(SolverError::MonotonicityViolation { .. })
        ));
    }

    #[test]
    fn resolvent_identity_holds_on_a_mixed_section() {
        let v = Potential::from_values(vec![1.0, -0.5, 0.0, 2.0, -1.0]);
        let sec = path_section(5, v);
        let rhs = [0.7, -0.2, 0.0, 1.0, 0.4];
        let (a1, a2) = (2.0, 3.5);
        let r1 = resolvent_apply(&sec, a1, &rhs, 1e-12).unwrap().solution;
        let r2 = resolvent_apply(&sec, a2, &rhs, 1e-12).unwrap().solution;
        let r2r1: Vec<f64> = resolvent_apply(&sec, a1, &r2, 1e-12).unwrap().solution;
        for i in 0..5 {
            let lhs = r1[i] - r2[i];
            let rhs_val = (a2 - a1) * r2r1[i];
            assert!(
                (lhs - rhs_val).abs() <= 1e-10 * (1.0 + lhs.abs()),
                "identity fails at {i}: {lhs} vs {rhs_val}"
            );
        }
    }

    #[test]
    fn ground_energy_decreases_as_the_section_grows() {
        let g = WeightedGraph::birth_death(
            WeightSeq::Const(1.0),
            WeightSeq::Const(1.0),
            None,
        )
        .unwrap();
        let v = Potential::from_fn(|x| -((x % 5) as f64) * 0.4);
        let mut prev = f64::INFINITY;
        for n in [4usize, 8, 16, 32] {
            let s: Vec<u64> = (0..n as u64).collect();
            let sec = dirichlet_section(&g, &v, &s).unwrap();
            let l = lambda0(&sec, 1e-10).unwrap().value;
            assert!(l <= prev + 1e-10, "lambda0 grew: {l} after {prev}");
            prev = l;
        }
    }

    #[test]
    fn pcg_matches_the_dense_solver() {
        let v = Potential::from_values((0..120).map(|x| (x % 7) as f64 * 0.5).collect());
        let sec = path_section(120, v);
        let rhs: Vec<f64> = (0..120).map(|i| ((i * 13 % 17) as f64 - 8.0) / 8.0).collect();
        let rhs_sym: Vec<f64> = rhs
            .iter()
            .zip(sec.sqrt_mu())
            .map(|(&x, &s)| x * s)
            .collect();
        let diag_inv: Vec<f64> = sec.diagonal().iter().map(|&d| 1.0 / (d + 1.0)).collect();
        let (w_pcg, _it) = pcg(&sec, 1.0, &rhs_sym, &diag_inv, 1e-12, 5000).unwrap();
        let dense = resolvent_apply(&sec, 1.0, &rhs, 1e-12).unwrap().solution;
        for i in 0..120 {
            let u_pcg = w_pcg[i] / sec.sqrt_mu()[i];
            assert!(
                (u_pcg - dense[i]).abs() <= 1e-9 * (1.0 + dense[i].abs()),
                "pcg and dense disagree at {i}"
            );
        }
    }

    #[test]
    fn sqrt_of_shifted_matrix_squares_back() {
        let sec = path_section(6, Potential::from_values(vec![0.0, 1.0, 0.5, 0.0, 2.0, 0.3]));
        let mut m = sec.dense_sym();
        for i in 0..6 {
            m[(i, i)] += 1.0; // strictly positive definite now
        }
        let root = dense_sqrt_psd(&m);
        let back = &root * &root;
        for i in 0..6 {
            for j in 0..6 {
                assert!((back[(i, j)] - m[(i, j)]).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn eigenpairs_come_back_orthonormal_and_in_order() {
        // Edge of weight 1 with measures (1, 4): eigenvalues 0 and 5/4, and
        // the ground vector is the constant scaled to mu-norm one.
        let g = WeightedGraph::explicit(2, &[(0, 1, 1.0)], vec![1.0, 4.0]).unwrap();
        let sec = dirichlet_section(&g, &Potential::zero(), &[0, 1]).unwrap();
        let pairs = dense_eigenpairs(&sec);
        assert_eq!(pairs.len(), 2);
        assert!(pairs[0].0.abs() < 1e-14);
        assert!((pairs[1].0 - 1.25).abs() < 1e-13);
        let ground = &pairs[0].1;
        let c = 1.0 / 5.0_f64.sqrt();
        assert!((ground[0].abs() - c).abs() < 1e-13);
        assert!((ground[1] - ground[0]).abs() < 1e-13);

        for (lam, f) in &pairs {
            // mu-normalized and an actual eigenvector of the action.
            assert!((sec.mu_norm(f) - 1.0).abs() < 1e-12);
            let action = sec.apply_action(f);
            for i in 0..2 {
                assert!((action[i] - lam * f[i]).abs() < 1e-12);
            }
        }
        let cross = sec.mu_dot(&pairs[0].1, &pairs[1].1);
        assert!(cross.abs() < 1e-12);
    }
}
