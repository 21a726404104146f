//! Inner products and energy forms.
//!
//! For finitely supported `f` with support `S` the quadratic energy
//!
//! ```text
//! Q_W(f) = 1/2 sum_{x,y} b(x,y)|f(x)-f(y)|^2 + sum_x mu(x) W(x) |f(x)|^2
//! ```
//!
//! is evaluated without enumerating any neighborhood: pairs inside `S` are
//! summed directly, and every edge leaving `S` contributes `b(x,y)|f(x)|^2`,
//! which adds up to `(deg(x) - sum_{y in S} b(x,y)) |f(x)|^2` — the degree
//! oracle makes that term exact even when `x` has infinitely many neighbors.
//! The Green's-identity checker ties these sums to the pointwise operator,
//! and the form norm combines the energy with a spectral shift taken from
//! the section's smallest eigenvalue.

use num_complex::Complex64;
use thiserror::Error;

use crate::accum::{ComplexNeumaier, Neumaier};
use crate::function::{GraphFn, Ternary};
use crate::graph::{Vertex, WeightedGraph, DEFAULT_ENUM_CAP};
use crate::operator::{apply_formal, FiniteSection, OperatorError};
use crate::potential::Potential;

#[derive(Debug, Error)]
pub enum FormsError {
    #[error(transparent)]
    Operator(#[from] OperatorError),
    #[error("degree at vertex {x} is not finite ({value}); energy sums need it")]
    MissingDegree { x: Vertex, value: f64 },
    #[error("no usable lower bound for the form norm: {0}")]
    NotLowerBounded(String),
}

/// Value of a quadratic form, split into its two sums.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FormValue {
    /// `1/2 sum b |f(x)-f(y)|^2` including edges leaving the support; never negative.
    pub energy_part: f64,
    /// `sum mu W |f|^2`.
    pub potential_part: f64,
    pub total: f64,
}

impl FormValue {
    fn new(energy_part: f64, potential_part: f64) -> Self {
        let energy_part = energy_part.max(0.0);
        Self {
            energy_part,
            potential_part,
            total: energy_part + potential_part,
        }
    }
}

/// Sesquilinear form value `Q_W(f, h)`; complex because the slots differ.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SesquiFormValue {
    pub energy_part: Complex64,
    pub potential_part: Complex64,
    pub total: Complex64,
}

/// The norm `sqrt(h(u) + (beta - lambda0) ||u||^2)` built from a section's
/// quadratic form `h` and its smallest eigenvalue.
#[derive(Debug, Clone, Copy)]
pub struct FormNorm {
    /// Smallest eigenvalue of the section (the shift making `h - lambda0` nonnegative).
    pub lambda0: f64,
    pub beta: f64,
    pub value: f64,
}

/// Anti-duality pairing `(u, w) = sum_x mu(x) u(x) conj(w(x))`, summed over
/// the (finite) support of `w`.
pub fn pairing_a(g: &WeightedGraph, u: &GraphFn, w: &GraphFn) -> Complex64 {
    let support = w
        .support()
        .expect("pairing requires the second slot to be finitely supported");
    let mut acc = ComplexNeumaier::new();
    for x in support {
        acc.add(u.value(x) * w.value(x).conj() * g.mu(x));
    }
    acc.total()
}

/// Union of the supports of finitely supported functions, sorted.
fn support_union(fs: &[&GraphFn]) -> Option<Vec<Vertex>> {
    let mut out: Vec<Vertex> = Vec::new();
    for f in fs {
        out.extend(f.support()?);
    }
    out.sort_unstable();
    out.dedup();
    Some(out)
}

/// Per-vertex data for energy sums over a finite window `T`:
/// `deg(x)` and `sum_{y in T} b(x,y)`.
fn window_sums(
    g: &WeightedGraph,
    window: &[Vertex],
) -> Result<Vec<(f64, f64)>, FormsError> {
    let mut out = Vec::with_capacity(window.len());
    for &x in window {
        let deg = g.deg(x);
        if !deg.is_finite() {
            return Err(FormsError::MissingDegree { x, value: deg });
        }
        let mut inside = Neumaier::new();
        for &y in window {
            if y != x {
                inside.add(g.b(x, y));
            }
        }
        out.push((deg, inside.total()));
    }
    Ok(out)
}

/// Sesquilinear energy form `Q_W(f, h)` for finitely supported `f`, `h`.
pub fn form_q(
    g: &WeightedGraph,
    w: &Potential,
    f: &GraphFn,
    h: &GraphFn,
) -> Result<SesquiFormValue, FormsError> {
    let window = support_union(&[f, h])
        .expect("sesquilinear form requires finitely supported arguments");
    let sums = window_sums(g, &window)?;
    let mut energy = ComplexNeumaier::new();
    for (i, &x) in window.iter().enumerate() {
        let (deg, inside) = sums[i];
        energy.add(f.value(x) * h.value(x).conj() * (deg - inside));
        for &y in window.iter().skip(i + 1) {
            let b = g.b(x, y);
            if b != 0.0 {
                let df = f.value(x) - f.value(y);
                let dh = h.value(x) - h.value(y);
                energy.add(df * dh.conj() * b);
            }
        }
    }
    let mut potential = ComplexNeumaier::new();
    for &x in &window {
        potential.add(f.value(x) * h.value(x).conj() * (g.mu(x) * w.value(x)));
    }
    let energy_part = energy.total();
    let potential_part = potential.total();
    Ok(SesquiFormValue {
        energy_part,
        potential_part,
        total: energy_part + potential_part,
    })
}

/// Quadratic energy form `Q_W(f) = Q_W(f, f)`, computed in real arithmetic
/// so the energy part is exactly real and nonnegative.
pub fn form_q_quadratic(
    g: &WeightedGraph,
    w: &Potential,
    f: &GraphFn,
) -> Result<FormValue, FormsError> {
    let window = f
        .support()
        .expect("quadratic form requires a finitely supported argument");
    let sums = window_sums(g, &window)?;
    let mut energy = Neumaier::new();
    for (i, &x) in window.iter().enumerate() {
        let (deg, inside) = sums[i];
        energy.add(f.value(x).norm_sqr() * (deg - inside));
        for &y in window.iter().skip(i + 1) {
            let b = g.b(x, y);
            if b != 0.0 {
                energy.add((f.value(x) - f.value(y)).norm_sqr() * b);
            }
        }
    }
    let mut potential = Neumaier::new();
    for &x in &window {
        potential.add(f.value(x).norm_sqr() * g.mu(x) * w.value(x));
    }
    Ok(FormValue::new(energy.total(), potential.total()))
}

/// Residual of the summation-by-parts identity
/// `<L_W f, u> = 1/2 sum b (f(x)-f(y)) conj(u(x)-u(y)) + sum mu W f conj(u)`
/// for finitely supported `u`.  When `f` is finitely supported too, the
/// conjugate-symmetry flip `<L_W f, u> = <f, L_W u>` is checked as well and
/// the larger of the two residuals is returned.
pub fn greens_identity_residual(
    g: &WeightedGraph,
    w: &Potential,
    f: &GraphFn,
    u: &GraphFn,
) -> Result<f64, FormsError> {
    let window = u
        .support()
        .expect("the second argument must be finitely supported");

    // Left side: pair the pointwise operator against u.
    let mut lhs = ComplexNeumaier::new();
    for &x in &window {
        let lf = apply_formal(g, w, f, x)?;
        lhs.add(lf * u.value(x).conj() * g.mu(x));
    }
    let lhs = lhs.total();

    // Right side: pairs inside the window, plus for each window vertex the
    // exact sum of b(x,y)(f(x)-f(y)) over y outside the window.
    let sums = window_sums(g, &window)?;
    let mut rhs = ComplexNeumaier::new();
    for (i, &x) in window.iter().enumerate() {
        for &y in window.iter().skip(i + 1) {
            let b = g.b(x, y);
            if b != 0.0 {
                rhs.add((f.value(x) - f.value(y)) * (u.value(x) - u.value(y)).conj() * b);
            }
        }
    }
    for (i, &x) in window.iter().enumerate() {
        let (deg, inside) = sums[i];
        let in_window = |y: Vertex| window.binary_search(&y).is_ok();
        let outward = if let Some(fsupp) = f.support() {
            // sum_{y not in T} b(x,y)(f(x) - f(y)) with f vanishing off its support.
            let mut cross = ComplexNeumaier::new();
            for y in fsupp {
                if !in_window(y) {
                    let b = g.b(x, y);
                    if b != 0.0 {
                        cross.add(f.value(y) * b);
                    }
                }
            }
            f.value(x) * (deg - inside) - cross.total()
        } else if g.locally_finite_at(x) {
            let mut cross = ComplexNeumaier::new();
            for y in g
                .neighbor_list(x, DEFAULT_ENUM_CAP)
                .map_err(OperatorError::from)?
            {
                if !in_window(y) {
                    cross.add((f.value(x) - f.value(y)) * g.b(x, y));
                }
            }
            cross.total()
        } else {
            return Err(OperatorError::DomainViolation {
                x,
                detail: "boundary sum needs either a support for f or a finite neighbor list"
                    .into(),
            }
            .into());
        };
        rhs.add(u.value(x).conj() * outward);
    }
    for &x in &window {
        rhs.add(f.value(x) * u.value(x).conj() * (g.mu(x) * w.value(x)));
    }
    let rhs = rhs.total();
    let mut residual = (lhs - rhs).norm();

    if f.is_finitely_supported() {
        // Flip: <f, L_W u> computed over the support of f.
        let mut flip = ComplexNeumaier::new();
        for x in f.support().unwrap() {
            let lu = apply_formal(g, w, u, x)?;
            flip.add(f.value(x) * lu.conj() * g.mu(x));
        }
        residual = residual.max((lhs - flip.total()).norm());
    }
    Ok(residual)
}

/// Evaluate the beta-shifted form norm of a section vector:
/// `value^2 = <A u, u>_mu + (beta - lambda0) ||u||_mu^2`, with `lambda0` the
/// section's smallest eigenvalue (so the expression under the root is a sum
/// of nonnegative pieces).
pub fn form_norm_eval(
    section: &FiniteSection,
    u: &[f64],
    beta: f64,
) -> Result<FormNorm, FormsError> {
    assert!(beta > 0.0, "the form-norm shift must be positive");
    let lambda0 = crate::solvers::lambda0(section, 1e-10)
        .map_err(|e| FormsError::NotLowerBounded(e.to_string()))?
        .value;
    let h = section.quad_action_mu(u);
    let n2 = section.mu_dot(u, u);
    let value = (h + (beta - lambda0) * n2).max(0.0).sqrt();
    Ok(FormNorm {
        lambda0,
        beta,
        value,
    })
}

/// Outcome of [`finite_energy_check`].
#[derive(Debug, Clone)]
pub struct FiniteEnergyCheck {
    pub status: Ternary,
    /// The computed form value when the status is `Yes`.
    pub value: Option<FormValue>,
}

/// Decide whether both sums defining the energy of `f` are finite.  For
/// finitely supported `f` this is answered by computing them; without
/// support information finite data cannot settle the question.
pub fn finite_energy_check(g: &WeightedGraph, w: &Potential, f: &GraphFn) -> FiniteEnergyCheck {
    if !f.is_finitely_supported() {
        return FiniteEnergyCheck {
            status: Ternary::Unknown,
            value: None,
        };
    }
    match form_q_quadratic(g, w, f) {
        Ok(v) if v.energy_part.is_finite() && v.potential_part.is_finite() => FiniteEnergyCheck {
            status: Ternary::Yes,
            value: Some(v),
        },
        Ok(_) | Err(FormsError::MissingDegree { .. }) => FiniteEnergyCheck {
            status: Ternary::No,
            value: None,
        },
        Err(_) => FiniteEnergyCheck {
            status: Ternary::Unknown,
            value: None,
        },
    }
}

/// Header for form-evaluation CSV exports.
pub const FORM_CSV_HEADER: &str = "graph_id,w_id,vector_id,energy_part,potential_part,total";

/// One CSV row matching [`FORM_CSV_HEADER`].
pub fn form_csv_row(graph_id: &str, w_id: &str, vector_id: &str, v: &FormValue) -> String {
    format!(
        "{graph_id},{w_id},{vector_id},{},{},{}",
        v.energy_part, v.potential_part, v.total
    )
}
