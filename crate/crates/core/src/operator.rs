//! The formal Schrödinger operator and its finite Dirichlet sections.
//!
//! The operator acts on functions by
//!
//! ```text
//! (L_V f)(x) = (deg(x)/mu(x) + V(x)) f(x) - (1/mu(x)) sum_y b(x,y) f(y)
//! ```
//!
//! whenever the sum converges absolutely.  [`apply_formal`] evaluates this
//! pointwise; [`dirichlet_section`] compresses the operator to a finite
//! vertex set S, keeping the *full* degree on the diagonal so that the
//! matrix is exactly `P_S L_V P_S` on functions supported in S and principal
//! submatrices nest along exhaustions.  Potential truncations and the
//! pointwise eigenvalue inequality check for absolute values live here too.

use std::collections::HashMap;
use std::sync::OnceLock;

use nalgebra::DMatrix;
use num_complex::Complex64;
use thiserror::Error;

use crate::accum::{ComplexNeumaier, Neumaier};
use crate::function::{GraphFn, Ternary};
use crate::graph::{GraphError, Tail, Vertex, WeightedGraph, DEFAULT_ENUM_CAP};
use crate::potential::Potential;

#[derive(Debug, Error)]
pub enum OperatorError {
    #[error("cannot certify absolute convergence of the neighbor sum at vertex {x}: {detail}")]
    DomainViolation { x: Vertex, detail: String },
    #[error("potential is negative at vertex {x} ({value}) where a nonnegative one is required")]
    NegativeInput { x: Vertex, value: f64 },
    #[error("degree at vertex {x} is not finite ({value})")]
    MissingDegree { x: Vertex, value: f64 },
    #[error("candidate is not an eigenvector: relative residual {residual:.3e} exceeds {tol:.3e}")]
    NotAnEigenvector { residual: f64, tol: f64 },
    #[error("dominating potential drops below the reference at vertex {x}")]
    PotentialOrderViolated { x: Vertex },
    #[error(transparent)]
    Graph(#[from] GraphError),
}

/// Decide whether `sum_y b(x,y) |f(y)|` converges, i.e. whether `f` is in
/// the operator's domain as seen from `x`.  Finite support or a finite
/// neighbor list settles it; otherwise a caller-supplied [`Tail`] certificate
/// about the terms beyond the enumerated prefix is the only way to answer.
pub fn in_domain_f(g: &WeightedGraph, f: &GraphFn, x: Vertex, tail: Option<Tail>) -> Ternary {
    if f.is_finitely_supported() || g.locally_finite_at(x) {
        return Ternary::Yes;
    }
    match tail {
        Some(Tail::RemainderBound { bound, .. }) if bound.is_finite() => Ternary::Yes,
        Some(Tail::Divergent { .. }) => Ternary::No,
        _ => Ternary::Unknown,
    }
}

/// Evaluate `(L_V f)(x)`.  Requires the neighbor sum to be computable
/// exactly: either `f` has known finite support (the sum runs over it), or
/// the graph is locally finite at `x` (the sum runs over the neighbor list).
pub fn apply_formal(
    g: &WeightedGraph,
    v: &Potential,
    f: &GraphFn,
    x: Vertex,
) -> Result<Complex64, OperatorError> {
    let deg = g.deg(x);
    if !deg.is_finite() {
        return Err(OperatorError::MissingDegree { x, value: deg });
    }
    let mu = g.mu(x);
    let mut sum = ComplexNeumaier::new();
    if let Some(support) = f.support() {
        for y in support {
            let b = g.b(x, y);
            if b != 0.0 {
                sum.add(f.value(y) * b);
            }
        }
    } else if g.locally_finite_at(x) {
        for y in g.neighbor_list(x, DEFAULT_ENUM_CAP)? {
            sum.add(f.value(y) * g.b(x, y));
        }
    } else {
        return Err(OperatorError::DomainViolation {
            x,
            detail: "no support information and infinitely many neighbors".into(),
        });
    }
    let diag = deg / mu + v.value(x);
    Ok(f.value(x) * diag - sum.total() / mu)
}

/// `V+ - min(V-, k)`: keep the positive part, cut the negative part off at
/// depth `k`.  Increasing `k` recovers `V` pointwise from above.
pub fn truncate_negative_part(v: &Potential, k: f64) -> Potential {
    assert!(k >= 1.0, "truncation depth must be at least 1, got {k}");
    v.with_negative_part_cut(k)
}

/// `min(W, k)` for a nonnegative potential `W`.  Nonnegativity is verified
/// on `check_on` (lazy potentials cannot be checked globally).
pub fn truncate_above(
    w: &Potential,
    k: f64,
    check_on: &[Vertex],
) -> Result<Potential, OperatorError> {
    assert!(k >= 1.0, "truncation cap must be at least 1, got {k}");
    for &x in check_on {
        let value = w.value(x);
        if value < 0.0 {
            return Err(OperatorError::NegativeInput { x, value });
        }
    }
    Ok(w.capped_at(k))
}

// ---------------------------------------------------------------------------
// Finite sections
// ---------------------------------------------------------------------------

/// The compression `P_S L_V P_S` of the operator to a finite vertex set S.
///
/// Stored in symmetrized coordinates: the matrix `B` has
/// `B(i,i) = deg(x_i)/mu(x_i) + V(x_i)` (full degree — the compression is
/// Dirichlet) and `B(i,j) = -b(x_i,x_j)/sqrt(mu(x_i) mu(x_j))` off the
/// diagonal, each unordered pair assembled from a single `b`-query so the
/// matrix is symmetric exactly.  The action on functions is
/// `A = D^{-1/2} B D^{1/2}` with `D = diag(mu)`.
#[derive(Clone)]
pub struct FiniteSection {
    graph: WeightedGraph,
    potential: Potential,
    vertices: Vec<Vertex>,
    index_map: HashMap<Vertex, usize>,
    mu: Vec<f64>,
    sqrt_mu: Vec<f64>,
    diag: Vec<f64>,
    /// Strict upper-triangle entries `(i, j, B(i,j))` with `i < j`, sorted.
    pairs: Vec<(u32, u32, f64)>,
    /// CSR over the full symmetric off-diagonal pattern, for matvec.
    row_ptr: Vec<usize>,
    col_idx: Vec<u32>,
    off_vals: Vec<f64>,
    /// Enclosure (lower, upper) of the smallest eigenvalue, filled by the
    /// first eigensolve so later shift-validity checks are free.
    lambda0_bounds: OnceLock<(f64, f64)>,
}

impl std::fmt::Debug for FiniteSection {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FiniteSection")
            .field("n", &self.vertices.len())
            .field("off_diagonal_pairs", &self.pairs.len())
            .finish()
    }
}

/// Assemble the Dirichlet section of `L_V` over the finite set `s`.
pub fn dirichlet_section(
    g: &WeightedGraph,
    v: &Potential,
    s: &[Vertex],
) -> Result<FiniteSection, OperatorError> {
    let n = s.len();
    let index_map: HashMap<Vertex, usize> = s.iter().enumerate().map(|(i, &x)| (x, i)).collect();
    let mut mu = Vec::with_capacity(n);
    let mut sqrt_mu = Vec::with_capacity(n);
    let mut diag = Vec::with_capacity(n);
    for &x in s {
        let m = g.mu(x);
        if !(m.is_finite() && m > 0.0) {
            return Err(GraphError::NonPositiveMeasure { x, value: m }.into());
        }
        let deg = g.deg(x);
        if !deg.is_finite() {
            return Err(OperatorError::MissingDegree { x, value: deg });
        }
        mu.push(m);
        sqrt_mu.push(m.sqrt());
        diag.push(deg / m + v.value(x));
    }
    // One b-query per unordered pair; neighbor lists where available,
    // pairwise scan where the vertex is not locally finite.
    let mut pairs: Vec<(u32, u32, f64)> = Vec::new();
    for (i, &x) in s.iter().enumerate() {
        if g.locally_finite_at(x) {
            for y in g.neighbor_list(x, DEFAULT_ENUM_CAP)? {
                if let Some(&j) = index_map.get(&y) {
                    if i < j {
                        let b = g.b(x, y);
                        if b != 0.0 {
                            pairs.push((i as u32, j as u32, -b / (sqrt_mu[i] * sqrt_mu[j])));
                        }
                    }
                }
            }
        } else {
            for (j, &y) in s.iter().enumerate().skip(i + 1) {
                let b = g.b(x, y);
                if b != 0.0 {
                    pairs.push((i as u32, j as u32, -b / (sqrt_mu[i] * sqrt_mu[j])));
                }
            }
        }
    }
    pairs.sort_unstable_by_key(|&(i, j, _)| (i, j));
    pairs.dedup_by_key(|&mut (i, j, _)| (i, j));

    // Full symmetric pattern in CSR for matvec.
    let mut counts = vec![0usize; n + 1];
    for &(i, j, _) in &pairs {
        counts[i as usize + 1] += 1;
        counts[j as usize + 1] += 1;
    }
    for i in 0..n {
        counts[i + 1] += counts[i];
    }
    let row_ptr = counts.clone();
    let mut fill = counts;
    let nnz = row_ptr[n];
    let mut col_idx = vec![0u32; nnz];
    let mut off_vals = vec![0f64; nnz];
    for &(i, j, val) in &pairs {
        let (i, j) = (i as usize, j as usize);
        col_idx[fill[i]] = j as u32;
        off_vals[fill[i]] = val;
        fill[i] += 1;
        col_idx[fill[j]] = i as u32;
        off_vals[fill[j]] = val;
        fill[j] += 1;
    }
    Ok(FiniteSection {
        graph: g.clone(),
        potential: v.clone(),
        vertices: s.to_vec(),
        index_map,
        mu,
        sqrt_mu,
        diag,
        pairs,
        row_ptr,
        col_idx,
        off_vals,
        lambda0_bounds: OnceLock::new(),
    })
}

impl FiniteSection {
    pub fn n(&self) -> usize {
        self.vertices.len()
    }

    pub fn vertices(&self) -> &[Vertex] {
        &self.vertices
    }

    pub fn index_of(&self, x: Vertex) -> Option<usize> {
        self.index_map.get(&x).copied()
    }

    pub fn graph(&self) -> &WeightedGraph {
        &self.graph
    }

    pub fn potential(&self) -> &Potential {
        &self.potential
    }

    pub fn mu(&self) -> &[f64] {
        &self.mu
    }

    pub fn sqrt_mu(&self) -> &[f64] {
        &self.sqrt_mu
    }

    /// Diagonal of `B` (equals the diagonal of the action).
    pub fn diagonal(&self) -> &[f64] {
        &self.diag
    }

    /// Strict upper-triangle off-diagonal entries of `B`, sorted.
    pub fn upper_pairs(&self) -> &[(u32, u32, f64)] {
        &self.pairs
    }

    /// Cached enclosure of the smallest eigenvalue, if an eigensolve ran.
    pub fn cached_lambda0_bounds(&self) -> Option<(f64, f64)> {
        self.lambda0_bounds.get().copied()
    }

    pub(crate) fn store_lambda0_bounds(&self, lower: f64, upper: f64) {
        let _ = self.lambda0_bounds.set((lower, upper));
    }

    /// `B w` in symmetrized coordinates.
    pub fn apply_sym(&self, w: &[f64]) -> Vec<f64> {
        let n = self.n();
        let mut out = vec![0.0; n];
        for i in 0..n {
            let mut acc = Neumaier::new();
            acc.add(self.diag[i] * w[i]);
            for idx in self.row_ptr[i]..self.row_ptr[i + 1] {
                acc.add(self.off_vals[idx] * w[self.col_idx[idx] as usize]);
            }
            out[i] = acc.total();
        }
        out
    }

    /// `w^T B w`, accumulating once per unordered pair.
    pub fn quad_sym(&self, w: &[f64]) -> f64 {
        let mut acc = Neumaier::new();
        for i in 0..self.n() {
            acc.add(self.diag[i] * w[i] * w[i]);
        }
        for &(i, j, val) in &self.pairs {
            acc.add(2.0 * val * w[i as usize] * w[j as usize]);
        }
        acc.total()
    }

    /// The action on functions: `A f = D^{-1/2} B D^{1/2} f`.
    pub fn apply_action(&self, f: &[f64]) -> Vec<f64> {
        let w: Vec<f64> = f
            .iter()
            .zip(&self.sqrt_mu)
            .map(|(&fi, &s)| fi * s)
            .collect();
        let mut out = self.apply_sym(&w);
        for (o, &s) in out.iter_mut().zip(&self.sqrt_mu) {
            *o /= s;
        }
        out
    }

    /// `<A f, f>_mu = (D^{1/2} f)^T B (D^{1/2} f)`.
    pub fn quad_action_mu(&self, f: &[f64]) -> f64 {
        let w: Vec<f64> = f
            .iter()
            .zip(&self.sqrt_mu)
            .map(|(&fi, &s)| fi * s)
            .collect();
        self.quad_sym(&w)
    }

    /// mu-weighted inner product of two section vectors.
    pub fn mu_dot(&self, f: &[f64], g: &[f64]) -> f64 {
        let mut acc = Neumaier::new();
        for i in 0..self.n() {
            acc.add(self.mu[i] * f[i] * g[i]);
        }
        acc.total()
    }

    /// mu-weighted l2 norm.
    pub fn mu_norm(&self, f: &[f64]) -> f64 {
        self.mu_dot(f, f).max(0.0).sqrt()
    }

    /// Dense symmetrized matrix, for small sections and oracles.
    pub fn dense_sym(&self) -> DMatrix<f64> {
        let n = self.n();
        let mut m = DMatrix::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = self.diag[i];
        }
        for &(i, j, val) in &self.pairs {
            m[(i as usize, j as usize)] = val;
            m[(j as usize, i as usize)] = val;
        }
        m
    }

    /// Coordinate-format text of the full symmetric matrix: one
    /// `row col value` line per stored entry, sorted row-major.  Diagonal
    /// entries are always present.
    pub fn to_coo_string(&self) -> String {
        let n = self.n();
        let mut out = String::new();
        for i in 0..n {
            let mut row: Vec<(u32, f64)> = (self.row_ptr[i]..self.row_ptr[i + 1])
                .map(|idx| (self.col_idx[idx], self.off_vals[idx]))
                .collect();
            row.push((i as u32, self.diag[i]));
            row.sort_unstable_by_key(|&(j, _)| j);
            for (j, val) in row {
                out.push_str(&format!("{i} {j} {val}\n"));
            }
        }
        out
    }
}

// ---------------------------------------------------------------------------
// Pointwise eigenvalue inequality for absolute values
// ---------------------------------------------------------------------------

/// Outcome of [`kato_inequality_check`]: per-interior-vertex margins of
/// `beta |f(x)| - (L_{W0} |f|)(x) >= 0`.
#[derive(Debug, Clone)]
pub struct KatoReport {
    pub beta: f64,
    /// Relative residual of the eigenpair certificate.
    pub eigen_residual: f64,
    /// sup-norm of `f`, the scale for the margin tolerance.
    pub sup_f: f64,
    /// Interior vertices (full neighbor set inside the section), in section order.
    pub interior: Vec<Vertex>,
    /// `beta |f(x)| - (L_{W0}|f|)(x)` per interior vertex.
    pub margins: Vec<f64>,
}

impl KatoReport {
    pub fn min_margin(&self) -> Option<f64> {
        self.margins.iter().copied().fold(None, |acc, m| {
            Some(match acc {
                Some(a) if a <= m => a,
                _ => m,
            })
        })
    }

    /// Every margin at least `-tol * sup|f|`.
    pub fn passes(&self, tol: f64) -> bool {
        self.min_margin()
            .map(|m| m >= -tol * self.sup_f)
            .unwrap_or(true)
    }
}

/// Check the pointwise inequality `L_{W0} |f| <= beta |f|` at the interior
/// vertices of a section, for an eigenpair `(f, beta)` of the section built
/// with potential `W >= W0`.
///
/// The eigenpair is certified first: the relative residual of
/// `A f - beta f` in the mu-norm must not exceed `tol`; otherwise
/// [`OperatorError::NotAnEigenvector`] is returned.  Only interior vertices
/// are checked because at boundary vertices the compressed operator differs
/// from the formal one by the out-of-section coupling.
pub fn kato_inequality_check(
    section: &FiniteSection,
    w0: &Potential,
    f: &[f64],
    beta: f64,
    tol: f64,
) -> Result<KatoReport, OperatorError> {
    assert_eq!(f.len(), section.n(), "candidate length must match section");
    let g = section.graph();
    let w = section.potential();
    for &x in section.vertices() {
        if w0.value(x) > w.value(x) {
            return Err(OperatorError::PotentialOrderViolated { x });
        }
    }
    let norm_f = section.mu_norm(f);
    let action = section.apply_action(f);
    let mut res = Neumaier::new();
    for i in 0..section.n() {
        let r = action[i] - beta * f[i];
        res.add(section.mu()[i] * r * r);
    }
    let residual_norm = res.total().max(0.0).sqrt();
    let eigen_residual = if norm_f > 0.0 {
        residual_norm / norm_f
    } else {
        f64::INFINITY
    };
    if eigen_residual > tol {
        return Err(OperatorError::NotAnEigenvector {
            residual: eigen_residual,
            tol,
        });
    }
    let sup_f = f.iter().fold(0.0f64, |a, &v| a.max(v.abs()));
    let mut interior = Vec::new();
    let mut margins = Vec::new();
    for (i, &x) in section.vertices().iter().enumerate() {
        if !g.locally_finite_at(x) {
            continue; // infinitely many neighbors cannot all lie in S
        }
        let nbrs = g.neighbor_list(x, DEFAULT_ENUM_CAP)?;
        if !nbrs.iter().all(|y| section.index_of(*y).is_some()) {
            continue;
        }
        // (L_{W0} |f|)(x) with |f| extended by zero outside the section.
        let mu = g.mu(x);
        let mut sum = Neumaier::new();
        for &y in &nbrs {
            let j = section.index_of(y).unwrap();
            sum.add(g.b(x, y) * f[j].abs());
        }
        let lhs = (g.deg(x) / mu + w0.value(x)) * f[i].abs() - sum.total() / mu;
        interior.push(x);
        margins.push(beta * f[i].abs() - lhs);
    }
    Ok(KatoReport {
        beta,
        eigen_residual,
        sup_f,
        interior,
        margins,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::WeightSeq;

    pub(crate) fn path_graph(n: usize) -> WeightedGraph {
        WeightedGraph::birth_death(WeightSeq::Const(1.0), WeightSeq::Const(1.0), Some(n)).unwrap()
    }

    #[test]
    fn formal_application_matches_hand_sums() {
        // Path on three vertices, f = delta_1.
        let g = path_graph(3);
        let f = GraphFn::delta(1);
        let v = Potential::zero();
        let got: Vec<f64> = (0..3)
            .map(|x| apply_formal(&g, &v, &f, x).unwrap().re)
            .collect();
        assert_eq!(got, vec![-1.0, 2.0, -1.0]);

        // Potential enters only through the diagonal term.
        let g = path_graph(2);
        let v = Potential::from_values(vec![5.0, 0.0]);
        let got = apply_formal(&g, &v, &GraphFn::delta(0), 0).unwrap();
        assert_eq!(got.re, 6.0);
        assert_eq!(got.im, 0.0);

        // Zero input stays zero everywhere.
        for x in 0..3 {
            assert_eq!(
                apply_formal(&path_graph(3), &Potential::zero(), &GraphFn::zero(), x).unwrap(),
                Complex64::default()
            );
        }
    }

    fn summable_star() -> WeightedGraph {
        WeightedGraph::star(
            WeightSeq::Geometric {
                initial: 0.5,
                ratio: 0.5,
            },
            1.0,
            WeightSeq::Const(1.0),
            None,
        )
        .unwrap()
    }

    #[test]
    fn domain_test_is_three_valued() {
        let g = summable_star();
        // Finite support always works.
        assert_eq!(in_domain_f(&g, &GraphFn::delta(5), 0, None), Ternary::Yes);
        // Growing values on the leaves: b(0,k)|f(k)| = 1/k^2, summable,
        // but only a caller certificate can say so.
        let f = GraphFn::from_closure(|x| {
            if x == 0 {
                Complex64::default()
            } else {
                Complex64::new(2f64.powi(x as i32) / (x as f64 * x as f64), 0.0)
            }
        });
        assert_eq!(in_domain_f(&g, &f, 0, None), Ternary::Unknown);
        assert_eq!(
            in_domain_f(
                &g,
                &f,
                0,
                Some(Tail::RemainderBound {
                    after: 100,
                    bound: 0.01
                })
            ),
            Ternary::Yes
        );
        assert_eq!(
            in_domain_f(&g, &f, 0, Some(Tail::Divergent { after: 100 })),
            Ternary::No
        );
        // At a leaf the graph is locally finite, so no certificate needed.
        assert_eq!(in_domain_f(&g, &f, 3, None), Ternary::Yes);
    }

    #[test]
    fn formal_application_without_support_needs_local_finiteness() {
        let g = summable_star();
        let f = GraphFn::from_closure(|_| Complex64::new(1.0, 0.0));
        assert!(matches!(
            apply_formal(&g, &Potential::zero(), &f, 0),
            Err(OperatorError::DomainViolation { x: 0, .. })
        ));
        // Same function at a leaf: leaf 3 has weight 2^-3 to the center.
        let got = apply_formal(&g, &Potential::zero(), &f, 3).unwrap();
        assert!((got.re - 0.0).abs() < 1e-15); // deg/mu * 1 - b/mu * 1 = 0
    }

    #[test]
    fn negative_part_truncation_values() {
        let v = Potential::from_values(vec![0.0, -5.0, -1.0]);
        let t = truncate_negative_part(&v, 2.0);
        assert_eq!(
            (0..3u64).map(|x| t.value(x)).collect::<Vec<_>>(),
            vec![0.0, -2.0, -1.0]
        );
        // Nonnegative potentials are untouched; deep cuts recover V.
        let v = Potential::from_values(vec![1.0, 2.0]);
        let t = truncate_negative_part(&v, 7.0);
        assert_eq!(t.value(0), 1.0);
        assert_eq!(t.value(1), 2.0);
        let v = Potential::constant(-3.0);
        assert_eq!(truncate_negative_part(&v, 10.0).value(0), -3.0);
    }

    #[test]
    fn cap_truncation_rejects_negative_input() {
        let w = Potential::from_fn(|x| x as f64);
        let capped = truncate_above(&w, 3.0, &(0..10).collect::<Vec<_>>()).unwrap();
        assert_eq!(
            (0..6u64).map(|x| capped.value(x)).collect::<Vec<_>>(),
            vec![0.0, 1.0, 2.0, 3.0, 3.0, 3.0]
        );
        let bad = Potential::from_values(vec![1.0, -0.5]);
        assert!(matches!(
            truncate_above(&bad, 3.0, &[0, 1]),
            Err(OperatorError::NegativeInput { x: 1, .. })
        ));
    }

    #[test]
    fn truncations_are_monotone_in_k() {
        let v = Potential::from_values(vec![3.0, -7.5, -0.2, 0.0, -12.0]);
        let sample: Vec<Vertex> = (0..5).collect();
        for k in 1..6 {
            let lo = truncate_negative_part(&v, k as f64);
            let hi = truncate_negative_part(&v, (k + 1) as f64);
            for &x in &sample {
                assert!(lo.value(x) >= hi.value(x));
                assert!(hi.value(x) >= v.value(x));
                assert!(lo.value(x) <= v.positive_part(x));
            }
        }
        let w = Potential::from_values(vec![0.0, 2.0, 9.0, 4.5]);
        for k in 1..10 {
            let lo = truncate_above(&w, k as f64, &sample).unwrap();
            let hi = truncate_above(&w, (k + 1) as f64, &sample).unwrap();
            for &x in &sample {
                assert!(lo.value(x) <= hi.value(x));
                assert!(hi.value(x) <= w.value(x).max(0.0) + 1e-15);
            }
        }
    }

    #[test]
    fn two_vertex_section_assembles_the_expected_matrix() {
        let g = path_graph(2);
        let s = dirichlet_section(&g, &Potential::zero(), &[0, 1]).unwrap();
        let b = s.dense_sym();
        assert_eq!(b[(0, 0)], 1.0);
        assert_eq!(b[(0, 1)], -1.0);
        assert_eq!(b[(1, 0)], -1.0);
        assert_eq!(b[(1, 1)], 1.0);
    }

    #[test]
    fn dirichlet_diagonal_keeps_the_full_degree() {
        // Half line, section = {0}: the edge to 1 leaves the section but the
        // degree on the diagonal still counts it.
        let g = WeightedGraph::birth_death(WeightSeq::Const(1.0), WeightSeq::Const(1.0), None)
            .unwrap();
        let s = dirichlet_section(&g, &Potential::zero(), &[0]).unwrap();
        let b = s.dense_sym();
        assert_eq!(b.nrows(), 1);
        assert_eq!(b[(0, 0)], 1.0);
    }

    #[test]
    fn constant_potential_shift_moves_the_diagonal() {
        let g = path_graph(4);
        let v = Potential::from_values(vec![0.5, -1.0, 2.0, 0.0]);
        let s0 = dirichlet_section(&g, &v, &[0, 1, 2, 3]).unwrap();
        let c = 3.25;
        let s1 = dirichlet_section(&g, &v.plus_const(c), &[0, 1, 2, 3]).unwrap();
        let diff = s1.dense_sym() - s0.dense_sym();
        for i in 0..4 {
            for j in 0..4 {
                let expect = if i == j { c } else { 0.0 };
                assert!((diff[(i, j)] - expect).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn section_action_matches_formal_application_on_supported_functions() {
        // Mixed weights and measures to make the conjugation nontrivial.
        let g = WeightedGraph::explicit(
            4,
            &[(0, 1, 2.0), (1, 2, 0.5), (2, 3, 1.5), (0, 3, 0.25)],
            vec![1.0, 4.0, 0.5, 2.0],
        )
        .unwrap();
        let v = Potential::from_values(vec![1.0, -0.5, 0.0, 3.0]);
        let sec = dirichlet_section(&g, &v, &[0, 1, 2, 3]).unwrap();
        let f = vec![0.3, -1.2, 0.7, 2.0];
        let via_section = sec.apply_action(&f);
        let gf = GraphFn::from_real_values(&f);
        for (i, x) in (0..4u64).enumerate() {
            let direct = apply_formal(&g, &v, &gf, x).unwrap().re;
            assert!(
                (via_section[i] - direct).abs() <= 1e-13 * (1.0 + direct.abs()),
                "mismatch at {x}: {} vs {direct}",
                via_section[i]
            );
        }
    }

    #[test]
    fn action_is_symmetric_in_the_mu_inner_product() {
        let g = WeightedGraph::explicit(
            3,
            &[(0, 1, 1.0), (1, 2, 2.0)],
            vec![0.5, 1.5, 3.0],
        )
        .unwrap();
        let v = Potential::from_values(vec![0.0, 1.0, -2.0]);
        let sec = dirichlet_section(&g, &v, &[0, 1, 2]).unwrap();
        let f = vec![1.0, -2.0, 0.5];
        let h = vec![0.3, 0.3, -1.0];
        let lhs = sec.mu_dot(&sec.apply_action(&f), &h);
        let rhs = sec.mu_dot(&f, &sec.apply_action(&h));
        assert!((lhs - rhs).abs() <= 1e-12 * (1.0 + lhs.abs()));
    }

    #[test]
    fn kato_margins_vanish_for_the_flat_ground_state() {
        // Section = the whole path, so every vertex is interior; the
        // constant vector is the beta = 0 ground state and |f| = f.
        let g = path_graph(3);
        let sec = dirichlet_section(&g, &Potential::zero(), &[0, 1, 2]).unwrap();
        let f = vec![1.0, 1.0, 1.0];
        let report = kato_inequality_check(&sec, &Potential::zero(), &f, 0.0, 1e-9).unwrap();
        assert_eq!(report.interior, vec![0, 1, 2]);
        for &m in &report.margins {
            assert!(m.abs() <= 1e-12);
        }
        assert!(report.passes(1e-9));
    }

    #[test]
    fn kato_holds_for_every_eigenpair_with_a_smaller_reference_potential() {
        let g = path_graph(3);
        let w = Potential::from_values(vec![2.0, 0.0, 0.0]);
        let sec = dirichlet_section(&g, &w, &[0, 1, 2]).unwrap();
        let eig = sec.dense_sym().symmetric_eigen();
        for col in 0..3 {
            let beta = eig.eigenvalues[col];
            // Map the symmetrized eigenvector back to function coordinates
            // (mu = 1 here, so they coincide).
            let f: Vec<f64> = (0..3).map(|i| eig.eigenvectors[(i, col)]).collect();
            let report =
                kato_inequality_check(&sec, &Potential::zero(), &f, beta, 1e-9).unwrap();
            assert_eq!(report.interior.len(), 3);
            assert!(
                report.passes(1e-9),
                "margin {:?} for beta {beta}",
                report.min_margin()
            );
        }
    }

    #[test]
    fn kato_check_rejects_non_eigenvectors_and_bad_potential_order() {
        let g = path_graph(3);
        let sec = dirichlet_section(&g, &Potential::zero(), &[0, 1, 2]).unwrap();
        assert!(matches!(
            kato_inequality_check(&sec, &Potential::zero(), &[1.0, 0.0, -1.0], 0.5, 1e-9),
            Err(OperatorError::NotAnEigenvector { .. })
        ));
        // W0 exceeding W somewhere violates the hypothesis.
        assert!(matches!(
            kato_inequality_check(
                &sec,
                &Potential::constant(1.0),
                &[1.0, 1.0, 1.0],
                0.0,
                1e-9
            ),
            Err(OperatorError::PotentialOrderViolated { .. })
        ));
    }

    #[test]
    fn boundary_vertices_are_excluded_from_the_kato_check() {
        // Half line, section {0,1,2}: vertex 2 has neighbor 3 outside.
        let g =
            WeightedGraph::birth_death(WeightSeq::Const(1.0), WeightSeq::Const(1.0), None).unwrap();
        let sec = dirichlet_section(&g, &Potential::zero(), &[0, 1, 2]).unwrap();
        let eig = sec.dense_sym().symmetric_eigen();
        let beta = eig.eigenvalues[0];
        let f: Vec<f64> = (0..3).map(|i| eig.eigenvectors[(i, 0)]).collect();
        let report = kato_inequality_check(&sec, &Potential::zero(), &f, beta, 1e-9).unwrap();
        assert_eq!(report.interior, vec![0, 1]);
        assert!(report.passes(1e-9));
    }

    #[test]
    fn coo_export_is_row_major_with_structural_diagonal() {
        let g = path_graph(3);
        let s = dirichlet_section(&g, &Potential::zero(), &[0, 1, 2]).unwrap();
        let text = s.to_coo_string();
        let expected = "0 0 1\n0 1 -1\n1 0 -1\n1 1 2\n1 2 -1\n2 1 -1\n2 2 1\n";
        assert_eq!(text, expected);
    }

    #[test]
    fn missing_degree_is_reported() {
        struct InfDeg;
        impl crate::graph::GraphOracle for InfDeg {
            fn edge_weight(&self, _x: Vertex, _y: Vertex) -> f64 {
                0.0
            }
            fn measure(&self, _x: Vertex) -> f64 {
                1.0
            }
            fn degree(&self, _x: Vertex) -> f64 {
                f64::INFINITY
            }
            fn neighbors(&self, _x: Vertex) -> Box<dyn Iterator<Item = Vertex> + '_> {
                Box::new(std::iter::empty())
            }
            fn locally_finite_at(&self, _x: Vertex) -> bool {
                true
            }
            fn vertex_by_index(&self, i: usize) -> Option<Vertex> {
                Some(i as Vertex)
            }
            fn vertex_count(&self) -> Option<usize> {
                None
            }
        }
        let g = WeightedGraph::from_oracle(InfDeg);
        assert!(matches!(
            dirichlet_section(&g, &Potential::zero(), &[0]),
            Err(OperatorError::MissingDegree { x: 0, .. })
        ));
        assert!(matches!(
            apply_formal(&g, &Potential::zero(), &GraphFn::delta(0), 0),
            Err(OperatorError::MissingDegree { x: 0, .. })
        ));
    }
}
