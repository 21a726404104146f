//! Two ways to assemble the same operator: add a nonnegative diagonal
//! perturbation to an assembled section, or fold the perturbation into the
//! potential before assembling.  At finite scale both reduce to one matrix;
//! this experiment measures the entrywise discrepancy and then probes the
//! stability of the identity by comparing the two paths' resolvents along a
//! growing window sequence.

use nalgebra::DVector;

use crate::graph::{Vertex, WeightedGraph};
use crate::operator::dirichlet_section;
use crate::potential::Potential;
use crate::solvers::{lambda0, seeded_rng, ConvergenceRow};
use rand::Rng;

use super::ExperimentError;

#[derive(Debug, Clone)]
pub struct CoincidenceResult {
    /// Max absolute entry difference between the two assembly paths on the
    /// full window.
    pub max_matrix_discrepancy: f64,
    /// Shift used for the resolvent probes.
    pub alpha: f64,
    pub section_size: usize,
    /// Per growth level and test vector: the distance between the two
    /// paths' resolvent outputs (`l2_error`) and the matrix discrepancy at
    /// that level (`form_error`), in the convergence-row layout.
    pub drift_rows: Vec<ConvergenceRow>,
    /// Largest resolvent drift seen at any level.
    pub max_drift: f64,
}

/// Assemble `section(V1) + diag(V2)` and `section(V1 + V2)` over the window
/// `s` and compare them entrywise, then compare their resolvents applied to
/// deterministic test vectors over a doubling sequence of prefixes of `s`.
pub fn formsum_vs_friedrichs(
    g: &WeightedGraph,
    v1: &Potential,
    v2: &Potential,
    s: &[Vertex],
) -> Result<CoincidenceResult, ExperimentError> {
    for (i, &x) in s.iter().enumerate() {
        let w = v2.value(x);
        if w < 0.0 {
            return Err(ExperimentError::NegativePerturbation { index: i, value: w });
        }
    }
    let sec_v1 = dirichlet_section(g, v1, s)?;
    let combined = v1.plus(v2);
    let sec_sum = dirichlet_section(g, &combined, s)?;

    // Path A: diagonal of the V1 section plus V2; off-diagonal part shared.
    let mut discrepancy = 0.0f64;
    for (i, &x) in s.iter().enumerate() {
        let a = sec_v1.diagonal()[i] + v2.value(x);
        let b = sec_sum.diagonal()[i];
        discrepancy = discrepancy.max((a - b).abs());
    }
    debug_assert_eq!(sec_v1.upper_pairs().len(), sec_sum.upper_pairs().len());
    for (pa, pb) in sec_v1.upper_pairs().iter().zip(sec_sum.upper_pairs()) {
        discrepancy = discrepancy.max((pa.2 - pb.2).abs());
    }

    // Shift for the probes: valid on every prefix because shrinking the
    // window can only raise the smallest eigenvalue, and adding V2 >= 0
    // never lowers it.
    let l0 = lambda0(&sec_v1, 1e-10)?.value;
    let alpha = 1.0 + (-l0).max(0.0);

    // Doubling prefixes of the window, ending with the full window.
    let mut levels: Vec<usize> = Vec::new();
    let mut size = 2usize;
    while size < s.len() {
        levels.push(size);
        size *= 2;
    }
    if s.is_empty() {
        return Ok(CoincidenceResult {
            max_matrix_discrepancy: discrepancy,
            alpha,
            section_size: 0,
            drift_rows: Vec::new(),
            max_drift: 0.0,
        });
    }
    levels.push(s.len());

    let mut rng = seeded_rng(0xc01c1de);
    let mut drift_rows = Vec::new();
    let mut max_drift = 0.0f64;
    for &m in &levels {
        let window = &s[..m];
        let a1 = dirichlet_section(g, v1, window)?;
        let a2 = dirichlet_section(g, &combined, window)?;
        let mut level_disc = 0.0f64;
        let mut mat_a = a1.dense_sym();
        for (i, &x) in window.iter().enumerate() {
            mat_a[(i, i)] += v2.value(x);
        }
        let mat_b = a2.dense_sym();
        for i in 0..m {
            for j in 0..m {
                level_disc = level_disc.max((mat_a[(i, j)] - mat_b[(i, j)]).abs());
            }
        }
        for i in 0..m {
            mat_a[(i, i)] += alpha;
        }
        let chol_a = mat_a
            .cholesky()
            .ok_or(crate::solvers::SolverError::ShiftTooSmall {
                alpha,
                lambda0: f64::NAN,
                threshold: f64::NAN,
            })?;
        let mut mat_b_shift = mat_b.clone();
        for i in 0..m {
            mat_b_shift[(i, i)] += alpha;
        }
        let chol_b = mat_b_shift
            .cholesky()
            .ok_or(crate::solvers::SolverError::ShiftTooSmall {
                alpha,
                lambda0: f64::NAN,
                threshold: f64::NAN,
            })?;
        // Three deterministic test vectors in the symmetrized frame.
        let mut vectors: Vec<Vec<f64>> = Vec::new();
        let mut delta = vec![0.0; m];
        delta[0] = 1.0;
        vectors.push(delta);
        vectors.push(vec![1.0 / (m as f64).sqrt(); m]);
        vectors.push((0..m).map(|_| rng.random_range(0.0..1.0)).collect());
        for (vid, v) in vectors.iter().enumerate() {
            let rhs = DVector::from_column_slice(v);
            let wa = chol_a.solve(&rhs);
            let wb = chol_b.solve(&rhs);
            let drift = (&wa - &wb).norm();
            max_drift = max_drift.max(drift);
            drift_rows.push(ConvergenceRow {
                k_or_r: m as f64,
                alpha,
                vector_id: vid,
                l2_error: drift,
                form_error: level_disc,
                section_size: m,
            });
        }
    }
    Ok(CoincidenceResult {
        max_matrix_discrepancy: discrepancy,
        alpha,
        section_size: s.len(),
        drift_rows,
        max_drift,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::WeightedGraph;
    use crate::operator::dirichlet_section;

    fn two_points() -> WeightedGraph {
        WeightedGraph::explicit(2, &[(0, 1, 1.0)], vec![1.0, 1.0]).unwrap()
    }

    #[test]
    fn the_two_point_matrix_agrees_along_both_assembly_paths() {
        let g = two_points();
        let v1 = Potential::zero();
        let v2 = Potential::from_values(vec![1.0, 0.0]);
        let out = formsum_vs_friedrichs(&g, &v1, &v2, &[0, 1]).unwrap();
        assert_eq!(out.max_matrix_discrepancy, 0.0);
        assert_eq!(out.section_size, 2);
        assert_eq!(out.max_drift, 0.0);
        // Both paths assemble [[2, -1], [-1, 1]].
        let sec = dirichlet_section(&g, &v1.plus(&v2), &[0, 1]).unwrap();
        let m = sec.dense_sym();
        assert_eq!(m[(0, 0)], 2.0);
        assert_eq!(m[(0, 1)], -1.0);
        assert_eq!(m[(1, 0)], -1.0);
        assert_eq!(m[(1, 1)], 1.0);
    }

    #[test]
    fn a_zero_perturbation_leaves_no_resolvent_drift() {
        let g = WeightedGraph::birth_death(
            crate::graph::WeightSeq::Const(1.0),
            crate::graph::WeightSeq::Const(1.0),
            Some(8),
        )
        .unwrap();
        let v1 = Potential::from_values(vec![0.5, -0.25, 0.0, 1.0, 0.0, 0.0, 2.0, 0.0]);
        let s: Vec<Vertex> = (0..8).collect();
        let out = formsum_vs_friedrichs(&g, &v1, &Potential::zero(), &s).unwrap();
        assert_eq!(out.max_matrix_discrepancy, 0.0);
        assert_eq!(out.max_drift, 0.0);
        assert!(!out.drift_rows.is_empty());
    }

    #[test]
    fn negative_perturbations_are_rejected() {
        let g = two_points();
        let v2 = Potential::from_values(vec![-0.5, 0.0]);
        let err = formsum_vs_friedrichs(&g, &Potential::zero(), &v2, &[0, 1]).unwrap_err();
        match err {
            ExperimentError::NegativePerturbation { index, value } => {
                assert_eq!(index, 0);
                assert_eq!(value, -0.5);
            }
            other => panic!("unexpected error {other:?}"),
        }
    }
}
