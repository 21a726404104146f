//! End-to-end convergence experiments: the two-path assembly coincidence
//! check, the positive-core approximation trace, the perturbation-stability
//! pipeline with its selected approximating sequence, and a birth–death
//! growth probe for square-summable solutions.
//!
//! Every experiment that touches resolvent families first normalizes the
//! unperturbed part by the common shift `c = min(0, lambda0)` so the whole
//! family is positive semi-definite, and records that shift in its report.

mod coincidence;
mod core_approx;
mod deficiency;
mod stability;

pub use coincidence::{formsum_vs_friedrichs, CoincidenceResult};
pub use core_approx::{positive_core_approximation, CoreApproxRow, CoreApproxTrace, SelectedW};
pub use deficiency::{deficiency_probe_birth_death, DeficiencyReport, GrowthClass};
pub use stability::{stability_pipeline, StabilityReport, StabilitySelection};

use thiserror::Error;

use crate::forms::FormsError;
use crate::graph::GraphError;
use crate::operator::{FiniteSection, OperatorError};
use crate::solvers::{lambda0, SolverError};

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    Forms(#[from] FormsError),
    #[error(transparent)]
    Operator(#[from] OperatorError),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error("input vector must be entrywise nonnegative; entry {index} is {value}")]
    NotNonnegative { index: usize, value: f64 },
    #[error("perturbation must be nonnegative on the window; entry {index} is {value}")]
    NegativePerturbation { index: usize, value: f64 },
    #[error("no truncation level in the grid meets the 1/r selection rule at r = {r}")]
    SelectionFailure { r: f64 },
    #[error("chain weight {index} is zero; the chain disconnects there")]
    ZeroWeight { index: usize },
}

/// The common normalization shift for a family of operators built over the
/// same unperturbed part: `c = min(0, lambda0(section))`.  Subtracting `c`
/// from the potential leaves already-nonnegative sections untouched and
/// lifts semi-bounded ones to be positive semi-definite.
pub(crate) fn common_shift(section: &FiniteSection) -> Result<f64, SolverError> {
    Ok(lambda0(section, 1e-10)?.value.min(0.0))
}

/// `(r^{-1} A + 1)^{-1} u` computed through the shifted solve
/// `(A + r)^{-1} (r u)`.
pub(crate) fn unit_resolvent(
    section: &FiniteSection,
    r: f64,
    u: &[f64],
) -> Result<Vec<f64>, SolverError> {
    let scaled: Vec<f64> = u.iter().map(|&x| r * x).collect();
    Ok(crate::solvers::resolvent_apply(section, r, &scaled, 1e-12)?.solution)
}
