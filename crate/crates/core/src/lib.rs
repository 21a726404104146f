//! Discrete Schrödinger operators on weighted graphs: graph families and
//! validation, finite-section operator assembly, energy forms, resolvent
//! solvers, and the convergence experiments built on top of them.

pub mod accum;
pub mod experiments;
pub mod forms;
pub mod function;
pub mod graph;
pub mod graphspec;
pub mod operator;
pub mod potential;
pub mod report;
pub mod solvers;

pub use experiments::{
    deficiency_probe_birth_death, formsum_vs_friedrichs, positive_core_approximation,
    stability_pipeline, CoincidenceResult, CoreApproxRow, CoreApproxTrace, DeficiencyReport,
    ExperimentError, GrowthClass, SelectedW, StabilityReport, StabilitySelection,
};
pub use forms::{
    finite_energy_check, form_norm_eval, form_q, form_q_quadratic, greens_identity_residual,
    pairing_a, FiniteEnergyCheck, FormNorm, FormValue, FormsError, SesquiFormValue,
};
pub use function::{GraphFn, Ternary};
pub use graph::{
    ball_exhaustion, check_fc, connected_components, validate, Exhaustion, Fc, GraphError,
    GraphOracle, Tail, ValidationReport, Vertex, Violation, WeightSeq, WeightedGraph,
};
pub use graphspec::{load_graph_spec, parse_graph_spec, GraphSpecError, ParsedSpec};
pub use operator::{
    apply_formal, dirichlet_section, in_domain_f, kato_inequality_check, truncate_above,
    truncate_negative_part, FiniteSection, KatoReport, OperatorError,
};
pub use potential::Potential;
pub use report::{InvariantResult, Summary};
pub use solvers::{
    dense_eigenpairs, dense_sqrt_psd, domination_check, lambda0, positivity_check,
    resolvent_apply, seeded_rng, src_monitor, ConvergenceReport, ConvergenceRow,
    DominationReport, Lambda0, PositivityReport, ResolventResult, SolverError,
    CONVERGENCE_CSV_HEADER, DENSE_LIMIT,
};
