//! Observability analysis and initial-state reconstruction for open quantum
//! systems whose outputs are restricted to local (neighborhood) observables.
//!
//! The crate is organised bottom-up:
//!
//! * [`operator`]: dense operators, tensor products, partial traces,
//!   vectorization and Hermitian product bases.
//! * [`locality`]: neighborhood structures and the local output map.
//! * [`dynamics`]: Lindblad generators, superoperators and discretization.
//! * [`observability`]: Kalman-type rank analysis and parameter randomization.
//! * [`measurement`]: shot-noise simulation of repeated local measurements.
//! * [`reconstruction`]: gramian inversion and max-entropy estimation.

pub mod dynamics;
pub mod error;
pub mod expm;
pub mod linalg;
pub mod locality;
mod maxent;
pub mod measurement;
pub mod observability;
pub mod operator;
pub mod reconstruction;

pub use dynamics::{
    aliasing_check, build_generator, continuous_observability_span, discretize, AliasingReport,
    AliasingStatus, Coefficient, DiscretizedSystem, LindbladSpec, LindbladTerm, SuperKind,
    Superoperator,
};
pub use error::{Error, Result};
pub use locality::{
    build_output_map, check_structure, kernel_witness, NeighborhoodStructure, OutputMap,
    StructureFlags,
};
pub use measurement::{
    born_distribution, exact_means, exact_outputs, noiseless_record, run_experiment,
    MeasurementPlan, MeasurementRecord, RecordEntry,
};
pub use observability::{
    analyze, lower_bound, observability_matrix, randomize_until_observable, ObservabilityReport,
    RandomizationResult, RankPolicy,
};
pub use operator::{
    embed, partial_trace, pauli_basis, product_basis, tensor, unvec, vec, Operator, OperatorBasis,
    Role, Vectorized,
};
pub use reconstruction::{
    gramian_reconstruct, max_entropy_reconstruct, relax_constraints, ConstraintSet, Method,
    ReconstructionResult,
};
