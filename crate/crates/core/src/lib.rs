//! Recovery of exponential sums `f(t) = c₀ + Σ cₙ e^{αₙ t}` from point values
//! and iterated integrals, by way of a linear collocation system and the
//! roots of a monic polynomial.

pub mod calculus;
pub mod error;
pub mod io;
pub mod model;
pub mod recovery;
pub mod solver;
pub mod suite;

pub use calculus::{ingest_records, DenseSignal, MomentTable};
pub use error::{Error, Result};
pub use model::{generate, ExpSumModel, GeneratorSpec, Term};
pub use recovery::{
    recover, recover_shifted, recover_with_constant, solve, verify_overdetermined, Mode,
    RecoveryOptions, RecoveryProblem, RecoveryResult, SampleRecord,
};
