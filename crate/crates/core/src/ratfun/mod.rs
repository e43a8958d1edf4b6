//! Rational transfer-function algebra: construction, composition, root
//! finding, frequency response, and step/impulse simulation.

pub mod poly;
pub mod roots;
pub mod sim;
pub mod tf;

pub use poly::Polynomial;
pub use roots::{find_roots, RootSet, HURWITZ_TOL};
pub use sim::{
    crossover_frequency, impulse_response, step_response, StateSpace, TimeSeries, DEFAULT_DT,
    DEFAULT_T_END,
};
pub use tf::{RationalTF, StabilityClass, CANCEL_TOL};

use num_complex::Complex64;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RatfunError {
    #[error("division by the zero transfer function")]
    DivisionByZeroTF,
    #[error("root refinement did not converge")]
    ConvergenceFailure,
    #[error("evaluation at a pole near s = {location}")]
    EvaluationAtPole { location: Complex64 },
    #[error("transfer function has a pole at the origin")]
    PoleAtOrigin,
    #[error("transfer function is improper (numerator degree exceeds denominator)")]
    ImproperTF,
    #[error("simulation diverged past the overflow guard")]
    UnstableSimulation,
    #[error("loop gain never crosses unity on the search interval")]
    NoCrossover,
}
