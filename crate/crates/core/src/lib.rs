//! Decentralized dynamic virtual power plant (DVPP) design for frequency
//! reserves, with a lumped center-of-inertia grid simulator to validate the
//! resulting controllers against FCR-D requirements.
//!
//! The crate is organized around five layers:
//!
//! - [`ratfun`]: rational transfer-function algebra (the universal currency),
//! - [`plants`]: device models (hydro, battery, wind) and energy bookkeeping,
//! - [`synthesis`]: dynamic participation factors, model matching, and the
//!   internal-stability audit,
//! - [`coi_sim`]: closed-loop fault simulation and FCR-D compliance,
//! - [`scenario_io`]: scenario files, built-in study cases, and CSV export.

pub mod cli;
pub mod coi_sim;
pub mod plants;
pub mod ratfun;
pub mod scenario_io;
pub mod synthesis;

pub use ratfun::{Polynomial, RatfunError, RationalTF, RootSet, TimeSeries};

/// Finite and strictly positive; the validation predicate for physical
/// parameters.
pub(crate) fn is_pos(x: f64) -> bool {
    x.is_finite() && x > 0.0
}
