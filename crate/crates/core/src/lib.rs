//! Networked public goods games with heterogeneous concave values and
//! convex costs.
//!
//! The crate covers the whole pipeline: the game model ([`game`]),
//! continuous-time dynamics ([`dynamics`]), equilibrium computation and
//! verification ([`equilibrium`]), uniqueness certificates
//! ([`certificates`]), affine game equivalence ([`equivalence`]),
//! comparative statics of money redistribution ([`statics`]) and the two
//! clipped-quadratic case studies ([`casestudy`]).

// Negated comparisons are how NaN parameters get rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod casestudy;
pub mod certificates;
pub mod dynamics;
pub mod equilibrium;
pub mod equivalence;
pub mod error;
pub mod functions;
pub mod game;
pub mod io;
pub mod linalg;
pub mod presets;
pub mod statics;

pub use certificates::{CertificateReport, Theorem, Verdict};
pub use dynamics::{RateFit, RateModel, Trajectory};
pub use equilibrium::{SolveOptions, SolveResult, SolveStatus};
pub use equivalence::EquivalenceMap;
pub use error::{Error, Result};
pub use functions::{ScalarFunction, SmoothnessReport};
pub use game::{GainBounds, Game};
pub use linalg::Matrix;
pub use statics::StaticsResult;
