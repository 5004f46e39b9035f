//! p-adic continued fraction algorithms: digit arithmetic on Q_p, hyperbolic
//! linear fractional transformations, the one- and multidimensional
//! algorithms they generate, and exact and Monte Carlo tools for their
//! invariant measure.

pub mod cli;
pub mod ergodic;
pub mod error;
pub mod lft;
pub mod padic;
pub mod system;

pub use error::{Error, Result};
pub use lft::{HyperbolicCert, HyperbolicLft, LftParams, Violation};
pub use padic::{Ball, PadicApprox, PadicScalar, PrimeCtx, ProductCylinder, Rational, Valuation};
pub use system::{Digit, Expansion, Status, SystemSpec, Threshold, Variant};
