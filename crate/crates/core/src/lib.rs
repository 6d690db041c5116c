//! Dyadic-block regularity of the periodic Schrödinger fundamental solution
//! `E(t,x) = Σ e(n²t/2 + nx)`: exact phases, continued fractions, theta sums,
//! Besov exponents and the rational-time delta-comb formula.

pub mod besov;
pub mod collapse;
pub mod compensated;
pub mod contfrac;
pub mod cutoff;
pub mod error;
pub mod exactnum;
pub mod thetasum;

pub use besov::{BlockRecord, Mode, RegularityReport, ScanOptions};
pub use collapse::{CollapseReport, CombFormula, TestFunction};
pub use contfrac::{CFExpansion, Parity, SigmaClass, SigmaEstimate, TimeSpec};
pub use cutoff::{CutoffFunction, Sides, WeightVector};
pub use error::{Error, Result};
pub use exactnum::{BigRational, FixedReal};
pub use thetasum::{SumSpec, SupNormResult};
