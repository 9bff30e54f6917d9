//! Design and verification toolkit for cross-coupled-pair (XCP) oscillation
//! controllers.
//!
//! A passive linear plant `P` driven through a controller impedance `C` forms
//! the loop `G = C / (1 + 2PC)`, closed in positive feedback by the XCP
//! sigmoid. The crate certifies 2-dominance of that Lur'e loop with a
//! graphical test on `C^-1 + 2P` along a shifted Nyquist contour, checks that
//! the origin is the unique and unstable equilibrium, and simulates the
//! closed loop to measure the resulting limit cycle.

pub mod criterion;
pub mod equilibria;
pub mod netfun;
pub mod poly;
pub mod sim;
pub mod xcp;

pub use criterion::{CriterionError, DominanceReport, NyquistCurve};
pub use equilibria::{EquilibriumError, EquilibriumSet, InstabilityWindow, RootLocusBranch};
pub use netfun::{DcMotorPlant, LoopFunction, NetError, RcController, RlcController};
pub use poly::{PolyError, Polynomial, RationalFunction, RootSet};
pub use sim::{OscillationMetrics, SimError, StateSpaceRealization, Trajectory};
pub use xcp::{SectorNonlinearity, XcpError};

pub use num_complex::Complex64;
