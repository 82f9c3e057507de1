//! Goal-oriented adaptive finite elements for second-order elliptic problems in 2D.
//!
//! The crate implements the adaptive loop SOLVE → ESTIMATE → MARK → REFINE for a
//! primal problem and a dual problem attached to a quantity of interest:
//!
//! - [`mesh`]: conforming triangulations with newest-vertex bisection (NVB),
//! - [`fespace`]: Lagrange spaces of degree 1–3, quadrature and assembly,
//! - [`solver`]: sparse SPD solves and a damped Newton method,
//! - [`estimators`]: residual error indicators, combinations and oscillations,
//! - [`marking`]: Dörfler, maximum, equidistribution and the goal-oriented strategies,
//! - [`problems`]: the benchmark problems,
//! - [`driver`]: the adaptive loop, convergence records and rate fitting,
//! - [`verify`]: executable checks of the mesh, estimator and marking properties.
//!
//! Elementwise work (assembly, indicator evaluation) runs on rayon when the
//! `parallel` feature is enabled; results are bit-identical to the sequential path.

pub mod driver;
pub mod estimators;
pub mod fespace;
pub mod figures;
pub mod marking;
pub mod mesh;
pub mod par;
pub mod problems;
pub mod solver;
pub mod sparse;
pub mod verify;

pub use driver::{run_goafem, ConvergenceRecord, RunConfig};
pub use estimators::{EstimatorCombination, IndicatorField};
pub use fespace::{DiscreteFunction, FeSpace};
pub use marking::{MarkRequest, Strategy};
pub use mesh::{Bisections, MarkedSet, Triangulation};
