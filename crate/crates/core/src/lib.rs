//! Numerical laboratory for linearized Monge-Ampère equations with signed measure data.
//!
//! The crate discretizes `-D_j(U^{ij} D_i v) = μ`, where `U` is the cofactor
//! matrix of the Hessian of an analytic convex potential, and measures the
//! quantities that appear in potential estimates and Hölder regularity for
//! such equations: sections, section masses, truncated Riesz potentials,
//! Lorentz norms, energies and oscillation/Campanato decay.

pub mod element;
pub mod error;
pub mod field;
pub mod geometry;
pub mod fit;
pub mod grid;
pub mod harness;
pub mod linalg;
pub mod measures;
pub mod norms;
pub mod potential_theory;
pub mod potentials;
pub mod quadrature;
pub mod regularity;
pub mod report;
pub mod solver;

pub use error::{LabError, Result};
pub use field::{FaceField, GridFunction};
pub use grid::{CellMask, Domain, Grid, Point};
pub use report::{EstimateReport, Status};
pub use potentials::{CofactorField, ConvexPotential, PotentialCertificate};
