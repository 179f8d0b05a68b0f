//! Generalized (α, β, γ)-growth indicators of entire functions and of
//! solutions of complex linear differential equations.
//!
//! The crate is organised in layers: [`scales`] provides the scale functions
//! and their class checks, [`functions`] models entire and meromorphic
//! functions together with the classical circle functionals, [`growth`]
//! estimates orders and types from radial grids, [`odes`] integrates linear
//! ODEs along ray fans and carries out the Wronskian and order-reduction
//! machinery, and [`verify`] bundles everything into reproducible scenarios.

pub mod error;
pub mod exec;
pub mod functions;
pub mod growth;
pub mod odes;
pub mod quad;
pub mod scaled;
pub mod scales;
pub mod verify;

pub use error::{Error, Result};
pub use exec::Exec;
pub use scaled::ScaledComplex;
