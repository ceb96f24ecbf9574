//! HDG solver for incompressible Stokes, Oseen and Navier-Stokes flow in two
//! dimensions, written with the Cauchy stress in Voigt notation.

pub mod dense;
pub mod error;
pub mod flow_solvers;
pub mod geometry;
pub mod global_system;
pub mod local_assembly;
pub mod mesh;
pub mod output;
pub mod postprocess;
pub mod refelem;
pub mod verification;
pub mod voigt;

pub use error::{HdgError, Result};
