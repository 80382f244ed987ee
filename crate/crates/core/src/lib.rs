//! Numerical toolkit for the Nose-Hoover and Moore-Spiegel oscillators:
//! vector fields, an adaptive integrator with event location, Poincaré
//! sections and return maps, periodic-orbit search, topological degree,
//! braid words and Alexander polynomials.

pub mod claims;
pub mod error;
pub mod expr;
pub mod fields;
pub mod io;
pub mod ode;
pub mod orbits;
pub mod section;
pub mod topo;

pub use error::{Error, Result};
pub use fields::{State, SystemKind, SystemParams};
