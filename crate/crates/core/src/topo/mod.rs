//! Topological quantities: eigen-structure of fixed points, indices and
//! degrees, braid words of periodic orbits and their Alexander polynomials.

pub mod braid;
pub mod degree;
pub mod laurent;
pub mod spectrum;

pub use braid::{extract_braid, knot_verdict, BraidData, KnotVerdict};
pub use degree::{analytic_index, direction_avoidance, numerical_degree, IndexResult, IndexRule};
pub use laurent::{alexander_polynomial, LaurentPoly};
pub use spectrum::{classify_spectrum, SpectrumClass};
