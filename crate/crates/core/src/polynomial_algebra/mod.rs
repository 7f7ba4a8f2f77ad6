//! Complexified real-analytic data: polynomials and rational functions in
//! paired variables `(z, zb)` with complex coefficients.

mod literal;
mod poly;
mod rational;

pub use literal::{format_poly, format_rational, parse_poly, parse_rational};
pub use poly::{Jet, PolyField, Powers, Var, DEFAULT_DEGREE_CAP};
pub use rational::{max_exponents_of, LeafKind, RationalField, POLE_TOL};
