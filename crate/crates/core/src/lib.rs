//! Blow-up time lower bounds for the fully parabolic attraction-repulsion
//! chemotaxis system with logistic source, together with a radial solver and
//! empirical checks of the inequalities the bound is built from.
//!
//! * [`exponents`]: admissible `(p, q, s1, s2)` and exponent maps.
//! * [`odi`]: coefficients of `E' <= F(E)` and the integral `∫ ds/F(s)`.
//! * [`pde`]: radially symmetric finite-volume solver with blow-up detection.
//! * [`verify`]: sampling checks of the functional inequalities.
//! * [`cli`]: configuration, subcommands and sweep persistence.

pub mod exponents;
pub mod odi;
pub mod pde;
pub mod verify;
pub mod cli;
