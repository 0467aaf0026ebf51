//! Fourier expansions of modular forms at every cusp of `Gamma0(N)` and Petersson
//! products computed from them.

pub mod arith;
pub mod arithchar;
pub mod bgbasis;
pub mod eisenstein;
pub mod fixtures;
pub mod linalg;
pub mod modcurve;
pub mod num;
pub mod par;
pub mod petersson;
pub mod qseries;
pub mod specfun;
