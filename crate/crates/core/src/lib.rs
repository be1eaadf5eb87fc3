//! Exact Weyl-algebra kernel for two-variable differential operators with
//! polynomial coefficients, and a verification suite for the polynomial
//! algebras of integrals of the TTW system with integer index `k = 1..4`.

pub mod catalog;
pub mod expr;
pub mod genpoly;
pub mod hidden_algebra;
mod intpoly;
pub mod modp;
pub mod polyring;
pub mod rational;
pub mod reduction;
pub mod report;
pub mod repspace;
pub mod verify;
pub mod weyl;

pub use polyring::{ParamBinding, ParamPoly, Var};
pub use rational::Rational;
pub use weyl::DiffOp;
