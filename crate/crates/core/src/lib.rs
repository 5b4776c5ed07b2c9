//! Symbolic workbench for second-order integrals of motion of scale-invariant
//! Schrödinger operators with position-dependent mass,
//! `H = p_a f(x) p_a + V(x)` with `p_a = -i d_a`.
//!
//! The crate builds second-order symmetry ansätze from conformal Killing
//! tensors, generates and solves the determining equations, and certifies
//! commutation `[H, Q] = 0` either exactly (rational normal form) or by
//! high-precision evaluation at random points.

pub mod catalog;
pub mod determining;
pub mod diffop;
pub mod expr;
pub mod killing;
pub mod lang;
pub mod linalg;
pub mod normal;
pub mod sample;
pub mod scalar;
pub mod solve;
pub mod zero;

pub use diffop::{
    expand_generators, from_hamiltonian, inversion_conjugate, DiffOp, DiffOpError, Generator,
    GeneratorExpr, Hamiltonian, SelfAdjointForm,
};
pub use expr::{CFloat, EvalError, Expr, Func, Geom, Node, Point, RationalPoint};
pub use lang::{parse_expr, parse_operator, serialize_expr, ParseDiagnostic};
pub use scalar::Scalar;
pub use zero::{certify_all, zero_certificate, Policy, ZeroCertificate};
