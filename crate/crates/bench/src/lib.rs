//! Shared inputs for the pipeline benchmarks.

use pdmsym::catalog::{builtin_catalog, find_row, CatalogRow};
use pdmsym::{expand_generators, parse_expr, parse_operator, DiffOp, Expr, Hamiltonian};

pub fn operator(src: &str) -> DiffOp {
    expand_generators(&parse_operator(src).expect("valid operator")).expect("expandable")
}

pub fn expr(src: &str) -> Expr {
    parse_expr(src).expect("valid expression")
}

/// `f = x3^2`, `V = c x3^2 / x1^2` with `c` symbolic.
pub fn axial_hamiltonian() -> Hamiltonian {
    Hamiltonian::new(expr("x3^2"), expr("c*x3^2/x1^2"))
}

pub fn row(table: u8, item: u8) -> CatalogRow {
    find_row(&builtin_catalog(), table, item).expect("row exists").clone()
}
