//! Symbolic scalar expressions, autonomous vector fields, Lie brackets.

mod bracket;
mod expr;
mod field;
mod parse;

pub use bracket::{enumerate_brackets, BracketTree};
pub use expr::{Expr, Func, Var};
pub use field::{eval_matrix, lie_bracket, VectorField};
pub use parse::{eval_const, parse_expr};
