//! Symbolic kernel: canonical expressions over exact complex rationals.

pub mod calculus;
pub mod equiv;
pub mod eval;
pub mod expr;
pub mod number;
pub mod parse;
mod print;
pub mod subst;

use thiserror::Error;

pub use calculus::{antiderivative, differentiate, series_truncate};
pub use equiv::{cancel, clear_denominators, equivalent, is_zero_exact, together, Equivalence};
pub use eval::{eval_numeric, Compiled, EvalEnv, EvalError};
pub use expr::{simplify, Expr, Func, Node, Symbol};
pub use number::Number;
pub use parse::{parse, parse_with, ParseContext, ParseError};
pub use subst::{evaluate_integrals, substitute, substitute_function, Binding, Lambda};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum KernelError {
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("{op}: unsupported term {term}")]
    Unsupported { op: &'static str, term: String },
    #[error("not polynomial in {var}: {term}")]
    NotPolynomial { var: String, term: String },
    #[error("symbol `{0}` bound twice")]
    DuplicateBinding(String),
    #[error("every sample point is singular for {0}")]
    AllSamplesSingular(String),
}
