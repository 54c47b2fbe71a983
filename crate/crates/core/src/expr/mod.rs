//! Arithmetic expression sub-language used by every formula in a cost model.
//!
//! The language is deliberately small: decimal literals, identifiers, unary
//! minus, the four binary operators and five fixed-arity built-ins
//! (`min`, `max`, `ceil`, `floor`, `abs`). There are no comparisons and no
//! conditionals; threshold logic is written with `min`/`max`.
//!
//! ```text
//! expr   := term (('+'|'-') term)*
//! term   := factor (('*'|'/') factor)*
//! factor := '-' factor | NUMBER | IDENT | IDENT '(' expr (',' expr)* ')' | '(' expr ')'
//! ```

pub(crate) mod format;
pub(crate) mod parse;

use std::collections::{BTreeSet, HashMap};
use std::fmt;

use thiserror::Error;

pub use parse::{is_identifier, parse_expr, SyntaxError};

/// Binary operator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
}

impl BinOp {
    pub fn symbol(self) -> char {
        match self {
            BinOp::Add => '+',
            BinOp::Sub => '-',
            BinOp::Mul => '*',
            BinOp::Div => '/',
        }
    }
}

/// Built-in function with a fixed arity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Builtin {
    Min,
    Max,
    Ceil,
    Floor,
    Abs,
}

impl Builtin {
    pub const ALL: [Builtin; 5] = [
        Builtin::Min,
        Builtin::Max,
        Builtin::Ceil,
        Builtin::Floor,
        Builtin::Abs,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Builtin::Min => "min",
            Builtin::Max => "max",
            Builtin::Ceil => "ceil",
            Builtin::Floor => "floor",
            Builtin::Abs => "abs",
        }
    }

    pub fn arity(self) -> usize {
        match self {
            Builtin::Min | Builtin::Max => 2,
            Builtin::Ceil | Builtin::Floor | Builtin::Abs => 1,
        }
    }

    pub fn from_name(name: &str) -> Option<Builtin> {
        Builtin::ALL.into_iter().find(|b| b.name() == name)
    }
}

/// Parsed expression. Parentheses are not represented.
#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Num(f64),
    Var(String),
    Neg(Box<Expr>),
    Binary(BinOp, Box<Expr>, Box<Expr>),
    Call(Builtin, Vec<Expr>),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error("unbound variable `{0}`")]
    UnboundVariable(String),
    #[error("division by zero")]
    DivisionByZero,
    #[error("non-finite result")]
    NonFiniteResult,
}

impl Expr {
    pub fn num(value: f64) -> Expr {
        Expr::Num(value)
    }

    pub fn var(name: impl Into<String>) -> Expr {
        Expr::Var(name.into())
    }

    pub fn binary(op: BinOp, lhs: Expr, rhs: Expr) -> Expr {
        Expr::Binary(op, Box::new(lhs), Box::new(rhs))
    }

    /// The literal value if this expression is a bare number.
    pub fn as_literal(&self) -> Option<f64> {
        match self {
            Expr::Num(v) => Some(*v),
            _ => None,
        }
    }

    /// Every identifier appearing in the expression (function names excluded).
    pub fn free_variables(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.collect_vars(&mut out);
        out
    }

    fn collect_vars(&self, out: &mut BTreeSet<String>) {
        match self {
            Expr::Num(_) => {}
            Expr::Var(name) => {
                out.insert(name.clone());
            }
            Expr::Neg(inner) => inner.collect_vars(out),
            Expr::Binary(_, lhs, rhs) => {
                lhs.collect_vars(out);
                rhs.collect_vars(out);
            }
            Expr::Call(_, args) => args.iter().for_each(|a| a.collect_vars(out)),
        }
    }

    /// Evaluates against a plain variable map.
    pub fn eval(&self, env: &HashMap<String, f64>) -> Result<f64, EvalError> {
        self.eval_with(&mut |name: &str| {
            env.get(name)
                .copied()
                .ok_or_else(|| EvalError::UnboundVariable(name.to_string()))
        })
    }

    /// Evaluates with a caller-supplied variable lookup.
    ///
    /// The lookup's error type only needs to absorb [`EvalError`], which lets
    /// parameter resolution surface its own errors (unresolved names, cycles)
    /// through the same evaluation walk.
    pub fn eval_with<F, E>(&self, lookup: &mut F) -> Result<f64, E>
    where
        F: FnMut(&str) -> Result<f64, E>,
        E: From<EvalError>,
    {
        let value = match self {
            Expr::Num(v) => *v,
            Expr::Var(name) => lookup(name)?,
            Expr::Neg(inner) => -inner.eval_with(lookup)?,
            Expr::Binary(op, lhs, rhs) => {
                let a = lhs.eval_with(lookup)?;
                let b = rhs.eval_with(lookup)?;
                match op {
                    BinOp::Add => a + b,
                    BinOp::Sub => a - b,
                    BinOp::Mul => a * b,
                    BinOp::Div => {
                        if b == 0.0 {
                            return Err(EvalError::DivisionByZero.into());
                        }
                        a / b
                    }
                }
            }
            Expr::Call(func, args) => {
                let mut vals = [0.0; 2];
                for (slot, arg) in vals.iter_mut().zip(args) {
                    *slot = arg.eval_with(lookup)?;
                }
                match func {
                    Builtin::Min => vals[0].min(vals[1]),
                    Builtin::Max => vals[0].max(vals[1]),
                    Builtin::Ceil => vals[0].ceil(),
                    Builtin::Floor => vals[0].floor(),
                    Builtin::Abs => vals[0].abs(),
                }
            }
        };
        if value.is_finite() {
            Ok(value)
        } else {
            Err(EvalError::NonFiniteResult.into())
        }
    }

    /// Canonical text form; reparses to a structurally equal tree.
    pub fn to_text(&self) -> String {
        format::format_expr(self)
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&format::format_expr(self))
    }
}

pub fn format_expr(e: &Expr) -> String {
    format::format_expr(e)
}

pub fn eval_expr(e: &Expr, env: &HashMap<String, f64>) -> Result<f64, EvalError> {
    e.eval(env)
}

pub fn free_variables(e: &Expr) -> BTreeSet<String> {
    e.free_variables()
}
