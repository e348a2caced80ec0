//! Expression trees.
//!
//! An [`Expr`] is an immutable tree of constants, variable references and
//! unary/binary operators. Variables are 0-based feature indices and print
//! as `x0`, `x1`, ...

mod eval;
mod parse;
mod random;

use std::fmt;
use std::ops;

use serde::{Deserialize, Serialize};

pub use eval::{evaluate, evaluate_batch, evaluate_columns, DomainViolation, EvalReport, Raw, Semantics, DIV_EPSILON};
pub(crate) use eval::{raw_binary as eval_binary_raw, raw_unary as eval_unary_raw};
pub use parse::{parse, print_infix, ParseError};
pub use random::{random_expr, Grammar, GrowMethod};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum UnaryOp {
    Neg,
    Sin,
    Cos,
    Tanh,
    Exp,
    Log,
    Sqrt,
    Abs,
    Erf,
}

impl UnaryOp {
    pub const ALL: [UnaryOp; 9] = [
        UnaryOp::Neg,
        UnaryOp::Sin,
        UnaryOp::Cos,
        UnaryOp::Tanh,
        UnaryOp::Exp,
        UnaryOp::Log,
        UnaryOp::Sqrt,
        UnaryOp::Abs,
        UnaryOp::Erf,
    ];

    /// Function-call name used by the infix format. `Neg` has none.
    pub fn name(self) -> &'static str {
        match self {
            UnaryOp::Neg => "neg",
            UnaryOp::Sin => "sin",
            UnaryOp::Cos => "cos",
            UnaryOp::Tanh => "tanh",
            UnaryOp::Exp => "exp",
            UnaryOp::Log => "log",
            UnaryOp::Sqrt => "sqrt",
            UnaryOp::Abs => "abs",
            UnaryOp::Erf => "erf",
        }
    }

    pub fn from_name(name: &str) -> Option<UnaryOp> {
        Some(match name {
            "sin" => UnaryOp::Sin,
            "cos" => UnaryOp::Cos,
            "tanh" => UnaryOp::Tanh,
            "exp" => UnaryOp::Exp,
            "log" => UnaryOp::Log,
            "sqrt" => UnaryOp::Sqrt,
            "abs" | "Abs" => UnaryOp::Abs,
            "erf" => UnaryOp::Erf,
            _ => return None,
        })
    }

    /// True for operators whose raw semantics are undefined on part of the
    /// real line.
    pub fn is_partial(self) -> bool {
        matches!(self, UnaryOp::Log | UnaryOp::Sqrt)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BinaryOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

impl BinaryOp {
    pub const ALL: [BinaryOp; 5] = [
        BinaryOp::Add,
        BinaryOp::Sub,
        BinaryOp::Mul,
        BinaryOp::Div,
        BinaryOp::Pow,
    ];

    pub fn symbol(self) -> &'static str {
        match self {
            BinaryOp::Add => "+",
            BinaryOp::Sub => "-",
            BinaryOp::Mul => "*",
            BinaryOp::Div => "/",
            BinaryOp::Pow => "**",
        }
    }

    pub fn is_commutative(self) -> bool {
        matches!(self, BinaryOp::Add | BinaryOp::Mul)
    }
}

/// Expression tree node.
///
/// Constants are always finite; use [`Expr::constant`] or
/// [`Expr::try_constant`] to build them.
#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Const(f64),
    Var(usize),
    Unary(UnaryOp, Box<Expr>),
    Binary(BinaryOp, Box<Expr>, Box<Expr>),
}

impl Expr {
    /// Finite constant. Panics on NaN or infinity.
    pub fn constant(value: f64) -> Expr {
        Self::try_constant(value).expect("expression constants must be finite")
    }

    pub fn try_constant(value: f64) -> Option<Expr> {
        value.is_finite().then_some(Expr::Const(value))
    }

    pub fn var(index: usize) -> Expr {
        Expr::Var(index)
    }

    pub fn unary(op: UnaryOp, child: Expr) -> Expr {
        Expr::Unary(op, Box::new(child))
    }

    pub fn binary(op: BinaryOp, left: Expr, right: Expr) -> Expr {
        Expr::Binary(op, Box::new(left), Box::new(right))
    }

    pub fn pow(self, exponent: Expr) -> Expr {
        Expr::binary(BinaryOp::Pow, self, exponent)
    }

    pub fn powi(self, exponent: i32) -> Expr {
        self.pow(Expr::constant(exponent as f64))
    }

    pub fn sin(self) -> Expr {
        Expr::unary(UnaryOp::Sin, self)
    }

    pub fn cos(self) -> Expr {
        Expr::unary(UnaryOp::Cos, self)
    }

    pub fn tanh(self) -> Expr {
        Expr::unary(UnaryOp::Tanh, self)
    }

    pub fn exp(self) -> Expr {
        Expr::unary(UnaryOp::Exp, self)
    }

    pub fn log(self) -> Expr {
        Expr::unary(UnaryOp::Log, self)
    }

    pub fn sqrt(self) -> Expr {
        Expr::unary(UnaryOp::Sqrt, self)
    }

    pub fn abs(self) -> Expr {
        Expr::unary(UnaryOp::Abs, self)
    }

    pub fn erf(self) -> Expr {
        Expr::unary(UnaryOp::Erf, self)
    }

    pub fn is_leaf(&self) -> bool {
        matches!(self, Expr::Const(_) | Expr::Var(_))
    }

    pub fn as_const(&self) -> Option<f64> {
        match self {
            Expr::Const(c) => Some(*c),
            _ => None,
        }
    }

    /// Total number of nodes; every constant, variable and operator counts 1.
    pub fn node_count(&self) -> usize {
        match self {
            Expr::Const(_) | Expr::Var(_) => 1,
            Expr::Unary(_, c) => 1 + c.node_count(),
            Expr::Binary(_, l, r) => 1 + l.node_count() + r.node_count(),
        }
    }

    /// Depth of the tree; a single leaf has depth 1.
    pub fn depth(&self) -> usize {
        match self {
            Expr::Const(_) | Expr::Var(_) => 1,
            Expr::Unary(_, c) => 1 + c.depth(),
            Expr::Binary(_, l, r) => 1 + l.depth().max(r.depth()),
        }
    }

    /// Number of input columns the expression needs: one past the largest
    /// variable index, or 0 when no variable occurs.
    pub fn arity(&self) -> usize {
        match self {
            Expr::Const(_) => 0,
            Expr::Var(i) => i + 1,
            Expr::Unary(_, c) => c.arity(),
            Expr::Binary(_, l, r) => l.arity().max(r.arity()),
        }
    }

    /// Sorted, deduplicated variable indices occurring in the tree.
    pub fn variables(&self) -> Vec<usize> {
        let mut out = Vec::new();
        self.visit(&mut |e| {
            if let Expr::Var(i) = e {
                out.push(*i);
            }
        });
        out.sort_unstable();
        out.dedup();
        out
    }

    /// Constants in pre-order.
    pub fn constants(&self) -> Vec<f64> {
        let mut out = Vec::new();
        self.visit(&mut |e| {
            if let Expr::Const(c) = e {
                out.push(*c);
            }
        });
        out
    }

    pub fn constant_count(&self) -> usize {
        let mut n = 0;
        self.visit(&mut |e| {
            if matches!(e, Expr::Const(_)) {
                n += 1;
            }
        });
        n
    }

    /// Copy of the tree with its constants replaced, in pre-order, by
    /// `values`. Non-finite replacement values are rejected.
    pub fn with_constants(&self, values: &[f64]) -> Option<Expr> {
        fn go(e: &Expr, values: &[f64], at: &mut usize) -> Option<Expr> {
            Some(match e {
                Expr::Const(_) => {
                    let v = *values.get(*at)?;
                    *at += 1;
                    Expr::try_constant(v)?
                }
                Expr::Var(i) => Expr::Var(*i),
                Expr::Unary(op, c) => Expr::unary(*op, go(c, values, at)?),
                Expr::Binary(op, l, r) => {
                    let l = go(l, values, at)?;
                    Expr::binary(*op, l, go(r, values, at)?)
                }
            })
        }
        let mut at = 0;
        let out = go(self, values, &mut at)?;
        (at == values.len()).then_some(out)
    }

    /// Pre-order visit of every node.
    pub fn visit<F: FnMut(&Expr)>(&self, f: &mut F) {
        f(self);
        match self {
            Expr::Const(_) | Expr::Var(_) => {}
            Expr::Unary(_, c) => c.visit(f),
            Expr::Binary(_, l, r) => {
                l.visit(f);
                r.visit(f);
            }
        }
    }

    /// Node at pre-order position `index`.
    pub fn subtree(&self, index: usize) -> Option<&Expr> {
        fn go<'a>(e: &'a Expr, index: usize, at: &mut usize) -> Option<&'a Expr> {
            if *at == index {
                return Some(e);
            }
            *at += 1;
            match e {
                Expr::Const(_) | Expr::Var(_) => None,
                Expr::Unary(_, c) => go(c, index, at),
                Expr::Binary(_, l, r) => go(l, index, at).or_else(|| go(r, index, at)),
            }
        }
        let mut at = 0;
        go(self, index, &mut at)
    }

    /// Depth of the node at pre-order position `index` (root is 1).
    pub fn depth_of(&self, index: usize) -> Option<usize> {
        fn go(e: &Expr, index: usize, at: &mut usize, depth: usize) -> Option<usize> {
            if *at == index {
                return Some(depth);
            }
            *at += 1;
            match e {
                Expr::Const(_) | Expr::Var(_) => None,
                Expr::Unary(_, c) => go(c, index, at, depth + 1),
                Expr::Binary(_, l, r) => go(l, index, at, depth + 1).or_else(|| go(r, index, at, depth + 1)),
            }
        }
        let mut at = 0;
        go(self, index, &mut at, 1)
    }

    /// Copy of the tree with the node at pre-order position `index` replaced.
    pub fn replace_subtree(&self, index: usize, replacement: &Expr) -> Expr {
        fn go(e: &Expr, index: usize, at: &mut usize, replacement: &Expr) -> Expr {
            if *at == index {
                *at += e.node_count();
                return replacement.clone();
            }
            *at += 1;
            match e {
                Expr::Const(_) | Expr::Var(_) => e.clone(),
                Expr::Unary(op, c) => Expr::unary(*op, go(c, index, at, replacement)),
                Expr::Binary(op, l, r) => {
                    let l = go(l, index, at, replacement);
                    Expr::binary(*op, l, go(r, index, at, replacement))
                }
            }
        }
        let mut at = 0;
        go(self, index, &mut at, replacement)
    }

    /// Bottom-up rebuild applying `f` to every rebuilt node.
    pub fn map_bottom_up<F: FnMut(Expr) -> Expr>(&self, f: &mut F) -> Expr {
        let rebuilt = match self {
            Expr::Const(_) | Expr::Var(_) => self.clone(),
            Expr::Unary(op, c) => Expr::unary(*op, c.map_bottom_up(f)),
            Expr::Binary(op, l, r) => {
                let l = l.map_bottom_up(f);
                Expr::binary(*op, l, r.map_bottom_up(f))
            }
        };
        f(rebuilt)
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&print_infix(self))
    }
}

impl std::str::FromStr for Expr {
    type Err = ParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse(s)
    }
}

impl Serialize for Expr {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&print_infix(self))
    }
}

impl<'de> Deserialize<'de> for Expr {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let text = String::deserialize(d)?;
        parse(&text).map_err(serde::de::Error::custom)
    }
}

macro_rules! impl_binop {
    ($trait:ident, $method:ident, $op:expr) => {
        impl ops::$trait for Expr {
            type Output = Expr;
            fn $method(self, rhs: Expr) -> Expr {
                Expr::binary($op, self, rhs)
            }
        }
        impl ops::$trait<f64> for Expr {
            type Output = Expr;
            fn $method(self, rhs: f64) -> Expr {
                Expr::binary($op, self, Expr::constant(rhs))
            }
        }
        impl ops::$trait<Expr> for f64 {
            type Output = Expr;
            fn $method(self, rhs: Expr) -> Expr {
                Expr::binary($op, Expr::constant(self), rhs)
            }
        }
    };
}

impl_binop!(Add, add, BinaryOp::Add);
impl_binop!(Sub, sub, BinaryOp::Sub);
impl_binop!(Mul, mul, BinaryOp::Mul);
impl_binop!(Div, div, BinaryOp::Div);

impl ops::Neg for Expr {
    type Output = Expr;
    fn neg(self) -> Expr {
        Expr::unary(UnaryOp::Neg, self)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn x(i: usize) -> Expr {
        Expr::var(i)
    }

    #[test]
    fn node_count_examples() {
        assert_eq!(Expr::constant(1.0).node_count(), 1);
        assert_eq!((x(0) + x(1)).node_count(), 3);
        // 0.4*x1*x2 - 1.5*x1 + 2.5*x2 + 1, left-leaning
        let f1 = 0.4 * x(0) * x(1) - 1.5 * x(0) + 2.5 * x(1) + 1.0;
        assert_eq!(f1.node_count(), 15);
    }

    #[test]
    fn depth_and_arity() {
        let e = (x(0) + x(3)).sin();
        assert_eq!(e.depth(), 3);
        assert_eq!(e.arity(), 4);
        assert_eq!(Expr::constant(2.0).arity(), 0);
        assert_eq!(e.variables(), vec![0, 3]);
    }

    #[test]
    #[should_panic]
    fn non_finite_constant_rejected() {
        let _ = Expr::constant(f64::NAN);
    }

    #[test]
    fn constants_round_trip_through_with_constants() {
        let e = 2.0 * x(0) + 3.0;
        assert_eq!(e.constants(), vec![2.0, 3.0]);
        let e2 = e.with_constants(&[5.0, 7.0]).unwrap();
        assert_eq!(e2, 5.0 * x(0) + 7.0);
        assert!(e.with_constants(&[1.0]).is_none());
        assert!(e.with_constants(&[1.0, f64::INFINITY]).is_none());
    }

    #[test]
    fn subtree_replace() {
        let e = x(0) + x(1).sin();
        assert_eq!(e.subtree(2), Some(&x(1).sin()));
        assert_eq!(e.depth_of(3), Some(3));
        let r = e.replace_subtree(2, &Expr::constant(1.0));
        assert_eq!(r, x(0) + 1.0);
        assert!(e.subtree(4).is_none());
    }
}
