//! Symbolic scalar expressions over chart coordinates and parameters.
//!
//! This is deliberately not a computer algebra system. Expressions are
//! immutable trees with shared subtrees; the only rewrites are constant
//! folding, 0/1 absorption, and power flattening. Correctness lives in
//! `eval` and `differentiate`, not in any canonical form.

use std::collections::HashMap;
use std::fmt;
use std::sync::Arc;

use crate::Error;

/// Unary function applied to a subexpression.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum UnaryFn {
    Neg,
    Sin,
    Cos,
    Tan,
    Exp,
    Log,
    Sqrt,
    Sinh,
    Cosh,
    Tanh,
}

impl UnaryFn {
    pub fn name(self) -> &'static str {
        match self {
            UnaryFn::Neg => "neg",
            UnaryFn::Sin => "sin",
            UnaryFn::Cos => "cos",
            UnaryFn::Tan => "tan",
            UnaryFn::Exp => "exp",
            UnaryFn::Log => "log",
            UnaryFn::Sqrt => "sqrt",
            UnaryFn::Sinh => "sinh",
            UnaryFn::Cosh => "cosh",
            UnaryFn::Tanh => "tanh",
        }
    }

    fn apply(self, x: f64) -> Result<f64, Error> {
        let v = match self {
            UnaryFn::Neg => -x,
            UnaryFn::Sin => x.sin(),
            UnaryFn::Cos => x.cos(),
            UnaryFn::Tan => x.tan(),
            UnaryFn::Exp => x.exp(),
            UnaryFn::Log => {
                if x <= 0.0 {
                    return Err(Error::Domain { op: "log", value: x });
                }
                x.ln()
            }
            UnaryFn::Sqrt => {
                if x < 0.0 {
                    return Err(Error::Domain { op: "sqrt", value: x });
                }
                x.sqrt()
            }
            UnaryFn::Sinh => x.sinh(),
            UnaryFn::Cosh => x.cosh(),
            UnaryFn::Tanh => x.tanh(),
        };
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::Domain { op: self.name(), value: x })
        }
    }
}

/// Binary arithmetic operator.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
}

enum Node {
    Const(f64),
    Symbol(String),
    Unary(UnaryFn, Expr),
    Binary(BinOp, Expr, Expr),
    /// Power with a constant real exponent. Non-integer exponents require a
    /// positive base at evaluation time.
    Pow(Expr, f64),
}

/// Immutable symbolic expression. Cloning is cheap (shared subtrees).
#[derive(Clone)]
pub struct Expr(Arc<Node>);

/// Name-to-value binding used during evaluation.
pub trait Scope {
    fn lookup(&self, name: &str) -> Option<f64>;
}

impl Scope for [(String, f64)] {
    fn lookup(&self, name: &str) -> Option<f64> {
        self.iter().find(|(n, _)| n == name).map(|(_, v)| *v)
    }
}

impl Scope for Vec<(String, f64)> {
    fn lookup(&self, name: &str) -> Option<f64> {
        self.as_slice().lookup(name)
    }
}

impl Scope for HashMap<String, f64> {
    fn lookup(&self, name: &str) -> Option<f64> {
        self.get(name).copied()
    }
}

/// Chains two scopes; the first shadows the second.
pub struct Chain<'a, A: ?Sized, B: ?Sized>(pub &'a A, pub &'a B);

impl<A: Scope + ?Sized, B: Scope + ?Sized> Scope for Chain<'_, A, B> {
    fn lookup(&self, name: &str) -> Option<f64> {
        self.0.lookup(name).or_else(|| self.1.lookup(name))
    }
}

/// Scope binding coordinate names (by slice position) to point components,
/// with parameter bindings behind them.
pub struct PointScope<'a> {
    pub coords: &'a [String],
    pub point: &'a [f64],
    pub params: &'a [(String, f64)],
}

impl Scope for PointScope<'_> {
    fn lookup(&self, name: &str) -> Option<f64> {
        for (n, v) in self.coords.iter().zip(self.point) {
            if n == name {
                return Some(*v);
            }
        }
        self.params.lookup(name)
    }
}

impl Expr {
    pub fn constant(c: f64) -> Expr {
        Expr(Arc::new(Node::Const(c)))
    }

    pub fn symbol(name: impl Into<String>) -> Expr {
        Expr(Arc::new(Node::Symbol(name.into())))
    }

    pub fn zero() -> Expr {
        Expr::constant(0.0)
    }

    pub fn one() -> Expr {
        Expr::constant(1.0)
    }

    fn as_const(&self) -> Option<f64> {
        match &*self.0 {
            Node::Const(c) => Some(*c),
            _ => None,
        }
    }

    pub fn is_zero(&self) -> bool {
        self.as_const() == Some(0.0)
    }

    fn is_one(&self) -> bool {
        self.as_const() == Some(1.0)
    }

    pub fn add(a: Expr, b: Expr) -> Expr {
        if let (Some(x), Some(y)) = (a.as_const(), b.as_const()) {
            return Expr::constant(x + y);
        }
        if a.is_zero() {
            return b;
        }
        if b.is_zero() {
            return a;
        }
        Expr(Arc::new(Node::Binary(BinOp::Add, a, b)))
    }

    pub fn sub(a: Expr, b: Expr) -> Expr {
        if let (Some(x), Some(y)) = (a.as_const(), b.as_const()) {
            return Expr::constant(x - y);
        }
        if b.is_zero() {
            return a;
        }
        if a.is_zero() {
            return b.neg();
        }
        Expr(Arc::new(Node::Binary(BinOp::Sub, a, b)))
    }

    pub fn mul(a: Expr, b: Expr) -> Expr {
        if let (Some(x), Some(y)) = (a.as_const(), b.as_const()) {
            return Expr::constant(x * y);
        }
        if a.is_zero() || b.is_zero() {
            return Expr::zero();
        }
        if a.is_one() {
            return b;
        }
        if b.is_one() {
            return a;
        }
        Expr(Arc::new(Node::Binary(BinOp::Mul, a, b)))
    }

    pub fn div(a: Expr, b: Expr) -> Expr {
        if b.is_one() {
            return a;
        }
        if a.is_zero() {
            return Expr::zero();
        }
        if let (Some(x), Some(y)) = (a.as_const(), b.as_const()) {
            if y != 0.0 {
                return Expr::constant(x / y);
            }
        }
        Expr(Arc::new(Node::Binary(BinOp::Div, a, b)))
    }

    pub fn pow(base: Expr, exponent: f64) -> Expr {
        if exponent == 0.0 {
            return Expr::one();
        }
        if exponent == 1.0 {
            return base;
        }
        if let Some(x) = base.as_const() {
            let v = x.powf(exponent);
            if v.is_finite() {
                return Expr::constant(v);
            }
        }
        // Power flattening: (u^p)^q = u^(p q).
        if let Node::Pow(inner, p) = &*base.0 {
            return Expr::pow(inner.clone(), p * exponent);
        }
        Expr(Arc::new(Node::Pow(base, exponent)))
    }

    pub fn unary(f: UnaryFn, arg: Expr) -> Expr {
        if let Some(x) = arg.as_const() {
            if let Ok(v) = f.apply(x) {
                return Expr::constant(v);
            }
        }
        if f == UnaryFn::Neg {
            // -(-u) = u
            if let Node::Unary(UnaryFn::Neg, inner) = &*arg.0 {
                return inner.clone();
            }
        }
        Expr(Arc::new(Node::Unary(f, arg)))
    }

    pub fn neg(&self) -> Expr {
        Expr::unary(UnaryFn::Neg, self.clone())
    }

    pub fn sin(&self) -> Expr {
        Expr::unary(UnaryFn::Sin, self.clone())
    }

    pub fn cos(&self) -> Expr {
        Expr::unary(UnaryFn::Cos, self.clone())
    }

    pub fn tan(&self) -> Expr {
        Expr::unary(UnaryFn::Tan, self.clone())
    }

    pub fn exp(&self) -> Expr {
        Expr::unary(UnaryFn::Exp, self.clone())
    }

    pub fn log(&self) -> Expr {
        Expr::unary(UnaryFn::Log, self.clone())
    }

    pub fn sqrt(&self) -> Expr {
        Expr::unary(UnaryFn::Sqrt, self.clone())
    }

    pub fn sinh(&self) -> Expr {
        Expr::unary(UnaryFn::Sinh, self.clone())
    }

    pub fn cosh(&self) -> Expr {
        Expr::unary(UnaryFn::Cosh, self.clone())
    }

    pub fn tanh(&self) -> Expr {
        Expr::unary(UnaryFn::Tanh, self.clone())
    }

    pub fn powi(&self, n: i32) -> Expr {
        Expr::pow(self.clone(), n as f64)
    }

    /// Evaluates the tree at the bindings in `scope`.
    pub fn eval(&self, scope: &dyn Scope) -> Result<f64, Error> {
        match &*self.0 {
            Node::Const(c) => Ok(*c),
            Node::Symbol(name) => scope
                .lookup(name)
                .ok_or_else(|| Error::UnboundSymbol(name.clone())),
            Node::Unary(f, a) => f.apply(a.eval(scope)?),
            Node::Binary(op, a, b) => {
                let x = a.eval(scope)?;
                let y = b.eval(scope)?;
                let v = match op {
                    BinOp::Add => x + y,
                    BinOp::Sub => x - y,
                    BinOp::Mul => x * y,
                    BinOp::Div => {
                        if y == 0.0 {
                            return Err(Error::Domain { op: "div", value: y });
                        }
                        x / y
                    }
                };
                if v.is_finite() {
                    Ok(v)
                } else {
                    Err(Error::Domain { op: "arith", value: v })
                }
            }
            Node::Pow(base, p) => {
                let x = base.eval(scope)?;
                let integer = p.fract() == 0.0;
                if !integer && x <= 0.0 {
                    return Err(Error::Domain { op: "pow", value: x });
                }
                if integer && x == 0.0 && *p < 0.0 {
                    return Err(Error::Domain { op: "pow", value: x });
                }
                let v = x.powf(*p);
                if v.is_finite() {
                    Ok(v)
                } else {
                    Err(Error::Domain { op: "pow", value: x })
                }
            }
        }
    }

    /// Exact symbolic partial derivative with respect to `coord`.
    pub fn differentiate(&self, coord: &str) -> Expr {
        match &*self.0 {
            Node::Const(_) => Expr::zero(),
            Node::Symbol(name) => {
                if name == coord {
                    Expr::one()
                } else {
                    Expr::zero()
                }
            }
            Node::Unary(f, a) => {
                let da = a.differentiate(coord);
                if da.is_zero() {
                    return Expr::zero();
                }
                let outer = match f {
                    UnaryFn::Neg => return da.neg(),
                    UnaryFn::Sin => a.cos(),
                    UnaryFn::Cos => a.sin().neg(),
                    UnaryFn::Tan => Expr::div(Expr::one(), a.cos().powi(2)),
                    UnaryFn::Exp => a.exp(),
                    UnaryFn::Log => Expr::div(Expr::one(), a.clone()),
                    UnaryFn::Sqrt => {
                        Expr::div(Expr::one(), Expr::mul(Expr::constant(2.0), a.sqrt()))
                    }
                    UnaryFn::Sinh => a.cosh(),
                    UnaryFn::Cosh => a.sinh(),
                    UnaryFn::Tanh => Expr::div(Expr::one(), a.cosh().powi(2)),
                };
                Expr::mul(outer, da)
            }
            Node::Binary(op, a, b) => {
                let da = a.differentiate(coord);
                let db = b.differentiate(coord);
                match op {
                    BinOp::Add => Expr::add(da, db),
                    BinOp::Sub => Expr::sub(da, db),
                    BinOp::Mul => Expr::add(
                        Expr::mul(da, b.clone()),
                        Expr::mul(a.clone(), db),
                    ),
                    BinOp::Div => {
                        // (a/b)' = a'/b - a b'/b^2
                        Expr::sub(
                            Expr::div(da, b.clone()),
                            Expr::div(Expr::mul(a.clone(), db), b.powi(2)),
                        )
                    }
                }
            }
            Node::Pow(base, p) => {
                let db = base.differentiate(coord);
                if db.is_zero() {
                    return Expr::zero();
                }
                Expr::mul(
                    Expr::mul(Expr::constant(*p), Expr::pow(base.clone(), p - 1.0)),
                    db,
                )
            }
        }
    }

    /// Number of nodes; useful for sanity checks on tree growth.
    pub fn size(&self) -> usize {
        match &*self.0 {
            Node::Const(_) | Node::Symbol(_) => 1,
            Node::Unary(_, a) => 1 + a.size(),
            Node::Binary(_, a, b) => 1 + a.size() + b.size(),
            Node::Pow(a, _) => 1 + a.size(),
        }
    }
}

impl fmt::Debug for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &*self.0 {
            Node::Const(c) => write!(f, "{c}"),
            Node::Symbol(s) => write!(f, "{s}"),
            Node::Unary(UnaryFn::Neg, a) => write!(f, "(-{a})"),
            Node::Unary(u, a) => write!(f, "{}({a})", u.name()),
            Node::Binary(op, a, b) => {
                let sym = match op {
                    BinOp::Add => "+",
                    BinOp::Sub => "-",
                    BinOp::Mul => "*",
                    BinOp::Div => "/",
                };
                write!(f, "({a} {sym} {b})")
            }
            Node::Pow(a, p) => write!(f, "({a}^{p})"),
        }
    }
}

impl std::ops::Add for Expr {
    type Output = Expr;
    fn add(self, rhs: Expr) -> Expr {
        Expr::add(self, rhs)
    }
}

impl std::ops::Sub for Expr {
    type Output = Expr;
    fn sub(self, rhs: Expr) -> Expr {
        Expr::sub(self, rhs)
    }
}

impl std::ops::Mul for Expr {
    type Output = Expr;
    fn mul(self, rhs: Expr) -> Expr {
        Expr::mul(self, rhs)
    }
}

impl std::ops::Div for Expr {
    type Output = Expr;
    fn div(self, rhs: Expr) -> Expr {
        Expr::div(self, rhs)
    }
}

impl std::ops::Neg for Expr {
    type Output = Expr;
    fn neg(self) -> Expr {
        Expr::neg(&self)
    }
}

impl From<f64> for Expr {
    fn from(c: f64) -> Expr {
        Expr::constant(c)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sc(pairs: &[(&str, f64)]) -> Vec<(String, f64)> {
        pairs.iter().map(|(n, v)| (n.to_string(), *v)).collect()
    }

    #[test]
    fn eval_basics() {
        let t = Expr::symbol("t");
        assert_eq!(t.sin().eval(&sc(&[("t", 0.0)])).unwrap(), 0.0);

        let x = Expr::symbol("x");
        let e = x.powi(2) + Expr::constant(3.0);
        assert_eq!(e.eval(&sc(&[("x", 2.0)])).unwrap(), 7.0);

        let e = Expr::symbol("x").log().exp();
        assert!((e.eval(&sc(&[("x", 5.0)])).unwrap() - 5.0).abs() < 1e-12);
    }

    #[test]
    fn eval_errors() {
        let e = Expr::symbol("x").log();
        assert!(matches!(
            e.eval(&sc(&[("x", -1.0)])),
            Err(Error::Domain { op: "log", .. })
        ));
        assert!(matches!(
            e.eval(&sc(&[("y", 1.0)])),
            Err(Error::UnboundSymbol(_))
        ));
        let e = Expr::div(Expr::one(), Expr::symbol("x"));
        assert!(e.eval(&sc(&[("x", 0.0)])).is_err());
    }

    #[test]
    fn derivative_basics() {
        let t = Expr::symbol("t");
        let d = t.sin().differentiate("t");
        let v = d.eval(&sc(&[("t", 0.3)])).unwrap();
        assert!((v - 0.3f64.cos()).abs() < 1e-14);

        assert!(Expr::constant(4.5).differentiate("t").is_zero());

        // d/dt (t e^t) at t=1 is 2e.
        let e = t.clone() * t.exp();
        let v = e.differentiate("t").eval(&sc(&[("t", 1.0)])).unwrap();
        assert!((v - 2.0 * 1f64.exp()).abs() < 1e-12);
    }

    #[test]
    fn pow_rules() {
        let x = Expr::symbol("x");
        let e = Expr::pow(Expr::pow(x.clone(), 2.0), 3.0);
        // Flattened to x^6.
        let v = e.eval(&sc(&[("x", 2.0)])).unwrap();
        assert_eq!(v, 64.0);
        // Non-integer exponent needs positive base.
        let e = Expr::pow(x, 0.5);
        assert!(e.eval(&sc(&[("x", -2.0)])).is_err());
    }

    #[test]
    fn mixed_partials_commute() {
        let x = Expr::symbol("x");
        let y = Expr::symbol("y");
        let e = (x.clone() * y.clone()).sin() * x.exp() + y.powi(3) / (x + Expr::one());
        let dxy = e.differentiate("x").differentiate("y");
        let dyx = e.differentiate("y").differentiate("x");
        let scope = sc(&[("x", 0.7), ("y", -1.3)]);
        let a = dxy.eval(&scope).unwrap();
        let b = dyx.eval(&scope).unwrap();
        assert!((a - b).abs() <= 1e-10 * (1.0 + a.abs()));
    }
}
