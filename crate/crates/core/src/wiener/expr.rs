use super::hermite::hermite_pair;
use std::collections::BTreeSet;
use std::fmt;

/// Smooth scalar expression over the coordinates `w_i = W(h_i)`.
#[derive(Debug, Clone, PartialEq)]
pub enum Expression {
    Coordinate(usize),
    Constant(f64),
    Sum(Box<Expression>, Box<Expression>),
    Product(Box<Expression>, Box<Expression>),
    Negate(Box<Expression>),
    /// Integer power, exponent at least 1.
    Power(Box<Expression>, u32),
    Exp(Box<Expression>),
    Tanh(Box<Expression>),
    Hermite(u32, Box<Expression>),
}

use Expression::*;

pub fn w(i: usize) -> Expression {
    Coordinate(i)
}

pub fn constant(c: f64) -> Expression {
    Constant(c)
}

impl Expression {
    pub fn pow(self, k: u32) -> Expression {
        Power(Box::new(self), k)
    }

    pub fn exp(self) -> Expression {
        Exp(Box::new(self))
    }

    pub fn tanh(self) -> Expression {
        Tanh(Box::new(self))
    }

    pub fn hermite(self, q: u32) -> Expression {
        Hermite(q, Box::new(self))
    }

    /// `sum_k coeffs[k] * w_k`, skipping zero coefficients.
    pub fn linear(coeffs: &[f64]) -> Expression {
        coeffs
            .iter()
            .enumerate()
            .filter(|(_, &c)| c != 0.0)
            .map(|(i, &c)| if c == 1.0 { w(i) } else { Constant(c) * w(i) })
            .reduce(|a, b| a + b)
            .unwrap_or(Constant(0.0))
    }

    pub fn coordinates(&self) -> BTreeSet<usize> {
        let mut out = BTreeSet::new();
        self.visit(&mut |e| {
            if let Coordinate(i) = e {
                out.insert(*i);
            }
        });
        out
    }

    pub fn max_coordinate(&self) -> Option<usize> {
        self.coordinates().last().copied()
    }

    fn visit(&self, f: &mut impl FnMut(&Expression)) {
        f(self);
        match self {
            Coordinate(_) | Constant(_) => {}
            Sum(a, b) | Product(a, b) => {
                a.visit(f);
                b.visit(f);
            }
            Negate(a) | Power(a, _) | Exp(a) | Tanh(a) | Hermite(_, a) => a.visit(f),
        }
    }

    /// Replaces every `Coordinate(i)` by `map(i)`.
    pub fn substitute(&self, map: &dyn Fn(usize) -> Expression) -> Expression {
        let s = |e: &Expression| Box::new(e.substitute(map));
        match self {
            Coordinate(i) => map(*i),
            Constant(c) => Constant(*c),
            Sum(a, b) => Sum(s(a), s(b)),
            Product(a, b) => Product(s(a), s(b)),
            Negate(a) => Negate(s(a)),
            Power(a, k) => Power(s(a), *k),
            Exp(a) => Exp(s(a)),
            Tanh(a) => Tanh(s(a)),
            Hermite(q, a) => Hermite(*q, s(a)),
        }
    }

    /// Plain evaluation at `x` (values of the `w_i`).
    pub fn eval(&self, x: &[f64]) -> f64 {
        match self {
            Coordinate(i) => x[*i],
            Constant(c) => *c,
            Sum(a, b) => a.eval(x) + b.eval(x),
            Product(a, b) => a.eval(x) * b.eval(x),
            Negate(a) => -a.eval(x),
            Power(a, k) => a.eval(x).powi(*k as i32),
            Exp(a) => a.eval(x).exp(),
            Tanh(a) => a.eval(x).tanh(),
            Hermite(q, a) => hermite_pair(*q, a.eval(x)).0,
        }
    }

    pub fn compile(&self, dim: usize) -> Tape {
        let mut ops = Vec::new();
        self.emit(&mut ops);
        let mut depth = 0usize;
        let mut max_depth = 0usize;
        for op in &ops {
            match op {
                Op::Coord(_) | Op::Const(_) => depth += 1,
                Op::Add | Op::Mul => depth -= 1,
                _ => {}
            }
            max_depth = max_depth.max(depth);
        }
        Tape {
            ops,
            max_depth,
            dim,
        }
    }

    fn emit(&self, ops: &mut Vec<Op>) {
        match self {
            Coordinate(i) => ops.push(Op::Coord(*i)),
            Constant(c) => ops.push(Op::Const(*c)),
            Sum(a, b) => {
                a.emit(ops);
                b.emit(ops);
                ops.push(Op::Add);
            }
            Product(a, b) => {
                a.emit(ops);
                b.emit(ops);
                ops.push(Op::Mul);
            }
            Negate(a) => {
                a.emit(ops);
                ops.push(Op::Neg);
            }
            Power(a, k) => {
                a.emit(ops);
                ops.push(Op::Pow(*k));
            }
            Exp(a) => {
                a.emit(ops);
                ops.push(Op::Exp);
            }
            Tanh(a) => {
                a.emit(ops);
                ops.push(Op::Tanh);
            }
            Hermite(q, a) => {
                a.emit(ops);
                ops.push(Op::Hermite(*q));
            }
        }
    }

    fn precedence(&self) -> u8 {
        match self {
            Sum(..) => 1,
            Product(..) => 2,
            Negate(_) => 3,
            Power(..) => 4,
            Constant(c) if *c < 0.0 => 3,
            _ => 5,
        }
    }

    fn fmt_child(&self, f: &mut fmt::Formatter<'_>, min_prec: u8) -> fmt::Result {
        if self.precedence() < min_prec {
            write!(f, "({self})")
        } else {
            write!(f, "{self}")
        }
    }
}

impl fmt::Display for Expression {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Coordinate(i) => write!(f, "w{i}"),
            // `{:?}` keeps a decimal point or exponent and round-trips exactly
            Constant(c) => write!(f, "{c:?}"),
            Sum(a, b) => {
                a.fmt_child(f, 1)?;
                if let Negate(inner) = b.as_ref() {
                    write!(f, " - ")?;
                    inner.fmt_child(f, 2)
                } else {
                    write!(f, " + ")?;
                    b.fmt_child(f, 2)
                }
            }
            Product(a, b) => {
                a.fmt_child(f, 2)?;
                write!(f, " * ")?;
                b.fmt_child(f, 3)
            }
            Negate(a) => {
                write!(f, "-")?;
                a.fmt_child(f, 4)
            }
            Power(a, k) => {
                a.fmt_child(f, 5)?;
                write!(f, "^{k}")
            }
            Exp(a) => write!(f, "exp({a})"),
            Tanh(a) => write!(f, "tanh({a})"),
            Hermite(q, a) => write!(f, "hermite({q}, {a})"),
        }
    }
}

impl std::ops::Add for Expression {
    type Output = Expression;
    fn add(self, rhs: Expression) -> Expression {
        Sum(Box::new(self), Box::new(rhs))
    }
}

impl std::ops::Sub for Expression {
    type Output = Expression;
    fn sub(self, rhs: Expression) -> Expression {
        Sum(Box::new(self), Box::new(Negate(Box::new(rhs))))
    }
}

impl std::ops::Mul for Expression {
    type Output = Expression;
    fn mul(self, rhs: Expression) -> Expression {
        Product(Box::new(self), Box::new(rhs))
    }
}

impl std::ops::Neg for Expression {
    type Output = Expression;
    fn neg(self) -> Expression {
        Negate(Box::new(self))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) enum Op {
    Coord(usize),
    Const(f64),
    Add,
    Mul,
    Neg,
    Pow(u32),
    Exp,
    Tanh,
    Hermite(u32),
}

/// Postfix program for forward-mode evaluation: every stack slot carries a
/// value and its full tangent vector.
#[derive(Debug, Clone, PartialEq)]
pub struct Tape {
    ops: Vec<Op>,
    max_depth: usize,
    dim: usize,
}

/// Scratch buffers for [`Tape::eval_grad`].
#[derive(Debug, Default, Clone)]
pub struct TapeScratch {
    values: Vec<f64>,
    tangents: Vec<f64>,
}

impl Tape {
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Value at `x` and its gradient with respect to `x`, written to `grad`.
    pub fn eval_grad(&self, x: &[f64], grad: &mut [f64], scratch: &mut TapeScratch) -> f64 {
        let n = self.dim;
        if scratch.values.len() < self.max_depth {
            scratch.values.resize(self.max_depth, 0.0);
        }
        if scratch.tangents.len() < self.max_depth * n {
            scratch.tangents.resize(self.max_depth * n, 0.0);
        }
        let vals = &mut scratch.values;
        let tans = &mut scratch.tangents;
        let mut sp = 0usize;
        for op in &self.ops {
            match *op {
                Op::Coord(i) => {
                    vals[sp] = x[i];
                    let t = &mut tans[sp * n..(sp + 1) * n];
                    t.iter_mut().for_each(|v| *v = 0.0);
                    t[i] = 1.0;
                    sp += 1;
                }
                Op::Const(c) => {
                    vals[sp] = c;
                    tans[sp * n..(sp + 1) * n].iter_mut().for_each(|v| *v = 0.0);
                    sp += 1;
                }
                Op::Add => {
                    sp -= 1;
                    vals[sp - 1] += vals[sp];
                    let (lo, hi) = tans.split_at_mut(sp * n);
                    lo[(sp - 1) * n..].iter_mut().zip(&hi[..n]).for_each(|(a, b)| *a += b);
                }
                Op::Mul => {
                    sp -= 1;
                    let a = vals[sp - 1];
                    let b = vals[sp];
                    vals[sp - 1] = a * b;
                    let (lo, hi) = tans.split_at_mut(sp * n);
                    lo[(sp - 1) * n..]
                        .iter_mut()
                        .zip(&hi[..n])
                        .for_each(|(ta, tb)| *ta = *ta * b + a * tb);
                }
                Op::Neg => {
                    let top = sp - 1;
                    vals[top] = -vals[top];
                    tans[top * n..sp * n].iter_mut().for_each(|v| *v = -*v);
                }
                Op::Pow(k) => {
                    let top = sp - 1;
                    let v = vals[top];
                    let d = k as f64 * v.powi(k as i32 - 1);
                    vals[top] = v.powi(k as i32);
                    scale(&mut tans[top * n..sp * n], d);
                }
                Op::Exp => {
                    let top = sp - 1;
                    let e = vals[top].exp();
                    vals[top] = e;
                    scale(&mut tans[top * n..sp * n], e);
                }
                Op::Tanh => {
                    let top = sp - 1;
                    let t = vals[top].tanh();
                    vals[top] = t;
                    scale(&mut tans[top * n..sp * n], 1.0 - t * t);
                }
                Op::Hermite(q) => {
                    let top = sp - 1;
                    let (h, d) = hermite_pair(q, vals[top]);
                    vals[top] = h;
                    scale(&mut tans[top * n..sp * n], d);
                }
            }
        }
        debug_assert_eq!(sp, 1);
        grad[..n].copy_from_slice(&tans[..n]);
        vals[0]
    }
}

#[inline]
fn scale(v: &mut [f64], s: f64) {
    v.iter_mut().for_each(|x| *x *= s);
}
