//! Expression trees for problem files: evaluation, forward-mode derivatives and a
//! fully parenthesized printer that re-parses to the same tree.

use std::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Abs,
    Sqrt,
    Exp,
    Log,
    Sin,
    Cos,
    Min,
    Max,
    Norm,
}

impl Func {
    pub fn from_name(s: &str) -> Option<Func> {
        Some(match s {
            "abs" => Func::Abs,
            "sqrt" => Func::Sqrt,
            "exp" => Func::Exp,
            "log" => Func::Log,
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "min" => Func::Min,
            "max" => Func::Max,
            "norm" => Func::Norm,
            _ => return None,
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            Func::Abs => "abs",
            Func::Sqrt => "sqrt",
            Func::Exp => "exp",
            Func::Log => "log",
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Min => "min",
            Func::Max => "max",
            Func::Norm => "norm",
        }
    }

    /// (min, max) argument count
    pub fn arity(self) -> (usize, usize) {
        match self {
            Func::Min | Func::Max => (1, usize::MAX),
            Func::Norm => (1, usize::MAX),
            _ => (1, 1),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CmpOp {
    Lt,
    Le,
    Gt,
    Ge,
    /// equal up to 1e-12 relative
    Eq,
    Ne,
}

impl CmpOp {
    pub fn symbol(self) -> &'static str {
        match self {
            CmpOp::Lt => "<",
            CmpOp::Le => "<=",
            CmpOp::Gt => ">",
            CmpOp::Ge => ">=",
            CmpOp::Eq => "==",
            CmpOp::Ne => "!=",
        }
    }

    fn apply(self, a: f64, b: f64) -> bool {
        let close = || a == b || (a - b).abs() <= 1e-12 * (1.0 + a.abs().max(b.abs()));
        match self {
            CmpOp::Lt => a < b,
            CmpOp::Le => a <= b,
            CmpOp::Gt => a > b,
            CmpOp::Ge => a >= b,
            CmpOp::Eq => close(),
            CmpOp::Ne => !close(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Cond {
    Cmp(CmpOp, Box<Expr>, Box<Expr>),
    And(Box<Cond>, Box<Cond>),
    Or(Box<Cond>, Box<Cond>),
    Not(Box<Cond>),
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Num(f64),
    /// coordinate index
    Var(usize),
    /// named constant, already resolved
    Param(String, f64),
    Neg(Box<Expr>),
    Bin(BinOp, Box<Expr>, Box<Expr>),
    Call(Func, Vec<Expr>),
    If(Box<Cond>, Box<Expr>, Box<Expr>),
}

impl Cond {
    pub fn eval(&self, x: &[f64]) -> bool {
        match self {
            Cond::Cmp(op, a, b) => op.apply(a.eval(x), b.eval(x)),
            Cond::And(a, b) => a.eval(x) && b.eval(x),
            Cond::Or(a, b) => a.eval(x) || b.eval(x),
            Cond::Not(a) => !a.eval(x),
        }
    }
}

impl Expr {
    pub fn eval(&self, x: &[f64]) -> f64 {
        match self {
            Expr::Num(v) | Expr::Param(_, v) => *v,
            Expr::Var(i) => x[*i],
            Expr::Neg(a) => -a.eval(x),
            Expr::Bin(op, a, b) => {
                let (a, b) = (a.eval(x), b.eval(x));
                match op {
                    BinOp::Add => a + b,
                    BinOp::Sub => a - b,
                    BinOp::Mul => a * b,
                    BinOp::Div => a / b,
                    BinOp::Pow => pow(a, b),
                }
            }
            Expr::Call(f, args) => {
                let v: Vec<f64> = args.iter().map(|a| a.eval(x)).collect();
                match f {
                    Func::Abs => v[0].abs(),
                    Func::Sqrt => v[0].sqrt(),
                    Func::Exp => v[0].exp(),
                    Func::Log => v[0].ln(),
                    Func::Sin => v[0].sin(),
                    Func::Cos => v[0].cos(),
                    Func::Min => v.iter().copied().fold(f64::INFINITY, f64::min),
                    Func::Max => v.iter().copied().fold(f64::NEG_INFINITY, f64::max),
                    Func::Norm => v.iter().map(|t| t * t).sum::<f64>().sqrt(),
                }
            }
            // only the selected branch is evaluated
            Expr::If(c, a, b) => {
                if c.eval(x) {
                    a.eval(x)
                } else {
                    b.eval(x)
                }
            }
        }
    }

    /// Value and gradient by forward differentiation; kinks take the branch the value takes.
    pub fn eval_grad(&self, x: &[f64]) -> (f64, Vec<f64>) {
        let n = x.len();
        let zero = || vec![0.0; n];
        match self {
            Expr::Num(v) | Expr::Param(_, v) => (*v, zero()),
            Expr::Var(i) => {
                let mut g = zero();
                g[*i] = 1.0;
                (x[*i], g)
            }
            Expr::Neg(a) => {
                let (v, g) = a.eval_grad(x);
                (-v, g.iter().map(|t| -t).collect())
            }
            Expr::Bin(op, a, b) => {
                let ((u, du), (v, dv)) = (a.eval_grad(x), b.eval_grad(x));
                match op {
                    BinOp::Add => (u + v, comb(&du, 1.0, &dv, 1.0)),
                    BinOp::Sub => (u - v, comb(&du, 1.0, &dv, -1.0)),
                    BinOp::Mul => (u * v, comb(&du, v, &dv, u)),
                    BinOp::Div => (u / v, comb(&du, 1.0 / v, &dv, -u / (v * v))),
                    BinOp::Pow => {
                        let val = pow(u, v);
                        // d(u^v) = v u^(v-1) du + u^v ln(u) dv; the second term vanishes for constant v
                        let cu = if v == 0.0 { 0.0 } else { v * pow(u, v - 1.0) };
                        let cv = if dv.iter().all(|t| *t == 0.0) { 0.0 } else { val * u.ln() };
                        (val, comb(&du, cu, &dv, cv))
                    }
                }
            }
            Expr::Call(f, args) => {
                let vg: Vec<(f64, Vec<f64>)> = args.iter().map(|a| a.eval_grad(x)).collect();
                let (u, du) = (&vg[0].0, &vg[0].1);
                let scale = |c: f64| du.iter().map(|t| c * t).collect::<Vec<f64>>();
                match f {
                    Func::Abs => (u.abs(), scale(if *u >= 0.0 { 1.0 } else { -1.0 })),
                    Func::Sqrt => (u.sqrt(), scale(0.5 / u.sqrt())),
                    Func::Exp => (u.exp(), scale(u.exp())),
                    Func::Log => (u.ln(), scale(1.0 / u)),
                    Func::Sin => (u.sin(), scale(u.cos())),
                    Func::Cos => (u.cos(), scale(-u.sin())),
                    Func::Min => vg.iter().fold((f64::INFINITY, zero()), |acc, p| if p.0 < acc.0 { p.clone() } else { acc }),
                    Func::Max => vg.iter().fold((f64::NEG_INFINITY, zero()), |acc, p| if p.0 > acc.0 { p.clone() } else { acc }),
                    Func::Norm => {
                        let r = vg.iter().map(|p| p.0 * p.0).sum::<f64>().sqrt();
                        let mut g = zero();
                        if r > 0.0 {
                            for (v, dv) in &vg {
                                for (gi, d) in g.iter_mut().zip(dv) {
                                    *gi += v / r * d;
                                }
                            }
                        }
                        (r, g)
                    }
                }
            }
            Expr::If(c, a, b) => {
                if c.eval(x) {
                    a.eval_grad(x)
                } else {
                    b.eval_grad(x)
                }
            }
        }
    }

    /// Largest coordinate index used, plus one.
    pub fn arity(&self) -> usize {
        match self {
            Expr::Num(_) | Expr::Param(..) => 0,
            Expr::Var(i) => i + 1,
            Expr::Neg(a) => a.arity(),
            Expr::Bin(_, a, b) => a.arity().max(b.arity()),
            Expr::Call(_, args) => args.iter().map(|a| a.arity()).max().unwrap_or(0),
            Expr::If(c, a, b) => c.arity().max(a.arity()).max(b.arity()),
        }
    }
}

impl Cond {
    pub fn arity(&self) -> usize {
        match self {
            Cond::Cmp(_, a, b) => a.arity().max(b.arity()),
            Cond::And(a, b) | Cond::Or(a, b) => a.arity().max(b.arity()),
            Cond::Not(a) => a.arity(),
        }
    }
}

fn pow(a: f64, b: f64) -> f64 {
    if b == 2.0 {
        a * a
    } else if b.fract() == 0.0 && b.abs() < 64.0 {
        a.powi(b as i32)
    } else {
        a.powf(b)
    }
}

fn comb(a: &[f64], ca: f64, b: &[f64], cb: f64) -> Vec<f64> {
    a.iter()
        .zip(b)
        .map(|(x, y)| {
            // 0 * inf terms of an unused direction stay 0
            let l = if *x == 0.0 { 0.0 } else { ca * x };
            let r = if *y == 0.0 { 0.0 } else { cb * y };
            l + r
        })
        .collect()
}

/// f64 literal that parses back to the same bits.
pub fn fmt_num(v: f64) -> String {
    if v == f64::INFINITY {
        "inf".into()
    } else if v == f64::NEG_INFINITY {
        "(-inf)".into()
    } else if v < 0.0 || (v == 0.0 && v.is_sign_negative()) {
        format!("(-{:?})", -v)
    } else {
        format!("{v:?}")
    }
}

pub fn var_name(i: usize) -> String {
    format!("x{}", i + 1)
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Num(v) => write!(f, "{}", fmt_num(*v)),
            Expr::Var(i) => write!(f, "{}", var_name(*i)),
            Expr::Param(name, _) => write!(f, "{name}"),
            Expr::Neg(a) => write!(f, "(-{a})"),
            Expr::Bin(op, a, b) => {
                let s = match op {
                    BinOp::Add => "+",
                    BinOp::Sub => "-",
                    BinOp::Mul => "*",
                    BinOp::Div => "/",
                    BinOp::Pow => "^",
                };
                write!(f, "({a} {s} {b})")
            }
            Expr::Call(func, args) => {
                write!(f, "{}(", func.name())?;
                for (k, a) in args.iter().enumerate() {
                    if k > 0 {
                        write!(f, ", ")?;
                    }
                    write!(f, "{a}")?;
                }
                write!(f, ")")
            }
            Expr::If(c, a, b) => write!(f, "({a} if {c} else {b})"),
        }
    }
}

impl fmt::Display for Cond {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Cond::Cmp(op, a, b) => write!(f, "({a} {} {b})", op.symbol()),
            Cond::And(a, b) => write!(f, "({a} and {b})"),
            Cond::Or(a, b) => write!(f, "({a} or {b})"),
            Cond::Not(a) => write!(f, "(not {a})"),
        }
    }
}

/// A generator of a dual-set piece and its coefficient range.
#[derive(Debug, Clone, PartialEq)]
pub enum GenExpr {
    Ray(Vec<Expr>),
    Line(Vec<Expr>),
    Seg(Expr, Expr, Vec<Expr>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct PieceExpr {
    pub center: Vec<Expr>,
    pub gens: Vec<GenExpr>,
}

/// Subgradient description: a union of pieces, the gradient, or nothing, chosen by guards.
#[derive(Debug, Clone, PartialEq)]
pub enum DualExpr {
    Empty,
    Gradient,
    Union(Vec<PieceExpr>),
    If(Box<Cond>, Box<DualExpr>, Box<DualExpr>),
}

fn fmt_vec(f: &mut fmt::Formatter<'_>, v: &[Expr]) -> fmt::Result {
    write!(f, "(")?;
    for (k, e) in v.iter().enumerate() {
        if k > 0 {
            write!(f, ", ")?;
        }
        write!(f, "{e}")?;
    }
    write!(f, ")")
}

impl fmt::Display for DualExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DualExpr::Empty => write!(f, "empty"),
            DualExpr::Gradient => write!(f, "gradient"),
            DualExpr::Union(ps) => {
                write!(f, "{{")?;
                for (k, p) in ps.iter().enumerate() {
                    if k > 0 {
                        write!(f, " | ")?;
                    }
                    fmt_vec(f, &p.center)?;
                    for g in &p.gens {
                        match g {
                            GenExpr::Ray(v) => {
                                write!(f, " + ray")?;
                                fmt_vec(f, v)?;
                            }
                            GenExpr::Line(v) => {
                                write!(f, " + line")?;
                                fmt_vec(f, v)?;
                            }
                            GenExpr::Seg(lo, hi, v) => {
                                write!(f, " + seg({lo}, {hi}, ")?;
                                fmt_vec(f, v)?;
                                write!(f, ")")?;
                            }
                        }
                    }
                }
                write!(f, "}}")
            }
            DualExpr::If(c, a, b) => write!(f, "({a} if {c} else {b})"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn guarded_branch_is_lazy() {
        // 1/(1-x) for x < 1, inf otherwise
        let e = Expr::If(
            Box::new(Cond::Cmp(CmpOp::Lt, Box::new(Expr::Var(0)), Box::new(Expr::Num(1.0)))),
            Box::new(Expr::Bin(BinOp::Div, Box::new(Expr::Num(1.0)), Box::new(Expr::Bin(BinOp::Sub, Box::new(Expr::Num(1.0)), Box::new(Expr::Var(0)))))),
            Box::new(Expr::Num(f64::INFINITY)),
        );
        assert_eq!(e.eval(&[0.0]), 1.0);
        assert_eq!(e.eval(&[2.0]), f64::INFINITY);
        let (v, g) = e.eval_grad(&[0.5]);
        assert_eq!((v, g), (2.0, vec![4.0]));
    }

    #[test]
    fn norm_gradient() {
        let e = Expr::Call(Func::Norm, vec![Expr::Var(0), Expr::Var(1)]);
        let (v, g) = e.eval_grad(&[3.0, 4.0]);
        assert_eq!(v, 5.0);
        assert!((g[0] - 0.6).abs() < 1e-15 && (g[1] - 0.8).abs() < 1e-15);
    }

    #[test]
    fn literal_printing_is_exact() {
        for v in [0.1, -0.3, 1e-300, 123456.789, f64::INFINITY, -0.0] {
            let s = fmt_num(v);
            let back: f64 = s.trim_matches(|c| c == '(' || c == ')').replace("inf", "Infinity").parse().unwrap();
            assert_eq!(back.to_bits(), v.to_bits(), "{s}");
        }
    }
}
