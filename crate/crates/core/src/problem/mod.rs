//! Problem files: a line-oriented text format with sections.
//!
//! ```text
//! dim = 2
//! [params]
//! delta = 1
//! [function]
//! f1 = -x if y >= x^2 else inf
//! f2 = indicator(H)
//! [subgrad]
//! f1 = {(-1, 0) + ray(2*x, -1)} if y == x^2 else {(-1, 0)} if y > x^2 else empty
//! [set]
//! H = halfspace((0, 1), 0)
//! [region]
//! U = open_ball((0, 0), 0.5)
//! [scheme]
//! levels = 8
//! [map]
//! F = (2*x, x*y)
//! ```
//!
//! Coordinates are `x1, x2, ...`, with `x, y, z` for the first three. `==` in guards
//! compares up to 1e-12 relative. Only the branch a guard selects is evaluated.

pub mod expr;
pub mod lexer;
pub mod parser;

use std::collections::BTreeMap;
use std::fmt::Write as _;

use thiserror::Error;

use crate::dual::{DualSet, GenPiece};
use crate::error::{Error, Result};
use crate::geometry::Point;
use crate::oracle::{FnOracle, SetOracle, SmoothMap};
use crate::region::Region;
use crate::sampling::{SampleMode, SampleScheme};
use expr::{fmt_num, DualExpr, Expr, GenExpr};
use parser::{Arg, Call, Cursor};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Syntax,
    UndefinedSymbol,
    DimensionMismatch,
}

#[derive(Debug, Error, Clone, PartialEq)]
#[error("line {line}, column {column}: {message} (at '{token}')")]
pub struct ParseError {
    pub kind: ErrorKind,
    pub line: usize,
    pub column: usize,
    pub token: String,
    pub message: String,
}

impl ParseError {
    pub fn new(kind: ErrorKind, line: usize, column: usize, token: &str, message: &str) -> Self {
        ParseError { kind, line, column, token: token.to_string(), message: message.to_string() }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum FnBody {
    Expr(Expr),
    Indicator(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct FunctionDef {
    pub body: FnBody,
    pub subgrad: Option<DualExpr>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum Section {
    Preamble,
    Params,
    Function,
    Subgrad,
    Set,
    Region,
    Scheme,
    Map,
}

impl Section {
    fn from_name(s: &str) -> Option<Section> {
        Some(match s {
            "params" => Section::Params,
            "function" => Section::Function,
            "subgrad" => Section::Subgrad,
            "set" => Section::Set,
            "region" => Section::Region,
            "scheme" => Section::Scheme,
            "map" => Section::Map,
            _ => return None,
        })
    }
}

/// A parsed problem file. Entries keep their file order.
#[derive(Debug, Clone, PartialEq)]
pub struct Problem {
    pub dim: usize,
    pub params: Vec<(String, f64)>,
    pub functions: Vec<(String, FunctionDef)>,
    pub sets: Vec<(String, Call)>,
    pub regions: Vec<(String, Call)>,
    pub scheme: Vec<(String, Call)>,
    pub maps: Vec<(String, Vec<Expr>)>,
}

struct Pos {
    line: usize,
    column: usize,
    token: String,
}

fn lookup<'a, T>(v: &'a [(String, T)], name: &str) -> Option<&'a T> {
    v.iter().find(|(n, _)| n == name).map(|(_, t)| t)
}

impl Problem {
    pub fn parse(src: &str) -> std::result::Result<Problem, ParseError> {
        let mut section = Section::Preamble;
        let mut declared_dim: Option<(usize, Pos)> = None;
        let mut params: BTreeMap<String, f64> = BTreeMap::new();
        let mut p = Problem { dim: 0, params: vec![], functions: vec![], sets: vec![], regions: vec![], scheme: vec![], maps: vec![] };
        let mut subgrads: Vec<(String, DualExpr, Pos)> = vec![];
        // arity checks run once the dimension is known
        let mut arities: Vec<(usize, Pos)> = vec![];
        for (k, raw) in src.lines().enumerate() {
            let line = k + 1;
            let toks = lexer::lex_line(raw, line)?;
            if toks.is_empty() {
                continue;
            }
            let end = (line, raw.chars().count() + 1);
            let mut c = Cursor::new(&toks, &params, end);
            if toks[0].tok == lexer::Tok::Sym("[") {
                c.expect_sym("[")?;
                let name = c.ident()?;
                section = Section::from_name(&name).ok_or_else(|| {
                    ParseError::new(ErrorKind::Syntax, toks[1].line, toks[1].column, &toks[1].text, "unknown section")
                })?;
                c.expect_sym("]")?;
                c.finish()?;
                continue;
            }
            let name_tok = &toks[0];
            let name = c.ident()?;
            c.expect_sym("=")?;
            let rhs_pos = || {
                let t = toks.get(2).unwrap_or(name_tok);
                Pos { line: t.line, column: t.column, token: t.text.clone() }
            };
            let dup = |exists: bool| {
                if exists {
                    Err(ParseError::new(ErrorKind::Syntax, name_tok.line, name_tok.column, &name_tok.text, "duplicate definition"))
                } else {
                    Ok(())
                }
            };
            match section {
                Section::Preamble => {
                    if name != "dim" {
                        return Err(ParseError::new(ErrorKind::Syntax, line, name_tok.column, &name, "only 'dim' may precede the first section"));
                    }
                    let e = c.expr()?;
                    c.finish()?;
                    let v = e.eval(&[]);
                    if e.arity() > 0 || !(v >= 1.0 && v.fract() == 0.0) {
                        let t = rhs_pos();
                        return Err(ParseError::new(ErrorKind::Syntax, t.line, t.column, &t.token, "dim must be a positive integer"));
                    }
                    declared_dim = Some((v as usize, rhs_pos()));
                }
                Section::Params => {
                    dup(params.contains_key(&name))?;
                    let e = c.expr()?;
                    c.finish()?;
                    if e.arity() > 0 {
                        let t = rhs_pos();
                        return Err(ParseError::new(ErrorKind::UndefinedSymbol, t.line, t.column, &t.token, "parameters cannot use coordinates"));
                    }
                    let v = e.eval(&[]);
                    params.insert(name.clone(), v);
                    p.params.push((name, v));
                }
                Section::Function => {
                    dup(lookup(&p.functions, &name).is_some())?;
                    let is_ind = matches!(toks.get(2), Some(t) if t.text == "indicator") && matches!(toks.get(3), Some(t) if t.text == "(");
                    let body = if is_ind {
                        let call = c.call()?;
                        match call.args.as_slice() {
                            [Arg::Name(s)] => {
                                if lookup(&p.sets, s).is_none() {
                                    let t = &toks[4];
                                    return Err(ParseError::new(ErrorKind::UndefinedSymbol, t.line, t.column, &t.text, "undefined set"));
                                }
                                FnBody::Indicator(s.clone())
                            }
                            _ => {
                                let t = &toks[2];
                                return Err(ParseError::new(ErrorKind::Syntax, t.line, t.column, &t.text, "indicator takes one set name"));
                            }
                        }
                    } else {
                        let e = c.expr()?;
                        arities.push((e.arity(), rhs_pos()));
                        FnBody::Expr(e)
                    };
                    c.finish()?;
                    p.functions.push((name, FunctionDef { body, subgrad: None }));
                }
                Section::Subgrad => {
                    let d = c.dual()?;
                    c.finish()?;
                    subgrads.push((name, d, Pos { line, column: name_tok.column, token: name_tok.text.clone() }));
                }
                Section::Set | Section::Region | Section::Scheme => {
                    let call = if section == Section::Scheme { scheme_rhs(&mut c)? } else { c.call()? };
                    c.finish()?;
                    check_call(section, &call, &p, rhs_pos())?;
                    let list = match section {
                        Section::Set => &mut p.sets,
                        Section::Region => &mut p.regions,
                        _ => &mut p.scheme,
                    };
                    dup(lookup(list, &name).is_some())?;
                    for a in &call.args {
                        match a {
                            Arg::Scalar(e) => arities.push((e.arity(), rhs_pos())),
                            Arg::Vector(v) => arities.extend(v.iter().map(|e| (e.arity(), rhs_pos()))),
                            Arg::Name(_) => {}
                        }
                    }
                    list.push((name, call));
                }
                Section::Map => {
                    dup(lookup(&p.maps, &name).is_some())?;
                    let v = c.vector()?;
                    c.finish()?;
                    arities.extend(v.iter().map(|e| (e.arity(), rhs_pos())));
                    p.maps.push((name, v));
                }
            }
        }
        for (name, d, pos) in subgrads {
            match p.functions.iter_mut().find(|(n, _)| *n == name) {
                Some((_, f)) => f.subgrad = Some(d),
                None => return Err(ParseError::new(ErrorKind::UndefinedSymbol, pos.line, pos.column, &pos.token, "subgradient for an undefined function")),
            }
        }
        let used = arities.iter().map(|(a, _)| *a).max().unwrap_or(0);
        p.dim = match declared_dim {
            Some((d, _)) => d,
            None => used.max(vector_len(&p)).max(1),
        };
        if let Some((_, pos)) = arities.iter().find(|(a, _)| *a > p.dim) {
            return Err(ParseError::new(ErrorKind::DimensionMismatch, pos.line, pos.column, &pos.token, &format!("uses a coordinate beyond dim = {}", p.dim)));
        }
        Ok(p)
    }

    pub fn from_file(path: &std::path::Path) -> Result<Problem> {
        let src = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        Ok(Problem::parse(&src)?)
    }

    pub fn function_names(&self) -> Vec<&str> {
        self.functions.iter().map(|(n, _)| n.as_str()).collect()
    }

    pub fn function(&self, name: &str) -> Result<FnOracle> {
        self.function_on(name, self.dim)
    }

    /// The function on R^dim, e.g. the output space of a map in a composition.
    pub fn function_on(&self, name: &str, dim: usize) -> Result<FnOracle> {
        let def = lookup(&self.functions, name).ok_or_else(|| Error::UnknownName(name.into()))?;
        let f = match &def.body {
            FnBody::Indicator(s) => FnOracle::indicator(&self.set(s)?),
            FnBody::Expr(e) => {
                if e.arity() > dim {
                    return Err(Error::DimensionMismatch { expected: dim, got: e.arity() });
                }
                let e = e.clone();
                FnOracle::new(dim, format!("{name} = {e}"), move |x| e.eval(x))
            }
        };
        Ok(match (&def.subgrad, &def.body) {
            (Some(d), FnBody::Expr(e)) => {
                let (d, e) = (d.clone(), e.clone());
                f.with_subgrad(move |x| dual_eval(&d, &e, x))
            }
            (Some(d), FnBody::Indicator(_)) => {
                let d = d.clone();
                let zero = Expr::Num(0.0);
                f.with_subgrad(move |x| dual_eval(&d, &zero, x))
            }
            (None, _) => f,
        })
    }

    pub fn set(&self, name: &str) -> Result<SetOracle> {
        let call = lookup(&self.sets, name).ok_or_else(|| Error::UnknownName(name.into()))?;
        let a = &call.args;
        Ok(match call.ctor.as_str() {
            "halfspace" => SetOracle::halfspace(self.vec_arg(&a[0])?, scalar(&a[1])?),
            "box" => SetOracle::boxed(self.vec_arg(&a[0])?, self.vec_arg(&a[1])?),
            "ball" => SetOracle::ball(self.vec_arg(&a[0])?, scalar(&a[1])?),
            "line" => SetOracle::line(self.vec_arg(&a[0])?, self.vec_arg(&a[1])?),
            "epigraph" => SetOracle::parabola_epigraph(scalar(&a[0])?),
            "singleton" => SetOracle::singleton(self.vec_arg(&a[0])?),
            "union" => {
                let (Arg::Name(l), Arg::Name(r)) = (&a[0], &a[1]) else { return Err(Error::UnknownName("union arguments".into())) };
                SetOracle::union(&self.set(l)?, &self.set(r)?)
            }
            other => return Err(Error::UnknownName(other.into())),
        })
    }

    pub fn region(&self, name: &str) -> Result<Region> {
        let call = lookup(&self.regions, name).ok_or_else(|| Error::UnknownName(name.into()))?;
        let a = &call.args;
        match call.ctor.as_str() {
            "open_ball" => Region::open_ball(self.vec_arg(&a[0])?, scalar(&a[1])?),
            "closed_ball" => Region::closed_ball(self.vec_arg(&a[0])?, scalar(&a[1])?),
            "box" => Region::boxed(self.vec_arg(&a[0])?, self.vec_arg(&a[1])?),
            "whole" => Ok(Region::Whole { dim: self.dim }),
            "set" => {
                let Arg::Name(s) = &a[0] else { return Err(Error::UnknownName("set region".into())) };
                Ok(Region::Set(self.set(s)?))
            }
            other => Err(Error::UnknownName(other.into())),
        }
    }

    /// The region named U, else the only region, else the whole space.
    pub fn default_region(&self) -> Result<Region> {
        if lookup(&self.regions, "U").is_some() {
            return self.region("U");
        }
        match self.regions.as_slice() {
            [(n, _)] => self.region(n),
            _ => Ok(Region::Whole { dim: self.dim }),
        }
    }

    pub fn map(&self, name: &str) -> Result<SmoothMap> {
        let comps = lookup(&self.maps, name).ok_or_else(|| Error::UnknownName(name.into()))?.clone();
        let c2 = comps.clone();
        Ok(SmoothMap::new(self.dim, comps.len(), name, move |x| comps.iter().map(|e| e.eval(x)).collect())
            .with_jacobian(move |x| {
                let rows: Vec<Vec<f64>> = c2.iter().map(|e| e.eval_grad(x).1).collect();
                rows.iter().flatten().all(|v| v.is_finite()).then_some(rows)
            }))
    }

    /// Scheme settings applied over the defaults.
    pub fn scheme(&self) -> Result<SampleScheme> {
        let mut s = SampleScheme::default();
        for (key, call) in &self.scheme {
            let num = || -> Result<f64> { call.args.first().map_or(Err(Error::UnknownName(key.clone())), scalar) };
            match key.as_str() {
                "levels" => s.levels = num()? as usize,
                "eta0" => s.eta0 = num()?,
                "base_points" => s.base_points = num()? as usize,
                "growth" => s.growth = num()?,
                "max_points" => s.max_points = num()? as usize,
                "stages" => s.stages = num()? as usize,
                "seed" => s.seed = num()? as u64,
                "tol" => s.tol = num()?,
                "trace_tol" => s.trace_tol = num()?,
                "diverge" => s.diverge = num()?,
                "boundary_depth" => s.boundary_depth = num()? as usize,
                "refine" => s.refine = num()? != 0.0,
                "mode" => {
                    s.mode = match call.ctor.as_str() {
                        "grid" => SampleMode::Grid,
                        "low_discrepancy" => SampleMode::LowDiscrepancy,
                        other => return Err(Error::UnknownName(other.into())),
                    }
                }
                "window" => s.window = Some((self.vec_arg(&call.args[0])?, self.vec_arg(&call.args[1])?)),
                other => return Err(Error::UnknownName(other.into())),
            }
        }
        Ok(s)
    }

    fn vec_arg(&self, a: &Arg) -> Result<Point> {
        let v: Point = match a {
            Arg::Vector(v) => v.iter().map(|e| e.eval(&[])).collect(),
            Arg::Scalar(e) => vec![e.eval(&[])],
            Arg::Name(n) => return Err(Error::UnknownName(n.clone())),
        };
        if v.len() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, got: v.len() });
        }
        Ok(v)
    }

    /// Canonical text: fully parenthesized expressions, parameters by name.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "dim = {}", self.dim);
        if !self.params.is_empty() {
            let _ = writeln!(s, "[params]");
            for (n, v) in &self.params {
                let _ = writeln!(s, "{n} = {}", fmt_num(*v));
            }
        }
        if !self.sets.is_empty() {
            let _ = writeln!(s, "[set]");
            for (n, c) in &self.sets {
                let _ = writeln!(s, "{n} = {}", fmt_call(c));
            }
        }
        if !self.functions.is_empty() {
            let _ = writeln!(s, "[function]");
            for (n, f) in &self.functions {
                match &f.body {
                    FnBody::Expr(e) => {
                        let _ = writeln!(s, "{n} = {e}");
                    }
                    FnBody::Indicator(set) => {
                        let _ = writeln!(s, "{n} = indicator({set})");
                    }
                }
            }
            let with_sg: Vec<_> = self.functions.iter().filter_map(|(n, f)| f.subgrad.as_ref().map(|d| (n, d))).collect();
            if !with_sg.is_empty() {
                let _ = writeln!(s, "[subgrad]");
                for (n, d) in with_sg {
                    let _ = writeln!(s, "{n} = {d}");
                }
            }
        }
        for (title, list) in [("region", &self.regions), ("scheme", &self.scheme)] {
            if !list.is_empty() {
                let _ = writeln!(s, "[{title}]");
                for (n, c) in list {
                    let _ = writeln!(s, "{n} = {}", fmt_call(c));
                }
            }
        }
        if !self.maps.is_empty() {
            let _ = writeln!(s, "[map]");
            for (n, v) in &self.maps {
                let comps: Vec<String> = v.iter().map(|e| e.to_string()).collect();
                let _ = writeln!(s, "{n} = ({})", comps.join(", "));
            }
        }
        s
    }
}

fn scalar(a: &Arg) -> Result<f64> {
    match a {
        Arg::Scalar(e) => Ok(e.eval(&[])),
        Arg::Vector(v) if v.len() == 1 => Ok(v[0].eval(&[])),
        Arg::Vector(v) => Err(Error::DimensionMismatch { expected: 1, got: v.len() }),
        Arg::Name(n) => Err(Error::UnknownName(n.clone())),
    }
}

/// Scheme lines are `key = number`, `mode = grid` or `window = box((lo), (hi))`.
fn scheme_rhs(c: &mut Cursor) -> std::result::Result<Call, ParseError> {
    if let Some(t) = c.peek() {
        if matches!(t.text.as_str(), "box" | "grid" | "low_discrepancy") {
            return c.call();
        }
    }
    let e = c.expr()?;
    Ok(Call { ctor: "value".into(), args: vec![Arg::Scalar(e)] })
}

fn check_call(section: Section, call: &Call, p: &Problem, pos: Pos) -> std::result::Result<(), ParseError> {
    use Arg::*;
    let err = |kind, msg: &str| Err(ParseError::new(kind, pos.line, pos.column, &pos.token, msg));
    let shape: &[u8] = match (section, call.ctor.as_str()) {
        // v = vector, s = scalar, n = name
        (Section::Set, "halfspace") => b"vs",
        (Section::Set, "box") | (Section::Region, "box") | (Section::Scheme, "box") => b"vv",
        (Section::Set, "ball") | (Section::Region, "open_ball") | (Section::Region, "closed_ball") => b"vs",
        (Section::Set, "line") => b"vv",
        (Section::Set, "epigraph") => b"s",
        (Section::Set, "singleton") => b"v",
        (Section::Set, "union") => b"nn",
        (Section::Region, "whole") | (Section::Scheme, "grid") | (Section::Scheme, "low_discrepancy") => b"",
        (Section::Region, "set") => b"n",
        (Section::Scheme, "value") => b"s",
        _ => return err(ErrorKind::UndefinedSymbol, &format!("unknown constructor '{}'", call.ctor)),
    };
    if shape.len() != call.args.len() {
        return err(ErrorKind::Syntax, &format!("'{}' takes {} arguments", call.ctor, shape.len()));
    }
    for (want, a) in shape.iter().zip(&call.args) {
        let ok = match (want, a) {
            (b'v', Vector(_) | Scalar(_)) | (b's', Scalar(_)) => true,
            (b'n', Name(n)) => {
                if lookup(&p.sets, n).is_none() {
                    return err(ErrorKind::UndefinedSymbol, &format!("undefined set '{n}'"));
                }
                true
            }
            _ => false,
        };
        if !ok {
            return err(ErrorKind::Syntax, &format!("bad argument for '{}'", call.ctor));
        }
    }
    Ok(())
}

fn vector_len(p: &Problem) -> usize {
    let from_calls = |list: &[(String, Call)]| {
        list.iter()
            .flat_map(|(_, c)| c.args.iter())
            .map(|a| match a {
                Arg::Vector(v) => v.len(),
                _ => 0,
            })
            .max()
            .unwrap_or(0)
    };
    from_calls(&p.sets).max(from_calls(&p.regions))
}

fn fmt_call(c: &Call) -> String {
    if c.ctor == "value" {
        return match &c.args[0] {
            Arg::Scalar(e) => e.to_string(),
            _ => String::new(),
        };
    }
    if c.args.is_empty() {
        return c.ctor.clone();
    }
    let args: Vec<String> = c
        .args
        .iter()
        .map(|a| match a {
            Arg::Scalar(e) => e.to_string(),
            Arg::Vector(v) => format!("({})", v.iter().map(|e| e.to_string()).collect::<Vec<_>>().join(", ")),
            Arg::Name(n) => n.clone(),
        })
        .collect();
    format!("{}({})", c.ctor, args.join(", "))
}

fn dual_eval(d: &DualExpr, f: &Expr, x: &[f64]) -> DualSet {
    let ev = |v: &[Expr]| -> Point { v.iter().map(|e| e.eval(x)).collect() };
    match d {
        DualExpr::Empty => DualSet::empty(),
        DualExpr::Gradient => {
            let (v, g) = f.eval_grad(x);
            if v.is_finite() && g.iter().all(|t| t.is_finite()) {
                DualSet::point(g)
            } else {
                DualSet::empty()
            }
        }
        DualExpr::Union(ps) => DualSet {
            pieces: ps
                .iter()
                .map(|p| {
                    let mut piece = GenPiece::point(ev(&p.center));
                    for g in &p.gens {
                        piece = match g {
                            GenExpr::Ray(v) => piece.ray(ev(v)),
                            GenExpr::Line(v) => piece.line(ev(v)),
                            GenExpr::Seg(lo, hi, v) => piece.with_gen(ev(v), lo.eval(x), hi.eval(x)),
                        };
                    }
                    piece
                })
                .collect(),
        },
        DualExpr::If(c, a, b) => {
            if c.eval(x) {
                dual_eval(a, f, x)
            } else {
                dual_eval(b, f, x)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_constant_function() {
        let p = Problem::parse("[function]\nf1 = 0\n").unwrap();
        assert_eq!(p.dim, 1);
        assert_eq!(p.function("f1").unwrap().value(&[3.0]), 0.0);
    }

    #[test]
    fn pole_with_guard() {
        let src = "[params]\ndelta = 1\n[function]\nf1 = delta/(delta - x) if x < delta else inf\n";
        let p = Problem::parse(src).unwrap();
        let f = p.function("f1").unwrap();
        assert_eq!(f.value(&[0.0]), 1.0);
        assert_eq!(f.value(&[1.0]), f64::INFINITY);
    }

    #[test]
    fn malformed_guard_has_a_position() {
        let e = Problem::parse("[function]\nf = x if x < else 1\n").unwrap_err();
        assert_eq!(e.kind, ErrorKind::Syntax);
        assert_eq!((e.line, e.column, e.token.as_str()), (2, 14, "else"));
        let e = Problem::parse("[function]\nf = x if x < 1\n").unwrap_err();
        assert_eq!(e.token, "<end of line>");
    }

    #[test]
    fn undefined_symbols_and_dimensions() {
        let e = Problem::parse("[function]\nf = x + q\n").unwrap_err();
        assert_eq!((e.kind, e.token.as_str()), (ErrorKind::UndefinedSymbol, "q"));
        let e = Problem::parse("dim = 1\n[function]\nf = x + y\n").unwrap_err();
        assert_eq!(e.kind, ErrorKind::DimensionMismatch);
        let e = Problem::parse("[function]\nf = indicator(S)\n").unwrap_err();
        assert_eq!(e.kind, ErrorKind::UndefinedSymbol);
    }

    #[test]
    fn sets_regions_subgradients_and_maps() {
        let src = "dim = 2
[set]
H = halfspace((0, 1), 0)
[function]
f1 = -x if y >= x^2 else inf
f2 = indicator(H)
[subgrad]
f1 = {(-1, 0) + ray(2*x, -1)} if y == x^2 else {(-1, 0)} if y > x^2 else empty
[region]
U = open_ball((0, 0), 0.5)
[scheme]
levels = 4
window = box((-1, -1), (1, 1))
[map]
F = (2*x, x*y)
";
        let p = Problem::parse(src).unwrap();
        let f1 = p.function("f1").unwrap();
        assert!(f1.subgrad(&[0.5, 0.25]).unwrap().contains(&[0.0, -1.0], 1e-12));
        assert!(f1.subgrad(&[0.5, 0.0]).unwrap().is_empty());
        let f2 = p.function("f2").unwrap();
        assert!(f2.subgrad(&[0.3, 0.0]).unwrap().contains(&[0.0, 2.0], 1e-12));
        assert!(p.default_region().unwrap().contains(&[0.1, 0.1]));
        assert_eq!(p.scheme().unwrap().levels, 4);
        let m = p.map("F").unwrap();
        assert_eq!(m.jacobian(&[1.0, 2.0]).unwrap(), vec![vec![2.0, 0.0], vec![2.0, 1.0]]);
        let again = Problem::parse(&p.to_text()).unwrap();
        assert_eq!(again, p);
    }
}
