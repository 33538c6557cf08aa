use std::collections::BTreeMap;

use super::expr::{BinOp, CmpOp, Cond, DualExpr, Expr, Func, GenExpr, PieceExpr};
use super::lexer::{Tok, Token};
use super::{ErrorKind, ParseError};

/// Argument of a constructor call in the set, region and scheme sections.
#[derive(Debug, Clone, PartialEq)]
pub enum Arg {
    Scalar(Expr),
    Vector(Vec<Expr>),
    Name(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Call {
    pub ctor: String,
    pub args: Vec<Arg>,
}

pub struct Cursor<'a> {
    toks: &'a [Token],
    pos: usize,
    /// parameter values visible to expressions
    pub params: &'a BTreeMap<String, f64>,
    /// line and column reported at the end of the line
    end: (usize, usize),
}

const KEYWORDS: [&str; 5] = ["if", "else", "and", "or", "not"];

impl<'a> Cursor<'a> {
    pub fn new(toks: &'a [Token], params: &'a BTreeMap<String, f64>, end: (usize, usize)) -> Self {
        Cursor { toks, pos: 0, params, end }
    }

    pub fn peek(&self) -> Option<&'a Token> {
        self.toks.get(self.pos)
    }

    fn peek_at(&self, k: usize) -> Option<&'a Token> {
        self.toks.get(self.pos + k)
    }

    pub fn at_end(&self) -> bool {
        self.pos >= self.toks.len()
    }

    pub fn err(&self, kind: ErrorKind, msg: &str) -> ParseError {
        match self.peek() {
            Some(t) => ParseError::new(kind, t.line, t.column, &t.text, msg),
            None => ParseError::new(kind, self.end.0, self.end.1, "<end of line>", msg),
        }
    }

    fn is_sym(&self, s: &str) -> bool {
        matches!(self.peek(), Some(Token { tok: Tok::Sym(x), .. }) if *x == s)
    }

    fn is_ident(&self, s: &str) -> bool {
        matches!(self.peek(), Some(Token { tok: Tok::Ident(x), .. }) if x == s)
    }

    fn eat_sym(&mut self, s: &str) -> bool {
        if self.is_sym(s) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn eat_ident(&mut self, s: &str) -> bool {
        if self.is_ident(s) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    pub fn expect_sym(&mut self, s: &str) -> Result<(), ParseError> {
        if self.eat_sym(s) {
            Ok(())
        } else {
            Err(self.err(ErrorKind::Syntax, &format!("expected '{s}'")))
        }
    }

    pub fn ident(&mut self) -> Result<String, ParseError> {
        match self.peek() {
            Some(Token { tok: Tok::Ident(s), .. }) if !KEYWORDS.contains(&s.as_str()) => {
                self.pos += 1;
                Ok(s.clone())
            }
            _ => Err(self.err(ErrorKind::Syntax, "expected a name")),
        }
    }

    pub fn finish(&self) -> Result<(), ParseError> {
        if self.at_end() {
            Ok(())
        } else {
            Err(self.err(ErrorKind::Syntax, "unexpected trailing input"))
        }
    }

    pub fn expr(&mut self) -> Result<Expr, ParseError> {
        let a = self.arith()?;
        if self.eat_ident("if") {
            let c = self.cond()?;
            if !self.eat_ident("else") {
                return Err(self.err(ErrorKind::Syntax, "expected 'else' after the guard"));
            }
            let b = self.expr()?;
            return Ok(Expr::If(Box::new(c), Box::new(a), Box::new(b)));
        }
        Ok(a)
    }

    pub fn cond(&mut self) -> Result<Cond, ParseError> {
        let mut a = self.cond_and()?;
        while self.eat_ident("or") {
            let b = self.cond_and()?;
            a = Cond::Or(Box::new(a), Box::new(b));
        }
        Ok(a)
    }

    fn cond_and(&mut self) -> Result<Cond, ParseError> {
        let mut a = self.cond_not()?;
        while self.eat_ident("and") {
            let b = self.cond_not()?;
            a = Cond::And(Box::new(a), Box::new(b));
        }
        Ok(a)
    }

    fn cond_not(&mut self) -> Result<Cond, ParseError> {
        if self.eat_ident("not") {
            return Ok(Cond::Not(Box::new(self.cond_not()?)));
        }
        // a parenthesized guard, unless the parentheses open an arithmetic operand
        if self.is_sym("(") {
            let save = self.pos;
            if let Ok(c) = self.comparison() {
                return Ok(c);
            }
            self.pos = save;
            self.expect_sym("(")?;
            let c = self.cond()?;
            self.expect_sym(")")?;
            return Ok(c);
        }
        self.comparison()
    }

    fn comparison(&mut self) -> Result<Cond, ParseError> {
        let a = self.arith()?;
        let op = match self.peek() {
            Some(Token { tok: Tok::Sym(s), .. }) => match *s {
                "<" => CmpOp::Lt,
                "<=" => CmpOp::Le,
                ">" => CmpOp::Gt,
                ">=" => CmpOp::Ge,
                "==" => CmpOp::Eq,
                "!=" => CmpOp::Ne,
                _ => return Err(self.err(ErrorKind::Syntax, "expected a comparison")),
            },
            _ => return Err(self.err(ErrorKind::Syntax, "expected a comparison")),
        };
        self.pos += 1;
        let b = self.arith()?;
        Ok(Cond::Cmp(op, Box::new(a), Box::new(b)))
    }

    fn arith(&mut self) -> Result<Expr, ParseError> {
        let mut a = self.term()?;
        loop {
            let op = if self.eat_sym("+") {
                BinOp::Add
            } else if self.eat_sym("-") {
                BinOp::Sub
            } else {
                return Ok(a);
            };
            let b = self.term()?;
            a = Expr::Bin(op, Box::new(a), Box::new(b));
        }
    }

    fn term(&mut self) -> Result<Expr, ParseError> {
        let mut a = self.unary()?;
        loop {
            let op = if self.eat_sym("*") {
                BinOp::Mul
            } else if self.eat_sym("/") {
                BinOp::Div
            } else {
                return Ok(a);
            };
            let b = self.unary()?;
            a = Expr::Bin(op, Box::new(a), Box::new(b));
        }
    }

    fn unary(&mut self) -> Result<Expr, ParseError> {
        if self.eat_sym("-") {
            return Ok(Expr::Neg(Box::new(self.unary()?)));
        }
        let base = self.atom()?;
        if self.eat_sym("^") {
            let e = self.unary()?;
            return Ok(Expr::Bin(BinOp::Pow, Box::new(base), Box::new(e)));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Expr, ParseError> {
        let Some(t) = self.peek() else { return Err(self.err(ErrorKind::Syntax, "expected an expression")) };
        match &t.tok {
            Tok::Num(v) => {
                self.pos += 1;
                Ok(Expr::Num(*v))
            }
            Tok::Sym("(") => {
                self.pos += 1;
                let e = self.expr()?;
                self.expect_sym(")")?;
                Ok(e)
            }
            Tok::Ident(name) if !KEYWORDS.contains(&name.as_str()) => {
                if matches!(self.peek_at(1), Some(Token { tok: Tok::Sym("("), .. })) {
                    let Some(f) = Func::from_name(name) else {
                        return Err(self.err(ErrorKind::UndefinedSymbol, &format!("unknown function '{name}'")));
                    };
                    let at = self.pos;
                    self.pos += 2;
                    let mut args = vec![self.expr()?];
                    while self.eat_sym(",") {
                        args.push(self.expr()?);
                    }
                    self.expect_sym(")")?;
                    let (lo, hi) = f.arity();
                    if args.len() < lo || args.len() > hi {
                        let t = &self.toks[at];
                        return Err(ParseError::new(ErrorKind::Syntax, t.line, t.column, &t.text, "wrong number of arguments"));
                    }
                    return Ok(Expr::Call(f, args));
                }
                let e = if name == "inf" {
                    Expr::Num(f64::INFINITY)
                } else if name == "pi" {
                    Expr::Param("pi".into(), std::f64::consts::PI)
                } else if let Some(v) = self.params.get(name) {
                    Expr::Param(name.clone(), *v)
                } else if let Some(i) = var_index(name) {
                    Expr::Var(i)
                } else {
                    return Err(self.err(ErrorKind::UndefinedSymbol, &format!("undefined symbol '{name}'")));
                };
                self.pos += 1;
                Ok(e)
            }
            _ => Err(self.err(ErrorKind::Syntax, "expected an expression")),
        }
    }

    /// `(e1, ..., ek)`
    pub fn vector(&mut self) -> Result<Vec<Expr>, ParseError> {
        self.expect_sym("(")?;
        let mut v = vec![self.expr()?];
        while self.eat_sym(",") {
            v.push(self.expr()?);
        }
        self.expect_sym(")")?;
        Ok(v)
    }

    /// `name(arg, ...)` or a bare `name`; an argument starting with '(' and holding a comma
    /// at depth one is a vector, an identifier not usable in expressions is a name.
    pub fn call(&mut self) -> Result<Call, ParseError> {
        let ctor = self.ident()?;
        let mut args = vec![];
        if self.eat_sym("(")
            && !self.eat_sym(")") {
                loop {
                    args.push(self.arg()?);
                    if self.eat_sym(")") {
                        break;
                    }
                    self.expect_sym(",")?;
                }
            }
        Ok(Call { ctor, args })
    }

    fn arg(&mut self) -> Result<Arg, ParseError> {
        if self.is_sym("(") && self.paren_has_comma() {
            return Ok(Arg::Vector(self.vector()?));
        }
        if let Some(Token { tok: Tok::Ident(n), .. }) = self.peek() {
            let next_ends = matches!(self.peek_at(1), None | Some(Token { tok: Tok::Sym(",") | Tok::Sym(")"), .. }));
            if next_ends && !self.params.contains_key(n) && var_index(n).is_none() && n != "inf" && n != "pi" {
                self.pos += 1;
                return Ok(Arg::Name(n.clone()));
            }
        }
        // a one-element vector is written `(e)` and reads as a scalar; callers accept both
        Ok(Arg::Scalar(self.expr()?))
    }

    fn paren_has_comma(&self) -> bool {
        let mut depth = 0;
        for t in &self.toks[self.pos..] {
            match t.tok {
                Tok::Sym("(") => depth += 1,
                Tok::Sym(")") => {
                    depth -= 1;
                    if depth == 0 {
                        return false;
                    }
                }
                Tok::Sym(",") if depth == 1 => return true,
                _ => {}
            }
        }
        false
    }

    pub fn dual(&mut self) -> Result<DualExpr, ParseError> {
        let a = if self.eat_ident("empty") {
            DualExpr::Empty
        } else if self.eat_ident("gradient") {
            DualExpr::Gradient
        } else if self.eat_sym("{") {
            let mut pieces = vec![self.piece()?];
            while self.eat_sym("|") {
                pieces.push(self.piece()?);
            }
            self.expect_sym("}")?;
            DualExpr::Union(pieces)
        } else if self.eat_sym("(") {
            let d = self.dual()?;
            self.expect_sym(")")?;
            d
        } else {
            return Err(self.err(ErrorKind::Syntax, "expected 'empty', 'gradient' or '{ ... }'"));
        };
        if self.eat_ident("if") {
            let c = self.cond()?;
            if !self.eat_ident("else") {
                return Err(self.err(ErrorKind::Syntax, "expected 'else' after the guard"));
            }
            let b = self.dual()?;
            return Ok(DualExpr::If(Box::new(c), Box::new(a), Box::new(b)));
        }
        Ok(a)
    }

    fn piece(&mut self) -> Result<PieceExpr, ParseError> {
        let center = self.vector()?;
        let mut gens = vec![];
        while self.eat_sym("+") {
            if self.eat_ident("ray") {
                gens.push(GenExpr::Ray(self.vector()?));
            } else if self.eat_ident("line") {
                gens.push(GenExpr::Line(self.vector()?));
            } else if self.eat_ident("seg") {
                self.expect_sym("(")?;
                let lo = self.expr()?;
                self.expect_sym(",")?;
                let hi = self.expr()?;
                self.expect_sym(",")?;
                let v = self.vector()?;
                self.expect_sym(")")?;
                gens.push(GenExpr::Seg(lo, hi, v));
            } else {
                return Err(self.err(ErrorKind::Syntax, "expected 'ray', 'line' or 'seg'"));
            }
        }
        Ok(PieceExpr { center, gens })
    }
}

/// x1.. are coordinates; x, y, z alias the first three.
pub fn var_index(name: &str) -> Option<usize> {
    match name {
        "x" => Some(0),
        "y" => Some(1),
        "z" => Some(2),
        _ => {
            let rest = name.strip_prefix('x')?;
            let k: usize = rest.parse().ok()?;
            (k >= 1 && !rest.starts_with('0')).then(|| k - 1)
        }
    }
}
