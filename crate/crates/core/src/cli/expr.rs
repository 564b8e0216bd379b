//! Arithmetic expressions over `x1 … xn` and `u`, with symbolic
//! differentiation.
//!
//! Grammar (usual precedence, `^` right associative):
//!
//! ```text
//! expr  := term (("+" | "-") term)*
//! term  := unary (("*" | "/") unary)*
//! unary := "-" unary | power
//! power := atom ("^" unary)?
//! atom  := number | "pi" | "x1".."x9" | "u" | "r2" | "|x|"
//!        | func "(" expr ("," expr)* ")" | "(" expr ")"
//! func  := sin cos tan arctan atan exp log sqrt abs max min
//! ```
//!
//! `r2` and `|x|^2` both denote `|x|²`.

use std::fmt;
use std::sync::Arc;

#[derive(Clone, Debug, PartialEq)]
pub enum Expr {
    Num(f64),
    Var(usize),
    U,
    Neg(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, Box<Expr>),
    Call(Func, Vec<Expr>),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Func {
    Sin,
    Cos,
    Tan,
    Atan,
    Exp,
    Log,
    Sqrt,
    Abs,
    Max,
    Min,
    /// `1` for a nonnegative argument, `0` otherwise; appears in derivatives.
    Step,
}

impl Func {
    fn lookup(name: &str) -> Option<(Func, usize)> {
        Some(match name {
            "sin" => (Func::Sin, 1),
            "cos" => (Func::Cos, 1),
            "tan" => (Func::Tan, 1),
            "arctan" | "atan" => (Func::Atan, 1),
            "exp" => (Func::Exp, 1),
            "log" | "ln" => (Func::Log, 1),
            "sqrt" => (Func::Sqrt, 1),
            "abs" => (Func::Abs, 1),
            "max" => (Func::Max, 2),
            "min" => (Func::Min, 2),
            "step" => (Func::Step, 1),
            _ => return None,
        })
    }

    fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Tan => "tan",
            Func::Atan => "arctan",
            Func::Exp => "exp",
            Func::Log => "log",
            Func::Sqrt => "sqrt",
            Func::Abs => "abs",
            Func::Max => "max",
            Func::Min => "min",
            Func::Step => "step",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ParseError {
    pub position: usize,
    pub message: String,
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "column {}: {}", self.position + 1, self.message)
    }
}

impl std::error::Error for ParseError {}

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Op(char),
}

fn tokenize(s: &str) -> Result<Vec<(usize, Tok)>, ParseError> {
    let chars: Vec<(usize, char)> = s.char_indices().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let (pos, c) = chars[i];
        if c.is_whitespace() {
            i += 1;
        } else if c.is_ascii_digit() || c == '.' {
            let start = i;
            while i < chars.len() && (chars[i].1.is_ascii_digit() || chars[i].1 == '.') {
                i += 1;
            }
            if i < chars.len() && matches!(chars[i].1, 'e' | 'E') {
                let mut j = i + 1;
                if j < chars.len() && matches!(chars[j].1, '+' | '-') {
                    j += 1;
                }
                if j < chars.len() && chars[j].1.is_ascii_digit() {
                    i = j;
                    while i < chars.len() && chars[i].1.is_ascii_digit() {
                        i += 1;
                    }
                }
            }
            let text: String = chars[start..i].iter().map(|c| c.1).collect();
            let v = text
                .parse::<f64>()
                .map_err(|_| ParseError { position: pos, message: format!("bad number '{text}'") })?;
            out.push((pos, Tok::Num(v)));
        } else if c.is_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].1.is_alphanumeric() || chars[i].1 == '_') {
                i += 1;
            }
            out.push((pos, Tok::Ident(chars[start..i].iter().map(|c| c.1).collect())));
        } else if "+-*/^(),|".contains(c) {
            out.push((pos, Tok::Op(c)));
            i += 1;
        } else {
            return Err(ParseError { position: pos, message: format!("unexpected character '{c}'") });
        }
    }
    Ok(out)
}

struct Parser {
    toks: Vec<(usize, Tok)>,
    pos: usize,
    end: usize,
    dim: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|t| &t.1)
    }

    fn here(&self) -> usize {
        self.toks.get(self.pos).map_or(self.end, |t| t.0)
    }

    fn err<T>(&self, msg: impl Into<String>) -> Result<T, ParseError> {
        Err(ParseError { position: self.here(), message: msg.into() })
    }

    fn eat(&mut self, c: char) -> bool {
        if self.peek() == Some(&Tok::Op(c)) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect(&mut self, c: char) -> Result<(), ParseError> {
        if self.eat(c) {
            Ok(())
        } else {
            self.err(format!("expected '{c}'"))
        }
    }

    fn expr(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.term()?;
        loop {
            if self.eat('+') {
                lhs = Expr::Add(Box::new(lhs), Box::new(self.term()?));
            } else if self.eat('-') {
                lhs = Expr::Sub(Box::new(lhs), Box::new(self.term()?));
            } else {
                return Ok(lhs);
            }
        }
    }

    fn term(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.unary()?;
        loop {
            if self.eat('*') {
                lhs = Expr::Mul(Box::new(lhs), Box::new(self.unary()?));
            } else if self.eat('/') {
                lhs = Expr::Div(Box::new(lhs), Box::new(self.unary()?));
            } else {
                return Ok(lhs);
            }
        }
    }

    fn unary(&mut self) -> Result<Expr, ParseError> {
        if self.eat('-') {
            Ok(Expr::Neg(Box::new(self.unary()?)))
        } else if self.eat('+') {
            self.unary()
        } else {
            self.power()
        }
    }

    fn power(&mut self) -> Result<Expr, ParseError> {
        let base = self.atom()?;
        if self.eat('^') {
            Ok(Expr::Pow(Box::new(base), Box::new(self.unary()?)))
        } else {
            Ok(base)
        }
    }

    fn atom(&mut self) -> Result<Expr, ParseError> {
        let Some(tok) = self.peek().cloned() else {
            return self.err("unexpected end of expression");
        };
        match tok {
            Tok::Num(v) => {
                self.pos += 1;
                Ok(Expr::Num(v))
            }
            Tok::Op('(') => {
                self.pos += 1;
                let e = self.expr()?;
                self.expect(')')?;
                Ok(e)
            }
            Tok::Op('|') => {
                self.pos += 1;
                if self.peek() != Some(&Tok::Ident("x".into())) {
                    return self.err("only |x| is supported between bars");
                }
                self.pos += 1;
                self.expect('|')?;
                Ok(Expr::Call(Func::Sqrt, vec![r2(self.dim)]))
            }
            Tok::Ident(name) => {
                self.pos += 1;
                if self.eat('(') {
                    let Some((f, arity)) = Func::lookup(&name) else {
                        self.pos -= 1;
                        return self.err(format!("unknown function '{name}'"));
                    };
                    let mut args = vec![self.expr()?];
                    while self.eat(',') {
                        args.push(self.expr()?);
                    }
                    self.expect(')')?;
                    if args.len() != arity {
                        return self.err(format!("{name} takes {arity} argument(s)"));
                    }
                    return Ok(Expr::Call(f, args));
                }
                match name.as_str() {
                    "pi" => Ok(Expr::Num(std::f64::consts::PI)),
                    "u" => Ok(Expr::U),
                    "r2" => Ok(r2(self.dim)),
                    _ => {
                        if let Some(k) = name.strip_prefix('x').and_then(|d| d.parse::<usize>().ok()) {
                            if k >= 1 && k <= self.dim {
                                return Ok(Expr::Var(k - 1));
                            }
                        }
                        self.pos -= 1;
                        self.err(format!("unknown identifier '{name}'"))
                    }
                }
            }
            Tok::Op(c) => self.err(format!("unexpected '{c}'")),
        }
    }
}

fn r2(dim: usize) -> Expr {
    (0..dim)
        .map(|i| Expr::Mul(Box::new(Expr::Var(i)), Box::new(Expr::Var(i))))
        .reduce(|a, b| Expr::Add(Box::new(a), Box::new(b)))
        .unwrap_or(Expr::Num(0.0))
}

impl Expr {
    /// Parses an expression in the coordinates `x1 … x{dim}`.
    pub fn parse(src: &str, dim: usize) -> Result<Expr, ParseError> {
        let toks = tokenize(src)?;
        let mut p = Parser { toks, pos: 0, end: src.len(), dim };
        let e = p.expr()?;
        if p.pos != p.toks.len() {
            return p.err("trailing input");
        }
        Ok(e)
    }

    pub fn eval(&self, x: &[f64], u: f64) -> f64 {
        use Expr::*;
        match self {
            Num(v) => *v,
            Var(i) => x[*i],
            U => u,
            Neg(a) => -a.eval(x, u),
            Add(a, b) => a.eval(x, u) + b.eval(x, u),
            Sub(a, b) => a.eval(x, u) - b.eval(x, u),
            Mul(a, b) => a.eval(x, u) * b.eval(x, u),
            Div(a, b) => a.eval(x, u) / b.eval(x, u),
            Pow(a, b) => match **b {
                Num(k) if k.fract() == 0.0 && k.abs() < 64.0 => a.eval(x, u).powi(k as i32),
                _ => a.eval(x, u).powf(b.eval(x, u)),
            },
            Call(f, args) => {
                let a = args[0].eval(x, u);
                match f {
                    Func::Sin => a.sin(),
                    Func::Cos => a.cos(),
                    Func::Tan => a.tan(),
                    Func::Atan => a.atan(),
                    Func::Exp => a.exp(),
                    Func::Log => a.ln(),
                    Func::Sqrt => a.sqrt(),
                    Func::Abs => a.abs(),
                    Func::Max => a.max(args[1].eval(x, u)),
                    Func::Min => a.min(args[1].eval(x, u)),
                    Func::Step => {
                        if a >= 0.0 {
                            1.0
                        } else {
                            0.0
                        }
                    }
                }
            }
        }
    }

    pub fn depends_on_u(&self) -> bool {
        use Expr::*;
        match self {
            U => true,
            Num(_) | Var(_) => false,
            Neg(a) => a.depends_on_u(),
            Add(a, b) | Sub(a, b) | Mul(a, b) | Div(a, b) | Pow(a, b) => a.depends_on_u() || b.depends_on_u(),
            Call(_, args) => args.iter().any(Expr::depends_on_u),
        }
    }

    /// Value when the expression involves neither coordinates nor `u`.
    pub fn constant_value(&self) -> Option<f64> {
        use Expr::*;
        let closed = match self {
            Num(_) => true,
            Var(_) | U => false,
            Neg(a) => a.constant_value().is_some(),
            Add(a, b) | Sub(a, b) | Mul(a, b) | Div(a, b) | Pow(a, b) => {
                a.constant_value().is_some() && b.constant_value().is_some()
            }
            Call(_, args) => args.iter().all(|a| a.constant_value().is_some()),
        };
        closed.then(|| self.eval(&[], 0.0))
    }

    /// Symbolic partial derivative with respect to `x_{var+1}`. At the
    /// kinks of `abs`, `max` and `min` the right-hand derivative is taken.
    pub fn diff(&self, var: usize) -> Expr {
        use Expr::*;
        let b = Box::new;
        match self {
            Num(_) | U => Num(0.0),
            Var(i) => Num(if *i == var { 1.0 } else { 0.0 }),
            Neg(a) => neg(a.diff(var)),
            Add(a, c) => add(a.diff(var), c.diff(var)),
            Sub(a, c) => sub(a.diff(var), c.diff(var)),
            Mul(a, c) => add(mul(a.diff(var), (**c).clone()), mul((**a).clone(), c.diff(var))),
            Div(a, c) => div(
                sub(mul(a.diff(var), (**c).clone()), mul((**a).clone(), c.diff(var))),
                mul((**c).clone(), (**c).clone()),
            ),
            Pow(a, c) => match c.constant_value() {
                Some(k) => mul(mul(Num(k), Pow(a.clone(), b(Num(k - 1.0)))), a.diff(var)),
                // d(a^c) = a^c (c' ln a + c a'/a)
                None => mul(
                    self.clone(),
                    add(
                        mul(c.diff(var), Call(Func::Log, vec![(**a).clone()])),
                        div(mul((**c).clone(), a.diff(var)), (**a).clone()),
                    ),
                ),
            },
            Call(f, args) => {
                let a = &args[0];
                let da = a.diff(var);
                let outer = match f {
                    Func::Sin => Call(Func::Cos, vec![a.clone()]),
                    Func::Cos => neg(Call(Func::Sin, vec![a.clone()])),
                    Func::Tan => add(Num(1.0), Pow(b(Call(Func::Tan, vec![a.clone()])), b(Num(2.0)))),
                    Func::Atan => div(Num(1.0), add(Num(1.0), mul(a.clone(), a.clone()))),
                    Func::Exp => Call(Func::Exp, vec![a.clone()]),
                    Func::Log => div(Num(1.0), a.clone()),
                    Func::Sqrt => div(Num(0.5), Call(Func::Sqrt, vec![a.clone()])),
                    Func::Abs => sub(mul(Num(2.0), Call(Func::Step, vec![a.clone()])), Num(1.0)),
                    Func::Step => Num(0.0),
                    Func::Max | Func::Min => {
                        let c = &args[1];
                        let s = if *f == Func::Max { sub(a.clone(), c.clone()) } else { sub(c.clone(), a.clone()) };
                        let w = Call(Func::Step, vec![s]);
                        return add(mul(w.clone(), da), mul(sub(Num(1.0), w), c.diff(var)));
                    }
                };
                mul(outer, da)
            }
        }
    }

    /// Shares the expression as a thread-safe closure of `(x, u)`.
    pub fn into_fn(self) -> Arc<dyn Fn(&[f64], f64) -> f64 + Send + Sync> {
        Arc::new(move |x, u| self.eval(x, u))
    }
}

fn is_num(e: &Expr, v: f64) -> bool {
    matches!(e, Expr::Num(k) if *k == v)
}

fn neg(a: Expr) -> Expr {
    match a {
        Expr::Num(v) => Expr::Num(-v),
        a => Expr::Neg(Box::new(a)),
    }
}

fn add(a: Expr, b: Expr) -> Expr {
    match (&a, &b) {
        (Expr::Num(x), Expr::Num(y)) => Expr::Num(x + y),
        _ if is_num(&a, 0.0) => b,
        _ if is_num(&b, 0.0) => a,
        _ => Expr::Add(Box::new(a), Box::new(b)),
    }
}

fn sub(a: Expr, b: Expr) -> Expr {
    match (&a, &b) {
        (Expr::Num(x), Expr::Num(y)) => Expr::Num(x - y),
        _ if is_num(&b, 0.0) => a,
        _ if is_num(&a, 0.0) => neg(b),
        _ => Expr::Sub(Box::new(a), Box::new(b)),
    }
}

fn mul(a: Expr, b: Expr) -> Expr {
    match (&a, &b) {
        (Expr::Num(x), Expr::Num(y)) => Expr::Num(x * y),
        _ if is_num(&a, 0.0) || is_num(&b, 0.0) => Expr::Num(0.0),
        _ if is_num(&a, 1.0) => b,
        _ if is_num(&b, 1.0) => a,
        _ => Expr::Mul(Box::new(a), Box::new(b)),
    }
}

fn div(a: Expr, b: Expr) -> Expr {
    if is_num(&a, 0.0) {
        Expr::Num(0.0)
    } else if is_num(&b, 1.0) {
        a
    } else {
        Expr::Div(Box::new(a), Box::new(b))
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        use Expr::*;
        match self {
            Num(v) => write!(f, "{v}"),
            Var(i) => write!(f, "x{}", i + 1),
            U => f.write_str("u"),
            Neg(a) => write!(f, "(-{a})"),
            Add(a, b) => write!(f, "({a} + {b})"),
            Sub(a, b) => write!(f, "({a} - {b})"),
            Mul(a, b) => write!(f, "({a} * {b})"),
            Div(a, b) => write!(f, "({a} / {b})"),
            Pow(a, b) => write!(f, "({a} ^ {b})"),
            Call(func, args) => {
                write!(f, "{}(", func.name())?;
                for (k, a) in args.iter().enumerate() {
                    if k > 0 {
                        f.write_str(", ")?;
                    }
                    write!(f, "{a}")?;
                }
                f.write_str(")")
            }
        }
    }
}
