//! A small scalar-field expression language.
//!
//! Expressions are trees over the ambient variables `x, y, z` or the chart
//! variables `u, v`, real constants (plus `pi`), the binary operators
//! `+ - * /`, integer powers `^`, unary minus, and the functions `exp`,
//! `ln`, `sin`, `cos`, `sqrt`. Exponents are restricted to integer literals;
//! general powers must be spelled `exp(a*ln(b))` so that domain failures are
//! explicit.
//!
//! Evaluation is generic over [`Scalar`], so the same tree evaluates on
//! plain numbers, on jets (exact derivatives), and on nested jets (ambient
//! derivatives carried as chart jets).

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use crate::error::ExprError;
use crate::jet::{Jet, JetShape, Scalar};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Var {
    X,
    Y,
    Z,
    U,
    V,
}

impl Var {
    pub fn name(self) -> &'static str {
        match self {
            Var::X => "x",
            Var::Y => "y",
            Var::Z => "z",
            Var::U => "u",
            Var::V => "v",
        }
    }

    /// Index of the variable within its space, or `None` in the wrong space.
    fn index_in(self, space: VarSpace) -> Option<usize> {
        match (space, self) {
            (VarSpace::Ambient, Var::X) => Some(0),
            (VarSpace::Ambient, Var::Y) => Some(1),
            (VarSpace::Ambient, Var::Z) => Some(2),
            (VarSpace::Chart, Var::U) => Some(0),
            (VarSpace::Chart, Var::V) => Some(1),
            _ => None,
        }
    }
}

/// Which variable set an expression is evaluated against.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VarSpace {
    /// `(x, y, z)`
    Ambient,
    /// `(u, v)`
    Chart,
}

impl VarSpace {
    pub fn num_vars(self) -> usize {
        match self {
            VarSpace::Ambient => 3,
            VarSpace::Chart => 2,
        }
    }

    fn name(self) -> &'static str {
        match self {
            VarSpace::Ambient => "ambient (x, y, z)",
            VarSpace::Chart => "chart (u, v)",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Exp,
    Ln,
    Sin,
    Cos,
    Sqrt,
}

impl Func {
    fn name(self) -> &'static str {
        match self {
            Func::Exp => "exp",
            Func::Ln => "ln",
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Sqrt => "sqrt",
        }
    }
}

/// Expression tree for a scalar field.
#[derive(Debug, Clone, PartialEq)]
pub enum FieldExpr {
    Const(f64),
    Var(Var),
    Neg(Box<FieldExpr>),
    Binary(BinOp, Box<FieldExpr>, Box<FieldExpr>),
    /// Integer power of the base.
    Pow(Box<FieldExpr>, i32),
    Func(Func, Box<FieldExpr>),
}

impl FieldExpr {
    pub fn constant(v: f64) -> Self {
        FieldExpr::Const(v)
    }

    pub fn var(v: Var) -> Self {
        FieldExpr::Var(v)
    }

    pub fn func(f: Func, arg: FieldExpr) -> Self {
        FieldExpr::Func(f, Box::new(arg))
    }

    pub fn binary(op: BinOp, lhs: FieldExpr, rhs: FieldExpr) -> Self {
        FieldExpr::Binary(op, Box::new(lhs), Box::new(rhs))
    }

    /// All variables referenced by the tree.
    pub fn variables(&self) -> Vec<Var> {
        let mut out = Vec::new();
        self.walk(&mut |e| {
            if let FieldExpr::Var(v) = e {
                if !out.contains(v) {
                    out.push(*v);
                }
            }
        });
        out
    }

    fn walk(&self, f: &mut impl FnMut(&FieldExpr)) {
        f(self);
        match self {
            FieldExpr::Neg(a) | FieldExpr::Pow(a, _) | FieldExpr::Func(_, a) => a.walk(f),
            FieldExpr::Binary(_, a, b) => {
                a.walk(f);
                b.walk(f);
            }
            _ => {}
        }
    }

    /// Check that every variable belongs to `space`.
    pub fn check_space(&self, space: VarSpace) -> Result<(), ExprError> {
        for v in self.variables() {
            if v.index_in(space).is_none() {
                return Err(ExprError::VariableContext {
                    name: v.name(),
                    space: space.name(),
                });
            }
        }
        Ok(())
    }

    /// Evaluate on scalar values; `vars` is indexed by the space's variable
    /// order and must supply every variable of the space.
    pub fn eval<S: Scalar>(&self, space: VarSpace, vars: &[S]) -> Result<S, ExprError> {
        assert_eq!(vars.len(), space.num_vars(), "wrong variable count");
        let out = self.eval_inner(space, vars)?;
        Ok(out)
    }

    fn eval_inner<S: Scalar>(&self, space: VarSpace, vars: &[S]) -> Result<S, ExprError> {
        let guard = |op: &'static str, v: S| -> Result<S, ExprError> {
            if v.all_finite() {
                Ok(v)
            } else {
                Err(ExprError::NonFinite { op })
            }
        };
        match self {
            FieldExpr::Const(c) => Ok(vars[0].like(*c)),
            FieldExpr::Var(v) => match v.index_in(space) {
                Some(i) => Ok(vars[i].clone()),
                None => Err(ExprError::VariableContext {
                    name: v.name(),
                    space: space.name(),
                }),
            },
            FieldExpr::Neg(a) => Ok(-a.eval_inner(space, vars)?),
            FieldExpr::Binary(op, a, b) => {
                let a = a.eval_inner(space, vars)?;
                let b = b.eval_inner(space, vars)?;
                match op {
                    BinOp::Add => guard("+", a + b),
                    BinOp::Sub => guard("-", a - b),
                    BinOp::Mul => guard("*", a * b),
                    BinOp::Div => guard("/", a.try_div(&b)?),
                }
            }
            FieldExpr::Pow(a, n) => {
                let a = a.eval_inner(space, vars)?;
                guard("^", a.try_powi(*n)?)
            }
            FieldExpr::Func(f, a) => {
                let a = a.eval_inner(space, vars)?;
                match f {
                    Func::Exp => guard("exp", a.exp()),
                    Func::Ln => guard("ln", a.try_ln()?),
                    Func::Sin => guard("sin", a.sin()),
                    Func::Cos => guard("cos", a.cos()),
                    Func::Sqrt => guard("sqrt", a.try_sqrt()?),
                }
            }
        }
    }

    /// Evaluate on plain numbers.
    pub fn eval_f64(&self, space: VarSpace, point: &[f64]) -> Result<f64, ExprError> {
        self.eval(space, point)
    }
}

/// Evaluate `expr` as a jet at `point`, seeding each variable.
///
/// The coefficient of multi-index `alpha` in the result equals the Taylor
/// coefficient (partial derivative over `alpha!`) of the expression at
/// `point`, exact to roundoff.
pub fn jet_eval(
    expr: &FieldExpr,
    point: &[f64],
    num_vars: usize,
    order: usize,
) -> Result<Jet, ExprError> {
    assert_eq!(point.len(), num_vars, "point dimension must equal num_vars");
    let space = match num_vars {
        2 => VarSpace::Chart,
        3 => VarSpace::Ambient,
        n => panic!("unsupported num_vars {n}"),
    };
    expr.check_space(space)?;
    let shape = JetShape::get(num_vars, order);
    let seeds: Vec<Jet> = (0..num_vars)
        .map(|i| Jet::variable(shape.clone(), i, point[i]))
        .collect();
    expr.eval(space, &seeds)
}

/// Evaluate an ambient expression on chart-jet coordinates, carrying every
/// ambient partial up to `ambient_order` as an exact chart jet.
///
/// The returned nested jet's coefficient at ambient multi-index `beta` is the
/// chart jet of `(d^beta expr) / beta!` composed with the given coordinates.
pub fn nested_eval(
    expr: &FieldExpr,
    coords: &[Jet; 3],
    ambient_order: usize,
) -> Result<Jet<Jet>, ExprError> {
    expr.check_space(VarSpace::Ambient)?;
    let shape = JetShape::get(3, ambient_order);
    let seeds: [Jet<Jet>; 3] =
        std::array::from_fn(|i| Jet::variable(shape.clone(), i, coords[i].clone()));
    expr.eval(VarSpace::Ambient, &seeds)
}

impl fmt::Display for FieldExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.fmt_prec(f, 0)
    }
}

impl FieldExpr {
    fn precedence(&self) -> u8 {
        match self {
            FieldExpr::Binary(BinOp::Add | BinOp::Sub, ..) => 1,
            FieldExpr::Binary(BinOp::Mul | BinOp::Div, ..) => 2,
            FieldExpr::Neg(..) => 3,
            FieldExpr::Pow(..) => 4,
            _ => 5,
        }
    }

    fn fmt_prec(&self, f: &mut fmt::Formatter<'_>, parent: u8) -> fmt::Result {
        let prec = self.precedence();
        let parens = prec < parent;
        if parens {
            write!(f, "(")?;
        }
        match self {
            FieldExpr::Const(c) => {
                if *c < 0.0 {
                    write!(f, "({c})")?;
                } else {
                    write!(f, "{c}")?;
                }
            }
            FieldExpr::Var(v) => write!(f, "{}", v.name())?,
            FieldExpr::Neg(a) => {
                write!(f, "-")?;
                a.fmt_prec(f, prec)?;
            }
            FieldExpr::Binary(op, a, b) => {
                let sym = match op {
                    BinOp::Add => "+",
                    BinOp::Sub => "-",
                    BinOp::Mul => "*",
                    BinOp::Div => "/",
                };
                a.fmt_prec(f, prec)?;
                write!(f, " {sym} ")?;
                // left associativity: right child needs strictly higher binding
                b.fmt_prec(f, prec + 1)?;
            }
            FieldExpr::Pow(a, n) => {
                a.fmt_prec(f, prec + 1)?;
                if *n < 0 {
                    write!(f, "^({n})")?;
                } else {
                    write!(f, "^{n}")?;
                }
            }
            FieldExpr::Func(func, a) => {
                write!(f, "{}(", func.name())?;
                a.fmt_prec(f, 0)?;
                write!(f, ")")?;
            }
        }
        if parens {
            write!(f, ")")?;
        }
        Ok(())
    }
}

impl FromStr for FieldExpr {
    type Err = ExprError;
    fn from_str(s: &str) -> Result<Self, ExprError> {
        parse_field(s)
    }
}

/// Parse an expression with standard precedence (`^` > unary minus > `* /`
/// > `+ -`) and left associativity within each binary level.
pub fn parse_field(text: &str) -> Result<FieldExpr, ExprError> {
    let tokens = lex(text)?;
    let mut parser = Parser { tokens, pos: 0 };
    let expr = parser.expression()?;
    match parser.peek() {
        Token::End => Ok(expr),
        tok => Err(ExprError::Syntax {
            offset: parser.offset(),
            message: format!("unexpected {}", tok.describe()),
        }),
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Token {
    Num(f64),
    Ident(String),
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    LParen,
    RParen,
    End,
}

impl Token {
    fn describe(&self) -> String {
        match self {
            Token::Num(v) => format!("number `{v}`"),
            Token::Ident(s) => format!("identifier `{s}`"),
            Token::Plus => "`+`".into(),
            Token::Minus => "`-`".into(),
            Token::Star => "`*`".into(),
            Token::Slash => "`/`".into(),
            Token::Caret => "`^`".into(),
            Token::LParen => "`(`".into(),
            Token::RParen => "`)`".into(),
            Token::End => "end of input".into(),
        }
    }
}

fn lex(text: &str) -> Result<Vec<(Token, usize)>, ExprError> {
    let bytes = text.as_bytes();
    let mut tokens = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i] as char;
        match c {
            ' ' | '\t' | '\n' | '\r' => i += 1,
            '+' => {
                tokens.push((Token::Plus, i));
                i += 1;
            }
            '-' => {
                tokens.push((Token::Minus, i));
                i += 1;
            }
            '*' => {
                tokens.push((Token::Star, i));
                i += 1;
            }
            '/' => {
                tokens.push((Token::Slash, i));
                i += 1;
            }
            '^' => {
                tokens.push((Token::Caret, i));
                i += 1;
            }
            '(' => {
                tokens.push((Token::LParen, i));
                i += 1;
            }
            ')' => {
                tokens.push((Token::RParen, i));
                i += 1;
            }
            '0'..='9' | '.' => {
                let start = i;
                while i < bytes.len() && matches!(bytes[i] as char, '0'..='9' | '.') {
                    i += 1;
                }
                // exponent suffix like 1e-3
                if i < bytes.len() && matches!(bytes[i] as char, 'e' | 'E') {
                    let mut j = i + 1;
                    if j < bytes.len() && matches!(bytes[j] as char, '+' | '-') {
                        j += 1;
                    }
                    if j < bytes.len() && (bytes[j] as char).is_ascii_digit() {
                        i = j;
                        while i < bytes.len() && (bytes[i] as char).is_ascii_digit() {
                            i += 1;
                        }
                    }
                }
                let lit = &text[start..i];
                let v: f64 = lit.parse().map_err(|_| ExprError::Syntax {
                    offset: start,
                    message: format!("malformed number `{lit}`"),
                })?;
                tokens.push((Token::Num(v), start));
            }
            'a'..='z' | 'A'..='Z' | '_' => {
                let start = i;
                while i < bytes.len()
                    && matches!(bytes[i] as char, 'a'..='z' | 'A'..='Z' | '0'..='9' | '_')
                {
                    i += 1;
                }
                tokens.push((Token::Ident(text[start..i].to_string()), start));
            }
            other => {
                return Err(ExprError::Syntax {
                    offset: i,
                    message: format!("unexpected character `{other}`"),
                });
            }
        }
    }
    tokens.push((Token::End, text.len()));
    Ok(tokens)
}

struct Parser {
    tokens: Vec<(Token, usize)>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> &Token {
        &self.tokens[self.pos].0
    }

    fn offset(&self) -> usize {
        self.tokens[self.pos].1
    }

    fn bump(&mut self) -> Token {
        let t = self.tokens[self.pos].0.clone();
        if self.pos + 1 < self.tokens.len() {
            self.pos += 1;
        }
        t
    }

    fn expect(&mut self, tok: Token, what: &str) -> Result<(), ExprError> {
        if *self.peek() == tok {
            self.bump();
            Ok(())
        } else {
            Err(ExprError::Syntax {
                offset: self.offset(),
                message: format!("expected {what}, found {}", self.peek().describe()),
            })
        }
    }

    fn expression(&mut self) -> Result<FieldExpr, ExprError> {
        let mut lhs = self.term()?;
        loop {
            let op = match self.peek() {
                Token::Plus => BinOp::Add,
                Token::Minus => BinOp::Sub,
                _ => break,
            };
            self.bump();
            let rhs = self.term()?;
            lhs = FieldExpr::binary(op, lhs, rhs);
        }
        Ok(lhs)
    }

    fn term(&mut self) -> Result<FieldExpr, ExprError> {
        let mut lhs = self.unary()?;
        loop {
            let op = match self.peek() {
                Token::Star => BinOp::Mul,
                Token::Slash => BinOp::Div,
                _ => break,
            };
            self.bump();
            let rhs = self.unary()?;
            lhs = FieldExpr::binary(op, lhs, rhs);
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<FieldExpr, ExprError> {
        if *self.peek() == Token::Minus {
            self.bump();
            let inner = self.unary()?;
            return Ok(FieldExpr::Neg(Box::new(inner)));
        }
        self.power()
    }

    fn power(&mut self) -> Result<FieldExpr, ExprError> {
        let mut base = self.atom()?;
        while *self.peek() == Token::Caret {
            self.bump();
            let n = self.integer_exponent()?;
            base = FieldExpr::Pow(Box::new(base), n);
        }
        Ok(base)
    }

    fn integer_exponent(&mut self) -> Result<i32, ExprError> {
        let parens = *self.peek() == Token::LParen;
        if parens {
            self.bump();
        }
        let mut sign = 1i32;
        if *self.peek() == Token::Minus {
            self.bump();
            sign = -1;
        }
        let offset = self.offset();
        let n = match self.bump() {
            Token::Num(v) if v.fract() == 0.0 && v.abs() <= i32::MAX as f64 => v as i32,
            tok => {
                return Err(ExprError::Syntax {
                    offset,
                    message: format!(
                        "exponent must be an integer literal, found {}",
                        tok.describe()
                    ),
                });
            }
        };
        if parens {
            self.expect(Token::RParen, "`)` after exponent")?;
        }
        Ok(sign * n)
    }

    fn atom(&mut self) -> Result<FieldExpr, ExprError> {
        let offset = self.offset();
        match self.bump() {
            Token::Num(v) => Ok(FieldExpr::Const(v)),
            Token::LParen => {
                let inner = self.expression()?;
                self.expect(Token::RParen, "`)`")?;
                Ok(inner)
            }
            Token::Ident(name) => match name.as_str() {
                "x" => Ok(FieldExpr::Var(Var::X)),
                "y" => Ok(FieldExpr::Var(Var::Y)),
                "z" => Ok(FieldExpr::Var(Var::Z)),
                "u" => Ok(FieldExpr::Var(Var::U)),
                "v" => Ok(FieldExpr::Var(Var::V)),
                "pi" => Ok(FieldExpr::Const(std::f64::consts::PI)),
                "exp" | "ln" | "sin" | "cos" | "sqrt" => {
                    let func = match name.as_str() {
                        "exp" => Func::Exp,
                        "ln" => Func::Ln,
                        "sin" => Func::Sin,
                        "cos" => Func::Cos,
                        _ => Func::Sqrt,
                    };
                    self.expect(Token::LParen, "`(` after function name")?;
                    let arg = self.expression()?;
                    self.expect(Token::RParen, "`)`")?;
                    Ok(FieldExpr::Func(func, Box::new(arg)))
                }
                _ => Err(ExprError::UnknownIdentifier { name, offset }),
            },
            tok => Err(ExprError::Syntax {
                offset,
                message: format!("expected a value, found {}", tok.describe()),
            }),
        }
    }
}

/// Convenience: parse and panic on failure, for statically known expressions.
pub fn parse_expect(text: &str) -> FieldExpr {
    parse_field(text).unwrap_or_else(|e| panic!("failed to parse `{text}`: {e}"))
}

/// Shared, parsed immersion component set.
pub type ExprTriple = Arc<[FieldExpr; 3]>;

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn precedence_and_value() {
        let e = parse_field("1+2*3").unwrap();
        assert_relative_eq!(e.eval_f64(VarSpace::Chart, &[0.0, 0.0]).unwrap(), 7.0);
        let e = parse_field("2*x^2 - -3").unwrap();
        assert_relative_eq!(e.eval_f64(VarSpace::Ambient, &[2.0, 0.0, 0.0]).unwrap(), 11.0);
        // unary minus binds looser than ^
        let e = parse_field("-x^2").unwrap();
        assert_relative_eq!(e.eval_f64(VarSpace::Ambient, &[3.0, 0.0, 0.0]).unwrap(), -9.0);
        // left associativity of same-precedence binaries
        let e = parse_field("8/4/2").unwrap();
        assert_relative_eq!(e.eval_f64(VarSpace::Chart, &[0.0, 0.0]).unwrap(), 1.0);
    }

    #[test]
    fn syntax_error_offsets() {
        match parse_field("sin(") {
            Err(ExprError::Syntax { offset, .. }) => assert_eq!(offset, 4),
            other => panic!("expected syntax error, got {other:?}"),
        }
        match parse_field("1 + foo") {
            Err(ExprError::UnknownIdentifier { name, offset }) => {
                assert_eq!(name, "foo");
                assert_eq!(offset, 4);
            }
            other => panic!("expected unknown identifier, got {other:?}"),
        }
        assert!(parse_field("x ^ y").is_err());
    }

    #[test]
    fn evaluation_examples() {
        let e = parse_field("2*ln(1+0.3*x)").unwrap();
        assert_relative_eq!(e.eval_f64(VarSpace::Ambient, &[0.0; 3]).unwrap(), 0.0);
        let j = jet_eval(&e, &[0.0, 0.0, 0.0], 3, 1).unwrap();
        assert_relative_eq!(j.value(), 0.0, epsilon = 1e-15);
        assert_relative_eq!(j.partial(&[1, 0, 0]), 0.6, epsilon = 1e-14);
    }

    #[test]
    fn jet_eval_exp_example() {
        let e = parse_field("exp(x)").unwrap();
        let j = jet_eval(&e, &[0.0, 0.0, 0.0], 3, 2).unwrap();
        assert_relative_eq!(j.taylor(&[0, 0, 0]), 1.0);
        assert_relative_eq!(j.taylor(&[1, 0, 0]), 1.0);
        assert_relative_eq!(j.taylor(&[2, 0, 0]), 0.5);
    }

    #[test]
    fn jet_eval_polynomial_gradient() {
        let e = parse_field("x*x + y").unwrap();
        let j = jet_eval(&e, &[2.0, 3.0, 0.0], 3, 1).unwrap();
        assert_relative_eq!(j.value(), 7.0);
        assert_relative_eq!(j.partial(&[1, 0, 0]), 4.0);
        assert_relative_eq!(j.partial(&[0, 1, 0]), 1.0);
        assert_relative_eq!(j.partial(&[0, 0, 1]), 0.0);
    }

    #[test]
    fn wrong_space_is_rejected() {
        let e = parse_field("u + x").unwrap();
        assert!(e.eval_f64(VarSpace::Chart, &[0.0, 0.0]).is_err());
        assert!(e.check_space(VarSpace::Ambient).is_err());
    }

    #[test]
    fn division_by_zero_field_errors() {
        let e = parse_field("1/(x - 1)").unwrap();
        assert!(e.eval_f64(VarSpace::Ambient, &[1.0, 0.0, 0.0]).is_err());
        assert!(e.eval_f64(VarSpace::Ambient, &[2.0, 0.0, 0.0]).is_ok());
    }

    #[test]
    fn display_round_trips_structurally() {
        for text in [
            "1 + 2*3",
            "(1+2)*3",
            "-x^2 + sin(u*0 + x)",
            "2*ln(1+0.3*x)",
            "x/(y - 4)/z",
            "x - (y - z)",
            "(x + y)^3",
            "x^(-2)",
            "sqrt(x^2 + y^2 + 1)",
        ] {
            let e = parse_field(text).unwrap();
            let printed = e.to_string();
            let reparsed = parse_field(&printed)
                .unwrap_or_else(|err| panic!("reparse of `{printed}`: {err}"));
            assert_eq!(e, reparsed, "round trip of `{text}` via `{printed}`");
        }
    }
}
