//! Arithmetic expressions over named variables.
//!
//! Grammar, loosest binding first: comparisons (`< <= > >= == !=`, yielding
//! 1 or 0), `+ -`, `* /`, unary minus, `^` (right associative), then
//! numbers, variables, parentheses and calls to `expit exp log sqrt abs min
//! max`.

use alloc::boxed::Box;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::math;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
    Lt,
    Le,
    Gt,
    Ge,
    Eq,
    Ne,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Func {
    Expit,
    Exp,
    Log,
    Sqrt,
    Abs,
    Min,
    Max,
}

impl Func {
    fn lookup(name: &str) -> Option<(Func, usize)> {
        Some(match name {
            "expit" => (Func::Expit, 1),
            "exp" => (Func::Exp, 1),
            "log" => (Func::Log, 1),
            "sqrt" => (Func::Sqrt, 1),
            "abs" => (Func::Abs, 1),
            "min" => (Func::Min, 2),
            "max" => (Func::Max, 2),
            _ => return None,
        })
    }
}

/// A compiled expression; variables are resolved to slot indices.
#[derive(Debug, Clone, PartialEq)]
pub struct Expr(Node);

#[derive(Debug, Clone, PartialEq)]
enum Node {
    Const(f64),
    Var(usize),
    Neg(Box<Node>),
    Bin(BinOp, Box<Node>, Box<Node>),
    Call(Func, Vec<Node>),
}

impl Expr {
    /// Parses `source`, resolving each identifier through `resolve`.
    pub fn parse(source: &str, resolve: &dyn Fn(&str) -> Option<usize>) -> Result<Expr> {
        let tokens = tokenize(source)?;
        let mut p = Parser { tokens, pos: 0, resolve, source };
        let e = p.comparison()?;
        if p.pos != p.tokens.len() {
            return Err(p.error("unexpected trailing input"));
        }
        Ok(Expr(e))
    }

    /// Slot indices read by the expression.
    pub fn variables(&self) -> Vec<usize> {
        let mut out = Vec::new();
        self.0.variables(&mut out);
        out
    }

    pub fn eval(&self, vars: &[f64]) -> f64 {
        self.0.eval(vars)
    }
}

impl Node {
    fn variables(&self, out: &mut Vec<usize>) {
        match self {
            Node::Const(_) => {}
            Node::Var(i) => out.push(*i),
            Node::Neg(e) => e.variables(out),
            Node::Bin(_, a, b) => {
                a.variables(out);
                b.variables(out);
            }
            Node::Call(_, args) => args.iter().for_each(|a| a.variables(out)),
        }
    }

    fn eval(&self, vars: &[f64]) -> f64 {
        match self {
            Node::Const(c) => *c,
            Node::Var(i) => vars[*i],
            Node::Neg(e) => -e.eval(vars),
            Node::Bin(op, a, b) => {
                let (x, y) = (a.eval(vars), b.eval(vars));
                let truth = |c: bool| if c { 1.0 } else { 0.0 };
                match op {
                    BinOp::Add => x + y,
                    BinOp::Sub => x - y,
                    BinOp::Mul => x * y,
                    BinOp::Div => x / y,
                    BinOp::Pow => math::pow(x, y),
                    BinOp::Lt => truth(x < y),
                    BinOp::Le => truth(x <= y),
                    BinOp::Gt => truth(x > y),
                    BinOp::Ge => truth(x >= y),
                    BinOp::Eq => truth(x == y),
                    BinOp::Ne => truth(x != y),
                }
            }
            Node::Call(f, args) => {
                let x = args[0].eval(vars);
                match f {
                    Func::Expit => math::expit(x),
                    Func::Exp => math::exp(x),
                    Func::Log => math::ln(x),
                    Func::Sqrt => math::sqrt(x),
                    Func::Abs => math::abs(x),
                    Func::Min => x.min(args[1].eval(vars)),
                    Func::Max => x.max(args[1].eval(vars)),
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Token {
    Num(f64),
    Ident(String),
    Op(&'static str),
    LParen,
    RParen,
    Comma,
}

fn tokenize(s: &str) -> Result<Vec<Token>> {
    let bytes = s.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i] as char;
        if c.is_ascii_whitespace() {
            i += 1;
        } else if c.is_ascii_digit() || c == '.' {
            let start = i;
            while i < bytes.len() && (bytes[i].is_ascii_digit() || bytes[i] == b'.') {
                i += 1;
            }
            if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
                let save = i;
                i += 1;
                if i < bytes.len() && (bytes[i] == b'+' || bytes[i] == b'-') {
                    i += 1;
                }
                if i < bytes.len() && bytes[i].is_ascii_digit() {
                    while i < bytes.len() && bytes[i].is_ascii_digit() {
                        i += 1;
                    }
                } else {
                    i = save;
                }
            }
            let text = &s[start..i];
            let v: f64 = text
                .parse()
                .map_err(|_| Error::Expression(format!("bad number '{text}' in '{s}'")))?;
            out.push(Token::Num(v));
        } else if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                i += 1;
            }
            out.push(Token::Ident(s[start..i].into()));
        } else {
            let two = s.get(i..i + 2).unwrap_or("");
            let op: &'static str = match two {
                "<=" => "<=",
                ">=" => ">=",
                "==" => "==",
                "!=" => "!=",
                _ => match c {
                    '+' => "+",
                    '-' => "-",
                    '*' => "*",
                    '/' => "/",
                    '^' => "^",
                    '<' => "<",
                    '>' => ">",
                    '(' | ')' | ',' => "",
                    _ => return Err(Error::Expression(format!("unexpected character '{c}' in '{s}'"))),
                },
            };
            match (op, c) {
                ("", '(') => out.push(Token::LParen),
                ("", ')') => out.push(Token::RParen),
                ("", _) => out.push(Token::Comma),
                _ => out.push(Token::Op(op)),
            }
            i += op.len().max(1);
        }
    }
    Ok(out)
}

struct Parser<'a> {
    tokens: Vec<Token>,
    pos: usize,
    resolve: &'a dyn Fn(&str) -> Option<usize>,
    source: &'a str,
}

impl Parser<'_> {
    fn error(&self, msg: &str) -> Error {
        Error::Expression(format!("{msg} at token {} in '{}'", self.pos + 1, self.source))
    }

    fn peek_op(&self) -> Option<&'static str> {
        match self.tokens.get(self.pos) {
            Some(Token::Op(o)) => Some(o),
            _ => None,
        }
    }

    fn comparison(&mut self) -> Result<Node> {
        let lhs = self.additive()?;
        let op = match self.peek_op() {
            Some("<") => BinOp::Lt,
            Some("<=") => BinOp::Le,
            Some(">") => BinOp::Gt,
            Some(">=") => BinOp::Ge,
            Some("==") => BinOp::Eq,
            Some("!=") => BinOp::Ne,
            _ => return Ok(lhs),
        };
        self.pos += 1;
        let rhs = self.additive()?;
        Ok(Node::Bin(op, Box::new(lhs), Box::new(rhs)))
    }

    fn additive(&mut self) -> Result<Node> {
        let mut lhs = self.multiplicative()?;
        loop {
            let op = match self.peek_op() {
                Some("+") => BinOp::Add,
                Some("-") => BinOp::Sub,
                _ => return Ok(lhs),
            };
            self.pos += 1;
            let rhs = self.multiplicative()?;
            lhs = Node::Bin(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn multiplicative(&mut self) -> Result<Node> {
        let mut lhs = self.unary()?;
        loop {
            let op = match self.peek_op() {
                Some("*") => BinOp::Mul,
                Some("/") => BinOp::Div,
                _ => return Ok(lhs),
            };
            self.pos += 1;
            let rhs = self.unary()?;
            lhs = Node::Bin(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn unary(&mut self) -> Result<Node> {
        match self.peek_op() {
            Some("-") => {
                self.pos += 1;
                Ok(Node::Neg(Box::new(self.unary()?)))
            }
            Some("+") => {
                self.pos += 1;
                self.unary()
            }
            _ => self.power(),
        }
    }

    fn power(&mut self) -> Result<Node> {
        let base = self.atom()?;
        if self.peek_op() == Some("^") {
            self.pos += 1;
            let exponent = self.unary()?;
            return Ok(Node::Bin(BinOp::Pow, Box::new(base), Box::new(exponent)));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Node> {
        let tok = self.tokens.get(self.pos).cloned().ok_or_else(|| self.error("unexpected end of input"))?;
        self.pos += 1;
        match tok {
            Token::Num(v) => Ok(Node::Const(v)),
            Token::LParen => {
                let e = self.comparison()?;
                self.expect_rparen()?;
                Ok(e)
            }
            Token::Ident(name) => {
                if self.tokens.get(self.pos) == Some(&Token::LParen) {
                    let (f, arity) = Func::lookup(&name)
                        .ok_or_else(|| Error::Expression(format!("unknown function '{name}' in '{}'", self.source)))?;
                    self.pos += 1;
                    let mut args = Vec::new();
                    loop {
                        args.push(self.comparison()?);
                        if self.tokens.get(self.pos) == Some(&Token::Comma) {
                            self.pos += 1;
                        } else {
                            break;
                        }
                    }
                    self.expect_rparen()?;
                    if args.len() != arity {
                        return Err(Error::Expression(format!(
                            "{name} takes {arity} argument(s), got {} in '{}'",
                            args.len(),
                            self.source
                        )));
                    }
                    Ok(Node::Call(f, args))
                } else {
                    (self.resolve)(&name)
                        .map(Node::Var)
                        .ok_or_else(|| Error::Expression(format!("unknown variable '{name}' in '{}'", self.source)))
                }
            }
            _ => Err(self.error("expected a value")),
        }
    }

    fn expect_rparen(&mut self) -> Result<()> {
        if self.tokens.get(self.pos) == Some(&Token::RParen) {
            self.pos += 1;
            Ok(())
        } else {
            Err(self.error("expected ')'"))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn eval(src: &str, vars: &[f64]) -> f64 {
        let names = ["x", "y"];
        Expr::parse(src, &|n| names.iter().position(|&m| m == n)).unwrap().eval(vars)
    }

    #[test]
    fn precedence_and_associativity() {
        assert_eq!(eval("1 + 2 * 3", &[]), 7.0);
        assert_eq!(eval("(1 + 2) * 3", &[]), 9.0);
        assert_eq!(eval("-2 ^ 2", &[]), -4.0);
        assert_eq!(eval("2 ^ 3 ^ 2", &[]), 512.0);
        assert_eq!(eval("8 / 4 / 2", &[]), 1.0);
        assert_eq!(eval("x - y - 1", &[5.0, 2.0]), 2.0);
        assert_eq!(eval("1.5e1 + 1", &[]), 16.0);
    }

    #[test]
    fn functions_and_comparisons() {
        assert_eq!(eval("expit(0)", &[]), 0.5);
        assert_eq!(eval("max(x, y) + min(x, y)", &[1.0, 4.0]), 5.0);
        assert_eq!(eval("x >= 1", &[1.0]), 1.0);
        assert_eq!(eval("(x == 2) * 3", &[1.0]), 0.0);
        assert!((eval("log(exp(2))", &[]) - 2.0).abs() < 1e-15);
    }

    #[test]
    fn errors_are_reported() {
        let none = |_: &str| None;
        assert!(Expr::parse("z + 1", &none).is_err());
        assert!(Expr::parse("1 +", &none).is_err());
        assert!(Expr::parse("foo(1)", &none).is_err());
        assert!(Expr::parse("min(1)", &none).is_err());
        assert!(Expr::parse("(1", &none).is_err());
        assert!(Expr::parse("1 $ 2", &none).is_err());
    }
}
