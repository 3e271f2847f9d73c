//! Infix parser for the expression mini-language.
//!
//! Grammar (precedence low to high):
//! ```text
//! expr   := term (('+' | '-') term)*
//! term   := unary (('*' | '/') unary)*
//! unary  := '-' unary | power
//! power  := atom ('^' unary)?          // right-associative, constant exponent
//! atom   := NUMBER | IDENT | IDENT '(' expr ')' | '(' expr ')'
//! ```
//! Function names: `sin cos tan exp log sqrt sinh cosh tanh`. Any other
//! identifier is a coordinate or parameter symbol. The exponent of `^` must
//! evaluate to a constant (no symbols).

use crate::expr::{Expr, UnaryFn};
use crate::Error;

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    LParen,
    RParen,
}

#[derive(Clone, Debug)]
struct Spanned {
    tok: Tok,
    line: usize,
    col: usize,
}

fn err(line: usize, col: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        col,
        message: message.into(),
    }
}

fn tokenize(src: &str) -> Result<Vec<Spanned>, Error> {
    let mut out = Vec::new();
    let mut line = 1usize;
    let mut col = 1usize;
    let mut chars = src.chars().peekable();
    while let Some(&c) = chars.peek() {
        let (tline, tcol) = (line, col);
        let mut bump = |chars: &mut std::iter::Peekable<std::str::Chars>| {
            let c = chars.next().unwrap();
            if c == '\n' {
                line += 1;
                col = 1;
            } else {
                col += 1;
            }
            c
        };
        if c.is_whitespace() {
            bump(&mut chars);
            continue;
        }
        let tok = match c {
            '+' => {
                bump(&mut chars);
                Tok::Plus
            }
            '-' => {
                bump(&mut chars);
                Tok::Minus
            }
            '*' => {
                bump(&mut chars);
                Tok::Star
            }
            '/' => {
                bump(&mut chars);
                Tok::Slash
            }
            '^' => {
                bump(&mut chars);
                Tok::Caret
            }
            '(' => {
                bump(&mut chars);
                Tok::LParen
            }
            ')' => {
                bump(&mut chars);
                Tok::RParen
            }
            c if c.is_ascii_digit() || c == '.' => {
                let mut s = String::new();
                while let Some(&d) = chars.peek() {
                    if d.is_ascii_digit() || d == '.' {
                        s.push(bump(&mut chars));
                    } else if d == 'e' || d == 'E' {
                        // Scientific notation; accept optional sign.
                        let mut probe = chars.clone();
                        probe.next();
                        match probe.peek() {
                            Some(&p) if p.is_ascii_digit() || p == '+' || p == '-' => {
                                s.push(bump(&mut chars));
                                let next = *chars.peek().unwrap();
                                if next == '+' || next == '-' {
                                    s.push(bump(&mut chars));
                                }
                            }
                            _ => break,
                        }
                    } else {
                        break;
                    }
                }
                let v: f64 = s
                    .parse()
                    .map_err(|_| err(tline, tcol, format!("bad number literal `{s}`")))?;
                Tok::Num(v)
            }
            c if c.is_ascii_alphabetic() || c == '_' => {
                let mut s = String::new();
                while let Some(&d) = chars.peek() {
                    if d.is_ascii_alphanumeric() || d == '_' {
                        s.push(bump(&mut chars));
                    } else {
                        break;
                    }
                }
                Tok::Ident(s)
            }
            other => return Err(err(tline, tcol, format!("unexpected character `{other}`"))),
        };
        out.push(Spanned {
            tok,
            line: tline,
            col: tcol,
        });
    }
    Ok(out)
}

struct Parser {
    toks: Vec<Spanned>,
    pos: usize,
    end: (usize, usize),
}

impl Parser {
    fn peek(&self) -> Option<&Spanned> {
        self.toks.get(self.pos)
    }

    fn next(&mut self) -> Option<Spanned> {
        let t = self.toks.get(self.pos).cloned();
        if t.is_some() {
            self.pos += 1;
        }
        t
    }

    fn here(&self) -> (usize, usize) {
        self.peek().map(|s| (s.line, s.col)).unwrap_or(self.end)
    }

    fn expr(&mut self) -> Result<Expr, Error> {
        let mut acc = self.term()?;
        while let Some(s) = self.peek() {
            match s.tok {
                Tok::Plus => {
                    self.next();
                    acc = acc + self.term()?;
                }
                Tok::Minus => {
                    self.next();
                    acc = acc - self.term()?;
                }
                _ => break,
            }
        }
        Ok(acc)
    }

    fn term(&mut self) -> Result<Expr, Error> {
        let mut acc = self.unary()?;
        while let Some(s) = self.peek() {
            match s.tok {
                Tok::Star => {
                    self.next();
                    acc = acc * self.unary()?;
                }
                Tok::Slash => {
                    self.next();
                    acc = acc / self.unary()?;
                }
                _ => break,
            }
        }
        Ok(acc)
    }

    fn unary(&mut self) -> Result<Expr, Error> {
        if let Some(s) = self.peek() {
            if s.tok == Tok::Minus {
                self.next();
                return Ok(-self.unary()?);
            }
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr, Error> {
        let base = self.atom()?;
        if let Some(s) = self.peek() {
            if s.tok == Tok::Caret {
                self.next();
                let (line, col) = self.here();
                let exponent = self.unary()?;
                let p = exponent.eval(&Vec::new()).map_err(|_| {
                    err(line, col, "exponent must be a constant expression")
                })?;
                return Ok(Expr::pow(base, p));
            }
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Expr, Error> {
        let (line, col) = self.here();
        let Some(s) = self.next() else {
            return Err(err(line, col, "unexpected end of expression"));
        };
        match s.tok {
            Tok::Num(v) => Ok(Expr::constant(v)),
            Tok::Ident(name) => {
                if matches!(self.peek(), Some(p) if p.tok == Tok::LParen) {
                    let func = match name.as_str() {
                        "sin" => UnaryFn::Sin,
                        "cos" => UnaryFn::Cos,
                        "tan" => UnaryFn::Tan,
                        "exp" => UnaryFn::Exp,
                        "log" => UnaryFn::Log,
                        "sqrt" => UnaryFn::Sqrt,
                        "sinh" => UnaryFn::Sinh,
                        "cosh" => UnaryFn::Cosh,
                        "tanh" => UnaryFn::Tanh,
                        _ => {
                            return Err(err(
                                s.line,
                                s.col,
                                format!("unknown function `{name}`"),
                            ))
                        }
                    };
                    self.next(); // consume '('
                    let arg = self.expr()?;
                    self.expect_rparen()?;
                    Ok(Expr::unary(func, arg))
                } else {
                    Ok(Expr::symbol(name))
                }
            }
            Tok::LParen => {
                let inner = self.expr()?;
                self.expect_rparen()?;
                Ok(inner)
            }
            other => Err(err(s.line, s.col, format!("unexpected token {other:?}"))),
        }
    }

    fn expect_rparen(&mut self) -> Result<(), Error> {
        let (line, col) = self.here();
        match self.next() {
            Some(s) if s.tok == Tok::RParen => Ok(()),
            _ => Err(err(line, col, "expected `)`")),
        }
    }
}

/// Parses one expression from `src`. Errors carry line/column positions.
pub fn parse_expr(src: &str) -> Result<Expr, Error> {
    let lines = src.lines().count().max(1);
    let last_len = src.lines().last().map(|l| l.len()).unwrap_or(0);
    let toks = tokenize(src)?;
    let mut p = Parser {
        toks,
        pos: 0,
        end: (lines, last_len + 1),
    };
    let e = p.expr()?;
    if let Some(s) = p.peek() {
        return Err(err(
            s.line,
            s.col,
            format!("trailing input starting at {:?}", s.tok),
        ));
    }
    Ok(e)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn eval1(src: &str, bind: &[(&str, f64)]) -> f64 {
        let scope: Vec<(String, f64)> =
            bind.iter().map(|(n, v)| (n.to_string(), *v)).collect();
        parse_expr(src).unwrap().eval(&scope).unwrap()
    }

    #[test]
    fn arithmetic_and_precedence() {
        assert_eq!(eval1("1 + 2*3", &[]), 7.0);
        assert_eq!(eval1("(1+2)*3", &[]), 9.0);
        assert_eq!(eval1("2^3^2", &[]), 512.0); // right-assoc
        assert_eq!(eval1("-2^2", &[]), -4.0); // unary minus binds looser than ^
        assert_eq!(eval1("6/3/2", &[]), 1.0);
        assert_eq!(eval1("1.5e2 + 1e-1", &[]), 150.1);
    }

    #[test]
    fn functions_and_symbols() {
        let v = eval1("sin(t)^2 + cos(t)^2", &[("t", 0.9)]);
        assert!((v - 1.0).abs() < 1e-14);
        let v = eval1("2 + sin(t)", &[("t", 0.0)]);
        assert_eq!(v, 2.0);
        let v = eval1("sqrt(x*x)", &[("x", 3.0)]);
        assert_eq!(v, 3.0);
    }

    #[test]
    fn error_positions() {
        match parse_expr("1 + $") {
            Err(Error::Parse { line, col, .. }) => {
                assert_eq!((line, col), (1, 5));
            }
            other => panic!("expected parse error, got {other:?}"),
        }
        match parse_expr("sin(x") {
            Err(Error::Parse { .. }) => {}
            other => panic!("expected parse error, got {other:?}"),
        }
        match parse_expr("x ^ y") {
            Err(Error::Parse { message, .. }) => {
                assert!(message.contains("constant"));
            }
            other => panic!("expected parse error, got {other:?}"),
        }
        match parse_expr("foo(x)") {
            Err(Error::Parse { message, .. }) => {
                assert!(message.contains("foo"));
            }
            other => panic!("expected parse error, got {other:?}"),
        }
    }
}
