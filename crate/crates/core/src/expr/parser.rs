//! Recursive-descent parser for the expression grammar:
//!
//! ```text
//! expr   := term (('+'|'-') term)*
//! term   := factor (('*'|'/') factor)*
//! factor := unary ('^' int)?
//! unary  := '-'? atom
//! atom   := number | 'i' | 'pi' | param | func '(' expr ')' | '(' expr ')'
//! param  := 't' int
//! func   := exp | log | sqrt | sin | cos
//! ```
//!
//! Note that unary minus binds tighter than `^`: `-t1^2` is `(-t1)^2`.
//! The exponent of `^` is an integer literal with an optional sign.

use num_complex::Complex64;

use super::ParamExpr;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64, bool),
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

struct Lexer<'a> {
    src: &'a [u8],
    pos: usize,
}

impl<'a> Lexer<'a> {
    fn tokens(src: &'a str) -> Result<Vec<(Tok, usize)>> {
        let mut lx = Lexer { src: src.as_bytes(), pos: 0 };
        let mut out = Vec::new();
        loop {
            lx.skip_ws();
            let start = lx.pos;
            let Some(&ch) = lx.src.get(lx.pos) else {
                out.push((Tok::End, start));
                return Ok(out);
            };
            let tok = match ch {
                b'+' => Tok::Plus,
                b'-' => Tok::Minus,
                b'*' => Tok::Star,
                b'/' => Tok::Slash,
                b'^' => Tok::Caret,
                b'(' => Tok::LParen,
                b')' => Tok::RParen,
                b'0'..=b'9' | b'.' => {
                    out.push((lx.number()?, start));
                    continue;
                }
                c if c.is_ascii_alphabetic() => {
                    while lx.src.get(lx.pos).is_some_and(|c| c.is_ascii_alphanumeric()) {
                        lx.pos += 1;
                    }
                    let word = std::str::from_utf8(&lx.src[start..lx.pos]).unwrap().to_string();
                    out.push((Tok::Ident(word), start));
                    continue;
                }
                _ => {
                    return Err(Error::Syntax {
                        position: start,
                        expected: "number, identifier, operator or parenthesis".into(),
                    })
                }
            };
            lx.pos += 1;
            out.push((tok, start));
        }
    }

    fn skip_ws(&mut self) {
        while self.src.get(self.pos).is_some_and(|c| c.is_ascii_whitespace()) {
            self.pos += 1;
        }
    }

    fn digits(&mut self) -> usize {
        let s = self.pos;
        while self.src.get(self.pos).is_some_and(|c| c.is_ascii_digit()) {
            self.pos += 1;
        }
        self.pos - s
    }

    fn number(&mut self) -> Result<Tok> {
        let start = self.pos;
        let mut integral = true;
        let mut n = self.digits();
        if self.src.get(self.pos) == Some(&b'.') {
            integral = false;
            self.pos += 1;
            n += self.digits();
        }
        if n == 0 {
            return Err(Error::Syntax { position: start, expected: "digits".into() });
        }
        if matches!(self.src.get(self.pos), Some(b'e' | b'E')) {
            integral = false;
            self.pos += 1;
            if matches!(self.src.get(self.pos), Some(b'+' | b'-')) {
                self.pos += 1;
            }
            if self.digits() == 0 {
                return Err(Error::Syntax { position: self.pos, expected: "exponent digits".into() });
            }
        }
        let text = std::str::from_utf8(&self.src[start..self.pos]).unwrap();
        let v: f64 =
            text.parse().map_err(|_| Error::Syntax { position: start, expected: "a decimal number".into() })?;
        Ok(Tok::Num(v, integral))
    }
}

struct Parser {
    toks: Vec<(Tok, usize)>,
    at: usize,
    num_params: usize,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.at].0
    }

    fn pos(&self) -> usize {
        self.toks[self.at].1
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.at].0.clone();
        if self.at + 1 < self.toks.len() {
            self.at += 1;
        }
        t
    }

    fn fail<T>(&self, expected: &str) -> Result<T> {
        Err(Error::Syntax { position: self.pos(), expected: expected.into() })
    }

    fn expect(&mut self, tok: Tok, what: &str) -> Result<()> {
        if *self.peek() == tok {
            self.bump();
            Ok(())
        } else {
            self.fail(what)
        }
    }

    fn expr(&mut self) -> Result<ParamExpr> {
        let mut lhs = self.term()?;
        loop {
            match self.peek() {
                Tok::Plus => {
                    self.bump();
                    lhs = ParamExpr::Add(Box::new(lhs), Box::new(self.term()?));
                }
                Tok::Minus => {
                    self.bump();
                    lhs = ParamExpr::Sub(Box::new(lhs), Box::new(self.term()?));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn term(&mut self) -> Result<ParamExpr> {
        let mut lhs = self.factor()?;
        loop {
            match self.peek() {
                Tok::Star => {
                    self.bump();
                    lhs = ParamExpr::Mul(Box::new(lhs), Box::new(self.factor()?));
                }
                Tok::Slash => {
                    self.bump();
                    lhs = ParamExpr::Div(Box::new(lhs), Box::new(self.factor()?));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn factor(&mut self) -> Result<ParamExpr> {
        let base = self.unary()?;
        if *self.peek() != Tok::Caret {
            return Ok(base);
        }
        self.bump();
        let negative = if *self.peek() == Tok::Minus {
            self.bump();
            true
        } else {
            false
        };
        match self.peek().clone() {
            Tok::Num(v, true) if v <= i32::MAX as f64 => {
                self.bump();
                let k = v as i32;
                Ok(ParamExpr::Pow(Box::new(base), if negative { -k } else { k }))
            }
            _ => self.fail("integer exponent"),
        }
    }

    fn unary(&mut self) -> Result<ParamExpr> {
        if *self.peek() == Tok::Minus {
            self.bump();
            return Ok(ParamExpr::Neg(Box::new(self.atom()?)));
        }
        self.atom()
    }

    fn atom(&mut self) -> Result<ParamExpr> {
        let pos = self.pos();
        match self.bump() {
            Tok::Num(v, _) => Ok(ParamExpr::Const(Complex64::new(v, 0.0))),
            Tok::LParen => {
                let e = self.expr()?;
                self.expect(Tok::RParen, "')'")?;
                Ok(e)
            }
            Tok::Ident(name) => self.ident(name, pos),
            _ => Err(Error::Syntax { position: pos, expected: "number, 'i', 'pi', parameter, function or '('".into() }),
        }
    }

    fn ident(&mut self, name: String, pos: usize) -> Result<ParamExpr> {
        match name.as_str() {
            "i" => return Ok(ParamExpr::Const(Complex64::new(0.0, 1.0))),
            "pi" => return Ok(ParamExpr::Const(Complex64::new(std::f64::consts::PI, 0.0))),
            "exp" | "log" | "sqrt" | "sin" | "cos" => {
                self.expect(Tok::LParen, "'(' after function name")?;
                let arg = Box::new(self.expr()?);
                self.expect(Tok::RParen, "')'")?;
                return Ok(match name.as_str() {
                    "exp" => ParamExpr::Exp(arg),
                    "log" => ParamExpr::Log(arg),
                    "sqrt" => ParamExpr::Sqrt(arg),
                    "sin" => ParamExpr::Sin(arg),
                    _ => ParamExpr::Cos(arg),
                });
            }
            _ => {}
        }
        if let Some(digits) = name.strip_prefix('t') {
            if !digits.is_empty() && digits.bytes().all(|b| b.is_ascii_digit()) {
                let index: usize =
                    digits.parse().map_err(|_| Error::Syntax { position: pos, expected: "parameter index".into() })?;
                if index == 0 || index > self.num_params {
                    return Err(Error::ParamOutOfRange { index, declared: self.num_params });
                }
                return Ok(ParamExpr::Param(index - 1));
            }
        }
        Err(Error::UnknownIdentifier(name))
    }
}

/// Parse `src` as an expression in `num_params` parameters `t1..t{num_params}`.
pub fn parse_expr(src: &str, num_params: usize) -> Result<ParamExpr> {
    let toks = Lexer::tokens(src)?;
    let mut p = Parser { toks, at: 0, num_params };
    let e = p.expr()?;
    if *p.peek() != Tok::End {
        return p.fail("operator or end of input");
    }
    Ok(e)
}
