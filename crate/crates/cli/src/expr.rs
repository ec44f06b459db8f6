//! Real-valued flag parser: decimal literals, the constants `e` and `pi`,
//! `+ - * / ^`, parentheses and implicit multiplication (`1/(2e)`).
//!
//! A literal followed directly by `e<digits>` or `e-<digits>` is read in
//! scientific notation; write `2*e-1` for the other reading.

use rug::float::Constant;
use rug::ops::Pow;
use rug::Float;

use crate::CliError;

const GUARD: u32 = 32;

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Num(String),
    E,
    Pi,
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    Open,
    Close,
}

/// Evaluates `src` at `bits` of precision.
pub fn parse_real(src: &str, bits: u32) -> Result<Float, CliError> {
    let toks = tokenize(src)?;
    let mut p = Parser {
        toks: &toks,
        pos: 0,
        prec: bits + GUARD,
        src,
    };
    let v = p.expr()?;
    if p.pos != toks.len() {
        return Err(p.error("unexpected trailing input"));
    }
    if !v.is_finite() {
        return Err(CliError::Usage(format!("expression `{src}` is not a finite real")));
    }
    Ok(Float::with_val(bits, v))
}

fn tokenize(src: &str) -> Result<Vec<Tok>, CliError> {
    let chars: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let ch = chars[i];
        match ch {
            c if c.is_whitespace() => i += 1,
            '0'..='9' | '.' => {
                let start = i;
                while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '.') {
                    i += 1;
                }
                // Scientific exponent only when digits follow immediately.
                if i < chars.len() && (chars[i] == 'e' || chars[i] == 'E') {
                    let mut j = i + 1;
                    if j < chars.len() && (chars[j] == '-' || chars[j] == '+') {
                        j += 1;
                    }
                    if j < chars.len() && chars[j].is_ascii_digit() {
                        while j < chars.len() && chars[j].is_ascii_digit() {
                            j += 1;
                        }
                        i = j;
                    }
                }
                out.push(Tok::Num(chars[start..i].iter().collect()));
            }
            'e' => {
                out.push(Tok::E);
                i += 1;
            }
            'p' if chars.get(i + 1) == Some(&'i') => {
                out.push(Tok::Pi);
                i += 2;
            }
            '+' => {
                out.push(Tok::Plus);
                i += 1;
            }
            '-' | '\u{2212}' => {
                out.push(Tok::Minus);
                i += 1;
            }
            '*' => {
                out.push(Tok::Star);
                i += 1;
            }
            '/' => {
                out.push(Tok::Slash);
                i += 1;
            }
            '^' => {
                out.push(Tok::Caret);
                i += 1;
            }
            '(' => {
                out.push(Tok::Open);
                i += 1;
            }
            ')' => {
                out.push(Tok::Close);
                i += 1;
            }
            other => {
                return Err(CliError::Usage(format!(
                    "unexpected character `{other}` in expression `{src}`"
                )))
            }
        }
    }
    Ok(out)
}

struct Parser<'a> {
    toks: &'a [Tok],
    pos: usize,
    prec: u32,
    src: &'a str,
}

impl Parser<'_> {
    fn error(&self, what: &str) -> CliError {
        CliError::Usage(format!("{what} in expression `{}`", self.src))
    }

    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos)
    }

    fn expr(&mut self) -> Result<Float, CliError> {
        let mut acc = self.term()?;
        while let Some(t) = self.peek() {
            match t {
                Tok::Plus => {
                    self.pos += 1;
                    acc += self.term()?;
                }
                Tok::Minus => {
                    self.pos += 1;
                    acc -= self.term()?;
                }
                _ => break,
            }
        }
        Ok(acc)
    }

    fn term(&mut self) -> Result<Float, CliError> {
        let mut acc = self.unary()?;
        loop {
            match self.peek() {
                Some(Tok::Star) => {
                    self.pos += 1;
                    acc *= self.unary()?;
                }
                Some(Tok::Slash) => {
                    self.pos += 1;
                    let d = self.unary()?;
                    if d.is_zero() {
                        return Err(self.error("division by zero"));
                    }
                    acc /= d;
                }
                // Juxtaposition binds like `*`.
                Some(Tok::Num(_) | Tok::E | Tok::Pi | Tok::Open) => acc *= self.power()?,
                _ => break,
            }
        }
        Ok(acc)
    }

    fn unary(&mut self) -> Result<Float, CliError> {
        match self.peek() {
            Some(Tok::Minus) => {
                self.pos += 1;
                Ok(-self.unary()?)
            }
            Some(Tok::Plus) => {
                self.pos += 1;
                self.unary()
            }
            _ => self.power(),
        }
    }

    fn power(&mut self) -> Result<Float, CliError> {
        let base = self.atom()?;
        if self.peek() == Some(&Tok::Caret) {
            self.pos += 1;
            let exp = self.unary()?;
            return Ok(base.pow(&exp));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Float, CliError> {
        let tok = self.peek().cloned().ok_or_else(|| self.error("unexpected end"))?;
        self.pos += 1;
        match tok {
            Tok::Num(s) => {
                let parsed = Float::parse(&s).map_err(|_| self.error(&format!("bad number `{s}`")))?;
                Ok(Float::with_val(self.prec, parsed))
            }
            Tok::E => Ok(Float::with_val(self.prec, 1).exp()),
            Tok::Pi => Ok(Float::with_val(self.prec, Constant::Pi)),
            Tok::Open => {
                let v = self.expr()?;
                if self.peek() != Some(&Tok::Close) {
                    return Err(self.error("missing `)`"));
                }
                self.pos += 1;
                Ok(v)
            }
            _ => Err(self.error("expected a number, `e`, `pi` or `(`")),
        }
    }
}
