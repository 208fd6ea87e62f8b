//! Text syntax for polynomials in `z` and `w`.
//!
//! ```text
//! expr   := sign? term (('+' | '-') term)*
//! term   := factor ('*' factor)*
//! factor := '-' factor | atom ('^' integer)?
//! atom   := number | number 'i' | 'i' | 'z' | 'w' | '(' expr ')'
//! ```
//!
//! Multiplication is always explicit: `2z` is rejected.

use crate::error::{Error, Result};
use crate::poly2::{Poly2, C64};

/// Largest exponent accepted after `^`.
pub const MAX_EXPONENT: u32 = 1000;

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Num { value: C64, integer: Option<u64> },
    Z,
    W,
    Plus,
    Minus,
    Star,
    Caret,
    LParen,
    RParen,
    End,
}

impl Tok {
    fn describe(&self, text: &str) -> String {
        match self {
            Tok::End => "end of input".into(),
            _ => format!("'{text}'"),
        }
    }
}

struct Lexed {
    tok: Tok,
    pos: usize,
    text: String,
}

fn syntax(pos: usize, expected: &[&str], found: String) -> Error {
    Error::Syntax {
        position: pos,
        expected: expected.iter().map(|s| s.to_string()).collect(),
        found,
    }
}

fn lex(src: &str) -> Result<Vec<Lexed>> {
    let bytes = src.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        if c.is_ascii_whitespace() {
            i += 1;
            continue;
        }
        let start = i;
        let tok = match c {
            b'+' => Tok::Plus,
            b'-' => Tok::Minus,
            b'*' => Tok::Star,
            b'^' => Tok::Caret,
            b'(' => Tok::LParen,
            b')' => Tok::RParen,
            b'z' => Tok::Z,
            b'w' => Tok::W,
            b'i' => Tok::Num {
                value: C64::new(0.0, 1.0),
                integer: None,
            },
            b'0'..=b'9' | b'.' => {
                while i < bytes.len() && (bytes[i].is_ascii_digit() || bytes[i] == b'.') {
                    i += 1;
                }
                let mut plain = true;
                if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
                    let mut j = i + 1;
                    if j < bytes.len() && (bytes[j] == b'+' || bytes[j] == b'-') {
                        j += 1;
                    }
                    if j < bytes.len() && bytes[j].is_ascii_digit() {
                        while j < bytes.len() && bytes[j].is_ascii_digit() {
                            j += 1;
                        }
                        i = j;
                        plain = false;
                    }
                }
                let digits = &src[start..i];
                let value: f64 = digits
                    .parse()
                    .map_err(|_| syntax(start, &["number"], format!("'{digits}'")))?;
                let integer = if plain && !digits.contains('.') {
                    digits.parse::<u64>().ok()
                } else {
                    None
                };
                if i < bytes.len() && bytes[i] == b'i' {
                    i += 1;
                    Tok::Num {
                        value: C64::new(0.0, value),
                        integer: None,
                    }
                } else {
                    Tok::Num {
                        value: C64::new(value, 0.0),
                        integer,
                    }
                }
            }
            _ => {
                let ch = src[i..].chars().next().unwrap_or('?');
                return Err(syntax(
                    i,
                    &["number", "z", "w", "i", "+", "-", "*", "^", "(", ")"],
                    format!("'{ch}'"),
                ));
            }
        };
        if !matches!(tok, Tok::Num { .. }) || c == b'i' {
            i += 1;
        }
        out.push(Lexed {
            tok,
            pos: start,
            text: src[start..i].to_string(),
        });
    }
    out.push(Lexed {
        tok: Tok::End,
        pos: src.len(),
        text: String::new(),
    });
    Ok(out)
}

struct Parser {
    toks: Vec<Lexed>,
    at: usize,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.at].tok
    }

    fn bump(&mut self) -> &Lexed {
        let t = &self.toks[self.at];
        if self.at + 1 < self.toks.len() {
            self.at += 1;
        }
        t
    }

    fn fail(&self, expected: &[&str]) -> Error {
        let t = &self.toks[self.at];
        syntax(t.pos, expected, t.tok.describe(&t.text))
    }

    fn expr(&mut self) -> Result<Poly2> {
        let mut acc = match self.peek() {
            Tok::Minus => {
                self.bump();
                -&self.term()?
            }
            Tok::Plus => {
                self.bump();
                self.term()?
            }
            _ => self.term()?,
        };
        loop {
            match self.peek() {
                Tok::Plus => {
                    self.bump();
                    acc = &acc + &self.term()?;
                }
                Tok::Minus => {
                    self.bump();
                    acc = &acc - &self.term()?;
                }
                _ => return Ok(acc),
            }
        }
    }

    fn term(&mut self) -> Result<Poly2> {
        let mut acc = self.factor()?;
        while *self.peek() == Tok::Star {
            self.bump();
            acc = &acc * &self.factor()?;
        }
        Ok(acc)
    }

    fn factor(&mut self) -> Result<Poly2> {
        if *self.peek() == Tok::Minus {
            self.bump();
            return Ok(-&self.factor()?);
        }
        let base = self.atom()?;
        if *self.peek() != Tok::Caret {
            return Ok(base);
        }
        self.bump();
        let pos = self.toks[self.at].pos;
        match self.peek().clone() {
            Tok::Num {
                integer: Some(e), ..
            } => {
                self.bump();
                if e > MAX_EXPONENT as u64 {
                    return Err(Error::ParameterOutOfRange(format!(
                        "exponent {e} at position {pos} exceeds {MAX_EXPONENT}"
                    )));
                }
                Ok(base.pow(e as u32))
            }
            Tok::Num { .. } | Tok::Minus => Err(Error::ExponentNotInteger { position: pos }),
            _ => Err(self.fail(&["integer exponent"])),
        }
    }

    fn atom(&mut self) -> Result<Poly2> {
        let expected = ["number", "z", "w", "("];
        match self.peek().clone() {
            Tok::Num { value, .. } => {
                self.bump();
                Ok(Poly2::constant(value))
            }
            Tok::Z => {
                self.bump();
                Ok(Poly2::z())
            }
            Tok::W => {
                self.bump();
                Ok(Poly2::w())
            }
            Tok::LParen => {
                self.bump();
                let inner = self.expr()?;
                if *self.peek() != Tok::RParen {
                    return Err(self.fail(&["+", "-", "*", "^", ")"]));
                }
                self.bump();
                Ok(inner)
            }
            _ => Err(self.fail(&expected)),
        }
    }
}

/// Parses a polynomial expression into canonical form.
pub fn parse_poly(text: &str) -> Result<Poly2> {
    let mut p = Parser {
        toks: lex(text)?,
        at: 0,
    };
    let poly = p.expr()?;
    if *p.peek() != Tok::End {
        return Err(p.fail(&["+", "-", "*", "^", "end of input"]));
    }
    Ok(poly)
}
