//! Operator expressions such as `"X1*X2 + 0.5*Z3"` or `"(X1 + i*Y1)/2"`.
//!
//! ```text
//! expr   := sign? term (('+' | '-') term)*
//! term   := factor (('*' | '/')? factor)*
//! factor := NAME SITE | NUMBER | 'i' | '(' expr ')' | '-' factor
//! NAME   := X | Y | Z | I | plus | minus
//! ```
//!
//! Juxtaposition multiplies, so `"2 X1 X2"` equals `"2*X1*X2"`. Sites are
//! 1-based. Division is only by a scalar.

use locobs_core::linalg::{CMat, C64};
use locobs_core::operator::{pauli_i, pauli_x, pauli_y, pauli_z, sigma_minus, sigma_plus};
use locobs_core::{embed, Operator};

pub const NAMES: [&str; 6] = ["X", "Y", "Z", "I", "plus", "minus"];

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("column {}: {msg}", .pos + 1)]
pub struct ExprError {
    pub pos: usize,
    pub msg: String,
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Op(String, usize),
    Imag,
    Plus,
    Minus,
    Star,
    Slash,
    LParen,
    RParen,
}

fn err<T>(pos: usize, msg: impl Into<String>) -> Result<T, ExprError> {
    Err(ExprError { pos, msg: msg.into() })
}

fn tokenize(src: &str) -> Result<Vec<(Tok, usize)>, ExprError> {
    let b = src.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < b.len() {
        let c = b[i];
        let start = i;
        match c {
            b' ' | b'\t' => {
                i += 1;
                continue;
            }
            b'+' => out.push((Tok::Plus, i)),
            b'-' => out.push((Tok::Minus, i)),
            b'*' => out.push((Tok::Star, i)),
            b'/' => out.push((Tok::Slash, i)),
            b'(' => out.push((Tok::LParen, i)),
            b')' => out.push((Tok::RParen, i)),
            b'0'..=b'9' | b'.' => {
                while i < b.len() && (b[i].is_ascii_digit() || b[i] == b'.') {
                    i += 1;
                }
                if i < b.len() && (b[i] == b'e' || b[i] == b'E') {
                    let mut j = i + 1;
                    if j < b.len() && (b[j] == b'+' || b[j] == b'-') {
                        j += 1;
                    }
                    if j < b.len() && b[j].is_ascii_digit() {
                        i = j;
                        while i < b.len() && b[i].is_ascii_digit() {
                            i += 1;
                        }
                    }
                }
                let text = &src[start..i];
                let v: f64 = text.parse().or_else(|_| err(start, format!("bad number `{text}`")))?;
                out.push((Tok::Num(v), start));
                continue;
            }
            c if c.is_ascii_alphabetic() => {
                while i < b.len() && b[i].is_ascii_alphabetic() {
                    i += 1;
                }
                let name = &src[start..i];
                let d0 = i;
                while i < b.len() && b[i].is_ascii_digit() {
                    i += 1;
                }
                if d0 == i {
                    if name == "i" {
                        out.push((Tok::Imag, start));
                        continue;
                    }
                    return err(start, format!("`{name}` needs a site index, e.g. `{name}1`"));
                }
                if !NAMES.contains(&name) {
                    return err(start, format!("unknown operator `{name}`; expected one of {}", NAMES.join(", ")));
                }
                let site: usize = src[d0..i].parse().or_else(|_| err(d0, "bad site index"))?;
                out.push((Tok::Op(name.to_string(), site), start));
                continue;
            }
            _ => return err(i, format!("unexpected character `{}`", src[i..].chars().next().unwrap_or('?'))),
        }
        i += 1;
    }
    Ok(out)
}

/// A parsed expression evaluated on the full space.
#[derive(Debug, Clone)]
pub struct Parsed {
    pub operator: Operator,
    /// 1-based sites touched by some factor, ascending
    pub sites: Vec<usize>,
}

struct Parser<'a> {
    toks: Vec<(Tok, usize)>,
    at: usize,
    end: usize,
    dims: &'a [usize],
    sites: Vec<usize>,
}

impl Parser<'_> {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.at).map(|t| &t.0)
    }

    fn pos(&self) -> usize {
        self.toks.get(self.at).map_or(self.end, |t| t.1)
    }

    fn identity(&self) -> CMat {
        let d: usize = self.dims.iter().product();
        CMat::identity(d, d)
    }

    fn expr(&mut self) -> Result<CMat, ExprError> {
        let mut neg = false;
        match self.peek() {
            Some(Tok::Plus) => self.at += 1,
            Some(Tok::Minus) => {
                neg = true;
                self.at += 1;
            }
            _ => {}
        }
        let mut acc = self.term()?;
        if neg {
            acc = -acc;
        }
        loop {
            match self.peek() {
                Some(Tok::Plus) => {
                    self.at += 1;
                    acc += self.term()?;
                }
                Some(Tok::Minus) => {
                    self.at += 1;
                    acc -= self.term()?;
                }
                _ => return Ok(acc),
            }
        }
    }

    fn term(&mut self) -> Result<CMat, ExprError> {
        let mut acc = self.factor()?;
        loop {
            match self.peek() {
                Some(Tok::Star) => {
                    self.at += 1;
                    acc = acc * self.factor()?;
                }
                Some(Tok::Slash) => {
                    self.at += 1;
                    let pos = self.pos();
                    let f = self.factor()?;
                    let s = scalar_of(&f).ok_or_else(|| ExprError { pos, msg: "can only divide by a number".into() })?;
                    if s.norm() == 0.0 {
                        return err(pos, "division by zero");
                    }
                    acc /= s;
                }
                Some(Tok::Num(_) | Tok::Op(..) | Tok::Imag | Tok::LParen) => acc = acc * self.factor()?,
                _ => return Ok(acc),
            }
        }
    }

    fn factor(&mut self) -> Result<CMat, ExprError> {
        let pos = self.pos();
        let Some((tok, _)) = self.toks.get(self.at).cloned() else {
            return err(pos, "unexpected end of expression");
        };
        self.at += 1;
        match tok {
            Tok::Num(v) => Ok(self.identity() * C64::new(v, 0.0)),
            Tok::Imag => Ok(self.identity() * C64::new(0.0, 1.0)),
            Tok::Minus => Ok(-self.factor()?),
            Tok::LParen => {
                let inner = self.expr()?;
                match self.peek() {
                    Some(Tok::RParen) => {
                        self.at += 1;
                        Ok(inner)
                    }
                    _ => err(self.pos(), "expected `)`"),
                }
            }
            Tok::Op(name, site) => self.site_operator(&name, site, pos),
            other => err(pos, format!("unexpected {}", describe(&other))),
        }
    }

    fn site_operator(&mut self, name: &str, site: usize, pos: usize) -> Result<CMat, ExprError> {
        let n = self.dims.len();
        if site == 0 || site > n {
            return err(pos, format!("site {site} out of range 1..={n}"));
        }
        let d = self.dims[site - 1];
        let local = match name {
            "I" => CMat::identity(d, d),
            _ if d != 2 => return err(pos, format!("`{name}` needs a qubit but site {site} has dimension {d}")),
            "X" => pauli_x(),
            "Y" => pauli_y(),
            "Z" => pauli_z(),
            "plus" => sigma_plus(),
            "minus" => sigma_minus(),
            _ => pauli_i(),
        };
        if let Err(k) = self.sites.binary_search(&site) {
            self.sites.insert(k, site);
        }
        let local = Operator::new(vec![d], local).map_err(|e| ExprError { pos, msg: e.to_string() })?;
        let full = embed(&local, &[site], self.dims).map_err(|e| ExprError { pos, msg: e.to_string() })?;
        Ok(full.into_matrix())
    }
}

fn describe(t: &Tok) -> &'static str {
    match t {
        Tok::Plus => "`+`",
        Tok::Minus => "`-`",
        Tok::Star => "`*`",
        Tok::Slash => "`/`",
        Tok::LParen => "`(`",
        Tok::RParen => "`)`",
        _ => "token",
    }
}

/// The scalar c if `m` = c·I.
fn scalar_of(m: &CMat) -> Option<C64> {
    let c = m[(0, 0)];
    let scale = m.iter().map(|z| z.norm()).fold(0.0, f64::max).max(1.0);
    let off = (m - CMat::identity(m.nrows(), m.ncols()) * c).iter().map(|z| z.norm()).fold(0.0, f64::max);
    (off <= 1e-14 * scale).then_some(c)
}

pub fn parse(src: &str, dims: &[usize]) -> Result<Parsed, ExprError> {
    let toks = tokenize(src)?;
    if toks.is_empty() {
        return err(0, "empty expression");
    }
    let mut p = Parser { toks, at: 0, end: src.len(), dims, sites: Vec::new() };
    let m = p.expr()?;
    if p.at < p.toks.len() {
        return err(p.pos(), format!("unexpected {} after expression", describe(&p.toks[p.at].0)));
    }
    let operator = Operator::new(dims.to_vec(), m).map_err(|e| ExprError { pos: 0, msg: e.to_string() })?;
    Ok(Parsed { operator, sites: p.sites })
}
