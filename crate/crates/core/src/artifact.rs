//! Shared pieces of the plain-text artifact formats: a line reader with
//! line numbers, the algebra header, and word syntax.

use std::fmt::Write as _;

use thiserror::Error;

use crate::cyclo::{CycloField, CycloScalar};
use crate::freealg::{AdjointRule, Alphabet, FreeAlgebra, NCPoly, VarRole, Variable, Word};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("line {line}: {msg}")]
pub struct ArtifactError {
    pub line: usize,
    pub msg: String,
}

/// Largest field order accepted from a file; keeps hostile inputs cheap.
pub const MAX_FIELD_ORDER: u32 = 4096;
/// Largest count field accepted before allocating.
pub const MAX_COUNT: usize = 1 << 24;

/// Non-empty, non-comment lines with 1-based numbers.
pub struct Lines<'a> {
    inner: std::iter::Peekable<Box<dyn Iterator<Item = (usize, &'a str)> + 'a>>,
    last: usize,
}

impl<'a> Lines<'a> {
    pub fn new(text: &'a str) -> Self {
        let it: Box<dyn Iterator<Item = (usize, &'a str)> + 'a> = Box::new(
            text.lines()
                .enumerate()
                .map(|(i, l)| (i + 1, l.trim()))
                .filter(|(_, l)| !l.is_empty() && !l.starts_with('#')),
        );
        Lines {
            inner: it.peekable(),
            last: 0,
        }
    }

    pub fn next_line(&mut self) -> Option<(usize, &'a str)> {
        let r = self.inner.next();
        if let Some((n, _)) = r {
            self.last = n;
        }
        r
    }

    pub fn peek_keyword(&mut self) -> Option<&'a str> {
        self.inner
            .peek()
            .map(|(_, l)| l.split_whitespace().next().unwrap_or(""))
    }

    pub fn err(&self, msg: impl Into<String>) -> ArtifactError {
        ArtifactError {
            line: self.last,
            msg: msg.into(),
        }
    }

    /// Next line, which must start with `keyword`; returns the remainder.
    pub fn expect(&mut self, keyword: &str) -> Result<&'a str, ArtifactError> {
        match self.next_line() {
            Some((_, l)) => {
                let (k, rest) = split_keyword(l);
                if k == keyword {
                    Ok(rest)
                } else {
                    Err(self.err(format!("expected '{keyword}', found '{k}'")))
                }
            }
            None => Err(self.err(format!("unexpected end of input, expected '{keyword}'"))),
        }
    }

    pub fn expect_count(&mut self, keyword: &str) -> Result<usize, ArtifactError> {
        let rest = self.expect(keyword)?;
        self.count(rest)
    }

    pub fn count(&self, s: &str) -> Result<usize, ArtifactError> {
        let n: usize = s
            .trim()
            .parse()
            .map_err(|_| self.err(format!("bad count {s:?}")))?;
        if n > MAX_COUNT {
            return Err(self.err("count too large"));
        }
        Ok(n)
    }

    pub fn finish(&mut self) -> Result<(), ArtifactError> {
        match self.next_line() {
            None => Ok(()),
            Some((_, l)) => Err(self.err(format!("trailing content {l:?}"))),
        }
    }
}

pub fn split_keyword(l: &str) -> (&str, &str) {
    match l.split_once(char::is_whitespace) {
        Some((k, r)) => (k, r.trim()),
        None => (l, ""),
    }
}

fn adjoint_text(a: AdjointRule) -> String {
    match a {
        AdjointRule::SelfAdjoint => "sa".into(),
        AdjointRule::Unitary(m) => format!("u{m}"),
    }
}

/// Writes `ncgame <kind> 1`, the field order and the alphabet.
pub fn write_header(out: &mut String, kind: &str, algebra: &FreeAlgebra) {
    let _ = writeln!(out, "ncgame {kind} 1");
    let _ = writeln!(out, "field {}", algebra.field().order());
    let _ = writeln!(out, "vars {}", algebra.alphabet().len());
    for v in algebra.alphabet().vars() {
        let role = match v.role {
            VarRole::Aux => "aux".to_string(),
            VarRole::Game {
                player,
                question,
                label,
            } => match label {
                Some(l) => format!("{player} {question} {l}"),
                None => format!("{player} {question} -"),
            },
        };
        let _ = writeln!(out, "var {} {} {}", v.name, adjoint_text(v.adjoint), role);
    }
}

pub fn read_header(lines: &mut Lines<'_>, kind: &str) -> Result<FreeAlgebra, ArtifactError> {
    let magic = lines.expect("ncgame")?;
    if magic != format!("{kind} 1") {
        return Err(lines.err(format!(
            "expected artifact kind '{kind} 1', found {magic:?}"
        )));
    }
    let order = lines.expect("field")?;
    let order: u32 = order.parse().map_err(|_| lines.err("bad field order"))?;
    if order == 0 || order > MAX_FIELD_ORDER {
        return Err(lines.err("field order out of range"));
    }
    let field = CycloField::new(order).map_err(|e| lines.err(e.to_string()))?;
    let n = lines.expect_count("vars")?;
    if n > u16::MAX as usize {
        return Err(lines.err("too many variables"));
    }
    let mut vars = Vec::with_capacity(n);
    for _ in 0..n {
        let rest = lines.expect("var")?;
        let parts: Vec<&str> = rest.split_whitespace().collect();
        let bad = || lines.err(format!("bad variable line {rest:?}"));
        if parts.len() < 3 {
            return Err(bad());
        }
        let adjoint = match parts[1] {
            "sa" => AdjointRule::SelfAdjoint,
            u => {
                let m: u32 = u
                    .strip_prefix('u')
                    .and_then(|m| m.parse().ok())
                    .ok_or_else(bad)?;
                if m == 0 {
                    return Err(bad());
                }
                AdjointRule::Unitary(m)
            }
        };
        let role = if parts[2] == "aux" && parts.len() == 3 {
            VarRole::Aux
        } else if parts.len() == 5 {
            let num = |s: &str| s.parse::<usize>().map_err(|_| bad());
            VarRole::Game {
                player: num(parts[2])?,
                question: num(parts[3])?,
                label: if parts[4] == "-" {
                    None
                } else {
                    Some(num(parts[4])?)
                },
            }
        } else {
            return Err(bad());
        };
        vars.push(Variable::new(parts[0], role, adjoint));
    }
    let alphabet = Alphabet::new(vars).map_err(|e| lines.err(e.to_string()))?;
    Ok(FreeAlgebra::new(alphabet, field))
}

pub fn format_word(alphabet: &Alphabet, w: &Word) -> String {
    alphabet.word_to_string(w)
}

pub fn parse_word(alphabet: &Alphabet, text: &str) -> Result<Word, String> {
    let text = text.trim();
    if text == "1" {
        return Ok(Word::one());
    }
    let mut letters = Vec::new();
    for name in text.split_whitespace() {
        letters.push(
            alphabet
                .lookup(name)
                .ok_or_else(|| format!("unknown variable {name:?}"))?,
        );
    }
    if letters.is_empty() {
        return Err("empty word".into());
    }
    Ok(Word::from_letters(&letters))
}

pub fn parse_poly_at(
    lines: &Lines<'_>,
    algebra: &FreeAlgebra,
    text: &str,
) -> Result<NCPoly, ArtifactError> {
    algebra.parse(text).map_err(|e| lines.err(e.to_string()))
}

pub fn parse_scalar_at(
    lines: &Lines<'_>,
    algebra: &FreeAlgebra,
    text: &str,
) -> Result<CycloScalar, ArtifactError> {
    algebra
        .field()
        .parse_scalar(text)
        .map_err(|e| lines.err(e.to_string()))
}
