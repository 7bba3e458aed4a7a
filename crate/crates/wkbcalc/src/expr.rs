//! The shared expression grammar and its canonical printer.
//!
//! ```text
//! expr   := term (('+' | '-') term)*
//! term   := ['-'] factor ('*' factor)*
//! factor := atom ['^' ['-'] INT]
//! atom   := '(' expr ')' | INT ['/' INT] | 'i' | VAR
//! VAR    := x<k> | t | xi<k> | u<k> | tau
//! ```
//!
//! Whitespace-insensitive. Negative exponents are accepted only where the
//! space allows them (fiber variables, declared chart units). Canonical
//! printing orders terms lexicographically by exponent vector and
//! round-trips through the parser.

use crate::scalar::Scalar;
use crate::space::{Var, VarSpace};
use crate::symbol::{LaurentSymbol, SymbolError};
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ExprError {
    #[error("syntax error at position {pos}: {message}")]
    Syntax { pos: usize, message: String },
    #[error("domain error: {0}")]
    Domain(String),
}

impl From<SymbolError> for ExprError {
    fn from(e: SymbolError) -> Self {
        ExprError::Domain(e.to_string())
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Int(BigInt),
    Ident(String),
    Plus,
    Minus,
    Star,
    Caret,
    Slash,
    LParen,
    RParen,
}

fn lex(input: &str) -> Result<Vec<(usize, Tok)>, ExprError> {
    let bytes = input.as_bytes();
    let mut toks = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i] as char;
        match c {
            ' ' | '\t' | '\n' | '\r' => i += 1,
            '+' => {
                toks.push((i, Tok::Plus));
                i += 1;
            }
            '-' => {
                toks.push((i, Tok::Minus));
                i += 1;
            }
            '*' => {
                toks.push((i, Tok::Star));
                i += 1;
            }
            '^' => {
                toks.push((i, Tok::Caret));
                i += 1;
            }
            '/' => {
                toks.push((i, Tok::Slash));
                i += 1;
            }
            '(' => {
                toks.push((i, Tok::LParen));
                i += 1;
            }
            ')' => {
                toks.push((i, Tok::RParen));
                i += 1;
            }
            '0'..='9' => {
                let start = i;
                while i < bytes.len() && bytes[i].is_ascii_digit() {
                    i += 1;
                }
                let n: BigInt = input[start..i].parse().expect("digits");
                toks.push((start, Tok::Int(n)));
            }
            'a'..='z' | 'A'..='Z' => {
                let start = i;
                while i < bytes.len() && (bytes[i].is_ascii_alphanumeric()) {
                    i += 1;
                }
                toks.push((start, Tok::Ident(input[start..i].to_string())));
            }
            _ => {
                return Err(ExprError::Syntax {
                    pos: i,
                    message: format!("unexpected character '{}'", c),
                })
            }
        }
    }
    Ok(toks)
}

/// Resolve an identifier against a space.
fn resolve_var(name: &str, space: &VarSpace) -> Result<Var, ExprError> {
    let var = parse_var_name(name)
        .ok_or_else(|| ExprError::Domain(format!("unknown identifier '{}'", name)))?;
    if !space.contains(var) {
        return Err(ExprError::Domain(format!(
            "variable '{}' does not exist in this space",
            name
        )));
    }
    Ok(var)
}

pub fn parse_var_name(name: &str) -> Option<Var> {
    if name == "t" {
        return Some(Var::T);
    }
    if name == "tau" {
        return Some(Var::Tau);
    }
    let (head, idx) = name.split_at(name.find(|c: char| c.is_ascii_digit())?);
    let k: u32 = idx.parse().ok()?;
    if k == 0 {
        return None;
    }
    match head {
        "x" => Some(Var::X(k)),
        "xi" => Some(Var::Xi(k)),
        "u" => Some(Var::U(k)),
        _ => None,
    }
}

struct Parser<'a> {
    toks: Vec<(usize, Tok)>,
    pos: usize,
    space: &'a VarSpace,
    len: usize,
}

impl<'a> Parser<'a> {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|(_, t)| t)
    }

    fn here(&self) -> usize {
        self.toks.get(self.pos).map(|(p, _)| *p).unwrap_or(self.len)
    }

    fn bump(&mut self) -> Option<Tok> {
        let t = self.toks.get(self.pos).map(|(_, t)| t.clone());
        self.pos += 1;
        t
    }

    fn expect(&mut self, want: Tok, what: &str) -> Result<(), ExprError> {
        let pos = self.here();
        match self.bump() {
            Some(t) if t == want => Ok(()),
            _ => Err(ExprError::Syntax { pos, message: format!("expected {}", what) }),
        }
    }

    fn syntax(&self, message: impl Into<String>) -> ExprError {
        ExprError::Syntax { pos: self.here(), message: message.into() }
    }

    fn expr(&mut self) -> Result<LaurentSymbol, ExprError> {
        let mut acc = self.term()?;
        loop {
            match self.peek() {
                Some(Tok::Plus) => {
                    self.bump();
                    acc = acc.add(&self.term()?)?;
                }
                Some(Tok::Minus) => {
                    self.bump();
                    acc = acc.sub(&self.term()?)?;
                }
                _ => return Ok(acc),
            }
        }
    }

    fn term(&mut self) -> Result<LaurentSymbol, ExprError> {
        let negate = if self.peek() == Some(&Tok::Minus) {
            self.bump();
            true
        } else {
            false
        };
        let mut acc = self.factor()?;
        while self.peek() == Some(&Tok::Star) {
            self.bump();
            acc = acc.mul(&self.factor()?)?;
        }
        Ok(if negate { acc.neg() } else { acc })
    }

    fn factor(&mut self) -> Result<LaurentSymbol, ExprError> {
        let base = self.atom()?;
        if self.peek() != Some(&Tok::Caret) {
            return Ok(base);
        }
        self.bump();
        let neg_exp = if self.peek() == Some(&Tok::Minus) {
            self.bump();
            true
        } else {
            false
        };
        let pos = self.here();
        let n = match self.bump() {
            Some(Tok::Int(n)) => n,
            _ => return Err(ExprError::Syntax { pos, message: "expected integer exponent".into() }),
        };
        let e: i64 = (&n)
            .try_into()
            .map_err(|_| ExprError::Syntax { pos, message: "exponent too large".into() })?;
        if neg_exp {
            // negative power: the base must be an invertible monomial
            let inv = base.monomial_inverse().map_err(|err| ExprError::Domain(err.to_string()))?;
            Ok(inv.pow(e as u32)?)
        } else {
            Ok(base.pow(e as u32)?)
        }
    }

    fn atom(&mut self) -> Result<LaurentSymbol, ExprError> {
        let pos = self.here();
        match self.bump() {
            Some(Tok::LParen) => {
                let inner = self.expr()?;
                self.expect(Tok::RParen, "')'")?;
                Ok(inner)
            }
            Some(Tok::Int(n)) => {
                let num = BigRational::from_integer(n);
                let value = if self.peek() == Some(&Tok::Slash) {
                    self.bump();
                    let dpos = self.here();
                    match self.bump() {
                        Some(Tok::Int(d)) if !d.is_zero() => num / BigRational::from_integer(d),
                        Some(Tok::Int(_)) => {
                            return Err(ExprError::Syntax {
                                pos: dpos,
                                message: "zero denominator".into(),
                            })
                        }
                        _ => {
                            return Err(ExprError::Syntax {
                                pos: dpos,
                                message: "expected denominator".into(),
                            })
                        }
                    }
                } else {
                    num
                };
                Ok(LaurentSymbol::constant(
                    self.space,
                    Scalar::new(value, BigRational::zero()),
                ))
            }
            Some(Tok::Ident(name)) if name == "i" => {
                Ok(LaurentSymbol::constant(self.space, Scalar::i()))
            }
            Some(Tok::Ident(name)) => {
                let var = resolve_var(&name, self.space)?;
                Ok(LaurentSymbol::var(self.space, var)?)
            }
            _ => Err(ExprError::Syntax { pos, message: "expected a term".into() }),
        }
    }
}

/// Parse an expression into a symbol over `space`.
pub fn parse_symbol(input: &str, space: &VarSpace) -> Result<LaurentSymbol, ExprError> {
    let toks = lex(input)?;
    let mut p = Parser { toks, pos: 0, space, len: input.len() };
    let s = p.expr()?;
    if p.pos != p.toks.len() {
        return Err(p.syntax("trailing input"));
    }
    Ok(s)
}

fn fmt_rational(r: &BigRational) -> String {
    if r.denom().is_one() {
        format!("{}", r.numer())
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

/// Whether the scalar needs parentheses when used as a coefficient
/// in front of a monomial (`a + b*i` with both parts nonzero).
fn is_mixed(c: &Scalar) -> bool {
    !c.re().is_zero() && !c.im().is_zero()
}

fn print_coefficient(c: &Scalar) -> String {
    if c.re().is_zero() && !c.im().is_zero() {
        let mag = c.im().abs();
        let sign = if c.im().is_negative() { "-" } else { "" };
        if mag.is_one() {
            return format!("{}i", sign);
        }
        return format!("{}{}*i", sign, fmt_rational(&mag));
    }
    c.to_string()
}

fn print_term(space: &VarSpace, exps: &[i64], c: &Scalar) -> String {
    let vars = space.vars();
    let mono: Vec<String> = exps
        .iter()
        .enumerate()
        .filter(|(_, &e)| e != 0)
        .map(|(idx, &e)| {
            if e == 1 {
                vars[idx].to_string()
            } else {
                format!("{}^{}", vars[idx], e)
            }
        })
        .collect();
    if mono.is_empty() {
        return print_coefficient(c);
    }
    let mono = mono.join("*");
    if c.is_one() {
        mono
    } else if (-c).is_one() {
        format!("-{}", mono)
    } else if is_mixed(c) {
        format!("({})*{}", print_coefficient(c), mono)
    } else {
        format!("{}*{}", print_coefficient(c), mono)
    }
}

/// Canonical printing: terms in lexicographic exponent-vector order,
/// leading signs folded into the separators.
pub fn print_symbol(s: &LaurentSymbol) -> String {
    if s.is_zero() {
        return "0".to_string();
    }
    let mut out = String::new();
    for (k, (e, c)) in s.terms().enumerate() {
        let t = print_term(s.space(), e, c);
        if k == 0 {
            out.push_str(&t);
        } else if let Some(rest) = t.strip_prefix('-') {
            out.push('-');
            out.push_str(rest);
        } else {
            out.push('+');
            out.push_str(&t);
        }
    }
    out
}

/// A strict monomial over named chart variables: coefficient times a
/// product of `name^k` with integer exponents. Used by half-form
/// atlases, where the declared chart units may carry negative powers.
pub fn parse_named_monomial(
    input: &str,
    allowed: &[String],
) -> Result<(Scalar, std::collections::BTreeMap<String, i64>), ExprError> {
    let toks = lex(input)?;
    let mut coeff = Scalar::one();
    let mut exps: std::collections::BTreeMap<String, i64> = std::collections::BTreeMap::new();
    let mut pos = 0usize;
    let mut expect_factor = true;
    let mut negate = false;
    while pos < toks.len() {
        let (at, tok) = &toks[pos];
        if !expect_factor {
            match tok {
                Tok::Star => {
                    pos += 1;
                    expect_factor = true;
                    continue;
                }
                _ => {
                    return Err(ExprError::Syntax { pos: *at, message: "expected '*'".into() });
                }
            }
        }
        match tok {
            Tok::Minus if expect_factor => {
                negate = !negate;
                pos += 1;
            }
            Tok::Int(n) => {
                let mut val = BigRational::from_integer(n.clone());
                pos += 1;
                if pos < toks.len() && toks[pos].1 == Tok::Slash {
                    pos += 1;
                    match toks.get(pos) {
                        Some((_, Tok::Int(d))) if !d.is_zero() => {
                            val /= BigRational::from_integer(d.clone());
                            pos += 1;
                        }
                        _ => {
                            return Err(ExprError::Syntax {
                                pos: toks.get(pos).map(|(p, _)| *p).unwrap_or(input.len()),
                                message: "expected nonzero denominator".into(),
                            })
                        }
                    }
                }
                coeff *= &Scalar::new(val, BigRational::zero());
                expect_factor = false;
            }
            Tok::Ident(name) if name == "i" => {
                coeff *= &Scalar::i();
                pos += 1;
                expect_factor = false;
            }
            Tok::Ident(name) => {
                if !allowed.iter().any(|a| a == name) {
                    return Err(ExprError::Domain(format!(
                        "'{}' is not a declared chart variable",
                        name
                    )));
                }
                let name = name.clone();
                pos += 1;
                let mut e = 1i64;
                if pos < toks.len() && toks[pos].1 == Tok::Caret {
                    pos += 1;
                    let mut neg = false;
                    if let Some((_, Tok::Minus)) = toks.get(pos) {
                        neg = true;
                        pos += 1;
                    }
                    match toks.get(pos) {
                        Some((_, Tok::Int(n))) => {
                            e = n.try_into().map_err(|_| ExprError::Domain("exponent too large".into()))?;
                            if neg {
                                e = -e;
                            }
                            pos += 1;
                        }
                        _ => {
                            return Err(ExprError::Syntax {
                                pos: toks.get(pos).map(|(p, _)| *p).unwrap_or(input.len()),
                                message: "expected integer exponent".into(),
                            })
                        }
                    }
                }
                *exps.entry(name).or_insert(0) += e;
                expect_factor = false;
            }
            _ => {
                return Err(ExprError::Syntax { pos: *at, message: "expected a factor".into() });
            }
        }
    }
    if expect_factor {
        return Err(ExprError::Syntax { pos: input.len(), message: "expected a factor".into() });
    }
    if negate {
        coeff = -coeff;
    }
    exps.retain(|_, e| *e != 0);
    Ok((coeff, exps))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sp() -> VarSpace {
        VarSpace::e_space(2)
    }

    #[test]
    fn parses_spec_example() {
        let s = parse_symbol("3/2*x1^2*xi1^-1", &sp()).unwrap();
        assert_eq!(s.n_terms(), 1);
        assert_eq!(print_symbol(&s), "3/2*x1^2*xi1^-1");
    }

    #[test]
    fn double_plus_is_a_syntax_error() {
        let err = parse_symbol("x1 + + x2", &sp()).unwrap_err();
        match err {
            ExprError::Syntax { pos, .. } => assert_eq!(pos, 5),
            other => panic!("expected syntax error, got {:?}", other),
        }
    }

    #[test]
    fn negative_base_exponent_is_domain_error() {
        let err = parse_symbol("x1^-1", &sp()).unwrap_err();
        assert!(matches!(err, ExprError::Domain(_)));
        // but fine on a unit chart
        let su = VarSpace::e_space(2).with_units(&[1]);
        assert!(parse_symbol("x1^-1", &su).is_ok());
    }

    #[test]
    fn unknown_identifier() {
        assert!(matches!(parse_symbol("y1", &sp()), Err(ExprError::Domain(_))));
        assert!(matches!(parse_symbol("xi3", &sp()), Err(ExprError::Domain(_))));
    }

    #[test]
    fn mixed_coefficients_round_trip() {
        let sp = sp();
        for text in [
            "0",
            "1",
            "-1",
            "i",
            "-i",
            "x1",
            "-x1+x2",
            "(1-2*i)*x1*xi2^-3",
            "1/2-3*i",
            "2*xi1^2-x1*x2",
            "x1^2*xi1^-1+xi2",
        ] {
            let v = parse_symbol(text, &sp).unwrap();
            let printed = print_symbol(&v);
            let reparsed = parse_symbol(&printed, &sp).unwrap();
            assert_eq!(v, reparsed, "round trip through {:?}", printed);
        }
    }

    #[test]
    fn parenthesized_sums_and_powers() {
        let sp = sp();
        let v = parse_symbol("(x1+x2)^2", &sp).unwrap();
        let w = parse_symbol("x1^2+2*x1*x2+x2^2", &sp).unwrap();
        assert_eq!(v, w);
    }

    #[test]
    fn named_monomials() {
        let allowed = vec!["z".to_string()];
        let (c, e) = parse_named_monomial("-z^-2", &allowed).unwrap();
        assert_eq!(c, Scalar::from_int(-1));
        assert_eq!(e.get("z"), Some(&-2));
        let (c, e) = parse_named_monomial("i*z^-1", &allowed).unwrap();
        assert_eq!(c, Scalar::i());
        assert_eq!(e.get("z"), Some(&-1));
        assert!(parse_named_monomial("w", &allowed).is_err());
    }
}
