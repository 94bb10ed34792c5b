//! Concrete `.p1` surface syntax: lexer, recursive-descent parser and
//! renderer.
//!
//! The surface language adds implication/bi-implication and the quantifier
//! sugar (`exists`, `forall`, `E>=`, `E%(d,c)`, Härtig `I`, Rescher `R`/`R>`,
//! `pct>=`), all of which desugar into the core AST. Precedence is
//! `!` > `&` > `|` > `->` > `<->`.

use std::fmt;

use num::{BigInt, BigUint, One, Signed, Zero};
use thiserror::Error;

use crate::formula::{CountRel, CountingTerm, Formula};

/// Byte offsets `[start, end)` into the input text.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub struct SourceSpan {
    pub start: usize,
    pub end: usize,
}

impl fmt::Display for SourceSpan {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}..{}", self.start, self.end)
    }
}

#[derive(Error, Debug, Clone, PartialEq, Eq)]
#[error("parse error at {span}: {message}{}", expected.as_ref().map(|e| format!(" (expected {e})")).unwrap_or_default())]
pub struct ParseError {
    pub message: String,
    pub span: SourceSpan,
    pub expected: Option<String>,
}

impl ParseError {
    fn new(message: impl Into<String>, span: SourceSpan) -> ParseError {
        ParseError {
            message: message.into(),
            span,
            expected: None,
        }
    }

    fn expecting(message: impl Into<String>, span: SourceSpan, expected: impl Into<String>) -> ParseError {
        ParseError {
            message: message.into(),
            span,
            expected: Some(expected.into()),
        }
    }
}

#[derive(Error, Debug, Clone, PartialEq, Eq)]
pub enum DesugarError {
    #[error("counting threshold must be nonnegative, got {0}")]
    NegativeThreshold(BigInt),
    #[error("percentage must lie in [0, 100], got {0}")]
    PercentageOutOfRange(BigInt),
}

/// A quantifier form of the surface syntax, prior to desugaring.
#[derive(Clone, Debug)]
pub enum SurfaceQuantifier {
    Exists(Formula),
    Forall(Formula),
    AtLeast(BigInt, Formula),
    Modulo {
        residue: BigUint,
        modulus: BigUint,
        body: Formula,
    },
    Hartig(Formula, Formula),
    Rescher(Formula, Formula),
    RescherStrict(Formula, Formula),
    PercentAtLeast(BigInt, Formula),
}

/// Rewrites a surface quantifier into a counting-term constraint.
pub fn desugar_quantifier(q: SurfaceQuantifier) -> Result<Formula, DesugarError> {
    match q {
        SurfaceQuantifier::Exists(body) => Ok(Formula::at_least(1, body)),
        SurfaceQuantifier::Forall(body) => Ok(Formula::Count(
            CountingTerm::single(1, Formula::not(body)),
            CountRel::Leq(BigInt::zero()),
        )),
        SurfaceQuantifier::AtLeast(k, body) => {
            if k.is_negative() {
                return Err(DesugarError::NegativeThreshold(k));
            }
            Ok(Formula::Count(CountingTerm::single(1, body), CountRel::Geq(k)))
        }
        SurfaceQuantifier::Modulo {
            residue,
            modulus,
            body,
        } => Ok(Formula::Count(
            CountingTerm::single(1, body),
            CountRel::Cong { modulus, residue },
        )),
        SurfaceQuantifier::Hartig(a, b) => {
            let diff = || {
                CountingTerm::new(vec![
                    (BigInt::one(), a.clone()),
                    (BigInt::from(-1), b.clone()),
                ])
            };
            Ok(Formula::and(
                Formula::Count(diff(), CountRel::Geq(BigInt::zero())),
                Formula::Count(diff(), CountRel::Leq(BigInt::zero())),
            ))
        }
        SurfaceQuantifier::Rescher(a, b) => Ok(Formula::Count(
            CountingTerm::new(vec![(BigInt::one(), a), (BigInt::from(-1), b)]),
            CountRel::Geq(BigInt::zero()),
        )),
        SurfaceQuantifier::RescherStrict(a, b) => Ok(Formula::Count(
            CountingTerm::new(vec![(BigInt::one(), a), (BigInt::from(-1), b)]),
            CountRel::Geq(BigInt::one()),
        )),
        SurfaceQuantifier::PercentAtLeast(p, body) => {
            if p.is_negative() || p > BigInt::from(100) {
                return Err(DesugarError::PercentageOutOfRange(p));
            }
            let mut summands = vec![(BigInt::from(100), body)];
            if !p.is_zero() {
                summands.push((-p, Formula::Top));
            }
            Ok(Formula::Count(
                CountingTerm::new(summands),
                CountRel::Geq(BigInt::zero()),
            ))
        }
    }
}

#[derive(Clone, PartialEq, Eq, Debug)]
enum Token {
    Ident(String),
    Int(BigInt),
    LParen,
    RParen,
    Comma,
    Dot,
    Amp,
    Pipe,
    Bang,
    Arrow,
    Iff,
    HashBracket,
    RBracket,
    Plus,
    Minus,
    Star,
    Percent,
    Ge,
    Le,
    EqSym,
    Ne,
    Lt,
    Gt,
    True,
    False,
    Exists,
    Forall,
    /// `E>=` head of a threshold quantifier.
    AtLeastHead,
    /// `E%(` head of a modulo quantifier.
    ModuloHead,
    /// `R>(` head of the strict Rescher quantifier.
    RescherStrictHead,
    /// `pct>=(` head of a percentage constraint.
    PercentHead,
    Eof,
}

impl Token {
    fn describe(&self) -> String {
        match self {
            Token::Ident(s) => format!("identifier `{s}`"),
            Token::Int(n) => format!("integer `{n}`"),
            Token::LParen => "`(`".into(),
            Token::RParen => "`)`".into(),
            Token::Comma => "`,`".into(),
            Token::Dot => "`.`".into(),
            Token::Amp => "`&`".into(),
            Token::Pipe => "`|`".into(),
            Token::Bang => "`!`".into(),
            Token::Arrow => "`->`".into(),
            Token::Iff => "`<->`".into(),
            Token::HashBracket => "`#[`".into(),
            Token::RBracket => "`]`".into(),
            Token::Plus => "`+`".into(),
            Token::Minus => "`-`".into(),
            Token::Star => "`*`".into(),
            Token::Percent => "`%`".into(),
            Token::Ge => "`>=`".into(),
            Token::Le => "`<=`".into(),
            Token::EqSym => "`=`".into(),
            Token::Ne => "`!=`".into(),
            Token::Lt => "`<`".into(),
            Token::Gt => "`>`".into(),
            Token::True => "`true`".into(),
            Token::False => "`false`".into(),
            Token::Exists => "`exists`".into(),
            Token::Forall => "`forall`".into(),
            Token::AtLeastHead => "`E>=`".into(),
            Token::ModuloHead => "`E%(`".into(),
            Token::RescherStrictHead => "`R>(`".into(),
            Token::PercentHead => "`pct>=(`".into(),
            Token::Eof => "end of input".into(),
        }
    }
}

fn lex(text: &str) -> Result<Vec<(Token, SourceSpan)>, ParseError> {
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        let start = i;
        match c {
            b' ' | b'\t' | b'\r' | b'\n' => {
                i += 1;
            }
            b'/' if bytes.get(i + 1) == Some(&b'/') => {
                while i < bytes.len() && bytes[i] != b'\n' {
                    i += 1;
                }
            }
            b'(' => {
                out.push((Token::LParen, span(start, i + 1)));
                i += 1;
            }
            b')' => {
                out.push((Token::RParen, span(start, i + 1)));
                i += 1;
            }
            b',' => {
                out.push((Token::Comma, span(start, i + 1)));
                i += 1;
            }
            b'.' => {
                out.push((Token::Dot, span(start, i + 1)));
                i += 1;
            }
            b'&' => {
                out.push((Token::Amp, span(start, i + 1)));
                i += 1;
            }
            b'|' => {
                out.push((Token::Pipe, span(start, i + 1)));
                i += 1;
            }
            b']' => {
                out.push((Token::RBracket, span(start, i + 1)));
                i += 1;
            }
            b'+' => {
                out.push((Token::Plus, span(start, i + 1)));
                i += 1;
            }
            b'*' => {
                out.push((Token::Star, span(start, i + 1)));
                i += 1;
            }
            b'%' => {
                out.push((Token::Percent, span(start, i + 1)));
                i += 1;
            }
            b'=' => {
                out.push((Token::EqSym, span(start, i + 1)));
                i += 1;
            }
            b'!' => {
                if bytes.get(i + 1) == Some(&b'=') {
                    out.push((Token::Ne, span(start, i + 2)));
                    i += 2;
                } else {
                    out.push((Token::Bang, span(start, i + 1)));
                    i += 1;
                }
            }
            b'#' => {
                if bytes.get(i + 1) == Some(&b'[') {
                    out.push((Token::HashBracket, span(start, i + 2)));
                    i += 2;
                } else {
                    return Err(ParseError::expecting(
                        "stray `#`",
                        span(start, i + 1),
                        "`#[`",
                    ));
                }
            }
            b'-' => {
                if bytes.get(i + 1) == Some(&b'>') {
                    out.push((Token::Arrow, span(start, i + 2)));
                    i += 2;
                } else {
                    out.push((Token::Minus, span(start, i + 1)));
                    i += 1;
                }
            }
            b'<' => {
                if bytes.get(i + 1) == Some(&b'-') && bytes.get(i + 2) == Some(&b'>') {
                    out.push((Token::Iff, span(start, i + 3)));
                    i += 3;
                } else if bytes.get(i + 1) == Some(&b'=') {
                    out.push((Token::Le, span(start, i + 2)));
                    i += 2;
                } else {
                    out.push((Token::Lt, span(start, i + 1)));
                    i += 1;
                }
            }
            b'>' => {
                if bytes.get(i + 1) == Some(&b'=') {
                    out.push((Token::Ge, span(start, i + 2)));
                    i += 2;
                } else {
                    out.push((Token::Gt, span(start, i + 1)));
                    i += 1;
                }
            }
            b'0'..=b'9' => {
                let mut j = i;
                while j < bytes.len() && bytes[j].is_ascii_digit() {
                    j += 1;
                }
                let value: BigInt = text[i..j].parse().expect("digit run parses");
                out.push((Token::Int(value), span(i, j)));
                i = j;
            }
            b'A'..=b'Z' | b'a'..=b'z' | b'_' => {
                let mut j = i;
                while j < bytes.len()
                    && (bytes[j].is_ascii_alphanumeric() || bytes[j] == b'_')
                {
                    j += 1;
                }
                let word = &text[i..j];
                i = j;
                let tok = match word {
                    "true" => Token::True,
                    "false" => Token::False,
                    "exists" => Token::Exists,
                    "forall" => Token::Forall,
                    "E" if bytes.get(i) == Some(&b'>') && bytes.get(i + 1) == Some(&b'=') => {
                        i += 2;
                        Token::AtLeastHead
                    }
                    "E" if bytes.get(i) == Some(&b'%') && bytes.get(i + 1) == Some(&b'(') => {
                        i += 2;
                        Token::ModuloHead
                    }
                    "R" if bytes.get(i) == Some(&b'>') && bytes.get(i + 1) == Some(&b'(') => {
                        i += 2;
                        Token::RescherStrictHead
                    }
                    "pct"
                        if bytes.get(i) == Some(&b'>')
                            && bytes.get(i + 1) == Some(&b'=')
                            && bytes.get(i + 2) == Some(&b'(') =>
                    {
                        i += 3;
                        Token::PercentHead
                    }
                    _ => Token::Ident(word.to_string()),
                };
                out.push((tok, span(start, i)));
            }
            _ => {
                return Err(ParseError::new(
                    format!("unexpected character `{}`", &text[i..i + 1]),
                    span(start, i + 1),
                ));
            }
        }
    }
    out.push((Token::Eof, span(bytes.len(), bytes.len())));
    Ok(out)
}

fn span(start: usize, end: usize) -> SourceSpan {
    SourceSpan { start, end }
}

struct Parser {
    tokens: Vec<(Token, SourceSpan)>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> &Token {
        &self.tokens[self.pos].0
    }

    fn peek_at(&self, offset: usize) -> &Token {
        let i = (self.pos + offset).min(self.tokens.len() - 1);
        &self.tokens[i].0
    }

    fn peek_span(&self) -> SourceSpan {
        self.tokens[self.pos].1
    }

    fn next(&mut self) -> (Token, SourceSpan) {
        let item = self.tokens[self.pos].clone();
        if self.pos + 1 < self.tokens.len() {
            self.pos += 1;
        }
        item
    }

    fn expect(&mut self, expected: &Token) -> Result<SourceSpan, ParseError> {
        if self.peek() == expected {
            Ok(self.next().1)
        } else {
            Err(ParseError::expecting(
                format!("found {}", self.peek().describe()),
                self.peek_span(),
                expected.describe(),
            ))
        }
    }

    fn parse_formula(&mut self) -> Result<Formula, ParseError> {
        let mut lhs = self.parse_impl()?;
        while *self.peek() == Token::Iff {
            self.next();
            let rhs = self.parse_impl()?;
            // a <-> b  as  (!a | b) & (a | !b)
            lhs = Formula::and(
                Formula::or(Formula::not(lhs.clone()), rhs.clone()),
                Formula::or(lhs, Formula::not(rhs)),
            );
        }
        Ok(lhs)
    }

    fn parse_impl(&mut self) -> Result<Formula, ParseError> {
        let lhs = self.parse_disj()?;
        if *self.peek() == Token::Arrow {
            self.next();
            let rhs = self.parse_impl()?;
            return Ok(Formula::or(Formula::not(lhs), rhs));
        }
        Ok(lhs)
    }

    fn parse_disj(&mut self) -> Result<Formula, ParseError> {
        let mut lhs = self.parse_conj()?;
        while *self.peek() == Token::Pipe {
            self.next();
            let rhs = self.parse_conj()?;
            lhs = Formula::or(lhs, rhs);
        }
        Ok(lhs)
    }

    fn parse_conj(&mut self) -> Result<Formula, ParseError> {
        let mut lhs = self.parse_unary()?;
        while *self.peek() == Token::Amp {
            self.next();
            let rhs = self.parse_unary()?;
            lhs = Formula::and(lhs, rhs);
        }
        Ok(lhs)
    }

    fn parse_unary(&mut self) -> Result<Formula, ParseError> {
        match self.peek() {
            Token::Bang => {
                self.next();
                Ok(Formula::not(self.parse_unary()?))
            }
            Token::LParen => {
                self.next();
                let inner = self.parse_formula()?;
                self.expect(&Token::RParen)?;
                Ok(inner)
            }
            _ => self.parse_atom(),
        }
    }

    fn parse_atom(&mut self) -> Result<Formula, ParseError> {
        match self.peek().clone() {
            Token::True => {
                self.next();
                Ok(Formula::Top)
            }
            Token::False => {
                self.next();
                Ok(Formula::Bottom)
            }
            Token::HashBracket | Token::Int(_) | Token::Minus => self.parse_constraint(),
            Token::Exists | Token::Forall => {
                let (tok, _) = self.next();
                let body = self.parse_quantifier_body()?;
                let q = match tok {
                    Token::Exists => SurfaceQuantifier::Exists(body),
                    _ => SurfaceQuantifier::Forall(body),
                };
                self.desugar(q, self.peek_span())
            }
            Token::AtLeastHead => {
                self.next();
                let (k, kspan) = self.parse_signed_int()?;
                let body = self.parse_quantifier_body()?;
                self.desugar(SurfaceQuantifier::AtLeast(k, body), kspan)
            }
            Token::ModuloHead => {
                self.next();
                let (d, dspan) = self.parse_unsigned_int("residue")?;
                self.expect(&Token::Comma)?;
                let (c, cspan) = self.parse_unsigned_int("modulus")?;
                self.expect(&Token::RParen)?;
                let body = self.parse_quantifier_body()?;
                let (modulus, residue) = validate_modulus(&c, cspan, &d, dspan)?;
                self.desugar(
                    SurfaceQuantifier::Modulo {
                        residue,
                        modulus,
                        body,
                    },
                    cspan,
                )
            }
            Token::RescherStrictHead => {
                self.next();
                let (a, b) = self.parse_formula_pair()?;
                self.desugar(SurfaceQuantifier::RescherStrict(a, b), self.peek_span())
            }
            Token::PercentHead => {
                self.next();
                let (p, pspan) = self.parse_signed_int()?;
                self.expect(&Token::Comma)?;
                let body = self.parse_formula()?;
                self.expect(&Token::RParen)?;
                self.desugar(SurfaceQuantifier::PercentAtLeast(p, body), pspan)
            }
            Token::Ident(name) => {
                // `I(...)` and `R(...)` are quantifiers unless the argument
                // list is exactly `(x)`, which makes them ordinary atoms.
                let binary = (name == "I" || name == "R")
                    && *self.peek_at(1) == Token::LParen
                    && !(matches!(self.peek_at(2), Token::Ident(v) if v == "x")
                        && *self.peek_at(3) == Token::RParen);
                if binary {
                    self.next();
                    self.next(); // the `(`
                    let a = self.parse_formula()?;
                    self.expect(&Token::Comma)?;
                    let b = self.parse_formula()?;
                    self.expect(&Token::RParen)?;
                    let q = if name == "I" {
                        SurfaceQuantifier::Hartig(a, b)
                    } else {
                        SurfaceQuantifier::Rescher(a, b)
                    };
                    return self.desugar(q, self.peek_span());
                }
                let (_, name_span) = self.next();
                if name == "x" {
                    return Err(ParseError::new(
                        "`x` is the bound variable, not a predicate",
                        name_span,
                    ));
                }
                self.expect(&Token::LParen)?;
                let var_span = self.peek_span();
                match self.next().0 {
                    Token::Ident(v) if v == "x" => {}
                    other => {
                        return Err(ParseError::expecting(
                            format!("found {}", other.describe()),
                            var_span,
                            "`x`",
                        ));
                    }
                }
                self.expect(&Token::RParen)?;
                Ok(Formula::atom(name))
            }
            other => Err(ParseError::expecting(
                format!("found {}", other.describe()),
                self.peek_span(),
                "a formula",
            )),
        }
    }

    fn parse_quantifier_body(&mut self) -> Result<Formula, ParseError> {
        let var_span = self.peek_span();
        match self.next().0 {
            Token::Ident(v) if v == "x" => {}
            other => {
                return Err(ParseError::expecting(
                    format!("found {}", other.describe()),
                    var_span,
                    "`x`",
                ));
            }
        }
        self.expect(&Token::Dot)?;
        self.parse_unary()
    }

    fn parse_formula_pair(&mut self) -> Result<(Formula, Formula), ParseError> {
        let a = self.parse_formula()?;
        self.expect(&Token::Comma)?;
        let b = self.parse_formula()?;
        self.expect(&Token::RParen)?;
        Ok((a, b))
    }

    fn desugar(&self, q: SurfaceQuantifier, at: SourceSpan) -> Result<Formula, ParseError> {
        desugar_quantifier(q).map_err(|e| ParseError::new(e.to_string(), at))
    }

    /// `t REL INT` or `t % INT (=|!=) INT`, with the comparison sugar
    /// expanded into the core `>=`/`<=`/congruence forms.
    fn parse_constraint(&mut self) -> Result<Formula, ParseError> {
        let term = self.parse_linterm()?;
        let (rel_tok, rel_span) = self.next();
        match rel_tok {
            Token::Ge => {
                let (b, bspan) = self.parse_signed_int()?;
                if b.is_negative() {
                    return Err(ParseError::new(
                        format!("threshold of `>=` must be nonnegative, got {b}"),
                        bspan,
                    ));
                }
                Ok(Formula::Count(term, CountRel::Geq(b)))
            }
            Token::Le => {
                let (b, _) = self.parse_signed_int()?;
                Ok(Formula::Count(term, CountRel::Leq(b)))
            }
            Token::EqSym => {
                let (b, bspan) = self.parse_signed_int()?;
                if b.is_negative() {
                    return Err(ParseError::new(
                        format!("threshold of `=` must be nonnegative, got {b}"),
                        bspan,
                    ));
                }
                Ok(Formula::and(
                    Formula::Count(term.clone(), CountRel::Geq(b.clone())),
                    Formula::Count(term, CountRel::Leq(b)),
                ))
            }
            Token::Gt => {
                let (b, bspan) = self.parse_signed_int()?;
                let b = b + BigInt::one();
                if b.is_negative() {
                    return Err(ParseError::new(
                        format!("threshold of `>` must be at least -1, got {}", b - BigInt::one()),
                        bspan,
                    ));
                }
                Ok(Formula::Count(term, CountRel::Geq(b)))
            }
            Token::Lt => {
                let (b, _) = self.parse_signed_int()?;
                Ok(Formula::Count(term, CountRel::Leq(b - 1)))
            }
            Token::Percent => {
                let (c, cspan) = self.parse_unsigned_int("modulus")?;
                let (cmp, cmp_span) = self.next();
                let negated = match cmp {
                    Token::EqSym => false,
                    Token::Ne => true,
                    other => {
                        return Err(ParseError::expecting(
                            format!("found {}", other.describe()),
                            cmp_span,
                            "`=` or `!=`",
                        ));
                    }
                };
                let (d, dspan) = self.parse_unsigned_int("residue")?;
                let (modulus, residue) = validate_modulus(&c, cspan, &d, dspan)?;
                let rel = if negated {
                    CountRel::NotCong { modulus, residue }
                } else {
                    CountRel::Cong { modulus, residue }
                };
                Ok(Formula::Count(term, rel))
            }
            other => Err(ParseError::expecting(
                format!("found {}", other.describe()),
                rel_span,
                "a comparison (`>=`, `<=`, `=`, `<`, `>` or `%`)",
            )),
        }
    }

    fn parse_linterm(&mut self) -> Result<CountingTerm, ParseError> {
        let mut summands = Vec::new();
        let first = self.parse_summand(BigInt::one())?;
        summands.push(first);
        loop {
            let sign = match self.peek() {
                Token::Plus => BigInt::one(),
                Token::Minus => BigInt::from(-1),
                _ => break,
            };
            self.next();
            summands.push(self.parse_summand(sign)?);
        }
        Ok(CountingTerm::new(summands))
    }

    /// `[INT '*'] '#[' formula ']'` with the given sign applied to the
    /// coefficient (1 when the INT is absent).
    fn parse_summand(&mut self, sign: BigInt) -> Result<(BigInt, Formula), ParseError> {
        let coeff = if matches!(self.peek(), Token::Int(_))
            || (*self.peek() == Token::Minus && matches!(self.peek_at(1), Token::Int(_)))
        {
            let (value, vspan) = self.parse_signed_int()?;
            self.expect(&Token::Star)?;
            if value.is_zero() {
                return Err(ParseError::new(
                    "coefficient of a counting term must be nonzero",
                    vspan,
                ));
            }
            value
        } else {
            BigInt::one()
        };
        self.expect(&Token::HashBracket)?;
        let body = self.parse_formula()?;
        self.expect(&Token::RBracket)?;
        Ok((sign * coeff, body))
    }

    fn parse_signed_int(&mut self) -> Result<(BigInt, SourceSpan), ParseError> {
        let negative = if *self.peek() == Token::Minus {
            self.next();
            true
        } else {
            false
        };
        let (tok, sp) = self.next();
        match tok {
            Token::Int(v) => Ok((if negative { -v } else { v }, sp)),
            other => Err(ParseError::expecting(
                format!("found {}", other.describe()),
                sp,
                "an integer",
            )),
        }
    }

    fn parse_unsigned_int(&mut self, what: &str) -> Result<(BigInt, SourceSpan), ParseError> {
        let (tok, sp) = self.next();
        match tok {
            Token::Int(v) => Ok((v, sp)),
            other => Err(ParseError::expecting(
                format!("found {}", other.describe()),
                sp,
                format!("a nonnegative integer ({what})"),
            )),
        }
    }
}

fn validate_modulus(
    c: &BigInt,
    cspan: SourceSpan,
    d: &BigInt,
    dspan: SourceSpan,
) -> Result<(BigUint, BigUint), ParseError> {
    if c.is_zero() {
        return Err(ParseError::new("modulus must be at least 1", cspan));
    }
    let modulus = c.to_biguint().expect("unsigned lexeme");
    if d >= c {
        return Err(ParseError::new(
            format!("residue {d} is not a remainder modulo {c}"),
            dspan,
        ));
    }
    let residue = d.to_biguint().expect("unsigned lexeme");
    Ok((modulus, residue))
}

/// Parses `.p1` surface text into a formula.
pub fn parse(text: &str) -> Result<Formula, ParseError> {
    let tokens = lex(text)?;
    let mut parser = Parser { tokens, pos: 0 };
    let formula = parser.parse_formula()?;
    let (tok, sp) = parser.next();
    if tok != Token::Eof {
        return Err(ParseError::expecting(
            format!("found {}", tok.describe()),
            sp,
            "end of input",
        ));
    }
    Ok(formula)
}

// Precedence levels used by the renderer; higher binds tighter.
const LEVEL_OR: u8 = 1;
const LEVEL_AND: u8 = 2;
const LEVEL_NOT: u8 = 3;
const LEVEL_ATOM: u8 = 4;

/// Renders a formula back to `.p1` text. `parse(render(f))` is structurally
/// equal to `f` for formulas in the image of the core grammar; sugar is not
/// reconstructed.
pub fn render(formula: &Formula) -> String {
    let mut out = String::new();
    render_into(formula, LEVEL_OR, &mut out);
    out
}

fn render_into(formula: &Formula, min_level: u8, out: &mut String) {
    let level = match formula {
        Formula::Or(..) => LEVEL_OR,
        Formula::And(..) => LEVEL_AND,
        Formula::Not(..) => LEVEL_NOT,
        _ => LEVEL_ATOM,
    };
    let parens = level < min_level;
    if parens {
        out.push('(');
    }
    match formula {
        Formula::Atom(p) => {
            out.push_str(p);
            out.push_str("(x)");
        }
        Formula::Top => out.push_str("true"),
        Formula::Bottom => out.push_str("false"),
        Formula::Not(f) => {
            out.push('!');
            render_into(f, LEVEL_NOT, out);
        }
        Formula::And(a, b) => {
            render_into(a, LEVEL_AND, out);
            out.push_str(" & ");
            render_into(b, LEVEL_AND + 1, out);
        }
        Formula::Or(a, b) => {
            render_into(a, LEVEL_OR, out);
            out.push_str(" | ");
            render_into(b, LEVEL_OR + 1, out);
        }
        Formula::Count(term, rel) => {
            render_term(term, out);
            match rel {
                CountRel::Geq(b) => out.push_str(&format!(" >= {b}")),
                CountRel::Leq(b) => out.push_str(&format!(" <= {b}")),
                CountRel::Cong { modulus, residue } => {
                    out.push_str(&format!(" % {modulus} = {residue}"))
                }
                CountRel::NotCong { modulus, residue } => {
                    out.push_str(&format!(" % {modulus} != {residue}"))
                }
            }
        }
    }
    if parens {
        out.push(')');
    }
}

fn render_term(term: &CountingTerm, out: &mut String) {
    for (i, (coeff, body)) in term.summands.iter().enumerate() {
        if i == 0 {
            if !coeff.is_one() {
                out.push_str(&format!("{coeff}*"));
            }
        } else if coeff.is_negative() {
            out.push_str(" - ");
            let mag = -coeff;
            if !mag.is_one() {
                out.push_str(&format!("{mag}*"));
            }
        } else {
            out.push_str(" + ");
            if !coeff.is_one() {
                out.push_str(&format!("{coeff}*"));
            }
        }
        out.push_str("#[");
        render_into(body, LEVEL_OR, out);
        out.push(']');
    }
}
