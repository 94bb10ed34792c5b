//! AST, signatures, finite structures and the semantic evaluator for the
//! one-variable counting logic.
//!
//! Everything here is immutable after construction and all operations are
//! pure, so values can be shared freely across threads.

use std::collections::BTreeMap;
use std::fmt;

use num::bigint::Sign;
use num::{BigInt, BigUint, Integer, Zero};
use thiserror::Error;

/// An ordered list of distinct unary predicate names. The position of a name
/// is its canonical bit index in [`OneType`] masks.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct Signature {
    names: Vec<String>,
}

#[derive(Error, Debug, Clone, PartialEq, Eq)]
pub enum SignatureError {
    #[error("duplicate predicate name `{0}`")]
    Duplicate(String),
    #[error("empty predicate name")]
    EmptyName,
    #[error("signature of size {0} exceeds the supported limit of 63 predicates")]
    TooLarge(usize),
}

impl Signature {
    pub fn new<I, S>(names: I) -> Result<Signature, SignatureError>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let names: Vec<String> = names.into_iter().map(Into::into).collect();
        if names.len() > 63 {
            return Err(SignatureError::TooLarge(names.len()));
        }
        for (i, n) in names.iter().enumerate() {
            if n.is_empty() {
                return Err(SignatureError::EmptyName);
            }
            if names[..i].contains(n) {
                return Err(SignatureError::Duplicate(n.clone()));
            }
        }
        Ok(Signature { names })
    }

    pub fn empty() -> Signature {
        Signature { names: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn position(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    /// True when every predicate of `other` occurs in `self`.
    pub fn contains_all(&self, other: &Signature) -> bool {
        other.names.iter().all(|n| self.position(n).is_some())
    }
}

/// An atomic 1-type: a complete truth assignment to the predicates of a
/// signature, packed as a bit mask (bit k set iff predicate k holds).
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub struct OneType {
    mask: u64,
}

impl OneType {
    pub fn from_mask(mask: u64) -> OneType {
        OneType { mask }
    }

    pub fn mask(&self) -> u64 {
        self.mask
    }

    pub fn holds(&self, position: usize) -> bool {
        (self.mask >> position) & 1 == 1
    }

    /// Human-readable rendering, e.g. `P,!Q` over the signature `[P, Q]`.
    pub fn describe(&self, sig: &Signature) -> String {
        if sig.is_empty() {
            return "<>".to_string();
        }
        let parts: Vec<String> = sig
            .names()
            .iter()
            .enumerate()
            .map(|(i, n)| {
                if self.holds(i) {
                    n.clone()
                } else {
                    format!("!{n}")
                }
            })
            .collect();
        parts.join(",")
    }
}

/// Comparison applied to the value of a counting term.
#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub enum CountRel {
    Geq(BigInt),
    Leq(BigInt),
    /// t is congruent to `residue` modulo `modulus`.
    Cong { modulus: BigUint, residue: BigUint },
    /// t is not congruent to `residue` modulo `modulus`.
    NotCong { modulus: BigUint, residue: BigUint },
}

impl CountRel {
    pub fn holds_for(&self, value: &BigInt) -> bool {
        match self {
            CountRel::Geq(b) => value >= b,
            CountRel::Leq(b) => value <= b,
            CountRel::Cong { modulus, residue } => {
                &euclidean_residue(value, modulus) == residue
            }
            CountRel::NotCong { modulus, residue } => {
                &euclidean_residue(value, modulus) != residue
            }
        }
    }
}

/// The residue of `value` modulo `modulus`, always in `[0, modulus - 1]`,
/// also for negative term values.
pub fn euclidean_residue(value: &BigInt, modulus: &BigUint) -> BigUint {
    let m = BigInt::from(modulus.clone());
    let r = value.mod_floor(&m);
    debug_assert!(r.sign() != Sign::Minus);
    r.to_biguint().expect("floor residue is nonnegative")
}

/// An integer linear combination of counting terms `a1*#[f1] + ... + an*#[fn]`.
#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub struct CountingTerm {
    pub summands: Vec<(BigInt, Formula)>,
}

impl CountingTerm {
    pub fn new(summands: Vec<(BigInt, Formula)>) -> CountingTerm {
        debug_assert!(!summands.is_empty());
        debug_assert!(summands.iter().all(|(a, _)| !a.is_zero()));
        CountingTerm { summands }
    }

    pub fn single(coeff: impl Into<BigInt>, body: Formula) -> CountingTerm {
        CountingTerm::new(vec![(coeff.into(), body)])
    }

    /// True when no summand body contains a counting comparison.
    pub fn is_counting_free(&self) -> bool {
        self.summands.iter().all(|(_, f)| f.is_counting_free())
    }
}

/// A formula of the logic. `Count` nodes are global: their truth does not
/// depend on the element at which the formula is evaluated.
#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub enum Formula {
    Atom(String),
    Top,
    Bottom,
    Not(Box<Formula>),
    And(Box<Formula>, Box<Formula>),
    Or(Box<Formula>, Box<Formula>),
    Count(CountingTerm, CountRel),
}

impl Formula {
    pub fn atom(name: impl Into<String>) -> Formula {
        Formula::Atom(name.into())
    }

    pub fn not(f: Formula) -> Formula {
        Formula::Not(Box::new(f))
    }

    pub fn and(a: Formula, b: Formula) -> Formula {
        Formula::And(Box::new(a), Box::new(b))
    }

    pub fn or(a: Formula, b: Formula) -> Formula {
        Formula::Or(Box::new(a), Box::new(b))
    }

    pub fn count(term: CountingTerm, rel: CountRel) -> Formula {
        Formula::Count(term, rel)
    }

    /// `#[body] >= k`
    pub fn at_least(k: impl Into<BigInt>, body: Formula) -> Formula {
        Formula::Count(CountingTerm::single(1, body), CountRel::Geq(k.into()))
    }

    pub fn is_counting_free(&self) -> bool {
        match self {
            Formula::Atom(_) | Formula::Top | Formula::Bottom => true,
            Formula::Not(f) => f.is_counting_free(),
            Formula::And(a, b) | Formula::Or(a, b) => {
                a.is_counting_free() && b.is_counting_free()
            }
            Formula::Count(..) => false,
        }
    }
}

/// A finite structure: a nonempty list of elements, each realizing the
/// 1-type it is listed with.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct FiniteStructure {
    signature: Signature,
    elements: Vec<OneType>,
}

#[derive(Error, Debug, Clone, PartialEq, Eq)]
pub enum StructureError {
    #[error("structures must have a nonempty universe")]
    EmptyUniverse,
    #[error("element type mask {0:#b} is out of range for a signature of size {1}")]
    MaskOutOfRange(u64, usize),
}

impl FiniteStructure {
    pub fn new(
        signature: Signature,
        elements: Vec<OneType>,
    ) -> Result<FiniteStructure, StructureError> {
        if elements.is_empty() {
            return Err(StructureError::EmptyUniverse);
        }
        let limit = 1u64.checked_shl(signature.len() as u32).unwrap_or(u64::MAX);
        for e in &elements {
            if e.mask() >= limit {
                return Err(StructureError::MaskOutOfRange(e.mask(), signature.len()));
            }
        }
        Ok(FiniteStructure {
            signature,
            elements,
        })
    }

    pub fn signature(&self) -> &Signature {
        &self.signature
    }

    pub fn elements(&self) -> &[OneType] {
        &self.elements
    }

    pub fn size(&self) -> usize {
        self.elements.len()
    }

    /// Multiplicity of each distinct 1-type realized in the structure.
    fn type_multiplicities(&self) -> BTreeMap<OneType, usize> {
        let mut mult = BTreeMap::new();
        for e in &self.elements {
            *mult.entry(*e).or_insert(0) += 1;
        }
        mult
    }
}

/// The isomorphism-complete description of a structure: how many elements
/// realize each 1-type. Only nonzero counts are stored.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct CharacteristicVector {
    signature: Signature,
    counts: BTreeMap<OneType, BigUint>,
}

impl CharacteristicVector {
    pub fn new(signature: Signature, counts: BTreeMap<OneType, BigUint>) -> CharacteristicVector {
        let counts = counts.into_iter().filter(|(_, c)| !c.is_zero()).collect();
        CharacteristicVector { signature, counts }
    }

    pub fn signature(&self) -> &Signature {
        &self.signature
    }

    pub fn count(&self, ty: &OneType) -> BigUint {
        self.counts.get(ty).cloned().unwrap_or_else(BigUint::zero)
    }

    /// Nonzero entries in ascending mask order.
    pub fn entries(&self) -> impl Iterator<Item = (&OneType, &BigUint)> {
        self.counts.iter()
    }

    pub fn total(&self) -> BigUint {
        self.counts.values().sum()
    }
}

impl fmt::Display for CharacteristicVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        write!(f, "{{")?;
        for (ty, c) in &self.counts {
            if !first {
                write!(f, ", ")?;
            }
            first = false;
            write!(f, "{}: {}", ty.describe(&self.signature), c)?;
        }
        write!(f, "}}")
    }
}

#[derive(Error, Debug, Clone, PartialEq, Eq)]
pub enum EvalError {
    #[error("unknown predicate `{0}`")]
    UnknownPredicate(String),
    #[error("formula is not a sentence: a predicate occurs outside every counting term")]
    NotASentence,
    #[error("element index {0} out of range for a structure of size {1}")]
    ElementOutOfRange(usize, usize),
}

/// The predicates occurring in a formula, in first-occurrence order.
pub fn signature_of(formula: &Formula) -> Signature {
    let mut names: Vec<String> = Vec::new();
    collect_predicates(formula, &mut names);
    Signature::new(names).expect("collected names are distinct and nonempty")
}

fn collect_predicates(formula: &Formula, out: &mut Vec<String>) {
    match formula {
        Formula::Atom(p) => {
            if !out.iter().any(|n| n == p) {
                out.push(p.clone());
            }
        }
        Formula::Top | Formula::Bottom => {}
        Formula::Not(f) => collect_predicates(f, out),
        Formula::And(a, b) | Formula::Or(a, b) => {
            collect_predicates(a, out);
            collect_predicates(b, out);
        }
        Formula::Count(t, _) => {
            for (_, body) in &t.summands {
                collect_predicates(body, out);
            }
        }
    }
}

/// True iff every atom lies beneath some counting term, so truth does not
/// depend on the evaluation element.
pub fn is_sentence(formula: &Formula) -> bool {
    match formula {
        Formula::Atom(_) => false,
        Formula::Top | Formula::Bottom => true,
        Formula::Not(f) => is_sentence(f),
        Formula::And(a, b) | Formula::Or(a, b) => is_sentence(a) && is_sentence(b),
        Formula::Count(..) => true,
    }
}

/// Truth of `formula` at the 1-type `ty` of some element of `m`. Truth only
/// depends on the type, which lets term evaluation work per distinct type.
fn eval_at_type(m: &FiniteStructure, ty: OneType, formula: &Formula) -> Result<bool, EvalError> {
    match formula {
        Formula::Atom(p) => {
            let pos = m
                .signature
                .position(p)
                .ok_or_else(|| EvalError::UnknownPredicate(p.clone()))?;
            Ok(ty.holds(pos))
        }
        Formula::Top => Ok(true),
        Formula::Bottom => Ok(false),
        Formula::Not(f) => Ok(!eval_at_type(m, ty, f)?),
        Formula::And(a, b) => Ok(eval_at_type(m, ty, a)? && eval_at_type(m, ty, b)?),
        Formula::Or(a, b) => Ok(eval_at_type(m, ty, a)? || eval_at_type(m, ty, b)?),
        Formula::Count(t, rel) => {
            let value = eval_term(m, t)?;
            Ok(rel.holds_for(&value))
        }
    }
}

/// Exact value of a counting term in `m`: the coefficient-weighted number of
/// elements satisfying each body. May be negative.
pub fn eval_term(m: &FiniteStructure, t: &CountingTerm) -> Result<BigInt, EvalError> {
    let mult = m.type_multiplicities();
    let mut total = BigInt::zero();
    for (coeff, body) in &t.summands {
        let mut witnesses = BigInt::zero();
        for (ty, count) in &mult {
            if eval_at_type(m, *ty, body)? {
                witnesses += BigInt::from(*count);
            }
        }
        total += coeff * witnesses;
    }
    Ok(total)
}

/// Truth of `formula` at element `e` of `m`.
pub fn eval_formula(
    m: &FiniteStructure,
    e: usize,
    formula: &Formula,
) -> Result<bool, EvalError> {
    let ty = *m
        .elements
        .get(e)
        .ok_or(EvalError::ElementOutOfRange(e, m.size()))?;
    eval_at_type(m, ty, formula)
}

/// Truth of a sentence in `m`. Rejects formulas with a top-level free
/// occurrence of the variable.
pub fn check_sentence(m: &FiniteStructure, formula: &Formula) -> Result<bool, EvalError> {
    if !is_sentence(formula) {
        return Err(EvalError::NotASentence);
    }
    eval_formula(m, 0, formula)
}

/// Tally of elements per realized 1-type.
pub fn characteristic_vector(m: &FiniteStructure) -> CharacteristicVector {
    let counts = m
        .type_multiplicities()
        .into_iter()
        .map(|(ty, c)| (ty, BigUint::from(c)))
        .collect();
    CharacteristicVector::new(m.signature.clone(), counts)
}

/// Constant folding of `true`/`false`. The result is semantically equivalent
/// on every structure; after folding, constants survive only as a whole
/// (sub)formula, e.g. as an entire counting-term body.
pub fn simplify(formula: &Formula) -> Formula {
    match formula {
        Formula::Atom(_) | Formula::Top | Formula::Bottom => formula.clone(),
        Formula::Not(f) => match simplify(f) {
            Formula::Top => Formula::Bottom,
            Formula::Bottom => Formula::Top,
            g => Formula::not(g),
        },
        Formula::And(a, b) => match (simplify(a), simplify(b)) {
            (Formula::Bottom, _) | (_, Formula::Bottom) => Formula::Bottom,
            (Formula::Top, g) | (g, Formula::Top) => g,
            (ga, gb) => Formula::and(ga, gb),
        },
        Formula::Or(a, b) => match (simplify(a), simplify(b)) {
            (Formula::Top, _) | (_, Formula::Top) => Formula::Top,
            (Formula::Bottom, g) | (g, Formula::Bottom) => g,
            (ga, gb) => Formula::or(ga, gb),
        },
        Formula::Count(t, rel) => {
            let summands = t
                .summands
                .iter()
                .map(|(a, body)| (a.clone(), simplify(body)))
                .collect();
            Formula::Count(CountingTerm::new(summands), rel.clone())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use num::One;

    fn sig(names: &[&str]) -> Signature {
        Signature::new(names.iter().copied()).unwrap()
    }

    /// `[{P},{P},{}]` over signature `[P]`.
    fn three_elem() -> FiniteStructure {
        FiniteStructure::new(
            sig(&["P"]),
            vec![
                OneType::from_mask(1),
                OneType::from_mask(1),
                OneType::from_mask(0),
            ],
        )
        .unwrap()
    }

    #[test]
    fn signature_of_first_occurrence_order() {
        let f = Formula::and(
            Formula::atom("P"),
            Formula::at_least(1, Formula::atom("Q")),
        );
        assert_eq!(signature_of(&f).names(), &["P".to_string(), "Q".to_string()]);
        assert!(signature_of(&Formula::at_least(1, Formula::Top)).is_empty());
        let dup = Formula::at_least(
            2,
            Formula::and(Formula::atom("P"), Formula::atom("P")),
        );
        assert_eq!(signature_of(&dup).names(), &["P".to_string()]);
    }

    #[test]
    fn eval_term_examples() {
        let m = three_elem();
        let t = CountingTerm::new(vec![
            (BigInt::from(2), Formula::atom("P")),
            (BigInt::from(-1), Formula::Top),
        ]);
        assert_eq!(eval_term(&m, &t).unwrap(), BigInt::from(1));

        assert_eq!(
            eval_term(&m, &CountingTerm::single(1, Formula::Bottom)).unwrap(),
            BigInt::zero()
        );

        let single = FiniteStructure::new(sig(&["P"]), vec![OneType::from_mask(1)]).unwrap();
        assert_eq!(
            eval_term(&single, &CountingTerm::single(-3, Formula::atom("P"))).unwrap(),
            BigInt::from(-3)
        );
    }

    #[test]
    fn eval_term_unknown_predicate() {
        let m = three_elem();
        let t = CountingTerm::single(1, Formula::atom("Z"));
        assert_eq!(
            eval_term(&m, &t),
            Err(EvalError::UnknownPredicate("Z".to_string()))
        );
    }

    #[test]
    fn eval_formula_examples() {
        let m = three_elem();
        assert!(eval_formula(&m, 2, &Formula::not(Formula::atom("P"))).unwrap());

        // count of P is 2, so 2 mod 2 = 0, not 1
        let cong = Formula::Count(
            CountingTerm::single(1, Formula::atom("P")),
            CountRel::Cong {
                modulus: BigUint::from(2u32),
                residue: BigUint::from(1u32),
            },
        );
        assert!(!eval_formula(&m, 0, &cong).unwrap());
        assert!(!eval_formula(&m, 1, &cong).unwrap());

        let single = FiniteStructure::new(sig(&["P"]), vec![OneType::from_mask(1)]).unwrap();
        let f = Formula::and(Formula::at_least(1, Formula::atom("P")), Formula::atom("P"));
        assert!(eval_formula(&single, 0, &f).unwrap());
    }

    #[test]
    fn check_sentence_examples() {
        // #[P] - #[!P] = 0 as >=0 & <=0 pair, on [{P},{}]
        let term = || {
            CountingTerm::new(vec![
                (BigInt::one(), Formula::atom("P")),
                (BigInt::from(-1), Formula::not(Formula::atom("P"))),
            ])
        };
        let eq0 = Formula::and(
            Formula::Count(term(), CountRel::Geq(BigInt::zero())),
            Formula::Count(term(), CountRel::Leq(BigInt::zero())),
        );
        let m = FiniteStructure::new(
            sig(&["P"]),
            vec![OneType::from_mask(1), OneType::from_mask(0)],
        )
        .unwrap();
        assert!(check_sentence(&m, &eq0).unwrap());

        let one = FiniteStructure::new(Signature::empty(), vec![OneType::from_mask(0)]).unwrap();
        assert!(!check_sentence(&one, &Formula::at_least(2, Formula::Top)).unwrap());

        let two_p = FiniteStructure::new(
            sig(&["P"]),
            vec![OneType::from_mask(1), OneType::from_mask(1)],
        )
        .unwrap();
        let even = Formula::Count(
            CountingTerm::single(1, Formula::atom("P")),
            CountRel::Cong {
                modulus: BigUint::from(2u32),
                residue: BigUint::zero(),
            },
        );
        assert!(check_sentence(&two_p, &even).unwrap());
    }

    #[test]
    fn check_sentence_rejects_free_variable() {
        let m = three_elem();
        assert_eq!(
            check_sentence(&m, &Formula::atom("P")),
            Err(EvalError::NotASentence)
        );
    }

    #[test]
    fn is_sentence_examples() {
        assert!(is_sentence(&Formula::at_least(1, Formula::atom("P"))));
        assert!(!is_sentence(&Formula::atom("P")));
        assert!(!is_sentence(&Formula::or(
            Formula::atom("P"),
            Formula::at_least(1, Formula::atom("Q"))
        )));
    }

    #[test]
    fn characteristic_vector_examples() {
        let v = characteristic_vector(&three_elem());
        assert_eq!(v.count(&OneType::from_mask(1)), BigUint::from(2u32));
        assert_eq!(v.count(&OneType::from_mask(0)), BigUint::one());
        assert_eq!(v.total(), BigUint::from(3u32));

        let one = FiniteStructure::new(Signature::empty(), vec![OneType::from_mask(0)]).unwrap();
        let v = characteristic_vector(&one);
        assert_eq!(v.count(&OneType::from_mask(0)), BigUint::one());

        let m = FiniteStructure::new(
            sig(&["P", "Q"]),
            vec![OneType::from_mask(0b11), OneType::from_mask(0b01)],
        )
        .unwrap();
        let v = characteristic_vector(&m);
        assert_eq!(v.count(&OneType::from_mask(0b11)), BigUint::one());
        assert_eq!(v.count(&OneType::from_mask(0b01)), BigUint::one());
        assert_eq!(v.count(&OneType::from_mask(0b10)), BigUint::zero());
        assert_eq!(v.count(&OneType::from_mask(0b00)), BigUint::zero());
    }

    #[test]
    fn simplify_examples() {
        let p = Formula::atom("P");
        assert_eq!(simplify(&Formula::and(p.clone(), Formula::Top)), p);
        assert_eq!(
            simplify(&Formula::and(p.clone(), Formula::Bottom)),
            Formula::Bottom
        );
        assert_eq!(simplify(&Formula::not(Formula::Bottom)), Formula::Top);
    }

    #[test]
    fn euclidean_residue_negative_values() {
        let c = BigUint::from(3u32);
        assert_eq!(euclidean_residue(&BigInt::from(-4), &c), BigUint::from(2u32));
        assert_eq!(euclidean_residue(&BigInt::from(-6), &c), BigUint::zero());
        assert_eq!(euclidean_residue(&BigInt::from(7), &c), BigUint::one());
    }

    #[test]
    fn signature_validation() {
        assert!(Signature::new(vec!["P", "P"]).is_err());
        assert!(Signature::new(vec![""]).is_err());
        assert!(FiniteStructure::new(sig(&["P"]), vec![]).is_err());
        assert!(FiniteStructure::new(sig(&["P"]), vec![OneType::from_mask(2)]).is_err());
    }
}
