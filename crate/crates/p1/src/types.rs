//! Enumeration of atomic 1-types and the type-vs-body indicator that turns
//! counting terms into linear expressions over type-count unknowns.

use num::{BigInt, Zero};
use thiserror::Error;

use crate::formula::{CountingTerm, Formula, OneType, Signature};

/// Default cap on the signature size for full type enumeration
/// (2^20 is about a million types).
pub const DEFAULT_SIGNATURE_CAP: usize = 20;

/// The 1-types over a signature, in ascending mask order. Indices into
/// `types` are stable and shared with linear-system variable naming.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct TypeSpace {
    signature: Signature,
    types: Vec<OneType>,
}

#[derive(Error, Debug, Clone, PartialEq, Eq)]
pub enum TypeSpaceError {
    #[error(
        "signature has {size} predicates, above the cap of {cap} for full type \
         enumeration; use sparse mode"
    )]
    CapExceeded { size: usize, cap: usize },
    #[error("formula body contains a counting term; indicators are only defined for counting-free bodies")]
    CountingTermInBody,
    #[error("predicate `{0}` does not occur in the type space signature")]
    UnknownPredicate(String),
}

impl TypeSpace {
    /// All `2^|signature|` types, ascending by mask.
    pub fn enumerate(signature: Signature, cap: usize) -> Result<TypeSpace, TypeSpaceError> {
        if signature.len() > cap {
            return Err(TypeSpaceError::CapExceeded {
                size: signature.len(),
                cap,
            });
        }
        let types = (0..1u64 << signature.len()).map(OneType::from_mask).collect();
        Ok(TypeSpace { signature, types })
    }

    /// A restricted space holding only the given types (the "guessed
    /// realized 1-types" of sparse mode). Masks are deduplicated and sorted.
    pub fn restricted(signature: Signature, mut masks: Vec<u64>) -> TypeSpace {
        masks.sort_unstable();
        masks.dedup();
        let limit = 1u64.checked_shl(signature.len() as u32).unwrap_or(u64::MAX);
        let types = masks
            .into_iter()
            .filter(|m| *m < limit)
            .map(OneType::from_mask)
            .collect();
        TypeSpace { signature, types }
    }

    pub fn signature(&self) -> &Signature {
        &self.signature
    }

    pub fn types(&self) -> &[OneType] {
        &self.types
    }

    pub fn len(&self) -> usize {
        self.types.len()
    }

    pub fn is_empty(&self) -> bool {
        self.types.is_empty()
    }

    pub fn index_of(&self, ty: &OneType) -> Option<usize> {
        self.types.binary_search(ty).ok()
    }
}

/// 1 iff the counting-free formula holds under the truth assignment of the
/// 1-type (with the variable bound to an element of that type).
pub fn indicator(
    ty: OneType,
    sig: &Signature,
    body: &Formula,
) -> Result<u8, TypeSpaceError> {
    eval_under_type(ty, sig, body).map(|b| b as u8)
}

fn eval_under_type(ty: OneType, sig: &Signature, body: &Formula) -> Result<bool, TypeSpaceError> {
    match body {
        Formula::Atom(p) => {
            let pos = sig
                .position(p)
                .ok_or_else(|| TypeSpaceError::UnknownPredicate(p.clone()))?;
            Ok(ty.holds(pos))
        }
        Formula::Top => Ok(true),
        Formula::Bottom => Ok(false),
        Formula::Not(f) => Ok(!eval_under_type(ty, sig, f)?),
        Formula::And(a, b) => Ok(eval_under_type(ty, sig, a)? && eval_under_type(ty, sig, b)?),
        Formula::Or(a, b) => Ok(eval_under_type(ty, sig, a)? || eval_under_type(ty, sig, b)?),
        Formula::Count(..) => Err(TypeSpaceError::CountingTermInBody),
    }
}

/// The coefficient of each type-count unknown in the linear form of a
/// counting term: coefficient k is the indicator-weighted sum of the term's
/// summand coefficients.
pub fn term_coefficients(
    term: &CountingTerm,
    space: &TypeSpace,
) -> Result<Vec<BigInt>, TypeSpaceError> {
    let mut coeffs = vec![BigInt::zero(); space.len()];
    for (a, body) in &term.summands {
        for (k, ty) in space.types().iter().enumerate() {
            if indicator(*ty, space.signature(), body)? == 1 {
                coeffs[k] += a;
            }
        }
    }
    Ok(coeffs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use num::BigInt;

    use crate::formula::CountingTerm;

    fn sig(names: &[&str]) -> Signature {
        Signature::new(names.iter().copied()).unwrap()
    }

    #[test]
    fn enumerate_ascending_masks() {
        let ts = TypeSpace::enumerate(sig(&["P", "Q"]), DEFAULT_SIGNATURE_CAP).unwrap();
        let masks: Vec<u64> = ts.types().iter().map(|t| t.mask()).collect();
        assert_eq!(masks, vec![0b00, 0b01, 0b10, 0b11]);

        let empty = TypeSpace::enumerate(Signature::empty(), DEFAULT_SIGNATURE_CAP).unwrap();
        assert_eq!(empty.len(), 1);

        let one = TypeSpace::enumerate(sig(&["P"]), DEFAULT_SIGNATURE_CAP).unwrap();
        assert_eq!(one.len(), 2);
    }

    #[test]
    fn enumerate_cap() {
        let names: Vec<String> = (0..21).map(|i| format!("P{i}")).collect();
        let s = Signature::new(names).unwrap();
        assert!(matches!(
            TypeSpace::enumerate(s, DEFAULT_SIGNATURE_CAP),
            Err(TypeSpaceError::CapExceeded { size: 21, cap: 20 })
        ));
    }

    #[test]
    fn indicator_examples() {
        let s = sig(&["P", "Q"]);
        let p_or_q = Formula::or(Formula::atom("P"), Formula::atom("Q"));
        assert_eq!(indicator(OneType::from_mask(0b01), &s, &p_or_q).unwrap(), 1);

        let s1 = sig(&["P"]);
        assert_eq!(
            indicator(OneType::from_mask(0), &s1, &Formula::atom("P")).unwrap(),
            0
        );
        assert_eq!(indicator(OneType::from_mask(0), &s1, &Formula::Top).unwrap(), 1);
    }

    #[test]
    fn indicator_rejects_counting_bodies() {
        let s = sig(&["P"]);
        let body = Formula::at_least(1, Formula::atom("P"));
        assert_eq!(
            indicator(OneType::from_mask(0), &s, &body),
            Err(TypeSpaceError::CountingTermInBody)
        );
    }

    #[test]
    fn term_coefficients_difference() {
        let ts = TypeSpace::enumerate(sig(&["P", "Q"]), DEFAULT_SIGNATURE_CAP).unwrap();
        let t = CountingTerm::new(vec![
            (BigInt::from(1), Formula::atom("P")),
            (BigInt::from(-1), Formula::atom("Q")),
        ]);
        let coeffs = term_coefficients(&t, &ts).unwrap();
        // masks 00, 01 (P), 10 (Q), 11 (PQ)
        assert_eq!(
            coeffs,
            vec![
                BigInt::from(0),
                BigInt::from(1),
                BigInt::from(-1),
                BigInt::from(0)
            ]
        );
    }

    #[test]
    fn term_coefficients_constants() {
        let ts = TypeSpace::enumerate(sig(&["P"]), DEFAULT_SIGNATURE_CAP).unwrap();
        let top = CountingTerm::single(2, Formula::Top);
        assert_eq!(
            term_coefficients(&top, &ts).unwrap(),
            vec![BigInt::from(2), BigInt::from(2)]
        );

        let contradiction = CountingTerm::single(
            3,
            Formula::and(Formula::atom("P"), Formula::not(Formula::atom("P"))),
        );
        assert_eq!(
            term_coefficients(&contradiction, &ts).unwrap(),
            vec![BigInt::zero(), BigInt::zero()]
        );
    }
}
