//! Flattening: turns an arbitrary sentence into a stream of flat formulas
//! (conjunctions of counting literals with counting-free bodies) such that
//! the input is satisfiable iff some emitted leaf is.
//!
//! Counting comparisons only speak about global totals, so each one is either
//! true or false in a model independently of the rest of the formula. The
//! nondeterministic "guess whether it holds" step therefore becomes a binary
//! branch: substitute `true` or `false` for the innermost comparison, record
//! the comparison (or its negation) as a literal, and recurse. A leaf is
//! emitted when the remaining propositional skeleton evaluates to `true`.

use num::{BigInt, One};
use thiserror::Error;

use crate::formula::{is_sentence, simplify, CountRel, CountingTerm, Formula};

/// A single counting comparison whose bodies are counting-free.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct CountingLiteral {
    pub term: CountingTerm,
    pub rel: CountRel,
}

impl CountingLiteral {
    pub fn new(term: CountingTerm, rel: CountRel) -> CountingLiteral {
        debug_assert!(term.is_counting_free());
        CountingLiteral { term, rel }
    }

    /// The complementary literal: `!(t >= b)` is `t <= b-1`, `!(t <= b)` is
    /// `t >= b+1`, and congruences flip polarity. The remainder of a negated
    /// congruence is resolved later, when the linear system is expanded.
    pub fn negate(&self) -> CountingLiteral {
        let rel = match &self.rel {
            CountRel::Geq(b) => CountRel::Leq(b - BigInt::one()),
            CountRel::Leq(b) => CountRel::Geq(b + BigInt::one()),
            CountRel::Cong { modulus, residue } => CountRel::NotCong {
                modulus: modulus.clone(),
                residue: residue.clone(),
            },
            CountRel::NotCong { modulus, residue } => CountRel::Cong {
                modulus: modulus.clone(),
                residue: residue.clone(),
            },
        };
        CountingLiteral {
            term: self.term.clone(),
            rel,
        }
    }

    pub fn to_formula(&self) -> Formula {
        Formula::Count(self.term.clone(), self.rel.clone())
    }

    /// True when this literal and `other` constrain the same term in a way
    /// that no integer value satisfies both. Purely syntactic; anything this
    /// misses is refuted by the solver instead.
    fn contradicts(&self, other: &CountingLiteral) -> bool {
        if self.term != other.term {
            return false;
        }
        match (&self.rel, &other.rel) {
            (CountRel::Geq(lo), CountRel::Leq(hi)) | (CountRel::Leq(hi), CountRel::Geq(lo)) => {
                hi < lo
            }
            (
                CountRel::Cong {
                    modulus: c1,
                    residue: d1,
                },
                CountRel::Cong {
                    modulus: c2,
                    residue: d2,
                },
            ) => c1 == c2 && d1 != d2,
            (
                CountRel::Cong {
                    modulus: c1,
                    residue: d1,
                },
                CountRel::NotCong {
                    modulus: c2,
                    residue: d2,
                },
            )
            | (
                CountRel::NotCong {
                    modulus: c1,
                    residue: d1,
                },
                CountRel::Cong {
                    modulus: c2,
                    residue: d2,
                },
            ) => c1 == c2 && d1 == d2,
            _ => false,
        }
    }
}

/// A conjunction of counting literals. An empty list is the always-true flat
/// formula (satisfied by any nonempty structure).
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct FlatFormula {
    literals: Vec<CountingLiteral>,
}

impl FlatFormula {
    pub fn new(literals: Vec<CountingLiteral>) -> FlatFormula {
        FlatFormula { literals }
    }

    pub fn literals(&self) -> &[CountingLiteral] {
        &self.literals
    }

    pub fn to_formula(&self) -> Formula {
        let mut iter = self.literals.iter();
        match iter.next() {
            None => Formula::Top,
            Some(first) => iter.fold(first.to_formula(), |acc, lit| {
                Formula::and(acc, lit.to_formula())
            }),
        }
    }
}

#[derive(Error, Debug, Clone, PartialEq, Eq)]
pub enum FlattenError {
    #[error("flattening requires a sentence: a predicate occurs outside every counting term")]
    NotASentence,
}

/// All distinct counting comparisons of `formula`, innermost first, each
/// canonicalized by `simplify`. Syntactically identical occurrences share one
/// entry.
pub fn collect_atoms(formula: &Formula) -> Vec<Formula> {
    let mut out = Vec::new();
    collect_atoms_into(formula, &mut out);
    out
}

fn collect_atoms_into(formula: &Formula, out: &mut Vec<Formula>) {
    match formula {
        Formula::Atom(_) | Formula::Top | Formula::Bottom => {}
        Formula::Not(f) => collect_atoms_into(f, out),
        Formula::And(a, b) | Formula::Or(a, b) => {
            collect_atoms_into(a, out);
            collect_atoms_into(b, out);
        }
        Formula::Count(t, _) => {
            for (_, body) in &t.summands {
                collect_atoms_into(body, out);
            }
            let canonical = simplify(formula);
            if !out.contains(&canonical) {
                out.push(canonical);
            }
        }
    }
}

/// The first (left-to-right) counting comparison of `formula` whose bodies
/// are counting-free, canonicalized by `simplify`.
fn innermost_atom(formula: &Formula) -> Option<Formula> {
    match formula {
        Formula::Atom(_) | Formula::Top | Formula::Bottom => None,
        Formula::Not(f) => innermost_atom(f),
        Formula::And(a, b) | Formula::Or(a, b) => {
            innermost_atom(a).or_else(|| innermost_atom(b))
        }
        Formula::Count(t, _) => {
            for (_, body) in &t.summands {
                if let Some(found) = innermost_atom(body) {
                    return Some(found);
                }
            }
            Some(simplify(formula))
        }
    }
}

/// Replaces every counting comparison whose canonical form equals `target`
/// with `value`, textually, also inside counting-term bodies.
fn substitute(formula: &Formula, target: &Formula, value: &Formula) -> Formula {
    match formula {
        Formula::Atom(_) | Formula::Top | Formula::Bottom => formula.clone(),
        Formula::Not(f) => Formula::not(substitute(f, target, value)),
        Formula::And(a, b) => Formula::and(
            substitute(a, target, value),
            substitute(b, target, value),
        ),
        Formula::Or(a, b) => Formula::or(
            substitute(a, target, value),
            substitute(b, target, value),
        ),
        Formula::Count(t, rel) => {
            if t.is_counting_free() && &simplify(formula) == target {
                return value.clone();
            }
            let summands = t
                .summands
                .iter()
                .map(|(a, body)| (a.clone(), substitute(body, target, value)))
                .collect();
            Formula::Count(CountingTerm::new(summands), rel.clone())
        }
    }
}

#[derive(Debug)]
struct BranchState {
    formula: Formula,
    literals: Vec<CountingLiteral>,
}

/// Lazy depth-first enumeration of the flat leaves of a sentence.
#[derive(Debug)]
pub struct FlattenIter {
    stack: Vec<BranchState>,
}

impl Iterator for FlattenIter {
    type Item = FlatFormula;

    fn next(&mut self) -> Option<FlatFormula> {
        while let Some(state) = self.stack.pop() {
            match innermost_atom(&state.formula) {
                None => {
                    // no comparisons left: the skeleton folds to a constant
                    if simplify(&state.formula) == Formula::Top {
                        return Some(FlatFormula::new(state.literals));
                    }
                }
                Some(atom) => {
                    let (term, rel) = match &atom {
                        Formula::Count(t, r) => (t.clone(), r.clone()),
                        _ => unreachable!("innermost_atom returns counting nodes"),
                    };
                    let positive = CountingLiteral::new(term, rel);
                    let negative = positive.negate();
                    // push the false branch first so the true branch is
                    // explored first
                    for (value, literal) in [
                        (Formula::Bottom, negative),
                        (Formula::Top, positive),
                    ] {
                        if state.literals.iter().any(|l| l.contradicts(&literal)) {
                            continue;
                        }
                        let mut literals = state.literals.clone();
                        literals.push(literal);
                        self.stack.push(BranchState {
                            formula: substitute(&state.formula, &atom, &value),
                            literals,
                        });
                    }
                }
            }
        }
        None
    }
}

/// Flattens a sentence into a lazy sequence of flat leaves. The sentence is
/// satisfiable in a structure iff some leaf is.
pub fn flatten(formula: &Formula) -> Result<FlattenIter, FlattenError> {
    if !is_sentence(formula) {
        return Err(FlattenError::NotASentence);
    }
    Ok(FlattenIter {
        stack: vec![BranchState {
            formula: formula.clone(),
            literals: Vec::new(),
        }],
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use num::{BigInt, Zero};

    fn geq(k: i64, body: Formula) -> Formula {
        Formula::at_least(k, body)
    }

    #[test]
    fn collect_atoms_inner_before_outer() {
        let inner = geq(1, Formula::atom("Q"));
        let outer = geq(2, Formula::and(Formula::atom("P"), inner.clone()));
        let atoms = collect_atoms(&outer);
        assert_eq!(atoms.len(), 2);
        assert_eq!(atoms[0], inner);
        assert_eq!(atoms[1], outer);
    }

    #[test]
    fn collect_atoms_shares_duplicates() {
        let e = geq(1, Formula::atom("P"));
        let f = Formula::or(e.clone(), e.clone());
        assert_eq!(collect_atoms(&f).len(), 1);

        let two = Formula::and(
            geq(1, Formula::atom("P")),
            Formula::Count(
                CountingTerm::single(1, Formula::atom("Q")),
                CountRel::Leq(BigInt::zero()),
            ),
        );
        let atoms = collect_atoms(&two);
        assert_eq!(atoms.len(), 2);
        assert!(matches!(&atoms[0], Formula::Count(_, CountRel::Geq(_))));
    }

    #[test]
    fn flatten_nested_example() {
        let inner = geq(1, Formula::atom("Q"));
        let outer = geq(2, Formula::and(Formula::atom("P"), inner.clone()));
        let leaves: Vec<FlatFormula> = flatten(&outer).unwrap().collect();
        assert_eq!(leaves.len(), 2);

        // true branch: { #[Q] >= 1, #[P] >= 2 }
        let lits = leaves[0].literals();
        assert_eq!(lits.len(), 2);
        assert_eq!(lits[0].to_formula(), inner);
        assert_eq!(lits[1].to_formula(), geq(2, Formula::atom("P")));

        // false branch: { #[Q] <= 0, #[false] >= 2 }
        let lits = leaves[1].literals();
        assert_eq!(lits.len(), 2);
        assert_eq!(
            lits[0].rel,
            CountRel::Leq(BigInt::zero()),
        );
        assert_eq!(lits[1].to_formula(), geq(2, Formula::Bottom));
    }

    #[test]
    fn flatten_disjunction_emits_three_leaves() {
        let f = Formula::or(geq(1, Formula::atom("P")), geq(1, Formula::atom("Q")));
        let leaves: Vec<FlatFormula> = flatten(&f).unwrap().collect();
        // of the four guesses, only the all-false one has a false skeleton
        assert_eq!(leaves.len(), 3);
        assert!(leaves.iter().all(|l| l.literals().len() == 2));
    }

    #[test]
    fn flatten_already_flat() {
        let f = Formula::and(geq(1, Formula::atom("P")), geq(2, Formula::atom("Q")));
        let leaves: Vec<FlatFormula> = flatten(&f).unwrap().collect();
        assert_eq!(leaves.len(), 1);
        assert_eq!(leaves[0].to_formula(), f);
    }

    #[test]
    fn flatten_contradictory_guesses_pruned() {
        let e = geq(1, Formula::atom("P"));
        let f = Formula::and(e.clone(), Formula::not(e));
        let leaves: Vec<FlatFormula> = flatten(&f).unwrap().collect();
        assert!(leaves.is_empty());
    }

    #[test]
    fn flatten_rejects_non_sentence() {
        assert_eq!(
            flatten(&Formula::atom("P")).unwrap_err(),
            FlattenError::NotASentence
        );
    }

    #[test]
    fn leaf_bodies_are_counting_free() {
        let inner = geq(1, Formula::atom("Q"));
        let outer = geq(2, Formula::and(Formula::atom("P"), inner));
        for leaf in flatten(&outer).unwrap() {
            for lit in leaf.literals() {
                assert!(lit.term.is_counting_free());
            }
        }
    }

    #[test]
    fn negate_roundtrip() {
        let lit = CountingLiteral::new(
            CountingTerm::single(1, Formula::atom("P")),
            CountRel::Geq(BigInt::from(3)),
        );
        assert_eq!(lit.negate().rel, CountRel::Leq(BigInt::from(2)));
        assert_eq!(lit.negate().negate(), lit);
    }
}
