//! Cross-module properties checked on seeded random inputs: printing and
//! re-parsing, isomorphism invariance of evaluation, simplification,
//! relaxation dominance, branch-order invariance, and oracle monotonicity.

use std::collections::BTreeMap;

use num::{BigInt, BigUint, One};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use p1::engine::{
    build_structure, oracle_sat_upto, random_formula, solve, RandomFormulaParams, SolveConfig,
};
use p1::flatten::flatten;
use p1::formula::{
    characteristic_vector, check_sentence, euclidean_residue, is_sentence, signature_of,
    simplify, FiniteStructure, Formula, OneType, Signature,
};
use p1::ilp::{ilp_solve, ilp_solve_with, lp_feasible, BranchOrder};
use p1::linsys::{LinearConstraint, LinearSystem, Relation, Unknown};
use p1::parser::{parse, render};

fn params_for(seed: u64) -> RandomFormulaParams {
    RandomFormulaParams {
        signature_size: 1 + (seed % 3) as usize,
        max_constant: 1 + seed % 8,
        max_counting_atoms: 1 + (seed % 4) as usize,
        depth: 1 + (seed % 3) as usize,
        max_nesting: (seed % 3 == 0) as usize,
        ..RandomFormulaParams::default()
    }
}

proptest! {
    #[test]
    fn euclidean_residue_is_canonical(v in -1000i64..1000, m in 1u64..50) {
        let value = BigInt::from(v);
        let modulus = BigUint::from(m);
        let r = euclidean_residue(&value, &modulus);
        prop_assert!(r < modulus);
        // value and value + m have the same residue
        let shifted = euclidean_residue(&(&value + BigInt::from(m)), &modulus);
        prop_assert_eq!(r, shifted);
    }

    #[test]
    fn render_parse_round_trip(seed in 0u64..1000) {
        let formula = random_formula(&params_for(seed), seed);
        let text = render(&formula);
        let reparsed = parse(&text).unwrap_or_else(|e| {
            panic!("rendered `{text}` failed to parse: {e}")
        });
        prop_assert_eq!(reparsed, formula, "text: {}", text);
    }

    #[test]
    fn simplify_preserves_truth(seed in 0u64..300) {
        let formula = random_formula(&params_for(seed), seed);
        let simplified = simplify(&formula);
        let structure = random_structure(seed ^ 0x5eed, &signature_of(&formula));
        prop_assert_eq!(
            check_sentence(&structure, &formula).unwrap(),
            check_sentence(&structure, &simplified).unwrap()
        );
    }
}

/// A random nonempty structure with up to 6 elements over the signature.
fn random_structure(seed: u64, sig: &Signature) -> FiniteStructure {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let limit = 1u64 << sig.len();
    let size = rng.gen_range(1..=6);
    let elements = (0..size)
        .map(|_| OneType::from_mask(rng.gen_range(0..limit)))
        .collect();
    FiniteStructure::new(sig.clone(), elements).unwrap()
}

#[test]
fn truth_is_isomorphism_invariant() {
    // structures with the same characteristic vector agree on every sentence
    for seed in 0..120u64 {
        let formula = random_formula(&params_for(seed), seed);
        let sig = signature_of(&formula);
        let original = random_structure(seed.wrapping_mul(31) + 7, &sig);
        let vector = characteristic_vector(&original);
        let canonical = build_structure(&vector).unwrap();
        assert_eq!(
            check_sentence(&original, &formula).unwrap(),
            check_sentence(&canonical, &formula).unwrap(),
            "seed {seed}"
        );
        assert_eq!(characteristic_vector(&canonical), vector, "seed {seed}");
    }
}

#[test]
fn flat_leaves_are_conjunctions_of_literals() {
    for seed in 0..120u64 {
        let formula = random_formula(&params_for(seed), seed);
        assert!(is_sentence(&formula));
        for leaf in flatten(&formula).unwrap().take(64) {
            for literal in leaf.literals() {
                assert!(
                    literal.term.is_counting_free(),
                    "leaf literal bodies must be counting-free (seed {seed})"
                );
            }
        }
    }
}

fn random_system(seed: u64) -> LinearSystem {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.gen_range(1..=4usize);
    let unknowns: Vec<Unknown> = (0..n).map(Unknown::TypeCount).collect();
    let rows = rng.gen_range(1..=4usize);
    let constraints = (0..rows)
        .map(|_| {
            let coeffs: BTreeMap<Unknown, BigInt> = unknowns
                .iter()
                .filter_map(|u| {
                    let c = rng.gen_range(-6i64..=6);
                    (c != 0).then(|| (*u, BigInt::from(c)))
                })
                .collect();
            let relation = if rng.gen_bool(0.5) {
                Relation::Geq
            } else {
                Relation::Leq
            };
            LinearConstraint::new(coeffs, relation, BigInt::from(rng.gen_range(-6i64..=6)))
        })
        .collect();
    LinearSystem::from_parts(unknowns, constraints)
}

#[test]
fn relaxation_dominance() {
    // an infeasible rational relaxation certifies integer infeasibility
    for seed in 0..300u64 {
        let system = random_system(seed);
        if lp_feasible(&system).is_none() {
            assert!(
                ilp_solve(&system).assignment.is_none(),
                "seed {seed}: LP infeasible but ILP found a witness"
            );
        }
    }
}

#[test]
fn branch_order_invariance() {
    for seed in 0..200u64 {
        let system = random_system(seed);
        let floor_first = ilp_solve_with(&system, BranchOrder::FloorFirst);
        let ceil_first = ilp_solve_with(&system, BranchOrder::CeilFirst);
        assert_eq!(
            floor_first.assignment.is_some(),
            ceil_first.assignment.is_some(),
            "seed {seed}"
        );
    }
}

#[test]
fn oracle_is_monotone_in_the_bound() {
    for seed in 0..40u64 {
        let params = RandomFormulaParams {
            signature_size: 1 + (seed % 2) as usize,
            max_constant: 4,
            ..RandomFormulaParams::default()
        };
        let formula = random_formula(&params, seed);
        let small = oracle_sat_upto(&formula, 5).unwrap();
        let large = oracle_sat_upto(&formula, 9).unwrap();
        if small.is_some() {
            assert!(large.is_some(), "seed {seed}: witness lost at a larger bound");
        }
    }
}

#[test]
fn solver_witness_total_is_positive() {
    for seed in 0..60u64 {
        let formula = random_formula(&params_for(seed), seed);
        let verdict = solve(&formula, &SolveConfig::default()).unwrap();
        if let p1::engine::Status::Sat { vector, structure, .. } = verdict.status {
            assert!(vector.total() >= BigUint::one());
            assert_eq!(BigUint::from(structure.size()), vector.total());
        }
    }
}

#[test]
fn desugared_quantifiers_match_their_definitions() {
    // each surface form against a hand-written core equivalent, on all
    // structures of size <= 3 over {P, Q}
    let pairs = [
        ("exists x. P(x)", "#[P(x)] >= 1"),
        ("forall x. P(x)", "#[!P(x)] <= 0"),
        ("E>=2 x. P(x)", "#[P(x)] >= 2"),
        ("E%(1,2) x. P(x)", "#[P(x)] % 2 = 1"),
        ("I(P(x), Q(x))", "#[P(x)] - #[Q(x)] >= 0 & #[P(x)] - #[Q(x)] <= 0"),
        ("R(P(x), Q(x))", "#[P(x)] - #[Q(x)] >= 0"),
        ("R>(P(x), Q(x))", "#[P(x)] - #[Q(x)] >= 1"),
        ("pct>=(50, P(x))", "100*#[P(x)] - 50*#[true] >= 0"),
    ];
    let sig = Signature::new(["P", "Q"]).unwrap();
    for (surface, core) in pairs {
        let a = parse(surface).unwrap();
        let b = parse(core).unwrap();
        for assignment in all_structures(&sig, 3) {
            assert_eq!(
                check_sentence(&assignment, &a).unwrap(),
                check_sentence(&assignment, &b).unwrap(),
                "{surface} vs {core} on {:?}",
                assignment.elements()
            );
        }
    }
}

/// Every structure (up to isomorphism) over the signature with 1..=max
/// elements.
fn all_structures(sig: &Signature, max: usize) -> Vec<FiniteStructure> {
    let num_types = 1usize << sig.len();
    let mut out = Vec::new();
    let mut counts = vec![0usize; num_types];
    fn rec(
        sig: &Signature,
        counts: &mut Vec<usize>,
        from: usize,
        remaining: usize,
        out: &mut Vec<FiniteStructure>,
    ) {
        if from == counts.len() {
            let total: usize = counts.iter().sum();
            if total > 0 {
                let elements = counts
                    .iter()
                    .enumerate()
                    .flat_map(|(k, c)| {
                        std::iter::repeat(OneType::from_mask(k as u64)).take(*c)
                    })
                    .collect();
                out.push(FiniteStructure::new(sig.clone(), elements).unwrap());
            }
            return;
        }
        for c in 0..=remaining {
            counts[from] = c;
            rec(sig, counts, from + 1, remaining - c, out);
        }
        counts[from] = 0;
    }
    rec(sig, &mut counts, 0, max, &mut out);
    out
}

#[test]
fn formula_constructors_render_parseable_text() {
    // sanity for the pretty-printer on operator precedence corners
    let cases = [
        "!(#[P(x)] >= 1 & #[Q(x)] >= 1)",
        "#[P(x)] >= 1 | #[Q(x)] >= 1 & #[P(x)] <= 4",
        "#[#[P(x)] >= 2 & Q(x)] <= 3",
        "3*#[P(x)] - 2*#[Q(x) | P(x)] % 4 != 1",
    ];
    for text in cases {
        let formula = parse(text).unwrap();
        let round = parse(&render(&formula)).unwrap();
        assert_eq!(round, formula, "case `{text}` rendered as `{}`", render(&formula));
    }
}
