//! End-to-end orchestration: flatten a sentence, encode each flat leaf over a
//! type space, eliminate congruences, and decide feasibility; plus model
//! construction, independent verification, a brute-force oracle, and a seeded
//! random-sentence generator for testing.

use std::collections::BTreeMap;
use std::sync::Mutex;

use num::{BigInt, BigUint, One, Signed, ToPrimitive, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::flatten::{flatten, FlatFormula, FlattenError};
use crate::formula::{
    check_sentence, is_sentence, signature_of, CharacteristicVector,
    CountRel, CountingTerm, EvalError, FiniteStructure, Formula, OneType, Signature,
    StructureError,
};
use crate::ilp::{ilp_solve, Assignment, SolverStats};
use crate::linsys::{
    eliminate_congruences, encode, expand_negated, LinSysError, LinearSystem, Unknown,
};
use crate::types::{TypeSpace, TypeSpaceError, DEFAULT_SIGNATURE_CAP};

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum Mode {
    /// Complete: enumerate the full type space (capped signature size).
    Full,
    /// Sound for SAT only: sample small type supports under a restart budget.
    Sparse,
}

#[derive(Clone, Debug)]
pub struct SolveConfig {
    pub mode: Mode,
    /// Largest signature size for which the full type space is enumerated.
    pub signature_cap: usize,
    /// Sparse mode: sampled supports tried per flat leaf.
    pub sparse_budget: u64,
    pub seed: u64,
    /// Worker threads for leaf/branch units; 1 means sequential.
    pub parallel: usize,
    /// Wrap a non-sentence `f` as `#[f] >= 1` instead of rejecting it.
    pub assume_exists: bool,
}

impl Default for SolveConfig {
    fn default() -> SolveConfig {
        SolveConfig {
            mode: Mode::Full,
            signature_cap: DEFAULT_SIGNATURE_CAP,
            sparse_budget: 64,
            seed: 0,
            parallel: 1,
            assume_exists: false,
        }
    }
}

#[derive(Clone, Debug, Default)]
pub struct EngineStats {
    /// Flat leaves examined.
    pub leaves: u64,
    /// Linear systems handed to the integer solver (leaf x branch units).
    pub branches: u64,
    pub solver: SolverStats,
    /// Set when an UNSAT answer is not conclusive (sparse budget exhausted).
    pub incomplete: bool,
}

#[derive(Clone, Debug)]
pub enum Status {
    Sat {
        vector: CharacteristicVector,
        structure: FiniteStructure,
        /// Index of the flat leaf and of the branch within it that produced
        /// the witness.
        leaf: usize,
        branch: usize,
    },
    Unsat,
}

#[derive(Clone, Debug)]
pub struct Verdict {
    pub status: Status,
    pub stats: EngineStats,
}

impl Verdict {
    pub fn is_sat(&self) -> bool {
        matches!(self.status, Status::Sat { .. })
    }
}

#[derive(Error, Debug)]
pub enum SolveError {
    #[error("formula has free occurrences of the variable; pass assume-exists to close it")]
    NotASentence,
    #[error(transparent)]
    TypeSpace(#[from] TypeSpaceError),
    #[error(transparent)]
    LinSys(#[from] LinSysError),
    #[error(transparent)]
    Structure(#[from] StructureError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("witness count does not fit in memory as an explicit structure")]
    WitnessTooLarge,
}

impl From<FlattenError> for SolveError {
    fn from(_: FlattenError) -> SolveError {
        SolveError::NotASentence
    }
}

/// Decides finite satisfiability. Full mode is a complete decision
/// procedure; sparse mode is sound for SAT and marks UNSAT answers as
/// incomplete. Every SAT verdict carries an explicit structure that has been
/// re-checked by the semantic evaluator.
pub fn solve(formula: &Formula, cfg: &SolveConfig) -> Result<Verdict, SolveError> {
    let sentence = if is_sentence(formula) {
        formula.clone()
    } else if cfg.assume_exists {
        Formula::at_least(1, formula.clone())
    } else {
        return Err(SolveError::NotASentence);
    };
    let sig = signature_of(&sentence);
    match cfg.mode {
        Mode::Full => solve_full(&sentence, &sig, cfg),
        Mode::Sparse => solve_sparse(&sentence, &sig, cfg),
    }
}

fn solve_full(
    sentence: &Formula,
    sig: &Signature,
    cfg: &SolveConfig,
) -> Result<Verdict, SolveError> {
    let space = TypeSpace::enumerate(sig.clone(), cfg.signature_cap)?;
    let mut stats = EngineStats::default();
    for (leaf_index, leaf) in flatten(sentence)?.enumerate() {
        stats.leaves += 1;
        let system = encode(&leaf, &space)?;
        let branches = expand_negated(&system);
        if let Some((branch, assignment)) =
            solve_branches(&branches, cfg.parallel, &mut stats)?
        {
            return sat_verdict(
                sentence,
                sig,
                &space,
                &assignment,
                leaf_index,
                branch,
                stats,
            );
        }
    }
    Ok(Verdict {
        status: Status::Unsat,
        stats,
    })
}

fn solve_sparse(
    sentence: &Formula,
    sig: &Signature,
    cfg: &SolveConfig,
) -> Result<Verdict, SolveError> {
    let mut stats = EngineStats::default();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mask_limit = 1u64
        .checked_shl(sig.len() as u32)
        .unwrap_or(u64::MAX);
    let mut attempted = false;
    for (leaf_index, leaf) in flatten(sentence)?.enumerate() {
        stats.leaves += 1;
        let (rows, coeff) = sparse_parameters(&leaf);
        let support = sparse_support_bound(rows, &coeff) as usize;
        for _ in 0..cfg.sparse_budget.max(1) {
            attempted = true;
            let masks: Vec<u64> = (0..support)
                .map(|_| rng.gen_range(0..mask_limit))
                .collect();
            let space = TypeSpace::restricted(sig.clone(), masks);
            if space.is_empty() {
                continue;
            }
            let system = encode(&leaf, &space)?;
            let branches = expand_negated(&system);
            if let Some((branch, assignment)) =
                solve_branches(&branches, cfg.parallel, &mut stats)?
            {
                return sat_verdict(
                    sentence,
                    sig,
                    &space,
                    &assignment,
                    leaf_index,
                    branch,
                    stats,
                );
            }
        }
    }
    stats.incomplete = attempted;
    Ok(Verdict {
        status: Status::Unsat,
        stats,
    })
}

/// Solves the branch systems of one leaf; first SAT in branch order wins.
fn solve_branches(
    branches: &[LinearSystem],
    parallel: usize,
    stats: &mut EngineStats,
) -> Result<Option<(usize, Assignment)>, SolveError> {
    stats.branches += branches.len() as u64;
    if parallel <= 1 || branches.len() <= 1 {
        for (i, branch) in branches.iter().enumerate() {
            let eliminated = eliminate_congruences(branch)?;
            let out = ilp_solve(&eliminated);
            stats.solver.absorb(&out.stats);
            if let Some(a) = out.assignment {
                return Ok(Some((i, a)));
            }
        }
        return Ok(None);
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(parallel)
        .build();
    let Ok(pool) = pool else {
        // thread startup failure: degrade to the sequential path
        return solve_branches(branches, 1, stats);
    };
    let shared = Mutex::new(SolverStats::default());
    let hit: Option<Result<(usize, Assignment), SolveError>> = pool.install(|| {
        branches.par_iter().enumerate().find_map_first(|(i, branch)| {
            let eliminated = match eliminate_congruences(branch) {
                Ok(s) => s,
                Err(e) => return Some(Err(SolveError::from(e))),
            };
            let out = ilp_solve(&eliminated);
            shared.lock().expect("stats lock").absorb(&out.stats);
            out.assignment.map(|a| Ok((i, a)))
        })
    });
    stats.solver.absorb(&shared.into_inner().expect("stats lock"));
    hit.transpose()
}

fn sat_verdict(
    sentence: &Formula,
    sig: &Signature,
    space: &TypeSpace,
    assignment: &Assignment,
    leaf: usize,
    branch: usize,
    stats: EngineStats,
) -> Result<Verdict, SolveError> {
    let mut counts = BTreeMap::new();
    for (u, v) in assignment {
        if let Unknown::TypeCount(k) = u {
            if !v.is_zero() {
                counts.insert(space.types()[*k], v.clone());
            }
        }
    }
    let vector = CharacteristicVector::new(sig.clone(), counts);
    let structure = build_structure(&vector)?;
    // every SAT verdict is independently re-checked by the evaluator
    assert!(
        verify(sentence, &structure)?,
        "solver model rejected by the model checker"
    );
    Ok(Verdict {
        status: Status::Sat {
            vector,
            structure,
            leaf,
            branch,
        },
        stats,
    })
}

/// Conservative shape parameters of the eliminated system for a leaf,
/// computable without enumerating the type space: at most two rows per
/// literal plus the nonemptiness row, and coefficients bounded by the sum of
/// the absolute summand coefficients of each term.
fn sparse_parameters(leaf: &FlatFormula) -> (u64, BigUint) {
    let rows = 2 * leaf.literals().len() as u64 + 1;
    let mut coeff = BigUint::one();
    for literal in leaf.literals() {
        coeff = coeff.max(term_magnitude(&literal.term));
        let bound = match &literal.rel {
            CountRel::Geq(b) | CountRel::Leq(b) => {
                b.abs().to_biguint().expect("abs is nonnegative")
            }
            CountRel::Cong { modulus, .. } | CountRel::NotCong { modulus, .. } => modulus.clone(),
        };
        coeff = coeff.max(bound);
    }
    (rows, coeff)
}

fn term_magnitude(term: &CountingTerm) -> BigUint {
    term.summands
        .iter()
        .map(|(a, _)| a.abs().to_biguint().expect("abs is nonnegative"))
        .sum()
}

/// How many nonzero unknowns suffice in any feasible system with `rows` rows
/// and coefficients of magnitude at most `max_coeff`: the bound
/// `ceil(2 * rows * log2(2 * max_coeff * ceil(sqrt(rows))))`, computed
/// exactly over big integers. The base-2 logarithm and the ceilings only
/// enlarge the bound, so sampled supports are never under-sized.
pub fn sparse_support_bound(rows: u64, max_coeff: &BigUint) -> u64 {
    assert!(rows >= 1, "at least one row required");
    assert!(!max_coeff.is_zero(), "coefficient bound must be positive");
    let root = ceil_sqrt(rows);
    let inner = BigUint::from(2u32) * max_coeff * root;
    // ceil(2*rows*log2(inner)) = ceil(log2(inner^(2*rows))) and
    // ceil(log2(x)) is the bit length of x - 1 for x >= 1
    let power = inner.pow(2 * rows as u32);
    (power - BigUint::one()).bits()
}

fn ceil_sqrt(n: u64) -> BigUint {
    let n = BigUint::from(n);
    let floor = n.sqrt();
    if &floor * &floor < n {
        floor + BigUint::one()
    } else {
        floor
    }
}

/// Realizes a characteristic vector as an explicit structure: each type is
/// instantiated `count` times, in canonical (ascending mask) type order.
pub fn build_structure(
    vector: &CharacteristicVector,
) -> Result<FiniteStructure, SolveError> {
    let mut elements = Vec::new();
    for (ty, count) in vector.entries() {
        let n = count.to_usize().ok_or(SolveError::WitnessTooLarge)?;
        elements.extend(std::iter::repeat(*ty).take(n));
    }
    Ok(FiniteStructure::new(vector.signature().clone(), elements)?)
}

/// Independent check of a verdict's model against the original sentence.
pub fn verify(sentence: &Formula, model: &FiniteStructure) -> Result<bool, EvalError> {
    check_sentence(model, sentence)
}

#[derive(Error, Debug, Clone, PartialEq, Eq)]
pub enum OracleError {
    #[error("oracle requires a sentence")]
    NotASentence,
    #[error("oracle signature has {size} predicates, above the exhaustive cap of {cap}")]
    SignatureTooLarge { size: usize, cap: usize },
    #[error(transparent)]
    Eval(#[from] EvalError),
}

/// Largest signature the brute-force oracle will enumerate over.
pub const ORACLE_SIGNATURE_CAP: usize = 12;

/// Exhaustive ground truth: enumerates every characteristic vector with
/// total in `1..=bound` (totals ascending, then first type count descending)
/// and returns the first vector whose realized structure satisfies the
/// sentence. Truth depends only on the vector, so enumerating vectors
/// instead of labeled structures loses nothing.
pub fn oracle_sat_upto(
    formula: &Formula,
    bound: u64,
) -> Result<Option<CharacteristicVector>, OracleError> {
    if !is_sentence(formula) {
        return Err(OracleError::NotASentence);
    }
    let sig = signature_of(formula);
    if sig.len() > ORACLE_SIGNATURE_CAP {
        return Err(OracleError::SignatureTooLarge {
            size: sig.len(),
            cap: ORACLE_SIGNATURE_CAP,
        });
    }
    let num_types = 1usize << sig.len();

    if let Some(compiled) = CompiledSentence::compile(formula, &sig, bound) {
        let mut counts = vec![0u64; num_types];
        for total in 1..=bound {
            if search_vectors(&mut counts, 0, total, &mut |c| compiled.eval(c)) {
                return Ok(Some(vector_from_counts(&sig, &counts)));
            }
        }
        return Ok(None);
    }

    // fallback: materialize each vector as a structure and evaluate exactly
    let mut counts = vec![0u64; num_types];
    let mut failure: Option<EvalError> = None;
    for total in 1..=bound {
        let hit = search_vectors(&mut counts, 0, total, &mut |c| {
            let vector = vector_from_counts(&sig, c);
            let structure = build_structure(&vector)
                .expect("oracle vectors are nonempty and small");
            match check_sentence(&structure, formula) {
                Ok(b) => b,
                Err(e) => {
                    failure = Some(e);
                    true // stop the search; the error is surfaced below
                }
            }
        });
        if let Some(e) = failure {
            return Err(OracleError::Eval(e));
        }
        if hit {
            return Ok(Some(vector_from_counts(&sig, &counts)));
        }
    }
    Ok(None)
}

fn vector_from_counts(sig: &Signature, counts: &[u64]) -> CharacteristicVector {
    let entries = counts
        .iter()
        .enumerate()
        .filter(|(_, c)| **c > 0)
        .map(|(k, c)| (OneType::from_mask(k as u64), BigUint::from(*c)))
        .collect();
    CharacteristicVector::new(sig.clone(), entries)
}

/// Enumerates all ways to fill `counts[from..]` with the given total, first
/// coordinate descending, calling `test` on each complete vector. Returns on
/// the first vector accepted by `test`, leaving it in `counts`.
fn search_vectors(
    counts: &mut Vec<u64>,
    from: usize,
    total: u64,
    test: &mut impl FnMut(&[u64]) -> bool,
) -> bool {
    if from == counts.len() - 1 {
        counts[from] = total;
        return test(counts);
    }
    let mut c = total;
    loop {
        counts[from] = c;
        if search_vectors(counts, from + 1, total - c, test) {
            return true;
        }
        if c == 0 {
            return false;
        }
        c -= 1;
    }
}

/// A sentence lowered to machine integers for the oracle's inner loop: each
/// counting comparison becomes a per-type coefficient table (indexed by the
/// truth of the earlier comparisons its bodies mention) plus a threshold,
/// and the skeleton becomes a small boolean expression over comparison
/// results. Compilation fails (returning `None`) when any constant or value
/// bound does not fit comfortably in `i64`; callers then use exact
/// evaluation.
struct CompiledSentence {
    atoms: Vec<CompiledAtom>,
    root: BoolExpr,
    num_types: usize,
}

struct CompiledAtom {
    /// Indices of earlier comparisons referenced by this one's bodies.
    deps: Vec<usize>,
    /// `tables[dep_truth_mask][type] -> coefficient`.
    tables: Vec<Vec<i64>>,
    rel: CompiledRel,
}

enum CompiledRel {
    Geq(i64),
    Leq(i64),
    Cong { modulus: i64, residue: i64 },
    NotCong { modulus: i64, residue: i64 },
}

impl CompiledRel {
    fn holds(&self, value: i64) -> bool {
        match self {
            CompiledRel::Geq(b) => value >= *b,
            CompiledRel::Leq(b) => value <= *b,
            CompiledRel::Cong { modulus, residue } => value.rem_euclid(*modulus) == *residue,
            CompiledRel::NotCong { modulus, residue } => value.rem_euclid(*modulus) != *residue,
        }
    }
}

#[derive(Clone)]
enum BoolExpr {
    Const(bool),
    Pred(usize),
    AtomRef(usize),
    Not(Box<BoolExpr>),
    And(Box<BoolExpr>, Box<BoolExpr>),
    Or(Box<BoolExpr>, Box<BoolExpr>),
}

impl BoolExpr {
    fn eval(&self, type_mask: u64, truths: u64) -> bool {
        match self {
            BoolExpr::Const(b) => *b,
            BoolExpr::Pred(i) => type_mask >> i & 1 == 1,
            BoolExpr::AtomRef(j) => truths >> j & 1 == 1,
            BoolExpr::Not(e) => !e.eval(type_mask, truths),
            BoolExpr::And(a, b) => a.eval(type_mask, truths) && b.eval(type_mask, truths),
            BoolExpr::Or(a, b) => a.eval(type_mask, truths) || b.eval(type_mask, truths),
        }
    }

    fn atom_refs(&self, into: &mut Vec<usize>) {
        match self {
            BoolExpr::Const(_) | BoolExpr::Pred(_) => {}
            BoolExpr::AtomRef(j) => into.push(*j),
            BoolExpr::Not(e) => e.atom_refs(into),
            BoolExpr::And(a, b) | BoolExpr::Or(a, b) => {
                a.atom_refs(into);
                b.atom_refs(into);
            }
        }
    }
}

const MAX_COMPILED_ATOMS: usize = 32;
const MAX_COMPILED_DEPS: usize = 10;

impl CompiledSentence {
    fn compile(formula: &Formula, sig: &Signature, bound: u64) -> Option<CompiledSentence> {
        let num_types = 1usize << sig.len();
        let mut raw: Vec<(Vec<(i64, BoolExpr)>, CompiledRel)> = Vec::new();
        let root = compile_expr(formula, sig, &mut raw)?;
        if raw.len() > MAX_COMPILED_ATOMS {
            return None;
        }
        let mut atoms = Vec::with_capacity(raw.len());
        for (summands, rel) in raw {
            let mut deps = Vec::new();
            for (_, body) in &summands {
                body.atom_refs(&mut deps);
            }
            deps.sort_unstable();
            deps.dedup();
            if deps.len() > MAX_COMPILED_DEPS {
                return None;
            }
            let mut tables = Vec::with_capacity(1 << deps.len());
            let mut magnitude: i64 = 0;
            for dep_mask in 0u64..(1 << deps.len()) {
                let mut truths = 0u64;
                for (pos, dep) in deps.iter().enumerate() {
                    if dep_mask >> pos & 1 == 1 {
                        truths |= 1 << dep;
                    }
                }
                let mut table = vec![0i64; num_types];
                for (k, slot) in table.iter_mut().enumerate() {
                    for (a, body) in &summands {
                        if body.eval(k as u64, truths) {
                            *slot = slot.checked_add(*a)?;
                        }
                    }
                    magnitude = magnitude.max(slot.checked_abs()?);
                }
                tables.push(table);
            }
            // the largest intermediate sum must stay within i64
            magnitude
                .checked_mul(i64::try_from(bound).ok()?)?
                .checked_mul(i64::try_from(num_types).ok()?)?;
            atoms.push(CompiledAtom { deps, tables, rel });
        }
        Some(CompiledSentence {
            atoms,
            root,
            num_types,
        })
    }

    fn eval(&self, counts: &[u64]) -> bool {
        debug_assert_eq!(counts.len(), self.num_types);
        let mut truths = 0u64;
        for (j, atom) in self.atoms.iter().enumerate() {
            let mut dep_mask = 0usize;
            for (pos, dep) in atom.deps.iter().enumerate() {
                if truths >> dep & 1 == 1 {
                    dep_mask |= 1 << pos;
                }
            }
            let table = &atom.tables[dep_mask];
            let mut value: i64 = 0;
            for (k, c) in counts.iter().enumerate() {
                if *c > 0 {
                    value += table[k] * *c as i64;
                }
            }
            if atom.rel.holds(value) {
                truths |= 1 << j;
            }
        }
        self.root.eval(0, truths)
    }
}

/// Lowers a formula to a boolean expression, appending each counting
/// comparison encountered (post-order, so bodies come before the
/// comparisons that mention them). `None` when a constant exceeds `i64` or
/// an atom is outside the signature (the caller falls back to exact
/// evaluation or errors there).
fn compile_expr(
    formula: &Formula,
    sig: &Signature,
    atoms: &mut Vec<(Vec<(i64, BoolExpr)>, CompiledRel)>,
) -> Option<BoolExpr> {
    match formula {
        Formula::Top => Some(BoolExpr::Const(true)),
        Formula::Bottom => Some(BoolExpr::Const(false)),
        Formula::Atom(p) => sig.position(p).map(BoolExpr::Pred),
        Formula::Not(f) => Some(BoolExpr::Not(Box::new(compile_expr(f, sig, atoms)?))),
        Formula::And(a, b) => Some(BoolExpr::And(
            Box::new(compile_expr(a, sig, atoms)?),
            Box::new(compile_expr(b, sig, atoms)?),
        )),
        Formula::Or(a, b) => Some(BoolExpr::Or(
            Box::new(compile_expr(a, sig, atoms)?),
            Box::new(compile_expr(b, sig, atoms)?),
        )),
        Formula::Count(term, rel) => {
            let mut summands = Vec::with_capacity(term.summands.len());
            for (a, body) in &term.summands {
                summands.push((a.to_i64()?, compile_expr(body, sig, atoms)?));
            }
            let rel = match rel {
                CountRel::Geq(b) => CompiledRel::Geq(b.to_i64()?),
                CountRel::Leq(b) => CompiledRel::Leq(b.to_i64()?),
                CountRel::Cong { modulus, residue } => CompiledRel::Cong {
                    modulus: modulus.to_i64()?,
                    residue: residue.to_i64()?,
                },
                CountRel::NotCong { modulus, residue } => CompiledRel::NotCong {
                    modulus: modulus.to_i64()?,
                    residue: residue.to_i64()?,
                },
            };
            atoms.push((summands, rel));
            Some(BoolExpr::AtomRef(atoms.len() - 1))
        }
    }
}

/// Knobs for the seeded sentence generator used by tests and benchmarks.
#[derive(Clone, Debug)]
pub struct RandomFormulaParams {
    /// Number of unary predicates, named `P0`, `P1`, ...
    pub signature_size: usize,
    /// Constants (thresholds, moduli, coefficients) stay in `1..=max_constant`.
    pub max_constant: u64,
    /// Upper bound on counting comparisons in the sentence.
    pub max_counting_atoms: usize,
    /// Depth of the boolean skeleton; 1 yields a single counting literal.
    pub depth: usize,
    /// Levels of counting comparisons nested inside counting bodies.
    pub max_nesting: usize,
}

impl Default for RandomFormulaParams {
    fn default() -> RandomFormulaParams {
        RandomFormulaParams {
            signature_size: 3,
            max_constant: 8,
            max_counting_atoms: 4,
            depth: 2,
            max_nesting: 1,
        }
    }
}

/// Deterministic random sentence: same parameters and seed, same formula.
pub fn random_formula(params: &RandomFormulaParams, seed: u64) -> Formula {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut budget = params.max_counting_atoms.max(1);
    gen_skeleton(params, &mut rng, params.depth, &mut budget)
}

fn gen_skeleton(
    params: &RandomFormulaParams,
    rng: &mut ChaCha8Rng,
    depth: usize,
    budget: &mut usize,
) -> Formula {
    if depth <= 1 || *budget <= 1 {
        return gen_counting_atom(params, rng, params.max_nesting, budget);
    }
    match rng.gen_range(0..4u8) {
        0 => Formula::not(gen_skeleton(params, rng, depth - 1, budget)),
        1 => Formula::and(
            gen_skeleton(params, rng, depth - 1, budget),
            gen_skeleton(params, rng, depth - 1, budget),
        ),
        2 => Formula::or(
            gen_skeleton(params, rng, depth - 1, budget),
            gen_skeleton(params, rng, depth - 1, budget),
        ),
        _ => gen_counting_atom(params, rng, params.max_nesting, budget),
    }
}

fn gen_counting_atom(
    params: &RandomFormulaParams,
    rng: &mut ChaCha8Rng,
    nesting: usize,
    budget: &mut usize,
) -> Formula {
    *budget = budget.saturating_sub(1);
    let num_summands = rng.gen_range(1..=2usize);
    let mut summands = Vec::with_capacity(num_summands);
    for _ in 0..num_summands {
        let magnitude = rng.gen_range(1..=params.max_constant);
        let coeff = if rng.gen_bool(0.3) {
            -BigInt::from(magnitude)
        } else {
            BigInt::from(magnitude)
        };
        summands.push((coeff, gen_body(params, rng, nesting, budget, 2)));
    }
    let term = CountingTerm::new(summands);
    let rel = match rng.gen_range(0..4u8) {
        0 => CountRel::Geq(BigInt::from(rng.gen_range(0..=params.max_constant))),
        1 => CountRel::Leq(BigInt::from(rng.gen_range(0..=params.max_constant))),
        n => {
            let modulus = BigUint::from(rng.gen_range(1..=params.max_constant));
            let residue = BigUint::from(rng.gen_range(0..params.max_constant))
                .min(&modulus - BigUint::one());
            if n == 2 {
                CountRel::Cong { modulus, residue }
            } else {
                CountRel::NotCong { modulus, residue }
            }
        }
    };
    Formula::count(term, rel)
}

fn gen_body(
    params: &RandomFormulaParams,
    rng: &mut ChaCha8Rng,
    nesting: usize,
    budget: &mut usize,
    depth: usize,
) -> Formula {
    if nesting > 0 && *budget > 0 && rng.gen_bool(0.25) {
        return gen_counting_atom(params, rng, nesting - 1, budget);
    }
    if depth == 0 || rng.gen_bool(0.4) {
        return match rng.gen_range(0..8u8) {
            0 => Formula::Top,
            1 => Formula::Bottom,
            _ => Formula::atom(format!("P{}", rng.gen_range(0..params.signature_size.max(1)))),
        };
    }
    match rng.gen_range(0..3u8) {
        0 => Formula::not(gen_body(params, rng, nesting, budget, depth - 1)),
        1 => Formula::and(
            gen_body(params, rng, nesting, budget, depth - 1),
            gen_body(params, rng, nesting, budget, depth - 1),
        ),
        _ => Formula::or(
            gen_body(params, rng, nesting, budget, depth - 1),
            gen_body(params, rng, nesting, budget, depth - 1),
        ),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::formula::characteristic_vector;
    use crate::parser::parse;

    fn solve_full_default(text: &str) -> Verdict {
        let formula = parse(text).unwrap();
        solve(&formula, &SolveConfig::default()).unwrap()
    }

    #[test]
    fn solve_strict_majority() {
        let verdict = solve_full_default("2*#[P(x)] - #[true] >= 1");
        let Status::Sat { structure, .. } = &verdict.status else {
            panic!("expected SAT");
        };
        let p = structure
            .elements()
            .iter()
            .filter(|t| t.holds(0))
            .count();
        assert!(2 * p > structure.size());
    }

    #[test]
    fn solve_empty_universe_unsat() {
        let verdict = solve_full_default("#[true] <= 0");
        assert!(!verdict.is_sat());
        assert!(!verdict.stats.incomplete);
    }

    #[test]
    fn solve_equicardinal_odd() {
        let verdict = solve_full_default("I(P(x), Q(x)) & #[P(x)] % 2 = 1");
        let Status::Sat { vector, .. } = &verdict.status else {
            panic!("expected SAT");
        };
        let total_p: BigUint = vector
            .entries()
            .filter(|(t, _)| t.holds(0))
            .map(|(_, c)| c.clone())
            .sum();
        assert!(total_p.is_odd());
    }

    #[test]
    fn solve_rejects_free_variable_without_flag() {
        let formula = parse("P(x)").unwrap();
        assert!(matches!(
            solve(&formula, &SolveConfig::default()),
            Err(SolveError::NotASentence)
        ));
        let cfg = SolveConfig {
            assume_exists: true,
            ..SolveConfig::default()
        };
        assert!(solve(&formula, &cfg).unwrap().is_sat());
    }

    #[test]
    fn build_structure_examples() {
        let sig = Signature::new(["P"]).unwrap();
        let vector = CharacteristicVector::new(
            sig.clone(),
            BTreeMap::from([
                (OneType::from_mask(0b1), BigUint::from(2u32)),
                (OneType::from_mask(0b0), BigUint::one()),
            ]),
        );
        let m = build_structure(&vector).unwrap();
        assert_eq!(
            m.elements().iter().map(|t| t.mask()).collect::<Vec<_>>(),
            vec![0b0, 0b1, 0b1]
        );
        assert_eq!(characteristic_vector(&m), vector);

        let empty_sig = Signature::empty();
        let anon = CharacteristicVector::new(
            empty_sig,
            BTreeMap::from([(OneType::from_mask(0), BigUint::one())]),
        );
        assert_eq!(build_structure(&anon).unwrap().size(), 1);

        let zero = CharacteristicVector::new(sig, BTreeMap::new());
        assert!(matches!(
            build_structure(&zero),
            Err(SolveError::Structure(StructureError::EmptyUniverse))
        ));
    }

    #[test]
    fn verify_examples() {
        let sig = Signature::new(["P"]).unwrap();
        let m = FiniteStructure::new(sig, vec![OneType::from_mask(0b1)]).unwrap();
        let majority = parse("2*#[P(x)] - #[true] >= 1").unwrap();
        assert!(verify(&majority, &m).unwrap());
        let two = parse("#[P(x)] >= 2").unwrap();
        assert!(!verify(&two, &m).unwrap());
        let nonempty = parse("#[true] >= 1").unwrap();
        assert!(verify(&nonempty, &m).unwrap());
    }

    #[test]
    fn sparse_support_bound_values() {
        assert_eq!(sparse_support_bound(1, &BigUint::one()), 2);
        assert_eq!(sparse_support_bound(4, &BigUint::from(8u32)), 40);
        assert_eq!(sparse_support_bound(1, &BigUint::from(1024u32)), 22);
    }

    #[test]
    fn oracle_examples() {
        let both = parse("#[P(x)] >= 1 & #[!P(x)] >= 1").unwrap();
        assert_eq!(oracle_sat_upto(&both, 1).unwrap(), None);
        let v = oracle_sat_upto(&both, 2).unwrap().unwrap();
        assert_eq!(v.total(), BigUint::from(2u32));

        let falsum = parse("#[false] >= 1").unwrap();
        assert_eq!(oracle_sat_upto(&falsum, 6).unwrap(), None);

        let multiple = parse("#[true] % 3 = 0").unwrap();
        let v = oracle_sat_upto(&multiple, 4).unwrap().unwrap();
        assert_eq!(v.total(), BigUint::from(3u32));
        // vectors are tried first-type-heavy first
        assert_eq!(v.count(&OneType::from_mask(0)), BigUint::from(3u32));
    }

    #[test]
    fn oracle_matches_slow_path() {
        // same verdicts with and without the compiled fast path
        for seed in 0..25u64 {
            let params = RandomFormulaParams {
                signature_size: 2,
                max_constant: 4,
                ..RandomFormulaParams::default()
            };
            let formula = random_formula(&params, seed);
            let sig = signature_of(&formula);
            let fast = oracle_sat_upto(&formula, 8).unwrap();
            // exact reference: structure-based evaluation over the same order
            let mut counts = vec![0u64; 1 << sig.len()];
            let mut slow = None;
            'outer: for total in 1..=8 {
                if search_vectors(&mut counts, 0, total, &mut |c| {
                    let v = vector_from_counts(&sig, c);
                    check_sentence(&build_structure(&v).unwrap(), &formula).unwrap()
                }) {
                    slow = Some(vector_from_counts(&sig, &counts));
                    break 'outer;
                }
            }
            assert_eq!(fast, slow, "seed {seed}");
        }
    }

    #[test]
    fn random_formula_is_deterministic_sentence() {
        let params = RandomFormulaParams::default();
        let a = random_formula(&params, 1);
        let b = random_formula(&params, 1);
        assert_eq!(a, b);
        assert!(is_sentence(&a));

        let single = RandomFormulaParams {
            depth: 1,
            ..RandomFormulaParams::default()
        };
        assert!(matches!(random_formula(&single, 7), Formula::Count(..)));
    }

    #[test]
    fn sparse_mode_finds_witness_and_marks_incomplete() {
        let formula = parse("#[P(x)] >= 2 & #[!P(x) & Q(x)] >= 1").unwrap();
        let cfg = SolveConfig {
            mode: Mode::Sparse,
            sparse_budget: 32,
            seed: 3,
            ..SolveConfig::default()
        };
        let verdict = solve(&formula, &cfg).unwrap();
        assert!(verdict.is_sat(), "sampling should find a 2-type support");

        let unsat = parse("#[true] <= 0").unwrap();
        let verdict = solve(&unsat, &cfg).unwrap();
        assert!(!verdict.is_sat());
        assert!(verdict.stats.incomplete);
    }

    #[test]
    fn parallel_matches_sequential() {
        let text = "#[P(x)] % 2 != 1 & #[Q(x)] % 3 != 0 & #[P(x) | Q(x)] >= 2";
        let formula = parse(text).unwrap();
        let seq = solve(&formula, &SolveConfig::default()).unwrap();
        let par = solve(
            &formula,
            &SolveConfig {
                parallel: 4,
                ..SolveConfig::default()
            },
        )
        .unwrap();
        assert_eq!(seq.is_sat(), par.is_sat());
    }

    use num::Integer;
}
