//! Translation of flat formulas into systems of linear inequalities and
//! congruences over type-count unknowns, congruence elimination via quotient
//! variables, resolution of negated congruences, and support restriction.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use num::{BigInt, BigUint, One, Signed, Zero};
use thiserror::Error;

use crate::flatten::FlatFormula;
use crate::formula::{euclidean_residue, CountRel};
use crate::types::{term_coefficients, TypeSpace, TypeSpaceError};

/// An unknown of a linear system. All unknowns range over the naturals.
/// The derived ordering (type counts first, ascending) is the canonical
/// order used for variable naming and solver branching.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub enum Unknown {
    /// `x_k`: the number of elements of the k-th 1-type.
    TypeCount(usize),
    /// `yp_i`/`yn_i`: the split signed quotient introduced when the i-th
    /// congruence row is eliminated.
    QuotientPos(usize),
    QuotientNeg(usize),
    /// `r_i`, `qp_i`/`qn_i`: remainder and split quotient introduced when the
    /// i-th negated-congruence row is expanded.
    Remainder(usize),
    RemQuotPos(usize),
    RemQuotNeg(usize),
}

impl fmt::Display for Unknown {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Unknown::TypeCount(k) => write!(f, "x{k}"),
            Unknown::QuotientPos(i) => write!(f, "yp{i}"),
            Unknown::QuotientNeg(i) => write!(f, "yn{i}"),
            Unknown::Remainder(i) => write!(f, "r{i}"),
            Unknown::RemQuotPos(i) => write!(f, "qp{i}"),
            Unknown::RemQuotNeg(i) => write!(f, "qn{i}"),
        }
    }
}

#[derive(Clone, PartialEq, Eq, Debug)]
pub enum Relation {
    Geq,
    Leq,
    /// Row value is congruent to the rhs modulo `modulus`.
    Cong { modulus: BigUint },
    /// Row value is not congruent to the rhs modulo `modulus`.
    NotCong { modulus: BigUint },
}

/// A single row: an integer linear combination of unknowns compared to a
/// constant. Zero coefficients are not stored; a row without unknowns is a
/// constant row and is legal.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct LinearConstraint {
    pub coeffs: BTreeMap<Unknown, BigInt>,
    pub relation: Relation,
    pub rhs: BigInt,
}

impl LinearConstraint {
    pub fn new(
        coeffs: BTreeMap<Unknown, BigInt>,
        relation: Relation,
        rhs: BigInt,
    ) -> LinearConstraint {
        let coeffs = coeffs.into_iter().filter(|(_, c)| !c.is_zero()).collect();
        LinearConstraint {
            coeffs,
            relation,
            rhs,
        }
    }

    /// Exact row value under an assignment; missing unknowns count as zero.
    pub fn value_under<V: Clone + Into<BigInt>>(
        &self,
        assignment: &BTreeMap<Unknown, V>,
    ) -> BigInt {
        let mut total = BigInt::zero();
        for (u, c) in &self.coeffs {
            if let Some(v) = assignment.get(u) {
                total += c * v.clone().into();
            }
        }
        total
    }

    pub fn holds_under<V: Clone + Into<BigInt>>(
        &self,
        assignment: &BTreeMap<Unknown, V>,
    ) -> bool {
        let value = self.value_under(assignment);
        match &self.relation {
            Relation::Geq => value >= self.rhs,
            Relation::Leq => value <= self.rhs,
            Relation::Cong { modulus } => {
                euclidean_residue(&value, modulus) == euclidean_residue(&self.rhs, modulus)
            }
            Relation::NotCong { modulus } => {
                euclidean_residue(&value, modulus) != euclidean_residue(&self.rhs, modulus)
            }
        }
    }
}

impl fmt::Display for LinearConstraint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.coeffs.is_empty() {
            write!(f, "0")?;
        } else {
            for (i, (u, c)) in self.coeffs.iter().enumerate() {
                if i == 0 {
                    write!(f, "{c}*{u}")?;
                } else {
                    write!(f, " {c:+}*{u}")?;
                }
            }
        }
        match &self.relation {
            Relation::Geq => write!(f, " >= {}", self.rhs),
            Relation::Leq => write!(f, " <= {}", self.rhs),
            Relation::Cong { modulus } => write!(f, " % {} = {}", modulus, self.rhs),
            Relation::NotCong { modulus } => write!(f, " % {} != {}", modulus, self.rhs),
        }
    }
}

/// A system of rows over a shared ordered list of unknowns. `provenance`
/// maps each row to the index of the flat-formula literal it came from
/// (`None` for structural rows such as nonemptiness).
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct LinearSystem {
    unknowns: Vec<Unknown>,
    constraints: Vec<LinearConstraint>,
    provenance: Vec<Option<usize>>,
    num_types: usize,
}

#[derive(Error, Debug, Clone, PartialEq, Eq)]
pub enum LinSysError {
    #[error("negated congruence rows present; call expand_negated first")]
    NegatedCongruencePresent,
    #[error(transparent)]
    TypeSpace(#[from] TypeSpaceError),
}

impl LinearSystem {
    /// Builds a system directly from an unknown list and rows; provenance is
    /// unset and the type count is inferred from the `TypeCount` unknowns.
    pub fn from_parts(
        unknowns: Vec<Unknown>,
        constraints: Vec<LinearConstraint>,
    ) -> LinearSystem {
        let num_types = unknowns
            .iter()
            .filter(|u| matches!(u, Unknown::TypeCount(_)))
            .count();
        let provenance = vec![None; constraints.len()];
        LinearSystem {
            unknowns,
            constraints,
            provenance,
            num_types,
        }
    }

    pub fn unknowns(&self) -> &[Unknown] {
        &self.unknowns
    }

    pub fn constraints(&self) -> &[LinearConstraint] {
        &self.constraints
    }

    pub fn provenance(&self) -> &[Option<usize>] {
        &self.provenance
    }

    pub fn num_types(&self) -> usize {
        self.num_types
    }

    pub fn has_congruences(&self) -> bool {
        self.constraints
            .iter()
            .any(|c| matches!(c.relation, Relation::Cong { .. }))
    }

    pub fn has_negated_congruences(&self) -> bool {
        self.constraints
            .iter()
            .any(|c| matches!(c.relation, Relation::NotCong { .. }))
    }

    /// Largest absolute value among coefficients, right-hand sides and
    /// moduli; at least 1.
    pub fn max_abs_value(&self) -> BigUint {
        let mut max = BigUint::one();
        for row in &self.constraints {
            for c in row.coeffs.values() {
                max = max.max(c.abs().to_biguint().expect("abs"));
            }
            max = max.max(row.rhs.abs().to_biguint().expect("abs"));
            if let Relation::Cong { modulus } | Relation::NotCong { modulus } = &row.relation {
                max = max.max(modulus.clone());
            }
        }
        max
    }

    /// All rows hold under the assignment (congruences via the Euclidean
    /// residue). Unmapped unknowns count as zero.
    pub fn satisfied_by<V: Clone + Into<BigInt>>(
        &self,
        assignment: &BTreeMap<Unknown, V>,
    ) -> bool {
        self.constraints.iter().all(|c| c.holds_under(assignment))
    }

    fn push(&mut self, row: LinearConstraint, source: Option<usize>) {
        self.constraints.push(row);
        self.provenance.push(source);
    }

    /// One row per line in the stable dump format, e.g.
    /// `1*x1 -1*x2 >= 0`.
    pub fn dump(&self) -> String {
        self.constraints
            .iter()
            .map(|c| c.to_string())
            .collect::<Vec<_>>()
            .join("\n")
    }
}

/// Builds the system for a flat formula over a type space: one row per
/// counting literal (congruences carried symbolically) plus the nonemptiness
/// row `sum of all type counts >= 1`.
pub fn encode(flat: &FlatFormula, space: &TypeSpace) -> Result<LinearSystem, LinSysError> {
    let mut system = LinearSystem {
        unknowns: (0..space.len()).map(Unknown::TypeCount).collect(),
        constraints: Vec::new(),
        provenance: Vec::new(),
        num_types: space.len(),
    };
    for (i, literal) in flat.literals().iter().enumerate() {
        let coeff_vec = term_coefficients(&literal.term, space)?;
        let coeffs: BTreeMap<Unknown, BigInt> = coeff_vec
            .into_iter()
            .enumerate()
            .filter(|(_, c)| !c.is_zero())
            .map(|(k, c)| (Unknown::TypeCount(k), c))
            .collect();
        let (relation, rhs) = match &literal.rel {
            CountRel::Geq(b) => (Relation::Geq, b.clone()),
            CountRel::Leq(b) => (Relation::Leq, b.clone()),
            CountRel::Cong { modulus, residue } => (
                Relation::Cong {
                    modulus: modulus.clone(),
                },
                BigInt::from(residue.clone()),
            ),
            CountRel::NotCong { modulus, residue } => (
                Relation::NotCong {
                    modulus: modulus.clone(),
                },
                BigInt::from(residue.clone()),
            ),
        };
        system.push(LinearConstraint::new(coeffs, relation, rhs), Some(i));
    }
    let nonempty: BTreeMap<Unknown, BigInt> = (0..space.len())
        .map(|k| (Unknown::TypeCount(k), BigInt::one()))
        .collect();
    system.push(
        LinearConstraint::new(nonempty, Relation::Geq, BigInt::one()),
        None,
    );
    Ok(system)
}

/// Replaces each congruence row `t = d (mod c)` by the inequality pair
/// `t - c*yp + c*yn <= d` and `>= d` with a fresh split quotient `yp - yn`.
/// The split covers negative term values, which a single natural-valued
/// quotient cannot.
pub fn eliminate_congruences(system: &LinearSystem) -> Result<LinearSystem, LinSysError> {
    if system.has_negated_congruences() {
        return Err(LinSysError::NegatedCongruencePresent);
    }
    let mut out = LinearSystem {
        unknowns: system.unknowns.clone(),
        constraints: Vec::new(),
        provenance: Vec::new(),
        num_types: system.num_types,
    };
    let mut next_quotient = 0;
    for (row, source) in system.constraints.iter().zip(&system.provenance) {
        match &row.relation {
            Relation::Cong { modulus } => {
                let i = next_quotient;
                next_quotient += 1;
                out.unknowns.push(Unknown::QuotientPos(i));
                out.unknowns.push(Unknown::QuotientNeg(i));
                let m = BigInt::from(modulus.clone());
                let mut coeffs = row.coeffs.clone();
                coeffs.insert(Unknown::QuotientPos(i), -m.clone());
                coeffs.insert(Unknown::QuotientNeg(i), m);
                out.push(
                    LinearConstraint::new(coeffs.clone(), Relation::Leq, row.rhs.clone()),
                    *source,
                );
                out.push(
                    LinearConstraint::new(coeffs, Relation::Geq, row.rhs.clone()),
                    *source,
                );
            }
            _ => out.push(row.clone(), *source),
        }
    }
    Ok(out)
}

/// Resolves each negated-congruence row `t != d (mod c)` with a fresh
/// remainder `r` and split quotient: `t - r - c*qp + c*qn = 0`, `r <= c-1`,
/// and per branch either `r <= d-1` or `r >= d+1` (degenerate branches
/// dropped). Branches multiply across rows; a system without such rows is
/// returned unchanged as the single branch.
pub fn expand_negated(system: &LinearSystem) -> Vec<LinearSystem> {
    #[derive(Clone)]
    enum BranchSide {
        Below, // r <= d-1
        Above, // r >= d+1
    }

    let mut row_options: Vec<(usize, Vec<BranchSide>)> = Vec::new();
    for (idx, row) in system.constraints.iter().enumerate() {
        if let Relation::NotCong { modulus } = &row.relation {
            let c = BigInt::from(modulus.clone());
            let mut options = Vec::new();
            if row.rhs >= BigInt::one() {
                options.push(BranchSide::Below);
            }
            if row.rhs <= &c - BigInt::from(2) {
                options.push(BranchSide::Above);
            }
            row_options.push((idx, options));
        }
    }
    if row_options.is_empty() {
        return vec![system.clone()];
    }

    // cartesian product of per-row branch choices
    let mut combos: Vec<Vec<BranchSide>> = vec![Vec::new()];
    for (_, options) in &row_options {
        let mut next = Vec::new();
        for combo in &combos {
            for opt in options {
                let mut extended = combo.clone();
                extended.push(opt.clone());
                next.push(extended);
            }
        }
        combos = next;
    }

    let mut branches = Vec::new();
    for combo in combos {
        let mut out = LinearSystem {
            unknowns: system.unknowns.clone(),
            constraints: Vec::new(),
            provenance: Vec::new(),
            num_types: system.num_types,
        };
        let mut fresh = 0;
        for (idx, row) in system.constraints.iter().enumerate() {
            let source = system.provenance[idx];
            if let Relation::NotCong { modulus } = &row.relation {
                let choice_pos = row_options
                    .iter()
                    .position(|(i, _)| *i == idx)
                    .expect("row listed");
                let side = &combo[choice_pos];
                let j = fresh;
                fresh += 1;
                let r = Unknown::Remainder(j);
                let qp = Unknown::RemQuotPos(j);
                let qn = Unknown::RemQuotNeg(j);
                out.unknowns.extend([r, qp, qn]);
                let c = BigInt::from(modulus.clone());

                let mut coeffs = row.coeffs.clone();
                coeffs.insert(r, BigInt::from(-1));
                coeffs.insert(qp, -c.clone());
                coeffs.insert(qn, c.clone());
                out.push(
                    LinearConstraint::new(coeffs.clone(), Relation::Leq, BigInt::zero()),
                    source,
                );
                out.push(
                    LinearConstraint::new(coeffs, Relation::Geq, BigInt::zero()),
                    source,
                );
                out.push(
                    LinearConstraint::new(
                        BTreeMap::from([(r, BigInt::one())]),
                        Relation::Leq,
                        &c - BigInt::one(),
                    ),
                    source,
                );
                let branch_row = match side {
                    BranchSide::Below => LinearConstraint::new(
                        BTreeMap::from([(r, BigInt::one())]),
                        Relation::Leq,
                        &row.rhs - BigInt::one(),
                    ),
                    BranchSide::Above => LinearConstraint::new(
                        BTreeMap::from([(r, BigInt::one())]),
                        Relation::Geq,
                        &row.rhs + BigInt::one(),
                    ),
                };
                out.push(branch_row, source);
            } else {
                out.push(row.clone(), source);
            }
        }
        branches.push(out);
    }
    branches
}

/// Fixes all type-count unknowns outside `keep` to zero by deleting their
/// columns. Quotient and remainder unknowns are retained.
pub fn restrict_support(system: &LinearSystem, keep: &BTreeSet<usize>) -> LinearSystem {
    let retained = |u: &Unknown| match u {
        Unknown::TypeCount(k) => keep.contains(k),
        _ => true,
    };
    let unknowns = system
        .unknowns
        .iter()
        .copied()
        .filter(retained)
        .collect();
    let constraints = system
        .constraints
        .iter()
        .map(|row| LinearConstraint {
            coeffs: row
                .coeffs
                .iter()
                .filter(|(u, _)| retained(u))
                .map(|(u, c)| (*u, c.clone()))
                .collect(),
            relation: row.relation.clone(),
            rhs: row.rhs.clone(),
        })
        .collect();
    LinearSystem {
        unknowns,
        constraints,
        provenance: system.provenance.clone(),
        num_types: system.num_types,
    }
}
