//! Integer feasibility over the naturals for congruence-free linear systems.
//!
//! The decision path is exact throughout: a phase-1 simplex over
//! arbitrary-precision rationals decides the relaxation, and branch-and-bound
//! on fractional coordinates decides integrality. Two integer presolves keep
//! the search finite in practice: per-row gcd rounding, and an integer
//! solvability check of the equality subsystem. A small-solution cap bounds
//! every unknown so the search terminates even on pathological inputs.

use std::collections::BTreeMap;
use std::time::{Duration, Instant};

use num::rational::BigRational;
use num::{BigInt, BigUint, Integer, One, Signed, ToPrimitive, Zero};

use crate::linsys::{LinearSystem, Relation, Unknown};

/// A total map from the system's unknowns to natural values.
pub type Assignment = BTreeMap<Unknown, BigUint>;

#[derive(Clone, Debug, Default)]
pub struct SolverStats {
    /// Branch-and-bound nodes explored.
    pub nodes: u64,
    /// Simplex pivots across all relaxations.
    pub pivots: u64,
    pub wall: Duration,
}

impl SolverStats {
    pub fn absorb(&mut self, other: &SolverStats) {
        self.nodes += other.nodes;
        self.pivots += other.pivots;
        self.wall += other.wall;
    }
}

/// Which branch is explored first at a fractional coordinate.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum BranchOrder {
    FloorFirst,
    CeilFirst,
}

#[derive(Clone, Debug)]
pub struct IlpOutcome {
    pub assignment: Option<Assignment>,
    pub stats: SolverStats,
}

/// One inequality in dense form over an ordered variable list.
#[derive(Clone, Debug)]
struct Row {
    coeffs: Vec<BigInt>,
    geq: bool,
    rhs: BigInt,
}

impl Row {
    fn from_constraint(
        c: &crate::linsys::LinearConstraint,
        index: &BTreeMap<Unknown, usize>,
    ) -> Row {
        let mut coeffs = vec![BigInt::zero(); index.len()];
        for (u, v) in &c.coeffs {
            coeffs[index[u]] = v.clone();
        }
        let geq = match c.relation {
            Relation::Geq => true,
            Relation::Leq => false,
            _ => panic!("congruence rows must be eliminated before solving"),
        };
        Row {
            coeffs,
            geq,
            rhs: c.rhs.clone(),
        }
    }

    fn is_constant(&self) -> bool {
        self.coeffs.iter().all(|c| c.is_zero())
    }

    fn constant_holds(&self) -> bool {
        if self.geq {
            BigInt::zero() >= self.rhs
        } else {
            BigInt::zero() <= self.rhs
        }
    }

    /// Divides the row by the gcd of its coefficients, rounding the
    /// right-hand side inward. Sound for integer solutions only.
    fn gcd_tighten(&mut self) {
        let mut g = BigInt::zero();
        for c in &self.coeffs {
            g = g.gcd(c);
        }
        if g <= BigInt::one() {
            return;
        }
        for c in &mut self.coeffs {
            *c = &*c / &g;
        }
        self.rhs = if self.geq {
            self.rhs.div_ceil(&g)
        } else {
            self.rhs.div_floor(&g)
        };
    }
}

/// Variable ordering used for naming, branching and witness extraction:
/// ascending canonical `Unknown` order.
fn sorted_vars(system: &LinearSystem) -> Vec<Unknown> {
    let mut vars: Vec<Unknown> = system.unknowns().to_vec();
    vars.sort_unstable();
    vars
}

fn system_rows(system: &LinearSystem, vars: &[Unknown]) -> Vec<Row> {
    let index: BTreeMap<Unknown, usize> =
        vars.iter().enumerate().map(|(i, u)| (*u, i)).collect();
    system
        .constraints()
        .iter()
        .map(|c| Row::from_constraint(c, &index))
        .collect()
}

/// Decides feasibility of the rational relaxation (all unknowns >= 0) and
/// returns a feasible point when one exists. Infeasibility of the relaxation
/// certifies integer infeasibility.
pub fn lp_feasible(system: &LinearSystem) -> Option<BTreeMap<Unknown, BigRational>> {
    let vars = sorted_vars(system);
    let rows = system_rows(system, &vars);
    let mut pivots = 0;
    let point = phase1_simplex(&rows, vars.len(), &mut pivots)?;
    Some(vars.into_iter().zip(point).collect())
}

/// A cap such that the system is feasible over the naturals iff it has a
/// solution with every unknown at most the cap. The formula
/// `(n + m) * (m * a_max)^(2m+1)` is a standard small-solution bound; only
/// validity matters, not tightness, and it is monotone in the coefficient
/// magnitudes.
pub fn variable_bound(system: &LinearSystem) -> BigUint {
    let n = system.unknowns().len().max(1);
    let m = system.constraints().len().max(1);
    let a_max = system.max_abs_value();
    let base = BigUint::from(m) * a_max;
    BigUint::from(n + m) * base.pow(2 * m as u32 + 1)
}

/// Decides feasibility over the naturals and returns a witness assignment.
/// Branch-and-bound on the exact rational relaxation: the first fractional
/// coordinate in canonical order is branched on, floor branch first.
pub fn ilp_solve(system: &LinearSystem) -> IlpOutcome {
    ilp_solve_with(system, BranchOrder::FloorFirst)
}

pub fn ilp_solve_with(system: &LinearSystem, order: BranchOrder) -> IlpOutcome {
    let start = Instant::now();
    let mut stats = SolverStats::default();
    let assignment = search(system, order, &mut stats);
    stats.wall = start.elapsed();
    if let Some(a) = &assignment {
        // exact big-integer recheck of the witness before returning it
        assert!(
            system.satisfied_by(a),
            "solver witness failed exact recheck"
        );
    }
    IlpOutcome { assignment, stats }
}

struct SearchNode {
    /// Per-variable (lower, upper) bound refinements from branching. The
    /// implicit domain is `[0, cap]`.
    bounds: BTreeMap<usize, (BigInt, Option<BigInt>)>,
    /// Per difference-pair (lower, upper) bound refinements on the value
    /// `x_i - x_j`, keyed by pair index. `None` is unbounded.
    diff_bounds: BTreeMap<usize, (Option<BigInt>, Option<BigInt>)>,
}

/// Pairs of columns that are exact negatives of each other in every row —
/// the split signed quotients from congruence elimination. Only the
/// difference of such a pair is constrained, so the pair is branched on as
/// one signed variable; branching its halves separately lets the relaxation
/// shift both upward forever.
fn negated_column_pairs(rows: &[Row], n: usize) -> Vec<(usize, usize)> {
    let mut pairs = Vec::new();
    let mut used = vec![false; n];
    for i in 0..n {
        if used[i] || rows.iter().all(|r| r.coeffs[i].is_zero()) {
            continue;
        }
        for j in (i + 1)..n {
            if used[j] {
                continue;
            }
            if rows.iter().all(|r| r.coeffs[i] == -&r.coeffs[j]) {
                used[i] = true;
                used[j] = true;
                pairs.push((i, j));
                break;
            }
        }
    }
    pairs
}

fn search(
    system: &LinearSystem,
    order: BranchOrder,
    stats: &mut SolverStats,
) -> Option<Assignment> {
    let vars = sorted_vars(system);
    let mut rows = system_rows(system, &vars);

    // presolve: constant rows decide themselves, other rows tighten by gcd
    let mut kept = Vec::new();
    for mut row in rows.drain(..) {
        if row.is_constant() {
            if !row.constant_holds() {
                return None;
            }
        } else {
            row.gcd_tighten();
            kept.push(row);
        }
    }
    let rows = kept;

    // presolve: the equality subsystem must be solvable over the integers
    if !equality_subsystem_solvable(&rows) {
        return None;
    }

    if vars.is_empty() {
        return Some(Assignment::new());
    }

    // rows that form one half of an exact equality (a Geq with a Leq twin);
    // used by the per-node residue-window pruning
    let eq_rows: Vec<bool> = rows
        .iter()
        .enumerate()
        .map(|(i, a)| {
            a.geq
                && rows
                    .iter()
                    .enumerate()
                    .any(|(j, b)| i != j && !b.geq && a.coeffs == b.coeffs && a.rhs == b.rhs)
        })
        .collect();

    // Branch-and-bound with an escalating cap on upward (ceiling) branches.
    // A run whose every upward branch stayed under the cap is a complete
    // search; a run that cut a branch at the cap is rerun with the cap
    // squared, and once the cap reaches the small-solution bound an
    // exhausted search certifies infeasibility.
    let pairs = negated_column_pairs(&rows, vars.len());

    let theoretical = BigInt::from(variable_bound(system));
    let mut cap = BigInt::from(64u32).min(theoretical.clone());
    loop {
        match bounded_search(system, &vars, &rows, &eq_rows, &pairs, &cap, order, stats) {
            BoxOutcome::Found(a) => return Some(a),
            BoxOutcome::ExhaustedComplete => return None,
            BoxOutcome::ExhaustedCut => {
                if cap >= theoretical {
                    return None;
                }
                cap = (&cap * &cap).min(theoretical.clone());
            }
        }
    }
}

enum BoxOutcome {
    Found(Assignment),
    /// Every branch was explored to completion: infeasibility is certified.
    ExhaustedComplete,
    /// Some upward branch was cut at the cap: infeasibility is not yet
    /// certified and the caller escalates the cap.
    ExhaustedCut,
}

#[allow(clippy::too_many_arguments)]
fn bounded_search(
    system: &LinearSystem,
    vars: &[Unknown],
    rows: &[Row],
    eq_rows: &[bool],
    pairs: &[(usize, usize)],
    cap: &BigInt,
    order: BranchOrder,
    stats: &mut SolverStats,
) -> BoxOutcome {
    let mut in_pair = vec![false; vars.len()];
    for (i, j) in pairs {
        in_pair[*i] = true;
        in_pair[*j] = true;
    }
    let mut cut = false;
    let mut stack = vec![SearchNode {
        bounds: BTreeMap::new(),
        diff_bounds: BTreeMap::new(),
    }];
    while let Some(node) = stack.pop() {
        stats.nodes += 1;
        // rows for this node: base rows plus the difference-pair bounds
        // from branching (variable bounds are passed as boxes instead)
        let mut node_rows = rows.to_vec();
        let mut node_eq = eq_rows.to_vec();
        for (p, (dlo, dhi)) in &node.diff_bounds {
            let (i, j) = pairs[*p];
            if let Some(dlo) = dlo {
                node_rows.push(diff_row(vars.len(), i, j, dlo.clone(), true));
                node_eq.push(false);
            }
            if let Some(dhi) = dhi {
                node_rows.push(diff_row(vars.len(), i, j, dhi.clone(), false));
                node_eq.push(false);
            }
        }
        // integer interval propagation prunes nodes the relaxation cannot,
        // in particular equality rows whose reachable window misses the
        // required residue class (the quotient unknowns are unbounded, so
        // plain branching would chase them upward forever)
        let mut lo = vec![BigInt::zero(); vars.len()];
        let mut hi: Vec<Option<BigInt>> = vec![None; vars.len()];
        for (i, (l, h)) in &node.bounds {
            lo[*i] = l.clone();
            hi[*i] = h.clone();
        }
        if !propagate_bounds(&node_rows, &node_eq, &mut lo, &mut hi) {
            continue;
        }
        let mut lp_rows = node_rows;
        for (i, (lo, hi)) in &node.bounds {
            if lo > &BigInt::zero() {
                lp_rows.push(bound_row(vars.len(), *i, lo.clone(), true));
            }
            if let Some(hi) = hi {
                lp_rows.push(bound_row(vars.len(), *i, hi.clone(), false));
            }
        }
        let Some(point) = phase1_simplex(&lp_rows, vars.len(), &mut stats.pivots) else {
            continue;
        };

        // integrality: individual values for plain variables, the difference
        // for negated-column pairs (the halves are interchangeable)
        let frac_var = point
            .iter()
            .enumerate()
            .find(|(k, v)| !in_pair[*k] && !v.is_integer())
            .map(|(k, _)| k);
        let frac_pair = pairs
            .iter()
            .enumerate()
            .map(|(p, (i, j))| (p, &point[*i] - &point[*j]))
            .find(|(_, d)| !d.is_integer());

        if frac_var.is_none() && frac_pair.is_none() {
            let mut values: Vec<BigInt> =
                point.iter().map(|v| v.to_integer()).collect();
            for (i, j) in pairs {
                // renormalize the pair to the canonical nonnegative split
                let d = &values[*i] - &values[*j];
                values[*i] = d.clone().max(BigInt::zero());
                values[*j] = (-d).max(BigInt::zero());
            }
            let assignment: Assignment = vars
                .iter()
                .zip(&values)
                .map(|(u, v)| {
                    (*u, v.to_biguint().expect("integral point is nonnegative"))
                })
                .collect();
            return BoxOutcome::Found(assignment);
        }

        // cheap dive cut-off: rounding the relaxed point often hits a
        // witness directly and avoids long one-sided dives
        if let Some(a) = rounded_candidate(system, vars, &point) {
            return BoxOutcome::Found(a);
        }

        let mut children = Vec::new();
        if let Some(i) = frac_var {
            let value = &point[i];
            let floor = value.floor().to_integer();
            let ceil = &floor + BigInt::one();
            let (lo, hi) = node
                .bounds
                .get(&i)
                .cloned()
                .unwrap_or((BigInt::zero(), None));

            // downward child: x_i <= floor
            if floor >= lo {
                let mut bounds = node.bounds.clone();
                bounds.insert(i, (lo.clone(), Some(floor.clone())));
                children.push(SearchNode {
                    bounds,
                    diff_bounds: node.diff_bounds.clone(),
                });
            }
            // upward child: x_i >= ceil, subject to the current cap
            let within_cap = ceil <= *cap;
            let hi_ok = hi.as_ref().map_or(within_cap, |h| &ceil <= h);
            if hi_ok {
                let mut bounds = node.bounds.clone();
                bounds.insert(i, (ceil, hi));
                children.push(SearchNode {
                    bounds,
                    diff_bounds: node.diff_bounds.clone(),
                });
            } else if hi.is_none() && !within_cap {
                cut = true;
            }
        } else {
            let (p, d) = frac_pair.expect("some coordinate is fractional");
            let floor = d.floor().to_integer();
            let ceil = &floor + BigInt::one();
            let (dlo, dhi) = node
                .diff_bounds
                .get(&p)
                .cloned()
                .unwrap_or((None, None));

            // downward child: x_i - x_j <= floor, capped at -cap below
            let neg_cap = -cap.clone();
            let lo_ok = dlo.as_ref().map_or(floor >= neg_cap, |l| &floor >= l);
            if lo_ok {
                let mut diff_bounds = node.diff_bounds.clone();
                diff_bounds.insert(p, (dlo.clone(), Some(floor.clone())));
                children.push(SearchNode {
                    bounds: node.bounds.clone(),
                    diff_bounds,
                });
            } else if dlo.is_none() && floor < neg_cap {
                cut = true;
            }
            // upward child: x_i - x_j >= ceil, capped at cap above
            let hi_ok = dhi.as_ref().map_or(ceil <= *cap, |h| &ceil <= h);
            if hi_ok {
                let mut diff_bounds = node.diff_bounds.clone();
                diff_bounds.insert(p, (Some(ceil), dhi));
                children.push(SearchNode {
                    bounds: node.bounds.clone(),
                    diff_bounds,
                });
            } else if dhi.is_none() && ceil > *cap {
                cut = true;
            }
        }
        // stack order: the branch explored first is pushed last
        match order {
            BranchOrder::FloorFirst => children.reverse(),
            BranchOrder::CeilFirst => {}
        }
        stack.extend(children);
    }
    if cut {
        BoxOutcome::ExhaustedCut
    } else {
        BoxOutcome::ExhaustedComplete
    }
}

/// A row `x_i - x_j >= rhs` (or `<=`) used for difference-pair branching.
fn diff_row(n: usize, i: usize, j: usize, rhs: BigInt, geq: bool) -> Row {
    let mut coeffs = vec![BigInt::zero(); n];
    coeffs[i] = BigInt::one();
    coeffs[j] = -BigInt::one();
    Row { coeffs, geq, rhs }
}

/// Rounds a fractional relaxation point (floor everywhere, ceiling
/// everywhere, then nearest) and returns the first rounding that satisfies
/// the original system exactly.
fn rounded_candidate(
    system: &LinearSystem,
    vars: &[Unknown],
    point: &[BigRational],
) -> Option<Assignment> {
    let roundings: [fn(&BigRational) -> BigInt; 3] = [
        |v| v.floor().to_integer(),
        |v| v.ceil().to_integer(),
        |v| v.round().to_integer(),
    ];
    for rounding in roundings {
        let candidate: Assignment = vars
            .iter()
            .zip(point)
            .map(|(u, v)| {
                let r = rounding(v).max(BigInt::zero());
                (*u, r.to_biguint().expect("clamped to nonnegative"))
            })
            .collect();
        if system.satisfied_by(&candidate) {
            return Some(candidate);
        }
    }
    None
}

fn bound_row(n: usize, var: usize, rhs: BigInt, geq: bool) -> Row {
    let mut coeffs = vec![BigInt::zero(); n];
    coeffs[var] = BigInt::one();
    Row { coeffs, geq, rhs }
}

/// Integer interval propagation over `[lo, hi]` variable boxes (`None` is
/// unbounded above). Tightens the boxes against every row and then applies
/// two infeasibility tests: row activity windows against the right-hand
/// side, and a residue-window test on equality rows. Returns `false` when
/// the node is proven infeasible. Sound: bounds are only shrunk by valid
/// inferences, and pruning only happens when no integer point can exist.
fn propagate_bounds(
    rows: &[Row],
    eq_rows: &[bool],
    lo: &mut [BigInt],
    hi: &mut [Option<BigInt>],
) -> bool {
    // each row in <= form: Geq rows are negated
    let leq_form: Vec<(Vec<BigInt>, BigInt)> = rows
        .iter()
        .map(|r| {
            if r.geq {
                (r.coeffs.iter().map(|c| -c).collect(), -&r.rhs)
            } else {
                (r.coeffs.clone(), r.rhs.clone())
            }
        })
        .collect();

    for _pass in 0..8 {
        let mut changed = false;
        for (coeffs, rhs) in &leq_form {
            // minimum activity of the row without variable k, then bound k
            for k in 0..coeffs.len() {
                let a = &coeffs[k];
                if a.is_zero() {
                    continue;
                }
                let mut rest_min = Some(BigInt::zero());
                for (j, c) in coeffs.iter().enumerate() {
                    if j == k || c.is_zero() {
                        continue;
                    }
                    let term = if c.is_positive() {
                        Some(c * &lo[j])
                    } else {
                        hi[j].as_ref().map(|h| c * h)
                    };
                    rest_min = match (rest_min, term) {
                        (Some(acc), Some(t)) => Some(acc + t),
                        _ => None,
                    };
                }
                let Some(rest_min) = rest_min else { continue };
                let slack = rhs - rest_min;
                if a.is_positive() {
                    let bound = slack.div_floor(a);
                    if hi[k].as_ref().is_none_or(|h| bound < *h) {
                        if bound < lo[k] {
                            return false;
                        }
                        hi[k] = Some(bound);
                        changed = true;
                    }
                } else {
                    let bound = slack.div_ceil(a);
                    if bound > lo[k] {
                        if let Some(h) = &hi[k] {
                            if bound > *h {
                                return false;
                            }
                        }
                        lo[k] = bound;
                        changed = true;
                    }
                }
            }
        }
        if !changed {
            break;
        }
    }

    // activity window vs right-hand side for every row
    for (coeffs, rhs) in &leq_form {
        let mut min_activity = Some(BigInt::zero());
        for (j, c) in coeffs.iter().enumerate() {
            if c.is_zero() {
                continue;
            }
            let term = if c.is_positive() {
                Some(c * &lo[j])
            } else {
                hi[j].as_ref().map(|h| c * h)
            };
            min_activity = match (min_activity, term) {
                (Some(acc), Some(t)) => Some(acc + t),
                _ => None,
            };
        }
        if let Some(min_activity) = min_activity {
            if min_activity > *rhs {
                return false;
            }
        }
    }

    // residue windows: an equality row t = b splits into a part with finite
    // boxes (reachable window [w_min, w_max]) and unbounded variables. When
    // the unbounded coefficients contain both signs their span is exactly
    // the multiples of their gcd (shifted by the lower bounds), so the row
    // needs a window value congruent to the right residue — quotient pairs
    // from congruence elimination are the prime example.
    for (i, row) in rows.iter().enumerate() {
        if !eq_rows[i] {
            continue;
        }
        let mut w_min = BigInt::zero();
        let mut w_max = BigInt::zero();
        let mut unbounded: Vec<&BigInt> = Vec::new();
        let mut offset = BigInt::zero();
        for (j, c) in row.coeffs.iter().enumerate() {
            if c.is_zero() {
                continue;
            }
            match &hi[j] {
                Some(h) => {
                    if c.is_positive() {
                        w_min += c * &lo[j];
                        w_max += c * h;
                    } else {
                        w_min += c * h;
                        w_max += c * &lo[j];
                    }
                }
                None => {
                    unbounded.push(c);
                    offset += c * &lo[j];
                }
            }
        }
        if unbounded.is_empty() {
            if row.rhs < w_min || row.rhs > w_max {
                return false;
            }
            continue;
        }
        let has_pos = unbounded.iter().any(|c| c.is_positive());
        let has_neg = unbounded.iter().any(|c| c.is_negative());
        if !(has_pos && has_neg) {
            continue;
        }
        let mut g = BigInt::zero();
        for c in &unbounded {
            g = g.gcd(c);
        }
        // need w in [w_min, w_max] with w ≡ rhs - offset (mod g)
        let target = (&row.rhs - &offset).mod_floor(&g);
        let first = &w_min + (&target - &w_min).mod_floor(&g);
        if first > w_max {
            return false;
        }
        // the interval test over-approximates: the bounded part may skip the
        // required residue class entirely (e.g. all bounded coefficients
        // divisible by g). For small moduli, walk the exact set of residues
        // the bounded variables can produce.
        if let Some(gu) = g.to_usize().filter(|g| *g > 1 && *g <= 128) {
            let mut reach = vec![false; gu];
            reach[0] = true;
            for (j, c) in row.coeffs.iter().enumerate() {
                if c.is_zero() {
                    continue;
                }
                let Some(h) = &hi[j] else { continue };
                let step = c.mod_floor(&g).to_usize().expect("residue < g");
                let base = (c * &lo[j]).mod_floor(&g).to_usize().expect("residue < g");
                let span = (h - &lo[j]).to_usize().map_or(gu - 1, |s| s.min(gu - 1));
                let mut next = vec![false; gu];
                for (r, set) in reach.iter().enumerate() {
                    if !set {
                        continue;
                    }
                    let mut s = (r + base) % gu;
                    for _ in 0..=span {
                        next[s] = true;
                        s = (s + step) % gu;
                    }
                }
                reach = next;
            }
            let target = target.to_usize().expect("residue < g");
            if !reach[target] {
                return false;
            }
        }
    }
    true
}

/// Collects rows that pair up into equalities (same coefficients and rhs,
/// opposite senses) and checks that the resulting Diophantine system has an
/// integer solution, ignoring nonnegativity. Catches conflicts like
/// `t = 0 (mod 2)` and `t = 1 (mod 2)` that the rational relaxation cannot.
fn equality_subsystem_solvable(rows: &[Row]) -> bool {
    let mut eq_rows: Vec<(Vec<BigInt>, BigInt)> = Vec::new();
    for (i, a) in rows.iter().enumerate() {
        if !a.geq {
            continue;
        }
        for b in rows[..i].iter().chain(&rows[i + 1..]) {
            if !b.geq && a.coeffs == b.coeffs && a.rhs == b.rhs {
                eq_rows.push((a.coeffs.clone(), a.rhs.clone()));
                break;
            }
        }
    }
    if eq_rows.is_empty() {
        return true;
    }
    let b: Vec<BigInt> = eq_rows.iter().map(|(_, rhs)| rhs.clone()).collect();
    let a: Vec<Vec<BigInt>> = eq_rows.into_iter().map(|(c, _)| c).collect();
    diophantine_solvable(a, b)
}

/// Whether `A z = b` has a solution over the integers. Column Hermite-style
/// reduction: each pivot row is reduced to a single gcd entry by unimodular
/// column operations, then forward substitution checks divisibility.
fn diophantine_solvable(mut a: Vec<Vec<BigInt>>, b: Vec<BigInt>) -> bool {
    let m = a.len();
    let n = if m > 0 { a[0].len() } else { 0 };
    let mut pivot_col = 0;
    let mut pivot_of_row: Vec<Option<usize>> = vec![None; m];

    for row in 0..m {
        if pivot_col >= n {
            break;
        }
        loop {
            // smallest nonzero magnitude among the open columns of this row
            let mut best: Option<usize> = None;
            for j in pivot_col..n {
                if !a[row][j].is_zero()
                    && best.map_or(true, |k| a[row][j].abs() < a[row][k].abs())
                {
                    best = Some(j);
                }
            }
            let Some(j) = best else { break };
            if j != pivot_col {
                for r in 0..m {
                    a[r].swap(j, pivot_col);
                }
            }
            if a[row][pivot_col].is_negative() {
                for r in 0..m {
                    a[r][pivot_col] = -a[r][pivot_col].clone();
                }
            }
            let pivot = a[row][pivot_col].clone();
            let mut clean = true;
            for j in pivot_col + 1..n {
                if a[row][j].is_zero() {
                    continue;
                }
                let q = a[row][j].div_floor(&pivot);
                if !q.is_zero() {
                    for r in 0..m {
                        let delta = &q * &a[r][pivot_col];
                        a[r][j] -= delta;
                    }
                }
                if !a[row][j].is_zero() {
                    clean = false;
                }
            }
            if clean {
                break;
            }
        }
        if !a[row][pivot_col].is_zero() {
            pivot_of_row[row] = Some(pivot_col);
            pivot_col += 1;
        }
    }

    // forward substitution over the echelon form
    let mut z: BTreeMap<usize, BigInt> = BTreeMap::new();
    for row in 0..m {
        let mut residual = b[row].clone();
        for (col, value) in &z {
            residual -= &a[row][*col] * value;
        }
        match pivot_of_row[row] {
            Some(col) => {
                let pivot = &a[row][col];
                if !(&residual % pivot).is_zero() {
                    return false;
                }
                z.insert(col, residual / pivot);
            }
            None => {
                if !residual.is_zero() {
                    return false;
                }
            }
        }
    }
    true
}

/// Phase-1 simplex over exact rationals: returns a point with all variables
/// nonnegative satisfying every row, or `None` when the relaxation is
/// infeasible. Dantzig pricing with a Bland fallback for termination.
fn phase1_simplex(rows: &[Row], n: usize, pivot_count: &mut u64) -> Option<Vec<BigRational>> {
    let m = rows.len();
    if m == 0 {
        return Some(vec![BigRational::zero(); n]);
    }

    // columns: n structural, m slack, then artificials as needed, plus rhs
    let mut artificial_of_row: Vec<Option<usize>> = vec![None; m];
    let mut num_artificial = 0;
    for (i, row) in rows.iter().enumerate() {
        // after sign normalization the slack column is +1 exactly when the
        // senses line up; otherwise the row needs an artificial
        let negate = if row.geq {
            !row.rhs.is_positive()
        } else {
            row.rhs.is_negative()
        };
        let slack_positive = if row.geq { negate } else { !negate };
        if !slack_positive {
            artificial_of_row[i] = Some(num_artificial);
            num_artificial += 1;
        }
    }
    let cols = n + m + num_artificial;
    let mut tab: Vec<Vec<BigRational>> = vec![vec![BigRational::zero(); cols + 1]; m];
    let mut basis: Vec<usize> = vec![0; m];

    for (i, row) in rows.iter().enumerate() {
        let negate = if row.geq {
            !row.rhs.is_positive()
        } else {
            row.rhs.is_negative()
        };
        let sign = if negate { -BigInt::one() } else { BigInt::one() };
        for (j, c) in row.coeffs.iter().enumerate() {
            tab[i][j] = BigRational::from_integer(&sign * c);
        }
        // slack: -1 for geq, +1 for leq, flipped when the row was negated
        let slack_sign = if row.geq { -&sign } else { sign.clone() };
        tab[i][n + i] = BigRational::from_integer(slack_sign);
        tab[i][cols] = BigRational::from_integer(&sign * &row.rhs);
        debug_assert!(!tab[i][cols].is_negative());
        match artificial_of_row[i] {
            Some(k) => {
                tab[i][n + m + k] = BigRational::one();
                basis[i] = n + m + k;
            }
            None => {
                basis[i] = n + i;
            }
        }
    }

    // reduced-cost row for minimizing the sum of artificials
    let mut obj: Vec<BigRational> = vec![BigRational::zero(); cols + 1];
    for k in 0..num_artificial {
        obj[n + m + k] = BigRational::one();
    }
    for i in 0..m {
        if artificial_of_row[i].is_some() {
            let row = tab[i].clone();
            for j in 0..=cols {
                obj[j] -= &row[j];
            }
        }
    }

    let bland_threshold = 20 * (m as u64 + cols as u64) + 1000;
    let mut local_pivots = 0u64;
    loop {
        let use_bland = local_pivots > bland_threshold;
        let mut entering: Option<usize> = None;
        for j in 0..cols {
            if obj[j].is_negative() {
                match (&entering, use_bland) {
                    (None, _) => entering = Some(j),
                    (_, true) => break,
                    (Some(k), false) => {
                        if obj[j] < obj[*k] {
                            entering = Some(j);
                        }
                    }
                }
            }
        }
        let Some(enter) = entering else { break };

        let mut leave: Option<usize> = None;
        let mut best_ratio: Option<BigRational> = None;
        for i in 0..m {
            if tab[i][enter].is_positive() {
                let ratio = &tab[i][cols] / &tab[i][enter];
                let better = match &best_ratio {
                    None => true,
                    Some(r) => {
                        ratio < *r || (ratio == *r && basis[i] < basis[leave.unwrap()])
                    }
                };
                if better {
                    best_ratio = Some(ratio);
                    leave = Some(i);
                }
            }
        }
        // the phase-1 objective is bounded below by zero, so an entering
        // column always has a blocking row
        let Some(pivot_row) = leave else {
            debug_assert!(false, "phase-1 column unbounded");
            break;
        };

        // pivot
        let pivot = tab[pivot_row][enter].clone();
        for j in 0..=cols {
            tab[pivot_row][j] = &tab[pivot_row][j] / &pivot;
        }
        for i in 0..m {
            if i != pivot_row && !tab[i][enter].is_zero() {
                let factor = tab[i][enter].clone();
                for j in 0..=cols {
                    let delta = &factor * &tab[pivot_row][j];
                    tab[i][j] -= delta;
                }
            }
        }
        if !obj[enter].is_zero() {
            let factor = obj[enter].clone();
            for j in 0..=cols {
                let delta = &factor * &tab[pivot_row][j];
                obj[j] -= delta;
            }
        }
        basis[pivot_row] = enter;
        local_pivots += 1;
    }
    *pivot_count += local_pivots;

    // optimal value of the artificial sum
    let mut artificial_sum = BigRational::zero();
    for i in 0..m {
        if basis[i] >= n + m {
            artificial_sum += &tab[i][cols];
        }
    }
    if !artificial_sum.is_zero() {
        return None;
    }

    let mut point = vec![BigRational::zero(); n];
    for i in 0..m {
        if basis[i] < n {
            point[basis[i]] = tab[i][cols].clone();
        }
    }
    Some(point)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linsys::LinearConstraint;

    fn geq(coeffs: &[(Unknown, i64)], rhs: i64) -> LinearConstraint {
        row(coeffs, rhs, Relation::Geq)
    }

    fn leq(coeffs: &[(Unknown, i64)], rhs: i64) -> LinearConstraint {
        row(coeffs, rhs, Relation::Leq)
    }

    fn row(coeffs: &[(Unknown, i64)], rhs: i64, relation: Relation) -> LinearConstraint {
        LinearConstraint::new(
            coeffs
                .iter()
                .map(|(u, c)| (*u, BigInt::from(*c)))
                .collect(),
            relation,
            BigInt::from(rhs),
        )
    }

    fn system(unknowns: Vec<Unknown>, constraints: Vec<LinearConstraint>) -> LinearSystem {
        LinearSystem::from_parts(unknowns, constraints)
    }

    const X0: Unknown = Unknown::TypeCount(0);
    const X1: Unknown = Unknown::TypeCount(1);
    const X2: Unknown = Unknown::TypeCount(2);
    const X3: Unknown = Unknown::TypeCount(3);

    #[test]
    fn lp_feasible_examples() {
        // {2x <= 1, x >= 1} is infeasible already over the rationals
        let s = system(vec![X0], vec![leq(&[(X0, 2)], 1), geq(&[(X0, 1)], 1)]);
        assert!(lp_feasible(&s).is_none());

        // {x + y >= 1} has a feasible point
        let s = system(vec![X0, X1], vec![geq(&[(X0, 1), (X1, 1)], 1)]);
        let point = lp_feasible(&s).unwrap();
        let value = &point[&X0] + &point[&X1];
        assert!(value >= BigRational::one());

        // {2x = 3} is feasible fractionally at x = 3/2
        let s = system(vec![X0], vec![geq(&[(X0, 2)], 3), leq(&[(X0, 2)], 3)]);
        let point = lp_feasible(&s).unwrap();
        assert_eq!(
            point[&X0],
            BigRational::new(BigInt::from(3), BigInt::from(2))
        );
    }

    #[test]
    fn variable_bound_is_necessary_scale() {
        let s = system(vec![X0], vec![geq(&[(X0, 1)], 5)]);
        assert!(variable_bound(&s) >= BigUint::from(5u32));

        let s = system(vec![X0], vec![]);
        assert!(variable_bound(&s) >= BigUint::one());

        let s = system(
            vec![X0, X1],
            vec![geq(&[(X0, 1), (X1, -1)], 0), geq(&[(X1, 1)], 3)],
        );
        assert!(variable_bound(&s) >= BigUint::from(3u32));
    }

    #[test]
    fn ilp_solves_equality_with_nonempty_row() {
        // x1 = x2 plus a nonemptiness row over four type counts
        let s = system(
            vec![X0, X1, X2, X3],
            vec![
                geq(&[(X1, 1), (X2, -1)], 0),
                leq(&[(X1, 1), (X2, -1)], 0),
                geq(&[(X0, 1), (X1, 1), (X2, 1), (X3, 1)], 1),
            ],
        );
        let out = ilp_solve(&s);
        let a = out.assignment.expect("satisfiable");
        assert_eq!(a[&X1], a[&X2]);
        let total: BigUint = a.values().sum();
        assert!(total >= BigUint::one());
    }

    #[test]
    fn ilp_constant_row_infeasible() {
        let s = system(
            vec![X0],
            vec![geq(&[], 2), geq(&[(X0, 1)], 1)],
        );
        assert!(ilp_solve(&s).assignment.is_none());
    }

    #[test]
    fn ilp_congruence_shape() {
        // x - 3yp + 3yn = 2 with x >= 4, e.g. x = 5, yp = 1
        let yp = Unknown::QuotientPos(0);
        let yn = Unknown::QuotientNeg(0);
        let s = system(
            vec![X0, yp, yn],
            vec![
                geq(&[(X0, 1), (yp, -3), (yn, 3)], 2),
                leq(&[(X0, 1), (yp, -3), (yn, 3)], 2),
                geq(&[(X0, 1)], 4),
            ],
        );
        let a = ilp_solve(&s).assignment.expect("satisfiable");
        let x = BigInt::from(a[&X0].clone());
        assert!(x >= BigInt::from(4));
        assert_eq!(
            (&x - BigInt::from(2)).mod_floor(&BigInt::from(3)),
            BigInt::zero()
        );
    }

    #[test]
    fn ilp_detects_parity_conflict() {
        // x - 2y = 1 and x - 2y' = 0: rationally feasible, integrally not
        let y0 = Unknown::QuotientPos(0);
        let y1 = Unknown::QuotientPos(1);
        let s = system(
            vec![X0, y0, y1],
            vec![
                geq(&[(X0, 1), (y0, -2)], 1),
                leq(&[(X0, 1), (y0, -2)], 1),
                geq(&[(X0, 1), (y1, -2)], 0),
                leq(&[(X0, 1), (y1, -2)], 0),
            ],
        );
        assert!(lp_feasible(&s).is_some());
        assert!(ilp_solve(&s).assignment.is_none());
    }

    #[test]
    fn ilp_detects_gcd_gap() {
        // 4x - 4y >= 1 and 2x - 2y <= 1 squeeze x - y into (0, 1)
        let s = system(
            vec![X0, X1],
            vec![geq(&[(X0, 4), (X1, -4)], 1), leq(&[(X0, 2), (X1, -2)], 1)],
        );
        assert!(lp_feasible(&s).is_some());
        assert!(ilp_solve(&s).assignment.is_none());
    }

    #[test]
    fn branch_order_does_not_change_verdict() {
        let s = system(
            vec![X0, X1],
            vec![
                geq(&[(X0, 2), (X1, 3)], 7),
                leq(&[(X0, 1), (X1, 1)], 3),
            ],
        );
        let floor_first = ilp_solve_with(&s, BranchOrder::FloorFirst);
        let ceil_first = ilp_solve_with(&s, BranchOrder::CeilFirst);
        assert_eq!(
            floor_first.assignment.is_some(),
            ceil_first.assignment.is_some()
        );
    }

    #[test]
    fn diophantine_solvable_basic() {
        // 2a + 3b = 1 solvable; 2a + 4b = 1 not
        assert!(diophantine_solvable(
            vec![vec![BigInt::from(2), BigInt::from(3)]],
            vec![BigInt::one()]
        ));
        assert!(!diophantine_solvable(
            vec![vec![BigInt::from(2), BigInt::from(4)]],
            vec![BigInt::one()]
        ));
    }
}
