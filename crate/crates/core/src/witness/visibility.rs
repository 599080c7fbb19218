use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use super::bound::{choose_enumeration_side, encoding_count, price_columns, DeterministicEncoding, Side};
use super::{Behavior, Convention, Table3, Witness};
use crate::error::{Error, Result};
use crate::lp::{Basis, LpBackend, LpProblem, LpStatus, RowKind, Sense, VarKind};

/// Explicit (non column-generated) LPs are only built up to this many rows.
pub const EXPLICIT_ROW_LIMIT: usize = 1500;
/// `η⋆` at or above `1 - SIMULABLE_TOL` counts as classically simulable.
pub const SIMULABLE_TOL: f64 = 1e-8;
/// Strong-duality tolerance used to reject a solve.
pub const DUALITY_TOL: f64 = 1e-6;
/// Largest `s(y,c,λ)` table materialized by [`witness_dual`].
const SLACK_TABLE_LIMIT: u128 = 10_000_000;

#[derive(Clone, Debug)]
pub struct VisibilityOptions {
    /// Stop when no strategy pair has reduced cost below `-pricing_tol`.
    pub pricing_tol: f64,
    pub columns_per_round: usize,
    pub max_rounds: usize,
    /// Side enumerated during pricing; defaults to [`choose_enumeration_side`].
    pub side: Option<Side>,
}

impl Default for VisibilityOptions {
    fn default() -> Self {
        Self {
            pricing_tol: 1e-10,
            columns_per_round: 64,
            max_rounds: 5000,
            side: None,
        }
    }
}

/// Alice plays a fixed encoding; `response[(y·d_C + c)·O_B + b] = p_B'(b|y,c,λ)` sums to `pi` per cell.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AliceStrategy {
    pub encoding: Vec<usize>,
    pub pi: f64,
    pub response: Vec<f64>,
}

/// Bob plays a fixed decoding `(y·d_C + c) -> b`; `encoding[x·d_C + c] = p_A'(c|x,λ)` sums to `pi` per `x`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BobStrategy {
    pub decoding: Vec<usize>,
    pub pi: f64,
    pub encoding: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ClassicalModel {
    AliceDeterministic {
        d_c: usize,
        ia: usize,
        ib: usize,
        ob: usize,
        strategies: Vec<AliceStrategy>,
    },
    BobDeterministic {
        d_c: usize,
        ia: usize,
        ib: usize,
        ob: usize,
        strategies: Vec<BobStrategy>,
    },
}

impl ClassicalModel {
    /// Behavior `p(b|x,y) = Σ_λ Σ_c p_B'(b|y,c,λ) D_A(c|x,λ)` (or the Bob-side analogue).
    pub fn reproduce(&self) -> Table3 {
        match self {
            ClassicalModel::AliceDeterministic {
                d_c,
                ia,
                ib,
                ob,
                strategies,
            } => {
                let mut t = Table3::zeros(*ia, *ib, *ob);
                for s in strategies {
                    for (x, &c) in s.encoding.iter().enumerate() {
                        for y in 0..*ib {
                            for b in 0..*ob {
                                *t.get_mut(b, x, y) += s.response[(y * d_c + c) * ob + b];
                            }
                        }
                    }
                }
                t
            }
            ClassicalModel::BobDeterministic {
                d_c,
                ia,
                ib,
                ob,
                strategies,
            } => {
                let mut t = Table3::zeros(*ia, *ib, *ob);
                for s in strategies {
                    for x in 0..*ia {
                        for y in 0..*ib {
                            for c in 0..*d_c {
                                *t.get_mut(s.decoding[y * d_c + c], x, y) += s.encoding[x * d_c + c];
                            }
                        }
                    }
                }
                t
            }
        }
    }

    /// `(Σ_λ π(λ), min_λ π(λ))`.
    pub fn weights(&self) -> (f64, f64) {
        let pis: Vec<f64> = match self {
            ClassicalModel::AliceDeterministic { strategies, .. } => strategies.iter().map(|s| s.pi).collect(),
            ClassicalModel::BobDeterministic { strategies, .. } => strategies.iter().map(|s| s.pi).collect(),
        };
        (pis.iter().sum(), pis.iter().copied().fold(f64::INFINITY, f64::min))
    }

    pub fn num_strategies(&self) -> usize {
        match self {
            ClassicalModel::AliceDeterministic { strategies, .. } => strategies.len(),
            ClassicalModel::BobDeterministic { strategies, .. } => strategies.len(),
        }
    }
}

/// Dual-convention witness extracted from a visibility solve.
#[derive(Clone, Debug)]
pub struct DualSolution {
    /// Classical behaviors satisfy `Σγq ≥ 0`; the input has `Σγp = objective - 1`.
    pub gamma: Table3,
    /// `1 + Σγp`.
    pub objective: f64,
    /// Amount added uniformly (per `(x, y)`) to make `γ` exactly dual feasible after pricing.
    pub pricing_violation: f64,
}

#[derive(Clone, Debug)]
pub struct VisibilityResult {
    /// Critical visibility; `+∞` when `unbounded`.
    pub eta_star: f64,
    /// The input is white noise, classical at every visibility.
    pub unbounded: bool,
    pub d_c: usize,
    pub side: Side,
    /// A classical model reproducing the input, present when it is simulable.
    pub model: Option<ClassicalModel>,
    pub dual: Option<DualSolution>,
    /// Master solves (column generation) or 1 (explicit LP).
    pub rounds: usize,
    pub columns: usize,
    pub lp_iterations: usize,
}

impl VisibilityResult {
    pub fn is_simulable(&self) -> bool {
        self.unbounded || self.eta_star >= 1.0 - SIMULABLE_TOL
    }

    /// `|dual objective - η⋆|`, when a dual is available.
    pub fn duality_gap(&self) -> Option<f64> {
        self.dual.as_ref().map(|d| (d.objective - self.eta_star).abs())
    }

    pub fn witness(&self) -> Option<Witness> {
        self.dual.as_ref().map(|d| Witness {
            d_c: self.d_c,
            gamma: d.gamma.clone(),
            bound: 0.0,
            convention: Convention::Dual,
        })
    }
}

fn check_dc(d_c: usize) -> Result<()> {
    if d_c == 0 {
        Err(Error::InvalidArgument("d_C must be positive".into()))
    } else {
        Ok(())
    }
}

fn white_noise_result(behavior: &Behavior, d_c: usize, side: Side) -> VisibilityResult {
    let (ia, ib, ob) = behavior.table().shape();
    let model = ClassicalModel::AliceDeterministic {
        d_c,
        ia,
        ib,
        ob,
        strategies: vec![AliceStrategy {
            encoding: vec![0; ia],
            pi: 1.0,
            response: vec![1.0 / ob as f64; ib * d_c * ob],
        }],
    };
    VisibilityResult {
        eta_star: f64::INFINITY,
        unbounded: true,
        d_c,
        side,
        model: Some(model),
        dual: None,
        rounds: 0,
        columns: 0,
        lp_iterations: 0,
    }
}

/// Critical visibility by column generation over deterministic strategy pairs.
pub fn visibility_primal(behavior: &Behavior, d_c: usize, backend: &dyn LpBackend) -> Result<VisibilityResult> {
    visibility_primal_with(behavior, d_c, backend, &VisibilityOptions::default())
}

/// Maximizes `η` such that `η p + (1-η)/O_B` is a convex combination of deterministic
/// strategy pairs.
///
/// The restricted master keeps one row per `(b, x, y)` with `b < O_B - 1` plus the
/// normalization `Σ w = 1`; the last outcome is implied. Pricing is a classical-bound
/// computation on the current dual prices.
pub fn visibility_primal_with(
    behavior: &Behavior,
    d_c: usize,
    backend: &dyn LpBackend,
    opts: &VisibilityOptions,
) -> Result<VisibilityResult> {
    check_dc(d_c)?;
    let (ia, ib, ob) = behavior.table().shape();
    let side = opts.side.unwrap_or_else(|| choose_enumeration_side(ia, ib, ob, d_c));
    if behavior.is_uniform() {
        return Ok(white_noise_result(behavior, d_c, side));
    }
    let u = 1.0 / ob as f64;
    let free_b = ob - 1;
    let row = |b: usize, x: usize, y: usize| (x * ib + y) * free_b + b;
    let norm_row = ia * ib * free_b;

    let mut lp = LpProblem::new(Sense::Maximize);
    for _ in 0..ia * ib * free_b {
        lp.add_row(RowKind::Eq, u);
    }
    lp.add_row(RowKind::Eq, 1.0);
    let mut eta_col = Vec::new();
    for x in 0..ia {
        for y in 0..ib {
            for b in 0..free_b {
                eta_col.push((row(b, x, y), -(behavior.get(b, x, y) - u)));
            }
        }
    }
    lp.add_column(VarKind::Free, 1.0, &eta_col);

    let mut columns: Vec<(Vec<usize>, Vec<usize>)> = Vec::new();
    let mut seen: HashSet<(Vec<usize>, Vec<usize>)> = HashSet::new();
    let mut add = |lp: &mut LpProblem, enc: Vec<usize>, dec: Vec<usize>| -> bool {
        if !seen.insert((enc.clone(), dec.clone())) {
            return false;
        }
        let mut col = Vec::with_capacity(ia * ib + 1);
        for (x, &c) in enc.iter().enumerate() {
            for y in 0..ib {
                let b = dec[y * d_c + c];
                if b < free_b {
                    col.push((row(b, x, y), 1.0));
                }
            }
        }
        col.push((norm_row, 1.0));
        lp.add_column(VarKind::NonNegative, 0.0, &col);
        columns.push((enc, dec));
        true
    };
    // constant strategies b = 0..O_B mix to white noise, so the master starts feasible
    for b in 0..ob {
        add(&mut lp, vec![0; ia], vec![b; ib * d_c]);
    }

    let mut warm: Option<Basis> = None;
    let mut rounds = 0;
    let mut lp_iterations = 0;
    let (solution, gamma, violation) = loop {
        if rounds >= opts.max_rounds {
            return Err(Error::Lp(crate::lp::LpError::IterationLimit(rounds)));
        }
        rounds += 1;
        let sol = backend.solve(&lp, warm.as_ref())?;
        lp_iterations += sol.iterations;
        match sol.status {
            LpStatus::Optimal => {}
            LpStatus::Unbounded => return Ok(white_noise_result(behavior, d_c, side)),
            LpStatus::Infeasible => {
                return Err(Error::Lp(crate::lp::LpError::InvalidProblem(
                    "visibility master infeasible although white noise is feasible".into(),
                )))
            }
        }
        let mu = sol.duals[norm_row] / (ia * ib) as f64;
        let gamma = Table3::from_fn(
            ia,
            ib,
            ob,
            |b, x, y| if b < free_b { sol.duals[row(b, x, y)] + mu } else { mu },
        );
        let neg = gamma.map(|v| -v);
        let (max, priced) = price_columns(&neg, d_c, side, opts.pricing_tol, opts.columns_per_round)?;
        let mut added = false;
        for col in priced {
            added |= add(&mut lp, col.encoding, col.decoding);
        }
        warm = Some(sol.basis.clone());
        if !added {
            break (sol, gamma, max.max(0.0));
        }
    };

    let eta_star = solution.objective;
    let shift = violation / (ia * ib) as f64;
    let gamma = gamma.map(|v| v + shift);
    let objective = 1.0 + gamma.dot(behavior.table())?;
    let dual = DualSolution {
        gamma,
        objective,
        pricing_violation: violation,
    };

    let model = (eta_star >= 1.0 - SIMULABLE_TOL).then(|| {
        let weights = &solution.x[1..];
        alice_model_from_columns(ia, ib, ob, d_c, &columns, weights, eta_star)
    });
    Ok(VisibilityResult {
        eta_star,
        unbounded: false,
        d_c,
        side,
        model,
        dual: Some(dual),
        rounds,
        columns: columns.len(),
        lp_iterations,
    })
}

/// Rescales the mixture found at visibility `η⋆ ≥ 1` into a model of the input itself:
/// `p = (1/η⋆)·mixed + (1 - 1/η⋆)·noise`.
fn alice_model_from_columns(
    ia: usize,
    ib: usize,
    ob: usize,
    d_c: usize,
    columns: &[(Vec<usize>, Vec<usize>)],
    weights: &[f64],
    eta_star: f64,
) -> ClassicalModel {
    let t = if eta_star > 1.0 { 1.0 / eta_star } else { 1.0 };
    let mut strategies: Vec<AliceStrategy> = Vec::new();
    let find = |strategies: &mut Vec<AliceStrategy>, enc: &[usize]| -> usize {
        match strategies.iter().position(|s| s.encoding == enc) {
            Some(i) => i,
            None => {
                strategies.push(AliceStrategy {
                    encoding: enc.to_vec(),
                    pi: 0.0,
                    response: vec![0.0; ib * d_c * ob],
                });
                strategies.len() - 1
            }
        }
    };
    for ((enc, dec), &w) in columns.iter().zip(weights) {
        if w <= 0.0 {
            continue;
        }
        let i = find(&mut strategies, enc);
        let s = &mut strategies[i];
        s.pi += t * w;
        for (k, &b) in dec.iter().enumerate() {
            s.response[k * ob + b] += t * w;
        }
    }
    if t < 1.0 {
        let i = find(&mut strategies, &vec![0; ia]);
        let s = &mut strategies[i];
        s.pi += 1.0 - t;
        for v in s.response.iter_mut() {
            *v += (1.0 - t) / ob as f64;
        }
    }
    ClassicalModel::AliceDeterministic {
        d_c,
        ia,
        ib,
        ob,
        strategies,
    }
}

/// Makes `γ` dual feasible by a uniform shift and records the required amount.
fn finish_dual(gamma: Table3, behavior: &Behavior, d_c: usize, side: Side) -> Result<DualSolution> {
    let neg = gamma.map(|v| -v);
    let (max, _) = price_columns(&neg, d_c, side, f64::INFINITY, 0)?;
    let violation = max.max(0.0);
    let shift = violation / (gamma.ia() * gamma.ib()) as f64;
    let gamma = gamma.map(|v| v + shift);
    let objective = 1.0 + gamma.dot(behavior.table())?;
    Ok(DualSolution {
        gamma,
        objective,
        pricing_violation: violation,
    })
}

fn explicit_rows(ia: usize, ib: usize, ob: usize, d_c: usize, side: Side) -> u128 {
    let base = (ia * ib * ob) as u128;
    match side {
        Side::Alice => base.saturating_add(encoding_count(ia, d_c).saturating_mul((ib * d_c) as u128)),
        Side::Bob => {
            let n = (0..ib * d_c).fold(1u128, |a, _| a.saturating_mul(ob as u128));
            base.saturating_add(n.saturating_mul(ia as u128))
        }
    }
}

/// Critical visibility from the full LP over one party's deterministic strategies.
///
/// With `Side::Alice` the variables are `p_B'(b|y,c,λ)` and `π(λ)` for every encoding;
/// with `Side::Bob` they are `p_A'(c|x,λ)` and `π(λ)` for every decoding. Only usable for
/// small instances; meant as a cross-check of [`visibility_primal`].
pub fn visibility_explicit(
    behavior: &Behavior,
    d_c: usize,
    side: Side,
    backend: &dyn LpBackend,
) -> Result<VisibilityResult> {
    check_dc(d_c)?;
    let (ia, ib, ob) = behavior.table().shape();
    let rows = explicit_rows(ia, ib, ob, d_c, side);
    if rows > EXPLICIT_ROW_LIMIT as u128 {
        return Err(Error::GuardExceeded {
            what: "explicit LP rows",
            size: rows,
            limit: EXPLICIT_ROW_LIMIT as u128,
        });
    }
    if behavior.is_uniform() {
        return Ok(white_noise_result(behavior, d_c, side));
    }
    let u = 1.0 / ob as f64;
    let cells = ib * d_c;
    let mut lp = LpProblem::new(Sense::Maximize);
    let pr = |b: usize, x: usize, y: usize| (x * ib + y) * ob + b;
    for _ in 0..ia * ib * ob {
        lp.add_row(RowKind::Eq, u);
    }
    let mut eta_col = Vec::new();
    for x in 0..ia {
        for y in 0..ib {
            for b in 0..ob {
                eta_col.push((pr(b, x, y), -(behavior.get(b, x, y) - u)));
            }
        }
    }
    lp.add_column(VarKind::Free, 1.0, &eta_col);

    // (strategy, first variable) pairs
    let mut layout: Vec<(Vec<usize>, usize)> = Vec::new();
    match side {
        Side::Alice => {
            for enc in super::bound::enumerate_encodings(ia, d_c)? {
                let first_row = lp.num_rows();
                for _ in 0..cells {
                    lp.add_row(RowKind::Eq, 0.0);
                }
                let pi_col: Vec<(usize, f64)> = (0..cells).map(|k| (first_row + k, -1.0)).collect();
                lp.add_column(VarKind::NonNegative, 0.0, &pi_col);
                let first_var = lp.num_vars();
                for y in 0..ib {
                    for c in 0..d_c {
                        for b in 0..ob {
                            let mut col: Vec<(usize, f64)> = (0..ia)
                                .filter(|&x| enc.map[x] == c)
                                .map(|x| (pr(b, x, y), 1.0))
                                .collect();
                            col.push((first_row + y * d_c + c, 1.0));
                            lp.add_column(VarKind::NonNegative, 0.0, &col);
                        }
                    }
                }
                layout.push((enc.map, first_var));
            }
        }
        Side::Bob => {
            let n = (ob as u64).pow(cells as u32);
            for j in 0..n {
                let dec = DeterministicEncoding::from_index(j, cells, ob).map;
                let first_row = lp.num_rows();
                for _ in 0..ia {
                    lp.add_row(RowKind::Eq, 0.0);
                }
                let pi_col: Vec<(usize, f64)> = (0..ia).map(|x| (first_row + x, -1.0)).collect();
                lp.add_column(VarKind::NonNegative, 0.0, &pi_col);
                let first_var = lp.num_vars();
                for x in 0..ia {
                    for c in 0..d_c {
                        let mut col: Vec<(usize, f64)> = (0..ib).map(|y| (pr(dec[y * d_c + c], x, y), 1.0)).collect();
                        col.push((first_row + x, 1.0));
                        lp.add_column(VarKind::NonNegative, 0.0, &col);
                    }
                }
                layout.push((dec, first_var));
            }
        }
    }

    let sol = backend.solve(&lp, None)?;
    match sol.status {
        LpStatus::Optimal => {}
        LpStatus::Unbounded => return Ok(white_noise_result(behavior, d_c, side)),
        LpStatus::Infeasible => {
            return Err(Error::Lp(crate::lp::LpError::InvalidProblem(
                "explicit visibility LP infeasible".into(),
            )))
        }
    }
    let eta_star = sol.objective;
    let gamma = Table3::from_fn(ia, ib, ob, |b, x, y| sol.duals[pr(b, x, y)]);
    let dual = finish_dual(gamma, behavior, d_c, side)?;

    let model = (eta_star >= 1.0 - SIMULABLE_TOL).then(|| {
        let t = if eta_star > 1.0 { 1.0 / eta_star } else { 1.0 };
        match side {
            Side::Alice => {
                let mut strategies: Vec<AliceStrategy> = layout
                    .iter()
                    .map(|(enc, first)| AliceStrategy {
                        encoding: enc.clone(),
                        pi: t * sol.x[first - 1],
                        response: sol.x[*first..first + cells * ob].iter().map(|v| t * v).collect(),
                    })
                    .filter(|s| s.pi > 0.0)
                    .collect();
                if t < 1.0 {
                    strategies.push(AliceStrategy {
                        encoding: vec![0; ia],
                        pi: 1.0 - t,
                        response: vec![(1.0 - t) / ob as f64; cells * ob],
                    });
                }
                ClassicalModel::AliceDeterministic {
                    d_c,
                    ia,
                    ib,
                    ob,
                    strategies,
                }
            }
            Side::Bob => {
                let mut strategies: Vec<BobStrategy> = layout
                    .iter()
                    .map(|(dec, first)| BobStrategy {
                        decoding: dec.clone(),
                        pi: t * sol.x[first - 1],
                        encoding: sol.x[*first..first + ia * d_c].iter().map(|v| t * v).collect(),
                    })
                    .filter(|s| s.pi > 0.0)
                    .collect();
                if t < 1.0 {
                    // white noise: Bob outputs b with probability 1/O_B whatever he receives
                    for b in 0..ob {
                        let w = (1.0 - t) / ob as f64;
                        let mut encoding = vec![0.0; ia * d_c];
                        for x in 0..ia {
                            encoding[x * d_c] = w;
                        }
                        strategies.push(BobStrategy {
                            decoding: vec![b; cells],
                            pi: w,
                            encoding,
                        });
                    }
                }
                ClassicalModel::BobDeterministic {
                    d_c,
                    ia,
                    ib,
                    ob,
                    strategies,
                }
            }
        }
    });
    Ok(VisibilityResult {
        eta_star,
        unbounded: false,
        d_c,
        side,
        model,
        dual: Some(dual),
        rounds: 1,
        columns: lp.num_vars(),
        lp_iterations: sol.iterations,
    })
}

/// `s(y,c,λ) = m(y,c,λ) - M(λ)/(I_B d_C)` with `m = min_b Σ_x γ(b|x,y) D_A(c|x,λ)` and
/// `M(λ) = Σ_{y,c} m`, indexed `[λ][y][c]` flattened. Satisfies `Σ_{y,c} s = 0` and, for a
/// dual-feasible `γ`, the cell constraints `Σ_x γ D_A ≥ s`.
pub fn dual_slack_table(gamma: &Table3, d_c: usize) -> Result<Vec<f64>> {
    check_dc(d_c)?;
    let (ia, ib, ob) = gamma.shape();
    let cells = ib * d_c;
    let size = encoding_count(ia, d_c).saturating_mul(cells as u128);
    if size > SLACK_TABLE_LIMIT {
        return Err(Error::GuardExceeded {
            what: "slack table",
            size,
            limit: SLACK_TABLE_LIMIT,
        });
    }
    let neg = gamma.map(|v| -v);
    let mut out = Vec::with_capacity(size as usize);
    let mut buckets = vec![0.0; cells * ob];
    for enc in super::bound::enumerate_encodings(ia, d_c)? {
        super::bound::alice_value(&neg, d_c, &enc.map, &mut buckets, None);
        let m: Vec<f64> = buckets
            .chunks_exact(ob)
            .map(|cell| -cell.iter().copied().fold(f64::NEG_INFINITY, f64::max))
            .collect();
        let total: f64 = m.iter().sum();
        out.extend(m.iter().map(|v| v - total / cells as f64));
    }
    Ok(out)
}

/// Dual witness of [`visibility_primal`] with its slack table.
#[derive(Clone, Debug)]
pub struct DualWitness {
    pub witness: Witness,
    /// `s(y,c,λ)`, see [`dual_slack_table`]; absent when too large to materialize.
    pub s: Option<Vec<f64>>,
    /// `1 + Σγp`.
    pub objective: f64,
    pub eta_star: f64,
    /// Objective of the explicit dual LP when the instance was small enough to solve it.
    pub explicit_objective: Option<f64>,
}

/// Dual-convention witness: classical behaviors obey `Σγq ≥ 0`, and `1 + Σγp = η⋆`.
///
/// Fails with [`Error::DualityGap`] when the dual objective misses the primal optimum by
/// more than `1e-6`, or when the explicit dual LP (solved for small instances) disagrees.
pub fn witness_dual(behavior: &Behavior, d_c: usize, backend: &dyn LpBackend) -> Result<DualWitness> {
    let primal = visibility_primal(behavior, d_c, backend)?;
    if primal.unbounded {
        return Err(Error::InvalidArgument(
            "white-noise behavior has no separating witness".into(),
        ));
    }
    let dual = primal.dual.clone().expect("column generation always returns duals");
    let gap = (dual.objective - primal.eta_star).abs();
    if gap > DUALITY_TOL {
        return Err(Error::DualityGap {
            primal: primal.eta_star,
            dual: dual.objective,
            gap,
        });
    }
    let (ia, ib, ob) = behavior.table().shape();
    let explicit_objective = if explicit_dual_rows(ia, ib, ob, d_c) <= EXPLICIT_ROW_LIMIT as u128 {
        let (_, _, obj) = witness_dual_explicit(behavior, d_c, backend)?;
        let gap = (obj - primal.eta_star).abs();
        if gap > DUALITY_TOL {
            return Err(Error::DualityGap {
                primal: primal.eta_star,
                dual: obj,
                gap,
            });
        }
        Some(obj)
    } else {
        None
    };
    let s = dual_slack_table(&dual.gamma, d_c).ok();
    Ok(DualWitness {
        witness: Witness {
            d_c,
            gamma: dual.gamma,
            bound: 0.0,
            convention: Convention::Dual,
        },
        s,
        objective: dual.objective,
        eta_star: primal.eta_star,
        explicit_objective,
    })
}

fn explicit_dual_rows(ia: usize, ib: usize, ob: usize, d_c: usize) -> u128 {
    let l = encoding_count(ia, d_c);
    l.saturating_mul((ob * ib * d_c + 1) as u128).saturating_add(1)
}

/// Solves the hyperplane LP directly: minimize `1 + Σγp` over free `γ(b|x,y)` and
/// `s(y,c,λ)` subject to `Σ_x γ D_A ≥ s`, `Σγ/O_B = 1 + Σγp` and `Σ_{y,c} s = 0`.
///
/// Returns the witness, the `s` table (`[λ][y][c]`) and the objective.
pub fn witness_dual_explicit(
    behavior: &Behavior,
    d_c: usize,
    backend: &dyn LpBackend,
) -> Result<(Witness, Vec<f64>, f64)> {
    check_dc(d_c)?;
    let (ia, ib, ob) = behavior.table().shape();
    let rows = explicit_dual_rows(ia, ib, ob, d_c);
    if rows > EXPLICIT_ROW_LIMIT as u128 {
        return Err(Error::GuardExceeded {
            what: "explicit dual LP rows",
            size: rows,
            limit: EXPLICIT_ROW_LIMIT as u128,
        });
    }
    let cells = ib * d_c;
    let encodings: Vec<DeterministicEncoding> = super::bound::enumerate_encodings(ia, d_c)?.collect();
    let n_lambda = encodings.len();
    let u = 1.0 / ob as f64;

    let mut lp = LpProblem::new(Sense::Minimize);
    let table = behavior.table();
    for x in 0..ia {
        for y in 0..ib {
            for b in 0..ob {
                lp.add_var(VarKind::Free, behavior.get(b, x, y));
            }
        }
    }
    let s_var = |l: usize, k: usize| ia * ib * ob + l * cells + k;
    for _ in 0..n_lambda * cells {
        lp.add_var(VarKind::Free, 0.0);
    }
    for (l, enc) in encodings.iter().enumerate() {
        for y in 0..ib {
            for c in 0..d_c {
                for b in 0..ob {
                    let r = lp.add_row(RowKind::Ge, 0.0);
                    for x in (0..ia).filter(|&x| enc.map[x] == c) {
                        lp.set(r, table.offset(b, x, y), 1.0);
                    }
                    lp.set(r, s_var(l, y * d_c + c), -1.0);
                }
            }
        }
    }
    let r = lp.add_row(RowKind::Eq, 1.0);
    for x in 0..ia {
        for y in 0..ib {
            for b in 0..ob {
                lp.set(r, table.offset(b, x, y), u - behavior.get(b, x, y));
            }
        }
    }
    for l in 0..n_lambda {
        let r = lp.add_row(RowKind::Eq, 0.0);
        for k in 0..cells {
            lp.set(r, s_var(l, k), 1.0);
        }
    }
    let sol = backend.solve(&lp, None)?;
    match sol.status {
        LpStatus::Optimal => {}
        LpStatus::Infeasible => {
            return Err(Error::InvalidArgument(
                "dual LP infeasible: the behavior is white noise".into(),
            ))
        }
        LpStatus::Unbounded => {
            return Err(Error::Lp(crate::lp::LpError::InvalidProblem(
                "dual LP unbounded".into(),
            )))
        }
    }
    let gamma = Table3::from_fn(ia, ib, ob, |b, x, y| sol.x[table.offset(b, x, y)]);
    let s = sol.x[ia * ib * ob..].to_vec();
    let objective = 1.0 + sol.objective;
    Ok((
        Witness {
            d_c,
            gamma,
            bound: 0.0,
            convention: Convention::Dual,
        },
        s,
        objective,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lp::DenseRevisedSimplex;
    use crate::rng::{round_rng, uniform};
    use crate::witness::classical_bound;

    fn random_behavior(ia: usize, ib: usize, ob: usize, seed: u64) -> Behavior {
        let mut rng = round_rng(seed, 0);
        let mut t = Table3::zeros(ia, ib, ob);
        for x in 0..ia {
            for y in 0..ib {
                let w: Vec<f64> = (0..ob).map(|_| uniform(&mut rng) + 0.01).collect();
                let s: f64 = w.iter().sum();
                for b in 0..ob {
                    *t.get_mut(b, x, y) = w[b] / s;
                }
            }
        }
        Behavior::new(t).unwrap()
    }

    /// Deterministic-looking behavior `p(b|x,y) = [b = x XOR y]` needs two bits of message.
    fn xor_behavior(n: usize) -> Behavior {
        Behavior::new(Table3::from_fn(n, n, 2, |b, x, y| {
            f64::from(u8::from(b == usize::from(x != y)))
        }))
        .unwrap()
    }

    #[test]
    fn column_generation_matches_explicit_lps() {
        let lp = DenseRevisedSimplex::new();
        for seed in 0..6 {
            let beh = random_behavior(3, 3, 2, seed);
            for d_c in 1..=2 {
                let cg = visibility_primal(&beh, d_c, &lp).unwrap();
                let ea = visibility_explicit(&beh, d_c, Side::Alice, &lp).unwrap();
                let eb = visibility_explicit(&beh, d_c, Side::Bob, &lp).unwrap();
                assert!(
                    (cg.eta_star - ea.eta_star).abs() < 1e-8,
                    "{} vs {}",
                    cg.eta_star,
                    ea.eta_star
                );
                assert!(
                    (cg.eta_star - eb.eta_star).abs() < 1e-8,
                    "{} vs {}",
                    cg.eta_star,
                    eb.eta_star
                );
                assert!(cg.duality_gap().unwrap() < 1e-8);
                assert!(ea.duality_gap().unwrap() < 1e-8);
                let (_, s, obj) = witness_dual_explicit(&beh, d_c, &lp).unwrap();
                assert!((obj - cg.eta_star).abs() < 1e-8);
                assert_eq!(s.len(), 8usize.min(d_c.pow(3)) * 3 * d_c);
            }
        }
    }

    #[test]
    fn dual_witness_separates() {
        let lp = DenseRevisedSimplex::new();
        let beh = xor_behavior(3);
        let res = visibility_primal(&beh, 2, &lp).unwrap();
        assert!(res.eta_star < 1.0 - 1e-6);
        let w = res.witness().unwrap();
        assert!(w.check_violation(&beh).unwrap().violated);
        let value = w.gamma.dot(beh.table()).unwrap();
        assert!((value - (res.eta_star - 1.0)).abs() < 1e-8);
        // classical behaviors are on the right side
        let neg = w.gamma.map(|v| -v);
        assert!(classical_bound(&neg, 2).unwrap() <= 1e-12);
        let bf = w.to_bound_form().unwrap();
        assert!(bf.check_violation(&beh).unwrap().violated);
        let s = dual_slack_table(&w.gamma, 2).unwrap();
        for chunk in s.chunks(6) {
            assert!(chunk.iter().sum::<f64>().abs() < 1e-12);
        }
    }

    #[test]
    fn simulable_behaviors_get_models() {
        let lp = DenseRevisedSimplex::new();
        let beh = xor_behavior(3);
        let res = visibility_primal(&beh, 3, &lp).unwrap();
        assert!(res.eta_star >= 1.0 - 1e-8);
        let model = res.model.unwrap();
        assert!(model.reproduce().max_abs_diff(beh.table()) < 1e-7);
        let (total, min) = model.weights();
        assert!((total - 1.0).abs() < 1e-8 && min >= 0.0);
        let small = xor_behavior(2);
        for (beh, d_c, side) in [(&beh, 3, Side::Alice), (&small, 2, Side::Bob)] {
            let r = visibility_explicit(beh, d_c, side, &lp).unwrap();
            let m = r.model.unwrap();
            assert!(m.reproduce().max_abs_diff(beh.table()) < 1e-7);
        }
    }

    #[test]
    fn white_noise_is_unbounded() {
        let lp = DenseRevisedSimplex::new();
        let res = visibility_primal(&Behavior::uniform(2, 2, 2), 1, &lp).unwrap();
        assert!(res.unbounded && res.is_simulable());
        assert!(
            res.model
                .unwrap()
                .reproduce()
                .max_abs_diff(Behavior::uniform(2, 2, 2).table())
                == 0.0
        );
        assert!(witness_dual(&Behavior::uniform(2, 2, 2), 1, &lp).is_err());
    }

    #[test]
    fn witness_dual_cross_checks() {
        let lp = DenseRevisedSimplex::new();
        let beh = random_behavior(3, 2, 3, 9);
        let dw = witness_dual(&beh, 2, &lp).unwrap();
        assert!(dw.explicit_objective.is_some());
        assert!((dw.objective - dw.eta_star).abs() < 1e-6);
    }
}
