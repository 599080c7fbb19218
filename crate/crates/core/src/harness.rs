//! Monte Carlo estimation of protocol statistics and numerical checks of the identities the
//! protocols rest on.
//!
//! Every estimator gives round `r` its own generator `round_rng(seed, r)`, so reports
//! depend only on `(seed, N)` and not on the number of worker threads.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::protocols::{
    bob_choose, heaviside, pm_interactive_core, pm_twobit_core, singlet_core, theta, BellSimulator, RoundRandomness,
};
use crate::qstate::{
    born_probability_matrix, coarse_born_probabilities, BlochVector, HermitianMatrix, Rank1Povm, TwoPartyState,
};
use crate::rng::{round_rng, uniform_sphere};
use crate::witness::{Behavior, Table3};

pub const DEFAULT_Z_MAX: f64 = 4.0;
/// Absolute slack added to `z_max·σ` so that deterministic cells with zero variance pass.
pub const DEVIATION_SLACK: f64 = 1e-9;
pub const MIN_ROUNDS: u64 = 1000;
pub const KS_SIGNIFICANCE: f64 = 0.01;
/// Largest `|Σ p_b y_b|` accepted by [`check_lemma2`].
pub const BARYCENTER_TOL: f64 = 1e-13;

/// Rounds handled by one rayon task.
const CHUNK: u64 = 1 << 14;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellReport {
    /// Outcome labels, e.g. `[b]` or `[a, b]`.
    pub outcome: Vec<i64>,
    pub count: u64,
    pub frequency: f64,
    pub target: f64,
    pub standard_error: f64,
    pub z: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EstimationReport {
    pub protocol: String,
    pub rounds: u64,
    pub seed: u64,
    pub cells: Vec<CellReport>,
    pub max_deviation: f64,
    pub z_max: f64,
    pub pass: bool,
}

impl EstimationReport {
    /// Builds cells from integer counts; passes when every `|p̂ - p| ≤ z_max·σ + 1e-9`.
    pub fn from_counts(
        protocol: &str,
        seed: u64,
        labels: Vec<Vec<i64>>,
        counts: &[u64],
        targets: &[f64],
        z_max: f64,
    ) -> Self {
        let rounds: u64 = counts.iter().sum();
        let n = rounds as f64;
        let mut max_deviation: f64 = 0.0;
        let mut pass = true;
        let cells = labels
            .into_iter()
            .zip(counts.iter().zip(targets))
            .map(|(outcome, (&count, &target))| {
                let frequency = count as f64 / n;
                let standard_error = (target * (1.0 - target) / n).max(0.0).sqrt();
                let dev = frequency - target;
                max_deviation = max_deviation.max(dev.abs());
                pass &= dev.abs() <= z_max * standard_error + DEVIATION_SLACK;
                let z = if standard_error > 0.0 {
                    dev / standard_error
                } else if dev == 0.0 {
                    0.0
                } else {
                    dev.signum() * f64::INFINITY
                };
                CellReport {
                    outcome,
                    count,
                    frequency,
                    target,
                    standard_error,
                    z,
                }
            })
            .collect();
        Self {
            protocol: protocol.into(),
            rounds,
            seed,
            cells,
            max_deviation,
            z_max,
            pass,
        }
    }

    pub fn frequencies(&self) -> Vec<f64> {
        self.cells.iter().map(|c| c.frequency).collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PmVariant {
    TwoBit,
    Interactive,
}

fn check_rounds(n: u64) -> Result<()> {
    if n < MIN_ROUNDS {
        return Err(Error::InvalidArgument(format!(
            "at least {MIN_ROUNDS} rounds required, got {n}"
        )));
    }
    Ok(())
}

/// Counts outcomes of `round(r)` over `0..n` in parallel; the result is independent of scheduling.
fn count_rounds(n: u64, cells: usize, round: impl Fn(u64) -> usize + Sync) -> Vec<u64> {
    let chunks = n.div_ceil(CHUNK);
    (0..chunks)
        .into_par_iter()
        .map(|ch| {
            let mut counts = vec![0u64; cells];
            for r in ch * CHUNK..((ch + 1) * CHUNK).min(n) {
                counts[round(r)] += 1;
            }
            counts
        })
        .reduce(
            || vec![0u64; cells],
            |mut a, b| {
                a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
                a
            },
        )
}

/// Runs `n` rounds of the prepare-and-measure protocol and compares the coarse outcome
/// frequencies with `tr(ρ_x B_b)`.
pub fn estimate_pm(
    x: &BlochVector,
    povm: &Rank1Povm,
    n: u64,
    seed: u64,
    variant: PmVariant,
) -> Result<EstimationReport> {
    check_rounds(n)?;
    let map = povm.outcome_map();
    let engine = match variant {
        PmVariant::TwoBit => pm_twobit_core,
        PmVariant::Interactive => pm_interactive_core,
    };
    let counts = count_rounds(n, povm.num_outcomes(), |r| {
        let mut rng = round_rng(seed, r);
        let draws = RoundRandomness::draw(&mut rng);
        map[engine(x, povm, &draws).output]
    });
    let targets = coarse_born_probabilities(x, povm);
    let labels = (0..povm.num_outcomes()).map(|b| vec![b as i64]).collect();
    let name = match variant {
        PmVariant::TwoBit => "pm-twobit",
        PmVariant::Interactive => "pm-interactive",
    };
    Ok(EstimationReport::from_counts(
        name,
        seed,
        labels,
        &counts,
        &targets,
        DEFAULT_Z_MAX,
    ))
}

/// Singlet targets `p(a, b) = Σ_{e ∈ b} ½ p_e (1 - a x·y_e)`, cells ordered `a = +1, -1` then `b`.
pub fn singlet_targets(x: &BlochVector, bob_povm: &Rank1Povm) -> Vec<f64> {
    let ob = bob_povm.num_outcomes();
    let mut t = vec![0.0; 2 * ob];
    for (ai, a) in [1.0, -1.0].into_iter().enumerate() {
        for (e, &b) in bob_povm.elements().iter().zip(bob_povm.outcome_map()) {
            t[ai * ob + b] += 0.5 * e.p * (1.0 - a * x.dot(&e.y));
        }
    }
    t
}

/// One-bit simulation of the singlet with Alice measuring along `x`.
pub fn estimate_singlet(x: &BlochVector, bob_povm: &Rank1Povm, n: u64, seed: u64) -> Result<EstimationReport> {
    check_rounds(n)?;
    let ob = bob_povm.num_outcomes();
    let map = bob_povm.outcome_map();
    let counts = count_rounds(n, 2 * ob, |r| {
        let mut rng = round_rng(seed, r);
        let draws = RoundRandomness::draw(&mut rng);
        let o = singlet_core(x, bob_povm, &draws);
        let ai = usize::from(o.alice_output == -1);
        ai * ob + map[o.output]
    });
    let labels = [1i64, -1]
        .iter()
        .flat_map(|&a| (0..ob).map(move |b| vec![a, b as i64]))
        .collect();
    Ok(EstimationReport::from_counts(
        "singlet",
        seed,
        labels,
        &counts,
        &singlet_targets(x, bob_povm),
        DEFAULT_Z_MAX,
    ))
}

/// Bell-scenario targets `tr((A_a ⊗ B_b) ρ)`, cells ordered `a`-major.
pub fn bell_targets(state: &TwoPartyState, alice_povm: &[HermitianMatrix], bob_povm: &Rank1Povm) -> Result<Vec<f64>> {
    let ob = bob_povm.num_outcomes();
    let mut bob = vec![HermitianMatrix::zeros(2); ob];
    for (m, &b) in bob_povm.to_matrices().iter().zip(bob_povm.outcome_map()) {
        bob[b] = bob[b].add(m)?;
    }
    let mut t = Vec::with_capacity(alice_povm.len() * ob);
    for a in alice_povm {
        for b in &bob {
            t.push(born_probability_matrix(state.joint(), &a.kron(b))?);
        }
    }
    Ok(t)
}

/// Two-bit simulation of a `d_A ⊗ 2` Bell scenario.
pub fn estimate_bell(
    state: &TwoPartyState,
    alice_povm: &[HermitianMatrix],
    bob_povm: &Rank1Povm,
    n: u64,
    seed: u64,
) -> Result<EstimationReport> {
    check_rounds(n)?;
    let sim = BellSimulator::new(state, alice_povm)?;
    let ob = bob_povm.num_outcomes();
    let map = bob_povm.outcome_map();
    let counts = count_rounds(n, alice_povm.len() * ob, |r| {
        let mut rng = round_rng(seed, r);
        let (a, _, _, o) = sim.round_core(bob_povm, &mut rng);
        a * ob + map[o.output]
    });
    let labels = (0..alice_povm.len())
        .flat_map(|a| (0..ob).map(move |b| vec![a as i64, b as i64]))
        .collect();
    let targets = bell_targets(state, alice_povm, bob_povm)?;
    Ok(EstimationReport::from_counts(
        "bell",
        seed,
        labels,
        &counts,
        &targets,
        DEFAULT_Z_MAX,
    ))
}

/// Largest `|Σ_b p_b |y_b·λ| - 2 Σ_b p_b Θ(y_b·λ)|` over `m` random `λ`.
///
/// The identity needs `Σ_b p_b y_b = 0`; POVMs whose barycenter exceeds
/// [`BARYCENTER_TOL`] are rejected since the error is exactly `(Σ p_b y_b)·λ`.
pub fn check_lemma2(povm: &Rank1Povm, m: usize, seed: u64) -> Result<f64> {
    let mut bary = [0.0; 3];
    for e in povm.elements() {
        for (acc, v) in bary.iter_mut().zip(e.y.components()) {
            *acc += e.p * v;
        }
    }
    let norm = bary.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm > BARYCENTER_TOL {
        return Err(Error::InvalidPovm(format!(
            "barycenter |Σ p_b y_b| = {norm:e} is not zero"
        )));
    }
    let mut rng = round_rng(seed, 0);
    let mut worst: f64 = 0.0;
    for _ in 0..m {
        let l = uniform_sphere(&mut rng);
        let lhs: f64 = povm.elements().iter().map(|e| e.p * e.y.dot(&l).abs()).sum();
        let rhs: f64 = 2.0 * povm.elements().iter().map(|e| e.p * theta(e.y.dot(&l))).sum::<f64>();
        worst = worst.max((lhs - rhs).abs());
    }
    Ok(worst)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MonteCarloEstimate {
    pub estimate: f64,
    pub standard_error: f64,
    pub expected: f64,
    pub samples: u64,
}

impl MonteCarloEstimate {
    /// `|estimate - expected|` in units of the standard error (0 when both agree exactly).
    pub fn z(&self) -> f64 {
        let d = (self.estimate - self.expected).abs();
        if d == 0.0 || (self.standard_error == 0.0 && d <= 1e-12) {
            0.0
        } else {
            d / self.standard_error
        }
    }
}

/// Sums `f(λ)` and `f(λ)²` over `n` uniform `λ`, chunked on fixed streams.
fn sphere_moments(n: u64, seed: u64, f: impl Fn(&BlochVector) -> f64 + Sync) -> (f64, f64) {
    let chunks = n.div_ceil(CHUNK);
    let parts: Vec<(f64, f64)> = (0..chunks)
        .into_par_iter()
        .map(|ch| {
            let mut rng = round_rng(seed, ch);
            let (mut s, mut s2) = (0.0, 0.0);
            for _ in ch * CHUNK..((ch + 1) * CHUNK).min(n) {
                let v = f(&uniform_sphere(&mut rng));
                s += v;
                s2 += v * v;
            }
            (s, s2)
        })
        .collect();
    parts.iter().fold((0.0, 0.0), |(a, b), (c, d)| (a + c, b + d))
}

fn estimate_from_moments(s: f64, s2: f64, n: u64, expected: f64) -> MonteCarloEstimate {
    let nf = n as f64;
    let mean = s / nf;
    let var = ((s2 / nf - mean * mean) * nf / (nf - 1.0)).max(0.0);
    MonteCarloEstimate {
        estimate: mean,
        standard_error: (var / nf).sqrt(),
        expected,
        samples: n,
    }
}

/// Monte Carlo estimate of `(1/π) ∫ H(x·λ) Θ(y·λ) dλ` as the mean of `4 H(x·λ) Θ(y·λ)`
/// over uniform `λ`; the exact value is `½(1 + x·y)`.
pub fn mc_lemma1_integral(x: &BlochVector, y: &BlochVector, n: u64, seed: u64) -> Result<MonteCarloEstimate> {
    if n < 2 {
        return Err(Error::InvalidArgument("need at least two samples".into()));
    }
    let (s, s2) = sphere_moments(n, seed, |l| 4.0 * f64::from(heaviside(x.dot(l))) * theta(y.dot(l)));
    Ok(estimate_from_moments(s, s2, n, 0.5 * (1.0 + x.dot(y))))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChoiceDensityReport {
    pub samples: u64,
    pub ks_statistic: f64,
    pub p_value: f64,
    pub mean_abs: MonteCarloEstimate,
    /// Fraction of draws with `t > 0` and its deviation from ½ in standard errors.
    pub positive_fraction: f64,
    pub symmetry_z: f64,
    pub pass: bool,
}

/// CDF of the density `|t|` on `[-1, 1]`.
pub fn choice_cdf(t: f64) -> f64 {
    let t = t.clamp(-1.0, 1.0);
    if t < 0.0 {
        0.5 * (1.0 - t * t)
    } else {
        0.5 * (1.0 + t * t)
    }
}

/// Asymptotic Kolmogorov p-value with the Stephens small-sample correction.
pub fn kolmogorov_p_value(d: f64, n: u64) -> f64 {
    let sn = (n as f64).sqrt();
    let lambda = (sn + 0.12 + 0.11 / sn) * d;
    if lambda < 1e-3 {
        return 1.0;
    }
    let mut sum = 0.0;
    for j in 1..=200 {
        let jf = j as f64;
        let term = (-2.0 * jf * jf * lambda * lambda).exp();
        sum += if j % 2 == 1 { term } else { -term };
        if term < 1e-300 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

/// Samples `t = y·λ_k` with `λ_k` selected by the choice rule and compares its law with the
/// density `|t|` (KS test at 0.01, mean of `|t|` within 5σ of 2/3).
pub fn check_choice_density(y: &BlochVector, m: u64, seed: u64) -> Result<ChoiceDensityReport> {
    if m < 2 {
        return Err(Error::InvalidArgument("need at least two samples".into()));
    }
    let chunks = m.div_ceil(CHUNK);
    let mut ts: Vec<f64> = (0..chunks)
        .into_par_iter()
        .flat_map_iter(|ch| {
            let mut rng = round_rng(seed, ch);
            (ch * CHUNK..((ch + 1) * CHUNK).min(m))
                .map(|_| {
                    let l1 = uniform_sphere(&mut rng);
                    let l2 = uniform_sphere(&mut rng);
                    let (_, l) = bob_choose(&l1, &l2, y);
                    y.dot(&l)
                })
                .collect::<Vec<_>>()
        })
        .collect();
    let n = ts.len() as f64;
    let (s, s2) = ts.iter().fold((0.0, 0.0), |(a, b), t| (a + t.abs(), b + t * t));
    let mean_abs = estimate_from_moments(s, s2, m, 2.0 / 3.0);
    let positive = ts.iter().filter(|t| **t > 0.0).count() as f64 / n;
    let symmetry_z = (positive - 0.5) / (0.25 / n).sqrt();
    ts.sort_by(f64::total_cmp);
    let mut d: f64 = 0.0;
    for (i, &t) in ts.iter().enumerate() {
        let f = choice_cdf(t);
        d = d.max(f - i as f64 / n).max((i + 1) as f64 / n - f);
    }
    let p_value = kolmogorov_p_value(d, m);
    let pass = p_value > KS_SIGNIFICANCE && mean_abs.z() <= 5.0;
    Ok(ChoiceDensityReport {
        samples: m,
        ks_statistic: d,
        p_value,
        mean_abs,
        positive_fraction: positive,
        symmetry_z,
        pass,
    })
}

/// `p(b|x,y) = tr(ρ_x B_{b|y})` for pure states and rank-1 POVMs (coarse outcomes).
pub fn behavior_from_quantum(states: &[BlochVector], povms: &[Rank1Povm]) -> Result<Behavior> {
    let ob = povms
        .first()
        .ok_or_else(|| Error::InvalidArgument("no measurements".into()))?
        .num_outcomes();
    if states.is_empty() {
        return Err(Error::InvalidArgument("no states".into()));
    }
    if let Some(p) = povms.iter().find(|p| p.num_outcomes() != ob) {
        return Err(Error::ShapeMismatch(format!(
            "measurements have {ob} and {} outcomes",
            p.num_outcomes()
        )));
    }
    let probs: Vec<Vec<Vec<f64>>> = states
        .iter()
        .map(|x| povms.iter().map(|m| coarse_born_probabilities(x, m)).collect())
        .collect();
    Behavior::new(Table3::from_nested(probs)?)
}

/// As [`behavior_from_quantum`] for density matrices and POVMs given as matrices.
pub fn behavior_from_matrices(states: &[HermitianMatrix], povms: &[Vec<HermitianMatrix>]) -> Result<Behavior> {
    let ob = povms
        .first()
        .ok_or_else(|| Error::InvalidArgument("no measurements".into()))?
        .len();
    if states.is_empty() {
        return Err(Error::InvalidArgument("no states".into()));
    }
    let mut probs = Vec::with_capacity(states.len());
    for rho in states {
        let mut row = Vec::with_capacity(povms.len());
        for m in povms {
            if m.len() != ob {
                return Err(Error::ShapeMismatch(format!(
                    "measurements have {ob} and {} outcomes",
                    m.len()
                )));
            }
            row.push(
                m.iter()
                    .map(|e| born_probability_matrix(rho, e))
                    .collect::<Result<Vec<f64>>>()?,
            );
        }
        probs.push(row);
    }
    Behavior::new(Table3::from_nested(probs)?)
}
