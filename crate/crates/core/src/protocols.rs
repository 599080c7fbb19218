//! Round engines for the classical simulation protocols.
//!
//! Each engine draws its randomness for a round up front ([`RoundRandomness`]) and
//! then runs deterministically, so two engines fed the same draws can be compared
//! round by round.

use rand::RngCore;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::qstate::{
    conditional_bob_state, BlochVector, BobQubit, HermitianMatrix, Rank1Povm, TwoPartyState, INVARIANT_TOL,
};
use crate::rng;

/// Heaviside step with `H(0) = 1`.
#[inline]
pub fn heaviside(z: f64) -> u8 {
    u8::from(z >= 0.0)
}

/// `Theta(z) = z H(z)`.
#[inline]
pub fn theta(z: f64) -> f64 {
    if z >= 0.0 {
        z
    } else {
        0.0
    }
}

/// Sign with `sgn(0) = +1`.
#[inline]
pub fn sgn(z: f64) -> i8 {
    if z >= 0.0 {
        1
    } else {
        -1
    }
}

/// Two independent uniform vectors on the sphere.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SharedRandomness {
    pub lambda1: BlochVector,
    pub lambda2: BlochVector,
}

impl SharedRandomness {
    pub fn sample<R: RngCore + ?Sized>(rng: &mut R) -> Self {
        let lambda1 = rng::uniform_sphere(rng);
        let lambda2 = rng::uniform_sphere(rng);
        Self { lambda1, lambda2 }
    }
}

/// Everything a prepare-and-measure round consumes, drawn in a fixed order.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RoundRandomness {
    pub shared: SharedRandomness,
    /// Uniform used to pick the POVM element.
    pub pick: f64,
    /// Uniform used by Bob's response function.
    pub respond: f64,
}

impl RoundRandomness {
    pub fn draw<R: RngCore + ?Sized>(rng: &mut R) -> Self {
        let shared = SharedRandomness::sample(rng);
        let pick = rng::uniform(rng);
        let respond = rng::uniform(rng);
        Self { shared, pick, respond }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Direction {
    #[serde(rename = "A->B")]
    AliceToBob,
    #[serde(rename = "B->A")]
    BobToAlice,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Message {
    pub direction: Direction,
    pub bit: u8,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProtocolTag {
    PmTwoBit,
    PmInteractive,
    Singlet,
    BellGeneral,
}

impl ProtocolTag {
    /// Message directions every transcript of this protocol must show.
    pub fn expected_pattern(self) -> &'static [Direction] {
        use Direction::*;
        match self {
            ProtocolTag::PmTwoBit | ProtocolTag::BellGeneral => &[AliceToBob, AliceToBob],
            ProtocolTag::PmInteractive => &[BobToAlice, AliceToBob],
            ProtocolTag::Singlet => &[AliceToBob],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RoundTranscript {
    pub protocol: ProtocolTag,
    pub lambda1: BlochVector,
    pub lambda2: BlochVector,
    pub messages: Vec<Message>,
    /// Which shared vector Bob kept, 1 or 2.
    pub chosen_index: u8,
    /// Rank-1 piece Bob picked from his POVM.
    pub picked_element: usize,
    /// Bob's output (rank-1 piece index).
    pub output: usize,
    /// Alice's output in the singlet protocol, +1 or -1.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alice_output: Option<i8>,
    /// Alice's POVM outcome in the Bell protocol.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alice_outcome: Option<usize>,
    /// The response denominator vanished and Bob fell back to the weights `p_b`.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub degenerate_response: bool,
}

impl RoundTranscript {
    pub fn follows_pattern(&self) -> bool {
        let want = self.protocol.expected_pattern();
        self.messages.len() == want.len()
            && self.messages.iter().zip(want).all(|(m, d)| m.direction == *d)
            && self.messages.iter().all(|m| m.bit <= 1)
    }
}

/// Alice's two bits `c_i = H(x.lambda_i)`.
pub fn alice_encode_twobit(x: &BlochVector, sr: &SharedRandomness) -> (u8, u8) {
    (heaviside(x.dot(&sr.lambda1)), heaviside(x.dot(&sr.lambda2)))
}

/// `(-1)^(1+c) lambda`.
#[inline]
pub fn bob_flip(lambda: &BlochVector, c: u8) -> BlochVector {
    if c == 1 {
        *lambda
    } else {
        lambda.neg()
    }
}

/// Keeps the vector with the larger `|lambda.y|`; ties go to the first.
#[inline]
pub fn bob_choose(l1: &BlochVector, l2: &BlochVector, y: &BlochVector) -> (u8, BlochVector) {
    if l1.dot(y).abs() >= l2.dot(y).abs() {
        (1, *l1)
    } else {
        (2, *l2)
    }
}

/// Response distribution `p_b Theta(y_b.lambda) / sum_j p_j Theta(y_j.lambda)`.
///
/// The boolean is set when the denominator is below `1e-12`; the distribution then
/// falls back to the weights `p_b`.
pub fn response_probabilities(povm: &Rank1Povm, lambda: &BlochVector) -> (Vec<f64>, bool) {
    let w: Vec<f64> = povm.elements().iter().map(|e| e.p * theta(e.y.dot(lambda))).collect();
    let total: f64 = w.iter().sum();
    if total < 1e-12 {
        (povm.elements().iter().map(|e| e.p).collect(), true)
    } else {
        (w.iter().map(|v| v / total).collect(), false)
    }
}

/// Samples Bob's output with the response function using the uniform `u`.
pub fn respond_with_uniform(povm: &Rank1Povm, lambda: &BlochVector, u: f64) -> (usize, bool) {
    let elements = povm.elements();
    let total: f64 = elements.iter().map(|e| e.p * theta(e.y.dot(lambda))).sum();
    let degenerate = total < 1e-12;
    let weight = |i: usize| {
        let e = &elements[i];
        if degenerate {
            e.p
        } else {
            e.p * theta(e.y.dot(lambda))
        }
    };
    let norm = if degenerate {
        elements.iter().map(|e| e.p).sum()
    } else {
        total
    };
    let target = u * norm;
    let mut acc = 0.0;
    let mut last = 0;
    for i in 0..elements.len() {
        let w = weight(i);
        if w > 0.0 {
            last = i;
            acc += w;
            if target < acc {
                return (i, degenerate);
            }
        }
    }
    (last, degenerate)
}

/// Bob's response step, drawing one uniform from `rng`.
pub fn bob_respond<R: RngCore + ?Sized>(povm: &Rank1Povm, lambda: &BlochVector, rng: &mut R) -> usize {
    respond_with_uniform(povm, lambda, rng::uniform(rng)).0
}

/// Bob's element pick: inverse CDF over the weights in element order.
#[inline]
pub fn pick_element(povm: &Rank1Povm, u: f64) -> usize {
    let elements = povm.elements();
    let target = u * elements.iter().map(|e| e.p).sum::<f64>();
    let mut acc = 0.0;
    let mut last = 0;
    for (i, e) in elements.iter().enumerate() {
        if e.p > 0.0 {
            last = i;
            acc += e.p;
            if target < acc {
                return i;
            }
        }
    }
    last
}

/// Bits and decisions of one prepare-and-measure round, without the transcript bookkeeping.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PmOutcome {
    pub bits: [u8; 2],
    pub chosen_index: u8,
    pub picked_element: usize,
    pub output: usize,
    pub degenerate_response: bool,
}

/// Two-bit protocol: Alice sends both bits, Bob flips, chooses and responds.
pub fn pm_twobit_core(x: &BlochVector, povm: &Rank1Povm, r: &RoundRandomness) -> PmOutcome {
    let (c1, c2) = alice_encode_twobit(x, &r.shared);
    let l1 = bob_flip(&r.shared.lambda1, c1);
    let l2 = bob_flip(&r.shared.lambda2, c2);
    let picked = pick_element(povm, r.pick);
    let (k, lambda) = bob_choose(&l1, &l2, &povm.elements()[picked].y);
    let (output, degenerate) = respond_with_uniform(povm, &lambda, r.respond);
    PmOutcome {
        bits: [c1, c2],
        chosen_index: k,
        picked_element: picked,
        output,
        degenerate_response: degenerate,
    }
}

/// Interactive variant: Bob announces `k` first, Alice answers with `c_k` only.
///
/// `bits` holds Bob's bit (`k - 1`) and then Alice's bit.
pub fn pm_interactive_core(x: &BlochVector, povm: &Rank1Povm, r: &RoundRandomness) -> PmOutcome {
    let picked = pick_element(povm, r.pick);
    let (k, lambda_k) = bob_choose(&r.shared.lambda1, &r.shared.lambda2, &povm.elements()[picked].y);
    let c_k = heaviside(x.dot(&lambda_k));
    let lambda = bob_flip(&lambda_k, c_k);
    let (output, degenerate) = respond_with_uniform(povm, &lambda, r.respond);
    PmOutcome {
        bits: [k - 1, c_k],
        chosen_index: k,
        picked_element: picked,
        output,
        degenerate_response: degenerate,
    }
}

fn pm_transcript(tag: ProtocolTag, r: &RoundRandomness, o: &PmOutcome) -> RoundTranscript {
    let dirs = tag.expected_pattern();
    RoundTranscript {
        protocol: tag,
        lambda1: r.shared.lambda1,
        lambda2: r.shared.lambda2,
        messages: dirs
            .iter()
            .zip(o.bits)
            .map(|(&direction, bit)| Message { direction, bit })
            .collect(),
        chosen_index: o.chosen_index,
        picked_element: o.picked_element,
        output: o.output,
        alice_output: None,
        alice_outcome: None,
        degenerate_response: o.degenerate_response,
    }
}

pub fn run_round_pm_twobit<R: RngCore + ?Sized>(x: &BlochVector, povm: &Rank1Povm, rng: &mut R) -> RoundTranscript {
    let r = RoundRandomness::draw(rng);
    pm_transcript(ProtocolTag::PmTwoBit, &r, &pm_twobit_core(x, povm, &r))
}

pub fn run_round_pm_interactive<R: RngCore + ?Sized>(
    x: &BlochVector,
    povm: &Rank1Povm,
    rng: &mut R,
) -> RoundTranscript {
    let r = RoundRandomness::draw(rng);
    pm_transcript(ProtocolTag::PmInteractive, &r, &pm_interactive_core(x, povm, &r))
}

/// One round of the one-bit singlet protocol: `(a, output, c, k, picked, degenerate)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SingletOutcome {
    pub alice_output: i8,
    pub bit: u8,
    pub chosen_index: u8,
    pub picked_element: usize,
    pub output: usize,
    pub degenerate_response: bool,
}

/// `lambda1` of the randomness plays the role of the shared `lambda'_1`.
pub fn singlet_core(x: &BlochVector, bob_povm: &Rank1Povm, r: &RoundRandomness) -> SingletOutcome {
    let l1 = r.shared.lambda1;
    let s1 = sgn(x.dot(&l1));
    let c = s1 * sgn(x.dot(&r.shared.lambda2));
    let l2 = if c == 1 {
        r.shared.lambda2
    } else {
        r.shared.lambda2.neg()
    };
    let picked = pick_element(bob_povm, r.pick);
    let (k, lambda) = bob_choose(&l1, &l2, &bob_povm.elements()[picked].y);
    let (output, degenerate) = respond_with_uniform(bob_povm, &lambda, r.respond);
    SingletOutcome {
        alice_output: -s1,
        bit: u8::from(c == 1),
        chosen_index: k,
        picked_element: picked,
        output,
        degenerate_response: degenerate,
    }
}

/// Singlet protocol with a projective measurement `x` for Alice and any POVM for Bob.
pub fn run_round_singlet<R: RngCore + ?Sized>(
    x_alice: &BlochVector,
    bob_povm: &Rank1Povm,
    rng: &mut R,
) -> (i8, RoundTranscript) {
    let r = RoundRandomness::draw(rng);
    let o = singlet_core(x_alice, bob_povm, &r);
    let t = RoundTranscript {
        protocol: ProtocolTag::Singlet,
        lambda1: r.shared.lambda1,
        lambda2: r.shared.lambda2,
        messages: vec![Message {
            direction: Direction::AliceToBob,
            bit: o.bit,
        }],
        chosen_index: o.chosen_index,
        picked_element: o.picked_element,
        output: o.output,
        alice_output: Some(o.alice_output),
        alice_outcome: None,
        degenerate_response: o.degenerate_response,
    };
    (o.alice_output, t)
}

/// Precomputed Alice marginals and Bob's conditional pure-state ensembles for the
/// Bell adaptation of the two-bit protocol.
#[derive(Clone, Debug)]
pub struct BellSimulator {
    marginals: Vec<f64>,
    /// Per Alice outcome: pure states of Bob's conditional qubit with their weights.
    ensembles: Vec<Vec<(f64, BlochVector)>>,
    degenerate: Vec<usize>,
}

impl BellSimulator {
    pub fn new(state: &TwoPartyState, alice_povm: &[HermitianMatrix]) -> Result<Self> {
        let da = state.dim_a();
        if alice_povm.is_empty() {
            return Err(Error::InvalidPovm("Alice's POVM has no elements".into()));
        }
        let mut total = HermitianMatrix::zeros(da);
        for (i, a) in alice_povm.iter().enumerate() {
            if a.dim() != da {
                return Err(Error::DimensionMismatch {
                    expected: da,
                    found: a.dim(),
                });
            }
            if !a.is_psd(INVARIANT_TOL) {
                return Err(Error::InvalidPovm(format!("Alice element {i} is not PSD")));
            }
            total = total.add(a)?;
        }
        let id = HermitianMatrix::identity(da);
        for i in 0..da {
            for j in 0..da {
                if (total.get(i, j) - id.get(i, j)).norm() > INVARIANT_TOL {
                    return Err(Error::InvalidPovm("Alice's POVM is not complete".into()));
                }
            }
        }
        let mut marginals = Vec::with_capacity(alice_povm.len());
        let mut ensembles = Vec::with_capacity(alice_povm.len());
        let mut degenerate = Vec::new();
        for (i, a) in alice_povm.iter().enumerate() {
            let cond = conditional_bob_state(state, a)?;
            match cond.qubit {
                None => {
                    degenerate.push(i);
                    marginals.push(0.0);
                    ensembles.push(Vec::new());
                }
                Some(BobQubit::Pure(v)) => {
                    marginals.push(cond.probability);
                    ensembles.push(vec![(1.0, v)]);
                }
                Some(BobQubit::Mixed(m)) => {
                    marginals.push(cond.probability);
                    // rho = (1+|r|)/2 |r^><r^| + (1-|r|)/2 |-r^><-r^|
                    let [(hi, up), (lo, down)] = m.qubit_eigen();
                    ensembles.push(vec![(hi, up), (lo.max(0.0), down)]);
                }
            }
        }
        Ok(Self {
            marginals,
            ensembles,
            degenerate,
        })
    }

    pub fn marginals(&self) -> &[f64] {
        &self.marginals
    }

    /// Alice outcomes with probability below `1e-12`; they are never sampled.
    pub fn degenerate_outcomes(&self) -> &[usize] {
        &self.degenerate
    }

    /// Runs one round; returns `(a, b, transcript)`.
    pub fn run_round<R: RngCore + ?Sized>(&self, bob_povm: &Rank1Povm, rng: &mut R) -> (usize, usize, RoundTranscript) {
        let (a, x, r, o) = self.round_core(bob_povm, rng);
        let _ = x;
        let mut t = pm_transcript(ProtocolTag::BellGeneral, &r, &o);
        t.alice_outcome = Some(a);
        (a, o.output, t)
    }

    pub(crate) fn round_core<R: RngCore + ?Sized>(
        &self,
        bob_povm: &Rank1Povm,
        rng: &mut R,
    ) -> (usize, BlochVector, RoundRandomness, PmOutcome) {
        let ua = rng::uniform(rng);
        let ue = rng::uniform(rng);
        let a = rng::pick_index(&self.marginals, ua);
        let ens = &self.ensembles[a];
        let weights: Vec<f64> = ens.iter().map(|(w, _)| *w).collect();
        let x = ens[rng::pick_index(&weights, ue)].1;
        let r = RoundRandomness::draw(rng);
        let o = pm_twobit_core(&x, bob_povm, &r);
        (a, x, r, o)
    }
}

/// Bell round for a general `dA (x) 2` state: Alice samples her outcome, then sends
/// Bob's conditional qubit with the two-bit protocol.
pub fn run_round_bell_general<R: RngCore + ?Sized>(
    state: &TwoPartyState,
    alice_povm: &[HermitianMatrix],
    bob_povm: &Rank1Povm,
    rng: &mut R,
) -> Result<(usize, usize, RoundTranscript)> {
    let sim = BellSimulator::new(state, alice_povm)?;
    Ok(sim.run_round(bob_povm, rng))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::round_rng;

    fn v(a: f64, b: f64, c: f64) -> BlochVector {
        BlochVector::new(a, b, c).unwrap()
    }

    #[test]
    fn step_conventions() {
        assert_eq!(heaviside(0.0), 1);
        assert_eq!(heaviside(-0.0), 1);
        assert_eq!(heaviside(-1e-300), 0);
        assert_eq!(theta(0.0), 0.0);
        assert_eq!(theta(0.25), 0.25);
        assert_eq!(theta(-0.25), 0.0);
        assert_eq!(sgn(0.0), 1);
        assert_eq!(sgn(-2.0), -1);
    }

    #[test]
    fn encode_examples() {
        let x = BlochVector::PLUS_Z;
        let sr = SharedRandomness {
            lambda1: BlochVector::PLUS_Z,
            lambda2: BlochVector::MINUS_Z,
        };
        assert_eq!(alice_encode_twobit(&x, &sr), (1, 0));
        let sr = SharedRandomness {
            lambda1: BlochVector::PLUS_X,
            lambda2: BlochVector::PLUS_Z,
        };
        assert_eq!(alice_encode_twobit(&x, &sr).0, 1);
        let sr = SharedRandomness {
            lambda1: v(0.6, 0.0, -0.8),
            lambda2: BlochVector::PLUS_Z,
        };
        assert_eq!(alice_encode_twobit(&x, &sr).0, 0);
    }

    #[test]
    fn flip_examples() {
        let l = BlochVector::PLUS_Z;
        assert_eq!(bob_flip(&l, 1), l);
        assert_eq!(bob_flip(&l, 0), BlochVector::MINUS_Z);
        let w = v(0.48, -0.6, 0.64);
        assert_eq!(bob_flip(&bob_flip(&w, 0), 0), w);
    }

    #[test]
    fn choose_examples() {
        let y = BlochVector::PLUS_Z;
        assert_eq!(bob_choose(&BlochVector::PLUS_X, &BlochVector::PLUS_Z, &y).0, 2);
        assert_eq!(bob_choose(&BlochVector::PLUS_Z, &BlochVector::PLUS_Z, &y).0, 1);
        let (l1, l2) = (v(0.6, 0.0, 0.8), v(0.0, 0.8, -0.6));
        let k = bob_choose(&l1, &l2, &y).0;
        for (a, b) in [(0, 0), (0, 1), (1, 0), (1, 1)] {
            assert_eq!(bob_choose(&bob_flip(&l1, a), &bob_flip(&l2, b), &y).0, k);
        }
    }

    #[test]
    fn respond_projective_reduces_to_heaviside() {
        let y = v(0.0, 1.0, 0.0);
        let povm = Rank1Povm::projective(y);
        let lambda = v(0.3, 0.5, (1.0f64 - 0.34).sqrt());
        let (p, deg) = response_probabilities(&povm, &lambda);
        assert!(!deg);
        assert_eq!(p, vec![1.0, 0.0]);
        for u in [0.0, 0.5, 0.999_999] {
            assert_eq!(respond_with_uniform(&povm, &lambda, u).0, 0);
        }
    }

    #[test]
    fn respond_trine_at_plus_z() {
        let (p, _) = response_probabilities(&Rank1Povm::trine(), &BlochVector::PLUS_Z);
        assert_eq!(p, vec![1.0, 0.0, 0.0]);
    }

    #[test]
    fn respond_normalizes() {
        let mut rng = round_rng(5, 0);
        for _ in 0..100 {
            let povm = Rank1Povm::random(5, &mut rng).unwrap();
            let lambda = BlochVector::random(&mut rng);
            let (p, _) = response_probabilities(&povm, &lambda);
            assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            assert!(p.iter().all(|&q| (0.0..=1.0).contains(&q)));
        }
    }

    #[test]
    fn respond_degenerate_falls_back_to_weights() {
        // both directions orthogonal to lambda: every Theta vanishes
        let povm = Rank1Povm::projective(BlochVector::PLUS_X);
        let (p, deg) = response_probabilities(&povm, &BlochVector::PLUS_Z);
        assert!(deg);
        assert_eq!(p, vec![0.5, 0.5]);
        assert_eq!(respond_with_uniform(&povm, &BlochVector::PLUS_Z, 0.7), (1, true));
    }

    #[test]
    fn transcripts_follow_patterns() {
        let mut rng = round_rng(9, 0);
        let povm = Rank1Povm::trine();
        let x = v(0.0, 0.6, 0.8);
        for _ in 0..200 {
            let t = run_round_pm_twobit(&x, &povm, &mut rng);
            assert!(t.follows_pattern());
            assert_eq!(t.messages.len(), 2);
            let t = run_round_pm_interactive(&x, &povm, &mut rng);
            assert!(t.follows_pattern());
            assert_eq!(t.messages[0].direction, Direction::BobToAlice);
            let (a, t) = run_round_singlet(&x, &povm, &mut rng);
            assert!(t.follows_pattern());
            assert!(a == 1 || a == -1);
            assert_eq!(t.alice_output, Some(a));
        }
    }

    #[test]
    fn plus_z_with_z_measurement_is_deterministic() {
        let povm = Rank1Povm::projective(BlochVector::PLUS_Z);
        for round in 0..10_000 {
            let t = run_round_pm_twobit(&BlochVector::PLUS_Z, &povm, &mut round_rng(1, round));
            assert_eq!(t.output, 0);
        }
    }

    #[test]
    fn interactive_matches_twobit_on_shared_draws() {
        let mut rng = round_rng(21, 0);
        let povm = Rank1Povm::random(4, &mut rng).unwrap();
        let x = BlochVector::random(&mut rng);
        for round in 0..5_000 {
            let r = RoundRandomness::draw(&mut round_rng(21, round));
            let a = pm_twobit_core(&x, &povm, &r);
            let b = pm_interactive_core(&x, &povm, &r);
            assert_eq!((a.output, a.chosen_index), (b.output, b.chosen_index));
            assert_eq!(a.bits[(a.chosen_index - 1) as usize], b.bits[1]);
        }
    }

    #[test]
    fn bell_simulator_rejects_incomplete_povm() {
        let s = TwoPartyState::singlet();
        let half = BlochVector::PLUS_Z.density_matrix();
        assert!(BellSimulator::new(&s, &[half]).is_err());
        let bad = HermitianMatrix::identity(3);
        assert!(BellSimulator::new(&s, &[bad]).is_err());
    }

    #[test]
    fn bell_round_transcript() {
        let s = TwoPartyState::singlet();
        let alice = Rank1Povm::projective(BlochVector::PLUS_Z).to_matrices();
        let bob = Rank1Povm::projective(BlochVector::PLUS_Z);
        let mut rng = round_rng(2, 0);
        for _ in 0..1000 {
            let (a, b, t) = run_round_bell_general(&s, &alice, &bob, &mut rng).unwrap();
            assert!(t.follows_pattern());
            assert_eq!(t.alice_outcome, Some(a));
            // perfect anticorrelation of the singlet along equal axes
            assert_ne!(a, b);
        }
    }
}
