//! End-to-end acceptance suite. Prints one PASS/FAIL line per criterion and fails if any
//! criterion fails.

use std::io::Write;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use qsimcost::exact::{certify, replay_certificate, DEFAULT_DENOMINATOR};
use qsimcost::geometry::{octahedron, snub_cube, thomson, tribonacci};
use qsimcost::harness::{
    behavior_from_quantum, check_choice_density, check_lemma2, estimate_pm, estimate_singlet, mc_lemma1_integral,
    PmVariant,
};
use qsimcost::lp::DenseRevisedSimplex;
use qsimcost::protocols::{
    pm_interactive_core, pm_twobit_core, run_round_pm_interactive, run_round_pm_twobit, run_round_singlet, Direction,
    RoundRandomness,
};
use qsimcost::rng::round_rng;
use qsimcost::scenario::Scenario;
use qsimcost::witness::{
    classical_bound, classical_bound_bruteforce, visibility_primal, Behavior, Table3, VisibilityResult,
};
use qsimcost::{BlochVector, Rank1Povm};

const SEED: u64 = 0x5EED_0001;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn report(id: usize, name: &str, started: Instant, o: &Outcome) {
    // Written to the real stdout so the lines appear without --nocapture.
    let mut out = std::io::stdout().lock();
    let _ = writeln!(
        out,
        "[acceptance] criterion {id:>2} {:<4} {name}: {} ({:.1}s)",
        if o.pass { "PASS" } else { "FAIL" },
        o.detail,
        started.elapsed().as_secs_f64()
    );
}

fn born_rule() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let mut worst: f64 = 0.0;
    let mut failures = 0;
    for i in 0..20 {
        let x = BlochVector::random(&mut rng);
        let povm = Rank1Povm::random(rng.random_range(2..=4), &mut rng).unwrap();
        let r = estimate_pm(&x, &povm, 1_000_000, SEED + i, PmVariant::TwoBit).unwrap();
        for c in &r.cells {
            let allowed = 4.0 * (c.target * (1.0 - c.target) / r.rounds as f64).sqrt() + 1e-9;
            if (c.frequency - c.target).abs() > allowed {
                failures += 1;
            }
            worst = worst.max(c.z.abs());
        }
    }
    outcome(
        failures == 0,
        format!("{failures} cells outside 4σ, largest |z| = {worst:.3}"),
    )
}

fn protocol_equivalence() -> Outcome {
    let mut setup = ChaCha8Rng::seed_from_u64(SEED ^ 2);
    let x = BlochVector::random(&mut setup);
    let povm = Rank1Povm::random(3, &mut setup).unwrap();
    let mut mismatched = 0u64;
    let mut bad_pattern = 0u64;
    for r in 0..100_000u64 {
        let draws = RoundRandomness::draw(&mut round_rng(SEED, r));
        let a = pm_twobit_core(&x, &povm, &draws);
        let b = pm_interactive_core(&x, &povm, &draws);
        if a.output != b.output || a.chosen_index != b.chosen_index || a.picked_element != b.picked_element {
            mismatched += 1;
        }
        let t2 = run_round_pm_twobit(&x, &povm, &mut round_rng(SEED, r));
        let ti = run_round_pm_interactive(&x, &povm, &mut round_rng(SEED, r));
        let dirs =
            |t: &qsimcost::protocols::RoundTranscript| t.messages.iter().map(|m| m.direction).collect::<Vec<_>>();
        if dirs(&t2) != [Direction::AliceToBob, Direction::AliceToBob]
            || dirs(&ti) != [Direction::BobToAlice, Direction::AliceToBob]
            || t2.output != ti.output
        {
            bad_pattern += 1;
        }
    }
    outcome(
        mismatched == 0 && bad_pattern == 0,
        format!("{mismatched} differing outputs, {bad_pattern} transcript deviations over 1e5 rounds"),
    )
}

fn barycenter_identity() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED ^ 3);
    let mut worst: f64 = 0.0;
    for i in 0..100 {
        let povm = Rank1Povm::random(rng.random_range(2..=6), &mut rng).unwrap();
        worst = worst.max(check_lemma2(&povm, 1000, SEED + i).unwrap());
    }
    outcome(worst <= 1e-12, format!("max error {worst:.3e}"))
}

fn sign_integral() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED ^ 4);
    let mut worst: f64 = 0.0;
    for i in 0..20 {
        let x = BlochVector::random(&mut rng);
        let y = BlochVector::random(&mut rng);
        worst = worst.max(mc_lemma1_integral(&x, &y, 1_000_000, SEED + i).unwrap().z());
    }
    let x = BlochVector::random(&mut rng);
    let anti = mc_lemma1_integral(&x, &x.neg(), 1_000_000, SEED).unwrap().estimate;
    outcome(
        worst <= 5.0 && anti == 0.0,
        format!("largest z = {worst:.3}, antipodal estimate = {anti}"),
    )
}

fn choice_density() -> Outcome {
    let y = BlochVector::random(&mut ChaCha8Rng::seed_from_u64(SEED ^ 5));
    let r = check_choice_density(&y, 100_000, SEED).unwrap();
    outcome(
        r.pass,
        format!(
            "KS D = {:.4e}, p = {:.4}, mean|t| z = {:.3}",
            r.ks_statistic,
            r.p_value,
            r.mean_abs.z()
        ),
    )
}

fn singlet() -> Outcome {
    const N: u64 = 1_000_000;
    let mut rng = ChaCha8Rng::seed_from_u64(SEED ^ 6);
    let sigma_half = 4.0 * (0.25 / N as f64).sqrt();
    let mut failures = Vec::new();
    for i in 0..10 {
        let x = BlochVector::random(&mut rng);
        let y = BlochVector::random(&mut rng);
        let r = estimate_singlet(&x, &Rank1Povm::projective(y), N, SEED + i).unwrap();
        let f = r.frequencies();
        // Cells are (a = +1, b = 0), (+1, 1), (-1, 0), (-1, 1).
        let alice_plus = f[0] + f[1];
        let bob_zero = f[0] + f[2];
        if !r.pass || (alice_plus - 0.5).abs() > sigma_half || (bob_zero - 0.5).abs() > sigma_half {
            failures.push(format!("setting {i}"));
        }
    }
    let x = BlochVector::random(&mut rng);
    let equal = estimate_singlet(&x, &Rank1Povm::projective(x), N, SEED).unwrap();
    let f = equal.frequencies();
    let same = f[0] + f[3];
    if same > 4.0 * (same.max(1.0 / N as f64) / N as f64).sqrt() {
        failures.push(format!("p(a=b) = {same}"));
    }
    let povm = Rank1Povm::projective(x);
    let mut bits_wrong = 0;
    for r in 0..N {
        let (_, t) = run_round_singlet(&x, &povm, &mut round_rng(SEED, r));
        if t.messages.len() != 1 || t.messages[0].direction != Direction::AliceToBob || t.messages[0].bit > 1 {
            bits_wrong += 1;
        }
    }
    if bits_wrong > 0 {
        failures.push(format!("{bits_wrong} rounds without exactly one bit"));
    }
    outcome(
        failures.is_empty(),
        if failures.is_empty() {
            format!("10 settings, p(a=b) = {same}")
        } else {
            failures.join("; ")
        },
    )
}

fn bound_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED ^ 7);
    let shapes = [(2, 2, 2, 2), (3, 2, 2, 2), (3, 3, 2, 2), (2, 3, 3, 2)];
    let mut mismatches = 0;
    for i in 0..200 {
        let (ia, ib, ob, d) = shapes[i % shapes.len()];
        let gamma = Table3::from_fn(ia, ib, ob, |_, _, _| rng.random_range(-1.0..1.0));
        if classical_bound(&gamma, d).unwrap() != classical_bound_bruteforce(&gamma, d).unwrap() {
            mismatches += 1;
        }
    }
    outcome(mismatches == 0, format!("{mismatches} of 200 differ"))
}

fn solve(name: &str) -> (Scenario, VisibilityResult) {
    let s = Scenario::preset(name).unwrap();
    let r = visibility_primal(&s.behavior().unwrap(), 3, &DenseRevisedSimplex::new()).unwrap();
    (s, r)
}

fn headline(snub: &VisibilityResult, thomson: &VisibilityResult) -> Outcome {
    let ok = snub.eta_star < 1.0 - 1e-6 && thomson.eta_star < 1.0 - 1e-6;
    outcome(
        ok,
        format!(
            "η⋆(snub cube) = {:.12}, η⋆(Thomson-11) = {:.12}",
            snub.eta_star, thomson.eta_star
        ),
    )
}

fn random_small_behavior(rng: &mut ChaCha8Rng) -> (Behavior, usize) {
    let ia = rng.random_range(3..=4);
    let ib = rng.random_range(2..=3);
    let ob = rng.random_range(2..=3);
    let states: Vec<BlochVector> = (0..ia).map(|_| BlochVector::random(rng)).collect();
    let povms: Vec<Rank1Povm> = (0..ib).map(|_| Rank1Povm::random(ob, rng).unwrap()).collect();
    (behavior_from_quantum(&states, &povms).unwrap(), 2)
}

fn duality(instances: &[&VisibilityResult]) -> Outcome {
    let mut worst: f64 = 0.0;
    let mut missing = 0;
    for r in instances {
        match r.duality_gap() {
            Some(g) => worst = worst.max(g),
            None => missing += 1,
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(SEED ^ 9);
    for _ in 0..20 {
        let (b, d) = random_small_behavior(&mut rng);
        match visibility_primal(&b, d, &DenseRevisedSimplex::new())
            .unwrap()
            .duality_gap()
        {
            Some(g) => worst = worst.max(g),
            None => missing += 1,
        }
    }
    outcome(
        worst <= 1e-6 && missing == 0,
        format!("largest gap {worst:.3e} over {} instances", instances.len() + 20),
    )
}

fn classical_sanity() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED ^ 10);
    let (ia, ib, ob, d) = (6usize, 4usize, 2usize, 3usize);
    let encodings = d.pow(ia as u32);
    let mut pi: Vec<f64> = (0..encodings).map(|_| rng.random::<f64>()).collect();
    let total: f64 = pi.iter().sum();
    pi.iter_mut().for_each(|w| *w /= total);
    // response[y][c] is a distribution over b.
    let response: Vec<Vec<Vec<f64>>> = (0..ib)
        .map(|_| {
            (0..d)
                .map(|_| {
                    let raw: Vec<f64> = (0..ob).map(|_| rng.random::<f64>()).collect();
                    let s: f64 = raw.iter().sum();
                    raw.into_iter().map(|v| v / s).collect()
                })
                .collect()
        })
        .collect();
    let mut p = Table3::zeros(ia, ib, ob);
    for (e, w) in pi.iter().enumerate() {
        let mut code = e;
        for x in 0..ia {
            let c = code % d;
            code /= d;
            for (y, resp) in response.iter().enumerate() {
                for (b, r) in resp[c].iter().enumerate() {
                    *p.get_mut(b, x, y) += w * r;
                }
            }
        }
    }
    let r = visibility_primal(&Behavior::new(p).unwrap(), d, &DenseRevisedSimplex::new()).unwrap();
    outcome(r.eta_star >= 1.0 - 1e-8, format!("η⋆ = {:.12}", r.eta_star))
}

fn certificate(scenario: &Scenario, snub: &VisibilityResult) -> Outcome {
    let Some(w) = snub.witness() else {
        return outcome(false, "no witness from the visibility solve");
    };
    let cert = match certify(
        &scenario.state_matrices(),
        &scenario.povm_matrices(),
        &w,
        DEFAULT_DENOMINATOR,
    ) {
        Ok(c) => c,
        Err(e) => return outcome(false, e.to_string()),
    };
    let json = cert.to_json().unwrap();
    let replayed = match replay_certificate(&json) {
        Ok(c) => c,
        Err(e) => return outcome(false, format!("replay rejected: {e}")),
    };
    let identical = replayed == cert && replayed.to_json().unwrap() == json;
    let positive = cert.margin > num_traits::Zero::zero();
    outcome(
        identical && positive,
        format!("margin {:.6e}, replay identical: {identical}", cert.margin_f64()),
    )
}

fn geometry() -> Outcome {
    let mut problems = Vec::new();
    let snub = snub_cube();
    let t = tribonacci();
    if snub.len() != 24 || snub.vectors.iter().any(|v| (v.norm_sq() - 1.0).abs() > 1e-12) {
        problems.push("snub cube is not 24 unit vectors".to_string());
    }
    let residual = (t.powi(3) - t * t - t - 1.0).abs();
    if residual > 1e-12 {
        problems.push(format!("tribonacci residual {residual:e}"));
    }
    let six = thomson(6, 20, SEED).unwrap().set.sorted_pairwise_dots();
    let oct = octahedron().sorted_pairwise_dots();
    if six.len() != 15 || six.iter().zip(&oct).any(|(a, b)| (a - b).abs() > 1e-6) {
        problems.push("thomson(6) is not an octahedron".to_string());
    }
    let two = thomson(2, 20, SEED).unwrap().set;
    let d = two.vectors[0].dot(&two.vectors[1]);
    if (d + 1.0).abs() > 1e-6 {
        problems.push(format!("thomson(2) dot {d}"));
    }
    outcome(
        problems.is_empty(),
        if problems.is_empty() {
            format!("|τ³-τ²-τ-1| = {residual:.1e}")
        } else {
            problems.join("; ")
        },
    )
}

fn run(results: &mut Vec<(usize, bool)>, id: usize, name: &str, f: impl FnOnce() -> Outcome) {
    let started = Instant::now();
    let o = f();
    report(id, name, started, &o);
    results.push((id, o.pass));
}

#[test]
fn acceptance() {
    let mut results = Vec::new();
    run(&mut results, 1, "Born rule via two bits", born_rule);
    run(
        &mut results,
        2,
        "two-bit and interactive engines agree",
        protocol_equivalence,
    );
    run(&mut results, 3, "barycenter identity", barycenter_identity);
    run(&mut results, 4, "sign-integral Monte Carlo", sign_integral);
    run(&mut results, 5, "choice-rule density", choice_density);
    run(&mut results, 6, "singlet with one bit", singlet);
    run(&mut results, 7, "classical bound vs brute force", bound_oracle);

    let started = Instant::now();
    let (snub_scenario, snub) = solve("snubcube");
    let (_, thomson11) = solve("thomson11");
    let o = headline(&snub, &thomson11);
    report(8, "octahedron x snub cube / Thomson-11 not 3-simulable", started, &o);
    results.push((8, o.pass));
    run(&mut results, 9, "strong duality", || duality(&[&snub, &thomson11]));
    run(&mut results, 10, "classical model has η⋆ ≥ 1", classical_sanity);
    run(&mut results, 11, "exact certificate and replay", || {
        certificate(&snub_scenario, &snub)
    });
    run(&mut results, 12, "geometry", geometry);

    let failed: Vec<usize> = results.iter().filter(|(_, p)| !p).map(|(id, _)| *id).collect();
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
