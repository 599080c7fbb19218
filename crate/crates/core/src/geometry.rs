//! Preparation and measurement directions: octahedron, snub cube and Thomson configurations.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::qstate::{BlochVector, Rank1Povm};
use rand::RngCore;

use crate::rng::{round_rng, standard_normal, uniform_sphere};

/// Named list of unit vectors.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DirectionSet {
    pub label: String,
    pub vectors: Vec<BlochVector>,
}

impl DirectionSet {
    pub fn new(label: impl Into<String>, vectors: Vec<BlochVector>) -> Self {
        Self {
            label: label.into(),
            vectors,
        }
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn barycenter(&self) -> [f64; 3] {
        let mut s = [0.0; 3];
        for v in &self.vectors {
            for (a, b) in s.iter_mut().zip(v.components()) {
                *a += b;
            }
        }
        s.map(|a| a / self.vectors.len().max(1) as f64)
    }

    /// Dot products `v_i·v_j` for `i < j`, sorted ascending.
    pub fn sorted_pairwise_dots(&self) -> Vec<f64> {
        let mut d = Vec::new();
        for (i, a) in self.vectors.iter().enumerate() {
            for b in &self.vectors[i + 1..] {
                d.push(a.dot(b));
            }
        }
        d.sort_by(f64::total_cmp);
        d
    }

    pub fn rotated(&self, rotation: &[[f64; 3]; 3]) -> Self {
        Self {
            label: self.label.clone(),
            vectors: self.vectors.iter().map(|v| rotate(rotation, v)).collect(),
        }
    }
}

/// `±e1, ±e2, ±e3`: eigenstates of the three Pauli operators.
pub fn octahedron() -> DirectionSet {
    let v = [
        [1.0, 0.0, 0.0],
        [-1.0, 0.0, 0.0],
        [0.0, 1.0, 0.0],
        [0.0, -1.0, 0.0],
        [0.0, 0.0, 1.0],
        [0.0, 0.0, -1.0],
    ];
    DirectionSet::new("octahedron", v.into_iter().map(BlochVector::from_unit).collect())
}

/// Real root of `x³ - x² - x - 1` and the Newton iterations used from `x₀ = 2`.
pub fn tribonacci_newton() -> (f64, usize) {
    let mut x: f64 = 2.0;
    for it in 1..=50 {
        let f = ((x - 1.0) * x - 1.0) * x - 1.0;
        let df = (3.0 * x - 2.0) * x - 1.0;
        let next = x - f / df;
        if (next - x).abs() <= 4.0 * f64::EPSILON * x {
            return (next, it);
        }
        x = next;
    }
    (x, 50)
}

pub fn tribonacci() -> f64 {
    tribonacci_newton().0
}

/// Rotation by `angle` radians about the z axis.
pub fn rotation_z(angle: f64) -> [[f64; 3]; 3] {
    let (s, c) = angle.sin_cos();
    [[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]]
}

/// Haar-random rotation from a normalized Gaussian quaternion.
pub fn random_rotation<R: RngCore + ?Sized>(rng: &mut R) -> [[f64; 3]; 3] {
    let mut q = [0.0; 4];
    q.iter_mut().for_each(|v| *v = standard_normal(rng));
    let n = q.iter().map(|v| v * v).sum::<f64>().sqrt();
    let [w, x, y, z] = q.map(|v| v / n);
    [
        [
            1.0 - 2.0 * (y * y + z * z),
            2.0 * (x * y - w * z),
            2.0 * (x * z + w * y),
        ],
        [
            2.0 * (x * y + w * z),
            1.0 - 2.0 * (x * x + z * z),
            2.0 * (y * z - w * x),
        ],
        [
            2.0 * (x * z - w * y),
            2.0 * (y * z + w * x),
            1.0 - 2.0 * (x * x + y * y),
        ],
    ]
}

pub fn rotate(m: &[[f64; 3]; 3], v: &BlochVector) -> BlochVector {
    let v = v.components();
    let r = m.map(|row| row[0] * v[0] + row[1] * v[1] + row[2] * v[2]);
    BlochVector::from_direction(r).expect("rotations preserve length")
}

/// Snub-cube vertices before the global rotation, normalized.
///
/// Even permutations of `(±1, ±1/τ, ±τ)` with an even number of plus signs, then odd
/// permutations with an odd number. Cyclic (even) permutations come first.
pub fn snub_cube_unrotated() -> DirectionSet {
    let t = tribonacci();
    let base = [1.0, 1.0 / t, t];
    let even: [[usize; 3]; 3] = [[0, 1, 2], [1, 2, 0], [2, 0, 1]];
    let odd: [[usize; 3]; 3] = [[0, 2, 1], [2, 1, 0], [1, 0, 2]];
    let mut vectors = Vec::with_capacity(24);
    for (perms, parity) in [(even, 0), (odd, 1)] {
        for p in perms {
            for signs in 0..8u32 {
                let plus = signs.count_ones() as usize;
                if plus % 2 != parity {
                    continue;
                }
                let v: [f64; 3] = std::array::from_fn(|k| {
                    if signs >> (2 - k) & 1 == 1 {
                        base[p[k]]
                    } else {
                        -base[p[k]]
                    }
                });
                vectors.push(BlochVector::from_direction(v).expect("nonzero vertex"));
            }
        }
    }
    DirectionSet::new("snub-cube-unrotated", vectors)
}

/// The 24 snub-cube directions rotated by +60° about z, the Bloch action of
/// `U = |0⟩⟨0| + e^{iπ/3}|1⟩⟨1|` (azimuth `φ -> φ + π/3`).
pub fn snub_cube() -> DirectionSet {
    let mut s = snub_cube_unrotated().rotated(&rotation_z(std::f64::consts::FRAC_PI_3));
    s.label = "snub-cube".into();
    s
}

/// Outcome of a Thomson minimization.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ThomsonResult {
    pub set: DirectionSet,
    pub energy: f64,
    /// Norm of the tangential gradient at the returned configuration.
    pub gradient_norm: f64,
    pub converged: bool,
    pub iterations: usize,
    pub restart: usize,
}

pub const THOMSON_GRADIENT_TOL: f64 = 1e-10;
const THOMSON_MAX_ITERATIONS: usize = 200_000;

/// Coulomb energy `Σ_{i<j} 1/|r_i - r_j|`.
pub fn thomson_energy(points: &[[f64; 3]]) -> f64 {
    let mut e = 0.0;
    for i in 0..points.len() {
        for j in i + 1..points.len() {
            e += 1.0 / dist(&points[i], &points[j]);
        }
    }
    e
}

fn dist(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt()
}

/// Energy gradient projected onto each point's tangent plane.
fn tangential_gradient(points: &[[f64; 3]]) -> Vec<[f64; 3]> {
    let n = points.len();
    let mut g = vec![[0.0; 3]; n];
    for i in 0..n {
        for j in i + 1..n {
            let d = dist(&points[i], &points[j]);
            let f = 1.0 / (d * d * d);
            for k in 0..3 {
                let comp = (points[i][k] - points[j][k]) * f;
                g[i][k] -= comp;
                g[j][k] += comp;
            }
        }
    }
    for (gi, p) in g.iter_mut().zip(points) {
        let radial = gi[0] * p[0] + gi[1] * p[1] + gi[2] * p[2];
        for k in 0..3 {
            gi[k] -= radial * p[k];
        }
    }
    g
}

fn normalize(v: [f64; 3]) -> [f64; 3] {
    let n = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
    v.map(|a| a / n)
}

struct Descent {
    points: Vec<[f64; 3]>,
    energy: f64,
    gradient_norm: f64,
    converged: bool,
    iterations: usize,
}

/// Projected gradient descent with a backtracking step; energy never increases.
fn descend(mut points: Vec<[f64; 3]>, max_iterations: usize, mut trace: Option<&mut Vec<f64>>) -> Descent {
    let mut energy = thomson_energy(&points);
    let mut step = 0.1 / points.len() as f64;
    let mut iterations = 0;
    loop {
        let g = tangential_gradient(&points);
        let gradient_norm = g.iter().flatten().map(|v| v * v).sum::<f64>().sqrt();
        if let Some(t) = trace.as_deref_mut() {
            t.push(energy);
        }
        if gradient_norm <= THOMSON_GRADIENT_TOL || iterations >= max_iterations {
            return Descent {
                points,
                energy,
                gradient_norm,
                converged: gradient_norm <= THOMSON_GRADIENT_TOL,
                iterations,
            };
        }
        loop {
            let trial: Vec<[f64; 3]> = points
                .iter()
                .zip(&g)
                .map(|(p, gi)| normalize([p[0] - step * gi[0], p[1] - step * gi[1], p[2] - step * gi[2]]))
                .collect();
            let e = thomson_energy(&trial);
            // Near a minimum the energy change drops below rounding; a step that leaves the
            // energy unchanged to within a few ulps is still taken if it shrinks the gradient.
            let flat = e <= energy + 8.0 * f64::EPSILON * energy
                && tangential_gradient(&trial)
                    .iter()
                    .flatten()
                    .map(|v| v * v)
                    .sum::<f64>()
                    .sqrt()
                    < gradient_norm;
            if e <= energy || flat {
                points = trial;
                energy = energy.min(e);
                step *= 1.5;
                break;
            }
            step *= 0.5;
            if step < 1e-300 {
                return Descent {
                    points,
                    energy,
                    gradient_norm,
                    converged: false,
                    iterations,
                };
            }
        }
        iterations += 1;
    }
}

/// Lowest-energy configuration over `restarts` seeded random starts.
///
/// Restarts run in parallel; each one draws from its own stream, so the result depends only
/// on `(n, restarts, seed)`.
pub fn thomson(n: usize, restarts: usize, seed: u64) -> Result<ThomsonResult> {
    if !(2..=64).contains(&n) {
        return Err(Error::InvalidArgument(format!(
            "Thomson problem needs 2 <= N <= 64, got {n}"
        )));
    }
    if restarts == 0 {
        return Err(Error::InvalidArgument("at least one restart is required".into()));
    }
    let runs: Vec<Descent> = (0..restarts)
        .into_par_iter()
        .map(|r| {
            let mut rng = round_rng(seed, r as u64);
            let start = (0..n).map(|_| uniform_sphere(&mut rng).components()).collect();
            descend(start, THOMSON_MAX_ITERATIONS, None)
        })
        .collect();
    let (restart, best) = runs
        .into_iter()
        .enumerate()
        .min_by(|a, b| a.1.energy.total_cmp(&b.1.energy).then(a.0.cmp(&b.0)))
        .expect("restarts > 0");
    let vectors = best.points.into_iter().map(BlochVector::from_unit).collect();
    Ok(ThomsonResult {
        set: DirectionSet::new(format!("thomson-{n}"), vectors),
        energy: best.energy,
        gradient_norm: best.gradient_norm,
        converged: best.converged,
        iterations: best.iterations,
        restart,
    })
}

pub const THOMSON11_SEED: u64 = 0xC0FFEE;
pub const THOMSON11_RESTARTS: usize = 20;

/// Eleven-point Thomson configuration as returned by the minimizer, without any rotation.
///
/// The critical visibility of the octahedron scenario built on it depends on orientation;
/// no orientation is singled out, so the minimizer output is used as is.
pub fn thomson_eleven() -> Result<DirectionSet> {
    let t = thomson(11, THOMSON11_RESTARTS, THOMSON11_SEED)?;
    Ok(DirectionSet::new("thomson-11", t.set.vectors))
}

/// Pure states `(𝟙 + x·σ)/2` and two-outcome projective measurements `{(½, +y), (½, -y)}`.
pub fn build_projective_scenario(
    states: &DirectionSet,
    directions: &DirectionSet,
) -> Result<(Vec<BlochVector>, Vec<Rank1Povm>)> {
    if states.is_empty() || directions.is_empty() {
        return Err(Error::InvalidArgument(
            "scenario needs at least one state and one direction".into(),
        ));
    }
    Ok((
        states.vectors.clone(),
        directions.vectors.iter().map(|y| Rank1Povm::projective(*y)).collect(),
    ))
}
