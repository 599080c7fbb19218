//! Qubit states, measurements and the Born rule.
//!
//! Pure qubit states and rank-1 POVM directions are [`BlochVector`]s. A general
//! qubit POVM is stored in its rank-1 form `B_b = 2 p_b |y_b><y_b|`, see
//! [`Rank1Povm`]; [`decompose_povm`] produces that form from arbitrary matrices.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::RngCore;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;

/// Tolerance on the norm of unit vectors and on POVM/state invariants.
pub const INVARIANT_TOL: f64 = 1e-9;

/// Eigenvalues below this are dropped when decomposing POVM elements.
pub const EIGEN_DROP: f64 = 1e-12;

const C0: Complex64 = Complex64::new(0.0, 0.0);
const C1: Complex64 = Complex64::new(1.0, 0.0);

/// A unit vector on the Bloch sphere.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[f64; 3]", into = "[f64; 3]")]
pub struct BlochVector([f64; 3]);

impl BlochVector {
    pub const PLUS_X: BlochVector = BlochVector([1.0, 0.0, 0.0]);
    pub const PLUS_Y: BlochVector = BlochVector([0.0, 1.0, 0.0]);
    pub const PLUS_Z: BlochVector = BlochVector([0.0, 0.0, 1.0]);
    pub const MINUS_Z: BlochVector = BlochVector([0.0, 0.0, -1.0]);

    /// Builds a unit vector, normalizing inputs whose norm lies in `[0.999, 1.001]`.
    ///
    /// Anything further from the sphere is treated as a typo and rejected.
    pub fn new(x1: f64, x2: f64, x3: f64) -> Result<Self> {
        let v = [x1, x2, x3];
        if v.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidVector(format!("non-finite component in {v:?}")));
        }
        let norm = norm3(&v);
        if !(0.999..=1.001).contains(&norm) {
            return Err(Error::InvalidVector(format!(
                "norm {norm} of {v:?} is outside [0.999, 1.001]"
            )));
        }
        Ok(Self([v[0] / norm, v[1] / norm, v[2] / norm]))
    }

    /// Normalizes an arbitrary nonzero direction.
    pub fn from_direction(v: [f64; 3]) -> Result<Self> {
        let norm = norm3(&v);
        if !norm.is_finite() || norm == 0.0 {
            return Err(Error::InvalidVector(format!("cannot normalize {v:?}")));
        }
        Ok(Self([v[0] / norm, v[1] / norm, v[2] / norm]))
    }

    /// Wraps components that are already unit length (checked only in debug builds).
    pub(crate) fn from_unit(v: [f64; 3]) -> Self {
        debug_assert!((norm3(&v) - 1.0).abs() < 1e-6, "not a unit vector: {v:?}");
        Self(v)
    }

    pub fn components(&self) -> [f64; 3] {
        self.0
    }

    pub fn x(&self) -> f64 {
        self.0[0]
    }

    pub fn y(&self) -> f64 {
        self.0[1]
    }

    pub fn z(&self) -> f64 {
        self.0[2]
    }

    #[inline]
    pub fn dot(&self, other: &BlochVector) -> f64 {
        self.0[0] * other.0[0] + self.0[1] * other.0[1] + self.0[2] * other.0[2]
    }

    pub fn norm_sq(&self) -> f64 {
        self.dot(self)
    }

    #[inline]
    pub fn neg(&self) -> BlochVector {
        BlochVector([-self.0[0], -self.0[1], -self.0[2]])
    }

    /// Density matrix `(1 + x.sigma)/2` of the pure state.
    pub fn density_matrix(&self) -> HermitianMatrix {
        HermitianMatrix::qubit(0.5, [0.5 * self.0[0], 0.5 * self.0[1], 0.5 * self.0[2]])
    }

    /// Uniform sample on the sphere.
    pub fn random<R: RngCore + ?Sized>(rng: &mut R) -> BlochVector {
        rng::uniform_sphere(rng)
    }
}

impl TryFrom<[f64; 3]> for BlochVector {
    type Error = Error;
    fn try_from(v: [f64; 3]) -> Result<Self> {
        BlochVector::new(v[0], v[1], v[2])
    }
}

impl From<BlochVector> for [f64; 3] {
    fn from(v: BlochVector) -> Self {
        v.0
    }
}

pub(crate) fn norm3(v: &[f64; 3]) -> f64 {
    (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt()
}

/// One rank-1 piece `2 p |y><y|` of a POVM.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PovmElement {
    pub p: f64,
    pub y: BlochVector,
}

/// A qubit POVM in rank-1 form.
///
/// `outcome_map[i]` is the coarse outcome the `i`-th rank-1 piece belongs to;
/// for a POVM that was rank-1 to begin with it is the identity.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Rank1PovmJson", into = "Rank1PovmJson")]
pub struct Rank1Povm {
    elements: Vec<PovmElement>,
    outcome_map: Vec<usize>,
    num_outcomes: usize,
}

#[derive(Serialize, Deserialize)]
struct Rank1PovmJson {
    elements: Vec<PovmElement>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    outcome_map: Option<Vec<usize>>,
}

impl TryFrom<Rank1PovmJson> for Rank1Povm {
    type Error = Error;
    fn try_from(j: Rank1PovmJson) -> Result<Self> {
        match j.outcome_map {
            Some(map) => Rank1Povm::with_outcome_map(j.elements, map),
            None => Rank1Povm::new(j.elements),
        }
    }
}

impl From<Rank1Povm> for Rank1PovmJson {
    fn from(p: Rank1Povm) -> Self {
        let identity = p.outcome_map.iter().enumerate().all(|(i, &o)| i == o);
        Rank1PovmJson {
            outcome_map: (!identity).then_some(p.outcome_map),
            elements: p.elements,
        }
    }
}

impl Rank1Povm {
    /// Rank-1 POVM where every piece is its own outcome.
    pub fn new(elements: Vec<PovmElement>) -> Result<Self> {
        let map = (0..elements.len()).collect();
        Self::with_outcome_map(elements, map)
    }

    pub fn with_outcome_map(elements: Vec<PovmElement>, outcome_map: Vec<usize>) -> Result<Self> {
        if elements.is_empty() {
            return Err(Error::InvalidPovm("no elements".into()));
        }
        if outcome_map.len() != elements.len() {
            return Err(Error::InvalidPovm(format!(
                "outcome_map has {} entries for {} elements",
                outcome_map.len(),
                elements.len()
            )));
        }
        let mut total = 0.0;
        let mut bary = [0.0; 3];
        for (i, e) in elements.iter().enumerate() {
            if !e.p.is_finite() || e.p < -EIGEN_DROP {
                return Err(Error::InvalidPovm(format!("weight {} of element {i} is negative", e.p)));
            }
            total += e.p;
            for (k, b) in bary.iter_mut().enumerate() {
                *b += e.p * e.y.0[k];
            }
        }
        if (total - 1.0).abs() > INVARIANT_TOL {
            return Err(Error::InvalidPovm(format!("weights sum to {total}, not 1")));
        }
        if bary.iter().any(|b| b.abs() > INVARIANT_TOL) {
            return Err(Error::InvalidPovm(format!(
                "weighted directions sum to {bary:?}, not 0"
            )));
        }
        let num_outcomes = outcome_map.iter().max().map_or(0, |m| m + 1);
        let mut seen = vec![false; num_outcomes];
        for &o in &outcome_map {
            seen[o] = true;
        }
        if seen.iter().any(|s| !s) {
            return Err(Error::InvalidPovm(format!(
                "outcome labels {outcome_map:?} are not contiguous from 0"
            )));
        }
        Ok(Self {
            elements,
            outcome_map,
            num_outcomes,
        })
    }

    /// Two-outcome projective measurement along `y`: outcome 0 is `+y`.
    pub fn projective(y: BlochVector) -> Self {
        Self {
            elements: vec![PovmElement { p: 0.5, y }, PovmElement { p: 0.5, y: y.neg() }],
            outcome_map: vec![0, 1],
            num_outcomes: 2,
        }
    }

    /// Symmetric three-outcome POVM with directions at 0, 120 and 240 degrees in the XZ-plane.
    pub fn trine() -> Self {
        let elements = (0..3)
            .map(|k| {
                let theta = 2.0 * std::f64::consts::PI * k as f64 / 3.0;
                PovmElement {
                    p: 1.0 / 3.0,
                    y: BlochVector::from_unit([theta.sin(), 0.0, theta.cos()]),
                }
            })
            .collect();
        Self::new(elements).expect("trine is a valid POVM")
    }

    pub fn elements(&self) -> &[PovmElement] {
        &self.elements
    }

    pub fn outcome_map(&self) -> &[usize] {
        &self.outcome_map
    }

    /// Number of rank-1 pieces.
    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    /// Number of coarse outcomes.
    pub fn num_outcomes(&self) -> usize {
        self.num_outcomes
    }

    /// Sums per-piece values into per-outcome values.
    pub fn coarse_grain(&self, per_element: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.num_outcomes];
        for (v, &o) in per_element.iter().zip(&self.outcome_map) {
            out[o] += v;
        }
        out
    }

    /// Coarse POVM elements as 2x2 matrices.
    pub fn to_matrices(&self) -> Vec<HermitianMatrix> {
        let mut out = vec![HermitianMatrix::zeros(2); self.num_outcomes];
        for (e, &o) in self.elements.iter().zip(&self.outcome_map) {
            let r = e.y.components();
            let piece = HermitianMatrix::qubit(e.p, [e.p * r[0], e.p * r[1], e.p * r[2]]);
            out[o] = out[o].add(&piece).expect("same dimension");
        }
        out
    }

    /// Random POVM with `n >= 2` rank-1 elements, complete to machine precision.
    pub fn random<R: RngCore + ?Sized>(n: usize, rng: &mut R) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidArgument("a random POVM needs at least 2 elements".into()));
        }
        loop {
            let seeds: Vec<HermitianMatrix> = (0..n)
                .map(|_| {
                    let w = 0.1 + rng::uniform(rng);
                    let d = rng::uniform_sphere(rng).components();
                    HermitianMatrix::qubit(w, [w * d[0], w * d[1], w * d[2]])
                })
                .collect();
            let total = seeds.iter().skip(1).try_fold(seeds[0].clone(), |acc, m| acc.add(m))?;
            let (lo, _) = total.qubit_eigenvalues();
            if lo < 1e-3 {
                continue;
            }
            let inv_sqrt = total.qubit_function(|v| 1.0 / v.sqrt());
            let elements: Vec<HermitianMatrix> = seeds
                .iter()
                .map(|a| inv_sqrt.matmul(a).and_then(|m| m.matmul(&inv_sqrt)))
                .collect::<Result<_>>()?;
            let elements: Vec<HermitianMatrix> = elements.into_iter().map(|m| m.hermitized()).collect();
            return decompose_povm(&elements);
        }
    }
}

/// Dense complex Hermitian matrix, row-major.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "MatrixJson", into = "MatrixJson")]
pub struct HermitianMatrix {
    dim: usize,
    data: Vec<Complex64>,
}

#[derive(Serialize, Deserialize)]
struct MatrixJson {
    re: Vec<Vec<f64>>,
    #[serde(default)]
    im: Vec<Vec<f64>>,
}

impl TryFrom<MatrixJson> for HermitianMatrix {
    type Error = Error;
    fn try_from(j: MatrixJson) -> Result<Self> {
        HermitianMatrix::from_parts(&j.re, &j.im)
    }
}

impl From<HermitianMatrix> for MatrixJson {
    fn from(m: HermitianMatrix) -> Self {
        let d = m.dim;
        MatrixJson {
            re: (0..d).map(|i| (0..d).map(|j| m.get(i, j).re).collect()).collect(),
            im: (0..d).map(|i| (0..d).map(|j| m.get(i, j).im).collect()).collect(),
        }
    }
}

impl HermitianMatrix {
    /// Checks self-adjointness within `1e-9` and symmetrizes the input.
    pub fn new(dim: usize, data: Vec<Complex64>) -> Result<Self> {
        if dim == 0 || data.len() != dim * dim {
            return Err(Error::InvalidMatrix(format!(
                "{} entries do not form a {dim}x{dim} matrix",
                data.len()
            )));
        }
        if data.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::InvalidMatrix("non-finite entry".into()));
        }
        let m = Self { dim, data };
        for i in 0..dim {
            for j in i..dim {
                let dev = (m.get(i, j) - m.get(j, i).conj()).norm();
                if dev > INVARIANT_TOL {
                    return Err(Error::InvalidMatrix(format!(
                        "entry ({i},{j}) breaks self-adjointness by {dev}"
                    )));
                }
            }
        }
        Ok(m.hermitized())
    }

    /// Builds from real and imaginary tables; an empty `im` means a real matrix.
    pub fn from_parts(re: &[Vec<f64>], im: &[Vec<f64>]) -> Result<Self> {
        let dim = re.len();
        if re.iter().any(|r| r.len() != dim) {
            return Err(Error::InvalidMatrix("real part is not square".into()));
        }
        if !im.is_empty() && (im.len() != dim || im.iter().any(|r| r.len() != dim)) {
            return Err(Error::InvalidMatrix("imaginary part has the wrong shape".into()));
        }
        let data = (0..dim * dim)
            .map(|k| {
                let (i, j) = (k / dim, k % dim);
                let imv = if im.is_empty() { 0.0 } else { im[i][j] };
                Complex64::new(re[i][j], imv)
            })
            .collect();
        Self::new(dim, data)
    }

    pub fn zeros(dim: usize) -> Self {
        Self {
            dim,
            data: vec![C0; dim * dim],
        }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            m.data[i * dim + i] = C1;
        }
        m
    }

    /// The qubit operator `a*1 + r.sigma`.
    pub fn qubit(a: f64, r: [f64; 3]) -> Self {
        Self {
            dim: 2,
            data: vec![
                Complex64::new(a + r[2], 0.0),
                Complex64::new(r[0], -r[1]),
                Complex64::new(r[0], r[1]),
                Complex64::new(a - r[2], 0.0),
            ],
        }
    }

    /// Rank-1 projector `|v><v|` onto a (not necessarily normalized) vector.
    pub fn outer(v: &[Complex64]) -> Self {
        let dim = v.len();
        let data = (0..dim * dim).map(|k| v[k / dim] * v[k % dim].conj()).collect();
        Self { dim, data }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        self.data[i * self.dim + j]
    }

    pub fn trace(&self) -> f64 {
        (0..self.dim).map(|i| self.get(i, i).re).sum()
    }

    fn hermitized(mut self) -> Self {
        let d = self.dim;
        for i in 0..d {
            self.data[i * d + i].im = 0.0;
            for j in i + 1..d {
                let avg = (self.data[i * d + j] + self.data[j * d + i].conj()) * 0.5;
                self.data[i * d + j] = avg;
                self.data[j * d + i] = avg.conj();
            }
        }
        self
    }

    fn check_dim(&self, other: &Self) -> Result<()> {
        if self.dim != other.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: other.dim,
            });
        }
        Ok(())
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check_dim(other)?;
        Ok(Self {
            dim: self.dim,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect(),
        })
    }

    pub fn scale(&self, s: f64) -> Self {
        Self {
            dim: self.dim,
            data: self.data.iter().map(|z| z * s).collect(),
        }
    }

    /// Plain matrix product; the result is only Hermitian when the factors commute.
    pub(crate) fn matmul(&self, other: &Self) -> Result<Self> {
        self.check_dim(other)?;
        let d = self.dim;
        let mut data = vec![C0; d * d];
        for i in 0..d {
            for k in 0..d {
                let a = self.data[i * d + k];
                if a == C0 {
                    continue;
                }
                for j in 0..d {
                    data[i * d + j] += a * other.data[k * d + j];
                }
            }
        }
        Ok(Self { dim: d, data })
    }

    /// `Re tr(self * other)`.
    pub fn trace_product(&self, other: &Self) -> Result<f64> {
        self.check_dim(other)?;
        let d = self.dim;
        let mut acc = 0.0;
        for i in 0..d {
            for j in 0..d {
                acc += (self.data[i * d + j] * other.data[j * d + i]).re;
            }
        }
        Ok(acc)
    }

    /// Kronecker product `self (x) other`.
    pub fn kron(&self, other: &Self) -> Self {
        let (da, db) = (self.dim, other.dim);
        let d = da * db;
        let mut data = vec![C0; d * d];
        for i in 0..da {
            for j in 0..da {
                let a = self.get(i, j);
                for k in 0..db {
                    for l in 0..db {
                        data[(i * db + k) * d + j * db + l] = a * other.get(k, l);
                    }
                }
            }
        }
        Self { dim: d, data }
    }

    /// Eigenvalues in ascending order.
    pub fn eigenvalues(&self) -> Vec<f64> {
        let d = self.dim;
        let m = DMatrix::from_fn(d, d, |i, j| self.get(i, j));
        let mut ev: Vec<f64> = m.symmetric_eigenvalues().iter().copied().collect();
        ev.sort_by(f64::total_cmp);
        ev
    }

    pub fn min_eigenvalue(&self) -> f64 {
        if self.dim == 2 {
            return self.qubit_eigenvalues().0;
        }
        self.eigenvalues()[0]
    }

    pub fn is_psd(&self, tol: f64) -> bool {
        self.min_eigenvalue() >= -tol
    }

    /// Checks PSD and unit trace within `1e-9`.
    pub fn validate_state(&self) -> Result<()> {
        let tr = self.trace();
        if (tr - 1.0).abs() > INVARIANT_TOL {
            return Err(Error::InvalidState(format!("trace {tr} is not 1")));
        }
        let lo = self.min_eigenvalue();
        if lo < -INVARIANT_TOL {
            return Err(Error::InvalidState(format!("negative eigenvalue {lo}")));
        }
        Ok(())
    }

    fn expect_qubit(&self) {
        assert_eq!(self.dim, 2, "qubit operation on a {}x{} matrix", self.dim, self.dim);
    }

    /// `(a, r)` with `self = a*1 + r.sigma`. Panics unless 2x2.
    pub fn qubit_parts(&self) -> (f64, [f64; 3]) {
        self.expect_qubit();
        let a = 0.5 * (self.get(0, 0).re + self.get(1, 1).re);
        let off = self.get(0, 1);
        (a, [off.re, -off.im, 0.5 * (self.get(0, 0).re - self.get(1, 1).re)])
    }

    /// Closed-form eigenvalues `(a - |r|, a + |r|)` of a 2x2 matrix.
    pub fn qubit_eigenvalues(&self) -> (f64, f64) {
        let (a, r) = self.qubit_parts();
        let n = norm3(&r);
        (a - n, a + n)
    }

    /// Closed-form eigendecomposition of a 2x2 matrix as `(eigenvalue, Bloch direction)`
    /// pairs, larger eigenvalue first. A multiple of the identity yields `+z, -z`.
    pub fn qubit_eigen(&self) -> [(f64, BlochVector); 2] {
        let (a, r) = self.qubit_parts();
        let n = norm3(&r);
        let dir = if n > 1e-15 {
            BlochVector([r[0] / n, r[1] / n, r[2] / n])
        } else {
            BlochVector::PLUS_Z
        };
        [(a + n, dir), (a - n, dir.neg())]
    }

    /// Applies `f` to the eigenvalues of a 2x2 matrix.
    pub fn qubit_function(&self, f: impl Fn(f64) -> f64) -> Self {
        let [(hi, d), (lo, _)] = self.qubit_eigen();
        let (fp, fm) = (f(hi), f(lo));
        let r = d.components();
        let a = 0.5 * (fp + fm);
        let s = 0.5 * (fp - fm);
        Self::qubit(a, [s * r[0], s * r[1], s * r[2]])
    }

    /// Bloch vector `tr(rho sigma)` of a 2x2 density matrix; its norm is at most 1.
    pub fn bloch(&self) -> [f64; 3] {
        let (_, r) = self.qubit_parts();
        [2.0 * r[0], 2.0 * r[1], 2.0 * r[2]]
    }
}

/// `p_b (1 + x.y_b)`: probability of rank-1 piece `b` on the pure state `x`.
pub fn born_probability(state: &BlochVector, povm: &Rank1Povm, b: usize) -> Result<f64> {
    let e = povm.elements.get(b).ok_or(Error::IndexOutOfRange {
        index: b,
        len: povm.len(),
    })?;
    Ok(e.p * (1.0 + state.dot(&e.y)))
}

/// Born probabilities of every rank-1 piece.
pub fn born_probabilities(state: &BlochVector, povm: &Rank1Povm) -> Vec<f64> {
    povm.elements.iter().map(|e| e.p * (1.0 + state.dot(&e.y))).collect()
}

/// Born probabilities of the coarse outcomes.
pub fn coarse_born_probabilities(state: &BlochVector, povm: &Rank1Povm) -> Vec<f64> {
    povm.coarse_grain(&born_probabilities(state, povm))
}

/// `tr(rho B)`.
pub fn born_probability_matrix(state: &HermitianMatrix, element: &HermitianMatrix) -> Result<f64> {
    state.trace_product(element)
}

/// Splits every element into rank-1 pieces `2 p |y><y|`, tagging each piece with its parent.
pub fn decompose_povm(elements: &[HermitianMatrix]) -> Result<Rank1Povm> {
    if elements.is_empty() {
        return Err(Error::InvalidPovm("no elements".into()));
    }
    let mut total = HermitianMatrix::zeros(2);
    for (i, m) in elements.iter().enumerate() {
        if m.dim() != 2 {
            return Err(Error::DimensionMismatch {
                expected: 2,
                found: m.dim(),
            });
        }
        let lo = m.min_eigenvalue();
        if lo < -INVARIANT_TOL {
            return Err(Error::InvalidPovm(format!("element {i} has negative eigenvalue {lo}")));
        }
        total = total.add(m)?;
    }
    let id = HermitianMatrix::identity(2);
    let dev = total
        .data
        .iter()
        .zip(&id.data)
        .map(|(a, b)| (a - b).norm())
        .fold(0.0, f64::max);
    if dev > INVARIANT_TOL {
        return Err(Error::InvalidPovm(format!(
            "elements sum to identity only within {dev}"
        )));
    }
    let mut pieces = Vec::new();
    let mut map = Vec::new();
    for (i, m) in elements.iter().enumerate() {
        for (mu, dir) in m.qubit_eigen() {
            if mu >= EIGEN_DROP {
                pieces.push(PovmElement { p: 0.5 * mu, y: dir });
                map.push(i);
            }
        }
    }
    Rank1Povm::with_outcome_map(pieces, map)
}

/// A `dA (x) 2` density matrix; Bob holds the qubit (the second factor).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "TwoPartyJson", into = "TwoPartyJson")]
pub struct TwoPartyState {
    dim_a: usize,
    joint: HermitianMatrix,
}

#[derive(Serialize, Deserialize)]
struct TwoPartyJson {
    #[serde(rename = "dA")]
    dim_a: usize,
    joint: HermitianMatrix,
}

impl TryFrom<TwoPartyJson> for TwoPartyState {
    type Error = Error;
    fn try_from(j: TwoPartyJson) -> Result<Self> {
        TwoPartyState::new(j.dim_a, j.joint)
    }
}

impl From<TwoPartyState> for TwoPartyJson {
    fn from(s: TwoPartyState) -> Self {
        TwoPartyJson {
            dim_a: s.dim_a,
            joint: s.joint,
        }
    }
}

/// Largest supported dimension on Alice's side.
pub const MAX_DIM_A: usize = 8;

impl TwoPartyState {
    pub fn new(dim_a: usize, joint: HermitianMatrix) -> Result<Self> {
        if !(2..=MAX_DIM_A).contains(&dim_a) {
            return Err(Error::InvalidState(format!(
                "Alice dimension {dim_a} outside 2..={MAX_DIM_A}"
            )));
        }
        if joint.dim() != 2 * dim_a {
            return Err(Error::DimensionMismatch {
                expected: 2 * dim_a,
                found: joint.dim(),
            });
        }
        joint.validate_state()?;
        Ok(Self { dim_a, joint })
    }

    /// Pure state from amplitudes indexed `a * 2 + b`; normalized on construction.
    pub fn pure(dim_a: usize, amplitudes: &[Complex64]) -> Result<Self> {
        let norm: f64 = amplitudes.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if norm == 0.0 || !norm.is_finite() {
            return Err(Error::InvalidState("zero state vector".into()));
        }
        let v: Vec<Complex64> = amplitudes.iter().map(|z| z / norm).collect();
        Self::new(dim_a, HermitianMatrix::outer(&v))
    }

    /// `(|01> - |10>)/sqrt 2`.
    pub fn singlet() -> Self {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let v = [C0, Complex64::new(s, 0.0), Complex64::new(-s, 0.0), C0];
        Self::pure(2, &v).expect("singlet is valid")
    }

    pub fn product(rho_a: &HermitianMatrix, rho_b: &HermitianMatrix) -> Result<Self> {
        if rho_b.dim() != 2 {
            return Err(Error::DimensionMismatch {
                expected: 2,
                found: rho_b.dim(),
            });
        }
        Self::new(rho_a.dim(), rho_a.kron(rho_b))
    }

    pub fn dim_a(&self) -> usize {
        self.dim_a
    }

    pub fn joint(&self) -> &HermitianMatrix {
        &self.joint
    }
}

/// Bob's qubit after Alice's outcome.
#[derive(Clone, Debug, PartialEq)]
pub enum BobQubit {
    Pure(BlochVector),
    Mixed(HermitianMatrix),
}

impl BobQubit {
    pub fn bloch(&self) -> [f64; 3] {
        match self {
            BobQubit::Pure(v) => v.components(),
            BobQubit::Mixed(m) => m.bloch(),
        }
    }

    pub fn matrix(&self) -> HermitianMatrix {
        match self {
            BobQubit::Pure(v) => v.density_matrix(),
            BobQubit::Mixed(m) => m.clone(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConditionalBobState {
    pub probability: f64,
    /// `None` when the outcome has probability below `1e-12`.
    pub qubit: Option<BobQubit>,
}

impl ConditionalBobState {
    pub fn is_degenerate(&self) -> bool {
        self.qubit.is_none()
    }
}

/// Outcome probability `tr((A (x) 1) rho)` and Bob's normalized conditional qubit.
pub fn conditional_bob_state(state: &TwoPartyState, alice_element: &HermitianMatrix) -> Result<ConditionalBobState> {
    let da = state.dim_a;
    if alice_element.dim() != da {
        return Err(Error::DimensionMismatch {
            expected: da,
            found: alice_element.dim(),
        });
    }
    let d = 2 * da;
    let rho = &state.joint;
    // (rho_B)_{jl} = sum_{i,m} A_{im} rho_{(m,j),(i,l)}
    let mut bob = [C0; 4];
    for i in 0..da {
        for m in 0..da {
            let a = alice_element.get(i, m);
            if a == C0 {
                continue;
            }
            for j in 0..2 {
                for l in 0..2 {
                    bob[j * 2 + l] += a * rho.data[(m * 2 + j) * d + i * 2 + l];
                }
            }
        }
    }
    let probability = bob[0].re + bob[3].re;
    if probability < 1e-12 {
        return Ok(ConditionalBobState {
            probability: probability.max(0.0),
            qubit: None,
        });
    }
    let m = HermitianMatrix {
        dim: 2,
        data: bob.iter().map(|z| z / probability).collect(),
    }
    .hermitized();
    let r = m.bloch();
    let n = norm3(&r);
    let qubit = if n >= 1.0 - INVARIANT_TOL {
        BobQubit::Pure(BlochVector([r[0] / n, r[1] / n, r[2] / n]))
    } else {
        BobQubit::Mixed(m)
    };
    Ok(ConditionalBobState {
        probability,
        qubit: Some(qubit),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn z(v: f64) -> BlochVector {
        BlochVector::new(0.0, 0.0, v).unwrap()
    }

    #[test]
    fn constructor_normalizes_near_unit_and_rejects_far() {
        let v = BlochVector::new(0.0, 0.0, 1.0005).unwrap();
        assert_eq!(v.z(), 1.0);
        assert!(BlochVector::new(0.0, 0.0, 1.01).is_err());
        assert!(BlochVector::new(0.5, 0.0, 0.0).is_err());
        assert!(BlochVector::new(f64::NAN, 0.0, 1.0).is_err());
    }

    #[test]
    fn born_examples() {
        let proj = Rank1Povm::projective(z(1.0));
        assert_eq!(born_probability(&z(1.0), &proj, 0).unwrap(), 1.0);
        assert_eq!(born_probability(&BlochVector::PLUS_X, &proj, 0).unwrap(), 0.5);
        assert!(matches!(
            born_probability(&z(1.0), &proj, 2),
            Err(Error::IndexOutOfRange { index: 2, len: 2 })
        ));

        // hand evaluation: (1/3)(1 + cos 0), (1/3)(1 + cos 120deg), (1/3)(1 + cos 240deg)
        let p = born_probabilities(&z(1.0), &Rank1Povm::trine());
        let want = [2.0 / 3.0, 1.0 / 6.0, 1.0 / 6.0];
        for (a, b) in p.iter().zip(want) {
            assert!((a - b).abs() < 1e-15, "{p:?}");
        }
    }

    #[test]
    fn born_matrix_examples() {
        let mixed = HermitianMatrix::identity(2).scale(0.5);
        let b = HermitianMatrix::qubit(0.3, [0.1, -0.2, 0.05]);
        assert!((born_probability_matrix(&mixed, &b).unwrap() - 0.3).abs() < 1e-15);
        let zero = z(1.0).density_matrix();
        assert_eq!(born_probability_matrix(&zero, &zero).unwrap(), 1.0);
        assert!(born_probability_matrix(&zero, &HermitianMatrix::identity(3)).is_err());
    }

    #[test]
    fn decompose_projective() {
        let up = z(1.0).density_matrix();
        let down = z(-1.0).density_matrix();
        let povm = decompose_povm(&[up, down]).unwrap();
        assert_eq!(povm.len(), 2);
        assert_eq!(povm.outcome_map(), &[0, 1]);
        assert!((povm.elements()[0].p - 0.5).abs() < 1e-15);
        assert_eq!(povm.elements()[0].y.components(), [0.0, 0.0, 1.0]);
        assert_eq!(povm.elements()[1].y.components(), [0.0, 0.0, -1.0]);
    }

    #[test]
    fn decompose_trine_preserves_directions() {
        let trine = Rank1Povm::trine();
        let povm = decompose_povm(&trine.to_matrices()).unwrap();
        assert_eq!(povm.len(), 3);
        for (a, b) in povm.elements().iter().zip(trine.elements()) {
            assert!((a.p - 1.0 / 3.0).abs() < 1e-12);
            assert!(a.y.dot(&b.y) > 1.0 - 1e-12);
        }
    }

    #[test]
    fn decompose_trivial_povm() {
        let half = HermitianMatrix::identity(2).scale(0.5);
        let povm = decompose_povm(&[half.clone(), half]).unwrap();
        assert_eq!(povm.len(), 4);
        assert_eq!(povm.outcome_map(), &[0, 0, 1, 1]);
        for e in povm.elements() {
            assert!((e.p - 0.25).abs() < 1e-15);
        }
        let e = povm.elements();
        assert_eq!(e[0].y.dot(&e[1].y), -1.0);
        assert_eq!(e[2].y.dot(&e[3].y), -1.0);
    }

    #[test]
    fn decompose_rejects_bad_input() {
        let neg = HermitianMatrix::qubit(0.5, [0.0, 0.0, 0.7]);
        let rest = HermitianMatrix::qubit(0.5, [0.0, 0.0, -0.7]);
        assert!(matches!(decompose_povm(&[neg, rest]), Err(Error::InvalidPovm(_))));
        let half = HermitianMatrix::identity(2).scale(0.5);
        assert!(matches!(decompose_povm(&[half]), Err(Error::InvalidPovm(_))));
    }

    #[test]
    fn rank1_povm_rejects_broken_invariants() {
        let e = |p, v: [f64; 3]| PovmElement {
            p,
            y: BlochVector::from_direction(v).unwrap(),
        };
        assert!(Rank1Povm::new(vec![e(0.5, [0., 0., 1.]), e(0.4, [0., 0., -1.])]).is_err());
        assert!(Rank1Povm::new(vec![e(0.5, [0., 0., 1.]), e(0.5, [1., 0., 0.])]).is_err());
        assert!(Rank1Povm::with_outcome_map(vec![e(0.5, [0., 0., 1.]), e(0.5, [0., 0., -1.])], vec![0, 2]).is_err());
    }

    #[test]
    fn povm_json_shape() {
        let povm = Rank1Povm::projective(z(1.0));
        let s = serde_json::to_string(&povm).unwrap();
        assert_eq!(
            s,
            r#"{"elements":[{"p":0.5,"y":[0.0,0.0,1.0]},{"p":0.5,"y":[-0.0,-0.0,-1.0]}]}"#
        );
        let back: Rank1Povm = serde_json::from_str(&s).unwrap();
        assert_eq!(back, povm);
        let m: HermitianMatrix = serde_json::from_str(r#"{"re":[[1,0],[0,0]],"im":[[0,0],[0,0]]}"#).unwrap();
        assert_eq!(m, z(1.0).density_matrix());
    }

    #[test]
    fn singlet_conditional_state() {
        let s = TwoPartyState::singlet();
        let c = conditional_bob_state(&s, &z(1.0).density_matrix()).unwrap();
        assert!((c.probability - 0.5).abs() < 1e-15);
        match c.qubit.unwrap() {
            BobQubit::Pure(v) => assert!(v.dot(&z(-1.0)) > 1.0 - 1e-12),
            other => panic!("expected pure state, got {other:?}"),
        }
    }

    #[test]
    fn product_state_conditional_is_marginal() {
        let rho_a = HermitianMatrix::qubit(0.5, [0.1, 0.2, -0.3]);
        let rho_b = HermitianMatrix::qubit(0.5, [-0.2, 0.1, 0.25]);
        let s = TwoPartyState::product(&rho_a, &rho_b).unwrap();
        let a = BlochVector::new(0.6, 0.0, 0.8).unwrap().density_matrix();
        let c = conditional_bob_state(&s, &a).unwrap();
        let got = c.qubit.unwrap().matrix();
        for i in 0..2 {
            for j in 0..2 {
                assert!((got.get(i, j) - rho_b.get(i, j)).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn conditional_state_matches_dense_partial_trace() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..50 {
            let amps: Vec<Complex64> = (0..4)
                .map(|_| Complex64::new(rng::standard_normal(&mut rng), rng::standard_normal(&mut rng)))
                .collect();
            let state = TwoPartyState::pure(2, &amps).unwrap();
            let proj = BlochVector::random(&mut rng).density_matrix();
            let c = conditional_bob_state(&state, &proj).unwrap();

            // oracle: explicit (A (x) 1) rho, then trace out A by index sums
            let big = proj.kron(&HermitianMatrix::identity(2));
            let prod = big.matmul(state.joint()).unwrap();
            let mut rb = [C0; 4];
            for i in 0..2 {
                for j in 0..2 {
                    for l in 0..2 {
                        rb[j * 2 + l] += prod.get(i * 2 + j, i * 2 + l);
                    }
                }
            }
            let p = rb[0].re + rb[3].re;
            assert!((p - c.probability).abs() < 1e-12);
            let m = c.qubit.unwrap().matrix();
            for k in 0..4 {
                assert!((rb[k] / p - m.data[k]).norm() < 1e-9);
            }
        }
    }

    #[test]
    fn conditional_state_degenerate_and_mismatch() {
        let s = TwoPartyState::product(&z(1.0).density_matrix(), &z(1.0).density_matrix()).unwrap();
        let c = conditional_bob_state(&s, &z(-1.0).density_matrix()).unwrap();
        assert!(c.is_degenerate());
        assert!(conditional_bob_state(&s, &HermitianMatrix::identity(3)).is_err());
    }

    #[test]
    fn two_party_state_guards() {
        assert!(TwoPartyState::new(1, HermitianMatrix::identity(2).scale(0.5)).is_err());
        assert!(TwoPartyState::new(9, HermitianMatrix::identity(18).scale(1.0 / 18.0)).is_err());
        assert!(TwoPartyState::new(2, HermitianMatrix::identity(4)).is_err());
        assert!(TwoPartyState::new(3, HermitianMatrix::identity(6).scale(1.0 / 6.0)).is_ok());
    }

    #[test]
    fn random_povm_is_complete_to_machine_precision() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for n in 2..=6 {
            let povm = Rank1Povm::random(n, &mut rng).unwrap();
            assert_eq!(povm.len(), n);
            let sum: f64 = povm.elements().iter().map(|e| e.p).sum();
            assert!((sum - 1.0).abs() < 1e-14);
            let mut bary = [0.0; 3];
            for e in povm.elements() {
                for k in 0..3 {
                    bary[k] += e.p * e.y.components()[k];
                }
            }
            assert!(bary.iter().all(|b| b.abs() < 1e-14), "{bary:?}");
        }
    }
}
