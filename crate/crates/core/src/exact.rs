//! Exact rational certification of dimension-witness violations.
//!
//! Float states, measurements and witness coefficients are truncated to fractions with a
//! fixed denominator, repaired into valid objects with exact PSD checks, and the violation
//! `Σγp > C_d` is then decided in rational arithmetic only.

use std::fmt;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::qstate::HermitianMatrix;
use crate::witness::{encoding_count, Convention, Table3, Witness, ENUMERATION_LIMIT};

pub type Rational = BigRational;

pub const DEFAULT_DENOMINATOR: u64 = 1_000_000;
/// Deepest dyadic mixing step `1 - 2^-k` tried by the rationalizers.
pub const MAX_DYADIC_EXPONENT: u32 = 40;

/// Exact value of a finite float.
pub fn rational_from_f64(v: f64) -> Result<Rational> {
    Rational::from_float(v).ok_or_else(|| Error::Rationalization(format!("{v} is not finite")))
}

/// `trunc(v·D)/D`, rounding toward zero on the exact value of `v`.
pub fn truncate(v: f64, denominator: u64) -> Result<Rational> {
    if denominator == 0 {
        return Err(Error::InvalidArgument("denominator must be positive".into()));
    }
    let d = BigInt::from(denominator);
    let scaled = rational_from_f64(v)? * Rational::from_integer(d.clone());
    Ok(Rational::new(scaled.trunc().to_integer(), d))
}

pub fn to_f64(q: &Rational) -> f64 {
    q.to_f64().unwrap_or(f64::NAN)
}

/// Decimal rendering with `digits` places, for messages.
pub fn to_decimal(q: &Rational, digits: usize) -> String {
    let scale = BigInt::from(10u32).pow(digits as u32);
    let scaled = (q * Rational::from_integer(scale.clone())).round().to_integer();
    let neg = scaled.is_negative();
    let (int, frac) = scaled.abs().div_rem(&scale);
    let frac = format!("{:0>width$}", frac.to_string(), width = digits);
    format!("{}{}.{}", if neg { "-" } else { "" }, int, frac)
}

/// Serialized as `{"num": "...", "den": "..."}` with decimal strings.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
struct QJson {
    num: String,
    den: String,
}

impl From<&Rational> for QJson {
    fn from(q: &Rational) -> Self {
        QJson {
            num: q.numer().to_string(),
            den: q.denom().to_string(),
        }
    }
}

impl TryFrom<&QJson> for Rational {
    type Error = Error;

    fn try_from(j: &QJson) -> Result<Rational> {
        let parse = |s: &str| {
            s.parse::<BigInt>()
                .map_err(|_| Error::CertificateInvalid(format!("'{s}' is not a decimal integer")))
        };
        let (n, d) = (parse(&j.num)?, parse(&j.den)?);
        if d.is_zero() {
            return Err(Error::CertificateInvalid("zero denominator".into()));
        }
        let q = Rational::new(n.clone(), d.clone());
        if q.numer() != &n || q.denom() != &d {
            return Err(Error::CertificateInvalid(format!(
                "{}/{} is not in lowest terms",
                j.num, j.den
            )));
        }
        Ok(q)
    }
}

/// 2x2 Hermitian matrix with rational entries; `a21 = conj(a12)` is implied.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RationalHermitian2 {
    pub a11: Rational,
    pub a22: Rational,
    pub re12: Rational,
    pub im12: Rational,
}

impl RationalHermitian2 {
    pub fn new(a11: Rational, a22: Rational, re12: Rational, im12: Rational) -> Self {
        Self { a11, a22, re12, im12 }
    }

    pub fn zero() -> Self {
        Self::scaled_identity(Rational::zero())
    }

    pub fn identity() -> Self {
        Self::scaled_identity(Rational::one())
    }

    pub fn scaled_identity(s: Rational) -> Self {
        Self {
            a11: s.clone(),
            a22: s,
            re12: Rational::zero(),
            im12: Rational::zero(),
        }
    }

    /// Truncates every entry to denominator `D`, then takes `(M + M†)/2`.
    pub fn truncate_hermitize(m: &HermitianMatrix, denominator: u64) -> Result<Self> {
        if m.dim() != 2 {
            return Err(Error::DimensionMismatch {
                expected: 2,
                found: m.dim(),
            });
        }
        let t = |v: f64| truncate(v, denominator);
        let two = Rational::from_integer(2.into());
        let (m12, m21) = (m.get(0, 1), m.get(1, 0));
        Ok(Self {
            a11: t(m.get(0, 0).re)?,
            a22: t(m.get(1, 1).re)?,
            re12: (t(m12.re)? + t(m21.re)?) / two.clone(),
            im12: (t(m12.im)? - t(m21.im)?) / two,
        })
    }

    pub fn trace(&self) -> Rational {
        &self.a11 + &self.a22
    }

    pub fn det(&self) -> Rational {
        &self.a11 * &self.a22 - &self.re12 * &self.re12 - &self.im12 * &self.im12
    }

    pub fn add(&self, o: &Self) -> Self {
        Self::new(
            &self.a11 + &o.a11,
            &self.a22 + &o.a22,
            &self.re12 + &o.re12,
            &self.im12 + &o.im12,
        )
    }

    pub fn sub(&self, o: &Self) -> Self {
        Self::new(
            &self.a11 - &o.a11,
            &self.a22 - &o.a22,
            &self.re12 - &o.re12,
            &self.im12 - &o.im12,
        )
    }

    pub fn scale(&self, s: &Rational) -> Self {
        Self::new(&self.a11 * s, &self.a22 * s, &self.re12 * s, &self.im12 * s)
    }

    /// `η·self + (1 - η)·target`.
    pub fn mix(&self, eta: &Rational, target: &Self) -> Self {
        self.scale(eta).add(&target.scale(&(Rational::one() - eta)))
    }

    /// `tr(self · other)`.
    pub fn trace_product(&self, o: &Self) -> Rational {
        let two = Rational::from_integer(2.into());
        &self.a11 * &o.a11 + &self.a22 * &o.a22 + two * (&self.re12 * &o.re12 + &self.im12 * &o.im12)
    }

    pub fn is_psd(&self) -> bool {
        is_psd_rational(self)
    }

    pub fn to_float(&self) -> HermitianMatrix {
        HermitianMatrix::from_parts(
            &[
                vec![to_f64(&self.a11), to_f64(&self.re12)],
                vec![to_f64(&self.re12), to_f64(&self.a22)],
            ],
            &[vec![0.0, to_f64(&self.im12)], vec![-to_f64(&self.im12), 0.0]],
        )
        .expect("Hermitian by construction")
    }

    /// Frobenius distance to a float matrix, in floats.
    pub fn frobenius_distance(&self, m: &HermitianMatrix) -> f64 {
        let f = self.to_float();
        let mut s = 0.0;
        for i in 0..2 {
            for j in 0..2 {
                s += (f.get(i, j) - m.get(i, j)).norm_sqr();
            }
        }
        s.sqrt()
    }
}

impl fmt::Display for RationalHermitian2 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "[[{}, {}+{}i], [{}-{}i, {}]]",
            self.a11, self.re12, self.im12, self.re12, self.im12, self.a22
        )
    }
}

#[derive(Serialize, Deserialize)]
struct MatrixJson {
    a11: QJson,
    a22: QJson,
    a12: ComplexJson,
}

#[derive(Serialize, Deserialize)]
struct ComplexJson {
    re: QJson,
    im: QJson,
}

impl Serialize for RationalHermitian2 {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        MatrixJson {
            a11: (&self.a11).into(),
            a22: (&self.a22).into(),
            a12: ComplexJson {
                re: (&self.re12).into(),
                im: (&self.im12).into(),
            },
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for RationalHermitian2 {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let j = MatrixJson::deserialize(d)?;
        let q = |v: &QJson| Rational::try_from(v).map_err(serde::de::Error::custom);
        Ok(Self {
            a11: q(&j.a11)?,
            a22: q(&j.a22)?,
            re12: q(&j.a12.re)?,
            im12: q(&j.a12.im)?,
        })
    }
}

/// Sylvester test for 2x2 Hermitian matrices; both diagonals are checked so a zero corner
/// with a nonzero off-diagonal is rejected.
pub fn is_psd_rational(m: &RationalHermitian2) -> bool {
    !m.a11.is_negative() && !m.a22.is_negative() && !m.det().is_negative()
}

/// `1`, then `1 - 2^-k` for `k = MAX_DYADIC_EXPONENT, ..., 1`.
fn dyadic_grid() -> impl Iterator<Item = Rational> {
    std::iter::once(Rational::one()).chain(
        (1..=MAX_DYADIC_EXPONENT)
            .rev()
            .map(|k| Rational::one() - Rational::new(BigInt::one(), BigInt::one() << k)),
    )
}

/// Rationalized object with the mixing coefficient that made it valid.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Rationalized<T> {
    pub value: T,
    pub eta: Rational,
}

/// Truncate, Hermitize, mix toward `𝟙/2` with the largest grid `η` giving a PSD matrix, and
/// normalize the trace to exactly one.
pub fn rationalize_state(rho: &HermitianMatrix, denominator: u64) -> Result<Rationalized<RationalHermitian2>> {
    let m = RationalHermitian2::truncate_hermitize(rho, denominator)?;
    let half = RationalHermitian2::scaled_identity(Rational::new(1.into(), 2.into()));
    for eta in dyadic_grid() {
        let mixed = m.mix(&eta, &half);
        if !mixed.is_psd() {
            continue;
        }
        let tr = mixed.trace();
        if !tr.is_positive() {
            break;
        }
        let value = mixed.scale(&tr.recip());
        return Ok(Rationalized { value, eta });
    }
    Err(Error::Rationalization(format!(
        "no η on the dyadic grid makes the truncated state PSD: {m}"
    )))
}

/// Truncate and Hermitize all but the last element, complete with `𝟙 - Σ`, then mix every
/// element toward `𝟙/O_B` with the largest grid `η` making all of them PSD. The output sums to
/// `𝟙` exactly.
pub fn rationalize_povm(
    elements: &[HermitianMatrix],
    denominator: u64,
) -> Result<Rationalized<Vec<RationalHermitian2>>> {
    let ob = elements.len();
    if ob == 0 {
        return Err(Error::InvalidArgument("POVM has no elements".into()));
    }
    let mut out = Vec::with_capacity(ob);
    let mut rest = RationalHermitian2::identity();
    for e in &elements[..ob - 1] {
        let m = RationalHermitian2::truncate_hermitize(e, denominator)?;
        rest = rest.sub(&m);
        out.push(m);
    }
    out.push(rest);
    let target = RationalHermitian2::scaled_identity(Rational::new(1.into(), BigInt::from(ob)));
    for eta in dyadic_grid() {
        let mixed: Vec<_> = out.iter().map(|m| m.mix(&eta, &target)).collect();
        if mixed.iter().all(is_psd_rational) {
            return Ok(Rationalized { value: mixed, eta });
        }
    }
    Err(Error::Rationalization(
        "no η on the dyadic grid makes every POVM element PSD".into(),
    ))
}

/// `p(b|x,y) = tr(ρ_x B_{b|y})` in exact arithmetic.
pub fn exact_behavior(states: &[RationalHermitian2], povms: &[Vec<RationalHermitian2>]) -> Result<Table3<Rational>> {
    let ob = povms
        .first()
        .ok_or_else(|| Error::InvalidArgument("no measurements".into()))?
        .len();
    if states.is_empty() || ob == 0 {
        return Err(Error::InvalidArgument("scenario needs states and outcomes".into()));
    }
    if let Some(m) = povms.iter().find(|m| m.len() != ob) {
        return Err(Error::ShapeMismatch(format!(
            "measurements have {ob} and {} outcomes",
            m.len()
        )));
    }
    Ok(Table3::from_fn(states.len(), povms.len(), ob, |b, x, y| {
        states[x].trace_product(&povms[y][b])
    }))
}

/// `Σ γ p` over all cells.
pub fn exact_dot(gamma: &Table3<Rational>, p: &Table3<Rational>) -> Result<Rational> {
    if gamma.shape() != p.shape() {
        return Err(Error::ShapeMismatch(format!("{:?} vs {:?}", gamma.shape(), p.shape())));
    }
    Ok(gamma
        .as_slice()
        .iter()
        .zip(p.as_slice())
        .fold(Rational::zero(), |acc, (g, q)| acc + g * q))
}

/// Exact `C_d = max_λ Σ_{y,c} max_b Σ_{x: λ(x)=c} γ(b|x,y)`.
///
/// The table is scaled to integers by the lcm of its denominators; encodings are scanned in
/// parallel.
pub fn exact_classical_bound(gamma: &Table3<Rational>, d_c: usize) -> Result<Rational> {
    if d_c == 0 {
        return Err(Error::InvalidArgument("d_C must be positive".into()));
    }
    let (ia, ib, ob) = gamma.shape();
    let count = encoding_count(ia, d_c);
    if count > ENUMERATION_LIMIT {
        return Err(Error::GuardExceeded {
            what: "encodings",
            size: count,
            limit: ENUMERATION_LIMIT,
        });
    }
    let lcm = gamma.as_slice().iter().fold(BigInt::one(), |l, q| l.lcm(q.denom()));
    let g: Vec<BigInt> = gamma
        .as_slice()
        .iter()
        .map(|q| q.numer() * (&lcm / q.denom()))
        .collect();
    let g = Table3::from_fn(ia, ib, ob, |b, x, y| g[(x * ib + y) * ob + b].clone());
    let best = (0..count as u64)
        .into_par_iter()
        .map_init(
            || (vec![0usize; ia], vec![BigInt::zero(); ib * d_c * ob]),
            |(map, buckets), index| {
                let mut i = index;
                for d in map.iter_mut().rev() {
                    *d = (i % d_c as u64) as usize;
                    i /= d_c as u64;
                }
                buckets.iter_mut().for_each(|v| v.set_zero());
                for (x, &c) in map.iter().enumerate() {
                    for y in 0..ib {
                        for b in 0..ob {
                            buckets[(y * d_c + c) * ob + b] += g.get(b, x, y);
                        }
                    }
                }
                buckets
                    .chunks_exact(ob)
                    .map(|cell| cell.iter().max().expect("ob > 0").clone())
                    .sum::<BigInt>()
            },
        )
        .max()
        .expect("at least one encoding");
    Ok(Rational::new(best, lcm))
}

/// Exact violation record: every field is reproducible from the stored scenario and `γ`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Certificate {
    pub d_c: usize,
    pub denominator: u64,
    pub states: Vec<RationalHermitian2>,
    pub povms: Vec<Vec<RationalHermitian2>>,
    /// Bound-form coefficients: classical behaviors satisfy `Σγp ≤ C_d`.
    pub gamma: Table3<Rational>,
    pub behavior: Table3<Rational>,
    pub classical_bound: Rational,
    pub quantum_value: Rational,
    pub margin: Rational,
}

#[derive(Serialize, Deserialize)]
struct CertificateJson {
    #[serde(rename = "dC")]
    d_c: usize,
    denominator: u64,
    states: Vec<RationalHermitian2>,
    povms: Vec<Vec<RationalHermitian2>>,
    gamma: Vec<Vec<Vec<QJson>>>,
    p: Vec<Vec<Vec<QJson>>>,
    #[serde(rename = "Cd")]
    classical_bound: QJson,
    quantum_value: QJson,
    margin: QJson,
}

fn table_json(t: &Table3<Rational>) -> Vec<Vec<Vec<QJson>>> {
    t.map(|q| QJson::from(q)).to_nested()
}

fn table_from_json(t: &[Vec<Vec<QJson>>]) -> Result<Table3<Rational>> {
    let nested = t
        .iter()
        .map(|row| {
            row.iter()
                .map(|cell| cell.iter().map(Rational::try_from).collect())
                .collect()
        })
        .collect::<Result<Vec<Vec<Vec<Rational>>>>>()?;
    Table3::from_nested(nested)
}

impl Serialize for Certificate {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        CertificateJson {
            d_c: self.d_c,
            denominator: self.denominator,
            states: self.states.clone(),
            povms: self.povms.clone(),
            gamma: table_json(&self.gamma),
            p: table_json(&self.behavior),
            classical_bound: (&self.classical_bound).into(),
            quantum_value: (&self.quantum_value).into(),
            margin: (&self.margin).into(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for Certificate {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let j = CertificateJson::deserialize(d)?;
        let e = serde::de::Error::custom;
        Ok(Certificate {
            d_c: j.d_c,
            denominator: j.denominator,
            states: j.states,
            povms: j.povms,
            gamma: table_from_json(&j.gamma).map_err(e)?,
            behavior: table_from_json(&j.p).map_err(e)?,
            classical_bound: Rational::try_from(&j.classical_bound).map_err(e)?,
            quantum_value: Rational::try_from(&j.quantum_value).map_err(e)?,
            margin: Rational::try_from(&j.margin).map_err(e)?,
        })
    }
}

impl Certificate {
    /// Recomputes every derived field from the stored states, POVMs and `γ`.
    pub fn verify(&self) -> Result<()> {
        let bad = |m: String| Err(Error::CertificateInvalid(m));
        if self.d_c == 0 {
            return bad("dC must be positive".into());
        }
        for (x, s) in self.states.iter().enumerate() {
            if !s.trace().is_one() || !s.is_psd() {
                return bad(format!("state {x} is not a density matrix"));
            }
        }
        for (y, m) in self.povms.iter().enumerate() {
            if let Some(b) = m.iter().position(|e| !e.is_psd()) {
                return bad(format!("POVM {y} element {b} is not PSD"));
            }
            let total = m.iter().fold(RationalHermitian2::zero(), |acc, e| acc.add(e));
            if total != RationalHermitian2::identity() {
                return bad(format!("POVM {y} does not sum to the identity"));
            }
        }
        let p = exact_behavior(&self.states, &self.povms)?;
        if p != self.behavior {
            return bad("stored behavior differs from tr(ρB)".into());
        }
        if self.gamma.shape() != p.shape() {
            return bad(format!(
                "γ has shape {:?}, behavior {:?}",
                self.gamma.shape(),
                p.shape()
            ));
        }
        let cd = exact_classical_bound(&self.gamma, self.d_c)?;
        if cd != self.classical_bound {
            return bad(format!(
                "stored C_d {} differs from recomputed {}",
                self.classical_bound, cd
            ));
        }
        let value = exact_dot(&self.gamma, &p)?;
        if value != self.quantum_value {
            return bad(format!(
                "stored Σγp {} differs from recomputed {}",
                self.quantum_value, value
            ));
        }
        if &value - &cd != self.margin {
            return bad("stored margin differs from Σγp - C_d".into());
        }
        if !self.margin.is_positive() {
            return bad(format!("margin {} is not positive", self.margin));
        }
        Ok(())
    }

    pub fn margin_f64(&self) -> f64 {
        to_f64(&self.margin)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Parses a certificate file and verifies it from its own contents only.
pub fn replay_certificate(json: &str) -> Result<Certificate> {
    let c: Certificate =
        serde_json::from_str(json).map_err(|e| Error::CertificateInvalid(format!("unreadable certificate: {e}")))?;
    c.verify()?;
    Ok(c)
}

/// Rationalizes the scenario, truncates the witness and decides `Σγp > C_d` exactly.
///
/// `povms[y]` lists the coarse-grained elements of measurement `y` as 2x2 matrices. A
/// witness in dual form is negated first so the certificate is always in bound form.
pub fn certify(
    states: &[HermitianMatrix],
    povms: &[Vec<HermitianMatrix>],
    witness: &Witness,
    denominator: u64,
) -> Result<Certificate> {
    let gamma_float = match witness.convention {
        Convention::Bound => witness.gamma.clone(),
        Convention::Dual => witness.gamma.map(|v| -v),
    };
    if gamma_float.shape() != (states.len(), povms.len(), povms.first().map_or(0, Vec::len)) {
        return Err(Error::ShapeMismatch(format!(
            "witness {:?} vs scenario ({}, {}, {})",
            gamma_float.shape(),
            states.len(),
            povms.len(),
            povms.first().map_or(0, Vec::len)
        )));
    }
    let rho: Vec<RationalHermitian2> = states
        .iter()
        .map(|s| rationalize_state(s, denominator).map(|r| r.value))
        .collect::<Result<_>>()?;
    let meas: Vec<Vec<RationalHermitian2>> = povms
        .iter()
        .map(|m| rationalize_povm(m, denominator).map(|r| r.value))
        .collect::<Result<_>>()?;
    let mut gamma = Table3::filled(gamma_float.ia(), gamma_float.ib(), gamma_float.ob(), Rational::zero());
    for (g, &v) in gamma.as_mut_slice().iter_mut().zip(gamma_float.as_slice()) {
        *g = truncate(v, denominator)?;
    }
    let behavior = exact_behavior(&rho, &meas)?;
    let classical_bound = exact_classical_bound(&gamma, witness.d_c)?;
    let quantum_value = exact_dot(&gamma, &behavior)?;
    let margin = &quantum_value - &classical_bound;
    if !margin.is_positive() {
        return Err(Error::CertificateNotAchieved {
            denominator,
            margin: to_decimal(&margin, 12),
        });
    }
    Ok(Certificate {
        d_c: witness.d_c,
        denominator,
        states: rho,
        povms: meas,
        gamma,
        behavior,
        classical_bound,
        quantum_value,
        margin,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qstate::{BlochVector, Rank1Povm};

    fn q(n: i64, d: i64) -> Rational {
        Rational::new(n.into(), d.into())
    }

    #[test]
    fn truncation_rounds_toward_zero() {
        assert_eq!(truncate(0.1234567, 1_000_000).unwrap(), q(123_456, 1_000_000));
        assert_eq!(truncate(-0.1234567, 1_000_000).unwrap(), q(-123_456, 1_000_000));
        assert_eq!(truncate(0.5, 10).unwrap(), q(1, 2));
        assert!(truncate(f64::NAN, 10).is_err());
    }

    #[test]
    fn decimal_rendering() {
        assert_eq!(to_decimal(&q(-1, 3), 4), "-0.3333");
        assert_eq!(to_decimal(&q(5, 2), 2), "2.50");
    }

    #[test]
    fn sylvester_cases() {
        assert!(RationalHermitian2::identity().is_psd());
        assert!(!RationalHermitian2::new(q(1, 1), q(-1, 1_000_000), q(0, 1), q(0, 1)).is_psd());
        // boundary: determinant exactly zero
        let m = RationalHermitian2::new(q(1, 2), q(1, 2), q(0, 1), q(1, 2));
        assert!(m.det().is_zero() && m.is_psd());
        let half_offdiag = RationalHermitian2::new(q(1, 2), q(1, 2), q(0, 1), q(1, 4));
        assert!(half_offdiag.det() == q(3, 16) && half_offdiag.is_psd());
        let corner = RationalHermitian2::new(q(0, 1), q(1, 1), q(0, 1), q(1, 10));
        assert!(!corner.is_psd());
    }

    #[test]
    fn exact_inputs_are_unchanged() {
        let zero = BlochVector::PLUS_Z.density_matrix();
        let r = rationalize_state(&zero, DEFAULT_DENOMINATOR).unwrap();
        assert_eq!(r.value, RationalHermitian2::new(q(1, 1), q(0, 1), q(0, 1), q(0, 1)));
        assert!(r.eta.is_one());
        let z = Rank1Povm::projective(BlochVector::PLUS_Z).to_matrices();
        let r = rationalize_povm(&z, DEFAULT_DENOMINATOR).unwrap();
        assert!(r.eta.is_one());
        assert_eq!(r.value[0], RationalHermitian2::new(q(1, 1), q(0, 1), q(0, 1), q(0, 1)));
        assert_eq!(r.value[1], RationalHermitian2::new(q(0, 1), q(1, 1), q(0, 1), q(0, 1)));
    }

    #[test]
    fn tilted_state_is_repaired() {
        let rho = HermitianMatrix::qubit(0.5, [0.3, 0.0, 0.4]);
        let r = rationalize_state(&rho, DEFAULT_DENOMINATOR).unwrap();
        assert!(r.value.is_psd() && r.value.trace().is_one());
        let slack = 1.0 - to_f64(&r.eta);
        assert!(
            slack > 0.0,
            "the float 0.1 corner truncates below the pure-state boundary"
        );
        assert!(r.value.frobenius_distance(&rho) <= 3.0 / 1e6 + slack);
    }

    #[test]
    fn junk_state_is_rejected() {
        let junk = HermitianMatrix::from_parts(&[vec![-1.0, 0.0], vec![0.0, -1.0]], &[]).unwrap();
        assert!(matches!(rationalize_state(&junk, 1000), Err(Error::Rationalization(_))));
    }

    #[test]
    fn trine_completes_exactly() {
        let trine = Rank1Povm::trine().to_matrices();
        let r = rationalize_povm(&trine, DEFAULT_DENOMINATOR).unwrap();
        let total = r.value.iter().fold(RationalHermitian2::zero(), |a, e| a.add(e));
        assert_eq!(total, RationalHermitian2::identity());
        assert!(r.value.iter().all(|e| !e.det().is_negative()));
    }

    #[test]
    fn exact_born_rule() {
        let zero = rationalize_state(&BlochVector::PLUS_Z.density_matrix(), 10)
            .unwrap()
            .value;
        let mixed = RationalHermitian2::scaled_identity(q(1, 2));
        let z = rationalize_povm(&Rank1Povm::projective(BlochVector::PLUS_Z).to_matrices(), 10)
            .unwrap()
            .value;
        let p = exact_behavior(&[zero, mixed], &[z]).unwrap();
        assert_eq!(p.cell(0, 0), &[q(1, 1), q(0, 1)]);
        assert_eq!(p.cell(1, 0), &[q(1, 2), q(1, 2)]);
    }

    #[test]
    fn exact_bound_matches_float_bound() {
        let gamma = Table3::from_fn(3, 2, 2, |b, x, y| {
            q((b as i64 * 7 + x as i64 * 3 - y as i64 * 5) % 4 - 1, 3)
        });
        let float = gamma.map(to_f64);
        for d_c in 1..=3 {
            let exact = exact_classical_bound(&gamma, d_c).unwrap();
            let brute = crate::witness::classical_bound_bruteforce(&float, d_c).unwrap();
            assert!((to_f64(&exact) - brute).abs() < 1e-12, "d_c={d_c}");
        }
        let zero = Table3::filled(2, 2, 2, q(0, 1));
        assert!(exact_classical_bound(&zero, 2).unwrap().is_zero());
    }

    #[test]
    fn classical_behavior_is_never_certified() {
        let states: Vec<_> = [BlochVector::PLUS_Z, BlochVector::MINUS_Z]
            .iter()
            .map(|v| v.density_matrix())
            .collect();
        let povms = vec![Rank1Povm::projective(BlochVector::PLUS_Z).to_matrices()];
        let gamma = Table3::from_fn(2, 1, 2, |b, x, _| if b == x { 1.0 } else { 0.0 });
        let w = Witness {
            d_c: 2,
            gamma,
            bound: 2.0,
            convention: Convention::Bound,
        };
        assert!(matches!(
            certify(&states, &povms, &w, 1000),
            Err(Error::CertificateNotAchieved { .. })
        ));
    }
}
