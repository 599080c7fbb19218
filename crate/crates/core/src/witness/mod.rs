//! Classical simulability of prepare-and-measure behaviors.
//!
//! A behavior `p(b|x,y)` is simulable with a `d_C`-level classical message when it is a
//! mixture of deterministic pairs (Alice encoding `x -> c`, Bob decoding `(y, c) -> b`).
//! This module enumerates those strategies, computes classical bounds of linear
//! witnesses, and solves the critical-visibility LP together with its dual.

mod bound;
mod visibility;

pub use bound::{
    choose_enumeration_side, classical_bound, classical_bound_bruteforce, classical_bound_with_strategy,
    encoding_count, enumerate_encodings, DeterministicEncoding, Encodings, Side, BRUTEFORCE_LIMIT, ENUMERATION_LIMIT,
};
pub use visibility::{
    dual_slack_table, visibility_explicit, visibility_primal, visibility_primal_with, witness_dual,
    witness_dual_explicit, AliceStrategy, BobStrategy, ClassicalModel, DualSolution, DualWitness, VisibilityOptions,
    VisibilityResult, DUALITY_TOL, EXPLICIT_ROW_LIMIT, SIMULABLE_TOL,
};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Dense table indexed `(x, y, b)` with `b` fastest.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Table3<T = f64> {
    ia: usize,
    ib: usize,
    ob: usize,
    data: Vec<T>,
}

impl<T: Clone> Table3<T> {
    pub fn filled(ia: usize, ib: usize, ob: usize, value: T) -> Self {
        Self {
            ia,
            ib,
            ob,
            data: vec![value; ia * ib * ob],
        }
    }

    pub fn from_fn(ia: usize, ib: usize, ob: usize, mut f: impl FnMut(usize, usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(ia * ib * ob);
        for x in 0..ia {
            for y in 0..ib {
                for b in 0..ob {
                    data.push(f(b, x, y));
                }
            }
        }
        Self { ia, ib, ob, data }
    }

    /// Builds from nested `[x][y][b]` vectors.
    pub fn from_nested(nested: Vec<Vec<Vec<T>>>) -> Result<Self> {
        let ia = nested.len();
        let ib = nested.first().map_or(0, Vec::len);
        let ob = nested.first().and_then(|v| v.first()).map_or(0, Vec::len);
        if ia == 0 || ib == 0 || ob == 0 {
            return Err(Error::ShapeMismatch("empty table".into()));
        }
        let mut data = Vec::with_capacity(ia * ib * ob);
        for (x, row) in nested.into_iter().enumerate() {
            if row.len() != ib {
                return Err(Error::ShapeMismatch(format!(
                    "x={x}: expected {ib} settings, found {}",
                    row.len()
                )));
            }
            for (y, cell) in row.into_iter().enumerate() {
                if cell.len() != ob {
                    return Err(Error::ShapeMismatch(format!(
                        "(x={x}, y={y}): expected {ob} outcomes, found {}",
                        cell.len()
                    )));
                }
                data.extend(cell);
            }
        }
        Ok(Self { ia, ib, ob, data })
    }

    pub fn to_nested(&self) -> Vec<Vec<Vec<T>>> {
        (0..self.ia)
            .map(|x| (0..self.ib).map(|y| self.cell(x, y).to_vec()).collect())
            .collect()
    }

    pub fn map<U>(&self, f: impl FnMut(&T) -> U) -> Table3<U> {
        Table3 {
            ia: self.ia,
            ib: self.ib,
            ob: self.ob,
            data: self.data.iter().map(f).collect(),
        }
    }
}

impl<T> Table3<T> {
    pub fn ia(&self) -> usize {
        self.ia
    }

    pub fn ib(&self) -> usize {
        self.ib
    }

    pub fn ob(&self) -> usize {
        self.ob
    }

    pub fn shape(&self) -> (usize, usize, usize) {
        (self.ia, self.ib, self.ob)
    }

    #[inline]
    pub fn offset(&self, b: usize, x: usize, y: usize) -> usize {
        (x * self.ib + y) * self.ob + b
    }

    #[inline]
    pub fn get(&self, b: usize, x: usize, y: usize) -> &T {
        &self.data[self.offset(b, x, y)]
    }

    #[inline]
    pub fn get_mut(&mut self, b: usize, x: usize, y: usize) -> &mut T {
        let i = self.offset(b, x, y);
        &mut self.data[i]
    }

    /// Outcome slice for setting pair `(x, y)`.
    pub fn cell(&self, x: usize, y: usize) -> &[T] {
        let i = self.offset(0, x, y);
        &self.data[i..i + self.ob]
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn same_shape<U>(&self, other: &Table3<U>) -> bool {
        self.shape() == other.shape()
    }
}

impl Table3<f64> {
    pub fn zeros(ia: usize, ib: usize, ob: usize) -> Self {
        Self::filled(ia, ib, ob, 0.0)
    }

    /// `Σ_{b,x,y} self * other`, accumulated in storage order.
    pub fn dot(&self, other: &Table3<f64>) -> Result<f64> {
        if !self.same_shape(other) {
            return Err(Error::ShapeMismatch(format!(
                "{:?} vs {:?}",
                self.shape(),
                other.shape()
            )));
        }
        Ok(self.data.iter().zip(&other.data).map(|(a, b)| a * b).sum())
    }

    pub fn max_abs_diff(&self, other: &Table3<f64>) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }
}

/// Conditional distribution `p(b|x,y)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "BehaviorJson", into = "BehaviorJson")]
pub struct Behavior {
    p: Table3,
}

pub const NORMALIZATION_TOL: f64 = 1e-9;

impl Behavior {
    pub fn new(p: Table3) -> Result<Self> {
        for (i, v) in p.as_slice().iter().enumerate() {
            if !v.is_finite() || *v < -NORMALIZATION_TOL {
                return Err(Error::InvalidArgument(format!("probability entry {i} is {v}")));
            }
        }
        for x in 0..p.ia() {
            for y in 0..p.ib() {
                let s: f64 = p.cell(x, y).iter().sum();
                if (s - 1.0).abs() > NORMALIZATION_TOL {
                    return Err(Error::InvalidArgument(format!("p(.|x={x},y={y}) sums to {s}")));
                }
            }
        }
        Ok(Self { p })
    }

    /// White noise `p = 1/O_B`.
    pub fn uniform(ia: usize, ib: usize, ob: usize) -> Self {
        Self {
            p: Table3::filled(ia, ib, ob, 1.0 / ob as f64),
        }
    }

    pub fn table(&self) -> &Table3 {
        &self.p
    }

    pub fn ia(&self) -> usize {
        self.p.ia()
    }

    pub fn ib(&self) -> usize {
        self.p.ib()
    }

    pub fn ob(&self) -> usize {
        self.p.ob()
    }

    pub fn get(&self, b: usize, x: usize, y: usize) -> f64 {
        *self.p.get(b, x, y)
    }

    /// `η p + (1 - η)/O_B`.
    pub fn mix_with_noise(&self, eta: f64) -> Table3 {
        let u = 1.0 / self.ob() as f64;
        self.p.map(|v| eta * v + (1.0 - eta) * u)
    }

    pub fn is_uniform(&self) -> bool {
        let u = 1.0 / self.ob() as f64;
        self.p.as_slice().iter().all(|&v| v == u)
    }
}

#[derive(Serialize, Deserialize)]
struct BehaviorJson {
    #[serde(rename = "IA")]
    ia: usize,
    #[serde(rename = "IB")]
    ib: usize,
    #[serde(rename = "OB")]
    ob: usize,
    p: Vec<Vec<Vec<f64>>>,
}

impl TryFrom<BehaviorJson> for Behavior {
    type Error = Error;

    fn try_from(j: BehaviorJson) -> Result<Self> {
        let p = Table3::from_nested(j.p)?;
        if p.shape() != (j.ia, j.ib, j.ob) {
            return Err(Error::ShapeMismatch(format!(
                "declared ({}, {}, {}) but table is {:?}",
                j.ia,
                j.ib,
                j.ob,
                p.shape()
            )));
        }
        Behavior::new(p)
    }
}

impl From<Behavior> for BehaviorJson {
    fn from(b: Behavior) -> Self {
        Self {
            ia: b.ia(),
            ib: b.ib(),
            ob: b.ob(),
            p: b.p.to_nested(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Convention {
    /// Classical behaviors satisfy `Σγp ≥ bound` (bound 0 for LP duals).
    Dual,
    /// Classical behaviors satisfy `Σγp ≤ bound`.
    Bound,
}

/// Linear functional `Σ γ(b|x,y) p(b|x,y)` with its classical bound.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "WitnessJson", into = "WitnessJson")]
pub struct Witness {
    pub d_c: usize,
    pub gamma: Table3,
    pub bound: f64,
    pub convention: Convention,
}

#[derive(Serialize, Deserialize)]
struct WitnessJson {
    #[serde(rename = "dC")]
    d_c: usize,
    gamma: Vec<Vec<Vec<f64>>>,
    bound: f64,
    convention: Convention,
}

impl TryFrom<WitnessJson> for Witness {
    type Error = Error;

    fn try_from(j: WitnessJson) -> Result<Self> {
        let gamma = Table3::from_nested(j.gamma)?;
        if gamma.as_slice().iter().any(|v| !v.is_finite()) || !j.bound.is_finite() {
            return Err(Error::InvalidArgument("witness entries must be finite".into()));
        }
        if j.d_c == 0 {
            return Err(Error::InvalidArgument("dC must be positive".into()));
        }
        Ok(Self {
            d_c: j.d_c,
            gamma,
            bound: j.bound,
            convention: j.convention,
        })
    }
}

impl From<Witness> for WitnessJson {
    fn from(w: Witness) -> Self {
        Self {
            d_c: w.d_c,
            gamma: w.gamma.to_nested(),
            bound: w.bound,
            convention: w.convention,
        }
    }
}

/// Margins at or below this are not counted as violations.
pub const VIOLATION_TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ViolationCheck {
    /// `Σγp`.
    pub value: f64,
    pub bound: f64,
    /// Amount by which the classical inequality is broken; positive means violated.
    pub margin: f64,
    pub violated: bool,
}

impl Witness {
    /// Bound-form equivalent: `γ' = -γ` with `C_d` recomputed by enumeration.
    pub fn to_bound_form(&self) -> Result<Witness> {
        match self.convention {
            Convention::Bound => Ok(self.clone()),
            Convention::Dual => {
                let gamma = self.gamma.map(|v| -v);
                let bound = classical_bound(&gamma, self.d_c)?;
                Ok(Witness {
                    d_c: self.d_c,
                    gamma,
                    bound,
                    convention: Convention::Bound,
                })
            }
        }
    }

    pub fn check_violation(&self, behavior: &Behavior) -> Result<ViolationCheck> {
        check_violation(self, behavior)
    }
}

pub fn check_violation(witness: &Witness, behavior: &Behavior) -> Result<ViolationCheck> {
    let value = witness.gamma.dot(behavior.table())?;
    let margin = match witness.convention {
        Convention::Dual => witness.bound - value,
        Convention::Bound => value - witness.bound,
    };
    Ok(ViolationCheck {
        value,
        bound: witness.bound,
        margin,
        violated: margin > VIOLATION_TOL,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn behavior_json_roundtrip_and_validation() {
        let b =
            Behavior::new(Table3::from_nested(vec![vec![vec![0.25, 0.75]], vec![vec![1.0, 0.0]]]).unwrap()).unwrap();
        let s = serde_json::to_string(&b).unwrap();
        assert_eq!(s, r#"{"IA":2,"IB":1,"OB":2,"p":[[[0.25,0.75]],[[1.0,0.0]]]}"#);
        assert_eq!(serde_json::from_str::<Behavior>(&s).unwrap(), b);
        assert!(serde_json::from_str::<Behavior>(r#"{"IA":1,"IB":1,"OB":2,"p":[[[0.5,0.6]]]}"#).is_err());
        assert!(serde_json::from_str::<Behavior>(r#"{"IA":2,"IB":1,"OB":2,"p":[[[0.5,0.5]]]}"#).is_err());
    }

    #[test]
    fn zero_witness_is_never_violated() {
        let w = Witness {
            d_c: 2,
            gamma: Table3::zeros(2, 2, 2),
            bound: 0.0,
            convention: Convention::Dual,
        };
        let c = w.check_violation(&Behavior::uniform(2, 2, 2)).unwrap();
        assert_eq!((c.value, c.violated), (0.0, false));
        let bf = w.to_bound_form().unwrap();
        assert_eq!(bf.bound, 0.0);
        assert!(!bf.check_violation(&Behavior::uniform(2, 2, 2)).unwrap().violated);
    }

    #[test]
    fn shape_mismatch_is_reported() {
        let w = Witness {
            d_c: 2,
            gamma: Table3::zeros(2, 2, 2),
            bound: 0.0,
            convention: Convention::Dual,
        };
        assert!(matches!(
            w.check_violation(&Behavior::uniform(2, 3, 2)),
            Err(Error::ShapeMismatch(_))
        ));
    }
}
