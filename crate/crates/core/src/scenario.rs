//! Prepare-and-measure scenario files.
//!
//! ```json
//! {"label": "...", "states": [[0, 0, 1], {"re": [[1, 0], [0, 0]]}],
//!  "povms": [{"elements": [{"p": 0.5, "y": [0, 0, 1]}, ...]}, [{"re": ...}, ...]]}
//! ```
//!
//! States are Bloch triples or density matrices; measurements are rank-1 POVMs or lists of
//! element matrices, which are decomposed into rank-1 pieces on load.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{build_projective_scenario, octahedron, snub_cube, thomson_eleven, DirectionSet};
use crate::harness::{behavior_from_matrices, behavior_from_quantum};
use crate::qstate::{decompose_povm, BlochVector, HermitianMatrix, Rank1Povm, INVARIANT_TOL};
use crate::witness::Behavior;

#[derive(Clone, Debug, PartialEq)]
pub enum QubitState {
    Pure(BlochVector),
    Mixed(HermitianMatrix),
}

impl QubitState {
    /// Pure states given as matrices are stored as Bloch vectors.
    pub fn from_matrix(m: HermitianMatrix) -> Result<Self> {
        if m.dim() != 2 {
            return Err(Error::DimensionMismatch {
                expected: 2,
                found: m.dim(),
            });
        }
        m.validate_state()?;
        let r = m.bloch();
        let n = (r[0] * r[0] + r[1] * r[1] + r[2] * r[2]).sqrt();
        if (n - 1.0).abs() <= INVARIANT_TOL {
            Ok(QubitState::Pure(BlochVector::from_direction(r)?))
        } else {
            Ok(QubitState::Mixed(m))
        }
    }

    pub fn matrix(&self) -> HermitianMatrix {
        match self {
            QubitState::Pure(x) => x.density_matrix(),
            QubitState::Mixed(m) => m.clone(),
        }
    }

    pub fn pure(&self) -> Option<BlochVector> {
        match self {
            QubitState::Pure(x) => Some(*x),
            QubitState::Mixed(_) => None,
        }
    }
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum StateJson {
    Bloch([f64; 3]),
    Matrix(HermitianMatrix),
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum PovmJson {
    Rank1(Rank1Povm),
    Matrices(Vec<HermitianMatrix>),
}

#[derive(Serialize, Deserialize)]
struct ScenarioJson {
    #[serde(default)]
    label: String,
    states: Vec<StateJson>,
    povms: Vec<PovmJson>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ScenarioJson", into = "ScenarioJson")]
pub struct Scenario {
    pub label: String,
    pub states: Vec<QubitState>,
    pub povms: Vec<Rank1Povm>,
}

impl TryFrom<ScenarioJson> for Scenario {
    type Error = Error;

    fn try_from(j: ScenarioJson) -> Result<Self> {
        let states = j
            .states
            .into_iter()
            .map(|s| match s {
                StateJson::Bloch(v) => BlochVector::try_from(v).map(QubitState::Pure),
                StateJson::Matrix(m) => QubitState::from_matrix(m),
            })
            .collect::<Result<Vec<_>>>()?;
        let povms = j
            .povms
            .into_iter()
            .map(|p| match p {
                PovmJson::Rank1(p) => Ok(p),
                PovmJson::Matrices(ms) => decompose_povm(&ms),
            })
            .collect::<Result<Vec<_>>>()?;
        Scenario::new(j.label, states, povms)
    }
}

impl From<Scenario> for ScenarioJson {
    fn from(s: Scenario) -> Self {
        ScenarioJson {
            label: s.label,
            states: s
                .states
                .into_iter()
                .map(|st| match st {
                    QubitState::Pure(x) => StateJson::Bloch(x.components()),
                    QubitState::Mixed(m) => StateJson::Matrix(m),
                })
                .collect(),
            povms: s.povms.into_iter().map(PovmJson::Rank1).collect(),
        }
    }
}

impl Scenario {
    pub fn new(label: impl Into<String>, states: Vec<QubitState>, povms: Vec<Rank1Povm>) -> Result<Self> {
        if states.is_empty() || povms.is_empty() {
            return Err(Error::InvalidArgument(
                "scenario needs at least one state and one measurement".into(),
            ));
        }
        let ob = povms[0].num_outcomes();
        if let Some(p) = povms.iter().find(|p| p.num_outcomes() != ob) {
            return Err(Error::ShapeMismatch(format!(
                "measurements have {ob} and {} outcomes",
                p.num_outcomes()
            )));
        }
        Ok(Self {
            label: label.into(),
            states,
            povms,
        })
    }

    /// Pure states on `states` and projective measurements along `directions`.
    pub fn projective(states: &DirectionSet, directions: &DirectionSet) -> Result<Self> {
        let (xs, povms) = build_projective_scenario(states, directions)?;
        Scenario::new(
            format!("{} x {}", states.label, directions.label),
            xs.into_iter().map(QubitState::Pure).collect(),
            povms,
        )
    }

    /// `snubcube` (octahedron x snub cube) or `thomson11` (octahedron x eleven Thomson directions).
    pub fn preset(name: &str) -> Result<Self> {
        match name {
            "snubcube" => Scenario::projective(&octahedron(), &snub_cube()),
            "thomson11" => Scenario::projective(&octahedron(), &thomson_eleven()?),
            _ => Err(Error::InvalidArgument(format!("unknown preset '{name}'"))),
        }
    }

    pub fn shape(&self) -> (usize, usize, usize) {
        (self.states.len(), self.povms.len(), self.povms[0].num_outcomes())
    }

    /// Born-rule table; `p_b(1 + x·y_b)` when every state is pure, `tr(ρB)` otherwise.
    pub fn behavior(&self) -> Result<Behavior> {
        match self.pure_states() {
            Some(xs) => behavior_from_quantum(&xs, &self.povms),
            None => behavior_from_matrices(&self.state_matrices(), &self.povm_matrices()),
        }
    }

    pub fn pure_states(&self) -> Option<Vec<BlochVector>> {
        self.states.iter().map(QubitState::pure).collect()
    }

    pub fn state_matrices(&self) -> Vec<HermitianMatrix> {
        self.states.iter().map(QubitState::matrix).collect()
    }

    /// Coarse-grained POVM elements per measurement.
    pub fn povm_matrices(&self) -> Vec<Vec<HermitianMatrix>> {
        self.povms.iter().map(Rank1Povm::to_matrices).collect()
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::octahedron;

    #[test]
    fn parses_bloch_and_matrix_forms() {
        let json = r#"{"label": "t", "states": [[0, 0, 1], {"re": [[0.5, 0], [0, 0.5]]}, {"re": [[0, 0], [0, 1]]}],
            "povms": [{"elements": [{"p": 0.5, "y": [0, 0, 1]}, {"p": 0.5, "y": [0, 0, -1]}]},
                      [{"re": [[1, 0], [0, 0]]}, {"re": [[0, 0], [0, 1]]}]]}"#;
        let s = Scenario::from_json(json).unwrap();
        assert_eq!(s.shape(), (3, 2, 2));
        assert!(matches!(s.states[1], QubitState::Mixed(_)));
        assert_eq!(s.states[2], QubitState::Pure(BlochVector::MINUS_Z));
        assert!(s.pure_states().is_none());
        let p = s.behavior().unwrap();
        assert_eq!(p.table().cell(0, 0), &[1.0, 0.0]);
        assert_eq!(p.table().cell(1, 1), &[0.5, 0.5]);
        assert_eq!(p.table().cell(2, 1), &[0.0, 1.0]);
        let back = Scenario::from_json(&serde_json::to_string(&s).unwrap()).unwrap();
        assert_eq!(back.behavior().unwrap(), p);
    }

    #[test]
    fn rejects_mixed_outcome_counts() {
        let json = r#"{"states": [[0, 0, 1]], "povms": [
            {"elements": [{"p": 0.5, "y": [0, 0, 1]}, {"p": 0.5, "y": [0, 0, -1]}]},
            {"elements": [{"p": 0.3333333333333333, "y": [0, 0, 1]},
                          {"p": 0.3333333333333333, "y": [0.8660254037844387, 0, -0.5]},
                          {"p": 0.3333333333333333, "y": [-0.8660254037844387, 0, -0.5]}]}]}"#;
        let err = Scenario::from_json(json).unwrap_err();
        assert!(err.to_string().contains("outcomes"), "{err}");
    }

    #[test]
    fn projective_preset_shape() {
        let s = Scenario::projective(&octahedron(), &octahedron()).unwrap();
        assert_eq!(s.shape(), (6, 6, 2));
        assert_eq!(s.behavior().unwrap().get(0, 0, 0), 1.0);
    }
}
