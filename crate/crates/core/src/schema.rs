//! JSON instance format.
//!
//! ```json
//! {
//!   "horizon": 2,
//!   "states": [0.0, 1.0],
//!   "terminal_cost": [0.0, 1.0],
//!   "stages": [{
//!     "actions": [0.0, 1.0],
//!     "admissible": [[0, 1], [0, 1]],
//!     "disturbance": {"support": [0.0, 1.0], "probs": [0.5, 0.5]},
//!     "ambiguity": {"type": "generators", "densities": [[1.5, 0.5], [1.0, 1.0]]},
//!     "transition": {"table": [[[0.0, 1.0], [0.0, 0.0]], [[1.0, 1.0], [0.0, 1.0]]]},
//!     "cost": {"builtin": "counterexample"}
//!   }]
//! }
//! ```
//!
//! A single stage is repeated when `horizon` is larger than the number of
//! stages given. `admissible` defaults to every action. Spectral sets are
//! written `{"type": "spectral", "spectrum": {"breakpoints": [...],
//! "values": [...]}}` or `{"type": "spectral", "spectrum": {"es": 0.9}}`.

use serde::{Deserialize, Serialize};

use crate::ambiguity::{AmbiguityKind, AmbiguitySet, Density, QExponent};
use crate::bounds::BoundingData;
use crate::error::{Error, Result};
use crate::model::{
    ActionSet, Builtin, ConvexFlags, Cost, FiniteDisturbance, FiniteRobustMDP, MonotoneFlags, Stage, StageDynamics,
    StateGrid, Transition,
};
use crate::risk::Spectrum;
use crate::solver::{MarkovControllerPolicy, MarkovNaturePolicy};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SpectrumSpec {
    Steps(Spectrum),
    ExpectedShortfall { es: f64 },
}

impl SpectrumSpec {
    pub fn to_spectrum(&self) -> Result<Spectrum> {
        match self {
            SpectrumSpec::Steps(s) => Ok(s.clone()),
            SpectrumSpec::ExpectedShortfall { es } => Spectrum::expected_shortfall(*es),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum AmbiguitySpec {
    Generators {
        densities: Vec<Vec<f64>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        q: Option<QExponent>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        norm_bound: Option<f64>,
    },
    Spectral {
        spectrum: SpectrumSpec,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        q: Option<QExponent>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        norm_bound: Option<f64>,
    },
}

/// Dense `[state][action][support]` table or a named builtin family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum FunctionSpec {
    Table { table: Vec<Vec<Vec<f64>>> },
    Builtin(Builtin),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageSpec {
    pub actions: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub admissible: Option<Vec<Vec<usize>>>,
    pub disturbance: FiniteDisturbance,
    pub ambiguity: AmbiguitySpec,
    pub transition: FunctionSpec,
    pub cost: FunctionSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generator_mask: Option<Vec<Vec<Vec<usize>>>>,
    #[serde(default, skip_serializing_if = "is_default")]
    pub monotone: MonotoneFlags,
    #[serde(default, skip_serializing_if = "is_default")]
    pub convex: ConvexFlags,
}

fn is_default<T: Default + PartialEq>(v: &T) -> bool {
    *v == T::default()
}

/// Fixed policies for `evaluate`; without `nature` the controller is
/// evaluated against the worst case.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicySpec {
    pub controller: MarkovControllerPolicy,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nature: Option<MarkovNaturePolicy>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceSpec {
    pub horizon: usize,
    pub states: Vec<f64>,
    pub terminal_cost: Vec<f64>,
    pub stages: Vec<StageSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bounding: Option<BoundingData>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub policy: Option<PolicySpec>,
}

impl InstanceSpec {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Schema(e.to_string()))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("instance specs serialize")
    }

    /// Builds the model. Structural problems are left to
    /// [`crate::model::validate`]; only malformed specifications fail here.
    pub fn to_model(&self) -> Result<FiniteRobustMDP> {
        if self.stages.is_empty() {
            return Err(Error::Schema("at least one stage is required".into()));
        }
        let num_states = self.states.len();
        let specs: Vec<&StageSpec> = if self.stages.len() == 1 {
            vec![&self.stages[0]; self.horizon.max(1)]
        } else {
            self.stages.iter().collect()
        };
        let stages = specs
            .into_iter()
            .map(|spec| stage_from_spec(spec, num_states))
            .collect::<Result<Vec<_>>>()?;
        Ok(FiniteRobustMDP {
            horizon: self.horizon,
            states: StateGrid::new(self.states.clone()),
            stages,
            terminal_cost: self.terminal_cost.clone(),
        })
    }

    /// Specification of a model whose dynamics are tables or builtins.
    pub fn from_model(model: &FiniteRobustMDP) -> Result<Self> {
        let stages = model.stages.iter().map(stage_to_spec).collect::<Result<Vec<_>>>()?;
        Ok(Self {
            horizon: model.horizon,
            states: model.states.points.clone(),
            terminal_cost: model.terminal_cost.clone(),
            stages,
            bounding: None,
            policy: None,
        })
    }
}

fn stage_from_spec(spec: &StageSpec, num_states: usize) -> Result<Stage> {
    let (kind, q, norm_bound) = match &spec.ambiguity {
        AmbiguitySpec::Generators { densities, q, norm_bound } => (
            AmbiguityKind::Generators(densities.iter().cloned().map(Density::new).collect()),
            *q,
            *norm_bound,
        ),
        AmbiguitySpec::Spectral { spectrum, q, norm_bound } => {
            (AmbiguityKind::Spectral(spectrum.to_spectrum()?), *q, *norm_bound)
        }
    };
    let transition = match &spec.transition {
        FunctionSpec::Table { table } => Transition::Table(table.clone()),
        FunctionSpec::Builtin(b) => Transition::Builtin(b.clone()),
    };
    let cost = match &spec.cost {
        FunctionSpec::Table { table } => Cost::Table(table.clone()),
        FunctionSpec::Builtin(b) => Cost::Builtin(b.clone()),
    };
    let mut dynamics = StageDynamics::new(transition, cost);
    dynamics.monotone = spec.monotone;
    dynamics.convex = spec.convex;
    let mut stage = Stage::new(
        num_states,
        ActionSet::new(spec.actions.clone()),
        spec.disturbance.clone(),
        AmbiguitySet { kind, q, norm_bound },
        dynamics,
    );
    if let Some(adm) = &spec.admissible {
        stage.admissible = adm.clone();
    }
    stage.generator_mask = spec.generator_mask.clone();
    Ok(stage)
}

fn stage_to_spec(stage: &Stage) -> Result<StageSpec> {
    let function = |t: Option<&Vec<Vec<Vec<f64>>>>, b: Option<&Builtin>| match (t, b) {
        (Some(t), _) => Ok(FunctionSpec::Table { table: t.clone() }),
        (_, Some(b)) => Ok(FunctionSpec::Builtin(b.clone())),
        _ => Err(Error::Unsupported("custom dynamics cannot be written as JSON".into())),
    };
    let transition = match &stage.dynamics.transition {
        Transition::Table(t) => function(Some(t), None),
        Transition::Builtin(b) => function(None, Some(b)),
        Transition::Custom(_) => function(None, None),
    }?;
    let cost = match &stage.dynamics.cost {
        Cost::Table(t) => function(Some(t), None),
        Cost::Builtin(b) => function(None, Some(b)),
        Cost::Custom(_) => function(None, None),
    }?;
    let set = &stage.ambiguity;
    let ambiguity = match &set.kind {
        AmbiguityKind::Generators(g) => AmbiguitySpec::Generators {
            densities: g.iter().map(|d| d.weights().to_vec()).collect(),
            q: set.q,
            norm_bound: set.norm_bound,
        },
        AmbiguityKind::Spectral(phi) => AmbiguitySpec::Spectral {
            spectrum: SpectrumSpec::Steps(phi.clone()),
            q: set.q,
            norm_bound: set.norm_bound,
        },
    };
    let all: Vec<usize> = (0..stage.actions.len()).collect();
    let admissible = (!stage.admissible.iter().all(|d| *d == all)).then(|| stage.admissible.clone());
    Ok(StageSpec {
        actions: stage.actions.points.clone(),
        admissible,
        disturbance: stage.disturbance.clone(),
        ambiguity,
        transition,
        cost,
        generator_mask: stage.generator_mask.clone(),
        monotone: stage.dynamics.monotone,
        convex: stage.dynamics.convex,
    })
}
