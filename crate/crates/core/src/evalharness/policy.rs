use serde::{Deserialize, Serialize};

use crate::dataset::Gripper;
use crate::error::{Error, Result};
use crate::obswindow::FusedObservation;

/// Target position in pixels plus the gripper decision.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub position: [f64; 2],
    pub gripper: Gripper,
}

/// Evaluation-side stand-in for a learned visuomotor policy.
///
/// Implementations must be deterministic for a given observation.
pub trait PolicyAdapter: Sync {
    fn predict(&self, obs: &FusedObservation) -> Result<Prediction>;
}

/// Index of the training observation with the smallest mean squared
/// distance to `query`; ties go to the lowest index.
pub fn nearest_index(train: &[(FusedObservation, Prediction)], query: &FusedObservation) -> Result<usize> {
    if train.is_empty() {
        return Err(Error::Precondition("nearest-neighbour policy has an empty training set".into()));
    }
    let mut best = (f64::INFINITY, 0);
    for (i, (obs, _)) in train.iter().enumerate() {
        let d = obs.mean_squared_distance(query)?;
        if d < best.0 {
            best = (d, i);
        }
    }
    Ok(best.1)
}

pub fn nn_policy_predict(train: &[(FusedObservation, Prediction)], query: &FusedObservation) -> Result<Prediction> {
    Ok(train[nearest_index(train, query)?].1)
}

/// Nearest-neighbour replay over packed fused observations.
#[derive(Debug, Clone)]
pub struct NnPolicy {
    train: Vec<(FusedObservation, Prediction)>,
}

impl NnPolicy {
    pub fn new(train: Vec<(FusedObservation, Prediction)>) -> Result<Self> {
        let first = train
            .first()
            .ok_or_else(|| Error::Precondition("nearest-neighbour policy has an empty training set".into()))?;
        if let Some(i) = train.iter().position(|(o, _)| !o.same_shape(&first.0)) {
            return Err(Error::Shape(format!("training observation {i} differs in shape from observation 0")));
        }
        Ok(Self { train })
    }

    pub fn len(&self) -> usize {
        self.train.len()
    }

    pub fn is_empty(&self) -> bool {
        self.train.is_empty()
    }
}

impl PolicyAdapter for NnPolicy {
    fn predict(&self, obs: &FusedObservation) -> Result<Prediction> {
        nn_policy_predict(&self.train, obs)
    }
}

/// Always answers the same point, whatever it sees.
#[derive(Debug, Clone, Copy)]
pub struct ConstantPolicy(pub Prediction);

impl PolicyAdapter for ConstantPolicy {
    fn predict(&self, _: &FusedObservation) -> Result<Prediction> {
        Ok(self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Trial {
    pub prediction: Prediction,
    pub truth: Prediction,
    pub tolerance: f64,
}

impl Trial {
    pub fn succeeded(&self) -> bool {
        let [px, py] = self.prediction.position;
        let [tx, ty] = self.truth.position;
        (px - tx).hypot(py - ty) <= self.tolerance && self.prediction.gripper == self.truth.gripper
    }
}

/// Percentage of successful trials.
pub fn success_rate(trials: &[Trial]) -> Result<f64> {
    if trials.is_empty() {
        return Err(Error::Precondition("success rate of zero trials".into()));
    }
    let ok = trials.iter().filter(|t| t.succeeded()).count();
    Ok(100.0 * ok as f64 / trials.len() as f64)
}
