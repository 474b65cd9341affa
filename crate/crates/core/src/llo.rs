//! Linear-log-odds (LLO) recalibration and the Bernoulli likelihood it induces.
//!
//! On the log-odds scale the LLO map is the line
//! `logit c(x; δ, γ) = γ·logit(x) + log δ`, which is how everything here is
//! evaluated. Predictions are clamped into `[CLAMP_EPS, 1 - CLAMP_EPS]` before
//! any log-odds transform, and adjusted probabilities are clamped the same way,
//! so likelihoods stay finite when forecasters emit exact 0s and 1s.

use serde::{Deserialize, Serialize};

use crate::error::{CalibError, Result};

/// Boundary clamp applied before every log-odds transform.
pub const CLAMP_EPS: f64 = 1e-9;

/// Log-odds bound equivalent to clamping a probability into
/// `[CLAMP_EPS, 1 - CLAMP_EPS]`.
pub(crate) fn eta_bound() -> f64 {
    logit_raw(1.0 - CLAMP_EPS)
}

#[inline]
pub fn clamp_probability(p: f64) -> f64 {
    p.clamp(CLAMP_EPS, 1.0 - CLAMP_EPS)
}

#[inline]
fn logit_raw(p: f64) -> f64 {
    p.ln() - (-p).ln_1p()
}

/// Log-odds of a probability after clamping.
#[inline]
pub fn logit(p: f64) -> f64 {
    logit_raw(clamp_probability(p))
}

#[inline]
pub fn sigmoid(eta: f64) -> f64 {
    if eta >= 0.0 {
        1.0 / (1.0 + (-eta).exp())
    } else {
        let e = eta.exp();
        e / (1.0 + e)
    }
}

/// `log(1 + e^z)` without overflow.
#[inline]
pub(crate) fn softplus(z: f64) -> f64 {
    z.max(0.0) + (-z.abs()).exp().ln_1p()
}

/// Shift/scale pair of the LLO map. `delta > 0`, `gamma` unrestricted.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LloParams {
    pub delta: f64,
    pub gamma: f64,
}

impl LloParams {
    /// The calibrated model: no shift, no scaling.
    pub const IDENTITY: LloParams = LloParams {
        delta: 1.0,
        gamma: 1.0,
    };

    pub fn new(delta: f64, gamma: f64) -> Result<Self> {
        let params = LloParams { delta, gamma };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.delta > 0.0) || !self.delta.is_finite() {
            return Err(CalibError::InvalidParameter(format!(
                "delta must be positive and finite, got {}",
                self.delta
            )));
        }
        if !self.gamma.is_finite() {
            return Err(CalibError::InvalidParameter(format!(
                "gamma must be finite, got {}",
                self.gamma
            )));
        }
        Ok(())
    }

    pub fn is_identity(&self) -> bool {
        self.delta == 1.0 && self.gamma == 1.0
    }

    /// Intercept of the log-odds line, `log δ`.
    pub fn log_delta(&self) -> f64 {
        self.delta.ln()
    }
}

/// Paired probability predictions and binary outcomes.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictionSet {
    x: Vec<f64>,
    y: Vec<u8>,
    labels: Option<Vec<String>>,
}

impl PredictionSet {
    pub fn new(x: Vec<f64>, y: Vec<u8>) -> Result<Self> {
        if x.is_empty() {
            return Err(CalibError::InvalidData("prediction set is empty".into()));
        }
        if x.len() != y.len() {
            return Err(CalibError::InvalidData(format!(
                "{} predictions but {} outcomes",
                x.len(),
                y.len()
            )));
        }
        if let Some(i) = x.iter().position(|p| !(0.0..=1.0).contains(p)) {
            return Err(CalibError::InvalidData(format!(
                "prediction {} at index {i} is outside [0, 1]",
                x[i]
            )));
        }
        if let Some(i) = y.iter().position(|&o| o > 1) {
            return Err(CalibError::InvalidData(format!(
                "outcome {} at index {i} is not 0 or 1",
                y[i]
            )));
        }
        Ok(PredictionSet { x, y, labels: None })
    }

    pub fn with_labels(mut self, labels: Vec<String>) -> Result<Self> {
        if labels.len() != self.x.len() {
            return Err(CalibError::InvalidData(format!(
                "{} labels for {} predictions",
                labels.len(),
                self.x.len()
            )));
        }
        self.labels = Some(labels);
        Ok(self)
    }

    pub fn x(&self) -> &[f64] {
        &self.x
    }

    pub fn y(&self) -> &[u8] {
        &self.y
    }

    pub fn labels(&self) -> Option<&[String]> {
        self.labels.as_deref()
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    pub fn events(&self) -> usize {
        self.y.iter().filter(|&&o| o == 1).count()
    }

    /// Sample proportion of events.
    pub fn base_rate(&self) -> f64 {
        self.events() as f64 / self.len() as f64
    }

    /// Both outcome classes present.
    pub fn has_both_classes(&self) -> bool {
        let events = self.events();
        events > 0 && events < self.len()
    }

    /// Same outcomes, new predictions. Labels are carried over.
    pub fn with_predictions(&self, x: Vec<f64>) -> Result<Self> {
        let mut set = PredictionSet::new(x, self.y.clone())?;
        set.labels = self.labels.clone();
        Ok(set)
    }
}

/// Apply the LLO map elementwise.
pub fn llo_adjust(x: &[f64], params: &LloParams) -> Result<Vec<f64>> {
    params.validate()?;
    if params.is_identity() {
        return Ok(x.iter().map(|&p| clamp_probability(p)).collect());
    }
    let log_delta = params.log_delta();
    Ok(x
        .iter()
        .map(|&p| clamp_probability(sigmoid(params.gamma * logit(p) + log_delta)))
        .collect())
}

/// Parameters of the inverse map, `(δ^(-1/γ), 1/γ)`.
pub fn llo_inverse(params: &LloParams) -> Result<LloParams> {
    params.validate()?;
    if params.gamma == 0.0 {
        return Err(CalibError::NonInvertible {
            gamma: params.gamma,
        });
    }
    let gamma = 1.0 / params.gamma;
    LloParams::new(params.delta.powf(-gamma), gamma)
}

/// Bernoulli log-likelihood of the outcomes under LLO-adjusted predictions.
pub fn log_likelihood(data: &PredictionSet, params: &LloParams) -> Result<f64> {
    params.validate()?;
    Ok(LogOddsData::new(data).log_likelihood(params.log_delta(), params.gamma))
}

/// Predictions pre-transformed to the log-odds scale, for repeated
/// likelihood evaluation during fitting and grid sweeps.
#[derive(Debug, Clone)]
pub(crate) struct LogOddsData {
    pub logits: Vec<f64>,
    pub outcomes: Vec<f64>,
}

impl LogOddsData {
    pub fn new(data: &PredictionSet) -> Self {
        Self::from_parts(data.x(), data.y())
    }

    pub fn from_parts(x: &[f64], y: &[u8]) -> Self {
        LogOddsData {
            logits: x.iter().map(|&p| logit(p)).collect(),
            outcomes: y.iter().map(|&o| f64::from(o)).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.logits.len()
    }

    /// Log-likelihood at `(log δ, γ)`; the linear predictor is clamped to
    /// the same bounds as adjusted probabilities.
    pub fn log_likelihood(&self, log_delta: f64, gamma: f64) -> f64 {
        let bound = eta_bound();
        self.logits
            .iter()
            .zip(&self.outcomes)
            .map(|(&l, &o)| {
                let eta = (gamma * l + log_delta).clamp(-bound, bound);
                // y·log σ(η) + (1-y)·log(1-σ(η))
                -(o * softplus(-eta) + (1.0 - o) * softplus(eta))
            })
            .sum()
    }

    /// Gradient and negative Hessian of the log-likelihood in `(log δ, γ)`.
    /// Observations whose linear predictor sits on the clamp contribute
    /// nothing, matching the flat objective there.
    pub fn gradient_and_information(&self, log_delta: f64, gamma: f64) -> ([f64; 2], [[f64; 2]; 2]) {
        let bound = eta_bound();
        let mut grad = [0.0; 2];
        let mut info = [[0.0; 2]; 2];
        for (&l, &o) in self.logits.iter().zip(&self.outcomes) {
            let eta = gamma * l + log_delta;
            if eta.abs() >= bound {
                continue;
            }
            let c = sigmoid(eta);
            let r = o - c;
            let w = c * (1.0 - c);
            grad[0] += r;
            grad[1] += r * l;
            info[0][0] += w;
            info[0][1] += w * l;
            info[1][1] += w * l * l;
        }
        info[1][0] = info[0][1];
        (grad, info)
    }
}
