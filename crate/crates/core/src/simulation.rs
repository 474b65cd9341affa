//! Seeded forecaster archetypes and the Monte Carlo study harness.
//!
//! One replicate draws calibrated probabilities `p ~ U(0, 1)` and outcomes
//! `y ~ Bernoulli(p)`, perturbs `p` on the log-odds scale with `N(0, σ²)`
//! noise, then LLO-distorts the noisy probabilities per forecaster. All
//! forecasters in a replicate share `(p, y)`, and all forecasters with the
//! same σ share one noise draw, so within a noise level they differ only by
//! a monotone map.
//!
//! Randomness comes from ChaCha8 keyed by the replicate seed, with separate
//! streams for `p`, `y` and each noise level. Adding forecasters or noise
//! levels never changes the draws of existing ones.

use std::fmt;
use std::str::FromStr;

use rand::distributions::Open01;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::assessment::{assess, ScoreReport, DEFAULT_BINS, DEFAULT_PRIOR};
use crate::error::{CalibError, Result};
use crate::llo::{llo_adjust, LloParams, PredictionSet};

pub const DESIGN_SAMPLE_SIZES: [usize; 5] = [30, 100, 800, 2000, 5000];
pub const DESIGN_NOISE_LEVELS: [f64; 5] = [0.0, 0.1, 0.5, 1.0, 2.0];
pub const DESIGN_REPLICATES: usize = 100;

const STREAM_P: u64 = 0;
const STREAM_Y: u64 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ForecasterKind {
    WellCalibrated,
    Hedger,
    Boaster,
    Biased,
    Custom,
}

impl ForecasterKind {
    pub const ARCHETYPES: [ForecasterKind; 4] = [
        ForecasterKind::WellCalibrated,
        ForecasterKind::Hedger,
        ForecasterKind::Boaster,
        ForecasterKind::Biased,
    ];

    /// Distortion `(δ, γ)` applied to the noisy calibrated probabilities.
    pub fn archetype_params(self) -> Option<LloParams> {
        let (delta, gamma) = match self {
            ForecasterKind::WellCalibrated => (1.0, 1.0),
            ForecasterKind::Hedger => (1.0, 0.25),
            ForecasterKind::Boaster => (1.0, 2.0),
            ForecasterKind::Biased => (2.0, 1.0),
            ForecasterKind::Custom => return None,
        };
        Some(LloParams { delta, gamma })
    }

    pub fn name(self) -> &'static str {
        match self {
            ForecasterKind::WellCalibrated => "well_calibrated",
            ForecasterKind::Hedger => "hedger",
            ForecasterKind::Boaster => "boaster",
            ForecasterKind::Biased => "biased",
            ForecasterKind::Custom => "custom",
        }
    }
}

impl fmt::Display for ForecasterKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ForecasterKind {
    type Err = CalibError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().replace('-', "_").as_str() {
            "wc" | "well_calibrated" | "wellcalibrated" => Ok(ForecasterKind::WellCalibrated),
            "hedger" => Ok(ForecasterKind::Hedger),
            "boaster" => Ok(ForecasterKind::Boaster),
            "biased" => Ok(ForecasterKind::Biased),
            other => Err(CalibError::InvalidParameter(format!(
                "unknown forecaster type '{other}' (expected well_calibrated, hedger, boaster or biased)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ForecasterSpec {
    pub kind: ForecasterKind,
    pub delta: f64,
    pub gamma: f64,
    pub noise_sigma: f64,
}

impl ForecasterSpec {
    pub fn archetype(kind: ForecasterKind, noise_sigma: f64) -> Result<Self> {
        let params = kind.archetype_params().ok_or_else(|| {
            CalibError::InvalidParameter("custom forecasters need explicit parameters".into())
        })?;
        Self::build(kind, params.delta, params.gamma, noise_sigma)
    }

    pub fn custom(delta: f64, gamma: f64, noise_sigma: f64) -> Result<Self> {
        Self::build(ForecasterKind::Custom, delta, gamma, noise_sigma)
    }

    fn build(kind: ForecasterKind, delta: f64, gamma: f64, noise_sigma: f64) -> Result<Self> {
        LloParams::new(delta, gamma)?;
        if !(noise_sigma >= 0.0 && noise_sigma.is_finite()) {
            return Err(CalibError::InvalidParameter(format!(
                "noise sigma must be a non-negative real, got {noise_sigma}"
            )));
        }
        Ok(ForecasterSpec {
            kind,
            delta,
            gamma,
            noise_sigma,
        })
    }

    pub fn params(&self) -> LloParams {
        LloParams {
            delta: self.delta,
            gamma: self.gamma,
        }
    }

    /// Name used in study output. Custom forecasters carry their parameters.
    pub fn label(&self) -> String {
        match self.kind {
            ForecasterKind::Custom => format!("custom_d{}_g{}", self.delta, self.gamma),
            kind => kind.name().to_string(),
        }
    }

    /// The four archetypes crossed with the five design noise levels.
    pub fn design() -> Vec<ForecasterSpec> {
        ForecasterKind::ARCHETYPES
            .iter()
            .flat_map(|&kind| {
                DESIGN_NOISE_LEVELS
                    .iter()
                    .map(move |&sigma| ForecasterSpec::archetype(kind, sigma).expect("design values are valid"))
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Replicate {
    /// Calibrated probabilities.
    pub p: Vec<f64>,
    pub y: Vec<u8>,
    /// One prediction vector per requested spec, in request order.
    pub predictions: Vec<Vec<f64>>,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn noise_stream(sigma: f64) -> u64 {
    splitmix64(sigma.to_bits()).max(STREAM_Y + 1)
}

fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Seed of one `(n, replicate)` cell of a study.
pub fn replicate_seed(study_seed: u64, n: usize, replicate: usize) -> u64 {
    splitmix64(splitmix64(study_seed ^ splitmix64(n as u64)).wrapping_add(replicate as u64))
}

pub fn generate_replicate(n: usize, specs: &[ForecasterSpec], seed: u64) -> Result<Replicate> {
    if n == 0 {
        return Err(CalibError::InvalidParameter("replicate size must be at least 1".into()));
    }
    let mut p_rng = rng_for(seed, STREAM_P);
    let p: Vec<f64> = (0..n).map(|_| p_rng.sample(Open01)).collect();
    let mut y_rng = rng_for(seed, STREAM_Y);
    let y: Vec<u8> = p
        .iter()
        .map(|&pi| u8::from(y_rng.sample::<f64, _>(Open01) < pi))
        .collect();

    let mut noisy_by_sigma: Vec<(u64, Vec<f64>)> = Vec::new();
    let mut predictions = Vec::with_capacity(specs.len());
    for spec in specs {
        let key = spec.noise_sigma.to_bits();
        let base = match noisy_by_sigma.iter().position(|(k, _)| *k == key) {
            Some(i) => &noisy_by_sigma[i].1,
            None => {
                noisy_by_sigma.push((key, add_noise(&p, spec.noise_sigma, seed)?));
                &noisy_by_sigma.last().expect("just pushed").1
            }
        };
        predictions.push(llo_adjust(base, &spec.params())?);
    }
    Ok(Replicate { p, y, predictions })
}

/// `e^v p / ((1 - p) + e^v p)` with `v ~ N(0, σ²)` drawn by inverse CDF.
fn add_noise(p: &[f64], sigma: f64, seed: u64) -> Result<Vec<f64>> {
    if sigma == 0.0 {
        return Ok(p.to_vec());
    }
    let normal = Normal::new(0.0, sigma).map_err(|e| CalibError::InvalidParameter(e.to_string()))?;
    let mut rng = rng_for(seed, noise_stream(sigma));
    Ok(p.iter()
        .map(|&pi| {
            let v = normal.inverse_cdf(rng.sample(Open01));
            let scaled = v.exp() * pi;
            scaled / ((1.0 - pi) + scaled)
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McStudyConfig {
    pub n_values: Vec<usize>,
    pub replicates: usize,
    pub seed: u64,
    pub forecasters: Vec<ForecasterSpec>,
}

impl Default for McStudyConfig {
    fn default() -> Self {
        McStudyConfig {
            n_values: DESIGN_SAMPLE_SIZES.to_vec(),
            replicates: DESIGN_REPLICATES,
            seed: 0,
            forecasters: ForecasterSpec::design(),
        }
    }
}

impl McStudyConfig {
    pub fn validate(&self) -> Result<()> {
        if self.replicates == 0 {
            return Err(CalibError::InvalidParameter("replicates must be at least 1".into()));
        }
        if self.n_values.is_empty() || self.n_values.contains(&0) {
            return Err(CalibError::InvalidParameter("sample sizes must be positive".into()));
        }
        if self.forecasters.is_empty() {
            return Err(CalibError::InvalidParameter("no forecasters requested".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyRow {
    pub n: usize,
    pub replicate: usize,
    pub forecaster: String,
    pub sigma: f64,
    /// 0 when the cell is degenerate.
    pub posterior: f64,
    pub lrt_p_value: Option<f64>,
    pub brier: f64,
    pub brier_calibration: f64,
    pub ece: f64,
    pub auc: Option<f64>,
    /// The MLE diverged or failed to converge for this cell.
    pub degenerate: bool,
}

impl StudyRow {
    /// `(metric, value)` pairs in output order; `None` is written as `NA`.
    pub fn metrics(&self) -> [(&'static str, Option<f64>); 7] {
        [
            ("posterior", Some(self.posterior)),
            ("lrt_p_value", self.lrt_p_value),
            ("brier", Some(self.brier)),
            ("bsc", Some(self.brier_calibration)),
            ("ece", Some(self.ece)),
            ("auc", self.auc),
            ("degenerate", Some(if self.degenerate { 1.0 } else { 0.0 })),
        ]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyTable {
    pub rows: Vec<StudyRow>,
}

impl StudyTable {
    pub fn cell<'a>(&'a self, n: usize, forecaster: &'a str, sigma: f64) -> impl Iterator<Item = &'a StudyRow> + 'a {
        self.rows
            .iter()
            .filter(move |r| r.n == n && r.forecaster == forecaster && r.sigma == sigma)
    }
}

fn score_cell(n: usize, replicate: usize, spec: &ForecasterSpec, x: Vec<f64>, y: &[u8]) -> Result<StudyRow> {
    let data = PredictionSet::new(x, y.to_vec())?;
    let (posterior, lrt_p_value, degenerate, scores) = match assess(&data, DEFAULT_PRIOR, DEFAULT_BINS) {
        Ok(report) => (
            report.posterior_calibrated(),
            report.lrt.map(|l| l.p_value),
            report.degenerate,
            report.scores,
        ),
        Err(CalibError::NonConvergence { .. }) => (0.0, None, true, ScoreReport::compute(&data, DEFAULT_BINS)?),
        Err(e) => return Err(e),
    };
    Ok(StudyRow {
        n,
        replicate,
        forecaster: spec.label(),
        sigma: spec.noise_sigma,
        posterior,
        lrt_p_value,
        brier: scores.brier,
        brier_calibration: scores.brier_calibration,
        ece: scores.ece,
        auc: scores.auc,
        degenerate,
    })
}

/// Rows ordered by n, then replicate, then forecaster in config order.
pub fn run_mc_study(config: &McStudyConfig) -> Result<StudyTable> {
    config.validate()?;
    let cells: Vec<(usize, usize)> = config
        .n_values
        .iter()
        .flat_map(|&n| (0..config.replicates).map(move |r| (n, r)))
        .collect();
    let per_cell = cells
        .par_iter()
        .map(|&(n, replicate)| {
            let rep = generate_replicate(n, &config.forecasters, replicate_seed(config.seed, n, replicate))?;
            config
                .forecasters
                .iter()
                .zip(rep.predictions)
                .map(|(spec, x)| score_cell(n, replicate, spec, x, &rep.y))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(StudyTable {
        rows: per_cell.into_iter().flatten().collect(),
    })
}
