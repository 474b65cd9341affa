//! Posterior grids over `(δ, γ)` and boldness-recalibration.
//!
//! Every grid cell LLO-adjusts the predictions, then scores the adjusted set
//! with the calibration posterior and measures its spread (sample standard
//! deviation). Boldness-recalibration at level `t` picks the cell with the
//! largest spread among cells whose posterior is at least `t`.
//!
//! Scoring a cell needs the maximised likelihood of the adjusted set over
//! the whole LLO family. LLO maps compose into LLO maps, and for `γ ≠ 0` the
//! composition is a bijection of the parameter space, so that maximum equals
//! the maximum for the raw predictions and one fit serves the whole grid.
//! At `γ = 0` the adjusted set is constant and the family can only reach
//! constant probabilities, so the maximum is the Bernoulli likelihood at the
//! base rate.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::assessment::{BayesAssessment, DEFAULT_PRIOR};
use crate::error::{CalibError, Result};
use crate::estimation::{fit_mle, MleFit};
use crate::llo::{llo_adjust, LloParams, LogOddsData, PredictionSet};

pub const DEFAULT_GRID_SIZE: usize = 200;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub delta_values: Vec<f64>,
    pub gamma_values: Vec<f64>,
    /// Set by [`refine_grid`] when the expansion cap was hit before the
    /// high-posterior region was enclosed.
    pub partial_coverage: bool,
}

fn strictly_increasing(v: &[f64]) -> bool {
    v.windows(2).all(|w| w[0] < w[1])
}

impl GridSpec {
    pub fn new(delta_values: Vec<f64>, gamma_values: Vec<f64>) -> Result<Self> {
        if delta_values.is_empty() || gamma_values.is_empty() {
            return Err(CalibError::InvalidParameter("grid axes must be non-empty".into()));
        }
        if !delta_values.iter().all(|&d| d > 0.0 && d.is_finite()) {
            return Err(CalibError::InvalidParameter("grid delta values must be positive".into()));
        }
        if !gamma_values.iter().all(|g| g.is_finite()) {
            return Err(CalibError::InvalidParameter("grid gamma values must be finite".into()));
        }
        if !strictly_increasing(&delta_values) || !strictly_increasing(&gamma_values) {
            return Err(CalibError::InvalidParameter("grid axes must be strictly increasing".into()));
        }
        Ok(GridSpec {
            delta_values,
            gamma_values,
            partial_coverage: false,
        })
    }

    /// `k` log-spaced deltas and `k` linearly spaced gammas, endpoints included.
    pub fn from_ranges(delta_range: (f64, f64), gamma_range: (f64, f64), k: usize) -> Result<Self> {
        let (d_lo, d_hi) = delta_range;
        let (g_lo, g_hi) = gamma_range;
        if !(d_lo > 0.0) || !(d_lo < d_hi) || !(g_lo < g_hi) {
            return Err(CalibError::InvalidParameter(format!(
                "grid ranges must satisfy 0 < delta_lo < delta_hi and gamma_lo < gamma_hi, got ({d_lo}, {d_hi}) and ({g_lo}, {g_hi})"
            )));
        }
        if k < 2 {
            return Err(CalibError::InvalidParameter("grid needs at least 2 points per axis".into()));
        }
        let (l_lo, l_hi) = (d_lo.ln(), d_hi.ln());
        let deltas = linspace(l_lo, l_hi, k).into_iter().map(f64::exp).collect();
        Self::new(deltas, linspace(g_lo, g_hi, k))
    }

    pub fn len(&self) -> usize {
        self.delta_values.len() * self.gamma_values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

fn linspace(lo: f64, hi: f64, k: usize) -> Vec<f64> {
    let step = (hi - lo) / (k - 1) as f64;
    (0..k)
        .map(|i| if i + 1 == k { hi } else { lo + step * i as f64 })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridCell {
    pub delta: f64,
    pub gamma: f64,
    pub posterior: f64,
    pub spread: f64,
    /// The MLE of the underlying data diverged; posterior is reported as 0.
    pub degenerate: bool,
}

/// Grid cells in row-major order: delta index outer, gamma index inner.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContourGrid {
    pub delta_values: Vec<f64>,
    pub gamma_values: Vec<f64>,
    pub cells: Vec<GridCell>,
}

impl ContourGrid {
    pub fn cell(&self, delta_index: usize, gamma_index: usize) -> &GridCell {
        &self.cells[delta_index * self.gamma_values.len() + gamma_index]
    }

    pub fn max_posterior(&self) -> f64 {
        self.cells.iter().map(|c| c.posterior).fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoldnessResult {
    pub t: f64,
    pub params: LloParams,
    pub recalibrated: Vec<f64>,
    pub achieved_posterior: f64,
    pub achieved_spread: f64,
    pub feasible: bool,
}

impl BoldnessResult {
    pub fn range(&self) -> (f64, f64) {
        min_max(&self.recalibrated)
    }
}

pub(crate) fn min_max(x: &[f64]) -> (f64, f64) {
    x.iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)))
}

/// Sample standard deviation (divisor `n - 1`); 0 for fewer than two values.
pub fn spread(x: &[f64]) -> f64 {
    if x.len() < 2 || x.iter().all(|&v| v == x[0]) {
        return 0.0;
    }
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let ss: f64 = x.iter().map(|v| (v - mean).powi(2)).sum();
    (ss / (n - 1.0)).sqrt()
}

/// Best log-likelihood reachable by constant predictions: Bernoulli at the base rate.
fn constant_model_loglik(data: &PredictionSet) -> f64 {
    let n = data.len() as f64;
    let events = data.events() as f64;
    let mut ll = 0.0;
    if events > 0.0 {
        ll += events * (events / n).ln();
    }
    if events < n {
        ll += (n - events) * ((n - events) / n).ln();
    }
    ll
}

/// Maximised log-likelihood of the raw data, or `None` when it diverges.
fn raw_max_loglik(data: &PredictionSet) -> Result<Option<f64>> {
    match fit_mle(data) {
        Ok(fit) => Ok(Some(fit.loglik_at_mle)),
        Err(CalibError::Divergence(_)) => Ok(None),
        Err(e) => Err(e),
    }
}

pub fn evaluate_grid(data: &PredictionSet, spec: &GridSpec) -> Result<ContourGrid> {
    let max_loglik = raw_max_loglik(data)?;
    evaluate_with_max(data, spec, max_loglik)
}

fn evaluate_with_max(data: &PredictionSet, spec: &GridSpec, max_loglik: Option<f64>) -> Result<ContourGrid> {
    let k_gamma = spec.gamma_values.len();
    let constant_loglik = constant_model_loglik(data);
    let cells = (0..spec.len())
        .into_par_iter()
        .map(|idx| {
            let params = LloParams::new(spec.delta_values[idx / k_gamma], spec.gamma_values[idx % k_gamma])?;
            let adjusted = llo_adjust(data.x(), &params)?;
            let spread = spread(&adjusted);
            let Some(raw_max) = max_loglik else {
                return Ok(GridCell {
                    delta: params.delta,
                    gamma: params.gamma,
                    posterior: 0.0,
                    spread,
                    degenerate: true,
                });
            };
            let null_loglik = LogOddsData::from_parts(&adjusted, data.y()).log_likelihood(0.0, 1.0);
            let family_max = if params.gamma == 0.0 { constant_loglik } else { raw_max };
            let bayes = BayesAssessment::from_log_likelihoods(
                data.len(),
                null_loglik,
                family_max.max(null_loglik),
                DEFAULT_PRIOR,
            );
            Ok(GridCell {
                delta: params.delta,
                gamma: params.gamma,
                posterior: bayes.posterior_calibrated,
                spread,
                degenerate: false,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ContourGrid {
        delta_values: spec.delta_values.clone(),
        gamma_values: spec.gamma_values.clone(),
        cells,
    })
}

#[derive(Debug, Clone, Copy)]
pub struct RefineOptions {
    /// Points per axis while searching for the high-posterior region (odd,
    /// so the MLE sits on the centre cell).
    pub coarse_k: usize,
    /// Points per axis of the returned grid.
    pub k: usize,
    /// The region is covered once every boundary cell is below this.
    pub boundary_posterior: f64,
    pub max_doublings: usize,
    /// Initial half-widths in `log δ` and `γ`.
    pub initial_half_width: f64,
}

impl Default for RefineOptions {
    fn default() -> Self {
        RefineOptions {
            coarse_k: 15,
            k: DEFAULT_GRID_SIZE,
            boundary_posterior: 1e-4,
            max_doublings: 10,
            initial_half_width: 0.25,
        }
    }
}

pub fn refine_grid(data: &PredictionSet, mle: &MleFit) -> Result<GridSpec> {
    refine_grid_with(data, mle, &RefineOptions::default())
}

/// Grid centred on the MLE, widened until the posterior has decayed below
/// the boundary threshold on all four edges, then densified.
pub fn refine_grid_with(data: &PredictionSet, mle: &MleFit, options: &RefineOptions) -> Result<GridSpec> {
    if !mle.converged {
        return Err(CalibError::InvalidParameter(
            "grid refinement needs a converged MLE".into(),
        ));
    }
    let centre_log_delta = mle.params.log_delta();
    let centre_gamma = mle.params.gamma;
    let mut half_log_delta = options.initial_half_width;
    let mut half_gamma = options.initial_half_width;
    let max_loglik = Some(mle.loglik_at_mle);

    let mut doublings = 0;
    let covered = loop {
        let spec = GridSpec::from_ranges(
            ((centre_log_delta - half_log_delta).exp(), (centre_log_delta + half_log_delta).exp()),
            (centre_gamma - half_gamma, centre_gamma + half_gamma),
            options.coarse_k,
        )?;
        let grid = evaluate_with_max(data, &spec, max_loglik)?;
        let k = options.coarse_k;
        let edge_max = |cells: &mut dyn Iterator<Item = (usize, usize)>| {
            cells.map(|(i, j)| grid.cell(i, j).posterior).fold(0.0, f64::max)
        };
        let delta_edges = edge_max(&mut (0..k).flat_map(|j| [(0, j), (k - 1, j)]));
        let gamma_edges = edge_max(&mut (0..k).flat_map(|i| [(i, 0), (i, k - 1)]));
        let widen_delta = delta_edges >= options.boundary_posterior;
        let widen_gamma = gamma_edges >= options.boundary_posterior;
        if !widen_delta && !widen_gamma {
            break true;
        }
        if doublings == options.max_doublings {
            break false;
        }
        if widen_delta {
            half_log_delta *= 2.0;
        }
        if widen_gamma {
            half_gamma *= 2.0;
        }
        doublings += 1;
    };

    let mut spec = GridSpec::from_ranges(
        ((centre_log_delta - half_log_delta).exp(), (centre_log_delta + half_log_delta).exp()),
        (centre_gamma - half_gamma, centre_gamma + half_gamma),
        options.k,
    )?;
    spec.partial_coverage = !covered;
    Ok(spec)
}

fn check_level(t: f64) -> Result<()> {
    if t > 0.0 && t < 1.0 {
        Ok(())
    } else {
        Err(CalibError::InvalidParameter(format!(
            "calibration level t must lie in (0, 1), got {t}"
        )))
    }
}

/// Pick the boldest feasible cell of an evaluated grid. Ties on spread go
/// to the higher posterior, then to the gamma closest to 1, then to the
/// lower grid index. With no feasible cell the highest-posterior cell is
/// returned with `feasible = false`.
pub fn select_boldness(data: &PredictionSet, grid: &ContourGrid, t: f64) -> Result<BoldnessResult> {
    check_level(t)?;
    let better = |a: &GridCell, b: &GridCell| {
        a.spread > b.spread
            || (a.spread == b.spread
                && (a.posterior > b.posterior
                    || (a.posterior == b.posterior && (a.gamma - 1.0).abs() < (b.gamma - 1.0).abs())))
    };
    let mut chosen: Option<&GridCell> = None;
    for cell in grid.cells.iter().filter(|c| c.posterior >= t) {
        if chosen.is_none_or(|c| better(cell, c)) {
            chosen = Some(cell);
        }
    }
    let feasible = chosen.is_some();
    let cell = match chosen {
        Some(c) => c,
        None => grid
            .cells
            .iter()
            .fold(None, |best: Option<&GridCell>, c| match best {
                Some(b) if b.posterior >= c.posterior => Some(b),
                _ => Some(c),
            })
            .ok_or_else(|| CalibError::InvalidParameter("grid has no cells".into()))?,
    };
    let params = LloParams::new(cell.delta, cell.gamma)?;
    Ok(BoldnessResult {
        t,
        params,
        recalibrated: llo_adjust(data.x(), &params)?,
        achieved_posterior: cell.posterior,
        achieved_spread: cell.spread,
        feasible,
    })
}

pub fn boldness_recalibrate(data: &PredictionSet, t: f64, spec: &GridSpec) -> Result<BoldnessResult> {
    check_level(t)?;
    let grid = evaluate_grid(data, spec)?;
    select_boldness(data, &grid, t)
}
