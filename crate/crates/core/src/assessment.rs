//! Calibration inference and comparison scores.
//!
//! The calibrated model `M_c` fixes `δ = γ = 1`; the alternative frees both.
//! The Bayes factor `BF₂₁` is approximated from the two BICs, and the
//! likelihood-ratio statistic compares the same two likelihoods, so
//! `BF₂₁ = exp(λ_LR / 2) / n` holds exactly in exact arithmetic.

use serde::{Deserialize, Serialize};

use crate::error::{CalibError, Result};
use crate::estimation::{fit_mle, MleFit};
use crate::llo::PredictionSet;

pub const DEFAULT_BINS: usize = 10;
pub const DEFAULT_PRIOR: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BayesAssessment {
    pub bic_null: f64,
    pub bic_mle: f64,
    pub bayes_factor_21: f64,
    pub prior_calibrated: f64,
    pub posterior_calibrated: f64,
}

impl BayesAssessment {
    /// Posterior of `M_c` from the two maximised log-likelihoods.
    pub fn from_log_likelihoods(n: usize, loglik_null: f64, loglik_mle: f64, prior_calibrated: f64) -> Self {
        let bic_null = -2.0 * loglik_null;
        let bic_mle = 2.0 * (n as f64).ln() - 2.0 * loglik_mle;
        let log_bf = -0.5 * (bic_mle - bic_null);
        let bayes_factor_21 = log_bf.exp();
        // 1 / (1 + BF·(1-π)/π), evaluated on the log scale so a huge BF gives 0
        let log_odds_against = log_bf + (1.0 - prior_calibrated).ln() - prior_calibrated.ln();
        let posterior_calibrated = if log_odds_against > 0.0 {
            let e = (-log_odds_against).exp();
            e / (1.0 + e)
        } else {
            1.0 / (1.0 + log_odds_against.exp())
        };
        BayesAssessment {
            bic_null,
            bic_mle,
            bayes_factor_21,
            prior_calibrated,
            posterior_calibrated,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LrtResult {
    pub statistic: f64,
    pub p_value: f64,
    pub dof: u32,
}

impl LrtResult {
    /// χ²₂ survival function has the closed form `exp(-λ/2)`.
    pub fn from_statistic(statistic: f64) -> Self {
        LrtResult {
            statistic,
            p_value: (-0.5 * statistic).exp(),
            dof: 2,
        }
    }

    pub fn from_fit(fit: &MleFit) -> Result<Self> {
        let statistic = 2.0 * (fit.loglik_at_mle - fit.loglik_at_null);
        if statistic < -1e-8 {
            return Err(CalibError::Inconsistent(format!(
                "likelihood-ratio statistic {statistic} is negative; the optimum is worse than the null"
            )));
        }
        Ok(Self::from_statistic(statistic.max(0.0)))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreReport {
    pub brier: f64,
    pub brier_calibration: f64,
    pub ece: f64,
    /// `None` when only one outcome class is present.
    pub auc: Option<f64>,
    pub n_bins: usize,
    pub bin_edges: Vec<f64>,
}

impl ScoreReport {
    pub fn compute(data: &PredictionSet, n_bins: usize) -> Result<Self> {
        let bins = BinSummary::new(data, n_bins)?;
        Ok(ScoreReport {
            brier: brier(data),
            brier_calibration: bins.brier_calibration(data.len()),
            ece: bins.ece(data.len()),
            auc: match auc(data) {
                Ok(a) => Some(a),
                Err(CalibError::UndefinedAuc) => None,
                Err(e) => return Err(e),
            },
            n_bins,
            bin_edges: bins.edges,
        })
    }
}

/// Everything the `assess` command reports.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationReport {
    pub n: usize,
    pub base_rate: f64,
    /// `None` when the MLE diverges; the posterior is then reported as 0.
    pub bayes: Option<BayesAssessment>,
    pub lrt: Option<LrtResult>,
    pub mle: Option<MleFit>,
    pub scores: ScoreReport,
    pub degenerate: bool,
}

impl CalibrationReport {
    pub fn posterior_calibrated(&self) -> f64 {
        self.bayes.map_or(0.0, |b| b.posterior_calibrated)
    }
}

fn check_prior(prior: f64) -> Result<()> {
    if prior > 0.0 && prior < 1.0 {
        Ok(())
    } else {
        Err(CalibError::InvalidParameter(format!(
            "prior probability of calibration must lie in (0, 1), got {prior}"
        )))
    }
}

/// Posterior probability that the predictions are calibrated.
pub fn posterior_calibration(data: &PredictionSet, prior_calibrated: f64) -> Result<BayesAssessment> {
    check_prior(prior_calibrated)?;
    let fit = fit_mle(data)?;
    Ok(BayesAssessment::from_log_likelihoods(
        data.len(),
        fit.loglik_at_null,
        fit.loglik_at_mle,
        prior_calibrated,
    ))
}

/// Likelihood-ratio test of `δ = γ = 1` against the free LLO model.
pub fn lrt(data: &PredictionSet) -> Result<LrtResult> {
    LrtResult::from_fit(&fit_mle(data)?)
}

/// Full report from a single MLE fit. Divergent data yields a degenerate
/// report (posterior 0, no LRT) rather than an error.
pub fn assess(data: &PredictionSet, prior_calibrated: f64, n_bins: usize) -> Result<CalibrationReport> {
    check_prior(prior_calibrated)?;
    let scores = ScoreReport::compute(data, n_bins)?;
    let (mle, bayes, lrt, degenerate) = match fit_mle(data) {
        Ok(fit) => {
            let bayes = BayesAssessment::from_log_likelihoods(
                data.len(),
                fit.loglik_at_null,
                fit.loglik_at_mle,
                prior_calibrated,
            );
            (Some(fit), Some(bayes), Some(LrtResult::from_fit(&fit)?), false)
        }
        Err(CalibError::Divergence(_)) => (None, None, None, true),
        Err(e) => return Err(e),
    };
    Ok(CalibrationReport {
        n: data.len(),
        base_rate: data.base_rate(),
        bayes,
        lrt,
        mle,
        scores,
        degenerate,
    })
}

pub fn brier(data: &PredictionSet) -> f64 {
    let sum: f64 = data
        .x()
        .iter()
        .zip(data.y())
        .map(|(&p, &o)| (p - f64::from(o)).powi(2))
        .sum();
    sum / data.len() as f64
}

/// Calibration addend of the Brier decomposition:
/// `(1/n) Σ_k n_k (x̄_k - ȳ_k)²` over equal-width bins.
pub fn brier_calibration(data: &PredictionSet, n_bins: usize) -> Result<f64> {
    Ok(BinSummary::new(data, n_bins)?.brier_calibration(data.len()))
}

/// Expected calibration error `Σ_b (n_b/n) |ȳ_b - x̄_b|` over equal-width bins.
pub fn ece(data: &PredictionSet, n_bins: usize) -> Result<f64> {
    Ok(BinSummary::new(data, n_bins)?.ece(data.len()))
}

/// Equal-width, right-closed bins on `[0, 1]`; the first bin also takes 0.
struct BinSummary {
    edges: Vec<f64>,
    counts: Vec<usize>,
    sum_x: Vec<f64>,
    sum_y: Vec<f64>,
}

impl BinSummary {
    fn new(data: &PredictionSet, n_bins: usize) -> Result<Self> {
        if n_bins == 0 {
            return Err(CalibError::InvalidParameter("number of bins must be at least 1".into()));
        }
        let edges: Vec<f64> = (0..=n_bins).map(|k| k as f64 / n_bins as f64).collect();
        let mut counts = vec![0; n_bins];
        let mut sum_x = vec![0.0; n_bins];
        let mut sum_y = vec![0.0; n_bins];
        for (&p, &o) in data.x().iter().zip(data.y()) {
            // first upper edge >= p
            let k = edges[1..].partition_point(|&e| e < p).min(n_bins - 1);
            counts[k] += 1;
            sum_x[k] += p;
            sum_y[k] += f64::from(o);
        }
        Ok(BinSummary {
            edges,
            counts,
            sum_x,
            sum_y,
        })
    }

    fn gaps(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        (0..self.counts.len()).filter(|&k| self.counts[k] > 0).map(|k| {
            let n_k = self.counts[k] as f64;
            (n_k, self.sum_x[k] / n_k - self.sum_y[k] / n_k)
        })
    }

    fn brier_calibration(&self, n: usize) -> f64 {
        self.gaps().map(|(n_k, gap)| n_k * gap * gap).sum::<f64>() / n as f64
    }

    fn ece(&self, n: usize) -> f64 {
        self.gaps().map(|(n_k, gap)| n_k * gap.abs()).sum::<f64>() / n as f64
    }
}

/// Area under the ROC curve as the Mann–Whitney concordance between events
/// and non-events, ties counted one half. Counting is done in integers so
/// the result depends only on the ordering of the predictions.
pub fn auc(data: &PredictionSet) -> Result<f64> {
    if !data.has_both_classes() {
        return Err(CalibError::UndefinedAuc);
    }
    let mut order: Vec<usize> = (0..data.len()).collect();
    order.sort_by(|&a, &b| data.x()[a].total_cmp(&data.x()[b]));

    let (x, y) = (data.x(), data.y());
    let mut non_events_below: u64 = 0;
    // twice the concordance count, so ties stay integral
    let mut doubled: u64 = 0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        let (mut events, mut non_events) = (0u64, 0u64);
        while j < order.len() && x[order[j]] == x[order[i]] {
            if y[order[j]] == 1 {
                events += 1;
            } else {
                non_events += 1;
            }
            j += 1;
        }
        doubled += 2 * events * non_events_below + events * non_events;
        non_events_below += non_events;
        i = j;
    }
    let n_events = data.events() as u64;
    let n_non_events = data.len() as u64 - n_events;
    Ok(doubled as f64 / (2 * n_events * n_non_events) as f64)
}
