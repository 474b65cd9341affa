//! Maximum-likelihood estimation of the LLO parameters.
//!
//! The search runs in `(log δ, γ)` so that `δ` stays positive. A Nelder–Mead
//! simplex started at the null model does the global work; a few damped
//! Newton steps then polish the optimum so that BIC differences are stable
//! to far below their reporting precision. In these coordinates the model
//! is a one-covariate logistic regression on `logit(x)`, so the Newton
//! system is the usual Fisher-information solve.

use serde::{Deserialize, Serialize};

use crate::error::{CalibError, Result};
use crate::llo::{LloParams, LogOddsData, PredictionSet};
use crate::optim::{nelder_mead, SimplexOptions, SimplexOutcome};

/// `|log δ|` or `|γ|` beyond this during the search is treated as divergence.
pub const DIVERGENCE_BOUND: f64 = 30.0;

/// Convergence is declared when the log-likelihood gradient, averaged per
/// observation, has Euclidean norm below this.
pub const GRADIENT_TOLERANCE: f64 = 1e-8;

const NEWTON_MAX_STEPS: usize = 50;

/// Null model first, then hedging, boasting and shifted starts as fallbacks.
const STARTS: [[f64; 2]; 4] = [
    [0.0, 1.0],
    [0.0, 0.25],
    [0.0, 2.0],
    [std::f64::consts::LN_2, 1.0],
];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MleFit {
    pub params: LloParams,
    pub loglik_at_mle: f64,
    pub loglik_at_null: f64,
    pub converged: bool,
    pub iterations: usize,
    pub gradient_norm: f64,
}

pub fn fit_mle(data: &PredictionSet) -> Result<MleFit> {
    if !data.has_both_classes() {
        return Err(CalibError::Divergence(format!(
            "all {} outcomes are {}; delta is unbounded",
            data.len(),
            data.y()[0]
        )));
    }
    fit_log_odds(&LogOddsData::new(data))
}

fn escaped(p: [f64; 2]) -> bool {
    !(p[0].abs() <= DIVERGENCE_BOUND && p[1].abs() <= DIVERGENCE_BOUND)
}

fn divergence_at(p: [f64; 2]) -> CalibError {
    CalibError::Divergence(format!(
        "search left the admissible region at log(delta) = {:.3}, gamma = {:.3}",
        p[0], p[1]
    ))
}

pub(crate) fn fit_log_odds(data: &LogOddsData) -> Result<MleFit> {
    let n = data.len() as f64;
    let loglik_at_null = data.log_likelihood(0.0, 1.0);
    let options = SimplexOptions::default();

    let mut best: Option<MleFit> = None;
    for start in STARTS {
        let objective = |p: [f64; 2]| -data.log_likelihood(p[0], p[1]);
        let simplex = match nelder_mead(objective, start, &options, escaped) {
            SimplexOutcome::Finished(res) => res,
            SimplexOutcome::Escaped(p) => return Err(divergence_at(p)),
        };

        let (mut point, mut loglik, steps) = newton_polish(data, simplex.point, -simplex.value)?;
        if loglik < loglik_at_null {
            point = [0.0, 1.0];
            loglik = loglik_at_null;
        }
        let gradient_norm = gradient_norm(data, point) / n;
        let fit = MleFit {
            params: LloParams {
                delta: point[0].exp(),
                gamma: point[1],
            },
            loglik_at_mle: loglik,
            loglik_at_null,
            converged: gradient_norm < GRADIENT_TOLERANCE,
            iterations: simplex.iterations + steps,
            gradient_norm,
        };
        if fit.converged {
            return Ok(fit);
        }
        if best.is_none_or(|b| fit.loglik_at_mle > b.loglik_at_mle) {
            best = Some(fit);
        }
    }
    Err(CalibError::NonConvergence {
        best: Box::new(best.expect("at least one start")),
    })
}

fn gradient_norm(data: &LogOddsData, p: [f64; 2]) -> f64 {
    let (g, _) = data.gradient_and_information(p[0], p[1]);
    g[0].hypot(g[1])
}

/// Damped Newton ascent. Falls back to a one-dimensional Newton step along
/// the gradient when the information matrix is singular (constant `x`).
fn newton_polish(data: &LogOddsData, start: [f64; 2], start_loglik: f64) -> Result<([f64; 2], f64, usize)> {
    let n = data.len() as f64;
    let mut point = start;
    let mut loglik = start_loglik;
    let mut steps = 0;
    while steps < NEWTON_MAX_STEPS {
        let (g, info) = data.gradient_and_information(point[0], point[1]);
        if g[0].hypot(g[1]) / n < GRADIENT_TOLERANCE * 1e-3 {
            break;
        }
        let det = info[0][0] * info[1][1] - info[0][1] * info[1][0];
        let scale = info[0][0] * info[1][1];
        let direction = if scale > 0.0 && det > 1e-12 * scale {
            [
                (info[1][1] * g[0] - info[0][1] * g[1]) / det,
                (info[0][0] * g[1] - info[1][0] * g[0]) / det,
            ]
        } else {
            let curvature = g[0] * (info[0][0] * g[0] + info[0][1] * g[1])
                + g[1] * (info[1][0] * g[0] + info[1][1] * g[1]);
            if !(curvature > 0.0) {
                break;
            }
            let t = (g[0] * g[0] + g[1] * g[1]) / curvature;
            [t * g[0], t * g[1]]
        };

        let mut t = 1.0;
        let mut improved = false;
        for _ in 0..40 {
            let candidate = [point[0] + t * direction[0], point[1] + t * direction[1]];
            if escaped(candidate) {
                t *= 0.5;
                continue;
            }
            let value = data.log_likelihood(candidate[0], candidate[1]);
            if value >= loglik {
                improved = value > loglik;
                point = candidate;
                loglik = value;
                break;
            }
            t *= 0.5;
        }
        steps += 1;
        if !improved {
            break;
        }
    }
    if escaped(point) {
        return Err(divergence_at(point));
    }
    Ok((point, loglik, steps))
}
