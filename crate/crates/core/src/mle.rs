//! Closed-form maximum-likelihood estimators from the entire family tree,
//! with their asymptotic normal confidence intervals.

use serde::Serialize;
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::model::{ControlFamily, ControlKind, FullTreeSample, OffspringDistribution};

/// Sufficient statistics of a full tree sample.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TreeTotals {
    pub z0: usize,
    /// `Y_{n-1}`.
    pub individuals: usize,
    /// `Y_n`.
    pub individuals_through_n: usize,
    /// `Delta_{n-1}`.
    pub progenitors: usize,
    /// `Y_{n-1}(k)`.
    pub by_offspring: Vec<usize>,
}

impl TreeTotals {
    pub fn of(sample: &FullTreeSample) -> Self {
        let z = sample.sizes();
        let n = sample.n_generations();
        let individuals = z[..n].iter().sum();
        Self {
            z0: sample.z0(),
            individuals,
            individuals_through_n: individuals + z[n],
            progenitors: sample.progenitors().iter().sum(),
            by_offspring: sample.offspring_totals(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CompleteMle {
    pub p_hat: OffspringDistribution,
    pub m_hat: f64,
    pub sigma2_hat: f64,
    pub mu_hat: f64,
    pub theta_hat: f64,
    pub tau_hat: f64,
    pub family: ControlKind,
    pub totals: TreeTotals,
}

impl CompleteMle {
    pub fn control(&self) -> ControlFamily {
        ControlFamily::new(self.family, self.theta_hat).expect("estimate lies in the parameter space")
    }
}

/// MLEs of `p`, `m`, `sigma^2`, `mu(theta)`, `theta` and `tau_m`.
///
/// Fails when the sample has no progenitors, or when the migration
/// estimate `Delta / Y` is not attainable by the family (for binomial
/// control, every individual retained).
pub fn estimate(sample: &FullTreeSample, family: ControlKind) -> Result<CompleteMle> {
    let totals = TreeTotals::of(sample);
    if totals.progenitors == 0 || totals.individuals == 0 {
        return Err(Error::DegenerateSample(
            "no progenitors observed before generation n".into(),
        ));
    }
    let delta = totals.progenitors as f64;
    let y_prev = totals.individuals as f64;
    let offspring = (totals.individuals_through_n - totals.z0) as f64;

    let p_hat = OffspringDistribution::new(
        totals.by_offspring.iter().map(|&c| c as f64 / delta).collect(),
    )?;
    let m_hat = offspring / delta;
    let sigma2_hat = p_hat
        .probs()
        .iter()
        .enumerate()
        .map(|(k, p)| (k as f64 - m_hat).powi(2) * p)
        .sum();
    let mu_hat = delta / y_prev;
    let theta_hat = ControlFamily::from_mu(family, mu_hat)?.theta();
    Ok(CompleteMle {
        p_hat,
        m_hat,
        sigma2_hat,
        mu_hat,
        theta_hat,
        tau_hat: offspring / y_prev,
        family,
        totals,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Interval {
    pub estimate: f64,
    pub low: f64,
    pub high: f64,
}

impl Interval {
    fn around(estimate: f64, half_width: f64) -> Self {
        Self {
            estimate,
            low: estimate - half_width,
            high: estimate + half_width,
        }
    }

    pub fn contains(&self, x: f64) -> bool {
        self.low <= x && x <= self.high
    }

    pub fn half_width(&self) -> f64 {
        0.5 * (self.high - self.low)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConfidenceIntervals {
    pub level: f64,
    pub z_alpha: f64,
    pub p: Vec<Interval>,
    pub m: Interval,
    pub sigma2: Interval,
    pub mu: Interval,
    pub tau: Interval,
}

/// `z` with `1 - Phi(z) = alpha / 2` for confidence `level = 1 - alpha`.
pub fn normal_critical_value(level: f64) -> Result<f64> {
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::Domain(format!("confidence level {level} outside (0, 1)")));
    }
    let alpha = 1.0 - level;
    Ok(Normal::standard().inverse_cdf(1.0 - alpha / 2.0))
}

/// Asymptotic normal intervals at confidence `level`.
///
/// The offspring parameters scale with `Delta_{n-1}`, the control
/// parameters with `Y_{n-1}`. The variance of `sigma^2_hat` uses the plug-in
/// `sum (k - m)^4 p_k - sigma^4`.
pub fn confidence_intervals(
    mle: &CompleteMle,
    sample: &FullTreeSample,
    level: f64,
) -> Result<ConfidenceIntervals> {
    let z_alpha = normal_critical_value(level)?;
    let totals = TreeTotals::of(sample);
    if totals != mle.totals {
        return Err(Error::Domain("estimate was computed from a different sample".into()));
    }
    if totals.progenitors == 0 {
        return Err(Error::DegenerateSample("no progenitors observed".into()));
    }
    let delta = totals.progenitors as f64;
    let y_prev = totals.individuals as f64;
    let half = |variance: f64, size: f64| z_alpha * (variance.max(0.0) / size).sqrt();

    let p = mle
        .p_hat
        .probs()
        .iter()
        .map(|&pk| Interval::around(pk, half(pk * (1.0 - pk), delta)))
        .collect();
    let fourth: f64 = mle
        .p_hat
        .probs()
        .iter()
        .enumerate()
        .map(|(k, pk)| (k as f64 - mle.m_hat).powi(4) * pk)
        .sum();
    let kurt_var = fourth - mle.sigma2_hat * mle.sigma2_hat;
    let control = mle.control();
    let control_var = control.theta() * control.mu_prime();
    let tau_var = mle.sigma2_hat * mle.mu_hat + mle.m_hat * mle.m_hat * control_var;

    Ok(ConfidenceIntervals {
        level,
        z_alpha,
        p,
        m: Interval::around(mle.m_hat, half(mle.sigma2_hat, delta)),
        sigma2: Interval::around(mle.sigma2_hat, half(kurt_var, delta)),
        mu: Interval::around(mle.mu_hat, half(control_var, y_prev)),
        tau: Interval::around(mle.tau_hat, half(tau_var, y_prev)),
    })
}
