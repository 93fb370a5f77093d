//! Exact observed-data log-likelihoods through convolution powers of the
//! offspring law, information criteria, and the control-family / `s_max`
//! model scan.
//!
//! Given `phi` progenitors, the next generation size is the sum of `phi`
//! i.i.d. offspring counts, so `P[Z_{l+1} = z' | phi] = P^{*phi}(z')`, the
//! coefficient of `s^z'` in `f(s)^phi` with `f` the offspring generating
//! polynomial. Marginalizing over the control law gives the sizes-only
//! transition probability.

use std::ops::RangeInclusive;

use rayon::prelude::*;
use serde::Serialize;

use crate::em::{self, EmConfig, EmFit};
use crate::error::{Error, Result};
use crate::model::{ControlFamily, ControlKind, OffspringDistribution, ProgenitorSample, SizesSample};

/// Scaled entries below this are recomputed in log space.
const TINY: f64 = 1e-250;
/// Terms this far (in log units) below the dominant one are negligible.
const NEGLIGIBLE: f64 = 46.0;

/// `P^{*l}(z)` for `l = 0..=l_max` and `z = 0..=z_cap`.
///
/// Row `l` is stored divided by its running scale so deep powers do not
/// underflow: the true value is `scaled(l, z) * exp(ln_scale(l))`, and
/// `growth(l)` is the factor by which row `l` was divided relative to row
/// `l - 1`.
#[derive(Debug, Clone)]
pub struct ConvolutionPowers {
    probs: Vec<f64>,
    z_cap: usize,
    rows: Vec<Vec<f64>>,
    growth: Vec<f64>,
    ln_scale: Vec<f64>,
}

impl ConvolutionPowers {
    pub fn new(p: &OffspringDistribution, l_max: usize, z_cap: usize) -> Self {
        let probs = p.probs().to_vec();
        let s = probs.len() - 1;
        let mut rows = Vec::with_capacity(l_max + 1);
        let mut growth = Vec::with_capacity(l_max + 1);
        let mut ln_scale = Vec::with_capacity(l_max + 1);
        rows.push(vec![1.0]);
        growth.push(1.0);
        ln_scale.push(0.0);
        for l in 1..=l_max {
            let prev: &Vec<f64> = &rows[l - 1];
            let width = (l * s).min(z_cap) + 1;
            let mut row = vec![0.0; width];
            convolve(prev, &probs, &mut row);
            let max = row.iter().copied().fold(0.0, f64::max);
            let g = if max > 0.0 { max } else { 1.0 };
            let inv = 1.0 / g;
            row.iter_mut().for_each(|v| *v *= inv);
            ln_scale.push(ln_scale[l - 1] + g.ln());
            growth.push(g);
            rows.push(row);
        }
        Self {
            probs,
            z_cap,
            rows,
            growth,
            ln_scale,
        }
    }

    pub fn l_max(&self) -> usize {
        self.rows.len() - 1
    }

    pub fn z_cap(&self) -> usize {
        self.z_cap
    }

    pub fn s_max(&self) -> usize {
        self.probs.len() - 1
    }

    pub(crate) fn scaled(&self, l: usize, z: usize) -> f64 {
        self.rows[l].get(z).copied().unwrap_or(0.0)
    }

    pub(crate) fn growth(&self, l: usize) -> f64 {
        self.growth[l]
    }

    pub(crate) fn ln_scale(&self, l: usize) -> f64 {
        self.ln_scale[l]
    }

    /// `P^{*l}(z)`; may underflow to zero for far tails.
    pub fn value(&self, l: usize, z: usize) -> f64 {
        self.scaled(l, z) * self.ln_scale[l].exp()
    }

    /// `ln P^{*l}(z)`, exact in the tails as well.
    pub fn ln_value(&self, l: usize, z: usize) -> f64 {
        let e = self.scaled(l, z);
        if e >= TINY {
            return self.ln_scale[l] + e.ln();
        }
        if z > l * self.s_max() {
            return f64::NEG_INFINITY;
        }
        ln_powers(&self.probs, l, z)[l][z]
    }

    /// Row `l` as plain probabilities.
    pub fn row(&self, l: usize) -> Vec<f64> {
        let scale = self.ln_scale[l].exp();
        self.rows[l].iter().map(|v| v * scale).collect()
    }
}

/// `out[z] += sum_k p[k] prev[z - k]`. All terms are nonnegative, so plain
/// summation is accurate to a few ulps.
fn convolve(prev: &[f64], p: &[f64], out: &mut [f64]) {
    for (k, &pk) in p.iter().enumerate() {
        if k >= out.len() {
            break;
        }
        for (o, &v) in out[k..].iter_mut().zip(prev) {
            *o += pk * v;
        }
    }
}

/// Full rows `P^{*l}`, `l = 0..=l_max`, each with support `0..=l s_max`.
pub fn convolution_powers(p: &OffspringDistribution, l_max: usize) -> ConvolutionPowers {
    ConvolutionPowers::new(p, l_max, l_max * p.s_max())
}

/// Log-space convolution powers up to column `z_cap`.
fn ln_powers(p: &[f64], l_max: usize, z_cap: usize) -> Vec<Vec<f64>> {
    let ln_p: Vec<f64> = p.iter().map(|v| v.ln()).collect();
    let mut rows = vec![vec![f64::NEG_INFINITY; z_cap + 1]; l_max + 1];
    rows[0][0] = 0.0;
    let mut terms = Vec::with_capacity(p.len());
    for l in 1..=l_max {
        for z in 0..=z_cap {
            terms.clear();
            for (k, lp) in ln_p.iter().enumerate().take(z + 1) {
                terms.push(lp + rows[l - 1][z - k]);
            }
            rows[l][z] = log_sum_exp(&terms);
        }
    }
    rows
}

pub(crate) fn log_sum_exp(terms: &[f64]) -> f64 {
    let max = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + terms.iter().map(|t| (t - max).exp()).sum::<f64>().ln()
}

/// Conditional summary of one transition `z -> z'`.
#[derive(Debug, Clone)]
pub(crate) struct TransitionPosterior {
    /// `ln P[z' | z]` (sizes) or `ln P^{*phi}(z')` (progenitors).
    pub ln_prob: f64,
    /// `E[phi | z, z']`.
    pub progenitors: f64,
    /// `E[Z_l(k) | z, z']`.
    pub counts: Vec<f64>,
}

/// Posterior of `(phi, configuration)` for a sizes-only transition, using
/// `E[Z(k) | phi, z'] = phi p_k P^{*(phi-1)}(z'-k) / P^{*phi}(z')`.
///
/// `phis` is the range of progenitor counts to marginalize. Returns `None`
/// when the transition has probability zero.
pub(crate) fn sizes_transition(
    powers: &ConvolutionPowers,
    control: &ControlFamily,
    z: usize,
    z_next: usize,
    phis: RangeInclusive<usize>,
    expectations: bool,
) -> Option<TransitionPosterior> {
    let mut terms = Vec::with_capacity(phis.clone().count());
    let mut uncertain = f64::NEG_INFINITY;
    for phi in phis.clone() {
        let c = control.ln_pmf(z, phi);
        if c == f64::NEG_INFINITY || z_next > phi * powers.s_max() {
            continue;
        }
        let e = powers.scaled(phi, z_next);
        if e >= TINY {
            terms.push((phi, c + powers.ln_scale(phi) + e.ln()));
        } else {
            uncertain = uncertain.max(c + powers.ln_scale(phi) + TINY.ln());
        }
    }
    let max = terms.iter().map(|t| t.1).fold(f64::NEG_INFINITY, f64::max);
    if uncertain > f64::NEG_INFINITY && uncertain > max - NEGLIGIBLE {
        return sizes_transition_ln(&powers.probs, control, z, z_next, phis, expectations);
    }
    if terms.is_empty() {
        return None;
    }

    let s = powers.s_max();
    let mut total = 0.0;
    let mut progenitors = 0.0;
    let mut counts = vec![0.0; s + 1];
    for &(phi, t) in &terms {
        let w = (t - max).exp();
        total += w;
        progenitors += w * phi as f64;
        if expectations && phi > 0 {
            let inv = w * phi as f64 / (powers.scaled(phi, z_next) * powers.growth(phi));
            for (k, slot) in counts.iter_mut().enumerate().take(z_next.min(s) + 1) {
                *slot += inv * powers.probs[k] * powers.scaled(phi - 1, z_next - k);
            }
        }
    }
    counts.iter_mut().for_each(|c| *c /= total);
    Some(TransitionPosterior {
        ln_prob: max + total.ln(),
        progenitors: progenitors / total,
        counts,
    })
}

fn sizes_transition_ln(
    probs: &[f64],
    control: &ControlFamily,
    z: usize,
    z_next: usize,
    phis: RangeInclusive<usize>,
    expectations: bool,
) -> Option<TransitionPosterior> {
    let rows = ln_powers(probs, *phis.end(), z_next);
    let terms: Vec<(usize, f64)> = phis
        .map(|phi| (phi, control.ln_pmf(z, phi) + rows[phi][z_next]))
        .filter(|t| t.1 > f64::NEG_INFINITY)
        .collect();
    if terms.is_empty() {
        return None;
    }
    let max = terms.iter().map(|t| t.1).fold(f64::NEG_INFINITY, f64::max);
    let mut total = 0.0;
    let mut progenitors = 0.0;
    let mut counts = vec![0.0; probs.len()];
    for &(phi, t) in &terms {
        let w = (t - max).exp();
        total += w;
        progenitors += w * phi as f64;
        if expectations && phi > 0 {
            for (k, slot) in counts.iter_mut().enumerate().take(z_next.min(probs.len() - 1) + 1) {
                let ln_ratio = probs[k].ln() + rows[phi - 1][z_next - k] - rows[phi][z_next];
                *slot += w * phi as f64 * ln_ratio.exp();
            }
        }
    }
    counts.iter_mut().for_each(|c| *c /= total);
    Some(TransitionPosterior {
        ln_prob: max + total.ln(),
        progenitors: progenitors / total,
        counts,
    })
}

/// Posterior of the configuration when `phi` progenitors produced `z'`
/// offspring. `None` when that is impossible under `p`.
pub(crate) fn progenitor_transition(
    powers: &ConvolutionPowers,
    phi: usize,
    z_next: usize,
) -> Option<TransitionPosterior> {
    let s = powers.s_max();
    if z_next > phi * s {
        return None;
    }
    let e = powers.scaled(phi, z_next);
    let mut counts = vec![0.0; s + 1];
    if e >= TINY {
        if phi > 0 {
            let inv = phi as f64 / (e * powers.growth(phi));
            for (k, slot) in counts.iter_mut().enumerate().take(z_next.min(s) + 1) {
                *slot = inv * powers.probs[k] * powers.scaled(phi - 1, z_next - k);
            }
        }
        return Some(TransitionPosterior {
            ln_prob: powers.ln_scale(phi) + e.ln(),
            progenitors: phi as f64,
            counts,
        });
    }
    let rows = ln_powers(&powers.probs, phi, z_next);
    let ln_prob = rows[phi][z_next];
    if ln_prob == f64::NEG_INFINITY {
        return None;
    }
    for (k, slot) in counts.iter_mut().enumerate().take(z_next.min(s) + 1) {
        *slot = phi as f64 * (powers.probs[k].ln() + rows[phi - 1][z_next - k] - ln_prob).exp();
    }
    Some(TransitionPosterior {
        ln_prob,
        progenitors: phi as f64,
        counts,
    })
}

/// An observed-data log-likelihood, or the first generation whose
/// transition has probability zero.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LogLikelihood {
    pub value: f64,
    pub impossible_at: Option<usize>,
}

impl LogLikelihood {
    fn impossible(generation: usize) -> Self {
        Self {
            value: f64::NEG_INFINITY,
            impossible_at: Some(generation),
        }
    }

    pub fn is_possible(&self) -> bool {
        self.impossible_at.is_none()
    }
}

/// Progenitor counts to marginalize over for each transition of `z`;
/// `None` where no count can produce the next size.
pub(crate) fn sizes_ranges(
    z: &[usize],
    control: &ControlFamily,
    s_max: usize,
) -> Vec<Option<RangeInclusive<usize>>> {
    z.windows(2)
        .map(|w| control.progenitor_range(w[0], w[1], s_max))
        .collect()
}

pub(crate) fn sizes_powers(
    z: &[usize],
    ranges: &[Option<RangeInclusive<usize>>],
    p: &OffspringDistribution,
) -> ConvolutionPowers {
    let l_max = ranges.iter().flatten().map(|r| *r.end()).max().unwrap_or(0);
    let z_cap = z[1..].iter().copied().max().unwrap_or(0);
    ConvolutionPowers::new(p, l_max, z_cap)
}

/// `sum_l ln P[Z_{l+1} = z_{l+1} | Z_l = z_l]` from the generation sizes.
///
/// Unbounded control laws are truncated where their upper tail mass drops
/// below [`crate::model::CONTROL_TAIL_MASS`].
pub fn loglik_sizes(sample: &SizesSample, p: &OffspringDistribution, family: &ControlFamily) -> LogLikelihood {
    let z = sample.z();
    let ranges = sizes_ranges(z, family, p.s_max());
    let powers = sizes_powers(z, &ranges, p);
    let mut total = 0.0;
    for (l, range) in ranges.into_iter().enumerate() {
        let Some(range) = range else {
            return LogLikelihood::impossible(l);
        };
        match sizes_transition(&powers, family, z[l], z[l + 1], range, false) {
            Some(t) => total += t.ln_prob,
            None => return LogLikelihood::impossible(l),
        }
    }
    LogLikelihood {
        value: total,
        impossible_at: None,
    }
}

/// `sum_l ln( P^{*phi_l}(z_{l+1}) P[phi(z_l) = phi_l] )`.
pub fn loglik_progenitors(
    sample: &ProgenitorSample,
    p: &OffspringDistribution,
    family: &ControlFamily,
) -> LogLikelihood {
    let (z, phi) = (sample.z(), sample.phi());
    let l_max = phi.iter().copied().max().unwrap_or(0);
    let z_cap = z[1..].iter().copied().max().unwrap_or(0);
    let powers = ConvolutionPowers::new(p, l_max, z_cap);
    let mut total = 0.0;
    for l in 0..phi.len() {
        let control = family.ln_pmf(z[l], phi[l]);
        match progenitor_transition(&powers, phi[l], z[l + 1]) {
            Some(t) if control > f64::NEG_INFINITY => total += control + t.ln_prob,
            _ => return LogLikelihood::impossible(l),
        }
    }
    LogLikelihood {
        value: total,
        impossible_at: None,
    }
}

/// Which Akaike criterion to report.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InformationCriterion {
    /// `-2 l + 2 k n / (n - k - 1)`.
    #[default]
    Corrected,
    /// `-2 l + 2 k`.
    Plain,
}

/// Small-sample corrected AIC.
pub fn aic(loglik: f64, n_params: usize, n_obs: usize) -> Result<f64> {
    if n_obs <= n_params + 1 {
        return Err(Error::Domain(format!(
            "corrected AIC needs more than {} observations, got {n_obs}",
            n_params + 1
        )));
    }
    let k = n_params as f64;
    let n = n_obs as f64;
    Ok(-2.0 * loglik + 2.0 * k * n / (n - k - 1.0))
}

pub fn aic_plain(loglik: f64, n_params: usize) -> f64 {
    -2.0 * loglik + 2.0 * n_params as f64
}

impl InformationCriterion {
    pub fn evaluate(self, loglik: f64, n_params: usize, n_obs: usize) -> Result<f64> {
        match self {
            Self::Corrected => aic(loglik, n_params, n_obs),
            Self::Plain => Ok(aic_plain(loglik, n_params)),
        }
    }
}

/// Free parameters of a model: `s_max` offspring probabilities and `theta`.
pub fn n_params(s_max: usize) -> usize {
    s_max + 1
}

/// Either incomplete observation scheme.
#[derive(Debug, Clone, Copy)]
pub enum IncompleteSample<'a> {
    Progenitors(&'a ProgenitorSample),
    Sizes(&'a SizesSample),
}

impl IncompleteSample<'_> {
    /// Observations entering the AIC correction: every generation size,
    /// plus every progenitor count when those are observed.
    pub fn n_observations(&self) -> usize {
        match self {
            Self::Progenitors(s) => 2 * s.n_generations() + 1,
            Self::Sizes(s) => s.n_generations() + 1,
        }
    }

    pub fn loglik(&self, p: &OffspringDistribution, family: &ControlFamily) -> LogLikelihood {
        match self {
            Self::Progenitors(s) => loglik_progenitors(s, p, family),
            Self::Sizes(s) => loglik_sizes(s, p, family),
        }
    }
}

/// Settings shared by every cell of a scan.
#[derive(Debug, Clone)]
pub struct ScanConfig {
    pub tol: f64,
    pub max_iters: usize,
    /// Random starts per cell for the sizes scheme.
    pub n_starts: usize,
    pub seed: u64,
    pub criterion: InformationCriterion,
}

impl Default for ScanConfig {
    fn default() -> Self {
        Self {
            tol: em::DEFAULT_TOL,
            max_iters: em::DEFAULT_MAX_ITERS,
            n_starts: 10,
            seed: 0,
            criterion: InformationCriterion::Corrected,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ScanCell {
    pub loglik: f64,
    pub aic: f64,
    pub iterations: usize,
    pub fit: EmFit,
}

#[derive(Debug, Clone, Serialize)]
pub struct ScanRow {
    pub family: ControlKind,
    pub s_max: usize,
    pub outcome: std::result::Result<ScanCell, String>,
    /// Lowest AIC among the families at this `s_max`.
    pub best_for_s_max: bool,
    /// Lowest AIC over the whole grid.
    pub best_overall: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct ScanResult {
    pub n_obs: usize,
    pub rows: Vec<ScanRow>,
}

impl ScanResult {
    pub fn cell(&self, family: ControlKind, s_max: usize) -> Option<&ScanRow> {
        self.rows.iter().find(|r| r.family == family && r.s_max == s_max)
    }

    pub fn best(&self) -> Option<&ScanRow> {
        self.rows.iter().find(|r| r.best_overall)
    }
}

/// Fits every `(family, s_max)` cell and ranks the fits by AIC.
///
/// Progenitor samples use a single EM run from the uniform law with
/// `theta = 1/2`; sizes samples use [`em::multi_start`]. Failed cells are
/// kept with their error message.
pub fn scan(
    sample: IncompleteSample<'_>,
    families: &[ControlKind],
    s_max_grid: &[usize],
    cfg: &ScanConfig,
) -> Result<ScanResult> {
    if families.is_empty() || s_max_grid.is_empty() {
        return Err(Error::Domain("scan grid is empty".into()));
    }
    let n_obs = sample.n_observations();
    let cells: Vec<(usize, ControlKind)> = s_max_grid
        .iter()
        .flat_map(|&s| families.iter().map(move |&f| (s, f)))
        .collect();
    let mut rows: Vec<ScanRow> = cells
        .par_iter()
        .map(|&(s_max, family)| ScanRow {
            family,
            s_max,
            outcome: fit_cell(sample, family, s_max, n_obs, cfg).map_err(|e| e.to_string()),
            best_for_s_max: false,
            best_overall: false,
        })
        .collect();

    let aic_of = |r: &ScanRow| r.outcome.as_ref().ok().map(|c| c.aic).filter(|a| a.is_finite());
    let argmin = |rows: &[ScanRow], keep: &dyn Fn(&ScanRow) -> bool| {
        rows.iter()
            .enumerate()
            .filter(|(_, r)| keep(r))
            .filter_map(|(i, r)| aic_of(r).map(|a| (i, a)))
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .map(|(i, _)| i)
    };
    for &s in s_max_grid {
        if let Some(i) = argmin(&rows, &|r| r.s_max == s) {
            rows[i].best_for_s_max = true;
        }
    }
    if let Some(i) = argmin(&rows, &|_| true) {
        rows[i].best_overall = true;
    }
    Ok(ScanResult { n_obs, rows })
}

fn fit_cell(
    sample: IncompleteSample<'_>,
    family: ControlKind,
    s_max: usize,
    n_obs: usize,
    cfg: &ScanConfig,
) -> Result<ScanCell> {
    let em_cfg = EmConfig {
        tol: cfg.tol,
        max_iters: cfg.max_iters,
        ..EmConfig::new(family, s_max)
    };
    let fit = match sample {
        IncompleteSample::Progenitors(s) => {
            em::em_fit_progenitors(s, &OffspringDistribution::uniform(s_max)?, 0.5, &em_cfg)?
        }
        IncompleteSample::Sizes(s) => em::multi_start(s, cfg.n_starts, cfg.seed, &em_cfg)?.best,
    };
    let aic = cfg.criterion.evaluate(fit.loglik, n_params(s_max), n_obs)?;
    Ok(ScanCell {
        loglik: fit.loglik,
        aic,
        iterations: fit.iterations,
        fit,
    })
}
