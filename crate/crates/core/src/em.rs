//! EM algorithms for the two incomplete observation schemes.
//!
//! With progenitor counts observed, the hidden data are the per-generation
//! configurations `(Z_l(0), ..., Z_l(s_max))`; with only generation sizes
//! observed, the progenitor counts are hidden as well. In both cases the
//! M-step is closed form: `p_k = sum_l E[Z_l(k)] / E[Delta_{n-1}]` and
//! `theta = mu^{-1}(E[Delta_{n-1}] / Y_{n-1})`.
//!
//! The E-step has two kernels. [`EStepKernel::Convolution`] uses
//! `E[Z(k) | phi, z'] = phi p_k P^{*(phi-1)}(z'-k) / P^{*phi}(z')`, which
//! costs a convolution table per iteration. [`EStepKernel::Enumeration`]
//! lists every feasible configuration with [`crate::trees`] and weights it
//! by its multinomial probability; it is exponential in `s_max` and only
//! practical on small samples.

use rand::Rng;
use rand_distr::{Distribution, Exp1, Open01};
use rayon::prelude::*;
use serde::Serialize;
use statrs::function::factorial::ln_factorial;

use crate::error::{Error, Result};
use crate::likelihood::{
    self, log_sum_exp, progenitor_transition, sizes_powers, sizes_ranges, sizes_transition,
    ConvolutionPowers,
};
use crate::model::{ControlFamily, ControlKind, OffspringDistribution, ProgenitorSample, SizesSample};
use crate::rng::stream_rng;
use crate::trees::enumerate_fixed;

pub const DEFAULT_TOL: f64 = 1e-6;
pub const DEFAULT_MAX_ITERS: usize = 50_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EStepKernel {
    #[default]
    Convolution,
    Enumeration,
}

#[derive(Debug, Clone, Serialize)]
pub struct EmConfig {
    pub tol: f64,
    pub max_iters: usize,
    pub kind: ControlKind,
    pub s_max: usize,
    pub kernel: EStepKernel,
}

impl EmConfig {
    pub fn new(kind: ControlKind, s_max: usize) -> Self {
        Self {
            tol: DEFAULT_TOL,
            max_iters: DEFAULT_MAX_ITERS,
            kind,
            s_max,
            kernel: EStepKernel::Convolution,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0) {
            return Err(Error::Domain(format!("tolerance {} must be positive", self.tol)));
        }
        if self.max_iters == 0 {
            return Err(Error::Domain("max_iters must be at least 1".into()));
        }
        if self.s_max == 0 {
            return Err(Error::Domain("s_max must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EmFit {
    pub p: OffspringDistribution,
    pub theta: f64,
    pub family: ControlKind,
    pub m: f64,
    pub sigma2: f64,
    pub mu: f64,
    /// Parameter updates performed.
    pub iterations: usize,
    pub converged: bool,
    /// Exact observed-data log-likelihood at `(p, theta)`.
    pub loglik: f64,
}

impl EmFit {
    pub fn control(&self) -> ControlFamily {
        ControlFamily::new(self.family, self.theta).expect("fitted theta lies in the parameter space")
    }

    pub fn tau(&self) -> f64 {
        self.m * self.mu
    }
}

/// One row of the per-iteration trace: parameters entering iteration
/// `iteration` and the exact log-likelihood there.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TraceRow {
    pub iteration: usize,
    pub p: Vec<f64>,
    pub theta: f64,
    pub loglik: f64,
}

/// Result of an E-step.
#[derive(Debug, Clone, PartialEq)]
pub struct Expectations {
    /// `E[Z_l(k)]`, rows `l = 0..n-1`.
    pub counts: Vec<Vec<f64>>,
    /// `E[Delta_{n-1}]`.
    pub delta: f64,
    /// Observed-data log-likelihood at the parameters used.
    pub loglik: f64,
}

impl Expectations {
    pub fn column_sums(&self) -> Vec<f64> {
        let width = self.counts.first().map_or(0, Vec::len);
        (0..width).map(|k| self.counts.iter().map(|r| r[k]).sum()).collect()
    }
}

fn check_width(p: &OffspringDistribution, s_max: usize) -> Result<()> {
    if p.s_max() != s_max {
        return Err(Error::Domain(format!(
            "offspring law has s_max = {}, configuration says {s_max}",
            p.s_max()
        )));
    }
    Ok(())
}

/// `E*[Z_l(k)]` given sizes and progenitor counts.
///
/// Does not depend on the control parameter.
pub fn e_step_progenitors(sample: &ProgenitorSample, p: &OffspringDistribution) -> Result<Vec<Vec<f64>>> {
    e_step_progenitors_with(sample, p, EStepKernel::Convolution).map(|e| e.counts)
}

/// [`e_step_progenitors`] with an explicit kernel. The returned log-likelihood
/// covers the offspring part `sum_l ln P^{*phi_l}(z_{l+1})` only.
pub fn e_step_progenitors_with(
    sample: &ProgenitorSample,
    p: &OffspringDistribution,
    kernel: EStepKernel,
) -> Result<Expectations> {
    let s = p.s_max();
    let (z, phi) = (sample.z(), sample.phi());
    for l in 0..phi.len() {
        if z[l + 1] > s * phi[l] {
            return Err(Error::inconsistent(
                l,
                format!("{} progenitors cannot produce {} offspring with s_max = {s}", phi[l], z[l + 1]),
            ));
        }
    }
    let degenerate = |l: usize| {
        Error::DegenerateParameter(format!(
            "offspring law gives probability zero to generation {l} -> {}",
            l + 1
        ))
    };
    let mut counts = Vec::with_capacity(phi.len());
    let mut loglik = 0.0;
    match kernel {
        EStepKernel::Convolution => {
            let l_max = phi.iter().copied().max().unwrap_or(0);
            let z_cap = z[1..].iter().copied().max().unwrap_or(0);
            let powers = ConvolutionPowers::new(p, l_max, z_cap);
            for l in 0..phi.len() {
                let t = progenitor_transition(&powers, phi[l], z[l + 1]).ok_or_else(|| degenerate(l))?;
                loglik += t.ln_prob;
                counts.push(t.counts);
            }
        }
        EStepKernel::Enumeration => {
            let ln_p: Vec<f64> = p.probs().iter().map(|v| v.ln()).collect();
            for l in 0..phi.len() {
                let (row, ln_prob) =
                    enumerate_posterior(&ln_p, std::iter::once((phi[l], 0.0)), z[l + 1]).ok_or_else(|| degenerate(l))?;
                loglik += ln_prob;
                counts.push(row);
            }
        }
    }
    Ok(Expectations {
        counts,
        delta: sample.total_progenitors() as f64,
        loglik,
    })
}

/// `ln phi! - sum ln z(k)! + sum z(k) ln p_k`.
fn ln_multinomial(phi: usize, config: &[usize], ln_p: &[f64]) -> f64 {
    let mut w = ln_factorial(phi as u64);
    for (c, lp) in config.iter().zip(ln_p) {
        if *c > 0 {
            w += *c as f64 * lp - ln_factorial(*c as u64);
        }
    }
    w
}

/// Posterior mean configuration over `(phi, configuration)` pairs, each
/// `phi` carrying a log prior weight. Also returns the log normalizer.
fn enumerate_posterior(
    ln_p: &[f64],
    phis: impl Iterator<Item = (usize, f64)>,
    z_next: usize,
) -> Option<(Vec<f64>, f64)> {
    let s = ln_p.len() - 1;
    let mut items = Vec::new();
    for (phi, prior) in phis {
        if prior == f64::NEG_INFINITY {
            continue;
        }
        for config in enumerate_fixed(phi, z_next, s) {
            let w = prior + ln_multinomial(phi, &config.counts, ln_p);
            if w > f64::NEG_INFINITY {
                items.push((w, config.counts));
            }
        }
    }
    let weights: Vec<f64> = items.iter().map(|i| i.0).collect();
    let ln_norm = log_sum_exp(&weights);
    if ln_norm == f64::NEG_INFINITY {
        return None;
    }
    let mut row = vec![0.0; s + 1];
    for (w, config) in &items {
        let prob = (w - ln_norm).exp();
        for (slot, c) in row.iter_mut().zip(config) {
            *slot += prob * *c as f64;
        }
    }
    Some((row, ln_norm))
}

/// `E[Z_l(k)]` and `E[Delta_{n-1}]` given generation sizes only.
pub fn e_step_sizes(sample: &SizesSample, p: &OffspringDistribution, family: &ControlFamily) -> Result<Expectations> {
    e_step_sizes_with(sample, p, family, EStepKernel::Convolution)
}

pub fn e_step_sizes_with(
    sample: &SizesSample,
    p: &OffspringDistribution,
    family: &ControlFamily,
    kernel: EStepKernel,
) -> Result<Expectations> {
    let z = sample.z();
    let s = p.s_max();
    let ranges = sizes_ranges(z, family, s);
    if let Some(l) = ranges.iter().position(Option::is_none) {
        return Err(Error::inconsistent(
            l,
            format!(
                "{} individuals cannot produce {} offspring under {} control with s_max = {s}",
                z[l],
                z[l + 1],
                family.kind()
            ),
        ));
    }
    let ranges: Vec<_> = ranges.into_iter().flatten().collect();
    let degenerate = |l: usize| {
        Error::DegenerateParameter(format!("parameters give probability zero to generation {l} -> {}", l + 1))
    };
    let mut counts = Vec::with_capacity(ranges.len());
    let mut delta = 0.0;
    let mut loglik = 0.0;
    match kernel {
        EStepKernel::Convolution => {
            let wrapped: Vec<_> = ranges.iter().cloned().map(Some).collect();
            let powers = sizes_powers(z, &wrapped, p);
            for (l, range) in ranges.into_iter().enumerate() {
                let t = sizes_transition(&powers, family, z[l], z[l + 1], range, true).ok_or_else(|| degenerate(l))?;
                loglik += t.ln_prob;
                delta += t.progenitors;
                counts.push(t.counts);
            }
        }
        EStepKernel::Enumeration => {
            let ln_p: Vec<f64> = p.probs().iter().map(|v| v.ln()).collect();
            for (l, range) in ranges.into_iter().enumerate() {
                let prior = range.map(|phi| (phi, family.ln_pmf(z[l], phi)));
                let (row, ln_prob) = enumerate_posterior(&ln_p, prior, z[l + 1]).ok_or_else(|| degenerate(l))?;
                loglik += ln_prob;
                delta += row.iter().sum::<f64>();
                counts.push(row);
            }
        }
    }
    Ok(Expectations { counts, delta, loglik })
}

/// Closed-form maximizer of the expected complete-data log-likelihood.
///
/// The offspring law is the column-sum profile of `expected_counts`
/// normalized by `delta_expected`; the control parameter matches the
/// expected progenitors per individual.
pub fn m_step(
    expected_counts: &[Vec<f64>],
    delta_expected: f64,
    y_prev: f64,
    kind: ControlKind,
) -> Result<(OffspringDistribution, f64)> {
    if !(delta_expected > 0.0 && y_prev > 0.0) {
        return Err(Error::DegenerateSample(format!(
            "expected progenitors {delta_expected} and individuals {y_prev} must be positive"
        )));
    }
    let width = expected_counts.first().map_or(0, Vec::len);
    let weights: Vec<f64> = (0..width)
        .map(|k| expected_counts.iter().map(|r| r[k]).sum::<f64>() / delta_expected)
        .collect();
    let p = OffspringDistribution::from_weights(weights)?;
    let theta = ControlFamily::from_mu(kind, delta_expected / y_prev)?.theta();
    Ok((p, theta))
}

fn derived_fit(
    p: OffspringDistribution,
    theta: f64,
    kind: ControlKind,
    iterations: usize,
    converged: bool,
    loglik: f64,
) -> Result<EmFit> {
    let control = ControlFamily::new(kind, theta)?;
    Ok(EmFit {
        m: p.mean(),
        sigma2: p.variance(),
        mu: control.mu(),
        p,
        theta,
        family: kind,
        iterations,
        converged,
        loglik,
    })
}

fn run_em(
    init_p: &OffspringDistribution,
    init_theta: f64,
    cfg: &EmConfig,
    y_prev: usize,
    e_step: impl Fn(&OffspringDistribution, &ControlFamily) -> Result<Expectations>,
    final_loglik: impl Fn(&OffspringDistribution, &ControlFamily) -> f64,
    mut trace: Option<&mut Vec<TraceRow>>,
) -> Result<EmFit> {
    cfg.validate()?;
    check_width(init_p, cfg.s_max)?;
    if y_prev == 0 {
        return Err(Error::DegenerateSample("no individuals before generation n".into()));
    }
    let mut p = init_p.clone();
    let mut control = ControlFamily::new(cfg.kind, init_theta)?;
    let mut converged = false;
    let mut iterations = 0;
    while iterations < cfg.max_iters {
        let e = e_step(&p, &control)?;
        if let Some(rows) = trace.as_deref_mut() {
            rows.push(TraceRow {
                iteration: iterations,
                p: p.probs().to_vec(),
                theta: control.theta(),
                loglik: e.loglik,
            });
        }
        let (p_next, theta_next) = m_step(&e.counts, e.delta, y_prev as f64, cfg.kind)?;
        let change = p
            .probs()
            .iter()
            .zip(p_next.probs())
            .map(|(a, b)| (a - b).abs())
            .fold((control.theta() - theta_next).abs(), f64::max);
        p = p_next;
        control = ControlFamily::new(cfg.kind, theta_next)?;
        iterations += 1;
        if change < cfg.tol {
            converged = true;
            break;
        }
    }
    if !converged {
        log::debug!("EM stopped after {iterations} iterations without converging");
    }
    let loglik = final_loglik(&p, &control);
    derived_fit(p, control.theta(), cfg.kind, iterations, converged, loglik)
}

/// EM with progenitor counts observed. `theta` reaches its complete-data
/// estimate `mu^{-1}(Delta / Y)` after the first update.
pub fn em_fit_progenitors(
    sample: &ProgenitorSample,
    init_p: &OffspringDistribution,
    init_theta: f64,
    cfg: &EmConfig,
) -> Result<EmFit> {
    em_fit_progenitors_traced(sample, init_p, init_theta, cfg, None)
}

pub fn em_fit_progenitors_traced(
    sample: &ProgenitorSample,
    init_p: &OffspringDistribution,
    init_theta: f64,
    cfg: &EmConfig,
    trace: Option<&mut Vec<TraceRow>>,
) -> Result<EmFit> {
    sample.validate_against(cfg.kind, cfg.s_max)?;
    let (z, phi) = (sample.z(), sample.phi());
    let e_step = |p: &OffspringDistribution, control: &ControlFamily| {
        let mut e = e_step_progenitors_with(sample, p, cfg.kernel)?;
        e.loglik += (0..phi.len()).map(|l| control.ln_pmf(z[l], phi[l])).sum::<f64>();
        Ok(e)
    };
    let final_loglik =
        |p: &OffspringDistribution, c: &ControlFamily| likelihood::loglik_progenitors(sample, p, c).value;
    run_em(init_p, init_theta, cfg, sample.total_individuals(), e_step, final_loglik, trace)
}

/// EM with only generation sizes observed.
pub fn em_fit_sizes(sample: &SizesSample, init_p: &OffspringDistribution, init_theta: f64, cfg: &EmConfig) -> Result<EmFit> {
    em_fit_sizes_traced(sample, init_p, init_theta, cfg, None)
}

pub fn em_fit_sizes_traced(
    sample: &SizesSample,
    init_p: &OffspringDistribution,
    init_theta: f64,
    cfg: &EmConfig,
    trace: Option<&mut Vec<TraceRow>>,
) -> Result<EmFit> {
    sample.validate_against(cfg.kind, cfg.s_max)?;
    let e_step = |p: &OffspringDistribution, control: &ControlFamily| e_step_sizes_with(sample, p, control, cfg.kernel);
    let final_loglik = |p: &OffspringDistribution, c: &ControlFamily| likelihood::loglik_sizes(sample, p, c).value;
    run_em(init_p, init_theta, cfg, sample.total_individuals(), e_step, final_loglik, trace)
}

/// Random starting point: `p ~ Dirichlet(1, ..., 1)` and `theta` from
/// `u ~ Uniform(0, 1)` mapped into the family's parameter space.
pub fn random_start<R: Rng + ?Sized>(kind: ControlKind, s_max: usize, rng: &mut R) -> (OffspringDistribution, f64) {
    let draws: Vec<f64> = (0..=s_max)
        .map(|_| {
            let e: f64 = Exp1.sample(rng);
            e.max(f64::MIN_POSITIVE)
        })
        .collect();
    let p = OffspringDistribution::from_weights(draws).expect("exponential draws are positive");
    let u: f64 = Open01.sample(rng);
    let theta = match kind {
        ControlKind::Binomial | ControlKind::Poisson => u / (1.0 - u),
        ControlKind::NegativeBinomial => u,
    };
    (p, theta)
}

#[derive(Debug, Clone, Serialize)]
pub struct StartOutcome {
    pub start: usize,
    pub init_p: Vec<f64>,
    pub init_theta: f64,
    pub fit: std::result::Result<EmFit, String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct MultiStart {
    pub best: EmFit,
    pub best_start: usize,
    pub starts: Vec<StartOutcome>,
}

/// Runs [`em_fit_sizes`] from `n_starts` random points, start `i` drawing
/// from stream `i` of `master_seed`, and keeps the converged fit with the
/// largest exact log-likelihood (lowest start index on ties).
pub fn multi_start(sample: &SizesSample, n_starts: usize, master_seed: u64, cfg: &EmConfig) -> Result<MultiStart> {
    if n_starts == 0 {
        return Err(Error::Domain("multi-start needs at least one start".into()));
    }
    let starts: Vec<(OffspringDistribution, f64)> = (0..n_starts)
        .map(|i| random_start(cfg.kind, cfg.s_max, &mut stream_rng(master_seed, i as u64)))
        .collect();
    multi_start_from(sample, starts, cfg)
}

/// [`multi_start`] from given starting points.
pub fn multi_start_from(
    sample: &SizesSample,
    starts: Vec<(OffspringDistribution, f64)>,
    cfg: &EmConfig,
) -> Result<MultiStart> {
    let outcomes: Vec<StartOutcome> = starts
        .into_par_iter()
        .enumerate()
        .map(|(start, (p, theta))| StartOutcome {
            start,
            init_p: p.probs().to_vec(),
            init_theta: theta,
            fit: em_fit_sizes(sample, &p, theta, cfg).map_err(|e| e.to_string()),
        })
        .collect();
    let mut best: Option<(usize, &EmFit)> = None;
    for o in &outcomes {
        if let Ok(fit) = &o.fit {
            if fit.converged && fit.loglik.is_finite() && best.is_none_or(|(_, b)| fit.loglik > b.loglik) {
                best = Some((o.start, fit));
            }
        }
    }
    match best {
        Some((i, fit)) => Ok(MultiStart {
            best: fit.clone(),
            best_start: i,
            starts: outcomes.clone(),
        }),
        None => Err(Error::AllStartsFailed {
            failures: outcomes
                .iter()
                .map(|o| {
                    let why = match &o.fit {
                        Ok(f) if !f.converged => format!("no convergence within {} iterations", f.iterations),
                        Ok(_) => "log-likelihood is not finite".to_string(),
                        Err(e) => e.clone(),
                    };
                    (o.start, why)
                })
                .collect(),
        }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dist(p: &[f64]) -> OffspringDistribution {
        OffspringDistribution::new(p.to_vec()).unwrap()
    }

    #[test]
    fn two_progenitors_two_offspring() {
        let sample = ProgenitorSample::new(vec![2, 2], vec![2]).unwrap();
        let p = OffspringDistribution::uniform(2).unwrap();
        for kernel in [EStepKernel::Convolution, EStepKernel::Enumeration] {
            let e = e_step_progenitors_with(&sample, &p, kernel).unwrap();
            for v in &e.counts[0] {
                assert!((v - 2.0 / 3.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn singleton_configuration() {
        let sample = ProgenitorSample::new(vec![1, 3], vec![1]).unwrap();
        let e = e_step_progenitors(&sample, &dist(&[0.1, 0.2, 0.3, 0.4])).unwrap();
        assert_eq!(e[0], vec![0.0, 0.0, 0.0, 1.0]);
    }

    #[test]
    fn infeasible_and_degenerate_errors() {
        let sample = ProgenitorSample::new(vec![1, 3], vec![1]).unwrap();
        assert!(matches!(
            e_step_progenitors(&sample, &dist(&[0.5, 0.5])),
            Err(Error::InconsistentSample { generation: 0, .. })
        ));
        assert!(matches!(
            e_step_progenitors(&sample, &dist(&[0.5, 0.5, 0.0, 0.0])),
            Err(Error::DegenerateParameter(_))
        ));
        let fam = ControlFamily::new(ControlKind::Binomial, 1.0).unwrap();
        let sizes = SizesSample::new(vec![1, 4]).unwrap();
        assert!(matches!(
            e_step_sizes(&sizes, &dist(&[0.5, 0.5, 0.0, 0.0]), &fam),
            Err(Error::InconsistentSample { .. })
        ));
    }

    #[test]
    fn sizes_singleton_support() {
        let sizes = SizesSample::new(vec![1, 2]).unwrap();
        let fam = ControlFamily::new(ControlKind::Binomial, 0.3).unwrap();
        let e = e_step_sizes(&sizes, &dist(&[0.1, 0.2, 0.3, 0.4]), &fam).unwrap();
        assert_eq!(e.counts[0], vec![0.0, 0.0, 1.0, 0.0]);
        assert_eq!(e.delta, 1.0);
    }

    #[test]
    fn sizes_hand_enumeration() {
        let sizes = SizesSample::new(vec![2, 0]).unwrap();
        let fam = ControlFamily::new(ControlKind::Binomial, 1.0).unwrap();
        for kernel in [EStepKernel::Convolution, EStepKernel::Enumeration] {
            let e = e_step_sizes_with(&sizes, &dist(&[0.5, 0.25, 0.25]), &fam, kernel).unwrap();
            assert!((e.delta - 6.0 / 9.0).abs() < 1e-14);
        }
    }

    #[test]
    fn m_step_examples() {
        let (p, _) = m_step(&[vec![0.0, 0.0, 3.0]], 3.0, 5.0, ControlKind::Binomial).unwrap();
        assert_eq!(p.probs(), &[0.0, 0.0, 1.0]);
        let (p, theta) = m_step(&[vec![1.0, 1.0, 1.0, 1.0]], 4.0, 8.0, ControlKind::Poisson).unwrap();
        assert_eq!(p.probs(), &[0.25; 4]);
        assert_eq!(theta, 0.5);
        assert!(matches!(
            m_step(&[vec![1.0, 1.0]], 2.0, 2.0, ControlKind::Binomial),
            Err(Error::Boundary { .. })
        ));
    }

    #[test]
    fn constant_offspring_converges_at_once() {
        let sample = ProgenitorSample::new(vec![2, 4, 6, 4], vec![2, 3, 2]).unwrap();
        let cfg = EmConfig::new(ControlKind::Poisson, 2);
        let fit = em_fit_progenitors(&sample, &OffspringDistribution::uniform(2).unwrap(), 0.5, &cfg).unwrap();
        assert!(fit.converged);
        assert_eq!(fit.p.probs(), &[0.0, 0.0, 1.0]);
        assert_eq!(fit.iterations, 2);
        assert_eq!(fit.m, 2.0);
    }

    #[test]
    fn deterministic_binomial_chain_hits_the_boundary() {
        // Every individual must reproduce, so E[Delta] / Y = 1 and the
        // binomial control parameter diverges.
        let sizes = SizesSample::new(vec![1, 1, 1]).unwrap();
        let fam = ControlFamily::new(ControlKind::Binomial, 1.0).unwrap();
        let e = e_step_sizes(&sizes, &OffspringDistribution::uniform(2).unwrap(), &fam).unwrap();
        for row in &e.counts {
            assert!((row[1] - 1.0).abs() < 1e-15 && row[0] == 0.0 && row[2] == 0.0);
        }
        let cfg = EmConfig::new(ControlKind::Binomial, 2);
        let err = em_fit_sizes(&sizes, &OffspringDistribution::uniform(2).unwrap(), 1.0, &cfg).unwrap_err();
        assert!(matches!(err, Error::Boundary { .. }));
    }

    #[test]
    fn random_start_is_inside_the_domain() {
        let mut rng = stream_rng(3, 0);
        for kind in ControlKind::ALL {
            for _ in 0..100 {
                let (p, theta) = random_start(kind, 3, &mut rng);
                assert!(p.probs().iter().all(|&v| v > 0.0));
                assert!(ControlFamily::new(kind, theta).is_ok());
            }
        }
    }

    #[test]
    fn config_validation() {
        let mut cfg = EmConfig::new(ControlKind::Binomial, 3);
        assert!(cfg.validate().is_ok());
        cfg.tol = 0.0;
        assert!(cfg.validate().is_err());
        cfg.tol = 1e-6;
        cfg.max_iters = 0;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn zero_starts_is_an_error() {
        let sizes = SizesSample::new(vec![1, 2, 3]).unwrap();
        assert!(multi_start(&sizes, 0, 1, &EmConfig::new(ControlKind::Binomial, 3)).is_err());
    }
}
