//! Parametric bootstrap of the EM estimators.
//!
//! Each replicate simulates a process from the generating model, projects
//! it onto the chosen observation scheme and re-fits it. Replicates whose
//! last generation is extinct are excluded and counted, as are replicates
//! whose re-fit fails.

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::em::{self, EmConfig, EmFit};
use crate::error::{Error, Result};
use crate::model::{simulate_with_rng, ControlFamily, OffspringDistribution};
use crate::rng::stream_rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    /// Generation sizes and progenitor counts.
    Progenitors,
    /// Generation sizes only.
    Sizes,
}

impl std::fmt::Display for Scheme {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Scheme::Progenitors => "progenitors",
            Scheme::Sizes => "sizes",
        })
    }
}

impl std::str::FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "progenitors" => Ok(Scheme::Progenitors),
            "sizes" => Ok(Scheme::Sizes),
            other => Err(Error::Domain(format!("unknown scheme {other:?}"))),
        }
    }
}

/// The bootstrapped quantities: `p_0..p_{s_max}`, `m`, `sigma^2`, `mu`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ParameterVector {
    pub p: Vec<f64>,
    pub m: f64,
    pub sigma2: f64,
    pub mu: f64,
}

impl ParameterVector {
    pub fn of_model(p: &OffspringDistribution, control: &ControlFamily) -> Self {
        Self {
            p: p.probs().to_vec(),
            m: p.mean(),
            sigma2: p.variance(),
            mu: control.mu(),
        }
    }

    pub fn of_fit(fit: &EmFit) -> Self {
        Self {
            p: fit.p.probs().to_vec(),
            m: fit.m,
            sigma2: fit.sigma2,
            mu: fit.mu,
        }
    }

    pub fn names(s_max: usize) -> Vec<String> {
        (0..=s_max)
            .map(|k| format!("p{k}"))
            .chain(["m", "sigma2", "mu"].map(String::from))
            .collect()
    }

    pub fn values(&self) -> Vec<f64> {
        self.p.iter().copied().chain([self.m, self.sigma2, self.mu]).collect()
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct BootstrapConfig {
    pub scheme: Scheme,
    pub n_reps: usize,
    pub n_generations: usize,
    pub z0: usize,
    pub master_seed: u64,
    pub em: EmConfig,
    /// Random starts per sizes-scheme re-fit.
    pub n_starts: usize,
}

impl BootstrapConfig {
    pub fn new(scheme: Scheme, em: EmConfig) -> Self {
        Self {
            scheme,
            n_reps: 1000,
            n_generations: 30,
            z0: 1,
            master_seed: 0,
            em,
            n_starts: 10,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct BootstrapSummary {
    pub scheme: Scheme,
    pub names: Vec<String>,
    pub truth: Vec<f64>,
    /// Per-parameter re-fit estimates, in replicate order.
    pub estimates: Vec<Vec<f64>>,
    /// Replicate index of each column entry of `estimates`.
    pub replicate_ids: Vec<usize>,
    pub mse: Vec<f64>,
    pub n_success: usize,
    /// Replicates excluded for any reason (extinction included).
    pub n_failed: usize,
    pub n_extinct: usize,
    /// Re-fit failures other than extinction.
    pub failures: Vec<(usize, String)>,
}

impl BootstrapSummary {
    pub fn mean(&self, param: usize) -> f64 {
        let v = &self.estimates[param];
        v.iter().sum::<f64>() / v.len() as f64
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }
}

enum Replicate {
    Fitted(Vec<f64>),
    Extinct,
    Failed(String),
}

/// Simulates `cfg.n_reps` processes from `(offspring, control)` and re-fits
/// each under `cfg.scheme`. Replicate `i` uses stream `i` of
/// `cfg.master_seed`, so results do not depend on the thread count.
///
/// Progenitor-scheme re-fits start from the uniform law with `theta = 1/2`;
/// sizes-scheme re-fits use [`em::multi_start`] with `cfg.n_starts` starts.
pub fn bootstrap(
    offspring: &OffspringDistribution,
    control: &ControlFamily,
    truth: &ParameterVector,
    cfg: &BootstrapConfig,
) -> Result<BootstrapSummary> {
    if cfg.n_reps == 0 {
        return Err(Error::Domain("bootstrap needs at least one replicate".into()));
    }
    if control.kind() != cfg.em.kind || offspring.s_max() != cfg.em.s_max {
        return Err(Error::Domain("generating model and EM configuration disagree".into()));
    }
    let names = ParameterVector::names(cfg.em.s_max);
    let truth = truth.values();
    if truth.len() != names.len() {
        return Err(Error::Domain("truth vector has the wrong length".into()));
    }
    let results: Vec<Replicate> = (0..cfg.n_reps)
        .into_par_iter()
        .map(|i| replicate(offspring, control, cfg, i))
        .collect();

    let mut estimates = vec![Vec::new(); names.len()];
    let mut replicate_ids = Vec::new();
    let mut failures = Vec::new();
    let mut n_extinct = 0;
    for (i, r) in results.into_iter().enumerate() {
        match r {
            Replicate::Fitted(values) => {
                replicate_ids.push(i);
                for (col, v) in estimates.iter_mut().zip(values) {
                    col.push(v);
                }
            }
            Replicate::Extinct => n_extinct += 1,
            Replicate::Failed(why) => failures.push((i, why)),
        }
    }
    let n_success = replicate_ids.len();
    if n_success == 0 {
        if failures.is_empty() {
            return Err(Error::DegenerateSample(format!("all {n_extinct} replicates went extinct")));
        }
        return Err(Error::AllStartsFailed { failures });
    }
    let mse = estimates
        .iter()
        .zip(&truth)
        .map(|(col, t)| col.iter().map(|v| (v - t).powi(2)).sum::<f64>() / n_success as f64)
        .collect();
    Ok(BootstrapSummary {
        scheme: cfg.scheme,
        names,
        truth,
        estimates,
        replicate_ids,
        mse,
        n_success,
        n_failed: cfg.n_reps - n_success,
        n_extinct,
        failures,
    })
}

fn replicate(offspring: &OffspringDistribution, control: &ControlFamily, cfg: &BootstrapConfig, i: usize) -> Replicate {
    let mut rng = stream_rng(cfg.master_seed, i as u64);
    let tree = match simulate_with_rng(offspring, control, cfg.z0, cfg.n_generations, &mut rng) {
        Ok(t) => t,
        Err(e) => return Replicate::Failed(e.to_string()),
    };
    if tree.sizes().last() == Some(&0) {
        return Replicate::Extinct;
    }
    let fit = match cfg.scheme {
        Scheme::Progenitors => OffspringDistribution::uniform(cfg.em.s_max)
            .and_then(|init| em::em_fit_progenitors(&tree.project_progenitors(), &init, 0.5, &cfg.em)),
        Scheme::Sizes => {
            let seed: u64 = rng.random();
            em::multi_start(&tree.project_sizes(), cfg.n_starts, seed, &cfg.em).map(|m| m.best)
        }
    };
    match fit {
        Ok(fit) => Replicate::Fitted(ParameterVector::of_fit(&fit).values()),
        Err(e) => Replicate::Failed(e.to_string()),
    }
}

/// `b.mse / a.mse` per parameter: values above one favour `a`.
///
/// A zero denominator gives infinity, or one when both are zero.
pub fn efficiency(a: &BootstrapSummary, b: &BootstrapSummary) -> Result<Vec<f64>> {
    if a.names != b.names {
        return Err(Error::Domain("summaries cover different parameters".into()));
    }
    Ok(a.mse
        .iter()
        .zip(&b.mse)
        .map(|(&x, &y)| match (x == 0.0, y == 0.0) {
            (true, true) => 1.0,
            (true, false) => f64::INFINITY,
            _ => y / x,
        })
        .collect())
}
