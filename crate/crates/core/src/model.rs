//! The controlled branching process: offspring law, power-series control
//! families, the three sample granularities and forward simulation.
//!
//! A generation of size `z` first draws a number of progenitors
//! `phi ~ control(z)`, then each progenitor independently produces
//! `k in 0..=s_max` offspring with probability `p_k`. The next generation
//! size is the total offspring count.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::{Binomial, Distribution, Gamma, Poisson};
use serde::{Deserialize, Serialize};
use statrs::function::factorial::{ln_binomial, ln_factorial};

use crate::error::{Error, Result};
use crate::rng::stream_rng;

/// Probability mass left out when an unbounded control law is truncated.
pub const CONTROL_TAIL_MASS: f64 = 1e-12;

/// Offspring law with finite support `0..=s_max`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OffspringDistribution {
    probs: Vec<f64>,
}

impl OffspringDistribution {
    /// Accepted deviation of `sum(probs)` from one.
    pub const SUM_TOLERANCE: f64 = 1e-12;

    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.len() < 2 {
            return Err(Error::Domain(format!(
                "offspring law needs s_max >= 1, got {} probabilities",
                probs.len()
            )));
        }
        if let Some(bad) = probs.iter().find(|p| !(0.0..=1.0).contains(*p)) {
            return Err(Error::Domain(format!("offspring probability {bad} outside [0, 1]")));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > Self::SUM_TOLERANCE {
            return Err(Error::Domain(format!("offspring probabilities sum to {total}, not 1")));
        }
        Ok(Self { probs })
    }

    /// Normalizes nonnegative weights onto the simplex.
    pub fn from_weights(weights: Vec<f64>) -> Result<Self> {
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::Domain("offspring weights must be finite and nonnegative".into()));
        }
        let total: f64 = weights.iter().sum();
        if total <= 0.0 {
            return Err(Error::Domain("offspring weights sum to zero".into()));
        }
        Self::new(weights.into_iter().map(|w| w / total).collect())
    }

    pub fn uniform(s_max: usize) -> Result<Self> {
        Self::from_weights(vec![1.0; s_max + 1])
    }

    pub fn point_mass(k: usize, s_max: usize) -> Result<Self> {
        if k > s_max {
            return Err(Error::Domain(format!("point mass at {k} beyond s_max = {s_max}")));
        }
        let mut probs = vec![0.0; s_max + 1];
        probs[k] = 1.0;
        Self::new(probs)
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn prob(&self, k: usize) -> f64 {
        self.probs.get(k).copied().unwrap_or(0.0)
    }

    pub fn s_max(&self) -> usize {
        self.probs.len() - 1
    }

    pub fn mean(&self) -> f64 {
        self.probs.iter().enumerate().map(|(k, p)| k as f64 * p).sum()
    }

    pub fn variance(&self) -> f64 {
        self.central_moment(2)
    }

    pub fn central_moment(&self, order: i32) -> f64 {
        let m = self.mean();
        self.probs
            .iter()
            .enumerate()
            .map(|(k, p)| (k as f64 - m).powi(order) * p)
            .sum()
    }

    /// Draws the per-category counts of `n` i.i.d. offspring draws.
    pub fn sample_counts<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Vec<usize> {
        let s = self.s_max();
        let mut tail = vec![0.0; s + 2];
        for k in (0..=s).rev() {
            tail[k] = tail[k + 1] + self.probs[k];
        }
        let mut counts = vec![0; s + 1];
        let mut remaining = n;
        for k in 0..s {
            if remaining == 0 {
                break;
            }
            let prob = if tail[k + 1] <= 0.0 {
                1.0
            } else {
                (self.probs[k] / tail[k]).clamp(0.0, 1.0)
            };
            let c = if prob >= 1.0 {
                remaining
            } else if prob <= 0.0 {
                0
            } else {
                Binomial::new(remaining as u64, prob)
                    .expect("binomial probability lies in [0, 1]")
                    .sample(rng) as usize
            };
            counts[k] = c;
            remaining -= c;
        }
        counts[s] += remaining;
        counts
    }
}

/// The three power-series control laws with `A_k(theta) = A_1(theta)^k`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ControlKind {
    /// `phi(k) ~ Bin(k, q)`, `theta = q / (1 - q)`.
    Binomial,
    /// `phi(k) ~ Poisson(k theta)`.
    Poisson,
    /// `phi(k) ~ NegBin(k, q)` counting failures, `theta = 1 - q`.
    NegativeBinomial,
}

impl ControlKind {
    pub const ALL: [ControlKind; 3] = [
        ControlKind::Binomial,
        ControlKind::NegativeBinomial,
        ControlKind::Poisson,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ControlKind::Binomial => "binomial",
            ControlKind::Poisson => "poisson",
            ControlKind::NegativeBinomial => "negative-binomial",
        }
    }

    /// Supremum of `mu(theta)` over the parameter space.
    pub fn mu_upper(self) -> f64 {
        match self {
            ControlKind::Binomial => 1.0,
            ControlKind::Poisson | ControlKind::NegativeBinomial => f64::INFINITY,
        }
    }
}

impl fmt::Display for ControlKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ControlKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('_', "-").as_str() {
            "binomial" | "bin" => Ok(ControlKind::Binomial),
            "poisson" | "poi" => Ok(ControlKind::Poisson),
            "negative-binomial" | "negbin" | "nbinomial" | "nb" => Ok(ControlKind::NegativeBinomial),
            other => Err(Error::Domain(format!("unknown control family '{other}'"))),
        }
    }
}

/// A control law: a family together with its parameter `theta`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ControlFamily {
    kind: ControlKind,
    theta: f64,
}

impl ControlFamily {
    pub fn new(kind: ControlKind, theta: f64) -> Result<Self> {
        let ok = theta.is_finite()
            && theta > 0.0
            && (kind != ControlKind::NegativeBinomial || theta < 1.0);
        if !ok {
            return Err(Error::Domain(format!("theta = {theta} outside the {kind} parameter space")));
        }
        Ok(Self { kind, theta })
    }

    /// Inverts `mu(theta)`.
    pub fn from_mu(kind: ControlKind, mu: f64) -> Result<Self> {
        if !(mu > 0.0 && mu < kind.mu_upper() && mu.is_finite()) {
            return Err(Error::Boundary { family: kind, value: mu });
        }
        let theta = match kind {
            ControlKind::Binomial => mu / (1.0 - mu),
            ControlKind::Poisson => mu,
            ControlKind::NegativeBinomial => mu / (1.0 + mu),
        };
        Self::new(kind, theta).map_err(|_| Error::Boundary { family: kind, value: mu })
    }

    pub fn kind(&self) -> ControlKind {
        self.kind
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    /// Migration parameter: expected progenitors per individual.
    pub fn mu(&self) -> f64 {
        let t = self.theta;
        match self.kind {
            ControlKind::Binomial => t / (1.0 + t),
            ControlKind::Poisson => t,
            ControlKind::NegativeBinomial => t / (1.0 - t),
        }
    }

    pub fn mu_prime(&self) -> f64 {
        let t = self.theta;
        match self.kind {
            ControlKind::Binomial => 1.0 / ((1.0 + t) * (1.0 + t)),
            ControlKind::Poisson => 1.0,
            ControlKind::NegativeBinomial => 1.0 / ((1.0 - t) * (1.0 - t)),
        }
    }

    /// `E[phi(k)] = k mu(theta)`.
    pub fn mean(&self, k: usize) -> f64 {
        k as f64 * self.mu()
    }

    /// `Var[phi(k)] = k theta mu'(theta)`.
    pub fn variance(&self, k: usize) -> f64 {
        k as f64 * self.theta * self.mu_prime()
    }

    /// `ln A_1(theta)`.
    pub fn ln_a1(&self) -> f64 {
        let t = self.theta;
        match self.kind {
            ControlKind::Binomial => t.ln_1p(),
            ControlKind::Poisson => t,
            ControlKind::NegativeBinomial => -(-t).ln_1p(),
        }
    }

    /// `ln A_k(theta) = k ln A_1(theta)`.
    pub fn ln_normalizer(&self, k: usize) -> f64 {
        k as f64 * self.ln_a1()
    }

    /// `ln a_k(j)`; `-inf` where the coefficient vanishes.
    pub fn ln_coefficient(&self, k: usize, j: usize) -> f64 {
        ln_coefficient(self.kind, k, j)
    }

    pub fn ln_pmf(&self, k: usize, j: usize) -> f64 {
        let a = self.ln_coefficient(k, j);
        if a == f64::NEG_INFINITY {
            return a;
        }
        a + j as f64 * self.theta.ln() - self.ln_normalizer(k)
    }

    /// `P[phi(k) = j]`.
    pub fn pmf(&self, k: usize, j: usize) -> f64 {
        self.ln_pmf(k, j).exp()
    }

    /// Largest possible value of `phi(k)`, if bounded.
    pub fn support_max(&self, k: usize) -> Option<usize> {
        match self.kind {
            ControlKind::Binomial => Some(k),
            _ if k == 0 => Some(0),
            _ => None,
        }
    }

    /// Smallest `j` with `P[phi(k) <= j] >= 1 - tail`.
    pub fn quantile_upper(&self, k: usize, tail: f64) -> usize {
        let max = self.support_max(k);
        let mut cdf = 0.0;
        let mut j = 0;
        loop {
            cdf += self.pmf(k, j);
            if cdf >= 1.0 - tail || Some(j) == max {
                return j;
            }
            j += 1;
        }
    }

    /// Range of progenitor counts summed over when a transition
    /// `z -> z_next` is marginalized: bounded families use their whole
    /// support, unbounded ones are cut where the control tail drops below
    /// [`CONTROL_TAIL_MASS`] but never below `ceil(z_next / s_max)`.
    ///
    /// Values below `ceil(z_next / s_max)` cannot produce `z_next` and are
    /// skipped. Returns `None` when no progenitor count is feasible.
    pub fn progenitor_range(
        &self,
        z: usize,
        z_next: usize,
        s_max: usize,
    ) -> Option<std::ops::RangeInclusive<usize>> {
        let lo = z_next.div_ceil(s_max);
        let hi = match self.support_max(z) {
            Some(max) => max,
            None => self.quantile_upper(z, CONTROL_TAIL_MASS).max(lo),
        };
        (lo <= hi).then_some(lo..=hi)
    }

    pub fn sample<R: Rng + ?Sized>(&self, k: usize, rng: &mut R) -> usize {
        if k == 0 {
            return 0;
        }
        match self.kind {
            ControlKind::Binomial => Binomial::new(k as u64, self.mu())
                .expect("binomial control probability lies in (0, 1)")
                .sample(rng) as usize,
            ControlKind::Poisson => sample_poisson(k as f64 * self.theta, rng),
            ControlKind::NegativeBinomial => {
                // Gamma-Poisson mixture: failures before the k-th success.
                let scale = self.theta / (1.0 - self.theta);
                let rate = Gamma::new(k as f64, scale)
                    .expect("gamma shape and scale are positive")
                    .sample(rng);
                sample_poisson(rate, rng)
            }
        }
    }
}

fn sample_poisson<R: Rng + ?Sized>(lambda: f64, rng: &mut R) -> usize {
    if lambda <= 0.0 {
        return 0;
    }
    Poisson::new(lambda)
        .expect("poisson rate is positive and finite")
        .sample(rng) as usize
}

pub(crate) fn ln_coefficient(kind: ControlKind, k: usize, j: usize) -> f64 {
    match kind {
        ControlKind::Binomial if j > k => f64::NEG_INFINITY,
        ControlKind::Binomial => ln_binomial(k as u64, j as u64),
        _ if k == 0 => {
            if j == 0 {
                0.0
            } else {
                f64::NEG_INFINITY
            }
        }
        ControlKind::Poisson => j as f64 * (k as f64).ln() - ln_factorial(j as u64),
        ControlKind::NegativeBinomial => ln_binomial((j + k - 1) as u64, j as u64),
    }
}

/// `P[phi(k) = j]` for the given control law.
pub fn control_pmf(family: &ControlFamily, k: usize, j: usize) -> f64 {
    family.pmf(k, j)
}

/// The entire family tree up to generation `n`, summarized by the counts
/// `z_l(k)` of generation-`l` progenitors having exactly `k` offspring.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FullTreeSample {
    z0: usize,
    counts: Vec<Vec<usize>>,
}

impl FullTreeSample {
    pub fn new(z0: usize, counts: Vec<Vec<usize>>) -> Result<Self> {
        let width = counts.first().map_or(0, Vec::len);
        if counts.is_empty() || width < 2 {
            return Err(Error::Format(
                "a full tree needs at least one generation and s_max >= 1".into(),
            ));
        }
        if let Some(l) = counts.iter().position(|row| row.len() != width) {
            return Err(Error::inconsistent(l, "rows have different widths"));
        }
        let sample = Self { z0, counts };
        let z = sample.sizes();
        for (l, row) in sample.counts.iter().enumerate() {
            if z[l] == 0 && row.iter().any(|&c| c > 0) {
                return Err(Error::inconsistent(l, "progenitors in an extinct generation"));
            }
        }
        Ok(sample)
    }

    pub fn z0(&self) -> usize {
        self.z0
    }

    pub fn counts(&self) -> &[Vec<usize>] {
        &self.counts
    }

    pub fn n_generations(&self) -> usize {
        self.counts.len()
    }

    pub fn s_max(&self) -> usize {
        self.counts[0].len() - 1
    }

    /// Generation sizes `Z_0..=Z_n`.
    pub fn sizes(&self) -> Vec<usize> {
        std::iter::once(self.z0)
            .chain(self.counts.iter().map(|row| offspring_total(row)))
            .collect()
    }

    /// Progenitor counts `phi_0..phi_{n-1}`.
    pub fn progenitors(&self) -> Vec<usize> {
        self.counts.iter().map(|row| row.iter().sum()).collect()
    }

    /// `Y_{n-1}(k)`: progenitors with exactly `k` offspring, accumulated.
    pub fn offspring_totals(&self) -> Vec<usize> {
        let mut totals = vec![0; self.s_max() + 1];
        for row in &self.counts {
            for (t, c) in totals.iter_mut().zip(row) {
                *t += c;
            }
        }
        totals
    }

    /// The sample restricted to the first `n` generations.
    pub fn prefix(&self, n: usize) -> Result<Self> {
        if n == 0 || n > self.n_generations() {
            return Err(Error::Domain(format!(
                "prefix length {n} outside 1..={}",
                self.n_generations()
            )));
        }
        Ok(Self {
            z0: self.z0,
            counts: self.counts[..n].to_vec(),
        })
    }

    pub fn project_progenitors(&self) -> ProgenitorSample {
        ProgenitorSample {
            z: self.sizes(),
            phi: self.progenitors(),
        }
    }

    pub fn project_sizes(&self) -> SizesSample {
        SizesSample { z: self.sizes() }
    }
}

fn offspring_total(row: &[usize]) -> usize {
    row.iter().enumerate().map(|(k, c)| k * c).sum()
}

pub fn project_progenitors(sample: &FullTreeSample) -> ProgenitorSample {
    sample.project_progenitors()
}

pub fn project_sizes(sample: &FullTreeSample) -> SizesSample {
    sample.project_sizes()
}

fn check_absorption(z: &[usize], phi: Option<&[usize]>) -> Result<()> {
    for l in 0..z.len() - 1 {
        let progenitors = phi.map(|p| p[l]);
        if z[l] == 0 && progenitors.unwrap_or(0) > 0 {
            return Err(Error::inconsistent(l, "progenitors in an extinct generation"));
        }
        let dead = progenitors.map_or(z[l] == 0, |p| p == 0);
        if dead && z[l + 1] > 0 {
            return Err(Error::inconsistent(l, "offspring without progenitors"));
        }
    }
    Ok(())
}

/// Generation sizes together with the progenitor counts.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProgenitorSample {
    z: Vec<usize>,
    phi: Vec<usize>,
}

impl ProgenitorSample {
    pub fn new(z: Vec<usize>, phi: Vec<usize>) -> Result<Self> {
        if z.len() < 2 || phi.len() + 1 != z.len() {
            return Err(Error::Format(format!(
                "need n + 1 sizes and n progenitor counts, got {} and {}",
                z.len(),
                phi.len()
            )));
        }
        check_absorption(&z, Some(&phi))?;
        Ok(Self { z, phi })
    }

    pub fn z(&self) -> &[usize] {
        &self.z
    }

    pub fn phi(&self) -> &[usize] {
        &self.phi
    }

    pub fn n_generations(&self) -> usize {
        self.phi.len()
    }

    /// `Y_{n-1}`.
    pub fn total_individuals(&self) -> usize {
        self.z[..self.n_generations()].iter().sum()
    }

    /// `Delta_{n-1}`.
    pub fn total_progenitors(&self) -> usize {
        self.phi.iter().sum()
    }

    pub fn to_sizes(&self) -> SizesSample {
        SizesSample { z: self.z.clone() }
    }

    pub fn prefix(&self, n: usize) -> Result<Self> {
        if n == 0 || n > self.n_generations() {
            return Err(Error::Domain(format!("prefix length {n} outside 1..={}", self.n_generations())));
        }
        Self::new(self.z[..=n].to_vec(), self.phi[..n].to_vec())
    }

    /// Checks that every transition is possible under the family and
    /// offspring bound.
    pub fn validate_against(&self, kind: ControlKind, s_max: usize) -> Result<()> {
        for l in 0..self.n_generations() {
            let (z, phi, next) = (self.z[l], self.phi[l], self.z[l + 1]);
            if kind == ControlKind::Binomial && phi > z {
                return Err(Error::inconsistent(
                    l,
                    format!("binomial control cannot give {phi} progenitors from {z} individuals"),
                ));
            }
            if next > s_max * phi {
                return Err(Error::inconsistent(
                    l,
                    format!("{phi} progenitors cannot produce {next} offspring with s_max = {s_max}"),
                ));
            }
        }
        Ok(())
    }
}

/// Generation sizes only.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SizesSample {
    z: Vec<usize>,
}

impl SizesSample {
    pub fn new(z: Vec<usize>) -> Result<Self> {
        if z.len() < 2 {
            return Err(Error::Format("need at least two generation sizes".into()));
        }
        check_absorption(&z, None)?;
        Ok(Self { z })
    }

    pub fn z(&self) -> &[usize] {
        &self.z
    }

    pub fn n_generations(&self) -> usize {
        self.z.len() - 1
    }

    /// `Y_{n-1}`.
    pub fn total_individuals(&self) -> usize {
        self.z[..self.n_generations()].iter().sum()
    }

    pub fn prefix(&self, n: usize) -> Result<Self> {
        if n == 0 || n > self.n_generations() {
            return Err(Error::Domain(format!("prefix length {n} outside 1..={}", self.n_generations())));
        }
        Self::new(self.z[..=n].to_vec())
    }

    pub fn validate_against(&self, kind: ControlKind, s_max: usize) -> Result<()> {
        for l in 0..self.n_generations() {
            let (z, next) = (self.z[l], self.z[l + 1]);
            if kind == ControlKind::Binomial && next > s_max * z {
                return Err(Error::inconsistent(
                    l,
                    format!("{z} individuals cannot produce {next} offspring under binomial control with s_max = {s_max}"),
                ));
            }
        }
        Ok(())
    }
}

/// Simulates `n_generations` of the process from `z0` ancestors.
///
/// The output is a pure function of the arguments; see [`crate::rng`] for
/// the generator contract.
pub fn simulate(
    offspring: &OffspringDistribution,
    family: &ControlFamily,
    z0: usize,
    n_generations: usize,
    seed: u64,
) -> Result<FullTreeSample> {
    let mut rng = stream_rng(seed, 0);
    simulate_with_rng(offspring, family, z0, n_generations, &mut rng)
}

pub fn simulate_with_rng<R: Rng + ?Sized>(
    offspring: &OffspringDistribution,
    family: &ControlFamily,
    z0: usize,
    n_generations: usize,
    rng: &mut R,
) -> Result<FullTreeSample> {
    if n_generations == 0 {
        return Err(Error::Domain("simulation needs at least one generation".into()));
    }
    let mut counts = Vec::with_capacity(n_generations);
    let mut z = z0;
    for _ in 0..n_generations {
        let phi = family.sample(z, rng);
        let row = offspring.sample_counts(phi, rng);
        z = offspring_total(&row);
        counts.push(row);
    }
    FullTreeSample::new(z0, counts)
}
