//! Brute-force oracles over every hidden path of a short chain.
//!
//! Each progenitor's offspring count is enumerated individually, so the
//! multinomial coefficients and convolution powers used by the library never
//! appear here.

#![allow(dead_code)]

use cbp_core::model::{ControlFamily, OffspringDistribution};

/// Every ordered offspring sequence of length `phi` summing to `z_next`.
fn sequences(phi: usize, z_next: usize, s_max: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur = Vec::with_capacity(phi);
    fn go(left: usize, z: usize, s: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if left == 0 {
            if z == 0 {
                out.push(cur.clone());
            }
            return;
        }
        for x in 0..=s.min(z) {
            cur.push(x);
            go(left - 1, z - x, s, cur, out);
            cur.pop();
        }
    }
    go(phi, z_next, s_max, &mut cur, &mut out);
    out
}

/// One hidden transition: the progenitor count, per-category counts and
/// probability weight.
#[derive(Clone)]
struct Hidden {
    phi: usize,
    counts: Vec<f64>,
    weight: f64,
}

fn transition_paths(
    p: &OffspringDistribution,
    control: Option<&ControlFamily>,
    z: usize,
    z_next: usize,
    phis: &[usize],
) -> Vec<Hidden> {
    let s = p.s_max();
    let mut out = Vec::new();
    for &phi in phis {
        let prior = control.map_or(1.0, |c| c.pmf(z, phi));
        for seq in sequences(phi, z_next, s) {
            let mut counts = vec![0.0; s + 1];
            let mut weight = prior;
            for &x in &seq {
                counts[x] += 1.0;
                weight *= p.prob(x);
            }
            out.push(Hidden { phi, counts, weight });
        }
    }
    out
}

/// Posterior expectations and total probability of a whole chain.
pub struct ChainOracle {
    pub counts: Vec<Vec<f64>>,
    pub delta: f64,
    pub probability: f64,
}

/// Enumerates the joint hidden path over all generations. `phis[l]` lists
/// the progenitor counts allowed at generation `l`; `control = None` means
/// the progenitor counts are observed.
pub fn chain(
    z: &[usize],
    p: &OffspringDistribution,
    control: Option<&ControlFamily>,
    phis: &[Vec<usize>],
) -> ChainOracle {
    let per_step: Vec<Vec<Hidden>> = (0..z.len() - 1)
        .map(|l| transition_paths(p, control, z[l], z[l + 1], &phis[l]))
        .collect();
    let s = p.s_max();
    let n = per_step.len();
    let mut counts = vec![vec![0.0; s + 1]; n];
    let mut delta = 0.0;
    let mut total = 0.0;
    let mut choice = vec![0usize; n];
    if per_step.iter().any(Vec::is_empty) {
        return ChainOracle {
            counts,
            delta,
            probability: 0.0,
        };
    }
    loop {
        let weight: f64 = (0..n).map(|l| per_step[l][choice[l]].weight).product();
        total += weight;
        for l in 0..n {
            let h = &per_step[l][choice[l]];
            delta += weight * h.phi as f64;
            for (c, v) in counts[l].iter_mut().zip(&h.counts) {
                *c += weight * v;
            }
        }
        let mut l = 0;
        loop {
            if l == n {
                for row in counts.iter_mut() {
                    row.iter_mut().for_each(|c| *c /= total);
                }
                return ChainOracle {
                    counts,
                    delta: delta / total,
                    probability: total,
                };
            }
            choice[l] += 1;
            if choice[l] < per_step[l].len() {
                break;
            }
            choice[l] = 0;
            l += 1;
        }
    }
}

/// Every progenitor path `(phi_0, ..., phi_{n-1})` with `phi_l` drawn from
/// `phis[l]`.
pub fn progenitor_paths(phis: &[Vec<usize>]) -> Vec<Vec<usize>> {
    let mut out = vec![Vec::new()];
    for options in phis {
        out = out
            .into_iter()
            .flat_map(|prefix| {
                options.iter().map(move |&phi| {
                    let mut v = prefix.clone();
                    v.push(phi);
                    v
                })
            })
            .collect();
    }
    out
}
