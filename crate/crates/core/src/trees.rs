//! Offspring configurations compatible with observed totals.
//!
//! A configuration `(z(0), ..., z(s_max))` lists how many progenitors had
//! exactly `k` offspring. Given `phi` progenitors and `z_next` offspring the
//! feasible configurations satisfy `sum z(k) = phi` and
//! `sum k z(k) = z_next`; their number is the coefficient of `q^z_next` in
//! the Gaussian binomial `[phi + s_max choose s_max]_q`.

use serde::Serialize;

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct Configuration {
    pub counts: Vec<usize>,
}

impl Configuration {
    pub fn progenitors(&self) -> usize {
        self.counts.iter().sum()
    }

    pub fn offspring(&self) -> usize {
        self.counts.iter().enumerate().map(|(k, c)| k * c).sum()
    }
}

/// All configurations with `phi_star` progenitors and `z_next` offspring,
/// in ascending lexicographic order of `(z(0), z(1), ...)`.
pub fn enumerate_fixed(phi_star: usize, z_next: usize, s_max: usize) -> Vec<Configuration> {
    let mut out = Vec::new();
    let mut current = vec![0; s_max + 1];
    fill(0, phi_star, z_next, s_max, &mut current, &mut out);
    out
}

fn fill(
    k: usize,
    left: usize,
    offspring: usize,
    s_max: usize,
    current: &mut Vec<usize>,
    out: &mut Vec<Configuration>,
) {
    if k == s_max {
        if s_max * left == offspring {
            current[k] = left;
            out.push(Configuration {
                counts: current.clone(),
            });
            current[k] = 0;
        }
        return;
    }
    for c in 0..=left {
        if k * c > offspring {
            break;
        }
        let rest = left - c;
        let remaining = offspring - k * c;
        // The other `rest` progenitors each contribute between k + 1 and s_max.
        if rest * (k + 1) > remaining || rest * s_max < remaining {
            continue;
        }
        current[k] = c;
        fill(k + 1, rest, remaining, s_max, current, out);
    }
    current[k] = 0;
}

/// Configurations with between one and `z_l` progenitors, tagged with their
/// progenitor count and ordered by it.
///
/// When `z_next = 0` the empty configuration `(0, zero vector)` is appended,
/// since zero progenitors is then a possible explanation of the
/// transition.
pub fn enumerate_ranged(z_l: usize, z_next: usize, s_max: usize) -> Vec<(usize, Configuration)> {
    let mut out: Vec<(usize, Configuration)> = (1..=z_l)
        .flat_map(|phi| {
            enumerate_fixed(phi, z_next, s_max)
                .into_iter()
                .map(move |c| (phi, c))
        })
        .collect();
    if z_next == 0 {
        out.push((0, Configuration { counts: vec![0; s_max + 1] }));
    }
    out
}

/// Counts of configurations `b(phi, z)` for all `phi <= phi_max`,
/// `z <= z_max` at a fixed `s_max`.
#[derive(Debug, Clone)]
pub struct CompositionCounts {
    s_max: usize,
    z_max: usize,
    table: Vec<u128>,
}

impl CompositionCounts {
    pub fn new(s_max: usize, phi_max: usize, z_max: usize) -> Self {
        let width = z_max + 1;
        let mut table = vec![0u128; (phi_max + 1) * width];
        table[0] = 1;
        // Add one part size at a time; in-place ascending phi makes each part
        // reusable any number of times.
        for part in 0..=s_max {
            for phi in 1..=phi_max {
                for z in part..=z_max {
                    let add = table[(phi - 1) * width + z - part];
                    table[phi * width + z] += add;
                }
            }
        }
        Self { s_max, z_max, table }
    }

    pub fn s_max(&self) -> usize {
        self.s_max
    }

    pub fn get(&self, phi: usize, z: usize) -> u128 {
        if z > self.z_max {
            return 0;
        }
        self.table
            .get(phi * (self.z_max + 1) + z)
            .copied()
            .unwrap_or(0)
    }
}

/// Number of configurations with `phi_star` progenitors and `z_next`
/// offspring.
pub fn count_b(phi_star: usize, z_next: usize, s_max: usize) -> u128 {
    if z_next > s_max * phi_star {
        return 0;
    }
    CompositionCounts::new(s_max, phi_star, z_next).get(phi_star, z_next)
}

/// Number of configurations with `1..=z_l` progenitors and `z_next`
/// offspring.
pub fn count_b_star(z_l: usize, z_next: usize, s_max: usize) -> u128 {
    let counts = CompositionCounts::new(s_max, z_l, z_next);
    (1..=z_l).map(|phi| counts.get(phi, z_next)).sum()
}

/// `max_z b(z_l, z)` over `z = 0..=s_max z_l`.
pub fn b_max(z_l: usize, s_max: usize) -> u128 {
    let counts = CompositionCounts::new(s_max, z_l, s_max * z_l);
    (0..=s_max * z_l).map(|z| counts.get(z_l, z)).max().unwrap_or(0)
}

/// `max_z b*(z_l, z)` over `z = 0..=s_max z_l`.
pub fn b_star_max(z_l: usize, s_max: usize) -> u128 {
    let counts = CompositionCounts::new(s_max, z_l, s_max * z_l);
    (0..=s_max * z_l)
        .map(|z| (1..=z_l).map(|phi| counts.get(phi, z)).sum::<u128>())
        .max()
        .unwrap_or(0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct TreeBounds {
    pub z_l: usize,
    pub b_max: u128,
    pub b_star_max: u128,
}

/// `b_max` and `b*_max` for every `z_l = 1..=z_max`, sharing one count
/// table.
pub fn tree_bounds(s_max: usize, z_max: usize) -> Vec<TreeBounds> {
    let width = s_max * z_max;
    let counts = CompositionCounts::new(s_max, z_max, width);
    let mut cumulative = vec![0u128; width + 1];
    (1..=z_max)
        .map(|z_l| {
            let mut b_max = 0;
            for (z, acc) in cumulative.iter_mut().enumerate().take(s_max * z_l + 1) {
                let b = counts.get(z_l, z);
                *acc += b;
                b_max = b_max.max(b);
            }
            let b_star_max = cumulative[..=s_max * z_l].iter().copied().max().unwrap_or(0);
            TreeBounds {
                z_l,
                b_max,
                b_star_max,
            }
        })
        .collect()
}
