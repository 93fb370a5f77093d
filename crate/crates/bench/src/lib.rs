//! Fixtures shared by the benchmarks.

use std::path::Path;

use cbp_core::io::read_sample;
use cbp_core::{simulate, ControlFamily, ControlKind, FullTreeSample, OffspringDistribution};

/// The 30-generation tree in `data/simulated_n30.csv`.
pub fn reference_tree() -> FullTreeSample {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data/simulated_n30.csv");
    let file = std::fs::File::open(path).expect("reference data");
    read_sample(file).expect("valid sample").0.into_full().expect("full tree")
}

pub fn offspring() -> OffspringDistribution {
    OffspringDistribution::new(vec![0.1211, 0.2528, 0.3308, 0.2953]).unwrap()
}

pub fn control() -> ControlFamily {
    ControlFamily::from_mu(ControlKind::Binomial, 0.6087).unwrap()
}

/// A surviving simulated tree whose last generation has at least `min_last`
/// individuals.
pub fn large_tree(min_last: usize) -> FullTreeSample {
    (0..)
        .map(|seed| simulate(&offspring(), &control(), 1, 30, seed).unwrap())
        .find(|t| t.sizes()[30] >= min_last)
        .unwrap()
}
