//! Fixtures shared by the benchmarks.

use uresample_core::families::FamilySpec;
use uresample_core::rng::stream;
use uresample_core::Sample;

/// `n` draws from an equicorrelated `k`-variate standard normal.
pub fn normal_sample(n: usize, k: usize, seed: u64) -> Sample {
    FamilySpec::Normal { mu: vec![0.0; k], sd: None, rho: 0.3 }
        .at(n)
        .and_then(|f| f.sample(n, &mut stream(seed, &[0])))
        .expect("valid normal family")
}
