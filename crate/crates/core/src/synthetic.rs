//! Built-in synthetic benchmark data.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};

use crate::dataset::SampleSet;
use crate::error::{Error, Result};

/// Names accepted by [`by_name`].
pub const NAMES: [&str; 1] = ["xor-oblique"];

/// Along-band standard deviation of [`xor_oblique`].
pub const BAND_LENGTH_STD: f64 = 4.0;
/// Across-band standard deviation of [`xor_oblique`].
pub const BAND_WIDTH_STD: f64 = 0.25;
/// Distance between neighbouring band centres is twice this value.
pub const BAND_SPACING: f64 = 1.0;

/// Band of each sample position within one cycle of [`BAND_CYCLE`] samples.
pub const BAND_CYCLE: [usize; 5] = [0, 1, 1, 2, 3];

/// Four long, thin Gaussian bands in 2D running along the diagonal `(1, 1)`.
/// Across the diagonal their centres sit at `-3, -1, 1, 3` (times
/// [`BAND_SPACING`]) with classes `0, 1, 1, 0`. Two parallel oblique cuts
/// separate the classes; axis-aligned cuts of depth 2 cannot.
/// Sample `i` belongs to band `BAND_CYCLE[i % 5]`, so the second band holds
/// twice as many samples as each other band and the classes are 2:3.
pub fn xor_oblique(n: usize, seed: u64) -> Result<SampleSet> {
    if n == 0 {
        return Err(Error::invalid("sample count must be positive"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let along = Normal::new(0.0, BAND_LENGTH_STD).expect("valid deviation");
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let offsets = [-3.0, -1.0, 1.0, 3.0];
    let classes = [0, 1, 1, 0];
    let mut features = Vec::with_capacity(2 * n);
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let band = BAND_CYCLE[i % BAND_CYCLE.len()];
        let a: f64 = along.sample(&mut rng);
        let z: f64 = StandardNormal.sample(&mut rng);
        let b = offsets[band] * BAND_SPACING + z * BAND_WIDTH_STD;
        features.push(s * (a - b));
        features.push(s * (a + b));
        labels.push(classes[band]);
    }
    SampleSet::new(features, labels, 2, 2)
}

/// Generate a named synthetic dataset.
pub fn by_name(name: &str, n: usize, seed: u64) -> Result<SampleSet> {
    match name {
        "xor-oblique" => xor_oblique(n, seed),
        other => Err(Error::invalid(format!(
            "unknown synthetic dataset {other:?}; available: {}",
            NAMES.join(", ")
        ))),
    }
}
