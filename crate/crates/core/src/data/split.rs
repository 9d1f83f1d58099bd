//! Seeded train/validation splits.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::dataset::SampleSet;
use crate::error::{Error, Result};

/// Shuffle with `seed` and put `round(N·ratio)` samples into the first set.
pub fn split_train_val(data: &SampleSet, ratio: f64, seed: u64) -> Result<(SampleSet, SampleSet)> {
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(Error::invalid(format!("split ratio {ratio} is not in (0, 1)")));
    }
    let mut order: Vec<usize> = (0..data.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let n_train = (data.len() as f64 * ratio).round() as usize;
    Ok((data.subset(&order[..n_train]), data.subset(&order[n_train..])))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ten() -> SampleSet {
        SampleSet::new((0..10).map(f64::from).collect(), (0..10).map(|i| i % 3).collect(), 1, 3).unwrap()
    }

    #[test]
    fn sizes_and_determinism() {
        let (a, b) = split_train_val(&ten(), 0.8, 4).unwrap();
        assert_eq!((a.len(), b.len()), (8, 2));
        let (c, _) = split_train_val(&ten(), 0.8, 4).unwrap();
        assert_eq!(a, c);
        assert!(split_train_val(&ten(), 1.0, 4).is_err());
    }

    #[test]
    fn disjoint_and_exhaustive() {
        let (a, b) = split_train_val(&ten(), 0.7, 9).unwrap();
        let mut seen: Vec<f64> = a.rows().chain(b.rows()).map(|r| r[0]).collect();
        seen.sort_by(f64::total_cmp);
        assert_eq!(seen, (0..10).map(f64::from).collect::<Vec<_>>());
    }
}
