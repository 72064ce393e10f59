//! Weight initialization.

use rand::distributions::{Distribution, Uniform};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::matrix::Matrix;
use crate::error::{Error, Result};

/// Xavier/Glorot uniform initialization: entries drawn from
/// `U[-sqrt(6/(fan_in+fan_out)), +sqrt(6/(fan_in+fan_out))]`.
///
/// The returned matrix has shape `fan_out x fan_in`, i.e. it maps a layer of
/// width `fan_in` to a layer of width `fan_out`. Deterministic for a given
/// seed.
pub fn xavier_init(fan_in: usize, fan_out: usize, rng_seed: u64) -> Result<Matrix> {
    if fan_in == 0 || fan_out == 0 {
        return Err(Error::InvalidArgument(format!(
            "xavier_init: fan dimensions must be >= 1, got {fan_in}x{fan_out}"
        )));
    }
    let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
    let dist = Uniform::new_inclusive(-bound, bound);
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let data = (0..fan_in * fan_out).map(|_| dist.sample(&mut rng)).collect();
    Matrix::from_flat(fan_out, fan_in, data)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn entries_within_bound() {
        // bound for 20/20 fans: sqrt(6/40)
        let bound = (6.0f64 / 40.0).sqrt();
        assert!((bound - 0.387).abs() < 1e-3);
        let m = xavier_init(20, 20, 7).unwrap();
        assert!(m.as_slice().iter().all(|v| v.abs() <= bound));
        // the draw should actually spread out instead of collapsing near 0
        assert!(m.max_abs() > bound * 0.5);
    }

    #[test]
    fn deterministic_for_seed() {
        let a = xavier_init(13, 9, 42).unwrap();
        let b = xavier_init(13, 9, 42).unwrap();
        assert_eq!(a, b);
        let c = xavier_init(13, 9, 43).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn single_unit_bound() {
        let m = xavier_init(1, 1, 3).unwrap();
        assert!(m.get(0, 0).abs() <= 3.0f64.sqrt());
    }

    #[test]
    fn zero_fan_rejected() {
        assert!(xavier_init(0, 5, 1).is_err());
        assert!(xavier_init(5, 0, 1).is_err());
    }
}
