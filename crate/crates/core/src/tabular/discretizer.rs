use crate::envs::{THETA_THRESHOLD, X_THRESHOLD};
use crate::error::{Error, Result};

/// Maps an observation to a flat state index.
pub trait StateIndexer: Send + Sync {
    fn num_states(&self) -> usize;
    fn index(&self, obs: &[f64]) -> Result<usize>;
}

/// Uniform per-dimension binning over clamped ranges, combined row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Discretizer {
    bins: Vec<usize>,
    low: Vec<f64>,
    high: Vec<f64>,
}

impl Discretizer {
    pub fn new(bins: Vec<usize>, low: Vec<f64>, high: Vec<f64>) -> Result<Self> {
        if low.len() != bins.len() {
            return Err(Error::DimensionMismatch {
                expected: bins.len(),
                got: low.len(),
            });
        }
        if high.len() != bins.len() {
            return Err(Error::DimensionMismatch {
                expected: bins.len(),
                got: high.len(),
            });
        }
        if bins.contains(&0) {
            return Err(Error::Config(
                "every dimension needs at least one bin".into(),
            ));
        }
        if low
            .iter()
            .zip(&high)
            .any(|(l, h)| l.partial_cmp(h) != Some(std::cmp::Ordering::Less))
        {
            return Err(Error::Config("discretizer ranges need low < high".into()));
        }
        Ok(Self { bins, low, high })
    }

    /// {12, 8, 16, 12} bins over cart position, cart velocity, pole angle and
    /// pole angular velocity: 18,432 states.
    pub fn cartpole() -> Self {
        Self::new(
            vec![12, 8, 16, 12],
            vec![-X_THRESHOLD, -3.0, -THETA_THRESHOLD, -3.5],
            vec![X_THRESHOLD, 3.0, THETA_THRESHOLD, 3.5],
        )
        .expect("static cartpole discretizer is valid")
    }

    pub fn bins(&self) -> &[usize] {
        &self.bins
    }

    pub fn discretize(&self, obs: &[f64]) -> Result<usize> {
        if obs.len() != self.bins.len() {
            return Err(Error::DimensionMismatch {
                expected: self.bins.len(),
                got: obs.len(),
            });
        }
        let mut index = 0;
        for d in 0..obs.len() {
            let (lo, hi, n) = (self.low[d], self.high[d], self.bins[d]);
            let v = obs[d].clamp(lo, hi);
            let b = (((v - lo) / (hi - lo)) * n as f64) as usize;
            index = index * n + b.min(n - 1);
        }
        Ok(index)
    }
}

impl StateIndexer for Discretizer {
    fn num_states(&self) -> usize {
        self.bins.iter().product()
    }

    fn index(&self, obs: &[f64]) -> Result<usize> {
        self.discretize(obs)
    }
}

/// Index of the hot component of a one-hot observation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OneHotIndexer(pub usize);

impl StateIndexer for OneHotIndexer {
    fn num_states(&self) -> usize {
        self.0
    }

    fn index(&self, obs: &[f64]) -> Result<usize> {
        if obs.len() != self.0 {
            return Err(Error::DimensionMismatch {
                expected: self.0,
                got: obs.len(),
            });
        }
        obs.iter()
            .position(|&v| v > 0.5)
            .ok_or_else(|| Error::Format("observation is not one-hot".into()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn cartpole_grid_has_18432_states() {
        let d = Discretizer::cartpole();
        assert_eq!(d.num_states(), 18_432);
        assert_eq!(d.discretize(&d.low.clone()).unwrap(), 0);
        assert_eq!(d.discretize(&d.high.clone()).unwrap(), 18_431);
    }

    #[test]
    fn out_of_range_clamps() {
        let d = Discretizer::cartpole();
        let inside = [0.1, 2.9999, 0.0, -1.0];
        let beyond = [0.1, 40.0, 0.0, -1.0];
        let edge = [0.1, 3.0, 0.0, -1.0];
        assert_eq!(d.discretize(&beyond).unwrap(), d.discretize(&edge).unwrap());
        assert_eq!(d.discretize(&inside).unwrap(), d.discretize(&edge).unwrap());
    }

    #[test]
    fn row_major_layout() {
        let d = Discretizer::new(vec![2, 3], vec![0.0, 0.0], vec![1.0, 1.0]).unwrap();
        assert_eq!(d.discretize(&[0.0, 0.5]).unwrap(), 1);
        assert_eq!(d.discretize(&[0.9, 0.0]).unwrap(), 3);
        assert_eq!(d.discretize(&[0.9, 0.9]).unwrap(), 5);
    }

    #[test]
    fn dimension_mismatch_is_an_error() {
        let d = Discretizer::cartpole();
        assert!(matches!(
            d.discretize(&[0.0; 3]),
            Err(Error::DimensionMismatch {
                expected: 4,
                got: 3
            })
        ));
        assert!(Discretizer::new(vec![2], vec![0.0, 1.0], vec![1.0]).is_err());
        assert_eq!(OneHotIndexer(3).index(&[0.0, 0.0, 1.0]).unwrap(), 2);
    }

    proptest! {
        #[test]
        fn index_always_in_range(obs in proptest::array::uniform4(-100f64..100.0)) {
            let d = Discretizer::cartpole();
            prop_assert!(d.discretize(&obs).unwrap() < 18_432);
        }
    }
}
