//! Scalar targets and the sequential Gaussian proposal of the bimodal
//! benchmark.

use rand::RngCore;
use rand_distr::{Distribution, StandardNormal};

use crate::density::{ProposalSequence, TargetDensity};
use crate::error::{Error, Result};

const LN_2PI: f64 = 1.837_877_066_409_345_5;

/// `p(x) = exp(-(x² - 4)² / 4)`, modes at ±2.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct BimodalQuartic;

/// Log density of [`BimodalQuartic`].
pub fn builtin_target_bimodal(x: f64) -> f64 {
    -(x * x - 4.0).powi(2) / 4.0
}

impl TargetDensity<f64> for BimodalQuartic {
    fn log_density(&self, x: &f64) -> f64 {
        builtin_target_bimodal(*x)
    }
}

/// Unnormalized Gaussian target.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianTarget {
    pub mean: f64,
    pub variance: f64,
}

impl TargetDensity<f64> for GaussianTarget {
    fn log_density(&self, x: &f64) -> f64 {
        -(x - self.mean).powi(2) / (2.0 * self.variance)
    }
}

/// Gaussian proposals whose location is a weighted mean of the chain state
/// and the points already drawn in the step:
///
/// `μ_1 = x`, `μ_j = γ₁/(j-1) · (x + y_1 + … + y_{j-2}) + γ₂ · y_{j-1}`.
///
/// The location only depends on the conditioning tuple, so the family is
/// defined for every index.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeightedMeanGaussian {
    variance: f64,
    std_dev: f64,
    gamma1: f64,
    gamma2: f64,
}

impl WeightedMeanGaussian {
    pub fn new(variance: f64, gamma1: f64, gamma2: f64) -> Result<Self> {
        if !(variance > 0.0 && variance.is_finite()) {
            return Err(Error::Config(format!("proposal variance must be positive, got {variance}")));
        }
        if !gamma1.is_finite() || !gamma2.is_finite() || (gamma1 + gamma2 - 1.0).abs() > 1e-12 {
            return Err(Error::Config(format!("gamma1 + gamma2 must equal 1, got {gamma1} + {gamma2}")));
        }
        Ok(Self { variance, std_dev: variance.sqrt(), gamma1, gamma2 })
    }

    pub fn variance(&self) -> f64 {
        self.variance
    }

    /// Location of the next proposal given the chain state and earlier points.
    pub fn mean(&self, prev: f64, earlier: &[f64]) -> f64 {
        match earlier.split_last() {
            None => prev,
            Some((last, rest)) => {
                let mut sum = prev;
                for v in rest {
                    sum += v;
                }
                self.gamma1 / earlier.len() as f64 * sum + self.gamma2 * last
            }
        }
    }

    fn log_normal(&self, y: f64, mu: f64) -> f64 {
        -0.5 * (LN_2PI + self.variance.ln()) - (y - mu).powi(2) / (2.0 * self.variance)
    }
}

/// Location and variance of `π_j(· | x_t, y_{1:j-1})`.
pub fn gaussian_sequential_proposal(
    props: &WeightedMeanGaussian,
    j: usize,
    x_t: f64,
    earlier: &[f64],
) -> Result<(f64, f64)> {
    if j == 0 {
        return Err(Error::Argument("proposal index starts at 1".into()));
    }
    if earlier.len() < j - 1 {
        return Err(Error::Argument(format!("proposal {j} needs {} earlier points, got {}", j - 1, earlier.len())));
    }
    Ok((props.mean(x_t, &earlier[..j - 1]), props.variance))
}

impl ProposalSequence<f64> for WeightedMeanGaussian {
    fn sample(&self, _j: usize, prev: &f64, earlier: &[f64], rng: &mut dyn RngCore) -> f64 {
        let z: f64 = StandardNormal.sample(rng);
        self.mean(*prev, earlier) + self.std_dev * z
    }

    fn log_density(&self, _j: usize, candidate: &f64, prev: &f64, earlier: &[f64]) -> f64 {
        self.log_normal(*candidate, self.mean(*prev, earlier))
    }

    // Running sums keep a whole step linear in the number of points. The
    // summation order matches `mean`, so both routes agree bit for bit.
    fn extend_path(&self, prev: &f64, path: &mut Vec<f64>, upto: usize, rng: &mut dyn RngCore) {
        let mut sum = *prev;
        for v in path.iter().rev().skip(1).rev() {
            sum += v;
        }
        while path.len() < upto {
            let m = path.len();
            let mu = if m == 0 { *prev } else { self.gamma1 / m as f64 * sum + self.gamma2 * path[m - 1] };
            let z: f64 = StandardNormal.sample(rng);
            path.push(mu + self.std_dev * z);
            if m >= 1 {
                sum += path[m - 1];
            }
        }
    }

    fn path_log_densities(&self, prev: &f64, path: &[f64], _shift: usize, out: &mut Vec<f64>) {
        let mut sum = *prev;
        for (m, y) in path.iter().enumerate() {
            let mu = if m == 0 { *prev } else { self.gamma1 / m as f64 * sum + self.gamma2 * path[m - 1] };
            out.push(self.log_normal(*y, mu));
            if m >= 1 {
                sum += path[m - 1];
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::density::{log_joint_proposal, PointSet};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn props() -> WeightedMeanGaussian {
        WeightedMeanGaussian::new(1.0, 0.2, 0.8).unwrap()
    }

    #[test]
    fn bimodal_values() {
        assert_eq!(builtin_target_bimodal(2.0), 0.0);
        assert_eq!(builtin_target_bimodal(-2.0), 0.0);
        assert_eq!(builtin_target_bimodal(0.0), -4.0);
        assert_eq!(BimodalQuartic.log_density(&1.0), -9.0 / 4.0);
    }

    #[test]
    fn location_examples() {
        let g = props();
        let (mu, var) = gaussian_sequential_proposal(&g, 2, 1.0, &[3.0]).unwrap();
        assert!((mu - 2.6).abs() < 1e-15);
        assert_eq!(var, 1.0);
        assert_eq!(gaussian_sequential_proposal(&g, 1, 1.7, &[]).unwrap().0, 1.7);
        let walk = WeightedMeanGaussian::new(2.0, 0.0, 1.0).unwrap();
        for j in 2..6 {
            let earlier = [0.5, -1.0, 4.0, 2.5, 9.0];
            let (mu, _) = gaussian_sequential_proposal(&walk, j, 3.0, &earlier).unwrap();
            assert_eq!(mu, earlier[j - 2]);
        }
        // j = 4: gamma1/3 * (x + y1 + y2) + gamma2 * y3
        let (mu, _) = gaussian_sequential_proposal(&g, 4, 1.0, &[2.0, 3.0, 4.0]).unwrap();
        assert!((mu - (0.2 / 3.0 * 6.0 + 0.8 * 4.0)).abs() < 1e-15);
        assert!(gaussian_sequential_proposal(&g, 3, 1.0, &[2.0]).is_err());
    }

    #[test]
    fn rejects_invalid_parameters() {
        assert!(WeightedMeanGaussian::new(0.0, 0.2, 0.8).is_err());
        assert!(WeightedMeanGaussian::new(1.0, 0.3, 0.8).is_err());
        assert!(WeightedMeanGaussian::new(f64::NAN, 0.2, 0.8).is_err());
    }

    #[test]
    fn joint_density_of_two_points() {
        // x = 0, y = (1.0, -0.5): mu_1 = 0, mu_2 = 0.2 * 0 + 0.8 * 1.0
        let g = props();
        let ys = PointSet::forward(vec![1.0, -0.5]);
        let v = log_joint_proposal(&g, &0.0, &ys, 2).unwrap();
        let c = -0.5 * LN_2PI;
        let expect = (c - 0.5) + (c - 0.5 * (-0.5f64 - 0.8).powi(2));
        assert!((v - expect).abs() < 1e-14);
    }

    #[test]
    fn running_sums_match_direct_evaluation() {
        let g = props();
        let mut a = ChaCha8Rng::seed_from_u64(3);
        let mut b = a.clone();
        let mut fast = vec![0.4];
        g.extend_path(&-1.0, &mut fast, 40, &mut a);
        let mut slow = vec![0.4];
        while slow.len() < 40 {
            let next = g.sample(slow.len() + 1, &-1.0, &slow, &mut b);
            slow.push(next);
        }
        assert_eq!(fast, slow);
        let mut batch = Vec::new();
        g.path_log_densities(&-1.0, &fast, 0, &mut batch);
        for i in 0..fast.len() {
            assert_eq!(batch[i], g.log_density(i + 1, &fast[i], &-1.0, &fast[..i]));
        }
    }

    #[test]
    fn draws_follow_the_evaluated_density() {
        // mean and variance of pi_3 draws against the stated location
        let g = props();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let earlier = [1.5, -0.5];
        let n = 200_000;
        let draws: Vec<f64> = (0..n).map(|_| g.sample(3, &0.25, &earlier, &mut rng)).collect();
        let mean = draws.iter().sum::<f64>() / n as f64;
        let var = draws.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        let mu = 0.2 / 2.0 * (0.25 + 1.5) + 0.8 * -0.5;
        assert!((mean - mu).abs() < 4.0 / (n as f64).sqrt());
        assert!((var - 1.0).abs() < 0.02);
    }

    #[test]
    fn density_integrates_to_one() {
        let g = props();
        let h = 1e-3;
        let mass: f64 = (-12_000..12_000).map(|i| (g.log_density(2, &(i as f64 * h), &0.3, &[1.1])).exp() * h).sum();
        assert!((mass - 1.0).abs() < 1e-9);
    }
}
