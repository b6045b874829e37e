use rand::Rng;
use rand_distr::StandardNormal;

use crate::domain::{NoiseConfig, ACTION_DIM};

/// Exploration noise added to the raw actor output.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseProcess {
    pub config: NoiseConfig,
    state: [f64; ACTION_DIM],
}

impl NoiseProcess {
    pub fn new(config: NoiseConfig) -> Self {
        Self {
            config,
            state: Self::rest(&config),
        }
    }

    fn rest(config: &NoiseConfig) -> [f64; ACTION_DIM] {
        match *config {
            NoiseConfig::Gaussian { .. } => [0.0; ACTION_DIM],
            NoiseConfig::OrnsteinUhlenbeck { mu, .. } => [mu; ACTION_DIM],
        }
    }

    /// Restarts an OU process at its mean; Gaussian noise is stateless.
    pub fn reset(&mut self) {
        self.state = Self::rest(&self.config);
    }

    pub fn sample<R: Rng + ?Sized>(&mut self, rng: &mut R) -> [f64; ACTION_DIM] {
        match self.config {
            NoiseConfig::Gaussian { sigma } => {
                std::array::from_fn(|_| sigma * rng.sample::<f64, _>(StandardNormal))
            }
            NoiseConfig::OrnsteinUhlenbeck { sigma, theta, mu } => {
                for x in self.state.iter_mut() {
                    *x += theta * (mu - *x) + sigma * rng.sample::<f64, _>(StandardNormal);
                }
                self.state
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn gaussian_std_matches_sigma() {
        let mut n = NoiseProcess::new(NoiseConfig::Gaussian { sigma: 0.1 });
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let draws: Vec<f64> = (0..50_000).flat_map(|_| n.sample(&mut rng)).collect();
        let mean = draws.iter().sum::<f64>() / draws.len() as f64;
        let var = draws.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (draws.len() - 1) as f64;
        let std = var.sqrt();
        assert!((0.098..=0.102).contains(&std), "{std}");
    }

    #[test]
    fn ou_reverts_to_mean() {
        let cfg = NoiseConfig::OrnsteinUhlenbeck { sigma: 0.0, theta: 0.15, mu: 0.0 };
        let mut n = NoiseProcess::new(cfg);
        n.state = [1.0, -1.0];
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let first = n.sample(&mut rng);
        assert!((first[0] - 0.85).abs() < 1e-12 && (first[1] + 0.85).abs() < 1e-12);
        for _ in 0..100 {
            n.sample(&mut rng);
        }
        assert!(n.state.iter().all(|x| x.abs() < 1e-6));
        n.reset();
        assert_eq!(n.state, [0.0, 0.0]);
    }
}
