use crate::error::{Error, Result};
use crate::model::{balanced_objective_unchecked, BeamformerSet, ChannelSet, NetworkConfig};
use crate::par::{count_indexed, Execution};
use crate::rng::substream;
use crate::uncertainty::{apply_error, UncertaintySet};

/// Relative slack when comparing achieved objectives against `t*`.
pub const PE_RELATIVE_SLACK: f64 = 1e-6;

/// Monte-Carlo estimator of the probability that the balanced objective
/// under a random admissible error reaches `t*`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PeEstimator {
    pub samples: usize,
    pub seed: u64,
    pub execution: Execution,
}

impl PeEstimator {
    pub fn new(samples: usize, seed: u64) -> Self {
        Self {
            samples,
            seed,
            execution: Execution::default(),
        }
    }

    pub fn with_execution(self, execution: Execution) -> Self {
        Self { execution, ..self }
    }

    /// Errors are drawn uniformly from the radius-`ρ` set on every link,
    /// independently per sample; sample `i` uses its own substream.
    pub fn estimate(
        &self,
        beams: &BeamformerSet,
        t_star: f64,
        set: &UncertaintySet,
        channels: &ChannelSet,
        cfg: &NetworkConfig,
    ) -> Result<f64> {
        if self.samples == 0 {
            return Err(Error::invalid("experiments", "pe_samples must be positive"));
        }
        channels.check(cfg)?;
        beams.check(cfg)?;
        crate::robust_sdp::check_set(set, cfg)?;
        let threshold = t_star * (1.0 - PE_RELATIVE_SLACK);
        let hits = count_indexed(self.samples, self.execution, |i| {
            let mut rng = substream(self.seed, &[i as u64]);
            let mut perturbed = channels.clone();
            for b in 0..cfg.num_cells() {
                for k in 0..cfg.num_users() {
                    let v = set.sample_uniform(b, k, &mut rng);
                    let h = apply_error(channels.get(b, k), set.directions(b, k), &v)
                        .expect("dimensions checked above");
                    *perturbed.get_mut(b, k) = h;
                }
            }
            balanced_objective_unchecked(&perturbed, beams, cfg) >= threshold
        });
        Ok(hits as f64 / self.samples as f64)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::balancing::{balance_nonrobust, BisectionConfig};
    use crate::conic::ClarabelBackend;
    use crate::experiments::{generate_channels, LayoutConfig};
    use crate::uncertainty::NormKind;

    fn solved(seed: u64) -> (NetworkConfig, ChannelSet, BeamformerSet, f64) {
        let cfg = NetworkConfig::symmetric(2, 2, 8, 3.16, 1.0).unwrap();
        let ch = generate_channels(&LayoutConfig::default(), &cfg, &mut substream(seed, &[])).unwrap();
        let r = balance_nonrobust(&ch, &cfg, &BisectionConfig::default(), &ClarabelBackend::default()).unwrap();
        (cfg, ch, r.witness.unwrap(), r.t_star)
    }

    #[test]
    fn zero_radius_always_succeeds() {
        let (cfg, ch, beams, t) = solved(1);
        let set = UncertaintySet::identity(NormKind::L2, 0.0, 1.0, 2, 4, 8).unwrap();
        assert_eq!(PeEstimator::new(200, 3).estimate(&beams, t, &set, &ch, &cfg).unwrap(), 1.0);
    }

    #[test]
    fn sequential_and_parallel_agree() {
        let (cfg, ch, beams, t) = solved(2);
        let set = UncertaintySet::identity(NormKind::L2, 0.1, 1.0, 2, 4, 8).unwrap();
        let est = PeEstimator::new(500, 9);
        let a = est.with_execution(Execution::Sequential).estimate(&beams, t * 0.7, &set, &ch, &cfg).unwrap();
        let b = est.with_execution(Execution::Parallel).estimate(&beams, t * 0.7, &set, &ch, &cfg).unwrap();
        assert_eq!(a, b);
        assert!(a > 0.0 && a <= 1.0);
    }

    #[test]
    fn independent_seeds_within_binomial_band() {
        let (cfg, ch, beams, t) = solved(3);
        let set = UncertaintySet::identity(NormKind::L2, 0.2, 1.0, 2, 4, 8).unwrap();
        let n = 2000;
        let a = PeEstimator::new(n, 1).estimate(&beams, t * 0.6, &set, &ch, &cfg).unwrap();
        let b = PeEstimator::new(n, 2).estimate(&beams, t * 0.6, &set, &ch, &cfg).unwrap();
        let p = 0.5 * (a + b);
        let sigma = (2.0 * p * (1.0 - p) / n as f64).sqrt();
        assert!((a - b).abs() <= 3.0 * sigma + 1e-12, "{a} vs {b}");
    }

    #[test]
    fn zero_samples_rejected() {
        let (cfg, ch, beams, t) = solved(4);
        let set = UncertaintySet::identity(NormKind::L2, 0.1, 1.0, 2, 4, 8).unwrap();
        assert!(PeEstimator::new(0, 1).estimate(&beams, t, &set, &ch, &cfg).is_err());
    }
}
