use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, Normal, StandardNormal};

use crate::error::{Error, Result};
use crate::model::{CVector, ChannelSet, NetworkConfig};

const MODULE: &str = "experiments";

/// Cell geometry and large-scale fading parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LayoutConfig {
    /// Vertex-to-vertex diameter of each hexagonal cell, meters.
    pub cell_diameter: f64,
    /// Reference distance `d₀`; users closer than this are redrawn.
    pub min_distance: f64,
    pub pathloss_exponent: f64,
    /// Log-normal shadowing spread, dB.
    pub shadow_std_db: f64,
    pub use_large_scale: bool,
}

impl Default for LayoutConfig {
    fn default() -> Self {
        Self {
            cell_diameter: 1000.0,
            min_distance: 100.0,
            pathloss_exponent: 3.8,
            shadow_std_db: 8.0,
            use_large_scale: false,
        }
    }
}

impl LayoutConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.cell_diameter > 0.0) || !self.cell_diameter.is_finite() {
            return Err(Error::invalid(MODULE, "layout.cell_diameter must be positive"));
        }
        if !(self.min_distance > 0.0) || self.min_distance >= self.cell_diameter / 2.0 {
            return Err(Error::invalid(MODULE, "layout.min_distance must lie in (0, cell_diameter/2)"));
        }
        if !(self.pathloss_exponent > 2.0) || !self.pathloss_exponent.is_finite() {
            return Err(Error::invalid(MODULE, "layout.pathloss_exponent must exceed 2"));
        }
        if !(self.shadow_std_db >= 0.0) || !self.shadow_std_db.is_finite() {
            return Err(Error::invalid(MODULE, "layout.shadow_std_db must be nonnegative"));
        }
        Ok(())
    }

    pub fn circumradius(&self) -> f64 {
        self.cell_diameter / 2.0
    }

    /// `κ = β (d/d₀)^{−ν}`.
    pub fn large_scale_coefficient(&self, distance: f64, beta: f64) -> f64 {
        beta * (distance / self.min_distance).powf(-self.pathloss_exponent)
    }

    /// BS sites on a line, one cell diameter apart.
    pub fn bs_positions(&self, num_cells: usize) -> Vec<[f64; 2]> {
        (0..num_cells).map(|b| [b as f64 * self.cell_diameter, 0.0]).collect()
    }

    /// Uniform point in the flat-topped hexagon around `center`, at least
    /// `d₀` from it.
    pub fn sample_user<R: Rng + ?Sized>(&self, center: [f64; 2], rng: &mut R) -> [f64; 2] {
        let r = self.circumradius();
        let half_h = r * 3f64.sqrt() / 2.0;
        loop {
            let x = rng.random_range(-r..r);
            let y = rng.random_range(-half_h..half_h);
            let inside = 3f64.sqrt() * x.abs() + y.abs() <= 3f64.sqrt() * r;
            if inside && x.hypot(y) >= self.min_distance {
                return [center[0] + x, center[1] + y];
            }
        }
    }
}

fn distance(a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

fn standard_complex_gaussian<R: Rng + ?Sized>(rng: &mut R) -> Complex64 {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    Complex64::new(rng.sample::<f64, _>(StandardNormal) * s, rng.sample::<f64, _>(StandardNormal) * s)
}

/// Draws `h_{b,k} = √κ_{b,k} h̃_{b,k}` with `h̃ ~ CN(0, I)`; `κ = 1` when
/// large-scale fading is off.
pub fn generate_channels<R: Rng + ?Sized>(layout: &LayoutConfig, cfg: &NetworkConfig, rng: &mut R) -> Result<ChannelSet> {
    layout.validate()?;
    let (nb, nk, t) = (cfg.num_cells(), cfg.num_users(), cfg.antennas());
    let kappa = if layout.use_large_scale {
        let sites = layout.bs_positions(nb);
        let shadow = Normal::new(0.0, layout.shadow_std_db)
            .map_err(|e| Error::invalid(MODULE, format!("shadowing: {e}")))?;
        let users: Vec<[f64; 2]> = (0..nk).map(|k| layout.sample_user(sites[cfg.serving_bs(k)], rng)).collect();
        let table: Vec<Vec<f64>> = (0..nb)
            .map(|b| {
                (0..nk)
                    .map(|k| {
                        let beta = 10f64.powf(shadow.sample(rng) / 10.0);
                        layout.large_scale_coefficient(distance(sites[b], users[k]), beta)
                    })
                    .collect()
            })
            .collect();
        Some(table)
    } else {
        None
    };
    let ch = ChannelSet::from_fn(nb, nk, |b, k| {
        let scale = kappa.as_ref().map_or(1.0, |tb| tb[b][k].sqrt());
        CVector::from_fn(t, |_, _| standard_complex_gaussian(rng) * scale)
    })?;
    match kappa {
        Some(tb) => ch.with_large_scale(tb),
        None => Ok(ch),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::substream;
    use approx::assert_relative_eq;

    #[test]
    fn coefficient_formula() {
        let l = LayoutConfig::default();
        assert_relative_eq!(l.large_scale_coefficient(100.0, 1.0), 1.0);
        assert_relative_eq!(l.large_scale_coefficient(1000.0, 1.0), 10f64.powf(-3.8), max_relative = 1e-12);
    }

    #[test]
    fn unit_variance_entries() {
        let l = LayoutConfig::default();
        let cfg = NetworkConfig::symmetric(1, 1, 4, 1.0, 1.0).unwrap();
        let mut rng = substream(3, &[]);
        let n = 10_000;
        let mean: f64 = (0..n)
            .map(|_| generate_channels(&l, &cfg, &mut rng).unwrap().get(0, 0).norm_squared())
            .sum::<f64>()
            / n as f64;
        assert!((mean - 4.0).abs() <= 0.03 * 4.0, "{mean}");
    }

    #[test]
    fn users_stay_in_their_hexagon() {
        let l = LayoutConfig::default();
        let mut rng = substream(4, &[]);
        for _ in 0..2000 {
            let p = l.sample_user([1000.0, 0.0], &mut rng);
            let d = distance(p, [1000.0, 0.0]);
            assert!(d >= l.min_distance && d <= l.circumradius() + 1e-9);
        }
    }

    #[test]
    fn large_scale_is_recorded_and_applied() {
        let l = LayoutConfig { use_large_scale: true, ..Default::default() };
        let cfg = NetworkConfig::symmetric(2, 2, 3, 1.0, 1.0).unwrap();
        let ch = generate_channels(&l, &cfg, &mut substream(5, &[])).unwrap();
        let kappa = ch.large_scale().unwrap();
        assert_eq!(kappa.len(), 2);
        assert!(kappa.iter().flatten().all(|&x| x > 0.0));
    }

    #[test]
    fn invalid_layouts() {
        assert!(LayoutConfig { min_distance: 600.0, ..Default::default() }.validate().is_err());
        assert!(LayoutConfig { pathloss_exponent: 2.0, ..Default::default() }.validate().is_err());
    }
}
