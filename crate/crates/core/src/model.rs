//! Multicell MISO downlink: network topology, channels, beamformers and the
//! exact SINR arithmetic.
//!
//! Channels are row vectors `h_{b,k}` (BS `b` to user `k`) and beamformers are
//! column vectors `m_k`; both are stored as `DVector<Complex64>` and the
//! product `h m` is the plain (non-conjugating) sum `Σ_i h_i m_i`.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type CVector = DVector<Complex64>;
pub type CMatrix = DMatrix<Complex64>;

const MODULE: &str = "model";

/// Linear gain `h m` of a row channel applied to a column beamformer.
#[inline]
pub fn gain(h: &CVector, m: &CVector) -> Complex64 {
    h.iter().zip(m.iter()).map(|(a, b)| a * b).sum()
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn linear_to_db(x: f64) -> f64 {
    10.0 * x.log10()
}

/// Cell/user topology, antenna count, power budgets, noise and SINR weights.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkConfig {
    antennas: usize,
    serving: Vec<usize>,
    user_sets: Vec<Vec<usize>>,
    power: Vec<f64>,
    noise_var: f64,
    weights: Vec<f64>,
}

impl NetworkConfig {
    /// Builds a configuration from explicit per-BS user lists `U_b`.
    pub fn new(
        antennas: usize,
        user_sets: Vec<Vec<usize>>,
        power: Vec<f64>,
        noise_var: f64,
        weights: Vec<f64>,
    ) -> Result<Self> {
        if antennas == 0 {
            return Err(Error::invalid(MODULE, "antennas_per_bs must be positive"));
        }
        if user_sets.is_empty() {
            return Err(Error::invalid(MODULE, "num_cells must be positive"));
        }
        if power.len() != user_sets.len() {
            return Err(Error::invalid(
                MODULE,
                format!(
                    "power budget has {} entries for {} cells",
                    power.len(),
                    user_sets.len()
                ),
            ));
        }
        let num_users: usize = user_sets.iter().map(Vec::len).sum();
        if num_users == 0 {
            return Err(Error::invalid(MODULE, "num_users must be positive"));
        }
        let mut serving = vec![usize::MAX; num_users];
        for (b, users) in user_sets.iter().enumerate() {
            for &k in users {
                if k >= num_users {
                    return Err(Error::invalid(
                        MODULE,
                        format!("user index {k} out of range (K = {num_users})"),
                    ));
                }
                if serving[k] != usize::MAX {
                    return Err(Error::invalid(
                        MODULE,
                        format!("user {k} appears in more than one user set"),
                    ));
                }
                serving[k] = b;
            }
        }
        if weights.len() != num_users {
            return Err(Error::invalid(
                MODULE,
                format!("{} weights for {num_users} users", weights.len()),
            ));
        }
        if weights.iter().any(|&a| !(a > 0.0) || !a.is_finite()) {
            return Err(Error::invalid(MODULE, "weights must be positive and finite"));
        }
        if power.iter().any(|&p| !(p >= 0.0) || !p.is_finite()) {
            return Err(Error::invalid(MODULE, "power budgets must be nonnegative and finite"));
        }
        if !(noise_var > 0.0) || !noise_var.is_finite() {
            return Err(Error::invalid(MODULE, "noise variance must be positive"));
        }
        Ok(Self {
            antennas,
            serving,
            user_sets,
            power,
            noise_var,
            weights,
        })
    }

    /// `num_cells` BSs each serving `users_per_cell` consecutive users, equal
    /// budgets and unit weights.
    pub fn symmetric(
        num_cells: usize,
        users_per_cell: usize,
        antennas: usize,
        power: f64,
        noise_var: f64,
    ) -> Result<Self> {
        let user_sets = (0..num_cells)
            .map(|b| (b * users_per_cell..(b + 1) * users_per_cell).collect())
            .collect();
        let k = num_cells * users_per_cell;
        Self::new(
            antennas,
            user_sets,
            vec![power; num_cells],
            noise_var,
            vec![1.0; k],
        )
    }

    pub fn num_cells(&self) -> usize {
        self.user_sets.len()
    }

    pub fn num_users(&self) -> usize {
        self.serving.len()
    }

    pub fn antennas(&self) -> usize {
        self.antennas
    }

    pub fn serving_bs(&self, k: usize) -> usize {
        self.serving[k]
    }

    pub fn users_of(&self, b: usize) -> &[usize] {
        &self.user_sets[b]
    }

    pub fn power(&self, b: usize) -> f64 {
        self.power[b]
    }

    pub fn noise_var(&self) -> f64 {
        self.noise_var
    }

    pub fn noise_std(&self) -> f64 {
        self.noise_var.sqrt()
    }

    pub fn weight(&self, k: usize) -> f64 {
        self.weights[k]
    }

    pub fn with_antennas(&self, antennas: usize) -> Result<Self> {
        Self::new(
            antennas,
            self.user_sets.clone(),
            self.power.clone(),
            self.noise_var,
            self.weights.clone(),
        )
    }

    pub fn with_power(&self, power: f64) -> Result<Self> {
        Self::new(
            self.antennas,
            self.user_sets.clone(),
            vec![power; self.num_cells()],
            self.noise_var,
            self.weights.clone(),
        )
    }

    pub fn with_noise_var(&self, noise_var: f64) -> Result<Self> {
        Self::new(
            self.antennas,
            self.user_sets.clone(),
            self.power.clone(),
            noise_var,
            self.weights.clone(),
        )
    }
}

/// Nominal channel row vectors for every (BS, user) pair.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelSet {
    antennas: usize,
    links: Vec<Vec<CVector>>,
    large_scale: Option<Vec<Vec<f64>>>,
}

impl ChannelSet {
    /// `links[b][k]` is the channel from BS `b` to user `k`.
    pub fn new(links: Vec<Vec<CVector>>) -> Result<Self> {
        let antennas = links
            .first()
            .and_then(|row| row.first())
            .map(|h| h.len())
            .ok_or_else(|| Error::invalid(MODULE, "channel set is empty"))?;
        let users = links[0].len();
        for row in &links {
            if row.len() != users {
                return Err(Error::invalid(MODULE, "ragged channel set"));
            }
            if row.iter().any(|h| h.len() != antennas) {
                return Err(Error::invalid(MODULE, "channel vectors differ in length"));
            }
        }
        if antennas == 0 {
            return Err(Error::invalid(MODULE, "channel vectors are empty"));
        }
        Ok(Self {
            antennas,
            links,
            large_scale: None,
        })
    }

    pub fn from_fn(
        num_cells: usize,
        num_users: usize,
        mut f: impl FnMut(usize, usize) -> CVector,
    ) -> Result<Self> {
        let links = (0..num_cells)
            .map(|b| (0..num_users).map(|k| f(b, k)).collect())
            .collect();
        Self::new(links)
    }

    pub fn with_large_scale(mut self, kappa: Vec<Vec<f64>>) -> Result<Self> {
        if kappa.len() != self.links.len()
            || kappa.iter().any(|row| row.len() != self.links[0].len())
        {
            return Err(Error::invalid(MODULE, "large-scale table shape mismatch"));
        }
        if kappa.iter().flatten().any(|&x| !(x > 0.0)) {
            return Err(Error::invalid(MODULE, "large-scale coefficients must be positive"));
        }
        self.large_scale = Some(kappa);
        Ok(self)
    }

    pub fn get(&self, b: usize, k: usize) -> &CVector {
        &self.links[b][k]
    }

    pub fn get_mut(&mut self, b: usize, k: usize) -> &mut CVector {
        &mut self.links[b][k]
    }

    pub fn large_scale(&self) -> Option<&Vec<Vec<f64>>> {
        self.large_scale.as_ref()
    }

    pub fn antennas(&self) -> usize {
        self.antennas
    }

    pub fn num_cells(&self) -> usize {
        self.links.len()
    }

    pub fn num_users(&self) -> usize {
        self.links[0].len()
    }

    pub fn check(&self, cfg: &NetworkConfig) -> Result<()> {
        if self.num_cells() != cfg.num_cells()
            || self.num_users() != cfg.num_users()
            || self.antennas != cfg.antennas()
        {
            return Err(Error::invalid(
                MODULE,
                format!(
                    "channel set is {}x{}x{}, network expects B={} K={} T={}",
                    self.num_cells(),
                    self.num_users(),
                    self.antennas,
                    cfg.num_cells(),
                    cfg.num_users(),
                    cfg.antennas()
                ),
            ));
        }
        Ok(())
    }
}

/// One beamforming column vector per user.
#[derive(Debug, Clone, PartialEq)]
pub struct BeamformerSet {
    beams: Vec<CVector>,
}

impl BeamformerSet {
    pub fn new(beams: Vec<CVector>) -> Self {
        Self { beams }
    }

    pub fn zeros(cfg: &NetworkConfig) -> Self {
        Self::new(vec![CVector::zeros(cfg.antennas()); cfg.num_users()])
    }

    pub fn get(&self, k: usize) -> &CVector {
        &self.beams[k]
    }

    pub fn get_mut(&mut self, k: usize) -> &mut CVector {
        &mut self.beams[k]
    }

    pub fn len(&self) -> usize {
        self.beams.len()
    }

    pub fn is_empty(&self) -> bool {
        self.beams.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &CVector> {
        self.beams.iter()
    }

    /// `M_b`: columns are the beams of the users in `U_b`, in order.
    pub fn stacked(&self, b: usize, cfg: &NetworkConfig) -> CMatrix {
        let users = cfg.users_of(b);
        CMatrix::from_fn(cfg.antennas(), users.len(), |i, j| self.beams[users[j]][i])
    }

    pub fn check(&self, cfg: &NetworkConfig) -> Result<()> {
        if self.beams.len() != cfg.num_users() {
            return Err(Error::invalid(
                MODULE,
                format!("{} beams for {} users", self.beams.len(), cfg.num_users()),
            ));
        }
        if self.beams.iter().any(|m| m.len() != cfg.antennas()) {
            return Err(Error::invalid(MODULE, "beam length differs from T"));
        }
        Ok(())
    }
}

/// Desired power and total interference-plus-noise seen by user `k`.
fn signal_and_interference(
    k: usize,
    channels: &ChannelSet,
    beams: &BeamformerSet,
    cfg: &NetworkConfig,
) -> (f64, f64) {
    let bk = cfg.serving_bs(k);
    let desired = gain(channels.get(bk, k), beams.get(k)).norm_sqr();
    let mut denom = cfg.noise_var();
    for b in 0..cfg.num_cells() {
        let h = channels.get(b, k);
        for &i in cfg.users_of(b) {
            if i != k {
                denom += gain(h, beams.get(i)).norm_sqr();
            }
        }
    }
    (desired, denom)
}

fn check_all(channels: &ChannelSet, beams: &BeamformerSet, cfg: &NetworkConfig) -> Result<()> {
    channels.check(cfg)?;
    beams.check(cfg)
}

/// SINR of user `k`.
pub fn sinr(
    k: usize,
    channels: &ChannelSet,
    beams: &BeamformerSet,
    cfg: &NetworkConfig,
) -> Result<f64> {
    check_all(channels, beams, cfg)?;
    if k >= cfg.num_users() {
        return Err(Error::invalid(MODULE, format!("user {k} out of range")));
    }
    let (s, d) = signal_and_interference(k, channels, beams, cfg);
    Ok(s / d)
}

/// `min_k α_k γ_k`.
pub fn balanced_objective(
    channels: &ChannelSet,
    beams: &BeamformerSet,
    cfg: &NetworkConfig,
) -> Result<f64> {
    check_all(channels, beams, cfg)?;
    Ok(balanced_objective_unchecked(channels, beams, cfg))
}

pub(crate) fn balanced_objective_unchecked(
    channels: &ChannelSet,
    beams: &BeamformerSet,
    cfg: &NetworkConfig,
) -> f64 {
    (0..cfg.num_users())
        .map(|k| {
            let (s, d) = signal_and_interference(k, channels, beams, cfg);
            cfg.weight(k) * (s / d)
        })
        .fold(f64::INFINITY, f64::min)
}

/// Transmit power `Σ_{k∈U_b} ‖m_k‖²` of every BS.
pub fn per_bs_power(beams: &BeamformerSet, cfg: &NetworkConfig) -> Result<Vec<f64>> {
    beams.check(cfg)?;
    Ok((0..cfg.num_cells())
        .map(|b| {
            cfg.users_of(b)
                .iter()
                .map(|&k| beams.get(k).norm_squared())
                .sum()
        })
        .collect())
}
