//! Rank-relaxed covariance design for ellipsoidal uncertainty.
//!
//! With `P_k = m_k m_kᴴ` and `G = [A; ĥ]`, the worst case of every quadratic
//! SINR term over `‖v‖₂ ≤ ρ` becomes a single LMI in `[v 1]` with a
//! nonnegative multiplier. Dropping `rank P_k = 1` leaves an SDP.

use nalgebra::SymmetricEigen;
use num_complex::Complex64;

use crate::balancing::{self, bisect, check_target, Bisection, BisectionConfig, Feasibility, UpperBound};
use crate::conic::{self, ComplexExpr, ConicBackend, ConicProgram, HermitianExpr, LinExpr, SolveResult, Var};
use crate::error::{Error, Result};
use crate::model::{BeamformerSet, CMatrix, CVector, ChannelSet, NetworkConfig};
use crate::uncertainty::{NormKind, UncertaintySet};

const MODULE: &str = "robust_sdp";

/// Ratio below which a covariance is reported as a loose relaxation.
pub const RANK_ONE_THRESHOLD: f64 = 0.99;

/// Decision variables of the relaxed program.
#[derive(Debug, Clone)]
pub struct SdpVars {
    cov_re: Vec<Vec<Var>>,
    cov_im: Vec<Vec<Var>>,
    antennas: usize,
    /// `λ_{b,k}` for every link.
    pub lambda: Vec<Vec<Var>>,
    pub tau: Vec<Var>,
    /// `t_{b,k}` for `b ≠ b_k`; `None` on serving links.
    pub leak: Vec<Vec<Option<Var>>>,
}

impl SdpVars {
    pub fn new(p: &mut ConicProgram, cfg: &NetworkConfig) -> Self {
        let t = cfg.antennas();
        let (mut cov_re, mut cov_im) = (Vec::new(), Vec::new());
        for k in 0..cfg.num_users() {
            cov_re.push(p.add_vars(t * (t + 1) / 2, &format!("re_P{k}")));
            cov_im.push(p.add_vars(t * (t - 1) / 2, &format!("im_P{k}")));
        }
        let lambda = (0..cfg.num_cells())
            .map(|b| p.add_vars(cfg.num_users(), &format!("lambda{b}")))
            .collect();
        let tau = p.add_vars(cfg.num_users(), "tau");
        let leak = (0..cfg.num_cells())
            .map(|b| {
                (0..cfg.num_users())
                    .map(|k| (b != cfg.serving_bs(k)).then(|| p.add_var(format!("t{b}_{k}"))))
                    .collect()
            })
            .collect();
        Self {
            cov_re,
            cov_im,
            antennas: t,
            lambda,
            tau,
            leak,
        }
    }

    fn upper_index(&self, i: usize, j: usize) -> usize {
        // Row-major upper triangle including the diagonal.
        i * self.antennas - i * (i + 1) / 2 + j
    }

    fn strict_index(&self, i: usize, j: usize) -> usize {
        i * self.antennas - i * (i + 1) / 2 + (j - i - 1)
    }

    /// `P_k` as a Hermitian expression.
    pub fn covariance(&self, k: usize) -> HermitianExpr {
        let n = self.antennas;
        let mut h = HermitianExpr::zeros(n);
        for i in 0..n {
            for j in i..n {
                let re = LinExpr::from(self.cov_re[k][self.upper_index(i, j)]);
                let im = if i == j {
                    LinExpr::zero()
                } else {
                    LinExpr::from(self.cov_im[k][self.strict_index(i, j)])
                };
                h.set(i, j, ComplexExpr::new(re, im));
            }
        }
        h
    }

    pub fn trace(&self, k: usize) -> LinExpr {
        let mut e = LinExpr::zero();
        for i in 0..self.antennas {
            e.add_term(self.cov_re[k][self.upper_index(i, i)], 1.0);
        }
        e
    }

    pub fn extract_covariance(&self, k: usize, r: &SolveResult) -> CMatrix {
        self.covariance(k).eval(&r.x)
    }
}

fn stacked_directions(set: &UncertaintySet, h_hat: &CVector, b: usize, k: usize) -> CMatrix {
    let a = set.directions(b, k);
    let l = a.nrows();
    CMatrix::from_fn(l + 1, a.ncols(), |i, j| if i < l { a[(i, j)] } else { h_hat[j] })
}

/// `W_k = (α_k/t) P_k − Σ_{i∈U_{b_k}∖k} P_i`.
pub fn desired_weight(vars: &SdpVars, k: usize, t: f64, cfg: &NetworkConfig) -> HermitianExpr {
    let mut w = HermitianExpr::zeros(cfg.antennas());
    w.add_scaled(cfg.weight(k) / t, &vars.covariance(k));
    for &i in cfg.users_of(cfg.serving_bs(k)) {
        if i != k {
            w.add_scaled(-1.0, &vars.covariance(i));
        }
    }
    w
}

/// `Q_b = Σ_{k∈U_b} P_k`.
pub fn cell_covariance(vars: &SdpVars, b: usize, cfg: &NetworkConfig) -> HermitianExpr {
    let mut q = HermitianExpr::zeros(cfg.antennas());
    for &i in cfg.users_of(b) {
        q.add_scaled(1.0, &vars.covariance(i));
    }
    q
}

fn require_l2(set: &UncertaintySet) -> Result<()> {
    match set.norm() {
        NormKind::L2 => Ok(()),
        other => Err(Error::UnsupportedUncertainty(format!(
            "{other} uncertainty; the covariance relaxation needs an l2 ball"
        ))),
    }
}

/// `G W Gᴴ + λ diag(I, −ρ²) − τ e e ᵀ` for user `k` (order `l + 1`).
pub fn lmi_desired(
    vars: &SdpVars,
    k: usize,
    t: f64,
    channels: &ChannelSet,
    cfg: &NetworkConfig,
    set: &UncertaintySet,
) -> Result<HermitianExpr> {
    require_l2(set)?;
    check_target(MODULE, t)?;
    let bk = cfg.serving_bs(k);
    let g = stacked_directions(set, channels.get(bk, k), bk, k);
    let mut m = desired_weight(vars, k, t, cfg).congruence(&g);
    let l = set.dim(bk, k);
    let lam = LinExpr::from(vars.lambda[bk][k]);
    for i in 0..l {
        m.add_diag(i, &lam);
    }
    let rho = set.radius(bk, k);
    m.add_diag(l, &(-LinExpr::from(vars.tau[k]) - lam * (rho * rho)));
    Ok(m)
}

/// `−G Q_b Gᴴ + λ diag(I, −ρ²) + t_{b,k} e eᵀ` for `b ≠ b_k` (order `l + 1`).
pub fn lmi_interference(
    vars: &SdpVars,
    b: usize,
    k: usize,
    channels: &ChannelSet,
    cfg: &NetworkConfig,
    set: &UncertaintySet,
) -> Result<HermitianExpr> {
    require_l2(set)?;
    let leak = vars.leak[b][k]
        .ok_or_else(|| Error::invalid(MODULE, format!("link ({b},{k}) is a serving link")))?;
    let g = stacked_directions(set, channels.get(b, k), b, k);
    let mut m = HermitianExpr::zeros(g.nrows());
    m.add_scaled(-1.0, &cell_covariance(vars, b, cfg).congruence(&g));
    let l = set.dim(b, k);
    let lam = LinExpr::from(vars.lambda[b][k]);
    for i in 0..l {
        m.add_diag(i, &lam);
    }
    let rho = set.radius(b, k);
    m.add_diag(l, &(LinExpr::from(leak) - lam * (rho * rho)));
    Ok(m)
}

/// Assembles the relaxed program at target `t`.
pub fn sdp_program(
    t: f64,
    channels: &ChannelSet,
    cfg: &NetworkConfig,
    set: &UncertaintySet,
) -> Result<(ConicProgram, SdpVars)> {
    require_l2(set)?;
    check_target(MODULE, t)?;
    channels.check(cfg)?;
    check_set(set, cfg)?;
    let mut p = ConicProgram::new();
    let vars = SdpVars::new(&mut p, cfg);
    for k in 0..cfg.num_users() {
        p.add_hermitian_psd(&vars.covariance(k));
        p.add_hermitian_psd(&lmi_desired(&vars, k, t, channels, cfg, set)?);
        let mut slack = LinExpr::from(vars.tau[k]) - cfg.noise_var();
        for b in 0..cfg.num_cells() {
            if let Some(leak) = vars.leak[b][k] {
                p.add_hermitian_psd(&lmi_interference(&vars, b, k, channels, cfg, set)?);
                p.add_nonneg(leak.into());
                slack -= LinExpr::from(leak);
            }
        }
        p.add_nonneg(slack);
        p.add_nonneg(vars.tau[k].into());
    }
    for row in &vars.lambda {
        for &lam in row {
            p.add_nonneg(lam.into());
        }
    }
    for b in 0..cfg.num_cells() {
        let mut budget = LinExpr::constant(cfg.power(b));
        for &k in cfg.users_of(b) {
            budget -= vars.trace(k);
        }
        p.add_nonneg(budget);
    }
    Ok((p, vars))
}

pub(crate) fn check_set(set: &UncertaintySet, cfg: &NetworkConfig) -> Result<()> {
    if set.num_cells() != cfg.num_cells() || set.num_users() != cfg.num_users() || set.antennas() != cfg.antennas() {
        return Err(Error::invalid(
            "uncertainty",
            format!(
                "uncertainty set is {}x{} links with T = {}, network is {}x{} with T = {}",
                set.num_cells(),
                set.num_users(),
                set.antennas(),
                cfg.num_cells(),
                cfg.num_users(),
                cfg.antennas()
            ),
        ));
    }
    Ok(())
}

/// Principal-eigenvector beamformer `√λ₁ u₁`, rotated so `h m` is real and
/// nonnegative, together with `λ₁ / Σλᵢ`.
pub fn extract_beamformer(cov: &CMatrix, h: &CVector) -> (CVector, f64) {
    let n = cov.nrows();
    let eig = SymmetricEigen::new(cov.clone());
    let (mut top, mut total, mut best) = (0.0f64, 0.0, 0usize);
    for (i, &ev) in eig.eigenvalues.iter().enumerate() {
        let ev = ev.max(0.0);
        total += ev;
        if ev > top {
            top = ev;
            best = i;
        }
    }
    if total <= 0.0 {
        return (CVector::zeros(n), 1.0);
    }
    let mut m: CVector = eig.eigenvectors.column(best).into_owned() * Complex64::from(top.sqrt());
    let g = h.dot(&m);
    if g.norm() > 0.0 {
        m *= g.conj() / g.norm();
    }
    (m, top / total)
}

#[derive(Debug, Clone)]
pub struct SdpWitness {
    pub covariances: Vec<CMatrix>,
    pub beams: BeamformerSet,
    pub rank1_ratios: Vec<f64>,
}

impl SdpWitness {
    pub fn min_rank1_ratio(&self) -> f64 {
        self.rank1_ratios.iter().copied().fold(1.0, f64::min)
    }

    pub fn is_loose(&self) -> bool {
        self.min_rank1_ratio() < RANK_ONE_THRESHOLD
    }
}

pub fn feasibility_sdp(
    t: f64,
    channels: &ChannelSet,
    cfg: &NetworkConfig,
    set: &UncertaintySet,
    backend: &dyn ConicBackend,
) -> Result<Feasibility<SdpWitness>> {
    let (p, vars) = sdp_program(t, channels, cfg, set)?;
    let result = conic::solve(&p, backend)?;
    let witness = result.is_feasible().then(|| {
        let covariances: Vec<CMatrix> = (0..cfg.num_users()).map(|k| vars.extract_covariance(k, &result)).collect();
        let (beams, rank1_ratios) = covariances
            .iter()
            .enumerate()
            .map(|(k, c)| extract_beamformer(c, channels.get(cfg.serving_bs(k), k)))
            .unzip();
        SdpWitness {
            covariances,
            beams: BeamformerSet::new(beams),
            rank1_ratios,
        }
    });
    Ok(Feasibility { result, witness })
}

/// Bisection on the relaxed program. `Auto` brackets with the perfect-CSI
/// design, which always dominates the robust objective.
pub fn balance_sdp(
    channels: &ChannelSet,
    cfg: &NetworkConfig,
    set: &UncertaintySet,
    bis: &BisectionConfig,
    backend: &dyn ConicBackend,
) -> Result<Bisection<SdpWitness>> {
    require_l2(set)?;
    bis.validate()?;
    check_set(set, cfg)?;
    let hi = match bis.t_hi {
        UpperBound::Value(v) => v,
        UpperBound::Auto => balancing::balance_nonrobust(channels, cfg, bis, backend)?.t_upper,
    };
    bisect(|t| feasibility_sdp(t, channels, cfg, set, backend), bis.t_lo, hi, bis.eps, bis.max_iters)
}
