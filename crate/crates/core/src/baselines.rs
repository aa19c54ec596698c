//! Zero-forcing baseline: every beam lies in the null space of the channels
//! from its BS to all other users, so the balancing problem has no
//! interference terms and is solved by one conic program.

use std::time::Duration;

use num_complex::Complex64;

use crate::conic::{self, ComplexExpr, ConicBackend, ConicProgram, LinExpr, SolveStatus, Var};
use crate::error::{Error, Result};
use crate::model::{BeamformerSet, CMatrix, CVector, ChannelSet, NetworkConfig};

const MODULE: &str = "baselines";

/// Singular values below this fraction of the largest count as zero.
pub const NULL_SPACE_RTOL: f64 = 1e-10;

/// Orthonormal basis of `{x : M̄x = 0}` for an `r × T` matrix with `r < T`.
pub fn null_space_basis(m: &CMatrix) -> Result<CMatrix> {
    let (r, t) = m.shape();
    if r >= t {
        return Err(Error::ZfInfeasible { antennas: t, users: r + 1 });
    }
    if r == 0 {
        return Ok(CMatrix::identity(t, t));
    }
    let mut padded = CMatrix::zeros(t, t);
    padded.view_mut((0, 0), (r, t)).copy_from(m);
    let svd = padded.svd(false, true);
    let v_t = svd.v_t.ok_or_else(|| Error::invalid(MODULE, "svd did not return right vectors"))?;
    let sv = &svd.singular_values;
    let smax = sv.iter().cloned().fold(0.0, f64::max);
    let null: Vec<usize> = (0..t).filter(|&i| sv[i] <= NULL_SPACE_RTOL * smax || smax == 0.0).collect();
    Ok(CMatrix::from_fn(t, null.len(), |row, col| v_t[(null[col], row)].conj()))
}

/// Per-user null-space data.
#[derive(Debug, Clone)]
pub struct ZfUser {
    /// Rows `h_{b_k,j}` for every `j ≠ k`.
    pub cross: CMatrix,
    pub basis: CMatrix,
    /// `h_{b_k,k} G_k`.
    pub reduced_channel: CVector,
}

#[derive(Debug, Clone)]
pub struct ZfInstance {
    pub users: Vec<ZfUser>,
}

impl ZfInstance {
    pub fn new(channels: &ChannelSet, cfg: &NetworkConfig) -> Result<Self> {
        channels.check(cfg)?;
        let (t, k_total) = (cfg.antennas(), cfg.num_users());
        if t < k_total {
            return Err(Error::ZfInfeasible { antennas: t, users: k_total });
        }
        let users = (0..k_total)
            .map(|k| {
                let bk = cfg.serving_bs(k);
                let others: Vec<usize> = (0..k_total).filter(|&j| j != k).collect();
                let cross = CMatrix::from_fn(others.len(), t, |r, c| channels.get(bk, others[r])[c]);
                let basis = null_space_basis(&cross)?;
                let reduced_channel = (channels.get(bk, k).transpose() * &basis).transpose();
                Ok(ZfUser { cross, basis, reduced_channel })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { users })
    }
}

#[derive(Debug, Clone)]
pub struct ZfResult {
    pub t_star: f64,
    pub beams: BeamformerSet,
    pub status: SolveStatus,
    pub solve_time: Duration,
}

/// Maximises `s` subject to `σ s ≤ √α_k Re(h̃_k m̃_k)`, `Im(h̃_k m̃_k) = 0` and
/// the per-BS power limits; `t* = s²`.
pub fn zf_balance(channels: &ChannelSet, cfg: &NetworkConfig, backend: &dyn ConicBackend) -> Result<ZfResult> {
    let inst = ZfInstance::new(channels, cfg)?;
    let mut p = ConicProgram::new();
    let s = p.add_var("s");
    let vars: Vec<(Vec<Var>, Vec<Var>)> = inst
        .users
        .iter()
        .enumerate()
        .map(|(k, u)| {
            let d = u.basis.ncols();
            (p.add_vars(d, &format!("re_m{k}")), p.add_vars(d, &format!("im_m{k}")))
        })
        .collect();
    for (k, u) in inst.users.iter().enumerate() {
        let mut g = ComplexExpr::default();
        for (i, &c) in u.reduced_channel.iter().enumerate() {
            g.add_scaled(c, vars[k].0[i], vars[k].1[i]);
        }
        p.add_nonneg(g.re * cfg.weight(k).sqrt() - LinExpr::term(s, cfg.noise_std()));
        p.add_eq(g.im);
    }
    // G_k has orthonormal columns, so ‖G_k m̃_k‖ = ‖m̃_k‖.
    for b in 0..cfg.num_cells() {
        let tail = cfg
            .users_of(b)
            .iter()
            .flat_map(|&k| vars[k].0.iter().chain(&vars[k].1).map(|&v| LinExpr::from(v)))
            .collect();
        p.add_soc(LinExpr::constant(cfg.power(b).sqrt()), tail);
    }
    p.add_nonneg(s.into());
    p.maximize(s.into());
    let r = conic::solve(&p, backend)?;
    if !r.is_feasible() {
        return Err(Error::Solver(format!("baselines: zf program ended with {}", r.detail)));
    }
    let beams = BeamformerSet::new(
        inst.users
            .iter()
            .zip(&vars)
            .map(|(u, (re, im))| {
                let reduced = CVector::from_iterator(
                    re.len(),
                    re.iter().zip(im).map(|(&a, &b)| Complex64::new(r.value(a), r.value(b))),
                );
                &u.basis * reduced
            })
            .collect(),
    );
    let sv = r.value(s).max(0.0);
    Ok(ZfResult {
        t_star: sv * sv,
        beams,
        status: r.status,
        solve_time: r.wall_time,
    })
}

/// Largest `|h_{b_i,j} m_i|` over `j ≠ i`.
pub fn max_leakage(beams: &BeamformerSet, channels: &ChannelSet, cfg: &NetworkConfig) -> f64 {
    let mut worst = 0.0f64;
    for i in 0..cfg.num_users() {
        let bi = cfg.serving_bs(i);
        for j in (0..cfg.num_users()).filter(|&j| j != i) {
            worst = worst.max(channels.get(bi, j).dot(beams.get(i)).norm());
        }
    }
    worst
}
