//! Perfect-CSI SINR balancing and the bisection driver shared by every method.

use std::time::Duration;

use num_complex::Complex64;

use crate::conic::{self, ComplexExpr, ConicBackend, ConicProgram, LinExpr, SolveResult, SolveStatus, Var};
use crate::error::{Error, Result};
use crate::model::{BeamformerSet, CVector, ChannelSet, NetworkConfig};

const MODULE: &str = "balancing";

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum UpperBound {
    /// Resolved by the caller: the method-specific default bracket.
    Auto,
    Value(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BisectionConfig {
    pub t_lo: f64,
    pub t_hi: UpperBound,
    /// Absolute width of the final bracket.
    pub eps: f64,
    pub max_iters: usize,
}

impl Default for BisectionConfig {
    fn default() -> Self {
        Self {
            t_lo: 0.0,
            t_hi: UpperBound::Auto,
            eps: 1e-2,
            max_iters: 100,
        }
    }
}

impl BisectionConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.eps > 0.0) || !self.eps.is_finite() {
            return Err(Error::invalid(MODULE, "eps must be positive"));
        }
        if !(self.t_lo >= 0.0) || !self.t_lo.is_finite() {
            return Err(Error::invalid(MODULE, "t_lo must be nonnegative"));
        }
        if let UpperBound::Value(v) = self.t_hi {
            if !(v > self.t_lo) || !v.is_finite() {
                return Err(Error::invalid(MODULE, "t_hi must be finite and exceed t_lo"));
            }
        }
        if self.max_iters == 0 {
            return Err(Error::invalid(MODULE, "max_iters must be positive"));
        }
        Ok(())
    }

    /// Replaces `Auto` by `auto`.
    pub fn resolve(&self, auto: f64) -> (f64, f64) {
        match self.t_hi {
            UpperBound::Auto => (self.t_lo, auto),
            UpperBound::Value(v) => (self.t_lo, v),
        }
    }
}

/// Outcome of one feasibility test at a fixed target.
#[derive(Debug, Clone)]
pub struct Feasibility<W> {
    pub result: SolveResult,
    pub witness: Option<W>,
}

impl<W> Feasibility<W> {
    pub fn is_feasible(&self) -> bool {
        self.witness.is_some()
    }
}

#[derive(Debug, Clone)]
pub struct Bisection<W> {
    /// Largest target certified feasible, or `t_lo` when none was.
    pub t_star: f64,
    /// Smallest target found infeasible, or the untested upper bracket.
    pub t_upper: f64,
    pub witness: Option<W>,
    /// Oracle calls made.
    pub iterations: usize,
    pub found_feasible: bool,
    pub history: Vec<(f64, SolveStatus)>,
    pub solve_time: Duration,
    /// Set when a feasible target was seen above an infeasible one.
    pub monotonicity_warning: bool,
}

/// Bisection on a monotone feasibility oracle over `[t_lo, t_hi]`.
///
/// The upper end is probed first, so an optimistic bracket is never silently
/// truncated. Unknown outcomes count as infeasible.
pub fn bisect<W>(
    mut oracle: impl FnMut(f64) -> Result<Feasibility<W>>,
    t_lo: f64,
    t_hi: f64,
    eps: f64,
    max_iters: usize,
) -> Result<Bisection<W>> {
    let mut out = Bisection {
        t_star: t_lo,
        t_upper: t_hi,
        witness: None,
        iterations: 0,
        found_feasible: false,
        history: Vec::new(),
        solve_time: Duration::ZERO,
        monotonicity_warning: false,
    };
    if !(t_hi > t_lo) {
        return Ok(out);
    }
    let mut step = |t: f64, out: &mut Bisection<W>| -> Result<bool> {
        let f = oracle(t)?;
        out.iterations += 1;
        out.solve_time += f.result.wall_time;
        let status = if f.is_feasible() { SolveStatus::Feasible } else { f.result.status };
        if f.is_feasible()
            && out
                .history
                .iter()
                .any(|&(s, st)| st != SolveStatus::Feasible && s <= t)
        {
            out.monotonicity_warning = true;
        }
        out.history.push((t, status));
        match f.witness {
            Some(w) => {
                out.witness = Some(w);
                out.found_feasible = true;
                Ok(true)
            }
            None => Ok(false),
        }
    };

    if step(t_hi, &mut out)? {
        out.t_star = t_hi;
        return Ok(out);
    }
    let (mut lo, mut hi) = (t_lo, t_hi);
    while hi - lo > eps && out.iterations < max_iters {
        let mid = 0.5 * (lo + hi);
        if step(mid, &mut out)? {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    out.t_star = if out.found_feasible { lo } else { t_lo };
    out.t_upper = hi;
    Ok(out)
}

/// Upper bound on the perfect-CSI balanced objective: every user is at best
/// served alone at full power, `min_k α_k P_{b_k}‖h_{b_k,k}‖²/σ²`.
pub fn single_user_bound(channels: &ChannelSet, cfg: &NetworkConfig) -> f64 {
    (0..cfg.num_users())
        .map(|k| {
            let b = cfg.serving_bs(k);
            cfg.weight(k) * cfg.power(b) * channels.get(b, k).norm_squared() / cfg.noise_var()
        })
        .fold(f64::INFINITY, f64::min)
}

/// Real and imaginary variables of every beamformer.
#[derive(Debug, Clone)]
pub struct BeamVars {
    re: Vec<Vec<Var>>,
    im: Vec<Vec<Var>>,
}

impl BeamVars {
    pub fn new(p: &mut ConicProgram, cfg: &NetworkConfig) -> Self {
        let t = cfg.antennas();
        let (mut re, mut im) = (Vec::new(), Vec::new());
        for k in 0..cfg.num_users() {
            re.push(p.add_vars(t, &format!("re_m{k}")));
            im.push(p.add_vars(t, &format!("im_m{k}")));
        }
        Self { re, im }
    }

    /// `h m_i` for a row vector `h`.
    pub fn gain(&self, h: &CVector, i: usize) -> ComplexExpr {
        let mut e = ComplexExpr::default();
        for (t, &c) in h.iter().enumerate() {
            e.add_scaled(c, self.re[i][t], self.im[i][t]);
        }
        e
    }

    /// Real and imaginary parts of every entry of `m_i`.
    pub fn entries(&self, i: usize) -> impl Iterator<Item = LinExpr> + '_ {
        self.re[i]
            .iter()
            .chain(&self.im[i])
            .map(|&v| LinExpr::from(v))
    }

    /// `‖vec M_b‖₂ ≤ √P_b` for every BS.
    pub fn add_power_constraints(&self, p: &mut ConicProgram, cfg: &NetworkConfig) {
        for b in 0..cfg.num_cells() {
            let tail = cfg.users_of(b).iter().flat_map(|&i| self.entries(i)).collect();
            p.add_soc(LinExpr::constant(cfg.power(b).sqrt()), tail);
        }
    }

    pub fn extract(&self, r: &SolveResult) -> BeamformerSet {
        BeamformerSet::new(
            self.re
                .iter()
                .zip(&self.im)
                .map(|(re, im)| {
                    CVector::from_iterator(
                        re.len(),
                        re.iter().zip(im).map(|(&a, &b)| Complex64::new(r.value(a), r.value(b))),
                    )
                })
                .collect(),
        )
    }
}

/// `√(1 + α_k/t)`.
pub fn sinr_margin_coefficient(alpha: f64, t: f64) -> f64 {
    (1.0 + alpha / t).sqrt()
}

pub(crate) fn check_target(module: &'static str, t: f64) -> Result<()> {
    if !(t > 0.0) || !t.is_finite() {
        return Err(Error::invalid(module, format!("target t must be positive and finite, got {t}")));
    }
    Ok(())
}

/// Builds the perfect-CSI SOC program at target `t`.
pub fn nonrobust_program(t: f64, channels: &ChannelSet, cfg: &NetworkConfig) -> Result<(ConicProgram, BeamVars)> {
    check_target(MODULE, t)?;
    channels.check(cfg)?;
    let mut p = ConicProgram::new();
    let vars = BeamVars::new(&mut p, cfg);
    for k in 0..cfg.num_users() {
        let bk = cfg.serving_bs(k);
        let desired = vars.gain(channels.get(bk, k), k);
        let mut tail = Vec::new();
        for b in 0..cfg.num_cells() {
            for &i in cfg.users_of(b) {
                tail.push(vars.gain(channels.get(b, k), i));
            }
        }
        tail.push(ComplexExpr::constant(Complex64::new(cfg.noise_std(), 0.0)));
        let c = sinr_margin_coefficient(cfg.weight(k), t);
        p.add_complex_soc(desired.re.clone() * c, &tail);
        p.add_eq(desired.im);
    }
    vars.add_power_constraints(&mut p, cfg);
    Ok((p, vars))
}

pub fn feasibility_nonrobust(
    t: f64,
    channels: &ChannelSet,
    cfg: &NetworkConfig,
    backend: &dyn ConicBackend,
) -> Result<Feasibility<BeamformerSet>> {
    let (p, vars) = nonrobust_program(t, channels, cfg)?;
    let result = conic::solve(&p, backend)?;
    let witness = result.is_feasible().then(|| vars.extract(&result));
    Ok(Feasibility { result, witness })
}

/// Perfect-CSI balancing by bisection. `Auto` resolves to [`single_user_bound`].
pub fn balance_nonrobust(
    channels: &ChannelSet,
    cfg: &NetworkConfig,
    bis: &BisectionConfig,
    backend: &dyn ConicBackend,
) -> Result<Bisection<BeamformerSet>> {
    bis.validate()?;
    channels.check(cfg)?;
    let (lo, hi) = bis.resolve(single_user_bound(channels, cfg));
    bisect(|t| feasibility_nonrobust(t, channels, cfg, backend), lo, hi, bis.eps, bis.max_iters)
}
