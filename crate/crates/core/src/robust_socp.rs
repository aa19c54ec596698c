//! Dual-norm SOC approximation of the worst-case counterpart.
//!
//! Every uncertain constraint is lower-bounded by splitting the error into a
//! difference of two nonnegative parts, after which the inner minimisation
//! over the uncertainty set has the closed form `f₁ − ρ'‖γ‖*`. The dual-norm
//! cap is expressed through auxiliary vectors `q` (desired signal) and `μ`
//! (interference) bounded by scalars `L` and `ν`.

use num_complex::Complex64;

use crate::balancing::{
    self, bisect, check_target, sinr_margin_coefficient, BeamVars, Bisection, BisectionConfig, Feasibility,
    UpperBound,
};
use crate::conic::{self, ComplexExpr, ConicBackend, ConicProgram, LinExpr, Var};
use crate::error::{Error, Result};
use crate::model::{BeamformerSet, CMatrix, CVector, ChannelSet, NetworkConfig};
use crate::robust_sdp::check_set;
use crate::uncertainty::{dual_norm, gamma_entries, norm_of_magnitudes, NormKind, UncertaintySet};

const MODULE: &str = "robust_socp";

/// Largest uncertainty dimension accepted by the brute-force oracle.
pub const BRUTEFORCE_MAX_DIM: usize = 4;

/// `z − ‖M_bᴴ ĥᴴ‖₂`.
pub fn f1(m_b: &CMatrix, z: f64, h_hat: &CVector) -> Result<f64> {
    if m_b.nrows() != h_hat.len() {
        return Err(Error::invalid(MODULE, "f1: channel length differs from beamformer length"));
    }
    Ok(z - (h_hat.transpose() * m_b).norm())
}

/// `−‖(δ M_b)ᴴ‖₂`.
pub fn f2(m_b: &CMatrix, delta: &CVector) -> Result<f64> {
    if m_b.nrows() != delta.len() {
        return Err(Error::invalid(MODULE, "f2: direction length differs from beamformer length"));
    }
    Ok(-(delta.transpose() * m_b).norm())
}

/// Minimises `f₁ + Σᵢ f₂⁺ᵢ|θᵢ| + f₂⁻ᵢ|φᵢ|` over `‖|θ| + |φ|‖ ≤ ρ'` by
/// enumerating a simplex grid of `(|θ|, |φ|)` directions with resolution
/// `grid_res`, each scaled to the boundary of the set (the origin is also
/// evaluated). Exponential in the dimension; meant as a test oracle. A
/// `grid_res` divisible by the dimension keeps the box corners on the grid.
pub fn worst_case_margin_bruteforce(
    f1_val: f64,
    f2_plus: &[f64],
    f2_minus: &[f64],
    norm: NormKind,
    rho_prime: f64,
    grid_res: usize,
) -> Result<f64> {
    let l = f2_plus.len();
    if f2_minus.len() != l {
        return Err(Error::invalid(MODULE, "f2 vectors differ in length"));
    }
    if l == 0 || l > BRUTEFORCE_MAX_DIM {
        return Err(Error::invalid(
            MODULE,
            format!("brute-force margin supports 1..={BRUTEFORCE_MAX_DIM} directions, got {l}"),
        ));
    }
    if grid_res == 0 || !(rho_prime >= 0.0) {
        return Err(Error::invalid(MODULE, "grid_res must be positive and rho' nonnegative"));
    }
    let mut best = 0.0f64;
    let mut w = vec![0usize; 2 * l];
    let mut mags = vec![0.0; l];
    visit_compositions(&mut w, 0, grid_res, &mut |w| {
        for i in 0..l {
            mags[i] = (w[i] + w[l + i]) as f64;
        }
        let n = norm_of_magnitudes(norm, &mags);
        if n > 0.0 {
            let s = rho_prime / n;
            let val: f64 = (0..l)
                .map(|i| f2_plus[i] * w[i] as f64 + f2_minus[i] * w[l + i] as f64)
                .sum::<f64>()
                * s;
            best = best.min(val);
        }
    });
    Ok(f1_val + best)
}

fn visit_compositions(w: &mut [usize], pos: usize, left: usize, f: &mut impl FnMut(&[usize])) {
    if pos + 1 == w.len() {
        w[pos] = left;
        f(w);
        return;
    }
    for v in 0..=left {
        w[pos] = v;
        visit_compositions(w, pos + 1, left - v, f);
    }
}

/// Closed form of the inner minimisation: `f₁ − ρ'‖γ‖*`.
pub fn worst_case_margin(f1_val: f64, f2_plus: &[f64], f2_minus: &[f64], norm: NormKind, rho_prime: f64) -> Result<f64> {
    let gamma = gamma_entries(f2_plus, f2_minus)?;
    Ok(f1_val - rho_prime * dual_norm(norm, &gamma)?)
}

/// Whether the stacked single-SOC form replaces the per-direction form.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum StackedMode {
    /// Stacked whenever every `A = I` and the set is an l2 ball.
    #[default]
    Auto,
    /// Always emit the per-direction constraints.
    Never,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct SocpOptions {
    pub stacked: StackedMode,
}

impl SocpOptions {
    fn use_stacked(&self, set: &UncertaintySet) -> bool {
        self.stacked == StackedMode::Auto && set.norm() == NormKind::L2 && set.has_identity_directions()
    }
}

#[derive(Debug, Clone)]
pub struct SocpVars {
    pub beams: BeamVars,
    /// `z_{b,k}` for every link.
    pub z: Vec<Vec<Var>>,
}

impl SocpVars {
    pub fn new(p: &mut ConicProgram, cfg: &NetworkConfig) -> Self {
        let beams = BeamVars::new(p, cfg);
        let z = (0..cfg.num_cells())
            .map(|b| p.add_vars(cfg.num_users(), &format!("z{b}")))
            .collect();
        Self { beams, z }
    }
}

/// `‖γ‖* ≤ cap` for a nonnegative vector of expressions.
fn add_dual_cap(p: &mut ConicProgram, norm: NormKind, gamma: &[LinExpr], cap: LinExpr) {
    match norm {
        NormKind::L2 => p.add_soc(cap, gamma.to_vec()),
        NormKind::Linf => {
            let mut slack = cap;
            for g in gamma {
                slack -= g;
            }
            p.add_nonneg(slack);
        }
        NormKind::L1 => {
            for g in gamma {
                p.add_nonneg(cap.clone() - g.clone());
            }
        }
        NormKind::L2CapLinf { linf_ratio } => {
            // Support of {‖s‖₂ ≤ 1, ‖s‖∞ ≤ r} is min_u ‖γ − u‖₂ + r‖u‖₁.
            let u = p.add_vars(gamma.len(), "cap_u");
            let w = p.add_vars(gamma.len(), "cap_w");
            let s = p.add_var("cap_s");
            let mut slack = cap - s;
            for i in 0..gamma.len() {
                p.add_nonneg(LinExpr::from(w[i]) - u[i]);
                p.add_nonneg(LinExpr::from(w[i]) + u[i]);
                slack -= LinExpr::term(w[i], linf_ratio);
            }
            p.add_soc(s.into(), gamma.iter().zip(&u).map(|(g, &ui)| g.clone() - ui).collect());
            p.add_nonneg(slack);
        }
    }
}

/// Interference-side constraints for link `(b, k)`:
/// `z − ρ'ν ≥ ‖M_bᴴĥᴴ‖₂`, `μᵢ ≥ ‖(δⁱM_b)ᴴ‖₂`, `‖μ‖* ≤ ν`.
#[allow(clippy::too_many_arguments)]
pub fn robust_interference_block(
    p: &mut ConicProgram,
    vars: &SocpVars,
    b: usize,
    k: usize,
    channels: &ChannelSet,
    cfg: &NetworkConfig,
    set: &UncertaintySet,
    opts: &SocpOptions,
) -> Result<()> {
    let users = cfg.users_of(b);
    let nominal: Vec<ComplexExpr> = users.iter().map(|&j| vars.beams.gain(channels.get(b, k), j)).collect();
    let rho = set.design_radius(b, k);
    let mut head = LinExpr::from(vars.z[b][k]);
    if rho > 0.0 {
        let nu = p.add_var(format!("nu{b}_{k}"));
        head -= LinExpr::term(nu, rho);
        if opts.use_stacked(set) {
            // μᵢ = ‖row i of M_b‖, so ‖μ‖₂ = ‖M_b‖_F.
            p.add_soc(nu.into(), users.iter().flat_map(|&j| vars.beams.entries(j)).collect());
        } else {
            let a = set.directions(b, k);
            let mut mu = Vec::with_capacity(a.nrows());
            for i in 0..a.nrows() {
                let delta: CVector = a.row(i).transpose();
                let mu_i = p.add_var(format!("mu{b}_{k}[{i}]"));
                let g: Vec<ComplexExpr> = users.iter().map(|&j| vars.beams.gain(&delta, j)).collect();
                p.add_complex_soc(mu_i.into(), &g);
                mu.push(LinExpr::from(mu_i));
            }
            add_dual_cap(p, set.norm(), &mu, nu.into());
        }
    }
    p.add_complex_soc(head, &nominal);
    Ok(())
}

/// Desired-signal constraints for user `k` at target `t`:
/// `C Re(ĥm_k) − ρ'L ≥ ‖(z_{·,k}, σ)‖₂`, `qᵢ ≥ ±C Re(δⁱm_k)`, `‖q‖* ≤ L`,
/// `Im(ĥm_k) = 0`.
#[allow(clippy::too_many_arguments)]
pub fn robust_desired_block(
    p: &mut ConicProgram,
    vars: &SocpVars,
    k: usize,
    t: f64,
    channels: &ChannelSet,
    cfg: &NetworkConfig,
    set: &UncertaintySet,
    opts: &SocpOptions,
) -> Result<()> {
    check_target(MODULE, t)?;
    let bk = cfg.serving_bs(k);
    let c = sinr_margin_coefficient(cfg.weight(k), t);
    let desired = vars.beams.gain(channels.get(bk, k), k);
    let rho = set.design_radius(bk, k);
    let mut head = desired.re.clone() * c;
    if rho > 0.0 {
        let cap = p.add_var(format!("L{k}"));
        head -= LinExpr::term(cap, rho);
        if opts.use_stacked(set) {
            let tail = (0..cfg.antennas())
                .map(|i| vars.beams.gain(&unit(cfg.antennas(), i), k).re * c)
                .collect();
            p.add_soc(cap.into(), tail);
        } else {
            let a = set.directions(bk, k);
            let mut q = Vec::with_capacity(a.nrows());
            for i in 0..a.nrows() {
                let delta: CVector = a.row(i).transpose();
                let q_i = p.add_var(format!("q{k}[{i}]"));
                let g = vars.beams.gain(&delta, k).re * c;
                p.add_nonneg(LinExpr::from(q_i) - g.clone());
                p.add_nonneg(LinExpr::from(q_i) + g);
                q.push(LinExpr::from(q_i));
            }
            add_dual_cap(p, set.norm(), &q, cap.into());
        }
    }
    let mut tail: Vec<LinExpr> = (0..cfg.num_cells()).map(|b| LinExpr::from(vars.z[b][k])).collect();
    tail.push(LinExpr::constant(cfg.noise_std()));
    p.add_soc(head, tail);
    p.add_eq(desired.im);
    Ok(())
}

fn unit(n: usize, i: usize) -> CVector {
    let mut e = CVector::zeros(n);
    e[i] = Complex64::new(1.0, 0.0);
    e
}

/// Assembles the approximate robust counterpart at target `t`.
pub fn socp_program(
    t: f64,
    channels: &ChannelSet,
    cfg: &NetworkConfig,
    set: &UncertaintySet,
    opts: &SocpOptions,
) -> Result<(ConicProgram, SocpVars)> {
    check_target(MODULE, t)?;
    channels.check(cfg)?;
    check_set(set, cfg)?;
    let mut p = ConicProgram::new();
    let vars = SocpVars::new(&mut p, cfg);
    for k in 0..cfg.num_users() {
        robust_desired_block(&mut p, &vars, k, t, channels, cfg, set, opts)?;
        for b in 0..cfg.num_cells() {
            robust_interference_block(&mut p, &vars, b, k, channels, cfg, set, opts)?;
            p.add_nonneg(vars.z[b][k].into());
        }
    }
    vars.beams.add_power_constraints(&mut p, cfg);
    Ok((p, vars))
}

#[derive(Debug, Clone)]
pub struct SocpWitness {
    pub beams: BeamformerSet,
    /// Interference bounds `z_{b,k}`.
    pub z: Vec<Vec<f64>>,
}

pub fn feasibility_socp(
    t: f64,
    channels: &ChannelSet,
    cfg: &NetworkConfig,
    set: &UncertaintySet,
    opts: &SocpOptions,
    backend: &dyn ConicBackend,
) -> Result<Feasibility<SocpWitness>> {
    let (p, vars) = socp_program(t, channels, cfg, set, opts)?;
    let result = conic::solve(&p, backend)?;
    let witness = result.is_feasible().then(|| SocpWitness {
        beams: vars.beams.extract(&result),
        z: vars.z.iter().map(|row| row.iter().map(|&v| result.value(v)).collect()).collect(),
    });
    Ok(Feasibility { result, witness })
}

/// Bisection on the approximate counterpart. `Auto` brackets with the
/// perfect-CSI design.
pub fn balance_socp(
    channels: &ChannelSet,
    cfg: &NetworkConfig,
    set: &UncertaintySet,
    bis: &BisectionConfig,
    opts: &SocpOptions,
    backend: &dyn ConicBackend,
) -> Result<Bisection<SocpWitness>> {
    bis.validate()?;
    check_set(set, cfg)?;
    let hi = match bis.t_hi {
        UpperBound::Value(v) => v,
        UpperBound::Auto => balancing::balance_nonrobust(channels, cfg, bis, backend)?.t_upper,
    };
    bisect(
        |t| feasibility_socp(t, channels, cfg, set, opts, backend),
        bis.t_lo,
        hi,
        bis.eps,
        bis.max_iters,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::conic::ClarabelBackend;
    use crate::rng::substream;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use rand::Rng;

    fn crand(rng: &mut impl Rng) -> Complex64 {
        Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
    }

    fn instance(seed: u64, t: usize) -> (NetworkConfig, ChannelSet) {
        let mut rng = substream(seed, &[]);
        let cfg = NetworkConfig::symmetric(2, 2, t, 3.0, 1.0).unwrap();
        let ch = ChannelSet::from_fn(2, 4, |_, _| CVector::from_fn(t, |_, _| crand(&mut rng))).unwrap();
        (cfg, ch)
    }

    #[test]
    fn f_examples() {
        let eye = CMatrix::identity(2, 2);
        assert_relative_eq!(f2(&eye, &unit(2, 0)).unwrap(), -1.0);
        // ‖Mᴴĥᴴ‖ = 3 with M = I and ĥ = (3, 0).
        let h = CVector::from_vec(vec![Complex64::new(3.0, 0.0), Complex64::new(0.0, 0.0)]);
        assert_relative_eq!(f1(&eye, 5.0, &h).unwrap(), 2.0);
        assert!(f2(&eye, &CVector::zeros(3)).is_err());
    }

    #[test]
    fn bruteforce_examples() {
        assert_relative_eq!(
            worst_case_margin_bruteforce(1.5, &[0.0, 0.0], &[0.0, 0.0], NormKind::L2, 0.7, 10).unwrap(),
            1.5
        );
        assert_relative_eq!(
            worst_case_margin_bruteforce(2.0, &[-0.8], &[-0.8], NormKind::L2, 0.5, 10).unwrap(),
            2.0 - 0.5 * 0.8,
            epsilon = 1e-12
        );
        assert!(worst_case_margin_bruteforce(0.0, &[0.0; 5], &[0.0; 5], NormKind::L2, 1.0, 2).is_err());
    }

    #[test]
    fn bruteforce_matches_dual_norm_form() {
        let mut rng = substream(21, &[]);
        for norm in [NormKind::L2, NormKind::Linf, NormKind::L1, NormKind::L2CapLinf { linf_ratio: 0.7 }] {
            for _ in 0..6 {
                let plus: Vec<f64> = (0..3).map(|_| -rng.random_range(0.0..2.0)).collect();
                let minus = plus.clone();
                let (f1v, rho) = (rng.random_range(-1.0..3.0), rng.random_range(0.1..1.0));
                let brute = worst_case_margin_bruteforce(f1v, &plus, &minus, norm, rho, 24).unwrap();
                let exact = worst_case_margin(f1v, &plus, &minus, norm, rho).unwrap();
                let scale = rho * dual_norm(norm, &gamma_entries(&plus, &minus).unwrap()).unwrap();
                // The grid only sees a subset of the boundary, so it never undercuts the closed form.
                assert!(brute >= exact - 1e-12);
                assert!(brute - exact <= 0.02 * scale, "{norm}: {brute} vs {exact}");
            }
        }
    }

    #[test]
    fn zero_design_radius_reduces_to_nonrobust() {
        let (cfg, ch) = instance(1, 3);
        let be = ClarabelBackend::default();
        let bis = BisectionConfig::default();
        let nr = balancing::balance_nonrobust(&ch, &cfg, &bis, &be).unwrap();
        let set = UncertaintySet::identity(NormKind::L2, 0.3, 1.0, 2, 4, 3).unwrap();
        let zero = UncertaintySet::new(
            NormKind::L2,
            (0..2).map(|b| (0..4).map(|k| set.radius(b, k)).collect()).collect(),
            vec![vec![0.0; 4]; 2],
            vec![vec![CMatrix::identity(3, 3); 4]; 2],
        )
        .unwrap();
        let bis_hi = BisectionConfig { t_hi: UpperBound::Value(nr.t_upper), ..bis };
        let r = balance_socp(&ch, &cfg, &zero, &bis_hi, &SocpOptions::default(), &be).unwrap();
        assert!((r.t_star - nr.t_star).abs() <= 2.0 * bis.eps, "{} vs {}", r.t_star, nr.t_star);
    }

    #[test]
    fn stacked_and_per_direction_forms_agree() {
        let be = ClarabelBackend::default();
        let bis = BisectionConfig::default();
        for seed in 0..3 {
            let (cfg, ch) = instance(10 + seed, 4);
            let set = UncertaintySet::identity(NormKind::L2, 0.2, 1.0, 2, 4, 4).unwrap();
            let fast = balance_socp(&ch, &cfg, &set, &bis, &SocpOptions::default(), &be).unwrap();
            let generic = SocpOptions { stacked: StackedMode::Never };
            let slow = balance_socp(&ch, &cfg, &set, &bis, &generic, &be).unwrap();
            assert!((fast.t_star - slow.t_star).abs() <= bis.eps, "{} vs {}", fast.t_star, slow.t_star);
        }
    }

    #[test]
    fn linf_cap_is_l1_sum() {
        let mut p = ConicProgram::new();
        let mu = p.add_vars(3, "mu");
        let nu = p.add_var("nu");
        let exprs: Vec<LinExpr> = mu.iter().map(|&v| v.into()).collect();
        add_dual_cap(&mut p, NormKind::Linf, &exprs, nu.into());
        let x = [0.2, 0.3, 0.4, 0.91];
        assert!(p.residuals(&x) <= 0.0);
        let x = [0.2, 0.3, 0.4, 0.89];
        assert!(p.residuals(&x) > 0.0);
    }

    #[test]
    fn forced_q_matches_dual_norm_margin() {
        // Fix the beamformers and the q entries to C|Re(δⁱm)|; the desired block
        // is then satisfiable exactly when the nominal margin covers ρ'‖q‖*.
        let mut rng = substream(31, &[]);
        let cfg = NetworkConfig::symmetric(1, 1, 3, 10.0, 1.0).unwrap();
        let h = CVector::from_fn(3, |_, _| crand(&mut rng));
        let ch = ChannelSet::new(vec![vec![h.clone()]]).unwrap();
        let a = CMatrix::from_fn(2, 3, |_, _| crand(&mut rng));
        for norm in [NormKind::L2, NormKind::Linf, NormKind::L1] {
            for trial in 0..6 {
                let mut m = CVector::from_fn(3, |_, _| crand(&mut rng));
                let g = h.dot(&m);
                m *= g.conj() / g.norm();
                let t = 0.5;
                let c = sinr_margin_coefficient(1.0, t);
                let q: Vec<f64> = (0..2).map(|i| c * (a.row(i).transpose().dot(&m)).re.abs()).collect();
                let z = 0.1;
                let lhs = c * h.dot(&m).re - (z * z + 1.0f64).sqrt();
                let dn = dual_norm(norm, &q).unwrap();
                // Radius placed either side of the threshold lhs / ‖q‖*.
                let rho = lhs / dn * if trial % 2 == 0 { 0.9 } else { 1.1 };
                if rho <= 0.0 {
                    continue;
                }
                let set = UncertaintySet::new(norm, vec![vec![rho]], vec![vec![rho]], vec![vec![a.clone()]]).unwrap();
                let mut p = ConicProgram::new();
                let vars = SocpVars::new(&mut p, &cfg);
                robust_desired_block(&mut p, &vars, 0, t, &ch, &cfg, &set, &SocpOptions::default()).unwrap();
                for i in 0..3 {
                    let re = vars.beams.gain(&unit(3, i), 0);
                    p.add_eq(re.re - m[i].re);
                    p.add_eq(re.im - m[i].im);
                }
                p.add_eq(LinExpr::from(vars.z[0][0]) - z);
                let r = conic::solve(&p, &ClarabelBackend::default()).unwrap();
                assert_eq!(r.is_feasible(), trial % 2 == 0, "{norm} trial {trial}");
            }
        }
    }

    #[test]
    fn interference_side_holds_for_sampled_errors() {
        let (cfg, ch) = instance(41, 3);
        let set = UncertaintySet::identity(NormKind::L2, 0.3, 1.0, 2, 4, 3).unwrap();
        let r = balance_socp(&ch, &cfg, &set, &BisectionConfig::default(), &SocpOptions::default(), &ClarabelBackend::default())
            .unwrap();
        let w = r.witness.unwrap();
        let mut rng = substream(42, &[]);
        for _ in 0..500 {
            for b in 0..2 {
                for k in 0..4 {
                    let v = crate::uncertainty::sample_in_ball(NormKind::L2, set.design_radius(b, k), 3, &mut rng);
                    let h = crate::uncertainty::apply_error(ch.get(b, k), set.directions(b, k), &v).unwrap();
                    let leak = (h.transpose() * w.beams.stacked(b, &cfg)).norm();
                    assert!(w.z[b][k] >= leak - 1e-6);
                }
            }
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn f2_is_sign_symmetric(seed in any::<u64>()) {
            let mut rng = substream(seed, &[]);
            let m = CMatrix::from_fn(3, 2, |_, _| crand(&mut rng));
            let d = CVector::from_fn(3, |_, _| crand(&mut rng));
            prop_assert_eq!(f2(&m, &d).unwrap(), f2(&m, &-d.clone()).unwrap());
            prop_assert!(f2(&m, &d).unwrap() <= 0.0);
        }

        #[test]
        fn closed_form_matches_direct_l2(seed in any::<u64>()) {
            let mut rng = substream(seed, &[]);
            let plus: Vec<f64> = (0..2).map(|_| -rng.random_range(0.0..1.0)).collect();
            let minus: Vec<f64> = (0..2).map(|_| -rng.random_range(0.0..1.0)).collect();
            let brute = worst_case_margin_bruteforce(1.0, &plus, &minus, NormKind::L2, 0.5, 60).unwrap();
            let exact = worst_case_margin(1.0, &plus, &minus, NormKind::L2, 0.5).unwrap();
            prop_assert!((brute - exact).abs() <= 0.02 * 0.5 * dual_norm(NormKind::L2, &gamma_entries(&plus, &minus).unwrap()).unwrap() + 1e-12);
        }
    }
}
