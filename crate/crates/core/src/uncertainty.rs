//! Norm-bounded channel uncertainty: `h_{b,k} = ĥ_{b,k} + v_{b,k} A_{b,k}` with
//! `‖v_{b,k}‖ ≤ ρ_{b,k}`.
//!
//! Complex uncertainty vectors of length `l` are measured through the
//! magnitudes of their components, so `‖v‖_∞ ≤ ρ` means `|v_i| ≤ ρ` for every
//! component and the L2 ball is the ball in `2l` real dimensions.

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};

use crate::error::{Error, Result};
use crate::model::{CMatrix, CVector};

const MODULE: &str = "uncertainty";

/// Design-radius divisors `c` in `ρ' = ρ / c` used by the trade-off sweeps.
pub const DESIGN_DIVISOR_PRESETS: [f64; 4] = [1.0, 1.25, 2.0, 2.5];

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NormKind {
    L2,
    Linf,
    L1,
    /// Intersection of the unit L2 ball with the box `|s_i| ≤ linf_ratio`.
    L2CapLinf { linf_ratio: f64 },
}

impl NormKind {
    pub fn name(&self) -> &'static str {
        match self {
            NormKind::L2 => "l2",
            NormKind::Linf => "linf",
            NormKind::L1 => "l1",
            NormKind::L2CapLinf { .. } => "l2_cap_linf",
        }
    }

    fn validate(&self) -> Result<()> {
        if let NormKind::L2CapLinf { linf_ratio } = self {
            if !(*linf_ratio > 0.0) || !linf_ratio.is_finite() {
                return Err(Error::invalid(MODULE, "l2_cap_linf box ratio must be positive"));
            }
        }
        Ok(())
    }
}

impl fmt::Display for NormKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for NormKind {
    type Err = Error;

    /// Parses `l2`, `linf`, `l1`. The intersection norm needs its box ratio and
    /// is built directly.
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "l2" => Ok(NormKind::L2),
            "linf" => Ok(NormKind::Linf),
            "l1" => Ok(NormKind::L1),
            other => Err(Error::UnsupportedNorm(other.to_string())),
        }
    }
}

/// Primal norm of a nonnegative magnitude vector.
pub fn norm_of_magnitudes(kind: NormKind, mags: &[f64]) -> f64 {
    let l2 = || mags.iter().map(|x| x * x).sum::<f64>().sqrt();
    let linf = || mags.iter().fold(0.0f64, |a, &x| a.max(x.abs()));
    match kind {
        NormKind::L2 => l2(),
        NormKind::Linf => linf(),
        NormKind::L1 => mags.iter().map(|x| x.abs()).sum(),
        NormKind::L2CapLinf { linf_ratio } => l2().max(linf() / linf_ratio),
    }
}

/// Norm of a complex uncertainty vector (through its component magnitudes).
pub fn norm_of(kind: NormKind, v: &CVector) -> f64 {
    let mags: Vec<f64> = v.iter().map(|z| z.norm()).collect();
    norm_of_magnitudes(kind, &mags)
}

/// `max_{‖s‖ ≤ 1} sᵀγ` for a nonnegative `γ`.
pub fn dual_norm(kind: NormKind, gamma: &[f64]) -> Result<f64> {
    kind.validate()?;
    if gamma.iter().any(|&g| !(g >= 0.0)) {
        return Err(Error::invalid(MODULE, "dual_norm expects a nonnegative vector"));
    }
    Ok(match kind {
        NormKind::L2 => gamma.iter().map(|g| g * g).sum::<f64>().sqrt(),
        NormKind::Linf => gamma.iter().sum(),
        NormKind::L1 => gamma.iter().fold(0.0, |a: f64, &g| a.max(g)),
        NormKind::L2CapLinf { linf_ratio } => l2_cap_linf_support(gamma, linf_ratio),
    })
}

/// Support function of `{‖s‖₂ ≤ 1, ‖s‖_∞ ≤ r}` at `γ ≥ 0`.
///
/// The maximiser caps the largest entries at `r` and scales the rest
/// proportionally to `γ`; scan the number of capped entries in decreasing
/// order of `γ` until the scaled remainder fits under the cap.
#[allow(clippy::needless_range_loop)]
fn l2_cap_linf_support(gamma: &[f64], r: f64) -> f64 {
    let mut g: Vec<f64> = gamma.to_vec();
    g.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let n = g.len();
    let mut capped_sum = 0.0;
    let mut rest_sq: f64 = g.iter().map(|x| x * x).sum();
    for j in 0..=n {
        let budget = 1.0 - r * r * j as f64;
        if budget < 0.0 {
            break;
        }
        if rest_sq <= 0.0 {
            return r * capped_sum;
        }
        let scale = (budget / rest_sq).sqrt();
        if j == n || scale * g[j] <= r {
            return r * capped_sum + scale * rest_sq;
        }
        capped_sum += g[j];
        rest_sq -= g[j] * g[j];
        rest_sq = rest_sq.max(0.0);
    }
    // r·√n > 1 is impossible to exhaust here; every entry capped is the fallback.
    r * g.iter().sum::<f64>()
}

/// `[γ]_j = max{-f⁺_j, -f⁻_j, 0}`.
pub fn gamma_entries(f_plus: &[f64], f_minus: &[f64]) -> Result<Vec<f64>> {
    if f_plus.len() != f_minus.len() {
        return Err(Error::invalid(
            MODULE,
            format!("gamma_entries length mismatch: {} vs {}", f_plus.len(), f_minus.len()),
        ));
    }
    Ok(f_plus
        .iter()
        .zip(f_minus)
        .map(|(&a, &b)| (-a).max(-b).max(0.0))
        .collect())
}

/// `ĥ + v A`, with `A` holding one perturbation direction per row.
pub fn apply_error(h_hat: &CVector, directions: &CMatrix, v: &CVector) -> Result<CVector> {
    if directions.ncols() != h_hat.len() || directions.nrows() != v.len() {
        return Err(Error::invalid(
            MODULE,
            format!(
                "apply_error: ĥ has length {}, A is {}x{}, v has length {}",
                h_hat.len(),
                directions.nrows(),
                directions.ncols(),
                v.len()
            ),
        ));
    }
    Ok(h_hat + directions.transpose() * v)
}

/// Per-link radii and perturbation directions for one norm family.
#[derive(Debug, Clone, PartialEq)]
pub struct UncertaintySet {
    norm: NormKind,
    radius: Vec<Vec<f64>>,
    design_radius: Vec<Vec<f64>>,
    directions: Vec<Vec<CMatrix>>,
    identity_directions: bool,
}

impl UncertaintySet {
    /// General constructor; all tables are indexed `[b][k]`.
    pub fn new(
        norm: NormKind,
        radius: Vec<Vec<f64>>,
        design_radius: Vec<Vec<f64>>,
        directions: Vec<Vec<CMatrix>>,
    ) -> Result<Self> {
        norm.validate()?;
        let cells = directions.len();
        if cells == 0 || radius.len() != cells || design_radius.len() != cells {
            return Err(Error::invalid(MODULE, "uncertainty tables disagree on B"));
        }
        let users = directions[0].len();
        let antennas = directions[0]
            .first()
            .map(|a| a.ncols())
            .ok_or_else(|| Error::invalid(MODULE, "no users in uncertainty set"))?;
        let mut identity = true;
        for b in 0..cells {
            if directions[b].len() != users
                || radius[b].len() != users
                || design_radius[b].len() != users
            {
                return Err(Error::invalid(MODULE, "uncertainty tables disagree on K"));
            }
            for k in 0..users {
                let a = &directions[b][k];
                let (rho, rho_d) = (radius[b][k], design_radius[b][k]);
                if a.ncols() != antennas || a.nrows() == 0 || a.nrows() > antennas {
                    return Err(Error::invalid(
                        MODULE,
                        format!("directions for link ({b},{k}) must be l x T with 1 <= l <= T"),
                    ));
                }
                if a.row_iter().any(|row| row.iter().all(|z| *z == Complex64::new(0.0, 0.0))) {
                    return Err(Error::invalid(MODULE, format!("zero direction on link ({b},{k})")));
                }
                if !(rho >= 0.0) || !rho.is_finite() || !(rho_d >= 0.0) {
                    return Err(Error::invalid(MODULE, "radii must be nonnegative and finite"));
                }
                if rho_d > rho {
                    return Err(Error::invalid(
                        MODULE,
                        format!("design radius {rho_d} exceeds radius {rho} on link ({b},{k})"),
                    ));
                }
                identity &= a.nrows() == antennas && *a == CMatrix::identity(antennas, antennas);
            }
        }
        Ok(Self {
            norm,
            radius,
            design_radius,
            directions,
            identity_directions: identity,
        })
    }

    /// `A_{b,k} = I_T`, `ρ_{b,k} = ρ` and `ρ'_{b,k} = ρ / divisor` on every link.
    pub fn identity(
        norm: NormKind,
        rho: f64,
        divisor: f64,
        num_cells: usize,
        num_users: usize,
        antennas: usize,
    ) -> Result<Self> {
        if !(divisor >= 1.0) || !divisor.is_finite() {
            return Err(Error::invalid(MODULE, "design divisor must be >= 1"));
        }
        let eye = CMatrix::identity(antennas, antennas);
        Self::new(
            norm,
            vec![vec![rho; num_users]; num_cells],
            vec![vec![rho / divisor; num_users]; num_cells],
            vec![vec![eye; num_users]; num_cells],
        )
    }

    /// Same set with every design radius replaced by `ρ / divisor`.
    pub fn with_design_divisor(&self, divisor: f64) -> Result<Self> {
        if !(divisor >= 1.0) || !divisor.is_finite() {
            return Err(Error::invalid(MODULE, "design divisor must be >= 1"));
        }
        let design = self
            .radius
            .iter()
            .map(|row| row.iter().map(|r| r / divisor).collect())
            .collect();
        Self::new(self.norm, self.radius.clone(), design, self.directions.clone())
    }

    pub fn with_norm(&self, norm: NormKind) -> Result<Self> {
        Self::new(norm, self.radius.clone(), self.design_radius.clone(), self.directions.clone())
    }

    pub fn norm(&self) -> NormKind {
        self.norm
    }

    pub fn radius(&self, b: usize, k: usize) -> f64 {
        self.radius[b][k]
    }

    pub fn design_radius(&self, b: usize, k: usize) -> f64 {
        self.design_radius[b][k]
    }

    pub fn directions(&self, b: usize, k: usize) -> &CMatrix {
        &self.directions[b][k]
    }

    /// `l_{b,k}`.
    pub fn dim(&self, b: usize, k: usize) -> usize {
        self.directions[b][k].nrows()
    }

    pub fn has_identity_directions(&self) -> bool {
        self.identity_directions
    }

    pub fn num_cells(&self) -> usize {
        self.directions.len()
    }

    pub fn num_users(&self) -> usize {
        self.directions[0].len()
    }

    pub fn antennas(&self) -> usize {
        self.directions[0][0].ncols()
    }

    /// Draws `v_{b,k}` uniformly from the radius-`ρ_{b,k}` set.
    pub fn sample_uniform<R: Rng + ?Sized>(&self, b: usize, k: usize, rng: &mut R) -> CVector {
        sample_in_ball(self.norm, self.radius(b, k), self.dim(b, k), rng)
    }
}

fn random_phase<R: Rng + ?Sized>(rng: &mut R) -> Complex64 {
    Complex64::from_polar(1.0, rng.random::<f64>() * std::f64::consts::TAU)
}

fn sample_l2<R: Rng + ?Sized>(radius: f64, l: usize, rng: &mut R) -> CVector {
    loop {
        let v = CVector::from_fn(l, |_, _| {
            Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
        });
        let n = v.norm();
        if n > 0.0 {
            let r = radius * rng.random::<f64>().powf(1.0 / (2 * l) as f64);
            return v * Complex64::from(r / n);
        }
    }
}

fn sample_disks<R: Rng + ?Sized>(radius: f64, l: usize, rng: &mut R) -> CVector {
    CVector::from_fn(l, |_, _| random_phase(rng) * (radius * rng.random::<f64>().sqrt()))
}

/// Uniform draw from `{v ∈ C^l : ‖v‖ ≤ radius}`.
pub fn sample_in_ball<R: Rng + ?Sized>(kind: NormKind, radius: f64, l: usize, rng: &mut R) -> CVector {
    if radius == 0.0 || l == 0 {
        return CVector::zeros(l);
    }
    let mut v = match kind {
        NormKind::L2 => sample_l2(radius, l, rng),
        NormKind::Linf => sample_disks(radius, l, rng),
        NormKind::L1 => {
            // Magnitudes of a uniform point in the complex L1 ball follow a
            // scaled Dirichlet(2, ..., 2; 1) law (Jacobian Π r_i).
            let g: Vec<f64> = (0..l)
                .map(|_| rng.sample::<f64, _>(Exp1) + rng.sample::<f64, _>(Exp1))
                .collect();
            let slack: f64 = Exp1.sample(rng);
            let total = g.iter().sum::<f64>() + slack;
            CVector::from_iterator(l, g.iter().map(|gi| random_phase(rng) * (radius * gi / total)))
        }
        NormKind::L2CapLinf { linf_ratio } => {
            // Propose from the smaller of the two bodies, keep points inside both.
            let box_r = radius * linf_ratio;
            let ln_ball = (l as f64) * std::f64::consts::PI.ln() + 2.0 * l as f64 * radius.ln()
                - ln_factorial(l);
            let ln_box = (l as f64) * (std::f64::consts::PI * box_r * box_r).ln();
            loop {
                let cand = if ln_box < ln_ball {
                    sample_disks(box_r, l, rng)
                } else {
                    sample_l2(radius, l, rng)
                };
                if norm_of(kind, &cand) <= radius {
                    break cand;
                }
            }
        }
    };
    let n = norm_of(kind, &v);
    if n > radius {
        v *= Complex64::from(radius / n);
    }
    assert!(
        norm_of(kind, &v) <= radius * (1.0 + 1e-12),
        "uniform sample left the uncertainty set"
    );
    v
}

fn ln_factorial(n: usize) -> f64 {
    (1..=n).map(|i| (i as f64).ln()).sum()
}

/// Identity perturbation directions for a `T`-antenna link.
pub fn identity_directions(antennas: usize) -> CMatrix {
    DMatrix::identity(antennas, antennas)
}
