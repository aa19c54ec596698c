//! Backend-neutral conic programs over real variables.
//!
//! Constraint blocks state that a list of affine expressions lies in a cone:
//! the zero cone, the nonnegative orthant, a second-order cone
//! `{(u, w) : ‖w‖₂ ≤ u}` or the PSD cone of real symmetric matrices. Complex
//! data enters through [`complex_soc_embed`] and the Hermitian embedding
//! `[[Re H, −Im H], [Im H, Re H]]`.

mod backend;
mod expr;

use std::time::{Duration, Instant};

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};
use crate::model::CMatrix;

pub use backend::{BackendOutput, ClarabelBackend, ConicBackend};
pub use expr::{ComplexExpr, HermitianExpr, LinExpr, Var};

const MODULE: &str = "conic";

/// Absolute residual tolerance applied when re-checking a backend solution.
pub const FEASIBILITY_TOL: f64 = 1e-6;

/// Tolerance for accepting a numeric matrix as Hermitian.
pub const HERMITIAN_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub enum Block {
    Zero(Vec<LinExpr>),
    Nonneg(Vec<LinExpr>),
    /// `exprs[0] ≥ ‖exprs[1..]‖₂`.
    Soc(Vec<LinExpr>),
    /// Upper triangle of a symmetric matrix, column by column.
    Psd { order: usize, upper: Vec<LinExpr> },
}

impl Block {
    fn exprs(&self) -> &[LinExpr] {
        match self {
            Block::Zero(e) | Block::Nonneg(e) | Block::Soc(e) => e,
            Block::Psd { upper, .. } => upper,
        }
    }

    /// Largest violation of this block at `x`.
    pub fn residual(&self, x: &[f64]) -> f64 {
        match self {
            Block::Zero(e) => e.iter().fold(0.0, |a, e| a.max(e.eval(x).abs())),
            Block::Nonneg(e) => e.iter().fold(0.0, |a, e| a.max(-e.eval(x))),
            Block::Soc(e) => {
                let head = e[0].eval(x);
                let tail = e[1..].iter().map(|e| e.eval(x).powi(2)).sum::<f64>().sqrt();
                (tail - head).max(0.0)
            }
            Block::Psd { order, upper } => {
                let m = unpack_upper(*order, upper, x);
                let min = SymmetricEigen::new(m).eigenvalues.min();
                (-min).max(0.0)
            }
        }
    }
}

fn unpack_upper(order: usize, upper: &[LinExpr], x: &[f64]) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(order, order);
    let mut idx = 0;
    for c in 0..order {
        for r in 0..=c {
            let v = upper[idx].eval(x);
            m[(r, c)] = v;
            m[(c, r)] = v;
            idx += 1;
        }
    }
    m
}

/// Real SOC rows `(Re e₀, Im e₀, Re e₁, …)` whose Euclidean norm equals the
/// complex norm of `v` for every assignment.
pub fn complex_soc_embed(v: &[ComplexExpr]) -> Vec<LinExpr> {
    v.iter().flat_map(|z| [z.re.clone(), z.im.clone()]).collect()
}

/// `[[Re H, −Im H], [Im H, Re H]]` for a Hermitian `H`.
pub fn hermitian_to_real_psd(h: &CMatrix) -> Result<DMatrix<f64>> {
    let n = h.nrows();
    if h.ncols() != n {
        return Err(Error::invalid(MODULE, "hermitian_to_real_psd needs a square matrix"));
    }
    for i in 0..n {
        for j in 0..=i {
            if (h[(i, j)] - h[(j, i)].conj()).norm() > HERMITIAN_TOL {
                return Err(Error::invalid(MODULE, format!("matrix is not Hermitian at ({i},{j})")));
            }
        }
    }
    Ok(DMatrix::from_fn(2 * n, 2 * n, |r, c| {
        let z = h[(r % n, c % n)];
        match (r < n, c < n) {
            (true, true) | (false, false) => z.re,
            (true, false) => -z.im,
            (false, true) => z.im,
        }
    }))
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConicProgram {
    names: Vec<String>,
    objective: LinExpr,
    maximize: bool,
    blocks: Vec<Block>,
}

impl ConicProgram {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_var(&mut self, name: impl Into<String>) -> Var {
        self.names.push(name.into());
        Var(self.names.len() - 1)
    }

    pub fn add_vars(&mut self, n: usize, prefix: &str) -> Vec<Var> {
        (0..n).map(|i| self.add_var(format!("{prefix}[{i}]"))).collect()
    }

    pub fn num_vars(&self) -> usize {
        self.names.len()
    }

    pub fn var_name(&self, v: Var) -> &str {
        &self.names[v.0]
    }

    pub fn blocks(&self) -> &[Block] {
        &self.blocks
    }

    pub fn minimize(&mut self, e: LinExpr) {
        self.objective = e;
        self.maximize = false;
    }

    pub fn maximize(&mut self, e: LinExpr) {
        self.objective = e;
        self.maximize = true;
    }

    /// `e = 0`.
    pub fn add_eq(&mut self, e: LinExpr) {
        self.blocks.push(Block::Zero(vec![e]));
    }

    /// `e ≥ 0`.
    pub fn add_nonneg(&mut self, e: LinExpr) {
        self.blocks.push(Block::Nonneg(vec![e]));
    }

    /// `‖tail‖₂ ≤ head`.
    pub fn add_soc(&mut self, head: LinExpr, tail: Vec<LinExpr>) {
        let mut e = Vec::with_capacity(tail.len() + 1);
        e.push(head);
        e.extend(tail);
        self.blocks.push(Block::Soc(e));
    }

    /// `‖v‖₂ ≤ head` for a complex vector `v`.
    pub fn add_complex_soc(&mut self, head: LinExpr, v: &[ComplexExpr]) {
        self.add_soc(head, complex_soc_embed(v));
    }

    /// `S ⪰ 0` where `entry(r, c)` gives the symmetric entries; only `r ≤ c`
    /// is queried.
    pub fn add_psd(&mut self, order: usize, mut entry: impl FnMut(usize, usize) -> LinExpr) {
        let mut upper = Vec::with_capacity(order * (order + 1) / 2);
        for c in 0..order {
            for r in 0..=c {
                upper.push(entry(r, c));
            }
        }
        self.blocks.push(Block::Psd { order, upper });
    }

    /// `H ⪰ 0` through the real embedding of order `2n`.
    pub fn add_hermitian_psd(&mut self, h: &HermitianExpr) {
        let n = h.order();
        self.add_psd(2 * n, |r, c| {
            // r ≤ c, so the lower-left block is never queried.
            match (r < n, c < n) {
                (true, true) => h.get(r, c).re.clone(),
                (true, false) => -h.get(r, c - n).im.clone(),
                _ => h.get(r - n, c - n).re.clone(),
            }
        });
    }

    /// Checks that every block references declared variables and has a valid size.
    pub fn validate(&self) -> Result<()> {
        let n = self.num_vars();
        let bad = |e: &LinExpr| e.max_var().is_some_and(|i| i >= n);
        if bad(&self.objective) {
            return Err(Error::invalid(MODULE, "objective references an undeclared variable"));
        }
        for (i, b) in self.blocks.iter().enumerate() {
            match b {
                Block::Soc(e) if e.is_empty() => {
                    return Err(Error::invalid(MODULE, format!("block {i}: empty second-order cone")))
                }
                Block::Psd { order, upper } if *order == 0 || upper.len() != order * (order + 1) / 2 => {
                    return Err(Error::invalid(MODULE, format!("block {i}: malformed PSD block")))
                }
                _ => {}
            }
            if b.exprs().iter().any(bad) {
                return Err(Error::invalid(MODULE, format!("block {i} references an undeclared variable")));
            }
        }
        Ok(())
    }

    /// Largest block violation at `x` (0 for an empty program).
    pub fn residuals(&self, x: &[f64]) -> f64 {
        self.blocks.iter().fold(0.0, |a, b| a.max(b.residual(x)))
    }

    pub fn objective_value(&self, x: &[f64]) -> f64 {
        self.objective.eval(x)
    }

    /// Lowers to `min qᵀx  s.t.  b − Ax ∈ K`.
    pub fn to_standard_form(&self) -> StandardForm {
        let sign = if self.maximize { -1.0 } else { 1.0 };
        let mut q = vec![0.0; self.num_vars()];
        for (i, c) in self.objective.compact() {
            q[i] = sign * c;
        }
        let mut sf = StandardForm {
            num_vars: self.num_vars(),
            q,
            rows: Vec::new(),
            cols: Vec::new(),
            vals: Vec::new(),
            b: Vec::new(),
            cones: Vec::new(),
        };
        // Consecutive blocks of the same scalar cone are merged.
        for block in &self.blocks {
            match block {
                Block::Zero(e) => {
                    sf.push_rows(e, 1.0);
                    match sf.cones.last_mut() {
                        Some(Cone::Zero(n)) => *n += e.len(),
                        _ => sf.cones.push(Cone::Zero(e.len())),
                    }
                }
                Block::Nonneg(e) => {
                    sf.push_rows(e, 1.0);
                    match sf.cones.last_mut() {
                        Some(Cone::Nonneg(n)) => *n += e.len(),
                        _ => sf.cones.push(Cone::Nonneg(e.len())),
                    }
                }
                Block::Soc(e) => {
                    sf.push_rows(e, 1.0);
                    sf.cones.push(Cone::Soc(e.len()));
                }
                Block::Psd { order, upper } => {
                    let mut idx = 0;
                    for c in 0..*order {
                        for r in 0..=c {
                            let s = if r == c { 1.0 } else { std::f64::consts::SQRT_2 };
                            sf.push_rows(std::slice::from_ref(&upper[idx]), s);
                            idx += 1;
                        }
                    }
                    sf.cones.push(Cone::PsdTriangle(*order));
                }
            }
        }
        sf
    }
}

/// Cone of a contiguous run of standard-form rows.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Cone {
    Zero(usize),
    Nonneg(usize),
    Soc(usize),
    /// Scaled upper triangle (off-diagonals times √2) of an order-n matrix.
    PsdTriangle(usize),
}

/// `min qᵀx  s.t.  b − Ax ∈ K₁ × K₂ × …` with `A` in triplet form.
#[derive(Debug, Clone, PartialEq)]
pub struct StandardForm {
    pub num_vars: usize,
    pub q: Vec<f64>,
    pub rows: Vec<usize>,
    pub cols: Vec<usize>,
    pub vals: Vec<f64>,
    pub b: Vec<f64>,
    pub cones: Vec<Cone>,
}

impl StandardForm {
    pub fn num_rows(&self) -> usize {
        self.b.len()
    }

    fn push_rows(&mut self, exprs: &[LinExpr], scale: f64) {
        for e in exprs {
            let row = self.b.len();
            for (i, c) in e.compact() {
                self.rows.push(row);
                self.cols.push(i);
                self.vals.push(-scale * c);
            }
            self.b.push(scale * e.constant_part());
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveStatus {
    Feasible,
    Infeasible,
    Unknown,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveResult {
    pub status: SolveStatus,
    pub x: Vec<f64>,
    pub objective: f64,
    pub wall_time: Duration,
    pub iterations: u32,
    /// Independent residual at the returned point (`NaN` when no point).
    pub max_residual: f64,
    /// Raw backend status, for diagnostics.
    pub detail: String,
}

impl SolveResult {
    pub fn is_feasible(&self) -> bool {
        self.status == SolveStatus::Feasible
    }

    pub fn value(&self, v: Var) -> f64 {
        self.x[v.0]
    }

    pub fn eval(&self, e: &LinExpr) -> f64 {
        e.eval(&self.x)
    }
}

/// Solves `p`, then re-checks every block at the returned point. A backend
/// success whose residual exceeds [`FEASIBILITY_TOL`] is reported as unknown.
pub fn solve(p: &ConicProgram, backend: &dyn ConicBackend) -> Result<SolveResult> {
    p.validate()?;
    let start = Instant::now();
    if p.blocks.is_empty() && p.objective.compact().is_empty() {
        let x = vec![0.0; p.num_vars()];
        return Ok(SolveResult {
            status: SolveStatus::Feasible,
            objective: p.objective_value(&x),
            x,
            wall_time: start.elapsed(),
            iterations: 0,
            max_residual: 0.0,
            detail: "trivial".into(),
        });
    }
    let sf = p.to_standard_form();
    let out = backend.submit(&sf);
    let wall_time = start.elapsed();
    let (mut status, max_residual) = if out.x.len() == sf.num_vars && out.x.iter().all(|v| v.is_finite()) {
        (out.status, p.residuals(&out.x))
    } else {
        (SolveStatus::Unknown, f64::NAN)
    };
    if status == SolveStatus::Feasible && !(max_residual <= FEASIBILITY_TOL) {
        status = SolveStatus::Unknown;
    }
    let x = if out.x.len() == sf.num_vars { out.x } else { vec![f64::NAN; sf.num_vars] };
    Ok(SolveResult {
        status,
        objective: p.objective_value(&x),
        x,
        wall_time,
        iterations: out.iterations,
        max_residual,
        detail: out.detail,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::substream;
    use approx::assert_relative_eq;
    use num_complex::Complex64;
    use proptest::prelude::*;
    use rand::Rng;

    fn random_complex_expr(rng: &mut impl Rng, vars: &[Var]) -> ComplexExpr {
        let mut e = ComplexExpr::constant(Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
        for &v in vars {
            e.re.add_term(v, rng.random_range(-1.0..1.0));
            e.im.add_term(v, rng.random_range(-1.0..1.0));
        }
        e
    }

    fn embedded_norm(v: &[ComplexExpr], x: &[f64]) -> f64 {
        complex_soc_embed(v).iter().map(|e| e.eval(x).powi(2)).sum::<f64>().sqrt()
    }

    #[test]
    fn complex_soc_embed_examples() {
        let z = ComplexExpr::constant(Complex64::new(3.0, 4.0));
        assert_relative_eq!(embedded_norm(&[z], &[]), 5.0);

        let real = vec![ComplexExpr::constant(Complex64::new(1.0, 0.0)); 3];
        let rows = complex_soc_embed(&real);
        assert_eq!(rows.len(), 6);
        assert!(rows.iter().skip(1).step_by(2).all(|e| e.eval(&[]) == 0.0));
        assert_relative_eq!(embedded_norm(&real, &[]), 3f64.sqrt());

        let mut p = ConicProgram::new();
        let vars = p.add_vars(4, "x");
        let mut rng = substream(5, &[]);
        for _ in 0..20 {
            let v: Vec<ComplexExpr> = (0..3).map(|_| random_complex_expr(&mut rng, &vars)).collect();
            let x: Vec<f64> = (0..4).map(|_| rng.random_range(-2.0..2.0)).collect();
            let direct = v.iter().map(|e| e.eval(&x).norm_sqr()).sum::<f64>().sqrt();
            assert_relative_eq!(embedded_norm(&v, &x), direct, max_relative = 1e-12);
        }
    }

    #[test]
    fn hermitian_embedding_examples() {
        let eye = CMatrix::identity(2, 2);
        assert_eq!(hermitian_to_real_psd(&eye).unwrap(), DMatrix::<f64>::identity(4, 4));

        let j = Complex64::new(0.0, 1.0);
        let pauli = CMatrix::from_row_slice(2, 2, &[Complex64::new(0.0, 0.0), j, -j, Complex64::new(0.0, 0.0)]);
        let mut ev: Vec<f64> = SymmetricEigen::new(hermitian_to_real_psd(&pauli).unwrap())
            .eigenvalues
            .iter()
            .copied()
            .collect();
        ev.sort_by(|a, b| a.partial_cmp(b).unwrap());
        for (a, b) in ev.iter().zip([-1.0, -1.0, 1.0, 1.0]) {
            assert_relative_eq!(*a, b, epsilon = 1e-12);
        }

        let bad = CMatrix::from_row_slice(2, 2, &[Complex64::new(0.0, 0.0), j, j, Complex64::new(0.0, 0.0)]);
        assert!(hermitian_to_real_psd(&bad).is_err());
    }

    #[test]
    fn hermitian_embedding_doubles_spectrum() {
        let mut rng = substream(6, &[]);
        for n in 1..6 {
            let g = CMatrix::from_fn(n, n, |_, _| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
            let h = &g + g.adjoint();
            let mut herm: Vec<f64> = h.clone().symmetric_eigenvalues().iter().copied().collect();
            herm.extend(herm.clone());
            herm.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let mut real: Vec<f64> = SymmetricEigen::new(hermitian_to_real_psd(&h).unwrap())
                .eigenvalues
                .iter()
                .copied()
                .collect();
            real.sort_by(|a, b| a.partial_cmp(b).unwrap());
            for (a, b) in herm.iter().zip(&real) {
                assert_relative_eq!(*a, *b, epsilon = 1e-10);
            }
        }
    }

    #[test]
    fn hermitian_expr_block_matches_numeric_embedding() {
        let mut rng = substream(7, &[]);
        let mut p = ConicProgram::new();
        let vars = p.add_vars(3, "x");
        let n = 3;
        let mut h = HermitianExpr::zeros(n);
        for i in 0..n {
            for j in i..n {
                h.set(i, j, random_complex_expr(&mut rng, &vars));
            }
        }
        p.add_hermitian_psd(&h);
        let x = [0.3, -0.2, 0.9];
        let numeric = hermitian_to_real_psd(&h.eval(&x)).unwrap();
        let Block::Psd { order, upper } = &p.blocks()[0] else { panic!() };
        assert_eq!(unpack_upper(*order, upper, &x), numeric);
    }

    #[test]
    fn empty_program_is_feasible() {
        let mut p = ConicProgram::new();
        p.add_var("x");
        let r = solve(&p, &ClarabelBackend::default()).unwrap();
        assert!(r.is_feasible());
        assert_eq!(r.x, vec![0.0]);
    }

    #[test]
    fn single_bound_minimization() {
        let mut p = ConicProgram::new();
        let x = p.add_var("x");
        p.add_nonneg(LinExpr::from(x) - 1.0);
        p.minimize(x.into());
        let r = solve(&p, &ClarabelBackend::default()).unwrap();
        assert!(r.is_feasible());
        assert_relative_eq!(r.value(x), 1.0, epsilon = 1e-6);
    }

    #[test]
    fn soc_and_psd_solves() {
        // min t s.t. ‖(x−3, y−4)‖ ≤ t with x = y = 0 → t = 5.
        let mut p = ConicProgram::new();
        let (t, x, y) = (p.add_var("t"), p.add_var("x"), p.add_var("y"));
        p.add_soc(t.into(), vec![LinExpr::from(x) - 3.0, LinExpr::from(y) - 4.0]);
        p.add_eq(x.into());
        p.add_eq(y.into());
        p.minimize(t.into());
        let r = solve(&p, &ClarabelBackend::default()).unwrap();
        assert!(r.is_feasible());
        assert_relative_eq!(r.value(t), 5.0, epsilon = 1e-6);

        // min a + c s.t. [[a, 1], [1, c]] ⪰ 0 → 2.
        let mut p = ConicProgram::new();
        let (a, c) = (p.add_var("a"), p.add_var("c"));
        p.add_psd(2, |r, col| match (r, col) {
            (0, 0) => a.into(),
            (1, 1) => c.into(),
            _ => LinExpr::constant(1.0),
        });
        p.minimize(LinExpr::from(a) + c);
        let r = solve(&p, &ClarabelBackend::default()).unwrap();
        assert!(r.is_feasible());
        assert_relative_eq!(r.objective, 2.0, epsilon = 1e-6);
    }

    #[test]
    fn infeasible_program_is_reported() {
        let mut p = ConicProgram::new();
        let x = p.add_var("x");
        p.add_nonneg(LinExpr::from(x) - 2.0);
        p.add_nonneg(LinExpr::constant(1.0) - x);
        let r = solve(&p, &ClarabelBackend::default()).unwrap();
        assert_eq!(r.status, SolveStatus::Infeasible);
    }

    #[test]
    fn undeclared_variable_is_rejected() {
        let mut p = ConicProgram::new();
        p.add_nonneg(LinExpr::term(Var(3), 1.0));
        assert!(matches!(p.validate(), Err(Error::InvalidInput { module: "conic", .. })));
    }

    proptest! {
        #[test]
        fn embedding_is_linear(seed in any::<u64>(), a in -3.0f64..3.0, b in -3.0f64..3.0) {
            let mut rng = substream(seed, &[]);
            let vars: Vec<Var> = (0..3).map(Var).collect();
            let e1 = random_complex_expr(&mut rng, &vars);
            let e2 = random_complex_expr(&mut rng, &vars);
            let x: Vec<f64> = (0..3).map(|_| rng.random_range(-1.0..1.0)).collect();
            let combo = e1.clone().scaled(a) + e2.clone().scaled(b);
            let lhs = complex_soc_embed(&[combo]);
            let r1 = complex_soc_embed(&[e1]);
            let r2 = complex_soc_embed(&[e2]);
            for i in 0..2 {
                let want = a * r1[i].eval(&x) + b * r2[i].eval(&x);
                prop_assert!((lhs[i].eval(&x) - want).abs() <= 1e-12);
            }
        }

        #[test]
        fn feasible_results_pass_recheck(seed in any::<u64>()) {
            // Random bounded SOC program: min cᵀx s.t. ‖x − x₀‖ ≤ 1.
            let mut rng = substream(seed, &[]);
            let mut p = ConicProgram::new();
            let xs = p.add_vars(4, "x");
            let tail = xs.iter().map(|&v| LinExpr::from(v) - rng.random_range(-1.0..1.0)).collect();
            p.add_soc(LinExpr::constant(1.0), tail);
            let mut obj = LinExpr::zero();
            for &v in &xs {
                obj.add_term(v, rng.random_range(-1.0..1.0));
            }
            p.minimize(obj);
            let r = solve(&p, &ClarabelBackend::default()).unwrap();
            if r.is_feasible() {
                prop_assert!(p.residuals(&r.x) <= FEASIBILITY_TOL);
            }
        }
    }
}
