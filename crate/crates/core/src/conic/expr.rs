//! Affine expressions over real decision variables.

use std::ops::{Add, AddAssign, Mul, Neg, Sub, SubAssign};

use num_complex::Complex64;

/// Handle to a declared scalar variable.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Var(pub(crate) usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

/// `Σ cᵢ xᵢ + c₀`. Terms are kept unsorted; duplicates are merged on export.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LinExpr {
    pub(crate) terms: Vec<(usize, f64)>,
    pub(crate) constant: f64,
}

impl LinExpr {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn constant(c: f64) -> Self {
        Self {
            terms: Vec::new(),
            constant: c,
        }
    }

    pub fn term(v: Var, coef: f64) -> Self {
        Self {
            terms: vec![(v.0, coef)],
            constant: 0.0,
        }
    }

    pub fn add_term(&mut self, v: Var, coef: f64) {
        if coef != 0.0 {
            self.terms.push((v.0, coef));
        }
    }

    pub fn constant_part(&self) -> f64 {
        self.constant
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.terms.iter().map(|&(i, c)| c * x[i]).sum::<f64>() + self.constant
    }

    pub(crate) fn max_var(&self) -> Option<usize> {
        self.terms.iter().map(|&(i, _)| i).max()
    }

    /// Terms with duplicates summed and zeros removed, sorted by variable.
    pub fn compact(&self) -> Vec<(usize, f64)> {
        let mut t = self.terms.clone();
        t.sort_by_key(|&(i, _)| i);
        let mut out: Vec<(usize, f64)> = Vec::with_capacity(t.len());
        for (i, c) in t {
            match out.last_mut() {
                Some((j, acc)) if *j == i => *acc += c,
                _ => out.push((i, c)),
            }
        }
        out.retain(|&(_, c)| c != 0.0);
        out
    }

    /// Same expression with duplicate terms merged.
    pub fn compacted(&self) -> Self {
        Self {
            terms: self.compact(),
            constant: self.constant,
        }
    }

    pub fn scaled(mut self, s: f64) -> Self {
        for (_, c) in &mut self.terms {
            *c *= s;
        }
        self.constant *= s;
        self
    }
}

impl From<Var> for LinExpr {
    fn from(v: Var) -> Self {
        LinExpr::term(v, 1.0)
    }
}

impl From<f64> for LinExpr {
    fn from(c: f64) -> Self {
        LinExpr::constant(c)
    }
}

impl AddAssign<&LinExpr> for LinExpr {
    fn add_assign(&mut self, rhs: &LinExpr) {
        self.terms.extend_from_slice(&rhs.terms);
        self.constant += rhs.constant;
    }
}

impl AddAssign for LinExpr {
    fn add_assign(&mut self, rhs: LinExpr) {
        *self += &rhs;
    }
}

impl SubAssign<&LinExpr> for LinExpr {
    fn sub_assign(&mut self, rhs: &LinExpr) {
        self.terms.extend(rhs.terms.iter().map(|&(i, c)| (i, -c)));
        self.constant -= rhs.constant;
    }
}

impl SubAssign for LinExpr {
    fn sub_assign(&mut self, rhs: LinExpr) {
        *self -= &rhs;
    }
}

impl<T: Into<LinExpr>> Add<T> for LinExpr {
    type Output = LinExpr;
    fn add(mut self, rhs: T) -> LinExpr {
        self += rhs.into();
        self
    }
}

impl<T: Into<LinExpr>> Sub<T> for LinExpr {
    type Output = LinExpr;
    fn sub(mut self, rhs: T) -> LinExpr {
        self -= rhs.into();
        self
    }
}

impl Mul<f64> for LinExpr {
    type Output = LinExpr;
    fn mul(self, s: f64) -> LinExpr {
        self.scaled(s)
    }
}

impl Mul<LinExpr> for f64 {
    type Output = LinExpr;
    fn mul(self, e: LinExpr) -> LinExpr {
        e.scaled(self)
    }
}

impl Neg for LinExpr {
    type Output = LinExpr;
    fn neg(self) -> LinExpr {
        self.scaled(-1.0)
    }
}

/// Complex affine expression `re + j·im`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ComplexExpr {
    pub re: LinExpr,
    pub im: LinExpr,
}

impl ComplexExpr {
    pub fn new(re: LinExpr, im: LinExpr) -> Self {
        Self { re, im }
    }

    pub fn constant(z: Complex64) -> Self {
        Self::new(LinExpr::constant(z.re), LinExpr::constant(z.im))
    }

    /// `self += c · (x_re + j x_im)`.
    pub fn add_scaled(&mut self, c: Complex64, x_re: Var, x_im: Var) {
        self.re.add_term(x_re, c.re);
        self.re.add_term(x_im, -c.im);
        self.im.add_term(x_re, c.im);
        self.im.add_term(x_im, c.re);
    }

    /// `self += c · e` for a complex expression `e`.
    pub fn add_scaled_expr(&mut self, c: Complex64, e: &ComplexExpr) {
        self.re += e.re.clone() * c.re - e.im.clone() * c.im;
        self.im += e.re.clone() * c.im + e.im.clone() * c.re;
    }

    pub fn eval(&self, x: &[f64]) -> Complex64 {
        Complex64::new(self.re.eval(x), self.im.eval(x))
    }

    pub fn scaled(self, s: f64) -> Self {
        Self::new(self.re * s, self.im * s)
    }
}

impl Add for ComplexExpr {
    type Output = ComplexExpr;
    fn add(self, rhs: ComplexExpr) -> ComplexExpr {
        ComplexExpr::new(self.re + rhs.re, self.im + rhs.im)
    }
}

impl Sub for ComplexExpr {
    type Output = ComplexExpr;
    fn sub(self, rhs: ComplexExpr) -> ComplexExpr {
        ComplexExpr::new(self.re - rhs.re, self.im - rhs.im)
    }
}

/// Hermitian matrix of affine expressions, stored entrywise.
///
/// Only the upper triangle is read when the matrix enters a PSD block; the
/// lower triangle is kept consistent by the setters.
#[derive(Debug, Clone, PartialEq)]
pub struct HermitianExpr {
    order: usize,
    entries: Vec<ComplexExpr>,
}

impl HermitianExpr {
    pub fn zeros(order: usize) -> Self {
        Self {
            order,
            entries: vec![ComplexExpr::default(); order * order],
        }
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn get(&self, i: usize, j: usize) -> &ComplexExpr {
        &self.entries[i * self.order + j]
    }

    /// Sets `(i, j)` and its conjugate mirror `(j, i)`. Diagonal entries keep
    /// only the real part.
    pub fn set(&mut self, i: usize, j: usize, e: ComplexExpr) {
        if i == j {
            self.entries[i * self.order + i] = ComplexExpr::new(e.re, LinExpr::zero());
        } else {
            let mirror = ComplexExpr::new(e.re.clone(), -e.im.clone());
            self.entries[i * self.order + j] = e;
            self.entries[j * self.order + i] = mirror;
        }
    }

    /// Adds a real expression to diagonal entry `i`.
    pub fn add_diag(&mut self, i: usize, e: &LinExpr) {
        self.entries[i * self.order + i].re += e;
    }

    /// `self += c · other`.
    pub fn add_scaled(&mut self, c: f64, other: &HermitianExpr) {
        assert_eq!(self.order, other.order, "hermitian order mismatch");
        for (a, b) in self.entries.iter_mut().zip(&other.entries) {
            a.re += b.re.clone() * c;
            a.im += b.im.clone() * c;
        }
    }

    /// `G X Gᴴ` for a numeric `G` with `order` columns.
    pub fn congruence(&self, g: &crate::model::CMatrix) -> HermitianExpr {
        assert_eq!(g.ncols(), self.order, "congruence dimension mismatch");
        let n = g.nrows();
        let mut out = HermitianExpr::zeros(n);
        for i in 0..n {
            for j in i..n {
                let mut e = ComplexExpr::default();
                for s in 0..self.order {
                    for t in 0..self.order {
                        let c = g[(i, s)] * g[(j, t)].conj();
                        if c != Complex64::new(0.0, 0.0) {
                            e.add_scaled_expr(c, self.get(s, t));
                        }
                    }
                }
                out.set(i, j, ComplexExpr::new(e.re.compacted(), e.im.compacted()));
            }
        }
        out
    }

    pub fn eval(&self, x: &[f64]) -> crate::model::CMatrix {
        crate::model::CMatrix::from_fn(self.order, self.order, |i, j| self.get(i, j).eval(x))
    }
}
