use clarabel::algebra::CscMatrix;
use clarabel::solver::{
    DefaultSettingsBuilder, DefaultSolver, IPSolver, SolverStatus, SupportedConeT,
};

use super::{Cone, SolveStatus, StandardForm};

#[derive(Debug, Clone, PartialEq)]
pub struct BackendOutput {
    pub status: SolveStatus,
    pub x: Vec<f64>,
    pub iterations: u32,
    pub detail: String,
}

/// In-process solver contract. Implementations hold no per-solve state, so a
/// handle may be shared by concurrent solves.
pub trait ConicBackend: Send + Sync {
    fn name(&self) -> &'static str;
    fn submit(&self, sf: &StandardForm) -> BackendOutput;
}

/// Interior-point backend built on the `clarabel` crate.
#[derive(Debug, Clone, PartialEq)]
pub struct ClarabelBackend {
    pub max_iter: u32,
    /// Seconds; `f64::INFINITY` disables the limit.
    pub time_limit: f64,
    pub chordal_decomposition: bool,
    /// Clarabel feasibility and duality-gap tolerances. Kept one decade
    /// below [`super::FEASIBILITY_TOL`] so accepted points pass the re-check.
    pub tol_feas: f64,
    pub tol_gap: f64,
    /// Sparse factorisation used for the KKT system (`"faer"` or `"qdldl"`).
    pub direct_solve_method: &'static str,
}

impl Default for ClarabelBackend {
    fn default() -> Self {
        Self {
            max_iter: 200,
            time_limit: f64::INFINITY,
            chordal_decomposition: true,
            tol_feas: 1e-6,
            tol_gap: 1e-6,
            direct_solve_method: "faer",
        }
    }
}

impl ConicBackend for ClarabelBackend {
    fn name(&self) -> &'static str {
        "clarabel"
    }

    fn submit(&self, sf: &StandardForm) -> BackendOutput {
        let n = sf.num_vars;
        let m = sf.num_rows();
        let p = CscMatrix::<f64>::zeros((n, n));
        let a = CscMatrix::new_from_triplets(m, n, sf.rows.clone(), sf.cols.clone(), sf.vals.clone());
        let cones: Vec<SupportedConeT<f64>> = sf
            .cones
            .iter()
            .map(|c| match *c {
                Cone::Zero(k) => SupportedConeT::ZeroConeT(k),
                Cone::Nonneg(k) => SupportedConeT::NonnegativeConeT(k),
                Cone::Soc(k) => SupportedConeT::SecondOrderConeT(k),
                Cone::PsdTriangle(k) => SupportedConeT::PSDTriangleConeT(k),
            })
            .collect();
        let settings = match DefaultSettingsBuilder::default()
            .verbose(false)
            .max_iter(self.max_iter)
            .time_limit(self.time_limit)
            .max_threads(1)
            .direct_solve_method(self.direct_solve_method.to_string())
            .chordal_decomposition_enable(self.chordal_decomposition)
            .tol_feas(self.tol_feas)
            .tol_gap_abs(self.tol_gap)
            .tol_gap_rel(self.tol_gap)
            .build()
        {
            Ok(s) => s,
            Err(e) => return failure(format!("settings: {e}")),
        };
        let mut solver = match DefaultSolver::new(&p, &sf.q, &a, &sf.b, &cones, settings) {
            Ok(s) => s,
            Err(e) => return failure(format!("setup: {e}")),
        };
        solver.solve();
        let sol = &solver.solution;
        let status = match sol.status {
            SolverStatus::Solved => SolveStatus::Feasible,
            SolverStatus::PrimalInfeasible => SolveStatus::Infeasible,
            _ => SolveStatus::Unknown,
        };
        BackendOutput {
            status,
            x: sol.x.clone(),
            iterations: sol.iterations,
            detail: format!("{:?}", sol.status),
        }
    }
}

fn failure(detail: String) -> BackendOutput {
    BackendOutput {
        status: SolveStatus::Unknown,
        x: Vec::new(),
        iterations: 0,
        detail,
    }
}
