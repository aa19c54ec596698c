use std::fmt;
use std::str::FromStr;
use std::time::{Duration, Instant};

use crate::balancing::{balance_nonrobust, Bisection, BisectionConfig, UpperBound};
use crate::baselines::zf_balance;
use crate::conic::{ConicBackend, SolveStatus};
use crate::error::{Error, Result};
use crate::model::{db_to_linear, linear_to_db, BeamformerSet, ChannelSet, NetworkConfig};
use crate::par::{map_indexed, Execution};
use crate::rng::substream;
use crate::robust_sdp::balance_sdp;
use crate::robust_socp::{balance_socp, SocpOptions};
use crate::uncertainty::{NormKind, UncertaintySet};

use super::layout::{generate_channels, LayoutConfig};
use super::pe::PeEstimator;

const MODULE: &str = "experiments";

/// Substream tags; channel draws are shared by every method and swept value
/// with the same antenna count.
const TAG_CHANNEL: u64 = 1;
const TAG_PE: u64 = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    NonRobust,
    Sdp,
    Socp,
    Zf,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::NonRobust, Method::Sdp, Method::Socp, Method::Zf];

    pub fn name(self) -> &'static str {
        match self {
            Method::NonRobust => "nonrobust",
            Method::Sdp => "sdp",
            Method::Socp => "socp",
            Method::Zf => "zf",
        }
    }

    pub fn is_robust(self) -> bool {
        matches!(self, Method::Sdp | Method::Socp)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::invalid(MODULE, format!("unknown method `{s}` (expected nonrobust, sdp, socp or zf)")))
    }
}

/// Everything needed to build one problem instance apart from the channel draw.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub num_cells: usize,
    pub users_per_cell: usize,
    pub antennas: usize,
    pub power_db: f64,
    pub noise_var: f64,
    /// Per-user `α_k`; all ones when `None`.
    pub weights: Option<Vec<f64>>,
    pub layout: LayoutConfig,
    pub norm: NormKind,
    pub rho: f64,
    /// `ρ' = ρ / design_divisor` for the SOC approximation.
    pub design_divisor: f64,
    pub bisection: BisectionConfig,
    pub socp: SocpOptions,
}

impl Default for Scenario {
    fn default() -> Self {
        Self {
            num_cells: 2,
            users_per_cell: 2,
            antennas: 8,
            power_db: 5.0,
            noise_var: 1.0,
            weights: None,
            layout: LayoutConfig::default(),
            norm: NormKind::L2,
            rho: 0.4,
            design_divisor: 1.0,
            bisection: BisectionConfig::default(),
            socp: SocpOptions::default(),
        }
    }
}

impl Scenario {
    pub fn network(&self) -> Result<NetworkConfig> {
        let cfg = NetworkConfig::symmetric(
            self.num_cells,
            self.users_per_cell,
            self.antennas,
            db_to_linear(self.power_db),
            self.noise_var,
        )?;
        match &self.weights {
            None => Ok(cfg),
            Some(w) => {
                let sets = (0..cfg.num_cells()).map(|b| cfg.users_of(b).to_vec()).collect();
                let power = (0..cfg.num_cells()).map(|b| cfg.power(b)).collect();
                NetworkConfig::new(self.antennas, sets, power, self.noise_var, w.clone())
            }
        }
    }

    pub fn uncertainty(&self) -> Result<UncertaintySet> {
        UncertaintySet::identity(
            self.norm,
            self.rho,
            self.design_divisor,
            self.num_cells,
            self.num_cells * self.users_per_cell,
            self.antennas,
        )
    }

    pub fn validate(&self) -> Result<()> {
        self.network()?;
        self.uncertainty()?;
        self.layout.validate()?;
        self.bisection.validate()
    }

    /// Copy with the swept parameter set to `value`.
    pub fn with_value(&self, param: SweptParameter, value: f64) -> Result<Self> {
        let mut s = self.clone();
        match param {
            SweptParameter::Rho => s.rho = value,
            SweptParameter::PowerDb => s.power_db = value,
            SweptParameter::Antennas => {
                if !(value >= 1.0) || value.fract() != 0.0 {
                    return Err(Error::invalid(MODULE, format!("antenna count must be a positive integer, got {value}")));
                }
                s.antennas = value as usize;
            }
        }
        Ok(s)
    }

    /// Design radius reported for `method`.
    pub fn rho_prime(&self, method: Method) -> f64 {
        match method {
            Method::Socp => self.rho / self.design_divisor,
            Method::Sdp => self.rho,
            Method::NonRobust | Method::Zf => 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RowStatus {
    Ok,
    Infeasible,
    Unknown,
    /// SDP solution with a covariance too far from rank one.
    RelaxationLoose,
    Timeout,
    Error(String),
}

impl fmt::Display for RowStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RowStatus::Ok => f.write_str("ok"),
            RowStatus::Infeasible => f.write_str("infeasible"),
            RowStatus::Unknown => f.write_str("unknown"),
            RowStatus::RelaxationLoose => f.write_str("relaxation-loose"),
            RowStatus::Timeout => f.write_str("timeout"),
            RowStatus::Error(m) => write!(f, "error: {m}"),
        }
    }
}

/// Result of running one method on one channel draw.
#[derive(Debug, Clone)]
pub struct MethodOutcome {
    pub t_star: f64,
    pub beams: Option<BeamformerSet>,
    pub iterations: usize,
    pub status: RowStatus,
    pub wall_time: Duration,
    /// Smallest rank-one ratio, SDP only.
    pub rank1: Option<f64>,
}

fn bisection_status<W>(b: &Bisection<W>) -> RowStatus {
    if b.found_feasible {
        RowStatus::Ok
    } else if b.history.iter().any(|&(_, s)| s == SolveStatus::Unknown) {
        RowStatus::Unknown
    } else {
        RowStatus::Infeasible
    }
}

/// Runs `method` on a fixed draw. Robust methods with `Auto` upper bound
/// bracket with the perfect-CSI design unless `nonrobust_upper` supplies it.
pub fn solve_method(
    method: Method,
    channels: &ChannelSet,
    scenario: &Scenario,
    nonrobust_upper: Option<f64>,
    backend: &dyn ConicBackend,
) -> Result<MethodOutcome> {
    let cfg = scenario.network()?;
    let mut bis = scenario.bisection;
    if let (UpperBound::Auto, Some(v), true) = (bis.t_hi, nonrobust_upper, method.is_robust()) {
        if v > bis.t_lo {
            bis.t_hi = UpperBound::Value(v);
        }
    }
    let start = Instant::now();
    let out = match method {
        Method::NonRobust => {
            let r = balance_nonrobust(channels, &cfg, &bis, backend)?;
            MethodOutcome {
                t_star: r.t_star,
                iterations: r.iterations,
                status: bisection_status(&r),
                beams: r.witness,
                wall_time: Duration::ZERO,
                rank1: None,
            }
        }
        Method::Socp => {
            let set = scenario.uncertainty()?;
            let r = balance_socp(channels, &cfg, &set, &bis, &scenario.socp, backend)?;
            MethodOutcome {
                t_star: r.t_star,
                iterations: r.iterations,
                status: bisection_status(&r),
                beams: r.witness.map(|w| w.beams),
                wall_time: Duration::ZERO,
                rank1: None,
            }
        }
        Method::Sdp => {
            let set = scenario.uncertainty()?;
            let r = balance_sdp(channels, &cfg, &set, &bis, backend)?;
            let mut status = bisection_status(&r);
            let rank1 = r.witness.as_ref().map(|w| w.min_rank1_ratio());
            if r.witness.as_ref().is_some_and(|w| w.is_loose()) {
                status = RowStatus::RelaxationLoose;
            }
            MethodOutcome {
                t_star: r.t_star,
                iterations: r.iterations,
                status,
                beams: r.witness.map(|w| w.beams),
                wall_time: Duration::ZERO,
                rank1,
            }
        }
        Method::Zf => {
            let r = zf_balance(channels, &cfg, backend)?;
            MethodOutcome {
                t_star: r.t_star,
                iterations: 0,
                status: RowStatus::Ok,
                beams: Some(r.beams),
                wall_time: Duration::ZERO,
                rank1: None,
            }
        }
    };
    Ok(MethodOutcome {
        wall_time: start.elapsed(),
        ..out
    })
}

/// Channel draw for `trial`, keyed by the antenna count so that sweeps over
/// other parameters reuse the same realisations.
pub fn trial_channels(scenario: &Scenario, seed: u64, trial: usize) -> Result<ChannelSet> {
    let cfg = scenario.network()?;
    let mut rng = substream(seed, &[TAG_CHANNEL, trial as u64, scenario.antennas as u64]);
    generate_channels(&scenario.layout, &cfg, &mut rng)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweptParameter {
    Rho,
    PowerDb,
    Antennas,
}

impl SweptParameter {
    pub fn name(self) -> &'static str {
        match self {
            SweptParameter::Rho => "rho",
            SweptParameter::PowerDb => "power_db",
            SweptParameter::Antennas => "antennas",
        }
    }
}

impl FromStr for SweptParameter {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "rho" => Ok(SweptParameter::Rho),
            "power_db" => Ok(SweptParameter::PowerDb),
            "antennas" => Ok(SweptParameter::Antennas),
            _ => Err(Error::invalid(MODULE, format!("unknown swept parameter `{s}` (expected rho, power_db or antennas)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub parameter: SweptParameter,
    pub values: Vec<f64>,
    pub methods: Vec<Method>,
    pub trials: usize,
    /// Zero skips PE estimation.
    pub pe_samples: usize,
    pub seed: u64,
    /// Record wall times in the output rows.
    pub timings: bool,
    pub execution: Execution,
}

impl SweepSpec {
    pub fn new(parameter: SweptParameter, values: Vec<f64>, methods: Vec<Method>) -> Self {
        Self {
            parameter,
            values,
            methods,
            trials: 200,
            pe_samples: 10_000,
            seed: 0,
            timings: false,
            execution: Execution::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.values.is_empty() {
            return Err(Error::invalid(MODULE, "sweep.values must not be empty"));
        }
        if self.methods.is_empty() {
            return Err(Error::invalid(MODULE, "sweep.methods must not be empty"));
        }
        if self.trials == 0 {
            return Err(Error::invalid(MODULE, "sweep.trials must be at least 1"));
        }
        Ok(())
    }
}

/// One output record: a (value, method, trial) triple.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub method: Method,
    pub norm: NormKind,
    pub rho: f64,
    pub rho_prime: f64,
    pub power_db: f64,
    pub num_cells: usize,
    pub num_users: usize,
    pub antennas: usize,
    pub trial: usize,
    pub t_star: Option<f64>,
    pub pe: Option<f64>,
    pub runtime_ms: Option<f64>,
    pub iterations: Option<usize>,
    pub status: RowStatus,
    pub seed: u64,
}

impl ResultRow {
    fn skeleton(method: Method, scenario: &Scenario, trial: usize, seed: u64) -> Self {
        Self {
            method,
            norm: scenario.norm,
            rho: scenario.rho,
            rho_prime: scenario.rho_prime(method),
            power_db: scenario.power_db,
            num_cells: scenario.num_cells,
            num_users: scenario.num_cells * scenario.users_per_cell,
            antennas: scenario.antennas,
            trial,
            t_star: None,
            pe: None,
            runtime_ms: None,
            iterations: None,
            status: RowStatus::Unknown,
            seed,
        }
    }

    pub fn t_star_db(&self) -> Option<f64> {
        self.t_star.map(linear_to_db)
    }
}

/// Runs every method on one channel draw and returns one row per method.
/// Failures become status rows.
#[allow(clippy::too_many_arguments)]
pub fn run_trial(
    scenario: &Scenario,
    methods: &[Method],
    trial: usize,
    value_index: usize,
    pe_samples: usize,
    seed: u64,
    timings: bool,
    execution: Execution,
    backend: &dyn ConicBackend,
) -> Vec<ResultRow> {
    let mut rows: Vec<ResultRow> = methods.iter().map(|&m| ResultRow::skeleton(m, scenario, trial, seed)).collect();
    let fail_all = |rows: &mut Vec<ResultRow>, e: &Error| {
        for r in rows.iter_mut() {
            r.status = RowStatus::Error(e.to_string());
        }
    };
    let (cfg, set, channels) = match (scenario.network(), scenario.uncertainty(), trial_channels(scenario, seed, trial)) {
        (Ok(c), Ok(s), Ok(h)) => (c, s, h),
        (Err(e), _, _) | (_, Err(e), _) | (_, _, Err(e)) => {
            fail_all(&mut rows, &e);
            return rows;
        }
    };
    let upper = if methods.iter().any(|m| m.is_robust()) && scenario.bisection.t_hi == UpperBound::Auto {
        balance_nonrobust(&channels, &cfg, &scenario.bisection, backend).ok().map(|b| b.t_upper)
    } else {
        None
    };
    for (mi, row) in rows.iter_mut().enumerate() {
        let outcome = match solve_method(row.method, &channels, scenario, upper, backend) {
            Ok(o) => o,
            Err(e) => {
                row.status = RowStatus::Error(e.to_string());
                continue;
            }
        };
        row.t_star = Some(outcome.t_star);
        row.iterations = Some(outcome.iterations);
        row.runtime_ms = timings.then_some(outcome.wall_time.as_secs_f64() * 1e3);
        row.status = outcome.status;
        if let (Some(beams), true) = (&outcome.beams, pe_samples > 0) {
            let est = PeEstimator {
                samples: pe_samples,
                seed: crate::rng::derive_seed(seed, &[TAG_PE, trial as u64, value_index as u64, mi as u64]),
                execution,
            };
            match est.estimate(beams, outcome.t_star, &set, &channels, &cfg) {
                Ok(p) => row.pe = Some(p),
                Err(e) => row.status = RowStatus::Error(e.to_string()),
            }
        }
    }
    rows
}

/// Executes the sweep; rows are ordered by value, then trial, then method.
pub fn run_sweep(spec: &SweepSpec, base: &Scenario, backend: &dyn ConicBackend) -> Result<Vec<ResultRow>> {
    spec.validate()?;
    let scenarios = spec
        .values
        .iter()
        .map(|&v| base.with_value(spec.parameter, v))
        .collect::<Result<Vec<_>>>()?;
    let jobs = scenarios.len() * spec.trials;
    let per_job = map_indexed(jobs, spec.execution, |j| {
        let (vi, trial) = (j / spec.trials, j % spec.trials);
        run_trial(
            &scenarios[vi],
            &spec.methods,
            trial,
            vi,
            spec.pe_samples,
            spec.seed,
            spec.timings,
            spec.execution,
            backend,
        )
    });
    Ok(per_job.into_iter().flatten().collect())
}

/// Mean `t*` and PE per (method, swept value) over rows with a result.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub method: Method,
    pub value: f64,
    pub mean_t_star: f64,
    pub mean_pe: Option<f64>,
    pub solved: usize,
    pub trials: usize,
}

pub fn summarize(spec: &SweepSpec, rows: &[ResultRow]) -> Vec<SummaryRow> {
    let per_value = spec.trials * spec.methods.len();
    let mut out = Vec::new();
    for (vi, &value) in spec.values.iter().enumerate() {
        let chunk = &rows[vi * per_value..((vi + 1) * per_value).min(rows.len())];
        for &method in &spec.methods {
            let sel: Vec<&ResultRow> = chunk.iter().filter(|r| r.method == method).collect();
            let t: Vec<f64> = sel.iter().filter_map(|r| r.t_star).collect();
            let pe: Vec<f64> = sel.iter().filter_map(|r| r.pe).collect();
            out.push(SummaryRow {
                method,
                value,
                mean_t_star: mean(&t),
                mean_pe: (!pe.is_empty()).then(|| mean(&pe)),
                solved: t.len(),
                trials: sel.len(),
            });
        }
    }
    out
}

pub(crate) fn mean(x: &[f64]) -> f64 {
    if x.is_empty() {
        f64::NAN
    } else {
        x.iter().sum::<f64>() / x.len() as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::conic::ClarabelBackend;

    #[test]
    fn method_names_round_trip() {
        for m in Method::ALL {
            assert_eq!(m.name().parse::<Method>().unwrap(), m);
        }
        assert!("magic".parse::<Method>().is_err());
    }

    #[test]
    fn two_values_one_trial_gives_two_rows() {
        let mut spec = SweepSpec::new(SweptParameter::Rho, vec![0.1, 0.2], vec![Method::Socp]);
        spec.trials = 1;
        spec.pe_samples = 50;
        let rows = run_sweep(&spec, &Scenario::default(), &ClarabelBackend::default()).unwrap();
        assert_eq!(rows.len(), 2);
        assert_eq!(rows[0].rho, 0.1);
        assert_eq!(rows[1].rho, 0.2);
        assert!(rows.iter().all(|r| r.status == RowStatus::Ok && r.runtime_ms.is_none()));
    }

    #[test]
    fn failures_become_rows() {
        let base = Scenario {
            norm: NormKind::Linf,
            ..Scenario::default()
        };
        let mut spec = SweepSpec::new(SweptParameter::Rho, vec![0.1], vec![Method::Sdp, Method::Socp]);
        spec.trials = 1;
        spec.pe_samples = 0;
        let rows = run_sweep(&spec, &base, &ClarabelBackend::default()).unwrap();
        assert!(matches!(rows[0].status, RowStatus::Error(ref m) if m.contains("unsupported uncertainty")));
        assert_eq!(rows[1].status, RowStatus::Ok);
    }

    #[test]
    fn rejects_empty_sweeps() {
        let spec = SweepSpec::new(SweptParameter::Rho, vec![], vec![Method::Socp]);
        assert!(run_sweep(&spec, &Scenario::default(), &ClarabelBackend::default()).is_err());
        assert!(Scenario::default().with_value(SweptParameter::Antennas, 2.5).is_err());
    }

    #[test]
    fn parallel_matches_sequential() {
        let mut spec = SweepSpec::new(SweptParameter::Rho, vec![0.2, 0.4], vec![Method::NonRobust, Method::Socp]);
        spec.trials = 2;
        spec.pe_samples = 100;
        spec.seed = 17;
        let be = ClarabelBackend::default();
        spec.execution = Execution::Sequential;
        let a = run_sweep(&spec, &Scenario::default(), &be).unwrap();
        spec.execution = Execution::Parallel;
        let b = run_sweep(&spec, &Scenario::default(), &be).unwrap();
        assert_eq!(a, b);
        let summary = summarize(&spec, &a);
        assert_eq!(summary.len(), 4);
        let socp: Vec<f64> = summary.iter().filter(|s| s.method == Method::Socp).map(|s| s.mean_t_star).collect();
        assert!(socp[0] >= socp[1] - 1e-2);
    }
}
