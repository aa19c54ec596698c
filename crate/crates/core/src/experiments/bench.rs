use std::time::Duration;

use crate::conic::ConicBackend;
use crate::error::{Error, Result};
use crate::par::Execution;

use super::sweep::{mean, run_trial, Method, ResultRow, RowStatus, Scenario, SweptParameter};

#[derive(Debug, Clone, PartialEq)]
pub struct BenchSpec {
    pub methods: Vec<Method>,
    pub antennas: Vec<usize>,
    /// Timed runs per (method, T), after one untimed warm-up.
    pub trials: usize,
    pub seed: u64,
    /// Runs longer than this are reported as `timeout` and end the
    /// measurement for that (method, T).
    pub time_budget: Option<Duration>,
}

impl BenchSpec {
    pub fn new(methods: Vec<Method>, antennas: Vec<usize>) -> Self {
        Self {
            methods,
            antennas,
            trials: 5,
            seed: 0,
            time_budget: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.methods.is_empty() || self.antennas.is_empty() {
            return Err(Error::invalid("experiments", "bench needs at least one method and one antenna count"));
        }
        if self.trials == 0 {
            return Err(Error::invalid("experiments", "bench.trials must be at least 1"));
        }
        Ok(())
    }
}

/// Mean full-bisection wall time for one (method, T).
#[derive(Debug, Clone, PartialEq)]
pub struct BenchSummary {
    pub method: Method,
    pub antennas: usize,
    pub mean_seconds: f64,
    pub runs: usize,
    pub status: RowStatus,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchReport {
    pub rows: Vec<ResultRow>,
    pub summary: Vec<BenchSummary>,
}

/// Times each method separately, sequentially, with one warm-up solve per
/// (method, T) that is not recorded.
pub fn benchmark_runtime(spec: &BenchSpec, base: &Scenario, backend: &dyn ConicBackend) -> Result<BenchReport> {
    spec.validate()?;
    let mut rows = Vec::new();
    let mut summary = Vec::new();
    for &t in &spec.antennas {
        let scenario = base.with_value(SweptParameter::Antennas, t as f64)?;
        scenario.validate()?;
        for &method in &spec.methods {
            let run = |trial: usize| {
                run_trial(&scenario, &[method], trial, 0, 0, spec.seed, true, Execution::Sequential, backend)
                    .pop()
                    .expect("one row per method")
            };
            let warm = run(0);
            let mut times = Vec::new();
            let mut status = match warm.status {
                RowStatus::Error(_) => warm.status.clone(),
                _ => RowStatus::Ok,
            };
            if status == RowStatus::Ok {
                for trial in 0..spec.trials {
                    let mut row = run(trial);
                    let ms = row.runtime_ms.unwrap_or(f64::NAN);
                    let over = spec.time_budget.is_some_and(|b| ms > b.as_secs_f64() * 1e3);
                    if over {
                        row.status = RowStatus::Timeout;
                        status = RowStatus::Timeout;
                    } else if let RowStatus::Error(_) = row.status {
                        status = row.status.clone();
                    } else {
                        times.push(ms / 1e3);
                    }
                    rows.push(row);
                    if status != RowStatus::Ok {
                        break;
                    }
                }
            } else {
                rows.push(warm);
            }
            summary.push(BenchSummary {
                method,
                antennas: t,
                mean_seconds: mean(&times),
                runs: times.len(),
                status,
            });
        }
    }
    Ok(BenchReport { rows, summary })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::conic::ClarabelBackend;

    #[test]
    fn one_method_one_row_per_antenna_count() {
        let mut spec = BenchSpec::new(vec![Method::Socp], vec![4, 6]);
        spec.trials = 1;
        let rep = benchmark_runtime(&spec, &Scenario::default(), &ClarabelBackend::default()).unwrap();
        assert_eq!(rep.summary.len(), 2);
        assert_eq!(rep.rows.len(), 2);
        assert!(rep.summary.iter().all(|s| s.status == RowStatus::Ok && s.mean_seconds > 0.0));
        assert!(rep.rows.iter().all(|r| r.runtime_ms.is_some()));
    }

    #[test]
    fn budget_overrun_is_a_timeout() {
        let mut spec = BenchSpec::new(vec![Method::Socp], vec![4]);
        spec.trials = 2;
        spec.time_budget = Some(Duration::ZERO);
        let rep = benchmark_runtime(&spec, &Scenario::default(), &ClarabelBackend::default()).unwrap();
        assert_eq!(rep.summary[0].status, RowStatus::Timeout);
        assert_eq!(rep.rows.len(), 1);
    }
}
