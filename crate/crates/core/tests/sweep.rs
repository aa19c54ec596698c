use robustbf::conic::ClarabelBackend;
use robustbf::experiments::{run_sweep, summarize, write_csv, Method, RowStatus, Scenario, SweepSpec, SweptParameter};
use robustbf::par::Execution;

fn spec(exec: Execution) -> SweepSpec {
    SweepSpec {
        trials: 3,
        pe_samples: 400,
        seed: 42,
        execution: exec,
        ..SweepSpec::new(SweptParameter::Rho, vec![0.1, 0.5], vec![Method::NonRobust, Method::Socp])
    }
}

fn small() -> Scenario {
    Scenario {
        antennas: 4,
        ..Scenario::default()
    }
}

fn csv(exec: Execution) -> Vec<u8> {
    let rows = run_sweep(&spec(exec), &small(), &ClarabelBackend::default()).unwrap();
    let mut buf = Vec::new();
    write_csv(&mut buf, &rows).unwrap();
    buf
}

#[test]
fn execution_modes_write_identical_csv() {
    assert_eq!(csv(Execution::Sequential), csv(Execution::Parallel));
}

#[test]
fn robust_rows_dominate_on_pe() {
    let s = spec(Execution::default());
    let rows = run_sweep(&s, &small(), &ClarabelBackend::default()).unwrap();
    assert_eq!(rows.len(), 2 * 3 * 2);
    assert!(rows.iter().all(|r| r.status == RowStatus::Ok));
    let summary = summarize(&s, &rows);
    for v in [0.1, 0.5] {
        let get = |m| summary.iter().find(|r| r.value == v && r.method == m).unwrap();
        let (nr, so) = (get(Method::NonRobust), get(Method::Socp));
        assert!(so.mean_t_star < nr.mean_t_star);
        assert!(so.mean_pe.unwrap() > nr.mean_pe.unwrap());
    }
}
