use std::io::Write;

use crate::error::{Error, Result};

use super::sweep::ResultRow;

pub const CSV_HEADER: [&str; 16] = [
    "method",
    "norm",
    "rho",
    "rho_prime",
    "power_db",
    "B",
    "K",
    "T",
    "trial",
    "t_star",
    "t_star_db",
    "pe",
    "runtime_ms",
    "iterations",
    "status",
    "seed",
];

/// C-style `%.9g`.
pub fn format_g9(x: f64) -> String {
    const P: i32 = 9;
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return if x.is_sign_negative() { "-0".into() } else { "0".into() };
    }
    let sci = format!("{:.*e}", (P - 1) as usize, x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent form");
    let exp: i32 = exp.parse().expect("integer exponent");
    if !(-4..P).contains(&exp) {
        let m = trim_zeros(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{m}e{sign}{:02}", exp.abs())
    } else {
        trim_zeros(&format!("{:.*}", (P - 1 - exp) as usize, x)).to_string()
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

fn opt_f(x: Option<f64>) -> String {
    x.map(format_g9).unwrap_or_default()
}

pub fn row_fields(r: &ResultRow) -> [String; 16] {
    [
        r.method.name().to_string(),
        r.norm.name().to_string(),
        format_g9(r.rho),
        format_g9(r.rho_prime),
        format_g9(r.power_db),
        r.num_cells.to_string(),
        r.num_users.to_string(),
        r.antennas.to_string(),
        r.trial.to_string(),
        opt_f(r.t_star),
        opt_f(r.t_star_db()),
        opt_f(r.pe),
        opt_f(r.runtime_ms),
        r.iterations.map(|i| i.to_string()).unwrap_or_default(),
        r.status.to_string(),
        r.seed.to_string(),
    ]
}

/// Writes the header and one record per row.
pub fn write_csv<W: Write>(out: W, rows: &[ResultRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let io = |e: csv::Error| Error::Experiment(format!("csv output: {e}"));
    w.write_record(CSV_HEADER).map_err(io)?;
    for r in rows {
        w.write_record(row_fields(r)).map_err(io)?;
    }
    w.flush().map_err(|e| Error::Experiment(format!("csv output: {e}")))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiments::{Method, RowStatus};
    use crate::uncertainty::NormKind;

    #[test]
    fn g9_matches_printf() {
        let cases = [
            (1.0, "1"),
            (0.1, "0.1"),
            (1.0 / 3.0, "0.333333333"),
            (123456789.0, "123456789"),
            (1234567890.0, "1.23456789e+09"),
            (0.0001, "0.0001"),
            (0.00001234, "1.234e-05"),
            (-2.5, "-2.5"),
            (99999999.95, "100000000"),
            (999999999.5, "1e+09"),
            (0.0, "0"),
        ];
        for (x, want) in cases {
            assert_eq!(format_g9(x), want, "{x}");
        }
    }

    #[test]
    fn header_and_quoting() {
        let row = ResultRow {
            method: Method::Sdp,
            norm: NormKind::L2,
            rho: 0.4,
            rho_prime: 0.4,
            power_db: 5.0,
            num_cells: 2,
            num_users: 4,
            antennas: 8,
            trial: 3,
            t_star: None,
            pe: None,
            runtime_ms: None,
            iterations: None,
            status: RowStatus::Error("robust_sdp: a, b".into()),
            seed: 7,
        };
        let mut buf = Vec::new();
        write_csv(&mut buf, &[row]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), CSV_HEADER.join(","));
        assert_eq!(lines.next().unwrap(), "sdp,l2,0.4,0.4,5,2,4,8,3,,,,,,\"error: robust_sdp: a, b\",7");
    }
}
