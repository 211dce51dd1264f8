use std::io::{Read, Write};

use serde::Deserialize;

use crate::runner::RunRecord;

pub const HEADER: [&str; 15] = [
    "cell_id",
    "env",
    "variant",
    "alpha",
    "eps_a",
    "eps_t",
    "p_abs",
    "pg",
    "policy",
    "C",
    "budget",
    "seed",
    "return",
    "query_ratio",
    "decision_ms",
];

/// `%g`-style formatting with six significant digits.
pub fn format_g6(v: f64) -> String {
    if v.is_nan() {
        return "nan".into();
    }
    if v.is_infinite() {
        return if v > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if v == 0.0 {
        return "0".into();
    }
    let sci = format!("{v:.5e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if !(-4..6).contains(&exp) {
        let m = trim_zeros(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        return format!("{m}e{sign}{:02}", exp.abs());
    }
    let decimals = (5 - exp).max(0) as usize;
    trim_zeros(&format!("{v:.decimals$}")).to_string()
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

pub fn write_records<W: Write>(records: &[RunRecord], out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(HEADER)?;
    for r in records {
        let a = &r.agent;
        w.write_record([
            r.cell_id.to_string(),
            r.env.clone(),
            a.variant.to_string(),
            format_g6(a.alpha),
            format_g6(a.eps_a),
            format_g6(a.eps_t),
            format_g6(a.p_abs),
            u8::from(a.pg).to_string(),
            a.policy.to_string(),
            format_g6(a.c),
            a.budget.to_string(),
            r.seed.to_string(),
            format_g6(r.total_return),
            format_g6(r.query_ratio),
            format_g6(r.decision_ms),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// A result row as read back from CSV.
#[derive(Clone, Debug, Deserialize, PartialEq)]
pub struct CsvRow {
    pub cell_id: usize,
    pub env: String,
    pub variant: String,
    pub alpha: f64,
    pub eps_a: f64,
    pub eps_t: f64,
    pub p_abs: f64,
    pub pg: u8,
    pub policy: String,
    #[serde(rename = "C")]
    pub c: f64,
    pub budget: usize,
    pub seed: u64,
    #[serde(rename = "return")]
    pub total_return: f64,
    pub query_ratio: f64,
    pub decision_ms: f64,
}

pub fn read_rows<R: Read>(input: R) -> csv::Result<Vec<CsvRow>> {
    csv::Reader::from_reader(input).deserialize().collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{AgentSpec, VariantKind};
    use oga_core::IntraPolicy;

    #[test]
    fn g6_matches_printf() {
        let cases = [
            (0.0, "0"),
            (1.0, "1"),
            (1.05, "1.05"),
            (-12.5, "-12.5"),
            (0.1 + 0.2, "0.3"),
            (1.0 / 3.0, "0.333333"),
            (123456.0, "123456"),
            (1234567.0, "1.23457e+06"),
            (999999.7, "1e+06"),
            (0.0001, "0.0001"),
            (0.00001234, "1.234e-05"),
            (f64::INFINITY, "inf"),
        ];
        for (v, s) in cases {
            assert_eq!(format_g6(v), s, "{v}");
        }
    }

    #[test]
    fn round_trip() {
        let rec = RunRecord {
            cell_id: 4,
            env: "navigation".into(),
            agent: AgentSpec {
                variant: VariantKind::Epsilon,
                alpha: 0.0,
                eps_a: f64::INFINITY,
                eps_t: 0.8,
                p_abs: 0.0,
                pg: true,
                policy: IntraPolicy::Uct,
                c: 2.0,
                budget: 100,
            },
            seed: 99,
            total_return: -7.0,
            query_ratio: 0.25,
            decision_ms: 0.0,
        };
        let mut buf = Vec::new();
        write_records(&[rec], &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert_eq!(text.lines().next().unwrap(), HEADER.join(","));
        assert_eq!(
            text.lines().nth(1).unwrap(),
            "4,navigation,epsilon,0,inf,0.8,0,1,UCT,2,100,99,-7,0.25,0"
        );
        let rows = read_rows(buf.as_slice()).unwrap();
        assert_eq!(rows[0].eps_a, f64::INFINITY);
        assert_eq!(rows[0].pg, 1);
        assert_eq!(rows[0].total_return, -7.0);
    }
}
