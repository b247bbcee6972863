//! CSV and JSON renderings of the sequence report and the profiles.

use std::fmt::Write as _;

use serde_json::{json, Value};

use crate::sequence::{ContiguityProfile, SequenceReport};

pub const EXAMPLE6_HEADER: &str = "n,T,eps,gamma,log_alpha,novikov,gamma_n,lambda_threshold,lambda_used,c_lambda,zeta_n,zeta_gap,pA_closed,pA_mc,pA_se,qA_closed,qA_mc,qA_se,qA_bound,containment_margin";

pub const PROFILE_HEADER: &str = "n,epsilon,delta_n";

/// Formats like C's `%.9g`.
pub fn g9(x: f64) -> String {
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
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if !(-4..P).contains(&exp) {
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{}e{sign}{:02}", trim_zeros(mantissa), exp.abs())
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

pub fn example6_csv(report: &SequenceReport) -> String {
    let mut out = String::from(EXAMPLE6_HEADER);
    out.push('\n');
    for r in &report.rows {
        let p = &r.params;
        let c = &r.closed;
        let fields = [
            p.horizon(),
            p.eps(),
            p.gamma(),
            p.log_alpha(),
            c.novikov,
            c.gamma_n,
            c.lambda_threshold,
            p.lambda(),
            c.c_lambda,
            c.zeta_n,
            r.zeta_gap,
            c.pa_closed,
            r.mc.p_an.value,
            r.mc.p_an.standard_error,
            c.qa_closed,
            r.mc.q_an.value,
            r.mc.q_an.standard_error,
            c.qa_bound,
            c.containment_margin,
        ];
        write!(out, "{}", r.n).unwrap();
        for f in fields {
            write!(out, ",{}", g9(f)).unwrap();
        }
        out.push('\n');
    }
    out
}

pub fn profile_csv(profile: &ContiguityProfile) -> String {
    let mut out = String::from(PROFILE_HEADER);
    out.push('\n');
    for (n, row) in profile.points.iter().enumerate() {
        for (pt, &eps) in row.iter().zip(&profile.epsilons) {
            writeln!(out, "{},{},{}", n + 1, g9(eps), g9(pt.delta)).unwrap();
        }
    }
    out
}

/// Non-finite numbers become their `%.9g` strings, since JSON has none.
fn number(x: f64) -> Value {
    if x.is_finite() {
        json!(x)
    } else {
        json!(g9(x))
    }
}

pub fn profile_summary(profile: &ContiguityProfile) -> Value {
    json!({
        "kind": profile.kind,
        "markets": profile.points.len(),
        "epsilon": profile.epsilons.iter().map(|&e| number(e)).collect::<Vec<_>>(),
        "delta_star": profile.infimum.iter().map(|&d| number(d)).collect::<Vec<_>>(),
    })
}
