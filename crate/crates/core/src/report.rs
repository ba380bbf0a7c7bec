//! CSV and SVG output.

use std::fmt::Write as _;
use std::io::{BufRead, Write};

use crate::error::{Error, Result};

/// Decimal with at least 9 significant digits. Very large or tiny magnitudes
/// fall back to scientific notation.
pub fn fmt_sig(v: f64) -> String {
    if v.is_nan() {
        return "nan".into();
    }
    if v.is_infinite() {
        return if v > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if v == 0.0 {
        return "0".into();
    }
    let exp = v.abs().log10().floor() as i32;
    if (-5..15).contains(&exp) {
        let decimals = (8 - exp).max(0) as usize;
        format!("{v:.decimals$}")
    } else {
        format!("{v:.8e}")
    }
}

/// One labelled cumulative-regret curve with its standard errors.
#[derive(Debug, Clone, PartialEq)]
pub struct Curve {
    pub label: String,
    pub mean: Vec<f64>,
    pub se: Vec<f64>,
}

/// `t,mean_cum_regret,se_cum_regret` with `t` starting at 1.
pub fn write_curve_csv<W: Write>(curve: &Curve, out: &mut W) -> Result<()> {
    if curve.mean.len() != curve.se.len() {
        return Err(Error::InvalidInput(format!(
            "curve `{}` has {} means but {} standard errors",
            curve.label,
            curve.mean.len(),
            curve.se.len()
        )));
    }
    let mut s = String::from("t,mean_cum_regret,se_cum_regret\n");
    for (i, (m, e)) in curve.mean.iter().zip(&curve.se).enumerate() {
        let _ = writeln!(s, "{},{},{}", i + 1, fmt_sig(*m), fmt_sig(*e));
    }
    out.write_all(s.as_bytes()).map_err(io_err)
}

/// Reads a curve written by [`write_curve_csv`].
pub fn read_curve_csv<B: BufRead>(label: &str, input: B) -> Result<Curve> {
    let mut mean = Vec::new();
    let mut se = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line = line.map_err(io_err)?;
        if i == 0 || line.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 3 {
            return Err(Error::InvalidInput(format!("line {}: expected 3 fields", i + 1)));
        }
        let parse = |s: &str| {
            s.trim()
                .parse::<f64>()
                .map_err(|_| Error::InvalidInput(format!("line {}: bad number `{s}`", i + 1)))
        };
        mean.push(parse(f[1])?);
        se.push(parse(f[2])?);
    }
    Ok(Curve {
        label: label.to_string(),
        mean,
        se,
    })
}

/// One row of a summary table.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub policy: String,
    pub scenario: String,
    pub d: String,
    pub k_or_nk: String,
    pub final_regret_mean: f64,
    pub final_regret_se: f64,
    pub regret_reduction_pct: f64,
    pub std_reduction_pct: f64,
    pub speed_ratio: f64,
}

pub const SUMMARY_HEADER: &str = "policy,scenario,d,K_or_nK,final_regret_mean,final_regret_se,regret_reduction_pct,std_reduction_pct,speed_ratio";

pub fn write_summary_csv<W: Write>(rows: &[SummaryRow], out: &mut W) -> Result<()> {
    let mut s = String::from(SUMMARY_HEADER);
    s.push('\n');
    for r in rows {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{},{}",
            r.policy,
            r.scenario,
            r.d,
            r.k_or_nk,
            fmt_sig(r.final_regret_mean),
            fmt_sig(r.final_regret_se),
            fmt_sig(r.regret_reduction_pct),
            fmt_sig(r.std_reduction_pct),
            fmt_sig(r.speed_ratio),
        );
    }
    out.write_all(s.as_bytes()).map_err(io_err)
}

fn io_err(e: std::io::Error) -> Error {
    Error::from(e)
}

const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f",
];

/// Renders mean curves as an SVG line chart with a legend. All curves must
/// share one length.
pub fn emit_svg(title: &str, curves: &[Curve]) -> Result<String> {
    let n = curves.first().map_or(0, |c| c.mean.len());
    if let Some(c) = curves.iter().find(|c| c.mean.len() != n) {
        return Err(Error::InvalidInput(format!(
            "curve `{}` has length {}, expected {n}",
            c.label,
            c.mean.len()
        )));
    }
    if curves.iter().any(|c| c.mean.iter().any(|v| !v.is_finite())) {
        return Err(Error::InvalidInput("curves must be finite".into()));
    }

    let (w, h) = (640.0, 420.0);
    let (left, right, top, bottom) = (70.0, 170.0, 40.0, 50.0);
    let pw = w - left - right;
    let ph = h - top - bottom;
    let y_max = curves
        .iter()
        .flat_map(|c| c.mean.iter().copied())
        .fold(0.0f64, f64::max);
    let y_max = if y_max > 0.0 { y_max } else { 1.0 };
    let x_max = n.max(2) as f64;
    let px = |t: f64| left + pw * (t - 1.0) / (x_max - 1.0);
    let py = |v: f64| top + ph * (1.0 - v / y_max);

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">"#
    );
    let _ = writeln!(s, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{}" y="24" text-anchor="middle" font-size="14">{}</text>"#,
        left + pw / 2.0,
        escape(title)
    );
    let (x0, y0, x1, y1) = (left, top + ph, left + pw, top);
    let _ = writeln!(s, r#"<line x1="{x0}" y1="{y0}" x2="{x1}" y2="{y0}" stroke="black"/>"#);
    let _ = writeln!(s, r#"<line x1="{x0}" y1="{y0}" x2="{x0}" y2="{y1}" stroke="black"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" text-anchor="middle" font-size="12">t</text>"#,
        left + pw / 2.0,
        h - 12.0
    );
    let _ = writeln!(
        s,
        r#"<text x="18" y="{}" text-anchor="middle" font-size="12" transform="rotate(-90 18 {})">cumulative regret</text>"#,
        top + ph / 2.0,
        top + ph / 2.0
    );
    for (v, label) in [(0.0, "0".to_string()), (y_max, fmt_tick(y_max))] {
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" text-anchor="end" font-size="10">{label}</text>"#,
            left - 4.0,
            py(v) + 3.0
        );
    }
    for (t, label) in [(1.0, "1".to_string()), (x_max, n.to_string())] {
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" text-anchor="middle" font-size="10">{label}</text>"#,
            px(t),
            y0 + 14.0
        );
    }

    for (i, c) in curves.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let pts: Vec<String> = if n == 1 {
            vec![format!("{:.2},{:.2}", px(1.0), py(c.mean[0])), format!("{:.2},{:.2}", px(x_max), py(c.mean[0]))]
        } else {
            c.mean
                .iter()
                .enumerate()
                .map(|(j, v)| format!("{:.2},{:.2}", px((j + 1) as f64), py(*v)))
                .collect()
        };
        let _ = writeln!(
            s,
            r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#,
            pts.join(" ")
        );
        let ly = top + 14.0 + 18.0 * i as f64;
        let lx = left + pw + 12.0;
        let _ = writeln!(
            s,
            r#"<line x1="{lx}" y1="{ly}" x2="{}" y2="{ly}" stroke="{color}" stroke-width="2"/>"#,
            lx + 20.0
        );
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" font-size="11">{}</text>"#,
            lx + 26.0,
            ly + 4.0,
            escape(&c.label)
        );
    }
    s.push_str("</svg>\n");
    Ok(s)
}

fn fmt_tick(v: f64) -> String {
    if v >= 100.0 {
        format!("{v:.0}")
    } else {
        format!("{v:.3}")
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sig_digits() {
        assert_eq!(fmt_sig(0.0), "0");
        assert_eq!(fmt_sig(1.0), "1.00000000");
        assert_eq!(fmt_sig(-0.123456789123), "-0.123456789");
        assert_eq!(fmt_sig(12345.678901234), "12345.6789");
        assert_eq!(fmt_sig(1e-9), "1.00000000e-9");
        let v = std::f64::consts::PI * 1e3;
        assert!((fmt_sig(v).parse::<f64>().unwrap() / v - 1.0).abs() < 1e-8);
    }

    #[test]
    fn curve_round_trip() {
        let c = Curve {
            label: "a".into(),
            mean: vec![0.5, 1.25, 2.0],
            se: vec![0.0, 0.1, 0.2],
        };
        let mut buf = Vec::new();
        write_curve_csv(&c, &mut buf).unwrap();
        let back = read_curve_csv("a", buf.as_slice()).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn svg_rejects_length_mismatch() {
        let a = Curve {
            label: "a".into(),
            mean: vec![0.0; 3],
            se: vec![0.0; 3],
        };
        let b = Curve {
            label: "b".into(),
            mean: vec![0.0; 4],
            se: vec![0.0; 4],
        };
        assert!(emit_svg("x", &[a, b]).is_err());
    }
}
