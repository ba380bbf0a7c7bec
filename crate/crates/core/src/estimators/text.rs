//! Line-oriented dump format for fitted estimates.
//!
//! ```text
//! estimate linear
//! dim 2
//! coef 0.1 -0.2
//! base none
//! end
//! ```
//!
//! Kernel estimates list one `a <alpha> <x_0> .. <x_{d-1}>` line per anchor
//! and nest their base as a complete `estimate kernel ... end` block after a
//! bare `base` line. Numbers use the shortest round-tripping decimal form.

use std::fmt::Write as _;
use std::sync::Arc;

use super::{Estimate, KernelEstimate, LinearEstimate};
use crate::error::{Error, Result};

fn join(v: &[f64]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(" ")
}

pub fn write_estimate(est: &Estimate) -> String {
    let mut out = String::new();
    match est {
        Estimate::Linear(e) => write_linear(e, &mut out),
        Estimate::Kernel(e) => write_kernel(e, &mut out),
    }
    out
}

fn write_linear(e: &LinearEstimate, out: &mut String) {
    let _ = writeln!(out, "estimate linear");
    let _ = writeln!(out, "dim {}", e.dim());
    let _ = writeln!(out, "coef {}", join(&e.coef));
    match &e.base {
        Some(b) => {
            let _ = writeln!(out, "base {}", join(b));
        }
        None => {
            let _ = writeln!(out, "base none");
        }
    }
    let _ = writeln!(out, "end");
}

fn write_kernel(e: &KernelEstimate, out: &mut String) {
    let dim = e.anchors.first().map_or(0, Vec::len);
    let _ = writeln!(out, "estimate kernel");
    let _ = writeln!(out, "dim {dim}");
    let _ = writeln!(out, "gamma {}", e.gamma);
    let _ = writeln!(out, "ridge {}", e.ridge);
    let _ = writeln!(out, "rkhs_norm {}", e.rkhs_norm);
    let _ = writeln!(out, "anchors {}", e.anchors.len());
    for (a, x) in e.alpha.iter().zip(&e.anchors) {
        let _ = writeln!(out, "a {a} {}", join(x));
    }
    match &e.base {
        Some(b) => {
            let _ = writeln!(out, "base");
            write_kernel(b, out);
        }
        None => {
            let _ = writeln!(out, "base none");
        }
    }
    let _ = writeln!(out, "end");
}

struct Lines<'a> {
    inner: std::iter::Enumerate<std::str::Lines<'a>>,
}

impl<'a> Lines<'a> {
    fn next(&mut self) -> Result<(usize, Vec<&'a str>)> {
        loop {
            match self.inner.next() {
                Some((_, l)) if l.trim().is_empty() => continue,
                Some((i, l)) => return Ok((i + 1, l.split_whitespace().collect())),
                None => return Err(Error::InvalidInput("unexpected end of estimate dump".into())),
            }
        }
    }

    fn keyed(&mut self, key: &str) -> Result<(usize, Vec<&'a str>)> {
        let (n, toks) = self.next()?;
        if toks.first() != Some(&key) {
            return Err(Error::InvalidInput(format!("line {n}: expected `{key}`")));
        }
        Ok((n, toks[1..].to_vec()))
    }
}

fn nums(line: usize, toks: &[&str]) -> Result<Vec<f64>> {
    toks.iter()
        .map(|t| {
            t.parse::<f64>()
                .map_err(|_| Error::InvalidInput(format!("line {line}: bad number `{t}`")))
        })
        .collect()
}

fn scalar(lines: &mut Lines<'_>, key: &str) -> Result<f64> {
    let (n, toks) = lines.keyed(key)?;
    let v = nums(n, &toks)?;
    if v.len() != 1 {
        return Err(Error::InvalidInput(format!("line {n}: `{key}` takes one value")));
    }
    Ok(v[0])
}

pub fn parse_estimate(text: &str) -> Result<Estimate> {
    let mut lines = Lines {
        inner: text.lines().enumerate(),
    };
    let (n, toks) = lines.keyed("estimate")?;
    match toks.as_slice() {
        ["linear"] => parse_linear(&mut lines).map(Estimate::Linear),
        ["kernel"] => parse_kernel(&mut lines).map(|k| Estimate::Kernel(Arc::new(k))),
        _ => Err(Error::InvalidInput(format!("line {n}: unknown estimate family"))),
    }
}

fn parse_linear(lines: &mut Lines<'_>) -> Result<LinearEstimate> {
    let dim = scalar(lines, "dim")? as usize;
    let (n, toks) = lines.keyed("coef")?;
    let coef = nums(n, &toks)?;
    if coef.len() != dim {
        return Err(Error::InvalidInput(format!("line {n}: expected {dim} coefficients")));
    }
    let (n, toks) = lines.keyed("base")?;
    let base = if toks == ["none"] {
        None
    } else {
        let b = nums(n, &toks)?;
        if b.len() != dim {
            return Err(Error::InvalidInput(format!("line {n}: expected {dim} base values")));
        }
        Some(b)
    };
    lines.keyed("end")?;
    Ok(LinearEstimate { coef, base })
}

fn parse_kernel(lines: &mut Lines<'_>) -> Result<KernelEstimate> {
    let dim = scalar(lines, "dim")? as usize;
    let gamma = scalar(lines, "gamma")?;
    let ridge = scalar(lines, "ridge")?;
    let rkhs_norm = scalar(lines, "rkhs_norm")?;
    let count = scalar(lines, "anchors")? as usize;
    let mut anchors = Vec::with_capacity(count);
    let mut alpha = Vec::with_capacity(count);
    for _ in 0..count {
        let (n, toks) = lines.keyed("a")?;
        let v = nums(n, &toks)?;
        if v.len() != dim + 1 {
            return Err(Error::InvalidInput(format!("line {n}: expected alpha and {dim} coordinates")));
        }
        alpha.push(v[0]);
        anchors.push(v[1..].to_vec());
    }
    let (n, toks) = lines.keyed("base")?;
    let base = match toks.as_slice() {
        ["none"] => None,
        [] => {
            let (m, t) = lines.keyed("estimate")?;
            if t != ["kernel"] {
                return Err(Error::InvalidInput(format!("line {m}: kernel base must be a kernel estimate")));
            }
            Some(Arc::new(parse_kernel(lines)?))
        }
        _ => return Err(Error::InvalidInput(format!("line {n}: malformed base"))),
    };
    lines.keyed("end")?;
    Ok(KernelEstimate {
        anchors,
        alpha,
        gamma,
        base,
        ridge,
        rkhs_norm,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linear_round_trip() {
        let e = Estimate::Linear(LinearEstimate {
            coef: vec![0.1, -0.25, 1e-17],
            base: Some(vec![0.5, 0.0, -3.0]),
        });
        let text = write_estimate(&e);
        assert_eq!(parse_estimate(&text).unwrap(), e);
    }

    #[test]
    fn nested_kernel_round_trip() {
        let base = KernelEstimate {
            anchors: vec![vec![0.1, 0.2]],
            alpha: vec![0.7],
            gamma: 0.5,
            base: None,
            ridge: 0.01,
            rkhs_norm: 0.7,
        };
        let top = KernelEstimate {
            anchors: vec![vec![-0.3, 0.4], vec![0.9, -0.9]],
            alpha: vec![0.01, -0.02],
            gamma: 0.5,
            base: Some(Arc::new(base)),
            ridge: 7.5,
            rkhs_norm: 0.02,
        };
        let e = Estimate::Kernel(Arc::new(top));
        let text = write_estimate(&e);
        assert_eq!(parse_estimate(&text).unwrap(), e);
    }

    #[test]
    fn rejects_garbage() {
        assert!(parse_estimate("estimate cubic\n").is_err());
        assert!(parse_estimate("estimate linear\ndim 2\ncoef 1\nbase none\nend\n").is_err());
        assert!(parse_estimate("").is_err());
    }
}
