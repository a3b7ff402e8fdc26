//! Closed-form computation/communication time and speed-up model.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

pub const SWEEP_HEADER: &str = "vary,value,t_comp,t_comm,speedup";

/// Inputs of the time model. `d` is supplied by the caller, either from
/// published measurements or from the simulator's estimator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpeedupInputs {
    /// Single-worker iterations to reach the target accuracy.
    pub n_a: u64,
    /// Computation time of one minibatch.
    pub c: f64,
    /// Communication overhead of one exchange.
    pub s: f64,
    pub n: u64,
    pub tau: u64,
    /// Discrepancy penalty.
    pub d: f64,
    /// Target accuracy the other inputs refer to; metadata only.
    pub a: Option<f64>,
}

impl SpeedupInputs {
    pub fn validate(&self) -> Result<()> {
        if self.n_a == 0 || self.n == 0 || self.tau == 0 {
            return Err(invalid("n_a, n and tau must be positive"));
        }
        if !(self.c.is_finite() && self.c > 0.0) {
            return Err(invalid("C must be positive"));
        }
        if !(self.s.is_finite() && self.s >= 0.0) {
            return Err(invalid("S must be nonnegative"));
        }
        if !(self.d.is_finite() && self.d >= 1.0) {
            return Err(invalid("d must be at least 1"));
        }
        if let Some(a) = self.a {
            if !(a > 0.0 && a < 1.0) {
                return Err(invalid("target accuracy must lie in (0, 1)"));
            }
        }
        Ok(())
    }
}

/// Returns `(T_comp, T_comm)`.
pub fn times(inp: &SpeedupInputs) -> Result<(f64, f64)> {
    inp.validate()?;
    let (n_a, n, tau) = (inp.n_a as f64, inp.n as f64, inp.tau as f64);
    let t_comp = n_a * inp.c * inp.d / n;
    let t_comm = n * inp.d * n_a * inp.s / tau;
    Ok((t_comp, t_comm))
}

/// Single-worker time divided by cluster time.
pub fn speedup(inp: &SpeedupInputs) -> Result<f64> {
    inp.validate()?;
    let (n, tau) = (inp.n as f64, inp.tau as f64);
    Ok(n * tau / (tau * inp.d + (inp.d * inp.s / inp.c) * n * n))
}

/// Limit of [`speedup`] as the communication period grows without bound.
pub fn speedup_large_tau(n: u64, d: f64) -> Result<f64> {
    if n == 0 {
        return Err(invalid("n must be positive"));
    }
    if !(d.is_finite() && d >= 1.0) {
        return Err(invalid("d must be at least 1"));
    }
    Ok(n as f64 / d)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SweepField {
    NA,
    C,
    S,
    N,
    Tau,
    D,
}

impl SweepField {
    pub const ALL: [SweepField; 6] = [Self::NA, Self::C, Self::S, Self::N, Self::Tau, Self::D];

    pub fn name(self) -> &'static str {
        match self {
            Self::NA => "n_a",
            Self::C => "c",
            Self::S => "s",
            Self::N => "n",
            Self::Tau => "tau",
            Self::D => "d",
        }
    }

    fn apply(self, base: &SpeedupInputs, value: f64) -> Result<SpeedupInputs> {
        let integral = |v: f64| -> Result<u64> {
            if v.fract() == 0.0 && v >= 1.0 && v <= u64::MAX as f64 {
                Ok(v as u64)
            } else {
                Err(invalid(format!(
                    "{} must be a positive integer, got {v}",
                    self.name()
                )))
            }
        };
        let mut inp = *base;
        match self {
            Self::NA => inp.n_a = integral(value)?,
            Self::C => inp.c = value,
            Self::S => inp.s = value,
            Self::N => inp.n = integral(value)?,
            Self::Tau => inp.tau = integral(value)?,
            Self::D => inp.d = value,
        }
        Ok(inp)
    }
}

impl fmt::Display for SweepField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SweepField {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let lower = s.to_ascii_lowercase();
        Self::ALL
            .into_iter()
            .find(|f| f.name() == lower)
            .ok_or_else(|| {
                invalid(format!(
                    "unknown sweep field '{s}' (expected one of n_a, c, s, n, tau, d)"
                ))
            })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepRow {
    pub value: f64,
    pub t_comp: f64,
    pub t_comm: f64,
    pub speedup: f64,
}

/// Evaluates the model once per value of `vary`, holding the rest of `base`
/// fixed.
pub fn sweep(base: &SpeedupInputs, vary: SweepField, values: &[f64]) -> Result<Vec<SweepRow>> {
    values
        .iter()
        .map(|&value| {
            let inp = vary.apply(base, value)?;
            let (t_comp, t_comm) = times(&inp)?;
            Ok(SweepRow {
                value,
                t_comp,
                t_comm,
                speedup: speedup(&inp)?,
            })
        })
        .collect()
}

/// Rounds to six significant digits and prints the shortest decimal form.
pub fn six_sig(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return x.to_string();
    }
    let rounded: f64 = format!("{x:.5e}").parse().unwrap_or(x);
    rounded.to_string()
}

pub fn write_sweep_csv<W: Write>(mut out: W, vary: SweepField, rows: &[SweepRow]) -> Result<()> {
    writeln!(out, "{SWEEP_HEADER}")?;
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{}",
            vary,
            six_sig(r.value),
            six_sig(r.t_comp),
            six_sig(r.t_comm),
            six_sig(r.speedup)
        )?;
    }
    Ok(())
}
