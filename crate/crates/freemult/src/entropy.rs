//! Free entropy Σ(μ) = ∬ log|ξ₁ − ξ₂| dμ dμ of circle measures.
//!
//! The primary path is the Fourier series Σ(μ) = −Σ_{k≥1} |m_k|²/k, truncated
//! once the tail is negligible. The cross-check is a periodic double trapezoid
//! rule on log(2|sin((θ₁ − θ₂)/2)|) whose diagonal cells are integrated
//! analytically.

use crate::error::{Error, Result};
use crate::measure::{Measure, Space};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Hard cap on the number of series terms.
pub const MAX_TERMS: usize = 4096;

/// Target for the estimated series tail.
pub const TAIL_TOL: f64 = 1e-8;

/// Atom mass at which Σ is reported as −∞.
pub const ATOM_CUTOFF: f64 = 1e-6;

/// Moments are computed in blocks of this many terms.
const BLOCK: usize = 64;

/// Value of Σ(μ) with its truncation diagnostics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Entropy {
    /// Σ(μ); −∞ when the measure carries an atom.
    pub value: f64,
    /// Series terms summed.
    pub terms: usize,
    /// Estimated size of the discarded tail.
    pub tail_bound: f64,
    /// Set when the cap was reached before the tail fell below tolerance.
    pub reduced_precision: bool,
}

impl Entropy {
    fn neg_infinity() -> Self {
        Entropy {
            value: f64::NEG_INFINITY,
            terms: 0,
            tail_bound: 0.0,
            reduced_precision: false,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.value.is_finite()
    }
}

/// Σ from a moment sequence k ↦ |m_k|, k ≥ 1.
///
/// The tail beyond K is bounded assuming |m_k| ≤ M·K/k past the last block,
/// where M is the largest |m_k| in that block: Σ_{k>K} M²K²/k³ ≤ M²/2.
pub fn free_entropy_from_moments(abs_moment: impl Fn(usize) -> f64 + Sync) -> Entropy {
    let mut sum = 0.0;
    let mut k0 = 1;
    let mut tail = f64::INFINITY;
    while k0 <= MAX_TERMS {
        let k1 = (k0 + BLOCK - 1).min(MAX_TERMS);
        let block: Vec<f64> = (k0..=k1).into_par_iter().map(&abs_moment).collect();
        let mut top: f64 = 0.0;
        for (k, m) in (k0..=k1).zip(&block) {
            sum += m * m / k as f64;
            top = top.max(*m);
        }
        tail = 0.5 * top * top;
        k0 = k1 + 1;
        if tail < TAIL_TOL {
            break;
        }
    }
    Entropy {
        value: -sum,
        terms: k0 - 1,
        tail_bound: tail,
        reduced_precision: tail >= TAIL_TOL,
    }
}

fn check_circle(mu: &Measure) -> Result<()> {
    mu.validate()?;
    if mu.space != Space::Circle {
        return Err(Error::validation("measure.space", "free entropy is defined for circle measures"));
    }
    Ok(())
}

fn has_atom(mu: &Measure) -> bool {
    mu.atoms.iter().any(|a| a.mass >= ATOM_CUTOFF)
}

/// Σ(μ) by the moment series; −∞ when μ has an atom of mass ≥ 1e−6.
pub fn free_entropy(mu: &Measure) -> Result<Entropy> {
    check_circle(mu)?;
    if has_atom(mu) {
        return Ok(Entropy::neg_infinity());
    }
    let data = mu.circle_data();
    Ok(free_entropy_from_moments(|k| data.moment(k as i64).norm()))
}

/// Σ(μ) by a periodic double trapezoid rule on `m` uniform nodes.
///
/// Off-diagonal cells use log(2|sin(Δ/2)|) at the nodes. The diagonal weight
/// log(h/2π) makes each row integrate the kernel exactly against constants,
/// since Π_{d=1}^{m−1} 2 sin(πd/m) = m.
pub fn free_entropy_quadrature(mu: &Measure, m: usize) -> Result<f64> {
    check_circle(mu)?;
    if m < 64 {
        return Err(Error::validation("m", "at least 64 quadrature nodes are required"));
    }
    if has_atom(mu) {
        return Ok(f64::NEG_INFINITY);
    }
    let h = 2.0 * PI / m as f64;
    let w: Vec<f64> = (0..m).map(|i| h * mu.density_at(-PI + i as f64 * h)).collect();
    let kernel: Vec<f64> = (0..m)
        .map(|d| if d == 0 { (h / (2.0 * PI)).ln() } else { (2.0 * (0.5 * d as f64 * h).sin()).ln() })
        .collect();
    let rows: Vec<f64> = (0..m)
        .into_par_iter()
        .map(|i| {
            let mut row = 0.0;
            for (j, wj) in w.iter().enumerate() {
                row += wj * kernel[(i + m - j) % m];
            }
            w[i] * row
        })
        .collect();
    Ok(rows.iter().sum())
}

/// Direction of a sequence of entropies along a flow.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Trend {
    Increasing,
    Decreasing,
    Constant,
    Mixed,
}

/// Σ along a flow t ↦ μ_t.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowEntropy {
    pub points: Vec<(f64, Entropy)>,
    pub trend: Trend,
}

impl FlowEntropy {
    /// `t,entropy` rows, −∞ written as `-inf`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("t,entropy\n");
        for (t, e) in &self.points {
            s.push_str(&format!("{t:e},{:e}\n", e.value));
        }
        s
    }
}

/// Trend of a sequence, ignoring steps smaller than `tol`; −∞ entries compare
/// equal to each other.
pub fn trend(values: &[f64], tol: f64) -> Trend {
    let (mut up, mut down) = (false, false);
    for w in values.windows(2) {
        if w[0] == w[1] {
            continue;
        }
        let d = w[1] - w[0];
        if d > tol {
            up = true;
        } else if d < -tol {
            down = true;
        }
    }
    match (up, down) {
        (true, false) => Trend::Increasing,
        (false, true) => Trend::Decreasing,
        (false, false) => Trend::Constant,
        (true, true) => Trend::Mixed,
    }
}

/// Entropy of `family(t)` at each time.
pub fn entropy_of_flow(family: impl Fn(f64) -> Result<Measure>, times: &[f64]) -> Result<FlowEntropy> {
    let mut points = Vec::with_capacity(times.len());
    for &t in times {
        points.push((t, free_entropy(&family(t)?)?));
    }
    let vals: Vec<f64> = points.iter().map(|p| p.1.value).collect();
    Ok(FlowEntropy {
        trend: trend(&vals, 1e-12),
        points,
    })
}
