//! Free and Boolean multiplicative convolution, free powers, and the
//! triangular-array transforms.
//!
//! Every operation produces an η-evaluator first and recovers the measure on a
//! grid afterwards. Results carry the recovered profile so callers can inspect
//! error estimates and unreliable nodes.

use crate::error::{Error, Result};
use crate::levy::SigmaMeasure;
use crate::measure::{circle_grid, geometric_grid, log_mean_b, scale_measure, Atom, Density, DensityProfile, Measure, Space};
use crate::recovery::{recover, Recovered};
use crate::subordination::{
    power_subordination_circle_eta, power_subordination_halfline_eta, square_circle, two_fold, two_fold_identity,
    SubordinationSolution,
};
use crate::transforms::{Domain, EtaEvaluator, Kind, Provenance};
use crate::C64;
use std::f64::consts::PI;

/// Default number of recovery nodes.
pub const DEFAULT_GRID: usize = 2048;

/// Output of a convolution: η, the recovered law and its profile.
#[derive(Debug, Clone)]
pub struct Convolved {
    pub eta: EtaEvaluator,
    pub measure: Measure,
    pub profile: DensityProfile,
    pub solution: Option<SubordinationSolution>,
}

impl Convolved {
    fn from_recovered(eta: EtaEvaluator, r: Recovered, solution: Option<SubordinationSolution>) -> Self {
        Convolved {
            eta,
            measure: r.measure,
            profile: r.profile,
            solution,
        }
    }
}

/// Smallest and largest point carrying mass of a half-line law.
pub fn halfline_support(mu: &Measure) -> (f64, f64) {
    mu.halfline_data().support()
}

/// Geometric recovery grid covering [lo, hi], widened by 5% at either end.
pub fn halfline_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let hi = if hi > 0.0 { hi } else { 1.0 };
    let lo = if lo > 0.0 { lo } else { hi * 1e-4 };
    let (lo, hi) = if hi / lo < 1.0 + 1e-6 { (lo / 2.0, hi * 2.0) } else { (lo / 1.05, hi * 1.05) };
    geometric_grid(lo, hi, n)
}

fn check_space(mu: &Measure, space: Space) -> Result<()> {
    if mu.space != space {
        return Err(Error::validation("space", format!("{} measure required", space.name())));
    }
    mu.validate()
}

fn recover_on(eta: EtaEvaluator, grid: &[f64], solution: Option<SubordinationSolution>) -> Result<Convolved> {
    let r = recover(&eta, grid, &eta.label)?;
    Ok(Convolved::from_recovered(eta, r, solution))
}

/// Sample points where the two-fold product identity is audited.
fn identity_points(domain: Domain) -> Vec<C64> {
    match domain {
        Domain::Disc => (0..16).map(|j| C64::from_polar(0.9, -PI + 2.0 * PI * (j as f64 + 0.5) / 16.0)).collect(),
        Domain::Slit => (0..16).map(|j| 1.0 / C64::new(0.25 * 1.25f64.powi(j), 0.01)).collect(),
    }
}

fn two_fold_audited(a: &EtaEvaluator, b: &EtaEvaluator) -> Result<EtaEvaluator> {
    let eta = two_fold(a, b)?;
    for z in identity_points(a.domain) {
        let (_, _, res) = two_fold_identity(a, b, z)?;
        if res > 1e-9 {
            return Err(Error::NonConvergence { iterations: 0, residual: res });
        }
    }
    Ok(eta)
}

/// μ⊠ν on 𝕋; both means must be nonzero.
pub fn free_convolve_circle(mu: &Measure, nu: &Measure) -> Result<Measure> {
    Ok(free_convolve_circle_on(mu, nu, &circle_grid(DEFAULT_GRID))?.measure)
}

pub fn free_convolve_circle_on(mu: &Measure, nu: &Measure, grid: &[f64]) -> Result<Convolved> {
    check_space(mu, Space::Circle)?;
    check_space(nu, Space::Circle)?;
    let eta = two_fold_audited(&EtaEvaluator::from_measure(mu), &EtaEvaluator::from_measure(nu))?;
    recover_on(eta, grid, None)
}

/// μ⊠ν on ℝ₊ by the two-fold fixed point; pairs whose iterates leave the
/// slit plane are rejected.
pub fn free_convolve_halfline(mu: &Measure, nu: &Measure) -> Result<Measure> {
    check_space(mu, Space::Halfline)?;
    check_space(nu, Space::Halfline)?;
    let (a, b) = halfline_support(mu);
    let (c, d) = halfline_support(nu);
    Ok(free_convolve_halfline_on(mu, nu, &halfline_grid(a * c, b * d, DEFAULT_GRID))?.measure)
}

pub fn free_convolve_halfline_on(mu: &Measure, nu: &Measure, grid: &[f64]) -> Result<Convolved> {
    check_space(mu, Space::Halfline)?;
    check_space(nu, Space::Halfline)?;
    let eta = two_fold_audited(&EtaEvaluator::from_measure(mu), &EtaEvaluator::from_measure(nu))?;
    recover_on(eta, grid, None)
}

/// η_μ(z)η_ν(z)/z, the Boolean product of two evaluators on the same space.
pub fn boolean_eta(mu: &EtaEvaluator, nu: &EtaEvaluator) -> Result<EtaEvaluator> {
    if mu.domain != nu.domain {
        return Err(Error::validation("space", "both laws must live on the same space"));
    }
    let (a, b) = (mu.clone(), nu.clone());
    Ok(EtaEvaluator::from_fn(mu.domain, Provenance::Composite, Kind::Eta, format!("{} [+] {}", mu.label, nu.label), move |z, warm| {
        let (ra, dra) = a.ratio_warm(z, warm.child(0))?;
        let (rb, drb) = b.ratio_warm(z, warm.child(1))?;
        Ok((ra * rb, dra * rb + ra * drb))
    }))
}

/// μ ×∪ ν on 𝕋 (always defined).
pub fn boolean_convolve_circle(mu: &Measure, nu: &Measure) -> Result<Measure> {
    Ok(boolean_convolve_circle_on(mu, nu, &circle_grid(DEFAULT_GRID))?.measure)
}

pub fn boolean_convolve_circle_on(mu: &Measure, nu: &Measure, grid: &[f64]) -> Result<Convolved> {
    check_space(mu, Space::Circle)?;
    check_space(nu, Space::Circle)?;
    let eta = boolean_eta(&EtaEvaluator::from_measure(mu), &EtaEvaluator::from_measure(nu))?;
    recover_on(eta, grid, None)
}

/// 256 points in ℂ⁺: 16 radii in [1/16, 16] times 16 angles in (0, π).
pub fn upper_half_sample() -> Vec<C64> {
    let mut out = Vec::with_capacity(256);
    for i in 0..16 {
        let r = (1.0f64 / 16.0) * 256f64.powf(i as f64 / 15.0);
        for j in 0..16 {
            out.push(C64::from_polar(r, PI * (j as f64 + 0.5) / 16.0));
        }
    }
    out
}

/// Checks arg η_μ + arg η_ν − arg z < π on the sample and that the product
/// satisfies arg z ≤ arg η < π.
pub fn boolean_halfline_condition(mu: &EtaEvaluator, nu: &EtaEvaluator) -> Result<()> {
    for z in upper_half_sample() {
        let a = mu.eval(z)?.arg();
        let b = nu.eval(z)?.arg();
        let s = a + b - z.arg();
        if !(s < PI) {
            return Err(Error::NotWellDefined(format!(
                "arg eta_mu + arg eta_nu - arg z = {s} reaches pi at z = {z}; the Boolean product is not a probability law"
            )));
        }
        if s < z.arg() - 1e-12 {
            return Err(Error::NotWellDefined(format!("the product violates arg eta >= arg z at z = {z}")));
        }
    }
    Ok(())
}

/// μ ×∪ ν on ℝ₊, when the sampled argument condition holds.
pub fn boolean_convolve_halfline(mu: &Measure, nu: &Measure) -> Result<Measure> {
    check_space(mu, Space::Halfline)?;
    check_space(nu, Space::Halfline)?;
    let (a, b) = halfline_support(mu);
    let (c, d) = halfline_support(nu);
    let grid = halfline_grid(a * c / 4.0, 4.0 * b * d, DEFAULT_GRID);
    Ok(boolean_convolve_halfline_on(mu, nu, &grid)?.measure)
}

pub fn boolean_convolve_halfline_on(mu: &Measure, nu: &Measure, grid: &[f64]) -> Result<Convolved> {
    check_space(mu, Space::Halfline)?;
    check_space(nu, Space::Halfline)?;
    let (em, en) = (EtaEvaluator::from_measure(mu), EtaEvaluator::from_measure(nu));
    boolean_halfline_condition(&em, &en)?;
    let eta = boolean_eta(&em, &en)?;
    recover_on(eta, grid, None)
}

/// η of μ^{⊠k} with the subordination certificate when one is used.
pub fn free_power_eta(mu: &EtaEvaluator, k: usize) -> Result<(EtaEvaluator, Option<SubordinationSolution>)> {
    match (k, mu.domain) {
        (0, _) => Err(Error::validation("k", "power must be at least 1")),
        (1, _) => Ok((mu.clone(), None)),
        (2, Domain::Disc) => {
            if mu.ratio(C64::new(0.0, 0.0))?.0.norm() < 1e-14 {
                return Err(Error::DegenerateMean("the mean vanishes; mu⊠mu is the Haar measure".into()));
            }
            Ok((square_circle(mu), None))
        }
        (2, Domain::Slit) => Ok((two_fold(mu, mu)?, None)),
        (_, Domain::Disc) => {
            let sol = power_subordination_circle_eta(mu, k)?;
            Ok((sol.eta.clone(), Some(sol)))
        }
        (_, Domain::Slit) => {
            let sol = power_subordination_halfline_eta(mu, k)?;
            Ok((sol.eta.clone(), Some(sol)))
        }
    }
}

/// μ^{⊠k} recovered on the default grid.
pub fn free_power(mu: &Measure, k: usize) -> Result<Measure> {
    mu.validate()?;
    if k == 1 {
        return Ok(mu.clone());
    }
    let grid = match mu.space {
        Space::Circle => circle_grid(DEFAULT_GRID),
        Space::Halfline => {
            let (a, b) = halfline_support(mu);
            halfline_grid(a.powi(k as i32), b.powi(k as i32), DEFAULT_GRID)
        }
    };
    Ok(free_power_on(mu, k, &grid)?.measure)
}

pub fn free_power_on(mu: &Measure, k: usize, grid: &[f64]) -> Result<Convolved> {
    mu.validate()?;
    let (eta, sol) = free_power_eta(&EtaEvaluator::from_measure(mu), k)?;
    recover_on(eta, grid, sol)
}

/// η^k/z^{k−1}, the k-fold Boolean power of an evaluator.
pub fn boolean_power_eta(mu: &EtaEvaluator, k: usize) -> Result<EtaEvaluator> {
    if k == 0 {
        return Err(Error::validation("k", "power must be at least 1"));
    }
    let a = mu.clone();
    let kf = k as f64;
    Ok(EtaEvaluator::from_fn(mu.domain, Provenance::Composite, Kind::Eta, format!("{}^[+]{k}", mu.label), move |z, warm| {
        let (r, dr) = a.ratio_warm(z, warm)?;
        let rk1 = r.powu(k as u32 - 1);
        Ok((rk1 * r, kf * rk1 * dr))
    }))
}

/// μ^{×∪k} recovered on `grid`; on ℝ₊ the sampled argument condition
/// k·arg η − (k − 1)·arg z < π must hold.
pub fn boolean_power_on(mu: &Measure, k: usize, grid: &[f64]) -> Result<Convolved> {
    mu.validate()?;
    let em = EtaEvaluator::from_measure(mu);
    if mu.space == Space::Halfline {
        for z in upper_half_sample() {
            let s = k as f64 * em.eval(z)?.arg() - (k as f64 - 1.0) * z.arg();
            if !(s < PI) {
                return Err(Error::NotWellDefined(format!("k arg eta - (k-1) arg z = {s} reaches pi at z = {z}; the Boolean power is not a probability law")));
            }
        }
    }
    let eta = boolean_power_eta(&em, k)?;
    recover_on(eta, grid, None)
}

/// A row δ_{c_n} ⊠ μ_{n1} ⊠ ⋯ ⊠ μ_{nk_n} of a triangular array.
#[derive(Debug, Clone)]
pub struct ArrayRow {
    pub measures: Vec<Measure>,
    pub c_n: f64,
}

impl ArrayRow {
    pub fn new(measures: Vec<Measure>, c_n: f64) -> Result<Self> {
        let row = ArrayRow { measures, c_n };
        row.validate()?;
        Ok(row)
    }

    /// A row of `k` copies of one law.
    pub fn identical(mu: Measure, k: usize, c_n: f64) -> Result<Self> {
        ArrayRow::new(vec![mu; k], c_n)
    }

    pub fn k_n(&self) -> usize {
        self.measures.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.measures.is_empty() {
            return Err(Error::validation("measures", "a row needs at least one measure"));
        }
        if !(self.c_n > 0.0) || !self.c_n.is_finite() {
            return Err(Error::validation("c_n", "must be positive"));
        }
        for m in &self.measures {
            check_space(m, Space::Halfline)?;
        }
        Ok(())
    }
}

/// −log c_n + Σ_j log B_j(z), the principal logs summed.
pub fn array_log_transform(etas: &[EtaEvaluator], c_n: f64, z: C64) -> Result<C64> {
    Domain::Slit.check(z)?;
    let mut acc = C64::new(-c_n.ln(), 0.0);
    for e in etas {
        let b = e.b(z)?;
        if b.im == 0.0 && b.re <= 0.0 {
            return Err(Error::Branch {
                z,
                reason: format!("B = {b} lies on the negative cut"),
            });
        }
        acc += b.ln();
    }
    Ok(acc)
}

/// (1/c_n)·∏_j B_{μ_nj}(z), evaluated in log space.
pub fn array_limit_transform(row: &ArrayRow, z: C64) -> Result<C64> {
    row.validate()?;
    // Identical factors share one evaluator.
    let mut etas: Vec<EtaEvaluator> = Vec::with_capacity(row.k_n());
    let mut acc = C64::new(-row.c_n.ln(), 0.0);
    let mut i = 0;
    while i < row.measures.len() {
        let mut j = i + 1;
        while j < row.measures.len() && row.measures[j] == row.measures[i] {
            j += 1;
        }
        let e = EtaEvaluator::from_measure(&row.measures[i]);
        acc += (j - i) as f64 * array_log_transform(std::slice::from_ref(&e), 1.0, z)?;
        etas.push(e);
        i = j;
    }
    Ok(acc.exp())
}

/// σ_n and γ_n of the row: σ_n = Σ_j (x−1)²/(x²+1) dμ°_{nj}(1/x) on [0, ∞] and
/// γ_n = −log c_n + Σ_j [∫ (x²−1)/(x²+1) dμ°_{nj}(1/x) − log b_{nj}], where
/// μ°_{nj} is μ_{nj} scaled by 1/b_{nj}.
pub fn gnedenko_criterion(row: &ArrayRow) -> Result<(SigmaMeasure, f64)> {
    row.validate()?;
    let mut gamma = -row.c_n.ln();
    let mut atoms: Vec<Atom> = Vec::new();
    let mut inf = 0.0;
    let mut parts: Vec<Density> = Vec::new();
    // Weights at x = 1/y in terms of y: (1−y)²/(1+y²) and (1−y²)/(1+y²).
    let w_sigma = |y: f64| (1.0 - y) * (1.0 - y) / (1.0 + y * y);
    let w_gamma = |y: f64| (1.0 - y * y) / (1.0 + y * y);
    for mu in &row.measures {
        let b = log_mean_b(mu)?;
        gamma -= b.ln();
        let centered = scale_measure(mu, b)?;
        for a in &centered.atoms {
            gamma += a.mass * w_gamma(a.pos);
            if a.pos == 0.0 {
                inf += a.mass;
                continue;
            }
            let x = 1.0 / a.pos;
            let m = a.mass * w_sigma(a.pos);
            if m == 0.0 {
                continue;
            }
            match atoms.iter_mut().find(|c| c.pos == x) {
                Some(c) => c.mass += m,
                None => atoms.push(Atom { pos: x, mass: m }),
            }
        }
        if let Some(d) = &centered.density {
            gamma += crate::special::gauss8_density(&d.nodes, &d.values, w_gamma);
            // Density of the image under y ↦ 1/x: f(1/x)/x², weighted.
            let nodes: Vec<f64> = d.nodes.iter().rev().map(|y| 1.0 / y).collect();
            let values: Vec<f64> = d.values.iter().rev().zip(d.nodes.iter().rev()).map(|(f, y)| f * y * y * w_sigma(*y)).collect();
            parts.push(Density { nodes, values });
        }
    }
    atoms.sort_by(|a, b| a.pos.total_cmp(&b.pos));
    Ok((
        SigmaMeasure {
            atoms,
            density: merge_densities(&parts),
            mass_at_inf: inf,
        },
        gamma,
    ))
}

/// Sum of piecewise-linear densities on the union of their nodes.
fn merge_densities(parts: &[Density]) -> Option<Density> {
    match parts.len() {
        0 => None,
        _ if parts.iter().all(|p| p.nodes == parts[0].nodes) => Some(Density {
            nodes: parts[0].nodes.clone(),
            values: (0..parts[0].nodes.len()).map(|i| parts.iter().map(|p| p.values[i]).sum()).collect(),
        }),
        _ => {
            let mut nodes: Vec<f64> = parts.iter().flat_map(|p| p.nodes.iter().copied()).collect();
            nodes.sort_by(f64::total_cmp);
            nodes.dedup();
            let values = nodes.iter().map(|&x| parts.iter().map(|p| p.value_at(Space::Halfline, x)).sum()).collect();
            Some(Density { nodes, values })
        }
    }
}
