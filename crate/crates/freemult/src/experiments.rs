//! Numerical demonstrations of the limit theorems: superconvergence of free
//! powers toward Haar measure, λ_t and χ_t, the Boolean-to-free correspondence
//! for infinitely divisible laws, and convergence of free entropy.
//!
//! Each run produces an [`ExperimentReport`] with one record per n plus the
//! recovered profiles, which [`ExperimentOutput::write_to`] stores as
//! `{name}.json` and `{name}_{n}.csv`.

use crate::brownian::{chi_density_grid, chi_measure, chi_support, lambda_density_grid, lambda_measure};
use crate::convolution::{boolean_power_eta, free_power_eta};
use crate::entropy::free_entropy;
use crate::error::{Error, Result};
use crate::levy::{b_log_boolean, infdiv_eta, Flavor, LevyHinchinParams, SigmaMeasure};
use crate::measure::{circle_grid, moment, Atom, DensityProfile, Measure, Space};
use crate::recovery::{recover_with, stieltjes_density_halfline_with, RecoveryOptions};
use crate::subordination::{eta_power_circle_pair, SubordinationSolution};
use crate::transforms::EtaEvaluator;
use crate::C64;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};
use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::path::Path;

/// Grid sizes, recovery ladder and pass threshold shared by all runs.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentOptions {
    /// Recovery nodes per profile.
    pub grid: usize,
    /// Nodes used to discretize input laws given in closed form.
    pub measure_nodes: usize,
    pub recovery: RecoveryOptions,
    /// Largest final sup-distance accepted by the verdict.
    pub threshold: Option<f64>,
}

impl Default for ExperimentOptions {
    fn default() -> Self {
        ExperimentOptions {
            grid: 512,
            measure_nodes: 1024,
            recovery: RecoveryOptions::default(),
            threshold: None,
        }
    }
}

impl ExperimentOptions {
    fn check(&self) -> Result<()> {
        if self.grid < 64 || self.measure_nodes < 64 {
            return Err(Error::validation("grid", "grid sizes must be at least 64"));
        }
        if self.threshold.is_some_and(|t| !(t > 0.0)) {
            return Err(Error::validation("threshold", "must be positive"));
        }
        Ok(())
    }
}

/// Measurements for one n.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Record {
    pub n: usize,
    /// Sup distance of the recovered density to the target density.
    pub sup_distance: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub derivative_distance: Option<f64>,
    /// Free entropy; absent for laws with atoms.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub entropy: Option<f64>,
    #[serde(skip_serializing_if = "std::ops::Not::not")]
    pub entropy_infinite: bool,
    pub atom_mass: f64,
    pub min_density: f64,
    pub max_density: f64,
    pub unreliable_nodes: usize,
    pub sup_error_estimate: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub residual_sup: Option<f64>,
    /// Disagreement between the two circle-power formulas.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub internal_agreement: Option<f64>,
    /// Radius g⁻¹(−σ_n(𝕋)) containing the image of the subordination map.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub containment_bound: Option<f64>,
    /// Largest |ω| observed at the certification points.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub omega_max: Option<f64>,
    pub method: String,
}

impl Record {
    fn new(n: usize, method: &str) -> Self {
        Record {
            n,
            sup_distance: 0.0,
            derivative_distance: None,
            entropy: None,
            entropy_infinite: false,
            atom_mass: 0.0,
            min_density: 0.0,
            max_density: 0.0,
            unreliable_nodes: 0,
            sup_error_estimate: 0.0,
            residual_sup: None,
            internal_agreement: None,
            containment_bound: None,
            omega_max: None,
            method: method.to_string(),
        }
    }

    fn with_profile(mut self, p: &DensityProfile) -> Self {
        self.min_density = p.values.iter().cloned().fold(f64::INFINITY, f64::min);
        self.max_density = p.values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        self.unreliable_nodes = p.unreliable.len();
        self.sup_error_estimate = p.sup_error_estimate;
        self
    }

    fn with_solution(mut self, sol: Option<&SubordinationSolution>) -> Self {
        if let Some(s) = sol {
            self.residual_sup = Some(s.residual_sup);
            self.omega_max = s.records.iter().map(|r| C64::new(r.omega[0], r.omega[1]).norm()).reduce(f64::max);
        }
        self
    }
}

/// Summary of a run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Verdict {
    pub final_sup_distance: f64,
    /// Least-squares slope of log(distance) against log(n).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trend_slope: Option<f64>,
    /// The last distance is strictly below the one before it.
    pub tail_decreasing: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub threshold: Option<f64>,
    /// First n whose law is atom-free with no unreliable recovery nodes.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ac_onset: Option<usize>,
    pub max_residual: f64,
    pub verdict: String,
}

/// Records sorted by n with the verdict.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentReport {
    pub name: String,
    pub parameters: BTreeMap<String, Value>,
    pub records: Vec<Record>,
    pub verdict: Verdict,
}

impl ExperimentReport {
    fn assemble(name: &str, parameters: BTreeMap<String, Value>, mut records: Vec<Record>, threshold: Option<f64>) -> Self {
        records.sort_by_key(|r| r.n);
        let d: Vec<f64> = records.iter().map(|r| r.sup_distance).collect();
        let final_sup_distance = d.last().copied().unwrap_or(0.0);
        let tail_decreasing = d.len() < 2 || d[d.len() - 1] < d[d.len() - 2];
        let pts: Vec<(f64, f64)> = records
            .iter()
            .filter(|r| r.sup_distance > 0.0 && r.sup_distance.is_finite())
            .map(|r| ((r.n as f64).ln(), r.sup_distance.ln()))
            .collect();
        let trend_slope = slope(&pts);
        let ac_onset = records.iter().find(|r| r.atom_mass == 0.0 && r.unreliable_nodes == 0).map(|r| r.n);
        let max_residual = records.iter().filter_map(|r| r.residual_sup).fold(0.0, f64::max);
        let ok = tail_decreasing && threshold.is_none_or(|t| final_sup_distance <= t) && final_sup_distance.is_finite();
        ExperimentReport {
            name: name.to_string(),
            parameters,
            records,
            verdict: Verdict {
                final_sup_distance,
                trend_slope,
                tail_decreasing,
                threshold,
                ac_onset,
                max_residual,
                verdict: if ok { "pass" } else { "fail" }.to_string(),
            },
        }
    }

    pub fn passed(&self) -> bool {
        self.verdict.verdict == "pass"
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

fn slope(pts: &[(f64, f64)]) -> Option<f64> {
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

/// A report with the recovered profile and law for every n.
#[derive(Debug, Clone)]
pub struct ExperimentOutput {
    pub report: ExperimentReport,
    pub profiles: Vec<(usize, DensityProfile)>,
    /// Recovered laws, for runs on the full circle.
    pub measures: Vec<(usize, Measure)>,
}

impl ExperimentOutput {
    /// Write `{name}.json` and one `{name}_{n}.csv` per profile into `dir`.
    pub fn write_to(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        let name = &self.report.name;
        std::fs::write(dir.join(format!("{name}.json")), self.report.to_json())?;
        for (n, p) in &self.profiles {
            std::fs::write(dir.join(format!("{name}_{n}.csv")), p.to_csv())?;
        }
        Ok(())
    }
}

struct Run {
    record: Record,
    profile: DensityProfile,
    measure: Option<Measure>,
}

fn collect(name: &str, params: BTreeMap<String, Value>, runs: Vec<Run>, threshold: Option<f64>) -> ExperimentOutput {
    let mut runs = runs;
    runs.sort_by_key(|r| r.record.n);
    let profiles = runs.iter().map(|r| (r.record.n, r.profile.clone())).collect();
    let measures = runs.iter().filter_map(|r| r.measure.clone().map(|m| (r.record.n, m))).collect();
    let records = runs.into_iter().map(|r| r.record).collect();
    ExperimentOutput {
        report: ExperimentReport::assemble(name, params, records, threshold),
        profiles,
        measures,
    }
}

fn check_n_list(n_list: &[usize]) -> Result<()> {
    if n_list.is_empty() || n_list.contains(&0) {
        return Err(Error::validation("n_list", "need at least one n, all ≥ 1"));
    }
    Ok(())
}

fn sup_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn method_of(n: usize, sol: &Option<SubordinationSolution>) -> &'static str {
    match (n, sol) {
        (1, _) => "identity",
        (2, _) => "two-fold",
        (_, Some(_)) => "power-subordination",
        _ => "closed-form",
    }
}

/// Recover ν = (η)^{⊠n} on a full circle grid with atoms and entropy.
fn circle_power_run(eta: &EtaEvaluator, n: usize, target: &[f64], opts: &ExperimentOptions) -> Result<Run> {
    let grid = circle_grid(opts.grid);
    let (nu, sol) = free_power_eta(eta, n)?;
    let rec = recover_with(&nu, &grid, &nu.label, &opts.recovery)?;
    let mut record = Record::new(n, method_of(n, &sol)).with_profile(&rec.profile).with_solution(sol.as_ref());
    record.atom_mass = rec.measure.atom_mass().abs();
    record.sup_distance = sup_diff(&rec.profile.values, target);
    let e = free_entropy(&rec.measure)?;
    record.entropy = e.is_finite().then_some(e.value);
    record.entropy_infinite = !e.is_finite();
    if let Some(s) = &sol {
        let zs: Vec<C64> = (0..32).map(|j| C64::from_polar(0.9, -PI + 2.0 * PI * (j as f64 + 0.5) / 32.0)).collect();
        let mut worst: f64 = 0.0;
        for z in zs {
            let (a, b) = eta_power_circle_pair(s, eta, z)?;
            worst = worst.max((a - b).norm());
        }
        record.internal_agreement = Some(worst);
    }
    Ok(Run {
        record,
        profile: rec.profile,
        measure: Some(rec.measure),
    })
}

/// g(r) = (1 + r)·log r/(1 − r), increasing from −∞ to −2 on (0, 1).
pub fn containment_g(r: f64) -> f64 {
    (1.0 + r) * r.ln() / (1.0 - r)
}

/// g⁻¹(y) for y < −2 by bisection; `None` outside the range of g.
pub fn containment_radius(y: f64) -> Option<f64> {
    if !(y < -2.0) {
        return None;
    }
    let (mut a, mut b) = (0.0f64, 1.0f64);
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        if m <= 0.0 || m >= 1.0 || b - a < 1e-16 {
            break;
        }
        if containment_g(m) < y {
            a = m;
        } else {
            b = m;
        }
    }
    Some(0.5 * (a + b))
}

fn params(pairs: &[(&str, Value)]) -> BTreeMap<String, Value> {
    pairs.iter().map(|(k, v)| (k.to_string(), v.clone())).collect()
}

/// Free powers μ^{⊠n} of a circle law with 0 < |m(μ)| < 1 against 1/2π.
/// A zero mean stops at n = 2, where the power is already Haar measure.
pub fn run_haar_superconvergence(mu: &Measure, n_list: &[usize], opts: &ExperimentOptions) -> Result<ExperimentOutput> {
    opts.check()?;
    check_n_list(n_list)?;
    if mu.space != Space::Circle {
        return Err(Error::validation("measure.space", "a circle measure is required"));
    }
    let m = moment(mu, 1)?;
    if m.norm() >= 1.0 - 1e-12 {
        return Err(Error::validation("mean", "|m(mu)| must be below 1"));
    }
    let mut ps = params(&[
        ("measure", json!(mu.label)),
        ("mean", json!([m.re, m.im])),
        ("n_list", json!(n_list)),
        ("grid", json!(opts.grid)),
    ]);
    let flat = vec![1.0 / (2.0 * PI); opts.grid];
    if m.norm() < 1e-14 {
        ps.insert("short_circuit".into(), json!("zero mean: the square is Haar measure"));
        let mut record = Record::new(2, "zero-mean");
        let profile = DensityProfile::new(Space::Circle, circle_grid(opts.grid), flat);
        record = record.with_profile(&profile);
        record.entropy = Some(0.0);
        let run = Run {
            record,
            profile,
            measure: Some(Measure::haar(opts.grid)),
        };
        return Ok(collect("haar", ps, vec![run], opts.threshold));
    }
    let eta = EtaEvaluator::from_measure(mu);
    let runs = n_list
        .par_iter()
        .map(|&n| {
            let mut run = circle_power_run(&eta, n, &flat, opts)?;
            // σ_n(𝕋) = −(n − 2)·log|m(μ)|.
            let sigma_t = -(n as f64 - 2.0) * m.norm().ln();
            run.record.containment_bound = containment_radius(-sigma_t);
            Ok(run)
        })
        .collect::<Result<Vec<Run>>>()?;
    Ok(collect("haar", ps, runs, opts.threshold))
}

/// Row laws converging to λ_t under n-fold free powers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum LambdaFamily {
    /// ½δ_{e^{iε}} + ½δ_{e^{−iε}} with ε = √(t/n).
    TwoAtom,
    /// λ_{t/n} itself.
    Exact,
}

impl LambdaFamily {
    pub fn name(self) -> &'static str {
        match self {
            LambdaFamily::TwoAtom => "two-atom",
            LambdaFamily::Exact => "exact",
        }
    }

    /// The row law for n.
    pub fn row(self, t: f64, n: usize, nodes: usize) -> Result<Measure> {
        match self {
            LambdaFamily::TwoAtom => {
                let e = (t / n as f64).sqrt();
                Measure::atomic(
                    Space::Circle,
                    vec![Atom { pos: -e, mass: 0.5 }, Atom { pos: e, mass: 0.5 }],
                    format!("two-atom({e})"),
                )
            }
            LambdaFamily::Exact => lambda_measure(t / n as f64, nodes),
        }
    }
}

/// (μ_n)^{⊠n} against the closed-form density of λ_t on all of 𝕋.
pub fn run_lambda_superconvergence(t: f64, n_list: &[usize], family: LambdaFamily, opts: &ExperimentOptions) -> Result<ExperimentOutput> {
    opts.check()?;
    check_n_list(n_list)?;
    if !(t > 0.0 && t.is_finite()) {
        return Err(Error::validation("t", "must be positive"));
    }
    let target = lambda_density_grid(t, &circle_grid(opts.grid))?;
    let ps = params(&[
        ("t", json!(t)),
        ("family", json!(family.name())),
        ("n_list", json!(n_list)),
        ("grid", json!(opts.grid)),
    ]);
    let runs = n_list
        .par_iter()
        .map(|&n| {
            let mu = family.row(t, n, opts.measure_nodes)?;
            circle_power_run(&EtaEvaluator::from_measure(&mu), n, &target, opts)
        })
        .collect::<Result<Vec<Run>>>()?;
    Ok(collect(&format!("lambda-{}", family.name()), ps, runs, opts.threshold))
}

/// Uniform window [x₁ + ε, x₂ − ε] inside the support of χ_t.
pub fn chi_window(t: f64, eps: f64, n: usize) -> Result<Vec<f64>> {
    let (x1, x2) = chi_support(t)?;
    let (a, b) = (x1 + eps, x2 - eps);
    if !(eps > 0.0 && a < b) {
        return Err(Error::validation("epsilon", "need epsilon > 0 and x1 + epsilon < x2 - epsilon"));
    }
    Ok((0..n).map(|j| a + (b - a) * j as f64 / (n - 1) as f64).collect())
}

fn central_diff(x: &[f64], f: &[f64]) -> Vec<f64> {
    (1..x.len() - 1).map(|i| (f[i + 1] - f[i - 1]) / (x[i + 1] - x[i - 1])).collect()
}

fn halfline_power_run(eta: &EtaEvaluator, n: usize, grid: &[f64], target: &[f64], opts: &ExperimentOptions) -> Result<Run> {
    let (nu, sol) = free_power_eta(eta, n)?;
    let profile = stieltjes_density_halfline_with(&nu, grid, &opts.recovery)?;
    let mut record = Record::new(n, method_of(n, &sol)).with_profile(&profile).with_solution(sol.as_ref());
    record.sup_distance = sup_diff(&profile.values, target);
    record.derivative_distance = Some(sup_diff(&central_diff(grid, &profile.values), &central_diff(grid, target)));
    Ok(Run {
        record,
        profile,
        measure: None,
    })
}

/// (χ_{t/n})^{⊠n} against χ_t on [x₁ + ε, x₂ − ε], with the distance of
/// central-difference derivatives.
pub fn run_chi_superconvergence(t: f64, n_list: &[usize], eps: f64, opts: &ExperimentOptions) -> Result<ExperimentOutput> {
    opts.check()?;
    check_n_list(n_list)?;
    let grid = chi_window(t, eps, opts.grid)?;
    let target = chi_density_grid(t, &grid)?;
    let ps = params(&[
        ("t", json!(t)),
        ("epsilon", json!(eps)),
        ("n_list", json!(n_list)),
        ("grid", json!(opts.grid)),
    ]);
    let runs = n_list
        .par_iter()
        .map(|&n| {
            let mu = chi_measure(t / n as f64, opts.measure_nodes)?;
            halfline_power_run(&EtaEvaluator::from_measure(&mu), n, &grid, &target, opts)
        })
        .collect::<Result<Vec<Run>>>()?;
    Ok(collect("chi", ps, runs, opts.threshold))
}

/// Points of the left half-plane where Boolean exponents are compared.
fn b_sample() -> Vec<C64> {
    (0..16)
        .map(|j| {
            let a = PI / 2.0 + PI * (j as f64 + 0.5) / 16.0;
            C64::from_polar(0.5 + 0.25 * (j % 4) as f64, a)
        })
        .collect()
}

/// Boolean roots (γ/n, σ/n) of a half-line law, recombined by Boolean and by
/// free n-fold powers. The free side is compared with the free law of the
/// same parameters: χ_t in closed form when σ = (t/2)δ₁ and γ = 0, η·z⁻¹ = c
/// when σ = 0, and global inversion otherwise.
pub fn run_bercovici_pata(gamma: f64, sigma: &SigmaMeasure, n_list: &[usize], window: Option<(f64, f64)>, opts: &ExperimentOptions) -> Result<ExperimentOutput> {
    opts.check()?;
    check_n_list(n_list)?;
    let boolean = LevyHinchinParams::halfline(Flavor::Boolean, gamma, sigma.clone());
    boolean.validate()?;
    let chi_t = (gamma == 0.0 && sigma.density.is_none() && sigma.mass_at_inf == 0.0 && sigma.atoms.len() == 1 && sigma.atoms[0].pos == 1.0)
        .then(|| 2.0 * sigma.atoms[0].mass);
    let point = sigma.total_mass(Space::Halfline) == 0.0 && sigma.mass_at_inf == 0.0;
    let ps = params(&[
        ("gamma", json!(gamma)),
        ("sigma", serde_json::to_value(sigma)?),
        ("n_list", json!(n_list)),
        ("grid", json!(opts.grid)),
    ]);
    let grid: Vec<f64> = match (chi_t, window) {
        (_, Some((a, b))) if a > 0.0 && a < b => (0..opts.grid).map(|j| a + (b - a) * j as f64 / (opts.grid - 1) as f64).collect(),
        (_, Some(_)) => return Err(Error::validation("window", "need 0 < a < b")),
        (Some(t), None) => chi_window(t, 0.05, opts.grid)?,
        (None, None) => crate::measure::geometric_grid(0.05, 20.0, opts.grid),
    };
    let target = match chi_t {
        Some(t) => chi_density_grid(t, &grid)?,
        None if point => vec![0.0; grid.len()],
        None => {
            let free = LevyHinchinParams::halfline(Flavor::Free, gamma, sigma.clone());
            let (eta, _) = infdiv_eta(&free)?;
            stieltjes_density_halfline_with(&eta, &grid, &opts.recovery)?.values
        }
    };
    let zs = b_sample();
    let base: Vec<C64> = zs.iter().map(|&z| b_log_boolean(&boolean, z)).collect::<Result<_>>()?;
    let runs = n_list
        .par_iter()
        .map(|&n| {
            let root = boolean.root(n);
            let (eta, _) = infdiv_eta(&root)?;
            // log B of the n-fold Boolean power of the root, against the exponent of the law.
            let recombined = boolean_power_eta(&eta, n)?;
            let mut b_dist: f64 = 0.0;
            for (z, b) in zs.iter().zip(&base) {
                let v = (*z / recombined.eval(*z)?).ln();
                b_dist = b_dist.max((v - b).norm());
            }
            let mut run = if point {
                let (nu, sol) = free_power_eta(&eta, n)?;
                let c = (-gamma).exp();
                let mut d: f64 = 0.0;
                for z in &zs {
                    d = d.max((nu.eval(*z)? - c * z).norm());
                }
                let mut record = Record::new(n, method_of(n, &sol)).with_solution(sol.as_ref());
                record.sup_distance = d;
                record.atom_mass = 1.0;
                Run {
                    record,
                    profile: DensityProfile::new(Space::Halfline, grid.clone(), vec![0.0; grid.len()]),
                    measure: None,
                }
            } else {
                halfline_power_run(&eta, n, &grid, &target, opts)?
            };
            run.record.internal_agreement = Some(b_dist);
            Ok(run)
        })
        .collect::<Result<Vec<Run>>>()?;
    Ok(collect("bp", ps, runs, opts.threshold))
}

/// Σ(ν_n) against Σ(target) for recovered circle laws.
pub fn run_entropy_convergence(laws: &[(usize, Measure)], target: &Measure) -> Result<ExperimentOutput> {
    if laws.is_empty() {
        return Err(Error::validation("laws", "need at least one law"));
    }
    let st = free_entropy(target)?;
    let ps = params(&[
        ("target", json!(target.label)),
        ("target_entropy", json!(st.value)),
        ("n_list", json!(laws.iter().map(|l| l.0).collect::<Vec<_>>())),
    ]);
    let runs = laws
        .par_iter()
        .map(|(n, mu)| {
            let e = free_entropy(mu)?;
            let mut record = Record::new(*n, "entropy");
            record.entropy = e.is_finite().then_some(e.value);
            record.entropy_infinite = !e.is_finite();
            record.atom_mass = mu.atom_mass().abs();
            record.sup_distance = if e.is_finite() && st.is_finite() {
                (e.value - st.value).abs()
            } else if e.value == st.value {
                0.0
            } else {
                f64::INFINITY
            };
            let profile = match &mu.density {
                Some(d) => DensityProfile::new(Space::Circle, d.nodes.clone(), d.values.clone()),
                None => DensityProfile::new(Space::Circle, vec![], vec![]),
            };
            record = record.with_profile(&profile);
            Ok(Run {
                record,
                profile,
                measure: None,
            })
        })
        .collect::<Result<Vec<Run>>>()?;
    Ok(collect("entropy", ps, runs, None))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn g_closed_form_and_inverse() {
        assert!((containment_g(0.5) - 3.0 * 0.5f64.ln()).abs() < 1e-15);
        assert!((containment_g(1.0 - 1e-9) + 2.0).abs() < 1e-6);
        let r = containment_radius(-5.0).unwrap();
        assert!((containment_g(r) + 5.0).abs() < 1e-10);
        assert!(containment_radius(-1.5).is_none());
    }

    #[test]
    fn zero_mean_stops_at_two() {
        let mu = Measure::atomic(Space::Circle, vec![Atom { pos: 0.0, mass: 0.5 }, Atom { pos: PI, mass: 0.5 }], "pm").unwrap();
        let out = run_haar_superconvergence(&mu, &[2, 4, 8], &ExperimentOptions::default()).unwrap();
        assert_eq!(out.report.records.len(), 1);
        assert_eq!(out.report.records[0].n, 2);
        assert_eq!(out.report.records[0].sup_distance, 0.0);
    }

    #[test]
    fn haar_distance_shrinks() {
        let mu = Measure::atomic(Space::Circle, vec![Atom { pos: 0.0, mass: 0.95 }, Atom { pos: PI, mass: 0.05 }], "mu").unwrap();
        let opts = ExperimentOptions {
            grid: 256,
            ..Default::default()
        };
        let out = run_haar_superconvergence(&mu, &[24, 48], &opts).unwrap();
        let r = &out.report.records;
        assert!(r[1].sup_distance < r[0].sup_distance, "{r:?}");
        assert!(r[1].containment_bound.unwrap() < 1.0);
        assert!(out.report.verdict.max_residual <= 1e-10);
    }

    #[test]
    fn lambda_two_fold_dispatch() {
        let opts = ExperimentOptions {
            grid: 128,
            ..Default::default()
        };
        let out = run_lambda_superconvergence(1.0, &[2, 3], LambdaFamily::TwoAtom, &opts).unwrap();
        assert_eq!(out.report.records[0].method, "two-fold");
        assert_eq!(out.report.records[1].method, "power-subordination");
        assert!(out.report.records[1].internal_agreement.unwrap() < 1e-8);
    }

    #[test]
    fn boolean_recombination_and_point_rows() {
        let out = run_bercovici_pata(-0.4f64, &SigmaMeasure::zero(), &[4, 16], None, &ExperimentOptions::default()).unwrap();
        for r in &out.report.records {
            assert!(r.internal_agreement.unwrap() <= 1e-12);
            assert!(r.sup_distance < 1e-10, "{r:?}");
        }
    }

    #[test]
    fn entropy_of_constant_family() {
        let haar = Measure::haar(256);
        let out = run_entropy_convergence(&[(1, haar.clone()), (2, haar.clone())], &haar).unwrap();
        assert!(out.report.records.iter().all(|r| r.sup_distance < 1e-10));
    }

    #[test]
    fn reports_write_files() {
        let haar = Measure::haar(128);
        let out = run_entropy_convergence(&[(3, haar.clone())], &haar).unwrap();
        let dir = std::env::temp_dir().join(format!("freemult-exp-{}", std::process::id()));
        out.write_to(&dir).unwrap();
        assert!(dir.join("entropy.json").exists());
        assert!(dir.join("entropy_3.csv").exists());
        std::fs::remove_dir_all(&dir).unwrap();
    }
}
