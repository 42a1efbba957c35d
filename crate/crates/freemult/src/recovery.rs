//! Density recovery from η-evaluators.
//!
//! Half-line: the Cauchy transform is G(ζ) = 1/(ζ(1 − η(1/ζ))) and the density
//! is −Im G(x + iy)/π as y → 0⁺. Circle: the density at e^{iθ} is the boundary
//! value of (1/2π)(1 − |η|²)/|1 − η|² at r·e^{−iθ} as r → 1⁻. Both limits are
//! sampled on the dyadic ladder h = 2^{−j} and extrapolated with the order-one
//! Richardson step R_j = 2p_{j+1} − p_j.
//!
//! Both sampled kernels are linear in the measure. Atoms are located first
//! (kernel samples growing like 1/h), their mass is read off h·p(h), and their
//! exact kernel contribution is subtracted from every rung before
//! extrapolation, so the profile holds only the continuous part.

use crate::error::{Error, Result};
use crate::measure::{Atom, DensityProfile, Measure, Space};
use crate::transforms::{Domain, EtaEvaluator, Warm};
use crate::C64;
use rayon::prelude::*;
use std::f64::consts::PI;

/// Dyadic ladder and reliability threshold.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RecoveryOptions {
    pub j_min: i32,
    pub j_max: i32,
    /// Differences of extrapolants below this size are ignored by the
    /// monotonicity check.
    pub flat_tol: f64,
}

impl Default for RecoveryOptions {
    fn default() -> Self {
        RecoveryOptions {
            j_min: 4,
            j_max: 12,
            flat_tol: 1e-12,
        }
    }
}

impl RecoveryOptions {
    fn check(&self) -> Result<()> {
        if self.j_min < 1 || self.j_max < self.j_min + 2 || self.j_max > 40 {
            return Err(Error::validation("recovery", "need 1 <= j_min and j_min + 2 <= j_max <= 40"));
        }
        if !(self.flat_tol > 0.0) {
            return Err(Error::validation("recovery.flat_tol", "must be positive"));
        }
        Ok(())
    }

    fn h(&self, j: i32) -> f64 {
        2f64.powi(-j)
    }
}

/// Deficit threshold below which no atom is expected.
pub const ATOM_THRESHOLD: f64 = 1e-3;

/// Most atoms searched for in one profile.
const MAX_ATOMS: usize = 16;

/// Raw kernel sample at (x, h).
fn sample(eta: &EtaEvaluator, space: Space, x: f64, h: f64, warm: &mut Warm) -> Result<f64> {
    match space {
        Space::Halfline => {
            // −Im G(x + iy)/π.
            let zeta = C64::new(x, h);
            let e = eta.eval_warm(1.0 / zeta, warm)?;
            Ok(-(1.0 / (zeta * (1.0 - e))).im / PI)
        }
        Space::Circle => {
            // (1/2π)(1 − |η|²)/|1 − η|² at (1 − h)·e^{−iθ}.
            let e = eta.eval_warm(C64::from_polar(1.0 - h, -x), warm)?;
            Ok((1.0 - e.norm_sqr()) / ((1.0 - e).norm_sqr() * 2.0 * PI))
        }
    }
}

/// Kernel sample of a unit point mass at `a`.
fn atom_kernel(space: Space, a: f64, x: f64, h: f64) -> f64 {
    match space {
        Space::Halfline => h / (PI * ((x - a) * (x - a) + h * h)),
        Space::Circle => {
            let r = 1.0 - h;
            (1.0 - r * r) / (2.0 * PI * (1.0 - 2.0 * r * (a - x).cos() + r * r))
        }
    }
}

/// Raw samples p_j(x) for every rung of the ladder, rows indexed by j.
fn ladder(eta: &EtaEvaluator, space: Space, grid: &[f64], opts: &RecoveryOptions) -> Result<Vec<Vec<f64>>> {
    let js: Vec<i32> = (opts.j_min..=opts.j_max).collect();
    js.par_iter()
        .map(|&j| {
            let h = opts.h(j);
            let mut warm = Warm::default();
            grid.iter().map(|&x| sample(eta, space, x, h, &mut warm)).collect::<Result<Vec<f64>>>()
        })
        .collect()
}

/// Golden-section search for a maximum of `f` on [a, b].
fn golden_max(mut a: f64, mut b: f64, mut f: impl FnMut(f64) -> Result<f64>) -> Result<(f64, f64)> {
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let (mut fc, mut fd) = (f(c)?, f(d)?);
    for _ in 0..200 {
        if (b - a).abs() <= 1e-13 * (1.0 + a.abs()) {
            break;
        }
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = f(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = f(d)?;
        }
    }
    let m = 0.5 * (a + b);
    Ok((m, f(m)?))
}

/// Atoms from the ladder: local maxima of any rung are refined by golden
/// section at the finest rung and accepted when the kernel grows like 1/h there.
fn detect_atoms(eta: &EtaEvaluator, space: Space, grid: &[f64], rows: &[Vec<f64>], opts: &RecoveryOptions) -> Result<Vec<Atom>> {
    let n = grid.len();
    let (hf, hc) = (opts.h(opts.j_max), opts.h(opts.j_max - 1));
    // Score each node by the largest π·h·p over the rungs where it is a local maximum.
    let mut score = vec![0.0f64; n];
    for (row, j) in rows.iter().zip(opts.j_min..) {
        let h = opts.h(j);
        for i in 0..n {
            let l = if i > 0 { row[i - 1] } else { f64::NEG_INFINITY };
            let r = if i + 1 < n { row[i + 1] } else { f64::NEG_INFINITY };
            if row[i] >= l && row[i] >= r {
                score[i] = score[i].max(PI * h * row[i]);
            }
        }
    }
    let mut cands: Vec<usize> = (0..n).filter(|&i| score[i] > 1e-4).collect();
    cands.sort_by(|&a, &b| score[b].total_cmp(&score[a]));
    cands.truncate(MAX_ATOMS);
    let mut atoms: Vec<Atom> = Vec::new();
    for i in cands {
        let (a, b) = (grid[i.saturating_sub(1)], grid[(i + 1).min(n - 1)]);
        let (pos, pf) = golden_max(a, b, |x| sample(eta, space, x, hf, &mut Warm::default()))?;
        let pc = sample(eta, space, pos, hc, &mut Warm::default())?;
        if !(pf > 1.6 * pc) {
            continue;
        }
        // π·h·p(h) → m; one Richardson step removes the O(h) continuous part.
        let mass = 2.0 * PI * hf * pf - PI * hc * pc;
        if mass > 0.0 && !atoms.iter().any(|t| (t.pos - pos).abs() < 1e-9 * (1.0 + pos.abs())) {
            atoms.push(Atom { pos, mass: mass.min(1.0) });
        }
    }
    atoms.sort_by(|a, b| a.pos.total_cmp(&b.pos));
    Ok(atoms)
}

fn extrapolate(space: Space, grid: &[f64], rows: &[Vec<f64>], opts: &RecoveryOptions) -> DensityProfile {
    let n = grid.len();
    let mut values = Vec::with_capacity(n);
    let mut unreliable = Vec::new();
    let mut sup_err: f64 = 0.0;
    let mut min_raw = f64::INFINITY;
    for i in 0..n {
        let rich: Vec<f64> = rows.windows(2).map(|w| 2.0 * w[1][i] - w[0][i]).collect();
        let last = rich[rich.len() - 1];
        let prev = rich[rich.len() - 2];
        let tail = &rich[rich.len().saturating_sub(4)..];
        let diffs: Vec<f64> = tail
            .windows(2)
            .map(|w| w[1] - w[0])
            .filter(|d| d.abs() > opts.flat_tol * (1.0 + last.abs()))
            .collect();
        if diffs.iter().any(|d| *d > 0.0) && diffs.iter().any(|d| *d < 0.0) || !last.is_finite() {
            unreliable.push(i);
        }
        if !last.is_finite() {
            values.push(0.0);
            continue;
        }
        min_raw = min_raw.min(last);
        sup_err = sup_err.max((last - prev).abs());
        values.push(last.max(0.0));
    }
    let mut p = DensityProfile::new(space, grid.to_vec(), values);
    p.sup_error_estimate = sup_err;
    p.unreliable = unreliable;
    p.with_meta("min_raw", min_raw)
        .with_meta("ladder", format!("{}..{}", opts.j_min, opts.j_max))
}

fn check_grid(space: Space, grid: &[f64]) -> Result<()> {
    if grid.len() < 2 {
        return Err(Error::validation("grid", "at least two nodes are required"));
    }
    for w in grid.windows(2) {
        if !(w[1] > w[0]) {
            return Err(Error::validation("grid", "grid must be strictly increasing"));
        }
    }
    match space {
        Space::Halfline if !(grid[0] > 0.0 && grid[grid.len() - 1].is_finite()) => {
            Err(Error::validation("grid", "grid range: half-line nodes must lie in (0, inf)"))
        }
        Space::Circle if !(grid[0] > -PI && grid[grid.len() - 1] <= PI) => {
            Err(Error::validation("grid", "grid range: circle nodes must lie in (-pi, pi]"))
        }
        _ => Ok(()),
    }
}

fn run(eta: &EtaEvaluator, space: Space, grid: &[f64], opts: &RecoveryOptions) -> Result<(DensityProfile, Vec<Atom>)> {
    opts.check()?;
    let want = match space {
        Space::Halfline => Domain::Slit,
        Space::Circle => Domain::Disc,
    };
    if eta.domain != want {
        return Err(Error::validation("eta", format!("{} recovery needs a {} evaluator", space.name(), space.name())));
    }
    check_grid(space, grid)?;
    let mut rows = ladder(eta, space, grid, opts)?;
    let atoms = detect_atoms(eta, space, grid, &rows, opts)?;
    for (row, j) in rows.iter_mut().zip(opts.j_min..) {
        let h = opts.h(j);
        for (v, &x) in row.iter_mut().zip(grid) {
            for a in &atoms {
                *v -= a.mass * atom_kernel(space, a.pos, x, h);
            }
        }
    }
    let mut profile = extrapolate(space, grid, &rows, opts);
    if !atoms.is_empty() {
        let list: Vec<String> = atoms.iter().map(|a| format!("{}@{}", a.mass, a.pos)).collect();
        profile = profile.with_meta("atoms", list.join(" "));
    }
    Ok((profile, atoms))
}

/// Absolutely continuous part on ℝ₊ by Stieltjes inversion, default ladder.
pub fn stieltjes_density_halfline(eta: &EtaEvaluator, grid: &[f64]) -> Result<DensityProfile> {
    stieltjes_density_halfline_with(eta, grid, &RecoveryOptions::default())
}

pub fn stieltjes_density_halfline_with(eta: &EtaEvaluator, grid: &[f64], opts: &RecoveryOptions) -> Result<DensityProfile> {
    Ok(run(eta, Space::Halfline, grid, opts)?.0)
}

/// Absolutely continuous part on 𝕋 by Poisson boundary values, default ladder.
pub fn poisson_density_circle(eta: &EtaEvaluator, grid: &[f64]) -> Result<DensityProfile> {
    poisson_density_circle_with(eta, grid, &RecoveryOptions::default())
}

pub fn poisson_density_circle_with(eta: &EtaEvaluator, grid: &[f64], opts: &RecoveryOptions) -> Result<DensityProfile> {
    Ok(run(eta, Space::Circle, grid, opts)?.0)
}

/// Detected atoms together with the mass deficit of the profile.
#[derive(Debug, Clone, PartialEq)]
pub struct AtomReport {
    pub atoms: Vec<Atom>,
    /// 1 − ∫f over the profile grid.
    pub deficit: f64,
    /// Set when the deficit exceeds the threshold but no kernel blow-up
    /// accounts for it.
    pub ambiguous: bool,
}

fn report(profile: &DensityProfile, atoms: Vec<Atom>) -> AtomReport {
    let deficit = 1.0 - profile.mass();
    let found: f64 = atoms.iter().map(|a| a.mass).sum();
    let ambiguous = deficit >= ATOM_THRESHOLD && (deficit - found).abs() > 0.5 * deficit;
    AtomReport { atoms, deficit, ambiguous }
}

/// Atoms of the law behind `profile`, located where the boundary kernel
/// blows up, with masses read from the blow-up rate.
pub fn atom_report(eta: &EtaEvaluator, profile: &DensityProfile) -> Result<AtomReport> {
    atom_report_with(eta, profile, &RecoveryOptions::default())
}

pub fn atom_report_with(eta: &EtaEvaluator, profile: &DensityProfile, opts: &RecoveryOptions) -> Result<AtomReport> {
    opts.check()?;
    let rows = ladder(eta, profile.space, &profile.nodes, opts)?;
    let atoms = detect_atoms(eta, profile.space, &profile.nodes, &rows, opts)?;
    Ok(report(profile, atoms))
}

/// A recovered law: the measure, the continuous profile and the atom report.
#[derive(Debug, Clone)]
pub struct Recovered {
    pub measure: Measure,
    pub profile: DensityProfile,
    pub atoms: AtomReport,
}

/// Density recovery on `grid` with atom detection, assembled into a
/// unit-mass measure.
pub fn recover(eta: &EtaEvaluator, grid: &[f64], label: &str) -> Result<Recovered> {
    recover_with(eta, grid, label, &RecoveryOptions::default())
}

pub fn recover_with(eta: &EtaEvaluator, grid: &[f64], label: &str, opts: &RecoveryOptions) -> Result<Recovered> {
    let space = eta.space();
    let (profile, atoms) = run(eta, space, grid, opts)?;
    let rep = report(&profile, atoms);
    let atom_mass: f64 = rep.atoms.iter().map(|a| a.mass).sum();
    let measure = if profile.mass() <= 1e-6 || atom_mass >= 1.0 - 1e-6 {
        if rep.atoms.is_empty() {
            return Err(Error::NotWellDefined("recovered profile carries no mass on the grid".into()));
        }
        let list = rep.atoms.iter().map(|a| Atom { pos: a.pos, mass: a.mass / atom_mass }).collect();
        Measure::atomic(space, list, label)?
    } else {
        profile.to_measure(rep.atoms.clone(), label)?
    };
    Ok(Recovered { measure, profile, atoms: rep })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measure::{circle_grid, geometric_grid};
    use crate::transforms::{Kind, Provenance};

    #[test]
    fn haar_is_exact_at_every_radius() {
        let eta = EtaEvaluator::from_fn(Domain::Disc, Provenance::ClosedForm, Kind::Eta, "haar", |_, _| {
            Ok((C64::new(0.0, 0.0), C64::new(0.0, 0.0)))
        });
        let p = poisson_density_circle(&eta, &circle_grid(64)).unwrap();
        for v in &p.values {
            assert_eq!(*v, 1.0 / (2.0 * PI));
        }
        assert!(p.unreliable.is_empty());
        let rep = atom_report(&eta, &p).unwrap();
        assert!(rep.atoms.is_empty() && !rep.ambiguous);
    }

    #[test]
    fn point_mass_on_circle_is_reported() {
        let eta = EtaEvaluator::identity(Domain::Disc);
        let p = poisson_density_circle(&eta, &circle_grid(256)).unwrap();
        let rep = atom_report(&eta, &p).unwrap();
        assert_eq!(rep.atoms.len(), 1);
        assert!(rep.atoms[0].pos.abs() < 1e-7, "{rep:?}");
        assert!((rep.atoms[0].mass - 1.0).abs() < 1e-6, "{rep:?}");
        assert!(p.mass() < 1e-6);
        assert!(!rep.ambiguous);
    }

    #[test]
    fn off_grid_point_mass_on_halfline() {
        let mu = Measure::point(Space::Halfline, 2.0).unwrap();
        let eta = EtaEvaluator::from_measure(&mu);
        let grid = geometric_grid(0.5, 8.0, 128);
        let r = recover(&eta, &grid, "delta").unwrap();
        assert_eq!(r.measure.atoms.len(), 1);
        assert!((r.measure.atoms[0].pos - 2.0).abs() < 1e-7, "{:?}", r.atoms);
        assert!(r.profile.values.iter().all(|v| *v < 1e-6));
    }

    #[test]
    fn mixture_reports_half_atom() {
        let nodes = geometric_grid(0.5, 1.5, 401);
        let mut mu = Measure::from_samples(Space::Halfline, nodes, |x| ((x - 0.5) * (1.5 - x)).max(0.0), "bump").unwrap();
        let d = mu.density.as_mut().unwrap();
        d.values.iter_mut().for_each(|v| *v *= 0.5);
        mu.atoms.push(Atom { pos: 3.0, mass: 0.5 });
        mu.validate().unwrap();
        let eta = EtaEvaluator::from_measure(&mu);
        let grid = geometric_grid(0.4, 4.0, 512);
        let p = stieltjes_density_halfline(&eta, &grid).unwrap();
        let rep = atom_report(&eta, &p).unwrap();
        assert_eq!(rep.atoms.len(), 1);
        assert!((rep.atoms[0].mass - 0.5).abs() < 1e-3, "{rep:?}");
        assert!((rep.deficit - 0.5).abs() < 1e-3, "{rep:?}");
    }

    #[test]
    fn round_trip_of_smooth_halfline_law() {
        let nodes = geometric_grid(0.5, 2.0, 801);
        let mu = Measure::from_samples(Space::Halfline, nodes, |x| ((x - 0.5) * (2.0 - x)).max(0.0), "bump").unwrap();
        let eta = EtaEvaluator::from_measure(&mu);
        let grid = geometric_grid(0.6, 1.9, 64);
        let p = stieltjes_density_halfline(&eta, &grid).unwrap();
        let d = p.sup_distance(|x| mu.density_at(x));
        assert!(d < 1e-3, "{d}");
    }

    #[test]
    fn invalid_inputs() {
        let eta = EtaEvaluator::identity(Domain::Disc);
        assert!(stieltjes_density_halfline(&eta, &[1.0, 2.0]).unwrap_err().is_validation());
        assert!(poisson_density_circle(&eta, &[1.0, 0.5]).unwrap_err().is_validation());
        let bad = RecoveryOptions { j_min: 4, j_max: 5, flat_tol: 1e-12 };
        assert!(poisson_density_circle_with(&eta, &[0.0, 1.0], &bad).is_err());
    }
}
