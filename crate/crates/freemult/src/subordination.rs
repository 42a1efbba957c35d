//! Subordination functions.
//!
//! A left inverse is written Φ(w) = w/q(w). On the disc, ω(z) = Φ⁻¹(z) is the
//! Denjoy–Wolff point of w ↦ z·q(w), found by plain iteration accelerated with
//! Newton steps. On ℂ∖ℝ₊ the analogous map need not be a self-map, so ω is
//! tracked by predictor–corrector continuation from the negative axis.

use crate::error::{Error, Result};
use crate::measure::{Measure, Space};
use crate::transforms::{Domain, EtaEvaluator, Kind, Provenance, RatioMap, Warm};
use crate::C64;
use serde::Serialize;
use std::f64::consts::PI;
use std::sync::Arc;

/// Fixed-point tolerance on |Φ(ω) − z|.
pub const FIXED_POINT_TOL: f64 = 1e-10;
/// Plain iterations before switching to averaged steps.
pub const DW_PLAIN_STEPS: usize = 500;
pub const DW_MAX_ITER: usize = 10_000;

const POLISH: f64 = 2e-16;
const PLATEAU: f64 = 1e-13;
const ARC_STEP: f64 = 0.1;
const NEWTON_STEPS: usize = 12;
const MAX_DEPTH: usize = 40;

fn zero() -> C64 {
    C64::new(0.0, 0.0)
}

#[derive(Debug, Clone, Copy)]
pub struct DwOutcome {
    pub w: C64,
    pub iterations: usize,
    pub residual: f64,
}

/// Iterate a self-map of the disc from `start` until |f(w) − w| ≤ tol.
/// After [`DW_PLAIN_STEPS`] plain steps the iteration switches to the averaged
/// map w ↦ (w + f(w))/2.
pub fn denjoy_wolff_solve(mut f: impl FnMut(C64) -> Result<C64>, start: C64, tol: f64) -> Result<DwOutcome> {
    if !(tol > 0.0) {
        return Err(Error::validation("tol", "must be positive"));
    }
    let mut w = start;
    let mut residual = f64::INFINITY;
    for it in 0..DW_MAX_ITER {
        let fw = f(w)?;
        residual = (fw - w).norm();
        if residual <= tol {
            return Ok(DwOutcome { w: fw, iterations: it + 1, residual });
        }
        w = if it < DW_PLAIN_STEPS { fw } else { 0.5 * (w + fw) };
    }
    Err(Error::NonConvergence {
        iterations: DW_MAX_ITER,
        residual,
    })
}

/// Fixed point of a holomorphic self-map f of the disc given with f′.
/// Newton steps on w − f(w) are taken when they stay in the disc and reduce the
/// residual; otherwise the plain (later averaged) step is used.
pub(crate) fn disc_fixed_point<F>(mut f: F, start: C64) -> Result<(C64, usize)>
where
    F: FnMut(C64) -> Result<(C64, C64)>,
{
    let mut w = if start.norm() < 1.0 { start } else { zero() };
    let (mut fw, mut dfw) = f(w)?;
    let mut plain = 0;
    for it in 0..DW_MAX_ITER {
        let res = (fw - w).norm();
        if res <= POLISH {
            return Ok((w, it));
        }
        let den = 1.0 - dfw;
        let mut moved = false;
        if den.norm() > 1e-300 {
            let wn = w - (w - fw) / den;
            if wn.norm() < 1.0 {
                if let Ok((fn_, dfn)) = f(wn) {
                    if (fn_ - wn).norm() < res {
                        w = wn;
                        fw = fn_;
                        dfw = dfn;
                        moved = true;
                    }
                }
            }
        }
        if !moved {
            if res <= PLATEAU {
                return Ok((w, it));
            }
            plain += 1;
            let wn = if plain > DW_PLAIN_STEPS { 0.5 * (w + fw) } else { fw };
            let (a, b) = f(wn)?;
            w = wn;
            fw = a;
            dfw = b;
        }
    }
    Err(Error::NonConvergence {
        iterations: DW_MAX_ITER,
        residual: (fw - w).norm(),
    })
}

/// Data of a left inverse Φ(w) = w/q(w).
pub trait LeftInverse: Send + Sync {
    /// q(w) and q′(w).
    fn q(&self, w: C64, warm: &mut Warm) -> Result<(C64, C64)>;
}

/// A solved point: ω, q(ω), q′(ω) and the work spent.
#[derive(Debug, Clone, Copy)]
pub struct Solved {
    pub omega: C64,
    pub q: C64,
    pub dq: C64,
    pub iterations: usize,
}

impl Solved {
    /// ω′(z) from differentiating ω = z·q(ω).
    pub fn domega(&self, z: C64) -> C64 {
        self.q / (1.0 - z * self.dq)
    }
}

/// Inverts Φ(w) = w/q(w) pointwise on the disc or on ℂ∖ℝ₊.
#[derive(Clone)]
pub struct Subordinator {
    pub domain: Domain,
    inv: Arc<dyn LeftInverse>,
}

impl Subordinator {
    pub fn new(domain: Domain, inv: Arc<dyn LeftInverse>) -> Self {
        Subordinator { domain, inv }
    }

    pub fn q(&self, w: C64, warm: &mut Warm) -> Result<(C64, C64)> {
        self.inv.q(w, warm)
    }

    /// Φ(w).
    pub fn phi(&self, w: C64) -> Result<C64> {
        let (q, _) = self.inv.q(w, &mut Warm::default())?;
        Ok(w / q)
    }

    /// ω(z) with Φ(ω(z)) = z.
    pub fn solve(&self, z: C64, warm: &mut Warm) -> Result<Solved> {
        self.domain.check(z)?;
        if z.norm() == 0.0 {
            let (q, dq) = self.inv.q(z, warm.child(0))?;
            return Ok(Solved { omega: z, q, dq, iterations: 0 });
        }
        match self.domain {
            Domain::Disc => self.solve_disc(z, warm),
            Domain::Slit => {
                if z.im < 0.0 {
                    let s = self.solve_upper(z.conj(), warm)?;
                    Ok(Solved {
                        omega: s.omega.conj(),
                        q: s.q.conj(),
                        dq: s.dq.conj(),
                        iterations: s.iterations,
                    })
                } else {
                    self.solve_upper(z, warm)
                }
            }
        }
    }

    fn solve_disc(&self, z: C64, warm: &mut Warm) -> Result<Solved> {
        let start = warm.seed.unwrap_or_else(zero);
        let inv = &self.inv;
        let (w, iterations) = {
            let inner = warm.child(0);
            disc_fixed_point(
                |w| {
                    let (q, dq) = inv.q(w, inner)?;
                    Ok((z * q, z * dq))
                },
                start,
            )?
        };
        if w.norm() >= 1.0 {
            return Err(Error::NonConvergence {
                iterations,
                residual: f64::NAN,
            });
        }
        let (q, dq) = self.inv.q(w, warm.child(0))?;
        warm.seed = Some(w);
        warm.at = Some(z);
        Ok(Solved { omega: w, q, dq, iterations })
    }

    /// H(w) = w/q(w) and H′(w).
    fn h(&self, w: C64, warm: &mut Warm) -> Result<(C64, C64, C64, C64)> {
        let (q, dq) = self.inv.q(w, warm)?;
        let h = w / q;
        let dh = (q - w * dq) / (q * q);
        Ok((h, dh, q, dq))
    }

    /// z in the closed upper half-plane minus [0, ∞).
    fn solve_upper(&self, z: C64, warm: &mut Warm) -> Result<Solved> {
        if z.im == 0.0 {
            let w = C64::new(self.anchor(z.re, warm.child(0))?, 0.0);
            let (_, _, q, dq) = self.h(w, warm.child(0))?;
            warm.seed = Some(w);
            warm.at = Some(z);
            return Ok(Solved { omega: w, q, dq, iterations: 1 });
        }
        let mut count = 0usize;
        if let (Some(za), Some(wa)) = (warm.at, warm.seed) {
            if za.im >= 0.0 && wa.im >= 0.0 && (z - za).norm() <= 0.5 * z.norm() {
                let mut inner = warm.child(0).clone();
                if let Ok(w) = self.segment(za, wa, z, 0, &mut count, &mut inner) {
                    return self.finish(z, w, count, warm);
                }
            }
        }
        let r = z.norm();
        let w0 = self.anchor(-r, warm.child(0))?;
        let phi = z.arg();
        let steps = ((PI - phi) / ARC_STEP).ceil().max(1.0) as usize;
        let (mut za, mut wa) = (C64::new(-r, 0.0), C64::new(w0, 0.0));
        for j in 1..=steps {
            let zb = if j == steps { z } else { C64::from_polar(r, PI - (PI - phi) * j as f64 / steps as f64) };
            wa = self.segment(za, wa, zb, 0, &mut count, warm.child(0))?;
            za = zb;
        }
        self.finish(z, wa, count, warm)
    }

    fn finish(&self, z: C64, w: C64, iterations: usize, warm: &mut Warm) -> Result<Solved> {
        let (q, dq) = self.inv.q(w, warm.child(0))?;
        warm.seed = Some(w);
        warm.at = Some(z);
        Ok(Solved { omega: w, q, dq, iterations })
    }

    /// Continue the solution from (za, wa) to zb, halving the step on failure.
    fn segment(&self, za: C64, wa: C64, zb: C64, depth: usize, count: &mut usize, warm: &mut Warm) -> Result<C64> {
        match self.corrector(za, wa, zb, count, warm) {
            Ok(w) => Ok(w),
            Err(e) => {
                if depth >= MAX_DEPTH || matches!(e, Error::TurningPoint { .. }) {
                    return Err(e);
                }
                let mid = 0.5 * (za + zb);
                let wm = self.segment(za, wa, mid, depth + 1, count, warm)?;
                self.segment(mid, wm, zb, depth + 1, count, warm)
            }
        }
    }

    fn corrector(&self, za: C64, wa: C64, zb: C64, count: &mut usize, warm: &mut Warm) -> Result<C64> {
        let (_, dha, _, _) = self.h(wa, warm)?;
        if dha.norm() < 1e-14 {
            return Err(Error::TurningPoint { z: za });
        }
        let mut w = wa + (zb - za) / dha;
        let tol = 1e-13 * (1.0 + zb.norm());
        for _ in 0..NEWTON_STEPS {
            *count += 1;
            if !admissible(w, zb) {
                break;
            }
            let (h, dh, _, _) = self.h(w, warm)?;
            let res = (h - zb).norm();
            if dh.norm() < 1e-14 {
                return Err(Error::TurningPoint { z: zb });
            }
            let step = (h - zb) / dh;
            w -= step;
            if res <= tol || step.norm() <= 1e-15 * w.norm() {
                if admissible(w, zb) {
                    let (h, _, _, _) = self.h(w, warm)?;
                    if (h - zb).norm() <= FIXED_POINT_TOL * 1e-2 * (1.0 + zb.norm()) {
                        return Ok(w);
                    }
                }
                break;
            }
        }
        Err(Error::RootTracking {
            at: zb.arg(),
            reason: "Newton corrector did not converge".into(),
        })
    }

    /// Real solution of H(w) = x0 < 0 on the negative axis.
    fn anchor(&self, x0: f64, warm: &mut Warm) -> Result<f64> {
        let hr = |w: f64, warm: &mut Warm| -> Result<f64> { Ok(self.h(C64::new(w, 0.0), warm)?.0.re) };
        let (q0, _) = self.inv.q(zero(), warm)?;
        let mut lo = x0 * q0.re.abs().max(1e-300) * 1e-3;
        let mut hlo = hr(lo, warm)?;
        let mut guard = 0;
        while hlo < x0 {
            lo *= 1e-3;
            hlo = hr(lo, warm)?;
            guard += 1;
            if guard > 100 {
                return Err(Error::Anchor { z0: x0 });
            }
        }
        let mut hi = lo;
        let mut hhi = hlo;
        let mut found = false;
        for _ in 0..3000 {
            let next = 2.0 * hi;
            let hn = hr(next, warm)?;
            if !(hn < hhi) {
                return Err(Error::Anchor { z0: x0 });
            }
            lo = hi;
            hlo = hhi;
            hi = next;
            hhi = hn;
            if hhi <= x0 {
                found = true;
                break;
            }
        }
        if !found {
            return Err(Error::Anchor { z0: x0 });
        }
        // H decreases on [hi, lo] (hi < lo < 0) from hlo > x0 to hhi ≤ x0.
        let (mut a, mut b) = (hi, lo);
        let _ = hlo;
        for _ in 0..200 {
            let m = 0.5 * (a + b);
            if hr(m, warm)? <= x0 {
                a = m;
            } else {
                b = m;
            }
            if (b - a).abs() <= 1e-15 * a.abs() {
                break;
            }
        }
        let mut w = 0.5 * (a + b);
        for _ in 0..3 {
            let (h, dh, _, _) = self.h(C64::new(w, 0.0), warm)?;
            if dh.re == 0.0 {
                break;
            }
            let next = w - (h.re - x0) / dh.re;
            if next < 0.0 && (next - w).abs() <= (b - a).abs().max(1e-15 * w.abs()) * 4.0 {
                w = next;
            }
        }
        Ok(w)
    }
}

fn admissible(w: C64, z: C64) -> bool {
    let ok = w.re.is_finite() && w.im.is_finite() && !(w.im == 0.0 && w.re >= 0.0);
    ok && (z.im <= 0.0 || w.im >= -1e-12 * w.norm())
}

/// One evaluation record of a certification run.
#[derive(Debug, Clone, Serialize)]
pub struct PointRecord {
    pub z: [f64; 2],
    pub omega: [f64; 2],
    pub residual: f64,
    pub iterations: usize,
}

/// ω with its left inverse, the derived η, and certification diagnostics.
#[derive(Clone)]
pub struct SubordinationSolution {
    pub omega: EtaEvaluator,
    pub phi: EtaEvaluator,
    /// The law whose η the construction produces (ν = μ^{⊠k} or the
    /// infinitely divisible law itself).
    pub eta: EtaEvaluator,
    pub k: usize,
    pub residual_sup: f64,
    pub iterations_max: usize,
    pub arg_g_max: f64,
    pub records: Vec<PointRecord>,
    pub(crate) sub: Subordinator,
}

impl std::fmt::Debug for SubordinationSolution {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SubordinationSolution")
            .field("eta", &self.eta)
            .field("k", &self.k)
            .field("residual_sup", &self.residual_sup)
            .field("iterations_max", &self.iterations_max)
            .finish()
    }
}

#[derive(Serialize)]
struct Diagnostics<'a> {
    label: &'a str,
    k: usize,
    residual_sup: f64,
    iterations_max: usize,
    arg_g_max: f64,
    points: &'a [PointRecord],
}

impl SubordinationSolution {
    /// Per-point residuals and summary statistics as JSON.
    pub fn diagnostics_json(&self) -> String {
        serde_json::to_string_pretty(&Diagnostics {
            label: &self.eta.label,
            k: self.k,
            residual_sup: self.residual_sup,
            iterations_max: self.iterations_max,
            arg_g_max: self.arg_g_max,
            points: &self.records,
        })
        .expect("diagnostics serialize")
    }

    pub fn solve(&self, z: C64) -> Result<Solved> {
        self.sub.solve(z, &mut Warm::default())
    }

    /// Re-certify on an arbitrary evaluation set.
    pub fn certify_on(&mut self, zs: &[C64]) -> Result<()> {
        let (records, sup, it) = certify(&self.sub, zs)?;
        self.records = records;
        self.residual_sup = sup;
        self.iterations_max = it;
        Ok(())
    }
}

/// The default evaluation set: 512 points on |z| = 1 − 2⁻¹⁰ for the disc,
/// z = 1/(x + iy) with 64 geometric x ∈ [1/8, 8] and y = 2⁻⁵, …, 2⁻¹² otherwise.
pub fn default_evaluation_set(domain: Domain) -> Vec<C64> {
    match domain {
        Domain::Disc => {
            let r = 1.0 - 2f64.powi(-10);
            (0..512).map(|j| C64::from_polar(r, -PI + 2.0 * PI * (j as f64 + 0.5) / 512.0)).collect()
        }
        Domain::Slit => {
            let mut out = Vec::with_capacity(512);
            for j in 5..=12 {
                let y = 2f64.powi(-j);
                for i in 0..64 {
                    let x = (0.125f64).ln() + (64f64).ln() * i as f64 / 63.0;
                    out.push(1.0 / C64::new(x.exp(), y));
                }
            }
            out
        }
    }
}

fn certify(sub: &Subordinator, zs: &[C64]) -> Result<(Vec<PointRecord>, f64, usize)> {
    let mut warm = Warm::default();
    let mut records = Vec::with_capacity(zs.len());
    let mut sup: f64 = 0.0;
    let mut itmax = 0;
    for &z in zs {
        let s = sub.solve(z, &mut warm)?;
        let residual = (s.omega / s.q - z).norm();
        sup = sup.max(residual);
        itmax = itmax.max(s.iterations);
        records.push(PointRecord {
            z: [z.re, z.im],
            omega: [s.omega.re, s.omega.im],
            residual,
            iterations: s.iterations,
        });
    }
    if !(sup <= FIXED_POINT_TOL) {
        return Err(Error::NonConvergence {
            iterations: itmax,
            residual: sup,
        });
    }
    Ok((records, sup, itmax))
}

struct OmegaRatio(Subordinator);

impl RatioMap for OmegaRatio {
    fn ratio(&self, z: C64, warm: &mut Warm) -> Result<(C64, C64)> {
        let s = self.0.solve(z, warm)?;
        Ok((s.q, s.dq * s.domega(z)))
    }
}

struct PhiRatio(Subordinator);

impl RatioMap for PhiRatio {
    fn ratio(&self, w: C64, warm: &mut Warm) -> Result<(C64, C64)> {
        let (q, dq) = self.0.q(w, warm)?;
        Ok((1.0 / q, -dq / (q * q)))
    }
}

fn assemble(sub: Subordinator, eta: EtaEvaluator, k: usize, label: &str) -> Result<SubordinationSolution> {
    let domain = sub.domain;
    let omega = EtaEvaluator::new(domain, Provenance::FromSubordination, Kind::Omega, format!("omega[{label}]"), Arc::new(OmegaRatio(sub.clone())));
    let phi = EtaEvaluator::new(domain, Provenance::FromSubordination, Kind::Phi, format!("phi[{label}]"), Arc::new(PhiRatio(sub.clone())));
    let (records, residual_sup, iterations_max) = certify(&sub, &default_evaluation_set(domain))?;
    Ok(SubordinationSolution {
        omega,
        phi,
        eta,
        k,
        residual_sup,
        iterations_max,
        arg_g_max: 0.0,
        records,
        sub,
    })
}

/// q = exp(−v) for an exponent v given with its derivative.
struct ExpInverse<F>(F);

impl<F> LeftInverse for ExpInverse<F>
where
    F: Fn(C64) -> Result<(C64, C64)> + Send + Sync,
{
    fn q(&self, w: C64, _: &mut Warm) -> Result<(C64, C64)> {
        let (v, dv) = (self.0)(w)?;
        let q = (-v).exp();
        Ok((q, -dv * q))
    }
}

/// Global inverse ω of Φ(z) = z·exp(v(z)) on the disc, where Re v ≥ 0.
/// `v` returns (v(w), v′(w)). The resulting ω is itself an η-transform.
pub fn global_inverse_circle<F>(v: F, label: &str) -> Result<SubordinationSolution>
where
    F: Fn(C64) -> Result<(C64, C64)> + Send + Sync + 'static,
{
    let sub = Subordinator::new(Domain::Disc, Arc::new(ExpInverse(v)));
    let eta = EtaEvaluator::new(Domain::Disc, Provenance::FromSubordination, Kind::Eta, label, Arc::new(OmegaRatio(sub.clone())));
    assemble(sub, eta, 1, label)
}

/// Global inverse of H(z) = z·exp(u(z)) on ℂ∖ℝ₊ by continuation.
pub fn global_inverse_halfline<F>(u: F, label: &str) -> Result<SubordinationSolution>
where
    F: Fn(C64) -> Result<(C64, C64)> + Send + Sync + 'static,
{
    let sub = Subordinator::new(Domain::Slit, Arc::new(ExpInverse(u)));
    let eta = EtaEvaluator::new(Domain::Slit, Provenance::FromSubordination, Kind::Eta, label, Arc::new(OmegaRatio(sub.clone())));
    assemble(sub, eta, 1, label)
}

/// q = r_μ^{k−1}, i.e. H(w) = w·B_μ(w)^{k−1}.
struct HalflinePowerInverse {
    mu: EtaEvaluator,
    k: usize,
}

impl LeftInverse for HalflinePowerInverse {
    fn q(&self, w: C64, warm: &mut Warm) -> Result<(C64, C64)> {
        let (r, dr) = self.mu.ratio_warm(w, warm)?;
        let e = (self.k - 1) as i32;
        let p = r.powi(e - 1);
        Ok((p * r, e as f64 * p * dr))
    }
}

struct HalflinePowerEta {
    sub: Subordinator,
    mu: EtaEvaluator,
    k: usize,
}

impl RatioMap for HalflinePowerEta {
    fn ratio(&self, z: C64, warm: &mut Warm) -> Result<(C64, C64)> {
        let s = self.sub.solve(z, warm)?;
        halfline_power_ratio(&self.mu, self.k, z, &s)
    }
}

fn halfline_power_ratio(mu: &EtaEvaluator, k: usize, z: C64, s: &Solved) -> Result<(C64, C64)> {
    let g = s.q;
    if g.im == 0.0 && g.re <= 0.0 {
        return Err(Error::Branch {
            z,
            reason: "omega(z)/z lies on the negative axis".into(),
        });
    }
    let kf = k as f64;
    let a = kf / (kf - 1.0);
    let lg = g.ln();
    let ratio = (a * lg).exp();
    let (r, _) = mu.ratio(s.omega)?;
    let direct = r.powi(k as i32);
    if (ratio - direct).norm() > 1e-8 * (1.0 + direct.norm()) {
        return Err(Error::Branch {
            z,
            reason: format!("principal power {ratio} disagrees with eta_mu(omega)/z = {direct}"),
        });
    }
    let dg = s.dq * s.domega(z);
    let dratio = a * ((a - 1.0) * lg).exp() * dg;
    Ok((ratio, dratio))
}

/// Subordination for ν = μ^{⊠k} on the half-line: ω solves
/// ω·B_μ(ω)^{k−1} = z.
pub fn power_subordination_halfline(mu: &Measure, k: usize) -> Result<SubordinationSolution> {
    if mu.space != Space::Halfline {
        return Err(Error::validation("space", "half-line measure required"));
    }
    mu.validate()?;
    power_subordination_halfline_eta(&EtaEvaluator::from_measure(mu), k)
}

/// As [`power_subordination_halfline`], starting from an η-evaluator.
pub fn power_subordination_halfline_eta(mu: &EtaEvaluator, k: usize) -> Result<SubordinationSolution> {
    if k < 2 {
        return Err(Error::validation("k", "power subordination needs k >= 2"));
    }
    if mu.domain != Domain::Slit {
        return Err(Error::validation("space", "half-line evaluator required"));
    }
    let m = mu.ratio(zero())?.0;
    if !(m.re > 0.0) {
        return Err(Error::DegenerateMean("mean must be positive".into()));
    }
    let sub = Subordinator::new(
        Domain::Slit,
        Arc::new(HalflinePowerInverse { mu: mu.clone(), k }),
    );
    let label = format!("({})^[{k}]", mu.label);
    let eta = EtaEvaluator::new(
        Domain::Slit,
        Provenance::FromSubordination,
        Kind::Eta,
        label.clone(),
        Arc::new(HalflinePowerEta { sub: sub.clone(), mu: mu.clone(), k }),
    );
    assemble(sub, eta, k, &label)
}

/// η_ν(z) = z·(ω(z)/z)^{k/(k−1)} with the principal power.
pub fn eta_power_halfline(sol: &SubordinationSolution, k: usize, z: C64) -> Result<C64> {
    if sol.k != k || sol.sub.domain != Domain::Slit {
        return Err(Error::validation("k", "solution was built for a different power or space"));
    }
    Ok(z * sol.eta.ratio(z)?.0)
}

/// ω₂(w) = w·g₂(w), the self-subordination of ρ = μ⊠μ: fixed point of
/// v ↦ w·r_μ(v). Returns (g₂, g₂′).
fn self_subordination(mu: &EtaEvaluator, w: C64, warm: &mut Warm) -> Result<(C64, C64)> {
    if w.norm() == 0.0 {
        let (r, dr) = mu.ratio_warm(w, warm.child(0))?;
        // ω₂′(0) = r(0), g₂′(0) = r′(0)·r(0).
        return Ok((r, dr * r));
    }
    let start = warm.seed.filter(|s| s.norm() < 1.0).unwrap_or(w * mu.ratio_warm(zero(), warm.child(0))?.0);
    let (v, _) = {
        let inner = warm.child(0);
        disc_fixed_point(
            |v| {
                let (r, dr) = mu.ratio_warm(v, inner)?;
                Ok((w * r, w * dr))
            },
            start,
        )?
    };
    warm.seed = Some(v);
    let (r, dr) = mu.ratio_warm(v, warm.child(0))?;
    let dv = r / (1.0 - w * dr);
    Ok((r, dr * dv))
}

/// q = g₂^{k−2}, i.e. Φ(z) = z·B_ρ(z)^{(k−2)/2}.
struct CirclePowerInverse {
    mu: EtaEvaluator,
    k: usize,
}

impl LeftInverse for CirclePowerInverse {
    fn q(&self, w: C64, warm: &mut Warm) -> Result<(C64, C64)> {
        let (g2, dg2) = self_subordination(&self.mu, w, warm)?;
        let e = (self.k - 2) as i32;
        let p = if e >= 1 { g2.powi(e - 1) } else { C64::new(1.0, 0.0) };
        Ok((p * g2, e as f64 * p * dg2))
    }
}

struct CirclePowerEta {
    sub: Subordinator,
    mu: EtaEvaluator,
    k: usize,
}

impl CirclePowerEta {
    /// Ratio by the principal-power formula, the ratio from η_ρ(ω), and its derivative.
    fn both(&self, z: C64, warm: &mut Warm) -> Result<(C64, C64, C64)> {
        let s = self.sub.solve(z, warm)?;
        let (g2, dg2) = self_subordination(&self.mu, s.omega, warm.child(1))?;
        let g = s.q;
        let subordinated = g2 * g2 * g;
        let d = (2.0 * g2 * dg2 * g + g2 * g2 * s.dq) * s.domega(z);
        if g.arg().abs() >= PI - 1e-12 {
            return Err(Error::Branch {
                z,
                reason: "arg g reaches the negative axis; the principal logarithm is undefined".into(),
            });
        }
        let kf = self.k as f64;
        let principal = (kf / (kf - 2.0) * g.ln()).exp();
        Ok((principal, subordinated, d))
    }
}

impl RatioMap for CirclePowerEta {
    fn ratio(&self, z: C64, warm: &mut Warm) -> Result<(C64, C64)> {
        let (principal, subordinated, d) = self.both(z, warm)?;
        if (principal - subordinated).norm() > 1e-8 * (1.0 + subordinated.norm()) {
            return Err(Error::Branch {
                z,
                reason: format!("principal-power value {principal} disagrees with eta_rho(omega)/z = {subordinated}"),
            });
        }
        Ok((principal, d))
    }
}

/// Subordination for ν = μ^{⊠k} on the circle, k ≥ 3: ω inverts
/// Φ(z) = z·B_ρ(z)^{(k−2)/2} with ρ = μ⊠μ.
pub fn power_subordination_circle(mu: &Measure, k: usize) -> Result<SubordinationSolution> {
    if mu.space != Space::Circle {
        return Err(Error::validation("space", "circle measure required"));
    }
    mu.validate()?;
    power_subordination_circle_eta(&EtaEvaluator::from_measure(mu), k)
}

/// As [`power_subordination_circle`], starting from an η-evaluator.
pub fn power_subordination_circle_eta(mu: &EtaEvaluator, k: usize) -> Result<SubordinationSolution> {
    if k < 3 {
        return Err(Error::validation("k", "circle power subordination needs k >= 3"));
    }
    if mu.domain != Domain::Disc {
        return Err(Error::validation("space", "circle evaluator required"));
    }
    let m = mu.ratio(zero())?.0;
    if m.norm() < 1e-14 {
        return Err(Error::DegenerateMean(
            "the mean vanishes; mu⊠mu is already the Haar measure".into(),
        ));
    }
    let sub = Subordinator::new(Domain::Disc, Arc::new(CirclePowerInverse { mu: mu.clone(), k }));
    let label = format!("({})^[{k}]", mu.label);
    let eta_map = Arc::new(CirclePowerEta { sub: sub.clone(), mu: mu.clone(), k });
    let eta = EtaEvaluator::new(Domain::Disc, Provenance::FromSubordination, Kind::Eta, label.clone(), eta_map.clone());
    let mut sol = assemble(sub, eta, k, &label)?;
    let mut warm = Warm::default();
    let mut arg_max: f64 = 0.0;
    for z in default_evaluation_set(Domain::Disc) {
        let s = sol.sub.solve(z, &mut warm)?;
        arg_max = arg_max.max(s.q.arg().abs());
    }
    sol.arg_g_max = arg_max;
    Ok(sol)
}

/// η_ν(z) = ω(z)·g(z)^{2/(k−2)}, g = ω/z, checked against η_ρ(ω(z)).
pub fn eta_power_circle(sol: &SubordinationSolution, k: usize, z: C64) -> Result<C64> {
    if sol.k != k || sol.sub.domain != Domain::Disc {
        return Err(Error::validation("k", "solution was built for a different power or space"));
    }
    Ok(z * sol.eta.ratio(z)?.0)
}

/// Both circle-power formulas at z: (principal power, η_ρ(ω)) as η values.
pub fn eta_power_circle_pair(sol: &SubordinationSolution, mu: &EtaEvaluator, z: C64) -> Result<(C64, C64)> {
    let map = CirclePowerEta {
        sub: sol.sub.clone(),
        mu: mu.clone(),
        k: sol.k,
    };
    let (a, b, _) = map.both(z, &mut Warm::default())?;
    Ok((z * a, z * b))
}

/// η of μ⊠μ on the circle through the self-subordination ω₂: η_ρ(w) = ω₂(w)²/w.
pub fn square_circle(mu: &EtaEvaluator) -> EtaEvaluator {
    let m = mu.clone();
    EtaEvaluator::from_fn(Domain::Disc, Provenance::FromSubordination, Kind::Eta, format!("({})^[2]", mu.label), move |w, warm| {
        let (g2, dg2) = self_subordination(&m, w, warm)?;
        Ok((g2 * g2, 2.0 * g2 * dg2))
    })
}

struct TwoFold {
    mu: EtaEvaluator,
    nu: EtaEvaluator,
}

impl TwoFold {
    /// ω₁ with ω₁ = z·r_ν(z·r_μ(ω₁)); returns (ω₁, ω₂, r_μ(ω₁), r_μ′, r_ν(ω₂), r_ν′, iterations).
    #[allow(clippy::type_complexity)]
    fn solve(&self, z: C64, warm: &mut Warm) -> Result<(C64, C64, C64, C64, C64, C64, usize)> {
        let (mu, nu) = (&self.mu, &self.nu);
        let mn = nu.ratio_warm(zero(), warm.child(1))?.0;
        let start = match (warm.seed, warm.at) {
            (Some(s), Some(a)) if (a - z).norm() <= 0.5 * z.norm().max(1e-3) => s,
            _ => z * mn,
        };
        let (w, it) = match mu.domain {
            Domain::Disc => {
                let mut wm = warm.child(0).clone();
                let mut wn = warm.child(1).clone();
                let out = disc_fixed_point(
                    |w| {
                        let (rm, drm) = mu.ratio_warm(w, &mut wm)?;
                        let (rn, drn) = nu.ratio_warm(z * rm, &mut wn)?;
                        Ok((z * rn, z * z * drn * drm))
                    },
                    start,
                )?;
                warm.children[0] = wm;
                warm.children[1] = wn;
                out
            }
            Domain::Slit => self.slit_fixed_point(z, start, warm)?,
        };
        let (rm, drm) = mu.ratio_warm(w, warm.child(0))?;
        let w2 = z * rm;
        let (rn, drn) = nu.ratio_warm(w2, warm.child(1))?;
        warm.seed = Some(w);
        warm.at = Some(z);
        Ok((w, w2, rm, drm, rn, drn, it))
    }

    fn slit_fixed_point(&self, z: C64, start: C64, warm: &mut Warm) -> Result<(C64, usize)> {
        let (mu, nu) = (&self.mu, &self.nu);
        let step = |w: C64, warm: &mut Warm| -> Result<(C64, C64)> {
            let (rm, drm) = mu.ratio_warm(w, warm.child(0))?;
            let (rn, drn) = nu.ratio_warm(z * rm, warm.child(1))?;
            Ok((z * rn, z * z * drn * drm))
        };
        let violation = |w: C64| Error::UnsupportedPair(format!("iterate {w} left the slit plane at z = {z}"));
        let mut w = start;
        let (mut fw, mut dfw) = step(w, warm).map_err(|_| violation(w))?;
        let mut plain = 0;
        for it in 0..DW_MAX_ITER {
            let res = (fw - w).norm();
            if res <= POLISH * (1.0 + w.norm()) {
                return Ok((w, it));
            }
            let den = 1.0 - dfw;
            let mut moved = false;
            if den.norm() > 1e-300 {
                let wn = w - (w - fw) / den;
                if admissible(wn, z) {
                    if let Ok((a, b)) = step(wn, warm) {
                        if (a - wn).norm() < res {
                            w = wn;
                            fw = a;
                            dfw = b;
                            moved = true;
                        }
                    }
                }
            }
            if !moved {
                if res <= PLATEAU * (1.0 + w.norm()) {
                    return Ok((w, it));
                }
                plain += 1;
                let wn = if plain > DW_PLAIN_STEPS { 0.5 * (w + fw) } else { fw };
                if !admissible(wn, z) {
                    return Err(violation(wn));
                }
                let (a, b) = step(wn, warm).map_err(|_| violation(wn))?;
                w = wn;
                fw = a;
                dfw = b;
            }
        }
        Err(Error::NonConvergence {
            iterations: DW_MAX_ITER,
            residual: (fw - w).norm(),
        })
    }
}

impl RatioMap for TwoFold {
    fn ratio(&self, z: C64, warm: &mut Warm) -> Result<(C64, C64)> {
        let (w1, w2, rm, drm, rn, drn, _) = self.solve(z, warm)?;
        // η_μ(ω₁) = η_ν(ω₂) ⇔ ω₁ω₂ = z·η(z).
        let lhs = w1 * rm;
        let rhs = w2 * rn;
        if (lhs - rhs).norm() > 1e-9 * (1.0 + lhs.norm()) {
            return Err(Error::NonConvergence {
                iterations: 0,
                residual: (lhs - rhs).norm(),
            });
        }
        let fw = 1.0 - z * z * drn * drm;
        let dw1 = (rn + z * drn * rm) / fw;
        let dw2 = rm + z * drm * dw1;
        Ok((rm * rn, drm * dw1 * rn + rm * drn * dw2))
    }
}

/// η of μ⊠ν from η_μ and η_ν via the subordination fixed point.
pub fn two_fold(mu: &EtaEvaluator, nu: &EtaEvaluator) -> Result<EtaEvaluator> {
    if mu.domain != nu.domain {
        return Err(Error::validation("space", "both laws must live on the same space"));
    }
    for (name, e) in [("mu", mu), ("nu", nu)] {
        if e.ratio(zero())?.0.norm() < 1e-14 {
            return Err(Error::DegenerateMean(format!(
                "{name} has zero mean; the free product with a zero-mean law is the Haar measure whenever either factor is Haar"
            )));
        }
    }
    Ok(EtaEvaluator::new(
        mu.domain,
        Provenance::FromSubordination,
        Kind::Eta,
        format!("{} [x] {}", mu.label, nu.label),
        Arc::new(TwoFold { mu: mu.clone(), nu: nu.clone() }),
    ))
}

/// ω₁ of a two-fold product at z, with the product identity residual
/// |ω₁ω₂ − z·η(z)|.
pub fn two_fold_identity(mu: &EtaEvaluator, nu: &EtaEvaluator, z: C64) -> Result<(C64, C64, f64)> {
    let t = TwoFold { mu: mu.clone(), nu: nu.clone() };
    let (w1, w2, rm, _, _, _, _) = t.solve(z, &mut Warm::default())?;
    let eta = w1 * rm;
    Ok((w1, w2, (w1 * w2 - z * eta).norm()))
}
