//! ψ, η, B and Σ transforms.
//!
//! Every analytic map in the crate is carried as an [`EtaEvaluator`]. Internally
//! an evaluator stores the ratio r(z) = f(z)/z together with r′(z): for an
//! η-transform this makes B = 1/r, Boolean convolution a product of ratios, and
//! the value at z = 0 (the mean) a plain evaluation instead of a limit.
//!
//! Circle maps live on the open unit disc. Half-line maps live on ℂ∖(0, ∞); the
//! origin is admitted as the continuous extension.

use crate::error::{Error, Result};
use crate::kernel::{CircleData, HalflineData};
use crate::measure::{Measure, Space};
use crate::C64;
use std::fmt;
use std::sync::Arc;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Domain {
    Disc,
    Slit,
}

impl Domain {
    pub fn of(space: Space) -> Self {
        match space {
            Space::Circle => Domain::Disc,
            Space::Halfline => Domain::Slit,
        }
    }

    pub fn check(self, z: C64) -> Result<()> {
        if !(z.re.is_finite() && z.im.is_finite()) {
            return Err(Error::domain(z, "not finite"));
        }
        match self {
            Domain::Disc if z.norm() >= 1.0 => Err(Error::domain(z, "outside the open unit disc")),
            Domain::Slit if z.im == 0.0 && z.re > 0.0 => Err(Error::domain(z, "on the positive half-line cut")),
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Provenance {
    FromMeasure,
    FromLevyHinchin,
    FromSubordination,
    Composite,
    ClosedForm,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Kind {
    Eta,
    Omega,
    Phi,
}

/// Warm-start state threaded through sequential evaluations. Maps that solve
/// an equation per point store the last solution in `seed`; composite maps keep
/// one child state per component.
#[derive(Debug, Clone, Default)]
pub struct Warm {
    pub seed: Option<C64>,
    /// The argument at which `seed` was obtained.
    pub at: Option<C64>,
    pub children: Vec<Warm>,
}

impl Warm {
    pub fn child(&mut self, i: usize) -> &mut Warm {
        if self.children.len() <= i {
            self.children.resize(i + 1, Warm::default());
        }
        &mut self.children[i]
    }
}

/// An analytic map f given through r(z) = f(z)/z and r′(z).
pub trait RatioMap: Send + Sync {
    fn ratio(&self, z: C64, warm: &mut Warm) -> Result<(C64, C64)>;
}

struct FnMap<F>(F);

impl<F> RatioMap for FnMap<F>
where
    F: Fn(C64, &mut Warm) -> Result<(C64, C64)> + Send + Sync,
{
    fn ratio(&self, z: C64, warm: &mut Warm) -> Result<(C64, C64)> {
        (self.0)(z, warm)
    }
}

/// Evaluable analytic map with its domain and provenance.
#[derive(Clone)]
pub struct EtaEvaluator {
    pub domain: Domain,
    pub provenance: Provenance,
    pub kind: Kind,
    pub label: String,
    inner: Arc<dyn RatioMap>,
    /// The map continues analytically to the part of (0, ∞) it checks itself.
    positive_axis: bool,
}

impl fmt::Debug for EtaEvaluator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("EtaEvaluator")
            .field("domain", &self.domain)
            .field("provenance", &self.provenance)
            .field("kind", &self.kind)
            .field("label", &self.label)
            .finish()
    }
}

impl EtaEvaluator {
    pub fn new(domain: Domain, provenance: Provenance, kind: Kind, label: impl Into<String>, map: Arc<dyn RatioMap>) -> Self {
        EtaEvaluator {
            domain,
            provenance,
            kind,
            label: label.into(),
            inner: map,
            positive_axis: false,
        }
    }

    /// Wrap a closure returning (r(z), r′(z)).
    pub fn from_fn<F>(domain: Domain, provenance: Provenance, kind: Kind, label: impl Into<String>, f: F) -> Self
    where
        F: Fn(C64, &mut Warm) -> Result<(C64, C64)> + Send + Sync + 'static,
    {
        EtaEvaluator::new(domain, provenance, kind, label, Arc::new(FnMap(f)))
    }

    /// η-transform of a measure.
    pub fn from_measure(mu: &Measure) -> Self {
        let map: Arc<dyn RatioMap> = match mu.space {
            Space::Circle => Arc::new(CircleRatio(mu.circle_data())),
            Space::Halfline => Arc::new(HalflineRatio(mu.halfline_data())),
        };
        let mut ev = EtaEvaluator::new(Domain::of(mu.space), Provenance::FromMeasure, Kind::Eta, mu.label.clone(), map);
        ev.positive_axis = mu.space == Space::Halfline;
        ev
    }

    /// The identity map, η of δ₁.
    pub fn identity(domain: Domain) -> Self {
        EtaEvaluator::from_fn(domain, Provenance::ClosedForm, Kind::Eta, "identity", |_, _| {
            Ok((C64::new(1.0, 0.0), C64::new(0.0, 0.0)))
        })
    }

    pub fn relabel(mut self, kind: Kind, provenance: Provenance, label: impl Into<String>) -> Self {
        self.kind = kind;
        self.provenance = provenance;
        self.label = label.into();
        self
    }

    pub fn space(&self) -> Space {
        match self.domain {
            Domain::Disc => Space::Circle,
            Domain::Slit => Space::Halfline,
        }
    }

    pub fn ratio_warm(&self, z: C64, warm: &mut Warm) -> Result<(C64, C64)> {
        if !(self.positive_axis && z.im == 0.0 && z.re > 0.0) {
            self.domain.check(z)?;
        }
        self.inner.ratio(z, warm)
    }

    /// (f(z)/z, d/dz f(z)/z).
    pub fn ratio(&self, z: C64) -> Result<(C64, C64)> {
        self.ratio_warm(z, &mut Warm::default())
    }

    /// f(z).
    pub fn eval(&self, z: C64) -> Result<C64> {
        Ok(z * self.ratio(z)?.0)
    }

    pub fn eval_warm(&self, z: C64, warm: &mut Warm) -> Result<C64> {
        Ok(z * self.ratio_warm(z, warm)?.0)
    }

    /// f(z) and f′(z).
    pub fn eval_deriv(&self, z: C64, warm: &mut Warm) -> Result<(C64, C64)> {
        let (r, dr) = self.ratio_warm(z, warm)?;
        Ok((z * r, r + z * dr))
    }

    /// B(z) = z/f(z), with B(0) = 1/f′(0).
    pub fn b(&self, z: C64) -> Result<C64> {
        let r = self.ratio(z)?.0;
        if r.norm() < 1e-300 {
            return Err(Error::ZeroOfEta { z });
        }
        Ok(1.0 / r)
    }

    /// Sequential evaluation of the ratio along a path with warm starts.
    pub fn ratio_path(&self, zs: &[C64]) -> Vec<Result<(C64, C64)>> {
        let mut warm = Warm::default();
        zs.iter()
            .map(|&z| {
                let out = self.ratio_warm(z, &mut warm);
                if out.is_err() {
                    warm = Warm::default();
                }
                out
            })
            .collect()
    }

    /// Sequential evaluation of f along a path with warm starts.
    pub fn eta_path(&self, zs: &[C64]) -> Vec<Result<C64>> {
        self.ratio_path(zs).into_iter().zip(zs).map(|(r, &z)| r.map(|r| z * r.0)).collect()
    }
}

struct CircleRatio(CircleData);

impl RatioMap for CircleRatio {
    fn ratio(&self, z: C64, _: &mut Warm) -> Result<(C64, C64)> {
        let (p, dp) = self.0.psi_over(z);
        Ok(ratio_from_psi(z, p, dp))
    }
}

struct HalflineRatio(HalflineData);

impl HalflineRatio {
    /// (1+ψ, P, P′) with P = ψ/z; 1+ψ = ∫ ζ/(ζ−x) dμ is integrated directly.
    fn parts(&self, z: C64) -> Result<(C64, C64, C64)> {
        if z.im == 0.0 && z.re > 0.0 {
            let (lo, hi) = self.0.support();
            let x = 1.0 / z.re;
            if x >= lo && x <= hi {
                return Err(Error::domain(z, "1/z lies in the support"));
            }
        }
        if z.norm() == 0.0 {
            return Ok((C64::new(1.0, 0.0), C64::new(self.0.mean(), 0.0), C64::new(self.0.second_moment(), 0.0)));
        }
        let zeta = 1.0 / z;
        let zero = C64::new(0.0, 0.0);
        self.0.rational3(zeta, &[zeta, zero, zero], &[zero, zeta, zero], &[zero, zero, zeta * zeta])
    }

    fn psi_over(&self, z: C64) -> Result<(C64, C64)> {
        let (_, p, dp) = self.parts(z)?;
        Ok((p, dp))
    }
}

impl RatioMap for HalflineRatio {
    fn ratio(&self, z: C64, _: &mut Warm) -> Result<(C64, C64)> {
        let (den, p, dp) = self.parts(z)?;
        let dpsi = p + z * dp;
        Ok((p / den, (dp * den - p * dpsi) / (den * den)))
    }
}

/// r = η/z and r′ from P = ψ/z and P′.
fn ratio_from_psi(z: C64, p: C64, dp: C64) -> (C64, C64) {
    let psi = z * p;
    let dpsi = p + z * dp;
    let den = 1.0 + psi;
    let r = p / den;
    let dr = (dp * den - p * dpsi) / (den * den);
    (r, dr)
}

/// ψ_μ(z) = ∫ xz/(1−xz) dμ(x).
pub fn psi(mu: &Measure, z: C64) -> Result<C64> {
    if mu.space == Space::Circle {
        Domain::Disc.check(z)?;
    }
    Ok(match mu.space {
        Space::Circle => z * mu.circle_data().psi_over(z).0,
        Space::Halfline => z * HalflineRatio(mu.halfline_data()).psi_over(z)?.0,
    })
}

/// η_μ(z) = ψ/(1+ψ).
pub fn eta(mu: &Measure, z: C64) -> Result<C64> {
    EtaEvaluator::from_measure(mu).eval(z)
}

/// B_μ(z) = z/η_μ(z), with B(0) = 1/m(μ).
pub fn b_transform(mu: &Measure, z: C64) -> Result<C64> {
    let r = EtaEvaluator::from_measure(mu).ratio(z)?.0;
    if r.norm() < 1e-300 {
        return Err(if z.norm() == 0.0 {
            Error::DegenerateMean("the mean vanishes, B(0) is undefined".into())
        } else {
            Error::ZeroOfEta { z }
        });
    }
    Ok(1.0 / r)
}

pub const NEWTON_TOL: f64 = 1e-12;
pub const NEWTON_MAX: usize = 200;

/// Solve f(w) = z by damped Newton from `seed`.
pub fn invert(f: &EtaEvaluator, z: C64, seed: C64) -> Result<C64> {
    let tol = NEWTON_TOL * (1.0 + z.norm());
    let mut warm = Warm::default();
    let mut w = seed;
    let (mut fw, mut dfw) = f.eval_deriv(w, &mut warm)?;
    let mut res = (fw - z).norm();
    for it in 0..NEWTON_MAX {
        if res <= tol {
            return Ok(w);
        }
        if dfw.norm() == 0.0 {
            return Err(Error::InversionRadius { z, iterations: it, residual: res });
        }
        let step = (z - fw) / dfw;
        let mut lam = 1.0;
        let mut accepted = false;
        for _ in 0..40 {
            let cand = w + lam * step;
            if f.domain.check(cand).is_ok() {
                if let Ok((fc, dfc)) = f.eval_deriv(cand, &mut warm) {
                    let rc = (fc - z).norm();
                    if rc < res {
                        w = cand;
                        fw = fc;
                        dfw = dfc;
                        res = rc;
                        accepted = true;
                        break;
                    }
                }
            }
            lam *= 0.5;
        }
        if !accepted {
            return Err(Error::InversionRadius { z, iterations: it, residual: res });
        }
    }
    if res <= tol {
        Ok(w)
    } else {
        Err(Error::InversionRadius {
            z,
            iterations: NEWTON_MAX,
            residual: res,
        })
    }
}

/// Σ_μ(z) = η_μ⁻¹(z)/z near the origin, Σ(0) = 1/m(μ).
pub fn sigma_near_zero(mu: &Measure, z: C64) -> Result<C64> {
    sigma_of(&EtaEvaluator::from_measure(mu), z)
}

/// Σ of an arbitrary η-evaluator near the origin.
pub fn sigma_of(eta: &EtaEvaluator, z: C64) -> Result<C64> {
    let m = eta.ratio(C64::new(0.0, 0.0))?.0;
    if m.norm() < 1e-14 {
        return Err(Error::DegenerateMean("Σ is undefined for a measure with zero mean".into()));
    }
    if z.norm() == 0.0 {
        return Ok(1.0 / m);
    }
    eta.domain.check(z)?;
    let w = invert(eta, z, z / m)?;
    Ok(w / z)
}

/// Largest dyadic radius on which Newton inversion of η converges at 16 sample
/// points: circles |z| = r for circle laws, the segment (−r, 0) for half-line laws.
pub fn inversion_radius(eta: &EtaEvaluator) -> Result<f64> {
    let m = eta.ratio(C64::new(0.0, 0.0))?.0;
    if m.norm() < 1e-14 {
        return Err(Error::DegenerateMean("zero mean, η is not invertible at 0".into()));
    }
    let exps: Vec<i32> = match eta.domain {
        Domain::Disc => (1..=30).collect(),
        Domain::Slit => (-5..=30).collect(),
    };
    for e in exps {
        let r = 2f64.powi(-e);
        let ok = (0..16).all(|j| {
            let z = match eta.domain {
                Domain::Disc => C64::from_polar(r, 2.0 * std::f64::consts::PI * j as f64 / 16.0),
                Domain::Slit => C64::new(-r * (j + 1) as f64 / 16.0, 0.0),
            };
            invert(eta, z, z / m).is_ok()
        });
        if ok {
            return Ok(r);
        }
    }
    Err(Error::InversionRadius {
        z: C64::new(0.0, 0.0),
        iterations: NEWTON_MAX,
        residual: f64::NAN,
    })
}

/// g(z) = ∫ (z−1)(1−x)/(xz−1) dμ°(x) for a half-line measure.
pub fn g_array(mu: &Measure, z: C64) -> Result<C64> {
    if mu.space != Space::Halfline {
        return Err(Error::validation("space", "g_array needs a half-line measure"));
    }
    Domain::Slit.check(z)?;
    let data = mu.halfline_data();
    if z.norm() == 0.0 {
        return Ok(C64::new(data.mass() - data.mean(), 0.0));
    }
    let zeta = 1.0 / z;
    let c = (1.0 - z) / z;
    let zero = C64::new(0.0, 0.0);
    let (v, _) = data.rational(zeta, &[c, -c, zero], &[zero; 3])?;
    Ok(v)
}

/// Cauchy transform G(ζ) = ∫ dμ(x)/(ζ−x) of a half-line measure, ζ ∉ [0, ∞).
pub fn cauchy_halfline(mu: &Measure, zeta: C64) -> Result<C64> {
    if mu.space != Space::Halfline {
        return Err(Error::validation("space", "cauchy_halfline needs a half-line measure"));
    }
    if zeta.im == 0.0 && zeta.re >= 0.0 {
        return Err(Error::domain(zeta, "on the support axis"));
    }
    let one = C64::new(1.0, 0.0);
    let zero = C64::new(0.0, 0.0);
    Ok(mu.halfline_data().rational(zeta, &[one, zero, zero], &[zero; 3])?.0)
}
