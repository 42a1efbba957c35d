//! Lévy–Hinčin data of free and Boolean infinitely divisible laws.
//!
//! Half-line, free: Σ(z) = exp(u(z)) with u(z) = γ + ∫_{[0,∞]} (1+xz)/(z−x) dσ(x).
//! Half-line, Boolean: B(z) = exp(v(z)) with the same integral over [0, ∞).
//! Circle, free: Σ(z) = α·exp(H(z)), H(z) = ∫ (1+ξz)/(1−ξz) dσ(ξ).
//! Circle, Boolean: η(z) = z·exp(−H(z))/α.
//!
//! A mass σ({∞}) contributes −z·σ({∞}) to u, the limit of (1+xz)/(z−x) as
//! x → ∞.

use crate::error::{Error, Result};
use crate::kernel::{CircleData, HalflineData};
use crate::measure::{geometric_grid, validate_parts, circle_grid, Atom, Density, Measure, Space};
use crate::recovery::recover;
use crate::subordination::{global_inverse_circle, global_inverse_halfline, SubordinationSolution};
use crate::transforms::{Domain, EtaEvaluator, Kind, Provenance};
use crate::C64;
use serde::{Deserialize, Serialize};
use std::sync::Arc;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Flavor {
    Free,
    Boolean,
}

/// A finite positive measure, with an optional point mass at +∞ on the half-line.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SigmaMeasure {
    #[serde(default)]
    pub atoms: Vec<Atom>,
    #[serde(default)]
    pub density: Option<Density>,
    #[serde(default)]
    pub mass_at_inf: f64,
}

impl SigmaMeasure {
    pub fn zero() -> Self {
        SigmaMeasure::default()
    }

    pub fn atom(pos: f64, mass: f64) -> Self {
        SigmaMeasure {
            atoms: vec![Atom { pos, mass }],
            ..Default::default()
        }
    }

    pub fn total_mass(&self, space: Space) -> f64 {
        self.atoms.iter().map(|a| a.mass).sum::<f64>() + self.density.as_ref().map_or(0.0, |d| d.mass(space)) + self.mass_at_inf
    }

    /// c·σ for c ≥ 0.
    pub fn scaled(&self, c: f64) -> Self {
        SigmaMeasure {
            atoms: self.atoms.iter().map(|a| Atom { pos: a.pos, mass: c * a.mass }).collect(),
            density: self.density.as_ref().map(|d| Density {
                nodes: d.nodes.clone(),
                values: d.values.iter().map(|v| c * v).collect(),
            }),
            mass_at_inf: c * self.mass_at_inf,
        }
    }
}

/// Parameters (γ or α, σ) of an infinitely divisible law.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevyHinchinParams {
    pub space: Space,
    pub flavor: Flavor,
    #[serde(default)]
    pub alpha: Option<[f64; 2]>,
    #[serde(default)]
    pub gamma: Option<f64>,
    #[serde(default)]
    pub sigma: SigmaMeasure,
}

impl LevyHinchinParams {
    pub fn halfline(flavor: Flavor, gamma: f64, sigma: SigmaMeasure) -> Self {
        LevyHinchinParams {
            space: Space::Halfline,
            flavor,
            alpha: None,
            gamma: Some(gamma),
            sigma,
        }
    }

    pub fn circle(flavor: Flavor, alpha: C64, sigma: SigmaMeasure) -> Self {
        LevyHinchinParams {
            space: Space::Circle,
            flavor,
            alpha: Some([alpha.re, alpha.im]),
            gamma: None,
            sigma,
        }
    }

    pub fn validate(&self) -> Result<()> {
        // σ has no total-mass constraint; zero atoms are tolerated.
        validate_parts(self.space, &self.sigma.atoms, self.sigma.density.as_ref(), false)?;
        let m = self.sigma.mass_at_inf;
        if !m.is_finite() || m < 0.0 {
            return Err(Error::validation("sigma.mass_at_inf", "must be finite and nonnegative"));
        }
        match self.space {
            Space::Circle => {
                if m != 0.0 {
                    return Err(Error::validation("sigma.mass_at_inf", "no mass at infinity on the circle"));
                }
                let a = self.alpha.ok_or_else(|| Error::validation("alpha", "required on the circle"))?;
                if ((a[0] * a[0] + a[1] * a[1]).sqrt() - 1.0).abs() > 1e-12 {
                    return Err(Error::validation("alpha", "must have unit modulus"));
                }
            }
            Space::Halfline => {
                let g = self.gamma.ok_or_else(|| Error::validation("gamma", "required on the half-line"))?;
                if !g.is_finite() {
                    return Err(Error::validation("gamma", "must be finite"));
                }
                if self.flavor == Flavor::Boolean && m != 0.0 {
                    return Err(Error::validation("sigma.mass_at_inf", "the Boolean half-line case has no mass at infinity"));
                }
            }
        }
        Ok(())
    }

    pub fn alpha_c(&self) -> C64 {
        self.alpha.map_or(C64::new(1.0, 0.0), |a| C64::new(a[0], a[1]))
    }

    pub fn gamma_or_zero(&self) -> f64 {
        self.gamma.unwrap_or(0.0)
    }

    /// Parameters of the n-th convolution root: (γ/n, σ/n) or (α^{1/n}, σ/n).
    pub fn root(&self, n: usize) -> Self {
        let c = 1.0 / n as f64;
        let mut p = self.clone();
        p.sigma = self.sigma.scaled(c);
        p.gamma = self.gamma.map(|g| g * c);
        p.alpha = self.alpha.map(|a| {
            let w = C64::from_polar(1.0, C64::new(a[0], a[1]).arg() * c);
            [w.re, w.im]
        });
        p
    }

    /// Parameters of the k-fold power: (kγ, kσ) or (α^k, kσ).
    pub fn power(&self, k: usize) -> Self {
        let c = k as f64;
        let mut p = self.clone();
        p.sigma = self.sigma.scaled(c);
        p.gamma = self.gamma.map(|g| g * c);
        p.alpha = self.alpha.map(|a| {
            let w = C64::new(a[0], a[1]).powu(k as u32);
            [w.re, w.im]
        });
        p
    }

    /// Sum of parameters; σ atoms and densities must share the same grid.
    pub fn add(&self, other: &Self) -> Result<Self> {
        if self.space != other.space || self.flavor != other.flavor {
            return Err(Error::validation("params", "space and flavor must agree"));
        }
        let mut atoms = self.sigma.atoms.clone();
        for a in &other.sigma.atoms {
            match atoms.iter_mut().find(|b| b.pos == a.pos) {
                Some(b) => b.mass += a.mass,
                None => atoms.push(*a),
            }
        }
        atoms.sort_by(|a, b| a.pos.total_cmp(&b.pos));
        let density = match (&self.sigma.density, &other.sigma.density) {
            (None, d) | (d, None) => d.clone(),
            (Some(a), Some(b)) => {
                if a.nodes != b.nodes {
                    return Err(Error::validation("sigma.density", "densities must share the same grid"));
                }
                Some(Density {
                    nodes: a.nodes.clone(),
                    values: a.values.iter().zip(&b.values).map(|(x, y)| x + y).collect(),
                })
            }
        };
        let alpha = match (self.alpha, other.alpha) {
            (Some(a), Some(b)) => {
                let w = C64::new(a[0], a[1]) * C64::new(b[0], b[1]);
                Some([w.re, w.im])
            }
            (a, b) => a.or(b),
        };
        Ok(LevyHinchinParams {
            space: self.space,
            flavor: self.flavor,
            alpha,
            gamma: match (self.gamma, other.gamma) {
                (Some(a), Some(b)) => Some(a + b),
                (a, b) => a.or(b),
            },
            sigma: SigmaMeasure {
                atoms,
                density,
                mass_at_inf: self.sigma.mass_at_inf + other.sigma.mass_at_inf,
            },
        })
    }

    pub fn parse(text: &str) -> Result<Self> {
        let p: LevyHinchinParams = serde_json::from_str(text)?;
        p.validate()?;
        Ok(p)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("params serialize")
    }
}

/// Precomputed exponent: u or v on the half-line, H on the circle.
#[derive(Clone)]
pub(crate) struct Exponent(Arc<ExponentData>);

enum ExponentData {
    Halfline { gamma: f64, data: HalflineData, inf: f64 },
    Circle { data: CircleData, mass: f64 },
}

impl Exponent {
    pub(crate) fn new(p: &LevyHinchinParams) -> Self {
        let s = &p.sigma;
        Exponent(Arc::new(match p.space {
            Space::Halfline => ExponentData::Halfline {
                gamma: p.gamma_or_zero(),
                data: HalflineData::new(&s.atoms, s.density.as_ref()),
                inf: s.mass_at_inf,
            },
            Space::Circle => ExponentData::Circle {
                data: CircleData::new(&s.atoms, s.density.as_ref()),
                mass: s.total_mass(Space::Circle),
            },
        }))
    }

    /// The exponent and its derivative at z.
    pub(crate) fn eval(&self, z: C64) -> Result<(C64, C64)> {
        match &*self.0 {
            ExponentData::Halfline { gamma, data, inf } => {
                Domain::Slit.check(z)?;
                let one = C64::new(1.0, 0.0);
                let zero = C64::new(0.0, 0.0);
                let (a, b) = data.rational(z, &[one, z, zero], &[-one, zero, -one])?;
                Ok((*gamma + a - z * *inf, b - *inf))
            }
            ExponentData::Circle { data, mass } => {
                Domain::Disc.check(z)?;
                let (p, dp) = data.psi_over(z);
                Ok((*mass + 2.0 * z * p, 2.0 * (p + z * dp)))
            }
        }
    }
}

fn require(p: &LevyHinchinParams, space: Option<Space>, flavor: Option<Flavor>) -> Result<()> {
    p.validate()?;
    if space.is_some_and(|s| s != p.space) || flavor.is_some_and(|f| f != p.flavor) {
        return Err(Error::validation("params", "space or flavor does not fit this operation"));
    }
    Ok(())
}

/// u(z) = γ + ∫ (1+xz)/(z−x) dσ(x) − z·σ({∞}).
pub fn u_halfline(p: &LevyHinchinParams, z: C64) -> Result<C64> {
    require(p, Some(Space::Halfline), Some(Flavor::Free))?;
    Ok(Exponent::new(p).eval(z)?.0)
}

/// Σ-transform of the free infinitely divisible law.
pub fn sigma_transform_infdiv(p: &LevyHinchinParams, z: C64) -> Result<C64> {
    require(p, None, Some(Flavor::Free))?;
    let (e, _) = Exponent::new(p).eval(z)?;
    Ok(match p.space {
        Space::Halfline => e.exp(),
        Space::Circle => p.alpha_c() * e.exp(),
    })
}

/// B(z) = exp(v(z)) of the Boolean half-line law.
pub fn b_transform_boolean(p: &LevyHinchinParams, z: C64) -> Result<C64> {
    Ok(b_log_boolean(p, z)?.exp())
}

/// The exponent v(z) = log B(z) of the Boolean half-line law.
pub fn b_log_boolean(p: &LevyHinchinParams, z: C64) -> Result<C64> {
    require(p, Some(Space::Halfline), Some(Flavor::Boolean))?;
    Ok(Exponent::new(p).eval(z)?.0)
}

/// h(r) = ∫ (r²−1)/(log r·(1 − 2r·cos(θ+x) + r²)) dρ(x), dρ(x) = dσ(e^{ix}),
/// evaluated as −Re H(re^{iθ})/log r.
pub fn radial_h(sigma: &SigmaMeasure, theta: f64, r: f64) -> Result<f64> {
    if !(r > 0.0 && r < 1.0) {
        return Err(Error::domain(C64::new(r, 0.0), "radius must lie in (0, 1)"));
    }
    validate_parts(Space::Circle, &sigma.atoms, sigma.density.as_ref(), false)?;
    if sigma.total_mass(Space::Circle) <= 0.0 {
        return Err(Error::validation("sigma", "must be nonzero"));
    }
    let p = LevyHinchinParams::circle(Flavor::Free, C64::new(1.0, 0.0), sigma.clone());
    let (h, _) = Exponent::new(&p).eval(C64::from_polar(r, theta))?;
    Ok(-h.re / r.ln())
}

/// η of the infinitely divisible law. Free laws come from global inversion;
/// Boolean laws are explicit.
pub fn infdiv_eta(p: &LevyHinchinParams) -> Result<(EtaEvaluator, Option<SubordinationSolution>)> {
    p.validate()?;
    let exp = Exponent::new(p);
    let label = match (p.space, p.flavor) {
        (Space::Halfline, Flavor::Free) => "free-infdiv",
        (Space::Halfline, Flavor::Boolean) => "boolean-infdiv",
        (Space::Circle, Flavor::Free) => "free-infdiv-circle",
        (Space::Circle, Flavor::Boolean) => "boolean-infdiv-circle",
    };
    match (p.space, p.flavor) {
        (Space::Halfline, Flavor::Free) => {
            let sol = global_inverse_halfline(move |w| exp.eval(w), label)?;
            let eta = sol.eta.clone().relabel(Kind::Eta, Provenance::FromLevyHinchin, label);
            Ok((eta, Some(sol)))
        }
        (Space::Circle, Flavor::Free) => {
            // Φ(w) = α·w·exp(H(w)) = w·exp(H(w) + i·arg α).
            let shift = C64::new(0.0, p.alpha_c().arg());
            let sol = global_inverse_circle(move |w| exp.eval(w).map(|(h, dh)| (h + shift, dh)), label)?;
            let eta = sol.eta.clone().relabel(Kind::Eta, Provenance::FromLevyHinchin, label);
            Ok((eta, Some(sol)))
        }
        (Space::Halfline, Flavor::Boolean) => {
            let eta = EtaEvaluator::from_fn(Domain::Slit, Provenance::FromLevyHinchin, Kind::Eta, label, move |z, _| {
                let (v, dv) = exp.eval(z)?;
                let r = (-v).exp();
                Ok((r, -dv * r))
            });
            Ok((eta, None))
        }
        (Space::Circle, Flavor::Boolean) => {
            let inv_alpha = p.alpha_c().conj();
            let eta = EtaEvaluator::from_fn(Domain::Disc, Provenance::FromLevyHinchin, Kind::Eta, label, move |z, _| {
                let (h, dh) = exp.eval(z)?;
                let r = inv_alpha * (-h).exp();
                Ok((r, -dh * r))
            });
            Ok((eta, None))
        }
    }
}

/// An infinitely divisible law: its η, the inversion certificate for free
/// laws, and a recovered measure.
#[derive(Debug, Clone)]
pub struct InfDivLaw {
    pub params: LevyHinchinParams,
    pub eta: EtaEvaluator,
    pub solution: Option<SubordinationSolution>,
    pub measure: Measure,
}

/// Build η and recover the law on `grid`. The default grid is 2048 uniform
/// angles on the circle and 2048 geometric points on [1/64, 64] on the half-line.
pub fn make_infdiv_law(p: &LevyHinchinParams, grid: Option<&[f64]>) -> Result<InfDivLaw> {
    let (eta, solution) = infdiv_eta(p)?;
    let default;
    let grid = match grid {
        Some(g) => g,
        None => {
            default = match p.space {
                Space::Circle => circle_grid(2048),
                Space::Halfline => geometric_grid(1.0 / 64.0, 64.0, 2048),
            };
            &default
        }
    };
    let measure = recover(&eta, grid, &eta.label)?.measure;
    Ok(InfDivLaw {
        params: p.clone(),
        eta,
        solution,
        measure,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn u_of_half_delta_one_is_chi_exponent() {
        let t = 0.8;
        let p = LevyHinchinParams::halfline(Flavor::Free, 0.0, SigmaMeasure::atom(1.0, t / 2.0));
        for z in [c(-1.0, 0.0), c(0.3, 0.7), c(2.0, -1.0)] {
            let want = t * (1.0 + z) / (2.0 * z - 2.0);
            assert!((u_halfline(&p, z).unwrap() - want).norm() < 1e-14);
        }
        assert!(u_halfline(&p, c(0.5, 0.0)).unwrap_err().to_string().contains("domain"));
    }

    #[test]
    fn constant_u_and_conjugate_symmetry() {
        let p = LevyHinchinParams::halfline(Flavor::Free, 0.7, SigmaMeasure::zero());
        assert_eq!(u_halfline(&p, c(0.1, 0.2)).unwrap(), c(0.7, 0.0));
        let dens = Density { nodes: vec![0.5, 1.0, 3.0], values: vec![0.2, 0.4, 0.1] };
        let q = LevyHinchinParams::halfline(Flavor::Free, 0.1, SigmaMeasure { atoms: vec![Atom { pos: 2.0, mass: 0.3 }], density: Some(dens), mass_at_inf: 0.2 });
        let z = c(0.4, 0.9);
        let a = u_halfline(&q, z).unwrap();
        assert!((u_halfline(&q, z.conj()).unwrap() - a.conj()).norm() < 1e-14);
        assert!(a.im <= 0.0);
    }

    #[test]
    fn mass_at_infinity_convention() {
        // σ = δ_∞, γ = 0: u(z) = −z and Σ(z) = exp(−z).
        let p = LevyHinchinParams::halfline(Flavor::Free, 0.0, SigmaMeasure { mass_at_inf: 1.0, ..Default::default() });
        let z = c(-0.5, 0.25);
        assert!((sigma_transform_infdiv(&p, z).unwrap() - (-z).exp()).norm() < 1e-15);
        let b = LevyHinchinParams::halfline(Flavor::Boolean, 0.0, SigmaMeasure { mass_at_inf: 1.0, ..Default::default() });
        assert!(b.validate().unwrap_err().is_validation());
    }

    #[test]
    fn circle_sigma_matches_lambda() {
        let t = 1.3;
        let p = LevyHinchinParams::circle(Flavor::Free, c(1.0, 0.0), SigmaMeasure::atom(0.0, t / 2.0));
        for z in [c(0.0, 0.0), c(0.3, -0.4), c(-0.7, 0.1)] {
            let want = (t * (1.0 + z) / (2.0 - 2.0 * z)).exp();
            assert!((sigma_transform_infdiv(&p, z).unwrap() - want).norm() < 1e-13);
        }
        let zero = LevyHinchinParams::circle(Flavor::Free, c(1.0, 0.0), SigmaMeasure::zero());
        assert_eq!(sigma_transform_infdiv(&zero, c(0.2, 0.2)).unwrap(), c(1.0, 0.0));
    }

    #[test]
    fn boolean_constant_b() {
        let cc: f64 = 2.5;
        let p = LevyHinchinParams::halfline(Flavor::Boolean, -cc.ln(), SigmaMeasure::zero());
        assert!((b_transform_boolean(&p, c(-1.0, 0.3)).unwrap() - 1.0 / cc).norm() < 1e-15);
    }

    #[test]
    fn radial_h_matches_direct_integrand() {
        let sigma = SigmaMeasure {
            atoms: vec![Atom { pos: 0.5, mass: 0.3 }, Atom { pos: -2.0, mass: 0.1 }],
            density: Some(Density { nodes: circle_grid(64), values: (0..64).map(|j| 0.1 + 0.05 * (j as f64 * 0.3).sin().abs()).collect() }),
            mass_at_inf: 0.0,
        };
        let (theta, r): (f64, f64) = (0.7, 0.8);
        let direct = |x: f64, rho: f64| (r * r - 1.0) / (r.ln() * (1.0 - 2.0 * r * (theta + x).cos() + r * r)) * rho;
        let mut want = 0.0;
        for a in &sigma.atoms {
            want += direct(a.pos, a.mass);
        }
        let d = sigma.density.as_ref().unwrap();
        let n = 20000;
        for i in 0..n {
            let x = -PI + 2.0 * PI * (i as f64 + 0.5) / n as f64;
            want += direct(x, d.value_at(Space::Circle, x)) * 2.0 * PI / n as f64;
        }
        let got = radial_h(&sigma, theta, r).unwrap();
        assert!((got - want).abs() < 1e-7 * want.abs(), "{got} vs {want}");
        assert!(radial_h(&sigma, theta, 1.0).is_err());
        assert!(radial_h(&SigmaMeasure::atom(0.0, 1.0), 0.0, 0.99).unwrap() > radial_h(&SigmaMeasure::atom(0.0, 1.0), 0.0, 0.5).unwrap());
    }

    #[test]
    fn infdiv_trivial_laws() {
        let p = LevyHinchinParams::halfline(Flavor::Free, 0.0, SigmaMeasure::zero());
        let (eta, _) = infdiv_eta(&p).unwrap();
        assert!((eta.eval(c(-0.3, 0.2)).unwrap() - c(-0.3, 0.2)).norm() < 1e-12);
        let phi = 0.4;
        let q = LevyHinchinParams::circle(Flavor::Free, C64::from_polar(1.0, phi), SigmaMeasure::zero());
        let (eta, _) = infdiv_eta(&q).unwrap();
        let z = c(0.3, 0.1);
        assert!((eta.eval(z).unwrap() - C64::from_polar(1.0, -phi) * z).norm() < 1e-12);
    }

    #[test]
    fn json_shape() {
        let p = LevyHinchinParams::halfline(Flavor::Free, 0.0, SigmaMeasure::atom(1.0, 0.5));
        let s = p.to_json();
        assert!(s.contains("\"flavor\": \"free\"") && s.contains("mass_at_inf"));
        assert_eq!(LevyHinchinParams::parse(&s).unwrap(), p);
        assert!(LevyHinchinParams::parse(r#"{"space":"circle","flavor":"free","alpha":[2,0],"sigma":{}}"#).is_err());
    }
}
