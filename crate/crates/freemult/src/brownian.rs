//! Free multiplicative Brownian motion: χ_t on the half-line and λ_t on the
//! circle.
//!
//! Densities come from the implicit root equations
//! z·exp(t(z − 1/2)) = x(z − 1) (χ_t, root in ℂ⁺) and
//! (z − 1)·exp(tz/2) = (z + 1)ξ (λ_t, root with Re z > 0). Roots are tracked by
//! Newton continuation from the symmetry point x = 1 or ξ = 1, where the seed is
//! found by bisection.

use crate::error::{Error, Result};
use crate::measure::{circle_grid, Measure, Space};
use crate::subordination::{global_inverse_circle, global_inverse_halfline};
use crate::transforms::EtaEvaluator;
use crate::C64;
use std::f64::consts::PI;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Family {
    Chi,
    Lambda,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BrownianLaw {
    pub family: Family,
    pub t: f64,
}

impl BrownianLaw {
    pub fn new(family: Family, t: f64) -> Result<Self> {
        check_t(t)?;
        Ok(BrownianLaw { family, t })
    }

    pub fn sigma(&self, z: C64) -> Result<C64> {
        brownian_sigma(self.family, self.t, z)
    }

    pub fn density(&self, x: f64) -> Result<f64> {
        match self.family {
            Family::Chi => chi_density(self.t, x),
            Family::Lambda => lambda_density(self.t, x),
        }
    }
}

fn check_t(t: f64) -> Result<()> {
    if !(t > 0.0) || !t.is_finite() {
        return Err(Error::domain(C64::new(t, 0.0), "time must be positive"));
    }
    Ok(())
}

/// Σ_{χ_t}(z) = exp(t(1+z)/(2z−2)), Σ_{λ_t}(z) = exp(t(1+z)/(2−2z)).
pub fn brownian_sigma(family: Family, t: f64, z: C64) -> Result<C64> {
    check_t(t)?;
    if z.re == 1.0 && z.im == 0.0 {
        return Err(Error::domain(z, "pole of the Σ-transform"));
    }
    let e = t * (1.0 + z) / (2.0 * (z - 1.0));
    Ok(match family {
        Family::Chi => e.exp(),
        Family::Lambda => (-e).exp(),
    })
}

/// Endpoints x₁ < 1 < x₂ = 1/x₁ of supp χ_t.
pub fn chi_support(t: f64) -> Result<(f64, f64)> {
    check_t(t)?;
    let s = (t * (t + 4.0)).sqrt();
    let x1 = (1.0 + t / 2.0 - s / 2.0) * (-s / 2.0).exp();
    Ok((x1, 1.0 / x1))
}

/// Root-equation residual and derivative for χ_t.
fn chi_f(t: f64, x: f64, z: C64) -> (C64, C64) {
    let e = (t * (z - 0.5)).exp();
    (z * e - x * (z - 1.0), e * (1.0 + t * z) - x)
}

fn chi_seed(t: f64) -> C64 {
    // At x = 1 the root is 1/2 + iy with 2·atan(2y) + t·y = π.
    let (mut a, mut b) = (0.0, PI / t + 1.0);
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        if 2.0 * (2.0 * m).atan() + t * m < PI {
            a = m;
        } else {
            b = m;
        }
    }
    C64::new(0.5, 0.5 * (a + b))
}

fn newton(mut f: impl FnMut(C64) -> (C64, C64), mut z: C64, ok: impl Fn(C64) -> bool) -> Option<C64> {
    for _ in 0..60 {
        let (v, d) = f(z);
        if d.norm() == 0.0 {
            return None;
        }
        let step = v / d;
        z -= step;
        if !ok(z) || !z.re.is_finite() || !z.im.is_finite() {
            return None;
        }
        if step.norm() <= 1e-15 * (1.0 + z.norm()) {
            return Some(z);
        }
    }
    let (v, _) = f(z);
    (v.norm() <= 1e-12 * (1.0 + z.norm())).then_some(z)
}

/// Continue a root of F(z; s) = 0 from (s0, z0) to s1 with Euler predictor and
/// Newton corrector, halving the step on failure.
fn continue_root<F, D>(f: &F, dzds: &D, ok: &dyn Fn(C64) -> bool, s0: f64, z0: C64, s1: f64, depth: usize) -> Result<C64>
where
    F: Fn(f64, C64) -> (C64, C64),
    D: Fn(f64, C64) -> C64,
{
    let pred = z0 + dzds(s0, z0) * (s1 - s0);
    if let Some(z) = newton(|z| f(s1, z), pred, ok) {
        return Ok(z);
    }
    if let Some(z) = newton(|z| f(s1, z), z0, ok) {
        return Ok(z);
    }
    if depth >= 30 {
        return Err(Error::RootTracking {
            at: s1,
            reason: "Newton continuation failed after step refinement".into(),
        });
    }
    let mid = 0.5 * (s0 + s1);
    let zm = continue_root(f, dzds, ok, s0, z0, mid, depth + 1)?;
    continue_root(f, dzds, ok, mid, zm, s1, depth + 1)
}

/// Track a root along sorted parameter values starting at (s_start, z_start).
fn track<F, D>(f: F, dzds: D, ok: &dyn Fn(C64) -> bool, s_start: f64, z_start: C64, targets: &[f64], max_step: f64) -> Result<Vec<C64>>
where
    F: Fn(f64, C64) -> (C64, C64),
    D: Fn(f64, C64) -> C64,
{
    let mut out = Vec::with_capacity(targets.len());
    let (mut s, mut z) = (s_start, z_start);
    for &target in targets {
        let n = ((target - s).abs() / max_step).ceil().max(1.0) as usize;
        let from = s;
        for j in 1..=n {
            let next = if j == n { target } else { from + (target - from) * j as f64 / n as f64 };
            z = continue_root(&f, &dzds, ok, s, z, next, 0)?;
            s = next;
        }
        out.push(z);
    }
    Ok(out)
}

/// Roots z(x) in ℂ⁺ for χ_t at points strictly inside (x₁, x₂), any order.
fn chi_roots(t: f64, xs: &[f64]) -> Result<Vec<C64>> {
    let seed = chi_seed(t);
    let f = move |s: f64, z: C64| chi_f(t, s.exp(), z);
    let dzds = move |s: f64, z: C64| {
        let x = s.exp();
        let (_, d) = chi_f(t, x, z);
        x * (z - 1.0) / d
    };
    let ok = |z: C64| z.im > 0.0;
    let mut out = vec![C64::new(0.0, 0.0); xs.len()];
    let mut up: Vec<(f64, usize)> = xs.iter().enumerate().filter(|(_, &x)| x >= 1.0).map(|(i, &x)| (x.ln(), i)).collect();
    let mut down: Vec<(f64, usize)> = xs.iter().enumerate().filter(|(_, &x)| x < 1.0).map(|(i, &x)| (x.ln(), i)).collect();
    up.sort_by(|a, b| a.0.total_cmp(&b.0));
    down.sort_by(|a, b| b.0.total_cmp(&a.0));
    for side in [up, down] {
        let targets: Vec<f64> = side.iter().map(|p| p.0).collect();
        let roots = track(f, dzds, &ok, 0.0, seed, &targets, 0.02)?;
        for ((_, i), z) in side.iter().zip(roots) {
            out[*i] = z;
        }
    }
    Ok(out)
}

/// Density of χ_t at many points.
pub fn chi_density_grid(t: f64, xs: &[f64]) -> Result<Vec<f64>> {
    let (x1, x2) = chi_support(t)?;
    if let Some(&x) = xs.iter().find(|x| !(**x > 0.0) || !x.is_finite()) {
        return Err(Error::domain(C64::new(x, 0.0), "chi density needs x > 0"));
    }
    let inside: Vec<(usize, f64)> = xs.iter().copied().enumerate().filter(|&(_, x)| x > x1 && x < x2).collect();
    let pts: Vec<f64> = inside.iter().map(|p| p.1).collect();
    let roots = chi_roots(t, &pts)?;
    let mut out = vec![0.0; xs.len()];
    for ((i, x), z) in inside.into_iter().zip(roots) {
        out[i] = (z.im / (PI * x)).max(0.0);
    }
    Ok(out)
}

/// Density of χ_t at x: Im z/(πx) on (x₁, x₂), zero elsewhere.
pub fn chi_density(t: f64, x: f64) -> Result<f64> {
    Ok(chi_density_grid(t, &[x])?[0])
}

/// Support angles (θ₀, θ₁) of λ_t and a flag for full support (t > 4).
pub fn lambda_support(t: f64) -> Result<(f64, f64, bool)> {
    check_t(t)?;
    if t > 4.0 {
        return Ok((PI, PI, true));
    }
    let th0 = (1.0 - t / 2.0).clamp(-1.0, 1.0).acos();
    let th1 = (th0 + (t - t * t / 4.0).max(0.0).sqrt()).min(PI);
    Ok((th0, th1, false))
}

fn lambda_f(t: f64, theta: f64, z: C64) -> (C64, C64) {
    let xi = C64::from_polar(1.0, theta);
    let e = (0.5 * t * z).exp();
    ((z - 1.0) * e - (z + 1.0) * xi, e * (1.0 + 0.5 * t * (z - 1.0)) - xi)
}

fn lambda_seed(t: f64) -> C64 {
    let g = |z: f64| (z - 1.0) * (0.5 * t * z).exp() - (z + 1.0);
    let (mut a, mut b) = (1.0, 2.0);
    while g(b) < 0.0 {
        b *= 2.0;
    }
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        if g(m) < 0.0 {
            a = m;
        } else {
            b = m;
        }
    }
    C64::new(0.5 * (a + b), 0.0)
}

/// Roots z(θ) with Re z > 0 for angles 0 ≤ θ < θ₁ (or ≤ π for full support).
fn lambda_roots(t: f64, thetas: &[f64]) -> Result<Vec<C64>> {
    let f = move |s: f64, z: C64| lambda_f(t, s, z);
    let dzds = move |s: f64, z: C64| {
        let xi = C64::from_polar(1.0, s);
        let (_, d) = lambda_f(t, s, z);
        C64::new(0.0, 1.0) * xi * (z + 1.0) / d
    };
    let ok = |z: C64| z.re > 0.0;
    let mut order: Vec<(f64, usize)> = thetas.iter().enumerate().map(|(i, &th)| (th, i)).collect();
    order.sort_by(|a, b| a.0.total_cmp(&b.0));
    let targets: Vec<f64> = order.iter().map(|p| p.0).collect();
    let roots = track(f, dzds, &ok, 0.0, lambda_seed(t), &targets, 0.02)?;
    let mut out = vec![C64::new(0.0, 0.0); thetas.len()];
    for ((_, i), z) in order.iter().zip(roots) {
        out[*i] = z;
    }
    Ok(out)
}

/// Density dλ_t/dθ at many angles.
pub fn lambda_density_grid(t: f64, thetas: &[f64]) -> Result<Vec<f64>> {
    let (_, th1, full) = lambda_support(t)?;
    let abs: Vec<f64> = thetas.iter().map(|&th| crate::measure::wrap_angle(th).abs()).collect();
    let edge = if full { f64::INFINITY } else { th1 };
    let inside: Vec<(usize, f64)> = abs.iter().copied().enumerate().filter(|&(_, a)| a < edge).collect();
    // At t = 4 the root at ξ = −1 is the double root z = 0.
    let inside: Vec<(usize, f64)> = inside.into_iter().filter(|&(_, a)| !(t == 4.0 && a >= PI)).collect();
    let pts: Vec<f64> = inside.iter().map(|p| p.1).collect();
    let roots = lambda_roots(t, &pts)?;
    let mut out = vec![0.0; thetas.len()];
    for ((i, _), z) in inside.into_iter().zip(roots) {
        out[i] = (z.re / (2.0 * PI)).max(0.0);
    }
    Ok(out)
}

/// Density dλ_t/dθ at the angle θ.
pub fn lambda_density(t: f64, theta: f64) -> Result<f64> {
    Ok(lambda_density_grid(t, &[theta])?[0])
}

/// Polar data (r, ψ) of η_{λ_t}(e^{iθ}) for θ inside the support arc.
pub fn lambda_boundary_curve(t: f64, theta: f64) -> Result<(f64, f64)> {
    let (_, th1, full) = lambda_support(t)?;
    if full {
        return Err(Error::domain(C64::new(t, 0.0), "the boundary curve is defined for t <= 4"));
    }
    if !(theta.abs() < th1) {
        return Err(Error::domain(C64::new(theta, 0.0), "angle outside the open support arc"));
    }
    let z = lambda_roots(t, &[theta.abs()])?[0];
    // η(ξ) = w with z = (1+w)/(1−w).
    let w = (z - 1.0) / (z + 1.0);
    let w = if theta < 0.0 { w.conj() } else { w };
    Ok((w.norm(), w.arg()))
}

/// Moments of λ_t: e^{−kt/2} Σ_{j<k} (−t)^j/j! · k^{j−1} · C(k, j+1).
///
/// The alternating sum cancels to roughly e^{−kt} relative size, so in double
/// precision only about 16 − kt·log₁₀e digits survive; keep kt small.
pub fn lambda_moment(t: f64, k: u32) -> f64 {
    if k == 0 {
        return 1.0;
    }
    let kf = k as f64;
    let mut sum = 0.0;
    let mut fact = 1.0;
    for j in 0..k {
        if j > 0 {
            fact *= j as f64;
        }
        let binom = binomial(k, j + 1);
        sum += (-t).powi(j as i32) / fact * kf.powi(j as i32 - 1) * binom;
    }
    (-kf * t / 2.0).exp() * sum
}

fn binomial(n: u32, k: u32) -> f64 {
    let mut b = 1.0;
    for i in 0..k {
        b = b * (n - i) as f64 / (i + 1) as f64;
    }
    b
}

/// η_{λ_t} as the inverse of z·Σ_{λ_t}(z).
pub fn lambda_eta(t: f64) -> Result<EtaEvaluator> {
    check_t(t)?;
    let v = move |w: C64| {
        let one = C64::new(1.0, 0.0);
        Ok((t * (one + w) / (2.0 * (one - w)), t / ((one - w) * (one - w))))
    };
    Ok(global_inverse_circle(v, &format!("lambda({t})"))?.eta)
}

/// η_{χ_t} as the inverse of z·Σ_{χ_t}(z).
pub fn chi_eta(t: f64) -> Result<EtaEvaluator> {
    check_t(t)?;
    let u = move |w: C64| {
        let one = C64::new(1.0, 0.0);
        Ok((t * (one + w) / (2.0 * (w - one)), -t / ((w - one) * (w - one))))
    };
    Ok(global_inverse_halfline(u, &format!("chi({t})"))?.eta)
}

/// `n` nodes on [x₁, x₂] clustered toward both endpoints in log-scale.
pub fn chi_nodes(t: f64, n: usize) -> Result<Vec<f64>> {
    if n < 2 {
        return Err(Error::validation("n", "at least two nodes are required"));
    }
    let (x1, x2) = chi_support(t)?;
    let (l1, l2) = (x1.ln(), x2.ln());
    Ok((0..n)
        .map(|j| {
            if j == 0 {
                return x1;
            }
            if j + 1 == n {
                return x2;
            }
            let c = 0.5 * (1.0 - (PI * j as f64 / (n - 1) as f64).cos());
            (l1 + (l2 - l1) * c).exp()
        })
        .collect())
}

/// χ_t sampled on [`chi_nodes`].
pub fn chi_measure(t: f64, n: usize) -> Result<Measure> {
    let nodes = chi_nodes(t, n)?;
    let values = chi_density_grid(t, &nodes)?;
    Measure::normalized(Space::Halfline, vec![], nodes, values, format!("chi({t})"))
}

/// λ_t sampled on `n` nodes; clustered over the support arc when t ≤ 4.
pub fn lambda_measure(t: f64, n: usize) -> Result<Measure> {
    let (_, th1, full) = lambda_support(t)?;
    let nodes: Vec<f64> = if full {
        circle_grid(n)
    } else if th1 >= PI {
        // t = 4: the density vanishes like |θ − π|^{1/3}; cluster toward −1.
        (1..=n).map(|j| -PI * (PI * j as f64 / n as f64).cos()).collect()
    } else {
        (0..n).map(|j| -th1 * (PI * j as f64 / (n - 1) as f64).cos()).collect()
    };
    let values = lambda_density_grid(t, &nodes)?;
    Measure::normalized(Space::Circle, vec![], nodes, values, format!("lambda({t})"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn chi_support_values() {
        let (x1, x2) = chi_support(1.0).unwrap();
        assert!((x1 - 0.124_873_052_357_835_25).abs() < 1e-15);
        assert!((x1 * x2 - 1.0).abs() < 1e-15);
        let mut prev = 0.0;
        for t in [4.0, 1.0, 0.1, 1e-3, 1e-6] {
            let (x1, _) = chi_support(t).unwrap();
            assert!(x1 > prev && x1 < 1.0);
            prev = x1;
        }
        assert!(1.0 - prev < 1e-2);
        assert!(chi_support(0.0).is_err());
    }

    #[test]
    fn chi_density_reference_value() {
        // Root of the implicit equation at x = 1, t = 1 from an independent
        // high-precision solve.
        let f = chi_density(1.0, 1.0).unwrap();
        assert!((f - 0.305_637_611_170_756_66).abs() < 1e-12, "{f}");
        let (x1, x2) = chi_support(1.0).unwrap();
        assert_eq!(chi_density(1.0, x1 - 0.01).unwrap(), 0.0);
        assert_eq!(chi_density(1.0, x2 + 0.01).unwrap(), 0.0);
    }

    #[test]
    fn lambda_support_values() {
        let (a, b, full) = lambda_support(4.0).unwrap();
        assert!(!full && (a - PI).abs() < 1e-15 && (b - PI).abs() < 1e-15);
        let (a, b, _) = lambda_support(2.0).unwrap();
        assert!((a - PI / 2.0).abs() < 1e-15 && (b - (PI / 2.0 + 1.0)).abs() < 1e-15);
        assert!(lambda_support(5.0).unwrap().2);
        let mut prev = 0.0;
        for j in 1..=40 {
            let (_, b, _) = lambda_support(0.1 * j as f64).unwrap();
            assert!(b > prev);
            prev = b;
        }
    }

    #[test]
    fn lambda_density_properties() {
        assert!(lambda_density(4.0, PI).unwrap() <= 1e-12);
        for th in [0.3, 1.0, 2.0] {
            let a = lambda_density(1.0, th).unwrap();
            let b = lambda_density(1.0, -th).unwrap();
            assert!((a - b).abs() < 1e-15);
        }
        let (_, th1, _) = lambda_support(1.0).unwrap();
        assert_eq!(lambda_density(1.0, th1 + 0.01).unwrap(), 0.0);
        assert!(lambda_density(1.0, 0.5 * th1).unwrap() > 0.0);
    }

    #[test]
    fn boundary_curve_satisfies_polar_equation() {
        let t = 2.0;
        let (th0, th1, _) = lambda_support(t).unwrap();
        for th in [0.0, 0.5, 1.5, 2.5] {
            let (r, psi) = lambda_boundary_curve(t, th).unwrap();
            let lhs = t * (r * r - 1.0);
            let rhs = 2.0 * r.ln() * (1.0 - 2.0 * r * psi.cos() + r * r);
            assert!((lhs - rhs).abs() < 1e-12, "{th}: {lhs} vs {rhs}");
            assert!(psi.abs() < th0);
        }
        let (r, psi) = lambda_boundary_curve(t, th1 - 1e-6).unwrap();
        assert!(1.0 - r < 1e-2 && (th0 - psi).abs() < 1e-4, "{r} {psi} {th0}");
    }

    #[test]
    fn sigma_identities() {
        let z = C64::new(0.2, -0.3);
        let a = brownian_sigma(Family::Chi, 0.4, z).unwrap() * brownian_sigma(Family::Chi, 0.7, z).unwrap();
        assert!((a - brownian_sigma(Family::Chi, 1.1, z).unwrap()).norm() < 1e-14);
        assert!((brownian_sigma(Family::Lambda, 1.5, C64::new(0.0, 0.0)).unwrap() - (0.75f64).exp()).norm() < 1e-15);
        let s = brownian_sigma(Family::Lambda, 1.5, z).unwrap();
        assert!((brownian_sigma(Family::Lambda, 1.5, z.conj()).unwrap() - s.conj()).norm() < 1e-15);
        assert!(brownian_sigma(Family::Chi, 1.0, C64::new(1.0, 0.0)).is_err());
    }

    #[test]
    fn lambda_moments_match_eta_derivative() {
        assert!((lambda_moment(1.0, 1) - (-0.5f64).exp()).abs() < 1e-15);
        // m₂ = e^{−t}(1 − t).
        assert!((lambda_moment(0.7, 2) - (-0.7f64).exp() * 0.3).abs() < 1e-15);
    }
}
