//! Integration of Cauchy-type kernels against atoms plus a piecewise-linear
//! density.
//!
//! Segments far from the kernel singularity are handled by Gauss–Legendre
//! rules; segments close to it are integrated in closed form, so the results
//! stay accurate right up to the boundary of the domain.

use crate::error::{Error, Result};
use crate::measure::{Atom, Density};
use crate::special::{li2, log1p, GL4, GL8};
use crate::C64;
use std::f64::consts::PI;

const SERIES_RADIUS: f64 = 0.5;
const SERIES_TERMS: usize = 64;
const FAR4: f64 = 50.0;
const FAR8: f64 = 5.0;

struct CircleSegment {
    a: f64,
    b: f64,
    fa: f64,
    fb: f64,
    xa: C64,
    xb: C64,
    mid: C64,
    len: f64,
    /// (ξ, weight·f) at the four- and eight-point nodes.
    g4: [(C64, f64); 4],
    g8: [(C64, f64); 8],
}

/// Precomputed data for a finite measure on the unit circle.
pub(crate) struct CircleData {
    atoms: Vec<(C64, f64)>,
    segs: Vec<CircleSegment>,
    /// (ξ_j, b_{j−1} − b_j): node positions and slope jumps of the density.
    jumps: Vec<(f64, f64)>,
    mass: f64,
    /// Moments m_0..=m_{SERIES_TERMS+1}.
    moments: Vec<C64>,
}

impl CircleData {
    pub(crate) fn new(atoms: &[Atom], density: Option<&Density>) -> Self {
        let atoms: Vec<(C64, f64)> = atoms.iter().map(|a| (C64::from_polar(1.0, a.pos), a.mass)).collect();
        let mut segs = Vec::new();
        let mut jumps = Vec::new();
        let mut mass: f64 = atoms.iter().map(|a| a.1).sum();
        if let Some(d) = density {
            let n = d.nodes.len();
            let mut slopes = Vec::with_capacity(n);
            for j in 0..n {
                let (a, fa) = (d.nodes[j], d.values[j]);
                let (b, fb) = if j + 1 < n {
                    (d.nodes[j + 1], d.values[j + 1])
                } else {
                    (d.nodes[0] + 2.0 * PI, d.values[0])
                };
                let len = b - a;
                slopes.push((fb - fa) / len);
                mass += 0.5 * (fa + fb) * len;
                let (h, m) = (0.5 * len, 0.5 * (a + b));
                let lin = |t: f64| fa + (fb - fa) * (t - a) / len;
                let node = |x: f64, w: f64| {
                    let t = m + h * x;
                    (C64::from_polar(1.0, t), w * h * lin(t))
                };
                let g4: [(C64, f64); 4] = std::array::from_fn(|i| node(GL4.0[i], GL4.1[i]));
                let g8: [(C64, f64); 8] = std::array::from_fn(|i| node(GL8.0[i], GL8.1[i]));
                segs.push(CircleSegment {
                    a,
                    b,
                    fa,
                    fb,
                    xa: C64::from_polar(1.0, a),
                    xb: C64::from_polar(1.0, b),
                    mid: C64::from_polar(1.0, m),
                    len,
                    g4,
                    g8,
                });
            }
            for j in 0..n {
                let prev = if j == 0 { slopes[n - 1] } else { slopes[j - 1] };
                jumps.push((d.nodes[j], prev - slopes[j]));
            }
        }
        let kmax = SERIES_TERMS + 1;
        let mut moments = vec![C64::new(0.0, 0.0); kmax + 1];
        moments[0] = C64::new(mass, 0.0);
        for &(x, m) in &atoms {
            let mut p = C64::new(1.0, 0.0);
            for mk in moments.iter_mut().skip(1) {
                p *= x;
                *mk += m * p;
            }
        }
        for &(t, db) in &jumps {
            if db == 0.0 {
                continue;
            }
            let x = C64::from_polar(1.0, t);
            let mut p = C64::new(1.0, 0.0);
            for (k, mk) in moments.iter_mut().enumerate().skip(1) {
                p *= x;
                *mk += db * p / (k * k) as f64;
            }
        }
        CircleData {
            atoms,
            segs,
            jumps,
            mass,
            moments,
        }
    }

    /// ∫ ξᵏ dσ(ξ) for k ≥ 0 (negative k by conjugation).
    pub(crate) fn moment(&self, k: i64) -> C64 {
        if k == 0 {
            return C64::new(self.mass, 0.0);
        }
        if k < 0 {
            return self.moment(-k).conj();
        }
        let kf = k as f64;
        let mut acc = C64::new(0.0, 0.0);
        for &(x, m) in &self.atoms {
            acc += m * x.powi(k as i32);
        }
        let mut dens = C64::new(0.0, 0.0);
        for &(t, db) in &self.jumps {
            if db != 0.0 {
                dens += db * C64::from_polar(1.0, (kf * t).rem_euclid(2.0 * PI));
            }
        }
        acc + dens / (kf * kf)
    }

    /// P(w) = ∫ ξ/(1−wξ) dσ(ξ) = ψ(w)/w and its derivative, for |w| < 1.
    pub(crate) fn psi_over(&self, w: C64) -> (C64, C64) {
        if w.norm() <= SERIES_RADIUS {
            let mut p = C64::new(0.0, 0.0);
            let mut dp = C64::new(0.0, 0.0);
            for k in (1..=SERIES_TERMS).rev() {
                p = p * w + self.moments[k];
                dp = dp * w + (k as f64) * self.moments[k + 1];
            }
            return (p, dp);
        }
        let mut p = C64::new(0.0, 0.0);
        let mut dp = C64::new(0.0, 0.0);
        for &(x, m) in &self.atoms {
            let q = 1.0 / (1.0 - w * x);
            p += m * x * q;
            dp += m * x * x * q * q;
        }
        let pole = 1.0 / w;
        for s in &self.segs {
            let dist = (s.mid - pole).norm();
            if dist > FAR4 * s.len {
                for &(x, wf) in &s.g4 {
                    let q = x / (1.0 - w * x);
                    p += wf * q;
                    dp += wf * q * q;
                }
            } else if dist > FAR8 * s.len {
                for &(x, wf) in &s.g8 {
                    let q = x / (1.0 - w * x);
                    p += wf * q;
                    dp += wf * q * q;
                }
            } else {
                let (ps, dps) = near_segment(s, w);
                p += ps / w;
                dp += dps / w - ps / (w * w);
            }
        }
        (p, dp)
    }
}

/// Closed-form ∫ wξ/(1−wξ) f(θ) dθ over one segment, and its w-derivative.
fn near_segment(s: &CircleSegment, w: C64) -> (C64, C64) {
    let i = C64::new(0.0, 1.0);
    let beta = (s.fb - s.fa) / (s.b - s.a);
    let (ua, ub) = (w * s.xa, w * s.xb);
    let (la, lb) = (log1p(-ua), log1p(-ub));
    let psi = i * (s.fb * lb - s.fa * la) + beta * (li2(ub) - li2(ua));
    let dpsi = i * (s.fa * s.xa / (1.0 - ua) - s.fb * s.xb / (1.0 - ub)) + beta * (la - lb) / w;
    (psi, dpsi)
}

struct LineSegment {
    x0: f64,
    x1: f64,
    f0: f64,
    f1: f64,
}

/// Precomputed data for a finite measure on [0, ∞).
pub(crate) struct HalflineData {
    atoms: Vec<(f64, f64)>,
    segs: Vec<LineSegment>,
    mass: f64,
    mean: f64,
    second: f64,
}

/// Coefficients [p0, p1, p2] of a quadratic numerator p0 + p1 x + p2 x².
pub(crate) type Quad = [C64; 3];

fn quad(p: &Quad, x: f64) -> C64 {
    p[0] + x * (p[1] + x * p[2])
}

impl HalflineData {
    pub(crate) fn new(atoms: &[Atom], density: Option<&Density>) -> Self {
        let atoms: Vec<(f64, f64)> = atoms.iter().map(|a| (a.pos, a.mass)).collect();
        let mut segs = Vec::new();
        if let Some(d) = density {
            for j in 0..d.nodes.len().saturating_sub(1) {
                segs.push(LineSegment {
                    x0: d.nodes[j],
                    x1: d.nodes[j + 1],
                    f0: d.values[j],
                    f1: d.values[j + 1],
                });
            }
        }
        let mut mass = 0.0;
        let mut mean = 0.0;
        let mut second = 0.0;
        for &(x, m) in &atoms {
            mass += m;
            mean += m * x;
            second += m * x * x;
        }
        for s in &segs {
            let (a, b) = (s.x0, s.x1);
            let beta = (s.f1 - s.f0) / (b - a);
            let alpha = s.f0 - beta * a;
            let p = |e: i32| (b.powi(e) - a.powi(e)) / e as f64;
            mass += 0.5 * (s.f0 + s.f1) * (b - a);
            mean += alpha * p(2) + beta * p(3);
            second += alpha * p(3) + beta * p(4);
        }
        HalflineData {
            atoms,
            segs,
            mass,
            mean,
            second,
        }
    }

    pub(crate) fn mass(&self) -> f64 {
        self.mass
    }

    pub(crate) fn mean(&self) -> f64 {
        self.mean
    }

    pub(crate) fn second_moment(&self) -> f64 {
        self.second
    }

    /// Smallest and largest point carrying mass.
    pub(crate) fn support(&self) -> (f64, f64) {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for &(x, _) in &self.atoms {
            lo = lo.min(x);
            hi = hi.max(x);
        }
        if let (Some(f), Some(l)) = (self.segs.first(), self.segs.last()) {
            lo = lo.min(f.x0);
            hi = hi.max(l.x1);
        }
        (lo, hi)
    }

    /// (∫ p1(x)/(d−x) dσ, ∫ p2(x)/(d−x)² dσ) for a pole d off the support.
    pub(crate) fn rational(&self, d: C64, p1: &Quad, p2: &Quad) -> Result<(C64, C64)> {
        let zero = [C64::new(0.0, 0.0); 3];
        let (_, a, b) = self.rational3(d, &zero, p1, p2)?;
        Ok((a, b))
    }

    /// As [`Self::rational`] with a second numerator `p0` over (d−x).
    pub(crate) fn rational3(&self, d: C64, p0: &Quad, p1: &Quad, p2: &Quad) -> Result<(C64, C64, C64)> {
        let mut r0 = C64::new(0.0, 0.0);
        let mut r1 = C64::new(0.0, 0.0);
        let mut r2 = C64::new(0.0, 0.0);
        let guard = 1e-15 * (1.0 + d.norm());
        for &(x, m) in &self.atoms {
            let v = d - x;
            if v.norm() <= guard {
                return Err(Error::Pole { z: d });
            }
            let q = 1.0 / v;
            r0 += m * quad(p0, x) * q;
            r1 += m * quad(p1, x) * q;
            r2 += m * quad(p2, x) * q * q;
        }
        for s in &self.segs {
            let len = s.x1 - s.x0;
            let dist = if d.re < s.x0 {
                (d - s.x0).norm()
            } else if d.re > s.x1 {
                (d - s.x1).norm()
            } else {
                d.im.abs()
            };
            if dist > 48.0 * len {
                gl_segment(&GL4.0, &GL4.1, s, d, [p0, p1, p2], [&mut r0, &mut r1, &mut r2]);
            } else if dist > 4.0 * len {
                gl_segment(&GL8.0, &GL8.1, s, d, [p0, p1, p2], [&mut r0, &mut r1, &mut r2]);
            } else {
                if dist <= guard {
                    return Err(Error::Pole { z: d });
                }
                let [a, b, c] = exact_segment(s, d, [p0, p1, p2]);
                r0 += a;
                r1 += b;
                r2 += c;
            }
        }
        Ok((r0, r1, r2))
    }
}

fn is_zero(p: &Quad) -> bool {
    p.iter().all(|c| c.re == 0.0 && c.im == 0.0)
}

fn gl_segment(x: &[f64], w: &[f64], s: &LineSegment, d: C64, ps: [&Quad; 3], out: [&mut C64; 3]) {
    let h = 0.5 * (s.x1 - s.x0);
    let m = 0.5 * (s.x1 + s.x0);
    let slope = (s.f1 - s.f0) / (s.x1 - s.x0);
    let live = ps.map(|p| !is_zero(p));
    let [o0, o1, o2] = out;
    for i in 0..x.len() {
        let t = m + h * x[i];
        let wf = w[i] * h * (s.f0 + slope * (t - s.x0));
        let q = 1.0 / (d - t);
        if live[0] {
            *o0 += wf * quad(ps[0], t) * q;
        }
        if live[1] {
            *o1 += wf * quad(ps[1], t) * q;
        }
        if live[2] {
            *o2 += wf * quad(ps[2], t) * q * q;
        }
    }
}

/// Cubic F(s) = p(s)·(α + βs) re-expanded in powers of v = d − s.
fn shifted_cubic(p: &Quad, alpha: f64, beta: f64, d: C64) -> [C64; 4] {
    let q = [p[0] * alpha, p[0] * beta + p[1] * alpha, p[1] * beta + p[2] * alpha, p[2] * beta];
    // F(d − v) = Σ_k q_k (d − v)^k = Σ_j c_j v^j.
    let mut c = [C64::new(0.0, 0.0); 4];
    let binom = [[1.0, 0.0, 0.0, 0.0], [1.0, 1.0, 0.0, 0.0], [1.0, 2.0, 1.0, 0.0], [1.0, 3.0, 3.0, 1.0]];
    let mut dpow = [C64::new(1.0, 0.0); 4];
    for k in 1..4 {
        dpow[k] = dpow[k - 1] * d;
    }
    for k in 0..4 {
        for j in 0..=k {
            let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
            c[j] += q[k] * binom[k][j] * sign * dpow[k - j];
        }
    }
    c
}

/// ∫_{v0}^{v1} v^e dv for e ∈ {−2, −1, 0, 1, 2}, written to avoid cancellation.
fn power_integral(e: i32, v0: C64, v1: C64, dv: C64) -> C64 {
    match e {
        -2 => dv / (v0 * v1),
        -1 => log1p(dv / v0),
        0 => dv,
        1 => dv * (v0 + v1) * 0.5,
        2 => dv * (v0 * v0 + v0 * v1 + v1 * v1) / 3.0,
        _ => unreachable!("exponent out of range"),
    }
}

fn exact_segment(s: &LineSegment, d: C64, ps: [&Quad; 3]) -> [C64; 3] {
    let beta = (s.f1 - s.f0) / (s.x1 - s.x0);
    let alpha = s.f0 - beta * s.x0;
    let (v0, v1) = (d - s.x0, d - s.x1);
    let dv = C64::new(s.x0 - s.x1, 0.0);
    let mut out = [C64::new(0.0, 0.0); 3];
    for (slot, (p, n)) in ps.into_iter().zip([1, 1, 2]).enumerate() {
        if is_zero(p) {
            continue;
        }
        let c = shifted_cubic(p, alpha, beta, d);
        // ds = −dv
        let mut acc = C64::new(0.0, 0.0);
        for (j, cj) in c.iter().enumerate() {
            if cj.re != 0.0 || cj.im != 0.0 {
                acc += cj * power_integral(j as i32 - n, v0, v1, dv);
            }
        }
        out[slot] = -acc;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measure::circle_grid;
    use crate::special::gauss8;

    fn z0() -> C64 {
        C64::new(0.0, 0.0)
    }

    fn tent_density() -> Density {
        let nodes = circle_grid(64);
        let values = nodes.iter().map(|t| (1.0 + 0.8 * t.cos()) / (2.0 * PI)).collect();
        Density { nodes, values }
    }

    /// Brute-force reference: adaptive-free, very fine Gauss rule on each segment.
    fn brute_circle(d: &Density, w: C64) -> (C64, C64) {
        let n = d.nodes.len();
        let mut p = z0();
        let mut dp = z0();
        for j in 0..n {
            let (a, fa) = (d.nodes[j], d.values[j]);
            let (b, fb) = if j + 1 < n { (d.nodes[j + 1], d.values[j + 1]) } else { (d.nodes[0] + 2.0 * PI, d.values[0]) };
            let sub = 400;
            for k in 0..sub {
                let (s0, s1) = (a + (b - a) * k as f64 / sub as f64, a + (b - a) * (k + 1) as f64 / sub as f64);
                let lin = |t: f64| fa + (fb - fa) * (t - a) / (b - a);
                let re = gauss8(s0, s1, |t| {
                    let x = C64::from_polar(1.0, t);
                    (x / (1.0 - w * x) * lin(t)).re
                });
                let im = gauss8(s0, s1, |t| {
                    let x = C64::from_polar(1.0, t);
                    (x / (1.0 - w * x) * lin(t)).im
                });
                p += C64::new(re, im);
                let re = gauss8(s0, s1, |t| {
                    let x = C64::from_polar(1.0, t);
                    let q = x / (1.0 - w * x);
                    (q * q * lin(t)).re
                });
                let im = gauss8(s0, s1, |t| {
                    let x = C64::from_polar(1.0, t);
                    let q = x / (1.0 - w * x);
                    (q * q * lin(t)).im
                });
                dp += C64::new(re, im);
            }
        }
        (p, dp)
    }

    #[test]
    fn circle_tiers_agree_with_brute_force() {
        let d = tent_density();
        let data = CircleData::new(&[], Some(&d));
        for w in [C64::new(0.3, 0.1), C64::new(0.7, -0.2), C64::from_polar(0.97, 1.0), C64::from_polar(0.999, d.nodes[10])] {
            let (p, dp) = data.psi_over(w);
            let (bp, bdp) = brute_circle(&d, w);
            assert!((p - bp).norm() < 1e-10 * (1.0 + bp.norm()), "{w}: {p} vs {bp}");
            assert!((dp - bdp).norm() < 1e-8 * (1.0 + bdp.norm()), "{w}: {dp} vs {bdp}");
        }
    }

    #[test]
    fn circle_moments_match_series_definition() {
        let d = tent_density();
        let data = CircleData::new(&[], Some(&d));
        let w = C64::new(0.2, 0.1);
        let (p, _) = data.psi_over(w);
        let mut series = z0();
        for k in (1..=60).rev() {
            series = series * w + data.moment(k);
        }
        let (bp, _) = brute_circle(&d, w);
        assert!((series - bp).norm() < 1e-12);
        assert!((p - bp).norm() < 1e-12);
    }

    #[test]
    fn halfline_exact_and_gauss_agree() {
        let d = Density {
            nodes: vec![0.5, 0.9, 1.4, 2.0],
            values: vec![0.1, 0.7, 0.5, 0.2],
        };
        let data = HalflineData::new(&[], Some(&d));
        let one = C64::new(1.0, 0.0);
        let p1 = [one, C64::new(0.3, 0.1), C64::new(0.0, 0.2)];
        let p2 = [C64::new(0.2, 0.0), one, one];
        for pole in [C64::new(1.1, 1e-3), C64::new(1.1, 0.4), C64::new(-3.0, 0.0), C64::new(40.0, 2.0)] {
            let (a, b) = data.rational(pole, &p1, &p2).unwrap();
            let mut ra = z0();
            let mut rb = z0();
            for s in &data.segs {
                let sub = 2000;
                for k in 0..sub {
                    let s0 = s.x0 + (s.x1 - s.x0) * k as f64 / sub as f64;
                    let s1 = s.x0 + (s.x1 - s.x0) * (k + 1) as f64 / sub as f64;
                    let f = |x: f64| s.f0 + (s.f1 - s.f0) * (x - s.x0) / (s.x1 - s.x0);
                    let g1 = |x: f64| quad(&p1, x) * f(x) / (pole - x);
                    let g2 = |x: f64| quad(&p2, x) * f(x) / ((pole - x) * (pole - x));
                    ra += C64::new(gauss8(s0, s1, |x| g1(x).re), gauss8(s0, s1, |x| g1(x).im));
                    rb += C64::new(gauss8(s0, s1, |x| g2(x).re), gauss8(s0, s1, |x| g2(x).im));
                }
            }
            assert!((a - ra).norm() < 1e-10 * (1.0 + ra.norm()), "{pole}: {a} vs {ra}");
            assert!((b - rb).norm() < 1e-9 * (1.0 + rb.norm()), "{pole}: {b} vs {rb}");
        }
    }

    #[test]
    fn halfline_moments() {
        let d = Density {
            nodes: vec![1.0, 2.0],
            values: vec![1.0, 1.0],
        };
        let data = HalflineData::new(&[Atom { pos: 3.0, mass: 0.5 }], Some(&d));
        assert!((data.mass() - 1.5).abs() < 1e-15);
        assert!((data.mean() - (1.5 + 1.5)).abs() < 1e-14);
        assert!((data.second_moment() - (7.0 / 3.0 + 4.5)).abs() < 1e-14);
    }
}
