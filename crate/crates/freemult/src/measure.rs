//! Probability measures on the unit circle and on the positive half-line.
//!
//! A [`Measure`] is a finite list of atoms plus an optional density sampled on a
//! strictly increasing grid. Between grid nodes the density is linear. On the
//! circle the grid is periodic: the last node is joined to the first one shifted
//! by 2π. On the half-line the density vanishes outside the first and last node.
//! Circle positions are angles in (−π, π].

use crate::error::{Error, Result};
use crate::kernel::{CircleData, HalflineData};
use crate::special::gauss8;
use crate::C64;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::f64::consts::{E, PI};
use std::fmt::Write as _;

/// Tolerance on the total mass of a probability measure.
pub const MASS_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Space {
    Circle,
    Halfline,
}

impl Space {
    pub fn name(self) -> &'static str {
        match self {
            Space::Circle => "circle",
            Space::Halfline => "halfline",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    pub pos: f64,
    pub mass: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Density {
    pub nodes: Vec<f64>,
    pub values: Vec<f64>,
}

impl Density {
    /// Integral of the piecewise-linear density (periodic on the circle).
    pub fn mass(&self, space: Space) -> f64 {
        let n = self.nodes.len();
        let mut total = 0.0;
        for i in 0..n.saturating_sub(1) {
            total += 0.5 * (self.values[i] + self.values[i + 1]) * (self.nodes[i + 1] - self.nodes[i]);
        }
        if space == Space::Circle && n > 0 {
            let gap = self.nodes[0] + 2.0 * PI - self.nodes[n - 1];
            total += 0.5 * (self.values[0] + self.values[n - 1]) * gap;
        }
        total
    }

    /// Linear interpolation of the density at `x`.
    pub fn value_at(&self, space: Space, x: f64) -> f64 {
        let n = self.nodes.len();
        if n == 0 {
            return 0.0;
        }
        let (nodes, values) = (&self.nodes, &self.values);
        let x = match space {
            Space::Circle => wrap_angle(x),
            Space::Halfline => x,
        };
        if x < nodes[0] || x > nodes[n - 1] {
            return match space {
                Space::Halfline => 0.0,
                Space::Circle => {
                    let (a, b) = (nodes[n - 1], nodes[0] + 2.0 * PI);
                    let xx = if x < nodes[0] { x + 2.0 * PI } else { x };
                    let s = (xx - a) / (b - a);
                    values[n - 1] + s * (values[0] - values[n - 1])
                }
            };
        }
        let j = nodes.partition_point(|&v| v <= x).clamp(1, n - 1);
        let (a, b) = (nodes[j - 1], nodes[j]);
        let s = if b > a { (x - a) / (b - a) } else { 0.0 };
        values[j - 1] + s * (values[j] - values[j - 1])
    }
}

/// Reduce an angle to (−π, π].
pub fn wrap_angle(theta: f64) -> f64 {
    let mut t = theta.rem_euclid(2.0 * PI);
    if t > PI {
        t -= 2.0 * PI;
    }
    if t <= -PI {
        t += 2.0 * PI;
    }
    t
}

/// Uniform grid of `n` angles in (−π, π], ending at π.
pub fn circle_grid(n: usize) -> Vec<f64> {
    let h = 2.0 * PI / n as f64;
    (0..n)
        .map(|j| if j + 1 == n { PI } else { -PI + (j + 1) as f64 * h })
        .collect()
}

/// `n` geometrically spaced points from `a` to `b` inclusive.
pub fn geometric_grid(a: f64, b: f64, n: usize) -> Vec<f64> {
    let (la, lb) = (a.ln(), b.ln());
    (0..n)
        .map(|j| {
            if j == 0 {
                a
            } else if j + 1 == n {
                b
            } else {
                (la + (lb - la) * j as f64 / (n - 1) as f64).exp()
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Measure {
    pub space: Space,
    #[serde(default)]
    pub atoms: Vec<Atom>,
    #[serde(default)]
    pub density: Option<Density>,
    #[serde(default)]
    pub label: String,
}

pub(crate) fn validate_parts(
    space: Space,
    atoms: &[Atom],
    density: Option<&Density>,
    positive: bool,
) -> Result<()> {
    for (i, a) in atoms.iter().enumerate() {
        if !a.pos.is_finite() {
            return Err(Error::validation(format!("atoms[{i}].pos"), "not finite"));
        }
        match space {
            Space::Circle if !(a.pos > -PI && a.pos <= PI) => {
                return Err(Error::validation(
                    format!("atoms[{i}].pos"),
                    "grid range: circle positions must lie in (-pi, pi]",
                ))
            }
            Space::Halfline if a.pos < 0.0 => {
                return Err(Error::validation(
                    format!("atoms[{i}].pos"),
                    "grid range: half-line positions must be nonnegative",
                ))
            }
            _ => {}
        }
        let ok = if positive { a.mass > 0.0 } else { a.mass >= 0.0 };
        if !a.mass.is_finite() || !ok {
            return Err(Error::validation(format!("atoms[{i}].mass"), "atom mass must be positive"));
        }
        if atoms[..i].iter().any(|b| b.pos == a.pos) {
            return Err(Error::validation(format!("atoms[{i}].pos"), "duplicate atom position"));
        }
    }
    if let Some(d) = density {
        if d.nodes.len() != d.values.len() {
            return Err(Error::validation("density", "nodes and values differ in length"));
        }
        if d.nodes.len() < 2 {
            return Err(Error::validation("density.nodes", "at least two nodes are required"));
        }
        for (i, w) in d.nodes.windows(2).enumerate() {
            if !(w[1] > w[0]) {
                return Err(Error::validation(
                    format!("density.nodes[{}]", i + 1),
                    "grid must be strictly increasing",
                ));
            }
        }
        let (first, last) = (d.nodes[0], d.nodes[d.nodes.len() - 1]);
        match space {
            Space::Circle if !(first > -PI && last <= PI) => {
                return Err(Error::validation(
                    "density.nodes",
                    "grid range: circle nodes must lie in (-pi, pi]",
                ))
            }
            Space::Halfline if !(first > 0.0 && last.is_finite()) => {
                return Err(Error::validation(
                    "density.nodes",
                    "grid range: half-line nodes must lie in (0, inf)",
                ))
            }
            _ => {}
        }
        for (i, v) in d.values.iter().enumerate() {
            if !v.is_finite() || *v < 0.0 {
                return Err(Error::validation(
                    format!("density.values[{i}]"),
                    "density values must be finite and nonnegative",
                ));
            }
        }
    }
    Ok(())
}

impl Measure {
    /// Build and validate a probability measure.
    pub fn new(space: Space, atoms: Vec<Atom>, density: Option<Density>, label: impl Into<String>) -> Result<Self> {
        let m = Measure {
            space,
            atoms,
            density,
            label: label.into(),
        };
        m.validate()?;
        Ok(m)
    }

    /// Point mass at `pos` (an angle on the circle, a point of the half-line).
    pub fn point(space: Space, pos: f64) -> Result<Self> {
        Measure::new(space, vec![Atom { pos, mass: 1.0 }], None, format!("delta({pos})"))
    }

    /// Finite atomic measure.
    pub fn atomic(space: Space, atoms: Vec<Atom>, label: impl Into<String>) -> Result<Self> {
        Measure::new(space, atoms, None, label)
    }

    /// Haar measure dθ/2π sampled on an `n`-point uniform grid.
    pub fn haar(n: usize) -> Self {
        let nodes = circle_grid(n);
        let values = vec![1.0 / (2.0 * PI); n];
        Measure {
            space: Space::Circle,
            atoms: vec![],
            density: Some(Density { nodes, values }),
            label: "haar".into(),
        }
    }

    /// Sample `f` on `nodes` and rescale the samples so that the piecewise-linear
    /// density has unit mass.
    pub fn from_samples(space: Space, nodes: Vec<f64>, f: impl Fn(f64) -> f64, label: impl Into<String>) -> Result<Self> {
        let values: Vec<f64> = nodes.iter().map(|&x| f(x).max(0.0)).collect();
        Measure::normalized(space, vec![], nodes, values, label)
    }

    /// Rescale the density part so that atoms plus density have unit mass.
    pub fn normalized(space: Space, atoms: Vec<Atom>, nodes: Vec<f64>, values: Vec<f64>, label: impl Into<String>) -> Result<Self> {
        let density = Density { nodes, values };
        validate_parts(space, &atoms, Some(&density), true)?;
        let atom_mass: f64 = atoms.iter().map(|a| a.mass).sum();
        let dm = density.mass(space);
        if !(dm > 0.0) || atom_mass >= 1.0 {
            return Err(Error::validation("mass", "cannot normalize: density has no mass"));
        }
        let s = (1.0 - atom_mass) / dm;
        let density = Density {
            values: density.values.iter().map(|v| v * s).collect(),
            nodes: density.nodes,
        };
        Measure::new(space, atoms, Some(density), label)
    }

    pub fn validate(&self) -> Result<()> {
        validate_parts(self.space, &self.atoms, self.density.as_ref(), true)?;
        let m = self.mass();
        if (m - 1.0).abs() > MASS_TOL {
            return Err(Error::validation("mass", format!("total mass is {m}, expected 1")));
        }
        Ok(())
    }

    pub fn atom_mass(&self) -> f64 {
        self.atoms.iter().map(|a| a.mass).sum()
    }

    pub fn density_mass(&self) -> f64 {
        self.density.as_ref().map_or(0.0, |d| d.mass(self.space))
    }

    pub fn mass(&self) -> f64 {
        self.atom_mass() + self.density_mass()
    }

    /// Density value at a point (0 for purely atomic measures).
    pub fn density_at(&self, x: f64) -> f64 {
        self.density.as_ref().map_or(0.0, |d| d.value_at(self.space, x))
    }

    pub(crate) fn circle_data(&self) -> CircleData {
        CircleData::new(&self.atoms, self.density.as_ref())
    }

    pub(crate) fn halfline_data(&self) -> HalflineData {
        HalflineData::new(&self.atoms, self.density.as_ref())
    }

    /// Parse the JSON document format.
    pub fn parse(text: &str) -> Result<Self> {
        let m: Measure = serde_json::from_str(text)?;
        m.validate()?;
        Ok(m)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("measure serialization cannot fail")
    }
}

/// k-th moment: ∫ξᵏ dμ on the circle, ∫xᵏ dμ on the half-line (as a real
/// number in the real part, +∞ when it overflows).
pub fn moment(mu: &Measure, k: u32) -> Result<C64> {
    mu.validate()?;
    Ok(match mu.space {
        Space::Circle => mu.circle_data().moment(k as i64),
        Space::Halfline => {
            let mut total = 0.0;
            for a in &mu.atoms {
                total += a.mass * a.pos.powi(k as i32);
            }
            if let Some(d) = &mu.density {
                for w in d.nodes.windows(2).zip(d.values.windows(2)) {
                    let ((x0, x1), (f0, f1)) = ((w.0[0], w.0[1]), (w.1[0], w.1[1]));
                    let b = (f1 - f0) / (x1 - x0);
                    total += if k <= 14 {
                        gauss8(x0, x1, |x| (f0 + b * (x - x0)) * x.powi(k as i32))
                    } else {
                        let (al, be) = (f0 - b * x0, b);
                        let p = |e: i32| (x1.powi(e) - x0.powi(e)) / e as f64;
                        al * p(k as i32 + 1) + be * p(k as i32 + 2)
                    };
                }
            }
            C64::new(if total.is_finite() { total } else { f64::INFINITY }, 0.0)
        }
    })
}

/// exp(∫_{[1/e, e]} log x dμ(x)); mass outside the window contributes nothing.
pub fn log_mean_b(mu: &Measure) -> Result<f64> {
    if mu.space != Space::Halfline {
        return Err(Error::validation("space", "log_mean_b needs a half-line measure"));
    }
    mu.validate()?;
    let (lo, hi) = (1.0 / E, E);
    let mut acc = 0.0;
    for a in &mu.atoms {
        if a.pos >= lo && a.pos <= hi {
            acc += a.mass * a.pos.ln();
        }
    }
    if let Some(d) = &mu.density {
        for w in d.nodes.windows(2).zip(d.values.windows(2)) {
            let ((x0, x1), (f0, f1)) = ((w.0[0], w.0[1]), (w.1[0], w.1[1]));
            let (a, b) = (x0.max(lo), x1.min(hi));
            if b <= a {
                continue;
            }
            let s = (f1 - f0) / (x1 - x0);
            acc += gauss8(a, b, |x| (f0 + s * (x - x0)) * x.ln());
        }
    }
    Ok(acc.exp())
}

/// Push-forward under x ↦ x/b.
pub fn scale_measure(mu: &Measure, b: f64) -> Result<Measure> {
    if mu.space != Space::Halfline {
        return Err(Error::validation("space", "scale_measure needs a half-line measure"));
    }
    if !(b > 0.0) || !b.is_finite() {
        return Err(Error::domain(C64::new(b, 0.0), "scale factor must be positive"));
    }
    let atoms = mu.atoms.iter().map(|a| Atom { pos: a.pos / b, mass: a.mass }).collect();
    let density = mu.density.as_ref().map(|d| Density {
        nodes: d.nodes.iter().map(|x| x / b).collect(),
        values: d.values.iter().map(|v| v * b).collect(),
    });
    Ok(Measure {
        space: Space::Halfline,
        atoms,
        density,
        label: format!("{} scaled by 1/{b}", mu.label),
    })
}

/// A sampled density with provenance; the exchange format of recovery and
/// experiments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityProfile {
    pub space: Space,
    pub nodes: Vec<f64>,
    pub values: Vec<f64>,
    pub sup_error_estimate: f64,
    pub meta: BTreeMap<String, String>,
    /// Indices whose boundary-limit extrapolation was not monotone.
    #[serde(default)]
    pub unreliable: Vec<usize>,
}

impl DensityProfile {
    pub fn new(space: Space, nodes: Vec<f64>, values: Vec<f64>) -> Self {
        DensityProfile {
            space,
            nodes,
            values,
            sup_error_estimate: 0.0,
            meta: BTreeMap::new(),
            unreliable: vec![],
        }
    }

    pub fn with_meta(mut self, key: &str, value: impl ToString) -> Self {
        self.meta.insert(key.to_string(), value.to_string());
        self
    }

    /// Trapezoid mass, periodic on the circle.
    pub fn mass(&self) -> f64 {
        Density {
            nodes: self.nodes.clone(),
            values: self.values.clone(),
        }
        .mass(self.space)
    }

    /// Largest absolute difference to `f` over the nodes.
    pub fn sup_distance(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.nodes
            .iter()
            .zip(&self.values)
            .map(|(&x, &v)| (v - f(x)).abs())
            .fold(0.0, f64::max)
    }

    /// Sup distance restricted to nodes inside [a, b].
    pub fn sup_distance_on(&self, a: f64, b: f64, f: impl Fn(f64) -> f64) -> f64 {
        self.nodes
            .iter()
            .zip(&self.values)
            .filter(|(&x, _)| x >= a && x <= b)
            .map(|(&x, &v)| (v - f(x)).abs())
            .fold(0.0, f64::max)
    }

    /// Convert to a measure, adding `atoms` and normalizing the density part.
    pub fn to_measure(&self, atoms: Vec<Atom>, label: impl Into<String>) -> Result<Measure> {
        let values = self.values.iter().map(|v| v.max(0.0)).collect();
        Measure::normalized(self.space, atoms, self.nodes.clone(), values, label)
    }

    /// CSV with `#` metadata lines followed by a `node,value` table.
    pub fn to_csv(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "# space: {}", self.space.name());
        let _ = writeln!(s, "# sup_error_estimate: {:e}", self.sup_error_estimate);
        for (k, v) in &self.meta {
            let _ = writeln!(s, "# {k}: {v}");
        }
        if !self.unreliable.is_empty() {
            let _ = writeln!(s, "# unreliable_nodes: {}", self.unreliable.len());
        }
        s.push_str("node,value\n");
        for (x, v) in self.nodes.iter().zip(&self.values) {
            let _ = writeln!(s, "{x},{v}");
        }
        s
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut space = None;
        let mut meta = BTreeMap::new();
        let mut err = 0.0;
        let (mut nodes, mut values) = (vec![], vec![]);
        let mut header = false;
        for line in text.lines() {
            let line = line.trim();
            if let Some(c) = line.strip_prefix('#') {
                if let Some((k, v)) = c.split_once(':') {
                    let (k, v) = (k.trim(), v.trim());
                    match k {
                        "space" => {
                            space = Some(match v {
                                "circle" => Space::Circle,
                                "halfline" => Space::Halfline,
                                _ => return Err(Error::Parse(format!("unknown space {v}"))),
                            })
                        }
                        "sup_error_estimate" => err = v.parse().map_err(|_| Error::Parse("sup_error_estimate".into()))?,
                        "unreliable_nodes" => {}
                        _ => {
                            meta.insert(k.to_string(), v.to_string());
                        }
                    }
                }
                continue;
            }
            if line.is_empty() {
                continue;
            }
            if !header {
                if line != "node,value" {
                    return Err(Error::Parse("missing node,value header".into()));
                }
                header = true;
                continue;
            }
            let (a, b) = line.split_once(',').ok_or_else(|| Error::Parse(format!("bad row {line}")))?;
            nodes.push(a.parse().map_err(|_| Error::Parse(format!("bad node {a}")))?);
            values.push(b.parse().map_err(|_| Error::Parse(format!("bad value {b}")))?);
        }
        let space = space.ok_or_else(|| Error::Parse("missing space comment".into()))?;
        Ok(DensityProfile {
            space,
            nodes,
            values,
            sup_error_estimate: err,
            meta,
            unreliable: vec![],
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn uniform_halfline(a: f64, b: f64) -> Measure {
        let nodes = vec![a, b];
        Measure::new(
            Space::Halfline,
            vec![],
            Some(Density {
                nodes,
                values: vec![1.0 / (b - a); 2],
            }),
            "uniform",
        )
        .unwrap()
    }

    #[test]
    fn haar_moments_vanish() {
        let h = Measure::haar(256);
        for k in 1..6 {
            assert!(moment(&h, k).unwrap().norm() < 1e-15);
        }
    }

    #[test]
    fn atom_moment_is_a_rotation() {
        let th = 0.7;
        let d = Measure::point(Space::Circle, th).unwrap();
        for k in 1..5 {
            let m = moment(&d, k).unwrap();
            assert!((m - C64::from_polar(1.0, k as f64 * th)).norm() < 1e-15);
        }
    }

    #[test]
    fn cosine_density_first_moment() {
        let mu = Measure::from_samples(Space::Circle, circle_grid(2048), |t| (1.0 + t.cos()) / (2.0 * PI), "cos").unwrap();
        let m1 = moment(&mu, 1).unwrap();
        // Linear interpolation damps the first Fourier mode by sinc²(h/2).
        let h = 2.0 * PI / 2048.0;
        let damp = ((h / 2.0).sin() / (h / 2.0)).powi(2);
        assert!((m1.re - 0.5 * damp).abs() < 1e-12 && m1.im.abs() < 1e-14);
    }

    #[test]
    fn log_mean_examples() {
        let one = Measure::point(Space::Halfline, 1.0).unwrap();
        let two = Measure::point(Space::Halfline, 2.0).unwrap();
        let far = Measure::point(Space::Halfline, E * E).unwrap();
        assert_eq!(log_mean_b(&one).unwrap(), 1.0);
        assert!((log_mean_b(&two).unwrap() - 2.0).abs() < 1e-15);
        assert_eq!(log_mean_b(&far).unwrap(), 1.0);
    }

    #[test]
    fn scaling_examples() {
        let c = 3.5;
        let d = scale_measure(&Measure::point(Space::Halfline, c).unwrap(), c).unwrap();
        assert_eq!(d.atoms[0].pos, 1.0);
        let u = uniform_halfline(1.0, 2.0);
        let v = scale_measure(&u, 2.0).unwrap();
        let dv = v.density.as_ref().unwrap();
        assert_eq!(dv.nodes, vec![0.5, 1.0]);
        assert_eq!(dv.values, vec![2.0, 2.0]);
        assert!((v.mass() - 1.0).abs() < 1e-15);
        assert!(scale_measure(&u, 0.0).is_err());
        let back = scale_measure(&v, 0.5).unwrap();
        assert!((back.density.unwrap().nodes[1] - 2.0).abs() < 1e-15);
    }

    #[test]
    fn json_round_trip_and_errors() {
        let doc = r#"{"space":"halfline","atoms":[{"pos":1.0,"mass":1.0}],"density":null,"label":"delta"}"#;
        let m = Measure::parse(doc).unwrap();
        assert_eq!(Measure::parse(&m.to_json()).unwrap(), m);
        let bad = r#"{"space":"halfline","atoms":[{"pos":1.0,"mass":0.9}],"label":"x"}"#;
        let e = Measure::parse(bad).unwrap_err().to_string();
        assert!(e.contains("mass"), "{e}");
        let range = r#"{"space":"circle","atoms":[],"density":{"nodes":[0.0,3.5],"values":[1.0,1.0]},"label":"x"}"#;
        let e = Measure::parse(range).unwrap_err().to_string();
        assert!(e.contains("grid range"), "{e}");
        let neg = r#"{"space":"halfline","atoms":[],"density":{"nodes":[1.0,2.0],"values":[-1.0,3.0]},"label":"x"}"#;
        assert!(Measure::parse(neg).unwrap_err().to_string().contains("values"));
    }

    #[test]
    fn circle_mass_includes_wrap_segment() {
        let h = Measure::haar(64);
        assert!((h.mass() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn profile_csv_round_trip() {
        let p = DensityProfile::new(Space::Halfline, vec![1.0, 2.0], vec![0.25, 0.5]).with_meta("law", "chi");
        let q = DensityProfile::from_csv(&p.to_csv()).unwrap();
        assert_eq!(q.nodes, p.nodes);
        assert_eq!(q.values, p.values);
        assert_eq!(q.meta.get("law").map(String::as_str), Some("chi"));
    }

    #[test]
    fn wrap_angle_range() {
        assert_eq!(wrap_angle(PI), PI);
        assert_eq!(wrap_angle(-PI), PI);
        assert!((wrap_angle(3.0 * PI / 2.0) + PI / 2.0).abs() < 1e-15);
    }
}
