//! Shared builders for integration tests.
#![allow(dead_code)]

use freemult::measure::{circle_grid, geometric_grid};
use freemult::{Atom, Measure, Space};
use proptest::prelude::*;
use std::f64::consts::PI;

/// Atoms (position, weight) plus density node weights, normalized jointly.
#[derive(Debug, Clone)]
pub struct Shape {
    pub atoms: Vec<(f64, f64)>,
    pub density: Vec<f64>,
    pub density_weight: f64,
}

pub fn circle_shape() -> impl Strategy<Value = Shape> {
    (
        prop::collection::vec((-PI + 1e-3..PI, 0.05f64..1.0), 0..4),
        prop::collection::vec(0.0f64..1.0, 16),
        0.0f64..1.0,
    )
        .prop_map(|(atoms, density, density_weight)| Shape { atoms, density, density_weight })
}

pub fn halfline_shape() -> impl Strategy<Value = Shape> {
    (
        prop::collection::vec((0.1f64..10.0, 0.05f64..1.0), 0..4),
        prop::collection::vec(0.0f64..1.0, 16),
        0.0f64..1.0,
    )
        .prop_map(|(atoms, density, density_weight)| Shape { atoms, density, density_weight })
}

/// Build a unit-mass measure; a shape without mass falls back to one atom.
pub fn build(space: Space, s: &Shape) -> Measure {
    let nodes: Vec<f64> = match space {
        Space::Circle => circle_grid(64),
        Space::Halfline => geometric_grid(0.2, 5.0, 64),
    };
    // Smooth positive profile from the 16 weights, repeated over the grid.
    let values: Vec<f64> = (0..nodes.len()).map(|i| 0.05 + s.density[i % 16]).collect();
    let aw: f64 = s.atoms.iter().map(|a| a.1).sum();
    let (atom_share, dens_share) = if aw == 0.0 {
        (0.0, 1.0)
    } else if s.density_weight < 0.2 {
        (1.0, 0.0)
    } else {
        (1.0 - s.density_weight, s.density_weight)
    };
    let atoms: Vec<Atom> = s
        .atoms
        .iter()
        .map(|&(pos, w)| Atom { pos, mass: atom_share * w / aw })
        .collect();
    if dens_share == 0.0 {
        return Measure::atomic(space, atoms, "random").unwrap();
    }
    Measure::normalized(space, atoms, nodes, values, "random").unwrap()
}

pub fn bump_circle(center: f64, width: f64, n: usize) -> Measure {
    Measure::from_samples(
        Space::Circle,
        circle_grid(n),
        |t| {
            let d = freemult::measure::wrap_angle(t - center);
            (1.0 + (PI * d / width).cos()).max(0.0) * if d.abs() < width { 1.0 } else { 0.0 } + 0.02
        },
        "bump",
    )
    .unwrap()
}
