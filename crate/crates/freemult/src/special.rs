//! Special functions: the complex dilogarithm and a few stable helpers built on
//! top of it, plus fixed Gauss–Legendre rules.

use crate::C64;
use std::f64::consts::PI;

const ZETA2: f64 = PI * PI / 6.0;

/// B_{2k} / (2k+1)! for k = 1..=11.
const BERNOULLI_SERIES: [f64; 11] = [
    1.0 / 36.0,
    -1.0 / 3600.0,
    1.0 / 211_680.0,
    -1.0 / 10_886_400.0,
    1.0 / 526_901_760.0,
    -4.064_761_645_144_226e-11,
    8.921_691_020_456_453e-13,
    -1.993_929_586_072_108e-14,
    4.518_980_029_619_918e-16,
    -1.035_651_761_218_125e-17,
    2.395_218_621_026_187e-19,
];

/// ln(1 + u) for complex u, accurate when |u| is small.
pub fn log1p(u: C64) -> C64 {
    let re = 0.5 * (2.0 * u.re + u.norm_sqr()).ln_1p();
    let im = u.im.atan2(1.0 + u.re);
    C64::new(re, im)
}

fn bernoulli_series(u: C64) -> C64 {
    let u2 = u * u;
    let mut acc = C64::new(0.0, 0.0);
    for c in BERNOULLI_SERIES.iter().rev() {
        acc = acc * u2 + *c;
    }
    u - 0.25 * u2 + u * u2 * acc
}

/// Complex dilogarithm Li₂(z) on the principal branch.
pub fn li2(z: C64) -> C64 {
    if z.re == 0.0 && z.im == 0.0 {
        return z;
    }
    if z.im == 0.0 && z.re == 1.0 {
        return C64::new(ZETA2, 0.0);
    }
    let nz = z.norm_sqr();
    if z.re <= 0.5 {
        if nz > 1.0 {
            let l = (-z).ln();
            -bernoulli_series(-log1p(-1.0 / z)) - ZETA2 - 0.5 * l * l
        } else {
            bernoulli_series(-log1p(-z))
        }
    } else if nz <= 2.0 * z.re {
        let lz = z.ln();
        -bernoulli_series(-lz) + ZETA2 - lz * log1p(-z)
    } else {
        let l = (-z).ln();
        -bernoulli_series(-log1p(-1.0 / z)) - ZETA2 - 0.5 * l * l
    }
}

const SMALL: f64 = 0.25;
const SERIES_TERMS: usize = 30;

/// Li₂(u)/u, continuous at u = 0.
pub fn li2_over(u: C64) -> C64 {
    if u.norm() < SMALL {
        let mut acc = C64::new(0.0, 0.0);
        for k in (1..=SERIES_TERMS).rev() {
            acc = acc * u + 1.0 / (k * k) as f64;
        }
        acc
    } else {
        li2(u) / u
    }
}

/// d/du [Li₂(u)/u].
pub fn li2_over_deriv(u: C64) -> C64 {
    if u.norm() < SMALL {
        let mut acc = C64::new(0.0, 0.0);
        for k in (2..=SERIES_TERMS + 1).rev() {
            acc = acc * u + (k - 1) as f64 / (k * k) as f64;
        }
        acc
    } else {
        (-log1p(-u) - li2(u)) / (u * u)
    }
}

/// −ln(1−u)/u, continuous at u = 0.
pub fn neg_log1m_over(u: C64) -> C64 {
    if u.norm() < SMALL {
        let mut acc = C64::new(0.0, 0.0);
        for k in (1..=SERIES_TERMS).rev() {
            acc = acc * u + 1.0 / k as f64;
        }
        acc
    } else {
        -log1p(-u) / u
    }
}

/// Eight-point Gauss–Legendre rule on [−1, 1]: (nodes, weights).
pub const GL8: ([f64; 8], [f64; 8]) = (
    [
        -0.960_289_856_497_536_2,
        -0.796_666_477_413_626_7,
        -0.525_532_409_916_329,
        -0.183_434_642_495_649_8,
        0.183_434_642_495_649_8,
        0.525_532_409_916_329,
        0.796_666_477_413_626_7,
        0.960_289_856_497_536_2,
    ],
    [
        0.101_228_536_290_376_26,
        0.222_381_034_453_374_5,
        0.313_706_645_877_887_3,
        0.362_683_783_378_362,
        0.362_683_783_378_362,
        0.313_706_645_877_887_3,
        0.222_381_034_453_374_5,
        0.101_228_536_290_376_26,
    ],
);

/// Four-point Gauss–Legendre rule on [−1, 1].
pub const GL4: ([f64; 4], [f64; 4]) = (
    [
        -0.861_136_311_594_052_6,
        -0.339_981_043_584_856_3,
        0.339_981_043_584_856_3,
        0.861_136_311_594_052_6,
    ],
    [
        0.347_854_845_137_453_9,
        0.652_145_154_862_546_1,
        0.652_145_154_862_546_1,
        0.347_854_845_137_453_9,
    ],
);

/// Integrate a real function over [a, b] with the eight-point rule.
pub fn gauss8(a: f64, b: f64, f: impl Fn(f64) -> f64) -> f64 {
    let (x, w) = GL8;
    let h = 0.5 * (b - a);
    let m = 0.5 * (b + a);
    (0..8).map(|i| w[i] * f(m + h * x[i])).sum::<f64>() * h
}

/// ∫ f(x)·w(x) dx for a piecewise-linear f given on nodes, segment by segment.
pub fn gauss8_density(nodes: &[f64], values: &[f64], w: impl Fn(f64) -> f64) -> f64 {
    let mut acc = 0.0;
    for i in 0..nodes.len().saturating_sub(1) {
        let (x0, x1, f0, f1) = (nodes[i], nodes[i + 1], values[i], values[i + 1]);
        let s = (f1 - f0) / (x1 - x0);
        acc += gauss8(x0, x1, |x| (f0 + s * (x - x0)) * w(x));
    }
    acc
}
