//! Seeded sample generators for the inequality experiments.

use std::f64::consts::{FRAC_PI_2, PI};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::fespace::Field;
use crate::mesh::Rect;
use crate::scaling::MultiIndex;
use crate::Point;

/// Number of modes per axis in [`smooth_sample`].
pub const SMOOTH_MODES: usize = 3;

/// Highest power in [`harmonic_sample`].
pub const HARMONIC_DEGREE: usize = 3;

fn coefficients(seed: u64, n: usize) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| rng.random_range(-1.0..=1.0)).collect()
}

/// `sum_{k,l <= 3} c_kl sin(k pi xi_1) sin(l pi xi_2)` in the coordinates
/// `xi` of `region` mapped to the unit square, extended by zero.
pub fn smooth_sample(region: Rect, seed: u64) -> Field {
    let c = coefficients(seed, SMOOTH_MODES * SMOOTH_MODES);
    let f = move |p: Point, a: MultiIndex| {
        if !region.contains(p, 0.0) {
            return 0.0;
        }
        let (w, h) = (region.width(), region.height());
        let (s, t) = ((p[0] - region.xmin) / w, (p[1] - region.ymin) / h);
        let mut acc = 0.0;
        for k in 1..=SMOOTH_MODES {
            let kx = k as f64 * PI / w;
            let dx = kx.powi(a.0 as i32) * (k as f64 * PI * s + a.0 as f64 * FRAC_PI_2).sin();
            for l in 1..=SMOOTH_MODES {
                let ly = l as f64 * PI / h;
                let dy = ly.powi(a.1 as i32) * (l as f64 * PI * t + a.1 as f64 * FRAC_PI_2).sin();
                acc += c[(k - 1) * SMOOTH_MODES + l - 1] * dx * dy;
            }
        }
        acc
    };
    let g = f.clone();
    Field::new(move |p| g(p, MultiIndex(0, 0))).with_derivatives(f)
}

/// Random harmonic polynomial `sum_{k=1..3} Re((a_k - i b_k) z^k)` with
/// `z = ((x - cx) + i (y - cy)) / scale`.
pub fn harmonic_sample(center: Point, scale: f64, seed: u64) -> Field {
    let c = coefficients(seed, 2 * HARMONIC_DEGREE);
    let f = move |p: Point, a: MultiIndex| {
        let z = [(p[0] - center[0]) / scale, (p[1] - center[1]) / scale];
        let m = a.order();
        let mut acc = 0.0;
        for k in 1..=HARMONIC_DEGREE {
            if m > k {
                continue;
            }
            // D^alpha z^k = i^alpha_2 k!/(k-m)! z^(k-m) / scale^m
            let falling: f64 = (k - m + 1..=k).map(|j| j as f64).product();
            let mut zp = [1.0, 0.0];
            for _ in 0..k - m {
                zp = [zp[0] * z[0] - zp[1] * z[1], zp[0] * z[1] + zp[1] * z[0]];
            }
            for _ in 0..a.1 {
                zp = [-zp[1], zp[0]];
            }
            let s = falling / scale.powi(m as i32);
            acc += s * (c[2 * (k - 1)] * zp[0] + c[2 * k - 1] * zp[1]);
        }
        acc
    };
    let g = f.clone();
    Field::new(move |p| g(p, MultiIndex(0, 0))).with_derivatives(f)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fespace::ScalarField;
    use crate::scaling::finite_difference;

    #[test]
    fn smooth_sample_vanishes_outside_and_on_boundary() {
        let r = Rect::new(0.25, 0.25, 0.75, 0.75).unwrap();
        let u = smooth_sample(r, 3);
        assert_eq!(u.value([0.1, 0.5]), 0.0);
        assert!(u.value([0.25, 0.4]).abs() < 1e-15);
        assert!(u.value([0.4, 0.6]).abs() > 0.0);
        for a in MultiIndex::up_to(2) {
            let fd = finite_difference(|p| u.value(p), [0.4, 0.55], a, 1e-3).unwrap();
            let ex = u.derivative([0.4, 0.55], a).unwrap();
            assert!((fd - ex).abs() < 1e-5 * (1.0 + ex.abs()), "{a:?}");
        }
    }

    #[test]
    fn harmonic_sample_is_harmonic() {
        let u = harmonic_sample([0.5, 0.5], 0.25, 9);
        for p in [[0.4, 0.45], [0.6, 0.7], [0.1, 0.2]] {
            let lap = u.derivative(p, MultiIndex(2, 0)).unwrap() + u.derivative(p, MultiIndex(0, 2)).unwrap();
            assert!(lap.abs() < 1e-10);
            for a in MultiIndex::up_to(2) {
                let fd = finite_difference(|q| u.value(q), p, a, 1e-4).unwrap();
                let ex = u.derivative(p, a).unwrap();
                assert!((fd - ex).abs() < 1e-5 * (1.0 + ex.abs()), "{a:?}: {fd} {ex}");
            }
        }
        assert_eq!(u.value([0.5, 0.5]), 0.0);
    }

    #[test]
    fn samples_are_scale_similar() {
        let a = harmonic_sample([0.5, 0.5], 1.0, 4);
        let b = harmonic_sample([0.5, 0.5], 0.25, 4);
        assert!((a.value([0.8, 0.6]) - b.value([0.575, 0.525])).abs() < 1e-14);
    }
}
