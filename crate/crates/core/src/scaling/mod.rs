//! The isotropic scale map `xi = (x - x0) / d`, derivative scaling, the
//! `epsilon` factor of the local estimate, cutoff functions and closed-form
//! right-hand sides.

mod cutoff;

pub use cutoff::{build_cutoff, cutoff_on_mesh, scaled_cutoff, CutoffFunction, SMOOTHNESS};

use crate::fespace::ScalarField;
use crate::{Error, Point, Result};

/// Multi-index `(alpha_1, alpha_2)` of a partial derivative.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct MultiIndex(pub usize, pub usize);

impl MultiIndex {
    pub fn new(a0: usize, a1: usize) -> MultiIndex {
        MultiIndex(a0, a1)
    }

    pub fn order(&self) -> usize {
        self.0 + self.1
    }

    /// All multi-indices with `|alpha| <= max_order`, by order.
    pub fn up_to(max_order: usize) -> Vec<MultiIndex> {
        (0..=max_order).flat_map(|k| (0..=k).rev().map(move |a| MultiIndex(a, k - a))).collect()
    }
}

/// `x -> xi = (x - x0) / d`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AffineScaleMap {
    x0: Point,
    d: f64,
}

impl AffineScaleMap {
    pub fn new(x0: Point, d: f64) -> Result<AffineScaleMap> {
        if !(d > 0.0 && d.is_finite()) {
            return Err(Error::Scale(format!("diameter must be positive, got {d}")));
        }
        Ok(AffineScaleMap { x0, d })
    }

    pub fn anchor(&self) -> Point {
        self.x0
    }

    pub fn diameter(&self) -> f64 {
        self.d
    }

    pub fn map_forward(&self, x: Point) -> Point {
        [(x[0] - self.x0[0]) / self.d, (x[1] - self.x0[1]) / self.d]
    }

    pub fn map_backward(&self, xi: Point) -> Point {
        [self.x0[0] + self.d * xi[0], self.x0[1] + self.d * xi[1]]
    }
}

/// Step of the finite-difference stencils, in mapped coordinates.
pub const FD_STEP: f64 = 1e-3;

// fourth-order central stencils
const D1: [(f64, f64); 4] = [(-2.0, 1.0 / 12.0), (-1.0, -8.0 / 12.0), (1.0, 8.0 / 12.0), (2.0, -1.0 / 12.0)];
const D2: [(f64, f64); 5] = [
    (-2.0, -1.0 / 12.0),
    (-1.0, 16.0 / 12.0),
    (0.0, -30.0 / 12.0),
    (1.0, 16.0 / 12.0),
    (2.0, -1.0 / 12.0),
];

/// `D^alpha f(p)` by fourth-order central differences with step `step`,
/// for `|alpha| <= 2`.
pub fn finite_difference(f: impl Fn(Point) -> f64, p: Point, alpha: MultiIndex, step: f64) -> Result<f64> {
    let stencil_1d = |k: usize| -> Vec<(f64, f64)> {
        match k {
            0 => vec![(0.0, 1.0)],
            1 => D1.to_vec(),
            _ => D2.to_vec(),
        }
    };
    if alpha.0 > 2 || alpha.1 > 2 || alpha.order() > 2 {
        return Err(Error::Scale(format!("derivative order {} above 2", alpha.order())));
    }
    let (sx, sy) = (stencil_1d(alpha.0), stencil_1d(alpha.1));
    let mut acc = 0.0;
    for &(ox, wx) in &sx {
        for &(oy, wy) in &sy {
            acc += wx * wy * f([p[0] + ox * step, p[1] + oy * step]);
        }
    }
    Ok(acc / step.powi(alpha.order() as i32))
}

/// Largest relative error of `D_xi^alpha u_hat(xi) = d^|alpha| D^alpha u(x)`
/// over `samples` (points in `x`), where `u_hat(xi) = u(x(xi))`.
///
/// The left side is always taken by finite differences in `xi`; the right
/// side uses analytic derivatives of `u` when available.
pub fn verify_derivative_scaling(
    u: &dyn ScalarField,
    map: &AffineScaleMap,
    alpha: MultiIndex,
    samples: &[Point],
) -> Result<f64> {
    let d = map.diameter();
    let scale = d.powi(alpha.order() as i32);
    let mut worst = 0.0f64;
    for &x in samples {
        let xi = map.map_forward(x);
        let lhs = if alpha.order() == 0 {
            u.value(map.map_backward(xi))
        } else {
            finite_difference(|e| u.value(map.map_backward(e)), xi, alpha, FD_STEP)?
        };
        let du = match u.derivative(x, alpha) {
            Some(v) => v,
            None => finite_difference(|p| u.value(p), x, alpha, FD_STEP * d)?,
        };
        let rhs = scale * du;
        worst = worst.max((lhs - rhs).abs() / (rhs.abs() + 1e-14));
    }
    Ok(worst)
}

/// Inputs of the `epsilon` factor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpsilonParams {
    pub d: f64,
    pub h: f64,
    pub r: usize,
}

/// `epsilon = (d^-2 (h/d)^(2r) + h/d)^(1/2)`.
pub fn epsilon(params: EpsilonParams) -> Result<f64> {
    let EpsilonParams { d, h, r } = params;
    if !(d > 0.0 && h > 0.0 && d.is_finite() && h.is_finite()) {
        return Err(Error::Scale(format!("need h > 0 and d > 0, got h = {h}, d = {d}")));
    }
    if h > d {
        return Err(Error::ScaleOrdering { h, d });
    }
    let q = h / d;
    Ok((q.powi(2 * r as i32) / (d * d) + q).sqrt())
}

/// `C d^-1 (h/d)^r |w|_0 + C (h/d) |w|_1`.
pub fn rhs_bound_superapprox(d: f64, h: f64, r: usize, norm0_w: f64, norm1_w: f64, c: f64) -> f64 {
    let q = h / d;
    c * q.powi(r as i32) / d * norm0_w + c * q * norm1_w
}

/// Exponent convention for the `epsilon^j` sum of the local estimate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EpsilonPowers {
    /// `sum_j epsilon^j`
    Integer,
    /// `sum_j epsilon^(j/2)`
    Half,
}

/// The two terms of the local estimate with unit constant:
/// `[eps^((p+1)/2) h^-1 |w|_0, sum_{j=0..p} eps^(j or j/2) (|f|_-1 + |w|_0)]`.
pub fn local_estimate_terms(eps: f64, p: usize, h: f64, norm0_w: f64, fdual: f64, powers: EpsilonPowers) -> [f64; 2] {
    let first = eps.powf((p as f64 + 1.0) / 2.0) / h * norm0_w;
    let sum: f64 = (0..=p)
        .map(|j| match powers {
            // powi(0) is 1 even for eps = 0
            EpsilonPowers::Integer => eps.powi(j as i32),
            EpsilonPowers::Half if j == 0 => 1.0,
            EpsilonPowers::Half => eps.powf(j as f64 / 2.0),
        })
        .sum();
    [first, sum * (fdual + norm0_w)]
}

/// `C (eps^((p+1)/2) h^-1 |w|_0 + sum_{j=0..p} eps^j (|f|_-1 + |w|_0))`.
pub fn rhs_bound_local_estimate(eps: f64, p: usize, h: f64, norm0_w: f64, fdual: f64, c: f64) -> f64 {
    let [a, b] = local_estimate_terms(eps, p, h, norm0_w, fdual, EpsilonPowers::Integer);
    c * (a + b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fespace::Field;

    #[test]
    fn map_examples() {
        let m = AffineScaleMap::new([0.0, 0.0], 2.0).unwrap();
        assert_eq!(m.map_forward([1.0, 1.0]), [0.5, 0.5]);
        let m = AffineScaleMap::new([0.3, 0.7], 0.37).unwrap();
        let x = [0.41, -0.2];
        let y = m.map_backward(m.map_forward(x));
        assert!((x[0] - y[0]).abs() < 1e-14 && (x[1] - y[1]).abs() < 1e-14);
        assert_eq!(m.map_forward([0.3, 0.7]), [0.0, 0.0]);
        assert!(matches!(AffineScaleMap::new([0.0; 2], 0.0), Err(Error::Scale(_))));
        assert!(matches!(AffineScaleMap::new([0.0; 2], -1.0), Err(Error::Scale(_))));
    }

    #[test]
    fn multi_indices() {
        let all = MultiIndex::up_to(2);
        assert_eq!(all.len(), 6);
        assert_eq!(all[0], MultiIndex(0, 0));
        assert!(all.iter().all(|a| a.order() <= 2));
    }

    fn samples() -> Vec<Point> {
        (0..5).flat_map(|i| (0..5).map(move |j| [0.1 + 0.06 * i as f64, 0.12 + 0.055 * j as f64])).collect()
    }

    #[test]
    fn derivative_scaling_examples() {
        let lin = Field::affine(0.3, 2.0, -1.0);
        let m = AffineScaleMap::new([0.5, 0.5], 0.5).unwrap();
        assert!(verify_derivative_scaling(&lin, &m, MultiIndex(1, 0), &samples()).unwrap() < 1e-12);
        let u = Field::sin_sin();
        assert!(verify_derivative_scaling(&u, &m, MultiIndex(1, 1), &samples()).unwrap() < 1e-6);
        assert!(verify_derivative_scaling(&u, &m, MultiIndex(0, 0), &samples()).unwrap() < 1e-14);
        assert!(verify_derivative_scaling(&u, &m, MultiIndex(3, 0), &samples()).is_err());
    }

    #[test]
    fn derivative_scaling_without_analytic_derivatives() {
        let u = Field::new(|p| (2.0 * p[0]).sin() * (1.0 + p[1] * p[1]));
        let m = AffineScaleMap::new([0.2, 0.1], 2.0).unwrap();
        for a in MultiIndex::up_to(2) {
            assert!(verify_derivative_scaling(&u, &m, a, &samples()).unwrap() < 1e-6, "{a:?}");
        }
    }

    #[test]
    fn epsilon_examples() {
        let e = epsilon(EpsilonParams { d: 1.0, h: 0.1, r: 1 }).unwrap();
        assert!((e - 0.11f64.sqrt()).abs() < 1e-15);
        for r in [1, 2, 3] {
            let e = epsilon(EpsilonParams { d: 0.25, h: 0.25, r }).unwrap();
            assert!((e - 17.0f64.sqrt()).abs() < 1e-12);
        }
        let mut last = f64::INFINITY;
        for d in [0.125, 0.25, 0.5, 1.0, 2.0] {
            let e = epsilon(EpsilonParams { d, h: 0.05, r: 1 }).unwrap();
            assert!(e < last);
            last = e;
        }
        assert!(matches!(
            epsilon(EpsilonParams { d: 0.1, h: 0.2, r: 1 }),
            Err(Error::ScaleOrdering { .. })
        ));
    }

    #[test]
    fn bound_examples() {
        assert_eq!(rhs_bound_superapprox(1.0, 0.1, 1, 0.0, 0.0, 1.0), 0.0);
        assert!((rhs_bound_superapprox(1.0, 0.1, 1, 1.0, 1.0, 1.0) - 0.2).abs() < 1e-15);
        let a = rhs_bound_superapprox(0.5, 0.05, 1, 1.0, 0.0, 1.0);
        let b = rhs_bound_superapprox(1.0, 0.05, 1, 1.0, 0.0, 1.0);
        assert!((a / b - 4.0).abs() < 1e-12);
        let a = rhs_bound_superapprox(0.5, 0.05, 1, 0.0, 1.0, 1.0);
        let b = rhs_bound_superapprox(1.0, 0.05, 1, 0.0, 1.0, 1.0);
        assert!((a / b - 2.0).abs() < 1e-12);

        assert_eq!(rhs_bound_local_estimate(0.0, 3, 0.1, 1.0, 2.0, 1.5), 1.5 * 3.0);
        assert!((rhs_bound_local_estimate(0.5, 1, 0.1, 1.0, 0.0, 1.0) - 6.5).abs() < 1e-12);
        let eps: f64 = 0.3;
        let limit = eps.sqrt() / 0.1 + 1.0 / (1.0 - eps);
        let mut last = 0.0;
        for p in 0..30 {
            let v = rhs_bound_local_estimate(eps, p, 0.1, 1.0, 0.0, 1.0);
            assert!(v <= limit + 1e-12);
            if p > 0 {
                assert!(v - local_estimate_terms(eps, p, 0.1, 1.0, 0.0, EpsilonPowers::Integer)[0] >= last - 1e-15);
            }
            last = v - local_estimate_terms(eps, p, 0.1, 1.0, 0.0, EpsilonPowers::Integer)[0];
        }
        let half = local_estimate_terms(0.25, 2, 0.1, 1.0, 0.0, EpsilonPowers::Half);
        assert!((half[1] - (1.0 + 0.5 + 0.25)).abs() < 1e-15);
        assert_eq!(local_estimate_terms(0.0, 2, 0.1, 1.0, 0.0, EpsilonPowers::Half)[1], 1.0);
    }
}
