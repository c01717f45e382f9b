use std::fmt;
use std::sync::Arc;

use crate::scaling::MultiIndex;
use crate::Point;

/// A function defined on the whole plane, optionally with analytic
/// partial derivatives.
pub trait ScalarField: Send + Sync {
    fn value(&self, p: Point) -> f64;

    /// `D^alpha u(p)` when the field knows it analytically.
    fn derivative(&self, p: Point, alpha: MultiIndex) -> Option<f64> {
        if alpha.order() == 0 {
            Some(self.value(p))
        } else {
            None
        }
    }

    fn gradient(&self, p: Point) -> Option<[f64; 2]> {
        Some([
            self.derivative(p, MultiIndex::new(1, 0))?,
            self.derivative(p, MultiIndex::new(0, 1))?,
        ])
    }
}

type ValueFn = Arc<dyn Fn(Point) -> f64 + Send + Sync>;
type DerivFn = Arc<dyn Fn(Point, MultiIndex) -> f64 + Send + Sync>;

/// Closure-backed [`ScalarField`]. Cheap to clone.
#[derive(Clone)]
pub struct Field {
    value: ValueFn,
    deriv: Option<DerivFn>,
}

impl fmt::Debug for Field {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Field").field("analytic_derivatives", &self.deriv.is_some()).finish()
    }
}

impl Field {
    pub fn new(value: impl Fn(Point) -> f64 + Send + Sync + 'static) -> Field {
        Field { value: Arc::new(value), deriv: None }
    }

    /// Attaches analytic derivatives; `deriv(p, alpha)` must return `D^alpha u(p)`.
    pub fn with_derivatives(mut self, deriv: impl Fn(Point, MultiIndex) -> f64 + Send + Sync + 'static) -> Field {
        self.deriv = Some(Arc::new(deriv));
        self
    }

    pub fn zero() -> Field {
        Field::constant(0.0)
    }

    pub fn constant(c: f64) -> Field {
        Field::new(move |_| c).with_derivatives(move |_, a| if a.order() == 0 { c } else { 0.0 })
    }

    /// `c0 + cx x + cy y`.
    pub fn affine(c0: f64, cx: f64, cy: f64) -> Field {
        Field::new(move |p| c0 + cx * p[0] + cy * p[1]).with_derivatives(move |p, a| match (a.0, a.1) {
            (0, 0) => c0 + cx * p[0] + cy * p[1],
            (1, 0) => cx,
            (0, 1) => cy,
            _ => 0.0,
        })
    }

    /// `amp * sin(kx x + px) * sin(ky y + py)` with derivatives of every order.
    pub fn trig(amp: f64, kx: f64, px: f64, ky: f64, py: f64) -> Field {
        use std::f64::consts::FRAC_PI_2;
        let f = move |p: Point, a: MultiIndex| {
            let dx = kx.powi(a.0 as i32) * (kx * p[0] + px + a.0 as f64 * FRAC_PI_2).sin();
            let dy = ky.powi(a.1 as i32) * (ky * p[1] + py + a.1 as f64 * FRAC_PI_2).sin();
            amp * dx * dy
        };
        Field::new(move |p| f(p, MultiIndex::new(0, 0))).with_derivatives(f)
    }

    /// `sin(pi x) sin(pi y)`.
    pub fn sin_sin() -> Field {
        use std::f64::consts::PI;
        Field::trig(1.0, PI, 0.0, PI, 0.0)
    }

    /// Harmonic field `exp(k (x - cx)) cos(k (y - cy))`.
    pub fn harmonic_exp(k: f64, center: Point) -> Field {
        use std::f64::consts::FRAC_PI_2;
        let f = move |p: Point, a: MultiIndex| {
            let ex = k.powi(a.0 as i32) * (k * (p[0] - center[0])).exp();
            let cy = k.powi(a.1 as i32) * (k * (p[1] - center[1]) + a.1 as f64 * FRAC_PI_2).cos();
            ex * cy
        };
        Field::new(move |p| f(p, MultiIndex::new(0, 0))).with_derivatives(f)
    }

    /// Pointwise sum. Derivatives are analytic only if every term has them.
    pub fn sum(terms: Vec<Field>) -> Field {
        let all_analytic = terms.iter().all(|t| t.deriv.is_some());
        let vt = terms.clone();
        let field = Field::new(move |p| vt.iter().map(|t| t.value(p)).sum());
        if all_analytic {
            field.with_derivatives(move |p, a| terms.iter().map(|t| (t.deriv.as_ref().unwrap())(p, a)).sum())
        } else {
            field
        }
    }

    /// `c * self`.
    pub fn scaled(&self, c: f64) -> Field {
        let v = self.value.clone();
        let field = Field::new(move |p| c * v(p));
        match &self.deriv {
            Some(d) => {
                let d = d.clone();
                field.with_derivatives(move |p, a| c * d(p, a))
            }
            None => field,
        }
    }
}

impl ScalarField for Field {
    fn value(&self, p: Point) -> f64 {
        (self.value)(p)
    }

    fn derivative(&self, p: Point, alpha: MultiIndex) -> Option<f64> {
        match &self.deriv {
            Some(d) => Some(d(p, alpha)),
            None if alpha.order() == 0 => Some(self.value(p)),
            None => None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trig_derivatives_match_hand_formulas() {
        use std::f64::consts::PI;
        let u = Field::sin_sin();
        let p = [0.3, 0.2];
        let dxy = u.derivative(p, MultiIndex::new(1, 1)).unwrap();
        assert!((dxy - PI * PI * (PI * 0.3).cos() * (PI * 0.2).cos()).abs() < 1e-13);
        let dxx = u.derivative(p, MultiIndex::new(2, 0)).unwrap();
        assert!((dxx + PI * PI * u.value(p)).abs() < 1e-13);
    }

    #[test]
    fn harmonic_exp_is_harmonic() {
        let u = Field::harmonic_exp(1.7, [0.5, 0.5]);
        for p in [[0.1, 0.9], [0.4, 0.3], [0.77, 0.12]] {
            let lap = u.derivative(p, MultiIndex::new(2, 0)).unwrap() + u.derivative(p, MultiIndex::new(0, 2)).unwrap();
            assert!(lap.abs() < 1e-12);
        }
    }

    #[test]
    fn sum_without_derivatives_has_none() {
        let s = Field::sum(vec![Field::new(|p| p[0]), Field::constant(1.0)]);
        assert_eq!(s.value([2.0, 0.0]), 3.0);
        assert!(s.gradient([0.0, 0.0]).is_none());
    }
}
