use std::fmt;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::fespace::ScalarField;
use crate::mesh::Rect;
use crate::scaling::MultiIndex;
use crate::{Error, Point, Result};

type MatrixFn = Arc<dyn Fn(Point) -> [[f64; 2]; 2] + Send + Sync>;
type VectorFn = Arc<dyn Fn(Point) -> [f64; 2] + Send + Sync>;
type ScalarFn = Arc<dyn Fn(Point) -> f64 + Send + Sync>;

/// Operator data `a_ij`, `b_i`, `phi` of
/// `L u = -div(a grad u) + b . grad u + phi u`.
#[derive(Clone)]
pub struct CoefficientSet {
    name: String,
    a: MatrixFn,
    a_div: VectorFn,
    b: VectorFn,
    phi: ScalarFn,
    ellipticity_floor: f64,
}

impl fmt::Debug for CoefficientSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CoefficientSet")
            .field("name", &self.name)
            .field("ellipticity_floor", &self.ellipticity_floor)
            .finish()
    }
}

/// Names accepted by [`CoefficientSet::preset`].
pub const PRESETS: [&str; 2] = ["laplace", "variable"];

impl CoefficientSet {
    /// `a_div(x)[i]` must equal `sum_j d a_ij / d x_j`; it is only used to
    /// build manufactured right-hand sides.
    pub fn new(
        name: impl Into<String>,
        a: impl Fn(Point) -> [[f64; 2]; 2] + Send + Sync + 'static,
        a_div: impl Fn(Point) -> [f64; 2] + Send + Sync + 'static,
        b: impl Fn(Point) -> [f64; 2] + Send + Sync + 'static,
        phi: impl Fn(Point) -> f64 + Send + Sync + 'static,
        ellipticity_floor: f64,
    ) -> CoefficientSet {
        CoefficientSet {
            name: name.into(),
            a: Arc::new(a),
            a_div: Arc::new(a_div),
            b: Arc::new(b),
            phi: Arc::new(phi),
            ellipticity_floor,
        }
    }

    /// `a = I`, `b = 0`, `phi = 0`.
    pub fn laplace() -> CoefficientSet {
        CoefficientSet::new(
            "laplace",
            |_| [[1.0, 0.0], [0.0, 1.0]],
            |_| [0.0, 0.0],
            |_| [0.0, 0.0],
            |_| 0.0,
            1.0,
        )
    }

    /// `a = diag(1 + x^2/2, 1 + y^2/2)`, `b = (1, -1)/10`, `phi = x + y`.
    pub fn variable() -> CoefficientSet {
        CoefficientSet::new(
            "variable",
            |p| [[1.0 + 0.5 * p[0] * p[0], 0.0], [0.0, 1.0 + 0.5 * p[1] * p[1]]],
            |p| [p[0], p[1]],
            |_| [0.1, -0.1],
            |p| p[0] + p[1],
            1.0,
        )
    }

    pub fn preset(name: &str) -> Result<CoefficientSet> {
        match name {
            "laplace" => Ok(CoefficientSet::laplace()),
            "variable" => Ok(CoefficientSet::variable()),
            other => Err(Error::Parse { line: 0, msg: format!("unknown coefficient preset '{other}'") }),
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn ellipticity_floor(&self) -> f64 {
        self.ellipticity_floor
    }

    pub fn a(&self, p: Point) -> [[f64; 2]; 2] {
        (self.a)(p)
    }

    pub fn b(&self, p: Point) -> [f64; 2] {
        (self.b)(p)
    }

    pub fn phi(&self, p: Point) -> f64 {
        (self.phi)(p)
    }

    /// Checks symmetry, the ellipticity floor and `phi >= 0` at `samples`
    /// random points of `domain`.
    pub fn validate(&self, domain: &Rect, samples: usize, seed: u64) -> Result<()> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..samples {
            let p = [
                rng.random_range(domain.xmin..=domain.xmax),
                rng.random_range(domain.ymin..=domain.ymax),
            ];
            let a = self.a(p);
            let scale = a[0][0].abs().max(a[1][1].abs()).max(1.0);
            if (a[0][1] - a[1][0]).abs() > 1e-14 * scale {
                return Err(Error::Ellipticity(format!("a(x) not symmetric at {p:?}")));
            }
            let tr = a[0][0] + a[1][1];
            let disc = ((a[0][0] - a[1][1]).powi(2) + 4.0 * a[0][1] * a[1][0]).max(0.0).sqrt();
            let lmin = 0.5 * (tr - disc);
            if lmin < self.ellipticity_floor * (1.0 - 1e-14) {
                return Err(Error::Ellipticity(format!(
                    "smallest eigenvalue {lmin} below floor {} at {p:?}",
                    self.ellipticity_floor
                )));
            }
            if self.phi(p) < 0.0 {
                return Err(Error::Ellipticity(format!("phi < 0 at {p:?}")));
            }
        }
        Ok(())
    }

    /// `L u` at `p`, using analytic derivatives of `u` up to order two.
    pub fn apply_operator(&self, u: &dyn ScalarField, p: Point) -> Option<f64> {
        let d = |a0, a1| u.derivative(p, MultiIndex::new(a0, a1));
        let grad = [d(1, 0)?, d(0, 1)?];
        let hess = [[d(2, 0)?, d(1, 1)?], [d(1, 1)?, d(0, 2)?]];
        let a = self.a(p);
        let ad = (self.a_div)(p);
        let b = self.b(p);
        let mut val = -(ad[0] * grad[0] + ad[1] * grad[1]);
        for i in 0..2 {
            for j in 0..2 {
                val -= a[i][j] * hess[i][j];
            }
        }
        Some(val + b[0] * grad[0] + b[1] * grad[1] + self.phi(p) * d(0, 0)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fespace::Field;

    #[test]
    fn presets_validate() {
        for name in PRESETS {
            CoefficientSet::preset(name).unwrap().validate(&Rect::unit(), 1000, 3).unwrap();
        }
        assert!(CoefficientSet::preset("nope").is_err());
    }

    #[test]
    fn indefinite_coefficients_are_rejected() {
        let c = CoefficientSet::new("bad", |_| [[1.0, 2.0], [2.0, 1.0]], |_| [0.0; 2], |_| [0.0; 2], |_| 0.0, 0.5);
        assert!(matches!(c.validate(&Rect::unit(), 10, 0), Err(Error::Ellipticity(_))));
    }

    #[test]
    fn operator_of_sin_sin() {
        let u = Field::sin_sin();
        let p = [0.3, 0.6];
        let pi2 = std::f64::consts::PI.powi(2);
        let lap = CoefficientSet::laplace().apply_operator(&u, p).unwrap();
        assert!((lap - 2.0 * pi2 * u.value(p)).abs() < 1e-12);
    }
}
