use crate::fespace::ScalarField;
use crate::mesh::{Rect, StructuredMesh, SubdomainSpec};
use crate::scaling::MultiIndex;
use crate::{Error, Point, Result};

/// Continuity order of the transition profile.
pub const SMOOTHNESS: usize = 2;

/// Max of `s'(t)` for the quintic smoothstep.
const PROFILE_SLOPE: f64 = 15.0 / 8.0;

/// Tensor-product cutoff: `1` on `plateau`, `0` outside `support`, and a
/// quintic smoothstep `6t^5 - 15t^4 + 10t^3` across each gap.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CutoffFunction {
    plateau: Rect,
    support: Rect,
    derivative_bound: f64,
}

/// Cutoff with the given plateau and support; every side needs a positive gap.
pub fn build_cutoff(plateau: Rect, support: Rect) -> Result<CutoffFunction> {
    let gaps = [
        plateau.xmin - support.xmin,
        support.xmax - plateau.xmax,
        plateau.ymin - support.ymin,
        support.ymax - plateau.ymax,
    ];
    let min_gap = gaps.iter().copied().fold(f64::INFINITY, f64::min);
    if !(min_gap > 0.0) {
        return Err(Error::Gap(format!("plateau {plateau:?} not strictly inside support {support:?}")));
    }
    Ok(CutoffFunction { plateau, support, derivative_bound: PROFILE_SLOPE / min_gap })
}

/// Cutoff whose geometry scales with `g`: support is `g` shrunk by 1/8 of
/// its width and height, plateau by 3/8.
pub fn scaled_cutoff(g: &Rect) -> Result<CutoffFunction> {
    let shrink = |f: f64| {
        let (dx, dy) = (f * g.width(), f * g.height());
        Rect::new(g.xmin + dx, g.ymin + dy, g.xmax - dx, g.ymax - dy)
    };
    build_cutoff(shrink(0.375)?, shrink(0.125)?)
}

/// Cutoff supported on `support` with a plateau one mesh layer inside.
pub fn cutoff_on_mesh(mesh: &StructuredMesh, support: &SubdomainSpec) -> Result<CutoffFunction> {
    let plateau = mesh.shrink_by_layers(support, 1)?;
    build_cutoff(plateau.region, support.region)
}

fn smoothstep(t: f64) -> [f64; 3] {
    let t2 = t * t;
    [
        t2 * t * (10.0 - 15.0 * t + 6.0 * t2),
        30.0 * t2 * (1.0 - t) * (1.0 - t),
        60.0 * t * (1.0 - t) * (1.0 - 2.0 * t),
    ]
}

/// Profile value and first two derivatives along one axis.
fn profile(x: f64, s0: f64, p0: f64, p1: f64, s1: f64) -> [f64; 3] {
    if x <= s0 || x >= s1 {
        [0.0; 3]
    } else if x < p0 {
        let g = p0 - s0;
        let [v, d1, d2] = smoothstep((x - s0) / g);
        [v, d1 / g, d2 / (g * g)]
    } else if x <= p1 {
        [1.0, 0.0, 0.0]
    } else {
        let g = s1 - p1;
        let [v, d1, d2] = smoothstep((s1 - x) / g);
        [v, -d1 / g, d2 / (g * g)]
    }
}

impl CutoffFunction {
    pub fn plateau(&self) -> Rect {
        self.plateau
    }

    pub fn support(&self) -> Rect {
        self.support
    }

    pub fn smoothness(&self) -> usize {
        SMOOTHNESS
    }

    /// Upper bound for `|grad omega|`.
    pub fn derivative_bound(&self) -> f64 {
        self.derivative_bound
    }

    fn axes(&self, p: Point) -> ([f64; 3], [f64; 3]) {
        let (s, q) = (&self.support, &self.plateau);
        (
            profile(p[0], s.xmin, q.xmin, q.xmax, s.xmax),
            profile(p[1], s.ymin, q.ymin, q.ymax, s.ymax),
        )
    }

    pub fn hessian(&self, p: Point) -> [[f64; 2]; 2] {
        let (x, y) = self.axes(p);
        [[x[2] * y[0], x[1] * y[1]], [x[1] * y[1], x[0] * y[2]]]
    }
}

impl ScalarField for CutoffFunction {
    fn value(&self, p: Point) -> f64 {
        let (x, y) = self.axes(p);
        x[0] * y[0]
    }

    fn derivative(&self, p: Point, alpha: MultiIndex) -> Option<f64> {
        if alpha.0 > 2 || alpha.1 > 2 {
            return None;
        }
        let (x, y) = self.axes(p);
        Some(x[alpha.0] * y[alpha.1])
    }
}
