//! Experiments that turn each inequality into measurements.
//!
//! Every experiment returns [`EstimateRecord`]s whose `ratio` is the
//! left-hand side over the sum of right-hand-side terms with unit constants.
//! Sweeps summarise records with [`fit_constant`] and [`loglog_fit`].

mod fit;
pub mod samples;

use std::sync::Arc;

pub use fit::{fit_constant, kendall_tau, loglog_fit, EstimateRecord, FitResult};
pub use samples::{harmonic_sample, smooth_sample};

use crate::fespace::{build_space, random_fefunction, split_seed, FeFunction, Field, LagrangeSpace, QuadPoint, ScalarField};
use crate::forms::{
    assemble_load, dual_norm_with_gram, error_norms, h1_gram, matrix_rule, norm_rule, norms, CoefficientSet,
    QuadratureRule, SparseMatrix,
};
use crate::mesh::{build_mesh, Rect, StructuredMesh, SubdomainSpec};
use crate::scaling::{epsilon, local_estimate_terms, CutoffFunction, EpsilonParams, EpsilonPowers};
use crate::solver::{GalerkinProblem, Load, DEFAULT_TOL};
use crate::{Error, Point, Result};

pub const SUPERAPPROX: &str = "superapprox";
pub const TECHNIQUE: &str = "technique";
pub const LOCAL_ESTIMATE: &str = "local-estimate";
pub const CONVERGENCE: &str = "convergence";
pub const INVERSE: &str = "inverse";

fn cutoff_terms(omega: &CutoffFunction, x: Point) -> (f64, [f64; 2]) {
    (omega.value(x), omega.gradient(x).expect("cutoff has analytic derivatives"))
}

/// Sums `f(qp, omega, grad omega)` times the quadrature weight over `cells`.
fn integrate_with_cutoff(
    space: &LagrangeSpace,
    cells: &[usize],
    rule: &QuadratureRule,
    omega: &CutoffFunction,
    mut f: impl FnMut(&QuadPoint, f64, [f64; 2]) -> f64,
) -> f64 {
    let mut total = 0.0;
    for &cell in cells {
        space.for_each_qp(cell, rule, |qp| {
            let (om, gom) = cutoff_terms(omega, qp.x);
            total += qp.weight * f(qp, om, gom);
        });
    }
    total
}

fn check_support(region: &Rect, omega: &CutoffFunction, what: &str) -> Result<()> {
    if !region.strictly_contains_rect(&omega.support()) {
        return Err(Error::Support(format!(
            "cutoff support {:?} not compactly inside {what} {region:?}",
            omega.support()
        )));
    }
    Ok(())
}

/// The interpolant of `omega w` with every DOF outside `S_h^0(supp omega)`
/// set to zero, together with the admissible DOFs.
pub fn superapprox_interpolant(omega: &CutoffFunction, w: &FeFunction) -> Result<(FeFunction, Vec<usize>)> {
    let space = w.space();
    let inner = space.mesh().inner_region(&omega.support())?;
    let admissible = space.interior_dofs(&inner)?;
    let mut coeffs = vec![0.0; space.dim()];
    for &d in &admissible {
        coeffs[d] = omega.value(space.dof_coords()[d]) * w.coefficients()[d];
    }
    Ok((FeFunction::new(space.clone(), coeffs)?, admissible))
}

/// Measures `||omega w - v||_{1,G}` against
/// `d^-1 (h/d)^r ||w||_{0,G} + (h/d) ||w||_{1,G}` with `d = diam G`.
pub fn superapprox_experiment(
    space: &Arc<LagrangeSpace>,
    g: &SubdomainSpec,
    omega: &CutoffFunction,
    w: &FeFunction,
) -> Result<EstimateRecord> {
    check_support(&g.region, omega, "G")?;
    let in_g = space.dofs_in(g)?;
    let mut inside = vec![false; space.dim()];
    in_g.iter().for_each(|&d| inside[d] = true);
    if let Some(d) = (0..space.dim()).find(|&d| !inside[d] && w.coefficients()[d] != 0.0) {
        return Err(Error::Support(format!("w has a nonzero DOF {d} outside G")));
    }
    let (v, _) = superapprox_interpolant(omega, w)?;
    let mut in_g0 = vec![false; space.dim()];
    space.interior_dofs(g)?.iter().for_each(|&d| in_g0[d] = true);
    let outside = v.coefficients().iter().enumerate().filter(|(d, c)| !in_g0[*d] && **c != 0.0).count();

    let r = space.degree();
    let cells = space.mesh().cells_in(g)?;
    let (wc, vc) = (w.coefficients(), v.coefficients());
    let error_sq = |rule: &QuadratureRule, cells: &[usize]| {
        integrate_with_cutoff(space, cells, rule, omega, |qp, om, gom| {
            let (wv, gw, gv) = (qp.eval(wc), qp.grad(wc), qp.grad(vc));
            let e = om * wv - qp.eval(vc);
            let ex = gom[0] * wv + om * gw[0] - gv[0];
            let ey = gom[1] * wv + om * gw[1] - gv[1];
            e * e + ex * ex + ey * ey
        })
    };
    let lhs = error_sq(&norm_rule(r), &cells).sqrt();
    // quadrature check on a 5% subsample against a rule two degrees higher
    let sub: Vec<usize> = cells.iter().copied().step_by(20).collect();
    let (lo, hi) = (error_sq(&norm_rule(r), &sub), error_sq(&QuadratureRule::triangle(2 * r + 6), &sub));
    let quad_check = if hi > 0.0 { (lo - hi).abs() / hi } else { 0.0 };

    let h = space.mesh().mesh_size();
    let d = g.region.diameter();
    let nw = norms(w, g)?;
    let q = h / d;
    let rec = EstimateRecord::new(
        SUPERAPPROX,
        lhs,
        vec![
            ("l2_term".into(), q.powi(r as i32) / d * nw.l2),
            ("h1_term".into(), q * nw.h1()),
        ],
    )?;
    Ok(rec
        .with_params("", h, d, r, 0)
        .diag("dofs_outside_g0", outside as f64)
        .diag("quad_rel_change", quad_check))
}

/// Measures `a0(omega w, omega w) - 2 a(w, omega^2 w)` against
/// `||w||^2_{0, Omega0}`. The left side is signed.
pub fn technique_lemma_experiment(
    space: &Arc<LagrangeSpace>,
    coeffs: &CoefficientSet,
    omega: &CutoffFunction,
    w: &FeFunction,
    omega0: &SubdomainSpec,
) -> Result<EstimateRecord> {
    check_support(&omega0.region, omega, "Omega0")?;
    let cells = space.mesh().cells_in(omega0)?;
    let rule = norm_rule(space.degree());
    let wc = w.coefficients();
    let (mut a0_term, mut a_term) = (0.0, 0.0);
    for &cell in &cells {
        space.for_each_qp(cell, &rule, |qp| {
            let (om, gom) = cutoff_terms(omega, qp.x);
            let (wv, gw) = (qp.eval(wc), qp.grad(wc));
            let (a, b, phi) = (coeffs.a(qp.x), coeffs.b(qp.x), coeffs.phi(qp.x));
            let g1 = [gom[0] * wv + om * gw[0], gom[1] * wv + om * gw[1]];
            let g2 = [2.0 * om * gom[0] * wv + om * om * gw[0], 2.0 * om * gom[1] * wv + om * om * gw[1]];
            let mut s0 = 0.0;
            let mut s1 = 0.0;
            for i in 0..2 {
                for j in 0..2 {
                    s0 += a[i][j] * g1[j] * g1[i];
                    s1 += a[i][j] * gw[j] * g2[i];
                }
            }
            s1 += (b[0] * gw[0] + b[1] * gw[1]) * om * om * wv + phi * om * om * wv * wv;
            a0_term += qp.weight * s0;
            a_term += qp.weight * s1;
        });
    }
    let w0 = norms(w, omega0)?.l2;
    let lhs = a0_term - 2.0 * a_term;
    let rec = EstimateRecord::new(TECHNIQUE, lhs, vec![("w0_sq".into(), w0 * w0)])?;
    Ok(rec
        .with_params(coeffs.name(), space.mesh().mesh_size(), omega0.region.diameter(), space.degree(), 0)
        .diag("a0_term", a0_term)
        .diag("a_term", a_term))
}

/// Terms of the integration-by-parts identity
/// `a0(wu, wu) = a(u, w^2 u) - N(wu, wu) + T1 + T2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IdentityBreakdown {
    pub level: usize,
    pub a0_term: f64,
    pub a_term: f64,
    pub n_term: f64,
    pub t1: f64,
    pub t2: f64,
    pub defect: f64,
}

/// Evaluates every term of the identity by quadrature of the analytic
/// integrands. The support of `omega` is split at the plateau lines into
/// pieces on which `omega` is smooth; each piece is cut into `2^level`
/// squares per side, two triangles each, with a rule exact to `quad_degree`.
pub fn identity_check(
    u: &dyn ScalarField,
    omega: &CutoffFunction,
    coeffs: &CoefficientSet,
    quad_degree: usize,
    level: usize,
) -> Result<IdentityBreakdown> {
    let (s, p) = (omega.support(), omega.plateau());
    let xs = [s.xmin, p.xmin, p.xmax, s.xmax];
    let ys = [s.ymin, p.ymin, p.ymax, s.ymax];
    let rule = QuadratureRule::triangle(quad_degree);
    let m = 1usize << level;
    let mut t = [0.0f64; 5];
    for bx in 0..3 {
        for by in 0..3 {
            let (hx, hy) = ((xs[bx + 1] - xs[bx]) / m as f64, (ys[by + 1] - ys[by]) / m as f64);
            for i in 0..m {
                for j in 0..m {
                    let o = [xs[bx] + i as f64 * hx, ys[by] + j as f64 * hy];
                    for tri in [[[0.0, 0.0], [hx, 0.0], [hx, hy]], [[0.0, 0.0], [hx, hy], [0.0, hy]]] {
                        let jac = 0.5 * hx * hy;
                        for (q, wq) in rule.points().iter().zip(rule.weights()) {
                            let x = [
                                o[0] + q[0] * tri[1][0] + q[1] * tri[2][0],
                                o[1] + q[0] * tri[1][1] + q[1] * tri[2][1],
                            ];
                            let vals = identity_integrands(u, omega, coeffs, x)?;
                            for k in 0..5 {
                                t[k] += 2.0 * jac * wq * vals[k];
                            }
                        }
                    }
                }
            }
        }
    }
    let [a0_term, a_term, n_term, t1, t2] = t;
    Ok(IdentityBreakdown { level, a0_term, a_term, n_term, t1, t2, defect: a0_term - (a_term - n_term + t1 + t2) })
}

fn identity_integrands(u: &dyn ScalarField, omega: &CutoffFunction, c: &CoefficientSet, x: Point) -> Result<[f64; 5]> {
    let uv = u.value(x);
    let gu = u
        .gradient(x)
        .ok_or_else(|| Error::Data("identity check needs analytic first derivatives".into()))?;
    let (om, gom) = cutoff_terms(omega, x);
    let (a, b, phi) = (c.a(x), c.b(x), c.phi(x));
    let g_wu = [gom[0] * uv + om * gu[0], gom[1] * uv + om * gu[1]];
    let g_w2u = [2.0 * om * gom[0] * uv + om * om * gu[0], 2.0 * om * gom[1] * uv + om * om * gu[1]];
    let (mut a0, mut aa, mut t2) = (0.0, 0.0, 0.0);
    for i in 0..2 {
        for j in 0..2 {
            a0 += a[i][j] * g_wu[j] * g_wu[i];
            aa += a[i][j] * gu[j] * g_w2u[i];
            t2 += a[i][j] * ((gom[i] * g_wu[j] - gom[j] * g_wu[i]) * uv + gom[i] * gom[j] * uv * uv);
        }
    }
    let bgu = b[0] * gu[0] + b[1] * gu[1];
    let a_term = aa + bgu * om * om * uv + phi * om * om * uv * uv;
    let n_term = (b[0] * g_wu[0] + b[1] * g_wu[1]) * om * uv + phi * om * om * uv * uv;
    let t1 = (b[0] * gom[0] + b[1] * gom[1]) * om * uv * uv;
    Ok([a0, a_term, n_term, t1, t2])
}

/// [`identity_check`] at levels `0..levels`.
pub fn identity_levels(
    u: &dyn ScalarField,
    omega: &CutoffFunction,
    coeffs: &CoefficientSet,
    quad_degree: usize,
    levels: usize,
) -> Result<Vec<IdentityBreakdown>> {
    (0..levels).map(|l| identity_check(u, omega, coeffs, quad_degree, l)).collect()
}

/// Assembled operators shared by every local solve on one space.
#[derive(Debug, Clone)]
pub struct LocalContext {
    coeffs: CoefficientSet,
    problem: GalerkinProblem,
    gram: SparseMatrix,
}

impl LocalContext {
    pub fn new(space: &Arc<LagrangeSpace>, coeffs: &CoefficientSet) -> LocalContext {
        LocalContext { coeffs: coeffs.clone(), problem: GalerkinProblem::new(space, coeffs), gram: h1_gram(space) }
    }

    pub fn space(&self) -> &Arc<LagrangeSpace> {
        self.problem.space()
    }

    pub fn problem(&self) -> &GalerkinProblem {
        &self.problem
    }

    /// Solves on `omega0` with load `f` and boundary data `exterior`, then
    /// measures `||w||_{1,D}` against the two terms of the local estimate.
    pub fn local_estimate(
        &self,
        f: &dyn ScalarField,
        exterior: Option<&dyn ScalarField>,
        d_sub: &SubdomainSpec,
        omega0: &SubdomainSpec,
    ) -> Result<EstimateRecord> {
        let space = self.space();
        let mesh = space.mesh();
        let p = match mesh.layer_count(d_sub, omega0) {
            Ok(p) => p,
            Err(Error::Containment(msg)) => return Err(Error::Layer(msg)),
            Err(e) => return Err(e),
        };
        let load = assemble_load(space, f);
        let (w, report) = self.problem.solve(Load::Vector(&load), omega0, exterior, DEFAULT_TOL)?;
        let lhs = norms(&w, d_sub)?.h1();
        let w0 = norms(&w, omega0)?.l2;
        let fdual = dual_norm_with_gram(space, &self.gram, omega0, &load)?;
        let h = mesh.mesh_size();
        let d = omega0.region.diameter();
        let r = space.degree();
        let eps = epsilon(EpsilonParams { d, h, r })?;
        let [inverse, data] = local_estimate_terms(eps, p, h, w0, fdual, EpsilonPowers::Integer);
        let [_, data_half] = local_estimate_terms(eps, p, h, w0, fdual, EpsilonPowers::Half);
        let naive = if lhs == 0.0 { 0.0 } else { lhs / (w0 + fdual) };
        let half = if lhs == 0.0 { 0.0 } else { lhs / (inverse + data_half) };
        let rec = EstimateRecord::new(
            LOCAL_ESTIMATE,
            lhs,
            vec![("inverse_term".into(), inverse), ("data_term".into(), data)],
        )?;
        Ok(rec
            .with_params(self.coeffs.name(), h, d, r, p)
            .diag("epsilon", eps)
            .diag("w0", w0)
            .diag("fdual", fdual)
            .diag("naive_ratio", naive)
            .diag("data_term_half", data_half)
            .diag("ratio_half", half)
            .diag("solver_residual", report.residual))
    }
}

/// One-shot local estimate on a fresh space of degree `r`.
pub fn local_estimate_experiment(
    mesh: Arc<StructuredMesh>,
    coeffs: &CoefficientSet,
    f: &dyn ScalarField,
    d_sub: &SubdomainSpec,
    omega0: &SubdomainSpec,
    r: usize,
) -> Result<EstimateRecord> {
    let space = build_space(mesh, r)?;
    LocalContext::new(&space, coeffs).local_estimate(f, None, d_sub, omega0)
}

/// Data of the local problem for one seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LocalData {
    /// `f = 0` with a random harmonic polynomial, scaled to `Omega0`, as
    /// boundary data.
    Harmonic,
    /// Random smooth `f` supported in `Omega0` with zero boundary data.
    Source,
}

impl LocalData {
    pub fn name(&self) -> &'static str {
        match self {
            LocalData::Harmonic => "harmonic",
            LocalData::Source => "source",
        }
    }

    pub fn parse(s: &str) -> Option<LocalData> {
        match s {
            "harmonic" => Some(LocalData::Harmonic),
            "source" => Some(LocalData::Source),
            _ => None,
        }
    }

    /// `(f, exterior)` for the given region and sample seed.
    pub fn fields(&self, omega0: &Rect, seed: u64) -> (Field, Option<Field>) {
        match self {
            LocalData::Harmonic => (Field::zero(), Some(harmonic_sample(omega0.center(), omega0.width(), seed))),
            LocalData::Source => (smooth_sample(*omega0, seed), None),
        }
    }
}

/// Naive constants `max ||w||_{1,D} / (||w||_{0,Omega0} + ||f||_{-1,Omega0})`
/// per diameter, with log-log fits against `d`.
#[derive(Debug, Clone, PartialEq)]
pub struct NaiveSweep {
    pub constants: Vec<(f64, f64)>,
    /// Regression of every sample's naive ratio on `d`; `c_emp` is the
    /// largest constant.
    pub fit: FitResult,
    /// Slope and CI half-width of the per-diameter constants alone.
    pub constant_slope: (f64, f64),
    /// Whether the constant strictly increases as `d` decreases.
    pub monotone: bool,
}

/// Fits the naive ratios of `local-estimate` records against `d`.
pub fn naive_fit(records: &[EstimateRecord]) -> Result<NaiveSweep> {
    let mut ds: Vec<f64> = records.iter().map(|r| r.d).collect();
    ds.sort_by(f64::total_cmp);
    ds.dedup();
    if ds.len() < 3 {
        return Err(Error::Samples(format!("{} distinct diameters, need 3", ds.len())));
    }
    let ratios: Vec<f64> = records.iter().map(|r| r.diagnostic("naive_ratio").unwrap_or(f64::NAN)).collect();
    let mut constants = Vec::new();
    for &d in &ds {
        let c = records
            .iter()
            .zip(&ratios)
            .filter(|(r, _)| r.d == d)
            .map(|(_, v)| *v)
            .fold(f64::NEG_INFINITY, f64::max);
        if !c.is_finite() {
            return Err(Error::Data(format!("naive constant at d = {d} is {c}")));
        }
        constants.push((d, c));
    }
    let xs: Vec<f64> = constants.iter().map(|c| c.0).collect();
    let ys: Vec<f64> = constants.iter().map(|c| c.1).collect();
    let (cs, cci, _) = loglog_fit(&xs, &ys)?;
    let all_d: Vec<f64> = records.iter().map(|r| r.d).collect();
    let (slope, ci, _) = loglog_fit(&all_d, &ratios)?;
    let monotone = constants.windows(2).all(|w| w[0].1 > w[1].1);
    let fit = FitResult {
        c_emp: ys.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        slope: Some(slope),
        slope_ci: Some(ci),
        samples: records.len(),
    };
    Ok(NaiveSweep { constants, fit, constant_slope: (cs, cci), monotone })
}

/// Runs the local estimate on `n x n` meshes of the unit square for
/// centred squares of side `sides`, `D` being `p` layers inside, and fits
/// the naive constant against the diameter.
#[allow(clippy::too_many_arguments)]
pub fn naive_constant_sweep(
    n: usize,
    r: usize,
    coeffs: &CoefficientSet,
    data: LocalData,
    sides: &[f64],
    p: usize,
    seeds: usize,
    base_seed: u64,
) -> Result<(Vec<EstimateRecord>, NaiveSweep)> {
    let mesh = Arc::new(build_mesh(Rect::unit(), n)?);
    let space = build_space(mesh.clone(), r)?;
    let ctx = LocalContext::new(&space, coeffs);
    let mut records = Vec::new();
    for &side in sides {
        let omega0 = SubdomainSpec::new(Rect::centered_square([0.5, 0.5], side)?);
        let d_sub = mesh.shrink_by_layers(&omega0, p)?;
        for k in 0..seeds as u64 {
            let (f, ext) = data.fields(&omega0.region, split_seed(base_seed, STREAM_LOCAL, k));
            let rec = ctx.local_estimate(&f, ext.as_ref().map(|e| e as &dyn ScalarField), &d_sub, &omega0)?;
            records.push(rec.with_seed(k));
        }
    }
    let sweep = naive_fit(&records)?;
    Ok((records, sweep))
}

/// Random streams of the sample generators.
pub const STREAM_ROUGH: u64 = 1;
pub const STREAM_SMOOTH: u64 = 2;
pub const STREAM_LOCAL: u64 = 3;

/// Manufactured-solution convergence study.
#[derive(Debug, Clone, PartialEq)]
pub struct Convergence {
    pub records: Vec<EstimateRecord>,
    pub h1: FitResult,
    pub l2: FitResult,
}

/// Global Dirichlet solve with `f = L u` and boundary values of `u` on an
/// `n x n` mesh; `lhs` is the `H^1` error, the `L^2` error is a diagnostic.
pub fn convergence_point(coeffs: &CoefficientSet, u: &Field, r: usize, n: usize) -> Result<EstimateRecord> {
    let (uc, cc) = (u.clone(), coeffs.clone());
    let f = Field::new(move |p| cc.apply_operator(&uc, p).unwrap_or(f64::NAN));
    let whole = SubdomainSpec::new(Rect::unit());
    let space = build_space(Arc::new(build_mesh(Rect::unit(), n)?), r)?;
    let (w, _) = GalerkinProblem::new(&space, coeffs).solve(Load::Field(&f), &whole, Some(u), DEFAULT_TOL)?;
    let e = error_norms(&w, u, &whole)?;
    let h = space.mesh().mesh_size();
    let rec = EstimateRecord::new(CONVERGENCE, e.h1(), vec![("h_pow_r".into(), h.powi(r as i32))])?;
    Ok(rec.with_params(coeffs.name(), h, whole.region.diameter(), r, 0).diag("l2_error", e.l2))
}

/// [`convergence_point`] over `ns` with slopes of both errors against `h`.
pub fn convergence_experiment(coeffs: &CoefficientSet, u: &Field, r: usize, ns: &[usize]) -> Result<Convergence> {
    if ns.len() < 3 {
        return Err(Error::Samples(format!("{} mesh sizes, need 3", ns.len())));
    }
    let records = ns.iter().map(|&n| convergence_point(coeffs, u, r, n)).collect::<Result<Vec<_>>>()?;
    convergence_fit(records)
}

/// Slopes of the `H^1` and `L^2` errors of convergence records against `h`.
pub fn convergence_fit(records: Vec<EstimateRecord>) -> Result<Convergence> {
    let h1 = fit_constant(&records, |r| r.h)?;
    let xs: Vec<f64> = records.iter().map(|r| r.h).collect();
    let l2s: Vec<f64> = records.iter().map(|r| r.diagnostic("l2_error").unwrap_or(f64::NAN)).collect();
    let (slope, ci) = match loglog_fit(&xs, &l2s) {
        Ok((s, ci, _)) => (Some(s), Some(ci)),
        Err(Error::Data(_)) => (None, None),
        Err(e) => return Err(e),
    };
    let l2 = FitResult {
        c_emp: records
            .iter()
            .map(|r| r.diagnostic("l2_error").unwrap_or(f64::NAN) / r.h.powi(r.r as i32 + 1))
            .fold(f64::NEG_INFINITY, f64::max),
        slope,
        slope_ci: ci,
        samples: records.len(),
    };
    Ok(Convergence { records, h1, l2 })
}

/// `||v||_{1,G}` against `h^-1 ||v||_{0,G}` for `seeds` random `v` in `S_h(G)`.
pub fn inverse_experiment(space: &Arc<LagrangeSpace>, g: &SubdomainSpec, seeds: usize, base_seed: u64) -> Result<Vec<EstimateRecord>> {
    let support = space.dofs_in(g)?;
    let h = space.mesh().mesh_size();
    (0..seeds as u64)
        .map(|k| {
            let v = random_fefunction(space, split_seed(base_seed, STREAM_ROUGH, k), &support)?;
            let nv = norms(&v, g)?;
            let rec = EstimateRecord::new(INVERSE, nv.h1(), vec![("inverse_l2".into(), nv.l2 / h)])?;
            Ok(rec.with_params("", h, g.region.diameter(), space.degree(), 0).with_seed(k))
        })
        .collect()
}

/// Sample `k` of the inequality experiments on `region`: even `k` gives
/// i.i.d. nodal values on `support`, odd `k` the interpolant of a smooth
/// random field on `region` restricted to `support`.
pub fn mixed_sample(space: &Arc<LagrangeSpace>, region: &Rect, support: &[usize], base_seed: u64, k: u64) -> Result<FeFunction> {
    if k.is_multiple_of(2) {
        random_fefunction(space, split_seed(base_seed, STREAM_ROUGH, k), support)
    } else {
        let field = smooth_sample(*region, split_seed(base_seed, STREAM_SMOOTH, k));
        let mut c = vec![0.0; space.dim()];
        for &d in support {
            c[d] = field.value(space.dof_coords()[d]);
        }
        if support.is_empty() {
            return Err(Error::EmptySupport);
        }
        FeFunction::new(space.clone(), c)
    }
}

/// Rule used for the matrix-free integrals, exposed for diagnostics.
pub fn assembly_rule(r: usize) -> QuadratureRule {
    matrix_rule(r)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scaling::{build_cutoff, scaled_cutoff};

    fn space(n: usize, r: usize) -> Arc<LagrangeSpace> {
        build_space(Arc::new(build_mesh(Rect::unit(), n).unwrap()), r).unwrap()
    }

    fn whole() -> SubdomainSpec {
        SubdomainSpec::new(Rect::unit())
    }

    #[test]
    fn superapprox_zero_and_plateau_cases() {
        let s = space(16, 1);
        let omega = scaled_cutoff(&Rect::unit()).unwrap();
        let rec = superapprox_experiment(&s, &whole(), &omega, &FeFunction::zero(s.clone())).unwrap();
        assert_eq!(rec.lhs, 0.0);
        assert!(rec.rhs_terms.iter().all(|(_, v)| *v == 0.0));

        let inner = SubdomainSpec::new(Rect::new(0.375, 0.375, 0.625, 0.625).unwrap());
        let w = random_fefunction(&s, 3, &s.interior_dofs(&inner).unwrap()).unwrap();
        let rec = superapprox_experiment(&s, &whole(), &omega, &w).unwrap();
        assert!(rec.lhs < 1e-13, "{}", rec.lhs);
    }

    #[test]
    fn superapprox_v_in_s0() {
        let s = space(16, 2);
        let g = SubdomainSpec::new(Rect::new(0.25, 0.25, 0.75, 0.75).unwrap());
        let omega = scaled_cutoff(&g.region).unwrap();
        let w = random_fefunction(&s, 5, &s.dofs_in(&g).unwrap()).unwrap();
        let rec = superapprox_experiment(&s, &g, &omega, &w).unwrap();
        assert_eq!(rec.diagnostic("dofs_outside_g0"), Some(0.0));
        assert!(rec.ratio > 0.0 && rec.ratio.is_finite());
        let bad = random_fefunction(&s, 5, &s.free_dofs()).unwrap();
        assert!(matches!(superapprox_experiment(&s, &g, &omega, &bad), Err(Error::Support(_))));
    }

    #[test]
    fn technique_identity_case() {
        let s = space(16, 1);
        let omega = build_cutoff(Rect::new(0.25, 0.25, 0.75, 0.75).unwrap(), Rect::new(0.125, 0.125, 0.875, 0.875).unwrap())
            .unwrap();
        let inner = SubdomainSpec::new(Rect::new(0.3125, 0.3125, 0.6875, 0.6875).unwrap());
        let w = random_fefunction(&s, 2, &s.interior_dofs(&inner).unwrap()).unwrap();
        let coeffs = CoefficientSet::variable();
        let rec = technique_lemma_experiment(&s, &coeffs, &omega, &w, &whole()).unwrap();
        let a = GalerkinProblem::new(&s, &coeffs);
        let aww = a.matrix().bilinear(w.coefficients(), w.coefficients());
        let a0 = crate::forms::assemble_a0(&s, &coeffs).bilinear(w.coefficients(), w.coefficients());
        assert!((rec.lhs - (a0 - 2.0 * aww)).abs() < 1e-10 * aww.abs());
        assert!(rec.lhs < 0.0);
        let zero = technique_lemma_experiment(&s, &coeffs, &omega, &FeFunction::zero(s.clone()), &whole()).unwrap();
        assert_eq!((zero.lhs, zero.ratio), (0.0, 0.0));
    }

    #[test]
    fn identity_examples() {
        let omega = scaled_cutoff(&Rect::unit()).unwrap();
        let one = Field::constant(1.0);
        let id = identity_check(&one, &omega, &CoefficientSet::laplace(), 10, 2).unwrap();
        assert_eq!(id.a_term, 0.0);
        assert!((id.a0_term - id.t2).abs() < 1e-12 && id.defect.abs() < 1e-8);
        assert_eq!(id.t1, 0.0);
        for c in [CoefficientSet::laplace(), CoefficientSet::variable()] {
            let levels = identity_levels(&Field::sin_sin(), &omega, &c, 10, 4).unwrap();
            assert!(levels.last().unwrap().defect.abs() < 1e-8);
        }
    }

    #[test]
    fn local_estimate_examples() {
        let mesh = Arc::new(build_mesh(Rect::unit(), 16).unwrap());
        let omega0 = whole();
        let d = mesh.shrink_by_layers(&omega0, 2).unwrap();
        let rec = local_estimate_experiment(mesh.clone(), &CoefficientSet::laplace(), &Field::zero(), &d, &omega0, 1).unwrap();
        assert_eq!(rec.lhs, 0.0);
        let f = Field::sin_sin().scaled(2.0 * std::f64::consts::PI.powi(2));
        let rec = local_estimate_experiment(mesh.clone(), &CoefficientSet::laplace(), &f, &d, &omega0, 1).unwrap();
        assert!(rec.ratio.is_finite() && rec.ratio > 0.0);
        assert_eq!(rec.p, 2);
        assert!(matches!(
            local_estimate_experiment(mesh, &CoefficientSet::laplace(), &f, &omega0, &omega0, 1),
            Err(Error::Layer(_))
        ));
    }

    #[test]
    fn convergence_of_zero_solution() {
        let c = convergence_experiment(&CoefficientSet::laplace(), &Field::zero(), 1, &[4, 8, 16]).unwrap();
        assert!(c.records.iter().all(|r| r.lhs == 0.0));
        assert!(convergence_experiment(&CoefficientSet::laplace(), &Field::zero(), 1, &[4, 8]).is_err());
    }

    #[test]
    fn naive_fit_needs_three_diameters() {
        let mk = |d: f64| {
            let mut r = EstimateRecord::new(LOCAL_ESTIMATE, 1.0, vec![("x".into(), 1.0)]).unwrap().diag("naive_ratio", 1.0 / d);
            r.d = d;
            r
        };
        assert!(matches!(naive_fit(&[mk(0.5), mk(0.5), mk(1.0)]), Err(Error::Samples(_))));
        let s = naive_fit(&[mk(0.25), mk(0.5), mk(1.0)]).unwrap();
        assert!((s.fit.slope.unwrap() + 1.0).abs() < 1e-12);
        assert!(s.monotone);
    }

    #[test]
    fn inverse_records() {
        let s = space(8, 1);
        let recs = inverse_experiment(&s, &whole(), 5, 1).unwrap();
        assert_eq!(recs.len(), 5);
        assert!(recs.iter().all(|r| r.ratio > 0.0));
    }
}
