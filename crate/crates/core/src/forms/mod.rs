//! Bilinear forms, loads, norms and dual norms on Lagrange spaces.
//!
//! Matrix assembly uses quadrature of exactness `2r + 2`; norms and other
//! measurements use `2r + 4`.

mod coefficients;
mod quadrature;
mod sparse;

use std::sync::Arc;

pub use coefficients::{CoefficientSet, PRESETS};
pub use quadrature::{gauss_legendre, gauss_legendre_unit, QuadratureRule};
pub use sparse::SparseMatrix;

use crate::fespace::{local_dim, random_fefunction, split_seed, FeFunction, LagrangeSpace, QuadPoint, ScalarField};
use crate::mesh::SubdomainSpec;
use crate::solver::solve_spd;
use crate::{Error, Result};

/// Quadrature used for matrix assembly on a degree-`r` space.
pub fn matrix_rule(r: usize) -> QuadratureRule {
    QuadratureRule::triangle(2 * r + 2)
}

/// Quadrature used for norms and measurements on a degree-`r` space.
pub fn norm_rule(r: usize) -> QuadratureRule {
    QuadratureRule::triangle(2 * r + 4)
}

fn assemble_with(
    space: &LagrangeSpace,
    rule: &QuadratureRule,
    mut kernel: impl FnMut(&QuadPoint, usize, usize) -> f64,
) -> SparseMatrix {
    let nloc = local_dim(space.degree());
    let ncells = space.mesh().num_cells();
    let mut trip = Vec::with_capacity(ncells * nloc * nloc);
    let mut local = vec![0.0; nloc * nloc];
    for cell in 0..ncells {
        local.iter_mut().for_each(|v| *v = 0.0);
        space.for_each_qp(cell, rule, |qp| {
            for i in 0..nloc {
                for j in 0..nloc {
                    local[i * nloc + j] += qp.weight * kernel(qp, i, j);
                }
            }
        });
        let dofs = space.cell_dofs(cell);
        for i in 0..nloc {
            for j in 0..nloc {
                trip.push((dofs[i], dofs[j], local[i * nloc + j]));
            }
        }
    }
    SparseMatrix::from_triplets(space.dim(), space.dim(), &trip).expect("cell DOFs are in range")
}

/// Entry `(i, j)` is `a0(phi_j, phi_i) = int sum_kl a_kl d_k phi_j d_l phi_i`.
pub fn assemble_a0(space: &LagrangeSpace, coeffs: &CoefficientSet) -> SparseMatrix {
    let rule = matrix_rule(space.degree());
    let mut a = [[0.0; 2]; 2];
    let mut last = [f64::NAN; 2];
    assemble_with(space, &rule, |qp, i, j| {
        if qp.x != last {
            a = coeffs.a(qp.x);
            last = qp.x;
        }
        let (gi, gj) = (qp.grads[i], qp.grads[j]);
        let mut s = 0.0;
        for k in 0..2 {
            for l in 0..2 {
                s += a[k][l] * gj[k] * gi[l];
            }
        }
        s
    })
}

/// Entry `(i, j)` is `N(phi_j, phi_i) = int (b . grad phi_j) phi_i + phi phi_j phi_i`.
pub fn assemble_n(space: &LagrangeSpace, coeffs: &CoefficientSet) -> SparseMatrix {
    let rule = matrix_rule(space.degree());
    let mut cache = ([0.0; 2], 0.0);
    let mut last = [f64::NAN; 2];
    assemble_with(space, &rule, |qp, i, j| {
        if qp.x != last {
            cache = (coeffs.b(qp.x), coeffs.phi(qp.x));
            last = qp.x;
        }
        let (b, phi) = cache;
        let gj = qp.grads[j];
        (b[0] * gj[0] + b[1] * gj[1]) * qp.values[i] + phi * qp.values[j] * qp.values[i]
    })
}

pub fn assemble_mass(space: &LagrangeSpace) -> SparseMatrix {
    let rule = matrix_rule(space.degree());
    assemble_with(space, &rule, |qp, i, j| qp.values[i] * qp.values[j])
}

/// Stiffness matrix of the Laplacian, `(grad phi_j, grad phi_i)`.
pub fn assemble_stiffness(space: &LagrangeSpace) -> SparseMatrix {
    let rule = matrix_rule(space.degree());
    assemble_with(space, &rule, |qp, i, j| qp.grads[i][0] * qp.grads[j][0] + qp.grads[i][1] * qp.grads[j][1])
}

/// Gram matrix of the full `H^1` inner product.
pub fn h1_gram(space: &LagrangeSpace) -> SparseMatrix {
    assemble_stiffness(space).add(&assemble_mass(space), 1.0, 1.0).expect("same pattern size")
}

/// Load vector `(f, phi_i)`.
pub fn assemble_load(space: &LagrangeSpace, f: &dyn ScalarField) -> Vec<f64> {
    let rule = norm_rule(space.degree());
    let mut load = vec![0.0; space.dim()];
    for cell in 0..space.mesh().num_cells() {
        space.for_each_qp(cell, &rule, |qp| {
            let fx = f.value(qp.x) * qp.weight;
            for (&d, v) in qp.dofs.iter().zip(&qp.values) {
                load[d] += fx * v;
            }
        });
    }
    load
}

/// `v^T (A0 + N) u = a(u, v)`.
pub fn apply_form(a0: &SparseMatrix, n: &SparseMatrix, u: &FeFunction, v: &FeFunction) -> Result<f64> {
    let dim = u.coefficients().len();
    if v.coefficients().len() != dim || a0.nrows() != dim || n.nrows() != dim || a0.ncols() != dim || n.ncols() != dim {
        return Err(Error::Dimension(format!(
            "u: {dim}, v: {}, A0: {}x{}, N: {}x{}",
            v.coefficients().len(),
            a0.nrows(),
            a0.ncols(),
            n.nrows(),
            n.ncols()
        )));
    }
    Ok(a0.bilinear(v.coefficients(), u.coefficients()) + n.bilinear(v.coefficients(), u.coefficients()))
}

/// Sums `f` times the physical weight over the quadrature points of `cells`.
pub fn integrate(
    space: &LagrangeSpace,
    cells: &[usize],
    rule: &QuadratureRule,
    mut f: impl FnMut(&QuadPoint) -> f64,
) -> f64 {
    let mut total = 0.0;
    for &cell in cells {
        let mut part = 0.0;
        space.for_each_qp(cell, rule, |qp| part += qp.weight * f(qp));
        total += part;
    }
    total
}

/// `L^2` norm and `H^1` seminorm of one function on one region.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Norms {
    pub l2: f64,
    pub h1_semi: f64,
}

impl Norms {
    pub fn h1(&self) -> f64 {
        self.l2.hypot(self.h1_semi)
    }
}

pub fn norms(f: &FeFunction, region: &SubdomainSpec) -> Result<Norms> {
    let space = f.space();
    let cells = space.mesh().cells_in(region)?;
    let rule = norm_rule(space.degree());
    let c = f.coefficients();
    let (mut l2, mut semi) = (0.0, 0.0);
    for &cell in &cells {
        space.for_each_qp(cell, &rule, |qp| {
            let g = qp.grad(c);
            l2 += qp.weight * qp.eval(c).powi(2);
            semi += qp.weight * (g[0] * g[0] + g[1] * g[1]);
        });
    }
    Ok(Norms { l2: l2.sqrt(), h1_semi: semi.sqrt() })
}

pub fn norm_l2(f: &FeFunction, region: &SubdomainSpec) -> Result<f64> {
    Ok(norms(f, region)?.l2)
}

pub fn seminorm_h1(f: &FeFunction, region: &SubdomainSpec) -> Result<f64> {
    Ok(norms(f, region)?.h1_semi)
}

pub fn norm_h1(f: &FeFunction, region: &SubdomainSpec) -> Result<f64> {
    Ok(norms(f, region)?.h1())
}

/// Norms of `u - f` for a field `u` with analytic gradient.
pub fn error_norms(f: &FeFunction, u: &dyn ScalarField, region: &SubdomainSpec) -> Result<Norms> {
    let space = f.space();
    let cells = space.mesh().cells_in(region)?;
    let rule = norm_rule(space.degree());
    let c = f.coefficients();
    let (mut l2, mut semi) = (0.0, 0.0);
    let mut missing = false;
    for &cell in &cells {
        space.for_each_qp(cell, &rule, |qp| {
            let g = qp.grad(c);
            let gu = u.gradient(qp.x).unwrap_or_else(|| {
                missing = true;
                [0.0; 2]
            });
            l2 += qp.weight * (u.value(qp.x) - qp.eval(c)).powi(2);
            semi += qp.weight * ((gu[0] - g[0]).powi(2) + (gu[1] - g[1]).powi(2));
        });
    }
    if missing {
        return Err(Error::Data("error norms need a field with an analytic gradient".into()));
    }
    Ok(Norms { l2: l2.sqrt(), h1_semi: semi.sqrt() })
}

/// Discrete `H^{-1}(G)` norm of the functional with load vector `fload`:
/// the supremum of `f(phi) / ||phi||_1` over the span of
/// `interior_dofs(space, G)`, computed through the Riesz representative.
pub fn dual_norm_hm1(space: &LagrangeSpace, g: &SubdomainSpec, fload: &[f64]) -> Result<f64> {
    dual_norm_with_gram(space, &h1_gram(space), g, fload)
}

/// [`dual_norm_hm1`] with a precomputed [`h1_gram`].
pub fn dual_norm_with_gram(space: &LagrangeSpace, gram: &SparseMatrix, g: &SubdomainSpec, fload: &[f64]) -> Result<f64> {
    if fload.len() != space.dim() {
        return Err(Error::Dimension(format!("load of length {} for dimension {}", fload.len(), space.dim())));
    }
    let interior = space.interior_dofs(g)?;
    if interior.is_empty() {
        return Err(Error::EmptySpace(format!("no interior DOFs in {:?}", g.region)));
    }
    let rhs: Vec<f64> = interior.iter().map(|&d| fload[d]).collect();
    if rhs.iter().all(|v| *v == 0.0) {
        return Ok(0.0);
    }
    let h = gram.submatrix(&interior, &interior);
    let (z, _) = solve_spd(&h, &rhs, crate::solver::DEFAULT_TOL)?;
    let s: f64 = z.iter().zip(&rhs).map(|(a, b)| a * b).sum();
    Ok(s.max(0.0).sqrt())
}

/// Empirical constants of coercivity and continuity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FormConstants {
    /// `min a0(w, w) / ||w||_1^2`.
    pub c_coer: f64,
    /// `max |a0(u, v)| / (||u||_1 ||v||_1)`.
    pub c_cont: f64,
    /// `max |N(u, v)| / (||u||_0 ||v||_1)`.
    pub c_n: f64,
}

/// Samples random `w, u, v` in `S_h^0(Omega)` and measures the constants of
/// coercivity and continuity of the forms.
pub fn empirical_coercivity_continuity(
    space: &Arc<LagrangeSpace>,
    coeffs: &CoefficientSet,
    num_samples: usize,
    seed: u64,
) -> Result<FormConstants> {
    let support = space.free_dofs();
    if support.is_empty() {
        return Err(Error::EmptySpace("no DOFs off the boundary".into()));
    }
    let a0 = assemble_a0(space, coeffs);
    let n = assemble_n(space, coeffs);
    let mass = assemble_mass(space);
    let gram = h1_gram(space);
    let mut out = FormConstants { c_coer: f64::INFINITY, c_cont: 0.0, c_n: 0.0 };
    for k in 0..num_samples as u64 {
        let w = random_fefunction(space, split_seed(seed, 0, k), &support)?;
        let u = random_fefunction(space, split_seed(seed, 1, k), &support)?;
        let v = random_fefunction(space, split_seed(seed, 2, k), &support)?;
        let (wc, uc, vc) = (w.coefficients(), u.coefficients(), v.coefficients());
        let aww = a0.bilinear(wc, wc);
        if aww <= 0.0 {
            return Err(Error::Ellipticity(format!("a0(w, w) = {aww} for sample {k}")));
        }
        out.c_coer = out.c_coer.min(aww / gram.bilinear(wc, wc));
        let (u1, v1) = (gram.bilinear(uc, uc).sqrt(), gram.bilinear(vc, vc).sqrt());
        let u0 = mass.bilinear(uc, uc).sqrt();
        out.c_cont = out.c_cont.max(a0.bilinear(vc, uc).abs() / (u1 * v1));
        out.c_n = out.c_n.max(n.bilinear(vc, uc).abs() / (u0 * v1));
    }
    Ok(out)
}

/// `max ||v||_{1,G} h / ||v||_{0,G}` over random `v` in `S_h(G)`.
pub fn measure_inverse_estimate(space: &Arc<LagrangeSpace>, g: &SubdomainSpec, num_samples: usize, seed: u64) -> Result<f64> {
    let support = space.dofs_in(g)?;
    let h = space.mesh().mesh_size();
    let mut c = 0.0f64;
    for k in 0..num_samples as u64 {
        let v = random_fefunction(space, split_seed(seed, 3, k), &support)?;
        let nv = norms(&v, g)?;
        if nv.l2 > 0.0 {
            c = c.max(nv.h1() * h / nv.l2);
        }
    }
    Ok(c)
}
