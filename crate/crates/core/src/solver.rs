//! Linear solvers and local Galerkin solves.

use std::sync::Arc;

use crate::fespace::{interpolate, FeFunction, LagrangeSpace, ScalarField};
use crate::forms::{assemble_a0, assemble_load, assemble_n, CoefficientSet, SparseMatrix};
use crate::mesh::SubdomainSpec;
use crate::{Error, Result};

/// Default relative residual tolerance.
pub const DEFAULT_TOL: f64 = 1e-10;

/// Systems up to this dimension are solved by dense elimination.
pub const DENSE_LIMIT: usize = 2000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveMethod {
    Cg,
    DenseLu,
    BiCgStab,
}

impl SolveMethod {
    pub fn tag(&self) -> &'static str {
        match self {
            SolveMethod::Cg => "cg-jacobi",
            SolveMethod::DenseLu => "dense-lu",
            SolveMethod::BiCgStab => "bicgstab-jacobi",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveReport {
    pub iterations: usize,
    /// `|A x - b| / |b|`.
    pub residual: f64,
    pub method: SolveMethod,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn check_square(a: &SparseMatrix, rhs: &[f64]) -> Result<()> {
    if a.nrows() != a.ncols() || a.nrows() != rhs.len() {
        return Err(Error::Dimension(format!(
            "{}x{} system with right-hand side of length {}",
            a.nrows(),
            a.ncols(),
            rhs.len()
        )));
    }
    Ok(())
}

fn relative_residual(a: &SparseMatrix, x: &[f64], rhs: &[f64]) -> f64 {
    let ax = a.matvec(x);
    let r: f64 = ax.iter().zip(rhs).map(|(p, q)| (p - q) * (p - q)).sum::<f64>().sqrt();
    r / norm(rhs)
}

fn jacobi(a: &SparseMatrix) -> Result<Vec<f64>> {
    a.diagonal()
        .into_iter()
        .enumerate()
        .map(|(i, d)| {
            if d > 0.0 {
                Ok(1.0 / d)
            } else {
                Err(Error::Definiteness(format!("diagonal entry {i} is {d}")))
            }
        })
        .collect()
}

/// Conjugate gradients with Jacobi preconditioning.
pub fn solve_spd(a: &SparseMatrix, rhs: &[f64], tol: f64) -> Result<(Vec<f64>, SolveReport)> {
    check_square(a, rhs)?;
    let n = rhs.len();
    let bnorm = norm(rhs);
    if bnorm == 0.0 {
        return Ok((vec![0.0; n], SolveReport { iterations: 0, residual: 0.0, method: SolveMethod::Cg }));
    }
    let dinv = jacobi(a)?;
    let mut x = vec![0.0; n];
    let mut r = rhs.to_vec();
    let mut z: Vec<f64> = r.iter().zip(&dinv).map(|(a, b)| a * b).collect();
    let mut p = z.clone();
    let mut ap = vec![0.0; n];
    let mut rz = dot(&r, &z);
    let cap = 10 * n.max(1);
    for it in 1..=cap {
        a.matvec_into(&p, &mut ap);
        let pap = dot(&p, &ap);
        if pap <= 0.0 {
            return Err(Error::Definiteness(format!("p^T A p = {pap} at iteration {it}")));
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        if norm(&r) <= tol * bnorm {
            let residual = relative_residual(a, &x, rhs);
            if residual <= tol {
                return Ok((x, SolveReport { iterations: it, residual, method: SolveMethod::Cg }));
            }
            // recurrence drifted; restart from the true residual
            let ax = a.matvec(&x);
            for i in 0..n {
                r[i] = rhs[i] - ax[i];
            }
        }
        for i in 0..n {
            z[i] = r[i] * dinv[i];
        }
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    Err(Error::Convergence(format!(
        "CG reached {cap} iterations with residual {:e}",
        relative_residual(a, &x, rhs)
    )))
}

/// LU factorisation with partial pivoting, in place. Returns the pivots.
fn lu_factor(m: &mut [f64], n: usize) -> Result<Vec<usize>> {
    let scale = m.iter().fold(0.0f64, |s, v| s.max(v.abs()));
    if scale == 0.0 && n > 0 {
        return Err(Error::Singular("zero matrix".into()));
    }
    let mut piv = vec![0; n];
    for k in 0..n {
        let (mut best, mut arg) = (0.0, k);
        for i in k..n {
            let v = m[i * n + k].abs();
            if v > best {
                best = v;
                arg = i;
            }
        }
        if best <= 1e-14 * scale {
            return Err(Error::Singular(format!("pivot {best:e} in column {k}")));
        }
        piv[k] = arg;
        if arg != k {
            for j in 0..n {
                m.swap(k * n + j, arg * n + j);
            }
        }
        let inv = 1.0 / m[k * n + k];
        for i in k + 1..n {
            let l = m[i * n + k] * inv;
            m[i * n + k] = l;
            if l != 0.0 {
                for j in k + 1..n {
                    m[i * n + j] -= l * m[k * n + j];
                }
            }
        }
    }
    Ok(piv)
}

fn lu_solve(m: &[f64], piv: &[usize], n: usize, b: &mut [f64]) {
    for k in 0..n {
        b.swap(k, piv[k]);
    }
    for i in 0..n {
        let s: f64 = (0..i).map(|j| m[i * n + j] * b[j]).sum();
        b[i] -= s;
    }
    for i in (0..n).rev() {
        let s: f64 = (i + 1..n).map(|j| m[i * n + j] * b[j]).sum();
        b[i] = (b[i] - s) / m[i * n + i];
    }
}

/// Dense Gaussian elimination with partial pivoting and one step of
/// iterative refinement.
pub fn solve_dense(a: &SparseMatrix, rhs: &[f64]) -> Result<Vec<f64>> {
    check_square(a, rhs)?;
    let n = rhs.len();
    let mut m = vec![0.0; n * n];
    for (r, c, v) in a.entries() {
        m[r * n + c] += v;
    }
    let piv = lu_factor(&mut m, n)?;
    let mut x = rhs.to_vec();
    lu_solve(&m, &piv, n, &mut x);
    let ax = a.matvec(&x);
    let mut corr: Vec<f64> = rhs.iter().zip(&ax).map(|(b, y)| b - y).collect();
    lu_solve(&m, &piv, n, &mut corr);
    for (xi, c) in x.iter_mut().zip(&corr) {
        *xi += c;
    }
    Ok(x)
}

fn bicgstab(a: &SparseMatrix, rhs: &[f64], tol: f64) -> Result<(Vec<f64>, usize)> {
    let n = rhs.len();
    let dinv: Vec<f64> = a
        .diagonal()
        .into_iter()
        .map(|d| if d != 0.0 { 1.0 / d } else { 1.0 })
        .collect();
    let bnorm = norm(rhs);
    let mut x = vec![0.0; n];
    let mut r = rhs.to_vec();
    let r0 = r.clone();
    let (mut rho, mut alpha, mut omega) = (1.0, 1.0, 1.0);
    let mut v = vec![0.0; n];
    let mut p = vec![0.0; n];
    let mut y = vec![0.0; n];
    let mut s = vec![0.0; n];
    let mut z = vec![0.0; n];
    let mut t = vec![0.0; n];
    let cap = 10 * n.max(1);
    for it in 1..=cap {
        let rho_new = dot(&r0, &r);
        if rho_new == 0.0 || omega == 0.0 {
            return Err(Error::Singular(format!("BiCGSTAB breakdown at iteration {it}")));
        }
        let beta = (rho_new / rho) * (alpha / omega);
        rho = rho_new;
        for i in 0..n {
            p[i] = r[i] + beta * (p[i] - omega * v[i]);
            y[i] = p[i] * dinv[i];
        }
        a.matvec_into(&y, &mut v);
        alpha = rho / dot(&r0, &v);
        for i in 0..n {
            s[i] = r[i] - alpha * v[i];
        }
        if norm(&s) <= tol * bnorm {
            for i in 0..n {
                x[i] += alpha * y[i];
            }
            return Ok((x, it));
        }
        for i in 0..n {
            z[i] = s[i] * dinv[i];
        }
        a.matvec_into(&z, &mut t);
        omega = dot(&t, &s) / dot(&t, &t);
        for i in 0..n {
            x[i] += alpha * y[i] + omega * z[i];
            r[i] = s[i] - omega * t[i];
        }
        if norm(&r) <= tol * bnorm {
            return Ok((x, it));
        }
    }
    Err(Error::Convergence(format!("BiCGSTAB reached {cap} iterations")))
}

/// Solves a general nonsingular system: dense elimination up to
/// [`DENSE_LIMIT`] unknowns, Jacobi-preconditioned BiCGSTAB above.
pub fn solve_general(a: &SparseMatrix, rhs: &[f64], tol: f64) -> Result<(Vec<f64>, SolveReport)> {
    check_square(a, rhs)?;
    let n = rhs.len();
    if norm(rhs) == 0.0 {
        return Ok((vec![0.0; n], SolveReport { iterations: 0, residual: 0.0, method: SolveMethod::DenseLu }));
    }
    let (x, iterations, method) = if n <= DENSE_LIMIT {
        (solve_dense(a, rhs)?, 1, SolveMethod::DenseLu)
    } else {
        let (x, it) = bicgstab(a, rhs, tol)?;
        (x, it, SolveMethod::BiCgStab)
    };
    let residual = relative_residual(a, &x, rhs);
    if !(residual <= tol) {
        return Err(Error::Convergence(format!("{} left residual {residual:e} above {tol:e}", method.tag())));
    }
    Ok((x, SolveReport { iterations, residual, method }))
}

/// Right-hand side of a Galerkin problem.
#[derive(Clone, Copy)]
pub enum Load<'a> {
    Field(&'a dyn ScalarField),
    Vector(&'a [f64]),
}

/// The assembled form `a = a0 + N` on one space, reusable across solves.
#[derive(Debug, Clone)]
pub struct GalerkinProblem {
    space: Arc<LagrangeSpace>,
    matrix: SparseMatrix,
}

impl GalerkinProblem {
    pub fn new(space: &Arc<LagrangeSpace>, coeffs: &CoefficientSet) -> GalerkinProblem {
        let matrix = assemble_a0(space, coeffs)
            .add(&assemble_n(space, coeffs), 1.0, 1.0)
            .expect("same dimensions");
        GalerkinProblem { space: space.clone(), matrix }
    }

    pub fn space(&self) -> &Arc<LagrangeSpace> {
        &self.space
    }

    /// Entry `(i, j)` is `a(phi_j, phi_i)`.
    pub fn matrix(&self) -> &SparseMatrix {
        &self.matrix
    }

    /// Finds `w` with `a(w, phi) = f(phi)` for every basis function of
    /// `S_h^0(G)`. DOFs of `w` on the closure of `G` outside that subspace take
    /// the nodal values of `exterior` (zero when `None`); all others are 0.
    pub fn solve(
        &self,
        load: Load<'_>,
        g: &SubdomainSpec,
        exterior: Option<&dyn ScalarField>,
        tol: f64,
    ) -> Result<(FeFunction, SolveReport)> {
        let space = &self.space;
        let interior = space.interior_dofs(g)?;
        if interior.is_empty() {
            return Err(Error::EmptySpace(format!("no interior DOFs in {:?}", g.region)));
        }
        let fvec = match load {
            Load::Field(f) => assemble_load(space, f),
            Load::Vector(v) => {
                if v.len() != space.dim() {
                    return Err(Error::Dimension(format!("load of length {} for dimension {}", v.len(), space.dim())));
                }
                v.to_vec()
            }
        };
        let mut w = vec![0.0; space.dim()];
        if let Some(ext) = exterior {
            let values = interpolate(space, ext);
            let mut is_interior = vec![false; space.dim()];
            interior.iter().for_each(|&d| is_interior[d] = true);
            for d in space.dofs_in(g)? {
                if !is_interior[d] {
                    w[d] = values.coefficients()[d];
                }
            }
        }
        let lifted = self.matrix.matvec(&w);
        let rhs: Vec<f64> = interior.iter().map(|&d| fvec[d] - lifted[d]).collect();
        let sub = self.matrix.submatrix(&interior, &interior);
        let (x, report) = if sub.is_symmetric(1e-14) {
            solve_spd(&sub, &rhs, tol)?
        } else {
            solve_general(&sub, &rhs, tol)?
        };
        for (&d, v) in interior.iter().zip(&x) {
            w[d] = *v;
        }
        Ok((FeFunction::new(space.clone(), w)?, report))
    }
}

/// One-shot [`GalerkinProblem::solve`] with zero exterior data.
pub fn solve_local_galerkin(
    space: &Arc<LagrangeSpace>,
    coeffs: &CoefficientSet,
    load: Load<'_>,
    g: &SubdomainSpec,
    tol: f64,
) -> Result<FeFunction> {
    Ok(GalerkinProblem::new(space, coeffs).solve(load, g, None, tol)?.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fespace::{build_space, Field};
    use crate::forms::error_norms;
    use crate::mesh::{build_mesh, Rect};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_spd(n: usize, seed: u64) -> SparseMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let b: Vec<Vec<f64>> = (0..n).map(|_| (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
        let mut a = vec![vec![0.0; n]; n];
        for i in 0..n {
            for j in 0..n {
                a[i][j] = (0..n).map(|k| b[i][k] * b[j][k]).sum::<f64>();
            }
            a[i][i] += n as f64 * 0.1;
        }
        SparseMatrix::from_dense(&a)
    }

    fn random_vec(n: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
    }

    fn max_rel(a: &[f64], b: &[f64]) -> f64 {
        let diff = a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        diff / b.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    #[test]
    fn identity_and_zero_rhs() {
        let b = vec![1.0, -2.0, 3.0];
        let (x, rep) = solve_spd(&SparseMatrix::identity(3), &b, 1e-12).unwrap();
        assert_eq!(x, b);
        assert!(rep.iterations <= 1);
        let (x, rep) = solve_spd(&random_spd(5, 1), &[0.0; 5], 1e-12).unwrap();
        assert_eq!(x, vec![0.0; 5]);
        assert_eq!(rep.iterations, 0);
    }

    #[test]
    fn cg_matches_dense() {
        let a = random_spd(8, 3);
        let b = random_vec(8, 4);
        let (x, rep) = solve_spd(&a, &b, 1e-13).unwrap();
        assert!(rep.residual <= 1e-13);
        let y = solve_dense(&a, &b).unwrap();
        assert!(max_rel(&x, &y) < 1e-9);
        let (z, _) = solve_general(&a, &b, 1e-10).unwrap();
        assert!(max_rel(&z, &x) < 1e-9);
    }

    #[test]
    fn indefinite_and_nonconvergent() {
        let a = SparseMatrix::from_dense(&[vec![1.0, 2.0], vec![2.0, 1.0]]);
        assert!(matches!(solve_spd(&a, &[1.0, 0.0], 1e-10), Err(Error::Definiteness(_))));
        let a = SparseMatrix::from_dense(&[vec![-1.0, 0.0], vec![0.0, 1.0]]);
        assert!(matches!(solve_spd(&a, &[1.0, 1.0], 1e-10), Err(Error::Definiteness(_))));
    }

    #[test]
    fn general_examples() {
        let a = SparseMatrix::from_dense(&[vec![1.0, 1.0], vec![0.0, 1.0]]);
        let (x, _) = solve_general(&a, &[2.0, 1.0], 1e-12).unwrap();
        assert!((x[0] - 1.0).abs() < 1e-15 && (x[1] - 1.0).abs() < 1e-15);
        let s = SparseMatrix::from_dense(&[vec![1.0, 2.0], vec![2.0, 4.0]]);
        assert!(matches!(solve_general(&s, &[1.0, 1.0], 1e-10), Err(Error::Singular(_))));
    }

    #[test]
    fn bicgstab_on_nonsymmetric() {
        let n = 30;
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut trip = Vec::new();
        for i in 0..n {
            trip.push((i, i, 4.0));
            if i + 1 < n {
                trip.push((i, i + 1, -1.0 + rng.random_range(-0.3..0.3)));
                trip.push((i + 1, i, -1.5));
            }
        }
        let a = SparseMatrix::from_triplets(n, n, &trip).unwrap();
        let b = random_vec(n, 10);
        let (x, _) = bicgstab(&a, &b, 1e-13).unwrap();
        assert!(max_rel(&x, &solve_dense(&a, &b).unwrap()) < 1e-9);
    }

    #[test]
    fn local_galerkin_zero_load_and_orthogonality() {
        let space = build_space(Arc::new(build_mesh(Rect::unit(), 8).unwrap()), 2).unwrap();
        let g = SubdomainSpec::new(Rect::new(0.25, 0.25, 0.75, 0.75).unwrap());
        let coeffs = CoefficientSet::variable();
        let w = solve_local_galerkin(&space, &coeffs, Load::Field(&Field::zero()), &g, DEFAULT_TOL).unwrap();
        assert!(w.coefficients().iter().all(|v| *v == 0.0));

        let f = Field::trig(1.0, 2.0, 0.1, 1.0, 0.3);
        let problem = GalerkinProblem::new(&space, &coeffs);
        let (w, _) = problem.solve(Load::Field(&f), &g, None, DEFAULT_TOL).unwrap();
        let fvec = assemble_load(&space, &f);
        let aw = problem.matrix().matvec(w.coefficients());
        let fnorm = fvec.iter().map(|v| v * v).sum::<f64>().sqrt();
        for d in space.interior_dofs(&g).unwrap() {
            assert!((aw[d] - fvec[d]).abs() <= 1e-9 * fnorm);
        }
        let interior = space.interior_dofs(&g).unwrap();
        for (d, v) in w.coefficients().iter().enumerate() {
            if !interior.contains(&d) {
                assert_eq!(*v, 0.0);
            }
        }
        let tiny = SubdomainSpec::new(Rect::new(0.25, 0.25, 0.5, 0.5).unwrap());
        let coarse = build_space(Arc::new(build_mesh(Rect::unit(), 4).unwrap()), 1).unwrap();
        assert!(matches!(
            solve_local_galerkin(&coarse, &coeffs, Load::Field(&f), &tiny, DEFAULT_TOL),
            Err(Error::EmptySpace(_))
        ));
    }

    #[test]
    fn global_solve_converges_at_first_order() {
        let u = Field::sin_sin();
        let f = Field::new(|p| 2.0 * std::f64::consts::PI.powi(2) * Field::sin_sin().value(p));
        let coeffs = CoefficientSet::laplace();
        let mut errs = Vec::new();
        for n in [8, 16, 32] {
            let space = build_space(Arc::new(build_mesh(Rect::unit(), n).unwrap()), 1).unwrap();
            let whole = SubdomainSpec::new(Rect::unit());
            let w = solve_local_galerkin(&space, &coeffs, Load::Field(&f), &whole, DEFAULT_TOL).unwrap();
            errs.push(error_norms(&w, &u, &whole).unwrap().h1_semi);
            let a = GalerkinProblem::new(&space, &coeffs);
            let energy = a.matrix().bilinear(w.coefficients(), w.coefficients());
            let fw: f64 = assemble_load(&space, &f).iter().zip(w.coefficients()).map(|(a, b)| a * b).sum();
            assert!((energy / fw - 1.0).abs() < 1e-9);
        }
        for k in 1..errs.len() {
            let slope = (errs[k - 1] / errs[k]).log2();
            assert!((slope - 1.0).abs() < 0.1, "{slope}");
        }
    }
}
