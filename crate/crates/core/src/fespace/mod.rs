//! Lagrange finite element spaces of degree 1 and 2 on a [`StructuredMesh`].
//!
//! Degrees of freedom are nodal values. Every node is addressed by its
//! position on the half-step grid: vertex `(i, j)` sits at `(2i, 2j)` and
//! edge midpoints at the odd positions in between. DOFs are numbered
//! vertices first, then edge midpoints, each group lexicographically by
//! `(y, x)`.

mod field;

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub use field::{Field, ScalarField};

use crate::forms::QuadratureRule;
use crate::mesh::{StructuredMesh, SubdomainSpec};
use crate::{Error, Point, Result};

const NONE: usize = usize::MAX;

/// Degree-`r` continuous Lagrange space over a structured mesh.
#[derive(Debug, Clone)]
pub struct LagrangeSpace {
    mesh: Arc<StructuredMesh>,
    degree: usize,
    dof_coords: Vec<Point>,
    dof_grid: Vec<(usize, usize)>,
    grid_to_dof: Vec<usize>,
    cell_dofs: Vec<usize>,
    dof_cells: Vec<Vec<usize>>,
    boundary_dofs: Vec<usize>,
    is_boundary: Vec<bool>,
}

/// Builds the Lagrange space of degree `r` (1 or 2).
pub fn build_space(mesh: Arc<StructuredMesh>, r: usize) -> Result<Arc<LagrangeSpace>> {
    if !(1..=2).contains(&r) {
        return Err(Error::Degree(r));
    }
    let (nx, ny) = mesh.divisions();
    let (hx, hy) = mesh.spacing();
    let dom = mesh.domain();
    let gw = 2 * nx + 1;
    let gh = 2 * ny + 1;
    let mut grid_to_dof = vec![NONE; gw * gh];
    let mut dof_grid = Vec::new();
    for j in 0..=ny {
        for i in 0..=nx {
            grid_to_dof[2 * j * gw + 2 * i] = dof_grid.len();
            dof_grid.push((2 * i, 2 * j));
        }
    }
    if r == 2 {
        for jj in 0..gh {
            for ii in 0..gw {
                if ii % 2 == 0 && jj % 2 == 0 {
                    continue;
                }
                grid_to_dof[jj * gw + ii] = dof_grid.len();
                dof_grid.push((ii, jj));
            }
        }
    }
    let dof_coords: Vec<Point> = dof_grid
        .iter()
        .map(|&(ii, jj)| [dom.xmin + 0.5 * ii as f64 * hx, dom.ymin + 0.5 * jj as f64 * hy])
        .collect();
    let nloc = local_dim(r);
    let mut cell_dofs = Vec::with_capacity(mesh.num_cells() * nloc);
    let mut dof_cells = vec![Vec::new(); dof_grid.len()];
    for (c, tri) in mesh.triangles().iter().enumerate() {
        let g: Vec<(usize, usize)> = tri
            .iter()
            .map(|&v| {
                let (i, j) = mesh.vertex_grid(v);
                (2 * i, 2 * j)
            })
            .collect();
        let mut nodes = vec![g[0], g[1], g[2]];
        if r == 2 {
            let mid = |a: (usize, usize), b: (usize, usize)| ((a.0 + b.0) / 2, (a.1 + b.1) / 2);
            nodes.extend([mid(g[1], g[2]), mid(g[2], g[0]), mid(g[0], g[1])]);
        }
        for (ii, jj) in nodes {
            let d = grid_to_dof[jj * gw + ii];
            debug_assert_ne!(d, NONE);
            cell_dofs.push(d);
            dof_cells[d].push(c);
        }
    }
    let is_boundary: Vec<bool> = dof_grid
        .iter()
        .map(|&(ii, jj)| ii == 0 || jj == 0 || ii == 2 * nx || jj == 2 * ny)
        .collect();
    let boundary_dofs = (0..dof_grid.len()).filter(|&d| is_boundary[d]).collect();
    Ok(Arc::new(LagrangeSpace {
        mesh,
        degree: r,
        dof_coords,
        dof_grid,
        grid_to_dof,
        cell_dofs,
        dof_cells,
        boundary_dofs,
        is_boundary,
    }))
}

/// Number of local basis functions on a triangle.
pub fn local_dim(r: usize) -> usize {
    (r + 1) * (r + 2) / 2
}

/// Values of the local basis at barycentric coordinates `l`.
pub fn basis_values(r: usize, l: [f64; 3]) -> [f64; 6] {
    match r {
        1 => [l[0], l[1], l[2], 0.0, 0.0, 0.0],
        _ => [
            l[0] * (2.0 * l[0] - 1.0),
            l[1] * (2.0 * l[1] - 1.0),
            l[2] * (2.0 * l[2] - 1.0),
            4.0 * l[1] * l[2],
            4.0 * l[2] * l[0],
            4.0 * l[0] * l[1],
        ],
    }
}

/// Derivatives of the local basis with respect to the three barycentric
/// coordinates.
pub fn basis_lambda_derivatives(r: usize, l: [f64; 3]) -> [[f64; 3]; 6] {
    match r {
        1 => [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0], [0.0; 3], [0.0; 3], [0.0; 3]],
        _ => [
            [4.0 * l[0] - 1.0, 0.0, 0.0],
            [0.0, 4.0 * l[1] - 1.0, 0.0],
            [0.0, 0.0, 4.0 * l[2] - 1.0],
            [0.0, 4.0 * l[2], 4.0 * l[1]],
            [4.0 * l[2], 0.0, 4.0 * l[0]],
            [4.0 * l[1], 4.0 * l[0], 0.0],
        ],
    }
}

/// Affine data of one triangle.
#[derive(Debug, Clone, Copy)]
pub struct CellGeometry {
    pub vertices: [Point; 3],
    pub grad_lambda: [[f64; 2]; 3],
    pub area: f64,
}

impl CellGeometry {
    pub fn new(v: [Point; 3]) -> CellGeometry {
        let det = (v[1][0] - v[0][0]) * (v[2][1] - v[0][1]) - (v[2][0] - v[0][0]) * (v[1][1] - v[0][1]);
        let g = |a: Point, b: Point| [(a[1] - b[1]) / det, (b[0] - a[0]) / det];
        CellGeometry {
            vertices: v,
            grad_lambda: [g(v[1], v[2]), g(v[2], v[0]), g(v[0], v[1])],
            area: 0.5 * det.abs(),
        }
    }

    pub fn point(&self, l: [f64; 3]) -> Point {
        let v = &self.vertices;
        [
            l[0] * v[0][0] + l[1] * v[1][0] + l[2] * v[2][0],
            l[0] * v[0][1] + l[1] * v[1][1] + l[2] * v[2][1],
        ]
    }

    /// Physical gradients of the local basis.
    pub fn basis_gradients(&self, r: usize, l: [f64; 3]) -> [[f64; 2]; 6] {
        let dl = basis_lambda_derivatives(r, l);
        let mut out = [[0.0; 2]; 6];
        for (k, row) in dl.iter().enumerate().take(local_dim(r)) {
            for m in 0..3 {
                out[k][0] += row[m] * self.grad_lambda[m][0];
                out[k][1] += row[m] * self.grad_lambda[m][1];
            }
        }
        out
    }
}

/// Basis data at one quadrature point of one cell.
pub struct QuadPoint<'a> {
    pub x: Point,
    /// Physical quadrature weight.
    pub weight: f64,
    pub dofs: &'a [usize],
    pub values: [f64; 6],
    pub grads: [[f64; 2]; 6],
}

impl QuadPoint<'_> {
    pub fn eval(&self, coeffs: &[f64]) -> f64 {
        self.dofs.iter().zip(&self.values).map(|(&d, v)| coeffs[d] * v).sum()
    }

    pub fn grad(&self, coeffs: &[f64]) -> [f64; 2] {
        let mut g = [0.0; 2];
        for (&d, gr) in self.dofs.iter().zip(&self.grads) {
            g[0] += coeffs[d] * gr[0];
            g[1] += coeffs[d] * gr[1];
        }
        g
    }
}

impl LagrangeSpace {
    pub fn mesh(&self) -> &Arc<StructuredMesh> {
        &self.mesh
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn dim(&self) -> usize {
        self.dof_coords.len()
    }

    pub fn dof_coords(&self) -> &[Point] {
        &self.dof_coords
    }

    pub fn boundary_dofs(&self) -> &[usize] {
        &self.boundary_dofs
    }

    pub fn is_boundary(&self, dof: usize) -> bool {
        self.is_boundary[dof]
    }

    pub fn cell_dofs(&self, cell: usize) -> &[usize] {
        let n = local_dim(self.degree);
        &self.cell_dofs[cell * n..(cell + 1) * n]
    }

    /// Cells on which the basis function of `dof` is not identically zero.
    pub fn dof_cells(&self, dof: usize) -> &[usize] {
        &self.dof_cells[dof]
    }

    /// Half-step grid position of a DOF node.
    pub fn dof_grid(&self, dof: usize) -> (usize, usize) {
        self.dof_grid[dof]
    }

    /// DOF at a half-step grid position, if any.
    pub fn dof_at_grid(&self, ii: usize, jj: usize) -> Option<usize> {
        let (nx, ny) = self.mesh.divisions();
        if ii > 2 * nx || jj > 2 * ny {
            return None;
        }
        let d = self.grid_to_dof[jj * (2 * nx + 1) + ii];
        (d != NONE).then_some(d)
    }

    pub fn cell_geometry(&self, cell: usize) -> CellGeometry {
        CellGeometry::new(self.mesh.cell_vertices(cell))
    }

    /// Runs `f` at every quadrature point of `cell`.
    pub fn for_each_qp(&self, cell: usize, rule: &QuadratureRule, mut f: impl FnMut(&QuadPoint)) {
        let geo = self.cell_geometry(cell);
        let dofs = self.cell_dofs(cell);
        for (q, w) in rule.points().iter().zip(rule.weights()) {
            let l = [1.0 - q[0] - q[1], q[0], q[1]];
            let qp = QuadPoint {
                x: geo.point(l),
                weight: w * 2.0 * geo.area,
                dofs,
                values: basis_values(self.degree, l),
                grads: geo.basis_gradients(self.degree, l),
            };
            f(&qp);
        }
    }

    /// DOFs spanning `S_h^0(G)`: basis functions vanishing on the boundary of
    /// the domain whose support lies in the closure of `G` and stays away
    /// from the part of `dG` that is interior to the domain.
    pub fn interior_dofs(&self, g: &SubdomainSpec) -> Result<Vec<usize>> {
        let b = self.mesh.grid_box(g)?;
        let (nx, ny) = self.mesh.divisions();
        let touches_cut = |vi: usize, vj: usize| {
            (vi == b.i0 && b.i0 != 0)
                || (vi == b.i1 && b.i1 != nx)
                || (vj == b.j0 && b.j0 != 0)
                || (vj == b.j1 && b.j1 != ny)
        };
        let admitted = |d: usize| {
            !self.is_boundary[d]
                && self.dof_cells[d].iter().all(|&c| {
                    let (i, j) = self.mesh.cell_square(c);
                    b.contains_square(i, j)
                        && self.mesh.triangles()[c].iter().all(|&v| {
                            let (vi, vj) = self.mesh.vertex_grid(v);
                            !touches_cut(vi, vj)
                        })
                })
        };
        Ok((0..self.dim()).filter(|&d| admitted(d)).collect())
    }

    /// DOFs whose node lies in the closure of `G`; they span `S_h(G)`.
    pub fn dofs_in(&self, g: &SubdomainSpec) -> Result<Vec<usize>> {
        let b = self.mesh.grid_box(g)?;
        Ok((0..self.dim())
            .filter(|&d| {
                let (ii, jj) = self.dof_grid[d];
                ii >= 2 * b.i0 && ii <= 2 * b.i1 && jj >= 2 * b.j0 && jj <= 2 * b.j1
            })
            .collect())
    }

    /// All DOFs not on the boundary of the domain.
    pub fn free_dofs(&self) -> Vec<usize> {
        (0..self.dim()).filter(|&d| !self.is_boundary[d]).collect()
    }
}

/// Coefficient vector in a [`LagrangeSpace`].
#[derive(Debug, Clone)]
pub struct FeFunction {
    space: Arc<LagrangeSpace>,
    coefficients: Vec<f64>,
}

impl FeFunction {
    pub fn new(space: Arc<LagrangeSpace>, coefficients: Vec<f64>) -> Result<FeFunction> {
        if coefficients.len() != space.dim() {
            return Err(Error::Dimension(format!(
                "{} coefficients for a space of dimension {}",
                coefficients.len(),
                space.dim()
            )));
        }
        Ok(FeFunction { space, coefficients })
    }

    pub fn zero(space: Arc<LagrangeSpace>) -> FeFunction {
        let n = space.dim();
        FeFunction { space, coefficients: vec![0.0; n] }
    }

    pub fn space(&self) -> &Arc<LagrangeSpace> {
        &self.space
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    pub fn coefficients_mut(&mut self) -> &mut [f64] {
        &mut self.coefficients
    }

    pub fn into_coefficients(self) -> Vec<f64> {
        self.coefficients
    }

    pub fn evaluate(&self, p: Point) -> Result<f64> {
        let (cell, l) = self.space.mesh.locate(p)?;
        let vals = basis_values(self.space.degree, l);
        Ok(self.space.cell_dofs(cell).iter().zip(&vals).map(|(&d, v)| self.coefficients[d] * v).sum())
    }

    pub fn evaluate_gradient(&self, p: Point) -> Result<[f64; 2]> {
        let (cell, l) = self.space.mesh.locate(p)?;
        let grads = self.space.cell_geometry(cell).basis_gradients(self.space.degree, l);
        let mut g = [0.0; 2];
        for (&d, gr) in self.space.cell_dofs(cell).iter().zip(&grads) {
            g[0] += self.coefficients[d] * gr[0];
            g[1] += self.coefficients[d] * gr[1];
        }
        Ok(g)
    }
}

impl ScalarField for FeFunction {
    fn value(&self, p: Point) -> f64 {
        self.evaluate(p).unwrap_or(f64::NAN)
    }
}

/// Nodal interpolant of `u`.
pub fn interpolate(space: &Arc<LagrangeSpace>, u: &dyn ScalarField) -> FeFunction {
    let coefficients = space.dof_coords.iter().map(|&p| u.value(p)).collect();
    FeFunction { space: space.clone(), coefficients }
}

/// Derives an independent stream seed from a base seed and two counters.
pub fn split_seed(base: u64, stream: u64, index: u64) -> u64 {
    fn mix(mut z: u64) -> u64 {
        z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        z ^ (z >> 31)
    }
    mix(mix(mix(base) ^ stream) ^ index.rotate_left(32))
}

/// Coefficients i.i.d. uniform on `[-1, 1]` at `support`, zero elsewhere.
pub fn random_fefunction(space: &Arc<LagrangeSpace>, seed: u64, support: &[usize]) -> Result<FeFunction> {
    if support.is_empty() {
        return Err(Error::EmptySupport);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut coefficients = vec![0.0; space.dim()];
    for &d in support {
        coefficients[d] = rng.random_range(-1.0..=1.0);
    }
    Ok(FeFunction { space: space.clone(), coefficients })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{build_mesh, Rect};

    fn space(n: usize, r: usize) -> Arc<LagrangeSpace> {
        build_space(Arc::new(build_mesh(Rect::unit(), n).unwrap()), r).unwrap()
    }

    fn sub(a: f64, b: f64) -> SubdomainSpec {
        SubdomainSpec::new(Rect::new(a, a, b, b).unwrap())
    }

    #[test]
    fn dimensions() {
        assert_eq!(space(2, 1).dim(), 9);
        assert_eq!(space(1, 2).dim(), 9);
        assert_eq!(space(2, 1).boundary_dofs().len(), 8);
        // (n+1)^2 + 3n^2 + 2n edges
        assert_eq!(space(4, 2).dim(), 25 + 48 + 8);
        assert!(matches!(build_space(space(1, 1).mesh().clone(), 3), Err(Error::Degree(3))));
    }

    #[test]
    fn dof_ordering_is_lexicographic_in_y_then_x() {
        let s = space(3, 2);
        let nv = 16;
        let key = |d: usize| (s.dof_coords()[d][1], s.dof_coords()[d][0]);
        for d in 1..nv {
            assert!(key(d - 1) < key(d));
        }
        for d in nv + 1..s.dim() {
            assert!(key(d - 1) < key(d));
        }
    }

    #[test]
    fn every_dof_has_a_cell() {
        for r in [1, 2] {
            let s = space(3, r);
            assert!((0..s.dim()).all(|d| !s.dof_cells(d).is_empty()));
        }
    }

    #[test]
    fn interior_dofs_whole_domain_is_center() {
        let s = space(2, 1);
        assert_eq!(s.interior_dofs(&sub(0.0, 1.0)).unwrap(), vec![4]);
        let s = space(4, 2);
        assert_eq!(s.interior_dofs(&sub(0.0, 1.0)).unwrap(), s.free_dofs());
    }

    #[test]
    fn interior_dofs_touching_the_corner() {
        // every vertex off the boundary has a support reaching x = 1/2 or y = 1/2
        let s = space(4, 1);
        assert!(s.interior_dofs(&sub(0.0, 0.5)).unwrap().is_empty());
        let s = space(8, 1);
        let got: Vec<(usize, usize)> =
            s.interior_dofs(&sub(0.0, 0.5)).unwrap().iter().map(|&d| s.dof_grid(d)).collect();
        assert_eq!(got, vec![(2, 2), (4, 2), (2, 4), (4, 4)]);
    }

    #[test]
    fn interior_dofs_of_a_single_square_are_empty() {
        let s = space(4, 2);
        assert!(s.interior_dofs(&sub(0.25, 0.5)).unwrap().is_empty());
    }

    #[test]
    fn evaluation_examples() {
        let s = space(4, 1);
        let one = FeFunction::new(s.clone(), vec![1.0; s.dim()]).unwrap();
        assert!((one.evaluate([0.37, 0.81]).unwrap() - 1.0).abs() < 1e-15);
        let g = one.evaluate_gradient([0.37, 0.81]).unwrap();
        assert!(g[0].abs() < 1e-13 && g[1].abs() < 1e-13);
        let ux = interpolate(&s, &Field::affine(0.0, 1.0, 0.0));
        assert!((ux.evaluate([0.3, 0.7]).unwrap() - 0.3).abs() < 1e-15);
        let g = ux.evaluate_gradient([0.61, 0.13]).unwrap();
        assert!((g[0] - 1.0).abs() < 1e-13 && g[1].abs() < 1e-13);
        assert!(matches!(ux.evaluate([-0.5, 0.5]), Err(Error::OutOfDomain(..))));
    }

    #[test]
    fn p2_reproduces_quadratics() {
        let s = space(3, 2);
        let u = Field::new(|p| p[0] * p[1] + 0.5 * p[0] * p[0] - p[1]);
        let uh = interpolate(&s, &u);
        for p in [[0.11, 0.93], [0.5, 0.5], [0.72, 0.05]] {
            assert!((uh.evaluate(p).unwrap() - u.value(p)).abs() < 1e-14);
        }
    }

    #[test]
    fn conformity_across_edges() {
        let s = space(3, 2);
        let f = random_fefunction(&s, 7, &(0..s.dim()).collect::<Vec<_>>()).unwrap();
        // points on the diagonal and grid lines evaluated from both sides
        for c in 0..s.mesh().num_cells() {
            let geo = s.cell_geometry(c);
            for e in 0..3 {
                let t = 0.37;
                let mut l = [0.0; 3];
                l[e] = t;
                l[(e + 1) % 3] = 1.0 - t;
                let p = geo.point(l);
                let here: f64 = s.cell_dofs(c).iter().zip(basis_values(2, l)).map(|(&d, v)| f.coefficients()[d] * v).sum();
                assert!((here - f.evaluate(p).unwrap()).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn random_functions() {
        let s = space(4, 2);
        let support = s.interior_dofs(&sub(0.0, 1.0)).unwrap();
        let a = random_fefunction(&s, 11, &support).unwrap();
        let b = random_fefunction(&s, 11, &support).unwrap();
        assert_eq!(a.coefficients(), b.coefficients());
        let one = random_fefunction(&s, 3, &[5]).unwrap();
        assert_eq!(one.coefficients().iter().filter(|c| **c != 0.0).count(), 1);
        assert!(matches!(random_fefunction(&s, 1, &[]), Err(Error::EmptySupport)));
        assert!(a.coefficients().iter().enumerate().all(|(d, &c)| c == 0.0 || support.contains(&d)));
    }

    #[test]
    fn split_seed_separates_streams() {
        assert_ne!(split_seed(1, 0, 0), split_seed(1, 0, 1));
        assert_ne!(split_seed(1, 1, 0), split_seed(1, 0, 1));
        assert_eq!(split_seed(5, 2, 3), split_seed(5, 2, 3));
    }
}
