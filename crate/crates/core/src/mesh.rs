//! Structured conforming triangulations of axis-aligned rectangles.
//!
//! Every grid square is split along the diagonal running from its
//! bottom-left to its top-right corner. Subdomains are rectangles whose
//! corners sit on grid lines; they are handled internally as integer
//! [`GridBox`]es so that shrinking by mesh layers is exact.

use crate::{Error, Point, Result};

/// Alignment snap tolerance, measured in grid steps.
pub const SNAP_TOL: f64 = 1e-12;

/// Axis-aligned rectangle `[xmin, xmax] x [ymin, ymax]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rect {
    pub xmin: f64,
    pub ymin: f64,
    pub xmax: f64,
    pub ymax: f64,
}

impl Rect {
    pub fn new(xmin: f64, ymin: f64, xmax: f64, ymax: f64) -> Result<Rect> {
        let finite = [xmin, ymin, xmax, ymax].iter().all(|v| v.is_finite());
        if !finite || xmax <= xmin || ymax <= ymin {
            return Err(Error::InvalidRect(format!(
                "[{xmin}, {xmax}] x [{ymin}, {ymax}]"
            )));
        }
        Ok(Rect { xmin, ymin, xmax, ymax })
    }

    pub fn unit() -> Rect {
        Rect { xmin: 0.0, ymin: 0.0, xmax: 1.0, ymax: 1.0 }
    }

    /// Square of the given side length centred at `center`.
    pub fn centered_square(center: Point, side: f64) -> Result<Rect> {
        let half = 0.5 * side;
        Rect::new(center[0] - half, center[1] - half, center[0] + half, center[1] + half)
    }

    pub fn width(&self) -> f64 {
        self.xmax - self.xmin
    }

    pub fn height(&self) -> f64 {
        self.ymax - self.ymin
    }

    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }

    /// Euclidean diameter (length of the diagonal).
    pub fn diameter(&self) -> f64 {
        self.width().hypot(self.height())
    }

    pub fn center(&self) -> Point {
        [0.5 * (self.xmin + self.xmax), 0.5 * (self.ymin + self.ymax)]
    }

    /// Closed containment with an absolute tolerance.
    pub fn contains(&self, p: Point, tol: f64) -> bool {
        p[0] >= self.xmin - tol
            && p[0] <= self.xmax + tol
            && p[1] >= self.ymin - tol
            && p[1] <= self.ymax + tol
    }

    pub fn contains_rect(&self, other: &Rect) -> bool {
        other.xmin >= self.xmin && other.xmax <= self.xmax && other.ymin >= self.ymin && other.ymax <= self.ymax
    }

    /// Strict containment: every side of `other` is at positive distance from
    /// the corresponding side of `self`.
    pub fn strictly_contains_rect(&self, other: &Rect) -> bool {
        other.xmin > self.xmin && other.xmax < self.xmax && other.ymin > self.ymin && other.ymax < self.ymax
    }
}

/// Vertex-index bounds of an aligned rectangle: columns `i0..=i1`, rows `j0..=j1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct GridBox {
    pub i0: usize,
    pub i1: usize,
    pub j0: usize,
    pub j1: usize,
}

impl GridBox {
    pub fn contains_square(&self, i: usize, j: usize) -> bool {
        i >= self.i0 && i < self.i1 && j >= self.j0 && j < self.j1
    }

    pub fn contains_vertex(&self, i: usize, j: usize) -> bool {
        i >= self.i0 && i <= self.i1 && j >= self.j0 && j <= self.j1
    }
}

/// A grid-aligned subdomain of a mesh domain.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SubdomainSpec {
    pub region: Rect,
}

impl SubdomainSpec {
    pub fn new(region: Rect) -> SubdomainSpec {
        SubdomainSpec { region }
    }
}

impl From<Rect> for SubdomainSpec {
    fn from(region: Rect) -> Self {
        SubdomainSpec { region }
    }
}

/// Conforming triangulation of a rectangle by a uniform grid of `nx x ny`
/// cells, each split into two triangles.
#[derive(Debug, Clone, PartialEq)]
pub struct StructuredMesh {
    domain: Rect,
    nx: usize,
    ny: usize,
    hx: f64,
    hy: f64,
    h_max: f64,
    vertices: Vec<Point>,
    triangles: Vec<[usize; 3]>,
    boundary_vertex_flags: Vec<bool>,
}

/// Builds the `n x n` triangulation of `domain`.
pub fn build_mesh(domain: Rect, n: usize) -> Result<StructuredMesh> {
    StructuredMesh::with_divisions(domain, n, n)
}

impl StructuredMesh {
    pub fn with_divisions(domain: Rect, nx: usize, ny: usize) -> Result<StructuredMesh> {
        if nx == 0 || ny == 0 {
            return Err(Error::InvalidSubdivision(format!("nx = {nx}, ny = {ny}; both must be >= 1")));
        }
        let hx = domain.width() / nx as f64;
        let hy = domain.height() / ny as f64;
        let mut vertices = Vec::with_capacity((nx + 1) * (ny + 1));
        let mut boundary_vertex_flags = Vec::with_capacity((nx + 1) * (ny + 1));
        for j in 0..=ny {
            for i in 0..=nx {
                vertices.push([domain.xmin + i as f64 * hx, domain.ymin + j as f64 * hy]);
                boundary_vertex_flags.push(i == 0 || j == 0 || i == nx || j == ny);
            }
        }
        let v = |i: usize, j: usize| j * (nx + 1) + i;
        let mut triangles = Vec::with_capacity(2 * nx * ny);
        for j in 0..ny {
            for i in 0..nx {
                let (v00, v10, v01, v11) = (v(i, j), v(i + 1, j), v(i, j + 1), v(i + 1, j + 1));
                triangles.push([v00, v10, v11]);
                triangles.push([v00, v11, v01]);
            }
        }
        let mut mesh = StructuredMesh {
            domain,
            nx,
            ny,
            hx,
            hy,
            h_max: 0.0,
            vertices,
            triangles,
            boundary_vertex_flags,
        };
        mesh.h_max = (0..mesh.num_cells()).map(|c| mesh.cell_diameter(c)).fold(0.0, f64::max);
        Ok(mesh)
    }

    pub fn domain(&self) -> Rect {
        self.domain
    }

    pub fn divisions(&self) -> (usize, usize) {
        (self.nx, self.ny)
    }

    /// Grid spacing along x and y.
    pub fn spacing(&self) -> (f64, f64) {
        (self.hx, self.hy)
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn boundary_vertex_flags(&self) -> &[bool] {
        &self.boundary_vertex_flags
    }

    pub fn num_cells(&self) -> usize {
        self.triangles.len()
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    /// Largest cell diameter, `h_Omega`.
    pub fn mesh_size(&self) -> f64 {
        self.h_max
    }

    pub fn cell_vertices(&self, cell: usize) -> [Point; 3] {
        let t = self.triangles[cell];
        [self.vertices[t[0]], self.vertices[t[1]], self.vertices[t[2]]]
    }

    pub fn cell_diameter(&self, cell: usize) -> f64 {
        let [a, b, c] = self.cell_vertices(cell);
        let d = |p: Point, q: Point| (p[0] - q[0]).hypot(p[1] - q[1]);
        d(a, b).max(d(b, c)).max(d(c, a))
    }

    pub fn cell_area(&self, cell: usize) -> f64 {
        let [a, b, c] = self.cell_vertices(cell);
        0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1])).abs()
    }

    /// Grid square `(i, j)` that contains the cell.
    pub fn cell_square(&self, cell: usize) -> (usize, usize) {
        let s = cell / 2;
        (s % self.nx, s / self.nx)
    }

    /// Grid indices `(i, j)` of a vertex.
    pub fn vertex_grid(&self, v: usize) -> (usize, usize) {
        (v % (self.nx + 1), v / (self.nx + 1))
    }

    /// Finds the cell containing `p` and the barycentric coordinates of `p`
    /// with respect to that cell's vertices.
    pub fn locate(&self, p: Point) -> Result<(usize, [f64; 3])> {
        let tol = SNAP_TOL * self.hx.max(self.hy);
        if !p[0].is_finite() || !p[1].is_finite() || !self.domain.contains(p, tol) {
            return Err(Error::OutOfDomain(p[0], p[1]));
        }
        let sx = (p[0] - self.domain.xmin) / self.hx;
        let sy = (p[1] - self.domain.ymin) / self.hy;
        let i = (sx.floor().max(0.0) as usize).min(self.nx - 1);
        let j = (sy.floor().max(0.0) as usize).min(self.ny - 1);
        let s = sx - i as f64;
        let t = sy - j as f64;
        // lower triangle (v00, v10, v11) holds t <= s
        if t <= s {
            Ok((2 * (j * self.nx + i), [1.0 - s, s - t, t]))
        } else {
            Ok((2 * (j * self.nx + i) + 1, [1.0 - t, s, t - s]))
        }
    }

    fn snap(&self, value: f64, origin: f64, step: f64, count: usize, what: &str) -> Result<usize> {
        let k = (value - origin) / step;
        let r = k.round();
        if (k - r).abs() > SNAP_TOL || r < 0.0 || r > count as f64 {
            return Err(Error::Alignment(format!(
                "{what} = {value} is not on a grid line (offset {k} steps, grid has {count} steps)"
            )));
        }
        Ok(r as usize)
    }

    /// Integer index box of an aligned subdomain.
    pub fn grid_box(&self, sub: &SubdomainSpec) -> Result<GridBox> {
        let r = &sub.region;
        let d = &self.domain;
        let b = GridBox {
            i0: self.snap(r.xmin, d.xmin, self.hx, self.nx, "xmin")?,
            i1: self.snap(r.xmax, d.xmin, self.hx, self.nx, "xmax")?,
            j0: self.snap(r.ymin, d.ymin, self.hy, self.ny, "ymin")?,
            j1: self.snap(r.ymax, d.ymin, self.hy, self.ny, "ymax")?,
        };
        if b.i1 <= b.i0 || b.j1 <= b.j0 {
            return Err(Error::Alignment(format!("region {r:?} spans less than one grid step")));
        }
        Ok(b)
    }

    /// Rectangle covered by an index box.
    pub fn box_region(&self, b: &GridBox) -> SubdomainSpec {
        let d = &self.domain;
        SubdomainSpec::new(Rect {
            xmin: d.xmin + b.i0 as f64 * self.hx,
            xmax: d.xmin + b.i1 as f64 * self.hx,
            ymin: d.ymin + b.j0 as f64 * self.hy,
            ymax: d.ymin + b.j1 as f64 * self.hy,
        })
    }

    /// Largest aligned subdomain contained in `rect` (clipped to the domain).
    pub fn inner_region(&self, rect: &Rect) -> Result<SubdomainSpec> {
        let d = &self.domain;
        let lo = |v: f64, o: f64, h: f64, n: usize| (((v - o) / h - SNAP_TOL).ceil().max(0.0) as usize).min(n);
        let hi = |v: f64, o: f64, h: f64, n: usize| (((v - o) / h + SNAP_TOL).floor().max(0.0) as usize).min(n);
        let b = GridBox {
            i0: lo(rect.xmin, d.xmin, self.hx, self.nx),
            i1: hi(rect.xmax, d.xmin, self.hx, self.nx),
            j0: lo(rect.ymin, d.ymin, self.hy, self.ny),
            j1: hi(rect.ymax, d.ymin, self.hy, self.ny),
        };
        if b.i1 <= b.i0 || b.j1 <= b.j0 {
            return Err(Error::DegenerateSubdomain(format!("{rect:?} contains no whole grid cell")));
        }
        Ok(self.box_region(&b))
    }

    /// Index box of the whole domain.
    pub fn full_box(&self) -> GridBox {
        GridBox { i0: 0, i1: self.nx, j0: 0, j1: self.ny }
    }

    /// The triangles whose closure lies in the subdomain, in ascending order.
    pub fn cells_in(&self, sub: &SubdomainSpec) -> Result<Vec<usize>> {
        let b = self.grid_box(sub)?;
        Ok(self.cells_in_box(&b))
    }

    pub fn cells_in_box(&self, b: &GridBox) -> Vec<usize> {
        let mut cells = Vec::with_capacity(2 * (b.i1 - b.i0) * (b.j1 - b.j0));
        for j in b.j0..b.j1 {
            for i in b.i0..b.i1 {
                let s = j * self.nx + i;
                cells.push(2 * s);
                cells.push(2 * s + 1);
            }
        }
        cells
    }

    /// Moves every side of `sub` inward by `layers` grid steps.
    pub fn shrink_by_layers(&self, sub: &SubdomainSpec, layers: usize) -> Result<SubdomainSpec> {
        let b = self.grid_box(sub)?;
        if b.i0 + 2 * layers >= b.i1 || b.j0 + 2 * layers >= b.j1 {
            return Err(Error::DegenerateSubdomain(format!(
                "shrinking a {}x{} box by {layers} layers leaves nothing",
                b.i1 - b.i0,
                b.j1 - b.j0
            )));
        }
        Ok(self.box_region(&GridBox {
            i0: b.i0 + layers,
            i1: b.i1 - layers,
            j0: b.j0 + layers,
            j1: b.j1 - layers,
        }))
    }

    /// Number of whole mesh layers separating `inner` from `outer`.
    pub fn layer_count(&self, inner: &SubdomainSpec, outer: &SubdomainSpec) -> Result<usize> {
        let a = self.grid_box(inner)?;
        let b = self.grid_box(outer)?;
        let gaps = [
            a.i0 as i64 - b.i0 as i64,
            b.i1 as i64 - a.i1 as i64,
            a.j0 as i64 - b.j0 as i64,
            b.j1 as i64 - a.j1 as i64,
        ];
        let min_gap = gaps.into_iter().min().unwrap_or(0);
        if min_gap <= 0 {
            return Err(Error::Containment(format!(
                "{:?} is not strictly inside {:?}",
                inner.region, outer.region
            )));
        }
        Ok(min_gap as usize)
    }
}
