use std::collections::HashMap;
use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use super::{area_centroid, voronoi, PolygonalMesh};
use crate::{Error, Point, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Family {
    Triangle,
    Quad,
    Voronoi,
    /// Quad grid whose cells all have a reflex vertex.
    Nonconvex,
}

impl FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "triangle" => Ok(Family::Triangle),
            "quad" => Ok(Family::Quad),
            "voronoi" => Ok(Family::Voronoi),
            "nonconvex" => Ok(Family::Nonconvex),
            other => Err(Error::InvalidParameter(format!(
                "unknown mesh family `{other}` (expected triangle, quad, voronoi or nonconvex)"
            ))),
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Family::Triangle => "triangle",
            Family::Quad => "quad",
            Family::Voronoi => "voronoi",
            Family::Nonconvex => "nonconvex",
        })
    }
}

/// Computational domains supported by the generators.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Domain {
    Rect { min: Point, max: Point },
    /// Channel `(0, length) × (0, height)` minus a disk.
    Cylinder { length: f64, height: f64, center: Point, radius: f64 },
    /// Channel `(0, length) × (0, height)` minus the block
    /// `(0, step_length) × (0, step_height)`.
    Step { length: f64, height: f64, step_length: f64, step_height: f64 },
}

impl Domain {
    pub fn unit_square() -> Self {
        Domain::Rect { min: [0.0, 0.0], max: [1.0, 1.0] }
    }

    pub fn cylinder_channel() -> Self {
        Domain::Cylinder { length: 0.82, height: 0.41, center: [0.2, 0.2], radius: 0.05 }
    }

    pub fn backward_step() -> Self {
        Domain::Step { length: 9.0, height: 2.0, step_length: 2.0, step_height: 1.0 }
    }

    pub fn area(&self) -> f64 {
        match *self {
            Domain::Rect { min, max } => (max[0] - min[0]) * (max[1] - min[1]),
            Domain::Cylinder { length, height, radius, .. } => length * height - PI * radius * radius,
            Domain::Step { length, height, step_length, step_height } => {
                length * height - step_length * step_height
            }
        }
    }

    fn validate(&self) -> Result<()> {
        let ok = match *self {
            Domain::Rect { min, max } => max[0] > min[0] && max[1] > min[1],
            Domain::Cylinder { length, height, center, radius } => {
                radius > 0.0
                    && center[0] - 2.0 * radius > 0.0
                    && center[0] + 2.0 * radius < length
                    && center[1] - 2.0 * radius > 0.0
                    && center[1] + 2.0 * radius < height
            }
            Domain::Step { length, height, step_length, step_height } => {
                step_length > 0.0 && step_height > 0.0 && step_length < length && step_height < height
            }
        };
        if ok && self.area().is_finite() {
            Ok(())
        } else {
            Err(Error::Generate(format!("degenerate domain {self:?}")))
        }
    }
}

/// Deterministic mesh of `n_cells` cells. The cylinder generator picks the
/// resolution whose cell count is closest to `n_cells`; every other
/// combination produces exactly `n_cells` cells or fails.
pub fn generate(family: Family, n_cells: usize, seed: u64, domain: &Domain) -> Result<PolygonalMesh> {
    if n_cells < 4 {
        return Err(Error::Generate(format!("need at least 4 cells, got {n_cells}")));
    }
    domain.validate()?;
    match (*domain, family) {
        (Domain::Rect { min, max }, Family::Quad) => {
            let m = exact_sqrt(n_cells, "quad meshes need a perfect-square cell count")?;
            let (v, c) = tensor_grid(&linspace(min[0], max[0], m), &linspace(min[1], max[1], m), |_, _| true, false);
            PolygonalMesh::new(v, c)
        }
        (Domain::Rect { min, max }, Family::Triangle) => {
            if !n_cells.is_multiple_of(2) {
                return Err(Error::Generate(format!("triangle meshes need 2·m² cells, got {n_cells}")));
            }
            let m = exact_sqrt(n_cells / 2, "triangle meshes need 2·m² cells")?;
            let (v, c) = tensor_grid(&linspace(min[0], max[0], m), &linspace(min[1], max[1], m), |_, _| true, true);
            PolygonalMesh::new(v, c)
        }
        (Domain::Rect { min, max }, Family::Nonconvex) => {
            let m = exact_sqrt(n_cells, "non-convex meshes need a perfect-square cell count")?;
            let (v, c) = nonconvex_grid(min, max, m);
            PolygonalMesh::new(v, c)
        }
        (Domain::Rect { min, max }, Family::Voronoi) => {
            let (v, c) = voronoi::lloyd_voronoi(min, max, n_cells, seed)?;
            PolygonalMesh::new(v, c)
        }
        (Domain::Step { length, height, step_length, step_height }, Family::Quad | Family::Triangle) => {
            let triangles = family == Family::Triangle;
            let per_square = if triangles { 2 } else { 1 };
            let squares = domain.area() / (step_height * step_height);
            let m = ((n_cells as f64 / (per_square as f64 * squares)).sqrt()).round().max(1.0) as usize;
            let a = step_height / m as f64;
            let nx = (length / a).round() as usize;
            let ny = (height / a).round() as usize;
            let sx = (step_length / a).round() as usize;
            let count = per_square * (nx * ny - sx * m);
            let fits = [(length, nx), (height, ny), (step_length, sx)]
                .iter()
                .all(|&(len, k)| (len - k as f64 * a).abs() <= 1e-12 * len);
            if !fits || count != n_cells {
                return Err(Error::Generate(format!(
                    "{n_cells} cells do not tile the step domain with the {family} family"
                )));
            }
            let (v, c) = tensor_grid(
                &linspace(0.0, length, nx),
                &linspace(0.0, height, ny),
                |i, j| !(i < sx && j < m),
                triangles,
            );
            PolygonalMesh::new(v, c)
        }
        (Domain::Cylinder { length, height, center, radius }, Family::Quad | Family::Triangle) => {
            let (v, c) = cylinder_mesh(length, height, center, radius, n_cells, family == Family::Triangle);
            PolygonalMesh::new(v, c)
        }
        (_, family) => Err(Error::Generate(format!("the {family} family is only available on rectangles"))),
    }
}

fn exact_sqrt(n: usize, message: &str) -> Result<usize> {
    let m = (n as f64).sqrt().round() as usize;
    if m * m == n {
        Ok(m)
    } else {
        Err(Error::Generate(format!("{message}, got {n}")))
    }
}

fn linspace(a: f64, b: f64, m: usize) -> Vec<f64> {
    (0..=m)
        .map(|i| if i == m { b } else { a + (b - a) * i as f64 / m as f64 })
        .collect()
}

/// Quads (or triangles split along the `ll -> ur` diagonal) of a tensor
/// grid, keeping the cells `(i, j)` accepted by `keep`. Vertices are
/// numbered row by row, skipping unused ones.
fn tensor_grid(
    xs: &[f64],
    ys: &[f64],
    keep: impl Fn(usize, usize) -> bool,
    triangles: bool,
) -> (Vec<Point>, Vec<Vec<usize>>) {
    let (nx, ny) = (xs.len() - 1, ys.len() - 1);
    let mut used = vec![false; xs.len() * ys.len()];
    let id = |i: usize, j: usize| j * xs.len() + i;
    for j in 0..ny {
        for i in 0..nx {
            if keep(i, j) {
                for (a, b) in [(i, j), (i + 1, j), (i + 1, j + 1), (i, j + 1)] {
                    used[id(a, b)] = true;
                }
            }
        }
    }
    let mut remap = vec![usize::MAX; used.len()];
    let mut vertices = Vec::new();
    for j in 0..=ny {
        for i in 0..=nx {
            if used[id(i, j)] {
                remap[id(i, j)] = vertices.len();
                vertices.push([xs[i], ys[j]]);
            }
        }
    }
    let mut cells = Vec::new();
    for j in 0..ny {
        for i in 0..nx {
            if !keep(i, j) {
                continue;
            }
            let q = [remap[id(i, j)], remap[id(i + 1, j)], remap[id(i + 1, j + 1)], remap[id(i, j + 1)]];
            if triangles {
                cells.push(vec![q[0], q[1], q[2]]);
                cells.push(vec![q[0], q[2], q[3]]);
            } else {
                cells.push(q.to_vec());
            }
        }
    }
    (vertices, cells)
}

/// `m × m` grid where every interior horizontal edge gets its midpoint
/// pushed up by `0.3·hy`, denting the cell above. The bottom row also gets a
/// quarter point on its top edge pushed down by `0.3·hy`.
fn nonconvex_grid(min: Point, max: Point, m: usize) -> (Vec<Point>, Vec<Vec<usize>>) {
    let xs = linspace(min[0], max[0], m);
    let ys = linspace(min[1], max[1], m);
    let hx = (max[0] - min[0]) / m as f64;
    let hy = (max[1] - min[1]) / m as f64;
    let mut vertices: Vec<Point> = Vec::new();
    let mut corner = vec![0; (m + 1) * (m + 1)];
    for j in 0..=m {
        for i in 0..=m {
            corner[j * (m + 1) + i] = vertices.len();
            vertices.push([xs[i], ys[j]]);
        }
    }
    // mid[j * m + i]: displaced midpoint of the bottom edge of cell (i, j), j >= 1
    let mut mid = vec![usize::MAX; m * (m + 1)];
    for j in 1..m {
        for i in 0..m {
            mid[j * m + i] = vertices.len();
            vertices.push([xs[i] + 0.5 * hx, ys[j] + 0.3 * hy]);
        }
    }
    let quarter: Vec<usize> = (0..m)
        .map(|i| {
            vertices.push([xs[i] + 0.25 * hx, ys[1] - 0.3 * hy]);
            vertices.len() - 1
        })
        .collect();
    let c = |i: usize, j: usize| corner[j * (m + 1) + i];
    let mut cells = Vec::with_capacity(m * m);
    for j in 0..m {
        for i in 0..m {
            let mut cell = vec![c(i, j)];
            if j == 1 {
                cell.push(quarter[i]);
            }
            if j >= 1 {
                cell.push(mid[j * m + i]);
            }
            cell.push(c(i + 1, j));
            cell.push(c(i + 1, j + 1));
            if j + 1 < m {
                cell.push(mid[(j + 1) * m + i]);
            }
            if j == 0 {
                cell.push(quarter[i]);
            }
            cell.push(c(i, j + 1));
            cells.push(cell);
        }
    }
    (vertices, cells)
}

fn subdivisions(len: f64, a: f64) -> usize {
    ((len / a).round() as usize).max(1)
}

fn breaks(points: &[f64], a: f64, middle: usize) -> Vec<f64> {
    let mut out = vec![points[0]];
    for k in 0..points.len() - 1 {
        let n = if k == 1 { middle } else { subdivisions(points[k + 1] - points[k], a) };
        let seg = linspace(points[k], points[k + 1], n);
        out.extend_from_slice(&seg[1..]);
    }
    out
}

fn cylinder_cell_count(length: f64, height: f64, center: Point, radius: f64, ns: usize) -> usize {
    let a = 4.0 * radius / ns as f64;
    let nx: usize = [center[0] - 2.0 * radius, length - center[0] - 2.0 * radius]
        .iter()
        .map(|&l| subdivisions(l, a))
        .sum::<usize>()
        + ns;
    let ny: usize = [center[1] - 2.0 * radius, height - center[1] - 2.0 * radius]
        .iter()
        .map(|&l| subdivisions(l, a))
        .sum::<usize>()
        + ns;
    nx * ny - ns * ns + 4 * ns * (ns / 2).max(1)
}

/// Tensor grid around the block `center ± 2·radius`, with an O-grid of
/// `4·ns` sectors and `ns / 2` layers between the block and the circle.
fn cylinder_mesh(
    length: f64,
    height: f64,
    center: Point,
    radius: f64,
    n_cells: usize,
    triangles: bool,
) -> (Vec<Point>, Vec<Vec<usize>>) {
    let per = if triangles { 2 } else { 1 };
    let mut ns = 2;
    let mut best = (usize::MAX, 2);
    while ns < 4096 {
        let count = per * cylinder_cell_count(length, height, center, radius, ns);
        best = best.min((count.abs_diff(n_cells), ns));
        if count > 2 * n_cells {
            break;
        }
        ns += 1;
    }
    let ns = best.1;
    let nr = (ns / 2).max(1);
    let a = 4.0 * radius / ns as f64;
    let (bx0, bx1) = (center[0] - 2.0 * radius, center[0] + 2.0 * radius);
    let (by0, by1) = (center[1] - 2.0 * radius, center[1] + 2.0 * radius);
    let xs = breaks(&[0.0, bx0, bx1, length], a, ns);
    let ys = breaks(&[0.0, by0, by1, height], a, ns);
    let ix0 = subdivisions(bx0, a);
    let iy0 = subdivisions(by0, a);
    let inside = |i: usize, j: usize| i >= ix0 && i < ix0 + ns && j >= iy0 && j < iy0 + ns;
    let (mut vertices, mut cells) = tensor_grid(&xs, &ys, |i, j| !inside(i, j), triangles);

    // tensor vertices on the block boundary, counter-clockwise from the lower left corner
    let lookup: HashMap<(u64, u64), usize> =
        vertices.iter().enumerate().map(|(k, p)| ((p[0].to_bits(), p[1].to_bits()), k)).collect();
    let mut ring = Vec::with_capacity(4 * ns);
    let walk = [(1i64, 0i64), (0, 1), (-1, 0), (0, -1)];
    let (mut i, mut j) = (ix0 as i64, iy0 as i64);
    for (di, dj) in walk {
        for _ in 0..ns {
            let p = [xs[i as usize], ys[j as usize]];
            ring.push(lookup[&(p[0].to_bits(), p[1].to_bits())]);
            i += di;
            j += dj;
        }
    }
    let sectors = 4 * ns;
    let mut layers: Vec<Vec<usize>> = Vec::with_capacity(nr + 1);
    for l in 0..nr {
        let t = l as f64 / nr as f64;
        let layer = (0..sectors)
            .map(|k| {
                let theta = -0.75 * PI + 2.0 * PI * k as f64 / sectors as f64;
                let c = [center[0] + radius * theta.cos(), center[1] + radius * theta.sin()];
                let s = vertices[ring[k]];
                vertices.push([c[0] + t * (s[0] - c[0]), c[1] + t * (s[1] - c[1])]);
                vertices.len() - 1
            })
            .collect();
        layers.push(layer);
    }
    layers.push(ring);
    for l in 0..nr {
        for k in 0..sectors {
            let k1 = (k + 1) % sectors;
            let mut q = [layers[l][k], layers[l + 1][k], layers[l + 1][k1], layers[l][k1]];
            let pts: Vec<Point> = q.iter().map(|&v| vertices[v]).collect();
            if area_centroid(&pts).0 < 0.0 {
                q.reverse();
            }
            if triangles {
                cells.push(vec![q[0], q[1], q[2]]);
                cells.push(vec![q[0], q[2], q[3]]);
            } else {
                cells.push(q.to_vec());
            }
        }
    }
    (vertices, cells)
}
