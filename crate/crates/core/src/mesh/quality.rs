use super::{dist, PolygonalMesh};
use crate::Point;

/// Shape measures of one cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellQuality {
    /// Shortest edge over diameter.
    pub edge_ratio: f64,
    /// Radius of the largest disk inside the kernel, over diameter.
    pub kernel_radius_ratio: f64,
    pub star_shaped: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MeshQualityReport {
    pub cells: Vec<CellQuality>,
}

impl MeshQualityReport {
    pub fn min_edge_ratio(&self) -> f64 {
        self.cells.iter().map(|c| c.edge_ratio).fold(f64::INFINITY, f64::min)
    }

    pub fn min_kernel_radius_ratio(&self) -> f64 {
        self.cells.iter().map(|c| c.kernel_radius_ratio).fold(f64::INFINITY, f64::min)
    }

    pub fn all_star_shaped(&self) -> bool {
        self.cells.iter().all(|c| c.star_shaped)
    }
}

pub fn quality(mesh: &PolygonalMesh) -> MeshQualityReport {
    let cells = (0..mesh.num_cells())
        .map(|c| {
            let pts = mesh.cell_points(c);
            let h = mesh.geometry(c).diameter;
            let n = pts.len();
            let min_edge = (0..n).map(|i| dist(pts[i], pts[(i + 1) % n])).fold(f64::INFINITY, f64::min);
            let (_, r) = chebyshev_center(&pts).unwrap_or(([0.0, 0.0], 0.0));
            CellQuality { edge_ratio: min_edge / h, kernel_radius_ratio: r / h, star_shaped: r > 0.0 }
        })
        .collect();
    MeshQualityReport { cells }
}

/// Inward half-planes `n·x >= c` of a counter-clockwise polygon, with unit `n`.
fn half_planes(pts: &[Point]) -> Vec<(Point, f64)> {
    let n = pts.len();
    (0..n)
        .map(|i| {
            let (a, b) = (pts[i], pts[(i + 1) % n]);
            let len = dist(a, b);
            let normal = [-(b[1] - a[1]) / len, (b[0] - a[0]) / len];
            (normal, normal[0] * a[0] + normal[1] * a[1])
        })
        .collect()
}

/// Kernel of a polygon (the set of points that see every boundary point),
/// as a counter-clockwise convex polygon. Empty when the polygon is not
/// star-shaped.
pub fn kernel_polygon(pts: &[Point]) -> Vec<Point> {
    let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
    for p in pts {
        for d in 0..2 {
            lo[d] = lo[d].min(p[d]);
            hi[d] = hi[d].max(p[d]);
        }
    }
    let mut poly = vec![[lo[0], lo[1]], [hi[0], lo[1]], [hi[0], hi[1]], [lo[0], hi[1]]];
    for (n, c) in half_planes(pts) {
        let side = |p: Point| n[0] * p[0] + n[1] * p[1] - c;
        let mut next = Vec::with_capacity(poly.len() + 1);
        for i in 0..poly.len() {
            let (p, q) = (poly[i], poly[(i + 1) % poly.len()]);
            let (sp, sq) = (side(p), side(q));
            if sp >= 0.0 {
                next.push(p);
            }
            if (sp >= 0.0) != (sq >= 0.0) {
                let t = sp / (sp - sq);
                next.push([p[0] + t * (q[0] - p[0]), p[1] + t * (q[1] - p[1])]);
            }
        }
        poly = next;
        if poly.is_empty() {
            break;
        }
    }
    poly
}

/// Centre and radius of the largest disk inside the kernel, by enumerating
/// the vertices of the linear program `max r : n_i·x - r >= c_i`.
fn chebyshev_center(pts: &[Point]) -> Option<(Point, f64)> {
    let planes = half_planes(pts);
    let m = planes.len();
    let scale = super::diameter(pts);
    let tol = 1e-12 * scale;
    let mut best: Option<(Point, f64)> = None;
    for i in 0..m {
        for j in i + 1..m {
            for k in j + 1..m {
                let rows = [planes[i], planes[j], planes[k]];
                let Some((x, r)) = solve3(rows) else { continue };
                if r < best.map_or(0.0, |b| b.1) + tol {
                    continue;
                }
                if planes.iter().all(|(n, c)| n[0] * x[0] + n[1] * x[1] - r >= c - tol) {
                    best = Some((x, r));
                }
            }
        }
    }
    best
}

fn solve3(rows: [(Point, f64); 3]) -> Option<(Point, f64)> {
    let a = nalgebra::Matrix3::from_fn(|i, j| if j < 2 { rows[i].0[j] } else { -1.0 });
    let b = nalgebra::Vector3::new(rows[0].1, rows[1].1, rows[2].1);
    let lu = a.lu();
    if lu.determinant().abs() < 1e-12 {
        return None;
    }
    let s = lu.solve(&b)?;
    Some(([s[0], s[1]], s[2]))
}

/// A point from which the whole polygon is visible: the centroid when it
/// lies strictly inside the kernel, otherwise the kernel's Chebyshev centre.
pub fn star_center(pts: &[Point], centroid: Point) -> Option<Point> {
    let tol = 1e-10 * super::diameter(pts);
    if half_planes(pts).iter().all(|(n, c)| n[0] * centroid[0] + n[1] * centroid[1] - c > tol) {
        return Some(centroid);
    }
    chebyshev_center(pts).filter(|&(_, r)| r > tol).map(|(x, _)| x)
}
