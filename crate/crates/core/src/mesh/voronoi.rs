//! Bounded centroidal Voronoi meshes of a rectangle.
//!
//! Seeds are mirrored across the four sides, so the Voronoi cells of the
//! original seeds are exactly the clipped cells.

use delaunator::{next_halfedge, triangulate, EMPTY};
use rand_chacha::rand_core::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::area_centroid;
use crate::{Error, Point, Result};

pub const LLOYD_ITERATIONS: usize = 20;

struct Diagram {
    circumcenters: Vec<Point>,
    /// Triangles around each original seed, in cyclic order.
    loops: Vec<Vec<usize>>,
    halfedges: Vec<usize>,
}

fn uniform(rng: &mut ChaCha8Rng) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

pub(super) fn lloyd_voronoi(min: Point, max: Point, n: usize, seed: u64) -> Result<(Vec<Point>, Vec<Vec<usize>>)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut seeds: Vec<Point> = (0..n)
        .map(|_| {
            let (u, v) = (uniform(&mut rng), uniform(&mut rng));
            [min[0] + u * (max[0] - min[0]), min[1] + v * (max[1] - min[1])]
        })
        .collect();
    for _ in 0..LLOYD_ITERATIONS {
        let diagram = diagram(&seeds, min, max)?;
        for (s, lp) in seeds.iter_mut().zip(&diagram.loops) {
            let pts: Vec<Point> = lp.iter().map(|&t| clamp(diagram.circumcenters[t], min, max)).collect();
            let (area, centroid) = area_centroid(&pts);
            if area.abs() > 0.0 {
                *s = centroid;
            }
        }
    }
    let diagram = diagram(&seeds, min, max)?;
    Ok(build_mesh(&diagram, min, max))
}

fn clamp(p: Point, min: Point, max: Point) -> Point {
    [p[0].clamp(min[0], max[0]), p[1].clamp(min[1], max[1])]
}

fn diagram(seeds: &[Point], min: Point, max: Point) -> Result<Diagram> {
    let n = seeds.len();
    let mut points: Vec<delaunator::Point> = Vec::with_capacity(5 * n);
    points.extend(seeds.iter().map(|p| delaunator::Point { x: p[0], y: p[1] }));
    for p in seeds {
        points.push(delaunator::Point { x: 2.0 * min[0] - p[0], y: p[1] });
        points.push(delaunator::Point { x: 2.0 * max[0] - p[0], y: p[1] });
        points.push(delaunator::Point { x: p[0], y: 2.0 * min[1] - p[1] });
        points.push(delaunator::Point { x: p[0], y: 2.0 * max[1] - p[1] });
    }
    let tri = triangulate(&points);
    if tri.is_empty() {
        return Err(Error::Generate("Delaunay triangulation of the seeds is empty".into()));
    }
    let circumcenters: Vec<Point> = (0..tri.len())
        .map(|t| {
            let [a, b, c] = [0, 1, 2].map(|k| &points[tri.triangles[3 * t + k]]);
            circumcenter([a.x, a.y], [b.x, b.y], [c.x, c.y])
        })
        .collect();
    let mut incoming = vec![EMPTY; n];
    for e in 0..tri.triangles.len() {
        let p = tri.triangles[next_halfedge(e)];
        if p < n && incoming[p] == EMPTY {
            incoming[p] = e;
        }
    }
    let mut loops = Vec::with_capacity(n);
    for (i, &start) in incoming.iter().enumerate() {
        if start == EMPTY {
            return Err(Error::Generate(format!("seed {i} is missing from the triangulation")));
        }
        let mut lp = Vec::new();
        let mut e = start;
        loop {
            lp.push(e / 3);
            e = tri.halfedges[next_halfedge(e)];
            if e == EMPTY {
                return Err(Error::Generate(format!("seed {i} lies on the hull")));
            }
            if e == start {
                break;
            }
        }
        let pts: Vec<Point> = lp.iter().map(|&t| circumcenters[t]).collect();
        if area_centroid(&pts).0 < 0.0 {
            lp.reverse();
        }
        loops.push(lp);
    }
    Ok(Diagram { circumcenters, loops, halfedges: tri.halfedges })
}

fn circumcenter(a: Point, b: Point, c: Point) -> Point {
    let (bx, by) = (b[0] - a[0], b[1] - a[1]);
    let (cx, cy) = (c[0] - a[0], c[1] - a[1]);
    let d = 2.0 * (bx * cy - by * cx);
    let (b2, c2) = (bx * bx + by * by, cx * cx + cy * cy);
    [a[0] + (cy * b2 - by * c2) / d, a[1] + (bx * c2 - cx * b2) / d]
}

fn find(parent: &mut [usize], mut x: usize) -> usize {
    while parent[x] != x {
        parent[x] = parent[parent[x]];
        x = parent[x];
    }
    x
}

/// Merges coincident circumcenters, snaps to the rectangle and compacts the
/// vertex numbering in order of first use.
fn build_mesh(d: &Diagram, min: Point, max: Point) -> (Vec<Point>, Vec<Vec<usize>>) {
    let scale = (max[0] - min[0]).max(max[1] - min[1]);
    let tol = 1e-10 * scale;
    let nt = d.circumcenters.len();
    let mut parent: Vec<usize> = (0..nt).collect();
    for (e, &twin) in d.halfedges.iter().enumerate() {
        if twin == EMPTY {
            continue;
        }
        let (s, t) = (e / 3, twin / 3);
        let (p, q) = (d.circumcenters[s], d.circumcenters[t]);
        if (p[0] - q[0]).hypot(p[1] - q[1]) < tol {
            let (rs, rt) = (find(&mut parent, s), find(&mut parent, t));
            if rs != rt {
                parent[rs.max(rt)] = rs.min(rt);
            }
        }
    }
    let snap = |v: f64, lo: f64, hi: f64| {
        if (v - lo).abs() < tol {
            lo
        } else if (v - hi).abs() < tol {
            hi
        } else {
            v
        }
    };
    let mut index = vec![usize::MAX; nt];
    let mut vertices = Vec::new();
    let mut cells = Vec::with_capacity(d.loops.len());
    for lp in &d.loops {
        let mut cell: Vec<usize> = Vec::with_capacity(lp.len());
        for &t in lp {
            let r = find(&mut parent, t);
            if index[r] == usize::MAX {
                index[r] = vertices.len();
                let p = d.circumcenters[r];
                vertices.push([snap(p[0], min[0], max[0]), snap(p[1], min[1], max[1])]);
            }
            let v = index[r];
            if cell.last() != Some(&v) {
                cell.push(v);
            }
        }
        while cell.len() > 1 && cell.first() == cell.last() {
            cell.pop();
        }
        cells.push(cell);
    }
    (vertices, cells)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{generate, quality, Domain, Family};

    #[test]
    fn four_cells_partition_the_square() {
        let m = generate(Family::Voronoi, 4, 0, &Domain::unit_square()).unwrap();
        assert_eq!(m.num_cells(), 4);
        assert!((m.total_area() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn lloyd_is_deterministic() {
        let a = generate(Family::Voronoi, 64, 42, &Domain::unit_square()).unwrap();
        let b = generate(Family::Voronoi, 64, 42, &Domain::unit_square()).unwrap();
        assert_eq!(a.vertices(), b.vertices());
        assert_eq!(a.cells(), b.cells());
        let c = generate(Family::Voronoi, 64, 43, &Domain::unit_square()).unwrap();
        assert_ne!(a.vertices(), c.vertices());
    }

    #[test]
    fn cells_are_convex_and_cover_rectangle() {
        let dom = Domain::Rect { min: [-1.0, 0.5], max: [2.0, 1.5] };
        let m = generate(Family::Voronoi, 256, 3, &dom).unwrap();
        assert_eq!(m.num_cells(), 256);
        assert!((m.total_area() - 3.0).abs() < 1e-10 * 3.0);
        assert!(quality(&m).all_star_shaped());
        for b in m.boundary_edges() {
            let (p, q) = (m.vertices()[b.vertices[0]], m.vertices()[b.vertices[1]]);
            let on_side = (p[0] == q[0] && (p[0] == -1.0 || p[0] == 2.0)) || (p[1] == q[1] && (p[1] == 0.5 || p[1] == 1.5));
            assert!(on_side, "{p:?} {q:?}");
        }
    }

    #[test]
    fn circumcenter_of_right_triangle() {
        assert_eq!(circumcenter([0.0, 0.0], [2.0, 0.0], [0.0, 2.0]), [1.0, 1.0]);
    }
}
