//! Polygonal meshes: validated representation, generators, boundary tagging,
//! quality reports and the mesh-json file format.

mod generate;
pub mod io;
mod quality;
mod tags;
mod voronoi;

use std::collections::HashMap;

use crate::{Error, Point, Result};

pub use generate::{generate, Domain, Family};
pub use quality::{kernel_polygon, quality, star_center, CellQuality, MeshQualityReport};
pub use tags::{Predicate, TagRule};

/// Tag given to boundary edges before any rule is applied.
pub const DEFAULT_TAG: &str = "boundary";

/// Cached geometric quantities of one cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellGeometry {
    pub centroid: Point,
    pub area: f64,
    /// Largest distance between two vertices.
    pub diameter: f64,
    /// A point from which the whole cell is visible; the centroid when it
    /// qualifies.
    pub kernel_point: Point,
}

/// A mesh edge shared by one or two cells.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Edge {
    /// Vertex indices with `vertices[0] < vertices[1]`.
    pub vertices: [usize; 2],
    /// Incident cells; `cells[1]` is `None` on the boundary.
    pub cells: [Option<usize>; 2],
    /// Index into [`PolygonalMesh::boundary_edges`].
    pub boundary: Option<usize>,
}

/// A boundary edge oriented counter-clockwise with respect to its cell.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryEdge {
    pub vertices: [usize; 2],
    pub cell: usize,
    /// Position of the edge in the cell's vertex loop.
    pub local: usize,
    pub edge: usize,
    pub tag: String,
}

/// Immutable polygonal mesh with counter-clockwise cells.
#[derive(Debug, Clone, PartialEq)]
pub struct PolygonalMesh {
    vertices: Vec<Point>,
    cells: Vec<Vec<usize>>,
    geometry: Vec<CellGeometry>,
    edges: Vec<Edge>,
    cell_edges: Vec<Vec<usize>>,
    boundary: Vec<BoundaryEdge>,
}

impl PolygonalMesh {
    /// Validates the cells and builds the edge structure. Every boundary edge
    /// starts with [`DEFAULT_TAG`].
    pub fn new(vertices: Vec<Point>, cells: Vec<Vec<usize>>) -> Result<Self> {
        for (c, cell) in cells.iter().enumerate() {
            if cell.len() < 3 {
                return Err(Error::InvalidMesh(format!("cell {c} has {} vertices", cell.len())));
            }
            if let Some(&v) = cell.iter().find(|&&v| v >= vertices.len()) {
                return Err(Error::InvalidMesh(format!(
                    "cell {c} references vertex {v} but there are {} vertices",
                    vertices.len()
                )));
            }
        }
        let mut geometry = Vec::with_capacity(cells.len());
        for (c, cell) in cells.iter().enumerate() {
            let pts: Vec<Point> = cell.iter().map(|&v| vertices[v]).collect();
            check_simple(c, &pts)?;
            let (area, centroid) = area_centroid(&pts);
            if area <= 0.0 {
                return Err(Error::InvalidMesh(format!("cell {c} has non-positive signed area {area:e}")));
            }
            let diameter = diameter(&pts);
            let kernel_point = star_center(&pts, centroid)
                .ok_or_else(|| Error::InvalidMesh(format!("cell {c} is not star-shaped")))?;
            geometry.push(CellGeometry { centroid, area, diameter, kernel_point });
        }

        let mut directed: HashMap<(usize, usize), (usize, usize)> = HashMap::new();
        let mut edges: Vec<Edge> = Vec::new();
        let mut index: HashMap<(usize, usize), usize> = HashMap::new();
        let mut cell_edges = Vec::with_capacity(cells.len());
        for (c, cell) in cells.iter().enumerate() {
            let n = cell.len();
            let mut local = Vec::with_capacity(n);
            for l in 0..n {
                let (a, b) = (cell[l], cell[(l + 1) % n]);
                if directed.insert((a, b), (c, l)).is_some() {
                    return Err(Error::InvalidMesh(format!(
                        "edge ({a}, {b}) appears twice with the same orientation"
                    )));
                }
                let key = (a.min(b), a.max(b));
                let e = *index.entry(key).or_insert_with(|| {
                    edges.push(Edge { vertices: [key.0, key.1], cells: [Some(c), None], boundary: None });
                    edges.len() - 1
                });
                if edges[e].cells[0] != Some(c) {
                    if edges[e].cells[1].is_some() {
                        return Err(Error::InvalidMesh(format!("edge ({a}, {b}) is shared by more than two cells")));
                    }
                    edges[e].cells[1] = Some(c);
                }
                local.push(e);
            }
            cell_edges.push(local);
        }

        let mut boundary = Vec::new();
        let mut degree: HashMap<usize, i64> = HashMap::new();
        for (e, edge) in edges.iter_mut().enumerate() {
            if edge.cells[1].is_some() {
                continue;
            }
            let c = edge.cells[0].expect("edge has a cell");
            let [a, b] = edge.vertices;
            let (vertices_oriented, local) = match directed.get(&(a, b)) {
                Some(&(cc, l)) if cc == c => ([a, b], l),
                _ => ([b, a], directed[&(b, a)].1),
            };
            *degree.entry(vertices_oriented[0]).or_default() += 1;
            *degree.entry(vertices_oriented[1]).or_default() -= 1;
            edge.boundary = Some(boundary.len());
            boundary.push(BoundaryEdge { vertices: vertices_oriented, cell: c, local, edge: e, tag: DEFAULT_TAG.into() });
        }
        if let Some((v, _)) = degree.iter().find(|(_, &d)| d != 0) {
            return Err(Error::InvalidMesh(format!("boundary is not a closed loop at vertex {v}")));
        }
        for (e, edge) in edges.iter().enumerate() {
            let [a, b] = edge.vertices;
            let (p, q) = (vertices[a], vertices[b]);
            if p == q {
                return Err(Error::InvalidMesh(format!("edge {e} ({a}, {b}) has zero length")));
            }
        }

        Ok(Self { vertices, cells, geometry, edges, cell_edges, boundary })
    }

    /// Builds a mesh and applies explicit boundary tags given as vertex
    /// pairs in either orientation. Unlisted boundary edges keep
    /// [`DEFAULT_TAG`].
    pub fn with_tags(vertices: Vec<Point>, cells: Vec<Vec<usize>>, tags: &[([usize; 2], String)]) -> Result<Self> {
        let mut mesh = Self::new(vertices, cells)?;
        let lookup: HashMap<(usize, usize), usize> = mesh
            .boundary
            .iter()
            .enumerate()
            .map(|(i, b)| ((b.vertices[0].min(b.vertices[1]), b.vertices[0].max(b.vertices[1])), i))
            .collect();
        for ([a, b], tag) in tags {
            let i = lookup.get(&((*a).min(*b), (*a).max(*b))).ok_or(Error::NotBoundaryEdge(*a, *b))?;
            mesh.boundary[*i].tag = tag.clone();
        }
        Ok(mesh)
    }

    /// Retags every boundary edge by the first rule whose predicate holds
    /// at the edge midpoint.
    pub fn tag_boundary(mut self, rules: &[TagRule]) -> Result<Self> {
        let mut untagged = Vec::new();
        for b in &mut self.boundary {
            let (p, q) = (self.vertices[b.vertices[0]], self.vertices[b.vertices[1]]);
            let mid = [0.5 * (p[0] + q[0]), 0.5 * (p[1] + q[1])];
            match rules.iter().find(|r| r.predicate.contains(mid)) {
                Some(rule) => b.tag = rule.tag.clone(),
                None => untagged.push((b.vertices[0], b.vertices[1])),
            }
        }
        if untagged.is_empty() {
            Ok(self)
        } else {
            Err(Error::UntaggedEdges(untagged))
        }
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    pub fn cells(&self) -> &[Vec<usize>] {
        &self.cells
    }

    pub fn num_cells(&self) -> usize {
        self.cells.len()
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn cell(&self, c: usize) -> &[usize] {
        &self.cells[c]
    }

    pub fn cell_points(&self, c: usize) -> Vec<Point> {
        self.cells[c].iter().map(|&v| self.vertices[v]).collect()
    }

    pub fn geometry(&self, c: usize) -> &CellGeometry {
        &self.geometry[c]
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    /// Global edge indices of a cell, in the order of its vertex loop.
    pub fn cell_edges(&self, c: usize) -> &[usize] {
        &self.cell_edges[c]
    }

    pub fn boundary_edges(&self) -> &[BoundaryEdge] {
        &self.boundary
    }

    /// Distinct boundary tags in order of first appearance.
    pub fn tags(&self) -> Vec<&str> {
        let mut out: Vec<&str> = Vec::new();
        for b in &self.boundary {
            if !out.contains(&b.tag.as_str()) {
                out.push(&b.tag);
            }
        }
        out
    }

    /// Mesh size `h = max_K h_K`.
    pub fn h(&self) -> f64 {
        self.geometry.iter().map(|g| g.diameter).fold(0.0, f64::max)
    }

    pub fn total_area(&self) -> f64 {
        self.geometry.iter().map(|g| g.area).sum()
    }

    pub fn edge_length(&self, e: usize) -> f64 {
        let [a, b] = self.edges[e].vertices;
        dist(self.vertices[a], self.vertices[b])
    }

    /// Outward unit normal of a boundary edge.
    pub fn boundary_normal(&self, b: usize) -> Point {
        let [i, j] = self.boundary[b].vertices;
        outward_normal(self.vertices[i], self.vertices[j])
    }
}

pub(crate) fn dist(a: Point, b: Point) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

/// Outward unit normal of the counter-clockwise edge `a -> b`.
pub fn outward_normal(a: Point, b: Point) -> Point {
    let (dx, dy) = (b[0] - a[0], b[1] - a[1]);
    let len = dx.hypot(dy);
    [dy / len, -dx / len]
}

/// Signed area and centroid of a polygon.
pub fn area_centroid(pts: &[Point]) -> (f64, Point) {
    let n = pts.len();
    let (mut a2, mut cx, mut cy) = (0.0, 0.0, 0.0);
    // relative to the first vertex
    let o = pts[0];
    for i in 0..n {
        let p = [pts[i][0] - o[0], pts[i][1] - o[1]];
        let q = [pts[(i + 1) % n][0] - o[0], pts[(i + 1) % n][1] - o[1]];
        let cross = p[0] * q[1] - q[0] * p[1];
        a2 += cross;
        cx += (p[0] + q[0]) * cross;
        cy += (p[1] + q[1]) * cross;
    }
    let area = 0.5 * a2;
    if a2 == 0.0 {
        return (0.0, o);
    }
    (area, [o[0] + cx / (3.0 * a2), o[1] + cy / (3.0 * a2)])
}

pub fn diameter(pts: &[Point]) -> f64 {
    let mut d: f64 = 0.0;
    for i in 0..pts.len() {
        for j in i + 1..pts.len() {
            d = d.max(dist(pts[i], pts[j]));
        }
    }
    d
}

fn check_simple(c: usize, pts: &[Point]) -> Result<()> {
    let n = pts.len();
    for i in 0..n {
        if pts[i] == pts[(i + 1) % n] {
            return Err(Error::InvalidMesh(format!("cell {c} has a zero-length edge")));
        }
    }
    for i in 0..n {
        for j in i + 1..n {
            // adjacent edges share a vertex
            if j == i + 1 || (i == 0 && j == n - 1) {
                continue;
            }
            if segments_intersect(pts[i], pts[(i + 1) % n], pts[j], pts[(j + 1) % n]) {
                return Err(Error::InvalidMesh(format!("cell {c} is self-intersecting")));
            }
        }
    }
    Ok(())
}

fn orient(a: Point, b: Point, c: Point) -> f64 {
    (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
}

fn segments_intersect(p1: Point, p2: Point, q1: Point, q2: Point) -> bool {
    let d1 = orient(q1, q2, p1);
    let d2 = orient(q1, q2, p2);
    let d3 = orient(p1, p2, q1);
    let d4 = orient(p1, p2, q2);
    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0)) && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0)) {
        return true;
    }
    let on = |a: Point, b: Point, p: Point| {
        p[0] >= a[0].min(b[0]) && p[0] <= a[0].max(b[0]) && p[1] >= a[1].min(b[1]) && p[1] <= a[1].max(b[1])
    };
    (d1 == 0.0 && on(q1, q2, p1))
        || (d2 == 0.0 && on(q1, q2, p2))
        || (d3 == 0.0 && on(p1, p2, q1))
        || (d4 == 0.0 && on(p1, p2, q2))
}
