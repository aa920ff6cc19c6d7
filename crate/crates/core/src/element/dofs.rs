use crate::polyspace::{dim, lobatto_interior, QuadratureRule};
use crate::{Error, Point, Result};

/// Local degrees of freedom of the velocity space on one cell.
///
/// Order: two values per vertex, two values per interior edge node (edges in
/// loop order, nodes from the edge start), complement moments
/// `|K|⁻¹ ∫ v·x^⊥ m_β` for `|β| <= k - 3`, divergence moments
/// `h_K |K|⁻¹ ∫ div v (m_γ - mean m_γ)` for `1 <= |γ| <= k - 1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DofLayout {
    pub k: usize,
    pub n_vertices: usize,
}

impl DofLayout {
    pub fn new(n_vertices: usize, k: usize) -> Result<Self> {
        if k < 2 {
            return Err(Error::UnsupportedOrder(k));
        }
        Ok(Self { k, n_vertices })
    }

    pub fn vertex(&self, j: usize, c: usize) -> usize {
        2 * j + c
    }

    pub fn edge(&self, l: usize, m: usize, c: usize) -> usize {
        2 * self.n_vertices + 2 * (self.k - 1) * l + 2 * m + c
    }

    /// DOF pair of node `m` on local edge `l`, where node 0 is the start
    /// vertex and node `k` the end vertex.
    pub fn edge_node(&self, l: usize, m: usize) -> [usize; 2] {
        if m == 0 {
            [self.vertex(l, 0), self.vertex(l, 1)]
        } else if m == self.k {
            let j = (l + 1) % self.n_vertices;
            [self.vertex(j, 0), self.vertex(j, 1)]
        } else {
            [self.edge(l, m - 1, 0), self.edge(l, m - 1, 1)]
        }
    }

    /// Number of DOFs living on the cell boundary.
    pub fn boundary_len(&self) -> usize {
        2 * self.n_vertices * self.k
    }

    pub fn complement_start(&self) -> usize {
        self.boundary_len()
    }

    pub fn complement_count(&self) -> usize {
        if self.k >= 3 {
            dim(self.k - 3)
        } else {
            0
        }
    }

    pub fn divergence_start(&self) -> usize {
        self.complement_start() + self.complement_count()
    }

    pub fn divergence_count(&self) -> usize {
        dim(self.k - 1) - 1
    }

    pub fn interior_len(&self) -> usize {
        self.complement_count() + self.divergence_count()
    }

    pub fn len(&self) -> usize {
        self.boundary_len() + self.interior_len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn pressure_len(&self) -> usize {
        dim(self.k - 1)
    }
}

/// Geometry, quadrature and trace interpolation of one cell edge.
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeData {
    pub a: Point,
    pub b: Point,
    pub length: f64,
    /// Outward unit normal.
    pub normal: Point,
    pub rule: QuadratureRule,
    /// `lagrange[q][m]`: value at quadrature point `q` of the Lagrange
    /// polynomial of edge node `m`.
    pub lagrange: Vec<Vec<f64>>,
    /// DOF pair of each edge node.
    pub nodes: Vec<[usize; 2]>,
}

impl EdgeData {
    pub fn new(layout: &DofLayout, l: usize, a: Point, b: Point, n_points: usize) -> Self {
        let k = layout.k;
        let mut params = vec![0.0];
        params.extend(lobatto_interior(k));
        params.push(1.0);
        let rule = QuadratureRule::segment(a, b, n_points);
        let (gauss, _) = crate::polyspace::gauss_legendre(n_points);
        let lagrange = gauss.iter().map(|s| lagrange_values(&params, 0.5 * (s + 1.0))).collect();
        let nodes = (0..=k).map(|m| layout.edge_node(l, m)).collect();
        let normal = crate::mesh::outward_normal(a, b);
        let length = (b[0] - a[0]).hypot(b[1] - a[1]);
        Self { a, b, length, normal, rule, lagrange, nodes }
    }

    /// Point at parameter `t` of the edge node `m`.
    pub fn node_point(&self, k: usize, m: usize) -> Point {
        let t = if m == 0 {
            0.0
        } else if m == k {
            1.0
        } else {
            lobatto_interior(k)[m - 1]
        };
        [self.a[0] + t * (self.b[0] - self.a[0]), self.a[1] + t * (self.b[1] - self.a[1])]
    }

    /// Trace of the DOF vector `v` at quadrature point `q`.
    pub fn trace(&self, q: usize, v: &[f64]) -> Point {
        let mut out = [0.0; 2];
        for (m, node) in self.nodes.iter().enumerate() {
            let w = self.lagrange[q][m];
            out[0] += w * v[node[0]];
            out[1] += w * v[node[1]];
        }
        out
    }
}

/// Values at `t` of the Lagrange polynomials on `nodes`.
pub fn lagrange_values(nodes: &[f64], t: f64) -> Vec<f64> {
    (0..nodes.len())
        .map(|i| {
            nodes
                .iter()
                .enumerate()
                .filter(|&(j, _)| j != i)
                .map(|(_, &xj)| (t - xj) / (nodes[i] - xj))
                .product()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn counts() {
        assert_eq!(DofLayout::new(3, 2).unwrap().len(), 14);
        assert_eq!(DofLayout::new(4, 2).unwrap().len(), 18);
        assert_eq!(DofLayout::new(4, 2).unwrap().pressure_len(), 3);
        let l3 = DofLayout::new(4, 3).unwrap();
        assert_eq!(l3.complement_count(), 1);
        assert_eq!(l3.divergence_count(), 5);
        assert_eq!(l3.len(), 2 * 4 * 3 + 1 + 5);
        assert!(matches!(DofLayout::new(4, 1), Err(Error::UnsupportedOrder(1))));
    }

    #[test]
    fn edge_nodes_wrap_around() {
        let l = DofLayout::new(3, 3).unwrap();
        assert_eq!(l.edge_node(2, 0), [4, 5]);
        assert_eq!(l.edge_node(2, 3), [0, 1]);
        assert_eq!(l.edge_node(0, 1), [6, 7]);
        assert_eq!(l.edge_node(1, 2), [12, 13]);
    }

    #[test]
    fn lagrange_partition_of_unity() {
        let nodes = [0.0, 0.3, 0.7, 1.0];
        let v = lagrange_values(&nodes, 0.42);
        assert!((v.iter().sum::<f64>() - 1.0).abs() < 1e-14);
        let at_node = lagrange_values(&nodes, 0.7);
        assert_eq!(at_node[2], 1.0);
    }
}
