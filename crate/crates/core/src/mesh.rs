//! Structured right-angled triangulation of the unit square.
//!
//! Node `(i, j)` sits at `(i/m, j/m)` with index `j (m+1) + i`. Grid cell
//! `(i, j)` is split along its `(i,j)–(i+1,j+1)` diagonal into elements
//! `2 (j m + i)` (below the diagonal) and `2 (j m + i) + 1` (above it).

use std::sync::OnceLock;

use crate::error::{Error, Result};
use crate::fem::Pattern;
use crate::scalar::Scalar;
use crate::tensor::Vector;

#[derive(Debug, Clone)]
pub struct Mesh<T> {
    m: usize,
    nodes: Vec<[T; 2]>,
    elements: Vec<[usize; 3]>,
    boundary: Vec<bool>,
    /// Gradients of the three local hat functions, constant per element.
    grads: Vec<[[T; 2]; 3]>,
    centroids: Vec<[T; 2]>,
    area: T,
    dof_of_node: Vec<Option<usize>>,
    node_of_dof: Vec<usize>,
    /// Sparsity patterns over interior nodes and over all nodes, built on demand.
    patterns: [OnceLock<Pattern>; 2],
}

impl<T: Scalar> Mesh<T> {
    pub fn new(m: usize) -> Result<Self> {
        if m < 2 {
            return Err(Error::MeshTooCoarse(m));
        }
        let np = m + 1;
        let h = T::one() / T::from_count(m);
        let mut nodes = Vec::with_capacity(np * np);
        let mut boundary = Vec::with_capacity(np * np);
        for j in 0..np {
            for i in 0..np {
                nodes.push([T::from_count(i) * h, T::from_count(j) * h]);
                boundary.push(i == 0 || j == 0 || i == m || j == m);
            }
        }
        let idx = |i: usize, j: usize| j * np + i;
        let mut elements = Vec::with_capacity(2 * m * m);
        for j in 0..m {
            for i in 0..m {
                let (n00, n10, n11, n01) = (idx(i, j), idx(i + 1, j), idx(i + 1, j + 1), idx(i, j + 1));
                elements.push([n00, n10, n11]);
                elements.push([n00, n11, n01]);
            }
        }

        let third = T::one() / T::lit(3.0);
        let mut grads = Vec::with_capacity(elements.len());
        let mut centroids = Vec::with_capacity(elements.len());
        for tri in &elements {
            let p = tri.map(|n| nodes[n]);
            let det = (p[1][0] - p[0][0]) * (p[2][1] - p[0][1]) - (p[2][0] - p[0][0]) * (p[1][1] - p[0][1]);
            let mut g = [[T::zero(); 2]; 3];
            for a in 0..3 {
                let (b, c) = ((a + 1) % 3, (a + 2) % 3);
                g[a] = [(p[b][1] - p[c][1]) / det, (p[c][0] - p[b][0]) / det];
            }
            grads.push(g);
            centroids.push([
                (p[0][0] + p[1][0] + p[2][0]) * third,
                (p[0][1] + p[1][1] + p[2][1]) * third,
            ]);
        }

        let mut dof_of_node = vec![None; nodes.len()];
        let mut node_of_dof = Vec::new();
        for (n, &b) in boundary.iter().enumerate() {
            if !b {
                dof_of_node[n] = Some(node_of_dof.len());
                node_of_dof.push(n);
            }
        }

        Ok(Self {
            m,
            nodes,
            elements,
            boundary,
            grads,
            centroids,
            area: h * h * T::lit(0.5),
            dof_of_node,
            node_of_dof,
            patterns: [OnceLock::new(), OnceLock::new()],
        })
    }

    pub fn resolution(&self) -> usize {
        self.m
    }

    pub fn num_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn num_elements(&self) -> usize {
        self.elements.len()
    }

    pub fn num_interior(&self) -> usize {
        self.node_of_dof.len()
    }

    pub fn nodes(&self) -> &[[T; 2]] {
        &self.nodes
    }

    pub fn node(&self, n: usize) -> [T; 2] {
        self.nodes[n]
    }

    pub fn elements(&self) -> &[[usize; 3]] {
        &self.elements
    }

    pub fn element(&self, e: usize) -> [usize; 3] {
        self.elements[e]
    }

    pub fn is_boundary(&self, n: usize) -> bool {
        self.boundary[n]
    }

    pub fn boundary_mask(&self) -> &[bool] {
        &self.boundary
    }

    /// Area of element `e` (all elements are congruent).
    pub fn area(&self, _e: usize) -> T {
        self.area
    }

    /// Signed area computed from the vertex coordinates.
    pub fn signed_area(&self, e: usize) -> T {
        let p = self.elements[e].map(|n| self.nodes[n]);
        T::lit(0.5) * ((p[1][0] - p[0][0]) * (p[2][1] - p[0][1]) - (p[2][0] - p[0][0]) * (p[1][1] - p[0][1]))
    }

    pub fn centroid(&self, e: usize) -> [T; 2] {
        self.centroids[e]
    }

    pub fn shape_gradients(&self, e: usize) -> &[[T; 2]; 3] {
        &self.grads[e]
    }

    pub fn dof_of_node(&self, n: usize) -> Option<usize> {
        self.dof_of_node[n]
    }

    pub fn node_of_dof(&self, d: usize) -> usize {
        self.node_of_dof[d]
    }

    pub(crate) fn pattern(&self, with_boundary: bool) -> &Pattern {
        self.patterns[usize::from(with_boundary)].get_or_init(|| Pattern::build(self, with_boundary))
    }

    /// Constant gradient of the P1 interpolant of `field` on element `e`.
    pub fn gradient(&self, e: usize, field: &[T]) -> Vector<T> {
        let g = &self.grads[e];
        let tri = self.elements[e];
        let mut out = [T::zero(); 2];
        for a in 0..3 {
            out[0] += field[tri[a]] * g[a][0];
            out[1] += field[tri[a]] * g[a][1];
        }
        Vector::from_slice(&out)
    }

    /// Value of the P1 interpolant of `field` at the centroid of `e`.
    pub fn centroid_value(&self, e: usize, field: &[T]) -> T {
        let tri = self.elements[e];
        (field[tri[0]] + field[tri[1]] + field[tri[2]]) / T::lit(3.0)
    }

    /// Element containing the point `(x, y)`, using the half-open cell
    /// convention with the last row and column closed.
    pub fn locate(&self, x: T, y: T) -> usize {
        let mf = T::from_count(self.m);
        let cell = |t: T| (t * mf).floor().to_usize().unwrap_or(0).min(self.m - 1);
        let (i, j) = (cell(x), cell(y));
        let fx = x * mf - T::from_count(i);
        let fy = y * mf - T::from_count(j);
        2 * (j * self.m + i) + usize::from(fy > fx)
    }

    /// Nodal interpolant of `f`; boundary nodes are left as evaluated.
    pub fn interpolate(&self, f: impl Fn(T, T) -> T) -> Vec<T> {
        self.nodes.iter().map(|p| f(p[0], p[1])).collect()
    }

    /// Per-element values of `f` at centroids.
    pub fn sample_centroids(&self, f: impl Fn(T, T) -> T) -> Vec<T> {
        self.centroids.iter().map(|p| f(p[0], p[1])).collect()
    }

    /// Elements whose centroid satisfies `pred`.
    pub fn elements_where(&self, pred: impl Fn(T, T) -> bool) -> Vec<usize> {
        (0..self.num_elements())
            .filter(|&e| {
                let c = self.centroids[e];
                pred(c[0], c[1])
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn counts() {
        let m2 = Mesh::<f64>::new(2).unwrap();
        assert_eq!((m2.num_nodes(), m2.num_elements()), (9, 8));
        assert_eq!(m2.boundary_mask().iter().filter(|&&b| b).count(), 8);
        let m4 = Mesh::<f64>::new(4).unwrap();
        assert_eq!((m4.num_nodes(), m4.num_elements()), (25, 32));
        assert!(matches!(Mesh::<f64>::new(1), Err(Error::MeshTooCoarse(1))));
    }

    #[test]
    fn orientation_and_area() {
        let mesh = Mesh::<f64>::new(7).unwrap();
        let mut total = 0.0;
        for e in 0..mesh.num_elements() {
            let a = mesh.signed_area(e);
            assert!((a - 1.0 / 98.0).abs() < 1e-15);
            total += a;
        }
        assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn interior_edges_shared_twice() {
        let mesh = Mesh::<f64>::new(5).unwrap();
        let mut count = std::collections::HashMap::new();
        for tri in mesh.elements() {
            for a in 0..3 {
                let (p, q) = (tri[a], tri[(a + 1) % 3]);
                *count.entry((p.min(q), p.max(q))).or_insert(0) += 1;
            }
        }
        for ((p, q), c) in count {
            let on_boundary = mesh.is_boundary(p) && mesh.is_boundary(q) && {
                let (a, b) = (mesh.node(p), mesh.node(q));
                (a[0] == b[0] && (a[0] == 0.0 || a[0] == 1.0)) || (a[1] == b[1] && (a[1] == 0.0 || a[1] == 1.0))
            };
            assert_eq!(c, if on_boundary { 1 } else { 2 });
        }
    }

    #[test]
    fn locate_finds_centroids() {
        let mesh = Mesh::<f64>::new(6).unwrap();
        for e in 0..mesh.num_elements() {
            let c = mesh.centroid(e);
            assert_eq!(mesh.locate(c[0], c[1]), e);
        }
    }

    #[test]
    fn gradient_of_linear_field_is_exact() {
        let mesh = Mesh::<f64>::new(4).unwrap();
        let f = mesh.interpolate(|x, y| 2.0 * x - 3.0 * y);
        for e in 0..mesh.num_elements() {
            let g = mesh.gradient(e, &f);
            assert!((g.get(0) - 2.0).abs() < 1e-13 && (g.get(1) + 3.0).abs() < 1e-13);
        }
    }
}
