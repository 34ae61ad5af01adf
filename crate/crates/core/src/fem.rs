//! P1 assembly with element-wise constant matrix coefficients, load vectors,
//! and discrete norms.
//!
//! Reaction terms and scalar loads use the one-point centroid rule, the same
//! quadrature that samples the pointwise problem data. The stiffness part is
//! exact for P1 with constant coefficients.

use std::ops::Deref;

use crate::error::{check_len, Error, Result};
use crate::mesh::Mesh;
use crate::scalar::Scalar;
use crate::sparse::{pcg, CgOptions, CgStats, CsrMatrix};
use crate::tensor::{Mat, SpdMatrix};

/// One coefficient matrix per element.
pub type ElementMatrixField<T> = Vec<SpdMatrix<T>>;

const NONE: usize = usize::MAX;

/// CSR sparsity of the P1 operator plus, for every element, the value slot of
/// each local `(a, b)` pair (`NONE` where a node is eliminated).
#[derive(Debug, Clone)]
pub(crate) struct Pattern {
    n: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    slots: Vec<[[usize; 3]; 3]>,
}

impl Pattern {
    pub(crate) fn build<T: Scalar>(mesh: &Mesh<T>, with_boundary: bool) -> Self {
        let map = |node: usize| if with_boundary { Some(node) } else { mesh.dof_of_node(node) };
        let n = if with_boundary { mesh.num_nodes() } else { mesh.num_interior() };
        let mut rows: Vec<Vec<usize>> = vec![Vec::with_capacity(7); n];
        for tri in mesh.elements() {
            for &p in tri {
                let Some(i) = map(p) else { continue };
                rows[i].extend(tri.iter().filter_map(|&q| map(q)));
            }
        }
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut cols = Vec::new();
        row_ptr.push(0);
        for row in &mut rows {
            row.sort_unstable();
            row.dedup();
            cols.extend_from_slice(row);
            row_ptr.push(cols.len());
        }
        let find = |i: usize, j: usize| {
            let start = row_ptr[i];
            start + cols[start..row_ptr[i + 1]].binary_search(&j).expect("pattern covers element couplings")
        };
        let slots = mesh
            .elements()
            .iter()
            .map(|tri| {
                let mut s = [[NONE; 3]; 3];
                for a in 0..3 {
                    for b in 0..3 {
                        if let (Some(i), Some(j)) = (map(tri[a]), map(tri[b])) {
                            s[a][b] = find(i, j);
                        }
                    }
                }
                s
            })
            .collect();
        Self { n, row_ptr, cols, slots }
    }

    fn empty_matrix<T: Scalar>(&self) -> CsrMatrix<T> {
        CsrMatrix::with_pattern(self.n, self.row_ptr.clone(), self.cols.clone())
    }
}

/// Nodal field vanishing on the boundary.
#[derive(Debug, Clone, PartialEq)]
pub struct StateField<T>(Vec<T>);

impl<T: Scalar> StateField<T> {
    pub fn zeros(mesh: &Mesh<T>) -> Self {
        Self(vec![T::zero(); mesh.num_nodes()])
    }

    /// Scatters interior unknowns into a full nodal vector.
    pub fn from_interior(mesh: &Mesh<T>, dofs: &[T]) -> Result<Self> {
        check_len("interior values", mesh.num_interior(), dofs.len())?;
        let mut v = vec![T::zero(); mesh.num_nodes()];
        for (d, &x) in dofs.iter().enumerate() {
            v[mesh.node_of_dof(d)] = x;
        }
        Ok(Self(v))
    }

    /// Takes nodal values and zeroes the boundary nodes.
    pub fn from_nodal(mesh: &Mesh<T>, mut values: Vec<T>) -> Result<Self> {
        check_len("nodal values", mesh.num_nodes(), values.len())?;
        for (n, v) in values.iter_mut().enumerate() {
            if mesh.is_boundary(n) {
                *v = T::zero();
            }
        }
        Ok(Self(values))
    }

    pub fn interior(&self, mesh: &Mesh<T>) -> Vec<T> {
        (0..mesh.num_interior()).map(|d| self.0[mesh.node_of_dof(d)]).collect()
    }

    pub fn values(&self) -> &[T] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<T> {
        self.0
    }

    /// `self + s * other`.
    pub fn axpy(&self, s: T, other: &Self) -> Self {
        Self(self.0.iter().zip(&other.0).map(|(&a, &b)| a + s * b).collect())
    }
}

impl<T> Deref for StateField<T> {
    type Target = [T];
    fn deref(&self) -> &[T] {
        &self.0
    }
}

/// Sparse symmetric operator over the interior nodes with its right-hand side.
#[derive(Debug, Clone)]
pub struct LinearSystem<T> {
    pub matrix: CsrMatrix<T>,
    pub rhs: Vec<T>,
}

impl<T: Scalar> LinearSystem<T> {
    /// Restricts a full-length load vector to the interior nodes.
    pub fn new(mesh: &Mesh<T>, matrix: CsrMatrix<T>, full_rhs: &[T]) -> Result<Self> {
        check_len("load vector", mesh.num_nodes(), full_rhs.len())?;
        check_len("operator", mesh.num_interior(), matrix.dim())?;
        let rhs = (0..mesh.num_interior()).map(|d| full_rhs[mesh.node_of_dof(d)]).collect();
        Ok(Self { matrix, rhs })
    }
}

fn assemble_with<T: Scalar>(
    mesh: &Mesh<T>,
    with_boundary: bool,
    coeff: impl Fn(usize) -> Mat<T>,
    reaction: &[T],
) -> Result<CsrMatrix<T>> {
    let ne = mesh.num_elements();
    check_len("reaction", ne, reaction.len())?;
    let pattern = mesh.pattern(with_boundary);
    let mut k = pattern.empty_matrix::<T>();
    let ninth = T::one() / T::lit(9.0);
    for e in 0..ne {
        let r = reaction[e];
        if r < T::zero() || !r.is_finite() {
            return Err(Error::NegativeReaction { element: e, value: r.to_f64_lossy() });
        }
        let a = coeff(e);
        let g = mesh.shape_gradients(e);
        let area = mesh.area(e);
        let mass = r * area * ninth;
        let slots = &pattern.slots[e];
        for p in 0..3 {
            let ag = [
                a.get(0, 0) * g[p][0] + a.get(0, 1) * g[p][1],
                a.get(1, 0) * g[p][0] + a.get(1, 1) * g[p][1],
            ];
            for q in 0..3 {
                let s = slots[q][p];
                if s != NONE {
                    k.add_at(s, area * (ag[0] * g[q][0] + ag[1] * g[q][1]) + mass);
                }
            }
        }
    }
    Ok(k)
}

fn check_plane<T: Scalar>(coeff: &[SpdMatrix<T>]) -> Result<()> {
    match coeff.iter().find(|a| a.dim() != 2) {
        Some(a) => Err(Error::invalid(format!("coefficient of dimension {} on a planar mesh", a.dim()))),
        None => Ok(()),
    }
}

/// Operator `∫ A∇φⱼ·∇φᵢ + r φⱼφᵢ` over interior nodes (Dirichlet nodes
/// eliminated). `reaction` must be nonnegative.
pub fn assemble<T: Scalar>(mesh: &Mesh<T>, coeff: &[SpdMatrix<T>], reaction: &[T]) -> Result<CsrMatrix<T>> {
    check_len("coefficient field", mesh.num_elements(), coeff.len())?;
    check_plane(coeff)?;
    assemble_with(mesh, false, |e| *coeff[e].mat(), reaction)
}

/// Same operator over all nodes, before boundary elimination.
pub fn assemble_full<T: Scalar>(mesh: &Mesh<T>, coeff: &[SpdMatrix<T>], reaction: &[T]) -> Result<CsrMatrix<T>> {
    check_len("coefficient field", mesh.num_elements(), coeff.len())?;
    check_plane(coeff)?;
    assemble_with(mesh, true, |e| *coeff[e].mat(), reaction)
}

/// `∫ g φᵢ` with `g` constant per element: each touching node receives `g_e·area/3`.
pub fn load_scalar<T: Scalar>(mesh: &Mesh<T>, g: &[T]) -> Result<Vec<T>> {
    check_len("element load", mesh.num_elements(), g.len())?;
    let mut b = vec![T::zero(); mesh.num_nodes()];
    let third = T::one() / T::lit(3.0);
    for (e, tri) in mesh.elements().iter().enumerate() {
        let share = g[e] * mesh.area(e) * third;
        for &n in tri {
            b[n] += share;
        }
    }
    Ok(b)
}

/// Weak form of `∇·(Θ∇w)` tested against `φᵢ`: entry `i` is `−∫ Θ∇w·∇φᵢ`.
/// `Θ` is symmetric but need not be definite.
pub fn load_divergence<T: Scalar>(mesh: &Mesh<T>, theta: &[Mat<T>], w: &[T]) -> Result<Vec<T>> {
    check_len("matrix field", mesh.num_elements(), theta.len())?;
    check_len("nodal field", mesh.num_nodes(), w.len())?;
    let mut b = vec![T::zero(); mesh.num_nodes()];
    for (e, tri) in mesh.elements().iter().enumerate() {
        let flux = theta[e].mat_vec(&mesh.gradient(e, w));
        let g = mesh.shape_gradients(e);
        let area = mesh.area(e);
        for a in 0..3 {
            b[tri[a]] -= area * (flux.get(0) * g[a][0] + flux.get(1) * g[a][1]);
        }
    }
    Ok(b)
}

/// Solves the interior system and scatters the result with zero boundary values.
pub fn solve_cg<T: Scalar>(mesh: &Mesh<T>, system: &LinearSystem<T>) -> Result<StateField<T>> {
    solve_cg_with(mesh, system, &CgOptions::default()).map(|(y, _)| y)
}

pub fn solve_cg_with<T: Scalar>(
    mesh: &Mesh<T>,
    system: &LinearSystem<T>,
    opts: &CgOptions<T>,
) -> Result<(StateField<T>, CgStats)> {
    let (x, stats) = pcg(&system.matrix, &system.rhs, opts)?;
    Ok((StateField::from_interior(mesh, &x)?, stats))
}

/// `(‖v‖_{L²}, |v|_{H¹})` of the P1 interpolant, integrated exactly.
pub fn norms<T: Scalar>(mesh: &Mesh<T>, field: &[T]) -> (T, T) {
    let twelfth = T::one() / T::lit(12.0);
    let mut l2 = T::zero();
    let mut h1 = T::zero();
    for (e, tri) in mesh.elements().iter().enumerate() {
        let v = tri.map(|n| field[n]);
        let sum = v[0] + v[1] + v[2];
        let sq = v[0] * v[0] + v[1] * v[1] + v[2] * v[2];
        l2 += mesh.area(e) * twelfth * (sq + sum * sum);
        let g = mesh.gradient(e, field);
        h1 += mesh.area(e) * g.dot(&g);
    }
    (l2.sqrt(), h1.sqrt())
}

/// `Σₑ vₑ·|e|` for per-element constants.
pub fn integrate<T: Scalar>(mesh: &Mesh<T>, per_element: &[T]) -> T {
    per_element.iter().enumerate().map(|(e, &v)| v * mesh.area(e)).sum()
}

// Degree-5 seven-point rule on the reference triangle (barycentric, weight).
const DUNAVANT7: [([f64; 3], f64); 7] = [
    ([1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0], 0.225),
    ([0.059_715_871_789_770, 0.470_142_064_105_115, 0.470_142_064_105_115], 0.132_394_152_788_506),
    ([0.470_142_064_105_115, 0.059_715_871_789_770, 0.470_142_064_105_115], 0.132_394_152_788_506),
    ([0.470_142_064_105_115, 0.470_142_064_105_115, 0.059_715_871_789_770], 0.132_394_152_788_506),
    ([0.797_426_985_353_087, 0.101_286_507_323_456, 0.101_286_507_323_456], 0.125_939_180_544_827),
    ([0.101_286_507_323_456, 0.797_426_985_353_087, 0.101_286_507_323_456], 0.125_939_180_544_827),
    ([0.101_286_507_323_456, 0.101_286_507_323_456, 0.797_426_985_353_087], 0.125_939_180_544_827),
];

/// `(‖v − u‖_{L²}, |v − u|_{H¹})` against an exact solution `u` with gradient
/// `grad_u`, using a degree-5 rule per element.
pub fn error_norms<T: Scalar>(
    mesh: &Mesh<T>,
    field: &[T],
    u: impl Fn(T, T) -> T,
    grad_u: impl Fn(T, T) -> [T; 2],
) -> (T, T) {
    let mut l2 = T::zero();
    let mut h1 = T::zero();
    for (e, tri) in mesh.elements().iter().enumerate() {
        let p = tri.map(|n| mesh.node(n));
        let v = tri.map(|n| field[n]);
        let gv = mesh.gradient(e, field);
        let area = mesh.area(e);
        for (bary, w) in DUNAVANT7 {
            let b = bary.map(T::lit);
            let x = b[0] * p[0][0] + b[1] * p[1][0] + b[2] * p[2][0];
            let y = b[0] * p[0][1] + b[1] * p[1][1] + b[2] * p[2][1];
            let vh = b[0] * v[0] + b[1] * v[1] + b[2] * v[2];
            let d = vh - u(x, y);
            let gu = grad_u(x, y);
            let (dx, dy) = (gv.get(0) - gu[0], gv.get(1) - gu[1]);
            let w = T::lit(w) * area;
            l2 += w * d * d;
            h1 += w * (dx * dx + dy * dy);
        }
    }
    (l2.sqrt(), h1.sqrt())
}
