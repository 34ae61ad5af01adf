//! Laminated microstructures and their homogenized limits.

use num_integer::Integer;
use num_rational::Ratio;
use num_traits::{Signed, ToPrimitive, Zero};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::fem::{assemble, load_scalar, norms, solve_cg, LinearSystem, StateField};
use crate::mesh::Mesh;
use crate::scalar::Scalar;
use crate::tensor::{lemma41_matrix, Mat, SpdMatrix, UnitVector, Vector};

/// Direction with rational components.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RationalDirection(Vec<Ratio<i64>>);

impl RationalDirection {
    /// Builds from `(numerator, denominator)` pairs; denominators must be
    /// nonzero and at least one numerator nonzero.
    pub fn new(parts: &[(i64, i64)]) -> Result<Self> {
        if parts.is_empty() || parts.len() > 3 {
            return Err(Error::invalid(format!("direction needs 1 to 3 components, got {}", parts.len())));
        }
        if parts.iter().any(|&(_, d)| d == 0) {
            return Err(Error::invalid("zero denominator in rational direction"));
        }
        let c: Vec<_> = parts.iter().map(|&(n, d)| Ratio::new(n, d)).collect();
        if c.iter().all(Zero::is_zero) {
            return Err(Error::invalid("rational direction is zero"));
        }
        Ok(Self(c))
    }

    pub fn from_integers(v: &[i64]) -> Result<Self> {
        Self::new(&v.iter().map(|&n| (n, 1)).collect::<Vec<_>>())
    }

    pub fn components(&self) -> &[Ratio<i64>] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    /// Least common multiple `P` of the denominators.
    pub fn period(&self) -> i64 {
        self.0.iter().fold(1, |p, r| p.lcm(r.denom()))
    }

    /// The integer vector `P μ`.
    pub fn integer_multiple(&self) -> Vec<i64> {
        let p = self.period();
        self.0.iter().map(|r| (r * p).to_integer()).collect()
    }

    pub fn to_vector<T: Scalar>(&self) -> Vector<T> {
        let v: Vec<T> = self.0.iter().map(|r| T::lit(r.to_f64().unwrap_or(f64::NAN))).collect();
        Vector::from_slice(&v)
    }

    pub fn to_unit<T: Scalar>(&self) -> UnitVector<T> {
        UnitVector::normalize(self.to_vector()).expect("nonzero by construction")
    }

    pub fn max_abs(&self) -> Ratio<i64> {
        self.0.iter().map(|r| r.abs()).max().unwrap_or_else(Ratio::zero)
    }
}

/// Two-phase laminate: an element in region `k` takes `B` when the decimal
/// part of `⟨x/ε, μₖ⟩` at its centroid lies in `[0, α)` and `C` otherwise.
#[derive(Debug, Clone)]
pub struct Laminate<T> {
    pub b: SpdMatrix<T>,
    pub c: SpdMatrix<T>,
    pub alpha: T,
    regions: Vec<(Vec<usize>, RationalDirection)>,
}

impl<T: Scalar> Laminate<T> {
    /// Regions must partition the element set of the mesh the laminate is
    /// applied to; that is checked when the laminate is evaluated.
    pub fn new(
        b: SpdMatrix<T>,
        c: SpdMatrix<T>,
        alpha: T,
        regions: Vec<(Vec<usize>, RationalDirection)>,
    ) -> Result<Self> {
        if !(alpha > T::zero() && alpha < T::one()) {
            return Err(Error::invalid(format!("volume fraction {alpha} outside (0, 1)")));
        }
        if b.dim() != 2 || c.dim() != 2 {
            return Err(Error::invalid("laminate phases must be 2x2"));
        }
        if regions.is_empty() {
            return Err(Error::invalid("laminate needs at least one region"));
        }
        if let Some((_, d)) = regions.iter().find(|(_, d)| d.dim() != 2) {
            return Err(Error::invalid(format!("direction {:?} is not planar", d.components())));
        }
        Ok(Self { b, c, alpha, regions })
    }

    /// One direction on the whole mesh.
    pub fn uniform(b: SpdMatrix<T>, c: SpdMatrix<T>, alpha: T, mu: RationalDirection, num_elements: usize) -> Result<Self> {
        Self::new(b, c, alpha, vec![((0..num_elements).collect(), mu)])
    }

    pub fn regions(&self) -> &[(Vec<usize>, RationalDirection)] {
        &self.regions
    }

    /// Common multiple of every denominator across regions.
    pub fn period(&self) -> i64 {
        self.regions.iter().fold(1, |p, (_, d)| p.lcm(&d.period()))
    }

    /// Region index of every element; fails unless the regions partition the mesh.
    pub fn region_map(&self, num_elements: usize) -> Result<Vec<usize>> {
        let mut map = vec![usize::MAX; num_elements];
        for (k, (elements, _)) in self.regions.iter().enumerate() {
            for &e in elements {
                if e >= num_elements {
                    return Err(Error::invalid(format!("region {k} names element {e} of {num_elements}")));
                }
                if map[e] != usize::MAX {
                    return Err(Error::invalid(format!("element {e} lies in regions {} and {k}", map[e])));
                }
                map[e] = k;
            }
        }
        if let Some(e) = map.iter().position(|&k| k == usize::MAX) {
            return Err(Error::invalid(format!("element {e} is in no region")));
        }
        Ok(map)
    }
}

fn frac<T: Scalar>(t: T) -> T {
    t - t.floor()
}

/// Oscillating coefficient `G(x, x/ε)` sampled at element centroids.
pub fn laminate_field<T: Scalar>(lam: &Laminate<T>, mesh: &Mesh<T>, eps: T) -> Result<Vec<SpdMatrix<T>>> {
    if !(eps > T::zero()) || !eps.is_finite() {
        return Err(Error::invalid(format!("period {eps} must be positive")));
    }
    let map = lam.region_map(mesh.num_elements())?;
    let dirs: Vec<Vector<T>> = lam.regions.iter().map(|(_, d)| d.to_vector()).collect();
    Ok((0..mesh.num_elements())
        .map(|e| {
            let p = mesh.centroid(e);
            let mu = &dirs[map[e]];
            let t = (p[0] * mu.get(0) + p[1] * mu.get(1)) / eps;
            if frac(t) < lam.alpha {
                lam.b
            } else {
                lam.c
            }
        })
        .collect())
}

/// Homogenized coefficient of a single laminate.
pub fn hlimit_matrix<T: Scalar>(b: &SpdMatrix<T>, c: &SpdMatrix<T>, alpha: T, mu: &Vector<T>) -> Result<SpdMatrix<T>> {
    Ok(lemma41_matrix(b, c, alpha, mu)?)
}

/// Homogenized coefficient per element.
pub fn hlimit_laminate<T: Scalar>(lam: &Laminate<T>, num_elements: usize) -> Result<Vec<SpdMatrix<T>>> {
    let map = lam.region_map(num_elements)?;
    let limits = lam
        .regions
        .iter()
        .map(|(_, d)| hlimit_matrix(&lam.b, &lam.c, lam.alpha, &d.to_vector()))
        .collect::<Result<Vec<_>>>()?;
    Ok(map.into_iter().map(|k| limits[k]).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SweepRow<T> {
    pub eps: T,
    pub l2_error: T,
    pub h1_error: T,
}

/// Solves `−∇·(G(x, x/ε)∇y) = g` for each `ε` and compares against the
/// homogenized solution on the same mesh.
pub fn epsilon_sweep<T: Scalar>(lam: &Laminate<T>, mesh: &Mesh<T>, g: &[T], eps_list: &[T]) -> Result<Vec<SweepRow<T>>> {
    if eps_list.is_empty() {
        return Err(Error::invalid("empty ε list"));
    }
    if eps_list.windows(2).any(|w| !(w[1] < w[0])) {
        return Err(Error::invalid("ε list must be strictly decreasing"));
    }
    let m = mesh.resolution();
    let floor = T::lit(8.0) / T::from_count(m);
    if let Some(&eps) = eps_list.iter().find(|&&eps| eps < floor * (T::one() - T::epsilon() * T::lit(16.0))) {
        return Err(Error::UnderResolved { eps: eps.to_f64_lossy(), m });
    }
    let zero = vec![T::zero(); mesh.num_elements()];
    let rhs = load_scalar(mesh, g)?;
    let solve = |coeff: &[SpdMatrix<T>]| -> Result<StateField<T>> {
        let k = assemble(mesh, coeff, &zero)?;
        solve_cg(mesh, &LinearSystem::new(mesh, k, &rhs)?)
    };
    let y_hom = solve(&hlimit_laminate(lam, mesh.num_elements())?)?;
    eps_list
        .par_iter()
        .map(|&eps| {
            let y = solve(&laminate_field(lam, mesh, eps)?)?;
            let diff: Vec<T> = y.iter().zip(y_hom.iter()).map(|(a, b)| *a - *b).collect();
            let (l2, h1) = norms(mesh, &diff);
            Ok(SweepRow { eps, l2_error: l2, h1_error: h1 })
        })
        .collect()
}

/// Midpoint-grid measure of `{z ∈ [0,1]ⁿ : {⟨ν, z⟩} ∈ [0, α)}` with `N`
/// points per axis. The decimal part is evaluated exactly in integers.
pub fn decimal_measure<T: Scalar>(nu: &[i64], alpha: T, n: usize) -> Result<T> {
    if nu.is_empty() || nu.len() > 3 {
        return Err(Error::invalid(format!("dimension {} outside 1..=3", nu.len())));
    }
    if nu.iter().all(|&v| v == 0) {
        return Err(Error::invalid("ν must be nonzero"));
    }
    if n < 100 {
        return Err(Error::invalid(format!("grid of {n} points per axis is below 100")));
    }
    if !(alpha >= T::zero() && alpha <= T::one()) {
        return Err(Error::invalid(format!("α = {alpha} outside [0, 1]")));
    }
    // Midpoints are (2k+1)/(2N); the decimal part of ⟨ν, z⟩ is r/(2N) with
    // r = Σ νᵢ(2kᵢ+1) mod 2N.
    let modulus = 2 * n as i128;
    let alpha_f = alpha.to_f64_lossy();
    let hit = |r: i128| (r.rem_euclid(modulus) as f64) < alpha_f * modulus as f64;
    let nu: Vec<i128> = nu.iter().map(|&v| v as i128).collect();
    let odd = |k: usize| 2 * k as i128 + 1;
    let count: u64 = (0..n)
        .into_par_iter()
        .map(|k0| {
            let s0 = nu[0] * odd(k0);
            match nu.len() {
                1 => hit(s0) as u64,
                2 => (0..n).filter(|&k1| hit(s0 + nu[1] * odd(k1))).count() as u64,
                _ => (0..n)
                    .map(|k1| {
                        let s1 = s0 + nu[1] * odd(k1);
                        (0..n).filter(|&k2| hit(s1 + nu[2] * odd(k2))).count() as u64
                    })
                    .sum(),
            }
        })
        .sum();
    let total = (n as f64).powi(nu.len() as i32);
    Ok(T::lit(count as f64 / total))
}

/// One-dimensional cell corrector of a laminate across `μ̃`: the flux
/// vector `X` and the corrector slopes in each phase.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(bound = "T: Scalar + Serialize")]
pub struct Corrector<T: Scalar> {
    pub x: Vector<T>,
    pub slope_b: Vector<T>,
    pub slope_c: Vector<T>,
}

pub fn corrector_1d<T: Scalar>(b: &SpdMatrix<T>, c: &SpdMatrix<T>, alpha: T, mu: &UnitVector<T>) -> Corrector<T> {
    let m = mu.vector();
    let (bm, cm) = (b.mat_vec(m), c.mat_vec(m));
    let (qb, qc) = (b.quad_form(m), c.quad_form(m));
    let one_m = T::one() - alpha;
    let x = (bm.scale(alpha * qc) + cm.scale(one_m * qb)).scale(T::one() / (alpha * qc + one_m * qb));
    Corrector { x, slope_b: (x - bm).scale(T::one() / qb), slope_c: (x - cm).scale(T::one() / qc) }
}

impl<T: Scalar> Corrector<T> {
    /// `α s_B + (1−α) s_C`, which vanishes for a periodic corrector.
    pub fn closure(&self, alpha: T) -> Vector<T> {
        self.slope_b.scale(alpha) + self.slope_c.scale(T::one() - alpha)
    }

    /// Cell average `α B(I + μ̃ s_Bᵀ) + (1−α) C(I + μ̃ s_Cᵀ)`.
    pub fn reconstruct(&self, b: &SpdMatrix<T>, c: &SpdMatrix<T>, alpha: T, mu: &UnitVector<T>) -> Mat<T> {
        let m = mu.vector();
        let one_m = T::one() - alpha;
        b.mat().scale(alpha)
            + c.mat().scale(one_m)
            + b.mat_vec(m).outer(&self.slope_b).scale(alpha)
            + c.mat_vec(m).outer(&self.slope_c).scale(one_m)
    }
}
