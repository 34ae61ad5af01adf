//! Problem instances: finite control set, coefficient map, reaction and
//! running cost, all tabulated per (element, label) at element centroids.

use serde::Serialize;

use crate::error::{check_len, Error, Result};
use crate::mesh::Mesh;
use crate::scalar::Scalar;
use crate::tensor::{SpdMatrix, UnitVector};

/// Reaction `f(y) = source − linear·y − cubic·y³` with `linear, cubic ≥ 0`,
/// so that `f_y ≤ 0` for every `y`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Reaction<T> {
    pub source: T,
    pub linear: T,
    pub cubic: T,
}

impl<T: Scalar> Reaction<T> {
    pub fn new(source: T, linear: T, cubic: T) -> Self {
        Self { source, linear, cubic }
    }

    #[inline]
    pub fn value(&self, y: T) -> T {
        self.source - self.linear * y - self.cubic * y * y * y
    }

    #[inline]
    pub fn dy(&self, y: T) -> T {
        -self.linear - T::lit(3.0) * self.cubic * y * y
    }

    #[inline]
    pub fn dyy(&self, y: T) -> T {
        -T::lit(6.0) * self.cubic * y
    }

    /// `(1−α)·self + α·other`, again of the same form.
    pub fn mix(&self, other: &Self, alpha: T) -> Self {
        let b = T::one() - alpha;
        Self {
            source: b * self.source + alpha * other.source,
            linear: b * self.linear + alpha * other.linear,
            cubic: b * self.cubic + alpha * other.cubic,
        }
    }
}

/// Running cost `f⁰(y) = constant + linear·y + ½·weight·(y − target)²`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RunningCost<T> {
    pub constant: T,
    pub linear: T,
    pub weight: T,
    pub target: T,
}

impl<T: Scalar> RunningCost<T> {
    pub fn new(constant: T, linear: T, weight: T, target: T) -> Self {
        Self { constant, linear, weight, target }
    }

    #[inline]
    pub fn value(&self, y: T) -> T {
        let d = y - self.target;
        self.constant + self.linear * y + T::lit(0.5) * self.weight * d * d
    }

    #[inline]
    pub fn dy(&self, y: T) -> T {
        self.linear + self.weight * (y - self.target)
    }

    #[inline]
    pub fn dyy(&self, _y: T) -> T {
        self.weight
    }
}

/// Data of one (element, label) pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(bound = "T: Scalar + Serialize")]
pub struct PointData<T> {
    pub a: SpdMatrix<T>,
    pub f: Reaction<T>,
    pub f0: RunningCost<T>,
}

#[derive(Debug, Clone)]
pub struct Problem<T> {
    name: String,
    mesh: Mesh<T>,
    num_labels: usize,
    /// Indexed by `e * num_labels + v`.
    data: Vec<PointData<T>>,
    lambda: T,
    big_lambda: T,
}

impl<T: Scalar> Problem<T> {
    /// Validates the tables: planar SPD coefficients, nonnegative reaction
    /// slopes. The ellipticity pair is the spectral range of the coefficients.
    pub fn new(name: impl Into<String>, mesh: Mesh<T>, num_labels: usize, data: Vec<PointData<T>>) -> Result<Self> {
        if num_labels == 0 {
            return Err(Error::invalid("control set must not be empty"));
        }
        check_len("pointwise data", mesh.num_elements() * num_labels, data.len())?;
        let mut lambda = T::infinity();
        let mut big_lambda = T::zero();
        for (k, d) in data.iter().enumerate() {
            if d.a.dim() != 2 {
                return Err(Error::invalid(format!("coefficient at entry {k} has dimension {}", d.a.dim())));
            }
            if d.f.linear < T::zero() || d.f.cubic < T::zero() {
                return Err(Error::invalid(format!(
                    "reaction at element {} label {} has a positive y-derivative",
                    k / num_labels,
                    k % num_labels
                )));
            }
            let (lo, hi) = d.a.spectrum_bounds();
            lambda = lambda.min(lo);
            big_lambda = big_lambda.max(hi);
        }
        Ok(Self { name: name.into(), mesh, num_labels, data, lambda, big_lambda })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn mesh(&self) -> &Mesh<T> {
        &self.mesh
    }

    pub fn num_labels(&self) -> usize {
        self.num_labels
    }

    pub fn num_elements(&self) -> usize {
        self.mesh.num_elements()
    }

    /// `(λ, Λ)`.
    pub fn ellipticity(&self) -> (T, T) {
        (self.lambda, self.big_lambda)
    }

    #[inline]
    pub fn data(&self, e: usize, v: usize) -> &PointData<T> {
        debug_assert!(v < self.num_labels);
        &self.data[e * self.num_labels + v]
    }

    pub(crate) fn data_mut(&mut self, e: usize, v: usize) -> &mut PointData<T> {
        &mut self.data[e * self.num_labels + v]
    }

    /// `A(·, u(·))`.
    pub fn coeff_field(&self, u: &ControlField) -> Vec<SpdMatrix<T>> {
        u.labels().iter().enumerate().map(|(e, &v)| self.data(e, v).a).collect()
    }

    pub fn check_control(&self, u: &ControlField) -> Result<()> {
        check_len("control field", self.num_elements(), u.len())?;
        match u.labels().iter().find(|&&v| v >= self.num_labels) {
            Some(&label) => Err(Error::UnknownLabel { label, size: self.num_labels }),
            None => Ok(()),
        }
    }

    pub fn check_directions(&self, ell: &DirectionField<T>) -> Result<()> {
        check_len("direction field", self.num_elements(), ell.len())
    }
}

/// One label per element.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
#[serde(transparent)]
pub struct ControlField(Vec<usize>);

impl ControlField {
    pub fn new<T: Scalar>(problem: &Problem<T>, labels: Vec<usize>) -> Result<Self> {
        let u = Self(labels);
        problem.check_control(&u)?;
        Ok(u)
    }

    pub fn constant<T: Scalar>(problem: &Problem<T>, label: usize) -> Result<Self> {
        Self::new(problem, vec![label; problem.num_elements()])
    }

    pub fn labels(&self) -> &[usize] {
        &self.0
    }

    pub fn label(&self, e: usize) -> usize {
        self.0[e]
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn set(&mut self, e: usize, v: usize) {
        self.0[e] = v;
    }

    /// Elements where `self` and `other` differ.
    pub fn diff(&self, other: &Self) -> Vec<usize> {
        self.0.iter().zip(&other.0).enumerate().filter(|(_, (a, b))| a != b).map(|(e, _)| e).collect()
    }

    /// Copy of `self` with `label` on the given elements.
    pub fn with_labels(&self, elements: &[usize], label: usize) -> Self {
        let mut out = self.clone();
        for &e in elements {
            out.0[e] = label;
        }
        out
    }
}

/// One unit direction per element.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(transparent, bound = "T: Scalar + Serialize")]
pub struct DirectionField<T>(Vec<UnitVector<T>>);

impl<T: Scalar> DirectionField<T> {
    pub fn new(directions: Vec<UnitVector<T>>) -> Result<Self> {
        if let Some(d) = directions.iter().find(|d| d.dim() != 2) {
            return Err(Error::invalid(format!("direction of dimension {} on a planar mesh", d.dim())));
        }
        Ok(Self(directions))
    }

    pub fn constant(num_elements: usize, direction: UnitVector<T>) -> Result<Self> {
        Self::new(vec![direction; num_elements])
    }

    pub fn get(&self, e: usize) -> &UnitVector<T> {
        &self.0[e]
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[UnitVector<T>] {
        &self.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reaction_and_cost_derivatives() {
        let f = Reaction::<f64>::new(1.0, 0.5, 2.0);
        let f0 = RunningCost::<f64>::new(0.3, -1.0, 2.0, 0.25);
        for y in [-1.3f64, 0.0, 0.7, 2.1] {
            let h = 1e-5;
            let fd = (f.value(y + h) - f.value(y - h)) / (2.0 * h);
            assert!((fd - f.dy(y)).abs() <= 1e-6 * (1.0 + fd.abs()));
            let fdd = (f.dy(y + h) - f.dy(y - h)) / (2.0 * h);
            assert!((fdd - f.dyy(y)).abs() <= 1e-6 * (1.0 + fdd.abs()));
            let gd = (f0.value(y + h) - f0.value(y - h)) / (2.0 * h);
            assert!((gd - f0.dy(y)).abs() <= 1e-6 * (1.0 + gd.abs()));
            assert!(f.dy(y) <= 0.0);
        }
    }

    #[test]
    fn rejects_bad_tables() {
        let mesh = Mesh::<f64>::new(2).unwrap();
        let good = PointData {
            a: SpdMatrix::identity(2),
            f: Reaction::new(1.0, 0.0, 0.0),
            f0: RunningCost::new(0.0, 0.0, 1.0, 0.0),
        };
        let mut data = vec![good; 8];
        assert!(Problem::new("p", mesh.clone(), 1, data.clone()).is_ok());
        data[2].f.linear = -1.0;
        assert!(Problem::new("p", mesh.clone(), 1, data).is_err());
        let p = Problem::new("p", mesh, 1, vec![good; 8]).unwrap();
        assert!(matches!(ControlField::constant(&p, 1), Err(Error::UnknownLabel { label: 1, size: 1 })));
    }
}
