//! Built-in problem instances, selected by name with their parameters.
//!
//! Every instance comes with a reference control. Two of them are calibrated
//! at that reference: the control cost of the competing label is shifted per
//! element so that the Hamiltonian gap takes a prescribed value.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mesh::Mesh;
use crate::optimality::{hamiltonian_gap, max_quotient, OptimalityContext};
use crate::problem::{ControlField, PointData, Problem, Reaction, RunningCost};
use crate::scalar::Scalar;
use crate::tensor::{Mat, SpdMatrix, Vector};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "kebab-case")]
pub enum ProblemSpec {
    LaplaceMs(LaplaceMs),
    TwoPhase(TwoPhase),
    RegionFree(RegionFree),
    RankOneGap(RankOneGap),
}

impl ProblemSpec {
    pub fn name(&self) -> &'static str {
        match self {
            Self::LaplaceMs(_) => "laplace-ms",
            Self::TwoPhase(_) => "two-phase",
            Self::RegionFree(_) => "region-free",
            Self::RankOneGap(_) => "rank-one-gap",
        }
    }

    pub fn build<T: Scalar>(&self, m: usize) -> Result<Instance<T>> {
        let mesh = Mesh::new(m)?;
        match self {
            Self::LaplaceMs(p) => p.build(mesh),
            Self::TwoPhase(p) => p.build(mesh),
            Self::RegionFree(p) => p.build(mesh),
            Self::RankOneGap(p) => p.build(mesh),
        }
    }
}

/// A problem with its reference control.
#[derive(Debug, Clone)]
pub struct Instance<T> {
    pub problem: Problem<T>,
    pub reference: ControlField,
    /// Elements of the distinguished subregion, where the instance has one.
    pub region: Vec<usize>,
}

fn bump<T: Scalar>(x: T, y: T) -> T {
    let pi = T::PI();
    (pi * x).sin() * (pi * y).sin()
}

fn check_nonneg(what: &str, v: f64) -> Result<()> {
    if v >= 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid(format!("{what} must be nonnegative, got {v}")))
    }
}

fn check_rect(r: &[f64; 4]) -> Result<()> {
    if r[0] < r[1] && r[2] < r[3] && r.iter().all(|v| (0.0..=1.0).contains(v)) {
        Ok(())
    } else {
        Err(Error::invalid(format!("region {r:?} is not [x0, x1, y0, y1] inside the unit square")))
    }
}

fn in_rect<T: Scalar>(r: &[f64; 4], x: T, y: T) -> bool {
    let (x, y) = (x.to_f64_lossy(), y.to_f64_lossy());
    x > r[0] && x < r[1] && y > r[2] && y < r[3]
}

/// Shifts the constant cost of `label` on `elements` so that the Hamiltonian
/// gap against the reference equals `target(cell)`.
fn calibrate<T: Scalar>(
    problem: &mut Problem<T>,
    reference: &ControlField,
    label: usize,
    elements: &[usize],
    target: impl Fn(&crate::optimality::CellData<T>, usize) -> Result<T>,
) -> Result<()> {
    let ctx = OptimalityContext::new(problem, reference.clone())?;
    let shifts = elements
        .iter()
        .map(|&e| {
            let cell = ctx.cell(problem, e);
            let vbar = reference.label(e);
            Ok(target(&cell, vbar)? - hamiltonian_gap(&cell, vbar, label)?)
        })
        .collect::<Result<Vec<T>>>()?;
    for (&e, s) in elements.iter().zip(shifts) {
        problem.data_mut(e, label).f0.constant += s;
    }
    Ok(())
}

/// Linear or semilinear problem with the manufactured solution
/// `sin(πx) sin(πy)`: `A = diag(a1, a2)`, `f = s − c y − γ y³`, one label.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LaplaceMs {
    pub a1: f64,
    pub a2: f64,
    pub c: f64,
    pub gamma: f64,
}

impl Default for LaplaceMs {
    fn default() -> Self {
        Self { a1: 1.0, a2: 1.0, c: 0.0, gamma: 0.0 }
    }
}

impl LaplaceMs {
    fn build<T: Scalar>(&self, mesh: Mesh<T>) -> Result<Instance<T>> {
        check_nonneg("c", self.c)?;
        check_nonneg("gamma", self.gamma)?;
        let a = SpdMatrix::diag(&[T::lit(self.a1), T::lit(self.a2)])?;
        let (c, gamma) = (T::lit(self.c), T::lit(self.gamma));
        let k = T::lit((self.a1 + self.a2) * PI * PI);
        let data = (0..mesh.num_elements())
            .map(|e| {
                let p = mesh.centroid(e);
                let u = bump(p[0], p[1]);
                PointData {
                    a,
                    f: Reaction::new(k * u + c * u + gamma * u * u * u, c, gamma),
                    f0: RunningCost::new(T::zero(), T::zero(), T::one(), u),
                }
            })
            .collect();
        let problem = Problem::new("laplace-ms", mesh, 1, data)?;
        let reference = ControlField::constant(&problem, 0)?;
        Ok(Instance { problem, reference, region: Vec::new() })
    }
}

/// Two-phase conductor: `A(·,0) = aI`, `A(·,1) = bI` (or `diag(b_diag)`),
/// `f = g − c y`, `f⁰ = ½ w (y − y_d)² + β(v)` with
/// `y_d = target_amplitude · sin(πx) sin(πy)`. The cost of label 1 ramps
/// along `x` as `beta[1] + beta_slope · (x − ½)`, which pins the phase
/// interface.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TwoPhase {
    pub a: f64,
    pub b: f64,
    pub b_diag: Option<[f64; 2]>,
    pub source: f64,
    pub c: f64,
    pub weight: f64,
    pub target_amplitude: f64,
    pub beta: [f64; 2],
    pub beta_slope: f64,
}

impl Default for TwoPhase {
    fn default() -> Self {
        Self {
            a: 1.0,
            b: 2.0,
            b_diag: None,
            source: 10.0,
            c: 0.0,
            weight: 0.1,
            target_amplitude: 0.4,
            beta: [0.0, 0.0],
            beta_slope: 1.0,
        }
    }
}

impl TwoPhase {
    fn build<T: Scalar>(&self, mesh: Mesh<T>) -> Result<Instance<T>> {
        check_nonneg("c", self.c)?;
        let a0 = SpdMatrix::scalar(2, T::lit(self.a))?;
        let a1 = match self.b_diag {
            Some(d) => SpdMatrix::diag(&[T::lit(d[0]), T::lit(d[1])])?,
            None => SpdMatrix::scalar(2, T::lit(self.b))?,
        };
        let f = Reaction::new(T::lit(self.source), T::lit(self.c), T::zero());
        let mut data = Vec::with_capacity(2 * mesh.num_elements());
        for e in 0..mesh.num_elements() {
            let p = mesh.centroid(e);
            let yd = T::lit(self.target_amplitude) * bump(p[0], p[1]);
            let ramp = T::lit(self.beta_slope) * (p[0] - T::lit(0.5));
            let beta = [T::lit(self.beta[0]), T::lit(self.beta[1]) + ramp];
            for (v, a) in [a0, a1].into_iter().enumerate() {
                data.push(PointData { a, f, f0: RunningCost::new(beta[v], T::zero(), T::lit(self.weight), yd) });
            }
        }
        let problem = Problem::new("two-phase", mesh, 2, data)?;
        let reference = ControlField::constant(&problem, 0)?;
        Ok(Instance { problem, reference, region: Vec::new() })
    }
}

/// Two labels that are interchangeable on the rectangle `Ω₀`. There the
/// coefficient is shared, label 1 adds `delta` to the source, and its control
/// cost is calibrated so that the Hamiltonian gap at the reference control
/// `ū ≡ 0` vanishes. Off `Ω₀`, label 1 uses `b` (default `a`) and pays
/// `penalty`. Candidates that differ from `ū` only inside `Ω₀` are therefore
/// singular there while the state still responds to them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RegionFree {
    pub a: f64,
    pub b: Option<f64>,
    pub omega0: [f64; 4],
    pub source: f64,
    pub delta: f64,
    pub c: f64,
    pub gamma: f64,
    pub weight: f64,
    pub target_amplitude: f64,
    pub penalty: f64,
}

impl Default for RegionFree {
    fn default() -> Self {
        Self {
            a: 1.0,
            b: None,
            omega0: [0.25, 0.75, 0.25, 0.75],
            source: 10.0,
            delta: 2.0,
            c: 1.0,
            gamma: 0.0,
            weight: 1.0,
            target_amplitude: 0.3,
            penalty: 10.0,
        }
    }
}

impl RegionFree {
    fn build<T: Scalar>(&self, mesh: Mesh<T>) -> Result<Instance<T>> {
        check_nonneg("c", self.c)?;
        check_nonneg("gamma", self.gamma)?;
        check_nonneg("penalty", self.penalty)?;
        check_rect(&self.omega0)?;
        let a0 = SpdMatrix::scalar(2, T::lit(self.a))?;
        let b = SpdMatrix::scalar(2, T::lit(self.b.unwrap_or(self.a)))?;
        let region = mesh.elements_where(|x, y| in_rect(&self.omega0, x, y));
        let mut inside = vec![false; mesh.num_elements()];
        region.iter().for_each(|&e| inside[e] = true);
        let (c, gamma) = (T::lit(self.c), T::lit(self.gamma));
        let mut data = Vec::with_capacity(2 * mesh.num_elements());
        for e in 0..mesh.num_elements() {
            let p = mesh.centroid(e);
            let yd = T::lit(self.target_amplitude) * bump(p[0], p[1]);
            let base = PointData {
                a: a0,
                f: Reaction::new(T::lit(self.source), c, gamma),
                f0: RunningCost::new(T::zero(), T::zero(), T::lit(self.weight), yd),
            };
            let mut alt = base;
            if inside[e] {
                alt.f.source += T::lit(self.delta);
            } else {
                alt.a = b;
                alt.f0.constant += T::lit(self.penalty);
            }
            data.push(base);
            data.push(alt);
        }
        let mut problem = Problem::new("region-free", mesh, 2, data)?;
        let reference = ControlField::constant(&problem, 0)?;
        calibrate(&mut problem, &reference, 1, &region, |_, _| Ok(T::zero()))?;
        Ok(Instance { problem, reference, region })
    }
}

/// Rank-one coefficient jump: `A(·,0) = aI`, `A(·,1) = aI + σ ddᵀ` with
/// `d = (cos θ, sin θ)`, and a third label equal to label 0 plus `penalty`.
/// `f = g − c y` for all labels, `f⁰ = p g y + ½ w (y − y_d)² + β(v)`.
/// Label 1's cost is calibrated on every element so that the Hamiltonian gap
/// at `ū ≡ 0` equals the maximal quotient, i.e. the first-order condition
/// holds with equality. For `w = 0` the adjoint is `−p ȳ`, the maximal
/// quotient is zero and is attained at `ℓ ⊥ d`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RankOneGap {
    pub a: f64,
    pub sigma: f64,
    pub angle: f64,
    pub source: f64,
    pub c: f64,
    pub p: f64,
    pub weight: f64,
    pub target_amplitude: f64,
    pub penalty: f64,
}

impl Default for RankOneGap {
    fn default() -> Self {
        Self {
            a: 1.0,
            sigma: 1.5,
            angle: PI / 6.0,
            source: 10.0,
            c: 1.0,
            p: 1.0,
            weight: 0.0,
            target_amplitude: 0.0,
            penalty: 10.0,
        }
    }
}

impl RankOneGap {
    fn build<T: Scalar>(&self, mesh: Mesh<T>) -> Result<Instance<T>> {
        check_nonneg("c", self.c)?;
        check_nonneg("penalty", self.penalty)?;
        let a0 = SpdMatrix::scalar(2, T::lit(self.a))?;
        let d = Vector::from_slice(&[T::lit(self.angle.cos()), T::lit(self.angle.sin())]);
        let a1 = SpdMatrix::new(*a0.mat() + d.outer(&d).scale(T::lit(self.sigma)))?;
        let g = T::lit(self.source);
        let f = Reaction::new(g, T::lit(self.c), T::zero());
        let mut data = Vec::with_capacity(3 * mesh.num_elements());
        for e in 0..mesh.num_elements() {
            let p = mesh.centroid(e);
            let yd = T::lit(self.target_amplitude) * bump(p[0], p[1]);
            let f0 = RunningCost::new(T::zero(), T::lit(self.p) * g, T::lit(self.weight), yd);
            data.push(PointData { a: a0, f, f0 });
            data.push(PointData { a: a1, f, f0 });
            let mut penalized = PointData { a: a0, f, f0 };
            penalized.f0.constant += T::lit(self.penalty);
            data.push(penalized);
        }
        let mut problem = Problem::new("rank-one-gap", mesh, 3, data)?;
        let reference = ControlField::constant(&problem, 0)?;
        let all: Vec<usize> = (0..problem.num_elements()).collect();
        calibrate(&mut problem, &reference, 1, &all, |cell, vbar| Ok(max_quotient(cell, vbar, 1)?.0))?;
        Ok(Instance { problem, reference, region: Vec::new() })
    }

    /// Unit vector `d` of the rank-one jump.
    pub fn direction(&self) -> [f64; 2] {
        [self.angle.cos(), self.angle.sin()]
    }
}

/// Matrix `A(·,1) − A(·,0)` for the rank-one instance.
pub fn rank_one_jump<T: Scalar>(spec: &RankOneGap) -> Mat<T> {
    let d = Vector::from_slice(&[T::lit(spec.angle.cos()), T::lit(spec.angle.sin())]);
    d.outer(&d).scale(T::lit(spec.sigma))
}
