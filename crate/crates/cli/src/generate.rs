//! Candidate controls and direction fields from their config descriptions.

use ellopt_core::optimality::OptimalityContext;
use ellopt_core::{ControlField, DirectionField, Instance, Scalar, UnitVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::config::{CandidateSpec, DirectionSpec};
use crate::error::CliError;

/// Independent stream per purpose and index, so adding a candidate does not
/// perturb the others.
fn rng(seed: u64, purpose: u64, index: usize) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream((purpose << 32) | index as u64);
    r
}

pub fn candidate<T: Scalar>(
    inst: &Instance<T>,
    reference: &ControlField,
    spec: &CandidateSpec,
    seed: u64,
    index: usize,
) -> Result<ControlField, CliError> {
    let p = &inst.problem;
    let n = p.num_labels();
    let check = |label: usize| {
        if label < n {
            Ok(())
        } else {
            Err(CliError::Core(ellopt_core::Error::UnknownLabel { label, size: n }))
        }
    };
    let u = match spec {
        CandidateSpec::Constant { label, .. } => {
            check(*label)?;
            ControlField::constant(p, *label)?
        }
        CandidateSpec::Region { label, rect, .. } => {
            check(*label)?;
            let elements = match rect {
                Some(r) => p.mesh().elements_where(|x, y| {
                    let (x, y) = (x.to_f64_lossy(), y.to_f64_lossy());
                    x > r[0] && x < r[1] && y > r[2] && y < r[3]
                }),
                None => inst.region.clone(),
            };
            reference.with_labels(&elements, *label)
        }
        CandidateSpec::Flip { shift, .. } => {
            ControlField::new(p, reference.labels().iter().map(|&v| (v + shift) % n).collect())?
        }
        CandidateSpec::Random { keep, .. } => {
            let mut r = rng(seed, 1, index);
            let labels = reference
                .labels()
                .iter()
                .map(|&v| {
                    if n == 1 || r.gen::<f64>() < *keep {
                        v
                    } else {
                        (v + r.gen_range(1..n)) % n
                    }
                })
                .collect();
            ControlField::new(p, labels)?
        }
    };
    Ok(u)
}

pub fn directions<T: Scalar>(
    inst: &Instance<T>,
    ctx: &OptimalityContext<T>,
    u: &ControlField,
    spec: &DirectionSpec,
    seed: u64,
    index: usize,
) -> Result<DirectionField<T>, CliError> {
    let n = inst.problem.num_elements();
    let field = match spec {
        DirectionSpec::Selected => ctx.selected_directions(&inst.problem, u)?,
        DirectionSpec::Constant { angle } => DirectionField::constant(n, UnitVector::from_angle(T::lit(*angle)))?,
        DirectionSpec::Random => {
            let mut r = rng(seed, 2, index);
            let dirs = (0..n).map(|_| UnitVector::from_angle(T::lit(r.gen_range(0.0..std::f64::consts::PI)))).collect();
            DirectionField::new(dirs)?
        }
    };
    Ok(field)
}
