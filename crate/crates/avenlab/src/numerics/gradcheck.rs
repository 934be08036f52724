//! Central-difference verification of analytic gradients.

use rand::Rng;

use super::matrix::Matrix;
use super::real::Real;
use crate::error::{Error, Result};

#[derive(Clone, Debug)]
pub struct ProbeResult {
    pub param_index: usize,
    pub element_index: usize,
    pub analytic: f64,
    pub numeric: f64,
    pub rel_error: f64,
}

#[derive(Clone, Debug)]
pub struct GradCheckReport {
    pub probes: Vec<ProbeResult>,
    pub max_rel_error: f64,
    pub tolerance: f64,
    pub passed: bool,
}

/// Relative error with a floor so that entries where both sides are
/// numerically zero compare as equal.
fn rel_error(analytic: f64, numeric: f64) -> f64 {
    let denom = analytic.abs().max(numeric.abs()).max(1e-6);
    (analytic - numeric).abs() / denom
}

/// Compare analytic gradients against central finite differences on
/// `probe_count` randomly chosen parameter entries.
///
/// `model` evaluates the loss and its analytic gradients (one gradient per
/// parameter, in parameter order) at the given parameter values. It must be
/// deterministic; two identical evaluations that disagree are reported as a
/// diagnostic failure.
pub fn finite_difference_check<R, F>(
    mut model: F,
    params: &[Matrix<R>],
    probe_count: usize,
    epsilon: f64,
    tolerance: f64,
    rng: &mut impl Rng,
) -> Result<GradCheckReport>
where
    R: Real,
    F: FnMut(&[Matrix<R>]) -> Result<(f64, Vec<Matrix<R>>)>,
{
    if epsilon <= 0.0 {
        return Err(Error::Config(format!("epsilon must be > 0, got {epsilon}")));
    }
    if params.is_empty() {
        return Err(Error::Validation("no parameters to probe".into()));
    }

    let (base_loss, base_grads) = model(params)?;
    let (repeat_loss, _) = model(params)?;
    if base_loss.to_bits() != repeat_loss.to_bits() {
        return Err(Error::Numerical(format!(
            "finite_difference_check: closure is non-deterministic \
             ({base_loss} vs {repeat_loss} at identical inputs)"
        )));
    }
    if base_grads.len() != params.len() {
        return Err(Error::Validation(format!(
            "model returned {} gradients for {} parameters",
            base_grads.len(),
            params.len()
        )));
    }

    let total: usize = params.iter().map(Matrix::len).sum();
    let mut work: Vec<Matrix<R>> = params.to_vec();
    let mut probes = Vec::with_capacity(probe_count);
    let mut max_rel: f64 = 0.0;

    for _ in 0..probe_count {
        let flat = rng.gen_range(0..total);
        let (pi, ei) = locate(params, flat);
        let original = work[pi].as_slice()[ei];
        let h = R::from_f64(epsilon);

        work[pi].as_mut_slice()[ei] = original + h;
        let (loss_plus, _) = model(&work)?;
        work[pi].as_mut_slice()[ei] = original - h;
        let (loss_minus, _) = model(&work)?;
        work[pi].as_mut_slice()[ei] = original;

        let numeric = (loss_plus - loss_minus) / (2.0 * epsilon);
        let analytic = base_grads[pi].as_slice()[ei].to_f64();
        let rel = rel_error(analytic, numeric);
        max_rel = max_rel.max(rel);
        probes.push(ProbeResult {
            param_index: pi,
            element_index: ei,
            analytic,
            numeric,
            rel_error: rel,
        });
    }

    Ok(GradCheckReport {
        probes,
        max_rel_error: max_rel,
        tolerance,
        passed: max_rel <= tolerance,
    })
}

fn locate<R: Real>(params: &[Matrix<R>], mut flat: usize) -> (usize, usize) {
    for (pi, p) in params.iter().enumerate() {
        if flat < p.len() {
            return (pi, flat);
        }
        flat -= p.len();
    }
    unreachable!("flat index out of range")
}
