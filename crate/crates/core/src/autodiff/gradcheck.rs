use serde::Serialize;

use super::{record_and_run, AutodiffError, Graph, NamedInput};
use crate::tensor::FeatureTensor;

pub const DEFAULT_STEP: f64 = 1e-5;
pub const DEFAULT_RTOL: f64 = 1e-4;
const DENOM_FLOOR: f64 = 1e-8;

/// The entry with the largest relative error.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Offender {
    pub input: String,
    pub index: Vec<usize>,
    pub analytic: f64,
    pub numeric: f64,
    pub rel_err: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FdReport {
    pub entries_checked: usize,
    pub max_rel_err: f64,
    pub worst: Option<Offender>,
    pub rtol: f64,
    pub passed: bool,
}

/// `|a - n| / max(|a|, |n|, 1e-8)`.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(DENOM_FLOOR)
}

fn scalar_loss(graph: &impl Graph, inputs: &[NamedInput]) -> Result<f64, AutodiffError> {
    let (out, _) = record_and_run(graph, inputs)?;
    if out.len() != 1 {
        return Err(AutodiffError::NotScalar(out.shape().to_vec()));
    }
    Ok(out.data()[0])
}

/// Compares reverse-mode gradients of a scalar-valued graph against central
/// differences `(L(p + h e_i) - L(p - h e_i)) / 2h`, entry by entry, over
/// every input.
pub fn finite_diff_check(
    graph: &impl Graph,
    inputs: &[NamedInput],
    h: f64,
    rtol: f64,
) -> Result<FdReport, AutodiffError> {
    let (out, rec) = record_and_run(graph, inputs)?;
    if out.len() != 1 {
        return Err(AutodiffError::NotScalar(out.shape().to_vec()));
    }
    let seed = FeatureTensor::filled(out.shape().to_vec(), 1.0)?;
    let grads = rec.backward(&seed)?;

    let mut perturbed = inputs.to_vec();
    let mut report = FdReport {
        entries_checked: 0,
        max_rel_err: 0.0,
        worst: None,
        rtol,
        passed: true,
    };
    for (slot, (name, value)) in inputs.iter().enumerate() {
        let analytic = grads
            .get(name)
            .ok_or_else(|| AutodiffError::MissingGradient(name.clone()))?;
        for (flat, index) in value.indices().enumerate() {
            let base = value.data()[flat];
            perturbed[slot].1.data_mut()[flat] = base + h;
            let up = scalar_loss(graph, &perturbed)?;
            perturbed[slot].1.data_mut()[flat] = base - h;
            let down = scalar_loss(graph, &perturbed)?;
            perturbed[slot].1.data_mut()[flat] = base;

            let numeric = (up - down) / (2.0 * h);
            let a = analytic.data()[flat];
            let err = relative_error(a, numeric);
            report.entries_checked += 1;
            if report.worst.is_none() || err > report.max_rel_err {
                report.max_rel_err = err;
                report.worst = Some(Offender {
                    input: name.clone(),
                    index,
                    analytic: a,
                    numeric,
                    rel_err: err,
                });
            }
        }
    }
    report.passed = report.max_rel_err <= rtol;
    Ok(report)
}
