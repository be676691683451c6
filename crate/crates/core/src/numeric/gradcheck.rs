//! Central finite differences for checking analytic gradients.

use super::matrix::Matrix;
use crate::error::{Error, Result};

/// Magnitude below which a gradient entry is compared absolutely.
pub const RELATIVE_FLOOR: f64 = 1e-3;

/// Step for an entry currently equal to `x`.
pub fn step(x: f64) -> f64 {
    1e-5 * (1.0 + x.abs())
}

/// `|a - n| / max(|a|, |n|, RELATIVE_FLOOR)`.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(RELATIVE_FLOOR)
}

/// Worst disagreement found by [`max_relative_error`].
#[derive(Clone, Debug, PartialEq)]
pub struct GradCheck {
    pub max_error: f64,
    /// `(parameter, flat index)` of the worst entry.
    pub worst: (usize, usize),
    pub entries: usize,
}

/// Perturbs every entry of `point` by `+-step` and compares the central
/// difference of `f` with `analytic`, which must match `point` in shape.
pub fn max_relative_error<F>(point: &[Matrix], analytic: &[Matrix], mut f: F) -> Result<GradCheck>
where
    F: FnMut(&[Matrix]) -> Result<f64>,
{
    if point.len() != analytic.len() {
        return Err(Error::Usage(format!(
            "{} parameters but {} gradients",
            point.len(),
            analytic.len()
        )));
    }
    let mut work = point.to_vec();
    let mut report = GradCheck {
        max_error: 0.0,
        worst: (0, 0),
        entries: 0,
    };
    for (p, grad) in analytic.iter().enumerate() {
        if grad.shape() != point[p].shape() {
            return Err(Error::dims("gradcheck", point[p].shape(), grad.shape()));
        }
        for k in 0..grad.len() {
            let x = point[p].as_slice()[k];
            let h = step(x);
            work[p].as_mut_slice()[k] = x + h;
            let up = f(&work)?;
            work[p].as_mut_slice()[k] = x - h;
            let down = f(&work)?;
            work[p].as_mut_slice()[k] = x;
            let err = relative_error(grad.as_slice()[k], (up - down) / (2.0 * h));
            if err > report.max_error || err.is_nan() {
                report.max_error = err;
                report.worst = (p, k);
            }
            report.entries += 1;
        }
    }
    Ok(report)
}
