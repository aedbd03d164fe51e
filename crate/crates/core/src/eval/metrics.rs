//! Displacement errors between predicted and ground-truth trajectories.

use crate::geom::Point;

use super::EvalError;

fn check(pred: &[Point], gt: &[Point]) -> Result<(), EvalError> {
    if pred.len() != gt.len() {
        return Err(EvalError::LengthMismatch { pred: pred.len(), gt: gt.len() });
    }
    if pred.is_empty() {
        return Err(EvalError::EmptyTrajectory);
    }
    Ok(())
}

/// `sqrt(dx² + dy²)` evaluated left to right, the textbook form.
fn displacement(p: Point, g: Point) -> f64 {
    let (dx, dy) = (p.x - g.x, p.y - g.y);
    (dx * dx + dy * dy).sqrt()
}

/// Mean Euclidean distance over all steps.
pub fn ade(pred: &[Point], gt: &[Point]) -> Result<f64, EvalError> {
    check(pred, gt)?;
    let mut sum = 0.0;
    for (p, g) in pred.iter().zip(gt) {
        sum += displacement(*p, *g);
    }
    Ok(sum / pred.len() as f64)
}

/// Euclidean distance at the last step.
pub fn fde(pred: &[Point], gt: &[Point]) -> Result<f64, EvalError> {
    check(pred, gt)?;
    Ok(displacement(pred[pred.len() - 1], gt[gt.len() - 1]))
}
