use crate::error::{Error, Result};

/// Default central-difference step.
pub const DEFAULT_STEP: f64 = 1e-6;

/// Central-difference gradient `(f(θ+h·e_i) − f(θ−h·e_i)) / 2h` per coordinate.
pub fn finite_difference_grad<F>(mut loss: F, theta: &[f64], h: f64) -> Result<Vec<f64>>
where
    F: FnMut(&[f64]) -> f64,
{
    if !(h > 0.0) {
        return Err(Error::Domain {
            op: "finite_difference_grad",
            detail: format!("step must be positive, got {h}"),
        });
    }
    let mut probe = theta.to_vec();
    let mut grad = Vec::with_capacity(theta.len());
    for i in 0..theta.len() {
        probe[i] = theta[i] + h;
        let up = loss(&probe);
        probe[i] = theta[i] - h;
        let down = loss(&probe);
        probe[i] = theta[i];
        if !up.is_finite() || !down.is_finite() {
            return Err(Error::NonFinite(format!(
                "loss at coordinate {i}: f(θ+h)={up}, f(θ−h)={down}"
            )));
        }
        grad.push((up - down) / (2.0 * h));
    }
    Ok(grad)
}

/// Relative error `|a − b| / max(|a|, |b|, 1e-8)`.
pub fn relative_error(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-8)
}

pub fn max_relative_error(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| relative_error(*x, *y))
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic() {
        let g = finite_difference_grad(|t| t[0] * t[0], &[3.0], DEFAULT_STEP).unwrap();
        assert!((g[0] - 6.0).abs() < 1e-6);
    }

    #[test]
    fn constant() {
        let g = finite_difference_grad(|_| 4.2, &[1.0, -2.0], DEFAULT_STEP).unwrap();
        assert!(g.iter().all(|v| v.abs() < 1e-8));
    }

    #[test]
    fn non_finite_loss_is_an_error() {
        let r = finite_difference_grad(|t| 1.0 / t[0].abs().min(0.0), &[1.0], DEFAULT_STEP);
        assert!(matches!(r, Err(Error::NonFinite(_))));
    }

    #[test]
    fn relative_error_uses_floor() {
        assert_eq!(relative_error(0.0, 0.0), 0.0);
        assert!((relative_error(1e-10, 0.0) - 1e-2).abs() < 1e-15);
        assert!((relative_error(2.0, 1.0) - 0.5).abs() < 1e-15);
    }
}
