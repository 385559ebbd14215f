use super::matrix::DenseMatrix;
use crate::error::{Error, Result};

/// Moment estimates and step counter for Adam.
#[derive(Clone, Debug, PartialEq)]
pub struct AdamState {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    step: u64,
    first: Vec<DenseMatrix>,
    second: Vec<DenseMatrix>,
}

impl AdamState {
    /// Zero-initialized state for parameters of the given shapes, with the
    /// usual defaults β1 = 0.9, β2 = 0.999, ε = 1e-8.
    pub fn new(shapes: &[(usize, usize)]) -> Self {
        Self::with_constants(shapes, 0.9, 0.999, 1e-8)
    }

    pub fn with_constants(shapes: &[(usize, usize)], beta1: f64, beta2: f64, eps: f64) -> Self {
        Self {
            beta1,
            beta2,
            eps,
            step: 0,
            first: shapes.iter().map(|&(r, c)| DenseMatrix::zeros(r, c)).collect(),
            second: shapes.iter().map(|&(r, c)| DenseMatrix::zeros(r, c)).collect(),
        }
    }

    pub fn step(&self) -> u64 {
        self.step
    }

    pub fn first_moments(&self) -> &[DenseMatrix] {
        &self.first
    }

    pub fn second_moments(&self) -> &[DenseMatrix] {
        &self.second
    }
}

/// One bias-corrected Adam update. `None` gradients are treated as zero.
pub fn adam_step(
    params: &mut [&mut DenseMatrix],
    grads: &[Option<&DenseMatrix>],
    state: &mut AdamState,
    lr: f64,
) -> Result<()> {
    if params.len() != state.first.len() || grads.len() != params.len() {
        return Err(Error::dim(
            "adam_step",
            format!(
                "{} params, {} grads, {} moment slots",
                params.len(),
                grads.len(),
                state.first.len()
            ),
        ));
    }
    for (i, p) in params.iter().enumerate() {
        if p.shape() != state.first[i].shape() {
            return Err(Error::dim(
                "adam_step",
                format!("param {i}: {:?} vs state {:?}", p.shape(), state.first[i].shape()),
            ));
        }
        if let Some(g) = grads[i] {
            p.ensure_same_shape(g, "adam_step")?;
        }
    }

    state.step += 1;
    let t = state.step as i32;
    let (b1, b2, eps) = (state.beta1, state.beta2, state.eps);
    let c1 = 1.0 - b1.powi(t);
    let c2 = 1.0 - b2.powi(t);

    for (i, p) in params.iter_mut().enumerate() {
        let m = state.first[i].data_mut();
        let v = state.second[i].data_mut();
        let pd = p.data_mut();
        match grads[i] {
            Some(g) => {
                for (((pv, mv), vv), gv) in pd.iter_mut().zip(m).zip(v).zip(g.data()) {
                    *mv = b1 * *mv + (1.0 - b1) * gv;
                    *vv = b2 * *vv + (1.0 - b2) * gv * gv;
                    *pv -= lr * (*mv / c1) / ((*vv / c2).sqrt() + eps);
                }
            }
            None => {
                for ((pv, mv), vv) in pd.iter_mut().zip(m).zip(v) {
                    *mv *= b1;
                    *vv *= b2;
                    *pv -= lr * (*mv / c1) / ((*vv / c2).sqrt() + eps);
                }
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradients_leave_params_unchanged() {
        let mut p = DenseMatrix::from_rows(&[[0.3, -0.2], [1.5, 2.0]]).unwrap();
        let before = p.clone();
        let g = DenseMatrix::zeros(2, 2);
        let mut state = AdamState::new(&[(2, 2)]);
        for _ in 0..20 {
            adam_step(&mut [&mut p], &[Some(&g)], &mut state, 0.01).unwrap();
        }
        assert_eq!(p, before);
        assert_eq!(state.step(), 20);
    }

    #[test]
    fn first_step_moves_by_learning_rate() {
        let mut p = DenseMatrix::scalar(1.0);
        let g = DenseMatrix::scalar(1.0);
        let mut state = AdamState::new(&[(1, 1)]);
        let lr = 0.002;
        adam_step(&mut [&mut p], &[Some(&g)], &mut state, lr).unwrap();
        // m̂ = g, v̂ = g², so the step is lr·g/(|g| + ε)
        let expected = 1.0 - lr / (1.0 + 1e-8);
        assert!((p.get(0, 0) - expected).abs() < 1e-15);
        assert!((1.0 - p.get(0, 0) - lr).abs() < 1e-10);
    }

    #[test]
    fn identical_snapshots_give_identical_updates() {
        let mut a = DenseMatrix::from_rows(&[[0.1, 0.2, 0.3]]).unwrap();
        let g = DenseMatrix::from_rows(&[[0.5, -1.0, 2.0]]).unwrap();
        let mut state = AdamState::new(&[(1, 3)]);
        adam_step(&mut [&mut a], &[Some(&g)], &mut state, 0.01).unwrap();
        let (mut x, mut y) = (a.clone(), a.clone());
        let (mut sx, mut sy) = (state.clone(), state.clone());
        adam_step(&mut [&mut x], &[Some(&g)], &mut sx, 0.01).unwrap();
        adam_step(&mut [&mut y], &[Some(&g)], &mut sy, 0.01).unwrap();
        assert_eq!(x, y);
        assert_eq!(sx, sy);
    }

    #[test]
    fn shape_mismatch_is_rejected() {
        let mut p = DenseMatrix::zeros(2, 2);
        let g = DenseMatrix::zeros(2, 3);
        let mut state = AdamState::new(&[(2, 2)]);
        assert!(matches!(
            adam_step(&mut [&mut p], &[Some(&g)], &mut state, 0.1),
            Err(Error::Dimension { .. })
        ));
        assert_eq!(state.step(), 0);
    }
}
