//! Adam with element-wise gradient value clipping.
//!
//! Gradients are clipped to [-10, 10] per element before the moment updates;
//! the update itself is the standard bias-corrected Adam recurrence.

use super::{Real, Tensor, TensorError};

#[derive(Debug, Clone)]
pub struct OptimizerState<T> {
    pub learning_rate: T,
    pub beta1: T,
    pub beta2: T,
    pub epsilon: T,
    /// Element-wise clip range applied to gradients before the update.
    pub clip_range: (T, T),
    pub step: u64,
    first_moment: Vec<Tensor<T>>,
    second_moment: Vec<Tensor<T>>,
}

impl<T: Real> OptimizerState<T> {
    /// Moments are allocated per parameter, in the order parameters will be
    /// passed to every subsequent step.
    pub fn new(learning_rate: T, shapes: &[Vec<usize>]) -> Self {
        OptimizerState {
            learning_rate,
            beta1: T::from_f64_lossy(0.9),
            beta2: T::from_f64_lossy(0.999),
            epsilon: T::from_f64_lossy(1e-8),
            clip_range: (T::from_f64_lossy(-10.0), T::from_f64_lossy(10.0)),
            step: 0,
            first_moment: shapes.iter().map(|s| Tensor::zeros(s.clone())).collect(),
            second_moment: shapes.iter().map(|s| Tensor::zeros(s.clone())).collect(),
        }
    }

    pub fn param_count(&self) -> usize {
        self.first_moment.len()
    }
}

/// Clip each gradient element to the state's range, then apply one Adam
/// step. `active[i] = false` leaves parameter i (and its moments) untouched,
/// which is how the embedding-finetuning horizon is enforced.
pub fn clip_then_adam_step<T: Real>(
    params: &mut [&mut Tensor<T>],
    grads: &[Tensor<T>],
    state: &mut OptimizerState<T>,
    active: &[bool],
) -> Result<(), TensorError> {
    if params.len() != grads.len()
        || params.len() != state.first_moment.len()
        || params.len() != active.len()
    {
        return Err(TensorError::InvalidArgument(format!(
            "parameter/gradient/moment count mismatch: {} vs {} vs {}",
            params.len(),
            grads.len(),
            state.first_moment.len()
        )));
    }
    for (i, p) in params.iter().enumerate() {
        if p.shape() != grads[i].shape() || p.shape() != state.first_moment[i].shape() {
            return Err(TensorError::ShapeMismatch(format!(
                "parameter {} has shape {:?}, gradient {:?}, moment {:?}",
                i,
                p.shape(),
                grads[i].shape(),
                state.first_moment[i].shape()
            )));
        }
    }

    state.step += 1;
    let t = state.step as i32;
    let (b1, b2) = (state.beta1, state.beta2);
    let bias1 = T::one() - b1.powi(t);
    let bias2 = T::one() - b2.powi(t);
    let (lo, hi) = state.clip_range;

    for (i, param) in params.iter_mut().enumerate() {
        if !active[i] {
            continue;
        }
        let m = state.first_moment[i].data_mut();
        let v = state.second_moment[i].data_mut();
        let pd = param.data_mut();
        for (k, &g_raw) in grads[i].data().iter().enumerate() {
            let g = g_raw.max(lo).min(hi);
            m[k] = b1 * m[k] + (T::one() - b1) * g;
            v[k] = b2 * v[k] + (T::one() - b2) * g * g;
            let m_hat = m[k] / bias1;
            let v_hat = v[k] / bias2;
            pd[k] -= state.learning_rate * m_hat / (v_hat.sqrt() + state.epsilon);
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn state_for(shapes: &[Vec<usize>]) -> OptimizerState<f64> {
        OptimizerState::new(0.001, shapes)
    }

    #[test]
    fn zero_gradient_zero_moments_leave_params_unchanged() {
        let mut p = Tensor::vector(vec![0.3, -0.2]);
        let g = Tensor::vector(vec![0.0, 0.0]);
        let mut st = state_for(&[vec![2]]);
        clip_then_adam_step(&mut [&mut p], &[g], &mut st, &[true]).unwrap();
        assert_eq!(p.data(), &[0.3, -0.2]);
        assert_eq!(st.step, 1);
    }

    #[test]
    fn first_step_moves_param_by_about_learning_rate() {
        // Hand trace: m=0.1, v=0.001, m_hat=1, v_hat=1,
        // delta = lr * 1 / (1 + 1e-8) ~ lr.
        let mut p = Tensor::scalar(0.0);
        let g = Tensor::scalar(1.0);
        let mut st = state_for(&[vec![1]]);
        clip_then_adam_step(&mut [&mut p], &[g], &mut st, &[true]).unwrap();
        assert!((p.item() + 0.001).abs() < 1e-9, "param {}", p.item());
    }

    #[test]
    fn oversized_gradient_is_clipped_to_ten() {
        // A gradient of 25 must behave exactly like a gradient of 10.
        let mut p_clipped = Tensor::scalar(0.5);
        let mut st1 = state_for(&[vec![1]]);
        clip_then_adam_step(
            &mut [&mut p_clipped],
            &[Tensor::scalar(25.0)],
            &mut st1,
            &[true],
        )
        .unwrap();

        let mut p_ten = Tensor::scalar(0.5);
        let mut st2 = state_for(&[vec![1]]);
        clip_then_adam_step(&mut [&mut p_ten], &[Tensor::scalar(10.0)], &mut st2, &[true]).unwrap();

        assert_eq!(p_clipped.item(), p_ten.item());
    }

    #[test]
    fn inactive_parameters_are_frozen() {
        let mut p = Tensor::scalar(0.5);
        let mut st = state_for(&[vec![1]]);
        clip_then_adam_step(&mut [&mut p], &[Tensor::scalar(3.0)], &mut st, &[false]).unwrap();
        assert_eq!(p.item(), 0.5);
        // Moments stayed zero through the frozen step, so the next (active)
        // step sees m = 0.1, v = 0.001 but bias correction at t = 2.
        clip_then_adam_step(&mut [&mut p], &[Tensor::scalar(1.0)], &mut st, &[true]).unwrap();
        let m_hat = 0.1 / (1.0 - 0.9f64.powi(2));
        let v_hat = 0.001 / (1.0 - 0.999f64.powi(2));
        let expected = 0.5 - 0.001 * m_hat / (v_hat.sqrt() + 1e-8);
        assert!((p.item() - expected).abs() < 1e-12, "param {}", p.item());
    }

    #[test]
    fn mismatched_shapes_are_rejected() {
        let mut p = Tensor::vector(vec![0.0, 1.0]);
        let g = Tensor::vector(vec![0.0; 3]);
        let mut st = state_for(&[vec![2]]);
        assert!(clip_then_adam_step(&mut [&mut p], &[g], &mut st, &[true]).is_err());
    }
}
