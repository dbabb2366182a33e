use super::layers::Parameter;
use super::matrix::Matrix;
use crate::error::{Error, Result};

pub const DEFAULT_BETA1: f64 = 0.9;
pub const DEFAULT_BETA2: f64 = 0.999;
pub const DEFAULT_EPSILON: f64 = 1e-8;

/// Moment estimates for one [`Parameter`].
#[derive(Clone, Debug, PartialEq)]
pub struct AdamState {
    pub first_moment: Matrix,
    pub second_moment: Matrix,
    pub timestep: u64,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl AdamState {
    pub fn new(rows: usize, cols: usize, lr: f64) -> Self {
        Self {
            first_moment: Matrix::zeros(rows, cols),
            second_moment: Matrix::zeros(rows, cols),
            timestep: 0,
            lr,
            beta1: DEFAULT_BETA1,
            beta2: DEFAULT_BETA2,
            epsilon: DEFAULT_EPSILON,
        }
    }

    pub fn for_parameter(param: &Parameter, lr: f64) -> Self {
        let (r, c) = param.value.shape();
        Self::new(r, c, lr)
    }
}

/// One bias-corrected Adam update of `param.value` from `param.grad`.
pub fn adam_step(param: &mut Parameter, state: &mut AdamState) -> Result<()> {
    if state.first_moment.shape() != param.value.shape() {
        return Err(Error::dim(
            "adam_step",
            state.first_moment.shape(),
            param.value.shape(),
        ));
    }
    state.timestep += 1;
    let t = state.timestep as i32;
    let (b1, b2) = (state.beta1, state.beta2);
    let correction1 = 1.0 - b1.powi(t);
    let correction2 = 1.0 - b2.powi(t);

    let values = param.value.as_mut_slice();
    let grads = param.grad.as_slice();
    let m = state.first_moment.as_mut_slice();
    let v = state.second_moment.as_mut_slice();
    for i in 0..values.len() {
        let g = grads[i];
        m[i] = b1 * m[i] + (1.0 - b1) * g;
        v[i] = b2 * v[i] + (1.0 - b2) * g * g;
        let m_hat = m[i] / correction1;
        let v_hat = v[i] / correction2;
        values[i] -= state.lr * m_hat / (v_hat.sqrt() + state.epsilon);
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_is_identity() {
        let mut p = Parameter::new(Matrix::from_rows(&[[0.3, -1.2, 4.0]]).unwrap());
        let before = p.value.clone();
        let mut s = AdamState::for_parameter(&p, 1e-3);
        for _ in 0..10 {
            adam_step(&mut p, &mut s).unwrap();
        }
        assert_eq!(p.value, before);
        assert_eq!(s.timestep, 10);
    }

    #[test]
    fn first_step_moves_by_learning_rate() {
        let mut p = Parameter::new(Matrix::from_rows(&[[2.0]]).unwrap());
        p.grad = Matrix::from_rows(&[[1.0]]).unwrap();
        let mut s = AdamState::for_parameter(&p, 0.1);
        adam_step(&mut p, &mut s).unwrap();
        // m̂ = 1, v̂ = 1 → Δ = 0.1 / (1 + 1e-8)
        assert!((p.value[(0, 0)] - (2.0 - 0.1 / (1.0 + 1e-8))).abs() < 1e-15);
    }

    #[test]
    fn constant_gradient_descends() {
        let mut p = Parameter::new(Matrix::from_rows(&[[0.0, 0.0]]).unwrap());
        p.grad = Matrix::from_rows(&[[0.5, -3.0]]).unwrap();
        let mut s = AdamState::for_parameter(&p, 0.01);
        for _ in 0..50 {
            adam_step(&mut p, &mut s).unwrap();
            assert!(s.second_moment.as_slice().iter().all(|&v| v >= 0.0));
        }
        assert!(p.value[(0, 0)] < 0.0);
        assert!(p.value[(0, 1)] > 0.0);
    }
}
