use crate::error::{domain, Error, Result};

/// Bias-corrected Adam moments for one parameter vector.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub first_moment: Vec<f64>,
    pub second_moment: Vec<f64>,
    pub step_count: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub learning_rate: f64,
}

impl AdamState {
    pub fn new(num_params: usize, learning_rate: f64) -> Self {
        Self {
            first_moment: vec![0.0; num_params],
            second_moment: vec![0.0; num_params],
            step_count: 0,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            learning_rate,
        }
    }

    /// Applies one update in place. Non-finite gradients are rejected and
    /// leave both the parameters and the moments untouched.
    pub fn step(&mut self, params: &mut [f64], grads: &[f64]) -> Result<()> {
        if params.len() != grads.len() || params.len() != self.first_moment.len() {
            return Err(domain(format!(
                "adam shapes differ: {} params, {} grads, {} moments",
                params.len(),
                grads.len(),
                self.first_moment.len()
            )));
        }
        if grads.iter().any(|g| !g.is_finite()) {
            return Err(Error::NonFinite("gradient passed to adam".into()));
        }
        self.step_count += 1;
        let t = self.step_count as i32;
        let c1 = 1.0 - self.beta1.powi(t);
        let c2 = 1.0 - self.beta2.powi(t);
        for (((p, g), m), v) in params
            .iter_mut()
            .zip(grads)
            .zip(&mut self.first_moment)
            .zip(&mut self.second_moment)
        {
            *m = self.beta1 * *m + (1.0 - self.beta1) * g;
            *v = self.beta2 * *v + (1.0 - self.beta2) * g * g;
            let m_hat = *m / c1;
            let v_hat = *v / c2;
            *p -= self.learning_rate * m_hat / (v_hat.sqrt() + self.epsilon);
        }
        Ok(())
    }
}

/// Free-function form of [`AdamState::step`].
pub fn adam_step(state: &mut AdamState, params: &mut [f64], grads: &[f64]) -> Result<()> {
    state.step(params, grads)
}

/// Euclidean norm across several gradient slices.
pub fn global_norm(slices: &[&[f64]]) -> f64 {
    slices.iter().flat_map(|s| s.iter()).map(|g| g * g).sum::<f64>().sqrt()
}

/// Rescales the slices so their joint norm is at most `max_norm`; returns the
/// norm before clipping.
pub fn clip_global_norm(slices: &mut [&mut [f64]], max_norm: f64) -> f64 {
    let norm = slices.iter().flat_map(|s| s.iter()).map(|g| g * g).sum::<f64>().sqrt();
    if norm > max_norm && norm.is_finite() {
        let scale = max_norm / norm;
        for s in slices.iter_mut() {
            s.iter_mut().for_each(|g| *g *= scale);
        }
    }
    norm
}
