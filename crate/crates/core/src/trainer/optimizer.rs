/// Adam with bias correction.
#[derive(Clone, Debug, PartialEq)]
pub struct Adam {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub state: AdamState,
}

#[derive(Clone, Debug, PartialEq)]
pub struct AdamState {
    pub t: u64,
    pub m: Vec<f64>,
    pub v: Vec<f64>,
}

impl Adam {
    pub fn new(learning_rate: f64, n_params: usize) -> Self {
        Self {
            learning_rate,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            state: AdamState {
                t: 0,
                m: vec![0.0; n_params],
                v: vec![0.0; n_params],
            },
        }
    }

    /// Descends `params` along `grad`.
    pub fn step(&mut self, params: &mut [f64], grad: &[f64]) {
        let s = &mut self.state;
        s.t += 1;
        let bc1 = 1.0 - self.beta1.powi(s.t as i32);
        let bc2 = 1.0 - self.beta2.powi(s.t as i32);
        for (k, (p, g)) in params.iter_mut().zip(grad).enumerate() {
            s.m[k] = self.beta1 * s.m[k] + (1.0 - self.beta1) * g;
            s.v[k] = self.beta2 * s.v[k] + (1.0 - self.beta2) * g * g;
            let m_hat = s.m[k] / bc1;
            let v_hat = s.v[k] / bc2;
            *p -= self.learning_rate * m_hat / (v_hat.sqrt() + self.eps);
        }
    }
}
