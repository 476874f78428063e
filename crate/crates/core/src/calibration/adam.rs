/// First-order Adam optimizer over a fixed-size parameter vector.
#[derive(Debug, Clone, PartialEq)]
pub struct Adam<const N: usize> {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    m: [f64; N],
    v: [f64; N],
    t: i32,
}

impl<const N: usize> Adam<N> {
    pub fn new(learning_rate: f64, beta1: f64, beta2: f64, epsilon: f64) -> Self {
        Adam {
            learning_rate,
            beta1,
            beta2,
            epsilon,
            m: [0.0; N],
            v: [0.0; N],
            t: 0,
        }
    }

    pub fn steps_taken(&self) -> i32 {
        self.t
    }

    /// Moves `params` one bias-corrected step against `grad`.
    pub fn step(&mut self, params: &mut [f64; N], grad: &[f64; N]) {
        self.t += 1;
        let c1 = 1.0 - self.beta1.powi(self.t);
        let c2 = 1.0 - self.beta2.powi(self.t);
        for i in 0..N {
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * grad[i];
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * grad[i] * grad[i];
            let m_hat = self.m[i] / c1;
            let v_hat = self.v[i] / c2;
            params[i] -= self.learning_rate * m_hat / (v_hat.sqrt() + self.epsilon);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_step_has_learning_rate_magnitude() {
        let mut adam = Adam::<2>::new(0.1, 0.9, 0.999, 1e-8);
        let mut p = [1.0, -1.0];
        adam.step(&mut p, &[3.0, -0.01]);
        assert!((p[0] - 0.9).abs() < 1e-6);
        assert!((p[1] + 0.9).abs() < 1e-5);
    }

    #[test]
    fn minimizes_a_quadratic() {
        let mut adam = Adam::<3>::new(0.05, 0.9, 0.999, 1e-8);
        let target = [1.0, -2.0, 0.5];
        let mut p = [0.0; 3];
        for _ in 0..2000 {
            let g = [0, 1, 2].map(|i| 2.0 * (p[i] - target[i]));
            adam.step(&mut p, &g);
        }
        for i in 0..3 {
            assert!((p[i] - target[i]).abs() < 1e-3);
        }
    }

    #[test]
    fn zero_gradient_is_stationary() {
        let mut adam = Adam::<1>::new(1.0, 0.9, 0.999, 1e-8);
        let mut p = [4.0];
        adam.step(&mut p, &[0.0]);
        assert_eq!(p, [4.0]);
    }
}
