use super::{ParameterStore, Real};

#[derive(Debug, Clone, PartialEq)]
pub struct AdamState<T> {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub step: u64,
    first: Vec<Vec<T>>,
    second: Vec<Vec<T>>,
}

impl<T: Real> AdamState<T> {
    pub fn new(store: &ParameterStore<T>, learning_rate: f64) -> Self {
        let zeros: Vec<Vec<T>> = store
            .ids()
            .map(|id| vec![T::zero(); store.values(id).len()])
            .collect();
        AdamState {
            learning_rate,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            step: 0,
            first: zeros.clone(),
            second: zeros,
        }
    }
}

/// Bias-corrected Adam update of every parameter from its accumulated
/// gradient; clears the gradients and advances the step counter.
pub fn adam_step<T: Real>(store: &mut ParameterStore<T>, state: &mut AdamState<T>) {
    state.step += 1;
    let t = state.step as i32;
    let (b1, b2) = (T::of(state.beta1), T::of(state.beta2));
    let c1 = T::one() - b1.powi(t);
    let c2 = T::one() - b2.powi(t);
    let lr = T::of(state.learning_rate);
    let eps = T::of(state.epsilon);
    let ids: Vec<_> = store.ids().collect();
    for id in ids {
        let (values, grads) = store.value_and_grad_mut(id);
        let m = &mut state.first[id.index()];
        let v = &mut state.second[id.index()];
        for i in 0..values.len() {
            let g = grads[i];
            m[i] = b1 * m[i] + (T::one() - b1) * g;
            v[i] = b2 * v[i] + (T::one() - b2) * g * g;
            let m_hat = m[i] / c1;
            let v_hat = v[i] / c2;
            values[i] -= lr * m_hat / (v_hat.sqrt() + eps);
            grads[i] = T::zero();
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::neural::{Init, Tensor};

    fn scalar_store(x: f64) -> ParameterStore<f64> {
        let mut s = ParameterStore::new();
        s.insert("x", Tensor::from_values(&[1], vec![x]).unwrap()).unwrap();
        s
    }

    #[test]
    fn zero_gradients_leave_parameters() {
        let mut s = ParameterStore::<f64>::new();
        s.add("w", &[3, 2], Init::Xavier, 4).unwrap();
        let before = s.clone();
        let mut st = AdamState::new(&s, 0.1);
        adam_step(&mut s, &mut st);
        assert_eq!(s, before);
        assert_eq!(st.step, 1);
    }

    #[test]
    fn first_step_moves_by_learning_rate() {
        let mut s = ParameterStore::<f64>::new();
        let id = s.add("w", &[4], Init::Zeros, 0).unwrap();
        s.grad_mut(id).copy_from_slice(&[0.3, -2.0, 0.25, 50.0]);
        let mut st = AdamState::new(&s, 0.01);
        adam_step(&mut s, &mut st);
        for (v, sign) in s.values(id).iter().zip([-1.0, 1.0, -1.0, -1.0]) {
            assert!((v - sign * 0.01).abs() <= 1e-6 * 0.01, "{v}");
        }
        assert!(s.grad(id).iter().all(|g| *g == 0.0));
    }

    #[test]
    fn two_steps_match_reference_recurrences() {
        // reference written out term by term
        let (lr, b1, b2, eps) = (0.05f64, 0.9f64, 0.999f64, 1e-8f64);
        let gs = [0.7f64, -0.2];
        let mut x = 1.5f64;
        let (mut m, mut v) = (0.0f64, 0.0f64);
        for (t, g) in gs.iter().enumerate() {
            let t = (t + 1) as i32;
            m = b1 * m + (1.0 - b1) * g;
            v = b2 * v + (1.0 - b2) * g * g;
            let mh = m / (1.0 - b1.powi(t));
            let vh = v / (1.0 - b2.powi(t));
            x -= lr * mh / (vh.sqrt() + eps);
        }

        let mut s = scalar_store(1.5);
        let id = s.id("x").unwrap();
        let mut st = AdamState::new(&s, lr);
        for g in gs {
            s.grad_mut(id)[0] = g;
            adam_step(&mut s, &mut st);
        }
        assert!((s.values(id)[0] - x).abs() <= 1e-12);
        assert_eq!(st.step, 2);
    }
}
