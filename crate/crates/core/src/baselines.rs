//! Comparison methods: Lin-UCB and the uncapped actor-critic.

use crate::actor::{fit_actor_critic, ActorConfig, ActorCriticFit};
use crate::critic::CriticConfig;
use crate::envsim::Trajectory;
use crate::error::Result;
use crate::features::{reward_dim, reward_feature, Action};
use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use serde::{Deserialize, Serialize};

/// Lin-UCB over the shared reward feature `x(s, a)`.
///
/// Keeps `A = I + Σ x xᵀ` and `b = Σ r x` and scores an action by
/// `xᵀA⁻¹b + α √(xᵀA⁻¹x)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinUcbState {
    /// Row-major `u × u` Gram accumulator.
    a: Vec<f64>,
    b: Vec<f64>,
    pub alpha_ucb: f64,
    dim: usize,
}

impl LinUcbState {
    /// Fresh state for `p`-dimensional contexts with `A = I`, `b = 0`.
    pub fn new(p: usize, alpha_ucb: f64) -> Self {
        let u = reward_dim(p);
        Self {
            a: DMatrix::<f64>::identity(u, u)
                .transpose()
                .as_slice()
                .to_vec(),
            b: vec![0.0; u],
            alpha_ucb,
            dim: u,
        }
    }

    pub fn gram(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.dim, self.dim, &self.a)
    }

    pub fn rhs(&self) -> DVector<f64> {
        DVector::from_column_slice(&self.b)
    }

    fn factor(&self) -> Cholesky<f64, Dyn> {
        self.gram()
            .cholesky()
            .expect("Lin-UCB Gram matrix stays positive definite")
    }

    pub fn score(&self, s: &[f64], a: Action) -> f64 {
        let chol = self.factor();
        let theta = chol.solve(&self.rhs());
        score_with(&chol, &theta, self.alpha_ucb, s, a)
    }

    /// UCB action; ties go to action 1.
    pub fn select(&self, s: &[f64]) -> Action {
        LinUcbPolicy::new(self).select(s)
    }

    /// Rank-one update with the logged `(s, a, r)`.
    pub fn update(&mut self, s: &[f64], a: Action, r: f64) {
        let x = reward_feature(s, a);
        let u = self.dim;
        for i in 0..u {
            for j in 0..u {
                self.a[i * u + j] += x[i] * x[j];
            }
            self.b[i] += r * x[i];
        }
    }

    /// Online pass over a logged trajectory, updating on every tuple.
    pub fn train(data: &Trajectory, p: usize, alpha_ucb: f64) -> Self {
        let mut state = Self::new(p, alpha_ucb);
        for t in &data.tuples {
            state.update(&t.state, t.action, t.reward);
        }
        state
    }
}

fn score_with(
    chol: &Cholesky<f64, Dyn>,
    theta: &DVector<f64>,
    alpha: f64,
    s: &[f64],
    a: Action,
) -> f64 {
    let x = reward_feature(s, a);
    let width = x.dot(&chol.solve(&x)).max(0.0).sqrt();
    x.dot(theta) + alpha * width
}

/// Frozen Lin-UCB decision rule with the factorization cached.
#[derive(Clone, Debug)]
pub struct LinUcbPolicy {
    chol: Cholesky<f64, Dyn>,
    theta: DVector<f64>,
    alpha: f64,
}

impl LinUcbPolicy {
    pub fn new(state: &LinUcbState) -> Self {
        let chol = state.factor();
        let theta = chol.solve(&state.rhs());
        Self {
            chol,
            theta,
            alpha: state.alpha_ucb,
        }
    }

    pub fn select(&self, s: &[f64]) -> Action {
        let s0 = score_with(&self.chol, &self.theta, self.alpha, s, Action::Zero);
        let s1 = score_with(&self.chol, &self.theta, self.alpha, s, Action::One);
        if s1 >= s0 {
            Action::One
        } else {
            Action::Zero
        }
    }
}

/// Uncapped actor-critic: ridge critic, actor with all weights one.
pub fn fit_s_accb(data: &Trajectory, zeta: f64, lambda: f64) -> Result<ActorCriticFit> {
    fit_actor_critic(
        data,
        &CriticConfig::uncapped(zeta),
        &ActorConfig::with_lambda(lambda),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envsim::{generate_trajectory, SimConfig};
    use crate::rng::seeded;
    use rand::Rng;

    #[test]
    fn fresh_state_ties_to_one() {
        let st = LinUcbState::new(3, 0.0);
        assert_eq!(st.score(&[0.3, 1.0, -2.0], Action::Zero), 0.0);
        assert_eq!(st.select(&[0.3, 1.0, -2.0]), Action::One);
    }

    #[test]
    fn exploration_width_uses_feature_norm() {
        let st = LinUcbState::new(3, 1.0);
        let s = [1.0, 0.0, 0.0];
        assert!((st.score(&s, Action::One) - 2.0).abs() < 1e-12);
        assert!((st.score(&s, Action::Zero) - 2f64.sqrt()).abs() < 1e-12);
        assert_eq!(st.select(&s), Action::One);
    }

    #[test]
    fn update_accumulates() {
        // x(0, 0) = e₁
        let mut st = LinUcbState::new(3, 1.0);
        st.update(&[0.0; 3], Action::Zero, 5.0);
        let mut expect = DMatrix::<f64>::identity(8, 8);
        expect[(0, 0)] = 2.0;
        assert_eq!(st.gram(), expect);
        let mut b = DVector::zeros(8);
        b[0] = 5.0;
        assert_eq!(st.rhs(), b);

        let before = st.rhs();
        st.update(&[1.0, 2.0, 3.0], Action::One, 0.0);
        assert_eq!(st.rhs(), before);
        assert_ne!(st.gram()[(1, 1)], 1.0);
    }

    #[test]
    fn updates_commute() {
        let mut a = LinUcbState::new(3, 1.0);
        let mut b = LinUcbState::new(3, 1.0);
        let u1 = ([0.5, -1.0, 2.0], Action::One, 3.0);
        let u2 = ([1.5, 0.0, -0.25], Action::Zero, -2.0);
        a.update(&u1.0, u1.1, u1.2);
        a.update(&u2.0, u2.1, u2.2);
        b.update(&u2.0, u2.1, u2.2);
        b.update(&u1.0, u1.1, u1.2);
        assert_eq!(a, b);
    }

    #[test]
    fn learns_the_better_arm() {
        let mut st = LinUcbState::new(3, 0.1);
        let mut rng = seeded(3);
        for _ in 0..500 {
            let s: Vec<f64> = (0..3).map(|_| rng.random_range(-1.0..1.0)).collect();
            let a = Action::from_bool(rng.random_bool(0.5));
            let r = if a == Action::Zero { 10.0 } else { 0.0 };
            st.update(&s, a, r);
            assert!(st.gram().cholesky().is_some());
        }
        assert_eq!(st.select(&[0.2, -0.4, 0.1]), Action::Zero);
    }

    #[test]
    fn s_accb_is_uncapped_pipeline() {
        let data = generate_trajectory(&SimConfig::default(), &mut seeded(12));
        let a = fit_s_accb(&data, 0.001, 0.001).unwrap();
        let b = fit_actor_critic(
            &data,
            &CriticConfig::uncapped(0.001),
            &ActorConfig::with_lambda(0.001),
        )
        .unwrap();
        assert_eq!(a, b);
        assert!(a.critic.weights.iter().all(|&u| u == 1.0));
    }

    #[test]
    fn json_round_trip() {
        let mut st = LinUcbState::new(3, 0.7);
        st.update(&[1.0, 2.0, 3.0], Action::One, 4.0);
        let back: LinUcbState = serde_json::from_str(&serde_json::to_string(&st).unwrap()).unwrap();
        assert_eq!(back, st);
    }
}
