mod common;

use common::*;
use rand::Rng;
use robandit::actor::{actor_gradient, actor_objective, fit_actor, ActorConfig};
use robandit::baselines::fit_s_accb;
use robandit::critic::{fit_critic, CriticConfig};
use robandit::envsim::{generate_trajectory, SimConfig};
use robandit::features::{policy_prob, Action, PolicyParams};
use robandit::fit_actor_critic;
use robandit::rng::seeded;

#[test]
fn boltzmann_matches_explicit_softmax() {
    let mut rng = seeded(1);
    for _ in 0..200 {
        let theta: Vec<f64> = (0..4).map(|_| 3.0 * normal(&mut rng)).collect();
        let s: Vec<f64> = (0..3).map(|_| normal(&mut rng)).collect();
        let want = boltzmann(&theta, &s);
        let params = PolicyParams::new(theta);
        assert!((policy_prob(&params, &s, Action::One) - want[1]).abs() < 1e-14);
        assert!((policy_prob(&params, &s, Action::Zero) - want[0]).abs() < 1e-14);
    }
}

#[test]
fn objective_and_gradient_match_the_term_by_term_oracle() {
    let mut rng = seeded(2);
    for _ in 0..50 {
        let w: Vec<f64> = (0..8).map(|_| normal(&mut rng)).collect();
        let data = linear_trajectory(&mut rng, 12, 3, &w, 0.0);
        let u: Vec<f64> = (0..12)
            .map(|_| if rng.random_bool(0.8) { 1.0 } else { 0.0 })
            .collect();
        let theta: Vec<f64> = (0..4).map(|_| normal(&mut rng)).collect();
        let lambda = rng.random_range(0.0..0.5);
        let params = PolicyParams::new(theta.clone());

        let got = actor_objective(&params, &data, &u, &w, lambda).unwrap();
        let want = actor_objective_oracle(&theta, &data, &u, &w, lambda);
        assert!((got - want).abs() <= 1e-12 * want.abs().max(1.0));

        let grad = actor_gradient(&params, &data, &u, &w, lambda).unwrap();
        let fd = central_diff(
            |t| actor_objective_oracle(t, &data, &u, &w, lambda),
            &theta,
            1e-5,
        );
        assert!(rel_err(grad.as_slice(), &fd) < 1e-6, "{grad:?} vs {fd:?}");
    }
}

#[test]
fn fitted_theta_is_stationary() {
    let data = generate_trajectory(&SimConfig::default(), &mut seeded(3));
    let fit = fit_actor_critic(&data, &CriticConfig::default(), &ActorConfig::default()).unwrap();
    assert!(fit.actor.converged);
    let grad = actor_gradient(
        &fit.actor.params,
        &data,
        &fit.critic.weights,
        &fit.critic.w,
        0.001,
    )
    .unwrap();
    assert!(grad.amax() <= 1e-8);
}

#[test]
fn without_rejections_robust_and_standard_pipelines_agree() {
    // bounded uniform noise and enough tuples that fitted residuals stay
    // close to the noise: the cap (≈1.31 amp²) keeps every tuple
    let w = [1500.0, 50.0, 0.0, -250.0, 125.0, 125.0, 200.0, 0.0];
    let data = linear_trajectory(&mut seeded(4), 2000, 3, &w, 1.0);
    let robust =
        fit_actor_critic(&data, &CriticConfig::default(), &ActorConfig::default()).unwrap();
    assert_eq!(robust.critic.n_rejected(), 0);
    let standard = fit_s_accb(&data, 0.001, 0.001).unwrap();
    for (a, b) in robust
        .actor
        .params
        .theta
        .iter()
        .zip(&standard.actor.params.theta)
    {
        assert!((a - b).abs() <= 1e-8 * b.abs().max(1.0));
    }
}

#[test]
fn an_enormous_reward_outlier_moves_only_the_standard_policy() {
    let w = [1.0, 0.5, -0.5, 0.25, 0.5, 1.0, -1.0, 0.5];
    let clean = linear_trajectory(&mut seeded(5), 100, 3, &w, 0.2);
    let mut dirty = clean.clone();
    let max_r = clean
        .tuples
        .iter()
        .fold(0.0f64, |m, t| m.max(t.reward.abs()));
    dirty.tuples[40].reward += 100.0 * max_r;
    dirty.outlier_mask[40] = true;

    let cfg = ActorConfig {
        lambda: 0.1,
        ..ActorConfig::default()
    };
    let reference = fit_actor(
        &clean,
        &vec![1.0; 100],
        &fit_critic(&clean, &CriticConfig::uncapped(0.001))
            .unwrap()
            .w,
        &cfg,
    )
    .unwrap()
    .params
    .theta;
    let robust = fit_actor_critic(&dirty, &CriticConfig::default(), &cfg).unwrap();
    let standard = fit_actor_critic(&dirty, &CriticConfig::uncapped(0.001), &cfg).unwrap();
    assert_eq!(robust.critic.weights[40], 0.0);
    let dist = |a: &[f64]| {
        a.iter()
            .zip(&reference)
            .map(|(x, y)| (x - y).powi(2))
            .sum::<f64>()
            .sqrt()
    };
    let d_robust = dist(&robust.actor.params.theta);
    let d_standard = dist(&standard.actor.params.theta);
    assert!(d_standard >= 10.0 * d_robust, "{d_standard} vs {d_robust}");
}
