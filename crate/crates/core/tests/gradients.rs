#![allow(clippy::needless_range_loop)]

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use varexplore::neural::{Activation, NetConfig, ParamRange, ThreeStreamNet};

/// `sum_a wq[a] q[a] + ws[a] sigma[a]`, whose gradient is what `backward`
/// computes for output gradients `(wq, ws)`.
fn objective(net: &ThreeStreamNet, obs: &[f64], wq: &[f64], ws: &[f64]) -> f64 {
    let out = net.forward(obs).unwrap();
    out.q.iter().zip(wq).map(|(q, w)| q * w).sum::<f64>()
        + out.sigma.iter().zip(ws).map(|(s, w)| s * w).sum::<f64>()
}

fn activation() -> impl Strategy<Value = Activation> {
    prop_oneof![Just(Activation::Tanh), Just(Activation::Identity)]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn backward_matches_central_differences(
        seed in 0u64..1000,
        trunk in prop::collection::vec(1usize..7, 0..3),
        head in prop::collection::vec(1usize..5, 0..2),
        num_actions in 1usize..5,
        act in activation(),
    ) {
        let cfg = NetConfig { obs_dim: 3, num_actions, trunk, head_hidden: head, activation: act };
        let mut net = ThreeStreamNet::new(cfg, seed).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for p in net.params_mut() {
            *p += rng.random_range(-0.2..0.2);
        }
        let obs: Vec<f64> = (0..3).map(|_| rng.random_range(-1.0..1.0)).collect();
        let wq: Vec<f64> = (0..num_actions).map(|_| rng.random_range(-1.0..1.0)).collect();
        let ws: Vec<f64> = (0..num_actions).map(|_| rng.random_range(-1.0..1.0)).collect();
        let (_, cache) = net.forward_cached(&obs).unwrap();
        let mut grads = vec![0.0; net.num_params()];
        net.backward(&cache, &wq, &ws, &mut grads).unwrap();
        let h = 1e-6;
        for i in 0..net.num_params() {
            let orig = net.params()[i];
            net.params_mut()[i] = orig + h;
            let up = objective(&net, &obs, &wq, &ws);
            net.params_mut()[i] = orig - h;
            let down = objective(&net, &obs, &wq, &ws);
            net.params_mut()[i] = orig;
            let fd = (up - down) / (2.0 * h);
            prop_assert!((fd - grads[i]).abs() <= 1e-6 * fd.abs().max(1.0), "param {}: fd {} vs {}", i, fd, grads[i]);
        }
    }
}

#[test]
fn relu_gradients_away_from_kinks() {
    let cfg = NetConfig {
        obs_dim: 2,
        num_actions: 3,
        trunk: vec![8, 8],
        head_hidden: vec![4],
        activation: Activation::Relu,
    };
    let net = ThreeStreamNet::new(cfg, 3).unwrap();
    let obs = [0.3, -0.7];
    let (_, cache) = net.forward_cached(&obs).unwrap();
    let mut grads = vec![0.0; net.num_params()];
    net.backward(&cache, &[1.0, -0.5, 0.25], &[0.0; 3], &mut grads)
        .unwrap();
    let mut probe = net.clone();
    let h = 1e-7;
    for i in 0..net.num_params() {
        let orig = probe.params()[i];
        probe.params_mut()[i] = orig + h;
        let up = objective(&probe, &obs, &[1.0, -0.5, 0.25], &[0.0; 3]);
        probe.params_mut()[i] = orig - h;
        let down = objective(&probe, &obs, &[1.0, -0.5, 0.25], &[0.0; 3]);
        probe.params_mut()[i] = orig;
        assert!(
            ((up - down) / (2.0 * h) - grads[i]).abs() < 1e-5,
            "param {i}"
        );
    }
    // no sigma signal: the sigma head gets nothing
    assert!(grads[net.param_range(ParamRange::Sigma)]
        .iter()
        .all(|&g| g == 0.0));
}
