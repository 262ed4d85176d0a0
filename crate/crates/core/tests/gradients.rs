//! Analytic gradients against central finite differences.

mod common;

use common::*;
use ict_core::ict::{ict_consistency_backward, ict_consistency_loss, mix};
use ict_core::nn::{cross_entropy, mse, LossSpec, Network};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const H: f64 = 1e-5;
const TOL: f64 = 1e-4;
// gradients below this are compared in absolute terms
const FLOOR: f64 = 1e-6;

fn dims_strategy() -> impl Strategy<Value = Vec<usize>> {
    (1usize..4, prop::collection::vec(1usize..7, 0..3), 2usize..4).prop_map(|(i, h, c)| {
        let mut d = vec![i];
        d.extend(h);
        d.push(c);
        d
    })
}

fn setup(
    dims: &[usize],
    rows: usize,
    seed: u64,
) -> Option<(Network, ict_core::Matrix, ChaCha8Rng)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let net = random_net(dims, &mut rng);
    let x = random_matrix(rows, dims[0], -2.0, 2.0, &mut rng);
    (relu_margin(&net, &x) > 1e-3).then_some((net, x, rng))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn cross_entropy_gradient(dims in dims_strategy(), rows in 1usize..6, seed in any::<u64>()) {
        let Some((net, x, mut rng)) = setup(&dims, rows, seed) else { return Ok(()) };
        let t = random_simplex(rows, *dims.last().unwrap(), &mut rng);
        let (v, g) = net.backward(&x, &LossSpec::CrossEntropy(&t)).unwrap();
        prop_assert_eq!(v, cross_entropy(&net.forward(&x).unwrap(), &t).unwrap());
        let n = numeric_gradient(&net, H, |p| cross_entropy(&p.forward(&x).unwrap(), &t).unwrap());
        let err = max_relative_error(&g.flatten(), &n, FLOOR);
        prop_assert!(err < TOL, "relative error {err}");
    }

    #[test]
    fn mse_gradient(dims in dims_strategy(), rows in 1usize..6, seed in any::<u64>()) {
        let Some((net, x, mut rng)) = setup(&dims, rows, seed) else { return Ok(()) };
        let t = random_simplex(rows, *dims.last().unwrap(), &mut rng);
        let (_, g) = net.backward(&x, &LossSpec::Mse(&t)).unwrap();
        let n = numeric_gradient(&net, H, |p| mse(&p.forward(&x).unwrap(), &t).unwrap());
        let err = max_relative_error(&g.flatten(), &n, FLOOR);
        prop_assert!(err < TOL, "relative error {err}");
    }

    #[test]
    fn consistency_gradient_ignores_teacher(
        dims in dims_strategy(), rows in 1usize..6, seed in any::<u64>(), lambda in 0.0f64..=1.0,
    ) {
        let Some((student, uj, mut rng)) = setup(&dims, rows, seed) else { return Ok(()) };
        let teacher = random_net(&dims, &mut rng);
        let uk = random_matrix(rows, dims[0], -2.0, 2.0, &mut rng);
        let um = mix(&uj, &uk, lambda).unwrap();
        prop_assume!(relu_margin(&student, &um) > 1e-3);
        let (v, g) = ict_consistency_backward(&student, &teacher, &uj, &uk, lambda).unwrap();
        prop_assert_eq!(v, ict_consistency_loss(&student, &teacher, &uj, &uk, lambda).unwrap());
        // only the student moves; the teacher targets are constants
        let n = numeric_gradient(&student, H, |p| {
            ict_consistency_loss(p, &teacher, &uj, &uk, lambda).unwrap()
        });
        let err = max_relative_error(&g.flatten(), &n, FLOOR);
        prop_assert!(err < TOL, "relative error {err}");
    }
}

#[test]
fn extreme_logits_stay_finite() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let net = random_net(&[2, 4, 2], &mut rng);
    let x = random_matrix(5, 2, 1e3, 1e4, &mut rng);
    let t = random_simplex(5, 2, &mut rng);
    for spec in [LossSpec::CrossEntropy(&t), LossSpec::Mse(&t)] {
        let (v, g) = net.backward(&x, &spec).unwrap();
        assert!(v.is_finite());
        assert!(g.first_non_finite_layer().is_none());
    }
}
