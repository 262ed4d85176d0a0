//! End-to-end training properties on small two-moons problems.

use ict_core::cli::{prepare_data, run_training, RunOptions};
use ict_core::data::{split, two_moons, SplitSpec, Splits};
use ict_core::ict::{train, train_with_observer, IctConfig, Method, TrainData, UnlabeledPairing};
use ict_core::nn::write_checkpoint;
use ict_core::Error;

fn small_splits(seed: u64) -> Splits {
    let ds = two_moons(400, 0.1, seed).unwrap();
    split(
        &ds,
        &SplitSpec {
            unlabeled_count: 200,
            validation_count: 50,
            test_count: 100,
            seed,
            ..SplitSpec::default()
        },
    )
    .unwrap()
}

fn data(s: &Splits) -> TrainData<'_> {
    TrainData {
        labeled: &s.labeled,
        unlabeled: &s.unlabeled,
        validation: s.validation.as_ref(),
    }
}

fn config(method: Method, epochs: usize) -> IctConfig {
    let mut c = IctConfig::for_method(method);
    c.total_epochs = epochs;
    c.unlabeled_batch = 50;
    c.seed = 11;
    c
}

fn ckpt_bytes(net: &ict_core::Network) -> Vec<u8> {
    let mut b = Vec::new();
    write_checkpoint(net, &mut b).unwrap();
    b
}

#[test]
fn runs_are_bitwise_reproducible() {
    let s = small_splits(1);
    let c = config(Method::Ict, 5);
    let a = train(&c, data(&s)).unwrap();
    let b = train(&c, data(&s)).unwrap();
    assert_eq!(a.state.loss_trace, b.state.loss_trace);
    assert_eq!(ckpt_bytes(&a.teacher), ckpt_bytes(&b.teacher));
    assert_eq!(ckpt_bytes(&a.student), ckpt_bytes(&b.student));

    let other = IctConfig { seed: 12, ..c };
    assert_ne!(
        train(&other, data(&s)).unwrap().state.loss_trace,
        a.state.loss_trace
    );
}

#[test]
fn zero_weight_matches_supervised_mixup_bitwise() {
    let s = small_splits(2);
    let zero = IctConfig {
        w_max: 0.0,
        ..config(Method::Ict, 4)
    };
    let sup = config(Method::SupervisedMixup, 4);
    let a = train(&zero, data(&s)).unwrap();
    let b = train(&sup, data(&s)).unwrap();
    assert_eq!(a.state.loss_trace, b.state.loss_trace);
    assert_eq!(ckpt_bytes(&a.student), ckpt_bytes(&b.student));
    assert_eq!(ckpt_bytes(&a.teacher), ckpt_bytes(&b.teacher));
    assert!(a
        .state
        .loss_trace
        .iter()
        .all(|r| r.w == 0.0 && r.total_loss == r.supervised_loss));
}

#[test]
fn teacher_follows_student_with_zero_decay() {
    let s = small_splits(3);
    // after-step update: teacher is the current student
    let after = IctConfig {
        ema_decay: 0.0,
        ema_after_step: true,
        ..config(Method::Ict, 3)
    };
    let mut steps = 0;
    train_with_observer(&after, data(&s), |_, m| {
        assert_eq!(m.teacher.network().flat_params(), m.student.flat_params());
        steps += 1;
        Ok(())
    })
    .unwrap();
    assert_eq!(steps, 12);

    // default ordering: teacher is the student before the step
    let before = IctConfig {
        ema_decay: 0.0,
        ..config(Method::Ict, 3)
    };
    let mut previous = None;
    train_with_observer(&before, data(&s), |_, m| {
        if let Some(p) = previous.replace(m.student.flat_params()) {
            assert_eq!(m.teacher.network().flat_params(), p);
        }
        Ok(())
    })
    .unwrap();
}

#[test]
fn trace_shape() {
    let s = small_splits(4);
    let out = train(&config(Method::Ict, 3), data(&s)).unwrap();
    let t = &out.state.loss_trace;
    assert_eq!(out.steps_per_epoch, 4);
    assert_eq!(t.len(), 12);
    assert_eq!(t[0].lr, 0.1);
    assert!(t.windows(2).all(|w| w[1].w >= w[0].w && w[1].lr <= w[0].lr));
    let val: Vec<_> = t.iter().filter_map(|r| r.val_error).collect();
    assert_eq!(val.len(), 3);
    assert_eq!(
        t.iter()
            .filter(|r| r.val_error.is_some())
            .map(|r| r.step)
            .collect::<Vec<_>>(),
        [4, 8, 12]
    );
    let best = out.best.as_ref().unwrap();
    assert_eq!(
        best.val_error,
        val.iter().cloned().fold(f64::INFINITY, f64::min)
    );
}

#[test]
fn every_method_and_pairing_trains() {
    let s = small_splits(5);
    for m in Method::ALL {
        for p in [
            UnlabeledPairing::Independent,
            UnlabeledPairing::ShuffledSelf,
        ] {
            let c = IctConfig {
                pairing: p,
                ..config(m, 2)
            };
            let out = train(&c, data(&s)).unwrap();
            assert!(out
                .state
                .loss_trace
                .iter()
                .all(|r| r.total_loss.is_finite()));
        }
    }
}

#[test]
fn zero_epochs_returns_initial_network() {
    let s = small_splits(6);
    let out = train(&config(Method::Ict, 0), data(&s)).unwrap();
    assert_eq!(out.state.step, 0);
    assert_eq!(out.student, out.teacher);
}

#[test]
fn divergence_reports_step() {
    let s = small_splits(7);
    let c = IctConfig {
        base_lr: 1e200,
        ..config(Method::Ict, 2)
    };
    match train(&c, data(&s)) {
        Err(Error::NonFinite(msg)) => assert!(msg.contains("at step"), "{msg}"),
        other => panic!(
            "expected a numeric failure, got {:?}",
            other.map(|o| o.state.step)
        ),
    }
}

#[test]
fn mismatched_dimensions_are_rejected() {
    let s = small_splits(8);
    let wide =
        ict_core::data::gaussian_clusters(&[vec![0.0; 3], vec![1.0; 3]], 20, 0.1, &[0, 1], 0)
            .unwrap();
    let d = TrainData {
        labeled: &s.labeled,
        unlabeled: &wide,
        validation: None,
    };
    assert!(matches!(
        train(&config(Method::Ict, 1), d),
        Err(Error::Dimension(_))
    ));
}

#[test]
fn shared_runner_reports_test_errors() {
    let opts = RunOptions {
        n: 400,
        unlabeled_count: 200,
        validation_count: 50,
        test_count: 100,
        ..RunOptions::default()
    };
    let d = prepare_data(&opts, 9).unwrap();
    let r = run_training(&config(Method::Ict, 2), &d, |_, _| Ok(())).unwrap();
    let e = r.final_test_error.unwrap();
    assert!((0.0..=100.0).contains(&e));
    assert_eq!(
        e,
        ict_core::eval::error_rate(r.outcome.final_network(), d.splits.test.as_ref().unwrap())
            .unwrap()
    );
}
