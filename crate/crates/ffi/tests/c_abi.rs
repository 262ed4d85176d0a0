use std::ffi::{CStr, CString};
use std::ptr;

use ict_ffi::*;

fn last_error() -> String {
    let p = ict_last_error_message();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

fn small_config() -> IctTrainConfig {
    let mut c = IctTrainConfig::default();
    unsafe { assert_eq!(ict_train_config_default(&mut c), IctStatus::Ok) };
    c.n = 400;
    c.unlabeled_count = 200;
    c.validation_count = 50;
    c.test_count = 100;
    c.epochs = 5;
    c
}

#[test]
fn pure_functions() {
    let mut lr = -1.0;
    unsafe {
        assert_eq!(ict_cosine_lr(0, 100, 0.1, &mut lr), IctStatus::Ok);
        assert_eq!(lr, 0.1);
        assert_eq!(ict_cosine_lr(100, 100, 0.1, &mut lr), IctStatus::Ok);
        assert_eq!(lr, 0.0);
        assert_eq!(
            ict_cosine_lr(101, 100, 0.1, &mut lr),
            IctStatus::InvalidArgument
        );
        assert!(!last_error().is_empty());
        assert_eq!(
            ict_cosine_lr(0, 100, 0.1, ptr::null_mut()),
            IctStatus::NullPointer
        );
    }
    assert!((ict_ramp_w(0, 10, 1.0) - (-5.0f64).exp()).abs() < 1e-12);
    assert_eq!(ict_ramp_w(10, 10, 3.0), 3.0);
    let v = unsafe { CStr::from_ptr(ict_version()) }.to_str().unwrap();
    assert_eq!(v, env!("CARGO_PKG_VERSION"));
}

#[test]
fn two_moons_buffers_match_core() {
    let n = 50;
    let mut x = vec![0.0; 2 * n];
    let mut y = vec![9usize; n];
    unsafe {
        assert_eq!(
            ict_two_moons(n, 0.1, 7, x.as_mut_ptr(), y.as_mut_ptr()),
            IctStatus::Ok
        );
    }
    let ds = ict_core::data::two_moons(n, 0.1, 7).unwrap();
    assert_eq!(x, ds.inputs().as_slice());
    assert_eq!(y, ds.labels().unwrap());
    unsafe {
        assert_eq!(
            ict_two_moons(0, 0.1, 7, x.as_mut_ptr(), y.as_mut_ptr()),
            IctStatus::InvalidArgument
        );
        assert_eq!(
            ict_two_moons(n, 0.1, 7, ptr::null_mut(), y.as_mut_ptr()),
            IctStatus::NullPointer
        );
    }
}

#[test]
fn train_save_load_predict() {
    let dir = tempfile::tempdir().unwrap();
    let path = CString::new(dir.path().join("m.ckpt").to_str().unwrap()).unwrap();
    let c = small_config();
    let mut net: *mut IctNetwork = ptr::null_mut();
    let mut err = f64::NAN;
    unsafe {
        assert_eq!(ict_train_two_moons(&c, &mut net, &mut err), IctStatus::Ok);
        assert!(!net.is_null());
        assert!((0.0..=100.0).contains(&err));
        assert_eq!(ict_network_input_dim(net), 2);
        assert_eq!(ict_network_num_classes(net), 2);
        assert_eq!(ict_network_save(net, path.as_ptr()), IctStatus::Ok);

        let mut back: *mut IctNetwork = ptr::null_mut();
        assert_eq!(ict_network_load(path.as_ptr(), &mut back), IctStatus::Ok);
        let x = [0.0, 0.5, 1.0, -0.3, 2.0, 0.1];
        let mut p1 = [0.0; 6];
        let mut p2 = [0.0; 6];
        assert_eq!(
            ict_network_predict(net, x.as_ptr(), 3, 2, p1.as_mut_ptr(), 6),
            IctStatus::Ok
        );
        assert_eq!(
            ict_network_predict(back, x.as_ptr(), 3, 2, p2.as_mut_ptr(), 6),
            IctStatus::Ok
        );
        assert_eq!(p1, p2);
        for r in p1.chunks(2) {
            assert!((r[0] + r[1] - 1.0).abs() < 1e-12);
        }
        // wrong width and short output buffer
        assert_eq!(
            ict_network_predict(net, x.as_ptr(), 2, 3, p1.as_mut_ptr(), 6),
            IctStatus::Dimension
        );
        assert_eq!(
            ict_network_predict(net, x.as_ptr(), 3, 2, p1.as_mut_ptr(), 5),
            IctStatus::Dimension
        );
        ict_network_free(back);
        ict_network_free(net);
        ict_network_free(ptr::null_mut());
    }
}

#[test]
fn training_is_deterministic_and_methods_differ() {
    let c = small_config();
    let run = |c: &IctTrainConfig| unsafe {
        let mut net = ptr::null_mut();
        let mut err = 0.0;
        assert_eq!(ict_train_two_moons(c, &mut net, &mut err), IctStatus::Ok);
        let x = [0.3, 0.2];
        let mut p = [0.0; 2];
        assert_eq!(
            ict_network_predict(net, x.as_ptr(), 1, 2, p.as_mut_ptr(), 2),
            IctStatus::Ok
        );
        ict_network_free(net);
        (err, p)
    };
    assert_eq!(run(&c), run(&c));
    let sup = IctTrainConfig {
        method: IctMethod::Supervised,
        ..c
    };
    assert_ne!(run(&c).1, run(&sup).1);
}

#[test]
fn errors_are_reported() {
    let mut net: *mut IctNetwork = ptr::null_mut();
    let missing = CString::new("/nonexistent/dir/m.ckpt").unwrap();
    unsafe {
        assert_eq!(ict_network_load(missing.as_ptr(), &mut net), IctStatus::Io);
        assert!(last_error().contains("nonexistent"));
        assert!(net.is_null());
        assert_eq!(
            ict_network_load(ptr::null(), &mut net),
            IctStatus::NullPointer
        );

        let dir = tempfile::tempdir().unwrap();
        let bad = dir.path().join("bad.ckpt");
        std::fs::write(&bad, "not a checkpoint\n").unwrap();
        let bad = CString::new(bad.to_str().unwrap()).unwrap();
        assert_eq!(ict_network_load(bad.as_ptr(), &mut net), IctStatus::Parse);

        let mut c = small_config();
        c.ema_decay = 2.0;
        assert_eq!(
            ict_train_two_moons(&c, &mut net, ptr::null_mut()),
            IctStatus::InvalidArgument
        );
        let mut c = small_config();
        c.labels_per_class = 1000;
        assert_eq!(
            ict_train_two_moons(&c, &mut net, ptr::null_mut()),
            IctStatus::InfeasibleSplit
        );
        assert!(net.is_null());
    }
}
