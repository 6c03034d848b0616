use std::ffi::{CStr, CString};
use std::ptr;

use aerobeam_ffi::*;

const SMALL: &str = r#"
[scenario]
B = 2
K = 2
N_b = 4
N_b0 = 4
T = 3
[hyperparams]
episodes = 1
batch_size = 4
"#;

fn config(text: &str) -> *mut AbConfig {
    let text = CString::new(text).unwrap();
    let mut cfg = ptr::null_mut();
    assert_eq!(unsafe { ab_config_from_toml(text.as_ptr(), &mut cfg) }, AbStatus::Ok);
    cfg
}

fn last_error() -> String {
    let p = ab_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

#[test]
fn bad_config_reports_a_config_error() {
    let text = CString::new("[scenario]\nN_b = 5").unwrap();
    let mut cfg = ptr::null_mut();
    assert_eq!(unsafe { ab_config_from_toml(text.as_ptr(), &mut cfg) }, AbStatus::Config);
    assert!(cfg.is_null());
    assert!(last_error().contains("square"), "{}", last_error());
}

#[test]
fn null_arguments_are_rejected() {
    let mut cfg = ptr::null_mut();
    assert_eq!(unsafe { ab_config_from_toml(ptr::null(), &mut cfg) }, AbStatus::NullPointer);
    assert_eq!(unsafe { ab_env_new(ptr::null(), ptr::null_mut()) }, AbStatus::NullPointer);
    unsafe { ab_config_free(ptr::null_mut()) };
}

#[test]
fn config_round_trips_through_toml() {
    let cfg = config(SMALL);
    let mut text = ptr::null_mut();
    assert_eq!(unsafe { ab_config_to_toml(cfg, &mut text) }, AbStatus::Ok);
    let s = unsafe { CStr::from_ptr(text) }.to_str().unwrap().to_owned();
    let again = config(&s);
    unsafe {
        ab_string_free(text);
        ab_config_free(again);
        ab_config_free(cfg);
    }
}

#[test]
fn environment_steps_with_baseline_and_custom_beams() {
    let cfg = config(SMALL);
    let mut env = ptr::null_mut();
    unsafe {
        assert_eq!(ab_env_new(cfg, &mut env), AbStatus::Ok);
        let mut rates = AbRates::default();
        assert_eq!(ab_env_evaluate_baseline(env, AbMethod::Zf, &mut rates), AbStatus::InvalidArgument);
        assert_eq!(ab_env_reset(env, 5, 0), AbStatus::Ok);
        assert_eq!(ab_env_evaluate_baseline(env, AbMethod::Zf, &mut rates), AbStatus::Ok);
        assert!(rates.sum_rate > 0.0 && (rates.reward * 4.0 - rates.sum_rate).abs() < 1e-9);

        // HAPS 4×4 plus two HABs 4×2, interleaved re/im.
        let len = ab_env_beam_len(env);
        assert_eq!(len, 2 * (16 + 8 + 8));
        let beams: Vec<f64> = (0..len).map(|i| ((i * 7919) % 13) as f64 - 6.0).collect();
        let mut custom = AbRates::default();
        assert_eq!(ab_env_evaluate_beams(env, beams.as_ptr(), len, &mut custom), AbStatus::Ok);
        assert!(custom.sum_rate.is_finite());
        assert_eq!(ab_env_evaluate_beams(env, beams.as_ptr(), len - 2, &mut custom), AbStatus::Dimension);

        let mut h = vec![0.0; 8];
        assert_eq!(ab_env_channel(env, 1, 0, h.as_mut_ptr(), 8), AbStatus::Ok);
        assert!(h.iter().any(|x| *x != 0.0));
        assert_eq!(ab_env_advance(env), AbStatus::Ok);
        ab_env_free(env);
        ab_config_free(cfg);
    }
}

#[test]
fn train_save_load_and_evaluate() {
    let dir = tempfile::tempdir().unwrap();
    let path = CString::new(dir.path().join("p.bin").to_str().unwrap()).unwrap();
    let cfg = config(SMALL);
    unsafe {
        let mut policy = ptr::null_mut();
        assert_eq!(ab_train(cfg, path.as_ptr(), &mut policy), AbStatus::Ok);
        let mut loaded = ptr::null_mut();
        assert_eq!(ab_policy_load(path.as_ptr(), &mut loaded), AbStatus::Ok);

        let mut a = [0.0; 3];
        let mut b = [0.0; 3];
        assert_eq!(ab_evaluate(cfg, policy, AbMethod::DrlMean, 2, a.as_mut_ptr(), 3), AbStatus::Ok);
        assert_eq!(ab_evaluate(cfg, loaded, AbMethod::DrlMean, 2, b.as_mut_ptr(), 3), AbStatus::Ok);
        assert_eq!(a, b);
        assert_eq!(ab_evaluate(cfg, ptr::null(), AbMethod::DrlSample, 2, a.as_mut_ptr(), 3), AbStatus::NullPointer);
        assert_eq!(ab_evaluate(cfg, ptr::null(), AbMethod::Zf, 2, a.as_mut_ptr(), 2), AbStatus::Dimension);

        let other = config(&SMALL.replace("K = 2", "K = 3"));
        let mut c = [0.0; 3];
        assert_eq!(ab_evaluate(other, loaded, AbMethod::DrlMean, 1, c.as_mut_ptr(), 3), AbStatus::CheckpointMismatch);

        let missing = CString::new(dir.path().join("none.bin").to_str().unwrap()).unwrap();
        let mut none = ptr::null_mut();
        assert_eq!(ab_policy_load(missing.as_ptr(), &mut none), AbStatus::Io);

        ab_policy_free(policy);
        ab_policy_free(loaded);
        ab_config_free(other);
        ab_config_free(cfg);
    }
}

#[test]
fn version_is_a_c_string() {
    let v = unsafe { CStr::from_ptr(ab_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

#[test]
fn generated_header_declares_the_api() {
    let header = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/include/aerobeam.h")).unwrap();
    for sym in ["ab_env_new", "ab_evaluate", "ab_last_error", "AB_STATUS_CHECKPOINT_MISMATCH", "typedef struct AbEnv AbEnv"] {
        assert!(header.contains(sym), "header lacks {sym}");
    }
}
