use aerobeam::agents::{evaluate, load_checkpoint, save_checkpoint, train, ActionMode, CheckpointManifest, Method};
use aerobeam::harness::RunConfig;
use aerobeam::radio::Baseline;

fn tiny() -> RunConfig {
    RunConfig::from_toml(
        r#"
[run]
seed = 11

[scenario]
B = 2
K = 2
N_b = 4
N_b0 = 9
T = 6

[hyperparams]
episodes = 3
batch_size = 4
eval_episodes = 3
"#,
    )
    .unwrap()
}

#[test]
fn training_is_reproducible_and_updates_every_eta_slots() {
    let cfg = tiny();
    let a = train(&cfg, None).unwrap();
    let b = train(&cfg, None).unwrap();
    assert_eq!(a.log_csv(), b.log_csv());
    assert_eq!(a.log.len(), 3);
    // 6 slots, η = 2 → 3 updates per episode.
    assert_eq!(a.updates, 9);
    // One HAB transition per cluster per slot, one HAPS transition per slot.
    assert_eq!(a.hab_buffer.len(), 3 * 6 * 2);
    assert_eq!(a.haps_buffer.len(), 3 * 6);
}

#[test]
fn checkpoint_round_trip_reproduces_evaluation() {
    let cfg = tiny();
    let out = train(&cfg, None).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("nested/actors.bin");
    let manifest = CheckpointManifest::new(&out.actors, 3, &cfg.hash(), &cfg.hyperparams);
    save_checkpoint(&path, &out.actors, &manifest).unwrap();
    let (loaded, m) = load_checkpoint(&path).unwrap();
    assert_eq!(m, manifest);
    for mode in [ActionMode::Mean, ActionMode::Sample] {
        let x = evaluate(Method::Drl { actors: &out.actors, mode }, &cfg, 2).unwrap();
        let y = evaluate(Method::Drl { actors: &loaded, mode }, &cfg, 2).unwrap();
        assert_eq!(x.mean, y.mean);
    }
}

#[test]
fn all_methods_see_the_same_channel_draws() {
    let cfg = tiny();
    let out = train(&cfg, None).unwrap();
    let zf = evaluate(Method::Baseline(Baseline::Zf), &cfg, 3).unwrap();
    let mrt = evaluate(Method::Baseline(Baseline::Mrt), &cfg, 3).unwrap();
    let drl = evaluate(Method::Drl { actors: &out.actors, mode: ActionMode::Sample }, &cfg, 3).unwrap();
    assert_eq!(zf.draw_digest, mrt.draw_digest);
    assert_eq!(zf.draw_digest, drl.draw_digest);
    assert_eq!(zf.mean.len(), 6);
    assert!(zf.mean.iter().chain(&mrt.mean).chain(&drl.mean).all(|v| v.is_finite() && *v >= 0.0));
}
