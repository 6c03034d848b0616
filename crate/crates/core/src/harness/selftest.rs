//! Fast invariant checks run by `aerobeam selftest`.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::agents::gradcheck::max_relative_gradient_error;
use crate::agents::{encode_state, Actor, ActorKind, AgentState, Scaling};
use crate::channel::{advance_nlos, complex_normal_row, corrupt_csi, free_space_db, steering_vector, ChannelRow, SPEED_OF_LIGHT};
use crate::env::Environment;
use crate::radio::{gain, mrt_precoder, project_power, zf_precoder, BeamformingMatrix, RadioParams};
use crate::scenario::ScenarioConfig;
use crate::seed::SeedTree;
use crate::{Result, C64};

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn check(name: &'static str, f: impl FnOnce() -> Result<(bool, String)>) -> Check {
    match f() {
        Ok((passed, detail)) => Check { name, passed, detail },
        Err(e) => Check { name, passed: false, detail: e.to_string() },
    }
}

pub fn run_selftest(seed: u64) -> Vec<Check> {
    let root = SeedTree::new(seed).child("selftest");
    vec![
        check("path-loss", || {
            let db = free_space_db(2000.0, 2e9, SPEED_OF_LIGHT)?;
            Ok(((db + 104.483).abs() < 1e-3, format!("{db:.6} dB at 2 km")))
        }),
        check("steering", || {
            let nadir = steering_vector(std::f64::consts::FRAC_PI_2, 0.3, 36)?;
            let ok_nadir = nadir.iter().all(|x| *x == C64::new(1.0, 0.0));
            let v = steering_vector(0.0, std::f64::consts::FRAC_PI_2, 4)?;
            let want = [1.0, 1.0, -1.0, -1.0];
            let err = v.iter().zip(want).map(|(x, w)| (x - C64::new(w, 0.0)).norm()).fold(0.0, f64::max);
            Ok((ok_nadir && err < 1e-12, format!("nadir exact: {ok_nadir}, 2×2 error {err:.1e}")))
        }),
        check("jakes-ar1", || {
            let mut rng = root.stream("jakes");
            let rho = 0.9;
            let mut h = complex_normal_row(1, &mut rng);
            let (mut num, mut den) = (0.0, 0.0);
            for _ in 0..20_000 {
                let next = advance_nlos(&h, rho, &mut rng);
                num += (next[0] * h[0].conj()).re;
                den += h[0].norm_sqr();
                h = next;
            }
            let r = num / den;
            Ok(((r - rho).abs() < 0.03, format!("lag-1 correlation {r:.4} for ρ = {rho}")))
        }),
        check("csi-identity", || {
            let mut rng = root.stream("csi");
            let h = complex_normal_row(16, &mut rng);
            Ok((corrupt_csi(&h, 1.0, &mut rng) == h, "ξ = 1 leaves CSI untouched".into()))
        }),
        check("power-projection", || {
            let mut rng = root.stream("projection");
            let radio = RadioParams::default();
            let mut ok = true;
            for i in 0..200 {
                let bs = i % 2;
                let mut w = BeamformingMatrix::zeros(bs, 16, 4, &radio);
                let amp = 10f64.powf(rng.random_range(-1.0..2.0));
                w.w = w.w.map(|_| C64::new(rng.sample::<f64, _>(StandardNormal), rng.sample::<f64, _>(StandardNormal)) * amp);
                let p = project_power(&w)?;
                let again = project_power(&p)?;
                ok &= p.is_feasible(1e-9) && again == p;
            }
            Ok((ok, "200 random matrices feasible and idempotent".into()))
        }),
        check("zf-nulling", || {
            let mut rng = root.stream("zf");
            let radio = RadioParams::default();
            let mut worst: f64 = 0.0;
            for _ in 0..20 {
                let rows: Vec<ChannelRow> = (0..4).map(|_| complex_normal_row(36, &mut rng)).collect();
                let refs: Vec<&ChannelRow> = rows.iter().collect();
                let w = zf_precoder(1, &refs, &radio)?;
                let m = mrt_precoder(1, &refs, &radio)?;
                for (u, h) in rows.iter().enumerate() {
                    let own = gain(h, w.w.column(u)).norm_sqr();
                    for v in (0..4).filter(|v| *v != u) {
                        worst = worst.max(gain(h, w.w.column(v)).norm_sqr() / own);
                    }
                    if gain(h, m.w.column(u)).norm_sqr() < own * 0.999 {
                        worst = f64::INFINITY;
                    }
                }
            }
            Ok((worst < 1e-9, format!("max cross-term ratio {worst:.1e}")))
        }),
        check("actor-gradients", || {
            let mut rng = root.stream("gradients");
            let actor = Actor::new(ActorKind::Hab, 2, 4, Scaling { csi: 1.0, beam: 1.0, action: 1.0 }, &mut rng)?;
            let states = (0..2)
                .map(|_| {
                    let rows: Vec<ChannelRow> = (0..2).map(|_| complex_normal_row(4, &mut rng)).collect();
                    encode_state(&rows.iter().collect::<Vec<_>>(), None, 2, 4)
                })
                .collect::<Result<Vec<AgentState>>>()?;
            let actions: Vec<Vec<f64>> = (0..2).map(|_| (0..16).map(|_| rng.sample(StandardNormal)).collect()).collect();
            let refs: Vec<&AgentState> = states.iter().collect();
            let err = max_relative_gradient_error(&actor, &refs, &actions, 4, 1e-5, &mut rng)?;
            Ok((err < 1e-4, format!("max relative error {err:.1e}")))
        }),
        check("env-determinism", || {
            let sc = ScenarioConfig { habs: 2, users_per_cluster: 2, hab_antennas: 4, haps_antennas: 4, ..Default::default() };
            let run = || -> Result<Vec<Vec<ChannelRow>>> {
                let mut env = Environment::new(sc.clone(), Default::default(), Default::default())?;
                env.reset(&root.child("env"))?;
                for _ in 0..5 {
                    env.advance()?;
                }
                Ok(env.true_channels().to_vec())
            };
            Ok((run()? == run()?, "same seed, same channels".into()))
        }),
    ]
}
