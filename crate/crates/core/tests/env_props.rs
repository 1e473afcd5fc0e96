use std::f64::consts::FRAC_PI_2;

use proptest::prelude::*;
use vrbqn_core::env::{
    make_env, EnvConfig, Environment, GatherAction, PixelEnv, ScenarioKind, ShooterAction,
};

fn roll(kind: ScenarioKind, seed: u64, actions: &[usize]) -> Vec<(Vec<f64>, f64, bool)> {
    let mut env = make_env(&EnvConfig::desk(kind)).unwrap();
    env.reset(seed).unwrap();
    let mut out = Vec::new();
    for &a in actions {
        if env.is_terminal() {
            break;
        }
        let s = env.step(a % env.n_actions()).unwrap();
        out.push((s.state.newest().data().to_vec(), s.reward, s.terminal));
    }
    out
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn trajectories_are_deterministic(
        seed in any::<u64>(),
        actions in prop::collection::vec(0usize..8, 1..40),
        gather in any::<bool>(),
    ) {
        let kind = if gather { ScenarioKind::Gather } else { ScenarioKind::Shooter };
        prop_assert_eq!(roll(kind, seed, &actions), roll(kind, seed, &actions));
    }

    #[test]
    fn reset_is_deterministic_and_stacks_copies(seed in any::<u64>()) {
        let mut env = make_env(&EnvConfig::desk(ScenarioKind::Shooter)).unwrap();
        let a = env.reset(seed).unwrap();
        let b = env.reset(seed).unwrap();
        prop_assert_eq!(&a, &b);
        prop_assert_eq!(a.stack_len(), 2);
        prop_assert_eq!(&a.frames()[0], &a.frames()[1]);
        prop_assert!(a.newest().data().iter().all(|v| (0.0..=1.0).contains(v)));
        prop_assert_eq!(env.render(), env.render());
    }

    #[test]
    fn gather_return_telescopes(seed in any::<u64>(), actions in prop::collection::vec(0usize..5, 1..400)) {
        let mut env = PixelEnv::gather(EnvConfig::desk(ScenarioKind::Gather)).unwrap();
        env.reset(seed).unwrap();
        let mut ret = 0.0;
        for a in actions {
            if env.is_terminal() {
                break;
            }
            ret += env.step(a).unwrap().reward;
        }
        prop_assert!((ret - (env.info() - 100.0)).abs() < 1e-9);
    }

    #[test]
    fn episodes_respect_the_tick_budget(seed in any::<u64>(), timeout in 1u32..200, gather in any::<bool>()) {
        let kind = if gather { ScenarioKind::Gather } else { ScenarioKind::Shooter };
        let mut env = make_env(&EnvConfig { timeout: Some(timeout), ..EnvConfig::desk(kind) }).unwrap();
        env.reset(seed).unwrap();
        let noop = env.n_actions() - 1;
        while !env.is_terminal() {
            env.step(noop).unwrap();
        }
        prop_assert!(env.ticks() <= timeout);
    }
}

#[test]
fn shooter_return_bounds() {
    // Fire every step: no episode can do worse than paying every tick and every shot.
    let mut env = PixelEnv::shooter(EnvConfig::desk(ScenarioKind::Shooter)).unwrap();
    for seed in 0..20 {
        env.reset(seed).unwrap();
        let (mut ret, mut steps) = (0.0, 0u32);
        while !env.is_terminal() {
            ret += env.step(ShooterAction::Shoot as usize).unwrap().reward;
            steps += 1;
        }
        assert!(ret <= 101.0 - f64::from(env.ticks()) + 1e-9);
        assert!(ret >= -5.0 * f64::from(steps) - 300.0);
    }
}

#[test]
fn target_dead_ahead_is_centred() {
    for (w, h) in [(32, 32), (160, 120), (33, 20)] {
        let mut env = PixelEnv::shooter(EnvConfig {
            width: w,
            height: h,
            ..EnvConfig::desk(ScenarioKind::Shooter)
        })
        .unwrap();
        env.reset(0).unwrap();
        let mut s = env.sim().state().clone();
        s.agent_x = s.target_x;
        s.agent_heading = FRAC_PI_2;
        env.sim_mut().set_state(s);
        let frame = env.render();
        // The target is the darkest thing in the scene; take the centroid of its pixels.
        let dark: Vec<usize> = (0..h)
            .flat_map(|y| (0..w).map(move |x| (x, y)))
            .filter(|&(x, y)| frame.get(x, y, 0) < 0.1)
            .map(|(x, _)| x)
            .collect();
        assert!(!dark.is_empty());
        let cx = dark.iter().sum::<usize>() as f64 / dark.len() as f64 + 0.5;
        assert!((cx - w as f64 / 2.0).abs() <= 1.0, "{w}x{h}: centroid {cx}");
    }
}

#[test]
fn gather_pack_pickup_extends_life() {
    let mut env = PixelEnv::gather(EnvConfig::desk(ScenarioKind::Gather)).unwrap();
    env.reset(4).unwrap();
    let mut s = env.sim().state().clone();
    s.life = 40.0;
    s.packs[0] = (
        s.agent_x + 0.05 * s.agent_heading.cos(),
        s.agent_y + 0.05 * s.agent_heading.sin(),
    );
    env.sim_mut().set_state(s);
    let step = env.act(GatherAction::Forward as usize, 2).unwrap();
    assert_eq!(step.reward, 25.0 - 2.0);
}
