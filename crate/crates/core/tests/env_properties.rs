use catchlab::env::{
    self, landing_column, oracle_exhaustive, physics_step, reset, simulate_landing, Action, Catch,
    GridState, VariantId,
};
use proptest::prelude::*;

#[test]
fn landing_column_matches_simulation_on_all_2100_cases() {
    let mut cases = 0;
    for row in 1..=20 {
        for col in 0..=20 {
            for vx in -2..=2 {
                let s = GridState::with_ball(row, col, vx, 0);
                assert_eq!(landing_column(&s), simulate_landing(&s), "row {row} col {col} vx {vx}");
                cases += 1;
            }
        }
    }
    assert_eq!(cases, 2100);
    let report = env::landing_exhaustive();
    assert_eq!((report.caught, report.cases), (2100, 2100));
}

#[test]
fn oracle_catches_every_spawn_on_every_variant() {
    for v in VariantId::ALL {
        let r = oracle_exhaustive(&v.config());
        assert_eq!((r.caught, r.cases), (105, 105), "{v}");
    }
}

#[test]
fn v4_oracle_is_rewarded_on_the_fifth_catch() {
    for seed in 0..20 {
        assert_eq!(env::oracle_sparse_reward_catch(VariantId::V4, seed), Some(5));
    }
}

#[test]
fn reset_columns_and_velocities_are_uniform() {
    // Pearson chi-square over 1e5 resets. Critical values at p = 0.001:
    // 45.31 for 20 degrees of freedom, 18.47 for 4.
    let cfg = VariantId::V0.config();
    let n = 100_000u64;
    let mut cols = [0u64; 21];
    let mut vxs = [0u64; 5];
    for seed in 0..n {
        let (s, _) = reset(&cfg, seed);
        cols[s.ball_col as usize] += 1;
        vxs[(s.ball_vx + 2) as usize] += 1;
    }
    let chi2 = |counts: &[u64]| {
        let e = n as f64 / counts.len() as f64;
        counts.iter().map(|&c| (c as f64 - e).powi(2) / e).sum::<f64>()
    };
    assert!(chi2(&cols) < 45.31, "columns chi2 = {}", chi2(&cols));
    assert!(chi2(&vxs) < 18.47, "vx chi2 = {}", chi2(&vxs));
}

#[test]
fn v2_background_is_uniform_noise() {
    // 435 background cells per frame (5 paddle cells, ball above the paddle
    // row); each is >= 128 with probability 1/2, so the mean count is 217.5
    // with per-frame sd 10.4.
    let cfg = VariantId::V2.config();
    let frames = 2000;
    let mut high = 0u64;
    let mut sum = 0u64;
    let mut cells = 0u64;
    for seed in 0..frames {
        let mut game = Catch::new(cfg, seed);
        game.step(Action::Stay);
        // image row 0 is the top of the grid (row 20)
        let f = game.observation().newest();
        let s = game.state();
        for row in 0..21i32 {
            for col in 0..21i32 {
                let ball = row == s.ball_row && col == s.ball_col;
                let paddle = row == 0 && (col - s.paddle_center).abs() <= 2;
                if ball || paddle {
                    assert_eq!(f.get((20 - row) as usize, col as usize), 255);
                    continue;
                }
                let p = f.get((20 - row) as usize, col as usize);
                high += u64::from(p >= 128);
                sum += u64::from(p);
                cells += 1;
            }
        }
    }
    assert_eq!(cells, 435 * frames);
    let mean_high = high as f64 / frames as f64;
    // standard error of the mean is 10.4 / sqrt(2000) = 0.23
    assert!((mean_high - 217.5).abs() < 1.5, "mean high count {mean_high}");
    let mean_value = sum as f64 / cells as f64;
    assert!((mean_value - 127.5).abs() < 0.5, "mean value {mean_value}");
}

#[test]
fn v2_noise_is_redrawn_every_step() {
    let mut game = Catch::new(VariantId::V2.config(), 3);
    let a = game.observation().newest().clone();
    game.step(Action::Stay);
    let b = game.observation().newest().clone();
    let same = a.pixels.iter().zip(&b.pixels).filter(|(x, y)| x == y).count();
    assert!(same < 30, "{same} identical pixels between consecutive frames");
}

fn action(i: u8) -> Action {
    Action::from_index(usize::from(i % 3))
}

/// Plays `actions` (cycled) until the episode ends.
fn episode(variant: VariantId, seed: u64, actions: &[u8]) -> (Vec<Vec<u8>>, Vec<f32>, Vec<GridState>) {
    let mut game = Catch::new(variant.config(), seed);
    let mut frames = vec![game.observation().newest().pixels.to_vec()];
    let mut rewards = Vec::new();
    let mut states = vec![game.state().clone()];
    let mut i = 0;
    while !game.is_terminal() {
        let step = game.step(action(actions[i % actions.len()]));
        frames.push(game.observation().newest().pixels.to_vec());
        rewards.push(step.reward);
        states.push(game.state().clone());
        i += 1;
    }
    (frames, rewards, states)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn replay_is_deterministic(v in 0usize..5, seed in any::<u64>(), actions in prop::collection::vec(any::<u8>(), 1..40)) {
        let variant = VariantId::ALL[v];
        prop_assert_eq!(episode(variant, seed, &actions), episode(variant, seed, &actions));
    }

    #[test]
    fn episode_invariants(v in 0usize..5, seed in any::<u64>(), actions in prop::collection::vec(any::<u8>(), 1..40)) {
        let variant = VariantId::ALL[v];
        let cfg = variant.config();
        let (_, rewards, states) = episode(variant, seed, &actions);
        let total: f32 = rewards.iter().sum();
        prop_assert!(total == 0.0 || total == 1.0);
        prop_assert!(rewards.iter().all(|&r| r == 0.0 || r == 1.0));
        if cfg.streak_target == 1 {
            prop_assert_eq!(rewards.len(), 20);
        } else {
            prop_assert!([20, 40, 60, 80, 100].contains(&rewards.len()));
        }
        let (lo, hi) = cfg.paddle_limits();
        for s in &states {
            prop_assert!((0..=20).contains(&s.ball_row) && (0..=20).contains(&s.ball_col));
            prop_assert!((lo..=hi).contains(&s.paddle_center));
            prop_assert!(s.streak < cfg.streak_target.max(1));
        }
    }

    #[test]
    fn one_step_moves_ball_down_and_keeps_it_inside(row in 1i32..=20, col in 0i32..=20, vx in -2i32..=2, a in 0u8..3) {
        let cfg = VariantId::V0.config();
        let mut s = GridState::with_ball(row, col, vx, 0);
        physics_step(&mut s, action(a), &cfg);
        prop_assert_eq!(s.ball_row, row - 1);
        prop_assert!((0..=20).contains(&s.ball_col));
        prop_assert_eq!(s.ball_vx.abs(), vx.abs());
    }
}
