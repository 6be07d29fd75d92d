//! Exhaustive physics checks and an oracle episode on every variant.
//!
//! cargo run --release --example oracle_physics

use catchlab::env::{self, Action, Catch, VariantId};

fn main() {
    let landing = env::landing_exhaustive();
    println!("landing_column vs simulation: {}/{}", landing.caught, landing.cases);

    for v in VariantId::ALL {
        let cfg = v.config();
        let r = env::oracle_exhaustive(&cfg);
        println!(
            "{v}: paddle width {}, oracle caught {}/{} spawns",
            cfg.paddle_width, r.caught, r.cases
        );
    }
    println!(
        "v4: first reward after catch {:?}",
        env::oracle_sparse_reward_catch(VariantId::V4, 0)
    );

    // a few frames of one V3 drop; the frame is mirrored, the physics is not
    let cfg = VariantId::V3.config();
    let mut game = Catch::new(cfg, 7);
    for t in 0..3 {
        println!("\nt = {t}, ball row {} col {}", game.state().ball_row, game.state().ball_col);
        println!("{:?}", game.observation().newest());
        let a = env::oracle_policy(game.state(), &cfg);
        game.step(a);
    }

    let mut v2 = Catch::new(VariantId::V2.config(), 1);
    v2.step(Action::Stay);
    println!("\nv2 frame after one step:\n{:?}", v2.observation().newest());
}
