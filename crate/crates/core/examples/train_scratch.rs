//! Train one DQN from scratch and save the final checkpoint.
//!
//! cargo run --release --example train_scratch -- [variant] [epochs] [out.ctlc]

use catchlab::agent::{train_with_observer, TrainConfig};
use catchlab::env::VariantId;
use catchlab::transfer::InitSpec;

fn main() -> anyhow::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let variant: VariantId = args.first().map_or(Ok(VariantId::V0), |s| s.parse())?;
    let epochs: u32 = args.get(1).map_or(Ok(10), |s| s.parse())?;
    let out = args.get(2).cloned().unwrap_or_else(|| format!("{variant}-scratch.ctlc"));

    let config = TrainConfig {
        num_epochs: epochs,
        seed: 0,
        ..TrainConfig::default()
    };
    println!("training {variant} for {epochs} epochs of {} episodes", config.episodes_per_epoch);
    let outcome = train_with_observer(
        &variant.config(),
        &config,
        &InitSpec::Scratch { seed: 0 },
        |r, c| {
            println!(
                "epoch {:3}  steps {:7}  grad {:7}  catch {:.3}  loss {:.5}  eps {:.3}",
                r.epoch, r.env_steps, c.grad_steps, r.eval_catch_rate, r.mean_loss, r.epsilon
            )
        },
    )?;
    outcome.checkpoint.save(&out)?;
    println!("saved {out} ({})", outcome.checkpoint.metadata.provenance());
    Ok(())
}
