//! The four ways a run's network can start, and which tensors each one
//! copies, re-draws or freezes.
//!
//! cargo run --release --example init_regimes

use catchlab::env::VariantId;
use catchlab::nn::{self, TensorId};
use catchlab::transfer::{Checkpoint, InitSpec, Metadata};

fn main() -> anyhow::Result<()> {
    // two stand-ins for trained networks
    let a = Checkpoint::new(&nn::init_params(1), Metadata::new().with(Metadata::SOURCE_VARIANT, VariantId::V0));
    let b = Checkpoint::new(&nn::init_params(2), Metadata::new().with(Metadata::SOURCE_VARIANT, VariantId::V1));
    let (pa, pb) = (a.params()?, b.params()?);

    let specs = [
        InitSpec::Scratch { seed: 3 },
        InitSpec::FineTune { source: a.clone(), head_seed: 4 },
        InitSpec::OnlyHead { source: a.clone(), head_seed: 4 },
        InitSpec::Hybrid { body: a.clone(), head: b.clone() },
    ];
    println!("{:10} {:12} {:>6} {:>6} {:>10}", "regime", "tensor", "from a", "from b", "trainable");
    for spec in &specs {
        let (p, mask) = spec.materialize()?;
        // biases all start at zero, so only the weights tell a, b and fresh draws apart
        for id in TensorId::ALL.into_iter().filter(|id| id.name().ends_with("weight")) {
            println!(
                "{:10} {:12} {:>6} {:>6} {:>10}",
                spec.regime().as_str(),
                id.name(),
                p.tensor_bits_eq(&pa, id),
                p.tensor_bits_eq(&pb, id),
                mask.is_trainable(id)
            );
        }
        println!("{:10} source variant {:?}\n", "", spec.source_variant());
    }
    Ok(())
}
