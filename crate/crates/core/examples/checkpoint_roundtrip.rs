//! Checkpoint format: bit-exact round trip and the named load errors.
//!
//! cargo run --release --example checkpoint_roundtrip

use catchlab::env::VariantId;
use catchlab::nn::{self, TensorId};
use catchlab::transfer::{Checkpoint, CheckpointError, Metadata, NamedTensor};

fn main() -> anyhow::Result<()> {
    let params = nn::init_params(42);
    let meta = Metadata::new()
        .with(Metadata::SOURCE_VARIANT, VariantId::V2)
        .with(Metadata::SEED, 42);
    let ckpt = Checkpoint::new(&params, meta);

    let dir = tempfile::tempdir()?;
    let path = dir.path().join("net.ctlc");
    ckpt.save(&path)?;
    let back = Checkpoint::load(&path)?;
    println!("{} bytes on disk", std::fs::metadata(&path)?.len());
    println!("parameters: {}", params.num_parameters());
    println!("bit-exact: {}", back.params()?.bits_eq(&params));
    println!("metadata: {}", back.metadata.provenance());
    for t in back.tensors() {
        println!("  {:14} {:?}", t.name, t.dims);
    }

    let bytes = ckpt.to_bytes()?;
    let show = |label: &str, r: Result<Checkpoint, CheckpointError>| match r {
        Ok(_) => println!("{label}: loaded"),
        Err(e) => println!("{label}: {e}"),
    };
    let mut bad_magic = bytes.clone();
    bad_magic[0] = b'X';
    show("bad magic", Checkpoint::from_bytes(&bad_magic));
    let mut bad_version = bytes.clone();
    bad_version[4] = 9;
    show("bad version", Checkpoint::from_bytes(&bad_version));
    show("truncated", Checkpoint::from_bytes(&bytes[..bytes.len() - 3]));

    let mut tensors = ckpt.tensors().to_vec();
    let fc1 = TensorId::Fc1Weight.index();
    tensors[fc1] = NamedTensor {
        name: tensors[fc1].name.clone(),
        dims: vec![128, 3136],
        values: vec![0.0; 128 * 3136],
    };
    let wrong = Checkpoint::from_raw(ckpt.metadata.clone(), tensors);
    show("wrong fc1 shape", Checkpoint::from_bytes(&wrong.to_bytes()?));
    Ok(())
}
