use std::path::Path;
use std::process::{Command, Output};

fn catchlab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_catchlab"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

const TINY: &str = "eps_anneal_steps = 200\nlearn_start = 40\nbatch_size = 4\n\
                    target_sync_every = 20\nepisodes_per_epoch = 3\neval_episodes = 10\n\
                    num_epochs = 3\nreplay_capacity = 500\n";

fn write_config(dir: &Path, name: &str, body: &str) -> String {
    let path = dir.join(name);
    std::fs::write(&path, format!("{body}{TINY}")).unwrap();
    path.to_string_lossy().into_owned()
}

#[test]
fn usage_errors_exit_with_2() {
    let o = catchlab(&["train", "--no-such-flag"]);
    assert_eq!(o.status.code(), Some(2));
    let o = catchlab(&["frobnicate"]);
    assert_eq!(o.status.code(), Some(2));

    let tmp = tempfile::tempdir().unwrap();
    let bad = tmp.path().join("bad.cfg");
    std::fs::write(&bad, "variant v0\n").unwrap();
    let o = catchlab(&["train", "--config", bad.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).starts_with("error: "), "{}", stderr(&o));

    std::fs::write(&bad, "variant = v0\nlearning_rate = 1\n").unwrap();
    let o = catchlab(&["train", "--config", bad.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("unknown key `learning_rate`"));

    let o = catchlab(&["--help"]);
    assert_eq!(o.status.code(), Some(0));
}

#[test]
fn oracle_reports_exhaustive_checks() {
    let o = catchlab(&["oracle", "--variant", "v1"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let out = stdout(&o);
    assert!(out.contains("v1: 105/105 spawn cases caught"), "{out}");
    assert!(out.contains("landing: 2100/2100 cases agree"), "{out}");

    let o = catchlab(&["oracle"]);
    let out = stdout(&o);
    assert_eq!(o.status.code(), Some(0));
    for v in ["v0", "v1", "v2", "v3", "v4"] {
        assert!(out.contains(&format!("{v}: 105/105 spawn cases caught")), "{out}");
    }
    assert!(out.contains("v4: first reward at catch 5"));
}

#[test]
fn oracle_dumps_pgm_frames() {
    let tmp = tempfile::tempdir().unwrap();
    let o = catchlab(&["oracle", "--variant", "v3", "--dump-frames", tmp.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let dir = tmp.path().join("v3");
    let count = std::fs::read_dir(&dir).unwrap().count();
    assert_eq!(count, 21);
    let first = std::fs::read(dir.join("frame-0000.pgm")).unwrap();
    assert!(first.starts_with(b"P5\n21 21\n255\n"));
    assert_eq!(first.len(), b"P5\n21 21\n255\n".len() + 441);
    // mirrored variant: the paddle is in the top image row
    let pixels = &first[first.len() - 441..];
    assert_eq!(pixels[..21].iter().filter(|&&p| p == 255).count(), 5);
}

#[test]
fn area_ratio_on_identical_csvs_is_zero() {
    let tmp = tempfile::tempdir().unwrap();
    let csv = tmp.path().join("c.csv");
    std::fs::write(
        &csv,
        "seed,epoch,env_steps,episodes,eval_catch_rate,eval_mean_return,mean_loss,epsilon\n\
         0,1,20,1,0.2,0.2,NaN,1\n0,2,40,2,0.5,0.5,0.1,0.9\n0,3,60,3,0.9,0.9,0.1,0.8\n",
    )
    .unwrap();
    let p = csv.to_str().unwrap();
    let o = catchlab(&["area-ratio", "--transfer-csv", p, "--scratch-csv", p]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let out = stdout(&o);
    assert!(out.starts_with("r = 0.000\n"), "{out}");
    assert!(out.contains("sign = absent"));

    let o = catchlab(&["area-ratio", "--transfer-csv", p, "--scratch-csv", "/nonexistent.csv"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).starts_with("error: "));
}

#[test]
fn train_transfer_hybrid_eval_and_report() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    let cfg = write_config(dir, "scratch.cfg", "variant = v0\nseeds = 0,1\nout_dir = runs/scratch\n");
    let o = catchlab(&["train", "--config", &cfg]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stdout(&o).contains("seed 1: complete"));
    let scratch = dir.join("runs/scratch");
    assert!(scratch.join("manifest.txt").is_file());
    let template = format!("{}/seed-{{seed}}/checkpoint.ctlc", scratch.display());

    let base = write_config(dir, "base.cfg", "variant = v0\nseeds = 0,1\n");
    let ft_out = dir.join("ft");
    let o = catchlab(&[
        "transfer", "--mode", "fine-tune", "--source", &template, "--config", &base, "--out",
        ft_out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    // distinct training seeds, sources picked by list position
    let by_index = format!("{}/seed-{{index}}/checkpoint.ctlc", scratch.display());
    let oh_out = dir.join("oh");
    let o = catchlab(&[
        "transfer", "--mode", "only-head", "--source", &by_index, "--config", &base, "--out",
        oh_out.to_str().unwrap(), "--seeds", "100,101",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));

    let hy_out = dir.join("hy");
    let o = catchlab(&[
        "hybrid",
        "--body",
        &format!("{}/seed-{{index}}/checkpoint.ctlc", ft_out.display()),
        "--head",
        // only-head seeds 100 and 101 sit at list positions 0 and 1
        &format!("{}/seed-{{index+100}}/checkpoint.ctlc", oh_out.display()),
        "--config",
        &base,
        "--out",
        hy_out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let manifest = std::fs::read_to_string(hy_out.join("manifest.txt")).unwrap();
    assert!(manifest.contains("config.regime = hybrid"));
    assert!(manifest.contains("status = complete"));

    let o = catchlab(&[
        "eval", "--ckpt", &format!("{}/seed-0/checkpoint.ctlc", hy_out.display()), "--variant", "v0",
        "--episodes", "20",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stdout(&o).starts_with("catch_rate = "));

    let o = catchlab(&[
        "area-ratio", "--transfer-csv", &format!("{}/aggregate.csv", ft_out.display()),
        "--scratch-csv", &format!("{}/aggregate.csv", scratch.display()),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stdout(&o).starts_with("r = "));

    // missing checkpoints are a configuration error caught before training
    let o = catchlab(&[
        "transfer", "--mode", "fine-tune", "--source", "/missing/{seed}.ctlc", "--config", &base,
        "--out", dir.join("never").to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert!(!dir.join("never").exists());

    let matrix = dir.join("matrix.csv");
    std::fs::write(
        &matrix,
        "source,target,r,transfer_area,scratch_area,sign\nv0,v1,0.729,172.9,100,positive\n",
    )
    .unwrap();
    let o = catchlab(&["report", "--matrix", matrix.to_str().unwrap(), "--out", dir.join("rep").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let md = std::fs::read_to_string(dir.join("rep/matrix.md")).unwrap();
    assert!(md.contains("| v0 | 0.729 (positive) |"));
}

#[test]
fn eval_rejects_zero_episodes() {
    let o = catchlab(&["eval", "--ckpt", "/x", "--variant", "v0", "--episodes", "0"]);
    assert_eq!(o.status.code(), Some(2));
}
