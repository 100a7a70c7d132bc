use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use semfield::dataset::load_dataset;
use semfield_core::train::area_ratio;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_semfield"));
    c.env("RUST_LOG", "warn").env("SEMFIELD_THREADS", "1");
    c
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn ok(args: &[&str]) -> Output {
    let out = run(args);
    assert!(
        out.status.success(),
        "{args:?}: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn code(args: &[&str]) -> i32 {
    run(args).status.code().unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// A tiny dataset plus a run config that trains in about a second.
fn setup(dir: &Path, extra: &str) -> PathBuf {
    let data = dir.join("data");
    ok(&[
        "make-dataset",
        "--out",
        s(&data),
        "--views",
        "6",
        "--size",
        "16",
        "--seed",
        "3",
    ]);
    write_config(dir, "run.toml", "out", extra)
}

fn write_config(dir: &Path, name: &str, output: &str, extra: &str) -> PathBuf {
    let cfg = dir.join(name);
    let text = format!(
        "seed = 3\ndataset = \"data\"\noutput = \"{output}\"\ncheckpoint_every = 4\n\
         [architecture]\ntrunk_depth = 2\ntrunk_width = 16\n\
         [train]\niterations = 8\nbatch_size = 64\nlog_every = 2\nsemantic_only_iterations = 2\n\
         sampling = {{ coarse = 8, fine = 8, perturb = true }}\n{extra}\
         [render]\nsampling = {{ coarse = 8, fine = 8, perturb = false }}\n\
         [eval]\nssim_every = 4\n"
    );
    std::fs::write(&cfg, text).unwrap();
    cfg
}

fn read(p: impl AsRef<Path>) -> Vec<u8> {
    std::fs::read(p.as_ref()).unwrap_or_else(|e| panic!("{}: {e}", p.as_ref().display()))
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&["--help"]), 0);
    assert_eq!(code(&["frobnicate"]), 1);
    assert_eq!(code(&["train"]), 1);
    let missing = dir.path().join("nope.toml");
    assert_eq!(code(&["train", "--config", s(&missing)]), 1);

    let cfg = setup(dir.path(), "");
    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, "dataset = \"data\"\noutput = \"o\"\ncolour = 1\n").unwrap();
    let out = run(&["train", "--config", s(&bad)]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("colour"));

    ok(&["train", "--config", s(&cfg)]);
    assert_eq!(code(&["edit", "--config", s(&cfg)]), 1, "edit needs --edit");
    assert_eq!(code(&["edit", "--config", s(&cfg), "--edit", "mask:9"]), 2);
    assert_eq!(code(&["render", "--config", s(&cfg), "--frames", "99"]), 1);
    let other = dir.path().join("other.toml");
    std::fs::write(
        &other,
        std::fs::read_to_string(&cfg)
            .unwrap()
            .replace("trunk_width = 16", "trunk_width = 8"),
    )
    .unwrap();
    assert_eq!(
        code(&[
            "eval",
            "--config",
            s(&other),
            "--checkpoint",
            s(&dir.path().join("out/checkpoint.bin"))
        ]),
        2
    );
}

#[test]
fn make_dataset_writes_requested_shape() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("d");
    ok(&[
        "make-dataset",
        "--out",
        s(&out),
        "--views",
        "16",
        "--size",
        "64",
    ]);
    let ds = load_dataset(&out).unwrap();
    assert_eq!(ds.frames.len(), 16);
    assert_eq!((ds.width(), ds.height()), (64, 64));
}

#[test]
fn make_dataset_hits_area_target() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("d");
    ok(&[
        "make-dataset",
        "--out",
        s(&out),
        "--views",
        "8",
        "--size",
        "32",
        "--alpha-target",
        "0.02",
    ]);
    let ds = load_dataset(&out).unwrap();
    let alpha = area_ratio(&ds, &[1, 2, 3]).unwrap();
    assert!((alpha - 0.02).abs() <= 0.01, "alpha {alpha}");
    let out = run(&[
        "make-dataset",
        "--out",
        s(&out),
        "--size",
        "16",
        "--alpha-target",
        "0.02",
        "--targets",
        "3",
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("at most"));
}

#[test]
fn explicit_edit_none_matches_default_render() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = setup(dir.path(), "");
    ok(&["train", "--config", s(&cfg)]);
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    ok(&[
        "render",
        "--config",
        s(&cfg),
        "--frames",
        "1",
        "--out",
        s(&a),
    ]);
    ok(&[
        "render",
        "--config",
        s(&cfg),
        "--frames",
        "1",
        "--out",
        s(&b),
        "--edit",
        "none",
    ]);
    for kind in ["rgb", "labels", "depth", "opacity"] {
        let name = format!("frame_001_{kind}.png");
        assert_eq!(read(a.join(&name)), read(b.join(&name)), "{name}");
    }
    ok(&[
        "edit",
        "--config",
        s(&cfg),
        "--frames",
        "1",
        "--edit",
        "unique:3",
    ]);
    assert!(dir
        .path()
        .join("out/edit-unique-3/frame_001_rgb.png")
        .exists());
}

#[test]
fn interrupted_training_resumes_bitwise() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = setup(dir.path(), "");
    ok(&["train", "--config", s(&cfg)]);
    let split = write_config(dir.path(), "split.toml", "split", "");
    ok(&["train", "--config", s(&split), "--stop-after", "4"]);
    ok(&["train", "--config", s(&split), "--resume"]);
    for f in ["checkpoint.bin", "state.bin"] {
        assert!(
            read(dir.path().join("out").join(f)) == read(dir.path().join("split").join(f)),
            "{f}"
        );
    }
    let cols = |p: PathBuf| -> Vec<String> {
        String::from_utf8(read(p))
            .unwrap()
            .lines()
            .map(|l| {
                l.split(',')
                    .enumerate()
                    .filter(|(i, _)| *i != 1)
                    .map(|(_, v)| v.to_owned())
                    .collect::<Vec<_>>()
                    .join(",")
            })
            .collect()
    };
    assert_eq!(
        cols(dir.path().join("out/metrics.csv")),
        cols(dir.path().join("split/metrics.csv"))
    );
}

#[test]
fn eval_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = setup(dir.path(), "");
    ok(&["train", "--config", s(&cfg)]);
    let a = ok(&["eval", "--config", s(&cfg)]).stdout;
    let first = read(dir.path().join("out/eval.json"));
    let b = ok(&["eval", "--config", s(&cfg)]).stdout;
    assert_eq!(first, read(dir.path().join("out/eval.json")));
    assert_eq!(a, b);
    let v: serde_json::Value = serde_json::from_slice(&first).unwrap();
    assert!(v["mean_psnr"].as_f64().unwrap() > 0.0);
}

#[test]
fn single_point_sweep_matches_plain_run() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = setup(dir.path(), "label_sampling_rate = 0.5\n");
    ok(&[
        "sweep",
        "--config",
        s(&cfg),
        "--param",
        "label_sampling_rate",
        "--values",
        "0.5",
    ]);
    ok(&["train", "--config", s(&cfg)]);
    ok(&["eval", "--config", s(&cfg)]);
    let swept = read(
        dir.path()
            .join("out/sweep/label_sampling_rate=0.5/checkpoint.bin"),
    );
    assert!(swept == read(dir.path().join("out/checkpoint.bin")));
    let plain: serde_json::Value =
        serde_json::from_slice(&read(dir.path().join("out/eval.json"))).unwrap();
    let point: serde_json::Value = serde_json::from_slice(&read(
        dir.path()
            .join("out/sweep/label_sampling_rate=0.5/eval.json"),
    ))
    .unwrap();
    for key in ["mean_psnr", "mean_ssim", "pixel_accuracy", "class_iou"] {
        assert_eq!(plain[key], point[key], "{key}");
    }
    let csv =
        String::from_utf8(read(dir.path().join("out/sweep/label_sampling_rate.csv"))).unwrap();
    assert!(
        csv.starts_with("value,mean_ssim,mean_psnr,pixel_accuracy\n0.5,"),
        "{csv}"
    );
}
