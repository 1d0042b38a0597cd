use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn scene(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_scene"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .expect("binary runs")
}

fn short_config(dir: &Path) -> String {
    let path = dir.join("config.toml");
    fs::write(
        &path,
        "[scenario]\nduration = 3.0\n\n[pipeline.tracking]\nconfirm_hits = 3\n",
    )
    .unwrap();
    path.to_str().unwrap().to_string()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn stages_chain_through_files() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = short_config(tmp.path());
    let data = tmp.path().join("data");
    let out = tmp.path().join("out");

    let g = scene(&[
        "generate",
        "--config",
        &cfg,
        "--seed",
        "4",
        "--fast",
        "--out",
        s(&data),
    ]);
    assert!(g.status.success(), "{}", String::from_utf8_lossy(&g.stderr));
    assert!(
        data.join("map.toml").exists() && data.join("images").join("disparity_00000.png").exists()
    );

    let r = scene(&[
        "run",
        "--config",
        &cfg,
        "--seed",
        "4",
        "--dataset",
        s(&data),
        "--out",
        s(&out),
    ]);
    assert!(r.status.success(), "{}", String::from_utf8_lossy(&r.stderr));
    let ego = fs::read_to_string(out.join("ego_estimate.csv")).unwrap();
    assert_eq!(ego.lines().count(), 1 + 45);

    let e = scene(&[
        "eval",
        "--config",
        &cfg,
        "--dataset",
        s(&data),
        "--out",
        s(&out),
    ]);
    assert!(e.status.success());
    assert!(String::from_utf8_lossy(&e.stdout).contains("detection rate"));
    let report = fs::read_to_string(out.join("report.toml")).unwrap();
    assert!(report.contains("frames = 45"));

    let p = scene(&["plot", "--dataset", s(&data), "--out", s(&out)]);
    assert!(p.status.success());
    let svg = fs::read_to_string(out.join("trajectories.svg")).unwrap();
    assert!(svg.contains("class=\"ego\""));
    assert!(out.join("velocity.svg").exists());
}

#[test]
fn identical_seeds_give_identical_files() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = short_config(tmp.path());
    let mut outputs = Vec::new();
    for k in 0..2 {
        let out = tmp.path().join(format!("run{k}"));
        let o = scene(&[
            "e2e",
            "--config",
            &cfg,
            "--seed",
            "11",
            "--fast",
            "--out",
            s(&out),
        ]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        outputs.push(out);
    }
    for f in [
        "tracks.csv",
        "ego_estimate.csv",
        "report.toml",
        "report.txt",
        "trajectories.svg",
    ] {
        assert_eq!(
            fs::read(outputs[0].join(f)).unwrap(),
            fs::read(outputs[1].join(f)).unwrap(),
            "{f}"
        );
    }
}

#[test]
fn ablation_switch_changes_only_the_run() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = short_config(tmp.path());
    let on = tmp.path().join("on");
    let off = tmp.path().join("off");
    assert!(scene(&[
        "e2e",
        "--config",
        &cfg,
        "--seed",
        "2",
        "--fast",
        "--out",
        s(&on)
    ])
    .status
    .success());
    let o = scene(&[
        "e2e",
        "--config",
        &cfg,
        "--seed",
        "2",
        "--fast",
        "--ablation",
        "heading_correction=off",
        "--out",
        s(&off),
    ]);
    assert!(o.status.success());
    let sources = fs::read_to_string(off.join("ego_estimate.csv")).unwrap();
    assert!(!sources.contains(",ndt"));
    assert!(fs::read_to_string(on.join("ego_estimate.csv"))
        .unwrap()
        .contains(",ndt"));
    assert_eq!(
        fs::read(on.join("dataset/truth.csv")).unwrap(),
        fs::read(off.join("dataset/truth.csv")).unwrap()
    );
}

#[test]
fn bad_inputs_fail_with_a_diagnostic() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");

    let o = scene(&["e2e", "--ablation", "warp_drive=on", "--out", s(&out)]);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("warp_drive"));

    let o = scene(&[
        "generate",
        "--config",
        s(&tmp.path().join("nope.toml")),
        "--out",
        s(&out),
    ]);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("nope.toml"));

    let bad = tmp.path().join("bad.toml");
    fs::write(&bad, "[scenario]\nframe_rate = -1.0\n").unwrap();
    let o = scene(&["generate", "--config", s(&bad), "--out", s(&out)]);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("frame_rate"));

    let o = scene(&[
        "run",
        "--dataset",
        s(&tmp.path().join("missing")),
        "--out",
        s(&out),
    ]);
    assert!(!o.status.success());

    fs::create_dir_all(&out).unwrap();
    let o = scene(&[
        "plot",
        "--dataset",
        s(&tmp.path().join("missing")),
        "--out",
        s(&out),
    ]);
    assert!(!o.status.success());
}
