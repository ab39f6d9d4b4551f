use std::fs;
use std::path::Path;
use std::process::Command;

fn run(out: &Path, args: &[&str]) -> String {
    let output = Command::new(env!("CARGO_BIN_EXE_occ-csk"))
        .arg("--out")
        .arg(out)
        .args(args)
        .output()
        .unwrap();
    assert!(output.status.success(), "{}", String::from_utf8_lossy(&output.stderr));
    String::from_utf8(output.stdout).unwrap()
}

const SMALL: &str = r#"{
    "led_counts": [16],
    "hidden_units": [16],
    "hidden_layers": [1],
    "equalizer": { "hidden_units": 16, "hidden_layers": 1 },
    "training": { "sample_count": 1000, "epochs": 3 },
    "uncoded_bits": 9000,
    "code_rates": ["1/4"],
    "blocks_per_point": 1
}"#;

#[test]
fn constellation_table_has_one_row_per_symbol() {
    let dir = tempfile::tempdir().unwrap();
    run(dir.path(), &["constellation"]);
    let text = fs::read_to_string(dir.path().join("constellation.csv")).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "index,bits,r,g,b,x,y");
    assert_eq!(lines.len(), 513);
    assert!(lines[1].starts_with("0,000000000,0,0,1,"));
}

#[test]
fn sweeps_repeat_byte_for_byte_across_worker_counts() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("small.json");
    fs::write(&config, SMALL).unwrap();
    let config = config.to_str().unwrap();
    let mut files = Vec::new();
    for workers in ["1", "3"] {
        let out = dir.path().join(workers);
        run(&out, &["--config", config, "--workers", workers, "uncoded"]);
        run(&out, &["--config", config, "--workers", workers, "coded"]);
        let read = |name: &str| fs::read(out.join(name)).unwrap();
        files.push([read("uncoded.csv"), read("uncoded.json"), read("coded.csv"), read("coded.json")]);
    }
    assert_eq!(files[0], files[1]);
    let header = String::from_utf8(files[0][0].clone()).unwrap();
    assert!(header.starts_with("led_count,N_u,N_h,rate,coded,bit_errors,bits_total,ber,wall_time_s\n"));
}

#[test]
fn trained_model_feeds_the_coded_sweep() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("small.json");
    fs::write(&config, SMALL).unwrap();
    let config = config.to_str().unwrap();
    run(dir.path(), &["--config", config, "train", "--led-count", "16"]);
    let model = dir.path().join("model_led16_u16_h1.occm");
    assert!(model.exists());
    let stdout = run(dir.path(), &["--config", config, "coded", "--model", model.to_str().unwrap()]);
    assert!(stdout.contains("rate 1/4"), "{stdout}");
    let csv = fs::read_to_string(dir.path().join("coded.csv")).unwrap();
    assert!(csv.contains("\n16,16,1,1/4,true,"), "{csv}");
}

#[test]
fn synthesized_frames_replay_without_errors_on_a_clean_channel() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("clean.json");
    fs::write(&config, r#"{ "channel": { "noise_sigma0": 0.0 }, "baseline": "received" }"#).unwrap();
    let stdout = run(
        dir.path(),
        &["--config", config.to_str().unwrap(), "replay", "--synthesize", "20", "--pattern", "gbrg"],
    );
    assert!(stdout.contains("20 frames replayed, 0 symbol errors"), "{stdout}");
    let csv = fs::read_to_string(dir.path().join("replay.csv")).unwrap();
    assert_eq!(csv.lines().count(), 21);
    assert_eq!(fs::read_dir(dir.path().join("frames")).unwrap().count(), 20);
}

#[test]
fn bad_config_fields_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("bad.json");
    fs::write(&config, r#"{ "epochs": 10 }"#).unwrap();
    let output = Command::new(env!("CARGO_BIN_EXE_occ-csk"))
        .args(["--config", config.to_str().unwrap(), "constellation"])
        .output()
        .unwrap();
    assert!(!output.status.success());
}
