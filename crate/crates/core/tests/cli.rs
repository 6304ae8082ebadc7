//! Runs the `sqdr` binary and checks it against direct library calls.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::sync::OnceLock;

use sqdr::cli::{self, EvalArgs, InferArgs};
use sqdr::metrics::EvalOptions;
use sqdr::signal::{self, AudioClip, SnrMixSpec};
use tempfile::TempDir;

fn sqdr(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sqdr"))
        .args(args)
        .env_remove(cli::THREADS_ENV)
        .output()
        .expect("binary runs")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn stdout(o: &Output) -> String {
    assert!(o.status.success(), "stderr: {}", String::from_utf8_lossy(&o.stderr));
    String::from_utf8(o.stdout.clone()).unwrap()
}

const SMOKE_CONFIG: &str = "\
seed = 4
model.channels = 16
train.epochs = 2
train.batch_size = 16
data.train = synthetic:n=64,speech_frac=0.5
data.val = synthetic:n=16,speech_frac=0.5
";

struct Trained {
    dir: TempDir,
}

impl Trained {
    fn out(&self) -> PathBuf {
        self.dir.path().join("run")
    }
    fn best(&self) -> PathBuf {
        self.out().join("best.sqdr")
    }
}

/// One smoke training run shared by the tests that need a checkpoint.
fn trained() -> &'static Trained {
    static CELL: OnceLock<Trained> = OnceLock::new();
    CELL.get_or_init(|| {
        let dir = tempfile::tempdir().unwrap();
        let cfg = dir.path().join("smoke.cfg");
        std::fs::write(&cfg, SMOKE_CONFIG).unwrap();
        let out = dir.path().join("run");
        let o = sqdr(&["train", s(&cfg), s(&out)]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        Trained { dir }
    })
}

fn tone_wav(dir: &Path, name: &str, seconds: f64, freq: f64) -> PathBuf {
    let n = (seconds * 16_000.0) as usize;
    let clip = AudioClip::new(
        (0..n).map(|i| 0.3 * (2.0 * std::f64::consts::PI * freq * i as f64 / 16_000.0).sin()).collect(),
        16_000,
    )
    .unwrap();
    let p = dir.join(name);
    signal::write_wav(&clip, &p).unwrap();
    p
}

#[test]
fn train_writes_outputs_deterministically() {
    let t = trained();
    for f in ["best.sqdr", "final.sqdr", "trainlog.csv"] {
        assert!(t.out().join(f).is_file(), "{f} missing");
    }
    let log = std::fs::read_to_string(t.out().join("trainlog.csv")).unwrap();
    assert_eq!(log.lines().count(), 3);
    assert!(log.starts_with("epoch,lr,total,bce,qdr,val_auroc,val_f2,seconds\n"));

    let again = t.dir.path().join("again");
    let o = sqdr(&["train", s(&t.dir.path().join("smoke.cfg")), s(&again)]);
    assert!(o.status.success());
    for f in ["best.sqdr", "final.sqdr", "trainlog.csv"] {
        assert_eq!(std::fs::read(t.out().join(f)).unwrap(), std::fs::read(again.join(f)).unwrap(), "{f}");
    }
}

#[test]
fn train_matches_library_call() {
    let t = trained();
    let lib = t.dir.path().join("lib");
    cli::cmd_train(&t.dir.path().join("smoke.cfg"), &lib, 1).unwrap();
    for f in ["best.sqdr", "final.sqdr", "trainlog.csv"] {
        assert_eq!(std::fs::read(t.out().join(f)).unwrap(), std::fs::read(lib.join(f)).unwrap(), "{f}");
    }
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nowhere");
    let cfg = dir.path().join("missing.cfg");
    std::fs::write(&cfg, format!("data.train = {}\ndata.val = {}\n", s(&missing), s(&missing))).unwrap();
    let o = sqdr(&["train", s(&cfg), s(&dir.path().join("o"))]);
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).contains("nowhere"));

    let bad = dir.path().join("bad.cfg");
    std::fs::write(&bad, "train.epochs = 2\ntrain.bogus = 1\n").unwrap();
    let o = sqdr(&["train", s(&bad), s(&dir.path().join("o"))]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("train.bogus") && err.contains('2'), "{err}");

    assert_eq!(sqdr(&["frobnicate"]).status.code(), Some(2));

    let junk = dir.path().join("junk.sqdr");
    std::fs::write(&junk, b"not a checkpoint at all").unwrap();
    let wav = tone_wav(dir.path(), "t.wav", 1.0, 300.0);
    let o = sqdr(&["infer", s(&junk), s(&wav)]);
    assert_eq!(o.status.code(), Some(3));

    let blowup = dir.path().join("blowup.cfg");
    std::fs::write(
        &blowup,
        "model.channels = 16\ntrain.epochs = 3\ntrain.peak_lr = 1e200\ntrain.batch_size = 8\n\
         data.train = synthetic:n=16\ndata.val = synthetic:n=8\n",
    )
    .unwrap();
    let o = sqdr(&["train", s(&blowup), s(&dir.path().join("o"))]);
    assert_eq!(o.status.code(), Some(4), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn synth_writes_clips_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("set");
    stdout(&sqdr(&["synth", "--n", "10", "--seed", "3", s(&out)]));
    let wavs = std::fs::read_dir(&out)
        .unwrap()
        .filter(|e| e.as_ref().unwrap().path().extension().is_some_and(|x| x == "wav"))
        .count();
    assert_eq!(wavs, 10);
    let manifest = std::fs::read_to_string(out.join("manifest.tsv")).unwrap();
    let rows = manifest.lines().filter(|l| !l.starts_with("path\t")).count();
    assert_eq!(rows, 10);
    assert_eq!(signal::load_dataset(&out).unwrap().len(), 10);
}

#[test]
fn infer_rows_and_library_parity() {
    let t = trained();
    let dir = tempfile::tempdir().unwrap();
    let wav = tone_wav(dir.path(), "one.wav", 1.0, 440.0);
    let text = stdout(&sqdr(&["infer", s(&t.best()), s(&wav)]));
    let rows: Vec<Vec<&str>> = text.lines().map(|l| l.split('\t').collect()).collect();
    assert_eq!(rows.len(), 3);
    assert_eq!(rows.iter().map(|r| r[0]).collect::<Vec<_>>(), ["0.000", "0.150", "0.300"]);

    let model = sqdr::checkpoint::load(t.best()).unwrap().model;
    let clip = signal::read_wav(&wav).unwrap();
    let scores = model.predict_windows(&clip, 0.63, 0.15).unwrap();
    for (row, (_, sc)) in rows.iter().zip(&scores) {
        assert_eq!(row[2], if *sc >= 0.5 { "1" } else { "0" });
    }
    let lib = cli::cmd_infer(&InferArgs { checkpoint: t.best(), wav: wav.clone(), options: EvalOptions::default() }).unwrap();
    assert_eq!(text, lib);

    let long = tone_wav(dir.path(), "ten.wav", 10.0, 440.0);
    let raw = stdout(&sqdr(&["infer", s(&t.best()), s(&long)]));
    let smooth = stdout(&sqdr(&["infer", s(&t.best()), s(&long), "--smooth"]));
    assert_eq!(raw.lines().count(), 63);
    assert_eq!(smooth.lines().count(), 63);
}

#[test]
fn eval_json_and_library_parity() {
    let t = trained();
    let ds = "synthetic:n=12,speech_frac=0.5";
    let text = stdout(&sqdr(&["eval", s(&t.best()), ds, "--seed", "2"]));
    let v: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert!(v["auroc"].is_number() && v["f2"].is_number());
    let args = EvalArgs {
        checkpoint: t.best(),
        dataset: ds.into(),
        options: EvalOptions::default(),
        snr_sweep: None,
        noise_dir: None,
        csv: None,
        seed: 2,
    };
    assert_eq!(text, cli::cmd_eval(&args).unwrap());
}

#[test]
fn snr_sweep_csv_has_table_shape() {
    let t = trained();
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("sweep.csv");
    let text = stdout(&sqdr(&[
        "eval",
        s(&t.best()),
        "synthetic:n=12,speech_frac=0.5",
        "--snr-sweep",
        "10,5,0,-5,-10",
        "--csv",
        s(&csv),
    ]));
    let table = std::fs::read_to_string(&csv).unwrap();
    let rows: Vec<&str> = table.lines().skip(1).collect();
    assert_eq!(rows.len(), 6, "{table}");
    assert!(rows[5].starts_with("Avg."), "{table}");
    let v: serde_json::Value = serde_json::from_str(&text).unwrap();
    let conds = v["conditions"].as_object().unwrap();
    assert_eq!(conds.len(), 6);
    assert_eq!(conds.keys().collect::<Vec<_>>(), ["10", "5", "0", "-5", "-10", "Avg."]);
}

#[test]
fn inspect_filters_dumps_every_filter() {
    let t = trained();
    let dir = tempfile::tempdir().unwrap();
    let prefix = dir.path().join("f");
    stdout(&sqdr(&["inspect-filters", s(&t.best()), s(&prefix)]));
    let params = std::fs::read_to_string(dir.path().join("f_params.csv")).unwrap();
    assert_eq!(params.lines().count(), 65);
    let resp = std::fs::read_to_string(dir.path().join("f_response.csv")).unwrap();
    assert_eq!(resp.lines().count(), 1 + 64 * (cli::RESPONSE_FFT / 2 + 1));
}

#[test]
fn mix_matches_library_and_snr() {
    let dir = tempfile::tempdir().unwrap();
    let speech = tone_wav(dir.path(), "s.wav", 1.0, 300.0);
    let noise = tone_wav(dir.path(), "n.wav", 0.3, 2_100.0);
    let out = dir.path().join("m.wav");
    stdout(&sqdr(&["mix", s(&speech), s(&noise), "--snr", "0", "--seed", "7", s(&out)]));
    let (sp, nz) = (signal::read_wav(&speech).unwrap(), signal::read_wav(&noise).unwrap());
    let lib = signal::mix_at_snr(&sp, &nz, SnrMixSpec { snr_db: 0.0, seed: 7 }).unwrap();
    let lib_path = dir.path().join("lib.wav");
    signal::write_wav(&lib, &lib_path).unwrap();
    assert_eq!(std::fs::read(&out).unwrap(), std::fs::read(&lib_path).unwrap());
    let mixed = signal::read_wav(&out).unwrap();
    let resid: Vec<f64> = mixed.samples.iter().zip(&sp.samples).map(|(m, x)| m - x).collect();
    let ratio = signal::rms(&resid) / sp.rms();
    // Only 16-bit quantization separates this from exact parity.
    assert!((ratio - 1.0).abs() < 1e-3, "{ratio}");
}
