use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

const SMALL: [&str; 4] = ["--set", "ladder=4,8", "--set", "gof_length=10"];

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_deformstream")).args(args).output().expect("spawn deformstream")
}

fn json_stdout(out: &Output) -> Value {
    let text = String::from_utf8_lossy(&out.stdout);
    serde_json::from_str(text.trim()).unwrap_or_else(|e| panic!("stdout is not JSON ({e}): {text}"))
}

fn ok(args: &[&str]) -> Value {
    let out = run(args);
    assert!(out.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&out.stdout));
    json_stdout(&out)
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

struct Fixture {
    dir: tempfile::TempDir,
}

impl Fixture {
    /// 20 bent-cylinder frames encoded as two GoFs with a two-level ladder.
    fn new() -> Self {
        let dir = tempfile::tempdir().unwrap();
        let f = Fixture { dir };
        let (seq, stream) = (f.path("seq"), f.path("s.dfst"));
        ok(&["gen-synthetic", "--kind", "bend", "--output", s(&seq), "--frames", "20", "--resolution", "4"]);
        let mut args = vec!["encode", "--input", s(&seq), "--output", s(&stream)];
        args.extend(SMALL);
        let enc = ok(&args);
        assert_eq!(enc["frames"], 20);
        assert_eq!(enc["gofs"], 2);
        f
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    fn trace(&self, name: &str, bps: f64) -> PathBuf {
        let p = self.path(name);
        std::fs::write(&p, format!("time_s,bandwidth_bps\n0,{bps}\n")).unwrap();
        p
    }

    fn simulate(&self, trace: &Path, out: &str) -> Value {
        let (stream, reference, out) = (self.path("s.dfst"), self.path("seq"), self.path(out));
        ok(&["simulate", "--stream", s(&stream), "--trace", s(trace), "--output-dir", s(&out), "--reference", s(&reference)])
    }
}

#[test]
fn encode_then_decode_every_frame() {
    let f = Fixture::new();
    let (stream, dec, seq) = (f.path("s.dfst"), f.path("dec"), f.path("seq"));
    let out = ok(&["decode", "--stream", s(&stream), "--output", s(&dec), "--level", "0", "--reference", s(&seq)]);
    assert_eq!(out["frames"], 20);
    assert_eq!(std::fs::read_dir(&dec).unwrap().count(), 20);
    let per_frame = out["per_frame"].as_array().unwrap();
    assert!(per_frame[0]["hausdorff"].as_f64().unwrap() < 1e-6);
    assert!(per_frame[10]["hausdorff"].as_f64().unwrap() < 1e-6);
    assert!(per_frame.iter().all(|f| f["hausdorff"].as_f64().unwrap().is_finite()));
}

#[test]
fn encoding_is_deterministic() {
    let f = Fixture::new();
    let seq = f.path("seq");
    let again = f.path("again.dfst");
    let mut args = vec!["encode", "--input", s(&seq), "--output", s(&again)];
    args.extend(SMALL);
    ok(&args);
    assert_eq!(std::fs::read(f.path("s.dfst")).unwrap(), std::fs::read(&again).unwrap());
}

#[test]
fn empty_directory_is_reported() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["encode", "--input", s(dir.path()), "--output", s(&dir.path().join("x.dfst"))]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(json_stdout(&out)["error"], "MissingDirectory");
}

#[test]
fn corrupted_stream_is_rejected() {
    let f = Fixture::new();
    let mut bytes = std::fs::read(f.path("s.dfst")).unwrap();
    bytes.truncate(bytes.len() - 7);
    let bad = f.path("bad.dfst");
    std::fs::write(&bad, &bytes).unwrap();
    let out = run(&["decode", "--stream", s(&bad), "--output", s(&f.path("dec"))]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(json_stdout(&out)["error"], "TruncatedStream");

    std::fs::write(&bad, b"not a stream").unwrap();
    let out = run(&["decode", "--stream", s(&bad), "--output", s(&f.path("dec"))]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(json_stdout(&out)["error"], "BadMagic");
}

#[test]
fn fast_link_never_rebuffers_and_plan_decodes() {
    let f = Fixture::new();
    let sim = f.simulate(&f.trace("fast.csv", 1e9), "fast");
    assert_eq!(sim["total_rebuffer_s"].as_f64().unwrap(), 0.0);
    assert_eq!(sim["overrun_count"], 0);
    assert_eq!(sim["aborted"], false);

    let csv = std::fs::read_to_string(f.path("fast/report.csv")).unwrap();
    assert_eq!(csv.lines().count() - 1, sim["chunks"].as_u64().unwrap() as usize);
    let report: Value = serde_json::from_str(&std::fs::read_to_string(f.path("fast/report.json")).unwrap()).unwrap();
    assert_eq!(report["chunks"].as_array().unwrap().len(), sim["chunks"].as_u64().unwrap() as usize);

    let plan = f.path("fast/plans.jsonl");
    let planned: Vec<Value> =
        std::fs::read_to_string(&plan).unwrap().lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(planned.len(), 20);
    let (stream, seq, dec) = (f.path("s.dfst"), f.path("seq"), f.path("dec"));
    let out = ok(&["decode", "--stream", s(&stream), "--output", s(&dec), "--plan", s(&plan), "--reference", s(&seq)]);
    for (p, d) in planned.iter().zip(out["per_frame"].as_array().unwrap()) {
        assert_eq!(p["frame"], d["frame"]);
        if p["kind"] == "reconstructed" {
            assert_eq!(p["level"], d["level"]);
        }
    }
}

#[test]
fn dead_link_rebuffers() {
    let f = Fixture::new();
    let sim = f.simulate(&f.trace("dead.csv", 0.0), "dead");
    assert!(sim["total_rebuffer_s"].as_f64().unwrap() > 0.0);
    assert_eq!(sim["aborted"], true);
}

#[test]
fn bdrate_of_an_rd_curve_against_itself_is_zero() {
    let f = Fixture::new();
    let (seq, rd, stream) = (f.path("seq"), f.path("rd.csv"), f.path("t.dfst"));
    let mut args = vec!["encode", "--input", s(&seq), "--output", s(&stream), "--rd-curve", s(&rd)];
    args.extend(["--set", "ladder=2,4,6,8", "--set", "gof_length=10"]);
    ok(&args);
    let out = ok(&["bdrate", s(&rd), s(&rd)]);
    assert!(out["bd_rate_percent"].as_f64().unwrap().abs() < 1e-9);
}

#[test]
fn unknown_config_keys_fail_with_config_error() {
    let out = run(&["gen-synthetic", "--kind", "bend", "--output", "/nonexistent/x", "--set", "bogus=1"]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(json_stdout(&out)["error"], "Config");
}
