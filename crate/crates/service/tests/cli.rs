use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use polymodal_core::audio::AudioSchedule;
use polymodal_core::model::{Channel, EncodingRef, MultimodalSpec, UnitKind};
use polymodal_core::{DataFormat, Dataset, Predicate};

fn data(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/data").join(name)
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_polymodal")).args(args).output().unwrap()
}

fn stocks() -> String {
    data("stocks.csv").to_string_lossy().into_owned()
}

fn schedules(dir: &Path) -> Vec<AudioSchedule> {
    serde_json::from_slice(&std::fs::read(dir.join("audio.json")).unwrap()).unwrap()
}

#[test]
fn compile_with_defaults_writes_four_artifacts() {
    let out = tempfile::tempdir().unwrap();
    let r = run(&["compile", &stocks(), "--defaults", out.path().to_str().unwrap()]);
    assert_eq!(r.status.code(), Some(0), "{}", String::from_utf8_lossy(&r.stderr));
    let mut files: Vec<String> = std::fs::read_dir(out.path())
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .collect();
    files.sort();
    assert_eq!(files, ["audio.json", "text.json", "text.txt", "visual.vl.json"]);
    let doc: serde_json::Value = serde_json::from_slice(&std::fs::read(out.path().join("visual.vl.json")).unwrap()).unwrap();
    assert_eq!(doc["mark"]["type"], "line");
}

#[test]
fn compile_with_wav_adds_tracks_and_cues() {
    let out = tempfile::tempdir().unwrap();
    let r = run(&["compile", &stocks(), "--defaults", out.path().to_str().unwrap(), "--wav", "--sample-rate", "8000"]);
    assert_eq!(r.status.code(), Some(0));
    assert!(out.path().join("audio_0.wav").exists());
    assert!(out.path().join("audio_0.cues.json").exists());
}

#[test]
fn malformed_csv_exits_2_with_a_line_number() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.csv");
    std::fs::write(&bad, "a,b\n1,2\n3\n").unwrap();
    let r = run(&["compile", bad.to_str().unwrap(), "--defaults", dir.path().join("out").to_str().unwrap()]);
    assert_eq!(r.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&r.stderr).contains("line 3"));
}

#[test]
fn duplicate_channel_exits_3_naming_the_channel() {
    let ds = Dataset::load_typed(&std::fs::read(data("stocks.csv")).unwrap(), DataFormat::Csv).unwrap();
    let all: Vec<String> = ds.column_names().iter().map(|s| s.to_string()).collect();
    let mut spec: MultimodalSpec = polymodal_core::defaults::defaults_for_selection(&ds, &all);
    spec.field_mut("symbol")
        .unwrap()
        .encodings
        .push(EncodingRef::new(UnitKind::Visual, "visual_0", Channel::Y));
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("spec.json");
    std::fs::write(&path, serde_json::to_vec(&spec).unwrap()).unwrap();
    let out = dir.path().join("out");
    let r = run(&["compile", &stocks(), "--spec", path.to_str().unwrap(), out.to_str().unwrap()]);
    assert_eq!(r.status.code(), Some(3));
    let stderr = String::from_utf8_lossy(&r.stderr);
    assert!(stderr.contains("duplicate-channel") && stderr.contains("`y`"), "{stderr}");
    let v = run(&["validate", path.to_str().unwrap()]);
    assert_eq!(v.status.code(), Some(3));
}

#[test]
fn spec_files_round_trip_through_compile() {
    let dir = tempfile::tempdir().unwrap();
    let defaults = run(&["defaults", &stocks()]);
    let path = dir.path().join("spec.json");
    std::fs::write(&path, &defaults.stdout).unwrap();
    assert_eq!(run(&["validate", path.to_str().unwrap()]).status.code(), Some(0));
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    run(&["compile", &stocks(), "--spec", path.to_str().unwrap(), a.to_str().unwrap()]);
    run(&["compile", &stocks(), "--defaults", b.to_str().unwrap()]);
    for f in ["visual.vl.json", "text.json", "text.txt", "audio.json"] {
        assert_eq!(std::fs::read(a.join(f)).unwrap(), std::fs::read(b.join(f)).unwrap(), "{f}");
    }
    std::fs::write(&path, "{").unwrap();
    assert_eq!(run(&["validate", path.to_str().unwrap()]).status.code(), Some(2));
}

#[test]
fn sonify_filter_plays_only_the_selection() {
    let out = tempfile::tempdir().unwrap();
    let r = run(&[
        "sonify",
        &stocks(),
        "--defaults",
        "--out",
        out.path().to_str().unwrap(),
        "--filter",
        r#"{"field":"symbol","equal":"GOOG"}"#,
        "--sample-rate",
        "8000",
    ]);
    assert_eq!(r.status.code(), Some(0), "{}", String::from_utf8_lossy(&r.stderr));
    let ds = Dataset::load_typed(&std::fs::read(data("stocks.csv")).unwrap(), DataFormat::Csv).unwrap();
    let goog = ds.matching_rows(&Predicate::equal("symbol", "GOOG")).unwrap();
    let s = &schedules(out.path())[0];
    let mut rows: Vec<usize> = s.tones().flat_map(|t| ds.matching_rows(&t.source_predicate).unwrap()).collect();
    rows.sort_unstable();
    assert_eq!(rows, goog);
    assert!(out.path().join("audio_0.wav").exists());
}

#[test]
fn sonify_rate_and_ticks() {
    let tone_time = |rate: &str, ticks: &str| {
        let out = tempfile::tempdir().unwrap();
        let r = run(&[
            "sonify", &stocks(), "--defaults", "--out", out.path().to_str().unwrap(), "--rate", rate, "--ticks", ticks,
            "--sample-rate", "8000",
        ]);
        assert_eq!(r.status.code(), Some(0));
        let cues = std::fs::read_to_string(out.path().join("audio_0.cues.json")).unwrap();
        (schedules(out.path())[0].tone_time(), cues)
    };
    let (t1, cues_on) = tone_time("1", "on");
    let (t2, cues_off) = tone_time("2", "off");
    assert!((t1 - 2.0 * t2).abs() < 1e-9);
    assert!(cues_on.contains("MSFT"));
    assert_eq!(cues_off.trim(), "[]");
}

#[test]
fn sonify_playback_orders() {
    let out = tempfile::tempdir().unwrap();
    let r = run(&[
        "sonify", &stocks(), "--defaults", "--out", out.path().to_str().unwrap(), "--order", "2005 by symbol", "--at",
        "date=2005-01-01", "--at", "symbol=AAPL", "--sample-rate", "8000",
    ]);
    assert_eq!(r.status.code(), Some(0), "{}", String::from_utf8_lossy(&r.stderr));
    let s = &schedules(out.path())[0];
    assert_eq!(s.order, "2005 by symbol");
    assert_eq!(s.tones().count(), 5);
    let r = run(&["sonify", &stocks(), "--defaults", "--out", out.path().to_str().unwrap(), "--order", "sideways"]);
    assert_eq!(r.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&r.stderr).contains("by symbol, then date"));
}

#[test]
fn tree_key_and_defaults_print() {
    let r = run(&["tree", &stocks(), "--defaults", "--filter", r#"{"field":"symbol","equal":"IBM"}"#]);
    let text = String::from_utf8_lossy(&r.stdout);
    assert!(text.starts_with("- A line chart with 1 series by symbol. 123 rows."), "{text}");
    let key = run(&["key", data("gapminder.json").to_str().unwrap()]);
    assert_eq!(serde_json::from_slice::<Vec<String>>(&key.stdout).unwrap(), ["year", "country"]);
    let d = run(&["defaults", &stocks(), "--fields", "symbol,price"]);
    let spec: MultimodalSpec = serde_json::from_slice(&d.stdout).unwrap();
    assert_eq!(spec.fields.len(), 2);
    let bad = run(&["tree", &stocks(), "--defaults", "--filter", r#"{"field":"nope","equal":1}"#]);
    assert_eq!(bad.status.code(), Some(2));
}

#[test]
fn usage_errors_exit_2() {
    assert_eq!(run(&[]).status.code(), Some(2));
    assert_eq!(run(&["compile", &stocks()]).status.code(), Some(2));
    assert_eq!(run(&["schema", "nope"]).status.code(), Some(2));
}

#[test]
fn schemas_match_the_shipped_files() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(run(&["schema", "--out", dir.path().to_str().unwrap()]).status.code(), Some(0));
    let shipped = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../schemas");
    for e in std::fs::read_dir(&shipped).unwrap() {
        let e = e.unwrap();
        assert_eq!(std::fs::read(e.path()).unwrap(), std::fs::read(dir.path().join(e.file_name())).unwrap());
    }
}

#[test]
fn serve_binds_the_address_from_the_environment() {
    use std::io::{BufRead, BufReader, Read, Write};
    let mut child = Command::new(env!("CARGO_BIN_EXE_polymodal"))
        .arg("serve")
        .env("POLYMODAL_ADDR", "127.0.0.1:0")
        .stderr(std::process::Stdio::piped())
        .spawn()
        .unwrap();
    let mut line = String::new();
    BufReader::new(child.stderr.take().unwrap()).read_line(&mut line).unwrap();
    let addr = line.trim().strip_prefix("listening on ").unwrap().to_string();
    let mut stream = std::net::TcpStream::connect(&addr).unwrap();
    write!(stream, "GET /sessions/none/state HTTP/1.1\r\nHost: {addr}\r\nConnection: close\r\n\r\n").unwrap();
    let mut reply = String::new();
    stream.read_to_string(&mut reply).unwrap();
    child.kill().unwrap();
    child.wait().unwrap();
    assert!(reply.starts_with("HTTP/1.1 404"), "{reply}");
}
