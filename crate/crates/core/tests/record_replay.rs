use std::io::BufReader;

use cradle::agents::ReflexAgent;
use cradle::error::Error;
use cradle::runner::run_episode;
use cradle::session::{replay, Session, SessionConfig};

fn record(dir: &tempfile::TempDir, name: &str, seed: u64, steps: u64) -> std::path::PathBuf {
    let path = dir.path().join(name);
    let cfg = SessionConfig {
        record: Some(path.clone()),
        ..SessionConfig::with_seed(seed)
    };
    let mut s = Session::new(cfg).unwrap();
    run_episode(&mut s, &mut ReflexAgent::default(), steps, |_, _| false).unwrap();
    path
}

fn replay_file(path: &std::path::Path) -> cradle::Result<cradle::session::ReplayReport> {
    replay(BufReader::new(std::fs::File::open(path).unwrap()))
}

#[test]
fn thousand_steps_replay_clean() {
    let dir = tempfile::tempdir().unwrap();
    let path = record(&dir, "a.jsonl", 11, 1000);
    let report = replay_file(&path).unwrap();
    assert!(report.verified(), "{report:?}");
    assert_eq!(report.entries, 1001);
}

#[test]
fn same_inputs_same_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let a = std::fs::read(record(&dir, "a.jsonl", 5, 800)).unwrap();
    let b = std::fs::read(record(&dir, "b.jsonl", 5, 800)).unwrap();
    assert_eq!(a, b);
    let c = std::fs::read(record(&dir, "c.jsonl", 6, 800)).unwrap();
    assert_ne!(a, c);
}

#[test]
fn tampered_hash_and_observation() {
    let dir = tempfile::tempdir().unwrap();
    let path = record(&dir, "a.jsonl", 2, 200);
    let text = std::fs::read_to_string(&path).unwrap();
    let mut lines: Vec<String> = text.lines().map(String::from).collect();

    let mut v: serde_json::Value = serde_json::from_str(&lines[101]).unwrap();
    v["world_hash"] = "00000000deadbeef".into();
    let mut tampered = lines.clone();
    tampered[101] = v.to_string();
    std::fs::write(&path, tampered.join("\n")).unwrap();
    let d = replay_file(&path).unwrap().divergence.unwrap();
    assert_eq!((d.t, d.field), (100, "world_hash"));

    let mut v: serde_json::Value = serde_json::from_str(&lines[51]).unwrap();
    v["observation"]["intero"]["thirst"] = 0.9.into();
    lines[51] = v.to_string();
    std::fs::write(&path, lines.join("\n")).unwrap();
    let d = replay_file(&path).unwrap().divergence.unwrap();
    assert_eq!((d.t, d.field), (50, "observation"));
}

#[test]
fn truncation_and_garbage_name_the_line() {
    let dir = tempfile::tempdir().unwrap();
    let path = record(&dir, "a.jsonl", 2, 20);
    let text = std::fs::read_to_string(&path).unwrap();
    std::fs::write(&path, &text[..text.len() - 100]).unwrap();
    match replay_file(&path) {
        Err(Error::LogParse { line, .. }) => assert_eq!(line, 22),
        other => panic!("{other:?}"),
    }
    let mut lines: Vec<&str> = text.lines().collect();
    lines[5] = "not json";
    std::fs::write(&path, lines.join("\n")).unwrap();
    assert!(matches!(replay_file(&path), Err(Error::LogParse { line: 6, .. })));
}

#[test]
fn log_lines_are_ordered_and_reward_free() {
    let dir = tempfile::tempdir().unwrap();
    let path = record(&dir, "a.jsonl", 9, 700);
    let text = std::fs::read_to_string(&path).unwrap();
    let mut lines = text.lines();
    let header: serde_json::Value = serde_json::from_str(lines.next().unwrap()).unwrap();
    assert_eq!(header["type"], "header");
    assert!(header["config"].get("record").is_none());
    for (i, line) in lines.enumerate() {
        let v: serde_json::Value = serde_json::from_str(line).unwrap();
        assert_eq!(v["t"], i as u64);
        assert_eq!(v["world_hash"].as_str().unwrap().len(), 16);
        assert!(cradle::observation::reward_like_keys(&v["observation"]).is_empty());
        assert_eq!(v["action"].is_null(), i == 0);
    }
}
