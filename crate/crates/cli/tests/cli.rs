use std::path::Path;
use std::process::{Command, Output};

use motskit::dataset::{write_mots_txt, AnnotatedObject, ClassId, SequenceAnnotation};
use motskit::mask::{rle_encode, BinaryMask};

fn motskit(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_motskit")).args(args).output().unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn error_json(o: &Output) -> serde_json::Value {
    serde_json::from_slice(&o.stderr).unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(&o.stderr)))
}

#[test]
fn synth_pipeline_eval_is_perfect() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let o = motskit(&["synth", "--out", s(d), "--seed", "3", "--constant-depth"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let pred = d.join("pred.txt");
    let o = motskit(&[
        "pipeline",
        "--detections",
        s(&d.join("detections.json")),
        "--depth",
        s(&d.join("depth")),
        "--out",
        s(&pred),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let report = d.join("report.json");
    let o = motskit(&["eval", "--gt", s(&d.join("gt/synth.txt")), "--pred", s(&pred), "--percent", "--out", s(&report)]);
    assert!(o.status.success());
    let text = stdout(&o);
    assert!(text.contains("100.00"), "{text}");
    let json: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();
    for key in ["smotsa", "motsa", "hota"] {
        assert_eq!(json["aggregate"][key], 1.0);
    }
    assert_eq!(json["aggregate"]["ids"], 0);
}

#[test]
fn eval_on_identical_directories() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert!(motskit(&["synth", "--out", s(d), "--seed", "1"]).status.success());
    let o = motskit(&["eval", "--gt", s(&d.join("gt")), "--pred", s(&d.join("gt")), "--percent"]);
    assert!(o.status.success());
    let text = stdout(&o);
    let agg = text.lines().find(|l| l.starts_with("aggregate")).unwrap();
    assert_eq!(agg.matches("100.00").count(), 3, "{agg}");
}

fn table_fixture(dir: &Path) {
    let (h, w) = (1, 64);
    let mut global = 0usize;
    for s in 0..21 {
        let frames = if s < 20 { 381 } else { 380 };
        let ids = if s < 20 { 35 } else { 49 };
        let mut ann = SequenceAnnotation::new(format!("{s:04}"), frames, h, w);
        for f in 0..frames {
            let per_frame = if global < 6240 { 5 } else { 4 };
            global += 1;
            for t in 0..per_frame {
                let id = (f * 4 + t) % ids;
                ann.push(
                    f,
                    AnnotatedObject {
                        track_id: id as u32 + 1,
                        class_id: ClassId::CAR,
                        mask: rle_encode(&BinaryMask::from_fn(h, w, |_, c| c == id).unwrap()),
                    },
                );
            }
        }
        // the last frame of every clip is populated, so no count override is needed
        std::fs::write(dir.join(format!("{s:04}.txt")), write_mots_txt(&ann).join("\n") + "\n").unwrap();
    }
}

#[test]
fn stats_table_row() {
    let dir = tempfile::tempdir().unwrap();
    table_fixture(dir.path());
    let o = motskit(&["stats", "--gt", s(dir.path()), "--name", "KITTI MOTS"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    let row: Vec<&str> = text.lines().nth(2).unwrap().split('|').map(str::trim).collect();
    assert_eq!(row, ["KITTI MOTS", "21", "8K", "749", "38K", "4.78"]);
}

#[test]
fn stride_flag_defaults_to_five() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert!(motskit(&["synth", "--out", s(d), "--frames", "10"]).status.success());
    let o = motskit(&["stats", "--gt", s(&d.join("gt")), "--stride"]);
    assert!(o.status.success());
    let row: Vec<String> = stdout(&o).lines().nth(2).unwrap().split('|').map(|c| c.trim().to_string()).collect();
    assert_eq!(row[2], "2");
}

#[test]
fn usage_errors_exit_two_with_json() {
    let o = motskit(&["eval", "--gt", "/nonexistent/gt.txt", "--pred", "/nonexistent/p.txt"]);
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(error_json(&o)["error"]["category"], "usage");
    let o = motskit(&["refine", "--k"]);
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(error_json(&o)["error"]["category"], "usage");
    let o = motskit(&["--jobs", "0", "synth", "--out", "/tmp/never"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn malformed_input_exits_three() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.txt");
    std::fs::write(&bad, "0 1001 1 4 4 not-rle\n").unwrap();
    let o = motskit(&["eval", "--gt", s(&bad), "--pred", s(&bad)]);
    assert_eq!(o.status.code(), Some(3));
    assert_eq!(error_json(&o)["error"]["category"], "input-format");
}

#[test]
fn codec_round_trip_and_no_partial_output() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let grid = "0110\n1111\n0000\n";
    std::fs::write(d.join("m.txt"), grid).unwrap();
    let rle = d.join("m.json");
    assert!(motskit(&["codec", "encode", s(&d.join("m.txt")), "--out", s(&rle)]).status.success());
    let back = d.join("back.txt");
    assert!(motskit(&["codec", "decode", s(&rle), "--out", s(&back)]).status.success());
    assert_eq!(std::fs::read_to_string(&back).unwrap(), grid);

    std::fs::write(d.join("ragged.txt"), "01\n011\n").unwrap();
    let never = d.join("never.json");
    let o = motskit(&["codec", "encode", s(&d.join("ragged.txt")), "--out", s(&never)]);
    assert_eq!(o.status.code(), Some(3));
    assert!(!never.exists());
    let names: Vec<_> = std::fs::read_dir(d).unwrap().map(|e| e.unwrap().file_name()).collect();
    assert_eq!(names.len(), 4, "{names:?}");
}
