use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::{Command, Output, Stdio};

use serde_json::Value;
use tempfile::TempDir;

const RUNNING: &str =
    "Add\tO\nKent\tB-ARTIST\nJames\tI-ARTIST\nto\tO\nthe\tO\nDisney\tB-PLAYLIST\nsoundtrack\tO\n";

const TS_TARGET: &str =
    "<O> Add </> <ARTIST> Kent James </> <O> to </> <O> the </> <PLAYLIST> Disney </> <O> soundtrack </>";

fn tagcast(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tagcast"))
        .args(args)
        .output()
        .unwrap()
}

fn write(dir: &TempDir, name: &str, text: &str) -> PathBuf {
    let path = dir.path().join(name);
    std::fs::write(&path, text).unwrap();
    path
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn stdout_json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap()
}

/// A small corpus with a few shapes: the running example, an all-outside
/// sentence, adjacent same-tag spans, and a leading inside label.
fn corpus() -> String {
    format!(
        "{RUNNING}\nhello\tO\nthere\tO\n\n# id: adjacent\nNew\tB-CITY\nYork\tI-CITY\nBoston\tB-CITY\n\nParis\tI-CITY\nin\tO\nspring\tB-TIME\n"
    )
}

#[test]
fn encode_sentinel_si() {
    let dir = TempDir::new().unwrap();
    let input = write(&dir, "run.conll", RUNNING);
    let out = tagcast(&[
        "encode",
        "--family",
        "sentinel-tag",
        "--si",
        "--input",
        s(&input),
    ]);
    assert_eq!(out.status.code(), Some(0));
    let v = stdout_json(&out);
    assert_eq!(
        v["target"],
        "<extra_id_0> O <extra_id_1> ARTIST <extra_id_2> I <extra_id_3> O <extra_id_4> O <extra_id_5> PLAYLIST <extra_id_6> O"
    );
    assert_eq!(v["format"], "sentinel-tag+si");
    assert_eq!(v["id"], "ex0");
}

#[test]
fn encode_tsv() {
    let dir = TempDir::new().unwrap();
    let input = write(&dir, "run.conll", RUNNING);
    let out = tagcast(&[
        "encode",
        "--format",
        "tagged-spans",
        "--output-mode",
        "tsv",
        "--input",
        s(&input),
    ]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(
        String::from_utf8(out.stdout).unwrap(),
        format!("ex0\tAdd Kent James to the Disney soundtrack\t{TS_TARGET}\n")
    );
}

#[test]
fn encode_from_stdin() {
    let mut child = Command::new(env!("CARGO_BIN_EXE_tagcast"))
        .args(["encode", "--family", "tag-only", "--output-mode", "tsv"])
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .unwrap();
    child
        .stdin
        .take()
        .unwrap()
        .write_all(RUNNING.as_bytes())
        .unwrap();
    let out = child.wait_with_output().unwrap();
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8(out.stdout)
        .unwrap()
        .ends_with("\tO ARTIST I-ARTIST O O PLAYLIST O\n"));
}

#[test]
fn exit_codes() {
    let dir = TempDir::new().unwrap();
    let input = write(&dir, "run.conll", RUNNING);
    let empty = write(&dir, "empty.conll", "");
    let reserved = write(&dir, "bad.conll", "a\tO\n</>\tO\n");

    let out = tagcast(&["encode", "--family", "tag-only", "--input", s(&empty)]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("empty"));

    let out = tagcast(&[
        "encode",
        "--family",
        "tagged-spans",
        "--si",
        "--input",
        s(&input),
    ]);
    assert_eq!(out.status.code(), Some(2));

    let out = tagcast(&["encode", "--input", s(&input)]);
    assert_eq!(out.status.code(), Some(2));

    let out = tagcast(&["encode", "--family", "no-such-family", "--input", s(&input)]);
    assert_eq!(out.status.code(), Some(2));

    let out = tagcast(&["roundtrip", "--input", s(&reserved)]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 2"));

    let out = Command::new(env!("CARGO_BIN_EXE_tagcast"))
        .args(["stats", "--input", s(&input)])
        .env("TAGCAST_WORKERS", "zero")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn roundtrip_all_formats() {
    let dir = TempDir::new().unwrap();
    let input = write(&dir, "c.conll", &corpus());
    let out = tagcast(&["roundtrip", "--formats", "all", "--input", s(&input)]);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let v = stdout_json(&out);
    assert_eq!(v["formats"].as_array().unwrap().len(), 13);
    assert!(v["failures"].as_array().unwrap().is_empty());
}

#[test]
fn roundtrip_with_injected_substitution() {
    let dir = TempDir::new().unwrap();
    let input = write(&dir, "run.conll", RUNNING);
    let out = tagcast(&[
        "roundtrip",
        "--family",
        "tagged-spans",
        "--inject",
        "substitute",
        "--input",
        s(&input),
    ]);
    assert_eq!(out.status.code(), Some(1));
    let v = stdout_json(&out);
    assert_eq!(v["failures"][0]["categories"][0], "ModifiedToken");
    assert!(String::from_utf8_lossy(&out.stderr).contains("ModifiedToken"));

    let out = tagcast(&[
        "roundtrip",
        "--family",
        "tag-only",
        "--inject",
        "substitute",
        "--input",
        s(&input),
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn eval_of_gold_targets_is_perfect() {
    let dir = TempDir::new().unwrap();
    let input = write(&dir, "c.conll", &corpus());
    for format in [
        "tagged-spans",
        "sentinel-tag+si+so",
        "extractive-tagged-spans",
        "tag-only+si",
    ] {
        let out = tagcast(&["encode", "--format", format, "--input", s(&input)]);
        assert_eq!(out.status.code(), Some(0));
        let preds: String = String::from_utf8(out.stdout)
            .unwrap()
            .lines()
            .map(|l| {
                let v: Value = serde_json::from_str(l).unwrap();
                format!(
                    "{}\n",
                    serde_json::json!({"id": v["id"], "candidates": [v["target"]]})
                )
            })
            .collect();
        let pred = write(&dir, "pred.jsonl", &preds);
        let out = tagcast(&[
            "eval",
            "--format",
            format,
            "--gold",
            s(&input),
            "--pred",
            s(&pred),
        ]);
        assert_eq!(out.status.code(), Some(0));
        let report = stdout_json(&out);
        assert_eq!(report["schema"], 1);
        assert_eq!(report["n_examples"], 4);
        assert_eq!(report["perfect"], 1.0, "{format}");
        assert_eq!(report["micro_f1"], 1.0, "{format}");
        assert_eq!(report["hallucination_rate"], 0.0, "{format}");
    }
}

#[test]
fn eval_changed_artist_name() {
    let dir = TempDir::new().unwrap();
    let gold = write(&dir, "run.conll", RUNNING);
    let pred = write(
        &dir,
        "pred.txt",
        &format!("{}\n", TS_TARGET.replace("James", "Jackson")),
    );
    let out = tagcast(&[
        "eval",
        "--family",
        "tagged-spans",
        "--gold",
        s(&gold),
        "--pred",
        s(&pred),
    ]);
    assert_eq!(out.status.code(), Some(0));
    let report = stdout_json(&out);
    assert_eq!(report["hallucination_rate"], 1.0);
    assert_eq!(report["perfect"], 1.0);
    assert!(String::from_utf8_lossy(&out.stderr).contains("hallucination_rate"));

    // with text checking the artist span no longer counts
    let out = tagcast(&[
        "eval",
        "--family",
        "tagged-spans",
        "--gold",
        s(&gold),
        "--pred",
        s(&pred),
        "--index-eval",
        "off",
    ]);
    let report = stdout_json(&out);
    assert_eq!(report["perfect"], 0.0);
    assert_eq!(report["per_tag"]["ARTIST"]["fp"], 1);
}

#[test]
fn eval_hit_at_k() {
    let dir = TempDir::new().unwrap();
    let gold = write(&dir, "run.conll", RUNNING);
    let wrong = "O O O O O O O";
    let right = "O ARTIST I-ARTIST O O PLAYLIST O";
    let line = serde_json::json!({"id": "ex0", "candidates": [wrong, wrong, right, wrong, wrong]});
    let pred = write(&dir, "pred.jsonl", &format!("{line}\n"));
    let run = |k: &str| {
        let out = tagcast(&[
            "eval",
            "--family",
            "tag-only",
            "--gold",
            s(&gold),
            "--pred",
            s(&pred),
            "--k",
            k,
        ]);
        assert_eq!(out.status.code(), Some(0));
        stdout_json(&out)
    };
    let r5 = run("5");
    assert_eq!(r5["hit_at_k"]["k"], 5);
    assert_eq!(r5["hit_at_k"]["value"], 1.0);
    assert_eq!(r5["perfect"], 0.0);
    assert_eq!(run("2")["hit_at_k"]["value"], 0.0);
}

#[test]
fn eval_id_mismatch() {
    let dir = TempDir::new().unwrap();
    let gold = write(&dir, "run.conll", RUNNING);
    let pred = write(
        &dir,
        "pred.jsonl",
        "{\"id\":\"other\",\"candidates\":[\"O\"]}\n",
    );
    let out = tagcast(&[
        "eval",
        "--family",
        "tag-only",
        "--gold",
        s(&gold),
        "--pred",
        s(&pred),
    ]);
    assert_eq!(out.status.code(), Some(3));

    let dup = write(
        &dir,
        "dup.jsonl",
        "{\"id\":\"ex0\",\"candidates\":[\"O\"]}\n{\"id\":\"ex0\",\"candidates\":[\"O\"]}\n",
    );
    let out = tagcast(&[
        "eval",
        "--family",
        "tag-only",
        "--gold",
        s(&gold),
        "--pred",
        s(&dup),
    ]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn decode_writes_one_line_per_candidate() {
    let dir = TempDir::new().unwrap();
    let gold = write(&dir, "run.conll", RUNNING);
    let line = serde_json::json!({"id": "ex0", "candidates": ["<extra_id_0> O <extra_id_5> PLAYLIST <extra_id_5> O", "x"]});
    let pred = write(&dir, "pred.jsonl", &format!("{line}\n"));
    let out = tagcast(&[
        "decode",
        "--family",
        "sentinel-tag",
        "--input",
        s(&gold),
        "--pred",
        s(&pred),
    ]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<Value> = text
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    assert_eq!(lines.len(), 2);
    assert_eq!(lines[0]["rank"], 0);
    assert_eq!(lines[0]["prediction"]["spans"][0]["tag"], "PLAYLIST");
    let cats = &lines[0]["hallucination"]["categories"];
    assert_eq!(
        *cats,
        serde_json::json!(["MissingSentinel", "DuplicateSentinel"])
    );
}

#[test]
fn stats_report() {
    let dir = TempDir::new().unwrap();
    let input = write(&dir, "run.conll", RUNNING);
    let out = tagcast(&["stats", "--input", s(&input), "--format", "tagged-spans"]);
    assert_eq!(out.status.code(), Some(0));
    let v = stdout_json(&out);
    assert_eq!(v["dataset"]["tokens_per_example"], 7.0);
    assert_eq!(v["dataset"]["spans_per_example"], 2.0);
    assert_eq!(v["formats"][0]["lengths"]["target"]["max"], 19);

    let out = tagcast(&["stats", "--input", s(&input), "--tokenizer", "bytes"]);
    let v = stdout_json(&out);
    assert_eq!(v["formats"].as_array().unwrap().len(), 13);
    assert_eq!(v["formats"][0]["lengths"]["tokenizer"], "bytes");
}

#[test]
fn output_is_deterministic_across_worker_counts() {
    let dir = TempDir::new().unwrap();
    let blocks = [
        RUNNING,
        "hello\tO\n",
        "New\tB-CITY\nYork\tI-CITY\nBoston\tB-CITY\n",
    ];
    let big: String = (0..600)
        .map(|i| format!("# id: b{i}\n{}\n", blocks[i % 3]))
        .collect();
    let input = write(&dir, "big.conll", &big);
    let run = |workers: &str, cmd: &[&str]| {
        let mut args = cmd.to_vec();
        args.extend(["--input", s(&input)]);
        let out = Command::new(env!("CARGO_BIN_EXE_tagcast"))
            .args(&args)
            .env("TAGCAST_WORKERS", workers)
            .output()
            .unwrap();
        assert_eq!(
            out.status.code(),
            Some(0),
            "{}",
            String::from_utf8_lossy(&out.stderr)
        );
        out.stdout
    };
    for cmd in [
        &["encode", "--format", "input-tag+si"][..],
        &["stats", "--formats", "all"][..],
        &["roundtrip", "--formats", "all"][..],
    ] {
        let one = run("1", cmd);
        assert_eq!(one, run("4", cmd), "{cmd:?}");
        assert_eq!(one, run("4", cmd), "{cmd:?}");
    }
}
