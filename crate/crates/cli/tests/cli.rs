use std::io::Write;
use std::net::TcpListener;
use std::path::{Path, PathBuf};
use std::process::{Command, Output, Stdio};

use serde_json::Value;

fn data(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../core/tests/data")
        .join(name)
}

fn vprog(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_vprog"))
        .args(args)
        .output()
        .unwrap()
}

fn vprog_stdin(args: &[&str], input: &str) -> Output {
    let mut child = Command::new(env!("CARGO_BIN_EXE_vprog"))
        .args(args)
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .unwrap();
    child
        .stdin
        .take()
        .unwrap()
        .write_all(input.as_bytes())
        .unwrap();
    child.wait_with_output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn bench_generate_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.jsonl");
    let b = dir.path().join("b.jsonl");
    assert_eq!(
        code(&vprog(&[
            "bench",
            "generate",
            "--seed",
            "7",
            "--out",
            p(&a)
        ])),
        0
    );
    assert_eq!(
        code(&vprog(&[
            "bench",
            "generate",
            "--seed",
            "7",
            "--out",
            p(&b)
        ])),
        0
    );
    let first = std::fs::read(&a).unwrap();
    assert_eq!(first, std::fs::read(&b).unwrap());

    let mut per_skill = std::collections::BTreeMap::new();
    for line in String::from_utf8(first).unwrap().lines() {
        let v: Value = serde_json::from_str(line).unwrap();
        *per_skill
            .entry(v["skill"].as_str().unwrap().to_string())
            .or_insert(0) += 1;
    }
    let counts: Vec<usize> = per_skill.values().copied().collect();
    assert_eq!(
        per_skill.keys().collect::<Vec<_>>(),
        ["count", "object", "scale", "spatial", "text"]
    );
    assert_eq!(counts, [1000, 400, 1000, 1000, 403]);

    let one = vprog(&["bench", "generate", "--skill", "object"]);
    assert_eq!(stdout(&one).lines().count(), 400);
}

#[test]
fn eval_run_on_golden_data() {
    let dir = tempfile::tempdir().unwrap();
    let run = |parallel: &str, out: &Path| {
        vprog(&[
            "eval",
            "run",
            "--fixture",
            p(&data("golden_fixture.json")),
            "--corpus",
            p(&data("golden_corpus.jsonl")),
            "--images",
            p(&data("golden_images.json")),
            "--parallel",
            parallel,
            "--out",
            p(out),
        ])
    };
    let serial = dir.path().join("serial.jsonl");
    let wide = dir.path().join("wide.jsonl");
    let o = run("1", &serial);
    assert_eq!(code(&o), 1, "one statement errors in the golden corpus");
    let diag: Value =
        serde_json::from_slice(o.stderr.split(|b| *b == b'\n').next().unwrap()).unwrap();
    assert_eq!(diag["code"], "findings");
    assert_eq!(code(&run("8", &wide)), 1);
    let text = std::fs::read_to_string(&serial).unwrap();
    assert_eq!(text, std::fs::read_to_string(&wide).unwrap());

    let lines: Vec<Value> = text
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    assert_eq!(lines.len(), 26);
    assert_eq!(lines[0]["id"], "g01");
    let summary = &lines[25]["summary"];
    assert_eq!(summary["count"], 25);
    assert_eq!(summary["errored_statements"], 1);
    assert!((summary["mean_score"].as_f64().unwrap() - 0.62).abs() < 1e-12);

    let tagged: String = text.lines().take(21).map(|l| format!("{l}\n")).collect();
    let tagged_path = dir.path().join("tagged.jsonl");
    std::fs::write(&tagged_path, tagged).unwrap();
    let table = vprog(&["report", "summarize", p(&tagged_path), "--format", "csv"]);
    assert_eq!(code(&table), 0);
    let csv = stdout(&table);
    assert!(
        csv == "name,object,count,spatial,scale,text,average\nall,33.3,75.0,57.1,75.0,66.7,61.4\n",
        "{csv}"
    );

    let untagged = vprog(&["report", "summarize", p(&serial)]);
    assert_eq!(code(&untagged), 2);

    let svg_dir = dir.path().join("svg");
    let render = vprog(&["report", "render", p(&serial), "--overlay-dir", p(&svg_dir)]);
    assert_eq!(code(&render), 0);
    assert!(stdout(&render).starts_with("# g01: a dog\n[1] objectEval(img, 'dog')"));
    assert_eq!(std::fs::read_dir(&svg_dir).unwrap().count(), 25);
    assert!(std::fs::read_to_string(svg_dir.join("g01.svg"))
        .unwrap()
        .starts_with("<svg"));
}

#[test]
fn usage_errors_exit_2() {
    let o = vprog(&["bench", "generate", "--bogus"]);
    assert_eq!(code(&o), 2);
    let o = vprog(&["bench", "generate", "--skill", "colour"]);
    assert_eq!(code(&o), 2);
    let o = vprog(&[
        "eval",
        "run",
        "--fixture",
        "/nonexistent.json",
        "--corpus",
        p(&data("golden_corpus.jsonl")),
        "--images",
        p(&data("golden_images.json")),
    ]);
    assert_eq!(code(&o), 2);
}

#[test]
fn unreachable_backend_exits_3() {
    let port = TcpListener::bind("127.0.0.1:0")
        .unwrap()
        .local_addr()
        .unwrap()
        .port();
    let url = format!("http://127.0.0.1:{port}");
    let o = vprog(&[
        "eval",
        "run",
        "--backend-url",
        &url,
        "--retries",
        "0",
        "--corpus",
        p(&data("golden_corpus.jsonl")),
        "--images",
        p(&data("golden_images.json")),
    ]);
    assert_eq!(code(&o), 3);
    let diag: Value = serde_json::from_slice(o.stderr.trim_ascii()).unwrap();
    assert_eq!(diag["code"], "backend-unreachable");
}

#[test]
fn program_subcommands() {
    let fmt = vprog_stdin(
        &["program", "fmt"],
        "objectEval(img,'dog') ; countEval( img , 'dog' , '==2' )",
    );
    assert_eq!(code(&fmt), 0);
    assert_eq!(
        stdout(&fmt),
        "objectEval(img, 'dog')\ncountEval(img, 'dog', '==2')\n"
    );

    let again = vprog_stdin(&["program", "fmt"], &stdout(&fmt));
    assert_eq!(stdout(&again), stdout(&fmt));

    let ast = vprog_stdin(
        &["program", "parse", "--ast-json"],
        "objectEval(img, 'dog')",
    );
    assert_eq!(code(&ast), 0);
    let v: Value = serde_json::from_str(&stdout(&ast)).unwrap();
    assert!(v.to_string().contains("objectEval"));

    let bad = vprog_stdin(&["program", "parse"], "objectEval(img, 'dog'");
    assert_eq!(code(&bad), 1);

    let invalid = vprog_stdin(&["program", "validate"], "countEval(img, 'dog', 'lots')");
    assert_eq!(code(&invalid), 1);
    assert!(stdout(&invalid).contains("bad-count-expr"));

    let ok = vprog_stdin(
        &["program", "validate"],
        "spatialEval(img, 'dog', 'cat', 'left')",
    );
    assert_eq!(code(&ok), 0);
}

#[test]
fn program_gen_offline() {
    let dir = tempfile::tempdir().unwrap();
    let fixture = dir.path().join("completions.json");
    std::fs::write(
        &fixture,
        r#"{"a dog": "objectEval(img, 'dog')\nSure, here you go!"}"#,
    )
    .unwrap();
    let o = vprog(&[
        "program",
        "gen",
        "--prompt",
        "a dog",
        "--offline-fixture",
        p(&fixture),
        "--json",
    ]);
    assert_eq!(code(&o), 0);
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["program"], "objectEval(img, 'dog')");

    let miss = vprog(&[
        "program",
        "gen",
        "--prompt",
        "a cat",
        "--offline-fixture",
        p(&fixture),
    ]);
    assert_ne!(code(&miss), 0);

    let request = vprog(&["program", "gen", "--prompt", "a cat", "--print-request"]);
    assert_eq!(code(&request), 0);
    assert!(stdout(&request).ends_with("Prompt: a cat\nProgram:\n"));
}

#[test]
fn layout_round_trip() {
    let json = r#"{"objects": [{"description": "dog", "count": 1}],
                   "placements": [{"description": "dog", "box": [0.1, 0.2, 0.5, 0.6]}]}"#;
    let enc = vprog_stdin(&["layout", "encode"], json);
    assert_eq!(code(&enc), 0);
    assert_eq!(stdout(&enc), "dog (1)\ndog (10,20,50,60)\n");

    let dec = vprog_stdin(&["layout", "decode", "--json"], &stdout(&enc));
    assert_eq!(code(&dec), 0);
    let v: Value = serde_json::from_str(&stdout(&dec)).unwrap();
    assert_eq!(v["placements"][0]["normalized"][0], 0.105);

    let bad = vprog_stdin(&["layout", "decode"], "dog (1)\ncat (10,20,50,60)\n");
    assert_ne!(code(&bad), 0);
}

#[test]
fn correlate_metrics() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("scores.csv");
    std::fs::write(&csv, "human,auto,third\n1,2,1\n2,4,2\n3,5,\n4,9,4\n").unwrap();

    let s = vprog(&[
        "correlate",
        "--metric",
        "spearman",
        "--csv",
        p(&csv),
        "--json",
    ]);
    assert_eq!(code(&s), 0);
    let v: Value = serde_json::from_str(&stdout(&s)).unwrap();
    assert_eq!(v["value"], 1.0);

    let a = vprog(&[
        "correlate",
        "--metric",
        "alpha",
        "--csv",
        p(&csv),
        "--columns",
        "human,third",
        "--json",
    ]);
    assert_eq!(code(&a), 0);
    let v: Value = serde_json::from_str(&stdout(&a)).unwrap();
    assert_eq!(v["value"], 1.0);

    let missing = vprog(&[
        "correlate",
        "--metric",
        "kappa",
        "--csv",
        p(&csv),
        "--columns",
        "human,nope",
    ]);
    assert_eq!(code(&missing), 2);
}
