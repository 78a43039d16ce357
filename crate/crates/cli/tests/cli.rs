use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const TABLES: &str = r#"[
  {
    "db_id": "concert_singer",
    "table_names_original": ["singer", "concert"],
    "table_names": ["singer", "concert"],
    "column_names_original": [[-1, "*"], [0, "Singer_ID"], [0, "Name"], [0, "Citizenship"], [1, "concert_Name"], [1, "Year"]],
    "column_names": [[-1, "*"], [0, "singer id"], [0, "name"], [0, "citizenship"], [1, "concert name"], [1, "year"]],
    "column_types": ["text", "number", "text", "text", "text", "number"]
  },
  {
    "db_id": "battle_death",
    "table_names_original": ["battle", "ship"],
    "table_names": ["battle", "ship"],
    "column_names_original": [[-1, "*"], [0, "id"], [0, "name"], [0, "result"], [1, "lost_in_battle"], [1, "name"]],
    "column_names": [[-1, "*"], [0, "id"], [0, "name"], [0, "result"], [1, "lost in battle"], [1, "name"]],
    "column_types": ["number", "number", "text", "text", "number", "text"]
  }
]
"#;

const QUESTIONS: &str = r#"[
  {"question": "How many singers do we have ?", "db_id": "concert_singer", "query": "SELECT count(*) FROM singer"},
  {"question": "Show name and citizenship of each singer .", "db_id": "concert_singer", "query": "SELECT name, citizenship FROM singer"},
  {"question": "What are the results of battles ?", "db_id": "battle_death", "query": "SELECT result FROM battle"}
]
"#;

const LINKED: &str = concat!(
    r#"{"question":"How many singers do we have ?","labels":[[9,16,"singer"]],"db_id":"concert_singer"}"#,
    "\n",
    r#"{"question":"Show name and citizenship of each singer .","labels":[[5,9,"singer.Name"],[14,25,"singer.Citizenship"],[34,40,"singer"]],"db_id":"concert_singer"}"#,
    "\n",
    r#"{"question":"What are the results of battles ?","labels":[[13,20,"battle.result"],[24,31,"battle"]],"db_id":"battle_death"}"#,
    "\n",
);

fn write(dir: &Path, name: &str, content: &str) -> PathBuf {
    let path = dir.join(name);
    fs::write(&path, content).unwrap();
    path
}

fn fixtures(dir: &Path) {
    write(dir, "tables.json", TABLES);
    write(dir, "dev.json", QUESTIONS);
    write(dir, "gold.jsonl", LINKED);
}

fn run_in(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_schemalink"))
        .current_dir(dir)
        .args(args)
        .output()
        .unwrap()
}

fn stdout(output: &Output) -> String {
    String::from_utf8(output.stdout.clone()).unwrap()
}

fn stderr(output: &Output) -> String {
    String::from_utf8(output.stderr.clone()).unwrap()
}

fn assert_exit(output: &Output, code: i32) {
    assert_eq!(
        output.status.code(),
        Some(code),
        "stdout:\n{}\nstderr:\n{}",
        stdout(output),
        stderr(output)
    );
}

#[test]
fn link_writes_expected_spans_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    fixtures(dir.path());
    let out = run_in(
        dir.path(),
        &[
            "link",
            "--tables",
            "tables.json",
            "--questions",
            "dev.json",
            "--out",
            "pred.jsonl",
        ],
    );
    assert_exit(&out, 0);
    assert_eq!(stdout(&out), "linked 3 questions; emitted 6 spans\n");
    assert_eq!(
        fs::read_to_string(dir.path().join("pred.jsonl")).unwrap(),
        LINKED
    );

    let manifest: serde_json::Value = serde_json::from_str(
        &fs::read_to_string(dir.path().join("pred.jsonl.manifest.json")).unwrap(),
    )
    .unwrap();
    assert_eq!(manifest["command"], "link");
    assert_eq!(manifest["config"], "full");
    assert_eq!(manifest["strategy"], "multi");
    assert_eq!(manifest["seed"], 0);
    let digest = manifest["inputs"]["tables"]["sha256"].as_str().unwrap();
    assert_eq!(digest.len(), 64);
    assert!(digest.chars().all(|c| c.is_ascii_hexdigit()));
}

#[test]
fn link_runs_are_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    fixtures(dir.path());
    for args in [
        vec!["link", "--tables", "tables.json", "--questions", "dev.json"],
        vec![
            "link",
            "--tables",
            "tables.json",
            "--questions",
            "dev.json",
            "--config",
            "g",
            "--seed",
            "7",
        ],
    ] {
        let mut first = args.clone();
        first.extend(["--out", "one.jsonl"]);
        let mut second = args.clone();
        second.extend(["--out", "two.jsonl"]);
        assert_exit(&run_in(dir.path(), &first), 0);
        assert_exit(&run_in(dir.path(), &second), 0);
        let one = fs::read(dir.path().join("one.jsonl")).unwrap();
        let two = fs::read(dir.path().join("two.jsonl")).unwrap();
        assert_eq!(one, two, "outputs differ for {args:?}");
    }
}

#[test]
fn link_preset_h_emits_no_spans() {
    let dir = tempfile::tempdir().unwrap();
    fixtures(dir.path());
    let out = run_in(
        dir.path(),
        &[
            "link",
            "--tables",
            "tables.json",
            "--questions",
            "dev.json",
            "--config",
            "h",
            "--out",
            "empty.jsonl",
        ],
    );
    assert_exit(&out, 0);
    assert_eq!(stdout(&out), "linked 3 questions; emitted 0 spans\n");
    for line in fs::read_to_string(dir.path().join("empty.jsonl"))
        .unwrap()
        .lines()
    {
        let record: serde_json::Value = serde_json::from_str(line).unwrap();
        assert_eq!(record["labels"], serde_json::json!([]));
    }
}

#[test]
fn link_rejects_bad_flags_as_usage_errors() {
    let dir = tempfile::tempdir().unwrap();
    fixtures(dir.path());
    let out = run_in(
        dir.path(),
        &[
            "link",
            "--tables",
            "tables.json",
            "--questions",
            "dev.json",
            "--config",
            "zz",
            "--out",
            "x.jsonl",
        ],
    );
    assert_exit(&out, 1);
    let message = stderr(&out);
    for alias in ["full", "a", "b", "c", "d", "e", "f", "g", "h"] {
        assert!(
            message.contains(alias),
            "missing alias {alias} in {message}"
        );
    }
    assert!(!dir.path().join("x.jsonl").exists());

    let out = run_in(
        dir.path(),
        &[
            "link",
            "--tables",
            "tables.json",
            "--questions",
            "dev.json",
            "--config",
            "g",
            "--prob",
            "1.5",
            "--out",
            "x.jsonl",
        ],
    );
    assert_exit(&out, 1);
    assert!(stderr(&out).contains("outside [0, 1]"));
}

#[test]
fn eval_of_gold_against_itself_is_perfect() {
    let dir = tempfile::tempdir().unwrap();
    fixtures(dir.path());
    let out = run_in(
        dir.path(),
        &["eval", "gold.jsonl", "gold.jsonl", "--em", "58.8"],
    );
    assert_exit(&out, 0);
    let text = stdout(&out);
    assert!(text.contains("EM"), "missing EM column:\n{text}");
    assert!(text.contains("58.8"));
    assert!(text.contains("100.0"));

    let out = run_in(dir.path(), &["eval", "gold.jsonl", "gold.jsonl"]);
    assert!(
        !stdout(&out).contains("EM"),
        "EM column without --em:\n{}",
        stdout(&out)
    );

    let out = run_in(
        dir.path(),
        &[
            "eval",
            "gold.jsonl",
            "gold.jsonl",
            "--format",
            "csv",
            "--system",
            "rules",
            "--em",
            "58.8",
            "--out",
            "results.csv",
        ],
    );
    assert_exit(&out, 0);
    let expected = "system,em,f1,precision,recall,fp,fn,tp\nrules,58.8,100.0,100.0,100.0,0,0,6\n";
    assert_eq!(stdout(&out), expected);
    assert_eq!(
        fs::read_to_string(dir.path().join("results.csv")).unwrap(),
        expected
    );
    assert!(dir.path().join("results.csv.manifest.json").exists());
}

#[test]
fn eval_refuses_misaligned_files() {
    let dir = tempfile::tempdir().unwrap();
    fixtures(dir.path());
    write(
        dir.path(),
        "other.jsonl",
        r#"{"question":"Something else entirely ?","labels":[]}"#,
    );
    let out = run_in(dir.path(), &["eval", "gold.jsonl", "other.jsonl"]);
    assert_exit(&out, 2);
    assert!(stderr(&out).contains("holds 3 examples but gold holds 1"));

    let three = format!(
        "{}\n{}\n{}\n",
        r#"{"question":"Something else entirely ?","labels":[]}"#,
        r#"{"question":"Show name and citizenship of each singer .","labels":[]}"#,
        r#"{"question":"Also wrong ?","labels":[]}"#
    );
    write(dir.path(), "three.jsonl", &three);
    let out = run_in(dir.path(), &["eval", "gold.jsonl", "three.jsonl"]);
    assert_exit(&out, 2);
    let message = stderr(&out);
    assert!(message.contains("diverges on 2 of 3 examples"), "{message}");
    assert!(message.contains("Something else entirely ?"));
}

#[test]
fn agree_self_is_perfect_and_disjoint_shares_nothing() {
    let dir = tempfile::tempdir().unwrap();
    fixtures(dir.path());
    let out = run_in(dir.path(), &["agree", "gold.jsonl", "gold.jsonl"]);
    assert_exit(&out, 0);
    let text = stdout(&out);
    assert!(text.contains("kappa:              1.000"), "{text}");
    assert!(text.contains("pairwise F1: 100.0"), "{text}");

    let disjoint = concat!(
        r#"{"question":"How many singers do we have ?","labels":[[0,3,"concert"]],"db_id":"concert_singer"}"#,
        "\n",
        r#"{"question":"Show name and citizenship of each singer .","labels":[],"db_id":"concert_singer"}"#,
        "\n",
        r#"{"question":"What are the results of battles ?","labels":[],"db_id":"battle_death"}"#,
        "\n",
    );
    write(dir.path(), "other.jsonl", disjoint);
    let out = run_in(dir.path(), &["agree", "gold.jsonl", "other.jsonl"]);
    assert_exit(&out, 0);
    assert!(
        stdout(&out).contains("pairwise F1: 0.0"),
        "{}",
        stdout(&out)
    );

    let out = run_in(
        dir.path(),
        &[
            "agree",
            "gold.jsonl",
            "gold.jsonl",
            "--granularity",
            "kind",
            "--format",
            "csv",
        ],
    );
    assert_exit(&out, 0);
    let csv = stdout(&out);
    assert!(csv.starts_with("granularity,kappa,"), "{csv}");
    assert!(csv.lines().nth(1).unwrap().starts_with("kind,1,"), "{csv}");
}

#[test]
fn stats_counts_labels_by_stratum() {
    let dir = tempfile::tempdir().unwrap();
    fixtures(dir.path());
    let out = run_in(dir.path(), &["stats", "gold.jsonl"]);
    assert_exit(&out, 0);
    let text = stdout(&out);
    assert!(text.contains("#LABEL"), "{text}");
    assert!(text.contains("sentences: 3"), "{text}");

    let out = run_in(dir.path(), &["stats", "gold.jsonl", "--format", "csv"]);
    assert_exit(&out, 0);
    let csv = stdout(&out);
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines.len(), 10, "{csv}");
    assert_eq!(lines[0], "stratum,labels,max,min,avg,std");
    assert!(lines[1].starts_with("Total,6,3,1,2,"), "{csv}");
    assert!(lines[2].starts_with("Table,3,1,1,1,"), "{csv}");
    assert!(lines[3].starts_with("Column,3,2,0,1,"), "{csv}");
}

#[test]
fn strategy_single_keeps_one_target_per_window() {
    let dir = tempfile::tempdir().unwrap();
    fixtures(dir.path());
    write(
        dir.path(),
        "ships.json",
        r#"[{"question": "What are the names of ships ?", "db_id": "battle_death", "query": ""}]"#,
    );
    let labels = |path: &Path| {
        let line = fs::read_to_string(path).unwrap();
        serde_json::from_str::<serde_json::Value>(line.lines().next().unwrap()).unwrap()["labels"]
            .clone()
    };

    let out = run_in(
        dir.path(),
        &[
            "link",
            "--tables",
            "tables.json",
            "--questions",
            "ships.json",
            "--out",
            "multi.jsonl",
        ],
    );
    assert_exit(&out, 0);
    assert_eq!(
        labels(&dir.path().join("multi.jsonl")),
        serde_json::json!([
            [13, 18, "battle.name"],
            [13, 18, "ship.name"],
            [22, 27, "ship"]
        ])
    );

    let out = run_in(
        dir.path(),
        &[
            "link",
            "--tables",
            "tables.json",
            "--questions",
            "ships.json",
            "--strategy",
            "single",
            "--out",
            "single.jsonl",
        ],
    );
    assert_exit(&out, 0);
    assert_eq!(
        labels(&dir.path().join("single.jsonl")),
        serde_json::json!([[13, 18, "battle.name"], [22, 27, "ship"]])
    );
}

#[test]
fn corr_recovers_published_relationships() {
    let dir = tempfile::tempdir().unwrap();
    let rows = "system,em,f1,precision,recall,fp,fn,tp\n\
        base,69.2,58.1,46.0,78.8,1345,308,1146\n\
        base-f,62.3,67.3,76.3,60.2,272,578,876\n\
        base-b,42.9,17.5,34.4,11.7,324,1284,170\n\
        base-g,58.8,22.0,33.1,16.5,486,1214,240\n\
        base-h,58.2,0,0,0,0,1454,0\n\
        base-anno,69.6,100,100,100,0,0,1454\n\
        base-mix,69.1,79.2,71.9,88.3,503,170,1284\n";
    write(dir.path(), "results.csv", rows);

    let out = run_in(dir.path(), &["corr", "results.csv", "f1", "em"]);
    assert_exit(&out, 0);
    assert_eq!(
        stdout(&out),
        "Pearson r(f1, em) = 0.737  (n = 7, two-sided p = 0.0587)\n"
    );

    let out = run_in(dir.path(), &["corr", "results.csv", "tp", "em"]);
    assert_exit(&out, 0);
    assert_eq!(
        stdout(&out),
        "Pearson r(tp, em) = 0.810  (n = 7, two-sided p = 0.0271)\n"
    );

    let out = run_in(dir.path(), &["corr", "results.csv", "em", "em"]);
    assert_exit(&out, 0);
    assert!(
        stdout(&out).starts_with("Pearson r(em, em) = 1.000"),
        "{}",
        stdout(&out)
    );

    let out = run_in(dir.path(), &["corr", "results.csv", "f1", "bogus"]);
    assert_exit(&out, 1);
    assert!(stderr(&out).contains("unknown column"));
    assert!(stderr(&out).contains("precision"));

    let out = run_in(
        dir.path(),
        &["corr", "results.csv", "f1", "em", "--format", "csv"],
    );
    assert_exit(&out, 0);
    let csv = stdout(&out);
    assert_eq!(csv.lines().next().unwrap(), "x,y,r,p,n");
    assert!(
        csv.lines()
            .nth(1)
            .unwrap()
            .starts_with("f1,em,0.737238115920845"),
        "{csv}"
    );
}

#[test]
fn split_keeps_databases_disjoint() {
    let dir = tempfile::tempdir().unwrap();
    fixtures(dir.path());
    let out = run_in(
        dir.path(),
        &[
            "split",
            "gold.jsonl",
            "--tables",
            "tables.json",
            "--seed",
            "0",
            "--out-dev",
            "dev_half.jsonl",
            "--out-test",
            "test_half.jsonl",
        ],
    );
    assert_exit(&out, 0);
    assert_eq!(
        stdout(&out),
        "dev: 1 examples across 1 databases; test: 2 examples across 1 databases; imbalance: 1\n"
    );
    let dev = fs::read_to_string(dir.path().join("dev_half.jsonl")).unwrap();
    let test = fs::read_to_string(dir.path().join("test_half.jsonl")).unwrap();
    let db_of = |line: &str| {
        serde_json::from_str::<serde_json::Value>(line).unwrap()["db_id"]
            .as_str()
            .unwrap()
            .to_string()
    };
    let dev_dbs: std::collections::BTreeSet<String> = dev.lines().map(|l| db_of(l)).collect();
    let test_dbs: std::collections::BTreeSet<String> = test.lines().map(|l| db_of(l)).collect();
    assert!(dev_dbs.is_disjoint(&test_dbs));
    assert_eq!(dev.lines().count() + test.lines().count(), 3);
    assert!(dir.path().join("dev_half.jsonl.manifest.json").exists());
    assert!(dir.path().join("test_half.jsonl.manifest.json").exists());
}

#[test]
fn lint_reports_problems_and_sets_the_exit_code() {
    let dir = tempfile::tempdir().unwrap();
    fixtures(dir.path());
    let out = run_in(
        dir.path(),
        &[
            "lint",
            "gold.jsonl",
            "--tables",
            "tables.json",
            "--questions",
            "dev.json",
        ],
    );
    assert_exit(&out, 0);
    assert_eq!(stdout(&out), "0 error(s), 0 warning(s)\n");

    let dirty = concat!(
        r#"{"question":"How many singers do we have ?","labels":[[9,16,"singerz"]],"db_id":"concert_singer"}"#,
        "\n",
        r#"{"question":"Show name and citizenship of each singer .","labels":[[5,9,"singer.Name"],[5,12,"singer.Citizenship"]],"db_id":"concert_singer"}"#,
        "\n",
    );
    write(dir.path(), "dirty.jsonl", dirty);
    let out = run_in(
        dir.path(),
        &["lint", "dirty.jsonl", "--tables", "tables.json"],
    );
    assert_exit(&out, 3);
    let text = stdout(&out);
    assert!(text.contains(r#"unknown table "singerz""#), "{text}");
    assert!(text.contains("overlap"), "{text}");
    assert!(text.contains("2 error(s)"), "{text}");

    let sloppy = concat!(
        r#"{"question":"How many singers do we have ?","labels":[[9,16,"Singer"]],"db_id":"concert_singer"}"#,
        "\n",
    );
    write(dir.path(), "sloppy.jsonl", sloppy);
    let out = run_in(
        dir.path(),
        &["lint", "sloppy.jsonl", "--tables", "tables.json"],
    );
    assert_exit(&out, 0);
    let text = stdout(&out);
    assert!(
        text.contains("does not match the schema spelling"),
        "{text}"
    );
    assert!(text.contains("0 error(s), 1 warning(s)"), "{text}");
}

#[test]
fn missing_inputs_are_data_errors() {
    let dir = tempfile::tempdir().unwrap();
    fixtures(dir.path());
    let out = run_in(dir.path(), &["eval", "gold.jsonl", "missing.jsonl"]);
    assert_exit(&out, 2);
    assert!(stderr(&out).contains("missing.jsonl"));
}

#[test]
fn relative_inputs_fall_back_to_the_data_dir() {
    let data = tempfile::tempdir().unwrap();
    fixtures(data.path());
    let work = tempfile::tempdir().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_schemalink"))
        .current_dir(work.path())
        .env("SCHEMALINK_DATA", data.path())
        .args([
            "link",
            "--tables",
            "tables.json",
            "--questions",
            "dev.json",
            "--out",
            "pred.jsonl",
        ])
        .output()
        .unwrap();
    assert_exit(&out, 0);
    assert_eq!(
        fs::read_to_string(work.path().join("pred.jsonl")).unwrap(),
        LINKED
    );
}
