use std::fs;
use std::process::{Command, Output};

fn nestune(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_nestune"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn oracle_prints_the_optimum() {
    let o = nestune(&["oracle", "single"]);
    assert!(o.status.success());
    let text = stdout(&o);
    assert!(text.starts_with("decide s "));
    assert!(text.contains("over 91 schedules"));
}

#[test]
fn unknown_pipeline_is_a_validation_error() {
    let o = nestune(&["oracle", "no-such-pipeline"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn tune_writes_row_trace_and_schedule() {
    let dir = tempfile::tempdir().unwrap();
    let row = dir.path().join("row.csv");
    let trace = dir.path().join("trace.csv");
    let sched = dir.path().join("best.schedule");
    let o = nestune(&[
        "tune",
        "pair",
        "--algo",
        "mcts_1s",
        "--iterations",
        "200",
        "--trees",
        "3",
        "--greedy-trees",
        "1",
        "--out",
        row.to_str().unwrap(),
        "--trace",
        trace.to_str().unwrap(),
        "--schedule-out",
        sched.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let row = fs::read_to_string(row).unwrap();
    assert_eq!(row.lines().count(), 2);
    assert!(row.lines().nth(1).unwrap().starts_with("pair,mcts_1s,0,run,ok,model,"));
    // two decisions, four trees each
    assert_eq!(fs::read_to_string(trace).unwrap().lines().count(), 1 + 2 * 4);

    let shown = nestune(&["show", "pair", sched.to_str().unwrap(), "--repeats", "1"]);
    assert!(shown.status.success());
    assert!(stdout(&shown).contains("model cost:"));
}

#[test]
fn show_rejects_a_partial_schedule() {
    let dir = tempfile::tempdir().unwrap();
    let sched = dir.path().join("partial.schedule");
    fs::write(&sched, "decide b tile=4x4 at=root par=0 vec=4 unroll=1\n").unwrap();
    let o = nestune(&["show", "pair", sched.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn bench_output_is_stable_without_timings() {
    let dir = tempfile::tempdir().unwrap();
    let spec = dir.path().join("exp.txt");
    fs::write(
        &spec,
        "pipeline single\npipeline pair\nalgo brute_force\nalgo greedy\nalgo mcts_1s iterations=100\n\
         seeds 1 2\ntrees 2 1\nworkers 2\ntimings off\nout report.csv\n",
    )
    .unwrap();
    let o = nestune(&["bench", "--spec", spec.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).contains("geomean"));
    let first = fs::read(dir.path().join("report.csv")).unwrap();
    let other = dir.path().join("again.csv");
    assert!(nestune(&[
        "bench",
        "--spec",
        spec.to_str().unwrap(),
        "--out",
        other.to_str().unwrap()
    ])
    .status
    .success());
    assert_eq!(first, fs::read(other).unwrap());
}

#[test]
fn bench_rejects_a_spec_without_seeds() {
    let dir = tempfile::tempdir().unwrap();
    let spec = dir.path().join("exp.txt");
    fs::write(&spec, "pipeline single\nalgo greedy\n").unwrap();
    assert_eq!(
        nestune(&["bench", "--spec", spec.to_str().unwrap()]).status.code(),
        Some(2)
    );
}

#[test]
fn unwritable_output_is_a_runtime_failure() {
    let dir = tempfile::tempdir().unwrap();
    let spec = dir.path().join("exp.txt");
    fs::write(&spec, "pipeline single\nalgo greedy\nseeds 0\n").unwrap();
    let out = dir.path().join("missing").join("r.csv");
    let o = nestune(&[
        "bench",
        "--spec",
        spec.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn fixtures_are_listed_and_printed() {
    let o = nestune(&["fixtures"]);
    assert!(stdout(&o).lines().any(|l| l == "deceptive"));
    let o = nestune(&["fixtures", "deceptive"]);
    assert!(stdout(&o).contains("cost constants"));
}
