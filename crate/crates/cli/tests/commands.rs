use std::path::PathBuf;
use std::process::{Command, Output};

fn fixture(name: &str) -> String {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("scenarios")
        .join(name)
        .display()
        .to_string()
}

fn plantsim(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_plantsim"))
        .args(args)
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn oracle_reports_the_optimum_and_its_support() {
    let o = plantsim(&["oracle", "--scenario", &fixture("i1.scenario")]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let out = stdout(&o);
    assert!(out.contains("phi_opt = 1.000000"), "{out}");
    let reduction = out.split("two-price reduction:").nth(1).unwrap();
    assert!(reduction.contains("price 2 w.p. 1.000000"), "{out}");
}

#[test]
fn simulate_writes_the_slot_log() {
    let dir = tempfile::tempdir().unwrap();
    let csv_path = dir.path().join("run.csv");
    let o = plantsim(&[
        "simulate",
        "--scenario",
        &fixture("i1.scenario"),
        "--V",
        "10",
        "--slots",
        "200000",
        "--seed",
        "42",
        "--out",
        csv_path.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let out = stdout(&o);
    assert!(out.contains("average profit = "), "{out}");
    assert!(out.contains("guaranteed min = [2], max = [26]"), "{out}");
    assert!(out.contains("violations = 0"), "{out}");

    let mut reader = csv::Reader::from_path(&csv_path).unwrap();
    let header: Vec<String> = reader.headers().unwrap().iter().map(String::from).collect();
    assert_eq!(
        header,
        [
            "t",
            "x_id",
            "y_id",
            "Q_1",
            "A_1",
            "Z_1",
            "P_1",
            "D_1",
            "phi",
            "phi_actual",
            "avg_phi"
        ]
    );
    let rows: Vec<csv::StringRecord> = reader.records().map(Result::unwrap).collect();
    assert_eq!(rows.len(), 200_000);
    let mut low = u64::MAX;
    let mut high = 0;
    for r in &rows {
        let q: u64 = r[3].parse().unwrap();
        low = low.min(q);
        high = high.max(q);
    }
    assert!(low >= 2 && high <= 26, "{low} {high}");
    let last: f64 = rows.last().unwrap()[10].parse().unwrap();
    let reported: f64 = out
        .lines()
        .find_map(|l| l.strip_prefix("average profit = "))
        .and_then(|l| l.split_whitespace().next())
        .unwrap()
        .parse()
        .unwrap();
    assert!((last - reported).abs() < 1e-6, "{last} {reported}");
}

#[test]
fn simulate_is_reproducible() {
    let args = [
        "simulate",
        "--scenario",
        &fixture("i1.scenario"),
        "--slots",
        "5000",
        "--seed",
        "3",
    ];
    assert_eq!(stdout(&plantsim(&args)), stdout(&plantsim(&args)));
}

#[test]
fn compare_passes_the_iid_bound() {
    let o = plantsim(&[
        "compare",
        "--scenario",
        &fixture("i1.scenario"),
        "--V",
        "10",
        "--slots",
        "200000",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}{}", stdout(&o), stderr(&o));
    let out = stdout(&o);
    assert!(out.contains("bound = 0.800000"), "{out}");
    assert!(out.contains("result: PASS"), "{out}");
}

#[test]
fn compare_on_markov_states_needs_mixing_parameters() {
    let o = plantsim(&[
        "compare",
        "--scenario",
        &fixture("markov_demand.scenario"),
        "--slots",
        "1000",
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("--epsilon"));
    let o = plantsim(&[
        "compare",
        "--scenario",
        &fixture("markov_demand.scenario"),
        "--slots",
        "100000",
        "--epsilon",
        "0.05",
        "--T",
        "20",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}{}", stdout(&o), stderr(&o));
}

#[test]
fn trace_lookahead_and_compare() {
    let scenario = fixture("two_products.scenario");
    let trace = fixture("two_products.trace");
    let o = plantsim(&[
        "lookahead",
        "--scenario",
        &scenario,
        "--trace",
        &trace,
        "--T",
        "50",
        "--J",
        "4",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert_eq!(
        stdout(&o)
            .lines()
            .filter(|l| l.starts_with("frame "))
            .count(),
        4
    );

    let o = plantsim(&[
        "compare",
        "--scenario",
        &scenario,
        "--trace",
        &trace,
        "--T",
        "50",
        "--replications",
        "4",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}{}", stdout(&o), stderr(&o));
    assert!(stdout(&o).contains("40 frames of 50 slots"));
}

#[test]
fn lookahead_without_a_trace_is_a_usage_error() {
    let o = plantsim(&[
        "lookahead",
        "--scenario",
        &fixture("i1.scenario"),
        "--T",
        "5",
    ]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn unsafe_threshold_skips_the_queue_bound_check() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("tight.scenario");
    let text = std::fs::read_to_string(fixture("i1.scenario"))
        .unwrap()
        .replace("V = 10.0", "V = 10.0\ntheta = [1.0]\nunsafe_theta = true");
    std::fs::write(&path, text).unwrap();
    let o = plantsim(&[
        "simulate",
        "--scenario",
        path.to_str().unwrap(),
        "--slots",
        "2000",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}{}", stdout(&o), stderr(&o));
}

#[test]
fn exit_codes_for_bad_input() {
    let dir = tempfile::tempdir().unwrap();
    let text = std::fs::read_to_string(fixture("i1.scenario")).unwrap();

    let bad_key = dir.path().join("bad_key.scenario");
    std::fs::write(&bad_key, text.replace("c_max = 2", "c_max = 2\nfoo = 1")).unwrap();
    let o = plantsim(&["oracle", "--scenario", bad_key.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("foo"));

    let over_cap = dir.path().join("over_cap.scenario");
    std::fs::write(
        &over_cap,
        text.replace("F = [[2.0, 1.0]]", "F = [[3.0, 1.0]]"),
    )
    .unwrap();
    let o = plantsim(&["oracle", "--scenario", over_cap.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("exceeds D_max"));

    let o = plantsim(&["oracle", "--scenario", "/nonexistent.scenario"]);
    assert_eq!(o.status.code(), Some(2));

    let o = plantsim(&[
        "simulate",
        "--scenario",
        &fixture("i1.scenario"),
        "--V",
        "abc",
    ]);
    assert_eq!(o.status.code(), Some(2));

    let o = plantsim(&["simulate", "--scenario", &fixture("i1.scenario"), "--V=-1"]);
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn unused_material_warning() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("spare.scenario");
    let text = std::fs::read_to_string(fixture("i1.scenario"))
        .unwrap()
        .replace("beta = [[1]]", "beta = [[1], [0]]")
        .replace("A_max = [2]", "A_max = [2, 1]")
        .replace("unit_cost = [1]", "unit_cost = [1, 1]")
        .replace("available = [2]", "available = [2, 1]");
    std::fs::write(&path, text).unwrap();
    let o = plantsim(&["oracle", "--scenario", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stderr(&o).contains("warning: material 2"), "{}", stderr(&o));
}
