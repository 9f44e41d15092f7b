use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use qlandscape::io::{self, Trajectory};
use qlandscape_core::{
    export_manifolds, propagate_evolution_matrix, propagate_state, BlochState, ControlVector,
    ManifoldBundle, RunRecord, SurveySummary, SystemParams, Termination, TimeGrid,
};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_qlandscape"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p
}

#[test]
fn simulate_ground_state_without_control_stays_put() {
    let tmp = tempfile::tempdir().unwrap();
    let controls = write(tmp.path(), "c.csv", &format!("u,n\n{}", "0,0\n".repeat(10)));
    let out = tmp.path().join("out");
    let o = run(&[
        "simulate",
        "--controls",
        path(&controls),
        "--out",
        path(&out),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let (times, states) = io::read_trajectory_csv(&out.join("trajectory.csv")).unwrap();
    assert_eq!(times.len(), 11);
    assert!(states.iter().all(|s| *s == BlochState::ground()));
}

#[test]
fn simulate_output_round_trips() {
    let tmp = tempfile::tempdir().unwrap();
    let rows: String = (0..10)
        .map(|k| format!("{},{}\n", 0.3 - 0.07 * k as f64, 0.1 * k as f64))
        .collect();
    let controls = write(tmp.path(), "c.csv", &format!("u,n\n{rows}"));
    let out = tmp.path().join("out");
    let o = run(&[
        "simulate",
        "--controls",
        path(&controls),
        "--r0",
        "0.6,0,0.8",
        "--out",
        path(&out),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));

    let cv = io::read_controls_csv(&controls).unwrap();
    let expected = propagate_state(
        &SystemParams::default(),
        &TimeGrid::default(),
        &cv,
        &BlochState::new(0.6, 0.0, 0.8),
    )
    .unwrap();
    let json: Trajectory = io::read_json(&out.join("trajectory.json")).unwrap();
    assert_eq!(json.states, expected);
    let psi =
        propagate_evolution_matrix(&SystemParams::default(), &TimeGrid::default(), &cv).unwrap();
    assert_eq!(json.psi, psi);
    let (_, csv_states) = io::read_trajectory_csv(&out.join("trajectory.csv")).unwrap();
    assert_eq!(csv_states, expected);
}

#[test]
fn simulate_rejects_wrong_interval_count_and_bad_files() {
    let tmp = tempfile::tempdir().unwrap();
    let short = write(tmp.path(), "short.csv", "u,n\n0,0\n0,0\n");
    let o = run(&[
        "simulate",
        "--controls",
        path(&short),
        "--out",
        path(tmp.path()),
    ]);
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stderr).contains("intervals"));

    let bad = write(tmp.path(), "bad.csv", "u,n\n0,zero\n");
    assert_eq!(code(&run(&["simulate", "--controls", path(&bad)])), 1);
    let negative = write(
        tmp.path(),
        "neg.csv",
        &format!("u,n\n{}", "0,-1\n".repeat(10)),
    );
    assert_eq!(code(&run(&["simulate", "--controls", path(&negative)])), 1);
    assert_eq!(
        code(&run(&["simulate", "--controls", "/nonexistent.csv"])),
        1
    );
    let zeros = write(tmp.path(), "z.csv", &format!("u,n\n{}", "0,0\n".repeat(10)));
    assert_eq!(
        code(&run(&[
            "simulate",
            "--controls",
            path(&zeros),
            "--r0",
            "1,0"
        ])),
        1
    );
}

#[test]
fn usage_and_config_errors_exit_with_one() {
    let tmp = tempfile::tempdir().unwrap();
    assert_eq!(code(&run(&["frobnicate"])), 1);
    assert_eq!(code(&run(&["survey", "--objective", "set7"])), 1);
    let cfg = write(tmp.path(), "cfg.json", r#"{"survey": {"runs": 5}}"#);
    assert_eq!(code(&run(&["--config", path(&cfg), "survey"])), 1);
    let cfg = write(tmp.path(), "cfg2.json", r#"{"schema_version": 9}"#);
    assert_eq!(code(&run(&["--config", path(&cfg), "survey"])), 1);
    let o = run(&[
        "optimize",
        "--objective",
        "frobenius",
        "--out",
        path(tmp.path()),
    ]);
    assert_eq!(code(&o), 1);
    assert_eq!(code(&run(&["--help"])), 0);
}

#[test]
fn optimize_is_deterministic_per_seed() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    for d in [&a, &b] {
        let o = run(&[
            "optimize",
            "--gate",
            "T",
            "--objective",
            "set4",
            "--seed",
            "42",
            "--out",
            path(d),
        ]);
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    }
    for f in ["run_record.json", "final_controls.csv"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap());
    }
    let r: RunRecord = io::read_json(&a.join("run_record.json")).unwrap();
    assert_eq!(r.seed, 42);
    assert!(r.termination.is_normal());
}

#[test]
fn default_optimize_lands_near_the_h_gate_optimum() {
    let tmp = tempfile::tempdir().unwrap();
    let o = run(&["optimize", "--seed", "1", "--out", path(tmp.path())]);
    assert_eq!(code(&o), 0);
    let r: RunRecord = io::read_json(&tmp.path().join("run_record.json")).unwrap();
    // Single-peak H/SET3 distribution: center 3.484e-4, width 1.276e-5.
    assert!(
        (r.objective / 3.484e-4 - 1.0).abs() < 0.15,
        "{}",
        r.objective
    );
}

#[test]
fn restarting_from_a_converged_optimum_takes_no_steps() {
    // Without decoherence the H gate is reachable, so a run converges below
    // eps and a restart from its final controls stops immediately.
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(
        tmp.path(),
        "cfg.json",
        r#"{"system": {"omega": 1.0, "mu": 0.1, "gamma": 0.0}, "optimizer": {"max_iters": 100000}}"#,
    );
    let first = tmp.path().join("first");
    let o = run(&[
        "--config",
        path(&cfg),
        "optimize",
        "--seed",
        "3",
        "--out",
        path(&first),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let r1: RunRecord = io::read_json(&first.join("run_record.json")).unwrap();
    assert_eq!(r1.termination, Termination::Converged);

    for init in ["run_record.json", "final_controls.csv"] {
        let second = tmp.path().join(format!("second-{init}"));
        let o = run(&[
            "--config",
            path(&cfg),
            "optimize",
            "--init",
            path(&first.join(init)),
            "--out",
            path(&second),
        ]);
        assert_eq!(code(&o), 0);
        let r2: RunRecord = io::read_json(&second.join("run_record.json")).unwrap();
        assert_eq!(r2.iterations, 0);
        assert_eq!(r2.termination, Termination::Converged);
    }
}

#[test]
fn optimize_reports_max_iters_with_exit_three() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "cfg.json", r#"{"optimizer": {"max_iters": 2}}"#);
    let o = run(&[
        "--config",
        path(&cfg),
        "optimize",
        "--out",
        path(tmp.path()),
    ]);
    assert_eq!(code(&o), 3);
}

fn smoke_config(dir: &Path, parallelism: usize) -> PathBuf {
    write(
        dir,
        &format!("smoke{parallelism}.json"),
        &format!(
            r#"{{"gate": "T", "objective": "set3-grk",
                "survey": {{"L": 10, "master_seed": 5, "parallelism": {parallelism}}}}}"#
        ),
    )
}

#[test]
fn smoke_survey_emits_every_file_and_round_trips() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let cfg = smoke_config(tmp.path(), 1);
    let o = run(&[
        "--config",
        path(&cfg),
        "survey",
        "--svg",
        "--out",
        path(&out),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    for f in [
        "summary.json",
        "manifolds.json",
        "manifolds.csv",
        "histogram_objective.csv",
        "histogram_frobenius.csv",
        "histogram_objective.svg",
        "histogram_frobenius.svg",
        "controls_u.svg",
        "controls_n.svg",
    ] {
        assert!(out.join(f).is_file(), "missing {f}");
    }

    let summary: SurveySummary = io::read_json(&out.join("summary.json")).unwrap();
    assert_eq!(summary.records.len(), 10);
    let bundles = export_manifolds(&summary);
    let json: Vec<ManifoldBundle> = io::read_json(&out.join("manifolds.json")).unwrap();
    assert_eq!(json, bundles);
    assert_eq!(
        io::read_manifold_csv(&out.join("manifolds.csv")).unwrap(),
        bundles
    );
    assert_eq!(
        io::read_histogram_csv(&out.join("histogram_objective.csv")).unwrap(),
        summary.objective_histogram
    );
    assert_eq!(
        io::read_histogram_csv(&out.join("histogram_frobenius.csv")).unwrap(),
        summary.frobenius_histogram
    );
    for (b, p) in bundles.iter().zip(&summary.objective_peaks) {
        assert_eq!(b.len(), p.count);
    }
    // Stored Frobenius values are reproducible from the stored controls.
    for r in &summary.records {
        let again = qlandscape_core::objective_frobenius(
            &SystemParams::default(),
            &TimeGrid::default(),
            &ControlVector::new(r.u.clone(), r.w.clone()).unwrap(),
            &qlandscape_core::Gate::t(),
        )
        .unwrap();
        assert!((again - r.frobenius).abs() <= 1e-12);
    }
}

#[test]
fn survey_json_is_identical_across_runs_and_thread_counts() {
    let tmp = tempfile::tempdir().unwrap();
    let mut outputs = Vec::new();
    for (i, p) in [1, 1, 4].into_iter().enumerate() {
        let out = tmp.path().join(format!("o{i}"));
        let cfg = smoke_config(tmp.path(), p);
        assert_eq!(
            code(&run(&[
                "--config",
                path(&cfg),
                "survey",
                "--out",
                path(&out)
            ])),
            0
        );
        outputs.push(out);
    }
    for f in ["summary.json", "manifolds.json", "manifolds.csv"] {
        let first = fs::read(outputs[0].join(f)).unwrap();
        for o in &outputs[1..] {
            assert_eq!(fs::read(o.join(f)).unwrap(), first, "{f}");
        }
    }
}

#[test]
fn report_prints_dashes_for_single_peak_and_fails_on_empty() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("h");
    let o = run(&[
        "survey",
        "--gate",
        "H",
        "--objective",
        "set4",
        "--runs",
        "8",
        "--out",
        path(&out),
    ]);
    assert_eq!(code(&o), 0);
    let o = run(&[
        "report",
        path(&out.join("summary.json")),
        "--out",
        path(&out),
    ]);
    assert_eq!(code(&o), 0);
    let text = String::from_utf8(o.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 3);
    assert!(lines[1].starts_with("F_{H,4}") && lines[1].trim_end().ends_with('-'));
    assert!(lines[2].starts_with("F_{H}"));
    let csv = fs::read_to_string(out.join("table.csv")).unwrap();
    assert!(csv.lines().nth(1).unwrap().ends_with(",-,-"));

    // Every run hits the cap: exit 3, and the summary has nothing to report.
    let capped = tmp.path().join("capped");
    let cfg = write(
        tmp.path(),
        "cap.json",
        r#"{"optimizer": {"max_iters": 1}, "survey": {"L": 3}}"#,
    );
    assert_eq!(
        code(&run(&[
            "--config",
            path(&cfg),
            "survey",
            "--out",
            path(&capped)
        ])),
        3
    );
    assert_eq!(
        code(&run(&["report", path(&capped.join("summary.json"))])),
        1
    );
    assert_eq!(code(&run(&["report"])), 1);
}

#[test]
fn cross_objective_output() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("x");
    let o = run(&[
        "survey",
        "--gate",
        "T",
        "--objective",
        "set4",
        "--runs",
        "6",
        "--cross-to",
        "set2",
        "--out",
        path(&out),
    ]);
    assert_eq!(code(&o), 0);
    let r: qlandscape_core::CrossObjectiveReport =
        io::read_json(&out.join("cross_objective.json")).unwrap();
    assert_eq!(r.to.label(), "F_{T,2}");
    assert_eq!(r.substituted.len(), 6);
}
