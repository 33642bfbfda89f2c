use std::process::Command as Process;

use fa_cli::runs::{run_bench, run_cost, run_equivalence, run_gradcheck};
use fa_cli::schema::{
    validate_report_csv, validate_report_json, validate_table_csv, validate_table_json,
};
use fa_cli::{execute, Command, HarnessError, OutputFormat, RunConfig, RunOutput};
use folded_attention::attention::sa_affinity_bytes;

fn fa() -> Process {
    Process::new(env!("CARGO_BIN_EXE_fa"))
}

#[test]
fn equivalence_suite_passes_on_small_shape() {
    let cfg = RunConfig::new(Command::Equivalence, [2, 3, 2, 3])
        .with_trials(20)
        .with_seed(42);
    let report = run_equivalence(&cfg).unwrap();
    assert!(report.passed(), "{}", report.summary());
    let names: Vec<_> = report.checks.iter().map(|c| c.name.as_str()).collect();
    assert_eq!(
        names,
        [
            "fa_vs_oracle",
            "sa_vs_explicit",
            "rank_one",
            "affinity_mass",
            "row_stochastic",
            "mode_order"
        ]
    );
    let fa = &report.checks[0];
    assert_eq!(fa.samples.len(), 20);
    assert!(fa.metric <= 1e-10);
}

#[test]
fn equivalence_on_single_element_is_trivial() {
    let cfg = RunConfig::new(Command::Equivalence, [1, 1, 1, 1]).with_trials(3);
    let report = run_equivalence(&cfg).unwrap();
    assert!(report.passed());
    assert!(report.checks.iter().all(|c| c.metric <= 1e-15));
}

#[test]
fn oracle_guard_refuses_large_shapes() {
    let cfg = RunConfig::new(Command::Equivalence, [50, 50, 50, 50]);
    let err = run_equivalence(&cfg).unwrap_err();
    assert!(matches!(err, HarnessError::Guard(_)));
    assert_eq!(err.exit_code(), 2);
    let cfg = RunConfig::new(Command::Gradcheck, [10, 10, 10, 2]);
    assert!(matches!(run_gradcheck(&cfg), Err(HarnessError::Guard(_))));
}

#[test]
fn gradcheck_passes_and_is_prefix_stable() {
    let one = run_gradcheck(
        &RunConfig::new(Command::Gradcheck, [2, 3, 2, 3])
            .with_trials(1)
            .with_seed(7),
    )
    .unwrap();
    let five = run_gradcheck(
        &RunConfig::new(Command::Gradcheck, [2, 3, 2, 3])
            .with_trials(5)
            .with_seed(7),
    )
    .unwrap();
    assert!(one.passed() && five.passed(), "{}", five.summary());
    assert!(one.checks[0].metric <= 1e-4);
    assert_eq!(one.checks[0].samples[0], five.checks[0].samples[0]);
    assert!(five.checks[0]
        .detail
        .as_deref()
        .unwrap()
        .starts_with("trial "));
}

#[test]
fn gradcheck_covers_reapplied_g() {
    let mut cfg = RunConfig::new(Command::Gradcheck, [2, 2, 2, 2]).with_trials(3);
    cfg.reapply_g = true;
    assert!(run_gradcheck(&cfg).unwrap().passed());
    cfg.command = Command::Equivalence;
    assert!(matches!(
        run_equivalence(&cfg),
        Err(HarnessError::Config(_))
    ));
}

#[test]
fn results_do_not_depend_on_thread_count() {
    let cfg = RunConfig::new(Command::Equivalence, [3, 4, 2, 5])
        .with_trials(8)
        .with_seed(9);
    let many = run_equivalence(&cfg).unwrap();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(1)
        .build()
        .unwrap();
    let single = pool.install(|| run_equivalence(&cfg).unwrap());
    for (a, b) in many.checks.iter().zip(&single.checks) {
        assert_eq!(a.samples, b.samples, "{}", a.name);
    }
}

#[test]
fn cost_tables_and_reference_numbers() {
    let cfg = RunConfig::new(Command::Cost, [2, 3, 2, 3]);
    let summary = run_cost(&cfg).unwrap();
    assert_eq!(summary.reference_fa_elements, 7168);
    assert_eq!(summary.reference_sa_elements, 1_073_741_824);
    assert!(summary.fa_vs_sa_percent >= 99.99);
    assert!(!summary.naive_feasible);
    // four equal-dims sizes plus the configured shape
    assert_eq!(summary.records.len(), 5 * 4);
    assert!(summary.checks().iter().all(|c| c.passed));

    let out = RunOutput::Cost(summary.clone());
    let mut csv = Vec::new();
    out.write(OutputFormat::Csv, &mut csv).unwrap();
    assert_eq!(
        validate_table_csv(std::str::from_utf8(&csv).unwrap()).unwrap(),
        summary.records
    );
    let mut json = Vec::new();
    out.write(OutputFormat::Json, &mut json).unwrap();
    assert_eq!(
        validate_table_json(std::str::from_utf8(&json).unwrap()).unwrap(),
        summary.records
    );
}

#[test]
fn bench_reports_samples_and_skips_oversized_baseline() {
    let mut cfg = RunConfig::new(Command::Bench, [4, 4, 4, 4]).with_trials(5);
    let report = run_bench(&cfg).unwrap();
    assert!(report.passed());
    assert_eq!(report.timings.len(), 2);
    for t in &report.timings {
        assert_eq!(t.samples_seconds.len(), 5);
        assert!(t.median_seconds.is_some());
    }
    let again = run_bench(&cfg).unwrap();
    assert_eq!(report.timings[0].macs, again.timings[0].macs);

    cfg.mem_budget_bytes = sa_affinity_bytes(&[4, 4, 4, 4]) as u64 - 1;
    let report = run_bench(&cfg).unwrap();
    let sa = &report.timings[1];
    assert!(sa.samples_seconds.is_empty() && sa.skipped.is_some());
    assert_eq!(report.timings[0].samples_seconds.len(), 5);

    // the benchmark shape against a 1 GiB budget
    assert!(sa_affinity_bytes(&[64, 64, 64, 8]) > 1 << 30);
}

#[test]
fn reports_round_trip_through_the_schema_check() {
    let cfg = RunConfig::new(Command::All, [2, 2, 2, 2]).with_trials(2);
    let RunOutput::Suite(report) = execute(&cfg).unwrap() else {
        panic!("all yields a suite report");
    };
    assert!(report.passed(), "{}", report.summary());
    let mut json = Vec::new();
    report.write(OutputFormat::Json, &mut json).unwrap();
    assert_eq!(
        validate_report_json(std::str::from_utf8(&json).unwrap()).unwrap(),
        report
    );
    let mut csv = Vec::new();
    report.write(OutputFormat::Csv, &mut csv).unwrap();
    assert_eq!(
        validate_report_csv(std::str::from_utf8(&csv).unwrap()).unwrap(),
        report.checks.len()
    );

    let tampered = String::from_utf8(json)
        .unwrap()
        .replace("\"pass\"", "\"fail\"");
    assert!(validate_report_json(&tampered).is_err());
}

#[test]
fn binary_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("eq.json");
    let ok = fa()
        .args([
            "equivalence",
            "--shape",
            "2,3,2,3",
            "--trials",
            "4",
            "--seed",
            "42",
            "--out",
        ])
        .arg(&out)
        .output()
        .unwrap();
    assert_eq!(ok.status.code(), Some(0));
    validate_report_json(&std::fs::read_to_string(&out).unwrap()).unwrap();

    let fail = fa()
        .args([
            "gradcheck",
            "--shape",
            "2,2,2,2",
            "--trials",
            "1",
            "--rtol",
            "1e-30",
        ])
        .output()
        .unwrap();
    assert_eq!(fail.status.code(), Some(1));
    validate_report_json(std::str::from_utf8(&fail.stdout).unwrap()).unwrap();

    for args in [
        vec!["equivalence", "--shape", "50,50,50,50"],
        vec!["equivalence", "--trials", "0"],
        vec!["equivalence", "--shape", "2,3"],
        vec!["frobnicate"],
    ] {
        let status = fa().args(&args).output().unwrap().status;
        assert_eq!(status.code(), Some(2), "{args:?}");
    }

    let refused = fa()
        .args(["equivalence", "--trials", "1"])
        .env("FA_MEM_BUDGET_BYTES", "8")
        .output()
        .unwrap();
    assert_eq!(refused.status.code(), Some(2));
}

#[test]
fn binary_writes_cost_csv() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("table.csv");
    let run = fa()
        .args(["cost", "--shape", "32,32,32,64", "--format", "csv", "--out"])
        .arg(&out)
        .output()
        .unwrap();
    assert_eq!(run.status.code(), Some(0));
    let stdout = String::from_utf8(run.stdout).unwrap();
    assert!(stdout.contains("fa 7168 vs sa 1073741824"), "{stdout}");
    // four equal-dims sizes plus the requested one
    assert_eq!(
        validate_table_csv(&std::fs::read_to_string(&out).unwrap())
            .unwrap()
            .len(),
        20
    );
}
