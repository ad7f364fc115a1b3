use std::process::Command;

use ietidp::assembly::Formulation;
use ietidp::harness::{
    emit_report, parse_csv_reports, parse_json_reports, run_case, run_case_full, scaling_study, write_report, CaseConfig, ProblemKind, ReportFormat,
    SolveReport, StudyKind,
};
use ietidp::ieti::{setup_serial, solve_serial};

fn case(patches: &[usize], degree: usize, refine: u32, form: Formulation) -> CaseConfig {
    CaseConfig { dim: patches.len(), patches: patches.to_vec(), degree, refine, formulation: form, ..Default::default() }
}

fn without_timings(r: &SolveReport) -> SolveReport {
    SolveReport { assemble_time: 0.0, solve_time: 0.0, total_time: 0.0, speedup: None, ..r.clone() }
}

#[test]
fn report_fields_match_the_schema() {
    let r = run_case(&case(&[2, 2], 2, 1, Formulation::Dg)).unwrap();
    let v = serde_json::to_value(&r).unwrap();
    let mut keys: Vec<&str> = v.as_object().unwrap().keys().map(String::as_str).collect();
    keys.sort_unstable();
    let mut fields = SolveReport::FIELDS.to_vec();
    fields.sort_unstable();
    assert_eq!(keys, fields);
    assert!(r.iterations >= 1 && r.l2_error >= 0.0 && r.total_time >= 0.0);
    assert!(r.dg_error.is_some());

    let mut csv = Vec::new();
    emit_report(std::slice::from_ref(&r), ReportFormat::Csv, &mut csv).unwrap();
    let text = String::from_utf8(csv).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 2);
    assert_eq!(lines[0], SolveReport::FIELDS.join(","));
    assert_eq!(parse_csv_reports(&text).unwrap(), vec![r.clone()]);

    let mut json = Vec::new();
    emit_report(std::slice::from_ref(&r), ReportFormat::Json, &mut json).unwrap();
    assert_eq!(parse_json_reports(std::str::from_utf8(&json).unwrap()).unwrap(), vec![r.clone()]);

    assert!(emit_report(&[], ReportFormat::Json, Vec::new()).is_err());
    let dir = tempfile::tempdir().unwrap();
    assert!(write_report(std::slice::from_ref(&r), ReportFormat::Csv, &dir.path().join("missing").join("r.csv")).is_err());
    let path = dir.path().join("r.json");
    write_report(std::slice::from_ref(&r), ReportFormat::Json, &path).unwrap();
    assert_eq!(parse_json_reports(&std::fs::read_to_string(path).unwrap()).unwrap(), vec![r]);
}

#[test]
fn linear_solutions_are_reproduced() {
    for form in [Formulation::Cg, Formulation::Dg] {
        for (patches, p) in [(vec![2, 2], 1), (vec![3, 2], 2), (vec![2, 2, 2], 2)] {
            let cfg = CaseConfig { problem: ProblemKind::Linear, ..case(&patches, p, 1, form) };
            let r = run_case(&cfg).unwrap();
            assert!(r.l2_error < 1e-10, "{form} {patches:?}: {:e}", r.l2_error);
            assert!(r.h1_error < 1e-9);
            if form == Formulation::Dg {
                // the penalty energy is a quadratic form with cancellation of
                // order eps ‖u‖², so its square root bottoms out near 1e-7
                assert!(r.dg_error.unwrap() < 1e-6, "{patches:?}: {:e}", r.dg_error.unwrap());
            }
        }
    }
}

#[test]
fn l2_rate_for_quadratic_splines() {
    let errs: Vec<f64> = (1..=4)
        .map(|refine| run_case(&CaseConfig { problem: ProblemKind::Homogeneous, ..case(&[2, 2], 2, refine, Formulation::Cg) }).unwrap().l2_error)
        .collect();
    let rate = (errs[2] / errs[3]).log2();
    assert!((rate - 3.0).abs() <= 0.2, "errors {errs:?}, rate {rate}");
}

#[test]
fn identical_configs_give_identical_reports() {
    for form in [Formulation::Cg, Formulation::Dg] {
        let cfg = CaseConfig { workers: 3, holders: 2, ..case(&[3, 2], 2, 2, form) };
        let a = run_case(&cfg).unwrap();
        let b = run_case(&cfg).unwrap();
        assert_eq!(without_timings(&a), without_timings(&b));
    }
}

#[test]
fn iteration_count_equals_the_serial_solver() {
    let cfg = CaseConfig { workers: 4, holders: 2, ..case(&[4, 4], 2, 2, Formulation::Cg) };
    let run = run_case_full(&cfg).unwrap();
    let problem = cfg.manufactured().unwrap();
    let opts = cfg.ieti_options().unwrap();
    let setup = setup_serial(&run.disc, &run.geometries, &problem, &opts).unwrap();
    let serial = solve_serial(&run.disc, &setup.ops, &opts.pcg()).unwrap();
    assert_eq!(run.report.iterations, serial.report.iterations);
    // residual history decreases to the tolerance
    let res = &run.solution.report.residuals;
    assert!(res.last().unwrap() / res[0] < cfg.tol);
}

#[test]
fn dg_needs_boundedly_more_iterations_than_cg() {
    for (patches, p) in [(vec![4, 4], 2), (vec![4, 4], 3), (vec![2, 2, 2], 2)] {
        let cg = run_case(&case(&patches, p, 2, Formulation::Cg)).unwrap().iterations;
        let dg = run_case(&case(&patches, p, 2, Formulation::Dg)).unwrap().iterations;
        assert!(dg >= cg && dg <= 3 * cg, "{patches:?} p={p}: cG {cg}, dG {dg}");
    }
}

#[test]
fn scaling_studies() {
    let base = case(&[4, 2], 2, 1, Formulation::Cg);
    let strong = scaling_study(StudyKind::Strong, &base, &[1, 2, 4]).unwrap();
    assert_eq!(strong.rows.len(), 3);
    assert_eq!(strong.rows[0].speedup, Some(1.0));
    assert!(strong.rows.iter().all(|r| r.solution_hash == strong.rows[0].solution_hash));

    let holders = scaling_study(StudyKind::Holders, &CaseConfig { workers: 4, ..base.clone() }, &[1, 2, 4]).unwrap();
    // message counts depend on the holders; the numbers must not
    let numbers =
        |r: &SolveReport| SolveReport { holders: 0, messages_assemble: 0, bytes_assemble: 0, messages_solve: 0, bytes_solve: 0, ..without_timings(r) };
    for r in &holders.rows[1..] {
        assert_eq!(numbers(r), numbers(&holders.rows[0]));
    }

    let weak = scaling_study(StudyKind::Weak, &CaseConfig { patches: vec![2, 2], ..base.clone() }, &[1, 2, 4]).unwrap();
    let grids: Vec<&str> = weak.rows.iter().map(|r| r.patches.as_str()).collect();
    assert_eq!(grids, ["2x2", "4x2", "4x4"]);
    assert!(scaling_study(StudyKind::Weak, &base, &[2, 3]).is_err());
    assert!(scaling_study(StudyKind::Strong, &base, &[]).is_err());
}

fn cli(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_ietidp")).args(args).output().unwrap()
}

#[test]
fn cli_solve_with_config_file_and_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("case.toml");
    std::fs::write(&cfg, "patches = [2, 2]\ndegree = 3\nrefine = 1\nformulation = \"dg\"\n").unwrap();
    let log = dir.path().join("messages.jsonl");
    let out = cli(&["solve", "--config", cfg.to_str().unwrap(), "--degree", "2", "--workers", "2", "--format", "csv", "--message-log", log.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let rows = parse_csv_reports(std::str::from_utf8(&out.stdout).unwrap()).unwrap();
    assert_eq!(rows.len(), 1);
    assert_eq!((rows[0].degree, rows[0].formulation.as_str(), rows[0].workers, rows[0].patches.as_str()), (2, "dg", 2, "2x2"));
    let lines = std::fs::read_to_string(&log).unwrap();
    let n = lines.lines().map(|l| serde_json::from_str::<serde_json::Value>(l).unwrap()).filter(|m| m["bytes"].as_u64().is_some()).count();
    assert_eq!(n, rows[0].messages_assemble + rows[0].messages_solve);
    assert!(n > 0);
}

#[test]
fn cli_scaling_subcommands() {
    let dir = tempfile::tempdir().unwrap();
    let out_path = dir.path().join("strong.json");
    let out = cli(&["scale-strong", "--patches", "4x2", "--refine", "1", "--schedule", "1,2", "--out", out_path.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let rows = parse_json_reports(&std::fs::read_to_string(&out_path).unwrap()).unwrap();
    assert_eq!(rows.iter().map(|r| r.workers).collect::<Vec<_>>(), [1, 2]);

    let out = cli(&["scale-holders", "--patches", "2x2", "--refine", "1", "--workers", "4", "--format", "csv"]);
    assert!(out.status.success());
    let rows = parse_csv_reports(std::str::from_utf8(&out.stdout).unwrap()).unwrap();
    assert_eq!(rows.iter().map(|r| r.holders).collect::<Vec<_>>(), [1, 2, 4]);

    let out = cli(&["scale-weak", "--patches", "2x2", "--refine", "1", "--schedule", "1,2", "--format", "csv"]);
    assert!(out.status.success());
    assert_eq!(parse_csv_reports(std::str::from_utf8(&out.stdout).unwrap()).unwrap().len(), 2);
}

#[test]
fn cli_rejects_bad_input() {
    for args in [
        &["solve", "--holders", "3", "--workers", "2"][..],
        &["solve", "--patches", "4y4"],
        &["solve", "--tol", "2"],
        &["solve", "--form", "xg"],
        &["solve", "--config", "/nonexistent/case.toml"],
    ] {
        let out = cli(args);
        assert!(!out.status.success(), "{args:?}");
        assert!(!out.stderr.is_empty());
    }
}
