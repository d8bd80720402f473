//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on failure.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use blacksol_cli::commands::{coercivity, spectrum, stability, verify, Check};
use blacksol_cli::config::{ExperimentConfig, Tolerances};
use blacksol_cli::output::MANIFEST;

/// Acceptance tolerances, pinned here independently of the config defaults.
fn pinned_tolerances() -> Tolerances {
    Tolerances {
        profile_residual: 1e-13,
        conserved_rel: 1e-9,
        criticality: 1e-6,
        factorization_rel: 1e-8,
        qform_floor: -1e-9,
        kplus_lowest: 5e-5,
        kplus_correlation: 0.9999,
        kminus_lowest_min: -5e-4,
        kminus_lowest_max: 5e-3,
        k1: 1e-6,
        estimate_resolution_rel: 0.05,
        expansion_abs: 1e-9,
        slope: 0.2,
        b_density_rel: 1e-10,
        symmetry_recovery: 1e-8,
        jacobian: 1e-6,
        rate_rel: 0.02,
        stationary_drift: 1e-6,
        conserved_drift_rel: 1e-6,
        reversal: 1e-6,
        dark_speed_rel: 0.02,
        stability_factor: 10.0,
        ladder_growth: 1.5,
        collapse_share: 0.1,
    }
}

fn base_config(out: &Path) -> ExperimentConfig {
    let mut c = ExperimentConfig {
        output_dir: out.to_path_buf(),
        tolerances: pinned_tolerances(),
        ..Default::default()
    };
    c.grid.half_width = 40.0;
    c.grid.points = 4001;
    c.radius = 10.0;
    c.verify.samples = 100;
    c.verify.directions = 20;
    c.verify.fd_step = 1e-4;
    c.coercivity.samples = 200;
    c.coercivity.min_distance = 1e-3;
    c.coercivity.max_distance = 1e-1;
    c.stability.deltas = vec![0.02, 0.01, 0.005];
    c.stability.t_final = 50.0;
    c.sim.t_final = 20.0;
    c
}

struct Verdict {
    passed: bool,
    detail: String,
}

impl Verdict {
    fn from_checks(checks: &[&Check], expected: &[&str]) -> Self {
        let mut missing: Vec<&str> = expected
            .iter()
            .copied()
            .filter(|n| !checks.iter().any(|c| c.name == *n))
            .collect();
        let failed: Vec<String> = checks
            .iter()
            .filter(|c| !c.passed)
            .map(|c| format!("{}={:.3e}", c.name, c.value))
            .collect();
        let passed = failed.is_empty() && missing.is_empty() && !checks.is_empty();
        let detail = if passed {
            checks
                .iter()
                .map(|c| format!("{}={:.3e}", c.name, c.value))
                .collect::<Vec<_>>()
                .join(" ")
        } else {
            missing.iter_mut().for_each(|m| *m = m.trim());
            format!("failed [{}] missing [{}]", failed.join(" "), missing.join(" "))
        };
        Verdict { passed, detail }
    }

    fn error(e: impl std::fmt::Display) -> Self {
        Verdict {
            passed: false,
            detail: format!("error: {e}"),
        }
    }
}

fn group_verdict(report: &Result<verify::VerifyReport, String>, group: &str, expected: &[&str]) -> Verdict {
    match report {
        Ok(r) => Verdict::from_checks(&r.group(group), expected),
        Err(e) => Verdict::error(e),
    }
}

fn criterion_5(report: &Result<verify::VerifyReport, String>, root: &Path) -> Verdict {
    let mut v = group_verdict(
        report,
        "nonnegativity",
        &[
            "kplus_qform_min",
            "kminus_qform_min",
            "kplus_lowest_eigenvalue",
            "kplus_translation_correlation",
            "kminus_lowest_eigenvalue",
        ],
    );
    match spectrum::run(&base_config(&root.join("spectrum"))) {
        Ok(s) => {
            let checks: Vec<&Check> = s.checks.iter().collect();
            let sv = Verdict::from_checks(
                &checks,
                &[
                    "kplus_lowest_eigenvalue_L40",
                    "kplus_translation_correlation_L40",
                    "kminus_lowest_eigenvalue_L40",
                ],
            );
            v.passed &= sv.passed;
            v.detail = format!("{} | spectrum command: {}", v.detail, sv.detail);
        }
        Err(e) => return Verdict::error(e),
    }
    v
}

fn criterion_8(root: &Path) -> Verdict {
    let mut config = base_config(&root.join("coercivity"));
    config.coercivity.orthogonality = false;
    let summary = match coercivity::run(&config) {
        Ok(s) => s,
        Err(e) => return Verdict::error(e),
    };
    let checks: Vec<&Check> = summary.checks.iter().collect();
    let mut v = Verdict::from_checks(&checks, &["min_ratio", "control_collapse"]);
    let (lo, hi) = (1e-3 * (1.0 - 1e-9), 1e-1 * (1.0 + 1e-9));
    let in_range = summary.samples.iter().all(|s| s.probe.dr >= lo && s.probe.dr <= hi);
    let all_positive = summary.samples.iter().all(|s| s.probe.ratio.is_some_and(|r| r > 0.0));
    let count = summary.samples.len() == 200;
    v.passed &= in_range && all_positive && count;
    v.detail = format!(
        "{} [c, C] = [{:.4e}, {:.4e}] samples={} dR_in_range={in_range}",
        v.detail,
        summary.enforced.c,
        summary.enforced.big_c,
        summary.samples.len()
    );
    v
}

fn criterion_11(root: &Path) -> Verdict {
    let summary = match stability::run(&base_config(&root.join("stability"))) {
        Ok(s) => s,
        Err(e) => return Verdict::error(e),
    };
    let Some(run) = summary.runs.iter().find(|r| r.delta == 0.01) else {
        return Verdict::error("no delta = 0.01 run");
    };
    let every_stamp = run.distances.iter().all(|d| d.modulated <= 10.0 * 0.01);
    let rate_finite = run.rate_constant.is_finite();
    let checks: Vec<&Check> = summary.checks.iter().collect();
    let mut v = Verdict::from_checks(
        &checks,
        &[
            "stability_factor_delta0.02",
            "stability_factor_delta0.01",
            "stability_factor_delta0.005",
            "ladder_growth",
        ],
    );
    v.passed &= every_stamp && rate_finite && summary.t_final == 50.0;
    v.detail = format!(
        "{} stamps={} rate_constant={:.4e}",
        v.detail,
        run.distances.len(),
        run.rate_constant
    );
    v
}

fn collect_outputs(dir: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in fs::read_dir(&d).unwrap() {
            let p = entry.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else if p.file_name().is_some_and(|n| n != MANIFEST) {
                out.insert(p.strip_prefix(dir).unwrap().to_path_buf(), fs::read(&p).unwrap());
            }
        }
    }
    out
}

fn criterion_12(root: &Path) -> Verdict {
    let bin = env!("CARGO_BIN_EXE_blacksol");
    let runs: [&[&str]; 5] = [
        &["verify-lemmas"],
        &["spectrum", "--sweep"],
        &["stability"],
        &["coercivity"],
        &["simulate"],
    ];
    let mut compared = 0;
    for args in runs {
        let out = root.join("repro").join(args[0]);
        let mut snapshots = Vec::new();
        for _ in 0..2 {
            let status = Command::new(bin)
                .args(args)
                .args(["--seed", "7", "--quiet", "--out"])
                .arg(&out)
                .status();
            match status {
                Ok(s) if s.code() == Some(0) => {}
                other => return Verdict::error(format!("{args:?}: {other:?}")),
            }
            snapshots.push(collect_outputs(&out));
        }
        if snapshots[0] != snapshots[1] {
            let differing: Vec<String> = snapshots[0]
                .iter()
                .filter(|(k, v)| snapshots[1].get(*k) != Some(v))
                .map(|(k, _)| k.display().to_string())
                .collect();
            return Verdict::error(format!("{}: differing files {differing:?}", args[0]));
        }
        compared += snapshots[0].len();
    }
    Verdict {
        passed: compared > 0,
        detail: format!("{compared} files byte-identical across two runs"),
    }
}

fn main() {
    let root = tempfile::tempdir().expect("temp dir");
    let root = root.path();
    let report = verify::run(&base_config(&root.join("verify"))).map_err(|e| e.to_string());
    let criteria: Vec<(u32, &str, Box<dyn Fn() -> Verdict + '_>)> = vec![
        (
            1,
            "profile identities",
            Box::new(|| group_verdict(&report, "profile", &["first_order_residual", "second_order_residual"])),
        ),
        (
            2,
            "conserved values at the soliton",
            Box::new(|| group_verdict(&report, "conserved", &["Q", "E", "S", "Lambda", "M"])),
        ),
        (
            3,
            "criticality of Lambda",
            Box::new(|| group_verdict(&report, "criticality", &["lambda_directional_derivative"])),
        ),
        (
            4,
            "factorization identities",
            Box::new(|| group_verdict(&report, "factorization", &["kplus_factorization", "kminus_factorization"])),
        ),
        (5, "nonnegativity and discrete spectra", Box::new(|| criterion_5(&report, root))),
        (
            6,
            "Duhamel bound and coercivity constants",
            Box::new(|| {
                group_verdict(
                    &report,
                    "duhamel",
                    &["duhamel_inner_bound", "k1", "c_plus", "c_minus", "c_plus_resolution", "c_minus_resolution"],
                )
            }),
        ),
        (
            7,
            "exact expansion",
            Box::new(|| {
                group_verdict(
                    &report,
                    "expansion",
                    &["lambda_expansion", "bident_slope", "b0_density_integral", "b2_density_integral"],
                )
            }),
        ),
        (8, "coercivity sandwich and negative control", Box::new(|| criterion_8(root))),
        (
            9,
            "modulation solver",
            Box::new(|| {
                group_verdict(
                    &report,
                    "modulation",
                    &["symmetry_recovery", "jacobian_at_soliton", "xi_rate_vs_fd", "theta_rate_vs_fd"],
                )
            }),
        ),
        (
            10,
            "dynamics",
            Box::new(|| {
                group_verdict(
                    &report,
                    "dynamics",
                    &["stationary_drift", "conserved_drift", "time_reversal", "dark_speed"],
                )
            }),
        ),
        (11, "orbital stability experiment", Box::new(|| criterion_11(root))),
        (12, "reproducibility", Box::new(|| criterion_12(root))),
    ];
    let mut failures = 0;
    for (n, title, run) in criteria {
        let v = run();
        let tag = if v.passed { "PASS" } else { "FAIL" };
        if !v.passed {
            failures += 1;
        }
        println!("criterion {n:>2} {tag} {title}: {}", v.detail);
    }
    println!("{} of 12 criteria passed", 12 - failures);
    if failures > 0 {
        std::process::exit(1);
    }
}
