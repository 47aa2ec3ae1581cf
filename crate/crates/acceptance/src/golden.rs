//! The command-line audit run in-process against the checked-in report.

use clap::Parser;
use regex::Regex;

use faircompass_core::Clock;
use faircompass_service::cli::{audit, exit_code, Cli, Command};

use crate::{ensure, workspace_path, Outcome, ADULT_CSV};

pub const GOLDEN: &str = "crates/service/tests/golden/adult_csp.md";
pub const EXPECTED_SUMMARY: &str = "Conditional statistical parity: violated";

pub fn normalize(report: &str) -> String {
    let stamp =
        Regex::new(r"\d{4}-\d{2}-\d{2}T\d{2}:\d{2}:\d{2}(\.\d+)?(Z|[+-]\d{2}:\d{2})").expect("valid pattern");
    stamp.replace_all(report, "<timestamp>").into_owned()
}

pub fn check() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let out = dir.path().join("report.md");
    let data = workspace_path(ADULT_CSV);
    let args = [
        "faircompass",
        "audit",
        "--data",
        data.to_str().ok_or("non-UTF-8 path")?,
        "--label",
        "income",
        "--pred",
        "prediction",
        "--score",
        "score",
        "--class-map",
        "<=50K:1",
        "--class-map",
        ">50K:0",
        "--groups",
        "sex,occupation",
        "--definition",
        "conditional_statistical_parity",
        "--favourable",
        "0",
        "--sensitive",
        "sex",
        "--legitimate",
        "occupation",
        "--threshold",
        "0.1",
        "--seed",
        "42",
        "--out",
        out.to_str().ok_or("non-UTF-8 path")?,
    ];
    let cli = Cli::try_parse_from(args).map_err(|e| e.to_string())?;
    let Command::Audit(args) = cli.command else {
        return Err("parsed as serve".into());
    };
    let result = audit(&args, Clock::System);
    let code = exit_code(&result);
    let outcome = result.map_err(|e| format!("audit failed: {e}"))?;
    ensure!(code == 1, "exit code {code}");
    ensure!(
        outcome.summary == EXPECTED_SUMMARY,
        "summary `{}`",
        outcome.summary
    );

    let written = std::fs::read_to_string(&out).map_err(|e| e.to_string())?;
    ensure!(written == outcome.report, "file differs from the returned report");
    let golden_path = workspace_path(GOLDEN);
    let golden =
        std::fs::read_to_string(&golden_path).map_err(|e| format!("{}: {e}", golden_path.display()))?;
    let report = normalize(&written);
    if report != golden {
        let line = report
            .lines()
            .zip(golden.lines())
            .position(|(a, b)| a != b)
            .map_or(report.lines().count().min(golden.lines().count()), |i| i);
        return Err(format!("report differs from {GOLDEN} at line {}", line + 1));
    }
    Ok(format!(
        "exit 1, `{EXPECTED_SUMMARY}`, {} report lines match",
        golden.lines().count()
    ))
}
