//! The two-iteration Adult walkthrough: explore by sex, follow the tree to
//! conditional statistical parity, evaluate over occupation, then loop back
//! and evaluate over hours worked.

use serde_json::json;

use faircompass_core::report::loop_iterations;
use faircompass_core::{
    default_tree, export_session, import_session, path_to_definition, AuditSession, Class, Clock,
    EvaluationInputs, EvaluationResult, Meta, Selection, Stage, StratifiedParity,
};

use crate::{adult_dataset, ensure, err, Outcome};

pub const DEFINITION: &str = "conditional_statistical_parity";
pub const EXPECTED_PATH: &str = "Policy →(No)→ Equal base rates →(No, but should be)→ Explaining variables →(Yes)→ Conditional statistical parity";
/// Smallest sex gap in favourable rate expected in each hours stratum.
pub const HOURS_GAP: f64 = 0.15;
pub const HOURS_VALUES: [&str; 3] = ["40", "45", "50"];
const MAX_COMBINATIONS: usize = 10_000;

fn stratified(result: &EvaluationResult) -> Result<&StratifiedParity, String> {
    match result {
        EvaluationResult::Stratified(s) => Ok(s),
        other => Err(format!("expected a stratified result, got {other:?}")),
    }
}

/// Favourable rates of the Female and Male groups in one stratum.
fn sex_rates(stratum: &faircompass_core::metrics::Stratum) -> Result<(f64, f64), String> {
    let rate = |sex: &str| {
        stratum
            .assessment
            .per_group
            .iter()
            .find(|g| g.display_name.split(", ").next() == Some(sex))
            .and_then(|g| g.rate)
            .ok_or_else(|| format!("stratum {} has no {sex} rate", stratum.display_name))
    };
    Ok((rate("Female")?, rate("Male")?))
}

pub fn check() -> Outcome {
    let ds = adult_dataset(true)?;
    let tree = default_tree();
    let inputs = EvaluationInputs {
        favourable_class: Some(Class::Negative),
        sensitive_attribute: Some("sex".into()),
        threshold: Some(0.1),
        ..EvaluationInputs::default()
    };
    let mut session = AuditSession::new("walkthrough", &ds, &tree, Clock::System);

    // First iteration.
    session
        .generate_groups(
            &ds,
            &[Selection::all("sex")],
            MAX_COMBINATIONS,
            Meta::stage(Stage::Exploration),
        )
        .map_err(err("explore sex"))?;
    let path = path_to_definition(&tree, DEFINITION).ok_or("definition unreachable")?;
    for step in &path {
        session
            .navigate(&tree, &step.node_id, &step.answer, Meta::stage(Stage::Guidance))
            .map_err(err("navigate"))?;
    }
    session
        .generate_groups(
            &ds,
            &[Selection::all("sex"), Selection::all("occupation")],
            MAX_COMBINATIONS,
            Meta::stage(Stage::Guidance),
        )
        .map_err(err("sex by occupation"))?;
    let by_occupation = session
        .evaluate(&ds, &tree, &inputs, Meta::stage(Stage::InformedAnalysis))
        .map_err(err("evaluate occupation"))?
        .clone();
    let exec = session
        .active_subgroups()
        .into_iter()
        .find(|g| g.display_name == "Male, Exec-managerial")
        .map(|g| g.id.clone())
        .ok_or("no Male, Exec-managerial subgroup")?;
    session
        .pin(Some(&exec), Meta::stage(Stage::InformedAnalysis))
        .map_err(err("pin"))?;
    session
        .log_stage(
            Stage::InformedAnalysis,
            "compare",
            json!({"pinned": exec}),
            Some("hours may explain the gap".into()),
        )
        .map_err(err("log"))?;

    // Second iteration.
    session
        .generate_groups(
            &ds,
            &[
                Selection::all("sex"),
                Selection::only("hours-per-week", HOURS_VALUES),
            ],
            MAX_COMBINATIONS,
            Meta::stage(Stage::Exploration),
        )
        .map_err(err("sex by hours"))?;
    let by_hours = session
        .evaluate(&ds, &tree, &inputs, Meta::stage(Stage::InformedAnalysis))
        .map_err(err("evaluate hours"))?
        .clone();

    // Female applicants get the favourable outcome less often in every
    // qualifying occupation.
    let occupation = stratified(&by_occupation.result)?;
    ensure!(!occupation.satisfied, "occupation strata satisfy parity");
    for stratum in &occupation.strata {
        let (female, male) = sex_rates(stratum)?;
        ensure!(
            female < male,
            "{}: female {female:.3} >= male {male:.3}",
            stratum.display_name
        );
    }

    let hours = stratified(&by_hours.result)?;
    let names: Vec<&str> = hours.strata.iter().map(|s| s.display_name.as_str()).collect();
    ensure!(names == HOURS_VALUES, "hours strata {names:?}");
    let mut gaps = Vec::new();
    for stratum in &hours.strata {
        let (female, male) = sex_rates(stratum)?;
        let gap = male - female;
        ensure!(gap > HOURS_GAP, "{} hours: gap {gap:.3}", stratum.display_name);
        gaps.push(format!("{gap:.3}"));
    }

    let report = export_session(&session, &ds, &tree).map_err(err("export"))?;
    let decision = report
        .decision_path
        .as_ref()
        .ok_or("report has no decision path")?;
    ensure!(
        decision.summary == EXPECTED_PATH,
        "decision path {}",
        decision.summary
    );
    let iterations = loop_iterations(session.stage_log());
    let stages: Vec<Vec<Stage>> = iterations.iter().map(|i| i.stages.clone()).collect();
    ensure!(
        stages
            == [
                vec![Stage::Exploration, Stage::Guidance, Stage::InformedAnalysis],
                vec![Stage::Exploration, Stage::InformedAnalysis],
            ],
        "iterations {stages:?}"
    );
    ensure!(
        report.iterations == iterations,
        "report iterations differ from the stage log"
    );
    let markdown = report.to_markdown();
    ensure!(
        markdown.contains(EXPECTED_PATH),
        "markdown lacks the decision path"
    );
    ensure!(
        markdown.contains("2 iterations."),
        "markdown lacks the iteration count"
    );
    let restored = import_session(&markdown, Clock::System).map_err(err("import"))?;
    ensure!(
        restored.record() == session.record(),
        "report does not round-trip the session"
    );

    Ok(format!(
        "{} occupation strata all female-lower; hours gaps {}; 2 iterations",
        occupation.strata.len(),
        gaps.join("/")
    ))
}
