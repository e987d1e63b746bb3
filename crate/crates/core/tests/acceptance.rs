//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any criterion fails.
//!
//! Expected values are written out by hand or recomputed here by
//! independent means (literal arithmetic, a separate ISO week formula, the
//! hand-written finding list in `fixtures/corpus_expected.tsv`).

use std::collections::{BTreeMap, BTreeSet};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use chrono::{TimeZone, Utc};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use lintfix_core::dataset::{
    build_dataset, classify_difficulty, record_feedback, reproduce_issue, issue_persists, BuildConfig, Classification,
    DifficultyBand, FeedbackConfig, TemplateStubGenerator, TrainingSample, SampleKind,
};
use lintfix_core::lint::{run_linter, toy, LinterConfig};
use lintfix_core::metrics::{aggregate_adoption, fix_accuracy, fix_redundancy, match_adoption, AdoptionRecord, EvalRecord, Verdict};
use lintfix_core::orchestrator::backend::{OracleBackend, Script, ScriptStep, ScriptedBackend};
use lintfix_core::orchestrator::{fix_issue, CompileCheck, FixConfig, FixStatus};
use lintfix_core::patch::{apply_patch, parse_patch, render_patch, ApplyMode, BlockStatus, FixPatch, SearchReplaceBlock};
use lintfix_core::reward::{breakdown, f_beta_score, score_rollout, CorrectnessEvidence, RewardConfig};
use lintfix_core::udiff::{changed_lines, diff_texts, diff_workspaces, parse_unified_diff, DiffLine, FileDiff};
use lintfix_core::{LintIssue, Workspace};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);
/// (i, j, k, compiled, evidence, r_f, r_p, r_c, total)
type RewardRow = (usize, usize, usize, bool, CorrectnessEvidence, f64, f64, f64, f64);

fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures")
}

fn corpus() -> Workspace {
    Workspace::load_dir(&fixtures().join("corpus")).expect("corpus loads")
}

fn corpus_issues(ws: &Workspace) -> Vec<LintIssue> {
    run_linter(ws, &LinterConfig::toy()).expect("toy linter runs")
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol
}

// ---------------------------------------------------------------------------

fn reward_exactness() -> Outcome {
    let start = Instant::now();
    use CorrectnessEvidence::{ColdStartFailToPass as Cold, FeedbackSimilarity as Fb};
    // (i, j, k, compiled, evidence, r_f, r_p, r_c, total), all by hand.
    let table: Vec<RewardRow> = vec![
        (0, 0, 0, true, Cold { passed: true }, 0.0, 0.3, 0.7, 1.0),
        (0, 0, 0, false, Cold { passed: true }, 0.0, 0.0, 0.7, 0.0),
        (1, 1, 0, true, Cold { passed: true }, -0.2, 0.3, 0.7, 0.8),
        (0, 0, 2, true, Fb { f_beta: 1.0 }, -0.2, 0.3, 0.7, 0.8),
        (0, 0, 0, true, Fb { f_beta: 2.0 / 3.0 }, 0.0, 0.3, 0.466_666_666_666_666_7, 0.766_666_666_666_666_7),
        (0, 0, 0, true, Cold { passed: false }, 0.0, 0.3, 0.0, 0.3),
        (3, 2, 1, false, Cold { passed: true }, -0.6, 0.0, 0.7, 0.0),
        (2, 0, 0, true, Cold { passed: false }, -0.2, 0.3, 0.0, 0.1),
        (5, 0, 0, true, Cold { passed: false }, -0.5, 0.3, 0.0, 0.0),
        (1, 0, 0, true, Fb { f_beta: 1.0 }, -0.1, 0.3, 0.7, 0.9),
        (0, 1, 0, true, Fb { f_beta: 0.5 }, -0.1, 0.3, 0.35, 0.55),
        (0, 0, 0, false, Fb { f_beta: 1.0 }, 0.0, 0.0, 0.7, 0.0),
        (0, 0, 1, true, Fb { f_beta: 0.0 }, -0.1, 0.3, 0.0, 0.2),
        (10, 10, 10, true, Cold { passed: true }, -3.0, 0.3, 0.7, 0.0),
    ];
    for (n, &(i, j, k, c, ev, rf, rp, rc, total)) in table.iter().enumerate() {
        let b = breakdown(i, j, k, c, ev);
        ensure(
            close(b.r_f, rf, 1e-9) && close(b.r_p, rp, 1e-9) && close(b.r_c, rc, 1e-9) && close(b.total, total, 1e-9),
            || format!("row {n}: got {b:?}, want r_f={rf} r_p={rp} r_c={rc} total={total}"),
        )?;
    }

    // End-to-end rollouts on a corpus-derived sample.
    let ws = corpus();
    let issues = corpus_issues(&ws);
    let summary = build_dataset(&ws, &issues, &TemplateStubGenerator, &BuildConfig::default()).map_err(|e| e.to_string())?;
    let cold = summary
        .samples
        .iter()
        .find(|s| s.issue.rule_id == toy::UNCHECKED_ASSERTION)
        .ok_or("no assertion sample")?;
    let cfg = RewardConfig::default();
    let golden = lintfix_core::orchestrator::oracle::synthesize_fix(&cold.workspace, &cold.issue).ok_or("no oracle fix")?;
    let fb = TrainingSample {
        kind: SampleKind::Feedback,
        golden_patch: Some(golden.clone()),
        ..cold.clone()
    };
    let perfect = score_rollout(&fb, &golden.raw, &cfg).map_err(|e| e.to_string())?;
    ensure(close(perfect.total, 1.0, 1e-9), || format!("feedback golden candidate: {perfect:?}"))?;

    let malformed_extra = format!("{}### x.go\n<<<<<<< SEARCH\nbroken\n", golden.raw);
    let m = score_rollout(&fb, &malformed_extra, &cfg).map_err(|e| e.to_string())?;
    ensure(close(m.total, 0.9, 1e-9) && m.i_malformed == 1, || format!("one malformed block: {m:?}"))?;

    let noop = FixPatch::from_blocks(vec![lintfix_core::orchestrator::oracle::noop_block(&cold.workspace, &cold.issue).ok_or("noop")?]);
    let persists = score_rollout(cold, &noop.raw, &cfg).map_err(|e| e.to_string())?;
    ensure(close(persists.total, 0.3, 1e-9), || format!("compiles but persists: {persists:?}"))?;
    let fixed = score_rollout(cold, &golden.raw, &cfg).map_err(|e| e.to_string())?;
    ensure(close(fixed.total, 1.0, 1e-9), || format!("cold-start fix: {fixed:?}"))?;
    let again = score_rollout(cold, &golden.raw, &cfg).map_err(|e| e.to_string())?;
    ensure(again.total.to_bits() == fixed.total.to_bits(), || "score_rollout not bit-stable".into())?;

    let table_time = start.elapsed();
    let pure_start = Instant::now();
    for &(i, j, k, c, ev, ..) in &table {
        let _ = breakdown(i, j, k, c, ev);
    }
    let pure = pure_start.elapsed();
    ensure(pure < Duration::from_secs(1), || format!("reward table took {pure:?}"))?;
    Ok(format!(
        "{} table rows within 1e-9, 5 rollouts exact (table {:?}, total incl. dataset build {:?})",
        table.len(),
        pure,
        table_time
    ))
}

// ---------------------------------------------------------------------------

fn expected_findings() -> BTreeSet<(String, String, String)> {
    std::fs::read_to_string(fixtures().join("corpus_expected.tsv"))
        .expect("expected list")
        .lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| {
            let mut parts = l.splitn(3, '\t');
            (
                parts.next().unwrap().to_string(),
                parts.next().unwrap().to_string(),
                parts.next().unwrap().to_string(),
            )
        })
        .collect()
}

fn oracle_pipeline() -> Outcome {
    let start = Instant::now();
    let ws = corpus();
    let issues = corpus_issues(&ws);
    let found: BTreeSet<(String, String, String)> = issues
        .iter()
        .map(|i| {
            let line = ws.get(&i.file).unwrap().lines().nth(i.span.start_line - 1).unwrap().trim().to_string();
            (i.file.clone(), i.rule_id.clone(), line)
        })
        .collect();
    let expected = expected_findings();
    ensure(found == expected && issues.len() == expected.len(), || {
        format!(
            "findings differ from the hand list: missing {:?}, extra {:?}",
            expected.difference(&found).collect::<Vec<_>>(),
            found.difference(&expected).collect::<Vec<_>>()
        )
    })?;
    ensure(issues.len() >= 20, || format!("only {} issues", issues.len()))?;
    let rules: BTreeSet<&str> = issues.iter().map(|i| i.rule_id.as_str()).collect();
    ensure(rules.len() == 4, || format!("rules covered: {rules:?}"))?;

    let cfg = FixConfig::default();
    let oracle = OracleBackend::default();
    let mut records = Vec::new();
    for issue in &issues {
        let run = fix_issue(&ws, issue, &oracle, &cfg).map_err(|e| e.to_string())?;
        records.push(EvalRecord::from_outcome(issue.issue_id.clone(), &run.outcome, 1));
    }
    let acc = fix_accuracy(&records).map_err(|e| e.to_string())?;
    let red = fix_redundancy(&records).map_err(|e| e.to_string())?;
    ensure(acc == 1.0 && red == 0.0, || format!("oracle accuracy {acc}, redundancy {red}"))?;

    // Adversarial: one scripted step per issue, no retries. The expected
    // counts follow from the script alone.
    let cycle = [ScriptStep::Malformed, ScriptStep::Redundant, ScriptStep::NoOp, ScriptStep::Garbage, ScriptStep::Oracle];
    let mut per_issue = BTreeMap::new();
    let (mut want_success, mut want_redundant) = (0usize, 0usize);
    for (n, issue) in issues.iter().enumerate() {
        let step = cycle[n % cycle.len()].clone();
        match step {
            ScriptStep::Oracle => want_success += 1,
            ScriptStep::Redundant => {
                want_success += 1;
                want_redundant += 1;
            }
            _ => {}
        }
        per_issue.insert(issue.issue_id.clone(), vec![step]);
    }
    let scripted = ScriptedBackend::new(Script { default: vec![], per_issue });
    let single = FixConfig { max_retries: 0, ..FixConfig::default() };
    let mut adv = Vec::new();
    for issue in &issues {
        let run = fix_issue(&ws, issue, &scripted, &single).map_err(|e| e.to_string())?;
        adv.push(EvalRecord::from_outcome(issue.issue_id.clone(), &run.outcome, 1));
    }
    let n = issues.len() as f64;
    let adv_acc = fix_accuracy(&adv).map_err(|e| e.to_string())?;
    let adv_red = fix_redundancy(&adv).map_err(|e| e.to_string())?;
    ensure(adv_acc == want_success as f64 / n, || format!("adversarial accuracy {adv_acc}, recount {want_success}/{n}"))?;
    ensure(adv_red == want_redundant as f64 / n, || format!("adversarial redundancy {adv_red}, recount {want_redundant}/{n}"))?;

    let elapsed = start.elapsed();
    ensure(elapsed < Duration::from_secs(30), || format!("took {elapsed:?}"))?;
    Ok(format!(
        "{} issues / 4 rules; oracle accuracy 1.0 redundancy 0.0; adversarial {}/{} and {}/{} match recount ({elapsed:?})",
        issues.len(),
        want_success,
        issues.len(),
        want_redundant,
        issues.len()
    ))
}

// ---------------------------------------------------------------------------

fn retry_contract() -> Outcome {
    let ws = corpus();
    let issues = corpus_issues(&ws);
    let mut checked = 0;
    for retries in [0usize, 1, 3] {
        for failing in [ScriptStep::Garbage, ScriptStep::NoOp, ScriptStep::Malformed] {
            for issue in issues.iter().take(4) {
                let backend = ScriptedBackend::new(Script::uniform(vec![failing.clone()]));
                let cfg = FixConfig { max_retries: retries, ..FixConfig::default() };
                let o = fix_issue(&ws, issue, &backend, &cfg).map_err(|e| e.to_string())?.outcome;
                ensure(
                    o.status == FixStatus::Exhausted && o.attempts.len() == 1 + retries && backend.total_calls() == 1 + retries,
                    || format!("max_retries={retries} {failing:?}: status {:?}, {} attempts, {} calls", o.status, o.attempts.len(), backend.total_calls()),
                )?;
                checked += 1;
            }
        }
    }
    let backend = ScriptedBackend::new(Script::uniform(vec![ScriptStep::Garbage, ScriptStep::Garbage, ScriptStep::Oracle]));
    let o = fix_issue(&ws, &issues[0], &backend, &FixConfig::default()).map_err(|e| e.to_string())?.outcome;
    ensure(o.status == FixStatus::Fixed && o.attempts.len() == 3 && backend.total_calls() == 3, || {
        format!("short circuit: {:?} after {} attempts", o.status, o.attempts.len())
    })?;
    Ok(format!("{checked} exhausted runs over max_retries in {{0,1,3}} made exactly 1+max_retries calls; short-circuit at 3"))
}

// ---------------------------------------------------------------------------

fn fuzz_text(rng: &mut StdRng) -> String {
    const PIECES: &[&str] = &[
        "### a.go",
        "### dir/b.go",
        "###",
        "<<<<<<< SEARCH",
        "<<<<<<< SEARCH  ",
        "=======",
        ">>>>>>> REPLACE",
        ">>>>>>> REPLACE\r",
        "<<<<<<<",
        "```go",
        "```",
        "",
        "\tfoo()",
        "package a",
        "some prose",
        "=====",
        "### ",
    ];
    let n = rng.gen_range(0..30);
    let mut s = String::new();
    if rng.gen_bool(0.5) {
        // Start from a valid block and drop or duplicate one line.
        let mut lines = vec!["### a.go", "<<<<<<< SEARCH", "\tfoo()", "=======", "\tbar()", ">>>>>>> REPLACE"];
        match rng.gen_range(0..4) {
            0 => {
                lines.remove(rng.gen_range(0..lines.len()));
            }
            1 => {
                let at = rng.gen_range(0..lines.len());
                lines.insert(at, lines[at]);
            }
            _ => {}
        }
        for l in lines {
            s.push_str(l);
            s.push('\n');
        }
    }
    for _ in 0..n {
        if rng.gen_bool(0.15) {
            let len = rng.gen_range(0..12);
            let junk: String = (0..len).map(|_| rng.gen_range(b' '..=b'~') as char).collect();
            s.push_str(&junk);
        } else {
            s.push_str(PIECES[rng.gen_range(0..PIECES.len())]);
        }
        s.push_str(if rng.gen_bool(0.1) { "\r\n" } else { "\n" });
    }
    if rng.gen_bool(0.3) {
        s.pop();
    }
    s
}

fn patch_properties() -> Outcome {
    // Totality on fuzzed inputs.
    let mut rng = StdRng::seed_from_u64(0x5eed);
    let mut well_formed_seen = 0;
    for n in 0..1000 {
        let text = fuzz_text(&mut rng);
        let parsed = catch_unwind(|| parse_patch(&text)).map_err(|_| format!("parse panicked on input {n}: {text:?}"))?;
        for b in &parsed.blocks {
            ensure(!b.search.is_empty() && !b.file.is_empty(), || format!("input {n}: degenerate block {b:?}"))?;
        }
        let blocks_only = FixPatch::from_blocks(parsed.blocks.clone());
        if let Ok(rendered) = render_patch(&blocks_only) {
            let again = parse_patch(&rendered);
            ensure(again.blocks == parsed.blocks && again.malformed_count == 0, || format!("input {n}: re-render changed blocks"))?;
            well_formed_seen += usize::from(!parsed.blocks.is_empty());
        }
    }

    // Round trip on every well-formed fixture.
    let ws = corpus();
    let mut fixtures_checked = 0;
    let mut texts: Vec<String> = ["wire_example.txt", "errgroup_recover.txt", "multi_file.txt"]
        .iter()
        .map(|f| std::fs::read_to_string(fixtures().join("patches").join(f)).expect("patch fixture"))
        .collect();
    for issue in corpus_issues(&ws) {
        let p = lintfix_core::orchestrator::oracle::synthesize_fix(&ws, &issue).ok_or("oracle fix")?;
        texts.push(p.raw);
    }
    for text in &texts {
        let p = parse_patch(text);
        ensure(p.malformed_count == 0 && !p.blocks.is_empty(), || format!("fixture not well-formed: {text}"))?;
        let rendered = render_patch(&p).map_err(|e| e.to_string())?;
        ensure(parse_patch(&rendered).structurally_eq(&p), || format!("round trip failed for {text}"))?;
        fixtures_checked += 1;
    }
    let errgroup = parse_patch(&texts[1]);
    let applied = apply_patch(&ws, &errgroup, ApplyMode::Strict);
    ensure(applied.all_applied(), || "errgroup fixture does not apply to the corpus".into())?;

    // Ambiguous searches are refused and leave the file untouched.
    let mut ambiguous = 0;
    for (path, text) in ws.files() {
        let mut seen = BTreeMap::new();
        for l in text.lines().filter(|l| !l.trim().is_empty()) {
            *seen.entry(l).or_insert(0) += 1;
        }
        for (line, _) in seen.into_iter().filter(|(_, c)| *c > 1) {
            let patch = FixPatch::from_blocks(vec![SearchReplaceBlock::new(path.clone(), line, "REPLACED")]);
            for mode in [ApplyMode::Strict, ApplyMode::TrimTrailing] {
                let r = apply_patch(&ws, &patch, mode);
                ensure(r.per_block == [BlockStatus::Ambiguous] && r.result.get(path) == Some(text.as_str()), || {
                    format!("{path}: `{line}` applied despite duplicates")
                })?;
                ambiguous += 1;
            }
        }
    }
    ensure(ambiguous >= 10, || format!("only {ambiguous} ambiguity fixtures"))?;

    // Unapplied blocks leave bytes identical, alone or next to applied ones.
    let good = SearchReplaceBlock::new("util/text.go", "\t\"bytes\"\n", "");
    let mut unapplied = 0;
    for (path, text) in ws.files() {
        let miss = SearchReplaceBlock::new(path.clone(), "this line is not in any file", "x");
        let r = apply_patch(&ws, &FixPatch::from_blocks(vec![miss.clone()]), ApplyMode::default());
        ensure(r.result == ws && r.per_block == [BlockStatus::SearchNotFound], || format!("{path} changed by a missing search"))?;
        if path != "util/text.go" {
            let r = apply_patch(&ws, &FixPatch::from_blocks(vec![good.clone(), miss]), ApplyMode::default());
            ensure(r.result.get(path) == Some(text.as_str()) && r.unapplied_count == 1, || format!("{path} changed in mixed patch"))?;
        }
        unapplied += 1;
    }
    Ok(format!(
        "1000 fuzzed inputs parsed ({well_formed_seen} with blocks re-rendered); {fixtures_checked} fixtures round-trip; {ambiguous} ambiguity refusals; {unapplied} files byte-identical"
    ))
}

// ---------------------------------------------------------------------------

fn cold_start_retention() -> Outcome {
    let ws = corpus();
    let issues = corpus_issues(&ws);
    let lint = LinterConfig::toy();
    let summary = build_dataset(&ws, &issues, &TemplateStubGenerator, &BuildConfig::default()).map_err(|e| e.to_string())?;
    ensure(summary.samples.len() >= 20, || format!("only {} samples, rejected {:?}", summary.samples.len(), summary.rejected))?;
    for s in &summary.samples {
        ensure(CompileCheck::SyntaxParse.run(&s.workspace).unwrap_or(false), || format!("{} does not parse", s.sample_id))?;
        ensure(reproduce_issue(&s.workspace, &s.issue, &lint).unwrap_or(false), || format!("{} does not reproduce", s.sample_id))?;
        ensure(s.workspace.len() < ws.len() + 8, || format!("{} is not minimal", s.sample_id))?;
    }

    // Feedback samples: unmodified suggestions, plus two developer variants.
    let fb_cfg = FeedbackConfig::default();
    let mut feedback = Vec::new();
    for issue in &issues {
        let suggestion = lintfix_core::orchestrator::oracle::synthesize_fix(&ws, issue).ok_or("oracle fix")?;
        let after = apply_patch(&ws, &suggestion, ApplyMode::default()).result;
        let sample = record_feedback(&suggestion, issue, &ws, &diff_workspaces(&ws, &after), &fb_cfg).map_err(|e| e.to_string())?;
        ensure(sample.golden_patch.as_ref().is_some_and(|g| g.structurally_eq(&suggestion)), || "unmodified golden differs".into())?;
        feedback.push(sample);
    }
    for (file, needle) in [("recover_start.diff", "go s.run(ctx)"), ("checked_assertion.diff", "shipmentCtx := eventCtx.(ShipmentContext)")] {
        let diff = std::fs::read_to_string(fixtures().join("diffs").join(file)).expect("diff fixture");
        let issue = issues
            .iter()
            .find(|i| ws.get(&i.file).unwrap().lines().nth(i.span.start_line - 1).unwrap().trim() == needle)
            .ok_or("fixture issue")?;
        let suggestion = lintfix_core::orchestrator::oracle::synthesize_fix(&ws, issue).ok_or("oracle fix")?;
        let sample = record_feedback(&suggestion, issue, &ws, &diff, &fb_cfg).map_err(|e| e.to_string())?;
        let suggested_tree = apply_patch(&ws, &suggestion, ApplyMode::default()).result;
        let committed = lintfix_core::udiff::apply_diff_to_workspace(&ws, &parse_unified_diff(&diff).map_err(|e| e.to_string())?)
            .map_err(|e| e.to_string())?;
        let same = sample.golden_patch.as_ref().unwrap().structurally_eq(&suggestion);
        ensure(same == (suggested_tree == committed), || format!("{file}: golden reuse does not match tree equality"))?;
        feedback.push(sample);
    }
    for s in &feedback {
        let golden = s.golden_patch.as_ref().unwrap();
        let r = apply_patch(&s.workspace, golden, ApplyMode::default());
        ensure(r.all_applied(), || format!("{}: golden does not apply", s.sample_id))?;
        ensure(!issue_persists(&s.workspace, &r.result, &s.issue, &lint).unwrap_or(true), || format!("{}: golden leaves the finding", s.sample_id))?;
    }

    // Difficulty with hand-computed success counts.
    use ScriptStep::{Garbage as G, NoOp as N, Oracle as O};
    let sample = &summary.samples[0];
    let cases: Vec<(Vec<ScriptStep>, Classification)> = vec![
        (vec![O, O, G, O, G, O, G, O], Classification::Keep { successes: 5, band: DifficultyBand::Medium }),
        (vec![G], Classification::Keep { successes: 0, band: DifficultyBand::Hard }),
        (vec![O, G, O, G, O, G, O, G], Classification::Keep { successes: 4, band: DifficultyBand::Medium }),
        (vec![N, O, O, O, O, O, O, O], Classification::Keep { successes: 7, band: DifficultyBand::Easy }),
        (vec![G, G, G, G, G, G, O, O], Classification::Keep { successes: 2, band: DifficultyBand::Hard }),
        (vec![O], Classification::Discard { successes: 8 }),
    ];
    for (steps, want) in &cases {
        let b = ScriptedBackend::new(Script::uniform(steps.clone()));
        let got = classify_difficulty(sample, &b, 8, &FixConfig::default()).map_err(|e| e.to_string())?;
        ensure(got == *want && b.total_calls() == 8, || format!("{steps:?}: got {got:?}, want {want:?}"))?;
    }
    let oracle = classify_difficulty(sample, &OracleBackend::default(), 8, &FixConfig::default()).map_err(|e| e.to_string())?;
    ensure(matches!(oracle, Classification::Discard { successes: 8 }), || format!("oracle 8/8 not discarded: {oracle:?}"))?;

    Ok(format!(
        "{} cold-start samples parse and reproduce; {} feedback goldens remove the finding; {} difficulty cases match",
        summary.samples.len(),
        feedback.len(),
        cases.len() + 1
    ))
}

// ---------------------------------------------------------------------------

fn render_diff(files: &[FileDiff]) -> String {
    let mut out = String::new();
    for f in files {
        out.push_str(&format!("--- a/{}\n+++ b/{}\n", f.path(), f.path()));
        for h in &f.hunks {
            out.push_str(&format!("@@ -{},{} +{},{} @@\n", h.old_start, h.old_len, h.new_start, h.new_len));
            for l in &h.lines {
                match l {
                    DiffLine::Context(s) => out.push_str(&format!(" {s}\n")),
                    DiffLine::Added(s) => out.push_str(&format!("+{s}\n")),
                    DiffLine::Removed(s) => out.push_str(&format!("-{s}\n")),
                }
            }
        }
    }
    out
}

/// Copies of `files` each missing exactly one changed line.
fn single_line_removals(files: &[FileDiff]) -> Vec<Vec<FileDiff>> {
    let mut out = Vec::new();
    for (fi, f) in files.iter().enumerate() {
        for (hi, h) in f.hunks.iter().enumerate() {
            for (li, l) in h.lines.iter().enumerate() {
                if matches!(l, DiffLine::Context(_)) {
                    continue;
                }
                let mut copy = files.to_vec();
                let hunk = &mut copy[fi].hunks[hi];
                match hunk.lines.remove(li) {
                    DiffLine::Added(_) => hunk.new_len -= 1,
                    DiffLine::Removed(_) => hunk.old_len -= 1,
                    DiffLine::Context(_) => unreachable!(),
                }
                out.push(copy);
            }
        }
    }
    out
}

fn fixture_diffs(ws: &Workspace) -> Vec<String> {
    let mut diffs: Vec<String> = ["recover_start.diff", "checked_assertion.diff"]
        .iter()
        .map(|f| std::fs::read_to_string(fixtures().join("diffs").join(f)).expect("diff fixture"))
        .collect();
    for issue in corpus_issues(ws) {
        let p = lintfix_core::orchestrator::oracle::synthesize_fix(ws, &issue).expect("oracle fix");
        diffs.push(diff_workspaces(ws, &apply_patch(ws, &p, ApplyMode::default()).result));
    }
    let mut rng = StdRng::seed_from_u64(50);
    let paths: Vec<&String> = ws.files().keys().filter(|p| p.ends_with(".go")).collect();
    while diffs.len() < 50 {
        let path = paths[rng.gen_range(0..paths.len())];
        let old = ws.get(path).unwrap();
        let mut lines: Vec<String> = old.lines().map(str::to_string).collect();
        for _ in 0..rng.gen_range(1..4) {
            let at = rng.gen_range(0..lines.len());
            match rng.gen_range(0..3) {
                0 => lines[at] = format!("{} // edited", lines[at]),
                1 => lines.insert(at, format!("\t_ = {}", rng.gen_range(0..1000))),
                _ => {
                    lines.remove(at);
                }
            }
        }
        let new: String = lines.iter().map(|l| format!("{l}\n")).collect();
        if new != old {
            diffs.push(diff_texts(path, old, &new));
        }
    }
    diffs
}

/// ISO week label from day arithmetic: 2024-12-30 is the Monday of 2025-W01.
fn brute_week(day_of_2025: i64) -> String {
    let days_since_monday = day_of_2025 + 2;
    format!("2025-W{:02}", days_since_monday / 7 + 1)
}

fn adoption_matching() -> Outcome {
    let ws = corpus();
    let diffs = fixture_diffs(&ws);
    ensure(diffs.len() == 50, || format!("{} diffs", diffs.len()))?;
    for d in &diffs {
        ensure(match_adoption(d, d) == Ok(Verdict::Adopted), || format!("not reflexive:\n{d}"))?;
    }

    let parsed: Vec<Vec<FileDiff>> = diffs.iter().map(|d| parse_unified_diff(d).expect("fixture parses")).collect();
    let mut supersets = 0;
    let mut perturbations = 0;
    for (n, d) in diffs.iter().enumerate() {
        let other = &diffs[(n + 1) % diffs.len()];
        let other_files: BTreeSet<&str> = parsed[(n + 1) % diffs.len()].iter().map(|f| f.path()).collect();
        if parsed[n].iter().all(|f| !other_files.contains(f.path())) {
            let superset = format!("{d}{other}");
            ensure(match_adoption(d, &superset) == Ok(Verdict::Adopted), || format!("superset not adopted:\n{superset}"))?;
            supersets += 1;
        }
        for removed in single_line_removals(&parsed[n]) {
            let committed = render_diff(&removed);
            ensure(match_adoption(d, &committed) == Ok(Verdict::NotAdopted), || format!("perturbation adopted:\n{committed}"))?;
            perturbations += 1;
        }
    }
    // Same-file superset: the developer also edited another line.
    let start_diff = &diffs[0];
    let sched = ws.get("sched/scheduler.go").unwrap();
    let fixed = apply_diff(start_diff, &ws);
    let more = fixed.replace("// Job is a unit of scheduled work.", "// Job is one unit of scheduled work.");
    let bigger = diff_texts("sched/scheduler.go", sched, &more);
    ensure(match_adoption(start_diff, &bigger) == Ok(Verdict::Adopted), || "same-file superset not adopted".into())?;
    supersets += 1;

    // Weekly aggregation on a 100-event log.
    let mut rng = StdRng::seed_from_u64(100);
    let adopters = ["ana", "bo", "chen", "dara", "eli", "fay", "gus"];
    let mut events = Vec::new();
    let mut brute: BTreeMap<String, (BTreeSet<&str>, usize)> = BTreeMap::new();
    for n in 0..100 {
        let day = rng.gen_range(0..70i64);
        let hour = rng.gen_range(0..24u32);
        let who = adopters[rng.gen_range(0..adopters.len())];
        let adopted = rng.gen_bool(0.7);
        let ts = Utc.with_ymd_and_hms(2025, 1, 1, hour, 0, 0).unwrap() + chrono::Duration::days(day);
        let suggested = &diffs[n % diffs.len()];
        let committed = if adopted { suggested.clone() } else { render_diff(&single_line_removals(&parsed[n % diffs.len()])[0]) };
        let rec = AdoptionRecord::evaluate(format!("s{n}"), suggested.clone(), committed, who, ts).map_err(|e| e.to_string())?;
        ensure((rec.verdict == Verdict::Adopted) == adopted, || format!("event {n}: verdict {:?}", rec.verdict))?;
        if adopted {
            let slot = brute.entry(brute_week(day)).or_default();
            slot.0.insert(who);
            slot.1 += 1;
        }
        events.push(rec);
    }
    let weekly = aggregate_adoption(&events);
    let brute: BTreeMap<String, (usize, usize)> = brute.into_iter().map(|(w, (a, n))| (w, (a.len(), n))).collect();
    let got: BTreeMap<String, (usize, usize)> = weekly.iter().map(|(w, a)| (w.clone(), (a.adopters, a.adoptions))).collect();
    ensure(got == brute, || format!("weekly mismatch:\n got {got:?}\nwant {brute:?}"))?;

    Ok(format!(
        "50 diffs reflexive; {supersets} supersets adopted; {perturbations} single-line removals rejected; {} weeks match brute force over 100 events",
        got.len()
    ))
}

fn apply_diff(diff: &str, ws: &Workspace) -> String {
    let files = parse_unified_diff(diff).unwrap();
    let out = lintfix_core::udiff::apply_diff_to_workspace(ws, &files).unwrap();
    out.get(files[0].path()).unwrap().to_string()
}

// ---------------------------------------------------------------------------

fn f_beta_checks() -> Outcome {
    let golden = "--- a/f.go\n+++ b/f.go\n@@ -1,3 +1,3 @@\n-a := 1\n-b := 2\n+a := 10\n+b := 20\n c := 3\n";
    let generated = "--- a/f.go\n+++ b/f.go\n@@ -1,5 +1,5 @@\n-a := 1\n-b := 2\n-x := 7\n-y := 8\n+a := 10\n+b := 20\n+x := 70\n+y := 80\n c := 3\n";
    let g = changed_lines(&parse_unified_diff(golden).map_err(|e| e.to_string())?);
    let t = changed_lines(&parse_unified_diff(generated).map_err(|e| e.to_string())?);
    let f1 = f_beta_score(&t, &g, 1.0).map_err(|e| e.to_string())?;
    ensure(close(f1, 2.0 / 3.0, 1e-9), || format!("worked case F1 = {f1}"))?;

    // Closed form with P = 1/2, R = 1 at beta = 10: 101 * 0.5 / (100 * 0.5 + 1).
    let f10 = f_beta_score(&t, &g, 10.0).map_err(|e| e.to_string())?;
    let closed = 101.0 * 0.5 / 51.0;
    ensure(close(f10, closed, 1e-6), || format!("beta=10: {f10} vs {closed}"))?;

    // P = 1, R = 1/2 at beta = 10: 101 * 0.5 / (100 + 0.5).
    let half = "--- a/f.go\n+++ b/f.go\n@@ -1,2 +1,2 @@\n-a := 1\n+a := 10\n b := 2\n";
    let h = changed_lines(&parse_unified_diff(half).map_err(|e| e.to_string())?);
    let f10b = f_beta_score(&h, &g, 10.0).map_err(|e| e.to_string())?;
    let closed_b = 101.0 * 0.5 / 100.5;
    ensure(close(f10b, closed_b, 1e-6), || format!("beta=10 recall-limited: {f10b} vs {closed_b}"))?;
    ensure(close(f10b, 0.5, 0.01), || "large beta should approach recall".into())?;

    ensure(close(f_beta_score(&g, &g, 1.0).unwrap(), 1.0, 1e-12), || "identical".into())?;
    let disjoint = changed_lines(&parse_unified_diff("--- a/f.go\n+++ b/f.go\n@@ -1 +1 @@\n-q\n+r\n").unwrap());
    ensure(f_beta_score(&disjoint, &g, 1.0).unwrap() == 0.0, || "disjoint".into())?;
    ensure(f_beta_score(&g, &BTreeMap::new(), 1.0).is_err(), || "empty golden accepted".into())?;
    Ok(format!("F1 = {f1:.12}; F10 = {f10:.9} (closed form {closed:.9}); recall-limited F10 = {f10b:.9}"))
}

fn main() {
    let criteria: Vec<Criterion> = vec![
        ("reward exactness", reward_exactness),
        ("oracle pipeline", oracle_pipeline),
        ("retry contract", retry_contract),
        ("patch-engine properties", patch_properties),
        ("cold-start retention", cold_start_retention),
        ("adoption matching", adoption_matching),
        ("F-beta", f_beta_checks),
    ];
    let mut failed = 0;
    for (name, check) in criteria {
        let result = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            Err(p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into()))
        });
        match result {
            Ok(detail) => println!("PASS  {name}: {detail}"),
            Err(why) => {
                failed += 1;
                println!("FAIL  {name}: {why}");
            }
        }
    }
    if failed > 0 {
        std::process::exit(1);
    }
}
