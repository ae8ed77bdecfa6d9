//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any
//! fails. Run with `cargo test -p photoscout-cli --test acceptance`.

use std::collections::BTreeSet;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::process::{Command, ExitCode, Output};
use std::time::{Duration, Instant};

use photoscout::annotations::TagTarget;
use photoscout::dsl::{parse, render_expr};
use photoscout::engine::run_search;
use photoscout::evaluator::eval;
use photoscout::fixtures::{
    festival_fixture, fig1_album, wedding_fixture, BRIDE_CLUSTER, FESTIVAL_QUERY, FESTIVAL_REPLAY, FESTIVAL_SIZE,
    FIG1_REPLAY, GROOM_CLUSTER, WEDDING_QUERY,
};
use photoscout::nlbridge::{PromptCorpus, SketchSource, PROMPT_PAIRS};
use photoscout::synthesis::{complete_sketches, consistent, prepare_sketches, synthesize_from_candidates, ExampleSet};
use photoscout_testkit::{
    all_completions, oracle_consistent, oracle_eval, random_album, random_program, random_synthesis_case, rng,
};

const FIG1_ABOVE: &str = "exists x. exists y. HasType(x, Alice) && HasType(y, Flower) && HasRelation(x, y, Above)";
const FIG1_NEXTTO: &str = "exists x. exists y. HasType(x, Alice) && HasType(y, Flower) && HasRelation(x, y, NextTo)";

/// Fixture tree written once by the binary and shared by the criteria.
struct Workspace {
    _dir: tempfile::TempDir,
    root: PathBuf,
}

impl Workspace {
    fn new() -> Self {
        let dir = tempfile::tempdir().expect("temp dir");
        let root = dir.path().to_owned();
        let out = photoscout(&root, &["fixtures", "--out", "."]);
        assert!(out.status.success(), "fixtures: {}", String::from_utf8_lossy(&out.stderr));
        Self { _dir: dir, root }
    }

    fn run(&self, args: &[&str]) -> Output {
        let mut all = vec!["--root", "albums"];
        all.extend_from_slice(args);
        photoscout(&self.root, &all)
    }
}

fn photoscout(cwd: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_photoscout"))
        .current_dir(cwd)
        .args(args)
        .env_remove("PHOTOSCOUT_CONFIG")
        .output()
        .expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn lines(text: &str) -> Vec<String> {
    text.lines().map(str::to_owned).collect()
}

fn fig1_args() -> Vec<String> {
    let mut args: Vec<String> = ["search", "--album", "fig1", "--query", "Alice is holding flowers"]
        .map(String::from)
        .into();
    for a in ["--tag", &format!("alice={BRIDE_CLUSTER}"), "--sketch-source", "replay:llm/fig1.txt", "--json"] {
        args.push(a.to_owned());
    }
    for id in ["fig1_1", "fig1_2", "fig1_3"] {
        args.extend(["--pos".to_owned(), id.to_owned()]);
    }
    args.extend(["--neg".to_owned(), "fig1_4".to_owned()]);
    args
}

fn wedding_args() -> Vec<String> {
    let f = wedding_fixture();
    [
        "search",
        "--album",
        "wedding",
        "--query",
        WEDDING_QUERY,
        "--tag",
        &format!("alice={BRIDE_CLUSTER}"),
        "--tag",
        &format!("bob={GROOM_CLUSTER}"),
        "--pos",
        &f.positive,
        "--neg",
        &f.negative,
        "--sketch-source",
        "fallback",
        "--json",
    ]
    .map(String::from)
    .into()
}

fn festival_args() -> Vec<String> {
    let f = festival_fixture(FESTIVAL_SIZE);
    let mut args: Vec<String> = [
        "search",
        "--album",
        "festival",
        "--query",
        FESTIVAL_QUERY,
        "--sketch-source",
        "replay:llm/festival.txt",
        "--json",
    ]
    .map(String::from)
    .into();
    for id in &f.positive {
        args.extend(["--pos".to_owned(), id.clone()]);
    }
    for id in &f.negative {
        args.extend(["--neg".to_owned(), id.clone()]);
    }
    args
}

fn run_json(ws: &Workspace, args: &[String]) -> (Vec<u8>, serde_json::Value) {
    let refs: Vec<&str> = args.iter().map(String::as_str).collect();
    let out = ws.run(&refs);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    let value = serde_json::from_slice(&out.stdout).expect("json output");
    (out.stdout, value)
}

fn oracle_equivalence() -> String {
    let started = Instant::now();
    let (mut programs, mut checks, mut mismatches) = (0, 0, Vec::new());
    for seed in 0..250u64 {
        let mut r = rng(seed);
        let album = random_album(&mut r, 8, 6);
        for _ in 0..6 {
            let p = random_program(&mut r, album.vocabulary());
            programs += 1;
            for img in album.images() {
                checks += 1;
                if eval(&p, img, &album).expect("generated constants are known") != oracle_eval(&p, img, &album) {
                    mismatches.push(format!("seed {seed}: {p} on {}", img.image_id));
                }
            }
        }
    }
    let elapsed = started.elapsed();
    assert!(programs >= 1000);
    assert!(mismatches.is_empty(), "{} mismatches, first: {}", mismatches.len(), mismatches[0]);
    assert!(elapsed < Duration::from_secs(30), "took {elapsed:?}");
    format!("{programs} programs, {checks} evaluations, 0 mismatches in {elapsed:.2?}")
}

fn fig1_reproduction(ws: &Workspace) -> String {
    let mut album = fig1_album();
    let lines = lines(FIG1_REPLAY);

    // untagged and unlabelled, both unknown terms are reported
    let (sketches, _) = prepare_sketches(&lines, &album);
    assert_eq!(sketches.len(), 1);
    let origins: Vec<&str> = sketches[0].holes().iter().map(|h| h.origin_token.as_str()).collect();
    assert_eq!(origins, ["Alice", "Holding"]);

    album.register_tag("alice", TagTarget::FaceCluster(BRIDE_CLUSTER.into())).unwrap();
    let examples = ExampleSet::new(["fig1_1", "fig1_2", "fig1_3"].map(String::from), ["fig1_4".to_owned()]).unwrap();
    let nextto = parse(FIG1_NEXTTO).unwrap();
    let above = parse(FIG1_ABOVE).unwrap();
    let positives_hold = |p| ["fig1_1", "fig1_2", "fig1_3"].iter().all(|id| eval(p, album.image(id).unwrap(), &album).unwrap());
    assert!(positives_hold(&nextto), "NextTo holds on every positive");
    assert!(eval(&nextto, album.image("fig1_4").unwrap(), &album).unwrap(), "NextTo also holds on the negative");
    assert!(!consistent(&nextto, &examples, &album).unwrap(), "NextTo completion rejected");
    assert!(consistent(&above, &examples, &album).unwrap(), "Above completion accepted");

    let outcome = synthesize_from_candidates(&lines, &examples, &album);
    let program = outcome.program().map(render_expr);
    assert_eq!(program.as_deref(), Some(FIG1_ABOVE));

    let (_, json) = run_json(ws, &fig1_args());
    assert_eq!(json["status"], "complete");
    assert_eq!(json["program"], FIG1_ABOVE);
    assert_eq!(json["results"], serde_json::json!(["fig1_1", "fig1_2", "fig1_3"]));
    format!("NextTo rejected, Above accepted, synthesized `{FIG1_ABOVE}`")
}

fn wedding_replay(ws: &Workspace) -> String {
    let out = ws.run(&["replay", "--album", "wedding", "--script", "scripts/wedding.script"]);
    let text = stdout(&out);
    assert!(out.status.success(), "replay failed:\n{text}{}", String::from_utf8_lossy(&out.stderr));
    assert!(text.contains("expect_status needs_clarification") && text.contains("expect_results"));
    let truth = wedding_fixture().ground_truth;
    let file = std::fs::read_to_string(ws.root.join("scripts/wedding_truth.txt")).unwrap();
    assert_eq!(lines(&file), truth);

    let (_, json) = run_json(ws, &wedding_args());
    let results: Vec<String> = serde_json::from_value(json["results"].clone()).unwrap();
    assert_eq!(results, truth);
    format!("replay passed, {} results equal the ground truth", truth.len())
}

fn festival_latency(ws: &Workspace) -> String {
    let f = festival_fixture(FESTIVAL_SIZE);
    let replay = ws.root.join("llm/festival.txt");
    let (sketches, _) = prepare_sketches(&lines(FESTIVAL_REPLAY), &f.album);
    assert!(!sketches.is_empty() && sketches.iter().all(|s| s.holes().len() == 2));
    let examples = ExampleSet::new(f.positive.clone(), f.negative.clone()).unwrap();
    assert_eq!(examples.len(), 6);
    let source = SketchSource::replay(&replay);

    let mut times = Vec::new();
    let mut status = "";
    for _ in 0..7 {
        let started = Instant::now();
        let (_, response) = run_search(FESTIVAL_QUERY, &examples, &f.album, &source).expect("replay file is present");
        times.push(started.elapsed());
        status = response.status();
    }
    times.sort();
    let (median, worst) = (times[times.len() / 2], times[times.len() - 1]);
    assert!(worst < Duration::from_secs(5), "slowest run {worst:?}");
    assert!(median < Duration::from_secs(1), "median {median:?}");
    format!("{} images, {} sketches, 6 examples: median {median:.2?}, max {worst:.2?} ({status})", f.album.len(), sketches.len())
}

fn synthesis_properties() -> String {
    let (mut complete, mut violations) = (0, Vec::new());
    for seed in 0..200u64 {
        let c = random_synthesis_case(&mut rng(1_000_000 + seed));
        assert!(c.sketches.iter().all(|s| s.holes().len() <= 3));
        let outcome = complete_sketches(&c.sketches, &c.examples, &c.album);
        let smallest = all_completions(&c.sketches, c.album.vocabulary())
            .into_iter()
            .filter(|p| oracle_consistent(p, &c.examples, &c.album))
            .map(|p| p.ast_size())
            .min();
        match (outcome.program(), smallest) {
            (Some(p), Some(min)) => {
                complete += 1;
                if !oracle_consistent(p, &c.examples, &c.album) {
                    violations.push(format!("seed {seed}: `{p}` is inconsistent"));
                } else if p.ast_size() > min {
                    violations.push(format!("seed {seed}: size {} > {min}", p.ast_size()));
                }
            }
            (Some(p), None) => violations.push(format!("seed {seed}: `{p}` returned but none is consistent")),
            (None, Some(_)) => violations.push(format!("seed {seed}: no program, but one is consistent")),
            (None, None) => {}
        }
    }
    assert!(violations.is_empty(), "{} violations, first: {}", violations.len(), violations[0]);
    format!("200 instances, {complete} complete, 0 violations")
}

fn determinism(ws: &Workspace) -> String {
    let mut total = 0;
    for (name, args) in [("fig1", fig1_args()), ("wedding", wedding_args()), ("festival", festival_args())] {
        let runs: BTreeSet<Vec<u8>> = (0..3).map(|_| run_json(ws, &args).0).collect();
        assert_eq!(runs.len(), 1, "{name}: outputs differ across runs");
        total += 3;
    }
    format!("{total} runs, byte-identical per scenario")
}

fn prompt_fidelity() -> String {
    let prompt = PromptCorpus::default().build_prompt("Alice is holding flowers");
    for (nl, dsl) in PROMPT_PAIRS {
        parse(dsl).unwrap_or_else(|e| panic!("`{dsl}`: {e}"));
        assert!(!dsl.contains('?'), "`{dsl}` has a hole");
        let pair = format!("Input: {nl}\nOutput: {dsl}\n");
        assert!(prompt.contains(&pair), "prompt lacks the pair for `{nl}`");
    }
    format!("{} programs parse hole-free, every pair appears verbatim", PROMPT_PAIRS.len())
}

fn check(failures: &mut usize, name: &str, f: impl FnOnce() -> String) {
    let started = Instant::now();
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(detail) => println!("PASS  {name}: {detail} [{:.2?}]", started.elapsed()),
        Err(panic) => {
            *failures += 1;
            let reason = panic
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| panic.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into());
            println!("FAIL  {name}: {reason}");
        }
    }
}

fn main() -> ExitCode {
    // panics are reported on the FAIL line
    std::panic::set_hook(Box::new(|_| {}));
    let ws = Workspace::new();
    let mut failures = 0;
    check(&mut failures, "1 evaluator matches the brute-force oracle", oracle_equivalence);
    check(&mut failures, "2 holding sketch completes to Above, not NextTo", || fig1_reproduction(&ws));
    check(&mut failures, "3 wedding walkthrough replays to the ground truth", || wedding_replay(&ws));
    check(&mut failures, "4 festival search latency", || festival_latency(&ws));
    check(&mut failures, "5 synthesis is sound and minimal", synthesis_properties);
    check(&mut failures, "6 json output is deterministic", || determinism(&ws));
    check(&mut failures, "7 prompt corpus fidelity", prompt_fidelity);
    if failures == 0 {
        println!("acceptance: all criteria passed");
        ExitCode::SUCCESS
    } else {
        println!("acceptance: {failures} criteria failed");
        ExitCode::FAILURE
    }
}
