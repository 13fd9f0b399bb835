//! Acceptance gate. Each test prints one `criterion N: PASS|FAIL` line on
//! stdout (visible with or without `--nocapture`) and then asserts.

mod common;

use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;
use std::process::Command;
use std::sync::Arc;
use std::time::{Duration, Instant};

use linsim::casestudies::guide_by_name;
use linsim::histories::{
    check_object_linearizable, check_strong_linearizability, is_linearizable,
    validate_strong_function, History, LinVerdict, StrongOutcome, TraceTree,
};
use linsim::lattice::{check_order_claims, queue_claims, OrderClaim};
use linsim::lts::{
    check_simulation_graphs, compose_witness, confirm_no_weak_match, format_trace, history_set,
    identity_witness, lazy_no_weak_match, validate_witness, visible, Action, Bound, ReachGraph,
    SimOutcome, SimWitness,
};
use linsim::objects::{
    build_object, classify_liveness, Config, Liveness, LivenessVerdict, Semantics, MUTATIONS,
};

use common::*;

/// Objects that must pass the linearizability check and be simulated by the
/// universal object at two processes and two calls.
const LINEARIZABLE: [&str; 7] = [
    "hwq",
    "tsq",
    "a_spec",
    "u_spec",
    "d_spec",
    "lub(hwq,tsq)",
    "glb(hwq,hwq)",
];

fn report(n: u32, ok: bool, detail: &str, elapsed: Duration) {
    let line = format!(
        "criterion {n}: {} ({:.1}s) {detail}\n",
        if ok { "PASS" } else { "FAIL" },
        elapsed.as_secs_f64()
    );
    let mut out = std::io::stdout().lock();
    out.write_all(line.as_bytes()).unwrap();
    out.flush().unwrap();
}

fn linsim(args: &[&str]) -> i32 {
    let out = Command::new(env!("CARGO_BIN_EXE_linsim"))
        .args(args)
        .output()
        .expect("binary runs");
    out.status.code().expect("exited normally")
}

fn sem(name: &str, n: usize, k: usize) -> Semantics {
    let spec = queue();
    Semantics::new(Arc::new(build_object(name, &spec).unwrap()), &spec, n, k).unwrap()
}

#[test]
fn criterion_1_checker_agrees_with_brute_force() {
    let start = Instant::now();
    let spec = queue();
    let histories = all_queue_histories(6);
    let mut disagree = Vec::new();
    let mut linearizable = 0;
    for h in &histories {
        let ours = is_linearizable(&History::new(h).unwrap(), &spec).is_some();
        let oracle = oracle_linearizable(h, &spec);
        linearizable += oracle as usize;
        if ours != oracle {
            disagree.push(h.clone());
        }
    }
    let elapsed = start.elapsed();
    let ok = disagree.is_empty() && elapsed < Duration::from_secs(60);
    let detail = format!(
        "{} histories, {linearizable} linearizable, {} disagreements",
        histories.len(),
        disagree.len()
    );
    report(1, ok, &detail, elapsed);
    assert!(ok, "{detail}: {:?}", disagree.first());
}

#[test]
fn criterion_2_linearizable_objects_pass() {
    let start = Instant::now();
    let failed: Vec<&str> = LINEARIZABLE
        .into_iter()
        .filter(|o| linsim(&["check-lin", "--object", o, "--n", "2", "--max-ops", "2"]) != 0)
        .collect();
    let elapsed = start.elapsed();
    let ok = failed.is_empty() && elapsed < Duration::from_secs(300);
    let detail = format!("{} objects, failing: {failed:?}", LINEARIZABLE.len());
    report(2, ok, &detail, elapsed);
    assert!(ok, "{detail}");
}

/// First non-linearizable trace of a mutant at two processes, trying two
/// calls before three.
fn mutant_counterexample(name: &str) -> Option<(usize, Vec<Action>)> {
    [2, 3].into_iter().find_map(|k| {
        match check_object_linearizable(&object(name, 2, k), &queue()).unwrap() {
            LinVerdict::Counterexample { trace, .. } => Some((k, trace)),
            LinVerdict::Linearizable { .. } => None,
        }
    })
}

#[test]
fn criterion_3_mutants_are_not_linearizable() {
    let start = Instant::now();
    let mut problems = Vec::new();
    let mut found = Vec::new();
    for m in MUTATIONS {
        let name = format!("hwq:{m}");
        match mutant_counterexample(&name) {
            None => problems.push(format!("{name}: no counterexample")),
            Some((k, trace)) => {
                if !replays(&object(&name, 2, k), &trace) {
                    problems.push(format!("{name}: trace does not replay"));
                }
                if oracle_linearizable(&visible(&trace), &queue()) {
                    problems.push(format!("{name}: oracle linearizes the trace"));
                }
                if linsim(&[
                    "check-lin",
                    "--object",
                    &name,
                    "--n",
                    "2",
                    "--max-ops",
                    &k.to_string(),
                ]) != 1
                {
                    problems.push(format!("{name}: check-lin did not exit 1"));
                }
                found.push(format!("{name}@K={k}"));
            }
        }
    }
    let elapsed = start.elapsed();
    let ok = problems.is_empty() && elapsed < Duration::from_secs(300);
    let detail = format!("refuted {found:?}, problems: {problems:?}");
    report(3, ok, &detail, elapsed);
    assert!(ok, "{detail}");
}

#[test]
fn criterion_4_universal_object_bounds_linearizable_objects() {
    let start = Instant::now();
    let mut problems = Vec::new();
    for o in LINEARIZABLE {
        if linsim(&[
            "check-sim",
            "--left",
            o,
            "--right",
            "u_spec",
            "--n",
            "2",
            "--max-ops",
            "2",
        ]) != 0
        {
            problems.push(format!("{o} not below u_spec"));
        }
    }
    // Two of the mutants only misbehave with three calls.
    for m in MUTATIONS {
        let name = format!("hwq:{m}");
        if linsim(&[
            "check-sim",
            "--left",
            &name,
            "--right",
            "u_spec",
            "--n",
            "2",
            "--max-ops",
            "3",
        ]) != 1
        {
            problems.push(format!("{name}: check-sim did not exit 1"));
        }
        let Some((k, trace)) = mutant_counterexample(&name) else {
            problems.push(format!("{name}: no counterexample"));
            continue;
        };
        let u = sem("u_spec", 2, k);
        if oracle_linearizable(&visible(&trace), &queue())
            || !lazy_no_weak_match(&trace, &u, Bound::DEFAULT_STATE_CEILING).unwrap()
        {
            problems.push(format!("{name}: counterexample not confirmed"));
        }
    }
    let elapsed = start.elapsed();
    let ok = problems.is_empty() && elapsed < Duration::from_secs(900);
    let detail = format!(
        "{} objects below u_spec, {} mutants refuted at K=3, problems: {problems:?}",
        LINEARIZABLE.len(),
        MUTATIONS.len()
    );
    report(4, ok, &detail, elapsed);
    assert!(ok, "{detail}");
}

fn default_objects() -> Vec<String> {
    linsim::cli::default_order_objects()
}

#[test]
fn criterion_5_order_matrix() {
    let start = Instant::now();
    let r = check_order_claims(
        &default_objects(),
        &queue_claims(),
        &queue(),
        2,
        Bound::calls(2),
    )
    .unwrap();
    let failed: Vec<String> = r
        .claims
        .iter()
        .filter(|c| !c.ok())
        .map(|c| {
            format!(
                "{} {} {}",
                c.claim.left,
                if c.claim.expected { "≼" } else { "⋠" },
                c.claim.right
            )
        })
        .collect();
    let elapsed = start.elapsed();
    let ok = failed.is_empty() && elapsed < Duration::from_secs(1800);
    let detail = format!("{} claims, failing: {failed:?}", r.claims.len());
    report(5, ok, &detail, elapsed);
    assert!(ok, "{detail}");
}

#[test]
fn criterion_6_case_study_relations() {
    let start = Instant::now();
    let mut problems = Vec::new();
    let (ls, lg) = (sem("hwq", 2, 2), object("hwq", 2, 2));
    for (right, guide) in [("tsq", "hwq-tsq"), ("u_spec", "hwq-u")] {
        let (rs, rg) = (sem(right, 2, 2), object(right, 2, 2));
        let g = guide_by_name(guide, &ls, &rs).unwrap();
        let guided = check_simulation_graphs(&lg, &rg, Some(&*g)).unwrap();
        match guided.witness() {
            Some(w) if validate_witness(w, &lg, &rg).is_ok() => {}
            Some(_) => problems.push(format!("{guide}: witness does not validate")),
            None => problems.push(format!("{guide}: guided check fails")),
        }
        let unguided = check_simulation_graphs(&lg, &rg, None).unwrap();
        if unguided.holds() != guided.holds() {
            problems.push(format!("{guide}: guided and unguided verdicts differ"));
        }
        if linsim(&[
            "check-sim",
            "--left",
            "hwq",
            "--right",
            right,
            "--guide",
            guide,
        ]) != 0
        {
            problems.push(format!("{guide}: check-sim did not exit 0"));
        }
    }
    let elapsed = start.elapsed();
    let ok = problems.is_empty() && elapsed < Duration::from_secs(900);
    let detail = format!("hwq below tsq and u_spec with guides, problems: {problems:?}");
    report(6, ok, &detail, elapsed);
    assert!(ok, "{detail}");
}

#[test]
fn criterion_7_strong_linearizability_split() {
    let start = Instant::now();
    let spec = queue();
    let mut problems = Vec::new();
    for o in ["a_spec", "atomic"] {
        let tree = TraceTree::from_graph(&object(o, 2, 2)).unwrap();
        match check_strong_linearizability(&tree, &spec) {
            StrongOutcome::Function(f) if validate_strong_function(&f, &tree, &spec) => {}
            StrongOutcome::Function(_) => problems.push(format!("{o}: function does not validate")),
            StrongOutcome::NoFunction(_) => problems.push(format!("{o}: no function")),
        }
        if linsim(&["check-strong", "--object", o, "--n", "2", "--max-ops", "2"]) != 0 {
            problems.push(format!("{o}: check-strong did not exit 0"));
        }
    }
    let mut sizes = BTreeMap::new();
    for o in ["hwq", "tsq"] {
        let g = object(o, 3, 3);
        let tree = TraceTree::from_graph(&g).unwrap();
        match check_strong_linearizability(&tree, &spec) {
            StrongOutcome::Function(_) => problems.push(format!("{o}: function found")),
            StrongOutcome::NoFunction(w) => {
                let sound = !w.nodes.is_empty()
                    && !w.nodes[0].refuted.is_empty()
                    && w.nodes.iter().all(|n| {
                        replays(&g, &n.trace)
                            && n.children.iter().all(|&c| (c as usize) < w.nodes.len())
                    });
                if !sound {
                    problems.push(format!("{o}: malformed witness subtree"));
                }
                sizes.insert(o, w.nodes.len());
            }
        }
        if linsim(&["check-strong", "--object", o, "--n", "3", "--max-ops", "3"]) != 1 {
            problems.push(format!("{o}: check-strong did not exit 1"));
        }
    }
    let elapsed = start.elapsed();
    let ok = problems.is_empty() && elapsed < Duration::from_secs(1200);
    let detail = format!("witness subtree sizes {sizes:?}, problems: {problems:?}");
    report(7, ok, &detail, elapsed);
    assert!(ok, "{detail}");
}

fn is_deq_spin(v: &LivenessVerdict) -> bool {
    match v {
        LivenessVerdict::Violated(l) => {
            !l.cycle.is_empty()
                && l.cycle
                    .iter()
                    .all(|a| matches!(a.label, "D1" | "D2" | "D3"))
        }
        LivenessVerdict::HoldsAtBound => false,
    }
}

#[test]
fn criterion_8_liveness_classification() {
    let start = Instant::now();
    let mut problems = Vec::new();
    let d = object("d_spec", 2, 2);
    for k in Liveness::ALL {
        match classify_liveness(&d, k).unwrap() {
            LivenessVerdict::Violated(l) if !l.cycle.is_empty() => {}
            _ => problems.push(format!("d_spec: {k} not refuted by a lasso")),
        }
    }
    if !classify_liveness(&object("a_spec", 2, 2), Liveness::WaitFree)
        .unwrap()
        .holds()
    {
        problems.push("a_spec: not wait-free".into());
    }
    let h = object("hwq", 2, 2);
    for k in [Liveness::WaitFree, Liveness::ObstructionFree] {
        if !is_deq_spin(&classify_liveness(&h, k).unwrap()) {
            problems.push(format!("hwq: {k} not refuted by the dequeue spin"));
        }
    }
    if let LivenessVerdict::Violated(l) = classify_liveness(&h, Liveness::LockFree).unwrap() {
        problems.push(format!(
            "hwq: {} refuted by the cycle {}",
            Liveness::LockFree,
            format_trace(&l.cycle)
        ));
    }
    let elapsed = start.elapsed();
    let ok = problems.is_empty() && elapsed < Duration::from_secs(600);
    let detail = format!("problems: {problems:?}");
    report(8, ok, &detail, elapsed);
    assert!(ok, "{detail}");
}

#[test]
fn criterion_9_engine_self_consistency() {
    let start = Instant::now();
    let mut problems = Vec::new();

    // Pairs from the simulation criteria, as (left, right).
    let mut pairs: BTreeSet<(String, String)> = LINEARIZABLE
        .iter()
        .map(|o| (o.to_string(), "u_spec".into()))
        .collect();
    pairs.extend(
        queue_claims()
            .into_iter()
            .filter(|c: &OrderClaim| c.expected)
            .map(|c| (c.left, c.right)),
    );
    pairs.insert(("hwq".into(), "tsq".into()));
    pairs.remove(&("u_spec".to_string(), "u_spec".to_string()));

    let names: BTreeSet<&String> = pairs.iter().flat_map(|(l, r)| [l, r]).collect();
    let graphs: BTreeMap<&String, ReachGraph<Config>> =
        names.iter().map(|&n| (n, object(n, 2, 2))).collect();
    let histories: BTreeMap<&String, BTreeSet<Vec<Action>>> =
        graphs.iter().map(|(&n, g)| (n, history_set(g))).collect();

    for (&name, g) in &graphs {
        if validate_witness(&identity_witness(g), g, g).is_err() {
            problems.push(format!("{name}: identity witness rejected"));
        }
        if !check_simulation_graphs(g, g, None).unwrap().holds() {
            problems.push(format!("{name}: not simulated by itself"));
        }
    }

    let mut witnesses: BTreeMap<(&String, &String), SimWitness> = BTreeMap::new();
    let mut refuted = Vec::new();
    for (l, r) in &pairs {
        let (gl, gr) = (&graphs[l], &graphs[r]);
        match check_simulation_graphs(gl, gr, None).unwrap() {
            SimOutcome::Witness(w) => {
                if validate_witness(&w, gl, gr).is_err() {
                    problems.push(format!("{l} ≼ {r}: witness rejected"));
                }
                if !histories[l].is_subset(&histories[r]) {
                    problems.push(format!("{l} ≼ {r}: histories not contained"));
                }
                witnesses.insert((l, r), w);
            }
            SimOutcome::Counterexample(c) => {
                let certified = replays(gl, &c.left_path)
                    && if c.trace_level {
                        confirm_no_weak_match(&c.left_path, gr)
                    } else {
                        replays(gr, &c.right_path)
                    };
                if !certified {
                    problems.push(format!("{l} ⋠ {r}: counterexample does not replay"));
                }
                refuted.push(format!("{l} ⋠ {r}"));
            }
        }
    }

    let mut composed = 0;
    for (&(a, b), w1) in &witnesses {
        for (&(b2, c), w2) in &witnesses {
            if b != b2 || a == c {
                continue;
            }
            match compose_witness(w1, w2) {
                Ok(w) if validate_witness(&w, &graphs[a], &graphs[c]).is_ok() => composed += 1,
                _ => problems.push(format!("{a} ≼ {b} ≼ {c}: composition rejected")),
            }
        }
    }

    let elapsed = start.elapsed();
    let ok = problems.is_empty();
    let detail = format!(
        "{} objects, {} pairs ({} refuted: {refuted:?}), {composed} compositions, problems: {problems:?}",
        graphs.len(),
        pairs.len(),
        refuted.len()
    );
    report(9, ok, &detail, elapsed);
    assert!(ok, "{detail}");
}
