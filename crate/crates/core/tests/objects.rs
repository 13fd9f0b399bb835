mod common;

use std::sync::Arc;

use linsim::lts::{trace_set, trace_set_upto, visible, Action, ActionKind, Bound, Val};
use linsim::objects::{
    build_object, classify_liveness, mutate, object_graph, Liveness, LivenessVerdict, MUTATIONS,
};
use linsim::Error;

use common::*;

fn labels(trace: &[Action]) -> Vec<(u8, &'static str)> {
    trace
        .iter()
        .filter(|a| a.kind == ActionKind::Internal)
        .map(|a| (a.pid, a.label))
        .collect()
}

#[test]
fn solo_enqueue_runs_e1_e2_then_returns() {
    let g = object("hwq", 1, 1);
    let traces = trace_set_upto(&g, 4);
    let t = vec![
        enq(1, 1),
        Action::internal(1, "E1"),
        Action::internal(1, "E2"),
        ack(1),
    ];
    assert!(traces.contains(&t));
}

#[test]
fn both_enqueues_can_reserve_before_writing() {
    let g = object("hwq", 2, 2);
    let found = trace_set_upto(&g, 4)
        .into_iter()
        .any(|t| labels(&t) == [(1, "E1"), (2, "E1")] && t.len() == 4);
    assert!(found);
}

#[test]
fn histories_have_at_most_one_pending_call_per_process() {
    for name in ["hwq", "tsq", "a_spec", "lub(hwq,tsq)", "glb(hwq,tsq)"] {
        for h in linsim::lts::history_set(&object(name, 2, 2)) {
            linsim::histories::History::new(&h).unwrap_or_else(|e| panic!("{name}: {e}"));
        }
    }
}

#[test]
fn emitted_actions_stay_in_the_alphabet() {
    let invocations = queue().invocations();
    for name in ["hwq", "tsq", "a_spec", "d_spec", "atomic", "u_spec"] {
        let g = object(name, 2, if name == "u_spec" { 1 } else { 2 });
        for (a, _) in g.succ.iter().flatten() {
            match a.kind {
                ActionKind::Call => {
                    assert!(invocations.contains(&(a.method, a.payload)), "{name}: {a}")
                }
                ActionKind::Return => match a.method {
                    "enq" => assert_eq!(a.payload, Val::Ack, "{name}"),
                    _ => assert!(
                        matches!(a.payload, Val::Int(1 | 2) | Val::Empty),
                        "{name}: {a}"
                    ),
                },
                ActionKind::Internal => {}
            }
        }
    }
}

#[test]
fn mutations_edit_the_queue() {
    let hwq = build_object("hwq", &queue()).unwrap();
    let swapped = mutate(&hwq, "swap-E1-E2").unwrap();
    let pos = |p: &linsim::objects::Program, l| p.find_label("enq", l).unwrap();
    assert!(pos(&swapped, "E2") < pos(&swapped, "E1"));
    assert!(matches!(
        mutate(&hwq, "flip-bits"),
        Err(Error::UnknownMutation(_))
    ));
    assert!(matches!(
        mutate(&build_object("atomic", &queue()).unwrap(), "swap-E1-E2"),
        Err(Error::UnknownMutation(_))
    ));

    let constant = object("hwq:return-constant", 2, 2);
    for (a, _) in constant.succ.iter().flatten() {
        if a.is_return() && a.method == "deq" {
            assert_eq!(a.payload, Val::Int(1));
        }
    }
    for m in MUTATIONS {
        build_object(&format!("hwq:{m}"), &queue()).unwrap();
    }
}

#[test]
fn never_returning_object_is_not_wait_free() {
    let g = object("d_spec", 1, 1);
    let LivenessVerdict::Violated(lasso) = classify_liveness(&g, Liveness::WaitFree).unwrap()
    else {
        panic!("d_spec is wait-free")
    };
    assert_eq!(visible(&lasso.stem).len(), 1);
    assert!(lasso.stem[0].is_call());
    assert!(!lasso.cycle.is_empty() && lasso.cycle.iter().all(|a| !a.is_visible()));
}

#[test]
fn classical_construction_is_wait_free() {
    assert!(
        classify_liveness(&object("a_spec", 2, 2), Liveness::WaitFree)
            .unwrap()
            .holds()
    );
}

#[test]
fn empty_queue_dequeue_spins() {
    let g = object("hwq", 2, 2);
    for kind in [Liveness::WaitFree, Liveness::ObstructionFree] {
        let LivenessVerdict::Violated(lasso) = classify_liveness(&g, kind).unwrap() else {
            panic!("{kind} holds")
        };
        assert!(
            lasso
                .cycle
                .iter()
                .all(|a| matches!(a.label, "D1" | "D2" | "D3")),
            "{kind}: {:?}",
            lasso.cycle
        );
    }
}

#[test]
fn liveness_properties_are_ordered() {
    for name in [
        "d_spec",
        "a_spec",
        "atomic",
        "hwq",
        "tsq",
        "lub(hwq,tsq)",
        "glb(hwq,tsq)",
    ] {
        let g = object(name, 2, 2);
        let [wf, lf, of] = Liveness::ALL.map(|k| classify_liveness(&g, k).unwrap().holds());
        assert!(!wf || lf, "{name}: wait-free but not lock-free");
        assert!(!lf || of, "{name}: lock-free but not obstruction-free");
    }
}

#[test]
fn truncated_graph_is_refused_by_liveness() {
    let spec = queue();
    let prog = Arc::new(build_object("tsq", &spec).unwrap());
    let g = object_graph(&prog, &spec, 2, Bound::calls(2).with_internal_budget(2)).unwrap();
    assert!(g.budget_truncated());
    assert!(matches!(
        classify_liveness(&g, Liveness::WaitFree),
        Err(Error::InternalBudgetExhausted { .. })
    ));
}

#[test]
fn never_returning_trace_set_is_infinite() {
    assert_eq!(
        trace_set(&object("d_spec", 1, 1)),
        Err(Error::InfiniteTraceSet)
    );
}
