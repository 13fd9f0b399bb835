mod common;

use std::collections::BTreeSet;

use linsim::histories::{
    check_object_linearizable, check_strong_linearizability, enumerate_linearizations,
    happen_before, is_linearizable, validate_strong_function, History, LinVerdict, StrongOutcome,
    TraceTree,
};
use linsim::lts::{visible, Action, Val};
use linsim::seqspec::to_history;
use linsim::Error;
use proptest::prelude::*;

use common::*;

fn h(actions: &[Action]) -> History {
    History::new(actions).unwrap()
}

fn lin_strings(h: &History) -> BTreeSet<String> {
    enumerate_linearizations(h, &queue())
        .iter()
        .map(ToString::to_string)
        .collect()
}

#[test]
fn sequential_operations_are_ordered() {
    let hist = to_history(
        &[
            ("enq", Val::Int(1), Val::Ack),
            ("deq", Val::Unit, Val::Int(1)),
        ],
        &[1, 2],
    );
    assert_eq!(happen_before(&hist), BTreeSet::from([(1, 2)]));
}

#[test]
fn overlapping_operations_are_unordered() {
    let hist = h(&[enq(1, 1), deq(2), ack(1), deq_ret(2, Val::Empty)]);
    assert!(happen_before(&hist).is_empty());
}

#[test]
fn happen_before_skips_overlaps_only() {
    // a · (b ∥ c)
    let hist = h(&[
        enq(1, 1),
        ack(1),
        enq(1, 2),
        deq(2),
        ack(1),
        deq_ret(2, Val::Int(1)),
    ]);
    assert_eq!(happen_before(&hist), BTreeSet::from([(1, 2), (1, 3)]));
}

#[test]
fn malformed_histories_are_rejected() {
    assert!(matches!(
        History::new(&[ack(1)]),
        Err(Error::MalformedHistory(_))
    ));
    assert!(matches!(
        History::new(&[enq(1, 1), enq(1, 2)]),
        Err(Error::MalformedHistory(_))
    ));
    assert!(matches!(
        History::new(&[enq(1, 1), deq_ret(1, Val::Int(1))]),
        Err(Error::MalformedHistory(_))
    ));
}

#[test]
fn completed_sequential_history_has_one_linearization() {
    let hist = h(&[enq(1, 1), ack(1), deq(2), deq_ret(2, Val::Int(1))]);
    assert_eq!(
        lin_strings(&hist),
        BTreeSet::from(["enq(1)⇒ack·deq()⇒1".to_string()])
    );
}

#[test]
fn pending_operations_may_be_dropped_or_ordered_freely() {
    let hist = h(&[enq(1, 1), enq(2, 2)]);
    let expected: BTreeSet<String> = [
        "ε",
        "enq(1)⇒ack",
        "enq(2)⇒ack",
        "enq(1)⇒ack·enq(2)⇒ack",
        "enq(2)⇒ack·enq(1)⇒ack",
    ]
    .map(String::from)
    .into();
    assert_eq!(lin_strings(&hist), expected);
}

#[test]
fn fabricated_value_has_no_linearization() {
    let hist = h(&[enq(1, 1), ack(1), deq(2), deq_ret(2, Val::Int(2))]);
    assert!(enumerate_linearizations(&hist, &queue()).is_empty());
    let hist = h(&[deq(1), deq_ret(1, Val::Int(5))]);
    assert!(is_linearizable(&hist, &queue()).is_none());
}

#[test]
fn empty_history_linearizes_to_empty_sequence() {
    let l = is_linearizable(&History::empty(), &queue()).unwrap();
    assert!(l.ops.is_empty());
}

#[test]
fn pending_enqueue_is_completed_when_needed() {
    let hist = h(&[enq(1, 1), deq(2), deq_ret(2, Val::Int(1))]);
    let l = is_linearizable(&hist, &queue()).unwrap();
    assert_eq!(l.to_string(), "enq(1)⇒ack·deq()⇒1");
}

#[test]
fn atomic_and_classical_objects_are_linearizable() {
    for name in ["a_spec", "hwq"] {
        let v = check_object_linearizable(&object(name, 2, 2), &queue()).unwrap();
        assert!(v.is_ok(), "{name}");
    }
}

#[test]
fn bad_queue_trace_is_confirmed_by_oracle() {
    let v = check_object_linearizable(&object("hwq:return-constant", 2, 2), &queue()).unwrap();
    let LinVerdict::Counterexample { trace, history } = v else {
        panic!("mutant passed")
    };
    assert_eq!(history.actions(), visible(&trace).as_slice());
    assert!(!oracle_linearizable(&visible(&trace), &queue()));
}

#[test]
fn sequential_run_has_prefix_preserving_function() {
    let g = object("atomic", 1, 2);
    let tree = TraceTree::from_graph(&g).unwrap();
    let StrongOutcome::Function(f) = check_strong_linearizability(&tree, &queue()) else {
        panic!("no function")
    };
    assert!(validate_strong_function(&f, &tree, &queue()));
}

#[test]
fn classical_construction_is_strongly_linearizable() {
    let g = object("a_spec", 2, 2);
    let tree = TraceTree::from_graph(&g).unwrap();
    let StrongOutcome::Function(f) = check_strong_linearizability(&tree, &queue()) else {
        panic!("no function")
    };
    assert!(validate_strong_function(&f, &tree, &queue()));
}

#[test]
fn hwq_is_not_strongly_linearizable_with_three_processes() {
    let g = object("hwq", 3, 3);
    let tree = TraceTree::from_graph(&g).unwrap();
    let StrongOutcome::NoFunction(w) = check_strong_linearizability(&tree, &queue()) else {
        panic!("function found")
    };
    assert!(!w.nodes.is_empty());
    assert!(
        w.nodes[0].trace.is_empty(),
        "witness subtree is rooted at the empty trace"
    );
}

#[test]
fn strong_linearizability_survives_smaller_bounds() {
    for (n, k) in [(1, 1), (1, 2), (2, 1), (2, 2)] {
        let tree = TraceTree::from_graph(&object("a_spec", n, k)).unwrap();
        assert!(
            check_strong_linearizability(&tree, &queue()).holds(),
            "n={n} k={k}"
        );
    }
}

fn history_strategy() -> impl Strategy<Value = Vec<Action>> {
    let all = all_queue_histories(6);
    (0..all.len()).prop_map(move |i| all[i].clone())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(400))]

    #[test]
    fn linearizations_replay_and_respect_real_time(actions in history_strategy()) {
        let hist = h(&actions);
        let hb = happen_before(&hist);
        let completed: BTreeSet<u32> = hist.ops().iter().filter(|o| o.ret.is_some()).map(|o| o.oid).collect();
        for l in enumerate_linearizations(&hist, &queue()) {
            prop_assert!(queue().accepts(&l.ops));
            let pos: Vec<u32> = l.oids();
            for &(a, b) in &hb {
                let (pa, pb) = (pos.iter().position(|&x| x == a), pos.iter().position(|&x| x == b));
                prop_assert!(pa.is_some() && pb.is_some() && pa < pb);
            }
            let included: BTreeSet<u32> = pos.iter().copied().collect();
            prop_assert!(completed.is_subset(&included));
        }
    }

    #[test]
    fn first_linearization_is_the_least(actions in history_strategy()) {
        let hist = h(&actions);
        let all = enumerate_linearizations(&hist, &queue());
        prop_assert_eq!(is_linearizable(&hist, &queue()), all.first().cloned());
    }
}
