mod common;

use std::sync::Arc;

use linsim::casestudies::{guide_by_name, hwq_tsq_related, hwq_u_related};
use linsim::lts::{check_simulation_graphs, history_set, validate_witness, Val};
use linsim::objects::{build_object, Config, Semantics, Value};
use linsim::Error;

use common::*;

fn sem(name: &str, n: usize, k: usize) -> Semantics {
    let spec = queue();
    Semantics::new(Arc::new(build_object(name, &spec).unwrap()), &spec, n, k).unwrap()
}

#[test]
fn solo_enqueue_then_dequeue_returns_the_value() {
    for name in ["hwq", "tsq"] {
        let hs = history_set(&object(name, 1, 2));
        assert!(
            hs.contains(&vec![enq(1, 1), ack(1), deq(1), deq_ret(1, Val::Int(1))]),
            "{name}"
        );
        assert!(
            !hs.contains(&vec![enq(1, 1), ack(1), deq(1), deq_ret(1, Val::Int(2))]),
            "{name}"
        );
    }
}

#[test]
fn only_the_timestamped_queue_reports_empty() {
    let empty = vec![deq(1), deq_ret(1, Val::Empty)];
    assert!(!history_set(&object("hwq", 1, 1)).contains(&empty));
    assert!(history_set(&object("tsq", 1, 1)).contains(&empty));
}

#[test]
fn dequeue_can_overtake_an_unwritten_slot() {
    let h = vec![
        enq(1, 1),
        enq(2, 2),
        ack(2),
        deq(2),
        deq_ret(2, Val::Int(2)),
    ];
    assert!(history_set(&object("hwq", 2, 3)).contains(&h));
    assert!(oracle_linearizable(&h, &queue()));
}

#[test]
fn concurrent_enqueues_dequeue_in_either_order() {
    let hs = history_set(&object("tsq", 2, 3));
    for v in [1, 2] {
        let h = vec![
            enq(1, 1),
            enq(2, 2),
            ack(1),
            ack(2),
            deq(1),
            deq_ret(1, Val::Int(v)),
        ];
        assert!(hs.contains(&h), "dequeue returning {v}");
    }
}

#[test]
fn initial_configurations_are_related() {
    let (h, t, u) = (sem("hwq", 2, 2), sem("tsq", 2, 2), sem("u_spec", 2, 2));
    let (hg, tg, ug) = (
        object("hwq", 2, 2),
        object("tsq", 2, 2),
        object("u_spec", 2, 2),
    );
    assert!(hwq_tsq_related(&h, &hg.states[0], &t, &tg.states[0]));
    assert!(hwq_u_related(&h, &hg.states[0], &u, &ug.states[0]));
}

fn data(v: i64) -> Option<Value> {
    Some(Value::Data(Val::Int(v)))
}

/// P1 has reserved slot 1 for `enq(1)` without writing it; P2 has completed
/// `enq(2)` into slot 2.
fn reserved_not_written(s: &Semantics, c: &Config) -> bool {
    s.label(c, 0) == Some("E2")
        && s.pending_invocation(c, 0) == Some(("enq", Val::Int(1)))
        && s.label(c, 1).is_none()
        && s.reg(c, 0, "i") == Some(Value::Int(1))
        && s.read(c, "Q", 1) == Some(Value::Bot)
        && s.read(c, "Q", 2) == data(2)
}

/// P1 holds an unpublished timestamp for `enq(1)`; P2 has published `enq(2)`.
/// Returns the two timestamps.
fn drawn_not_published(s: &Semantics, c: &Config) -> Option<(i64, i64)> {
    let k = s.k;
    if s.label(c, 0) != Some("T3")
        || s.pending_invocation(c, 0) != Some(("enq", Val::Int(1)))
        || s.label(c, 1).is_some()
        || s.read(c, "pool.val", k) != data(2)
    {
        return None;
    }
    match (s.reg(c, 0, "ts")?, s.read(c, "pool.ts", k)?) {
        (Value::Int(mine), Value::Int(theirs)) => Some((mine, theirs)),
        _ => None,
    }
}

#[test]
fn timestamps_must_follow_reserved_slots() {
    let (hs, ts) = (sem("hwq", 2, 2), sem("tsq", 2, 2));
    let (hg, tg) = (object("hwq", 2, 2), object("tsq", 2, 2));
    let h = hg
        .states
        .iter()
        .find(|c| reserved_not_written(&hs, c))
        .expect("slot reserved before the other enqueue");
    let mut seen = [false; 2];
    for t in &tg.states {
        if let Some((mine, theirs)) = drawn_not_published(&ts, t) {
            let in_order = mine < theirs;
            assert_eq!(
                hwq_tsq_related(&hs, h, &ts, t),
                in_order,
                "timestamps {mine} and {theirs}"
            );
            seen[in_order as usize] = true;
        }
    }
    assert_eq!(seen, [true, true]);
}

#[test]
fn guided_checks_match_unguided_ones() {
    for (right, guide) in [("tsq", "hwq-tsq"), ("u_spec", "hwq-u")] {
        let (ls, rs) = (sem("hwq", 2, 2), sem(right, 2, 2));
        let (lg, rg) = (object("hwq", 2, 2), object(right, 2, 2));
        let g = guide_by_name(guide, &ls, &rs).unwrap();
        let out = check_simulation_graphs(&lg, &rg, Some(&*g)).unwrap();
        assert_eq!(
            validate_witness(out.witness().expect(guide), &lg, &rg),
            Ok(())
        );
        assert!(check_simulation_graphs(&lg, &rg, None).unwrap().holds());
    }
}

#[test]
fn unknown_guide_is_rejected() {
    let s = sem("hwq", 1, 1);
    assert!(matches!(
        guide_by_name("hwq-x", &s, &s),
        Err(Error::UnknownGuide(_))
    ));
}
