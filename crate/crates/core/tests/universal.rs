mod common;

use std::collections::BTreeSet;

use linsim::histories::{is_linearizable, History};
use linsim::lts::{history_set, trace_set, Action, Val};
use linsim::objects::{build_object, Config, Semantics, Value};

use common::*;

fn sem(name: &str, n: usize, k: usize) -> Semantics {
    let spec = queue();
    Semantics::new(
        std::sync::Arc::new(build_object(name, &spec).unwrap()),
        &spec,
        n,
        k,
    )
    .unwrap()
}

fn chain(s: &Semantics, c: &Config) -> Vec<usize> {
    let mut out = vec![0];
    while let Some(Value::Int(i)) = s.read(c, "node.next", *out.last().unwrap()) {
        out.push(i as usize);
    }
    out
}

#[test]
fn solo_enqueue_records_its_own_linearization() {
    let (s, g) = (sem("u_spec", 1, 1), object("u_spec", 1, 1));
    let found = g.states.iter().any(|c| match s.read(c, "node.lin", 1) {
        Some(Value::Lin(l)) => {
            l.len() == 1
                && l[0].method == "enq"
                && l[0].arg == Val::Int(1)
                && l[0].ret == Some(Val::Ack)
        }
        _ => false,
    });
    assert!(found);
}

#[test]
fn processes_link_each_others_nodes() {
    let (s, g) = (sem("u_spec", 2, 2), object("u_spec", 2, 2));
    let helped = g
        .succ
        .iter()
        .enumerate()
        .flat_map(|(i, e)| e.iter().map(move |(a, _)| (i, a)))
        .any(|(i, a)| {
            let c = &g.states[i];
            let p = a.pid as usize - 1;
            a.label == "link" && s.reg(c, p, "after") != s.reg(c, p, "oid")
        });
    assert!(helped);
}

#[test]
fn heads_lie_on_the_shared_list() {
    for name in ["u_spec", "a_spec"] {
        let (s, g) = (sem(name, 2, 2), object(name, 2, 2));
        for c in &g.states {
            let on_list: BTreeSet<usize> = chain(&s, c).into_iter().collect();
            for p in 0..2 {
                let Some(Value::Int(h)) = s.read(c, "head", p) else {
                    panic!("head is not a node")
                };
                assert!(
                    on_list.contains(&(h as usize)),
                    "{name}: head {h} of process {p} is off the list"
                );
            }
        }
    }
}

#[test]
fn node_history_and_linearization_are_written_once() {
    let (s, g) = (sem("u_spec", 2, 2), object("u_spec", 2, 2));
    let nodes = s.var_len("node.lin").unwrap();
    for (i, edges) in g.succ.iter().enumerate() {
        for (_, t) in edges {
            for var in ["node.hist", "node.lin"] {
                for k in 0..nodes {
                    let before = s.read(&g.states[i], var, k).unwrap();
                    if before != Value::Null {
                        assert_eq!(
                            before,
                            s.read(&g.states[*t as usize], var, k).unwrap(),
                            "{var}[{k}] rewritten"
                        );
                    }
                }
            }
        }
    }
}

#[test]
fn solo_enqueue_then_dequeue_returns_the_value() {
    for name in ["u_spec", "a_spec", "atomic"] {
        let histories = history_set(&object(name, 1, 2));
        assert!(
            histories.contains(&vec![enq(1, 1), ack(1), deq(1), deq_ret(1, Val::Int(1))]),
            "{name}"
        );
        for h in &histories {
            if h.len() == 4 && h[0] == enq(1, 2) && h[2] == deq(1) {
                assert_eq!(h[3], deq_ret(1, Val::Int(2)), "{name}");
            }
        }
    }
}

#[test]
fn atomic_operation_takes_one_step() {
    let traces = trace_set(&object("atomic", 1, 1)).unwrap();
    assert!(traces.contains(&vec![enq(1, 1), Action::internal(1, "take"), ack(1)]));
    assert!(traces.iter().all(|t| t.len() <= 3));
}

#[test]
fn never_returning_object_is_linearizable() {
    for h in history_set(&object("d_spec", 2, 2)) {
        assert!(is_linearizable(&History::new(&h).unwrap(), &queue()).is_some());
        assert!(oracle_linearizable(&h, &queue()));
    }
}

#[test]
fn universal_histories_are_linearizable() {
    for name in ["u_spec", "a_spec"] {
        for h in history_set(&object(name, 2, 2)) {
            assert!(oracle_linearizable(&h, &queue()), "{name}: {h:?}");
        }
    }
}
