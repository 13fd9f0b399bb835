//! Universal and base objects built from a sequential specification: the
//! history-carrying universal object, the classical universal construction,
//! the never-returning object and the atomic implementation.
//!
//! The helper objects (consensus, history recorder, id generator) and the
//! list scans (maximum head, return-value lookup, linearization choice) are
//! atomic commands of the object program.

use std::sync::Arc;

use crate::histories::{enumerate_linearizations, History, OpRecord};
use crate::lts::{Action, Val};
use crate::objects::{
    ex, goto, when, AtomicCtx, AtomicObj, Command, Dim, Expr, Loc, Outcome, Program,
    ProgramBuilder, Value, VarId,
};
use crate::seqspec::{validate_spec, SeqSpec};
use crate::{Error, Result};

fn check_spec(spec: &SeqSpec) -> Result<()> {
    validate_spec(spec, 4).map_err(|v| Error::SpecInvalid(format!("{}: {v:?}", spec.name)))
}

fn atomic(
    name: &'static str,
    f: impl Fn(&AtomicCtx<'_>, &[Value]) -> Result<Vec<Outcome>> + Send + Sync + 'static,
) -> AtomicObj {
    AtomicObj {
        name,
        f: Arc::new(f),
    }
}

fn one(ret: Value, writes: Vec<(VarId, usize, Value)>) -> Result<Vec<Outcome>> {
    Ok(vec![Outcome { ret, writes }])
}

fn bad(msg: impl Into<String>) -> Error {
    Error::IllFormedProgram(msg.into())
}

/// Variables of the shared node list. Node `k` is the node of operation `k`;
/// node 0 is the tail sentinel with sequence number 1.
#[derive(Clone, Copy)]
struct NodeVars {
    announce: VarId,
    head: VarId,
    method: VarId,
    arg: VarId,
    seq: VarId,
    decide: VarId,
    next: VarId,
}

/// Nodes on the list after the tail, in list order.
fn chain(ctx: &AtomicCtx<'_>, nv: NodeVars) -> Result<Vec<usize>> {
    let mut out = Vec::new();
    let mut x = ctx.get(nv.next, 0)?.clone();
    while x != Value::Null {
        let i = x.index()?;
        if out.contains(&i) || out.len() > ctx.len(nv.next) {
            return Err(bad("node list has a cycle"));
        }
        out.push(i);
        x = ctx.get(nv.next, i)?.clone();
    }
    Ok(out)
}

fn op_ret(lin: &[OpRecord], oid: u32) -> Option<Val> {
    lin.iter().find(|o| o.oid == oid).and_then(|o| o.ret)
}

/// Every linearization of `after`'s recorded history that contains
/// `after`'s operation and agrees with the return value each listed node
/// fixed for its own operation. Pending operations of the history may be
/// included.
fn gen_lin(
    ctx: &AtomicCtx<'_>,
    nv: NodeVars,
    hist: VarId,
    lin: VarId,
    after: usize,
) -> Result<Vec<Outcome>> {
    let existing = ctx.get(lin, after)?;
    if *existing != Value::Null {
        // The lin field is already fixed, so the following cas fails whatever
        // is chosen here.
        return one(existing.clone(), Vec::new());
    }
    let Value::Hist(h) = ctx.get(hist, after)? else {
        return Err(bad("genLin on a node without history"));
    };
    let actions: Vec<Action> = h.iter().map(|(a, _)| *a).collect();
    let tags: Vec<u32> = h
        .iter()
        .filter(|(a, _)| a.is_call())
        .map(|&(_, oid)| oid)
        .collect();
    let history = History::new(&actions)?;
    let mut fixed = Vec::new();
    for x in chain(ctx, nv)? {
        let Value::Lin(l) = ctx.get(lin, x)? else {
            return Err(bad("listed node without linearization"));
        };
        let r = op_ret(l, x as u32)
            .ok_or_else(|| bad("listed node missing from its own linearization"))?;
        fixed.push((x as u32, r));
    }
    let mut out = Vec::new();
    for l in enumerate_linearizations(&history, ctx.spec) {
        let ops: Vec<OpRecord> = l
            .ops
            .iter()
            .map(|o| OpRecord {
                oid: tags[o.oid as usize - 1],
                ..*o
            })
            .collect();
        let has = |oid: u32| ops.iter().any(|o| o.oid == oid);
        if has(after as u32) && fixed.iter().all(|&(oid, r)| op_ret(&ops, oid) == Some(r)) {
            out.push(Outcome {
                ret: Value::Lin(ops.into()),
                writes: Vec::new(),
            });
        }
    }
    if out.is_empty() {
        return Err(Error::NoLinearization(format!(
            "node {after} over history of {} actions",
            actions.len()
        )));
    }
    Ok(out)
}

/// Shared skeleton of the two universal constructions. With `recording`, the
/// nodes carry a history and a linearization and the return value is read
/// from the node's linearization; without it, the return value comes from
/// replaying the list.
fn build_universal(spec: &SeqSpec, recording: bool) -> Result<Program> {
    check_spec(spec)?;
    let name = if recording { "u_spec" } else { "a_spec" };
    let mut b = ProgramBuilder::new(format!("{name}({})", spec.name));
    let oidgen = b.var("oidgen", Dim::One, Value::Int(0));
    let his = recording.then(|| b.var("his", Dim::One, Value::Hist(Vec::new().into())));
    let nv = NodeVars {
        announce: b.var("announce", Dim::PerProc, Value::Int(0)),
        head: b.var("head", Dim::PerProc, Value::Int(0)),
        method: b.var("node.m", Dim::PerCall, Value::Null),
        arg: b.var("node.a", Dim::PerCall, Value::Null),
        seq: b.var_with(
            "node.seq",
            Dim::PerCall,
            Value::Int(0),
            vec![(0, Value::Int(1))],
        ),
        decide: b.var("node.decideNext", Dim::PerCall, Value::Null),
        next: b.var("node.next", Dim::PerCall, Value::Null),
    };
    let hist = recording.then(|| b.var("node.hist", Dim::PerCall, Value::Null));
    let lin = recording.then(|| b.var("node.lin", Dim::PerCall, Value::Null));

    let oid = b.reg("oid");
    let s = b.reg("s");
    let before = b.reg("before");
    let bseq = b.reg("bseq");
    let help = b.reg("help");
    let hseq = b.reg("hseq");
    let prefer = b.reg("prefer");
    let after = b.reg("after");
    let h1 = b.reg("h1");
    let l = b.reg("l");
    let ret = b.reg("b");

    let gen_id = atomic("genID", move |ctx, _| {
        let c = ctx.get(oidgen, 0)?.int()? + 1;
        one(Value::Int(c), vec![(oidgen, 0, Value::Int(c))])
    });
    let store = |name: &'static str, his: VarId, is_call: bool| {
        atomic(name, move |ctx, args| {
            let Value::Hist(h) = ctx.get(his, 0)? else {
                return Err(bad("recorder holds no history"));
            };
            let oid = args[0].index()? as u32;
            let pid = ctx.pid as u8 + 1;
            let a = if is_call {
                Action::call(pid, ctx.method, ctx.arg)
            } else {
                let Value::Data(v) = args[1] else {
                    return Err(bad("storeReturn of non-data value"));
                };
                Action::ret(pid, ctx.method, v)
            };
            let mut v = h.to_vec();
            v.push((a, oid));
            one(Value::Null, vec![(his, 0, Value::Hist(v.into()))])
        })
    };
    let new_node = atomic("newNode", move |ctx, args| {
        let oid = args[0].index()?;
        let m = ctx
            .spec
            .methods
            .iter()
            .position(|m| m.name == ctx.method)
            .ok_or_else(|| bad("unknown method"))?;
        one(
            Value::Null,
            vec![
                (nv.method, oid, Value::Int(m as i64)),
                (nv.arg, oid, Value::Data(ctx.arg)),
                (nv.announce, ctx.pid, Value::Int(oid as i64)),
            ],
        )
    });
    let node_max = atomic("Node.max", move |ctx, _| {
        let mut best = (i64::MIN, 0usize);
        for i in 0..ctx.n {
            let node = ctx.get(nv.head, i)?.index()?;
            let s = ctx.get(nv.seq, node)?.int()?;
            if s > best.0 {
                best = (s, node);
            }
        }
        one(
            Value::Null,
            vec![(nv.head, ctx.pid, Value::Int(best.1 as i64))],
        )
    });
    let decide = atomic("decide", move |ctx, args| {
        let before = args[0].index()?;
        match ctx.get(nv.decide, before)? {
            Value::Null => one(args[1].clone(), vec![(nv.decide, before, args[1].clone())]),
            d => one(d.clone(), Vec::new()),
        }
    });

    let methods: Vec<&'static str> = spec.methods.iter().map(|m| m.name).collect();
    b.body(&methods, |m| {
        m.ins(
            "genID",
            Command::Atomic {
                obj: gen_id,
                args: vec![],
                dst: Some(oid),
                var_base: 0,
            },
            vec![],
        );
        if let Some(his) = his {
            m.ins(
                "storeCall",
                Command::Atomic {
                    obj: store("storeCall", his, true),
                    args: vec![ex::r(oid)],
                    dst: None,
                    var_base: 0,
                },
                vec![],
            );
        }
        m.ins(
            "announce",
            Command::Atomic {
                obj: new_node,
                args: vec![ex::r(oid)],
                dst: None,
                var_base: 0,
            },
            vec![],
        );
        m.ins(
            "max",
            Command::Atomic {
                obj: node_max,
                args: vec![],
                dst: None,
                var_base: 0,
            },
            vec![],
        );
        m.ins(
            "loop",
            Command::Read {
                loc: Loc::at(nv.seq, ex::r(oid)),
                dst: s,
            },
            vec![when(ex::ne(ex::r(s), ex::int(0)), "done")],
        );
        m.ins(
            "before",
            Command::Read {
                loc: Loc::at(nv.head, Expr::Pid),
                dst: before,
            },
            vec![],
        );
        m.ins(
            "bseq",
            Command::Read {
                loc: Loc::at(nv.seq, ex::r(before)),
                dst: bseq,
            },
            vec![],
        );
        m.ins(
            "help",
            Command::Read {
                loc: Loc::at(
                    nv.announce,
                    ex::modulo(ex::add(ex::r(bseq), ex::int(1)), Expr::N),
                ),
                dst: help,
            },
            vec![],
        );
        m.ins(
            "prefer",
            Command::Read {
                loc: Loc::at(nv.seq, ex::r(help)),
                dst: hseq,
            },
            vec![
                when(ex::eq(ex::r(hseq), ex::int(0)), "decide").set(prefer, ex::r(help)),
                goto("decide").set(prefer, ex::r(oid)),
            ],
        );
        m.ins(
            "decide",
            Command::Atomic {
                obj: decide,
                args: vec![ex::r(before), ex::r(prefer)],
                dst: Some(after),
                var_base: 0,
            },
            vec![],
        );
        if let (Some(his), Some(hist), Some(lin)) = (his, hist, lin) {
            let read = atomic("his.read", move |ctx, _| {
                one(ctx.get(his, 0)?.clone(), Vec::new())
            });
            let genlin = atomic("genLin", move |ctx, args| {
                gen_lin(ctx, nv, hist, lin, args[0].index()?)
            });
            m.ins(
                "read",
                Command::Atomic {
                    obj: read,
                    args: vec![],
                    dst: Some(h1),
                    var_base: 0,
                },
                vec![],
            );
            m.ins(
                "casHist",
                Command::Cas {
                    loc: Loc::at(hist, ex::r(after)),
                    old: ex::c(Value::Null),
                    new: ex::r(h1),
                    dst: None,
                },
                vec![],
            );
            m.ins(
                "genLin",
                Command::Atomic {
                    obj: genlin,
                    args: vec![ex::r(after)],
                    dst: Some(l),
                    var_base: 0,
                },
                vec![],
            );
            m.ins(
                "casLin",
                Command::Cas {
                    loc: Loc::at(lin, ex::r(after)),
                    old: ex::c(Value::Null),
                    new: ex::r(l),
                    dst: None,
                },
                vec![],
            );
        }
        m.ins(
            "link",
            Command::Write {
                loc: Loc::at(nv.next, ex::r(before)),
                val: ex::r(after),
            },
            vec![],
        );
        m.ins(
            "setSeq",
            Command::Write {
                loc: Loc::at(nv.seq, ex::r(after)),
                val: ex::add(ex::r(bseq), ex::int(1)),
            },
            vec![],
        );
        m.ins(
            "advance",
            Command::Write {
                loc: Loc::at(nv.head, Expr::Pid),
                val: ex::r(after),
            },
            vec![goto("loop")],
        );
        m.ins(
            "done",
            Command::Write {
                loc: Loc::at(nv.head, Expr::Pid),
                val: ex::r(oid),
            },
            vec![],
        );
        let get_ret = match lin {
            Some(lin) => atomic("getRetValue", move |ctx, args| {
                let oid = args[0].index()?;
                let Value::Lin(l) = ctx.get(lin, oid)? else {
                    return Err(bad("node without linearization"));
                };
                let r = op_ret(l, oid as u32)
                    .ok_or_else(|| bad("operation missing from its own linearization"))?;
                one(Value::Data(r), Vec::new())
            }),
            None => atomic("getRetValue", move |ctx, args| {
                let oid = args[0].index()?;
                let mut state = ctx.spec.initial.clone();
                for x in chain(ctx, nv)? {
                    let m = ctx.get(nv.method, x)?.index()?;
                    let m = ctx
                        .spec
                        .methods
                        .get(m)
                        .ok_or_else(|| bad("bad method index"))?
                        .name;
                    let Value::Data(a) = *ctx.get(nv.arg, x)? else {
                        return Err(bad("node without argument"));
                    };
                    let (r, next) = ctx.spec.step(&state, m, a);
                    if x == oid {
                        return one(Value::Data(r), Vec::new());
                    }
                    state = next;
                }
                Err(bad(format!("node {oid} is not on the list")))
            }),
        };
        m.ins(
            "getRetValue",
            Command::Atomic {
                obj: get_ret,
                args: vec![ex::r(oid)],
                dst: Some(ret),
                var_base: 0,
            },
            vec![],
        );
        if let Some(his) = his {
            m.ins(
                "storeReturn",
                Command::Atomic {
                    obj: store("storeReturn", his, false),
                    args: vec![ex::r(oid), ex::r(ret)],
                    dst: None,
                    var_base: 0,
                },
                vec![],
            );
        }
        m.ins("return", Command::Return(ex::r(ret)), vec![]);
    })?;
    b.build()
}

/// The universal object: every operation appends a node carrying the
/// recorded history and a linearization of it, and returns the value that
/// linearization assigns.
pub fn build_u_spec(spec: &SeqSpec) -> Result<Program> {
    build_universal(spec, true)
}

/// The classical universal construction: consensus-appended list of
/// invocations, return values by replaying the list.
pub fn build_a_spec(spec: &SeqSpec) -> Result<Program> {
    build_universal(spec, false)
}

/// Every method spins forever without returning.
pub fn build_d_spec(spec: &SeqSpec) -> Result<Program> {
    check_spec(spec)?;
    let mut b = ProgramBuilder::new(format!("d_spec({})", spec.name));
    let methods: Vec<&'static str> = spec.methods.iter().map(|m| m.name).collect();
    b.body(&methods, |m| {
        m.ins("spin", Command::Skip, vec![goto("spin")]);
    })?;
    b.build()
}

/// Each operation takes effect on the specification state in one internal
/// step between its call and its return.
pub fn build_atomic(spec: &SeqSpec) -> Result<Program> {
    check_spec(spec)?;
    let mut b = ProgramBuilder::new(format!("atomic({})", spec.name));
    let state = b.var("state", Dim::One, Value::Seq(spec.initial.clone().into()));
    let r = b.reg("r");
    let apply = atomic("apply", move |ctx, _| {
        let Value::Seq(s) = ctx.get(state, 0)? else {
            return Err(bad("atomic state is not a sequence"));
        };
        let (ret, next) = ctx.spec.step(&s.to_vec(), ctx.method, ctx.arg);
        one(Value::Data(ret), vec![(state, 0, Value::Seq(next.into()))])
    });
    let methods: Vec<&'static str> = spec.methods.iter().map(|m| m.name).collect();
    b.body(&methods, |m| {
        m.ins(
            "take",
            Command::Atomic {
                obj: apply,
                args: vec![],
                dst: Some(r),
                var_base: 0,
            },
            vec![],
        );
        m.ins("return", Command::Return(ex::r(r)), vec![]);
    })?;
    b.build()
}

/// The atomic implementation as an explorable system for `n` processes.
pub fn atomic_lts(spec: &SeqSpec, n: usize, k: usize) -> Result<crate::objects::Semantics> {
    crate::objects::Semantics::new(Arc::new(build_atomic(spec)?), spec, n, k)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lts::Action;
    use crate::seqspec::{default_values, queue_spec};
    use std::collections::BTreeSet;

    const NODES: usize = 4;

    /// Node variables laid out one after another, `NODES` entries each.
    fn layout() -> (NodeVars, VarId, VarId, Vec<usize>, Vec<usize>) {
        let nv = NodeVars {
            announce: 0,
            head: 1,
            method: 2,
            arg: 3,
            seq: 4,
            decide: 5,
            next: 6,
        };
        let offsets = (0..9).map(|v| v * NODES).collect();
        (nv, 7, 8, offsets, vec![NODES; 9])
    }

    /// Runs genLin for `after` on a store where `hist[after] = hist` and the
    /// list is `listed`, each with the given linearization.
    fn gen(
        hist: Vec<(Action, u32)>,
        after: usize,
        listed: &[(usize, Vec<OpRecord>)],
    ) -> BTreeSet<String> {
        let spec = queue_spec(&default_values());
        let (nv, h, l, offsets, lens) = layout();
        let mut store = vec![Value::Null; 9 * NODES];
        store[offsets[h as usize] + after] = Value::Hist(hist.into());
        let mut prev = 0;
        for (x, lin) in listed {
            store[offsets[nv.next as usize] + prev] = Value::Int(*x as i64);
            store[offsets[l as usize] + x] = Value::Lin(lin.clone().into());
            prev = *x;
        }
        let ctx = AtomicCtx {
            store: &store,
            offsets: &offsets,
            lens: &lens,
            base: 0,
            pid: 0,
            n: 2,
            k: 3,
            method: "deq",
            arg: Val::Unit,
            spec: &spec,
        };
        gen_lin(&ctx, nv, h, l, after)
            .unwrap()
            .into_iter()
            .map(|o| match o.ret {
                Value::Lin(l) => l
                    .iter()
                    .map(|o| format!("{}:{o}", o.oid))
                    .collect::<Vec<_>>()
                    .join(" "),
                other => panic!("genLin returned {other:?}"),
            })
            .collect()
    }

    fn op(oid: u32, method: &'static str, arg: Val, ret: Val) -> OpRecord {
        OpRecord {
            oid,
            pid: 1,
            method,
            arg,
            ret: Some(ret),
        }
    }

    #[test]
    fn lone_completed_enqueue() {
        let hist = vec![
            (Action::call(1, "enq", Val::Int(1)), 1),
            (Action::ret(1, "enq", Val::Ack), 1),
        ];
        assert_eq!(
            gen(hist, 1, &[]),
            BTreeSet::from(["1:enq(1)⇒ack".to_string()])
        );
    }

    #[test]
    fn concurrent_pending_enqueue_may_be_included() {
        let hist = vec![
            (Action::call(2, "enq", Val::Int(2)), 2),
            (Action::call(1, "deq", Val::Unit), 1),
        ];
        let expected: BTreeSet<String> = [
            "1:deq()⇒empty",
            "1:deq()⇒empty 2:enq(2)⇒ack",
            "2:enq(2)⇒ack 1:deq()⇒2",
        ]
        .map(String::from)
        .into();
        assert_eq!(gen(hist, 1, &[]), expected);
    }

    #[test]
    fn listed_return_values_are_kept() {
        // Node 2 (a dequeue) is already listed with result empty.
        let hist = vec![
            (Action::call(2, "deq", Val::Unit), 2),
            (Action::call(1, "enq", Val::Int(1)), 1),
        ];
        let listed = [(2, vec![op(2, "deq", Val::Unit, Val::Empty)])];
        assert_eq!(
            gen(hist, 1, &listed),
            BTreeSet::from(["2:deq()⇒empty 1:enq(1)⇒ack".to_string()])
        );
    }
}
