//! The Herlihy-Wing queue, a simplified time-stamped queue, and relation
//! guides for checking that the first is simulated by the time-stamped queue
//! and by the universal queue.

use std::sync::Arc;

use crate::lts::Val;
use crate::objects::{
    ex, goto, when, AtomicObj, Command, Config, Dim, Expr, Loc, Outcome, Program, ProgramBuilder,
    Semantics, Value,
};
use crate::{Error, Result};

/// Herlihy-Wing queue. `Q` has one slot per call (slot 0 unused), which is
/// enough because at most `k` enqueues reserve indices `1..=k`.
pub fn build_hwq() -> Result<Program> {
    let mut b = ProgramBuilder::new("hwq");
    let x = b.var("X", Dim::One, Value::Int(1));
    let q = b.var("Q", Dim::PerCall, Value::Bot);
    let i = b.reg("i");
    let l = b.reg("l");
    let j = b.reg("j");
    let xv = b.reg("x");
    b.method("enq", |m| {
        m.ins(
            "E1",
            Command::GetAndInc {
                loc: Loc::var(x),
                dst: i,
            },
            vec![],
        );
        m.ins(
            "E2",
            Command::Write {
                loc: Loc::at(q, ex::r(i)),
                val: Expr::Arg,
            },
            vec![],
        );
        m.ins("E3", Command::Return(ex::val(Val::Ack)), vec![]);
    })?;
    b.method("deq", |m| {
        m.ins(
            "D1",
            Command::Read {
                loc: Loc::var(x),
                dst: l,
            },
            vec![],
        );
        m.ins(
            "D2",
            Command::Skip,
            vec![
                when(ex::eq(ex::r(l), ex::int(1)), "D1"),
                goto("D3").set(j, ex::int(1)),
            ],
        );
        m.ins(
            "D3",
            Command::Swap {
                loc: Loc::at(q, ex::r(j)),
                val: ex::c(Value::Bot),
                dst: xv,
            },
            vec![
                when(ex::ne(ex::r(xv), ex::c(Value::Bot)), "D4"),
                when(ex::eq(ex::r(j), ex::sub(ex::r(l), ex::int(1))), "D1"),
                goto("D3").set(j, ex::add(ex::r(j), ex::int(1))),
            ],
        );
        m.ins("D4", Command::Return(ex::r(xv)), vec![]);
    })?;
    b.build()
}

/// Time-stamped queue with integer timestamps from one shared counter.
///
/// Each process owns a pool of `k` nodes `(value, timestamp, taken)`. An
/// enqueue appends `(a, ⊤)` to its own pool, draws a timestamp and publishes
/// it. A dequeue draws a start timestamp, reads the oldest untaken node of
/// every pool, and tries to take the one with the smallest timestamp below
/// its start. If no candidate is found and every pool looked empty, a second
/// round that finds all pools still empty with unchanged sizes returns
/// `empty`. Otherwise the dequeue scans again, drawing a new start timestamp
/// only if the last scan saw a node published after the current one; retrying
/// with the same start while nodes are unpublished keeps the counter bounded.
pub fn build_tsq() -> Result<Program> {
    let mut b = ProgramBuilder::new("tsq");
    let counter = b.var("counter", Dim::One, Value::Int(1));
    let val = b.var("pool.val", Dim::PerProcCall, Value::Null);
    let ts = b.var("pool.ts", Dim::PerProcCall, Value::Null);
    let taken = b.var("pool.taken", Dim::PerProcCall, Value::Bool(false));
    let top = b.var("pool.top", Dim::PerProc, Value::Int(0));

    let node = b.reg("node");
    let tsr = b.reg("ts");
    let start = b.reg("start");
    let q = b.reg("q");
    let r = b.reg("r");
    let best = b.reg("best");
    let bestts = b.reg("bestts");
    let bestval = b.reg("bestval");
    let empty = b.reg("empty");
    let tsum = b.reg("tsum");
    let prev = b.reg("prev");
    let fresh = b.reg("fresh");
    let ok = b.reg("ok");

    let insert = AtomicObj {
        name: "insert",
        f: Arc::new(move |ctx, _| {
            let idx = ctx.get(top, ctx.pid)?.index()?;
            if idx >= ctx.k {
                return Err(Error::IllFormedProgram("pool overflow".into()));
            }
            let at = ctx.pid * ctx.k + idx;
            Ok(vec![Outcome {
                ret: Value::Int(at as i64),
                writes: vec![
                    (val, at, Value::Data(ctx.arg)),
                    (ts, at, Value::Top),
                    (top, ctx.pid, Value::Int(idx as i64 + 1)),
                ],
            }])
        }),
    };
    // (node, timestamp, value, pool size) of the oldest untaken node of pool
    // `args[0]`, or (null, null, null, size).
    let peek = AtomicObj {
        name: "peek",
        f: Arc::new(move |ctx, args| {
            let p = args[0].index()?;
            let size = ctx.get(top, p)?.index()?;
            let mut found = Value::tuple(vec![
                Value::Null,
                Value::Null,
                Value::Null,
                Value::Int(size as i64),
            ]);
            for idx in 0..size {
                let at = p * ctx.k + idx;
                if *ctx.get(taken, at)? == Value::Bool(false) {
                    found = Value::tuple(vec![
                        Value::Int(at as i64),
                        ctx.get(ts, at)?.clone(),
                        ctx.get(val, at)?.clone(),
                        Value::Int(size as i64),
                    ]);
                    break;
                }
            }
            Ok(vec![Outcome {
                ret: found,
                writes: Vec::new(),
            }])
        }),
    };

    b.method("enq", |m| {
        m.ins(
            "T1",
            Command::Atomic {
                obj: insert,
                args: vec![],
                dst: Some(node),
                var_base: 0,
            },
            vec![],
        );
        m.ins(
            "T2",
            Command::GetAndInc {
                loc: Loc::var(counter),
                dst: tsr,
            },
            vec![],
        );
        m.ins(
            "T3",
            Command::Write {
                loc: Loc::at(ts, ex::r(node)),
                val: ex::r(tsr),
            },
            vec![],
        );
        m.ins("T4", Command::Return(ex::val(Val::Ack)), vec![]);
    })?;

    let fresh_round = |arm: crate::objects::ArmSpec| {
        arm.set(q, ex::int(0))
            .set(best, ex::c(Value::Null))
            .set(bestts, ex::c(Value::Top))
            .set(bestval, ex::c(Value::Null))
            .set(empty, ex::bool(true))
            .set(fresh, ex::bool(false))
            .set(tsum, ex::int(0))
    };
    let rf = |i| ex::field(ex::r(r), i);
    let candidate = ex::and(
        ex::ne(rf(0), ex::c(Value::Null)),
        ex::and(ex::lt(rf(1), ex::r(start)), ex::lt(rf(1), ex::r(bestts))),
    );
    let newer = ex::and(
        ex::ne(rf(0), ex::c(Value::Null)),
        ex::and(
            ex::ne(rf(1), ex::c(Value::Top)),
            ex::not(ex::lt(rf(1), ex::r(start))),
        ),
    );
    let update = |arm: crate::objects::ArmSpec| {
        arm.set(best, ex::ite(candidate.clone(), rf(0), ex::r(best)))
            .set(bestts, ex::ite(candidate.clone(), rf(1), ex::r(bestts)))
            .set(bestval, ex::ite(candidate.clone(), rf(2), ex::r(bestval)))
            .set(
                empty,
                ex::and(ex::r(empty), ex::eq(rf(0), ex::c(Value::Null))),
            )
            .set(tsum, ex::add(ex::r(tsum), rf(3)))
            .set(fresh, ex::or(ex::r(fresh), newer.clone()))
    };
    b.method("deq", |m| {
        m.ins(
            "S1",
            Command::GetAndInc {
                loc: Loc::var(counter),
                dst: start,
            },
            vec![fresh_round(goto("S2")).set(prev, ex::c(Value::Null))],
        );
        m.ins(
            "S2",
            Command::Atomic {
                obj: peek,
                args: vec![ex::r(q)],
                dst: Some(r),
                var_base: 0,
            },
            vec![
                update(when(ex::lt(ex::add(ex::r(q), ex::int(1)), Expr::N), "S2"))
                    .set(q, ex::add(ex::r(q), ex::int(1))),
                update(goto("S3")),
            ],
        );
        m.ins(
            "S3",
            Command::Skip,
            vec![
                when(ex::ne(ex::r(best), ex::c(Value::Null)), "S4"),
                when(
                    ex::and(ex::r(empty), ex::eq(ex::r(prev), ex::r(tsum))),
                    "S6",
                ),
                fresh_round(when(ex::r(empty), "S2")).set(prev, ex::r(tsum)),
                when(ex::r(fresh), "S1"),
                fresh_round(goto("S2")).set(prev, ex::c(Value::Null)),
            ],
        );
        m.ins(
            "S4",
            Command::Cas {
                loc: Loc::at(taken, ex::r(best)),
                old: ex::bool(false),
                new: ex::bool(true),
                dst: Some(ok),
            },
            vec![when(ex::r(ok), "S5"), goto("S1")],
        );
        m.ins("S5", Command::Return(ex::r(bestval)), vec![]);
        m.ins("S6", Command::Return(ex::val(Val::Empty)), vec![]);
    })?;
    b.build()
}

fn data(v: &Value) -> Option<Val> {
    match v {
        Value::Data(d) => Some(*d),
        _ => None,
    }
}

/// Candidate simulation relation between a Herlihy-Wing configuration and a
/// time-stamped queue configuration.
///
/// Control: an enqueuer before E1 is before or at its timestamp draw (T1,
/// T2); at E2 it has drawn a timestamp but not published it (T3); at E3 it
/// has published (T4). A dequeuer about to return `x` (D4) has taken a node
/// holding `x` (S5); otherwise it has not committed (S1–S4).
///
/// Data: the values in `Q` together with the values reserved but not yet
/// written, read in index order, equal the untaken timestamped nodes read in
/// timestamp order, where an unpublished node counts with the timestamp its
/// enqueuer holds.
pub fn hwq_tsq_related(hs: &Semantics, h: &Config, ts: &Semantics, t: &Config) -> bool {
    let n = hs.n.min(ts.n);
    let mut hseq: Vec<(i64, Val)> = Vec::new();
    let qlen = hs.var_len("Q").unwrap_or(0);
    for idx in 0..qlen {
        if let Some(v) = hs.read(h, "Q", idx).as_ref().and_then(data) {
            hseq.push((idx as i64, v));
        }
    }
    let mut tseq: Vec<(i64, Val)> = Vec::new();
    for p in 0..n {
        let hl = hs.label(h, p);
        let tl = ts.label(t, p);
        let control_ok = match (hl, tl) {
            (None, None) => true,
            (Some("E1"), Some("T1" | "T2")) => true,
            (Some("E2"), Some("T3")) => {
                let (Some(Value::Int(i)), Some(Value::Data(v))) = (
                    hs.reg(h, p, "i"),
                    hs.pending_invocation(h, p).map(|(_, a)| Value::Data(a)),
                ) else {
                    return false;
                };
                hseq.push((i, v));
                true
            }
            (Some("E3"), Some("T4")) => true,
            (Some("D4"), Some("S5")) => hs.reg(h, p, "x") == ts.reg(t, p, "bestval"),
            (Some("D1" | "D2" | "D3"), Some("S1" | "S2" | "S3" | "S4")) => true,
            _ => false,
        };
        if !control_ok {
            return false;
        }
    }
    let size = ts.var_len("pool.ts").unwrap_or(0);
    let k = ts.k.max(1);
    for at in 0..size {
        let owner = at / k;
        let top = ts
            .read(t, "pool.top", owner)
            .and_then(|v| v.index().ok())
            .unwrap_or(0);
        if at % k >= top || ts.read(t, "pool.taken", at) != Some(Value::Bool(false)) {
            continue;
        }
        let Some(v) = ts.read(t, "pool.val", at).as_ref().and_then(data) else {
            return false;
        };
        let stamp = match ts.read(t, "pool.ts", at) {
            Some(Value::Int(s)) => s,
            Some(Value::Top) => match ts.reg(t, owner, "ts") {
                // Only the owner's latest node can be unpublished.
                Some(Value::Int(s)) if ts.label(t, owner) == Some("T3") => s,
                _ => continue,
            },
            _ => return false,
        };
        tseq.push((stamp, v));
    }
    hseq.sort();
    tseq.sort();
    hseq.len() == tseq.len() && hseq.iter().zip(&tseq).all(|(a, b)| a.1 == b.1)
}

/// Candidate simulation relation between a Herlihy-Wing configuration and a
/// universal-queue configuration, built from control and data requirements.
///
/// The checked conditions are:
/// - an idle queue process is idle in the universal object, and a pending one
///   has recorded its call and not yet its return, unless it is about to
///   return or has not taken its first step;
/// - the universal process may only be about to return (`return`) while the
///   queue process is at E3 or D4, and then with the same value;
/// - a dequeuer that has swapped out `x` (D4) and whose node already carries
///   a linearization is linearized there with return value `x`.
pub fn hwq_u_related(hs: &Semantics, h: &Config, us: &Semantics, u: &Config) -> bool {
    let n = hs.n.min(us.n);
    for p in 0..n {
        let hl = hs.label(h, p);
        let ul = us.label(u, p);
        match (hl, ul) {
            (None, None) => continue,
            (None, Some(_)) | (Some(_), None) => return false,
            (Some(hl), Some(ul)) => {
                if matches!(ul, "genID" | "storeCall") && !matches!(hl, "E1" | "D1") {
                    return false;
                }
                let expected = match hl {
                    "E3" => Some(Value::Data(Val::Ack)),
                    "D4" => hs.reg(h, p, "x"),
                    _ => None,
                };
                if (ul == "return" || ul == "storeReturn")
                    && (expected.is_none() || us.reg(u, p, "b") != expected) {
                        return false;
                    }
                if hl == "D4" {
                    if let Some(Value::Int(oid)) = us.reg(u, p, "oid") {
                        if let Some(Value::Lin(l)) = us.read(u, "node.lin", oid as usize) {
                            let r = l.iter().find(|o| o.oid == oid as u32).and_then(|o| o.ret);
                            if r.map(Value::Data) != expected {
                                return false;
                            }
                        }
                    }
                }
            }
        }
    }
    true
}

/// Named relation guides accepted by the command line.
pub const GUIDES: [&str; 2] = ["hwq-tsq", "hwq-u"];

/// A guide as a predicate over left and right configurations.
pub type GuideFn = Box<dyn Fn(&Config, &Config) -> bool + Sync + Send>;

pub fn guide_by_name(name: &str, left: &Semantics, right: &Semantics) -> Result<GuideFn> {
    let (l, r) = (left.clone(), right.clone());
    match name {
        "hwq-tsq" => Ok(Box::new(move |h, t| hwq_tsq_related(&l, h, &r, t))),
        "hwq-u" => Ok(Box::new(move |h, u| hwq_u_related(&l, h, &r, u))),
        other => Err(Error::UnknownGuide(other.to_string())),
    }
}
