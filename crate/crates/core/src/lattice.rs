//! Least upper and greatest lower bounds of two objects, and checking a set
//! of objects against the simulation order.

use std::collections::BTreeSet;
use std::sync::Arc;

use rayon::prelude::*;
use serde_json::{json, Value as Json};

use crate::lts::{
    check_simulation_reduced, identity_witness, quotient, validate_witness, Bound, Quotient,
    ReachGraph, SimOutcome,
};
use crate::objects::{
    build_object, ex, intern, Arm, Command, Config, Dim, Expr, Instr, Loc, Pc, Program, RegDecl,
    RegId, Value, VarDecl, VarId,
};
use crate::seqspec::SeqSpec;
use crate::{Error, Result};

/// A copy of `p` with every variable, register and position shifted and
/// every label prefixed, ready to be placed at `pc_off` in a larger program.
struct Relocated {
    vars: Vec<VarDecl>,
    regs: Vec<RegDecl>,
    code: Vec<Instr>,
    methods: Vec<(&'static str, Pc)>,
}

fn relocate(p: &Program, prefix: &str, var_off: VarId, reg_off: RegId, pc_off: Pc) -> Relocated {
    let reg = move |r: RegId| r + reg_off;
    let expr = |e: &Expr| {
        let mut e = e.clone();
        e.map_regs(&reg);
        e
    };
    let loc = |l: &Loc| Loc {
        var: l.var + var_off,
        index: l.index.as_ref().map(expr),
    };
    let code = p
        .code
        .iter()
        .map(|ins| {
            let cmd = match &ins.cmd {
                Command::Skip => Command::Skip,
                Command::Read { loc: l, dst } => Command::Read {
                    loc: loc(l),
                    dst: reg(*dst),
                },
                Command::Write { loc: l, val } => Command::Write {
                    loc: loc(l),
                    val: expr(val),
                },
                Command::Cas {
                    loc: l,
                    old,
                    new,
                    dst,
                } => Command::Cas {
                    loc: loc(l),
                    old: expr(old),
                    new: expr(new),
                    dst: dst.map(reg),
                },
                Command::GetAndInc { loc: l, dst } => Command::GetAndInc {
                    loc: loc(l),
                    dst: reg(*dst),
                },
                Command::Swap { loc: l, val, dst } => Command::Swap {
                    loc: loc(l),
                    val: expr(val),
                    dst: reg(*dst),
                },
                Command::Nondet { choices, dst } => Command::Nondet {
                    choices: choices.iter().map(expr).collect(),
                    dst: reg(*dst),
                },
                Command::GetPid { dst } => Command::GetPid { dst: reg(*dst) },
                Command::Return(e) => Command::Return(expr(e)),
                Command::Atomic {
                    obj,
                    args,
                    dst,
                    var_base,
                } => Command::Atomic {
                    obj: obj.clone(),
                    args: args.iter().map(expr).collect(),
                    dst: dst.map(reg),
                    var_base: var_base + var_off,
                },
                Command::Par { left, right } => Command::Par {
                    left: left + pc_off,
                    right: right + pc_off,
                },
                Command::Join => Command::Join,
            };
            let arms = ins
                .arms
                .iter()
                .map(|a| Arm {
                    cond: a.cond.as_ref().map(expr),
                    assigns: a.assigns.iter().map(|(r, e)| (reg(*r), expr(e))).collect(),
                    target: a.target + pc_off,
                })
                .collect();
            Instr {
                label: intern(&format!("{prefix}.{}", ins.label)),
                cmd,
                arms,
            }
        })
        .collect();
    let vars = p
        .vars
        .iter()
        .map(|v| VarDecl {
            name: format!("{prefix}.{}", v.name),
            ..v.clone()
        })
        .collect();
    let regs = p
        .regs
        .iter()
        .map(|r| RegDecl {
            name: format!("{prefix}.{}", r.name),
            ..r.clone()
        })
        .collect();
    let methods = p.methods.iter().map(|&(m, pc)| (m, pc + pc_off)).collect();
    Relocated {
        vars,
        regs,
        code,
        methods,
    }
}

fn check_alphabets(o1: &Program, o2: &Program) -> Result<Vec<&'static str>> {
    let a: BTreeSet<_> = o1.method_names().into_iter().collect();
    let b: BTreeSet<_> = o2.method_names().into_iter().collect();
    if a != b {
        return Err(Error::AlphabetMismatch(format!(
            "{} has methods {:?}, {} has {:?}",
            o1.name, a, o2.name, b
        )));
    }
    Ok(o1.method_names())
}

fn entry(r: &Relocated, m: &str) -> Pc {
    r.methods
        .iter()
        .find(|(x, _)| *x == m)
        .map(|&(_, pc)| pc)
        .expect("alphabets checked")
}

fn arm(cond: Option<Expr>, target: usize) -> Arm {
    Arm {
        cond,
        assigns: Vec::new(),
        target: target as Pc,
    }
}

/// The object that, on the first method call by any process, commits once and
/// for all to behaving as `o1` or as `o2`.
///
/// Every operation reads the shared choice; if unset it draws a bit and tries
/// to install it with a compare-and-swap (possibly losing to another process),
/// then reads the choice again and continues in the chosen object.
pub fn build_lub(o1: &Program, o2: &Program) -> Result<Program> {
    let methods = check_alphabets(o1, o2)?;
    let r1 = relocate(o1, "o1", 1, 1, 0);
    let r2 = relocate(
        o2,
        "o2",
        1 + o1.vars.len() as VarId,
        1 + o1.regs.len() as RegId,
        o1.code.len() as Pc,
    );
    let choice: VarId = 0;
    let c: RegId = 0;
    let mut vars = vec![VarDecl {
        name: "choice".into(),
        dim: Dim::One,
        init: Value::Bot,
        init_at: Vec::new(),
    }];
    let mut regs = vec![RegDecl {
        name: "c".into(),
        init: Value::Null,
        persistent: false,
    }];
    let mut code = Vec::new();
    vars.extend(r1.vars.iter().cloned());
    vars.extend(r2.vars.iter().cloned());
    regs.extend(r1.regs.iter().cloned());
    regs.extend(r2.regs.iter().cloned());
    code.extend(r1.code.iter().cloned());
    code.extend(r2.code.iter().cloned());
    let mut entries = Vec::new();
    for m in methods {
        let base = code.len();
        entries.push((m, base as Pc));
        code.push(Instr {
            label: "lub.read",
            cmd: Command::Read {
                loc: Loc::var(choice),
                dst: c,
            },
            arms: vec![arm(Some(ex::ne(ex::r(c), ex::c(Value::Bot))), base + 3)],
        });
        code.push(Instr {
            label: "lub.choose",
            cmd: Command::Nondet {
                choices: vec![ex::int(1), ex::int(2)],
                dst: c,
            },
            arms: vec![],
        });
        code.push(Instr {
            label: "lub.cas",
            cmd: Command::Cas {
                loc: Loc::var(choice),
                old: ex::c(Value::Bot),
                new: ex::r(c),
                dst: None,
            },
            arms: vec![],
        });
        code.push(Instr {
            label: "lub.dispatch",
            cmd: Command::Read {
                loc: Loc::var(choice),
                dst: c,
            },
            arms: vec![
                arm(Some(ex::eq(ex::r(c), ex::int(1))), entry(&r1, m) as usize),
                arm(None, entry(&r2, m) as usize),
            ],
        });
    }
    let p = Program {
        name: format!("lub({},{})", o1.name, o2.name),
        vars,
        regs,
        code,
        methods: entries,
    };
    p.validate()?;
    Ok(p)
}

/// The object that runs every operation on both `o1` and `o2` as two
/// interleaved strands of the calling process, returns the common result when
/// the two agree and diverges otherwise.
pub fn build_glb(o1: &Program, o2: &Program) -> Result<Program> {
    let methods = check_alphabets(o1, o2)?;
    let has_par = |p: &Program| {
        p.code
            .iter()
            .any(|i| matches!(i.cmd, Command::Par { .. } | Command::Join))
    };
    if has_par(o1) || has_par(o2) {
        return Err(Error::IllFormedProgram(format!(
            "glb({},{}): operands may not run strands themselves",
            o1.name, o2.name
        )));
    }
    let res1: RegId = 0;
    let res2: RegId = 1;
    // Each copy gets a join instruction appended right after its code.
    let len1 = o1.code.len() + 1;
    let r1 = relocate(o1, "o1", 0, 2, 0);
    let r2 = relocate(
        o2,
        "o2",
        o1.vars.len() as VarId,
        2 + o1.regs.len() as RegId,
        len1 as Pc,
    );
    let mut regs = vec![
        RegDecl {
            name: "r1".into(),
            init: Value::Null,
            persistent: false,
        },
        RegDecl {
            name: "r2".into(),
            init: Value::Null,
            persistent: false,
        },
    ];
    regs.extend(r1.regs.iter().cloned());
    regs.extend(r2.regs.iter().cloned());
    let mut vars = r1.vars.clone();
    vars.extend(r2.vars.iter().cloned());
    let mut code = Vec::new();
    for (r, dst, prefix) in [(&r1, res1, "o1"), (&r2, res2, "o2")] {
        let join = code.len() + r.code.len();
        for ins in &r.code {
            code.push(match &ins.cmd {
                Command::Return(e) => Instr {
                    label: ins.label,
                    cmd: Command::Skip,
                    arms: vec![Arm {
                        cond: None,
                        assigns: vec![(dst, e.clone())],
                        target: join as Pc,
                    }],
                },
                _ => ins.clone(),
            });
        }
        code.push(Instr {
            label: intern(&format!("{prefix}.join")),
            cmd: Command::Join,
            arms: vec![],
        });
    }
    let mut entries = Vec::new();
    for m in methods {
        let base = code.len();
        entries.push((m, base as Pc));
        code.push(Instr {
            label: "glb.par",
            cmd: Command::Par {
                left: entry(&r1, m),
                right: entry(&r2, m),
            },
            arms: vec![],
        });
        code.push(Instr {
            label: "glb.compare",
            cmd: Command::Skip,
            arms: vec![
                arm(Some(ex::eq(ex::r(res1), ex::r(res2))), base + 2),
                arm(None, base + 3),
            ],
        });
        code.push(Instr {
            label: "glb.return",
            cmd: Command::Return(ex::r(res1)),
            arms: vec![],
        });
        code.push(Instr {
            label: "glb.diverge",
            cmd: Command::Skip,
            arms: vec![arm(None, base + 3)],
        });
    }
    let p = Program {
        name: format!("glb({},{})", o1.name, o2.name),
        vars,
        regs,
        code,
        methods: entries,
    };
    p.validate()?;
    Ok(p)
}

/// One expected relationship between two objects of an order matrix.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct OrderClaim {
    pub left: String,
    pub right: String,
    /// Whether `left ≼ right` is expected to hold.
    pub expected: bool,
}

impl OrderClaim {
    pub fn holds(left: &str, right: &str) -> OrderClaim {
        OrderClaim {
            left: left.into(),
            right: right.into(),
            expected: true,
        }
    }

    pub fn fails(left: &str, right: &str) -> OrderClaim {
        OrderClaim {
            left: left.into(),
            right: right.into(),
            expected: false,
        }
    }
}

/// The relationships certified for the queue case study: the divergent
/// object at the bottom, the atomic specification below both queue
/// implementations, their bounds in between, the universal object on top,
/// the atomic specification equivalent to the atomic object, and the
/// universal object not below the classical construction.
pub fn queue_claims() -> Vec<OrderClaim> {
    let lub = "lub(hwq,tsq)";
    let glb = "glb(hwq,tsq)";
    vec![
        OrderClaim::holds("d_spec", "a_spec"),
        OrderClaim::holds("a_spec", "hwq"),
        OrderClaim::holds("a_spec", "tsq"),
        OrderClaim::holds("hwq", lub),
        OrderClaim::holds("tsq", lub),
        OrderClaim::holds(glb, "hwq"),
        OrderClaim::holds(glb, "tsq"),
        OrderClaim::holds("hwq", "u_spec"),
        OrderClaim::holds("tsq", "u_spec"),
        OrderClaim::holds(lub, "u_spec"),
        OrderClaim::holds("a_spec", "atomic"),
        OrderClaim::holds("atomic", "a_spec"),
        OrderClaim::fails("u_spec", "a_spec"),
    ]
}

#[derive(Clone, Debug)]
pub struct ClaimResult {
    pub claim: OrderClaim,
    pub holds: bool,
}

impl ClaimResult {
    pub fn ok(&self) -> bool {
        self.claim.expected == self.holds
    }
}

#[derive(Clone, Debug)]
pub struct OrderReport {
    pub objects: Vec<String>,
    pub states: Vec<usize>,
    /// `matrix[i][j]` is whether `objects[i] ≼ objects[j]`.
    pub matrix: Vec<Vec<bool>>,
    pub claims: Vec<ClaimResult>,
}

impl OrderReport {
    pub fn all_claims_ok(&self) -> bool {
        self.claims.iter().all(ClaimResult::ok)
    }

    pub fn get(&self, left: &str, right: &str) -> Option<bool> {
        let i = self.objects.iter().position(|o| o == left)?;
        let j = self.objects.iter().position(|o| o == right)?;
        Some(self.matrix[i][j])
    }

    pub fn to_json(&self) -> Json {
        let claims: Vec<Json> = self
            .claims
            .iter()
            .map(|c| json!({"left": c.claim.left, "right": c.claim.right, "expected": c.claim.expected, "holds": c.holds}))
            .collect();
        json!({
            "schema": 1,
            "objects": self.objects,
            "states": self.states,
            "matrix": self.matrix,
            "claims": claims,
            "all_claims_ok": self.all_claims_ok(),
        })
    }

    /// Hasse diagram of the preorder: equivalent objects share a node, and
    /// only covering edges are drawn (from smaller to larger).
    pub fn to_dot(&self) -> String {
        let n = self.objects.len();
        let mut class: Vec<usize> = (0..n).collect();
        for i in 0..n {
            for j in 0..i {
                if self.matrix[i][j] && self.matrix[j][i] {
                    class[i] = class[j];
                    break;
                }
            }
        }
        let reps: Vec<usize> = (0..n).filter(|&i| class[i] == i).collect();
        let below = |a: usize, b: usize| a != b && self.matrix[a][b];
        let mut out = String::from("digraph order {\n  rankdir=BT;\n");
        for &r in &reps {
            let names: Vec<&str> = (0..n)
                .filter(|&i| class[i] == r)
                .map(|i| self.objects[i].as_str())
                .collect();
            out.push_str(&format!("  n{r} [label=\"{}\"];\n", names.join(" ≡ ")));
        }
        for &a in &reps {
            for &b in &reps {
                if !below(a, b) || below(b, a) {
                    continue;
                }
                let covered = reps.iter().any(|&c| {
                    c != a && c != b && below(a, c) && below(c, b) && !below(c, a) && !below(b, c)
                });
                if !covered {
                    out.push_str(&format!("  n{a} -> n{b};\n"));
                }
            }
        }
        out.push_str("}\n");
        out
    }
}

/// Explores every object under `bound` and decides `≼` for every ordered
/// pair; the diagonal is certified by the identity witness.
pub fn order_matrix(
    objects: &[String],
    spec: &SeqSpec,
    n: usize,
    bound: Bound,
) -> Result<(Vec<usize>, Vec<Vec<bool>>)> {
    let graphs: Vec<(ReachGraph<Config>, Quotient)> = objects
        .par_iter()
        .map(|name| {
            let prog = Arc::new(build_object(name, spec)?);
            let g = crate::objects::object_graph(&prog, spec, n, bound)?;
            g.require_complete()?;
            let q = quotient(&g);
            Ok((g, q))
        })
        .collect::<Result<_>>()?;
    let m = objects.len();
    let cells: Vec<(usize, usize)> = (0..m).flat_map(|i| (0..m).map(move |j| (i, j))).collect();
    let verdicts: Vec<bool> = cells
        .par_iter()
        .map(|&(i, j)| {
            let ((gl, ql), (gr, qr)) = (&graphs[i], &graphs[j]);
            if i == j {
                Ok(validate_witness(&identity_witness(gl), gl, gl).is_ok())
            } else {
                check_simulation_reduced(gl, ql, gr, qr)
                    .map(|o| matches!(o, SimOutcome::Witness(_)))
            }
        })
        .collect::<Result<_>>()?;
    let matrix = (0..m)
        .map(|i| verdicts[i * m..(i + 1) * m].to_vec())
        .collect();
    Ok((graphs.iter().map(|(g, _)| g.len()).collect(), matrix))
}

/// Computes the order matrix over `objects` plus every object named in
/// `claims`, and evaluates the claims against it.
pub fn check_order_claims(
    objects: &[String],
    claims: &[OrderClaim],
    spec: &SeqSpec,
    n: usize,
    bound: Bound,
) -> Result<OrderReport> {
    let mut all: Vec<String> = objects.to_vec();
    for c in claims {
        for o in [&c.left, &c.right] {
            if !all.contains(o) {
                all.push(o.clone());
            }
        }
    }
    let (states, matrix) = order_matrix(&all, spec, n, bound)?;
    let mut report = OrderReport {
        objects: all,
        states,
        matrix,
        claims: Vec::new(),
    };
    report.claims = claims
        .iter()
        .map(|c| ClaimResult {
            claim: c.clone(),
            holds: report
                .get(&c.left, &c.right)
                .expect("claim objects included"),
        })
        .collect();
    Ok(report)
}
