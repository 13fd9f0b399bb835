//! Command-line front end. Every command prints a JSON report with a
//! `"schema": 1` field and exits 0 when the checked property holds, 1 when it
//! is refuted and 2 on any error (budget exhausted, unknown name, ...).

use std::fmt::Write as _;
use std::path::PathBuf;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value as Json};

use crate::casestudies::{guide_by_name, GUIDES};
use crate::histories::{
    check_object_linearizable, check_strong_linearizability, LinVerdict, StrongOutcome, TraceTree,
};
use crate::lattice::{check_order_claims, queue_claims, OrderClaim};
use crate::lts::{
    check_simulation_graphs, explore, lazy_no_weak_match, Bound, Counterexample, ReachGraph,
    SimOutcome, StateEncode,
};
use crate::objects::{
    build_object, classify_liveness, object_names, Config, Liveness, Semantics, MUTATIONS,
};
use crate::seqspec::{default_values, spec_by_name, SeqSpec, SPEC_NAMES};
use crate::{Error, Result};

#[derive(Parser, Debug)]
#[command(
    name = "linsim",
    version,
    about = "Bounded checks for concurrent objects"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Check that every history of the object is linearizable.
    CheckLin {
        #[arg(long)]
        object: String,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Check that the left object is simulated by the right one.
    CheckSim {
        #[arg(long)]
        left: String,
        #[arg(long)]
        right: String,
        /// Restrict candidate pairs with a named relation.
        #[arg(long)]
        guide: Option<String>,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Check strong linearizability.
    CheckStrong {
        #[arg(long)]
        object: String,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Check wait-, lock- or obstruction-freedom on the explored graph.
    CheckLiveness {
        #[arg(long)]
        object: String,
        /// wf, lf or of; all three when omitted.
        #[arg(long)]
        property: Option<Liveness>,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Decide the simulation order between objects.
    OrderMatrix {
        /// Objects to compare (repeatable); defaults to the queue case study.
        #[arg(long = "object")]
        objects: Vec<String>,
        /// Also write the order diagram in DOT format.
        #[arg(long)]
        dot: Option<PathBuf>,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Print the explored state graph.
    Dump {
        #[arg(long)]
        object: String,
        /// Also write the graph in DOT format.
        #[arg(long)]
        dot: Option<PathBuf>,
        #[command(flatten)]
        run: RunArgs,
    },
    /// List objects, mutations, specifications and guides.
    ListObjects,
}

#[derive(Args, Debug, Clone)]
pub struct RunArgs {
    #[arg(long, default_value = "queue")]
    pub spec: String,
    #[arg(long, default_value_t = 2)]
    pub n: usize,
    /// Maximum number of calls per trace.
    #[arg(long, default_value_t = 2)]
    pub max_ops: usize,
    /// Maximum number of consecutive internal steps.
    #[arg(long, default_value_t = Bound::DEFAULT_INTERNAL_BUDGET)]
    pub internal_budget: usize,
    /// Maximum number of explored states per object.
    #[arg(long, default_value_t = Bound::DEFAULT_STATE_CEILING)]
    pub state_ceiling: usize,
    /// Write the full report here instead of printing it.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

impl RunArgs {
    fn bound(&self) -> Result<Bound> {
        if self.n == 0 || self.max_ops == 0 || self.internal_budget == 0 || self.state_ceiling == 0
        {
            return Err(Error::IllFormedProgram(
                "all bounds must be positive".into(),
            ));
        }
        Ok(Bound::calls(self.max_ops)
            .with_internal_budget(self.internal_budget)
            .with_ceiling(self.state_ceiling))
    }

    fn spec(&self) -> Result<SeqSpec> {
        spec_by_name(&self.spec, &default_values())
    }

    fn config(&self) -> Json {
        json!({
            "spec": self.spec,
            "n": self.n,
            "max_ops": self.max_ops,
            "internal_budget": self.internal_budget,
            "state_ceiling": self.state_ceiling,
        })
    }
}

/// What a command produced: the exit code and the report.
pub struct Report {
    pub code: i32,
    pub json: Json,
    /// Extra artifacts to write, `(path, contents)`.
    pub files: Vec<(PathBuf, String)>,
}

fn semantics(name: &str, run: &RunArgs) -> Result<Semantics> {
    let spec = run.spec()?;
    let prog = Arc::new(build_object(name, &spec)?);
    Semantics::new(prog, &spec, run.n, run.max_ops)
}

fn graph(name: &str, run: &RunArgs) -> Result<(Semantics, ReachGraph<Config>)> {
    let sem = semantics(name, run)?;
    let g = explore(&sem, run.bound()?)?;
    Ok((sem, g))
}

fn base(command: &str, run: &RunArgs) -> serde_json::Map<String, Json> {
    let mut m = serde_json::Map::new();
    m.insert("schema".into(), json!(1));
    m.insert("command".into(), json!(command));
    m.insert("config".into(), run.config());
    m
}

fn exit_for(holds: bool) -> i32 {
    if holds {
        0
    } else {
        1
    }
}

pub fn cmd_check_lin(object: &str, run: &RunArgs) -> Result<Report> {
    let (sem, g) = graph(object, run)?;
    g.require_complete()?;
    let verdict = check_object_linearizable(&g, &sem.spec)?;
    let mut m = base("check-lin", run);
    m.insert("object".into(), json!(object));
    m.insert("states".into(), json!(g.len()));
    let code = exit_for(verdict.is_ok());
    match verdict {
        LinVerdict::Linearizable { histories } => {
            m.insert("linearizable".into(), json!(true));
            m.insert("histories".into(), json!(histories));
        }
        LinVerdict::Counterexample { trace, history } => {
            m.insert("linearizable".into(), json!(false));
            m.insert("trace".into(), json!(trace));
            m.insert("history".into(), history.to_json());
        }
    }
    Ok(Report {
        code,
        json: Json::Object(m),
        files: Vec::new(),
    })
}

pub fn cmd_check_sim(
    left: &str,
    right: &str,
    guide: Option<&str>,
    run: &RunArgs,
) -> Result<Report> {
    let (ls, lg) = graph(left, run)?;
    if guide.is_none() {
        if let Some(report) = refute_by_trace(left, right, &lg, run)? {
            return Ok(report);
        }
    }
    let (rs, rg) = graph(right, run)?;
    let outcome = match guide {
        None => check_simulation_graphs(&lg, &rg, None)?,
        Some(name) => {
            let g = guide_by_name(name, &ls, &rs)?;
            check_simulation_graphs(&lg, &rg, Some(&*g))?
        }
    };
    let mut m = base("check-sim", run);
    m.insert("left".into(), json!(left));
    m.insert("right".into(), json!(right));
    m.insert("guide".into(), json!(guide));
    m.insert(
        "states".into(),
        json!({"left": lg.len(), "right": rg.len()}),
    );
    m.insert("simulates".into(), json!(outcome.holds()));
    match &outcome {
        SimOutcome::Witness(w) => {
            m.insert("witness".into(), w.to_json());
        }
        SimOutcome::Counterexample(c) => {
            m.insert("counterexample".into(), c.to_json());
        }
    }
    Ok(Report {
        code: exit_for(outcome.holds()),
        json: Json::Object(m),
        files: Vec::new(),
    })
}

/// Tries a non-linearizable trace of `left` against `right` before the full
/// game is built: if `right` cannot produce the same calls and returns,
/// simulation fails without exploring all of `right`.
fn refute_by_trace(
    left: &str,
    right: &str,
    lg: &ReachGraph<Config>,
    run: &RunArgs,
) -> Result<Option<Report>> {
    let spec = run.spec()?;
    let LinVerdict::Counterexample { trace, .. } = check_object_linearizable(lg, &spec)? else {
        return Ok(None);
    };
    let rs = semantics(right, run)?;
    if !lazy_no_weak_match(&trace, &rs, run.bound()?.state_ceiling)? {
        return Ok(None);
    }
    let cex = Counterexample {
        left_path: trace,
        right_path: Vec::new(),
        trace_level: true,
    };
    let mut m = base("check-sim", run);
    m.insert("left".into(), json!(left));
    m.insert("right".into(), json!(right));
    m.insert("guide".into(), Json::Null);
    m.insert(
        "states".into(),
        json!({"left": lg.len(), "right": Json::Null}),
    );
    m.insert("simulates".into(), json!(false));
    m.insert("counterexample".into(), cex.to_json());
    Ok(Some(Report {
        code: exit_for(false),
        json: Json::Object(m),
        files: Vec::new(),
    }))
}

pub fn cmd_check_strong(object: &str, run: &RunArgs) -> Result<Report> {
    let (sem, g) = graph(object, run)?;
    let tree = TraceTree::from_graph(&g)?;
    let outcome = check_strong_linearizability(&tree, &sem.spec);
    let mut m = base("check-strong", run);
    m.insert("object".into(), json!(object));
    m.insert("states".into(), json!(g.len()));
    m.insert("tree_nodes".into(), json!(tree.len()));
    m.insert("strongly_linearizable".into(), json!(outcome.holds()));
    if let StrongOutcome::NoFunction(w) = &outcome {
        m.insert("witness".into(), w.to_json());
    }
    Ok(Report {
        code: exit_for(outcome.holds()),
        json: Json::Object(m),
        files: Vec::new(),
    })
}

pub fn cmd_check_liveness(
    object: &str,
    property: Option<Liveness>,
    run: &RunArgs,
) -> Result<Report> {
    let (_, g) = graph(object, run)?;
    let kinds = property.map_or(Liveness::ALL.to_vec(), |p| vec![p]);
    let mut results = serde_json::Map::new();
    let mut all = true;
    for k in kinds {
        let v = classify_liveness(&g, k)?;
        all &= v.holds();
        results.insert(k.short().into(), v.to_json());
    }
    let mut m = base("check-liveness", run);
    m.insert("object".into(), json!(object));
    m.insert("states".into(), json!(g.len()));
    m.insert("properties".into(), Json::Object(results));
    Ok(Report {
        code: exit_for(all),
        json: Json::Object(m),
        files: Vec::new(),
    })
}

pub fn default_order_objects() -> Vec<String> {
    [
        "d_spec",
        "a_spec",
        "atomic",
        "hwq",
        "tsq",
        "glb(hwq,tsq)",
        "lub(hwq,tsq)",
        "u_spec",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect()
}

pub fn cmd_order_matrix(objects: &[String], dot: Option<PathBuf>, run: &RunArgs) -> Result<Report> {
    let spec = run.spec()?;
    let (objects, claims): (Vec<String>, Vec<OrderClaim>) = if objects.is_empty() {
        (
            default_order_objects(),
            if spec.name == "queue" {
                queue_claims()
            } else {
                Vec::new()
            },
        )
    } else {
        (objects.to_vec(), Vec::new())
    };
    let report = check_order_claims(&objects, &claims, &spec, run.n, run.bound()?)?;
    let mut m = base("order-matrix", run);
    if let Json::Object(r) = report.to_json() {
        for (k, v) in r {
            m.entry(k).or_insert(v);
        }
    }
    let files = dot.map(|p| vec![(p, report.to_dot())]).unwrap_or_default();
    Ok(Report {
        code: exit_for(report.all_claims_ok()),
        json: Json::Object(m),
        files,
    })
}

fn graph_dot<S: StateEncode>(g: &ReachGraph<S>) -> String {
    let mut out = String::from("digraph lts {\n  n0 [shape=doublecircle];\n");
    for (s, edges) in g.succ.iter().enumerate() {
        for (a, t) in edges {
            let _ = writeln!(out, "  n{s} -> n{t} [label=\"{a}\"];");
        }
    }
    out.push_str("}\n");
    out
}

pub fn cmd_dump(object: &str, dot: Option<PathBuf>, run: &RunArgs) -> Result<Report> {
    let (_, g) = graph(object, run)?;
    let mut m = base("dump", run);
    m.insert("object".into(), json!(object));
    m.insert("graph".into(), g.to_json());
    let files = dot.map(|p| vec![(p, graph_dot(&g))]).unwrap_or_default();
    Ok(Report {
        code: 0,
        json: Json::Object(m),
        files,
    })
}

pub fn cmd_list_objects() -> Report {
    let json = json!({
        "schema": 1,
        "command": "list-objects",
        "objects": object_names(),
        "combinators": ["lub(x,y)", "glb(x,y)"],
        "mutations": MUTATIONS,
        "specs": SPEC_NAMES,
        "guides": GUIDES,
    });
    Report {
        code: 0,
        json,
        files: Vec::new(),
    }
}

/// Runs a parsed command line and returns the exit code.
pub fn run(cli: Cli) -> i32 {
    let (report, out) = match &cli.command {
        Command::CheckLin { object, run } => (cmd_check_lin(object, run), run.out.clone()),
        Command::CheckSim {
            left,
            right,
            guide,
            run,
        } => (
            cmd_check_sim(left, right, guide.as_deref(), run),
            run.out.clone(),
        ),
        Command::CheckStrong { object, run } => (cmd_check_strong(object, run), run.out.clone()),
        Command::CheckLiveness {
            object,
            property,
            run,
        } => (cmd_check_liveness(object, *property, run), run.out.clone()),
        Command::OrderMatrix { objects, dot, run } => {
            (cmd_order_matrix(objects, dot.clone(), run), run.out.clone())
        }
        Command::Dump { object, dot, run } => (cmd_dump(object, dot.clone(), run), run.out.clone()),
        Command::ListObjects => (Ok(cmd_list_objects()), None),
    };
    let report = match report {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e}");
            let json = json!({"schema": 1, "error": e.to_string()});
            println!("{json}");
            return 2;
        }
    };
    let text = serde_json::to_string_pretty(&report.json).expect("reports serialize");
    let mut files = report.files;
    match out {
        Some(p) => files.push((p, text + "\n")),
        None => println!("{text}"),
    }
    for (path, contents) in files {
        if let Err(e) = std::fs::write(&path, contents) {
            eprintln!("error: cannot write {}: {e}", path.display());
            return 2;
        }
    }
    report.code
}
