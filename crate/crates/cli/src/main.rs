// Copyright 2026 The cqa Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

//! `cqa`: classify conjunctive queries and compute range-consistent counts
//! on inconsistent databases.

use std::fmt::Display;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use cqa_core::attack::AttackGraph;
use cqa_core::classify::{classify_with, FuxmanGraph, Violation};
use cqa_core::eval::{
    cqacount_oracle, cqacount_parsimonious, EvalError, OracleOptions, RangeAnswer,
};
use cqa_core::fd::{sequential_proof, FunctionalDependencySet};
use cqa_core::instance::{
    build_3dm_instance, load_bundle, matching_query, parse_triples, save_bundle, InstanceError,
    DEFAULT_REPAIR_CAP,
};
use cqa_core::query::{parse_query, ConjunctiveQuery, VarSet, Variable};

#[derive(Parser)]
#[command(
    name = "cqa",
    version,
    about = "Consistent answers to COUNT queries on databases violating primary keys"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Decide whether a query admits parsimonious counting.
    Classify {
        query: PathBuf,
        #[arg(long)]
        json: bool,
        /// Also print attack witnesses and frozen-variable proofs.
        #[arg(long)]
        explain: bool,
    },
    /// Range-consistent counts per group of free variables.
    Count {
        #[arg(long)]
        db: PathBuf,
        /// Defaults to `query.cq` inside the database directory.
        #[arg(long)]
        query: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = Mode::Parsimonious)]
        mode: Mode,
        /// Largest number of repairs the oracle will enumerate.
        #[arg(long, env = "CQA_CAP", default_value_t = DEFAULT_REPAIR_CAP)]
        cap: u64,
        #[arg(long, default_value_t = 1)]
        threads: usize,
        #[arg(long)]
        json: bool,
    },
    /// Print the attack graph, Fuxman graph or query graph in DOT.
    Graph {
        #[arg(long, value_enum, default_value_t = GraphKind::Attack)]
        kind: GraphKind,
        query: PathBuf,
    },
    /// Closure of a set of variables under the query's functional dependencies.
    Fd {
        query: PathBuf,
        /// Comma- or space-separated variables; empty for the closure of ∅.
        #[arg(long, default_value = "")]
        lhs: String,
        /// Print a sequential proof of `lhs -> rhs`.
        #[arg(long)]
        rhs: Option<String>,
    },
    /// Count and list the repairs of a database.
    Repairs {
        #[arg(long)]
        db: PathBuf,
        #[arg(long)]
        limit: Option<u64>,
    },
    /// Build the database of a 3-dimensional matching instance.
    Gen3dm {
        triples: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Mode {
    Parsimonious,
    Oracle,
    Both,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum GraphKind {
    Attack,
    Fuxman,
    Query,
}

/// A failure with its exit code: 1 for refusals, 2 for bad input.
struct Failure {
    code: u8,
    message: String,
}

fn input_error(message: impl Display) -> Failure {
    Failure {
        code: 2,
        message: message.to_string(),
    }
}

fn refusal(message: impl Display) -> Failure {
    Failure {
        code: 1,
        message: message.to_string(),
    }
}

fn from_eval(e: EvalError) -> Failure {
    match e {
        EvalError::NotInClass(_)
        | EvalError::Cyclic(_)
        | EvalError::Instance(InstanceError::TooManyRepairs { .. }) => refusal(e),
        other => input_error(other),
    }
}

fn read_query(path: &Path) -> Result<ConjunctiveQuery, Failure> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| input_error(format!("{}: {e}", path.display())))?;
    parse_query(&text).map_err(|e| input_error(format!("{}:{e}", path.display())))
}

fn parse_vars(text: &str) -> VarSet {
    text.split(|c: char| c == ',' || c.is_whitespace())
        .filter(|s| !s.is_empty())
        .map(Variable::new)
        .collect()
}

fn names(vs: impl IntoIterator<Item = impl Display>) -> Vec<String> {
    vs.into_iter().map(|v| v.to_string()).collect()
}

fn violation_json(v: &Violation) -> Value {
    json!({ "kind": v.kind(), "atom": v.atom(), "path": v.path() })
}

fn classify(path: &Path, as_json: bool, explain: bool) -> Result<(), Failure> {
    let q = read_query(path)?;
    let g = AttackGraph::of(&q);
    let report = classify_with(&g);
    if as_json {
        let strong: Vec<Value> = report
            .strong_attacks
            .iter()
            .map(|(a, b)| json!({ "from": a, "to": b }))
            .collect();
        let mut out = json!({
            "acyclic": report.acyclic,
            "strong_attacks": strong,
            "id_set": report.id_set.as_ref().map(names),
            "frozen": names(&report.frozen),
            "cparsimony": report.in_cparsimony,
            "cforest": report.in_cforest,
            "violation": report.violation.as_ref().map(violation_json),
        });
        if explain {
            let edges: Vec<Value> = g
                .edges()
                .iter()
                .map(|e| {
                    json!({
                        "from": g.relation(e.from),
                        "to": g.relation(e.to),
                        "kind": format!("{:?}", e.kind).to_lowercase(),
                        "witness": names(&e.witness.path),
                    })
                })
                .collect();
            out["attacks"] = Value::Array(edges);
        }
        println!(
            "{}",
            serde_json::to_string_pretty(&out).expect("serializable")
        );
        return Ok(());
    }
    print!("{report}");
    if explain {
        println!("# attacks");
        for e in g.edges() {
            let kind = format!("{:?}", e.kind).to_lowercase();
            let path = names(&e.witness.path).join(", ");
            println!(
                "{} -> {}\t{kind}\tvia <{path}>",
                g.relation(e.from),
                g.relation(e.to)
            );
        }
        let frozen = cqa_core::attack::frozen_vars_in(&g);
        println!("# frozen");
        for proof in frozen.certificates.values() {
            println!("{proof}");
        }
    }
    Ok(())
}

fn answers_json(answers: &[RangeAnswer]) -> Value {
    Value::Array(
        answers
            .iter()
            .map(|a| json!({ "group": names(&a.group), "m": a.lower, "n": a.upper }))
            .collect(),
    )
}

fn print_answers(answers: &[RangeAnswer]) {
    for a in answers {
        println!("{a}");
    }
}

fn count(
    db_dir: &Path,
    query: Option<PathBuf>,
    mode: Mode,
    cap: u64,
    threads: usize,
    as_json: bool,
) -> Result<(), Failure> {
    let q = read_query(&query.unwrap_or_else(|| db_dir.join("query.cq")))?;
    let db = load_bundle(db_dir).map_err(input_error)?;
    let opts = OracleOptions { cap, threads };
    let oracle = || {
        cqacount_oracle(&q.full(), q.free(), &db, &opts)
            .map(|r| r.answers)
            .map_err(from_eval)
    };
    match mode {
        Mode::Parsimonious | Mode::Oracle => {
            let answers = if mode == Mode::Oracle {
                oracle()?
            } else {
                cqacount_parsimonious(&q, &db).map_err(from_eval)?
            };
            if as_json {
                println!(
                    "{}",
                    serde_json::to_string_pretty(&answers_json(&answers)).expect("serializable")
                );
            } else {
                print_answers(&answers);
            }
            Ok(())
        }
        Mode::Both => {
            let fast = cqacount_parsimonious(&q, &db).map_err(from_eval)?;
            let slow = oracle()?;
            let agree = fast == slow;
            if as_json {
                let out = json!({ "parsimonious": answers_json(&fast), "oracle": answers_json(&slow), "agree": agree });
                println!(
                    "{}",
                    serde_json::to_string_pretty(&out).expect("serializable")
                );
            } else {
                println!("# parsimonious");
                print_answers(&fast);
                println!("# oracle");
                print_answers(&slow);
            }
            if agree {
                Ok(())
            } else {
                Err(refusal("parsimonious counting and the oracle disagree"))
            }
        }
    }
}

fn graph(kind: GraphKind, path: &Path) -> Result<(), Failure> {
    let q = read_query(path)?;
    let dot = match kind {
        GraphKind::Attack => AttackGraph::of(&q).to_dot(),
        GraphKind::Fuxman => FuxmanGraph::of(&q).to_dot(),
        GraphKind::Query => q.query_graph().to_dot(),
    };
    print!("{dot}");
    Ok(())
}

fn fd(path: &Path, lhs: &str, rhs: Option<String>) -> Result<(), Failure> {
    let q = read_query(path)?;
    let sigma = FunctionalDependencySet::of_query(&q);
    let x = parse_vars(lhs);
    let closure = sigma.try_closure(&x).map_err(input_error)?;
    for d in sigma.deps() {
        println!("{d}");
    }
    println!("closure\t{{{}}}", names(&closure).join(", "));
    if let Some(w) = rhs {
        let w = Variable::new(w.trim());
        if !q.vars().contains(&w) {
            return Err(input_error(format!("unknown variable {w}")));
        }
        match sequential_proof(&q, &x, &w) {
            Some(p) => println!("proof\t{p}"),
            None => println!("proof\t-"),
        }
    }
    Ok(())
}

fn repairs(dir: &Path, limit: Option<u64>) -> Result<(), Failure> {
    let db = load_bundle(dir).map_err(input_error)?;
    println!("# {} repairs", db.repair_count());
    let shown = match limit {
        Some(k) => {
            db.repairs_in_range(0..k.min(db.repair_count_within(u64::MAX).unwrap_or(u64::MAX)))
        }
        None => db.enumerate_repairs(DEFAULT_REPAIR_CAP).map_err(refusal)?,
    };
    for (i, r) in shown.enumerate() {
        println!("# repair {i}");
        for f in r.facts() {
            println!("{f}");
        }
    }
    Ok(())
}

fn gen3dm(triples: &Path, out: &Path) -> Result<(), Failure> {
    let text = std::fs::read_to_string(triples)
        .map_err(|e| input_error(format!("{}: {e}", triples.display())))?;
    let m = parse_triples(&text).map_err(input_error)?;
    let db = build_3dm_instance(&m).map_err(input_error)?;
    save_bundle(&db, out).map_err(input_error)?;
    let query = out.join("query.cq");
    std::fs::write(&query, format!("{}\n", matching_query(3)))
        .map_err(|e| input_error(format!("{}: {e}", query.display())))?;
    println!("wrote {} facts to {}", db.len(), out.display());
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let result = match cli.command {
        Command::Classify {
            query,
            json,
            explain,
        } => classify(&query, json, explain),
        Command::Count {
            db,
            query,
            mode,
            cap,
            threads,
            json,
        } => count(&db, query, mode, cap, threads, json),
        Command::Graph { kind, query } => graph(kind, &query),
        Command::Fd { query, lhs, rhs } => fd(&query, &lhs, rhs),
        Command::Repairs { db, limit } => repairs(&db, limit),
        Command::Gen3dm { triples, out } => gen3dm(&triples, &out),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("cqa: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
