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

//! Runs every acceptance criterion and prints one `[PASS]`/`[FAIL]` line each.

mod common;

use std::process::ExitCode;
use std::time::{Duration, Instant};

use common::*;
use cqa_core::attack::AttackGraph;
use cqa_core::classify::{
    candidate_id_set, classify, classify_with, in_cforest, in_cparsimony, Violation,
};
use cqa_core::eval::{
    certain_answers, count_by, cqacount_oracle, cqacount_parsimonious, eval, is_optimistic_repair,
    is_pessimistic_repair, CountAnswer, EvalError, OracleOptions, OracleReport, RangeAnswer,
};
use cqa_core::fd::FunctionalDependencySet;
use cqa_core::instance::{
    build_3dm_instance, matching_query, parse_triples, random_instance_for, random_query,
    DatabaseInstance, InstanceParams, QueryParams,
};
use cqa_core::query::{parse_query, ConjunctiveQuery, VarSet, Variable};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within(start: Instant, limit: Duration) -> Result<(), String> {
    let t = start.elapsed();
    ensure(t < limit, || format!("took {t:?}, limit {limit:?}"))
}

fn oracle(q: &ConjunctiveQuery, db: &DatabaseInstance) -> OracleReport {
    cqacount_oracle(&q.full(), q.free(), db, &OracleOptions::default()).expect("oracle runs")
}

/// Pairs of Cparsimony queries and random instances shared by several criteria.
struct Corpus {
    pairs: Vec<(ConjunctiveQuery, Vec<DatabaseInstance>)>,
    acyclic: Vec<(ConjunctiveQuery, DatabaseInstance)>,
    forest_queries: Vec<ConjunctiveQuery>,
}

const PARSIMONY_QUERIES: usize = 200;
const INSTANCES_PER_QUERY: usize = 5;
const ACYCLIC_PAIRS: usize = 200;
const FOREST_QUERIES: usize = 1000;

fn build_corpus() -> Corpus {
    let mut rng = ChaCha8Rng::seed_from_u64(20260101);
    let qp = QueryParams::default();
    let ip = InstanceParams {
        noise: 10,
        max_repairs: 4096,
        ..InstanceParams::default()
    };
    let mut pairs = Vec::new();
    while pairs.len() < PARSIMONY_QUERIES {
        let q = random_query(&mut rng, &qp);
        if q.atoms().len() < 2 || !in_cparsimony(&q) {
            continue;
        }
        let dbs = (0..INSTANCES_PER_QUERY)
            .map(|_| random_instance_for(&mut rng, &q, &ip))
            .collect();
        pairs.push((q, dbs));
    }
    let ip = InstanceParams {
        noise: 8,
        max_repairs: 1024,
        ..InstanceParams::default()
    };
    let mut acyclic = Vec::new();
    while acyclic.len() < ACYCLIC_PAIRS {
        let q = random_query(&mut rng, &qp);
        if q.atoms().len() < 2 || !AttackGraph::of(&q).is_acyclic() {
            continue;
        }
        let db = random_instance_for(&mut rng, &q, &ip);
        acyclic.push((q, db));
    }
    let forest_queries = (0..FOREST_QUERIES)
        .map(|_| random_query(&mut rng, &qp))
        .collect();
    Corpus {
        pairs,
        acyclic,
        forest_queries,
    }
}

fn employees() -> Outcome {
    let start = Instant::now();
    let (q, db) = load("employees");
    let naive = count_by(&q.full(), q.free(), &db).map_err(|e| e.to_string())?;
    let want = vec![
        CountAnswer {
            group: row(&["A"]),
            count: 4,
        },
        CountAnswer {
            group: row(&["B"]),
            count: 3,
        },
    ];
    ensure(naive == want, || format!("naive count {naive:?}"))?;
    let emp = parse_query("q(x, z) :- E(x | 'F', y), D(y | z).").unwrap();
    let certain = certain_answers(&emp, &db).unwrap().tuples;
    ensure(certain == rows(&[&["Suzy", "A"], &["Lucy", "B"]]), || {
        format!("certain {certain:?}")
    })?;
    let want = vec![
        RangeAnswer::new(&["A"], 1, 3),
        RangeAnswer::new(&["B"], 1, 3),
    ];
    let got = oracle(&q, &db).answers;
    ensure(got == want, || format!("oracle {got:?}"))?;
    let got = cqacount_parsimonious(&q, &db).unwrap();
    ensure(got == want, || format!("parsimonious {got:?}"))?;
    within(start, Duration::from_secs(1))?;
    Ok(format!("{:?}", start.elapsed()))
}

fn two_repairs() -> Outcome {
    let start = Instant::now();
    let (q, db) = load("two-repairs");
    let repairs: Vec<_> = db.enumerate_repairs(100).unwrap().collect();
    ensure(repairs.len() == 2, || format!("{} repairs", repairs.len()))?;
    let q_prime = q.make_free(&vars(&["x"])).unwrap();
    let n = eval(&q_prime, &db).unwrap().len();
    ensure(n == 6, || format!("|q'(db)| = {n}"))?;
    let certain = certain_answers(&q_prime, &db).unwrap().tuples;
    ensure(certain == rows(&[&["g1", "a1"], &["g2", "a4"]]), || {
        format!("certain {certain:?}")
    })?;
    let want = vec![
        RangeAnswer::new(&["g1"], 1, 3),
        RangeAnswer::new(&["g2"], 1, 3),
    ];
    let got = oracle(&q, &db).answers;
    ensure(got == want, || format!("oracle {got:?}"))?;
    let got = cqacount_parsimonious(&q, &db).unwrap();
    ensure(got == want, || format!("parsimonious {got:?}"))?;
    let g1_heavy = repairs
        .iter()
        .position(|r| {
            r.contains(&cqa_core::instance::Fact::from_strs(
                "S",
                &["b2", "c2", "g1"],
            ))
        })
        .unwrap();
    let (r1, r2) = (&repairs[g1_heavy], &repairs[1 - g1_heavy]);
    let z = q.free();
    let (g1, g2) = (row(&["g1"]), row(&["g2"]));
    let verdicts = [
        is_optimistic_repair(r1, &q_prime, z, &g1).unwrap(),
        is_pessimistic_repair(r1, &q_prime, z, &g2).unwrap(),
        is_optimistic_repair(r2, &q_prime, z, &g2).unwrap(),
        is_pessimistic_repair(r2, &q_prime, z, &g1).unwrap(),
        !is_optimistic_repair(r1, &q_prime, z, &g2).unwrap(),
        !is_optimistic_repair(r2, &q_prime, z, &g1).unwrap(),
    ];
    ensure(verdicts.iter().all(|v| *v), || {
        format!("repair verdicts {verdicts:?}")
    })?;
    within(start, Duration::from_secs(1))?;
    Ok(format!("{:?}", start.elapsed()))
}

fn strong_attack() -> Outcome {
    let (q, db) = load("strong-attack");
    let got = oracle(&q, &db).answers;
    let want = vec![
        RangeAnswer::new(&["c1"], 2, 2),
        RangeAnswer::new(&["c2"], 1, 2),
    ];
    ensure(got == want, || format!("oracle {got:?}"))?;
    match cqacount_parsimonious(&q, &db) {
        Err(EvalError::NotInClass(v @ Violation::StrongAttack { .. })) => {
            Ok(format!("refused: {v}"))
        }
        other => Err(format!("expected a refusal, got {other:?}")),
    }
}

fn mutual_keys() -> Outcome {
    let expected = [(1, 2), (2, 2), (2, 2)];
    let choices = [vec!["x"], vec!["y"], vec![]];
    let sizes = [3, 3, 1];
    let mut notes = Vec::new();
    for i in 0..3 {
        let (q, db) = load(&format!("mutual-keys-{}", i + 1));
        ensure(!in_cparsimony(&q), || "classified as Cparsimony".into())?;
        let got = oracle(&q, &db).answers;
        let want = vec![RangeAnswer::new(&["d"], expected[i].0, expected[i].1)];
        ensure(got == want, || {
            format!("instance {}: oracle {got:?}", i + 1)
        })?;
        let n = eval(&q.make_free(&vars(&choices[i])).unwrap(), &db)
            .unwrap()
            .len();
        ensure(n == sizes[i], || {
            format!("instance {}: |q'(db)| = {n}", i + 1)
        })?;
        notes.push(format!("{}:{}", got[0], n));
    }
    Ok(notes.join("; ").replace('\t', " "))
}

fn matching() -> Outcome {
    let text = std::fs::read_to_string(data_dir("matching").join("triples.txt")).unwrap();
    let db = build_3dm_instance(&parse_triples(&text).unwrap()).map_err(|e| e.to_string())?;
    let mut facts: Vec<String> = db.facts().iter().map(|f| f.to_string()).collect();
    facts.sort();
    let mut want: Vec<String> = [
        "Z(c)",
        "R1(a, adf)",
        "R1(a, aeg)",
        "R1(b, beg)",
        "R1(⊥1, ⊤)",
        "S1(a, adf)",
        "S1(a, aeg)",
        "S1(b, beg)",
        "S1(⊥1, ⊤)",
        "R2(d, adf)",
        "R2(e, aeg)",
        "R2(e, beg)",
        "R2(⊥2, ⊤)",
        "S2(d, adf)",
        "S2(e, aeg)",
        "S2(e, beg)",
        "S2(⊥2, ⊤)",
        "R3(f, adf)",
        "R3(g, aeg)",
        "R3(g, beg)",
        "R3(⊥3, ⊤)",
        "S3(f, adf)",
        "S3(g, aeg)",
        "S3(g, beg)",
        "S3(⊥3, ⊤)",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    want.sort();
    ensure(facts == want, || format!("facts {facts:?}"))?;
    let got = oracle(&matching_query(3), &db).answers;
    ensure(got == vec![RangeAnswer::new(&["c"], 1, 3)], || {
        format!("oracle {got:?}")
    })?;
    Ok(format!("{} facts", facts.len()))
}

fn classifier_goldens() -> Outcome {
    let id = |text: &str| classify(&parse_query(text).unwrap()).id_set;
    let two = id("q(z) :- R(x | y1), S(x | y2), T(y1, y2 | y3, z), P(v | w).");
    ensure(two == Some(vars(&["v", "x"])), || {
        format!("two-component query: {two:?}")
    })?;
    let pq = parse_query("q(z) :- R(x | y), S(y | v), T(v | y), P1(z | y), P2(z | y).").unwrap();
    let report = classify(&pq);
    ensure(
        report.id_set == Some(vars(&["x"])) && report.frozen == set(&["y"]),
        || format!("{report}"),
    )?;
    for text in [
        "q(z1, z2) :- R(x | y, z1), S(x | y), T(y | z2).",
        "q(z3) :- R(x | y, z1), S(x, y | z2), T(z1, z2, z3), P(x | y).",
    ] {
        let v = candidate_id_set(&AttackGraph::of(&parse_query(text).unwrap()))
            .map_err(|e| e.to_string())?;
        ensure(v == set(&["x"]), || format!("{text}: V = {v:?}"))?;
    }
    let rs = parse_query("q(z) :- R(x | y), S(x | y, z).").unwrap();
    ensure(in_cparsimony(&rs) && !in_cforest(&rs), || {
        "R/S query".into()
    })?;
    let dm = parse_query("q(z) :- Z(z), R1(x1 | y), S1(x1 | y), R2(x2 | y), S2(x2 | y).").unwrap();
    ensure(!in_cparsimony(&dm), || "2DM query accepted".into())?;
    Ok("5 queries".into())
}

fn equivalence(corpus: &Corpus, start: Instant) -> Outcome {
    let mut repairs = 0u64;
    let mut groups = 0usize;
    for (q, dbs) in &corpus.pairs {
        for db in dbs {
            let truth = oracle(q, db);
            let fast = cqacount_parsimonious(q, db).map_err(|e| format!("{q}: {e}"))?;
            ensure(fast == truth.answers, || {
                format!(
                    "{q}\n{db:?}\nparsimonious {fast:?}\noracle {:?}",
                    truth.answers
                )
            })?;
            repairs = repairs.max(truth.repairs);
            groups += fast.len();
        }
    }
    within(start, Duration::from_secs(60))?;
    Ok(format!(
        "{} queries x {} instances, {groups} groups, max {repairs} repairs, {:?}",
        corpus.pairs.len(),
        INSTANCES_PER_QUERY,
        start.elapsed()
    ))
}

fn forest_inclusion(corpus: &Corpus) -> Outcome {
    let mut forest = 0;
    let mut strict = 0;
    for q in &corpus.forest_queries {
        let p = in_cparsimony(q);
        if in_cforest(q) {
            forest += 1;
            ensure(p, || format!("{q} is in Cforest but not Cparsimony"))?;
        } else if p {
            strict += 1;
        }
    }
    ensure(strict > 0, || "no Cparsimony query outside Cforest".into())?;
    Ok(format!(
        "{} queries, {forest} in Cforest, {strict} only in Cparsimony",
        corpus.forest_queries.len()
    ))
}

fn certain_vs_intersection(corpus: &Corpus) -> Outcome {
    let mut answers = 0;
    for (q, db) in &corpus.acyclic {
        ensure(db.repair_count_within(1024).is_ok(), || {
            "too many repairs".into()
        })?;
        let got = certain_answers(q, db).unwrap();
        let want = repair_intersection(q, db);
        ensure(got == want, || format!("{q}: {got:?} vs {want:?}"))?;
        answers += got.len();
    }
    Ok(format!(
        "{} pairs, {answers} certain tuples",
        corpus.acyclic.len()
    ))
}

fn tightness(corpus: &Corpus) -> Outcome {
    let mut checked = 0;
    let mut bundles: Vec<(ConjunctiveQuery, DatabaseInstance)> = [
        "employees",
        "two-repairs",
        "strong-attack",
        "mutual-keys-1",
        "mutual-keys-2",
        "mutual-keys-3",
    ]
    .iter()
    .map(|n| load(n))
    .collect();
    bundles.extend(
        corpus
            .pairs
            .iter()
            .flat_map(|(q, dbs)| dbs.iter().map(|db| (q.clone(), db.clone()))),
    );
    for (q, db) in &bundles {
        let report = oracle(q, db);
        let per_repair = counts_per_repair(q, db);
        ensure(per_repair.len() == report.answers.len(), || {
            format!("{q}: group sets differ")
        })?;
        for (a, (lo, hi)) in report.answers.iter().zip(&report.witnesses) {
            let counts = &per_repair[&a.group];
            ensure(
                counts.iter().all(|c| (a.lower..=a.upper).contains(c)),
                || format!("{q}: {a} not a bound"),
            )?;
            ensure(
                counts.contains(&a.lower) && counts.contains(&a.upper),
                || format!("{q}: {a} not attained"),
            )?;
            ensure(
                count_on_repair(q, db, *lo, &a.group) == Some(a.lower),
                || format!("{q}: lower witness"),
            )?;
            ensure(
                count_on_repair(q, db, *hi, &a.group) == Some(a.upper),
                || format!("{q}: upper witness"),
            )?;
            checked += 1;
        }
    }
    Ok(format!("{checked} answers re-exhibited"))
}

fn repair_existence(corpus: &Corpus) -> Outcome {
    let mut checked = 0;
    for (q, dbs) in &corpus.pairs {
        let x = classify(q).id_set.ok_or("lost its id-set")?;
        let q_prime = q.make_free(&x).unwrap();
        for db in dbs {
            let repairs: Vec<_> = db.enumerate_repairs(4096).unwrap().collect();
            for g in certain_answers(q, db).unwrap().tuples {
                let opt = repairs
                    .iter()
                    .any(|r| is_optimistic_repair(r, &q_prime, q.free(), &g).unwrap());
                let pess = repairs
                    .iter()
                    .any(|r| is_pessimistic_repair(r, &q_prime, q.free(), &g).unwrap());
                ensure(opt && pess, || {
                    format!("{q}: group {g:?} optimistic {opt} pessimistic {pess}")
                })?;
                checked += 1;
            }
        }
    }
    Ok(format!("{checked} groups"))
}

fn fd_sets(q: &ConjunctiveQuery) -> Vec<FunctionalDependencySet> {
    let mut out = vec![FunctionalDependencySet::of_query(q)];
    for i in 0..q.atoms().len() {
        let rest: Vec<_> = q
            .atoms()
            .iter()
            .enumerate()
            .filter(|(j, _)| *j != i)
            .map(|(_, a)| a)
            .collect();
        out.push(FunctionalDependencySet::of_atoms(q, rest));
    }
    out
}

fn fd_engine(corpus: &Corpus) -> Outcome {
    let queries = corpus
        .pairs
        .iter()
        .map(|(q, _)| q)
        .chain(corpus.acyclic.iter().map(|(q, _)| q))
        .chain(&corpus.forest_queries);
    let mut sets = 0;
    let mut checks = 0;
    for q in queries {
        let vs: Vec<Variable> = q.vars().into_iter().collect();
        for sigma in fd_sets(q) {
            sets += 1;
            for mask in 0..1u32 << vs.len() {
                let x: VarSet = vs
                    .iter()
                    .enumerate()
                    .filter(|(i, _)| mask & (1 << i) != 0)
                    .map(|(_, v)| v.clone())
                    .collect();
                let cl = sigma.closure(&x);
                let brute_cl = two_row_closure(&sigma, &x);
                for y in &vs {
                    let brute = brute_cl.contains(y);
                    ensure(
                        sigma.implies(&x, y) == brute && cl.contains(y) == brute,
                        || format!("{sigma}: {x:?} -> {y}"),
                    )?;
                    checks += 1;
                }
            }
        }
    }
    Ok(format!("{sets} FD sets, {checks} implications"))
}

fn classification_speed() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let qp = QueryParams {
        max_atoms: 8,
        max_vars: 10,
        ..QueryParams::default()
    };
    let mut queries = Vec::new();
    while queries.len() < 100 {
        let q = random_query(&mut rng, &qp);
        if q.atoms().len() == 8 {
            queries.push(q);
        }
    }
    let start = Instant::now();
    let yes = queries
        .iter()
        .filter(|q| classify_with(&AttackGraph::of(q)).in_cparsimony)
        .count();
    within(start, Duration::from_secs(5))?;
    Ok(format!("{yes}/100 accepted in {:?}", start.elapsed()))
}

fn main() -> ExitCode {
    let mut failed = 0;
    let mut report = |name: &str, outcome: Outcome| match outcome {
        Ok(detail) => println!("[PASS] {name}: {detail}"),
        Err(detail) => {
            failed += 1;
            println!("[FAIL] {name}: {detail}");
        }
    };
    report("criterion 1 (employees golden)", employees());
    report("criterion 2 (two-repair golden)", two_repairs());
    report("criterion 3 (strong-attack golden)", strong_attack());
    report("criterion 4 (mutual-keys goldens)", mutual_keys());
    report("criterion 5 (3-dimensional matching golden)", matching());
    report("criterion 6 (classifier goldens)", classifier_goldens());
    let start = Instant::now();
    let corpus = build_corpus();
    report(
        "criterion 7 (parsimonious = oracle)",
        equivalence(&corpus, start),
    );
    report(
        "criterion 8 (Cforest within Cparsimony)",
        forest_inclusion(&corpus),
    );
    report(
        "criterion 9 (certain answers = repair intersection)",
        certain_vs_intersection(&corpus),
    );
    report("criterion 10 (oracle tightness)", tightness(&corpus));
    report(
        "criterion 11 (optimistic and pessimistic repairs)",
        repair_existence(&corpus),
    );
    report(
        "criterion 12 (FD engine vs two-row tableaux)",
        fd_engine(&corpus),
    );
    report(
        "sanity (100 eight-atom classifications < 5 s)",
        classification_speed(),
    );
    if failed == 0 {
        println!("acceptance: all criteria passed");
        ExitCode::SUCCESS
    } else {
        println!("acceptance: {failed} criteria failed");
        ExitCode::FAILURE
    }
}
