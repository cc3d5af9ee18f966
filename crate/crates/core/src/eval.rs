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

//! Query evaluation, certain answers, COUNT grouping and range-consistent
//! counting, both parsimoniously and by enumerating repairs.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use thiserror::Error;

use crate::attack::AttackGraph;
use crate::classify::{classify, Violation};
use crate::instance::{
    DatabaseInstance, Fact, FactSource, InstanceError, Repair, DEFAULT_REPAIR_CAP,
};
use crate::query::{ConjunctiveQuery, Constant, QueryError, Term, VarSet, Variable};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("relation {0} is not in the database schema")]
    UnknownRelation(String),
    #[error("relation {relation}: query uses arity {query}/key {query_key}, schema declares arity {schema}/key {schema_key}")]
    SignatureMismatch {
        relation: String,
        query: usize,
        query_key: usize,
        schema: usize,
        schema_key: usize,
    },
    #[error("the grouping query must have every variable free")]
    NotFull,
    #[error("query has a cyclic attack graph ({0}); use the repair-enumeration oracle")]
    Cyclic(Violation),
    #[error("query not in Cparsimony: {0}")]
    NotInClass(Violation),
    #[error(transparent)]
    Query(#[from] QueryError),
    #[error(transparent)]
    Instance(#[from] InstanceError),
}

/// A satisfying assignment of constants to query variables.
pub type Valuation = BTreeMap<Variable, Constant>;

/// Distinct answer tuples over an ordered head.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AnswerSet {
    pub head: Vec<Variable>,
    pub tuples: BTreeSet<Vec<Constant>>,
}

impl AnswerSet {
    pub fn len(&self) -> usize {
        self.tuples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tuples.is_empty()
    }

    pub fn contains(&self, t: &[Constant]) -> bool {
        self.tuples.contains(t)
    }

    pub fn is_subset(&self, other: &AnswerSet) -> bool {
        self.tuples.is_subset(&other.tuples)
    }

    /// Per value of the first `k` positions, the number of distinct tuples.
    pub fn group_sizes(&self, k: usize) -> BTreeMap<Vec<Constant>, usize> {
        let mut out: BTreeMap<Vec<Constant>, usize> = BTreeMap::new();
        for t in &self.tuples {
            *out.entry(t[..k].to_vec()).or_default() += 1;
        }
        out
    }
}

impl fmt::Display for AnswerSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for t in &self.tuples {
            let row: Vec<&str> = t.iter().map(Constant::as_str).collect();
            writeln!(f, "{}", row.join("\t"))?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct CountAnswer {
    pub group: Vec<Constant>,
    pub count: usize,
}

/// A group with tight lower and upper bounds on its count over all repairs.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct RangeAnswer {
    pub group: Vec<Constant>,
    pub lower: usize,
    pub upper: usize,
}

impl RangeAnswer {
    pub fn new(group: &[&str], lower: usize, upper: usize) -> Self {
        RangeAnswer {
            group: group.iter().map(Constant::new).collect(),
            lower,
            upper,
        }
    }
}

impl fmt::Display for RangeAnswer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.group {
            write!(f, "{c}\t")?;
        }
        write!(f, "{}\t{}", self.lower, self.upper)
    }
}

#[derive(Debug, Clone)]
enum Slot {
    Var(usize),
    Const(Constant),
}

#[derive(Debug, Clone)]
struct CompiledAtom {
    relation: String,
    key_width: usize,
    slots: Vec<Slot>,
}

/// A query with its variables numbered, ready for backtracking search.
#[derive(Debug, Clone)]
struct Compiled {
    vars: Vec<Variable>,
    index: HashMap<Variable, usize>,
    atoms: Vec<CompiledAtom>,
}

type Binding = Vec<Option<Constant>>;

impl Compiled {
    fn new(q: &ConjunctiveQuery) -> Self {
        let vars: Vec<Variable> = q.vars().into_iter().collect();
        let index: HashMap<Variable, usize> = vars
            .iter()
            .cloned()
            .enumerate()
            .map(|(i, v)| (v, i))
            .collect();
        let atoms = q
            .atoms()
            .iter()
            .map(|a| CompiledAtom {
                relation: a.relation().to_string(),
                key_width: a.signature().key_width(),
                slots: a
                    .args()
                    .iter()
                    .map(|t| match t {
                        Term::Var(v) => Slot::Var(index[v]),
                        Term::Const(c) => Slot::Const(c.clone()),
                    })
                    .collect(),
            })
            .collect();
        Compiled { vars, index, atoms }
    }

    fn check<S: FactSource + ?Sized>(
        &self,
        q: &ConjunctiveQuery,
        src: &S,
    ) -> Result<(), EvalError> {
        for a in q.atoms() {
            let sig = src
                .schema()
                .get(a.relation())
                .ok_or_else(|| EvalError::UnknownRelation(a.relation().to_string()))?;
            if sig.arity() != a.signature().arity() || sig.key_width() != a.signature().key_width()
            {
                return Err(EvalError::SignatureMismatch {
                    relation: a.relation().to_string(),
                    query: a.signature().arity(),
                    query_key: a.signature().key_width(),
                    schema: sig.arity(),
                    schema_key: sig.key_width(),
                });
            }
        }
        Ok(())
    }

    fn empty_binding(&self) -> Binding {
        vec![None; self.vars.len()]
    }

    /// The key values of `atom` if every key slot is already determined.
    fn bound_key(atom: &CompiledAtom, b: &Binding) -> Option<Vec<Constant>> {
        atom.slots[..atom.key_width]
            .iter()
            .map(|s| match s {
                Slot::Const(c) => Some(c.clone()),
                Slot::Var(i) => b[*i].clone(),
            })
            .collect()
    }

    /// Matches `slots` against `values`, extending `b`. Newly bound
    /// variables are pushed to `trail` so the caller can undo them.
    fn unify(slots: &[Slot], values: &[Constant], b: &mut Binding, trail: &mut Vec<usize>) -> bool {
        for (s, v) in slots.iter().zip(values) {
            match s {
                Slot::Const(c) => {
                    if c != v {
                        return false;
                    }
                }
                Slot::Var(i) => match &b[*i] {
                    Some(c) => {
                        if c != v {
                            return false;
                        }
                    }
                    None => {
                        b[*i] = Some(v.clone());
                        trail.push(*i);
                    }
                },
            }
        }
        true
    }

    fn undo(b: &mut Binding, trail: &mut Vec<usize>, mark: usize) {
        for i in trail.drain(mark..) {
            b[i] = None;
        }
    }

    /// Calls `f` on every total satisfying binding extending `b`; stops
    /// early when `f` returns false.
    fn search<S: FactSource + ?Sized>(
        &self,
        src: &S,
        i: usize,
        b: &mut Binding,
        trail: &mut Vec<usize>,
        f: &mut dyn FnMut(&Binding) -> bool,
    ) -> bool {
        if i == self.atoms.len() {
            return f(b);
        }
        let atom = &self.atoms[i];
        let facts: Box<dyn Iterator<Item = &Fact>> = match Self::bound_key(atom, b) {
            Some(key) => src.lookup(&atom.relation, &key),
            None => src.scan(&atom.relation),
        };
        for fact in facts {
            let mark = trail.len();
            let stopped = Self::unify(&atom.slots, fact.values(), b, trail)
                && self.search(src, i + 1, b, trail, f);
            Self::undo(b, trail, mark);
            if stopped {
                return true;
            }
        }
        false
    }

    /// Visits every satisfying valuation; returns true if stopped early.
    fn for_each<S: FactSource + ?Sized>(
        &self,
        src: &S,
        b: &mut Binding,
        f: &mut dyn FnMut(&Binding) -> bool,
    ) -> bool {
        let mut trail = Vec::new();
        self.search(src, 0, b, &mut trail, &mut |b| !f(b))
    }

    fn project(&self, b: &Binding, head: &[Variable]) -> Vec<Constant> {
        head.iter()
            .map(|v| b[self.index[v]].clone().expect("head variables are bound"))
            .collect()
    }
}

/// All head tuples of `q` on `src`.
pub fn eval<S: FactSource + ?Sized>(q: &ConjunctiveQuery, src: &S) -> Result<AnswerSet, EvalError> {
    let c = Compiled::new(q);
    c.check(q, src)?;
    let mut tuples = BTreeSet::new();
    let mut b = c.empty_binding();
    c.for_each(src, &mut b, &mut |b| {
        tuples.insert(c.project(b, q.free()));
        true
    });
    Ok(AnswerSet {
        head: q.free().to_vec(),
        tuples,
    })
}

/// Every satisfying valuation of `q` on `src`, in search order.
pub fn valuations<S: FactSource + ?Sized>(
    q: &ConjunctiveQuery,
    src: &S,
) -> Result<Vec<Valuation>, EvalError> {
    let c = Compiled::new(q);
    c.check(q, src)?;
    let mut out = Vec::new();
    let mut b = c.empty_binding();
    c.for_each(src, &mut b, &mut |b| {
        out.push(
            c.vars
                .iter()
                .cloned()
                .zip(b.iter().map(|x| x.clone().expect("total")))
                .collect(),
        );
        true
    });
    Ok(out)
}

fn positions(q: &ConjunctiveQuery, z: &[Variable]) -> Result<Vec<usize>, EvalError> {
    z.iter()
        .map(|v| {
            q.free()
                .iter()
                .position(|w| w == v)
                .ok_or_else(|| EvalError::Query(QueryError::NotFree(v.clone())))
        })
        .collect()
}

/// Per `z`-group of `eval(q_full)`, the number of distinct tuples of the
/// remaining variables. Groups come out in canonical order.
pub fn count_by<S: FactSource + ?Sized>(
    q_full: &ConjunctiveQuery,
    z: &[Variable],
    src: &S,
) -> Result<Vec<CountAnswer>, EvalError> {
    if !q_full.is_full() {
        return Err(EvalError::NotFull);
    }
    let pos = positions(q_full, z)?;
    let answers = eval(q_full, src)?;
    Ok(group_counts(&answers, &pos)
        .into_iter()
        .map(|(group, count)| CountAnswer { group, count })
        .collect())
}

fn group_counts(answers: &AnswerSet, pos: &[usize]) -> BTreeMap<Vec<Constant>, usize> {
    let mut out: BTreeMap<Vec<Constant>, usize> = BTreeMap::new();
    for t in &answers.tuples {
        *out.entry(pos.iter().map(|&i| t[i].clone()).collect())
            .or_default() += 1;
    }
    out
}

/// The order in which atoms are peeled off when deciding certainty: at each
/// step the unattacked atom with the smallest relation name, in the query
/// where everything already matched counts as a constant.
fn certainty_plan(q: &ConjunctiveQuery) -> Result<Vec<usize>, EvalError> {
    let mut grounded: VarSet = q.free_set();
    let mut remaining: Vec<usize> = (0..q.atoms().len()).collect();
    let mut plan = Vec::new();
    while !remaining.is_empty() {
        let atoms: Vec<_> = remaining.iter().map(|&i| q.atoms()[i].clone()).collect();
        let vars: VarSet = atoms.iter().flat_map(|a| a.vars()).collect();
        let free: Vec<Variable> = grounded.intersection(&vars).cloned().collect();
        let sub = ConjunctiveQuery::new(atoms, free)?;
        let g = AttackGraph::of(&sub);
        if let Some(cycle) = g.find_cycle() {
            return Err(EvalError::Cyclic(Violation::Cycle {
                atoms: cycle.iter().map(|&i| g.relation(i).to_string()).collect(),
            }));
        }
        let pick = g.unattacked()[0];
        let atom = remaining.remove(pick);
        grounded.extend(q.atoms()[atom].vars());
        plan.push(atom);
    }
    Ok(plan)
}

struct Certainty<'a> {
    c: Compiled,
    plan: Vec<usize>,
    db: &'a DatabaseInstance,
}

impl Certainty<'_> {
    /// Whether every repair satisfies the query under the current binding.
    fn holds(&self, step: usize, b: &mut Binding, trail: &mut Vec<usize>) -> bool {
        let Some(&ai) = self.plan.get(step) else {
            return true;
        };
        let atom = &self.c.atoms[ai];
        let blocks: Vec<usize> = match Compiled::bound_key(atom, b) {
            Some(key) => self
                .db
                .find_block(&atom.relation, &key)
                .into_iter()
                .collect(),
            None => self.db.relation_block_range(&atom.relation).collect(),
        };
        for bi in blocks {
            let block = self.db.block(bi);
            let mark = trail.len();
            let ok = Compiled::unify(&atom.slots[..atom.key_width], block.key, b, trail)
                && block.members.iter().all(|f| {
                    let m = trail.len();
                    let ok = Compiled::unify(&atom.slots, f.values(), b, trail)
                        && self.holds(step + 1, b, trail);
                    Compiled::undo(b, trail, m);
                    ok
                });
            Compiled::undo(b, trail, mark);
            if ok {
                return true;
            }
        }
        false
    }
}

/// Tuples returned on every repair of `db`. Requires an acyclic attack graph.
pub fn certain_answers(
    q: &ConjunctiveQuery,
    db: &DatabaseInstance,
) -> Result<AnswerSet, EvalError> {
    let plan = certainty_plan(q)?;
    let candidates = eval(q, db)?;
    let cert = Certainty {
        c: Compiled::new(q),
        plan,
        db,
    };
    let free_slots: Vec<usize> = q.free().iter().map(|v| cert.c.index[v]).collect();
    let mut tuples = BTreeSet::new();
    for t in candidates.tuples {
        let mut b = cert.c.empty_binding();
        for (i, v) in free_slots.iter().zip(&t) {
            b[*i] = Some(v.clone());
        }
        if cert.holds(0, &mut b, &mut Vec::new()) {
            tuples.insert(t);
        }
    }
    Ok(AnswerSet {
        head: q.free().to_vec(),
        tuples,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OracleOptions {
    pub cap: u64,
    pub threads: usize,
}

impl Default for OracleOptions {
    fn default() -> Self {
        OracleOptions {
            cap: DEFAULT_REPAIR_CAP,
            threads: 1,
        }
    }
}

/// Oracle output with, per answer, the first repairs attaining its bounds.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OracleReport {
    pub answers: Vec<RangeAnswer>,
    /// `(repair index attaining lower, repair index attaining upper)`.
    pub witnesses: Vec<(u64, u64)>,
    pub repairs: u64,
}

#[derive(Debug, Clone, Copy)]
struct Extremes {
    seen: u64,
    min: (usize, u64),
    max: (usize, u64),
}

type Partial = BTreeMap<Vec<Constant>, Extremes>;

fn merge(into: &mut Partial, from: Partial) {
    for (g, e) in from {
        into.entry(g)
            .and_modify(|x| {
                x.seen += e.seen;
                if (e.min.0, e.min.1) < (x.min.0, x.min.1) {
                    x.min = e.min;
                }
                if e.max.0 > x.max.0 || (e.max.0 == x.max.0 && e.max.1 < x.max.1) {
                    x.max = e.max;
                }
            })
            .or_insert(e);
    }
}

fn scan_repairs(
    q_full: &ConjunctiveQuery,
    pos: &[usize],
    db: &DatabaseInstance,
    range: std::ops::Range<u64>,
) -> Result<Partial, EvalError> {
    let mut out = Partial::new();
    for (r, idx) in db.repairs_in_range(range.clone()).zip(range) {
        let counts = group_counts(&eval(q_full, &r)?, pos);
        let mut part = Partial::new();
        for (g, n) in counts {
            part.insert(
                g,
                Extremes {
                    seen: 1,
                    min: (n, idx),
                    max: (n, idx),
                },
            );
        }
        merge(&mut out, part);
    }
    Ok(out)
}

/// Range-consistent counts by visiting every repair of `db`. A group is
/// reported only if it appears on every repair.
pub fn cqacount_oracle(
    q_full: &ConjunctiveQuery,
    z: &[Variable],
    db: &DatabaseInstance,
    opts: &OracleOptions,
) -> Result<OracleReport, EvalError> {
    if !q_full.is_full() {
        return Err(EvalError::NotFull);
    }
    let pos = positions(q_full, z)?;
    let n = db.repair_count_within(opts.cap)?;
    let threads = (opts.threads.max(1) as u64).min(n.max(1));
    let total = if threads <= 1 {
        scan_repairs(q_full, &pos, db, 0..n)?
    } else {
        let chunk = n.div_ceil(threads);
        let parts: Vec<Result<Partial, EvalError>> = std::thread::scope(|s| {
            let handles: Vec<_> = (0..threads)
                .map(|t| {
                    let range = (t * chunk).min(n)..((t + 1) * chunk).min(n);
                    let pos = &pos;
                    s.spawn(move || scan_repairs(q_full, pos, db, range))
                })
                .collect();
            handles
                .into_iter()
                .map(|h| h.join().expect("oracle worker panicked"))
                .collect()
        });
        let mut total = Partial::new();
        for p in parts {
            merge(&mut total, p?);
        }
        total
    };
    let (answers, witnesses) = total
        .into_iter()
        .filter(|(_, e)| e.seen == n)
        .map(|(group, e)| {
            (
                RangeAnswer {
                    group,
                    lower: e.min.0,
                    upper: e.max.0,
                },
                (e.min.1, e.max.1),
            )
        })
        .unzip();
    Ok(OracleReport {
        answers,
        witnesses,
        repairs: n,
    })
}

/// Counts distinct `x`-values per certain group: the upper bound over
/// `eval(q′)`, the lower bound over the certain answers of `q′`, where
/// `q′` makes `x` free. No class membership check is made.
pub fn parsimonious_with(
    q: &ConjunctiveQuery,
    x: &[Variable],
    db: &DatabaseInstance,
) -> Result<Vec<RangeAnswer>, EvalError> {
    let q_prime = q.make_free(x)?;
    let k = q.free().len();
    let groups = certain_answers(q, db)?;
    let upper = eval(&q_prime, db)?.group_sizes(k);
    let lower = certain_answers(&q_prime, db)?.group_sizes(k);
    Ok(groups
        .tuples
        .into_iter()
        .map(|g| RangeAnswer {
            lower: lower.get(&g).copied().unwrap_or(0),
            upper: upper.get(&g).copied().unwrap_or(0),
            group: g,
        })
        .collect())
}

/// Range-consistent counts for a query in Cparsimony, using its minimal id-set.
pub fn cqacount_parsimonious(
    q: &ConjunctiveQuery,
    db: &DatabaseInstance,
) -> Result<Vec<RangeAnswer>, EvalError> {
    let report = classify(q);
    match report.id_set {
        Some(x) => parsimonious_with(q, &x, db),
        None => Err(EvalError::NotInClass(
            report.violation.expect("rejections carry a certificate"),
        )),
    }
}

/// Every answer of `q′[z ↦ c]` on the database is also one on `r`.
pub fn is_optimistic_repair(
    r: &Repair<'_>,
    q_prime: &ConjunctiveQuery,
    z: &[Variable],
    c: &[Constant],
) -> Result<bool, EvalError> {
    let q = q_prime.substitute(z, c)?;
    Ok(eval(&q, r.database())?.is_subset(&eval(&q, r)?))
}

/// Every answer of `q′[z ↦ c]` on `r` is a certain answer.
pub fn is_pessimistic_repair(
    r: &Repair<'_>,
    q_prime: &ConjunctiveQuery,
    z: &[Variable],
    c: &[Constant],
) -> Result<bool, EvalError> {
    let q = q_prime.substitute(z, c)?;
    Ok(eval(&q, r)?.is_subset(&certain_answers(&q, r.database())?))
}
