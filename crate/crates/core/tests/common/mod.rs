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

//! Brute-force oracles shared by the integration tests. Each one is written
//! from the definitions, independently of the library's algorithms.

#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};
use std::path::PathBuf;

use cqa_core::attack::AttackGraph;
use cqa_core::eval::{count_by, eval, AnswerSet};
use cqa_core::fd::FunctionalDependencySet;
use cqa_core::instance::{load_bundle, DatabaseInstance};
use cqa_core::query::{parse_query, Atom, ConjunctiveQuery, Constant, VarSet, Variable};

pub fn data_dir(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../data")
        .join(name)
}

pub fn load(name: &str) -> (ConjunctiveQuery, DatabaseInstance) {
    let dir = data_dir(name);
    let q = parse_query(&std::fs::read_to_string(dir.join("query.cq")).unwrap()).unwrap();
    (q, load_bundle(&dir).unwrap())
}

pub fn set(names: &[&str]) -> VarSet {
    names.iter().map(Variable::new).collect()
}

pub fn vars(names: &[&str]) -> Vec<Variable> {
    names.iter().map(Variable::new).collect()
}

pub fn row(values: &[&str]) -> Vec<Constant> {
    values.iter().map(Constant::new).collect()
}

pub fn rows(values: &[&[&str]]) -> BTreeSet<Vec<Constant>> {
    values.iter().map(|r| row(r)).collect()
}

fn subsets<T: Clone + Ord>(items: &[T]) -> Vec<BTreeSet<T>> {
    (0..1u32 << items.len())
        .map(|mask| {
            items
                .iter()
                .enumerate()
                .filter(|(i, _)| mask & (1 << i) != 0)
                .map(|(_, v)| v.clone())
                .collect()
        })
        .collect()
}

/// `Σ ⊨ X → y` decided on two-row tableaux: a set `A` of variables is the
/// agreement set of some two-row model of Σ iff it is closed under Σ, and
/// the implication holds iff every such `A ⊇ X` contains `y`.
pub fn two_row_implies(sigma: &FunctionalDependencySet, x: &VarSet, y: &Variable) -> bool {
    let mut universe: Vec<Variable> = sigma.universe().iter().cloned().collect();
    for v in x.iter().chain([y]) {
        if !universe.contains(v) {
            universe.push(v.clone());
        }
    }
    subsets(&universe).into_iter().all(|a| {
        let model = sigma
            .deps()
            .iter()
            .all(|d| !d.lhs.is_subset(&a) || d.rhs.is_subset(&a));
        !model || !x.is_subset(&a) || a.contains(y)
    })
}

/// The attributes implied by `X` on two-row tableaux: the intersection of
/// every Σ-closed agreement set containing `X`.
pub fn two_row_closure(sigma: &FunctionalDependencySet, x: &VarSet) -> VarSet {
    let mut universe: Vec<Variable> = sigma.universe().iter().cloned().collect();
    for v in x {
        if !universe.contains(v) {
            universe.push(v.clone());
        }
    }
    let mut out: VarSet = universe.iter().cloned().collect();
    for a in subsets(&universe) {
        if x.is_subset(&a)
            && sigma
                .deps()
                .iter()
                .all(|d| !d.lhs.is_subset(&a) || d.rhs.is_subset(&a))
        {
            out.retain(|v| a.contains(v));
        }
    }
    out
}

/// Closure by naive fixpoint over the atoms (plus `∅ → free`).
pub fn naive_closure(atoms: &[&Atom], free: &VarSet, x: &VarSet) -> VarSet {
    let mut out: VarSet = x.union(free).cloned().collect();
    loop {
        let before = out.len();
        for a in atoms {
            if a.key_vars().is_subset(&out) {
                out.extend(a.vars());
            }
        }
        if out.len() == before {
            return out;
        }
    }
}

pub fn naive_keycl(q: &ConjunctiveQuery, i: usize) -> VarSet {
    let rest = q.without_atoms(&[i]);
    let atoms: Vec<&Atom> = rest.atoms().iter().collect();
    let mut out = naive_closure(&atoms, &rest.free_set(), &q.atoms()[i].key_vars());
    out.extend(q.free().iter().cloned());
    out
}

/// Variables attacked by atom `i`, by growing the set of reachable
/// variables until it stops changing.
pub fn naive_attacked(q: &ConjunctiveQuery, i: usize) -> VarSet {
    let cl = naive_keycl(q, i);
    let bound = q.bound_vars();
    let ok = |v: &Variable| bound.contains(v) && !cl.contains(v);
    let mut reached: VarSet = q.atoms()[i]
        .notkey_vars()
        .into_iter()
        .filter(|v| ok(v))
        .collect();
    loop {
        let before = reached.len();
        for a in q.atoms() {
            let vs = a.vars();
            if vs.iter().any(|v| reached.contains(v)) {
                reached.extend(vs.into_iter().filter(|v| ok(v)));
            }
        }
        if reached.len() == before {
            return reached;
        }
    }
}

fn permutations(items: &[usize]) -> Vec<Vec<usize>> {
    if items.is_empty() {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for (i, &x) in items.iter().enumerate() {
        let mut rest = items.to_vec();
        rest.remove(i);
        for mut p in permutations(&rest) {
            p.insert(0, x);
            out.push(p);
        }
    }
    out
}

/// Frozen variables straight from the definition: some ordering of some
/// set of atoms not attacking `y` is a sequential proof of `∅ → y`.
pub fn naive_frozen(q: &ConjunctiveQuery) -> VarSet {
    let attacked: Vec<VarSet> = (0..q.atoms().len()).map(|i| naive_attacked(q, i)).collect();
    let free = q.free_set();
    q.bound_vars()
        .into_iter()
        .filter(|y| {
            let allowed: Vec<usize> = (0..q.atoms().len())
                .filter(|&i| !attacked[i].contains(y))
                .collect();
            subsets(&allowed).into_iter().any(|s| {
                let s: Vec<usize> = s.into_iter().collect();
                permutations(&s).into_iter().any(|order| {
                    let mut known = free.clone();
                    for i in &order {
                        let a = &q.atoms()[*i];
                        if !a.key_vars().is_subset(&known) {
                            return false;
                        }
                        known.extend(a.vars());
                    }
                    known.contains(y)
                })
            })
        })
        .collect()
}

/// Does some query-graph path (possibly a single vertex) lead from `from`
/// to `to` without touching `blocked`?
fn naive_path(q: &ConjunctiveQuery, from: &VarSet, to: &VarSet, blocked: &VarSet) -> bool {
    let bound = q.bound_vars();
    let ok = |v: &Variable| bound.contains(v) && !blocked.contains(v);
    let mut reached: VarSet = from.iter().filter(|v| ok(v)).cloned().collect();
    loop {
        if reached.iter().any(|v| to.contains(v)) {
            return true;
        }
        let before = reached.len();
        for a in q.atoms() {
            let vs = a.vars();
            if vs.iter().any(|v| reached.contains(v)) {
                reached.extend(vs.into_iter().filter(|v| ok(v)));
            }
        }
        if reached.len() == before {
            return false;
        }
    }
}

/// Both id-set conditions checked from the definitions.
pub fn naive_is_id_set(q: &ConjunctiveQuery, g: &AttackGraph, frozen: &VarSet, x: &VarSet) -> bool {
    let atoms: Vec<&Atom> = q.atoms().iter().collect();
    let determined = naive_closure(&atoms, &q.free_set(), x);
    let n = q.atoms().len();
    let attacked_atom = |j: usize| (0..n).any(|i| i != j && g.attacks(i, j));
    // weakly connected components by repeated merging
    let mut comp: Vec<usize> = (0..n).collect();
    loop {
        let mut changed = false;
        for e in g.edges() {
            let (a, b) = (comp[e.from], comp[e.to]);
            if a != b {
                let m = a.min(b);
                for c in comp.iter_mut() {
                    if *c == a || *c == b {
                        *c = m;
                    }
                }
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
    let cond1 = (0..n).all(|i| {
        (0..n).any(|j| {
            comp[j] == comp[i]
                && !attacked_atom(j)
                && q.atoms()[j].key_vars().is_subset(&determined)
        })
    });
    let cond2 = q.atoms().iter().all(|a| {
        let mut blocked = a.key_vars();
        blocked.extend(frozen.iter().cloned());
        !naive_path(q, &a.notkey_vars(), x, &blocked)
    });
    cond1 && cond2
}

/// Every id-set of `q`, by trying all subsets of bound variables.
pub fn all_id_sets(q: &ConjunctiveQuery) -> Vec<VarSet> {
    let g = AttackGraph::of(q);
    let frozen = naive_frozen(q);
    let bound: Vec<Variable> = q.bound_vars().into_iter().collect();
    subsets(&bound)
        .into_iter()
        .filter(|x| naive_is_id_set(q, &g, &frozen, x))
        .collect()
}

/// Intersection of `eval(q, r)` over all repairs.
pub fn repair_intersection(q: &ConjunctiveQuery, db: &DatabaseInstance) -> AnswerSet {
    let mut acc: Option<AnswerSet> = None;
    for r in db.enumerate_repairs(u64::MAX).unwrap() {
        let a = eval(q, &r).unwrap();
        acc = Some(match acc {
            None => a,
            Some(mut prev) => {
                prev.tuples.retain(|t| a.tuples.contains(t));
                prev
            }
        });
    }
    acc.expect("every instance has at least one repair")
}

/// The count of `group` on the repair with the given odometer index.
pub fn count_on_repair(
    q: &ConjunctiveQuery,
    db: &DatabaseInstance,
    index: u64,
    group: &[Constant],
) -> Option<usize> {
    let r = db.repair_at(index);
    count_by(&q.full(), q.free(), &r)
        .unwrap()
        .into_iter()
        .find(|c| c.group == group)
        .map(|c| c.count)
}

/// Per group, the count on every repair (groups missing somewhere are dropped).
pub fn counts_per_repair(
    q: &ConjunctiveQuery,
    db: &DatabaseInstance,
) -> BTreeMap<Vec<Constant>, Vec<usize>> {
    let mut out: BTreeMap<Vec<Constant>, Vec<usize>> = BTreeMap::new();
    let mut n = 0;
    for r in db.enumerate_repairs(u64::MAX).unwrap() {
        n += 1;
        for c in count_by(&q.full(), q.free(), &r).unwrap() {
            out.entry(c.group).or_default().push(c.count);
        }
    }
    out.retain(|_, v| v.len() == n);
    out
}
