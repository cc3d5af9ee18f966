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

//! Attack graphs: `keycl`, attack witnesses, weak/strong labels, components
//! and frozen variables.

use std::collections::BTreeMap;
use std::fmt::{self, Write};

use crate::fd::{sequential_proof_within, FunctionalDependencySet, SequentialProof};
use crate::query::{ConjunctiveQuery, VarSet, Variable};

/// `keycl(F, q)` for the atom at `index`: `free(q)` together with the
/// closure of `key(F)` under `fdset(q ∖ {F})`.
pub fn keycl(q: &ConjunctiveQuery, index: usize) -> VarSet {
    let rest = q.without_atoms(&[index]);
    let sigma = FunctionalDependencySet::of_query(&rest);
    let mut out = sigma.closure(&q.atoms()[index].key_vars());
    out.extend(q.free().iter().cloned());
    out
}

/// Variables attacked by the atom at `index`, given its `keycl`.
fn attacked_vars(q: &ConjunctiveQuery, index: usize, keycl: &VarSet) -> VarSet {
    let sources = witness_sources(q, index, keycl);
    q.query_graph().reachable_avoiding(&sources, keycl)
}

fn witness_sources(q: &ConjunctiveQuery, index: usize, keycl: &VarSet) -> VarSet {
    let bound = q.bound_vars();
    q.atoms()[index]
        .notkey_vars()
        .into_iter()
        .filter(|v| bound.contains(v) && !keycl.contains(v))
        .collect()
}

/// A sequence of bound variables outside `keycl(source)` that starts in
/// `notkey(source)`, ends at `target`, and whose neighbours share an atom.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AttackWitness {
    pub source: String,
    pub target: Variable,
    pub path: Vec<Variable>,
}

impl AttackWitness {
    /// Checks the witness conditions from scratch.
    pub fn is_valid(&self, q: &ConjunctiveQuery) -> bool {
        let Some(i) = q.atom_index(&self.source) else {
            return false;
        };
        let Some(first) = self.path.first() else {
            return false;
        };
        let cl = keycl(q, i);
        let bound = q.bound_vars();
        let graph = q.query_graph();
        q.atoms()[i].notkey_vars().contains(first)
            && self.path.last() == Some(&self.target)
            && self
                .path
                .iter()
                .all(|v| bound.contains(v) && !cl.contains(v))
            && self.path.windows(2).all(|w| graph.has_edge(&w[0], &w[1]))
    }
}

impl fmt::Display for AttackWitness {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let path: Vec<&str> = self.path.iter().map(Variable::name).collect();
        write!(
            f,
            "{} attacks {} via <{}>",
            self.source,
            self.target,
            path.join(", ")
        )
    }
}

/// Shortest witness of the atom at `index` attacking some variable in `targets`.
fn witness_to(
    q: &ConjunctiveQuery,
    index: usize,
    keycl: &VarSet,
    targets: &VarSet,
) -> Option<AttackWitness> {
    let sources = witness_sources(q, index, keycl);
    let path = q
        .query_graph()
        .shortest_path_avoiding(&sources, targets, keycl)?;
    Some(AttackWitness {
        source: q.atoms()[index].relation().to_string(),
        target: path.last().cloned().expect("paths are nonempty"),
        path,
    })
}

/// A witness for `F ⇝ x` where `F` is the atom at `index`, if `F` attacks `x`.
pub fn attacks_variable(q: &ConjunctiveQuery, index: usize, x: &Variable) -> Option<AttackWitness> {
    let cl = keycl(q, index);
    witness_to(q, index, &cl, &[x.clone()].into())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum AttackKind {
    Weak,
    Strong,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AttackEdge {
    pub from: usize,
    pub to: usize,
    pub kind: AttackKind,
    pub witness: AttackWitness,
}

/// The attack graph of a query. Atoms are referred to by their index in
/// the query body.
#[derive(Debug, Clone)]
pub struct AttackGraph {
    query: ConjunctiveQuery,
    keycl: Vec<VarSet>,
    attacked: Vec<VarSet>,
    edges: Vec<AttackEdge>,
}

impl AttackGraph {
    pub fn of(q: &ConjunctiveQuery) -> Self {
        let n = q.atoms().len();
        let sigma = FunctionalDependencySet::of_query(q);
        let keycls: Vec<VarSet> = (0..n).map(|i| keycl(q, i)).collect();
        let attacked: Vec<VarSet> = (0..n).map(|i| attacked_vars(q, i, &keycls[i])).collect();
        let mut edges = Vec::new();
        for f in 0..n {
            for g in 0..n {
                if f == g {
                    continue;
                }
                let target = &q.atoms()[g];
                if attacked[f].is_disjoint(&target.vars()) {
                    continue;
                }
                let witness = witness_to(q, f, &keycls[f], &target.key_vars())
                    .or_else(|| witness_to(q, f, &keycls[f], &target.vars()))
                    .expect("an attacked variable has a witness");
                let kind = if sigma.implies_all(&q.atoms()[f].key_vars(), &target.key_vars()) {
                    AttackKind::Weak
                } else {
                    AttackKind::Strong
                };
                edges.push(AttackEdge {
                    from: f,
                    to: g,
                    kind,
                    witness,
                });
            }
        }
        AttackGraph {
            query: q.clone(),
            keycl: keycls,
            attacked,
            edges,
        }
    }

    pub fn query(&self) -> &ConjunctiveQuery {
        &self.query
    }

    pub fn len(&self) -> usize {
        self.query.atoms().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn relation(&self, i: usize) -> &str {
        self.query.atoms()[i].relation()
    }

    pub fn edges(&self) -> &[AttackEdge] {
        &self.edges
    }

    pub fn edge(&self, from: usize, to: usize) -> Option<&AttackEdge> {
        self.edges.iter().find(|e| e.from == from && e.to == to)
    }

    pub fn attacks(&self, from: usize, to: usize) -> bool {
        self.edge(from, to).is_some()
    }

    /// `keycl(F, q)` of the atom at `i`.
    pub fn keycl(&self, i: usize) -> &VarSet {
        &self.keycl[i]
    }

    /// Bound variables attacked by the atom at `i`.
    pub fn attacked_by(&self, i: usize) -> &VarSet {
        &self.attacked[i]
    }

    /// Atoms that attack `x`, in body order.
    pub fn attackers_of(&self, x: &Variable) -> Vec<usize> {
        (0..self.len())
            .filter(|&i| self.attacked[i].contains(x))
            .collect()
    }

    /// Every variable attacked by some atom.
    pub fn attacked_vars(&self) -> VarSet {
        self.attacked.iter().flatten().cloned().collect()
    }

    pub fn strong_edges(&self) -> impl Iterator<Item = &AttackEdge> {
        self.edges.iter().filter(|e| e.kind == AttackKind::Strong)
    }

    pub fn has_strong_attack(&self) -> bool {
        self.strong_edges().next().is_some()
    }

    /// Atom indices sorted by relation name.
    fn by_name(&self, mut atoms: Vec<usize>) -> Vec<usize> {
        atoms.sort_by(|a, b| self.relation(*a).cmp(self.relation(*b)));
        atoms
    }

    /// A directed cycle, as the atoms along it, if there is one.
    pub fn find_cycle(&self) -> Option<Vec<usize>> {
        #[derive(Clone, Copy, PartialEq)]
        enum Mark {
            New,
            Active,
            Done,
        }
        let n = self.len();
        let succ: Vec<Vec<usize>> = (0..n)
            .map(|f| {
                self.by_name(
                    self.edges
                        .iter()
                        .filter(|e| e.from == f)
                        .map(|e| e.to)
                        .collect(),
                )
            })
            .collect();
        let mut mark = vec![Mark::New; n];
        for root in self.by_name((0..n).collect()) {
            if mark[root] != Mark::New {
                continue;
            }
            let mut stack: Vec<(usize, usize)> = vec![(root, 0)];
            mark[root] = Mark::Active;
            while let Some(&mut (v, ref mut next)) = stack.last_mut() {
                if let Some(&w) = succ[v].get(*next) {
                    *next += 1;
                    match mark[w] {
                        Mark::New => {
                            mark[w] = Mark::Active;
                            stack.push((w, 0));
                        }
                        Mark::Active => {
                            let start = stack.iter().position(|(u, _)| *u == w).unwrap();
                            return Some(stack[start..].iter().map(|(u, _)| *u).collect());
                        }
                        Mark::Done => {}
                    }
                } else {
                    mark[v] = Mark::Done;
                    stack.pop();
                }
            }
        }
        None
    }

    pub fn is_acyclic(&self) -> bool {
        self.find_cycle().is_none()
    }

    /// Maximal weakly connected components. Each is sorted by relation
    /// name; components are ordered by their first relation name.
    pub fn components(&self) -> Vec<Vec<usize>> {
        let n = self.len();
        let mut parent: Vec<usize> = (0..n).collect();
        fn find(parent: &mut [usize], x: usize) -> usize {
            let mut r = x;
            while parent[r] != r {
                r = parent[r];
            }
            parent[x] = r;
            r
        }
        for e in &self.edges {
            let (a, b) = (find(&mut parent, e.from), find(&mut parent, e.to));
            parent[a] = b;
        }
        let mut groups: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
        for i in 0..n {
            let r = find(&mut parent, i);
            groups.entry(r).or_default().push(i);
        }
        let mut out: Vec<Vec<usize>> = groups.into_values().map(|g| self.by_name(g)).collect();
        out.sort_by(|a, b| self.relation(a[0]).cmp(self.relation(b[0])));
        out
    }

    /// Atoms without incoming attacks, sorted by relation name.
    pub fn unattacked(&self) -> Vec<usize> {
        self.by_name(
            (0..self.len())
                .filter(|&i| !self.edges.iter().any(|e| e.to == i))
                .collect(),
        )
    }

    pub fn is_transitive(&self) -> bool {
        self.edges.iter().all(|e1| {
            self.edges
                .iter()
                .filter(|e2| e2.from == e1.to && e2.to != e1.from)
                .all(|e2| self.attacks(e1.from, e2.to))
        })
    }

    /// Graphviz rendering: weak attacks are solid, strong attacks bold.
    pub fn to_dot(&self) -> String {
        let mut out = String::from("digraph attack {\n");
        for i in self.by_name((0..self.len()).collect()) {
            let _ = writeln!(out, "  \"{}\";", self.relation(i));
        }
        let mut edges: Vec<&AttackEdge> = self.edges.iter().collect();
        edges.sort_by(|a, b| {
            (self.relation(a.from), self.relation(a.to))
                .cmp(&(self.relation(b.from), self.relation(b.to)))
        });
        for e in edges {
            let style = match e.kind {
                AttackKind::Weak => "solid",
                AttackKind::Strong => "bold",
            };
            let _ = writeln!(
                out,
                "  \"{}\" -> \"{}\" [style={style}];",
                self.relation(e.from),
                self.relation(e.to)
            );
        }
        out.push_str("}\n");
        out
    }
}

/// Frozen variables with, for each, a sequential proof of `∅ → y` built
/// from atoms that do not attack `y`.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct FrozenSet {
    pub vars: VarSet,
    pub certificates: BTreeMap<Variable, SequentialProof>,
}

impl FrozenSet {
    pub fn contains(&self, v: &Variable) -> bool {
        self.vars.contains(v)
    }
}

pub fn frozen_vars(q: &ConjunctiveQuery) -> FrozenSet {
    frozen_vars_in(&AttackGraph::of(q))
}

pub fn frozen_vars_in(graph: &AttackGraph) -> FrozenSet {
    let q = graph.query();
    let mut out = FrozenSet::default();
    for y in q.bound_vars() {
        let allowed: Vec<usize> = (0..graph.len())
            .filter(|&i| !graph.attacked_by(i).contains(&y))
            .collect();
        if let Some(proof) = sequential_proof_within(q, &allowed, &VarSet::new(), &y) {
            out.vars.insert(y.clone());
            out.certificates.insert(y, proof);
        }
    }
    out
}
