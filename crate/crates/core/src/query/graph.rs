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

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt::Write;

use super::{ConjunctiveQuery, VarSet, Variable};

/// Undirected graph over the bound variables of a query; `x` and `y` are adjacent iff `x ≠ y`
/// and both occur in a common atom.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QueryGraph {
    adjacency: BTreeMap<Variable, VarSet>,
}

impl QueryGraph {
    pub fn of(q: &ConjunctiveQuery) -> Self {
        let bound = q.bound_vars();
        let mut adjacency: BTreeMap<Variable, VarSet> =
            bound.iter().map(|v| (v.clone(), VarSet::new())).collect();
        for atom in q.atoms() {
            let vars: Vec<Variable> = atom
                .vars()
                .into_iter()
                .filter(|v| bound.contains(v))
                .collect();
            for x in &vars {
                for y in &vars {
                    if x != y {
                        adjacency.get_mut(x).unwrap().insert(y.clone());
                    }
                }
            }
        }
        QueryGraph { adjacency }
    }

    pub fn vertices(&self) -> impl Iterator<Item = &Variable> {
        self.adjacency.keys()
    }

    pub fn contains(&self, v: &Variable) -> bool {
        self.adjacency.contains_key(v)
    }

    pub fn neighbors(&self, v: &Variable) -> impl Iterator<Item = &Variable> {
        self.adjacency.get(v).into_iter().flatten()
    }

    pub fn has_edge(&self, x: &Variable, y: &Variable) -> bool {
        self.adjacency.get(x).is_some_and(|n| n.contains(y))
    }

    /// Each undirected edge once, as `(smaller, larger)`.
    pub fn edges(&self) -> Vec<(Variable, Variable)> {
        let mut out = Vec::new();
        for (x, ns) in &self.adjacency {
            for y in ns {
                if x < y {
                    out.push((x.clone(), y.clone()));
                }
            }
        }
        out
    }

    /// Shortest path from any vertex in `sources` to any vertex in `targets`
    /// that only visits vertices outside `blocked`. A vertex in both
    /// `sources` and `targets` yields the one-vertex path.
    pub fn shortest_path_avoiding(
        &self,
        sources: &VarSet,
        targets: &VarSet,
        blocked: &VarSet,
    ) -> Option<Vec<Variable>> {
        let mut parent: BTreeMap<Variable, Option<Variable>> = BTreeMap::new();
        let mut queue = VecDeque::new();
        for s in sources {
            if self.contains(s) && !blocked.contains(s) {
                parent.insert(s.clone(), None);
                queue.push_back(s.clone());
            }
        }
        while let Some(v) = queue.pop_front() {
            if targets.contains(&v) {
                let mut path = vec![v.clone()];
                let mut cur = v;
                while let Some(Some(p)) = parent.get(&cur) {
                    path.push(p.clone());
                    cur = p.clone();
                }
                path.reverse();
                return Some(path);
            }
            for n in self.neighbors(&v) {
                if !blocked.contains(n) && !parent.contains_key(n) {
                    parent.insert(n.clone(), Some(v.clone()));
                    queue.push_back(n.clone());
                }
            }
        }
        None
    }

    /// Vertices reachable from `sources` through vertices outside `blocked`.
    pub fn reachable_avoiding(&self, sources: &VarSet, blocked: &VarSet) -> VarSet {
        let mut seen = BTreeSet::new();
        let mut stack: Vec<Variable> = sources
            .iter()
            .filter(|s| self.contains(s) && !blocked.contains(*s))
            .cloned()
            .collect();
        while let Some(v) = stack.pop() {
            if !seen.insert(v.clone()) {
                continue;
            }
            for n in self.neighbors(&v) {
                if !blocked.contains(n) && !seen.contains(n) {
                    stack.push(n.clone());
                }
            }
        }
        seen
    }

    pub fn to_dot(&self) -> String {
        let mut out = String::from("graph query {\n");
        for v in self.vertices() {
            let _ = writeln!(out, "  \"{v}\";");
        }
        for (x, y) in self.edges() {
            let _ = writeln!(out, "  \"{x}\" -- \"{y}\";");
        }
        out.push_str("}\n");
        out
    }
}
