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

//! Membership tests for the parsimonious-counting class (with a minimal
//! id-set or a violation certificate) and for Fuxman's forest class.

use std::fmt::{self, Write};

use thiserror::Error;

use crate::attack::{frozen_vars_in, AttackGraph, FrozenSet};
use crate::fd::{join, FunctionalDependencySet};
use crate::query::{ConjunctiveQuery, VarSet, Variable};

/// Why a query, or a proposed id-set, fails.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    /// The attack graph has a directed cycle through these atoms.
    Cycle {
        atoms: Vec<String>,
    },
    StrongAttack {
        from: String,
        to: String,
        path: Vec<Variable>,
    },
    /// No unattacked atom of this component has its key determined by the id-set.
    UndeterminedComponent {
        atoms: Vec<String>,
    },
    /// A query-graph path from `notkey(atom)` to the id-set that avoids
    /// `key(atom)` and the frozen variables.
    Separation {
        atom: String,
        path: Vec<Variable>,
    },
    NotBound {
        var: Variable,
    },
}

impl Violation {
    pub fn kind(&self) -> &'static str {
        match self {
            Violation::Cycle { .. } => "cycle",
            Violation::StrongAttack { .. } => "strong-attack",
            Violation::UndeterminedComponent { .. } => "undetermined-component",
            Violation::Separation { .. } => "separation",
            Violation::NotBound { .. } => "not-bound",
        }
    }

    /// The atom the certificate is about, when there is a single one.
    pub fn atom(&self) -> Option<&str> {
        match self {
            Violation::StrongAttack { to, .. } => Some(to),
            Violation::Separation { atom, .. } => Some(atom),
            _ => None,
        }
    }

    pub fn path(&self) -> Vec<String> {
        match self {
            Violation::Cycle { atoms } | Violation::UndeterminedComponent { atoms } => {
                atoms.clone()
            }
            Violation::StrongAttack { path, .. } | Violation::Separation { path, .. } => {
                path.iter().map(|v| v.name().to_string()).collect()
            }
            Violation::NotBound { var } => vec![var.name().to_string()],
        }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::Cycle { atoms } => write!(f, "attack cycle {}", atoms.join(" -> ")),
            Violation::StrongAttack { from, to, path } => {
                let p: Vec<&str> = path.iter().map(Variable::name).collect();
                write!(f, "strong attack {from} -> {to} via <{}>", p.join(", "))
            }
            Violation::UndeterminedComponent { atoms } => write!(
                f,
                "no unattacked atom of component {{{}}} has its key determined by the id-set",
                atoms.join(", ")
            ),
            Violation::Separation { atom, path } => {
                let p: Vec<&str> = path.iter().map(Variable::name).collect();
                write!(f, "path <{}> from notkey({atom}) reaches the id-set avoiding key({atom}) and frozen variables", p.join(", "))
            }
            Violation::NotBound { var } => write!(f, "{var} is not a bound variable"),
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ClassifyError {
    #[error("attack graph is cyclic: {0}")]
    Cyclic(Violation),
}

fn names(g: &AttackGraph, atoms: &[usize]) -> Vec<String> {
    atoms.iter().map(|&i| g.relation(i).to_string()).collect()
}

fn cycle_violation(g: &AttackGraph) -> Option<Violation> {
    g.find_cycle().map(|c| Violation::Cycle {
        atoms: names(g, &c),
    })
}

/// `V`: the bound key variables of unattacked atoms that occur in no
/// non-key position. When the query has an id-set, `V` is its unique
/// minimal one.
pub fn candidate_id_set(g: &AttackGraph) -> Result<VarSet, ClassifyError> {
    if let Some(v) = cycle_violation(g) {
        return Err(ClassifyError::Cyclic(v));
    }
    let q = g.query();
    let nonkey: VarSet = q.atoms().iter().flat_map(|a| a.notkey_vars()).collect();
    let bound = q.bound_vars();
    Ok(g.unattacked()
        .into_iter()
        .flat_map(|i| q.atoms()[i].key_vars())
        .filter(|v| bound.contains(v) && !nonkey.contains(v))
        .collect())
}

/// Checks both id-set conditions for `x`, returning the first failure.
pub fn check_id_set(g: &AttackGraph, frozen: &FrozenSet, x: &VarSet) -> Result<(), Violation> {
    let q = g.query();
    let bound = q.bound_vars();
    if let Some(v) = x.iter().find(|v| !bound.contains(*v)) {
        return Err(Violation::NotBound { var: v.clone() });
    }
    let sigma = FunctionalDependencySet::of_query(q);
    let determined = sigma.closure(x);
    let unattacked = g.unattacked();
    for component in g.components() {
        let ok = component
            .iter()
            .any(|i| unattacked.contains(i) && q.atoms()[*i].key_vars().is_subset(&determined));
        if !ok {
            return Err(Violation::UndeterminedComponent {
                atoms: names(g, &component),
            });
        }
    }
    let graph = q.query_graph();
    let mut order: Vec<usize> = (0..q.atoms().len()).collect();
    order.sort_by(|a, b| g.relation(*a).cmp(g.relation(*b)));
    for i in order {
        let atom = &q.atoms()[i];
        let mut blocked = atom.key_vars();
        blocked.extend(frozen.vars.iter().cloned());
        if let Some(path) = graph.shortest_path_avoiding(&atom.notkey_vars(), x, &blocked) {
            return Err(Violation::Separation {
                atom: atom.relation().to_string(),
                path,
            });
        }
    }
    Ok(())
}

/// Whether `x` is an id-set for `q`.
pub fn is_id_set(q: &ConjunctiveQuery, x: &[Variable]) -> Result<(), Violation> {
    let g = AttackGraph::of(q);
    let frozen = frozen_vars_in(&g);
    check_id_set(&g, &frozen, &x.iter().cloned().collect())
}

#[derive(Debug, Clone)]
pub struct ClassificationReport {
    pub acyclic: bool,
    pub strong_attacks: Vec<(String, String)>,
    /// The minimal id-set in sorted order, when the query is in the class.
    pub id_set: Option<Vec<Variable>>,
    pub frozen: VarSet,
    pub violation: Option<Violation>,
    pub in_cparsimony: bool,
    pub in_cforest: bool,
}

impl fmt::Display for ClassificationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "acyclic\t{}", self.acyclic)?;
        let strong: Vec<String> = self
            .strong_attacks
            .iter()
            .map(|(a, b)| format!("{a}->{b}"))
            .collect();
        writeln!(f, "strong_attacks\t{}", strong.join(", "))?;
        writeln!(f, "frozen\t{}", join(&self.frozen))?;
        match &self.id_set {
            Some(x) => writeln!(f, "id_set\t{}", join(&x.iter().cloned().collect()))?,
            None => writeln!(f, "id_set\t-")?,
        }
        writeln!(f, "cparsimony\t{}", self.in_cparsimony)?;
        writeln!(f, "cforest\t{}", self.in_cforest)?;
        if let Some(v) = &self.violation {
            writeln!(f, "violation\t{v}")?;
        }
        Ok(())
    }
}

pub fn classify(q: &ConjunctiveQuery) -> ClassificationReport {
    classify_with(&AttackGraph::of(q))
}

pub fn classify_with(g: &AttackGraph) -> ClassificationReport {
    let q = g.query();
    let frozen = frozen_vars_in(g);
    let cycle = cycle_violation(g);
    let mut strong: Vec<_> = g.strong_edges().collect();
    strong.sort_by(|a, b| {
        (g.relation(a.from), g.relation(a.to)).cmp(&(g.relation(b.from), g.relation(b.to)))
    });
    let strong_attacks = strong
        .iter()
        .map(|e| (g.relation(e.from).to_string(), g.relation(e.to).to_string()))
        .collect();
    let mut violation = cycle.clone().or_else(|| {
        strong.first().map(|e| Violation::StrongAttack {
            from: g.relation(e.from).to_string(),
            to: g.relation(e.to).to_string(),
            path: e.witness.path.clone(),
        })
    });
    let mut id_set = None;
    if violation.is_none() {
        let v = candidate_id_set(g).expect("acyclic");
        match check_id_set(g, &frozen, &v) {
            Ok(()) => id_set = Some(v.into_iter().collect()),
            Err(e) => violation = Some(e),
        }
    }
    ClassificationReport {
        acyclic: cycle.is_none(),
        strong_attacks,
        in_cparsimony: id_set.is_some(),
        id_set,
        frozen: frozen.vars,
        violation,
        in_cforest: in_cforest(q),
    }
}

pub fn in_cparsimony(q: &ConjunctiveQuery) -> bool {
    classify(q).in_cparsimony
}

/// Directed graph over atoms with `R → S` iff `R ≠ S` and some bound
/// variable of `notkey(R)` occurs in `S`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FuxmanGraph {
    relations: Vec<String>,
    edges: Vec<(usize, usize)>,
}

impl FuxmanGraph {
    pub fn of(q: &ConjunctiveQuery) -> Self {
        let bound = q.bound_vars();
        let mut edges = Vec::new();
        for (r, ra) in q.atoms().iter().enumerate() {
            let out: VarSet = ra
                .notkey_vars()
                .into_iter()
                .filter(|v| bound.contains(v))
                .collect();
            for (s, sa) in q.atoms().iter().enumerate() {
                if r != s && out.iter().any(|v| sa.mentions(v)) {
                    edges.push((r, s));
                }
            }
        }
        FuxmanGraph {
            relations: q.atoms().iter().map(|a| a.relation().to_string()).collect(),
            edges,
        }
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn edge_names(&self) -> Vec<(String, String)> {
        let mut out: Vec<_> = self
            .edges
            .iter()
            .map(|&(r, s)| (self.relations[r].clone(), self.relations[s].clone()))
            .collect();
        out.sort();
        out
    }

    /// Every vertex has at most one parent and there is no directed cycle.
    pub fn is_forest(&self) -> bool {
        let n = self.relations.len();
        let mut parent = vec![None; n];
        for &(r, s) in &self.edges {
            if parent[s].replace(r).is_some() {
                return false;
            }
        }
        // With in-degree at most one, a cycle shows up as a parent chain
        // longer than the number of vertices.
        (0..n).all(|v| {
            let mut cur = v;
            for _ in 0..=n {
                match parent[cur] {
                    Some(p) if p == v => return false,
                    Some(p) => cur = p,
                    None => return true,
                }
            }
            false
        })
    }

    pub fn to_dot(&self) -> String {
        let mut out = String::from("digraph fuxman {\n");
        let mut rels = self.relations.clone();
        rels.sort();
        for r in rels {
            let _ = writeln!(out, "  \"{r}\";");
        }
        for (r, s) in self.edge_names() {
            let _ = writeln!(out, "  \"{r}\" -> \"{s}\";");
        }
        out.push_str("}\n");
        out
    }
}

pub fn in_cforest(q: &ConjunctiveQuery) -> bool {
    let g = FuxmanGraph::of(q);
    let free = q.free_set();
    g.is_forest()
        && g.edges().iter().all(|&(r, s)| {
            let notkey = q.atoms()[r].notkey_vars();
            q.atoms()[s]
                .key_vars()
                .iter()
                .all(|v| free.contains(v) || notkey.contains(v))
        })
}
