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

//! Functional dependencies induced by a query's keys, closure, and
//! sequential proofs.

use std::collections::BTreeMap;
use std::fmt;

use thiserror::Error;

use crate::query::{Atom, ConjunctiveQuery, VarSet, Variable};

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct FunctionalDependency {
    pub lhs: VarSet,
    pub rhs: VarSet,
}

impl fmt::Display for FunctionalDependency {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{{}}} -> {{{}}}", join(&self.lhs), join(&self.rhs))
    }
}

pub(crate) fn join(vars: &VarSet) -> String {
    vars.iter()
        .map(Variable::name)
        .collect::<Vec<_>>()
        .join(", ")
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum FdError {
    #[error("variable {0} does not occur in the query")]
    UnknownVariable(Variable),
}

/// `fdset(q)`: the dependency `∅ → free(q)` followed by `key(F) → vars(F)`
/// for every atom, in body order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FunctionalDependencySet {
    deps: Vec<FunctionalDependency>,
    universe: VarSet,
    free: VarSet,
}

impl FunctionalDependencySet {
    pub fn of_query(q: &ConjunctiveQuery) -> Self {
        Self::of_atoms(q, q.atoms().iter())
    }

    /// `∅ → free(q)` plus the key dependencies of the given atoms only.
    pub fn of_atoms<'a>(q: &ConjunctiveQuery, atoms: impl IntoIterator<Item = &'a Atom>) -> Self {
        let free = q.free_set();
        let mut deps = vec![FunctionalDependency {
            lhs: VarSet::new(),
            rhs: free.clone(),
        }];
        deps.extend(atoms.into_iter().map(|a| FunctionalDependency {
            lhs: a.key_vars(),
            rhs: a.vars(),
        }));
        FunctionalDependencySet {
            deps,
            universe: q.vars(),
            free,
        }
    }

    /// Builds a set from explicit dependencies. `∅ → free` is prepended.
    pub fn from_parts(universe: VarSet, free: VarSet, deps: Vec<FunctionalDependency>) -> Self {
        let mut all = vec![FunctionalDependency {
            lhs: VarSet::new(),
            rhs: free.clone(),
        }];
        all.extend(deps);
        let mut universe = universe;
        for d in &all {
            universe.extend(d.lhs.iter().cloned());
            universe.extend(d.rhs.iter().cloned());
        }
        FunctionalDependencySet {
            deps: all,
            universe,
            free,
        }
    }

    pub fn deps(&self) -> &[FunctionalDependency] {
        &self.deps
    }

    pub fn universe(&self) -> &VarSet {
        &self.universe
    }

    pub fn free(&self) -> &VarSet {
        &self.free
    }

    /// Every variable `v` with `Σ ⊨ X → v`. Variables of `X` outside the
    /// universe are carried along unchanged.
    pub fn closure(&self, x: &VarSet) -> VarSet {
        // Counting algorithm: each dependency fires once all of its
        // left-hand side has been derived.
        let mut uses: BTreeMap<&Variable, Vec<usize>> = BTreeMap::new();
        for (i, d) in self.deps.iter().enumerate() {
            for v in &d.lhs {
                uses.entry(v).or_default().push(i);
            }
        }
        let mut missing: Vec<usize> = self.deps.iter().map(|d| d.lhs.len()).collect();
        let mut result = x.clone();
        let mut queue: Vec<Variable> = x.iter().cloned().collect();
        let fire = |i: usize, result: &mut VarSet, queue: &mut Vec<Variable>| {
            for v in &self.deps[i].rhs {
                if result.insert(v.clone()) {
                    queue.push(v.clone());
                }
            }
        };
        let ready: Vec<usize> = (0..self.deps.len()).filter(|&i| missing[i] == 0).collect();
        for i in ready {
            fire(i, &mut result, &mut queue);
        }
        while let Some(v) = queue.pop() {
            for &i in uses.get(&v).map(Vec::as_slice).unwrap_or(&[]) {
                missing[i] -= 1;
                if missing[i] == 0 {
                    fire(i, &mut result, &mut queue);
                }
            }
        }
        result
    }

    /// Like [`closure`](Self::closure) but rejects variables outside the universe.
    pub fn try_closure(&self, x: &VarSet) -> Result<VarSet, FdError> {
        if let Some(v) = x.iter().find(|v| !self.universe.contains(*v)) {
            return Err(FdError::UnknownVariable(v.clone()));
        }
        Ok(self.closure(x))
    }

    pub fn implies(&self, x: &VarSet, y: &Variable) -> bool {
        x.contains(y) || self.closure(x).contains(y)
    }

    pub fn implies_all(&self, x: &VarSet, ys: &VarSet) -> bool {
        ys.is_subset(x) || ys.is_subset(&self.closure(x))
    }
}

impl fmt::Display for FunctionalDependencySet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, d) in self.deps.iter().enumerate() {
            if i > 0 {
                f.write_str("; ")?;
            }
            write!(f, "{d}")?;
        }
        Ok(())
    }
}

/// A sequence `⟨F₁, …, Fₙ⟩` of atoms in which every key is covered by
/// `free(q) ∪ Z` and the variables of the atoms before it, and whose
/// variables together with `free(q) ∪ Z` contain `target`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SequentialProof {
    pub atoms: Vec<Atom>,
    pub base: VarSet,
    pub target: Variable,
}

impl SequentialProof {
    /// Re-checks the proof conditions against `free`.
    pub fn is_valid(&self, free: &VarSet) -> bool {
        is_proof(self.atoms.iter(), free, &self.base, &self.target)
    }

    pub fn relations(&self) -> Vec<&str> {
        self.atoms.iter().map(Atom::relation).collect()
    }
}

impl fmt::Display for SequentialProof {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "<")?;
        for (i, a) in self.atoms.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{a}")?;
        }
        write!(f, "> proves {{{}}} -> {}", join(&self.base), self.target)
    }
}

fn is_proof<'a>(
    atoms: impl Iterator<Item = &'a Atom>,
    free: &VarSet,
    base: &VarSet,
    target: &Variable,
) -> bool {
    let mut known: VarSet = free.union(base).cloned().collect();
    for a in atoms {
        if !a.key_vars().is_subset(&known) {
            return false;
        }
        known.extend(a.vars());
    }
    known.contains(target)
}

/// A sequential proof of `fdset(q) ⊨ Z → w`, if one exists.
pub fn sequential_proof(q: &ConjunctiveQuery, z: &VarSet, w: &Variable) -> Option<SequentialProof> {
    let all: Vec<usize> = (0..q.atoms().len()).collect();
    sequential_proof_within(q, &all, z, w)
}

/// A sequential proof of `Z → w` that only uses the atoms at `allowed`.
///
/// Atoms are added greedily in body order until `w` is derived; the atom
/// that derives `w` comes last, so dropping it breaks the proof. Earlier
/// atoms are then dropped back to front whenever the rest remains a proof.
pub fn sequential_proof_within(
    q: &ConjunctiveQuery,
    allowed: &[usize],
    z: &VarSet,
    w: &Variable,
) -> Option<SequentialProof> {
    let free = q.free_set();
    let mut known: VarSet = free.union(z).cloned().collect();
    let mut chosen: Vec<usize> = Vec::new();
    while !known.contains(w) {
        let next = allowed
            .iter()
            .copied()
            .find(|i| !chosen.contains(i) && q.atoms()[*i].key_vars().is_subset(&known))?;
        chosen.push(next);
        known.extend(q.atoms()[next].vars());
    }
    let mut i = chosen.len().saturating_sub(1);
    while i > 0 {
        i -= 1;
        let mut trial = chosen.clone();
        trial.remove(i);
        if is_proof(trial.iter().map(|j| &q.atoms()[*j]), &free, z, w) {
            chosen = trial;
        }
    }
    Some(SequentialProof {
        atoms: chosen.iter().map(|j| q.atoms()[*j].clone()).collect(),
        base: z.clone(),
        target: w.clone(),
    })
}
