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

//! Relation signatures, atoms and self-join-free conjunctive queries.
//!
//! A query `q(z⃗) = ∃w⃗ R₁(x⃗₁ | y⃗₁) ∧ … ∧ Rₙ(x⃗ₙ | y⃗ₙ)` is stored as an ordered
//! list of atoms plus the ordered tuple of free variables. Every variable that
//! is not free is bound; the quantifier prefix is never written down.
//!
//! Key positions always precede non-key positions, so a signature is just the
//! pair (arity, key width).

mod graph;
mod parse;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::sync::Arc;

use thiserror::Error;

pub use graph::QueryGraph;
pub use parse::{parse_query, ParseError};

/// Ordered set of variables. Ordering is lexicographic on the variable name.
pub type VarSet = BTreeSet<Variable>;

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Variable(Arc<str>);

impl Variable {
    pub fn new(name: impl AsRef<str>) -> Self {
        Variable(Arc::from(name.as_ref()))
    }

    pub fn name(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for Variable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for Variable {
    fn from(s: &str) -> Self {
        Variable::new(s)
    }
}

/// An opaque constant. Constants compare as strings, also when they look
/// numeric (`"10" < "9"`).
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Constant(Arc<str>);

impl Constant {
    pub fn new(value: impl AsRef<str>) -> Self {
        Constant(Arc::from(value.as_ref()))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for Constant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for Constant {
    fn from(s: &str) -> Self {
        Constant::new(s)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Term {
    Var(Variable),
    Const(Constant),
}

impl Term {
    pub fn var(name: &str) -> Self {
        Term::Var(Variable::new(name))
    }

    pub fn constant(value: &str) -> Self {
        Term::Const(Constant::new(value))
    }

    pub fn as_var(&self) -> Option<&Variable> {
        match self {
            Term::Var(v) => Some(v),
            Term::Const(_) => None,
        }
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::Var(v) => write!(f, "{v}"),
            Term::Const(c) => write!(f, "'{c}'"),
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum QueryError {
    #[error("relation {0} has arity 0")]
    ZeroArity(String),
    #[error("relation {name}: key width {key_width} exceeds arity {arity}")]
    KeyWiderThanArity {
        name: String,
        arity: usize,
        key_width: usize,
    },
    #[error("atom {name} has {found} arguments but its signature has arity {arity}")]
    ArgumentCount {
        name: String,
        arity: usize,
        found: usize,
    },
    #[error("relation {0} occurs more than once (self-joins are not supported)")]
    SelfJoin(String),
    #[error("free variable {0} listed twice")]
    DuplicateFreeVariable(Variable),
    #[error("free variable {0} does not occur in any atom")]
    DanglingFreeVariable(Variable),
    #[error("variable {0} is not a bound variable of the query")]
    NotBound(Variable),
    #[error("variable {0} is not a free variable of the query")]
    NotFree(Variable),
    #[error("variable {0} listed twice")]
    DuplicateVariable(Variable),
    #[error("substitution arity mismatch: {variables} variables, {constants} constants")]
    SubstitutionArity { variables: usize, constants: usize },
    #[error("no atom with relation {0}")]
    UnknownAtom(String),
}

/// Signature `⟨arity, key_width⟩` of a relation name; key positions are `0..key_width`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct RelationSignature {
    name: String,
    arity: usize,
    key_width: usize,
}

impl RelationSignature {
    pub fn new(
        name: impl Into<String>,
        arity: usize,
        key_width: usize,
    ) -> Result<Self, QueryError> {
        let name = name.into();
        if arity == 0 {
            return Err(QueryError::ZeroArity(name));
        }
        if key_width > arity {
            return Err(QueryError::KeyWiderThanArity {
                name,
                arity,
                key_width,
            });
        }
        Ok(RelationSignature {
            name,
            arity,
            key_width,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn arity(&self) -> usize {
        self.arity
    }

    pub fn key_width(&self) -> usize {
        self.key_width
    }
}

impl fmt::Display for RelationSignature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} arity={} key={}",
            self.name, self.arity, self.key_width
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Atom {
    signature: RelationSignature,
    args: Vec<Term>,
}

impl Atom {
    pub fn new(signature: RelationSignature, args: Vec<Term>) -> Result<Self, QueryError> {
        if args.len() != signature.arity() {
            return Err(QueryError::ArgumentCount {
                name: signature.name().to_string(),
                arity: signature.arity(),
                found: args.len(),
            });
        }
        Ok(Atom { signature, args })
    }

    /// Builds an atom whose signature is read off the split point between
    /// `key` and `nonkey`.
    pub fn with_parts(
        relation: &str,
        key: Vec<Term>,
        nonkey: Vec<Term>,
    ) -> Result<Self, QueryError> {
        let signature = RelationSignature::new(relation, key.len() + nonkey.len(), key.len())?;
        let mut args = key;
        args.extend(nonkey);
        Atom::new(signature, args)
    }

    pub fn relation(&self) -> &str {
        self.signature.name()
    }

    pub fn signature(&self) -> &RelationSignature {
        &self.signature
    }

    pub fn args(&self) -> &[Term] {
        &self.args
    }

    pub fn key_terms(&self) -> &[Term] {
        &self.args[..self.signature.key_width()]
    }

    pub fn nonkey_terms(&self) -> &[Term] {
        &self.args[self.signature.key_width()..]
    }

    /// `key(F)`: variables at key positions.
    pub fn key_vars(&self) -> VarSet {
        self.key_terms()
            .iter()
            .filter_map(Term::as_var)
            .cloned()
            .collect()
    }

    /// `notkey(F)`: variables at non-key positions that do not also occur in the key.
    pub fn notkey_vars(&self) -> VarSet {
        let key = self.key_vars();
        self.nonkey_terms()
            .iter()
            .filter_map(Term::as_var)
            .filter(|v| !key.contains(*v))
            .cloned()
            .collect()
    }

    pub fn vars(&self) -> VarSet {
        self.args.iter().filter_map(Term::as_var).cloned().collect()
    }

    pub fn mentions(&self, v: &Variable) -> bool {
        self.args.iter().any(|t| t.as_var() == Some(v))
    }

    /// Replaces every variable in `map` by its constant.
    pub fn ground(&self, map: &BTreeMap<Variable, Constant>) -> Atom {
        let args = self
            .args
            .iter()
            .map(|t| match t {
                Term::Var(v) => map
                    .get(v)
                    .map_or_else(|| t.clone(), |c| Term::Const(c.clone())),
                Term::Const(_) => t.clone(),
            })
            .collect();
        Atom {
            signature: self.signature.clone(),
            args,
        }
    }
}

impl fmt::Display for Atom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}(", self.relation())?;
        let key = self.key_terms();
        let nonkey = self.nonkey_terms();
        write_terms(f, key)?;
        if !nonkey.is_empty() {
            if key.is_empty() {
                f.write_str("| ")?;
            } else {
                f.write_str(" | ")?;
            }
            write_terms(f, nonkey)?;
        }
        f.write_str(")")
    }
}

fn write_terms(f: &mut fmt::Formatter<'_>, terms: &[Term]) -> fmt::Result {
    for (i, t) in terms.iter().enumerate() {
        if i > 0 {
            f.write_str(", ")?;
        }
        write!(f, "{t}")?;
    }
    Ok(())
}

/// A self-join-free conjunctive query with an ordered, duplicate-free head.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ConjunctiveQuery {
    name: String,
    atoms: Vec<Atom>,
    free: Vec<Variable>,
}

impl ConjunctiveQuery {
    pub fn new(atoms: Vec<Atom>, free: Vec<Variable>) -> Result<Self, QueryError> {
        Self::named("q", atoms, free)
    }

    pub fn named(
        name: impl Into<String>,
        atoms: Vec<Atom>,
        free: Vec<Variable>,
    ) -> Result<Self, QueryError> {
        let mut relations = BTreeSet::new();
        for atom in &atoms {
            if !relations.insert(atom.relation()) {
                return Err(QueryError::SelfJoin(atom.relation().to_string()));
            }
        }
        let mut seen = BTreeSet::new();
        for v in &free {
            if !seen.insert(v) {
                return Err(QueryError::DuplicateFreeVariable(v.clone()));
            }
            if !atoms.iter().any(|a| a.mentions(v)) {
                return Err(QueryError::DanglingFreeVariable(v.clone()));
            }
        }
        Ok(ConjunctiveQuery {
            name: name.into(),
            atoms,
            free,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn atom(&self, relation: &str) -> Option<&Atom> {
        self.atoms.iter().find(|a| a.relation() == relation)
    }

    pub fn atom_index(&self, relation: &str) -> Option<usize> {
        self.atoms.iter().position(|a| a.relation() == relation)
    }

    /// The head `z⃗`, in order.
    pub fn free(&self) -> &[Variable] {
        &self.free
    }

    pub fn free_set(&self) -> VarSet {
        self.free.iter().cloned().collect()
    }

    pub fn is_free(&self, v: &Variable) -> bool {
        self.free.contains(v)
    }

    pub fn vars(&self) -> VarSet {
        self.atoms.iter().flat_map(Atom::vars).collect()
    }

    pub fn bound_vars(&self) -> VarSet {
        let mut vars = self.vars();
        for v in &self.free {
            vars.remove(v);
        }
        vars
    }

    /// Bound variables in order of first occurrence in the body.
    pub fn bound_vars_in_order(&self) -> Vec<Variable> {
        let mut seen = BTreeSet::new();
        let mut out = Vec::new();
        for atom in &self.atoms {
            for t in atom.args() {
                if let Term::Var(v) = t {
                    if !self.is_free(v) && seen.insert(v.clone()) {
                        out.push(v.clone());
                    }
                }
            }
        }
        out
    }

    pub fn is_full(&self) -> bool {
        self.bound_vars().is_empty()
    }

    pub fn is_boolean(&self) -> bool {
        self.free.is_empty()
    }

    /// `q↑x⃗`: drops the quantifiers of `x⃗`; the head becomes `z⃗·x⃗`.
    pub fn make_free(&self, x: &[Variable]) -> Result<Self, QueryError> {
        let bound = self.bound_vars();
        let mut seen = BTreeSet::new();
        for v in x {
            if !bound.contains(v) {
                return Err(QueryError::NotBound(v.clone()));
            }
            if !seen.insert(v) {
                return Err(QueryError::DuplicateVariable(v.clone()));
            }
        }
        let mut free = self.free.clone();
        free.extend(x.iter().cloned());
        Ok(ConjunctiveQuery {
            name: self.name.clone(),
            atoms: self.atoms.clone(),
            free,
        })
    }

    /// `q↓x⃗`: same body, free set shrinks by `x⃗`.
    pub fn make_bound(&self, x: &[Variable]) -> Result<Self, QueryError> {
        for v in x {
            if !self.is_free(v) {
                return Err(QueryError::NotFree(v.clone()));
            }
        }
        let free = self
            .free
            .iter()
            .filter(|v| !x.contains(v))
            .cloned()
            .collect();
        Ok(ConjunctiveQuery {
            name: self.name.clone(),
            atoms: self.atoms.clone(),
            free,
        })
    }

    /// The full query over the same body: every bound variable is appended to
    /// the head in order of first occurrence.
    pub fn full(&self) -> Self {
        self.make_free(&self.bound_vars_in_order())
            .expect("bound variables in order are bound and distinct")
    }

    /// `q[z⃗ ↦ c⃗]`: replaces each `zᵢ` by `cᵢ` and drops it from the head.
    pub fn substitute(&self, z: &[Variable], c: &[Constant]) -> Result<Self, QueryError> {
        if z.len() != c.len() {
            return Err(QueryError::SubstitutionArity {
                variables: z.len(),
                constants: c.len(),
            });
        }
        let mut map = BTreeMap::new();
        for (v, k) in z.iter().zip(c) {
            if !self.is_free(v) {
                return Err(QueryError::NotFree(v.clone()));
            }
            if map.insert(v.clone(), k.clone()).is_some() {
                return Err(QueryError::DuplicateVariable(v.clone()));
            }
        }
        Ok(ConjunctiveQuery {
            name: self.name.clone(),
            atoms: self.atoms.iter().map(|a| a.ground(&map)).collect(),
            free: self
                .free
                .iter()
                .filter(|v| !map.contains_key(*v))
                .cloned()
                .collect(),
        })
    }

    /// `q ∖ S`: removes the atoms at `indices`. Free variables of `q` that
    /// still occur stay free; those that no longer occur are dropped.
    pub fn without_atoms(&self, indices: &[usize]) -> Self {
        let atoms: Vec<Atom> = self
            .atoms
            .iter()
            .enumerate()
            .filter(|(i, _)| !indices.contains(i))
            .map(|(_, a)| a.clone())
            .collect();
        let free = self
            .free
            .iter()
            .filter(|v| atoms.iter().any(|a| a.mentions(v)))
            .cloned()
            .collect();
        ConjunctiveQuery {
            name: self.name.clone(),
            atoms,
            free,
        }
    }

    pub fn without_atom(&self, relation: &str) -> Result<Self, QueryError> {
        let i = self
            .atom_index(relation)
            .ok_or_else(|| QueryError::UnknownAtom(relation.to_string()))?;
        Ok(self.without_atoms(&[i]))
    }

    pub fn query_graph(&self) -> QueryGraph {
        QueryGraph::of(self)
    }

    /// Canonical text form, e.g. `q(z) :- R(x | y), S(y | z).`
    pub fn to_text(&self) -> String {
        self.to_string()
    }
}

impl fmt::Display for ConjunctiveQuery {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}(", self.name)?;
        for (i, v) in self.free.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{v}")?;
        }
        f.write_str(") :-")?;
        for (i, atom) in self.atoms.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, " {atom}")?;
        }
        f.write_str(".")
    }
}
