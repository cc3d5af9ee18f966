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

//! Instance and query generators: the matching gadget used for hardness
//! examples, and small random queries and instances for testing.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::Rng;

use super::{DatabaseInstance, Fact, InstanceError, Schema};
use crate::query::{Atom, ConjunctiveQuery, Constant, RelationSignature, Term, Variable};

const TOP: &str = "⊤";

fn bottom(i: usize) -> String {
    format!("⊥{i}")
}

/// `q_k(z) :- Z(z), R1(x1 | y), S1(x1 | y), …, Rk(xk | y), Sk(xk | y).`
pub fn matching_query(k: usize) -> ConjunctiveQuery {
    let mut atoms = vec![Atom::with_parts("Z", vec![Term::var("z")], vec![]).expect("valid")];
    for i in 1..=k {
        for rel in ["R", "S"] {
            atoms.push(
                Atom::with_parts(
                    &format!("{rel}{i}"),
                    vec![Term::var(&format!("x{i}"))],
                    vec![Term::var("y")],
                )
                .expect("valid"),
            );
        }
    }
    ConjunctiveQuery::new(atoms, vec![Variable::new("z")]).expect("valid")
}

/// Reads one tuple per line; fields are separated by whitespace or commas.
/// Blank lines and `#` comments are skipped.
pub fn parse_triples(text: &str) -> Result<Vec<[String; 3]>, InstanceError> {
    let mut out = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line
            .split(|c: char| c.is_whitespace() || c == ',')
            .filter(|s| !s.is_empty())
            .collect();
        match fields.as_slice() {
            [a, b, c] => out.push([a.to_string(), b.to_string(), c.to_string()]),
            _ => {
                return Err(InstanceError::InvalidMatching(format!(
                    "line {}: expected 3 fields, found {}",
                    n + 1,
                    fields.len()
                )))
            }
        }
    }
    Ok(out)
}

/// The instance `db_M` for a 3-dimensional matching instance `M`.
///
/// It holds `Z(c)`; for every triple `a1a2a3` the facts `Ri(ai, a1a2a3)` and
/// `Si(ai, a1a2a3)`; and `Ri(⊥i, ⊤)`, `Si(⊥i, ⊤)` for `i = 1, 2, 3`. The
/// non-key value of a triple is the concatenation of its coordinates.
pub fn build_3dm_instance(m: &[[String; 3]]) -> Result<DatabaseInstance, InstanceError> {
    let tuples: Vec<Vec<String>> = m.iter().map(|t| t.to_vec()).collect();
    build_matching_instance(3, &tuples)
}

/// The `k`-dimensional generalisation of [`build_3dm_instance`].
pub fn build_matching_instance(
    k: usize,
    tuples: &[Vec<String>],
) -> Result<DatabaseInstance, InstanceError> {
    let mut coords: Vec<BTreeSet<&str>> = vec![BTreeSet::new(); k];
    let mut labels: BTreeMap<String, &Vec<String>> = BTreeMap::new();
    let reserved: BTreeSet<String> = (1..=k).map(bottom).chain([TOP.to_string()]).collect();
    for t in tuples {
        if t.len() != k {
            return Err(InstanceError::InvalidMatching(format!(
                "tuple {t:?} does not have {k} coordinates"
            )));
        }
        for (i, a) in t.iter().enumerate() {
            if reserved.contains(a) {
                return Err(InstanceError::InvalidMatching(format!(
                    "{a} is a reserved constant"
                )));
            }
            coords[i].insert(a);
        }
        let label = t.concat();
        if let Some(other) = labels.insert(label.clone(), t) {
            if other != t {
                return Err(InstanceError::InvalidMatching(format!(
                    "{other:?} and {t:?} both concatenate to {label}"
                )));
            }
        }
        if reserved.contains(&label) {
            return Err(InstanceError::InvalidMatching(format!(
                "{label} is a reserved constant"
            )));
        }
    }
    for i in 0..k {
        for j in i + 1..k {
            if let Some(a) = coords[i].intersection(&coords[j]).next() {
                return Err(InstanceError::InvalidMatching(format!(
                    "{a} occurs in coordinates {} and {}",
                    i + 1,
                    j + 1
                )));
            }
        }
    }
    let q = matching_query(k);
    let schema = Schema::of_query(&q);
    let mut facts = vec![Fact::from_strs("Z", &["c"])];
    for t in tuples {
        let label = t.concat();
        for (i, a) in t.iter().enumerate() {
            for rel in ["R", "S"] {
                facts.push(Fact::from_strs(&format!("{rel}{}", i + 1), &[a, &label]));
            }
        }
    }
    for i in 1..=k {
        for rel in ["R", "S"] {
            facts.push(Fact::from_strs(&format!("{rel}{i}"), &[&bottom(i), TOP]));
        }
    }
    DatabaseInstance::new(schema, facts)
}

#[derive(Debug, Clone)]
pub struct QueryParams {
    pub max_atoms: usize,
    pub max_vars: usize,
    pub max_arity: usize,
    /// Chance that a position holds a constant.
    pub constant_prob: f64,
    /// Chance that a variable is made free.
    pub free_prob: f64,
    pub max_free: usize,
}

impl Default for QueryParams {
    fn default() -> Self {
        QueryParams {
            max_atoms: 5,
            max_vars: 6,
            max_arity: 3,
            constant_prob: 0.05,
            free_prob: 0.2,
            max_free: 2,
        }
    }
}

/// A random self-join-free query with relations `R1`, `R2`, … and
/// variables drawn from `x0 … x{max_vars-1}`.
pub fn random_query<R: Rng + ?Sized>(rng: &mut R, p: &QueryParams) -> ConjunctiveQuery {
    let n = rng.gen_range(1..=p.max_atoms);
    let pool: Vec<Variable> = (0..p.max_vars)
        .map(|i| Variable::new(format!("x{i}")))
        .collect();
    let mut atoms = Vec::with_capacity(n);
    for a in 0..n {
        let arity = rng.gen_range(1..=p.max_arity);
        let key_width = match rng.gen_range(0..10) {
            0 => 0,
            1..=6 => 1.min(arity),
            _ => rng.gen_range(0..=arity),
        };
        let args: Vec<Term> = (0..arity)
            .map(|_| {
                if rng.gen_bool(p.constant_prob) {
                    Term::Const(Constant::new(if rng.gen_bool(0.5) { "k0" } else { "k1" }))
                } else {
                    Term::Var(pool.choose(rng).expect("nonempty pool").clone())
                }
            })
            .collect();
        let sig = RelationSignature::new(format!("R{}", a + 1), arity, key_width)
            .expect("valid signature");
        atoms.push(Atom::new(sig, args).expect("arity matches"));
    }
    let mut vars: Vec<Variable> = atoms
        .iter()
        .flat_map(Atom::vars)
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    vars.shuffle(rng);
    let free: Vec<Variable> = vars
        .into_iter()
        .filter(|_| rng.gen_bool(p.free_prob))
        .take(p.max_free)
        .collect();
    ConjunctiveQuery::new(atoms, free).expect("generated queries are valid")
}

#[derive(Debug, Clone)]
pub struct InstanceParams {
    /// Number of ordinary constants `d0 …`.
    pub domain: usize,
    /// Number of random valuations whose images are added, creating answers.
    pub seeds: usize,
    /// Number of extra facts attempted, roughly half of them key conflicts.
    pub noise: usize,
    pub max_repairs: u64,
}

impl Default for InstanceParams {
    fn default() -> Self {
        InstanceParams {
            domain: 3,
            seeds: 3,
            noise: 6,
            max_repairs: 4096,
        }
    }
}

/// A random instance over the relations of `q` with at most
/// `max_repairs` repairs.
pub fn random_instance_for<R: Rng + ?Sized>(
    rng: &mut R,
    q: &ConjunctiveQuery,
    p: &InstanceParams,
) -> DatabaseInstance {
    let schema = Schema::of_query(q);
    let mut values: Vec<Constant> = (0..p.domain.max(1))
        .map(|i| Constant::new(format!("d{i}")))
        .collect();
    for a in q.atoms() {
        for t in a.args() {
            if let Term::Const(c) = t {
                if !values.contains(c) {
                    values.push(c.clone());
                }
            }
        }
    }
    // (relation, key) -> distinct value tuples
    let mut blocks: BTreeMap<(String, Vec<Constant>), BTreeSet<Vec<Constant>>> = BTreeMap::new();
    let mut repairs: u64 = 1;
    type Blocks = BTreeMap<(String, Vec<Constant>), BTreeSet<Vec<Constant>>>;
    let max_repairs = p.max_repairs;
    let add = |blocks: &mut Blocks,
               fact_rel: &str,
               width: usize,
               vals: Vec<Constant>,
               repairs: &mut u64| {
        let key = (fact_rel.to_string(), vals[..width].to_vec());
        let size = blocks.get(&key).map_or(0, BTreeSet::len) as u64;
        if blocks.get(&key).is_some_and(|b| b.contains(&vals)) {
            return;
        }
        if let Some(per_choice) = repairs.checked_div(size) {
            let next = per_choice * (size + 1);
            if next > max_repairs {
                return;
            }
            *repairs = next;
        }
        blocks.entry(key).or_default().insert(vals);
    };
    let vars: Vec<Variable> = q.vars().into_iter().collect();
    for _ in 0..p.seeds {
        let theta: BTreeMap<Variable, Constant> = vars
            .iter()
            .map(|v| (v.clone(), values.choose(rng).expect("nonempty").clone()))
            .collect();
        for a in q.atoms() {
            let g = a.ground(&theta);
            let vals = g
                .args()
                .iter()
                .map(|t| match t {
                    Term::Const(c) => c.clone(),
                    Term::Var(_) => unreachable!("fully ground"),
                })
                .collect();
            add(
                &mut blocks,
                a.relation(),
                a.signature().key_width(),
                vals,
                &mut repairs,
            );
        }
    }
    for _ in 0..p.noise {
        let a = q.atoms().choose(rng).expect("queries have atoms");
        let sig = a.signature();
        let existing: Vec<Vec<Constant>> = blocks
            .iter()
            .filter(|((r, _), _)| r == a.relation())
            .flat_map(|(_, b)| b.iter().cloned())
            .collect();
        let vals: Vec<Constant> = match existing.choose(rng) {
            Some(base) if rng.gen_bool(0.6) => base
                .iter()
                .enumerate()
                .map(|(i, v)| {
                    if i < sig.key_width() || rng.gen_bool(0.3) {
                        v.clone()
                    } else {
                        values.choose(rng).expect("nonempty").clone()
                    }
                })
                .collect(),
            _ => (0..sig.arity())
                .map(|_| values.choose(rng).expect("nonempty").clone())
                .collect(),
        };
        add(
            &mut blocks,
            a.relation(),
            sig.key_width(),
            vals,
            &mut repairs,
        );
    }
    let facts: Vec<Fact> = blocks
        .into_iter()
        .flat_map(|((rel, _), b)| b.into_iter().map(move |v| Fact::new(rel.clone(), v)))
        .collect();
    DatabaseInstance::new(schema, facts).expect("facts follow the query's signatures")
}
