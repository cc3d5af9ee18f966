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

//! Database instances under primary keys: blocks, repairs and repair
//! enumeration.
//!
//! Facts are kept sorted by relation name and then value tuple. Because key
//! positions come first, the facts of a block are a contiguous run.

mod generate;
mod io;

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::ops::Range;

use num_bigint::BigUint;
use thiserror::Error;

use crate::query::{ConjunctiveQuery, Constant, RelationSignature};

pub use generate::{
    build_3dm_instance, matching_query, parse_triples, random_instance_for, random_query,
    InstanceParams, QueryParams,
};
pub use io::{load_bundle, parse_schema, save_bundle, schema_to_text};

/// Default upper bound on the number of repairs the enumerator will visit.
pub const DEFAULT_REPAIR_CAP: u64 = 1_000_000;

#[derive(Debug, Error)]
pub enum InstanceError {
    #[error("unknown relation {0}")]
    UnknownRelation(String),
    #[error("relation {0} declared twice")]
    DuplicateRelation(String),
    #[error("{relation}: expected {expected} values, found {found}{}", location.as_ref().map(|l| format!(" ({l})")).unwrap_or_default())]
    ArityMismatch {
        relation: String,
        expected: usize,
        found: usize,
        location: Option<String>,
    },
    #[error("schema line {line}: {message}")]
    SchemaSyntax { line: usize, message: String },
    #[error("{count} repairs exceed the cap of {cap}")]
    TooManyRepairs { count: BigUint, cap: u64 },
    #[error("not a repair: {0}")]
    NotARepair(String),
    #[error("invalid matching instance: {0}")]
    InvalidMatching(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Csv {
        path: String,
        #[source]
        source: csv::Error,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Fact {
    relation: String,
    values: Vec<Constant>,
}

impl Fact {
    pub fn new(relation: impl Into<String>, values: Vec<Constant>) -> Self {
        Fact {
            relation: relation.into(),
            values,
        }
    }

    pub fn from_strs(relation: &str, values: &[&str]) -> Self {
        Fact::new(relation, values.iter().map(Constant::new).collect())
    }

    pub fn relation(&self) -> &str {
        &self.relation
    }

    pub fn values(&self) -> &[Constant] {
        &self.values
    }
}

impl fmt::Display for Fact {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}(", self.relation)?;
        for (i, v) in self.values.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{v}")?;
        }
        f.write_str(")")
    }
}

/// Relation signatures by name.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Schema {
    relations: BTreeMap<String, RelationSignature>,
}

impl Schema {
    pub fn new() -> Self {
        Schema::default()
    }

    pub fn add(&mut self, sig: RelationSignature) -> Result<(), InstanceError> {
        if self.relations.contains_key(sig.name()) {
            return Err(InstanceError::DuplicateRelation(sig.name().to_string()));
        }
        self.relations.insert(sig.name().to_string(), sig);
        Ok(())
    }

    /// The signatures of the atoms of `q`.
    pub fn of_query(q: &ConjunctiveQuery) -> Self {
        Schema {
            relations: q
                .atoms()
                .iter()
                .map(|a| (a.relation().to_string(), a.signature().clone()))
                .collect(),
        }
    }

    pub fn get(&self, name: &str) -> Option<&RelationSignature> {
        self.relations.get(name)
    }

    pub fn iter(&self) -> impl Iterator<Item = &RelationSignature> {
        self.relations.values()
    }

    pub fn len(&self) -> usize {
        self.relations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.relations.is_empty()
    }
}

/// A maximal set of facts of one relation that agree on the key.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Block<'a> {
    pub relation: &'a str,
    pub key: &'a [Constant],
    pub members: &'a [Fact],
}

impl Block<'_> {
    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }
}

/// Read access to a set of facts, as needed by query evaluation.
pub trait FactSource {
    fn schema(&self) -> &Schema;
    /// Every fact of `relation`.
    fn scan<'s>(&'s self, relation: &str) -> Box<dyn Iterator<Item = &'s Fact> + 's>;
    /// The facts of `relation` whose key equals `key`.
    fn lookup<'s>(
        &'s self,
        relation: &str,
        key: &[Constant],
    ) -> Box<dyn Iterator<Item = &'s Fact> + 's>;
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DatabaseInstance {
    schema: Schema,
    facts: Vec<Fact>,
    /// Fact ranges, one per block, in fact order.
    blocks: Vec<Range<usize>>,
    /// Per relation, its range of block indices.
    relation_blocks: BTreeMap<String, Range<usize>>,
    block_index: HashMap<(String, Vec<Constant>), usize>,
}

impl DatabaseInstance {
    /// Builds an instance; duplicate facts collapse. Every fact must match
    /// its relation's declared arity.
    pub fn new(
        schema: Schema,
        facts: impl IntoIterator<Item = Fact>,
    ) -> Result<Self, InstanceError> {
        let mut facts: Vec<Fact> = facts.into_iter().collect();
        for f in &facts {
            let sig = schema
                .get(f.relation())
                .ok_or_else(|| InstanceError::UnknownRelation(f.relation().to_string()))?;
            if sig.arity() != f.values.len() {
                return Err(InstanceError::ArityMismatch {
                    relation: f.relation.clone(),
                    expected: sig.arity(),
                    found: f.values.len(),
                    location: None,
                });
            }
        }
        facts.sort();
        facts.dedup();
        let mut blocks: Vec<Range<usize>> = Vec::new();
        let mut relation_blocks: BTreeMap<String, Range<usize>> = BTreeMap::new();
        let mut block_index = HashMap::new();
        let mut i = 0;
        while i < facts.len() {
            let rel = facts[i].relation.clone();
            let width = schema.get(&rel).expect("checked above").key_width();
            let key = &facts[i].values[..width];
            let mut j = i + 1;
            while j < facts.len() && facts[j].relation == rel && facts[j].values[..width] == *key {
                j += 1;
            }
            block_index.insert((rel.clone(), key.to_vec()), blocks.len());
            let b = blocks.len();
            relation_blocks.entry(rel).or_insert(b..b).end = b + 1;
            blocks.push(i..j);
            i = j;
        }
        Ok(DatabaseInstance {
            schema,
            facts,
            blocks,
            relation_blocks,
            block_index,
        })
    }

    pub fn empty(schema: Schema) -> Self {
        DatabaseInstance::new(schema, []).expect("no facts")
    }

    pub fn schema(&self) -> &Schema {
        &self.schema
    }

    /// All facts in canonical order.
    pub fn facts(&self) -> &[Fact] {
        &self.facts
    }

    pub fn len(&self) -> usize {
        self.facts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.facts.is_empty()
    }

    pub fn contains(&self, fact: &Fact) -> bool {
        self.facts.binary_search(fact).is_ok()
    }

    pub fn relation_facts(&self, relation: &str) -> &[Fact] {
        match self.relation_blocks.get(relation) {
            Some(r) if !r.is_empty() => {
                &self.facts[self.blocks[r.start].start..self.blocks[r.end - 1].end]
            }
            _ => &[],
        }
    }

    pub fn block_count(&self) -> usize {
        self.blocks.len()
    }

    pub fn block(&self, i: usize) -> Block<'_> {
        let range = self.blocks[i].clone();
        let first = &self.facts[range.start];
        let width = self
            .schema
            .get(&first.relation)
            .expect("known relation")
            .key_width();
        Block {
            relation: &first.relation,
            key: &first.values[..width],
            members: &self.facts[range],
        }
    }

    /// Blocks in canonical order.
    pub fn blocks(&self) -> Vec<Block<'_>> {
        (0..self.blocks.len()).map(|i| self.block(i)).collect()
    }

    /// Block indices of `relation`.
    pub fn relation_block_range(&self, relation: &str) -> Range<usize> {
        self.relation_blocks.get(relation).cloned().unwrap_or(0..0)
    }

    pub fn find_block(&self, relation: &str, key: &[Constant]) -> Option<usize> {
        self.block_index
            .get(&(relation.to_string(), key.to_vec()))
            .copied()
    }

    pub fn block_of(&self, fact: &Fact) -> Option<usize> {
        let width = self.schema.get(&fact.relation)?.key_width();
        self.find_block(&fact.relation, &fact.values[..width])
    }

    pub fn is_consistent(&self) -> bool {
        self.blocks.iter().all(|b| b.len() == 1)
    }

    /// Every constant occurring in some fact.
    pub fn active_domain(&self) -> BTreeSet<Constant> {
        self.facts
            .iter()
            .flat_map(|f| f.values.iter().cloned())
            .collect()
    }

    /// Product of the block sizes.
    pub fn repair_count(&self) -> BigUint {
        self.blocks
            .iter()
            .fold(BigUint::from(1u32), |acc, b| acc * BigUint::from(b.len()))
    }

    /// The repair count, or an overflow error if it exceeds `cap`.
    pub fn repair_count_within(&self, cap: u64) -> Result<u64, InstanceError> {
        let count = self.repair_count();
        match u64::try_from(&count) {
            Ok(n) if n <= cap => Ok(n),
            _ => Err(InstanceError::TooManyRepairs { count, cap }),
        }
    }

    /// All repairs, in odometer order over the blocks (the first block
    /// varies slowest). Fails if there are more than `cap`.
    pub fn enumerate_repairs(&self, cap: u64) -> Result<RepairIter<'_>, InstanceError> {
        let n = self.repair_count_within(cap)?;
        Ok(self.repairs_in_range(0..n))
    }

    /// The repairs with odometer indices in `range`.
    pub fn repairs_in_range(&self, range: Range<u64>) -> RepairIter<'_> {
        let next = if range.start < range.end {
            Some(self.repair_at(range.start))
        } else {
            None
        };
        RepairIter {
            db: self,
            next,
            remaining: range.end.saturating_sub(range.start),
        }
    }

    /// The repair with odometer index `index`.
    pub fn repair_at(&self, mut index: u64) -> Repair<'_> {
        let mut choice = vec![0usize; self.blocks.len()];
        for (i, b) in self.blocks.iter().enumerate().rev() {
            let len = b.len() as u64;
            choice[i] = (index % len) as usize;
            index /= len;
        }
        Repair { db: self, choice }
    }
}

impl fmt::Display for DatabaseInstance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for fact in &self.facts {
            writeln!(f, "{fact}")?;
        }
        Ok(())
    }
}

impl FactSource for DatabaseInstance {
    fn schema(&self) -> &Schema {
        &self.schema
    }

    fn scan<'s>(&'s self, relation: &str) -> Box<dyn Iterator<Item = &'s Fact> + 's> {
        Box::new(self.relation_facts(relation).iter())
    }

    fn lookup<'s>(
        &'s self,
        relation: &str,
        key: &[Constant],
    ) -> Box<dyn Iterator<Item = &'s Fact> + 's> {
        match self.find_block(relation, key) {
            Some(b) => Box::new(self.facts[self.blocks[b].clone()].iter()),
            None => Box::new(std::iter::empty()),
        }
    }
}

/// One fact from every block of a database instance.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Repair<'a> {
    db: &'a DatabaseInstance,
    choice: Vec<usize>,
}

impl<'a> Repair<'a> {
    /// Checks that `facts` pick exactly one fact from each block of `db`.
    pub fn from_facts(db: &'a DatabaseInstance, facts: &[Fact]) -> Result<Self, InstanceError> {
        let mut choice: Vec<Option<usize>> = vec![None; db.block_count()];
        for f in facts {
            let b = db
                .block_of(f)
                .filter(|_| db.contains(f))
                .ok_or_else(|| InstanceError::NotARepair(format!("{f} is not in the database")))?;
            let offset = db.blocks[b]
                .clone()
                .position(|i| db.facts[i] == *f)
                .expect("contained");
            match choice[b] {
                Some(o) if o != offset => {
                    return Err(InstanceError::NotARepair(format!(
                        "two facts from the block of {f}"
                    )))
                }
                _ => choice[b] = Some(offset),
            }
        }
        let choice = choice
            .into_iter()
            .enumerate()
            .map(|(b, c)| {
                c.ok_or_else(|| {
                    InstanceError::NotARepair(format!(
                        "no fact from the block of {}",
                        db.facts[db.blocks[b].start]
                    ))
                })
            })
            .collect::<Result<_, _>>()?;
        Ok(Repair { db, choice })
    }

    pub fn database(&self) -> &'a DatabaseInstance {
        self.db
    }

    /// Member offset chosen in each block.
    pub fn choice(&self) -> &[usize] {
        &self.choice
    }

    fn chosen(&self, block: usize) -> &'a Fact {
        &self.db.facts[self.db.blocks[block].start + self.choice[block]]
    }

    pub fn facts(&self) -> impl Iterator<Item = &'a Fact> + '_ {
        (0..self.choice.len()).map(|b| self.chosen(b))
    }

    pub fn contains(&self, fact: &Fact) -> bool {
        self.db
            .block_of(fact)
            .is_some_and(|b| self.chosen(b) == fact)
    }

    pub fn to_instance(&self) -> DatabaseInstance {
        DatabaseInstance::new(self.db.schema.clone(), self.facts().cloned())
            .expect("facts come from a valid instance")
    }
}

impl FactSource for Repair<'_> {
    fn schema(&self) -> &Schema {
        &self.db.schema
    }

    fn scan<'s>(&'s self, relation: &str) -> Box<dyn Iterator<Item = &'s Fact> + 's> {
        Box::new(
            self.db
                .relation_block_range(relation)
                .map(|b| self.chosen(b)),
        )
    }

    fn lookup<'s>(
        &'s self,
        relation: &str,
        key: &[Constant],
    ) -> Box<dyn Iterator<Item = &'s Fact> + 's> {
        Box::new(
            self.db
                .find_block(relation, key)
                .map(|b| self.chosen(b))
                .into_iter(),
        )
    }
}

pub struct RepairIter<'a> {
    db: &'a DatabaseInstance,
    next: Option<Repair<'a>>,
    remaining: u64,
}

impl<'a> Iterator for RepairIter<'a> {
    type Item = Repair<'a>;

    fn next(&mut self) -> Option<Repair<'a>> {
        if self.remaining == 0 {
            return None;
        }
        let current = self.next.take()?;
        self.remaining -= 1;
        if self.remaining > 0 {
            let mut succ = current.clone();
            for b in (0..succ.choice.len()).rev() {
                succ.choice[b] += 1;
                if succ.choice[b] < self.db.blocks[b].len() {
                    break;
                }
                succ.choice[b] = 0;
            }
            self.next = Some(succ);
        }
        Some(current)
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        let n = usize::try_from(self.remaining).unwrap_or(usize::MAX);
        (n, Some(n))
    }
}
