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

//! Directory bundles: `schema.txt` with one `R arity=3 key=1` line per
//! relation, plus `R.csv` per relation (no header, key columns first).
//! A relation without a CSV file is empty.

use std::fs;
use std::path::Path;

use super::{DatabaseInstance, Fact, InstanceError, Schema};
use crate::query::{Constant, RelationSignature};

pub fn parse_schema(text: &str) -> Result<Schema, InstanceError> {
    let mut schema = Schema::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let err = |message: String| InstanceError::SchemaSyntax {
            line: n + 1,
            message,
        };
        let mut parts = line.split_whitespace();
        let name = parts.next().expect("nonempty line");
        let (mut arity, mut key) = (None, None);
        for part in parts {
            let (k, v) = part
                .split_once('=')
                .ok_or_else(|| err(format!("expected key=value, found `{part}`")))?;
            let v: usize = v
                .parse()
                .map_err(|_| err(format!("`{v}` is not a number")))?;
            match k {
                "arity" => arity = Some(v),
                "key" => key = Some(v),
                _ => return Err(err(format!("unknown attribute `{k}`"))),
            }
        }
        let arity = arity.ok_or_else(|| err("missing arity=".into()))?;
        let key = key.ok_or_else(|| err("missing key=".into()))?;
        let sig = RelationSignature::new(name, arity, key).map_err(|e| err(e.to_string()))?;
        schema.add(sig)?;
    }
    Ok(schema)
}

pub fn schema_to_text(schema: &Schema) -> String {
    schema.iter().map(|s| format!("{s}\n")).collect()
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> InstanceError + '_ {
    move |source| InstanceError::Io {
        path: path.display().to_string(),
        source,
    }
}

fn csv_err(path: &Path) -> impl FnOnce(csv::Error) -> InstanceError + '_ {
    move |source| InstanceError::Csv {
        path: path.display().to_string(),
        source,
    }
}

pub fn load_bundle(dir: &Path) -> Result<DatabaseInstance, InstanceError> {
    let schema_path = dir.join("schema.txt");
    let schema = parse_schema(&fs::read_to_string(&schema_path).map_err(io_err(&schema_path))?)?;
    let mut facts = Vec::new();
    for sig in schema.iter() {
        let path = dir.join(format!("{}.csv", sig.name()));
        if !path.exists() {
            continue;
        }
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(false)
            .flexible(true)
            .from_path(&path)
            .map_err(csv_err(&path))?;
        for (n, record) in reader.records().enumerate() {
            let record = record.map_err(csv_err(&path))?;
            if record.len() != sig.arity() {
                return Err(InstanceError::ArityMismatch {
                    relation: sig.name().to_string(),
                    expected: sig.arity(),
                    found: record.len(),
                    location: Some(format!("{} record {}", path.display(), n + 1)),
                });
            }
            facts.push(Fact::new(
                sig.name(),
                record.iter().map(Constant::new).collect(),
            ));
        }
    }
    DatabaseInstance::new(schema, facts)
}

pub fn save_bundle(db: &DatabaseInstance, dir: &Path) -> Result<(), InstanceError> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let schema_path = dir.join("schema.txt");
    fs::write(&schema_path, schema_to_text(db.schema())).map_err(io_err(&schema_path))?;
    for sig in db.schema().iter() {
        let path = dir.join(format!("{}.csv", sig.name()));
        let mut writer = csv::WriterBuilder::new()
            .has_headers(false)
            .from_path(&path)
            .map_err(csv_err(&path))?;
        for fact in db.relation_facts(sig.name()) {
            writer
                .write_record(fact.values().iter().map(Constant::as_str))
                .map_err(csv_err(&path))?;
        }
        writer.flush().map_err(io_err(&path))?;
    }
    Ok(())
}
