use std::io::{BufRead, Write};

use crate::error::{Error, Result};
use crate::numcore::{NamedTensors, Tensor};

use super::ModelParams;

const MAGIC: &str = "dkts-checkpoint 1";

/// Trained parameters plus the hash of the training configuration.
///
/// Text container: a magic line, `key value` metadata lines, then one
/// `tensor <name> <rows> <cols>` line per tensor followed by a line of
/// its values. Values are printed in shortest round-trip form, so a
/// save/load cycle is exact.
#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub params: ModelParams,
    pub config_hash: String,
}

impl Checkpoint {
    pub fn write<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        let p = &self.params;
        writeln!(w, "{MAGIC}")?;
        writeln!(w, "cell {}", p.cell)?;
        writeln!(w, "questions {}", p.num_questions())?;
        writeln!(w, "embed_dim {}", p.embed_dim())?;
        writeln!(w, "hidden {}", p.hidden)?;
        writeln!(w, "embedding_method {}", p.embedding_method)?;
        writeln!(w, "embedding_seed {}", p.embedding_seed)?;
        writeln!(w, "train_embedding {}", p.train_embedding)?;
        writeln!(w, "config_hash {}", self.config_hash)?;
        for (name, t) in &p.tensors {
            writeln!(w, "tensor {name} {} {}", t.rows(), t.cols())?;
            let vals: Vec<String> = t.data().iter().map(|v| format!("{v:?}")).collect();
            writeln!(w, "{}", vals.join(" "))?;
        }
        Ok(())
    }

    pub fn read<R: BufRead>(reader: R) -> Result<Self> {
        let lines: Vec<String> = reader
            .lines()
            .collect::<std::io::Result<_>>()
            .map_err(|e| Error::Parse {
                line: 0,
                msg: e.to_string(),
            })?;
        let perr = |line: usize, msg: String| Error::Parse { line: line + 1, msg };
        if lines.first().map(String::as_str) != Some(MAGIC) {
            return Err(perr(0, format!("not a checkpoint (expected `{MAGIC}`)")));
        }
        let mut meta = std::collections::BTreeMap::new();
        let mut tensors = NamedTensors::new();
        let mut idx = 1;
        while idx < lines.len() {
            let line = &lines[idx];
            let mut parts = line.split_whitespace();
            match parts.next() {
                None => {}
                Some("tensor") => {
                    let fields: Vec<&str> = parts.collect();
                    if fields.len() != 3 {
                        return Err(perr(idx, "expected `tensor <name> <rows> <cols>`".into()));
                    }
                    let rows: usize = fields[1].parse().map_err(|_| perr(idx, "bad rows".into()))?;
                    let cols: usize = fields[2].parse().map_err(|_| perr(idx, "bad cols".into()))?;
                    let values_line = lines
                        .get(idx + 1)
                        .ok_or_else(|| perr(idx + 1, "missing tensor values".into()))?;
                    let data: Vec<f64> = values_line
                        .split_whitespace()
                        .map(str::parse)
                        .collect::<std::result::Result<_, _>>()
                        .map_err(|_| perr(idx + 1, "bad tensor value".into()))?;
                    let t = Tensor::matrix(rows, cols, data).map_err(|e| perr(idx + 1, e.to_string()))?;
                    tensors.insert(fields[0].to_string(), t);
                    idx += 1;
                }
                Some(key) => {
                    let value = parts.collect::<Vec<_>>().join(" ");
                    meta.insert(key.to_string(), (idx, value));
                }
            }
            idx += 1;
        }
        let get = |key: &str| -> Result<(usize, &str)> {
            meta.get(key)
                .map(|(l, v)| (*l, v.as_str()))
                .ok_or_else(|| Error::validation(format!("checkpoint lacks `{key}`")))
        };
        let parse_meta = |key: &str| -> Result<String> { get(key).map(|(_, v)| v.to_string()) };
        let num = |key: &str| -> Result<u64> {
            let (l, v) = get(key)?;
            v.parse().map_err(|_| perr(l, format!("bad `{key}`")))
        };
        let params = ModelParams {
            cell: parse_meta("cell")?.parse()?,
            hidden: num("hidden")? as usize,
            train_embedding: parse_meta("train_embedding")? == "true",
            embedding_method: parse_meta("embedding_method")?.parse()?,
            embedding_seed: num("embedding_seed")?,
            tensors,
        };
        if !params.tensors.contains_key(super::EMBEDDING) {
            return Err(Error::validation("checkpoint lacks the embedding tensor"));
        }
        if params.num_questions() as u64 != num("questions")? || params.embed_dim() as u64 != num("embed_dim")? {
            return Err(Error::validation("checkpoint header disagrees with its tensors"));
        }
        params.validate()?;
        Ok(Self {
            params,
            config_hash: parse_meta("config_hash")?,
        })
    }
}
