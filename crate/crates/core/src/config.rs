//! Flat `key = value` configuration shared by every pipeline stage.
//!
//! Blank lines and lines starting with `#` are ignored. Every key has a
//! default, so an empty file is valid; unknown keys are rejected.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use sha2::{Digest, Sha256};

use crate::dataio::SimulatorConfig;
use crate::error::{Error, Result};
use crate::experiment::{MatrixConfig, ALPHA_GRID};
use crate::gembed::{SgnsConfig, WalkConfig};
use crate::ktmodel::CellType;
use crate::qgraph::{LaplacianKind, Weighting};
use crate::trainer::TrainConfig;

/// Every recognized key with a one-line description.
pub const KEYS: &[(&str, &str)] = &[
    (
        "seed",
        "global seed for simulation, embeddings, initialization and shuffling",
    ),
    // training
    ("alpha", "weight of the relation regularizer"),
    ("learning_rate", "optimizer step size"),
    ("optimizer", "sgd or adam"),
    ("epochs", "maximum training epochs"),
    ("batch_size", "windows per gradient step"),
    ("max_seq_len", "truncation window length"),
    ("clip_norm", "global gradient-norm clip (0 disables)"),
    ("fine_tune_embeddings", "update the question embedding during training"),
    (
        "patience",
        "epochs without validation improvement before stopping (0 disables)",
    ),
    // model
    ("cell", "recurrent cell: rnn, lstm or gru"),
    ("hidden", "hidden state width"),
    ("dim", "question embedding width"),
    // embeddings
    ("embed_epochs", "passes over the skip-gram pairs or LINE samples"),
    ("embed_learning_rate", "initial embedding step size"),
    ("negatives", "negative samples per positive pair"),
    ("window", "skip-gram context window"),
    ("noise_exponent", "exponent of the negative-sampling distribution"),
    ("line_samples_per_epoch", "edge samples per LINE epoch"),
    ("line_order", "LINE proximity order used by the matrix (1 or 2)"),
    ("walk_length", "Node2Vec walk length"),
    ("walks_per_node", "Node2Vec walks started at every node"),
    ("p", "Node2Vec return parameter"),
    ("q", "Node2Vec in-out parameter"),
    // graph
    ("weighting", "edge weights: binary or jaccard"),
    ("laplacian", "unnormalized or normalized"),
    // data
    ("min_len", "drop sequences shorter than this"),
    ("max_len", "truncate sequences longer than this"),
    ("train_frac", "share of students used for training"),
    ("valid_frac", "share of students used for validation"),
    // simulator
    ("students", "simulated students"),
    ("questions", "simulated questions"),
    ("skills", "simulated skills"),
    ("skill_seed", "seed of the question-skill assignment (defaults to seed)"),
    ("second_skill_prob", "chance a question gets a second skill"),
    ("guess", "probability of a correct answer without mastery"),
    ("slip", "probability of a wrong answer despite mastery"),
    ("mastery_low", "lower bound of initial mastery"),
    ("mastery_high", "upper bound of initial mastery"),
    ("gain", "mastery gained per practice"),
    ("min_length", "shortest simulated sequence"),
    ("max_length", "longest simulated sequence"),
    // matrix
    ("num_seeds", "seeds averaged by the comparison matrix"),
    ("dkts_cell", "cell of the regularized matrix row"),
    (
        "alpha_grid",
        "comma-separated regularizer weights searched per seed; empty uses alpha",
    ),
];

/// Raw key/value pairs in key order.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct RawConfig {
    entries: BTreeMap<String, String>,
}

impl RawConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| Error::Parse {
                line: i + 1,
                msg: format!("expected `key = value`, got `{line}`"),
            })?;
            cfg.set(key.trim(), value.trim()).map_err(|e| Error::Parse {
                line: i + 1,
                msg: e.to_string(),
            })?;
        }
        Ok(cfg)
    }

    /// Sets or replaces a value; the key must be known.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        if !KEYS.iter().any(|(k, _)| *k == key) {
            return Err(Error::validation(format!("unknown config key `{key}`")));
        }
        self.entries.insert(key.to_string(), value.to_string());
        Ok(())
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(String::as_str)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &str)> {
        self.entries.iter().map(|(k, v)| (k.as_str(), v.as_str()))
    }

    fn parsed<T: FromStr>(&self, key: &str) -> Result<Option<T>>
    where
        T::Err: fmt::Display,
    {
        self.get(key)
            .map(|v| {
                v.parse::<T>()
                    .map_err(|e| Error::validation(format!("config key `{key}`: cannot parse `{v}`: {e}")))
            })
            .transpose()
    }
}

impl fmt::Display for RawConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (k, v) in &self.entries {
            writeln!(f, "{k} = {v}")?;
        }
        Ok(())
    }
}

fn parse_bool(s: &str) -> std::result::Result<bool, String> {
    match s {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        other => Err(format!("`{other}` is not a boolean")),
    }
}

/// Fully resolved settings: defaults overridden by a [`RawConfig`].
#[derive(Clone, Debug, PartialEq)]
pub struct Settings {
    pub seed: u64,
    pub train: TrainConfig,
    pub cell: CellType,
    pub hidden: usize,
    pub sgns: SgnsConfig,
    pub walk: WalkConfig,
    pub line_order: u8,
    pub weighting: Weighting,
    pub laplacian: LaplacianKind,
    pub min_len: usize,
    pub max_len: usize,
    pub train_frac: f64,
    pub valid_frac: f64,
    pub sim: SimulatorConfig,
    pub num_seeds: usize,
    pub dkts_cell: CellType,
    pub alpha_grid: Vec<f64>,
}

impl Default for Settings {
    fn default() -> Self {
        let matrix = MatrixConfig::default();
        Self {
            seed: 42,
            train: TrainConfig::default(),
            cell: CellType::Gru,
            hidden: 64,
            sgns: SgnsConfig::default(),
            walk: WalkConfig::default(),
            line_order: matrix.line_order,
            weighting: Weighting::Binary,
            laplacian: LaplacianKind::Unnormalized,
            min_len: 3,
            max_len: 200,
            train_frac: 0.7,
            valid_frac: 0.1,
            sim: SimulatorConfig::default(),
            num_seeds: matrix.num_seeds,
            dkts_cell: matrix.dkts_cell,
            alpha_grid: ALPHA_GRID.to_vec(),
        }
    }
}

macro_rules! apply {
    ($raw:expr, $($key:literal => $slot:expr),* $(,)?) => {
        $(if let Some(v) = $raw.parsed($key)? {
            $slot = v;
        })*
    };
}

impl Settings {
    pub fn from_raw(raw: &RawConfig) -> Result<Self> {
        let mut s = Self::default();
        if let Some(seed) = raw.parsed::<u64>("seed")? {
            s.seed = seed;
        }
        s.train.seed = s.seed;
        s.sim.seed = s.seed;
        s.sim.skill_seed = s.seed;
        apply!(raw,
            "alpha" => s.train.alpha,
            "learning_rate" => s.train.learning_rate,
            "optimizer" => s.train.optimizer,
            "epochs" => s.train.epochs,
            "batch_size" => s.train.batch_size,
            "max_seq_len" => s.train.max_seq_len,
            "clip_norm" => s.train.clip_norm,
            "patience" => s.train.patience,
            "cell" => s.cell,
            "hidden" => s.hidden,
            "dim" => s.sgns.dim,
            "embed_epochs" => s.sgns.epochs,
            "embed_learning_rate" => s.sgns.learning_rate,
            "negatives" => s.sgns.negatives,
            "window" => s.sgns.window,
            "noise_exponent" => s.sgns.noise_exponent,
            "line_samples_per_epoch" => s.sgns.line_samples_per_epoch,
            "line_order" => s.line_order,
            "walk_length" => s.walk.walk_length,
            "walks_per_node" => s.walk.walks_per_node,
            "p" => s.walk.p,
            "q" => s.walk.q,
            "weighting" => s.weighting,
            "laplacian" => s.laplacian,
            "min_len" => s.min_len,
            "max_len" => s.max_len,
            "train_frac" => s.train_frac,
            "valid_frac" => s.valid_frac,
            "students" => s.sim.students,
            "questions" => s.sim.questions,
            "skills" => s.sim.skills,
            "skill_seed" => s.sim.skill_seed,
            "second_skill_prob" => s.sim.second_skill_prob,
            "guess" => s.sim.guess,
            "slip" => s.sim.slip,
            "mastery_low" => s.sim.initial_mastery.0,
            "mastery_high" => s.sim.initial_mastery.1,
            "gain" => s.sim.gain,
            "min_length" => s.sim.length_range.0,
            "max_length" => s.sim.length_range.1,
            "num_seeds" => s.num_seeds,
            "dkts_cell" => s.dkts_cell,
        );
        if let Some(v) = raw.get("fine_tune_embeddings") {
            s.train.fine_tune_embeddings = parse_bool(v).map_err(Error::Validation)?;
        }
        if let Some(v) = raw.get("alpha_grid") {
            s.alpha_grid = v
                .split(',')
                .map(str::trim)
                .filter(|x| !x.is_empty())
                .map(|x| {
                    x.parse::<f64>()
                        .ok()
                        .filter(|a| *a >= 0.0 && a.is_finite())
                        .ok_or_else(|| Error::validation(format!("alpha grid value `{x}` is not a weight ≥ 0")))
                })
                .collect::<Result<_>>()?;
        }
        if s.min_len < 2 {
            return Err(Error::validation(format!("min_len must be ≥ 2, got {}", s.min_len)));
        }
        if s.hidden == 0 {
            return Err(Error::validation("hidden must be ≥ 1"));
        }
        if !matches!(s.line_order, 1 | 2) {
            return Err(Error::validation(format!(
                "line_order must be 1 or 2, got {}",
                s.line_order
            )));
        }
        s.train.validate()?;
        s.sgns.validate()?;
        Ok(s)
    }

    /// Every key with its effective value; parsing the result gives back
    /// the same settings.
    pub fn resolved(&self) -> RawConfig {
        let t = &self.train;
        let sim = &self.sim;
        let grid: Vec<String> = self.alpha_grid.iter().map(|a| format!("{a:?}")).collect();
        let pairs: Vec<(&str, String)> = vec![
            ("seed", self.seed.to_string()),
            ("alpha", format!("{:?}", t.alpha)),
            ("learning_rate", format!("{:?}", t.learning_rate)),
            ("optimizer", t.optimizer.to_string()),
            ("epochs", t.epochs.to_string()),
            ("batch_size", t.batch_size.to_string()),
            ("max_seq_len", t.max_seq_len.to_string()),
            ("clip_norm", format!("{:?}", t.clip_norm)),
            ("fine_tune_embeddings", t.fine_tune_embeddings.to_string()),
            ("patience", t.patience.to_string()),
            ("cell", self.cell.to_string()),
            ("hidden", self.hidden.to_string()),
            ("dim", self.sgns.dim.to_string()),
            ("embed_epochs", self.sgns.epochs.to_string()),
            ("embed_learning_rate", format!("{:?}", self.sgns.learning_rate)),
            ("negatives", self.sgns.negatives.to_string()),
            ("window", self.sgns.window.to_string()),
            ("noise_exponent", format!("{:?}", self.sgns.noise_exponent)),
            ("line_samples_per_epoch", self.sgns.line_samples_per_epoch.to_string()),
            ("line_order", self.line_order.to_string()),
            ("walk_length", self.walk.walk_length.to_string()),
            ("walks_per_node", self.walk.walks_per_node.to_string()),
            ("p", format!("{:?}", self.walk.p)),
            ("q", format!("{:?}", self.walk.q)),
            ("weighting", self.weighting.to_string()),
            ("laplacian", self.laplacian.to_string()),
            ("min_len", self.min_len.to_string()),
            ("max_len", self.max_len.to_string()),
            ("train_frac", format!("{:?}", self.train_frac)),
            ("valid_frac", format!("{:?}", self.valid_frac)),
            ("students", sim.students.to_string()),
            ("questions", sim.questions.to_string()),
            ("skills", sim.skills.to_string()),
            ("skill_seed", sim.skill_seed.to_string()),
            ("second_skill_prob", format!("{:?}", sim.second_skill_prob)),
            ("guess", format!("{:?}", sim.guess)),
            ("slip", format!("{:?}", sim.slip)),
            ("mastery_low", format!("{:?}", sim.initial_mastery.0)),
            ("mastery_high", format!("{:?}", sim.initial_mastery.1)),
            ("gain", format!("{:?}", sim.gain)),
            ("min_length", sim.length_range.0.to_string()),
            ("max_length", sim.length_range.1.to_string()),
            ("num_seeds", self.num_seeds.to_string()),
            ("dkts_cell", self.dkts_cell.to_string()),
            ("alpha_grid", grid.join(",")),
        ];
        RawConfig {
            entries: pairs.into_iter().map(|(k, v)| (k.to_string(), v)).collect(),
        }
    }

    pub fn matrix(&self) -> MatrixConfig {
        MatrixConfig {
            seed: self.seed,
            num_seeds: self.num_seeds,
            hidden: self.hidden,
            dkts_cell: self.dkts_cell,
            line_order: self.line_order,
            train_frac: self.train_frac,
            valid_frac: self.valid_frac,
            weighting: self.weighting,
            laplacian: self.laplacian,
            train: self.train.clone(),
            sgns: self.sgns.clone(),
            walk: self.walk.clone(),
            alpha_grid: self.alpha_grid.clone(),
        }
    }
}

/// SHA-256 of the canonical `key = value` listing, as lowercase hex.
pub fn config_hash(raw: &RawConfig) -> String {
    Sha256::digest(raw.to_string().as_bytes())
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_config_gives_defaults() {
        let s = Settings::from_raw(&RawConfig::parse("").unwrap()).unwrap();
        assert_eq!(s, Settings::default());
        assert_eq!(s.hidden, 64);
        assert_eq!(s.alpha_grid, vec![0.01, 0.1, 0.5, 1.0]);
    }

    #[test]
    fn values_and_comments() {
        let text = "# training\nalpha = 0.5\n\nepochs=3\ncell = lstm\nfine_tune_embeddings = true\nseed = 7\nalpha_grid = 0.1, 1\n";
        let s = Settings::from_raw(&RawConfig::parse(text).unwrap()).unwrap();
        assert_eq!(s.train.alpha, 0.5);
        assert_eq!(s.train.epochs, 3);
        assert_eq!(s.cell, CellType::Lstm);
        assert!(s.train.fine_tune_embeddings);
        assert_eq!((s.train.seed, s.sim.seed, s.sim.skill_seed), (7, 7, 7));
        assert_eq!(s.alpha_grid, vec![0.1, 1.0]);
        assert!(Settings::from_raw(&RawConfig::parse("alpha_grid =\n").unwrap())
            .unwrap()
            .alpha_grid
            .is_empty());
    }

    #[test]
    fn errors_name_the_line_or_key() {
        match RawConfig::parse("alpha = 1\nnonsense\n") {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("{other:?}"),
        }
        match RawConfig::parse("bogus = 1\n") {
            Err(Error::Parse { line: 1, msg }) => assert!(msg.contains("bogus")),
            other => panic!("{other:?}"),
        }
        let raw = RawConfig::parse("epochs = many\n").unwrap();
        assert!(Settings::from_raw(&raw).unwrap_err().to_string().contains("epochs"));
        let raw = RawConfig::parse("alpha = -1\n").unwrap();
        assert!(Settings::from_raw(&raw).is_err());
    }

    #[test]
    fn overrides_replace_file_values() {
        let mut raw = RawConfig::parse("alpha = 0.5\n").unwrap();
        raw.set("alpha", "0.25").unwrap();
        assert_eq!(Settings::from_raw(&raw).unwrap().train.alpha, 0.25);
        assert!(raw.set("nope", "1").is_err());
    }

    #[test]
    fn resolved_round_trips() {
        let raw = RawConfig::parse("alpha = 0.3\ncell = rnn\nalpha_grid = 0.5\nseed = 9\nskill_seed = 3\n").unwrap();
        let s = Settings::from_raw(&raw).unwrap();
        let resolved = s.resolved();
        assert_eq!(resolved.iter().count(), KEYS.len());
        assert_eq!(Settings::from_raw(&resolved).unwrap(), s);
        assert_eq!(
            Settings::from_raw(&Settings::default().resolved()).unwrap(),
            Settings::default()
        );
    }

    #[test]
    fn hash_is_canonical() {
        let a = RawConfig::parse("alpha = 0.5\nepochs = 3\n").unwrap();
        let b = RawConfig::parse("epochs=3\n# c\nalpha=0.5\n").unwrap();
        assert_eq!(config_hash(&a), config_hash(&b));
        assert_eq!(config_hash(&a).len(), 64);
        assert_ne!(config_hash(&a), config_hash(&RawConfig::default()));
    }
}
