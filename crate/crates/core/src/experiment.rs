//! The comparison grid: every cell type with each embedding method and no
//! regularizer, plus the regularized model with graph-derived embeddings.

use std::fmt;
use std::io::Write;
use std::sync::Arc;

use crate::dataio::{self, InteractionSequence};
use crate::error::{Error, Result};
use crate::evaluator;
use crate::gembed::{self, EmbeddingTable, SgnsConfig, WalkConfig};
use crate::ktmodel::{CellType, ModelParams};
use crate::qgraph::{self, LaplacianKind, QuestionGraph, SkillMap, Weighting};
use crate::trainer::{self, TrainConfig};

/// Default search grid for the regularizer weight.
pub const ALPHA_GRID: [f64; 4] = [0.01, 0.1, 0.5, 1.0];

/// Table columns, in order.
pub const COLUMNS: [Column; 3] = [Column::Gaussian, Column::Line, Column::Node2Vec];

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum Column {
    Gaussian,
    Line,
    Node2Vec,
}

impl Column {
    pub fn header(self) -> &'static str {
        match self {
            Column::Gaussian => "Gaussian",
            Column::Line => "LINE",
            Column::Node2Vec => "Node2Vec",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum Row {
    Baseline(CellType),
    Regularized,
}

impl fmt::Display for Row {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Row::Baseline(c) => f.write_str(&c.tag().to_uppercase()),
            Row::Regularized => f.write_str("DKTS"),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MatrixConfig {
    /// Runs use seeds `seed, seed + 1, …`; each drives the split, the
    /// embeddings, initialization and shuffling.
    pub seed: u64,
    pub num_seeds: usize,
    pub hidden: usize,
    /// Cell of the regularized row.
    pub dkts_cell: CellType,
    /// Order of the LINE column.
    pub line_order: u8,
    pub train_frac: f64,
    pub valid_frac: f64,
    pub weighting: Weighting,
    pub laplacian: LaplacianKind,
    /// `alpha` applies to the regularized row only; baselines use `0`.
    pub train: TrainConfig,
    pub sgns: SgnsConfig,
    pub walk: WalkConfig,
    /// When nonempty, the regularized row picks `alpha` per seed from this
    /// grid by validation AUC instead of using `train.alpha`.
    pub alpha_grid: Vec<f64>,
}

impl Default for MatrixConfig {
    fn default() -> Self {
        Self {
            seed: 42,
            num_seeds: 5,
            hidden: 64,
            dkts_cell: CellType::Gru,
            line_order: 2,
            train_frac: 0.7,
            valid_frac: 0.1,
            weighting: Weighting::Binary,
            laplacian: LaplacianKind::Unnormalized,
            train: TrainConfig::default(),
            sgns: SgnsConfig::default(),
            walk: WalkConfig::default(),
            alpha_grid: ALPHA_GRID.to_vec(),
        }
    }
}

/// Outcome of one training run in the grid.
#[derive(Clone, Debug, PartialEq)]
pub struct CellRun {
    pub row: Row,
    pub column: Column,
    pub seed: u64,
    pub alpha: f64,
    pub test_auc: f64,
    pub epochs: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MatrixResult {
    pub runs: Vec<CellRun>,
}

impl MatrixResult {
    pub fn rows(&self) -> Vec<Row> {
        let mut rows: Vec<Row> = self.runs.iter().map(|r| r.row).collect();
        rows.sort();
        rows.dedup();
        rows
    }

    /// Mean test AUC over seeds; `None` for cells that were not run.
    pub fn mean(&self, row: Row, column: Column) -> Option<f64> {
        let aucs: Vec<f64> = self
            .runs
            .iter()
            .filter(|r| r.row == row && r.column == column)
            .map(|r| r.test_auc)
            .collect();
        (!aucs.is_empty()).then(|| aucs.iter().sum::<f64>() / aucs.len() as f64)
    }

    /// Tab-separated means with a header naming the embedding columns;
    /// cells that were not run print `NA`.
    pub fn write_table<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        write!(w, "method")?;
        for c in COLUMNS {
            write!(w, "\t{}", c.header())?;
        }
        writeln!(w)?;
        for row in self.rows() {
            write!(w, "{row}")?;
            for c in COLUMNS {
                match self.mean(row, c) {
                    Some(m) => write!(w, "\t{m:.4}")?,
                    None => write!(w, "\tNA")?,
                }
            }
            writeln!(w)?;
        }
        Ok(())
    }

    /// Rows `row<TAB>column<TAB>seed<TAB>alpha<TAB>test_auc<TAB>epochs`.
    pub fn write_runs<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        for r in &self.runs {
            writeln!(
                w,
                "{}\t{}\t{}\t{}\t{:?}\t{}",
                r.row,
                r.column.header(),
                r.seed,
                r.alpha,
                r.test_auc,
                r.epochs
            )?;
        }
        Ok(())
    }
}

fn embed(column: Column, q: usize, g: &QuestionGraph, cfg: &MatrixConfig, seed: u64) -> Result<EmbeddingTable> {
    match column {
        Column::Gaussian => gembed::embed_gaussian(q, cfg.sgns.dim, seed),
        Column::Line => gembed::embed_line(g, cfg.line_order, &cfg.sgns, seed),
        Column::Node2Vec => gembed::embed_node2vec(g, &cfg.walk, &cfg.sgns, seed),
    }
}

/// Trains and tests every grid cell for every seed. `progress` sees each
/// run as it finishes; runs are ordered by seed, then row, then column.
pub fn run_matrix(
    seqs: &[InteractionSequence],
    skills: &SkillMap,
    cfg: &MatrixConfig,
    mut progress: impl FnMut(&CellRun),
) -> Result<MatrixResult> {
    if cfg.num_seeds == 0 {
        return Err(Error::validation("number of seeds must be ≥ 1"));
    }
    if !matches!(cfg.line_order, 1 | 2) {
        return Err(Error::validation(format!(
            "LINE order must be 1 or 2, got {}",
            cfg.line_order
        )));
    }
    cfg.train.validate()?;
    let q = skills.num_questions();
    if let Some(max) = seqs.iter().filter_map(|s| s.max_question()).max() {
        if max >= q {
            return Err(Error::validation(format!(
                "question {max} in the data but the skill map has {q} questions"
            )));
        }
    }
    let graph = Arc::new(qgraph::build_graph(skills, cfg.weighting)?.with_laplacian(cfg.laplacian));
    let mut runs = Vec::new();
    for k in 0..cfg.num_seeds {
        let seed = cfg.seed.wrapping_add(k as u64);
        let parts = dataio::split(seqs, cfg.train_frac, cfg.valid_frac, seed)?;
        let tables: Vec<EmbeddingTable> = COLUMNS
            .iter()
            .map(|&c| embed(c, q, &graph, cfg, seed))
            .collect::<Result<_>>()?;
        let base_cfg = TrainConfig {
            alpha: 0.0,
            seed,
            ..cfg.train.clone()
        };
        let mut cells: Vec<(Row, Column)> = Vec::new();
        for cell in CellType::ALL {
            cells.extend(COLUMNS.iter().map(|&c| (Row::Baseline(cell), c)));
        }
        cells.extend(
            COLUMNS
                .iter()
                .filter(|c| **c != Column::Gaussian)
                .map(|&c| (Row::Regularized, c)),
        );
        for (row, column) in cells {
            let table = &tables[COLUMNS.iter().position(|&c| c == column).expect("known column")];
            let (cell, relation) = match row {
                Row::Baseline(cell) => (cell, None),
                Row::Regularized => (cfg.dkts_cell, Some(graph.clone())),
            };
            let params = ModelParams::init(cell, table, cfg.hidden, seed)?;
            let (alpha, fitted) = match relation {
                Some(g) if !cfg.alpha_grid.is_empty() => {
                    let search =
                        trainer::tune_alpha(&parts.train, &parts.valid, &params, g, &base_cfg, &cfg.alpha_grid)?;
                    (search.alpha, search.fit)
                }
                relation => {
                    let alpha = if relation.is_some() { cfg.train.alpha } else { 0.0 };
                    let run_cfg = TrainConfig {
                        alpha,
                        ..base_cfg.clone()
                    };
                    (
                        alpha,
                        trainer::fit(&parts.train, Some(&parts.valid), params, relation, &run_cfg)?,
                    )
                }
            };
            let metrics = evaluator::evaluate(&fitted.params, &parts.test)?;
            let run = CellRun {
                row,
                column,
                seed,
                alpha,
                test_auc: metrics.auc,
                epochs: fitted.history.len(),
            };
            progress(&run);
            runs.push(run);
        }
    }
    Ok(MatrixResult { runs })
}
