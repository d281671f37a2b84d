use std::fs::{self, File};
use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use clap::ArgMatches;
use dkts::config::{config_hash, Settings};
use dkts::dataio::{self, QuestionIndex};
use dkts::evaluator::{self, ScoredStep};
use dkts::experiment;
use dkts::gembed::{self, EmbedMethod};
use dkts::ktmodel::Checkpoint;
use dkts::qgraph::{self, QuestionGraph};
use dkts::trainer;
use dkts::{EmbeddingTable, Error, InteractionSequence, ModelParams, SkillMap};

use crate::manifest::{beside, write_atomic, RunManifest};
use crate::Failure;

fn path<'a>(m: &'a ArgMatches, id: &str) -> Option<&'a PathBuf> {
    m.get_one::<PathBuf>(id)
}

fn required<'a>(m: &'a ArgMatches, id: &str) -> &'a PathBuf {
    path(m, id).expect("clap enforces required arguments")
}

fn open(p: &Path) -> Result<BufReader<File>, Failure> {
    Ok(BufReader::new(File::open(p).map_err(|e| Error::io(p, e))?))
}

/// Parse errors carry a line number but not the file; add it.
fn in_file<T>(p: &Path, r: dkts::Result<T>) -> Result<T, Failure> {
    r.map_err(|e| match e {
        Error::Parse { line, msg } => Error::Parse {
            line,
            msg: format!("{}: {msg}", p.display()),
        },
        Error::Validation(msg) => Error::Validation(format!("{}: {msg}", p.display())),
        other => other,
    })
    .map_err(Failure::from)
}

fn render(write: impl FnOnce(&mut Vec<u8>) -> std::io::Result<()>) -> Vec<u8> {
    let mut buf = Vec::new();
    write(&mut buf).expect("writing to memory cannot fail");
    buf
}

fn read_skill_map(p: &Path) -> Result<SkillMap, Failure> {
    in_file(p, SkillMap::read(open(p)?))
}

/// From `--graph`, or built from `--skill-map`.
fn read_graph(m: &ArgMatches, s: &Settings) -> Result<Option<(QuestionGraph, PathBuf)>, Failure> {
    let graph = match (path(m, "graph"), path(m, "skill-map")) {
        (Some(_), Some(_)) => return Err(Failure::Usage("give either --graph or --skill-map, not both".into())),
        (Some(p), None) => (in_file(p, QuestionGraph::read_edges(open(p)?))?, p.clone()),
        (None, Some(p)) => (qgraph::build_graph(&read_skill_map(p)?, s.weighting)?, p.clone()),
        (None, None) => return Ok(None),
    };
    Ok(Some((graph.0.with_laplacian(s.laplacian), graph.1)))
}

/// Question ids in the log must be the dense ids `0..q`.
fn read_log(p: &Path, q: usize, s: &Settings) -> Result<Vec<InteractionSequence>, Failure> {
    let log = in_file(p, dataio::parse_log(open(p)?, Some(&QuestionIndex::identity(q))))?;
    Ok(dataio::filter_sequences(&log.sequences, s.min_len, s.max_len)?)
}

fn ensure_parent(p: &Path) -> Result<(), Failure> {
    if let Some(dir) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    Ok(())
}

pub fn simulate(m: &ArgMatches, s: Settings) -> Result<(), Failure> {
    let started = Instant::now();
    let out = required(m, "out");
    let sim = dataio::simulate(&s.sim)?;
    fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let files = [
        ("log", out.join("log.tsv")),
        ("skill_map", out.join("skills.tsv")),
        ("mastery", out.join("mastery.tsv")),
    ];
    write_atomic(
        &files[0].1,
        &render(|b| dataio::write_log(b, &sim.sequences, None, None)),
    )?;
    write_atomic(&files[1].1, &render(|b| sim.skills.write(b)))?;
    write_atomic(&files[2].1, &render(|b| sim.write_mastery(b)))?;
    let rows: usize = sim.sequences.iter().map(|q| q.len()).sum();
    eprintln!(
        "{} students, {rows} interactions written to {}",
        sim.sequences.len(),
        out.display()
    );
    RunManifest {
        subcommand: "simulate",
        settings: s,
        inputs: vec![],
        outputs: files.to_vec(),
        wall_secs: started.elapsed().as_secs_f64(),
    }
    .write(&out.join("manifest.txt"))
}

pub fn build_graph(m: &ArgMatches, s: Settings) -> Result<(), Failure> {
    let started = Instant::now();
    let (skills_path, out) = (required(m, "skill-map"), required(m, "out"));
    let g = qgraph::build_graph(&read_skill_map(skills_path)?, s.weighting)?;
    ensure_parent(out)?;
    write_atomic(out, &render(|b| g.write_edges(b)))?;
    eprintln!("{} questions, {} edges", g.num_questions(), g.num_edges());
    RunManifest {
        subcommand: "build-graph",
        settings: s,
        inputs: vec![("skill_map", skills_path.clone())],
        outputs: vec![("graph", out.clone())],
        wall_secs: started.elapsed().as_secs_f64(),
    }
    .write(&beside(out))
}

pub fn embed(m: &ArgMatches, s: Settings) -> Result<(), Failure> {
    let started = Instant::now();
    let out = required(m, "out");
    let method: EmbedMethod = m.get_one::<String>("method").expect("required").parse()?;
    let graph = read_graph(m, &s)?;
    let mut inputs = Vec::new();
    if let Some((_, p)) = &graph {
        inputs.push(("graph", p.clone()));
    }
    let table = match (method, &graph) {
        (EmbedMethod::Gaussian, g) => {
            let q = g.as_ref().map_or(s.sim.questions, |(g, _)| g.num_questions());
            gembed::embed_gaussian(q, s.sgns.dim, s.seed)?
        }
        (_, None) => return Err(Failure::Usage(format!("{method} needs --graph or --skill-map"))),
        (EmbedMethod::Line1, Some((g, _))) => gembed::embed_line(g, 1, &s.sgns, s.seed)?,
        (EmbedMethod::Line2, Some((g, _))) => gembed::embed_line(g, 2, &s.sgns, s.seed)?,
        (EmbedMethod::Node2Vec, Some((g, _))) => gembed::embed_node2vec(g, &s.walk, &s.sgns, s.seed)?,
    };
    ensure_parent(out)?;
    write_atomic(out, &render(|b| table.write(b)))?;
    RunManifest {
        subcommand: "embed",
        settings: s,
        inputs,
        outputs: vec![("embedding", out.clone())],
        wall_secs: started.elapsed().as_secs_f64(),
    }
    .write(&beside(out))
}

pub fn train(m: &ArgMatches, s: Settings) -> Result<(), Failure> {
    let started = Instant::now();
    let (data_path, emb_path, out) = (required(m, "data"), required(m, "embedding"), required(m, "out"));
    let graph = read_graph(m, &s)?;
    if s.train.alpha > 0.0 && graph.is_none() {
        return Err(Failure::Usage(format!(
            "alpha = {} enables the relation regularizer, which needs --graph or --skill-map (use --alpha 0 for a baseline)",
            s.train.alpha
        )));
    }
    let table = in_file(emb_path, EmbeddingTable::read(open(emb_path)?))?;
    let q = table.num_questions();
    if let Some((g, p)) = &graph {
        if g.num_questions() != q {
            return Err(Error::Validation(format!(
                "{} has {} questions but the embedding has {q}",
                p.display(),
                g.num_questions()
            ))
            .into());
        }
    }
    let data = read_log(data_path, q, &s)?;
    let valid = path(m, "valid").map(|p| read_log(p, q, &s)).transpose()?;
    let params = ModelParams::init(s.cell, &table, s.hidden, s.seed)?;
    let relation = graph.as_ref().map(|(g, _)| Arc::new(g.clone()));
    let fitted = trainer::fit(&data, valid.as_deref(), params, relation, &s.train)?;

    let log_path = path(m, "log").cloned().unwrap_or_else(|| {
        let mut p = out.as_os_str().to_owned();
        p.push(".log");
        PathBuf::from(p)
    });
    let checkpoint = Checkpoint {
        params: fitted.params,
        config_hash: config_hash(&s.resolved()),
    };
    ensure_parent(out)?;
    ensure_parent(&log_path)?;
    write_atomic(out, &render(|b| checkpoint.write(b)))?;
    let log = render(|b| fitted.history.iter().try_for_each(|r| r.write_line(&mut *b)));
    write_atomic(&log_path, &log)?;
    if let Some(last) = fitted.history.last() {
        eprintln!(
            "{} epochs, final loss {:.6}, best epoch {}",
            fitted.history.len(),
            last.loss.total,
            fitted.best_epoch.map_or_else(|| "n/a".into(), |e| e.to_string())
        );
    }
    let mut inputs = vec![("data", data_path.clone()), ("embedding", emb_path.clone())];
    if let Some(p) = path(m, "valid") {
        inputs.push(("valid", p.clone()));
    }
    if let Some((_, p)) = &graph {
        inputs.push(("graph", p.clone()));
    }
    RunManifest {
        subcommand: "train",
        settings: s,
        inputs,
        outputs: vec![("checkpoint", out.clone()), ("log", log_path)],
        wall_secs: started.elapsed().as_secs_f64(),
    }
    .write(&beside(out))
}

/// Reads `student<TAB>step<TAB>question<TAB>score<TAB>label` rows.
fn read_steps(p: &Path) -> Result<Vec<ScoredStep>, Failure> {
    let mut steps = Vec::new();
    for (i, line) in open(p)?.lines().enumerate() {
        let line = line.map_err(|e| Error::io(p, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let bad = |msg: &str| {
            Failure::Run(Error::Parse {
                line: i + 1,
                msg: format!("{}: {msg}", p.display()),
            })
        };
        let f: Vec<&str> = line.split('\t').collect();
        if f.len() != 5 {
            return Err(bad("expected student, step, question, score, label"));
        }
        let score: f64 = f[3].parse().map_err(|_| bad("bad score"))?;
        let label = match f[4] {
            "1" => true,
            "0" => false,
            _ => return Err(bad("label must be 0 or 1")),
        };
        steps.push(ScoredStep {
            student: f[0].to_string(),
            step: f[1].parse().map_err(|_| bad("bad step"))?,
            question: f[2].parse().map_err(|_| bad("bad question id"))?,
            score,
            label,
        });
    }
    Ok(steps)
}

pub fn eval(m: &ArgMatches, s: Settings) -> Result<(), Failure> {
    let started = Instant::now();
    let mut inputs = Vec::new();
    let steps = match (path(m, "scores"), path(m, "checkpoint"), path(m, "data")) {
        (Some(p), None, None) => {
            inputs.push(("scores", p.clone()));
            read_steps(p)?
        }
        (None, Some(ck), Some(data)) => {
            let checkpoint = in_file(ck, Checkpoint::read(open(ck)?))?;
            let params = checkpoint.params;
            let seqs = read_log(data, params.num_questions(), &s)?;
            if seqs.is_empty() {
                return Err(Error::Validation(format!("{}: no sequence long enough to score", data.display())).into());
            }
            inputs.push(("checkpoint", ck.clone()));
            inputs.push(("data", data.clone()));
            evaluator::score_steps(&params, &seqs)?
        }
        _ => {
            return Err(Failure::Usage(
                "give --checkpoint with --data, or --scores alone".into(),
            ))
        }
    };
    let metrics = evaluator::metrics(&steps)?;
    println!("{metrics}");
    let mut outputs = Vec::new();
    if let Some(p) = path(m, "steps") {
        ensure_parent(p)?;
        write_atomic(p, &render(|b| evaluator::write_steps(b, &steps)))?;
        outputs.push(("steps", p.clone()));
    }
    if let Some(p) = path(m, "out") {
        ensure_parent(p)?;
        write_atomic(p, format!("{metrics}\n").as_bytes())?;
        outputs.push(("metrics", p.clone()));
        RunManifest {
            subcommand: "eval",
            settings: s,
            inputs,
            outputs,
            wall_secs: started.elapsed().as_secs_f64(),
        }
        .write(&beside(p))?;
    }
    Ok(())
}

pub fn matrix(m: &ArgMatches, s: Settings) -> Result<(), Failure> {
    let started = Instant::now();
    let data_path = required(m, "data");
    let (seqs, skills) = match path(m, "skill-map") {
        Some(p) => {
            let skills = read_skill_map(p)?;
            (read_log(data_path, skills.num_questions(), &s)?, skills)
        }
        None => {
            let log = in_file(data_path, dataio::parse_log(open(data_path)?, None))?;
            let skills = log
                .skills
                .ok_or_else(|| Failure::Usage("the log has no skills column; pass --skill-map".into()))?;
            (dataio::filter_sequences(&log.sequences, s.min_len, s.max_len)?, skills)
        }
    };
    let quiet = m.get_flag("quiet");
    let result = experiment::run_matrix(&seqs, &skills, &s.matrix(), |r| {
        if !quiet {
            eprintln!(
                "seed {}\t{}\t{}\talpha {}\tauc {:.4}\tepochs {}",
                r.seed,
                r.row,
                r.column.header(),
                r.alpha,
                r.test_auc,
                r.epochs
            );
        }
    })?;
    let table = render(|b| result.write_table(b));
    print!("{}", String::from_utf8_lossy(&table));
    let mut outputs = Vec::new();
    if let Some(p) = path(m, "runs") {
        ensure_parent(p)?;
        write_atomic(p, &render(|b| result.write_runs(b)))?;
        outputs.push(("runs", p.clone()));
    }
    if let Some(p) = path(m, "out") {
        ensure_parent(p)?;
        write_atomic(p, &table)?;
        outputs.insert(0, ("table", p.clone()));
        let mut inputs = vec![("data", data_path.clone())];
        if let Some(sk) = path(m, "skill-map") {
            inputs.push(("skill_map", sk.clone()));
        }
        RunManifest {
            subcommand: "matrix",
            settings: s,
            inputs,
            outputs,
            wall_secs: started.elapsed().as_secs_f64(),
        }
        .write(&beside(p))?;
    }
    Ok(())
}
