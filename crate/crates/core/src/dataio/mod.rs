//! Interaction logs, filtering, student-level splits and the synthetic
//! student population used in place of real tutoring data.
//!
//! Log rows are `student_id<TAB>timestamp<TAB>question_id<TAB>correct`
//! with an optional fifth column of comma-separated skill ids.

mod simulate;

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::io::{BufRead, Write};

use rand::seq::SliceRandom;

use crate::error::{Error, Result};
use crate::qgraph::SkillMap;
use crate::rng;

pub use simulate::{correct_probability, simulate, Simulation, SimulatorConfig};

/// One answer: question `question` (dense id) answered correctly or not.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Interaction {
    pub question: usize,
    pub correct: bool,
}

impl Interaction {
    pub fn new(question: usize, correct: bool) -> Self {
        Self { question, correct }
    }

    pub fn label(&self) -> f64 {
        if self.correct {
            1.0
        } else {
            0.0
        }
    }
}

/// A student's answers in chronological order.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct InteractionSequence {
    pub student: String,
    pub interactions: Vec<Interaction>,
}

impl InteractionSequence {
    pub fn new(student: impl Into<String>, interactions: Vec<Interaction>) -> Self {
        Self {
            student: student.into(),
            interactions,
        }
    }

    pub fn len(&self) -> usize {
        self.interactions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.interactions.is_empty()
    }

    pub fn max_question(&self) -> Option<usize> {
        self.interactions.iter().map(|x| x.question).max()
    }
}

/// Numbers first in numeric order, then everything else lexicographically.
fn natural_key(s: &str) -> (bool, u64, &str) {
    match s.parse::<u64>() {
        Ok(n) => (false, n, s),
        Err(_) => (true, 0, s),
    }
}

/// Dense question ids `0..Q` ↔ raw ids as they appear in files.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct QuestionIndex {
    raw: Vec<String>,
    dense: HashMap<String, usize>,
}

impl QuestionIndex {
    pub fn from_raw(mut raw: Vec<String>) -> Self {
        raw.sort_by(|a, b| natural_key(a).cmp(&natural_key(b)));
        raw.dedup();
        let dense = raw.iter().enumerate().map(|(i, r)| (r.clone(), i)).collect();
        Self { raw, dense }
    }

    /// Raw id `"i"` ↔ dense id `i` for `i < q`.
    pub fn identity(q: usize) -> Self {
        Self::from_raw((0..q).map(|i| i.to_string()).collect())
    }

    pub fn len(&self) -> usize {
        self.raw.len()
    }

    pub fn is_empty(&self) -> bool {
        self.raw.is_empty()
    }

    pub fn dense(&self, raw: &str) -> Option<usize> {
        self.dense.get(raw).copied()
    }

    pub fn raw(&self, dense: usize) -> &str {
        &self.raw[dense]
    }
}

#[derive(Clone, Debug)]
pub struct ParsedLog {
    pub sequences: Vec<InteractionSequence>,
    /// Present when rows carry the skills column.
    pub skills: Option<SkillMap>,
    pub questions: QuestionIndex,
}

struct Row {
    student: String,
    time: f64,
    question: String,
    correct: bool,
    skills: Option<Vec<String>>,
}

/// Groups rows by student and orders each student's rows by timestamp,
/// ties broken by input order. Students come out in natural id order.
///
/// With `index`, raw question ids are mapped through it and unknown ids are
/// rejected; without, a dense index is built from the ids present.
pub fn parse_log<R: BufRead>(reader: R, index: Option<&QuestionIndex>) -> Result<ParsedLog> {
    let mut rows = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let lineno = idx + 1;
        let line = line.map_err(|e| Error::Parse {
            line: lineno,
            msg: e.to_string(),
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').map(str::trim).collect();
        if !(4..=5).contains(&fields.len()) {
            return Err(Error::Parse {
                line: lineno,
                msg: format!(
                    "expected 4 or 5 tab-separated fields (student, timestamp, question, correct[, skills]), got {}",
                    fields.len()
                ),
            });
        }
        let time: f64 = fields[1].parse().map_err(|_| Error::Parse {
            line: lineno,
            msg: format!("bad timestamp `{}`", fields[1]),
        })?;
        let correct = match fields[3] {
            "1" => true,
            "0" => false,
            other => {
                return Err(Error::validation(format!(
                    "line {lineno}: correctness must be 0 or 1, got `{other}`"
                )))
            }
        };
        let skills = fields.get(4).map(|s| {
            s.split(',')
                .map(str::trim)
                .filter(|s| !s.is_empty())
                .map(String::from)
                .collect()
        });
        rows.push(Row {
            student: fields[0].to_string(),
            time,
            question: fields[2].to_string(),
            correct,
            skills,
        });
    }

    let questions = match index {
        Some(ix) => ix.clone(),
        None => QuestionIndex::from_raw(rows.iter().map(|r| r.question.clone()).collect()),
    };

    let mut skill_sets: Option<Vec<BTreeSet<String>>> = None;
    let mut by_student: BTreeMap<(bool, u64, String), Vec<(f64, Interaction)>> = BTreeMap::new();
    for (line_idx, row) in rows.into_iter().enumerate() {
        let q = questions.dense(&row.question).ok_or_else(|| {
            Error::validation(format!("row {}: unknown question id `{}`", line_idx + 1, row.question))
        })?;
        if let Some(list) = row.skills {
            let sets = skill_sets.get_or_insert_with(|| vec![BTreeSet::new(); questions.len()]);
            sets[q].extend(list);
        }
        let (num, n, _) = natural_key(&row.student);
        by_student
            .entry((num, n, row.student))
            .or_default()
            .push((row.time, Interaction::new(q, row.correct)));
    }

    let sequences = by_student
        .into_iter()
        .map(|((_, _, student), mut items)| {
            items.sort_by(|a, b| a.0.total_cmp(&b.0));
            InteractionSequence::new(student, items.into_iter().map(|(_, x)| x).collect())
        })
        .collect();
    let skills = skill_sets.map(SkillMap::new).transpose()?;
    Ok(ParsedLog {
        sequences,
        skills,
        questions,
    })
}

/// Writes rows with the step index as timestamp. `index` maps dense ids back
/// to raw ids; `skills` adds the fifth column.
pub fn write_log<W: Write>(
    mut w: W,
    sequences: &[InteractionSequence],
    index: Option<&QuestionIndex>,
    skills: Option<&SkillMap>,
) -> std::io::Result<()> {
    for seq in sequences {
        for (t, x) in seq.interactions.iter().enumerate() {
            let qid = match index {
                Some(ix) => ix.raw(x.question).to_string(),
                None => x.question.to_string(),
            };
            write!(w, "{}\t{t}\t{qid}\t{}", seq.student, u8::from(x.correct))?;
            if let Some(sk) = skills {
                let list: Vec<&str> = sk.skills_of(x.question).iter().map(String::as_str).collect();
                write!(w, "\t{}", list.join(","))?;
            }
            writeln!(w)?;
        }
    }
    Ok(())
}

/// Drops sequences shorter than `min_len` and keeps only the first
/// `max_len` interactions of longer ones.
pub fn filter_sequences(
    seqs: &[InteractionSequence],
    min_len: usize,
    max_len: usize,
) -> Result<Vec<InteractionSequence>> {
    if min_len < 2 {
        return Err(Error::validation("min_len must be ≥ 2"));
    }
    if max_len < min_len {
        return Err(Error::validation("max_len must be ≥ min_len"));
    }
    Ok(seqs
        .iter()
        .filter(|s| s.len() >= min_len)
        .map(|s| InteractionSequence {
            student: s.student.clone(),
            interactions: s.interactions[..s.len().min(max_len)].to_vec(),
        })
        .collect())
}

#[derive(Clone, Debug, PartialEq)]
pub struct Split {
    pub train: Vec<InteractionSequence>,
    pub valid: Vec<InteractionSequence>,
    pub test: Vec<InteractionSequence>,
}

/// Student-level split. Partition sizes are `round(n·train)`,
/// `round(n·valid)` and the remainder; each keeps input order.
pub fn split(seqs: &[InteractionSequence], train_frac: f64, valid_frac: f64, seed: u64) -> Result<Split> {
    if !(train_frac > 0.0 && train_frac < 1.0 && valid_frac > 0.0 && train_frac + valid_frac < 1.0) {
        return Err(Error::validation(format!(
            "split fractions must lie in (0,1) with train + valid < 1, got {train_frac} / {valid_frac}"
        )));
    }
    let n = seqs.len();
    let n_train = (n as f64 * train_frac).round() as usize;
    let n_valid = (n as f64 * valid_frac).round() as usize;
    if n_train == 0 || n_valid == 0 || n_train + n_valid >= n {
        return Err(Error::validation(format!(
            "{n} students cannot fill every partition with fractions {train_frac} / {valid_frac}"
        )));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng::stream(seed, rng::tags::SPLIT));
    let pick = |ids: &[usize]| {
        let mut ids = ids.to_vec();
        ids.sort_unstable();
        ids.into_iter().map(|i| seqs[i].clone()).collect::<Vec<_>>()
    };
    Ok(Split {
        train: pick(&order[..n_train]),
        valid: pick(&order[n_train..n_train + n_valid]),
        test: pick(&order[n_train + n_valid..]),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<ParsedLog> {
        parse_log(text.as_bytes(), None)
    }

    #[test]
    fn groups_by_student() {
        let log = parse("a\t1\tq1\t1\na\t2\tq2\t0\nb\t1\tq1\t1\n").unwrap();
        let lens: Vec<usize> = log.sequences.iter().map(|s| s.len()).collect();
        assert_eq!(lens, vec![2, 1]);
        assert!(log.skills.is_none());
        assert_eq!(log.questions.len(), 2);
    }

    #[test]
    fn sorts_by_timestamp_stably() {
        let log = parse("s\t5\t0\t1\ns\t1\t1\t0\ns\t5\t2\t0\ns\t3\t3\t1\n").unwrap();
        let qs: Vec<usize> = log.sequences[0].interactions.iter().map(|x| x.question).collect();
        assert_eq!(qs, vec![1, 3, 0, 2]);
    }

    #[test]
    fn empty_file_is_empty() {
        let log = parse("").unwrap();
        assert!(log.sequences.is_empty());
    }

    #[test]
    fn reports_malformed_rows() {
        match parse("a\t1\tq\t1\nbroken row\n") {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("{other:?}"),
        }
        assert!(matches!(parse("a\tx\tq\t1\n"), Err(Error::Parse { line: 1, .. })));
        assert!(matches!(parse("a\t1\tq\t2\n"), Err(Error::Validation(_))));
    }

    #[test]
    fn skills_column_builds_skill_map() {
        let log = parse("a\t1\t0\t1\ts1,s2\na\t2\t1\t0\ts2\n").unwrap();
        let sk = log.skills.unwrap();
        assert_eq!(sk.num_questions(), 2);
        assert_eq!(sk.skills_of(0).len(), 2);
    }

    #[test]
    fn fixed_index_rejects_unknown_ids() {
        let ix = QuestionIndex::identity(2);
        assert!(parse_log("a\t1\t5\t1\n".as_bytes(), Some(&ix)).is_err());
        let log = parse_log("a\t1\t1\t1\n".as_bytes(), Some(&ix)).unwrap();
        assert_eq!(log.sequences[0].interactions[0].question, 1);
    }

    #[test]
    fn filter_drops_and_truncates() {
        let mk = |n: usize| InteractionSequence::new("s", (0..n).map(|i| Interaction::new(i, true)).collect());
        let out = filter_sequences(&[mk(1), mk(2), mk(3)], 2, 200).unwrap();
        assert_eq!(out.iter().map(|s| s.len()).collect::<Vec<_>>(), vec![2, 3]);
        let out = filter_sequences(&[mk(1000)], 2, 200).unwrap();
        assert_eq!(out[0].len(), 200);
        assert_eq!(out[0].interactions[199].question, 199);
        assert!(filter_sequences(&[mk(1), mk(1)], 2, 200).unwrap().is_empty());
    }

    #[test]
    fn split_sizes_and_determinism() {
        let seqs: Vec<_> = (0..10)
            .map(|i| InteractionSequence::new(i.to_string(), vec![Interaction::new(0, true)]))
            .collect();
        let s = split(&seqs, 0.7, 0.1, 3).unwrap();
        assert_eq!((s.train.len(), s.valid.len(), s.test.len()), (7, 1, 2));
        assert_eq!(s, split(&seqs, 0.7, 0.1, 3).unwrap());
        let mut all: Vec<&str> = s
            .train
            .iter()
            .chain(&s.valid)
            .chain(&s.test)
            .map(|x| x.student.as_str())
            .collect();
        all.sort_unstable();
        all.dedup();
        assert_eq!(all.len(), 10);
        assert!(split(&seqs[..3], 0.7, 0.1, 3).is_err());
    }
}
