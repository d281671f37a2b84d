use std::collections::BTreeSet;
use std::io::Write;

use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::{Error, Result};
use crate::qgraph::SkillMap;
use crate::rng;

use super::{Interaction, InteractionSequence};

/// Synthetic population with guess/slip answers over per-skill mastery.
#[derive(Clone, Debug, PartialEq)]
pub struct SimulatorConfig {
    pub students: usize,
    pub questions: usize,
    pub skills: usize,
    /// Seed for the question → skill assignment.
    pub skill_seed: u64,
    /// Chance that a question gets a second skill.
    pub second_skill_prob: f64,
    pub guess: f64,
    pub slip: f64,
    /// Initial per-skill mastery is uniform on `[low, high]`.
    pub initial_mastery: (f64, f64),
    /// Mastery gained on each skill of a practiced question.
    pub gain: f64,
    /// Sequence length is uniform on `[min, max]`.
    pub length_range: (usize, usize),
    pub seed: u64,
}

impl Default for SimulatorConfig {
    fn default() -> Self {
        Self {
            students: 500,
            questions: 50,
            skills: 5,
            skill_seed: 42,
            second_skill_prob: 0.2,
            guess: 0.2,
            slip: 0.1,
            initial_mastery: (0.0, 0.5),
            gain: 0.08,
            length_range: (20, 60),
            seed: 42,
        }
    }
}

impl SimulatorConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::Validation(msg));
        if self.students == 0 || self.questions == 0 || self.skills == 0 {
            return fail("students, questions and skills must all be ≥ 1".into());
        }
        if !(0.0..1.0).contains(&self.guess) || !(0.0..1.0).contains(&self.slip) {
            return fail(format!(
                "guess and slip must lie in [0, 1), got {} / {}",
                self.guess, self.slip
            ));
        }
        if self.guess + self.slip >= 1.0 {
            return fail(format!(
                "guess + slip must be < 1, got {} + {} = {}",
                self.guess,
                self.slip,
                self.guess + self.slip
            ));
        }
        let (lo, hi) = self.initial_mastery;
        if !(0.0 <= lo && lo <= hi && hi <= 1.0) {
            return fail(format!(
                "initial mastery range must satisfy 0 ≤ low ≤ high ≤ 1, got [{lo}, {hi}]"
            ));
        }
        if !(self.gain.is_finite() && self.gain >= 0.0) {
            return fail(format!("mastery gain must be ≥ 0, got {}", self.gain));
        }
        if !(0.0..=1.0).contains(&self.second_skill_prob) {
            return fail("second skill probability must lie in [0, 1]".into());
        }
        let (min, max) = self.length_range;
        if min == 0 || min > max {
            return fail(format!(
                "sequence length range must satisfy 1 ≤ min ≤ max, got [{min}, {max}]"
            ));
        }
        Ok(())
    }
}

/// `guess + (1 − guess − slip) · mastery`
pub fn correct_probability(guess: f64, slip: f64, mastery: f64) -> f64 {
    guess + (1.0 - guess - slip) * mastery
}

#[derive(Clone, Debug)]
pub struct Simulation {
    pub sequences: Vec<InteractionSequence>,
    pub skills: SkillMap,
    /// Per student, per step: mastery of every skill just before answering.
    pub mastery: Vec<Vec<Vec<f64>>>,
}

impl Simulation {
    /// Rows `student_id<TAB>step<TAB>skill_id<TAB>mastery`.
    pub fn write_mastery<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        let skill_ids = self.skills.skill_ids();
        for (seq, trace) in self.sequences.iter().zip(&self.mastery) {
            for (step, levels) in trace.iter().enumerate() {
                for (skill, m) in skill_ids.iter().zip(levels) {
                    writeln!(w, "{}\t{step}\t{skill}\t{m:?}", seq.student)?;
                }
            }
        }
        Ok(())
    }
}

fn skill_name(k: usize) -> String {
    format!("s{k}")
}

fn assign_skills(cfg: &SimulatorConfig) -> Result<(SkillMap, Vec<Vec<usize>>)> {
    let mut r = rng::stream(cfg.skill_seed, rng::tags::SIM_SKILLS);
    let mut order: Vec<usize> = (0..cfg.questions).collect();
    order.shuffle(&mut r);
    let mut ids = vec![Vec::new(); cfg.questions];
    for (pos, &q) in order.iter().enumerate() {
        let primary = pos % cfg.skills;
        ids[q].push(primary);
        if cfg.skills > 1 && r.random::<f64>() < cfg.second_skill_prob {
            let mut other = r.random_range(0..cfg.skills - 1);
            if other >= primary {
                other += 1;
            }
            ids[q].push(other);
        }
        ids[q].sort_unstable();
    }
    let sets: Vec<BTreeSet<String>> = ids.iter().map(|v| v.iter().map(|&k| skill_name(k)).collect()).collect();
    Ok((SkillMap::new(sets)?, ids))
}

/// Generates the population. Questions are drawn uniformly; the answer is
/// correct with [`correct_probability`] of the mean mastery over the
/// question's skills, after which each of those skills gains `gain`
/// (capped at 1). Each student draws from a generator derived from the
/// seed and the student's index.
pub fn simulate(cfg: &SimulatorConfig) -> Result<Simulation> {
    cfg.validate()?;
    let (skills, skill_ids) = assign_skills(cfg)?;
    let mut sequences = Vec::with_capacity(cfg.students);
    let mut mastery_traces = Vec::with_capacity(cfg.students);
    for student in 0..cfg.students {
        let mut r = rng::rng(rng::derive_seed(cfg.seed ^ rng::tags::SIM_STUDENT, student as u64));
        let (lo, hi) = cfg.initial_mastery;
        let mut mastery: Vec<f64> = (0..cfg.skills).map(|_| lo + (hi - lo) * r.random::<f64>()).collect();
        let len = r.random_range(cfg.length_range.0..=cfg.length_range.1);
        let mut items = Vec::with_capacity(len);
        let mut trace = Vec::with_capacity(len);
        for _ in 0..len {
            let q = r.random_range(0..cfg.questions);
            let ks = &skill_ids[q];
            let mean = ks.iter().map(|&k| mastery[k]).sum::<f64>() / ks.len() as f64;
            let p = correct_probability(cfg.guess, cfg.slip, mean);
            let correct = r.random::<f64>() < p;
            trace.push(mastery.clone());
            items.push(Interaction::new(q, correct));
            for &k in ks {
                mastery[k] = (mastery[k] + cfg.gain).min(1.0);
            }
        }
        sequences.push(InteractionSequence::new(student.to_string(), items));
        mastery_traces.push(trace);
    }
    Ok(Simulation {
        sequences,
        skills,
        mastery: mastery_traces,
    })
}
