//! Question-question relation graph.
//!
//! Two questions are linked when their skill sets intersect. The graph
//! supplies the adjacency `A`, the Laplacian `L = D − A`, and the smoothness
//! penalty `½ pᵀ L p = ½ Σ_{i<j} A(i,j) (p_i − p_j)²`, which is evaluated as
//! an edge sum so `L` is never materialized densely.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::io::{BufRead, Write};
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::numcore::{QuadraticForm, SparseMatrix};

/// Question id (dense, `0..Q`) → set of skill ids.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct SkillMap {
    skills: Vec<BTreeSet<String>>,
}

impl SkillMap {
    /// Every question must carry at least one skill.
    pub fn new(skills: Vec<BTreeSet<String>>) -> Result<Self> {
        if let Some(q) = skills.iter().position(BTreeSet::is_empty) {
            return Err(Error::validation(format!("question {q} has an empty skill set")));
        }
        Ok(Self { skills })
    }

    pub fn from_lists<S: AsRef<str>>(lists: &[&[S]]) -> Result<Self> {
        Self::new(
            lists
                .iter()
                .map(|l| l.iter().map(|s| s.as_ref().to_string()).collect())
                .collect(),
        )
    }

    pub fn num_questions(&self) -> usize {
        self.skills.len()
    }

    pub fn skills_of(&self, question: usize) -> &BTreeSet<String> {
        &self.skills[question]
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, &BTreeSet<String>)> {
        self.skills.iter().enumerate()
    }

    /// Distinct skill ids in sorted order.
    pub fn skill_ids(&self) -> Vec<&str> {
        let set: BTreeSet<&str> = self.skills.iter().flatten().map(String::as_str).collect();
        set.into_iter().collect()
    }

    /// Reads `question_id<TAB>skill[,skill...]` lines. Question ids must be
    /// dense integers `0..Q` (any order).
    pub fn read<R: BufRead>(reader: R) -> Result<Self> {
        let mut by_id: BTreeMap<usize, BTreeSet<String>> = BTreeMap::new();
        for (idx, line) in reader.lines().enumerate() {
            let lineno = idx + 1;
            let line = line.map_err(|e| Error::Parse {
                line: lineno,
                msg: e.to_string(),
            })?;
            if line.trim().is_empty() {
                continue;
            }
            let mut parts = line.split('\t');
            let (Some(qid), Some(skills), None) = (parts.next(), parts.next(), parts.next()) else {
                return Err(Error::Parse {
                    line: lineno,
                    msg: "expected `question_id<TAB>skills`".into(),
                });
            };
            let q: usize = qid.trim().parse().map_err(|_| Error::Parse {
                line: lineno,
                msg: format!("bad question id `{qid}`"),
            })?;
            let set: BTreeSet<String> = skills
                .split(',')
                .map(str::trim)
                .filter(|s| !s.is_empty())
                .map(String::from)
                .collect();
            if by_id.insert(q, set).is_some() {
                return Err(Error::Parse {
                    line: lineno,
                    msg: format!("question {q} listed twice"),
                });
            }
        }
        let q_count = by_id.len();
        if let Some((&max, _)) = by_id.last_key_value() {
            if max + 1 != q_count {
                return Err(Error::validation(format!(
                    "question ids must be dense 0..{q_count}, found id {max}"
                )));
            }
        }
        Self::new(by_id.into_values().collect())
    }

    pub fn write<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        for (q, set) in self.iter() {
            let skills: Vec<&str> = set.iter().map(String::as_str).collect();
            writeln!(w, "{q}\t{}", skills.join(","))?;
        }
        Ok(())
    }
}

/// Edge weighting rule for [`build_graph`].
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Weighting {
    #[default]
    Binary,
    /// `|S_i ∩ S_j| / |S_i ∪ S_j|`
    Jaccard,
}

impl fmt::Display for Weighting {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Weighting::Binary => "binary",
            Weighting::Jaccard => "jaccard",
        })
    }
}

impl FromStr for Weighting {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "binary" => Ok(Weighting::Binary),
            "jaccard" => Ok(Weighting::Jaccard),
            other => Err(Error::validation(format!(
                "unknown weighting `{other}` (binary|jaccard)"
            ))),
        }
    }
}

/// Which Laplacian the smoothness penalty uses.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum LaplacianKind {
    /// `L = D − A`
    #[default]
    Unnormalized,
    /// `D^{-1/2} L D^{-1/2}`; isolated nodes contribute nothing.
    SymmetricNormalized,
}

impl fmt::Display for LaplacianKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            LaplacianKind::Unnormalized => "unnormalized",
            LaplacianKind::SymmetricNormalized => "normalized",
        })
    }
}

impl FromStr for LaplacianKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "unnormalized" => Ok(LaplacianKind::Unnormalized),
            "normalized" => Ok(LaplacianKind::SymmetricNormalized),
            other => Err(Error::validation(format!(
                "unknown laplacian `{other}` (unnormalized|normalized)"
            ))),
        }
    }
}

/// Undirected weighted graph over questions `0..Q`.
///
/// Invariants: `A(i,j) = A(j,i) ≥ 0`, `A(i,i) = 0`. Immutable once built.
#[derive(Clone, Debug)]
pub struct QuestionGraph {
    adjacency: SparseMatrix,
    /// Each undirected edge once, `i < j`.
    edges: Vec<(usize, usize, f64)>,
    /// Per-node `(neighbor, weight)`, sorted by neighbor.
    neighbors: Vec<Vec<(usize, f64)>>,
    degree: Vec<f64>,
    kind: LaplacianKind,
}

impl QuestionGraph {
    /// From undirected edges listed once each. Repeated edges are summed.
    pub fn from_edges(num_questions: usize, edges: &[(usize, usize, f64)]) -> Result<Self> {
        let mut triplets = Vec::with_capacity(edges.len() * 2);
        for &(i, j, w) in edges {
            if i == j {
                return Err(Error::validation(format!("self loop on question {i}")));
            }
            if !(w.is_finite() && w >= 0.0) {
                return Err(Error::validation(format!("edge ({i}, {j}) has invalid weight {w}")));
            }
            triplets.push((i, j, w));
            triplets.push((j, i, w));
        }
        let adjacency = SparseMatrix::from_triplets(num_questions, num_questions, triplets, true)?;
        Ok(Self::from_adjacency(adjacency))
    }

    fn from_adjacency(adjacency: SparseMatrix) -> Self {
        let n = adjacency.rows();
        let mut neighbors = vec![Vec::new(); n];
        let mut edges = Vec::new();
        for &(i, j, w) in adjacency.entries() {
            if w == 0.0 {
                continue;
            }
            neighbors[i].push((j, w));
            if i < j {
                edges.push((i, j, w));
            }
        }
        let degree = neighbors.iter().map(|nb| nb.iter().map(|(_, w)| w).sum()).collect();
        Self {
            adjacency,
            edges,
            neighbors,
            degree,
            kind: LaplacianKind::Unnormalized,
        }
    }

    /// Same graph, penalty evaluated with the given Laplacian.
    pub fn with_laplacian(mut self, kind: LaplacianKind) -> Self {
        self.kind = kind;
        self
    }

    pub fn laplacian_kind(&self) -> LaplacianKind {
        self.kind
    }

    pub fn num_questions(&self) -> usize {
        self.adjacency.rows()
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn adjacency(&self) -> &SparseMatrix {
        &self.adjacency
    }

    pub fn edges(&self) -> &[(usize, usize, f64)] {
        &self.edges
    }

    pub fn neighbors(&self, node: usize) -> &[(usize, f64)] {
        &self.neighbors[node]
    }

    pub fn degree(&self, node: usize) -> f64 {
        self.degree[node]
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        self.neighbors[i].binary_search_by(|(n, _)| n.cmp(&j)).is_ok()
    }

    /// Reads the format of [`QuestionGraph::write_edges`]: a
    /// `questions<TAB>Q` header, then `i<TAB>j<TAB>weight` per undirected
    /// edge.
    pub fn read_edges<R: BufRead>(reader: R) -> Result<Self> {
        let mut num_questions = None;
        let mut edges = Vec::new();
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
            let parse_err = |what: &str| Error::Parse {
                line: lineno,
                msg: format!("bad {what}"),
            };
            if num_questions.is_none() {
                match fields.as_slice() {
                    ["questions", n] => {
                        num_questions = Some(n.parse::<usize>().map_err(|_| parse_err("question count"))?);
                        continue;
                    }
                    _ => {
                        return Err(Error::Parse {
                            line: lineno,
                            msg: "expected header `questions<TAB>Q`".into(),
                        })
                    }
                }
            }
            if fields.len() != 3 {
                return Err(Error::Parse {
                    line: lineno,
                    msg: "expected `i<TAB>j<TAB>weight`".into(),
                });
            }
            let i: usize = fields[0].parse().map_err(|_| parse_err("node id"))?;
            let j: usize = fields[1].parse().map_err(|_| parse_err("node id"))?;
            let w: f64 = fields[2].parse().map_err(|_| parse_err("weight"))?;
            edges.push((i, j, w));
        }
        let n = num_questions.ok_or_else(|| Error::Parse {
            line: 1,
            msg: "empty graph file".into(),
        })?;
        Self::from_edges(n, &edges)
    }

    pub fn write_edges<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "questions\t{}", self.num_questions())?;
        for &(i, j, weight) in &self.edges {
            writeln!(w, "{i}\t{j}\t{weight:?}")?;
        }
        Ok(())
    }
}

/// Links questions whose skill sets intersect.
pub fn build_graph(skills: &SkillMap, weighting: Weighting) -> Result<QuestionGraph> {
    if let Some((q, _)) = skills.iter().find(|(_, s)| s.is_empty()) {
        return Err(Error::validation(format!("question {q} has an empty skill set")));
    }
    let mut by_skill: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (q, set) in skills.iter() {
        for s in set {
            by_skill.entry(s.as_str()).or_default().push(q);
        }
    }
    let mut pairs: BTreeSet<(usize, usize)> = BTreeSet::new();
    for members in by_skill.values() {
        for (a, &i) in members.iter().enumerate() {
            for &j in &members[a + 1..] {
                pairs.insert((i.min(j), i.max(j)));
            }
        }
    }
    let edges: Vec<(usize, usize, f64)> = pairs
        .into_iter()
        .map(|(i, j)| {
            let w = match weighting {
                Weighting::Binary => 1.0,
                Weighting::Jaccard => {
                    let (si, sj) = (skills.skills_of(i), skills.skills_of(j));
                    let inter = si.intersection(sj).count() as f64;
                    let union = si.union(sj).count() as f64;
                    inter / union
                }
            };
            (i, j, w)
        })
        .collect();
    QuestionGraph::from_edges(skills.num_questions(), &edges)
}

/// `L = D − A`, or its symmetric normalization when the graph is configured
/// with [`LaplacianKind::SymmetricNormalized`].
pub fn laplacian(g: &QuestionGraph) -> SparseMatrix {
    let n = g.num_questions();
    let mut triplets = Vec::with_capacity(n + 2 * g.num_edges());
    let scale = |i: usize| match g.kind {
        LaplacianKind::Unnormalized => 1.0,
        LaplacianKind::SymmetricNormalized if g.degree[i] > 0.0 => 1.0 / g.degree[i].sqrt(),
        LaplacianKind::SymmetricNormalized => 0.0,
    };
    for i in 0..n {
        let d = g.degree[i] * scale(i) * scale(i);
        if d != 0.0 {
            triplets.push((i, i, d));
        }
    }
    for &(i, j, w) in &g.edges {
        let v = -w * scale(i) * scale(j);
        triplets.push((i, j, v));
        triplets.push((j, i, v));
    }
    SparseMatrix::from_triplets(n, n, triplets, true).expect("laplacian of a valid graph")
}

fn check_len(g: &QuestionGraph, p: &[f64]) -> Result<()> {
    if p.len() != g.num_questions() {
        return Err(Error::dim(format!(
            "prediction has {} entries, graph has {} questions",
            p.len(),
            g.num_questions()
        )));
    }
    Ok(())
}

/// `½ pᵀ L p` as the edge sum `½ Σ_{i<j} A(i,j) (p_i − p_j)²`.
pub fn quad_form(g: &QuestionGraph, p: &[f64]) -> Result<f64> {
    check_len(g, p)?;
    Ok(quad_form_unchecked(g, p))
}

fn quad_form_unchecked(g: &QuestionGraph, p: &[f64]) -> f64 {
    let x = scaled(g, p);
    let x = x.as_deref().unwrap_or(p);
    0.5 * g
        .edges
        .iter()
        .map(|&(i, j, w)| {
            let d = x[i] - x[j];
            w * d * d
        })
        .sum::<f64>()
}

/// `∇_p ½ pᵀ L p = L p`, accumulated edge by edge.
pub fn quad_form_grad(g: &QuestionGraph, p: &[f64]) -> Result<Vec<f64>> {
    check_len(g, p)?;
    Ok(quad_form_grad_unchecked(g, p))
}

fn quad_form_grad_unchecked(g: &QuestionGraph, p: &[f64]) -> Vec<f64> {
    let x = scaled(g, p);
    let xs = x.as_deref().unwrap_or(p);
    let mut out = vec![0.0; p.len()];
    for &(i, j, w) in &g.edges {
        let d = w * (xs[i] - xs[j]);
        out[i] += d;
        out[j] -= d;
    }
    if x.is_some() {
        for (i, o) in out.iter_mut().enumerate() {
            *o *= inv_sqrt_degree(g, i);
        }
    }
    out
}

fn inv_sqrt_degree(g: &QuestionGraph, i: usize) -> f64 {
    if g.degree[i] > 0.0 {
        1.0 / g.degree[i].sqrt()
    } else {
        0.0
    }
}

/// For the normalized Laplacian, `pᵀ L_sym p = yᵀ L y` with `y = D^{-1/2} p`.
fn scaled(g: &QuestionGraph, p: &[f64]) -> Option<Vec<f64>> {
    match g.kind {
        LaplacianKind::Unnormalized => None,
        LaplacianKind::SymmetricNormalized => {
            Some(p.iter().enumerate().map(|(i, v)| v * inv_sqrt_degree(g, i)).collect())
        }
    }
}

impl QuadraticForm for QuestionGraph {
    fn dim(&self) -> usize {
        self.num_questions()
    }

    fn value(&self, x: &[f64]) -> f64 {
        quad_form_unchecked(self, x)
    }

    fn gradient(&self, x: &[f64]) -> Vec<f64> {
        quad_form_grad_unchecked(self, x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dense(m: &SparseMatrix) -> Vec<Vec<f64>> {
        let t = m.to_dense();
        (0..m.rows()).map(|i| t.row_slice(i).to_vec()).collect()
    }

    #[test]
    fn binary_shared_skill_pair() {
        let sk = SkillMap::from_lists(&[&["s1"], &["s1"], &["s2"]]).unwrap();
        let g = build_graph(&sk, Weighting::Binary).unwrap();
        assert_eq!(g.edges(), &[(0, 1, 1.0)]);
    }

    #[test]
    fn jaccard_weight() {
        let sk = SkillMap::from_lists(&[&["s1", "s2"], &["s2", "s3"]]).unwrap();
        let g = build_graph(&sk, Weighting::Jaccard).unwrap();
        assert_eq!(g.edges(), &[(0, 1, 1.0 / 3.0)]);
    }

    #[test]
    fn shared_skill_gives_complete_graph() {
        let sk = SkillMap::from_lists(&[&["a"], &["a"], &["a"], &["a"]]).unwrap();
        let g = build_graph(&sk, Weighting::Binary).unwrap();
        assert_eq!(g.num_edges(), 6);
    }

    #[test]
    fn empty_skill_set_names_question() {
        let err = SkillMap::new(vec![BTreeSet::from(["a".to_string()]), BTreeSet::new()]).unwrap_err();
        assert!(err.to_string().contains("question 1"));
    }

    #[test]
    fn path_laplacian() {
        let g = QuestionGraph::from_edges(3, &[(0, 1, 1.0), (1, 2, 1.0)]).unwrap();
        assert_eq!(
            dense(&laplacian(&g)),
            vec![vec![1.0, -1.0, 0.0], vec![-1.0, 2.0, -1.0], vec![0.0, -1.0, 1.0]]
        );
    }

    #[test]
    fn edgeless_and_single_edge_laplacian() {
        let g = QuestionGraph::from_edges(3, &[]).unwrap();
        assert_eq!(laplacian(&g).nnz(), 0);
        let g = QuestionGraph::from_edges(2, &[(0, 1, 1.0)]).unwrap();
        assert_eq!(dense(&laplacian(&g)), vec![vec![1.0, -1.0], vec![-1.0, 1.0]]);
    }

    #[test]
    fn two_node_quad_form_and_grad() {
        let g = QuestionGraph::from_edges(2, &[(0, 1, 1.0)]).unwrap();
        assert_eq!(quad_form(&g, &[1.0, 0.0]).unwrap(), 0.5);
        assert_eq!(quad_form_grad(&g, &[1.0, 0.0]).unwrap(), vec![1.0, -1.0]);
        assert_eq!(quad_form(&g, &[0.3, 0.3]).unwrap(), 0.0);
        assert_eq!(quad_form_grad(&g, &[0.3, 0.3]).unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn length_mismatch_is_dimension_error() {
        let g = QuestionGraph::from_edges(2, &[(0, 1, 1.0)]).unwrap();
        assert!(matches!(quad_form(&g, &[1.0]), Err(Error::Dimension { .. })));
        assert!(matches!(
            quad_form_grad(&g, &[1.0, 2.0, 3.0]),
            Err(Error::Dimension { .. })
        ));
    }

    #[test]
    fn normalized_penalty_matches_normalized_laplacian() {
        let g = QuestionGraph::from_edges(4, &[(0, 1, 1.0), (1, 2, 2.0), (0, 2, 0.5)])
            .unwrap()
            .with_laplacian(LaplacianKind::SymmetricNormalized);
        let l = laplacian(&g);
        let p = [0.2, 0.9, 0.4, 0.7];
        let lp = l.matvec(&p).unwrap();
        let dense_q = 0.5 * p.iter().zip(&lp).map(|(a, b)| a * b).sum::<f64>();
        assert!((quad_form(&g, &p).unwrap() - dense_q).abs() < 1e-12);
        for (a, b) in quad_form_grad(&g, &p).unwrap().iter().zip(&lp) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn skill_map_and_edge_files_round_trip() {
        let sk = SkillMap::from_lists(&[&["s1", "s2"], &["s2"], &["s3"]]).unwrap();
        let mut buf = Vec::new();
        sk.write(&mut buf).unwrap();
        assert_eq!(SkillMap::read(buf.as_slice()).unwrap(), sk);

        let g = build_graph(&sk, Weighting::Jaccard).unwrap();
        let mut buf = Vec::new();
        g.write_edges(&mut buf).unwrap();
        let back = QuestionGraph::read_edges(buf.as_slice()).unwrap();
        assert_eq!(back.edges(), g.edges());
    }

    #[test]
    fn sparse_ids_rejected() {
        assert!(SkillMap::read("0\ta\n2\tb\n".as_bytes()).is_err());
        assert!(SkillMap::read("0\n".as_bytes()).is_err());
    }
}
