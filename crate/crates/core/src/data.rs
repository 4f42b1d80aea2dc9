//! Node-classification datasets: file ingestion, synthetic stochastic block
//! models, random splits and the homophily statistic.

use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{read_edge_list, Graph};
use crate::matrix::Matrix;

#[derive(Debug, Clone)]
pub struct Dataset {
    pub graph: Graph,
    pub features: Matrix,
    pub labels: Vec<usize>,
    pub classes: usize,
    pub names: Option<Vec<String>>,
}

impl Dataset {
    pub fn new(graph: Graph, features: Matrix, labels: Vec<usize>) -> Result<Self> {
        let n = graph.node_count();
        if labels.len() != n || features.rows() != n {
            return Err(Error::DimensionMismatch(format!(
                "{n} nodes, {} labels, {} feature rows",
                labels.len(),
                features.rows()
            )));
        }
        let classes = labels.iter().max().map_or(0, |m| m + 1);
        if classes < 2 {
            return Err(Error::InvalidConfig("a dataset needs at least two classes".into()));
        }
        Ok(Self { graph, features, labels, classes, names: None })
    }

    pub fn node_count(&self) -> usize {
        self.graph.node_count()
    }
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|source| Error::Io { path: path.display().to_string(), source })
}

/// Comma-separated features, one row per node.
pub fn parse_features(text: &str, source: &str) -> Result<Matrix> {
    let mut rows = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let err = |msg: String| Error::Parse { path: source.to_string(), line: lineno + 1, msg };
        let row = line
            .split(',')
            .map(|f| {
                let f = f.trim();
                match f.parse::<f64>() {
                    Ok(v) if v.is_finite() => Ok(v),
                    _ => Err(err(format!("bad feature value {f:?}"))),
                }
            })
            .collect::<Result<Vec<f64>>>()?;
        if let Some(first) = rows.first().map(Vec::len) {
            if row.len() != first {
                return Err(err(format!("{} columns, expected {first}", row.len())));
            }
        }
        rows.push(row);
    }
    Matrix::from_rows(&rows)
}

/// One non-negative integer class id per line.
pub fn parse_labels(text: &str, source: &str) -> Result<Vec<usize>> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(lineno, l)| {
            l.trim().parse::<usize>().map_err(|_| Error::Parse {
                path: source.to_string(),
                line: lineno + 1,
                msg: format!("bad label {:?}", l.trim()),
            })
        })
        .collect()
}

/// Scales every feature row to unit L1 norm (zero rows stay zero).
pub fn row_normalize(features: &mut Matrix) {
    for r in 0..features.rows() {
        let row = features.row_mut(r);
        let s: f64 = row.iter().map(|v| v.abs()).sum();
        if s > 0.0 {
            row.iter_mut().for_each(|v| *v /= s);
        }
    }
}

/// Loads an edge list, a feature CSV and a label file. The node count is
/// the number of labels.
pub fn load_dataset(edges: &Path, features: &Path, labels: &Path, normalize: bool) -> Result<Dataset> {
    let label_vec = parse_labels(&read(labels)?, &labels.display().to_string())?;
    let mut feats = parse_features(&read(features)?, &features.display().to_string())?;
    if feats.rows() != label_vec.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} has {} rows but {} has {} labels",
            features.display(),
            feats.rows(),
            labels.display(),
            label_vec.len()
        )));
    }
    if normalize {
        row_normalize(&mut feats);
    }
    let graph = Graph::from_edges(&read_edge_list(edges)?, label_vec.len())?;
    Dataset::new(graph, feats, label_vec)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Split {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
    pub seed: u64,
}

/// Seeded shuffle, then contiguous train/val/test slices of
/// `round(n·proportion)` nodes each.
pub fn random_split(n: usize, proportions: (f64, f64, f64), seed: u64) -> Result<Split> {
    let (pt, pv, ps) = proportions;
    if [pt, pv, ps].iter().any(|p| !(0.0..=1.0).contains(p)) || pt + pv + ps > 1.0 + 1e-12 {
        return Err(Error::InvalidConfig(format!("bad split proportions {proportions:?}")));
    }
    let sizes = [pt, pv, ps].map(|p| (n as f64 * p).round() as usize);
    if sizes.contains(&0) || sizes.iter().sum::<usize>() > n {
        return Err(Error::InvalidConfig(format!("{n} nodes cannot fill split {proportions:?}")));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let (train, rest) = order.split_at(sizes[0]);
    let (val, rest) = rest.split_at(sizes[1]);
    Ok(Split { train: train.to_vec(), val: val.to_vec(), test: rest[..sizes[2]].to_vec(), seed })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SbmSpec {
    pub n_per_block: usize,
    pub blocks: usize,
    pub p_in: f64,
    pub p_out: f64,
    pub feature_dim: usize,
    pub noise: f64,
    pub seed: u64,
}

impl SbmSpec {
    /// Two blocks of 200 nodes with mostly cross-block edges.
    pub fn heterophilic(seed: u64) -> Self {
        Self { n_per_block: 200, blocks: 2, p_in: 0.02, p_out: 0.2, feature_dim: 16, noise: 1.0, seed }
    }

    /// [`SbmSpec::heterophilic`] with the edge probabilities swapped.
    pub fn homophilic(seed: u64) -> Self {
        Self { p_in: 0.2, p_out: 0.02, ..Self::heterophilic(seed) }
    }
}

/// Stochastic block model: node `u` belongs to block `u / n_per_block`, which
/// is also its label. Features are a unit-norm random class mean plus
/// isotropic Gaussian noise of standard deviation `noise`.
pub fn generate_sbm(spec: &SbmSpec) -> Result<Dataset> {
    if spec.n_per_block == 0 || spec.blocks < 2 || spec.feature_dim == 0 {
        return Err(Error::InvalidConfig(format!(
            "degenerate block model: {} blocks of {} nodes, {} features",
            spec.blocks, spec.n_per_block, spec.feature_dim
        )));
    }
    for (name, p) in [("p_in", spec.p_in), ("p_out", spec.p_out)] {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::OutOfRange { name, value: p, range: "[0, 1]" });
        }
    }
    if !(spec.noise >= 0.0 && spec.noise.is_finite()) {
        return Err(Error::OutOfRange { name: "noise", value: spec.noise, range: "[0, ∞)" });
    }
    let n = spec.n_per_block * spec.blocks;
    let labels: Vec<usize> = (0..n).map(|u| u / spec.n_per_block).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);

    let mut edges = Vec::new();
    for u in 0..n {
        for v in u + 1..n {
            let p = if labels[u] == labels[v] { spec.p_in } else { spec.p_out };
            if rng.random::<f64>() < p {
                edges.push((u, v, 1.0));
            }
        }
    }
    let graph = Graph::from_edges(&edges, n)?;

    let f = spec.feature_dim;
    let means: Vec<Vec<f64>> = (0..spec.blocks)
        .map(|_| {
            let v: Vec<f64> = (0..f).map(|_| rng.sample(StandardNormal)).collect();
            let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt().max(f64::MIN_POSITIVE);
            v.into_iter().map(|x| x / norm).collect()
        })
        .collect();
    let mut features = Matrix::zeros(n, f);
    for u in 0..n {
        for (j, m) in means[labels[u]].iter().enumerate() {
            let z: f64 = rng.sample(StandardNormal);
            features.set(u, j, m + spec.noise * z);
        }
    }
    Dataset::new(graph, features, labels)
}

/// Mean over non-isolated nodes of the fraction of neighbors sharing the
/// node's label.
pub fn homophily(g: &Graph, labels: &[usize]) -> Result<f64> {
    let n = g.node_count();
    if labels.len() != n {
        return Err(Error::DimensionMismatch(format!("{} labels for {n} nodes", labels.len())));
    }
    let mut total = 0.0;
    let mut counted = 0usize;
    for u in 0..n {
        let nbrs = g.neighbors(u);
        if nbrs.is_empty() {
            continue;
        }
        let same = nbrs.iter().filter(|&&v| labels[v] == labels[u]).count();
        total += same as f64 / nbrs.len() as f64;
        counted += 1;
    }
    if counted == 0 {
        return Err(Error::AllIsolated);
    }
    Ok(total / counted as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    fn sbm(p_in: f64, p_out: f64, n_per_block: usize) -> Dataset {
        generate_sbm(&SbmSpec { n_per_block, blocks: 2, p_in, p_out, feature_dim: 4, noise: 1.0, seed: 5 }).unwrap()
    }

    #[test]
    fn split_sizes_and_determinism() {
        let s = random_split(10, (0.6, 0.2, 0.2), 3).unwrap();
        assert_eq!((s.train.len(), s.val.len(), s.test.len()), (6, 2, 2));
        assert_eq!(s, random_split(10, (0.6, 0.2, 0.2), 3).unwrap());
        let all: HashSet<usize> = s.train.iter().chain(&s.val).chain(&s.test).copied().collect();
        assert_eq!(all.len(), 10);
        assert!(random_split(2, (0.6, 0.2, 0.2), 0).is_err());
        assert!(random_split(10, (0.8, 0.2, 0.2), 0).is_err());
    }

    #[test]
    fn seeds_give_different_splits() {
        let splits: Vec<Split> = (0..5).map(|s| random_split(1000, (0.6, 0.2, 0.2), s).unwrap()).collect();
        for i in 0..5 {
            for j in i + 1..5 {
                assert_ne!(splits[i].train, splits[j].train);
            }
        }
    }

    #[test]
    fn block_model_extremes() {
        let d = sbm(1.0, 0.0, 5);
        assert_eq!(d.graph.edge_count(), 2 * 10);
        assert_eq!(homophily(&d.graph, &d.labels).unwrap(), 1.0);
        let d = sbm(0.0, 1.0, 5);
        assert_eq!(d.graph.edge_count(), 25);
        assert_eq!(homophily(&d.graph, &d.labels).unwrap(), 0.0);
    }

    #[test]
    fn heterophilic_block_model_has_low_homophily() {
        let d = sbm(0.02, 0.2, 200);
        assert!(homophily(&d.graph, &d.labels).unwrap() < 0.2);
        let again = sbm(0.02, 0.2, 200);
        assert_eq!(d.graph, again.graph);
        assert_eq!(d.features, again.features);
    }

    #[test]
    fn homophily_errors_and_isolated_nodes() {
        let g = Graph::from_pairs(&[], 3).unwrap();
        assert!(matches!(homophily(&g, &[0, 1, 0]), Err(Error::AllIsolated)));
        // node 2 isolated, excluded from the mean
        let g = Graph::from_pairs(&[(0, 1)], 3).unwrap();
        assert_eq!(homophily(&g, &[0, 0, 1]).unwrap(), 1.0);
    }

    #[test]
    fn parsing_errors_name_the_line() {
        let err = parse_features("1,2\n3,x\n", "feat.csv").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }), "{err}");
        let err = parse_features("1,2\n3\n", "feat.csv").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }));
        let err = parse_labels("0\n1\n-1\n", "labels").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 3, .. }));
    }

    #[test]
    fn dataset_requires_two_classes() {
        let g = Graph::from_pairs(&[(0, 1)], 2).unwrap();
        assert!(Dataset::new(g.clone(), Matrix::zeros(2, 1), vec![0, 0]).is_err());
        assert!(Dataset::new(g.clone(), Matrix::zeros(3, 1), vec![0, 1]).is_err());
        assert_eq!(Dataset::new(g, Matrix::zeros(2, 1), vec![0, 1]).unwrap().classes, 2);
    }

    #[test]
    fn row_normalization() {
        let mut m = Matrix::from_rows(&[vec![1.0, -3.0], vec![0.0, 0.0]]).unwrap();
        row_normalize(&mut m);
        assert_eq!(m.as_slice(), &[0.25, -0.75, 0.0, 0.0]);
    }
}
