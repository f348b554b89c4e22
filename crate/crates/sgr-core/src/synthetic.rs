//! Erdős–Rényi and stochastic-block-model generators and the labeled
//! self-supervision corpus built from them.
//!
//! The corpus pairs every block-model graph with an Erdős–Rényi graph whose
//! edge probability is chosen so both sides have the same expected mean
//! degree. Density is therefore uninformative and a classifier separating the
//! two classes has to read community structure out of the spectrum.

use crate::graph::{Graph, GraphCollection};
use crate::rng::{self, derive_seed, seeded_rng, unit_f64};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SyntheticError {
    #[error("edge probability {0} outside [0, 1]")]
    BadProbability(f64),
    #[error("vertex count must be at least 1")]
    EmptyGraph,
    #[error("block model needs at least 2 blocks, got {0}")]
    TooFewBlocks(usize),
    #[error("block model needs 0 <= p_out < p_in <= 1, got p_in={p_in}, p_out={p_out}")]
    NotAssortative { p_in: f64, p_out: f64 },
    #[error("graph size {n} smaller than block count {blocks}")]
    SizeBelowBlocks { n: usize, blocks: usize },
    #[error("corpus config: {0}")]
    BadConfig(String),
}

/// Erdős–Rényi G(n, p) parameters.
#[derive(Debug, Clone, Copy)]
pub struct ErParams {
    n: usize,
    p: f64,
}

impl ErParams {
    pub fn new(n: usize, p: f64) -> Result<Self, SyntheticError> {
        if n == 0 {
            return Err(SyntheticError::EmptyGraph);
        }
        if !(0.0..=1.0).contains(&p) {
            return Err(SyntheticError::BadProbability(p));
        }
        Ok(Self { n, p })
    }

    pub fn vertex_count(&self) -> usize {
        self.n
    }

    pub fn edge_probability(&self) -> f64 {
        self.p
    }
}

/// Planted-partition stochastic block model parameters.
///
/// Vertices split into `blocks` near-equal groups; a pair is connected with
/// probability `p_in` inside a group and `p_out` across groups. Assortativity
/// (`p_out < p_in`) is required, since the corpus uses the block model as the
/// "has community structure" class.
#[derive(Debug, Clone, Copy)]
pub struct SbmParams {
    n: usize,
    blocks: usize,
    p_in: f64,
    p_out: f64,
}

impl SbmParams {
    pub fn new(n: usize, blocks: usize, p_in: f64, p_out: f64) -> Result<Self, SyntheticError> {
        if n == 0 {
            return Err(SyntheticError::EmptyGraph);
        }
        if blocks < 2 {
            return Err(SyntheticError::TooFewBlocks(blocks));
        }
        if n < blocks {
            return Err(SyntheticError::SizeBelowBlocks { n, blocks });
        }
        if !(0.0 <= p_out && p_out < p_in && p_in <= 1.0) {
            return Err(SyntheticError::NotAssortative { p_in, p_out });
        }
        Ok(Self { n, blocks, p_in, p_out })
    }

    pub fn vertex_count(&self) -> usize {
        self.n
    }

    /// Block of vertex `v`: equal-size blocks of `n / blocks` vertices, with
    /// the remainder assigned to the last block.
    pub fn block_of(&self, v: usize) -> usize {
        let base = self.n / self.blocks;
        (v / base).min(self.blocks - 1)
    }

    /// Sizes of all blocks.
    pub fn block_sizes(&self) -> Vec<usize> {
        let base = self.n / self.blocks;
        let mut sizes = vec![base; self.blocks];
        sizes[self.blocks - 1] += self.n - base * self.blocks;
        sizes
    }

    /// Expected mean degree `2 E[m] / n` under these parameters.
    pub fn expected_mean_degree(&self) -> f64 {
        let sizes = self.block_sizes();
        let within: f64 = sizes.iter().map(|&s| (s * (s - 1) / 2) as f64).sum();
        let total_pairs = (self.n * (self.n - 1) / 2) as f64;
        let cross = total_pairs - within;
        2.0 * (self.p_in * within + self.p_out * cross) / self.n as f64
    }
}

/// Samples G(n, p): each of the C(n, 2) pairs is an edge independently with
/// probability `p`. Deterministic for a fixed seed.
pub fn generate_er(params: &ErParams, seed: u64) -> Graph {
    let mut rng = seeded_rng(seed);
    let mut edges = Vec::new();
    for i in 0..params.n {
        for j in (i + 1)..params.n {
            if unit_f64(&mut rng) < params.p {
                edges.push((i as u32, j as u32));
            }
        }
    }
    Graph::new(params.n, edges).expect("generated edges are valid by construction")
}

/// Samples the block model: pair probability `p_in` within a block, `p_out`
/// across. Deterministic for a fixed seed.
pub fn generate_sbm(params: &SbmParams, seed: u64) -> Graph {
    let mut rng = seeded_rng(seed);
    let block: Vec<usize> = (0..params.n).map(|v| params.block_of(v)).collect();
    let mut edges = Vec::new();
    for i in 0..params.n {
        for j in (i + 1)..params.n {
            let p = if block[i] == block[j] { params.p_in } else { params.p_out };
            if unit_f64(&mut rng) < p {
                edges.push((i as u32, j as u32));
            }
        }
    }
    Graph::new(params.n, edges).expect("generated edges are valid by construction")
}

/// Configuration of the two-class training corpus.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CorpusConfig {
    /// Graphs per class; the corpus holds twice this many.
    pub per_class: usize,
    /// Vertex counts sampled uniformly per graph pair.
    pub sizes: Vec<usize>,
    /// Target expected mean degrees sampled uniformly per graph pair.
    pub mean_degrees: Vec<f64>,
    /// Community counts sampled uniformly per block-model graph.
    pub blocks: Vec<usize>,
    /// Assortativity ratio `p_in / p_out`.
    pub ratio: f64,
    /// Master seed; everything else derives from it.
    pub seed: u64,
}

impl Default for CorpusConfig {
    fn default() -> Self {
        Self {
            per_class: 1000,
            sizes: vec![64, 128, 256, 512],
            mean_degrees: vec![4.0, 8.0, 16.0],
            blocks: vec![2, 3, 4, 5],
            ratio: 8.0,
            seed: 0,
        }
    }
}

impl CorpusConfig {
    pub fn validate(&self) -> Result<(), SyntheticError> {
        if self.per_class == 0 {
            return Err(SyntheticError::BadConfig("per_class must be at least 1".into()));
        }
        if self.sizes.is_empty() || self.mean_degrees.is_empty() || self.blocks.is_empty() {
            return Err(SyntheticError::BadConfig(
                "sizes, mean_degrees and blocks must be non-empty".into(),
            ));
        }
        if self.ratio <= 1.0 || !self.ratio.is_finite() {
            return Err(SyntheticError::BadConfig(format!(
                "assortativity ratio must be finite and > 1, got {}",
                self.ratio
            )));
        }
        let max_blocks = *self.blocks.iter().max().expect("non-empty");
        if let Some(&n) = self.sizes.iter().find(|&&n| n < max_blocks) {
            return Err(SyntheticError::SizeBelowBlocks { n, blocks: max_blocks });
        }
        if self.blocks.iter().any(|&b| b < 2) {
            return Err(SyntheticError::TooFewBlocks(
                *self.blocks.iter().min().expect("non-empty"),
            ));
        }
        for (&n, &d) in self.sizes.iter().flat_map(|n| self.mean_degrees.iter().map(move |d| (n, d)))
        {
            if !(d > 0.0) || d > (n - 1) as f64 {
                return Err(SyntheticError::BadConfig(format!(
                    "mean degree {d} unreachable on {n} vertices"
                )));
            }
        }
        Ok(())
    }
}

/// Block-model probabilities hitting a target expected mean degree at a given
/// `p_in / p_out` ratio.
pub fn sbm_probabilities(
    n: usize,
    blocks: usize,
    mean_degree: f64,
    ratio: f64,
) -> Result<(f64, f64), SyntheticError> {
    // Placeholder probabilities; only the partition geometry matters here.
    let proto = SbmParams::new(n, blocks, 0.5, 0.25)?;
    let sizes = proto.block_sizes();
    let within: f64 = sizes.iter().map(|&s| (s * (s - 1) / 2) as f64).sum();
    let total_pairs = (n * (n - 1) / 2) as f64;
    let cross = total_pairs - within;
    // Solve  2 (p_in * within + p_out * cross) / n = mean_degree  with
    // p_in = ratio * p_out.
    let p_out = mean_degree * n as f64 / (2.0 * (ratio * within + cross));
    let p_in = ratio * p_out;
    if p_in > 1.0 {
        return Err(SyntheticError::BadConfig(format!(
            "mean degree {mean_degree} with ratio {ratio} needs p_in={p_in:.3} > 1 on n={n}, blocks={blocks}"
        )));
    }
    Ok((p_in, p_out))
}

/// Erdős–Rényi probability matching a target expected mean degree.
pub fn er_probability(n: usize, mean_degree: f64) -> f64 {
    (mean_degree / (n - 1) as f64).min(1.0)
}

/// Generates the labeled self-supervision corpus: `per_class` density-matched
/// (Erdős–Rényi, block model) pairs. Label 0 is Erdős–Rényi, label 1 the
/// block model. Fully determined by the config, including its seed.
pub fn generate_training_corpus(config: &CorpusConfig) -> Result<GraphCollection, SyntheticError> {
    config.validate()?;
    // Three derived seeds per pair: parameter sampling, ER graph, SBM graph.
    // Pairs are independent, so generation parallelizes without changing the
    // output.
    let pairs: Vec<(Graph, Graph)> = (0..config.per_class)
        .into_par_iter()
        .map(|pair_idx| {
            let idx = pair_idx as u64;
            let mut param_rng = seeded_rng(derive_seed(config.seed, 3 * idx));
            let n = config.sizes[rng::pick_index(&mut param_rng, config.sizes.len())];
            let d = config.mean_degrees[rng::pick_index(&mut param_rng, config.mean_degrees.len())];
            let b = config.blocks[rng::pick_index(&mut param_rng, config.blocks.len())];
            let (p_in, p_out) = sbm_probabilities(n, b, d, config.ratio)?;
            let sbm = SbmParams::new(n, b, p_in, p_out)?;
            let er = ErParams::new(n, er_probability(n, sbm.expected_mean_degree()))?;
            Ok((
                generate_er(&er, derive_seed(config.seed, 3 * idx + 1)),
                generate_sbm(&sbm, derive_seed(config.seed, 3 * idx + 2)),
            ))
        })
        .collect::<Result<_, SyntheticError>>()?;

    let mut graphs = Vec::with_capacity(2 * config.per_class);
    let mut labels = Vec::with_capacity(2 * config.per_class);
    for (er, sbm) in pairs {
        graphs.push(er);
        labels.push(0);
        graphs.push(sbm);
        labels.push(1);
    }
    Ok(GraphCollection::new("er-vs-sbm", graphs, labels)
        .expect("labels are contiguous by construction"))
}
