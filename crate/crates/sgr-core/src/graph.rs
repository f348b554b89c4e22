//! Graph data model and normalized Laplacian construction.

use nalgebra::DMatrix;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum GraphError {
    #[error("vertex count must be at least 1")]
    EmptyGraph,
    #[error("self-loop at vertex {0}")]
    SelfLoop(u32),
    #[error("edge endpoint {endpoint} out of range for {n} vertices")]
    VertexOutOfRange { endpoint: u32, n: usize },
    #[error("permutation of length {got} applied to graph with {n} vertices")]
    PermutationLength { got: usize, n: usize },
    #[error("permutation is not a bijection: value {0} repeated or out of range")]
    PermutationNotBijective(usize),
    #[error("graph count {graphs} does not match label count {labels}")]
    LabelCountMismatch { graphs: usize, labels: usize },
    #[error("labels are not a contiguous 0-based class set (class {0} missing)")]
    NonContiguousLabels(usize),
}

/// An undirected, unweighted graph: a vertex count and a set of edges.
///
/// Edges are stored canonically as sorted pairs `(i, j)` with `i < j`;
/// self-loops are rejected and duplicates collapse, so the edge list is a set.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Graph {
    n: usize,
    edges: Vec<(u32, u32)>,
}

impl Graph {
    /// Builds a graph from any iterator of edges, in either endpoint order.
    pub fn new(n: usize, edges: impl IntoIterator<Item = (u32, u32)>) -> Result<Self, GraphError> {
        if n == 0 {
            return Err(GraphError::EmptyGraph);
        }
        let mut canonical = Vec::new();
        for (a, b) in edges {
            if a == b {
                return Err(GraphError::SelfLoop(a));
            }
            for endpoint in [a, b] {
                if endpoint as usize >= n {
                    return Err(GraphError::VertexOutOfRange { endpoint, n });
                }
            }
            canonical.push((a.min(b), a.max(b)));
        }
        canonical.sort_unstable();
        canonical.dedup();
        Ok(Self { n, edges: canonical })
    }

    /// Graph with no edges.
    pub fn edgeless(n: usize) -> Result<Self, GraphError> {
        Self::new(n, [])
    }

    /// Number of vertices.
    pub fn vertex_count(&self) -> usize {
        self.n
    }

    /// Number of edges.
    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    /// Edges in canonical `(i, j)`, `i < j` order.
    pub fn edges(&self) -> &[(u32, u32)] {
        &self.edges
    }

    /// Per-vertex degree; the sum of all entries is `2m`.
    pub fn degrees(&self) -> Vec<usize> {
        let mut deg = vec![0usize; self.n];
        for &(i, j) in &self.edges {
            deg[i as usize] += 1;
            deg[j as usize] += 1;
        }
        deg
    }

    /// Mean vertex degree `2m / n`.
    pub fn mean_degree(&self) -> f64 {
        2.0 * self.edges.len() as f64 / self.n as f64
    }

    /// Relabels vertices: vertex `v` becomes `perm[v]`.
    ///
    /// The result is isomorphic to the input. `perm` must be a bijection on
    /// `[0, n)`.
    pub fn permute(&self, perm: &[usize]) -> Result<Self, GraphError> {
        if perm.len() != self.n {
            return Err(GraphError::PermutationLength { got: perm.len(), n: self.n });
        }
        let mut seen = vec![false; self.n];
        for &p in perm {
            if p >= self.n || seen[p] {
                return Err(GraphError::PermutationNotBijective(p));
            }
            seen[p] = true;
        }
        let edges = self
            .edges
            .iter()
            .map(|&(i, j)| (perm[i as usize] as u32, perm[j as usize] as u32));
        Self::new(self.n, edges)
    }

    /// Number of connected components (isolated vertices count as components).
    pub fn component_count(&self) -> usize {
        let mut uf = UnionFind::new(self.n);
        for &(i, j) in &self.edges {
            uf.union(i as usize, j as usize);
        }
        uf.set_count()
    }

    /// Builds the normalized Laplacian `L = I - D^{-1/2} A D^{-1/2}`.
    pub fn normalized_laplacian(&self) -> Laplacian {
        let deg = self.degrees();
        let inv_sqrt: Vec<f64> = deg
            .iter()
            .map(|&d| if d > 0 { 1.0 / (d as f64).sqrt() } else { 0.0 })
            .collect();
        let diag: Vec<f64> = deg.iter().map(|&d| if d > 0 { 1.0 } else { 0.0 }).collect();
        let off: Vec<(u32, u32, f64)> = self
            .edges
            .iter()
            .map(|&(i, j)| (i, j, -inv_sqrt[i as usize] * inv_sqrt[j as usize]))
            .collect();
        Laplacian { n: self.n, diag, off }
    }
}

/// Sparse symmetric normalized Laplacian.
///
/// Diagonal entries are 1 for vertices with at least one edge and 0 for
/// isolated vertices (the row and column of an isolated vertex are zero, so it
/// contributes eigenvalue 0). Off-diagonal entries are `-1/sqrt(d_i d_j)` per
/// edge.
#[derive(Debug, Clone)]
pub struct Laplacian {
    n: usize,
    diag: Vec<f64>,
    /// Upper-triangle entries `(i, j, value)` with `i < j`.
    off: Vec<(u32, u32, f64)>,
}

impl Laplacian {
    /// Matrix dimension.
    pub fn dim(&self) -> usize {
        self.n
    }

    /// Number of stored off-diagonal (upper-triangle) entries.
    pub fn edge_count(&self) -> usize {
        self.off.len()
    }

    /// Trace of the matrix, which equals the number of non-isolated vertices.
    pub fn trace(&self) -> f64 {
        self.diag.iter().sum()
    }

    /// Entry `(i, j)`; O(log m) via binary search on the canonical edge order.
    pub fn entry(&self, i: usize, j: usize) -> f64 {
        if i == j {
            return self.diag[i];
        }
        let key = (i.min(j) as u32, i.max(j) as u32);
        match self.off.binary_search_by(|&(a, b, _)| (a, b).cmp(&key)) {
            Ok(idx) => self.off[idx].2,
            Err(_) => 0.0,
        }
    }

    /// Matrix-vector product `y = L x`.
    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.n);
        assert_eq!(y.len(), self.n);
        for i in 0..self.n {
            y[i] = self.diag[i] * x[i];
        }
        for &(i, j, w) in &self.off {
            y[i as usize] += w * x[j as usize];
            y[j as usize] += w * x[i as usize];
        }
    }

    /// Dense copy of the matrix.
    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.n, self.n);
        for i in 0..self.n {
            m[(i, i)] = self.diag[i];
        }
        for &(i, j, w) in &self.off {
            m[(i as usize, j as usize)] = w;
            m[(j as usize, i as usize)] = w;
        }
        m
    }

    /// Connected components of the support graph (isolated vertices included).
    pub fn component_count(&self) -> usize {
        let mut uf = UnionFind::new(self.n);
        for &(i, j, _) in &self.off {
            uf.union(i as usize, j as usize);
        }
        uf.set_count()
    }

    /// Number of bipartite components containing at least one edge.
    ///
    /// Each such component contributes one eigenvalue exactly equal to 2;
    /// together with [`Laplacian::component_count`] (eigenvalue 0 multiplicity)
    /// this pins the combinatorially-known part of the spectrum.
    pub fn bipartite_component_count(&self) -> usize {
        let mut adj = vec![Vec::new(); self.n];
        for &(i, j, _) in &self.off {
            adj[i as usize].push(j as usize);
            adj[j as usize].push(i as usize);
        }
        let mut color = vec![u8::MAX; self.n];
        let mut count = 0usize;
        let mut queue = Vec::new();
        for start in 0..self.n {
            if color[start] != u8::MAX || adj[start].is_empty() {
                continue;
            }
            color[start] = 0;
            queue.clear();
            queue.push(start);
            let mut bipartite = true;
            while let Some(v) = queue.pop() {
                for &u in &adj[v] {
                    if color[u] == u8::MAX {
                        color[u] = 1 - color[v];
                        queue.push(u);
                    } else if color[u] == color[v] {
                        bipartite = false;
                    }
                }
            }
            if bipartite {
                count += 1;
            }
        }
        count
    }
}

/// A labeled set of graphs.
#[derive(Debug, Clone)]
pub struct GraphCollection {
    pub name: String,
    graphs: Vec<Graph>,
    labels: Vec<usize>,
}

impl GraphCollection {
    /// Labels must form a contiguous 0-based class set `{0, .., k-1}`.
    pub fn new(
        name: impl Into<String>,
        graphs: Vec<Graph>,
        labels: Vec<usize>,
    ) -> Result<Self, GraphError> {
        if graphs.len() != labels.len() {
            return Err(GraphError::LabelCountMismatch {
                graphs: graphs.len(),
                labels: labels.len(),
            });
        }
        if let Some(&max) = labels.iter().max() {
            let mut present = vec![false; max + 1];
            for &l in &labels {
                present[l] = true;
            }
            if let Some(missing) = present.iter().position(|&p| !p) {
                return Err(GraphError::NonContiguousLabels(missing));
            }
        }
        Ok(Self { name: name.into(), graphs, labels })
    }

    pub fn len(&self) -> usize {
        self.graphs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.graphs.is_empty()
    }

    pub fn graphs(&self) -> &[Graph] {
        &self.graphs
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    /// Number of distinct classes.
    pub fn class_count(&self) -> usize {
        self.labels.iter().max().map_or(0, |&m| m + 1)
    }
}

struct UnionFind {
    parent: Vec<usize>,
    sets: usize,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        Self { parent: (0..n).collect(), sets: n }
    }

    fn find(&mut self, mut v: usize) -> usize {
        while self.parent[v] != v {
            self.parent[v] = self.parent[self.parent[v]];
            v = self.parent[v];
        }
        v
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            self.parent[ra] = rb;
            self.sets -= 1;
        }
    }

    fn set_count(&self) -> usize {
        self.sets
    }
}
