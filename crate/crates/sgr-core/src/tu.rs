//! Loader and writer for the TU graph-benchmark text format.
//!
//! A dataset `NAME` in directory `dir` consists of three newline-delimited
//! files:
//!
//! * `NAME_A.txt` — one edge per line as comma-separated 1-indexed global
//!   node ids; undirected edges are conventionally listed in both directions,
//! * `NAME_graph_indicator.txt` — line `v` holds the 1-indexed graph id of
//!   global node `v`,
//! * `NAME_graph_labels.txt` — line `g` holds the integer class label of
//!   graph `g`.
//!
//! Node and edge attribute files (`NAME_node_labels.txt` and friends) are
//! ignored: the representations built here use structure only.

use crate::graph::{Graph, GraphCollection};
use std::fs;
use std::io::Write;
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum TuError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{file}:{line}: expected {expected}, got `{got}`")]
    Parse { file: String, line: usize, expected: &'static str, got: String },
    #[error("{file}:{line}: node {node} not declared in graph indicator")]
    UnknownNode { file: String, line: usize, node: usize },
    #[error("{file}:{line}: edge ({a}, {b}) crosses graph boundary ({ga} vs {gb})")]
    CrossGraphEdge { file: String, line: usize, a: usize, b: usize, ga: usize, gb: usize },
    #[error("label file lists {labels} graphs but the indicator declares {graphs}")]
    LabelCount { labels: usize, graphs: usize },
    #[error("invalid graph data: {0}")]
    Graph(#[from] crate::graph::GraphError),
}

fn read_lines(path: &Path) -> Result<Vec<String>, TuError> {
    let text = fs::read_to_string(path).map_err(|source| TuError::Io {
        path: path.display().to_string(),
        source,
    })?;
    Ok(text.lines().map(|l| l.trim().to_string()).collect())
}

fn parse_int(file: &str, line_no: usize, token: &str, expected: &'static str) -> Result<i64, TuError> {
    token.trim().parse().map_err(|_| TuError::Parse {
        file: file.to_string(),
        line: line_no,
        expected,
        got: token.to_string(),
    })
}

/// Loads dataset `name` from `dir` into a [`GraphCollection`].
///
/// Vertices are renumbered to 0-based ids local to each graph, reciprocal and
/// duplicate edge rows collapse to one undirected edge, self-loop rows are
/// dropped, and labels are remapped to contiguous 0-based classes ordered by
/// their value in the file.
pub fn load_tu_dataset(dir: &Path, name: &str) -> Result<GraphCollection, TuError> {
    let indicator_path = dir.join(format!("{name}_graph_indicator.txt"));
    let edges_path = dir.join(format!("{name}_A.txt"));
    let labels_path = dir.join(format!("{name}_graph_labels.txt"));

    // Graph membership of every global node.
    let indicator_file = indicator_path.display().to_string();
    let mut node_graph = Vec::new(); // graph id (0-based) per global node (0-based)
    let mut graph_count = 0usize;
    for (idx, line) in read_lines(&indicator_path)?.iter().enumerate() {
        if line.is_empty() {
            continue;
        }
        let gid = parse_int(&indicator_file, idx + 1, line, "graph id")?;
        if gid < 1 {
            return Err(TuError::Parse {
                file: indicator_file,
                line: idx + 1,
                expected: "positive graph id",
                got: line.clone(),
            });
        }
        let gid = gid as usize - 1;
        graph_count = graph_count.max(gid + 1);
        node_graph.push(gid);
    }

    // Local 0-based vertex id per global node, assigned in file order.
    let mut local_id = vec![0u32; node_graph.len()];
    let mut graph_sizes = vec![0usize; graph_count];
    for (node, &gid) in node_graph.iter().enumerate() {
        local_id[node] = graph_sizes[gid] as u32;
        graph_sizes[gid] += 1;
    }

    // Edges, grouped per graph.
    let edges_file = edges_path.display().to_string();
    let mut graph_edges: Vec<Vec<(u32, u32)>> = vec![Vec::new(); graph_count];
    for (idx, line) in read_lines(&edges_path)?.iter().enumerate() {
        if line.is_empty() {
            continue;
        }
        let line_no = idx + 1;
        let mut parts = line.splitn(2, ',');
        let a = parts.next().unwrap_or("");
        let b = parts.next().ok_or_else(|| TuError::Parse {
            file: edges_file.clone(),
            line: line_no,
            expected: "comma-separated node pair",
            got: line.clone(),
        })?;
        let a = parse_int(&edges_file, line_no, a, "node id")?;
        let b = parse_int(&edges_file, line_no, b, "node id")?;
        for v in [a, b] {
            if v < 1 || v as usize > node_graph.len() {
                return Err(TuError::UnknownNode {
                    file: edges_file.clone(),
                    line: line_no,
                    node: v.max(0) as usize,
                });
            }
        }
        let (a, b) = (a as usize - 1, b as usize - 1);
        let (ga, gb) = (node_graph[a], node_graph[b]);
        if ga != gb {
            return Err(TuError::CrossGraphEdge {
                file: edges_file.clone(),
                line: line_no,
                a: a + 1,
                b: b + 1,
                ga: ga + 1,
                gb: gb + 1,
            });
        }
        if a != b {
            graph_edges[ga].push((local_id[a], local_id[b]));
        }
    }

    // Labels, remapped to contiguous 0-based classes by sorted raw value.
    let labels_file = labels_path.display().to_string();
    let mut raw_labels = Vec::new();
    for (idx, line) in read_lines(&labels_path)?.iter().enumerate() {
        if line.is_empty() {
            continue;
        }
        raw_labels.push(parse_int(&labels_file, idx + 1, line, "integer label")?);
    }
    if raw_labels.len() != graph_count {
        return Err(TuError::LabelCount { labels: raw_labels.len(), graphs: graph_count });
    }
    let mut classes: Vec<i64> = raw_labels.clone();
    classes.sort_unstable();
    classes.dedup();
    let labels: Vec<usize> = raw_labels
        .iter()
        .map(|l| classes.binary_search(l).expect("label present in class list"))
        .collect();

    let graphs = graph_sizes
        .iter()
        .zip(graph_edges)
        .map(|(&size, edges)| Graph::new(size, edges))
        .collect::<Result<Vec<_>, _>>()?;

    Ok(GraphCollection::new(name, graphs, labels)?)
}

/// Writes a collection in TU format; `load_tu_dataset` inverts this exactly.
///
/// Each undirected edge is emitted in both directions, the de facto benchmark
/// convention.
pub fn write_tu_dataset(collection: &GraphCollection, dir: &Path) -> Result<(), TuError> {
    fs::create_dir_all(dir).map_err(|source| TuError::Io {
        path: dir.display().to_string(),
        source,
    })?;
    let name = &collection.name;
    let write = |file_name: String, body: String| -> Result<(), TuError> {
        let path = dir.join(file_name);
        let mut f = fs::File::create(&path)
            .map_err(|source| TuError::Io { path: path.display().to_string(), source })?;
        f.write_all(body.as_bytes())
            .map_err(|source| TuError::Io { path: path.display().to_string(), source })
    };

    let mut indicator = String::new();
    let mut edges = String::new();
    let mut labels = String::new();
    let mut offset = 0usize; // global id of the first node of the current graph
    for (graph_idx, (graph, &label)) in
        collection.graphs().iter().zip(collection.labels()).enumerate()
    {
        for _ in 0..graph.vertex_count() {
            indicator.push_str(&format!("{}\n", graph_idx + 1));
        }
        let mut directed: Vec<(usize, usize)> = Vec::with_capacity(2 * graph.edge_count());
        for &(i, j) in graph.edges() {
            let (gi, gj) = (offset + i as usize + 1, offset + j as usize + 1);
            directed.push((gi, gj));
            directed.push((gj, gi));
        }
        directed.sort_unstable();
        for (a, b) in directed {
            edges.push_str(&format!("{a}, {b}\n"));
        }
        labels.push_str(&format!("{label}\n"));
        offset += graph.vertex_count();
    }

    write(format!("{name}_graph_indicator.txt"), indicator)?;
    write(format!("{name}_A.txt"), edges)?;
    write(format!("{name}_graph_labels.txt"), labels)
}
