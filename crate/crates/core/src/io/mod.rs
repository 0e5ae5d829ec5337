//! File formats: TSV edge lists, feature matrices, label assignments,
//! per-node distributions, and the versioned text model format.
//!
//! All TSV readers accept `#` comment lines and blank lines. Floats are
//! written with Rust's shortest round-trip formatting, so write-then-read
//! reproduces values exactly.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::graph::{Graph, NodeFeatures};
use crate::nn::{Activation, DenseLayer, ModelParams};
use crate::trainer::Labels;

fn parse_err(line: usize, message: impl Into<String>) -> Error {
    Error::Parse { line, message: message.into() }
}

fn data_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim_end_matches('\r')))
        .filter(|(_, l)| !l.trim().is_empty() && !l.trim_start().starts_with('#'))
}

// ---------------------------------------------------------------------------
// Edge lists: `u<TAB>v[<TAB>weight]`
// ---------------------------------------------------------------------------

/// Parses an edge list. Weight defaults to 1.0 when absent.
pub fn parse_edges(text: &str) -> Result<Vec<(usize, usize, f64)>> {
    let mut edges = Vec::new();
    for (line_no, line) in data_lines(text) {
        let mut fields = line.split('\t');
        let u = fields
            .next()
            .ok_or_else(|| parse_err(line_no, "missing source node"))?
            .trim()
            .parse::<usize>()
            .map_err(|e| parse_err(line_no, format!("bad source node id: {e}")))?;
        let v = fields
            .next()
            .ok_or_else(|| parse_err(line_no, "missing target node"))?
            .trim()
            .parse::<usize>()
            .map_err(|e| parse_err(line_no, format!("bad target node id: {e}")))?;
        let weight = match fields.next() {
            Some(w) => w
                .trim()
                .parse::<f64>()
                .map_err(|e| parse_err(line_no, format!("bad weight: {e}")))?,
            None => 1.0,
        };
        if fields.next().is_some() {
            return Err(parse_err(line_no, "too many fields (expected u, v[, weight])"));
        }
        edges.push((u, v, weight));
    }
    Ok(edges)
}

pub fn read_edge_file(path: &Path) -> Result<Vec<(usize, usize, f64)>> {
    parse_edges(&fs::read_to_string(path)?)
}

/// Builds a graph from an edge file. Node count defaults to the largest id
/// plus one.
pub fn graph_from_edge_file(path: &Path, n_nodes: Option<usize>) -> Result<Graph> {
    let edges = read_edge_file(path)?;
    let inferred = edges.iter().map(|&(u, v, _)| u.max(v) + 1).max().unwrap_or(0);
    let n = match n_nodes {
        Some(n) => {
            if n < inferred {
                return Err(Error::Data(format!(
                    "edge file references node {} but n_nodes is {n}",
                    inferred - 1
                )));
            }
            n
        }
        None => inferred,
    };
    Graph::from_edges(n, edges)
}

pub fn format_edges(graph: &Graph) -> String {
    let mut out = String::new();
    for edge in graph.edges() {
        writeln!(out, "{}\t{}\t{}", edge.u, edge.v, edge.weight).expect("string write");
    }
    out
}

pub fn write_edge_file(path: &Path, graph: &Graph) -> Result<()> {
    fs::write(path, format_edges(graph))?;
    Ok(())
}

// ---------------------------------------------------------------------------
// Features: `node<TAB>v1,v2,...` (dense) or `node<TAB>i:v i:v ...` (sparse)
// ---------------------------------------------------------------------------

/// Parses a feature file. The file is sparse if any row uses `idx:val`
/// entries. Every node id in `0..n` must appear exactly once, where `n` is
/// one plus the largest id seen.
pub fn parse_features(text: &str) -> Result<NodeFeatures> {
    let sparse = data_lines(text).any(|(_, l)| l.split('\t').nth(1).is_some_and(|f| f.contains(':')));
    let mut rows: Vec<(usize, usize, &str)> = Vec::new();
    for (line_no, line) in data_lines(text) {
        let mut fields = line.split('\t');
        let node = fields
            .next()
            .ok_or_else(|| parse_err(line_no, "missing node id"))?
            .trim()
            .parse::<usize>()
            .map_err(|e| parse_err(line_no, format!("bad node id: {e}")))?;
        let values = fields.next().unwrap_or("");
        if fields.next().is_some() {
            return Err(parse_err(line_no, "too many fields (expected node, values)"));
        }
        rows.push((node, line_no, values));
    }
    let n = rows.iter().map(|&(node, ..)| node + 1).max().unwrap_or(0);
    let mut seen = vec![false; n];
    for &(node, line_no, _) in &rows {
        if seen[node] {
            return Err(parse_err(line_no, format!("duplicate feature row for node {node}")));
        }
        seen[node] = true;
    }
    if let Some(missing) = seen.iter().position(|&s| !s) {
        return Err(Error::Data(format!("feature file is missing a row for node {missing}")));
    }

    if sparse {
        let mut parsed: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
        let mut dim = 0usize;
        for (node, line_no, values) in rows {
            let mut entries = Vec::new();
            for token in values.split_whitespace() {
                let (idx, val) = token
                    .split_once(':')
                    .ok_or_else(|| parse_err(line_no, format!("expected idx:val, got {token:?}")))?;
                let idx = idx
                    .parse::<usize>()
                    .map_err(|e| parse_err(line_no, format!("bad feature index: {e}")))?;
                let val = val
                    .parse::<f64>()
                    .map_err(|e| parse_err(line_no, format!("bad feature value: {e}")))?;
                dim = dim.max(idx + 1);
                entries.push((idx, val));
            }
            parsed[node] = entries;
        }
        NodeFeatures::sparse(dim, parsed)
    } else {
        let mut parsed: Vec<Vec<f64>> = vec![Vec::new(); n];
        for (node, line_no, values) in rows {
            let row: Vec<f64> = values
                .split(',')
                .filter(|t| !t.trim().is_empty())
                .map(|t| {
                    t.trim()
                        .parse::<f64>()
                        .map_err(|e| parse_err(line_no, format!("bad feature value: {e}")))
                })
                .collect::<Result<_>>()?;
            if row.is_empty() {
                return Err(parse_err(line_no, "empty dense feature row"));
            }
            parsed[node] = row;
        }
        NodeFeatures::dense(parsed)
    }
}

pub fn read_feature_file(path: &Path) -> Result<NodeFeatures> {
    parse_features(&fs::read_to_string(path)?)
}

/// Formats features in the representation they are stored in.
pub fn format_features(features: &NodeFeatures) -> String {
    let mut out = String::new();
    match features {
        NodeFeatures::Dense { rows, .. } => {
            for (node, row) in rows.iter().enumerate() {
                let values: Vec<String> = row.iter().map(|v| v.to_string()).collect();
                writeln!(out, "{node}\t{}", values.join(",")).expect("string write");
            }
        }
        NodeFeatures::Sparse { rows, .. } => {
            for (node, row) in rows.iter().enumerate() {
                let values: Vec<String> =
                    row.iter().map(|(i, v)| format!("{i}:{v}")).collect();
                writeln!(out, "{node}\t{}", values.join(" ")).expect("string write");
            }
        }
    }
    out
}

pub fn write_feature_file(path: &Path, features: &NodeFeatures) -> Result<()> {
    fs::write(path, format_features(features))?;
    Ok(())
}

// ---------------------------------------------------------------------------
// Labels: `node<TAB>label[,label...]`
// ---------------------------------------------------------------------------

/// Raw label assignments as written in the file.
pub fn parse_label_file(text: &str) -> Result<Vec<(usize, Vec<String>)>> {
    let mut out = Vec::new();
    for (line_no, line) in data_lines(text) {
        let mut fields = line.split('\t');
        let node = fields
            .next()
            .ok_or_else(|| parse_err(line_no, "missing node id"))?
            .trim()
            .parse::<usize>()
            .map_err(|e| parse_err(line_no, format!("bad node id: {e}")))?;
        let labels_field =
            fields.next().ok_or_else(|| parse_err(line_no, "missing label field"))?;
        if fields.next().is_some() {
            return Err(parse_err(line_no, "too many fields (expected node, labels)"));
        }
        let labels: Vec<String> = labels_field
            .split(',')
            .map(|l| l.trim().to_string())
            .filter(|l| !l.is_empty())
            .collect();
        if labels.is_empty() {
            return Err(parse_err(line_no, "empty label field"));
        }
        out.push((node, labels));
    }
    Ok(out)
}

pub fn read_label_file(path: &Path) -> Result<Vec<(usize, Vec<String>)>> {
    parse_label_file(&fs::read_to_string(path)?)
}

/// Ordered label-name table mapping file labels to class indices.
///
/// Names sort numerically when every name parses as an integer, otherwise
/// lexicographically, so the index assignment is reproducible.
#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct LabelVocab {
    names: Vec<String>,
}

impl LabelVocab {
    pub fn from_assignments<'a, I>(assignment_sets: I) -> Self
    where
        I: IntoIterator<Item = &'a [(usize, Vec<String>)]>,
    {
        let mut names: Vec<String> = assignment_sets
            .into_iter()
            .flatten()
            .flat_map(|(_, labels)| labels.iter().cloned())
            .collect();
        names.sort();
        names.dedup();
        if names.iter().all(|n| n.parse::<i64>().is_ok()) {
            names.sort_by_key(|n| n.parse::<i64>().expect("checked"));
        }
        Self { names }
    }

    pub fn from_names(names: Vec<String>) -> Self {
        Self { names }
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn index_of(&self, name: &str) -> Result<usize> {
        self.names
            .iter()
            .position(|n| n == name)
            .ok_or_else(|| Error::Data(format!("label {name:?} is not in the model's label set")))
    }
}

/// Converts raw file assignments to per-node class sets under a vocabulary.
pub fn labels_from_assignments(
    assignments: &[(usize, Vec<String>)],
    vocab: &LabelVocab,
    n_nodes: usize,
) -> Result<Labels> {
    let mut classes: Vec<Option<Vec<usize>>> = vec![None; n_nodes];
    for (node, names) in assignments {
        if *node >= n_nodes {
            return Err(Error::NodeOutOfRange { id: *node, n_nodes });
        }
        if classes[*node].is_some() {
            return Err(Error::Data(format!("node {node} is labeled twice")));
        }
        let mut set: Vec<usize> = names
            .iter()
            .map(|n| vocab.index_of(n))
            .collect::<Result<_>>()?;
        set.sort_unstable();
        set.dedup();
        classes[*node] = Some(set);
    }
    Labels::new(classes, vocab.len().max(1))
}

// ---------------------------------------------------------------------------
// Per-node distributions: `node<TAB>p0,p1,...`
// ---------------------------------------------------------------------------

pub fn format_distributions(distributions: &[Vec<f64>]) -> String {
    let mut out = String::new();
    for (node, row) in distributions.iter().enumerate() {
        let values: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        writeln!(out, "{node}\t{}", values.join(",")).expect("string write");
    }
    out
}

pub fn write_distributions(path: &Path, distributions: &[Vec<f64>]) -> Result<()> {
    fs::write(path, format_distributions(distributions))?;
    Ok(())
}

pub fn parse_distributions(text: &str) -> Result<Vec<Vec<f64>>> {
    match parse_features(text)? {
        NodeFeatures::Dense { rows, .. } => Ok(rows),
        NodeFeatures::Sparse { .. } => {
            Err(Error::Data("distribution files must be dense".into()))
        }
    }
}

// ---------------------------------------------------------------------------
// Model files: versioned text, layer dims plus row-major values
// ---------------------------------------------------------------------------

const MODEL_HEADER: &str = "ngm-model v1";

pub fn format_model(params: &ModelParams, vocab: Option<&LabelVocab>) -> String {
    let mut out = String::new();
    writeln!(out, "{MODEL_HEADER}").expect("string write");
    let activation = match params.activation {
        Activation::Relu => "relu",
        Activation::Tanh => "tanh",
    };
    writeln!(out, "activation\t{activation}").expect("string write");
    let dims: Vec<String> = params.dims().iter().map(|d| d.to_string()).collect();
    writeln!(out, "dims\t{}", dims.join(" ")).expect("string write");
    if let Some(vocab) = vocab {
        writeln!(out, "labels\t{}", vocab.names().join("\t")).expect("string write");
    }
    for (k, layer) in params.layers.iter().enumerate() {
        writeln!(out, "layer\t{k}").expect("string write");
        for o in 0..layer.out_dim {
            let row: Vec<String> = (0..layer.in_dim)
                .map(|i| layer.weights[o * layer.in_dim + i].to_string())
                .collect();
            writeln!(out, "w\t{}", row.join(" ")).expect("string write");
        }
        let bias: Vec<String> = layer.bias.iter().map(|b| b.to_string()).collect();
        writeln!(out, "b\t{}", bias.join(" ")).expect("string write");
    }
    out
}

pub fn write_model(path: &Path, params: &ModelParams, vocab: Option<&LabelVocab>) -> Result<()> {
    fs::write(path, format_model(params, vocab))?;
    Ok(())
}

pub fn parse_model(text: &str) -> Result<(ModelParams, Option<LabelVocab>)> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim_end_matches('\r')));
    let (line_no, header) =
        lines.next().ok_or_else(|| parse_err(1, "empty model file"))?;
    if header.trim() != MODEL_HEADER {
        return Err(parse_err(line_no, format!("expected header {MODEL_HEADER:?}")));
    }

    let mut activation: Option<Activation> = None;
    let mut dims: Option<Vec<usize>> = None;
    let mut vocab: Option<LabelVocab> = None;
    let mut layers: Vec<DenseLayer> = Vec::new();
    let mut current: Option<(usize, Vec<f64>, Option<Vec<f64>>)> = None; // (index, weights, bias)

    let finish_layer = |current: &mut Option<(usize, Vec<f64>, Option<Vec<f64>>)>,
                            layers: &mut Vec<DenseLayer>,
                            dims: &Option<Vec<usize>>,
                            line_no: usize|
     -> Result<()> {
        if let Some((index, weights, bias)) = current.take() {
            let dims = dims.as_ref().ok_or_else(|| parse_err(line_no, "dims line missing"))?;
            let (in_dim, out_dim) = (dims[index], dims[index + 1]);
            let bias = bias.ok_or_else(|| parse_err(line_no, format!("layer {index} has no bias")))?;
            if weights.len() != in_dim * out_dim || bias.len() != out_dim {
                return Err(parse_err(
                    line_no,
                    format!("layer {index} has wrong value counts for dims {in_dim}x{out_dim}"),
                ));
            }
            layers.push(DenseLayer { in_dim, out_dim, weights, bias });
        }
        Ok(())
    };

    for (line_no, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let (tag, rest) = line.split_once('\t').unwrap_or((line.trim(), ""));
        match tag {
            "activation" => activation = Some(rest.trim().parse()?),
            "dims" => {
                let parsed: Vec<usize> = rest
                    .split_whitespace()
                    .map(|d| {
                        d.parse::<usize>()
                            .map_err(|e| parse_err(line_no, format!("bad dim: {e}")))
                    })
                    .collect::<Result<_>>()?;
                if parsed.len() < 2 {
                    return Err(parse_err(line_no, "dims needs at least two entries"));
                }
                dims = Some(parsed);
            }
            "labels" => {
                vocab = Some(LabelVocab::from_names(
                    rest.split('\t').map(|s| s.to_string()).collect(),
                ));
            }
            "layer" => {
                finish_layer(&mut current, &mut layers, &dims, line_no)?;
                let index = rest
                    .trim()
                    .parse::<usize>()
                    .map_err(|e| parse_err(line_no, format!("bad layer index: {e}")))?;
                if index != layers.len() {
                    return Err(parse_err(line_no, format!("layer {index} out of order")));
                }
                current = Some((index, Vec::new(), None));
            }
            "w" => {
                let (_, weights, _) = current
                    .as_mut()
                    .ok_or_else(|| parse_err(line_no, "weight row outside a layer"))?;
                for token in rest.split_whitespace() {
                    weights.push(
                        token
                            .parse::<f64>()
                            .map_err(|e| parse_err(line_no, format!("bad weight: {e}")))?,
                    );
                }
            }
            "b" => {
                let (_, _, bias) = current
                    .as_mut()
                    .ok_or_else(|| parse_err(line_no, "bias row outside a layer"))?;
                let parsed: Vec<f64> = rest
                    .split_whitespace()
                    .map(|t| {
                        t.parse::<f64>()
                            .map_err(|e| parse_err(line_no, format!("bad bias: {e}")))
                    })
                    .collect::<Result<_>>()?;
                *bias = Some(parsed);
            }
            other => return Err(parse_err(line_no, format!("unknown model line tag {other:?}"))),
        }
    }
    let last_line = text.lines().count();
    finish_layer(&mut current, &mut layers, &dims, last_line)?;

    let activation =
        activation.ok_or_else(|| parse_err(last_line, "activation line missing"))?;
    let dims = dims.ok_or_else(|| parse_err(last_line, "dims line missing"))?;
    if layers.len() != dims.len() - 1 {
        return Err(parse_err(
            last_line,
            format!("expected {} layers, found {}", dims.len() - 1, layers.len()),
        ));
    }
    Ok((ModelParams::new(layers, activation)?, vocab))
}

pub fn read_model(path: &Path) -> Result<(ModelParams, Option<LabelVocab>)> {
    parse_model(&fs::read_to_string(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn edge_parsing_with_comments_and_default_weight() {
        let text = "# comment\n0\t1\n1\t2\t0.5\n\n";
        let edges = parse_edges(text).unwrap();
        assert_eq!(edges, vec![(0, 1, 1.0), (1, 2, 0.5)]);
    }

    #[test]
    fn edge_parse_errors_carry_line_numbers() {
        let err = parse_edges("0\t1\nx\t2\n").unwrap_err();
        match err {
            Error::Parse { line, .. } => assert_eq!(line, 2),
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn dense_features_round_trip() {
        let features =
            NodeFeatures::dense(vec![vec![1.0, 0.25, -3.5], vec![0.1, 2.0, 4.75]]).unwrap();
        let text = format_features(&features);
        assert_eq!(parse_features(&text).unwrap(), features);
    }

    #[test]
    fn sparse_features_round_trip() {
        let features =
            NodeFeatures::sparse(5, vec![vec![(0, 1.0), (4, 2.5)], vec![], vec![(2, -0.125)]])
                .unwrap();
        let text = format_features(&features);
        assert_eq!(parse_features(&text).unwrap(), features);
    }

    #[test]
    fn feature_file_must_cover_all_nodes() {
        let err = parse_features("0\t1.0,2.0\n2\t3.0,4.0\n").unwrap_err();
        assert!(matches!(err, Error::Data(_)));
    }

    #[test]
    fn label_vocab_sorts_numerically_when_possible() {
        let assignments = vec![
            (0usize, vec!["10".to_string()]),
            (1, vec!["2".to_string()]),
            (2, vec!["1".to_string()]),
        ];
        let vocab = LabelVocab::from_assignments([assignments.as_slice()]);
        assert_eq!(vocab.names(), &["1", "2", "10"]);

        let mixed = vec![(0usize, vec!["b".to_string(), "a".to_string()])];
        let vocab = LabelVocab::from_assignments([mixed.as_slice()]);
        assert_eq!(vocab.names(), &["a", "b"]);
    }

    #[test]
    fn multi_label_lines_parse_to_sets() {
        let raw = parse_label_file("0\tx,y\n3\tz\n").unwrap();
        let vocab = LabelVocab::from_assignments([raw.as_slice()]);
        let labels = labels_from_assignments(&raw, &vocab, 5).unwrap();
        assert_eq!(labels.classes[0], Some(vec![0, 1]));
        assert_eq!(labels.classes[3], Some(vec![2]));
        assert_eq!(labels.classes[1], None);
        assert_eq!(labels.n_classes, 3);
    }

    #[test]
    fn model_round_trip_is_exact() {
        use crate::nn::ModelParams;
        let params = ModelParams::init(&[3, 5, 2], Activation::Tanh, 77).unwrap();
        let vocab = LabelVocab::from_names(vec!["yes".into(), "no".into()]);
        let text = format_model(&params, Some(&vocab));
        let (parsed, parsed_vocab) = parse_model(&text).unwrap();
        assert_eq!(parsed, params);
        assert_eq!(parsed_vocab, Some(vocab));
    }

    #[test]
    fn model_parser_rejects_garbage() {
        assert!(parse_model("not a model").is_err());
        assert!(parse_model("ngm-model v1\nactivation\trelu\n").is_err());
    }

    #[test]
    fn distributions_round_trip() {
        let dist = vec![vec![0.25, 0.75], vec![0.5, 0.5]];
        let text = format_distributions(&dist);
        assert_eq!(parse_distributions(&text).unwrap(), dist);
    }
}
