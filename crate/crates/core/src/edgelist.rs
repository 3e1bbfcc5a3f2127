//! Typed TSV edge lists.
//!
//! Each data line is `TYPE_A<TAB>ID_A<TAB>TYPE_B<TAB>ID_B[<TAB>WEIGHT]`.
//! Lines starting with `#` are comments. Types and nodes get dense indices in
//! order of first appearance. The writer additionally emits `#!node` comment
//! lines declaring every node up front, which this reader honors so that
//! isolated nodes and index order survive a round trip.

use std::collections::HashMap;
use std::fs::File;
use std::io::{self, BufRead, BufReader, Write};
use std::path::Path;

use thiserror::Error;

use crate::graph::{BuildMode, GraphError, HetGraph, NodeRef};

const NODE_PRAGMA: &str = "#!node";

#[derive(Debug, Error)]
pub enum EdgeListError {
    #[error("io error: {0}")]
    Io(#[from] io::Error),
    #[error("line {line}: {message}")]
    Malformed { line: usize, message: String },
    #[error("line {line}: unknown node type `{name}`")]
    UnknownType { line: usize, name: String },
    #[error("line {line}: {source}")]
    Graph {
        line: usize,
        #[source]
        source: GraphError,
    },
    #[error("edge list declares no nodes")]
    Empty,
}

/// Reads a simple (unit-weight, loop-free) typed edge list.
pub fn read_edge_list(path: impl AsRef<Path>) -> Result<HetGraph, EdgeListError> {
    read_edge_list_with(path, BuildMode::Simple, None)
}

/// Reads an edge list with the given validation mode. When `types` is given,
/// only those type names are accepted and they take the listed order.
pub fn read_edge_list_with(
    path: impl AsRef<Path>,
    mode: BuildMode,
    types: Option<&[String]>,
) -> Result<HetGraph, EdgeListError> {
    let file = File::open(path)?;
    parse_edge_list(BufReader::new(file), mode, types)
}

#[derive(Default)]
struct Interner {
    type_names: Vec<String>,
    type_ids: HashMap<String, usize>,
    node_names: Vec<Vec<String>>,
    node_ids: Vec<HashMap<String, usize>>,
    closed_types: bool,
}

impl Interner {
    fn type_id(&mut self, name: &str, line: usize) -> Result<usize, EdgeListError> {
        if let Some(&id) = self.type_ids.get(name) {
            return Ok(id);
        }
        if self.closed_types {
            return Err(EdgeListError::UnknownType {
                line,
                name: name.to_string(),
            });
        }
        Ok(self.add_type(name))
    }

    fn add_type(&mut self, name: &str) -> usize {
        let id = self.type_names.len();
        self.type_names.push(name.to_string());
        self.type_ids.insert(name.to_string(), id);
        self.node_names.push(Vec::new());
        self.node_ids.push(HashMap::new());
        id
    }

    fn node(&mut self, type_name: &str, id: &str, line: usize) -> Result<NodeRef, EdgeListError> {
        let l = self.type_id(type_name, line)?;
        let ids = &mut self.node_ids[l];
        let index = match ids.get(id) {
            Some(&i) => i,
            None => {
                let i = self.node_names[l].len();
                ids.insert(id.to_string(), i);
                self.node_names[l].push(id.to_string());
                i
            }
        };
        Ok(NodeRef::new(l, index))
    }
}

fn token<'a>(fields: &[&'a str], k: usize, line: usize) -> Result<&'a str, EdgeListError> {
    let t = fields[k];
    if t.is_empty() || t.chars().any(char::is_whitespace) {
        return Err(EdgeListError::Malformed {
            line,
            message: format!("field {} is empty or contains whitespace", k + 1),
        });
    }
    Ok(t)
}

pub fn parse_edge_list(
    reader: impl BufRead,
    mode: BuildMode,
    types: Option<&[String]>,
) -> Result<HetGraph, EdgeListError> {
    let mut interner = Interner::default();
    if let Some(types) = types {
        for t in types {
            interner.add_type(t);
        }
        interner.closed_types = true;
    }
    let mut edges = Vec::new();
    let mut lines_of_edges = Vec::new();

    for (k, raw) in reader.lines().enumerate() {
        let line_no = k + 1;
        let raw = raw?;
        let line = raw.trim_end_matches(['\r', '\n']);
        if let Some(rest) = line.strip_prefix(NODE_PRAGMA) {
            let fields: Vec<&str> = rest.trim_start_matches('\t').split('\t').collect();
            if fields.len() != 2 {
                return Err(EdgeListError::Malformed {
                    line: line_no,
                    message: "node declaration needs TYPE and ID".into(),
                });
            }
            let t = token(&fields, 0, line_no)?;
            let id = token(&fields, 1, line_no)?;
            interner.node(t, id, line_no)?;
            continue;
        }
        if line.starts_with('#') || line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 4 && fields.len() != 5 {
            return Err(EdgeListError::Malformed {
                line: line_no,
                message: format!("expected 4 or 5 tab-separated fields, found {}", fields.len()),
            });
        }
        let u = interner.node(token(&fields, 0, line_no)?, token(&fields, 1, line_no)?, line_no)?;
        let v = interner.node(token(&fields, 2, line_no)?, token(&fields, 3, line_no)?, line_no)?;
        let weight = match fields.get(4) {
            Some(w) => w.trim().parse::<f64>().map_err(|_| EdgeListError::Malformed {
                line: line_no,
                message: format!("invalid weight `{w}`"),
            })?,
            None => 1.0,
        };
        edges.push((u, v, weight));
        lines_of_edges.push(line_no);
    }

    let sizes: Vec<usize> = interner.node_names.iter().map(Vec::len).collect();
    if sizes.is_empty() || sizes.iter().all(|&n| n == 0) {
        return Err(EdgeListError::Empty);
    }

    // Validate edge by edge first so errors carry the offending line.
    if mode == BuildMode::Simple {
        let mut seen = std::collections::HashSet::new();
        for (&(u, v, w), &line) in edges.iter().zip(&lines_of_edges) {
            let source = if u == v {
                Some(GraphError::SelfLoop { node: u })
            } else if w != 1.0 {
                Some(GraphError::NonUnitWeight { u, v, weight: w })
            } else if !seen.insert(if u < v { (u, v) } else { (v, u) }) {
                Some(GraphError::DuplicateEdge { u, v })
            } else {
                None
            };
            if let Some(source) = source {
                return Err(EdgeListError::Graph { line, source });
            }
        }
    } else if let Some((&(u, v, w), &line)) = edges
        .iter()
        .zip(&lines_of_edges)
        .find(|((_, _, w), _)| !w.is_finite() || *w < 0.0)
    {
        return Err(EdgeListError::Graph {
            line,
            source: GraphError::InvalidWeight { u, v, weight: w },
        });
    }

    HetGraph::build_named(&sizes, interner.type_names, interner.node_names, &edges, mode)
        .map_err(|source| EdgeListError::Graph { line: 0, source })
}

/// Writes `g` as a typed edge list readable by [`parse_edge_list`].
/// Weights are written only when some edge weight differs from 1.
pub fn write_edge_list(g: &HetGraph, mut out: impl Write) -> io::Result<()> {
    let edges = g.edges();
    let weighted = edges.iter().any(|&(_, _, w)| w != 1.0);
    writeln!(out, "# heterogeneous edge list: {} types", g.num_types())?;
    for node in g.nodes() {
        writeln!(
            out,
            "{NODE_PRAGMA}\t{}\t{}",
            g.type_name(node.node_type),
            g.node_name(node)
        )?;
    }
    for (u, v, w) in edges {
        write!(
            out,
            "{}\t{}\t{}\t{}",
            g.type_name(u.node_type),
            g.node_name(u),
            g.type_name(v.node_type),
            g.node_name(v)
        )?;
        if weighted {
            write!(out, "\t{w}")?;
        }
        writeln!(out)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<HetGraph, EdgeListError> {
        parse_edge_list(text.as_bytes(), BuildMode::Simple, None)
    }

    #[test]
    fn demo_file() {
        let text = "# users/events demo\nuser\tu1\tuser\tu2\nuser\tu1\tevent\te1\n\n# trailing\n";
        let g = parse(text).unwrap();
        assert_eq!(g.num_types(), 2);
        assert_eq!(g.total_nodes(), 3);
        assert_eq!(g.num_edges(), 2);
        assert_eq!(g.type_name(0), "user");
        assert_eq!(g.homo_edge_count(0), 1.0);
        assert_eq!(g.cross_edge_count(0, 1), 1.0);
    }

    #[test]
    fn self_loop_rejected() {
        let err = parse("author\ta1\tauthor\ta1\n").unwrap_err();
        assert!(matches!(
            err,
            EdgeListError::Graph { line: 1, source: GraphError::SelfLoop { .. } }
        ));
    }

    #[test]
    fn duplicate_reports_line() {
        let text = "# c\na\tx\tb\ty\na\tz\tb\ty\nb\ty\ta\tx\n";
        let err = parse(text).unwrap_err();
        assert!(matches!(
            err,
            EdgeListError::Graph { line: 4, source: GraphError::DuplicateEdge { .. } }
        ));
        assert!(err.to_string().starts_with("line 4"));
    }

    #[test]
    fn malformed_lines() {
        assert!(matches!(
            parse("a\tx\tb\n").unwrap_err(),
            EdgeListError::Malformed { line: 1, .. }
        ));
        assert!(matches!(
            parse("a\tx\tb\ty\n a\tq\tb\ty\tzz\n").unwrap_err(),
            EdgeListError::Malformed { line: 2, .. }
        ));
        assert!(matches!(
            parse("a\tx\tb\t\n").unwrap_err(),
            EdgeListError::Malformed { line: 1, .. }
        ));
    }

    #[test]
    fn closed_type_list() {
        let types = vec!["user".to_string()];
        let err = parse_edge_list("user\tu\tevent\te\n".as_bytes(), BuildMode::Simple, Some(&types))
            .unwrap_err();
        assert!(matches!(err, EdgeListError::UnknownType { line: 1, .. }));
    }

    #[test]
    fn weighted_round_trip_keeps_isolated_nodes() {
        let a = NodeRef::new(0, 0);
        let b = NodeRef::new(0, 1);
        let c = NodeRef::new(1, 2);
        let g = HetGraph::build(&[3, 3], &[(a, b, 2.5), (a, c, 1.0), (b, b, 0.5)], BuildMode::Weighted)
            .unwrap();
        let mut buf = Vec::new();
        write_edge_list(&g, &mut buf).unwrap();
        let back = parse_edge_list(buf.as_slice(), BuildMode::Weighted, None).unwrap();
        assert_eq!(g, back);
    }
}
