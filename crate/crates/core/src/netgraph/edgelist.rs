//! Plain-text edge list: a header line `n m`, then one `u v` pair per line.
//!
//! A connected graph only has an unlisted node when `n = 1`; that node is
//! written as a line holding its id alone, and the reader accepts such
//! single-id lines anywhere.

use std::fmt::Write as _;

use super::{Graph, GraphError, NodeId};

pub fn write_edge_list(g: &Graph) -> String {
    let mut out = format!("{} {}\n", g.n(), g.m());
    if g.m() == 0 {
        for id in g.ids() {
            let _ = writeln!(out, "{id}");
        }
    }
    for (u, v) in g.edges() {
        let _ = writeln!(out, "{u} {v}");
    }
    out
}

pub fn read_edge_list(text: &str) -> Result<Graph, GraphError> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));

    let (line, header) = lines.next().ok_or(GraphError::Parse {
        line: 1,
        msg: "missing `n m` header".into(),
    })?;
    let header = parse_ints(line, header)?;
    let [n, m] = header[..] else {
        return Err(GraphError::Parse {
            line,
            msg: "header must be `n m`".into(),
        });
    };

    let mut ids = Vec::with_capacity(n as usize);
    let mut edges = Vec::with_capacity(m as usize);
    for (line, text) in lines {
        match parse_ints(line, text)?[..] {
            [id] => ids.push(id),
            [u, v] => {
                edges.push((u, v));
                ids.extend([u, v]);
            }
            _ => {
                return Err(GraphError::Parse {
                    line,
                    msg: "expected `u v`".into(),
                })
            }
        }
    }
    ids.sort_unstable();
    ids.dedup();
    if ids.len() as u64 != n || edges.len() as u64 != m {
        return Err(GraphError::Parse {
            line: 1,
            msg: format!(
                "header declares n={n} m={m}, body has n={} m={}",
                ids.len(),
                edges.len()
            ),
        });
    }
    Graph::from_edges(ids, edges)
}

fn parse_ints(line: usize, text: &str) -> Result<Vec<NodeId>, GraphError> {
    text.split_whitespace()
        .map(|tok| {
            tok.parse::<NodeId>().map_err(|e| GraphError::Parse {
                line,
                msg: format!("`{tok}`: {e}"),
            })
        })
        .collect()
}
