//! Text serialization of pose graphs.
//!
//! Layout: a header `<N> nodes <E> edges`, then `N` node lines `ix x y` in
//! index order, then `E` directed edge lines `src dst augmented`.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::graph::{Edge, Node, PoseGraph};

/// Write a graph in the text layout above.
pub fn write_graph(path: impl AsRef<Path>, graph: &PoseGraph) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "{} nodes {} edges", graph.nodes.len(), graph.edges.len())?;
    for (ix, n) in graph.nodes.iter().enumerate() {
        writeln!(w, "{} {} {}", ix, n.x, n.y)?;
    }
    for e in &graph.edges {
        writeln!(w, "{} {} {}", e.src, e.dst, u8::from(e.augmented))?;
    }
    w.flush()?;
    Ok(())
}

/// Read a graph written by [`write_graph`].
pub fn read_graph(path: impl AsRef<Path>) -> Result<PoseGraph> {
    let path = path.as_ref();
    let file = File::open(path)?;
    // Numbered significant lines (blank and comment lines skipped).
    let mut rows: Vec<(usize, String)> = Vec::new();
    for (ix, line) in BufReader::new(file).lines().enumerate() {
        let line = line?;
        let t = line.trim();
        if !t.is_empty() && !t.starts_with('#') {
            rows.push((ix + 1, t.to_string()));
        }
    }
    let err = |line: usize, msg: &str| Error::Parse {
        path: path.display().to_string(),
        line,
        msg: msg.to_string(),
    };

    let mut rows = rows.into_iter();
    let (hline, header) = rows.next().ok_or_else(|| err(1, "missing header"))?;
    let parts: Vec<&str> = header.split_whitespace().collect();
    if parts.len() != 4 || parts[1] != "nodes" || parts[3] != "edges" {
        return Err(err(hline, "header must be '<N> nodes <E> edges'"));
    }
    let n_nodes: usize = parts[0].parse().map_err(|_| err(hline, "invalid node count"))?;
    let n_edges: usize = parts[2].parse().map_err(|_| err(hline, "invalid edge count"))?;

    let mut nodes = Vec::with_capacity(n_nodes);
    for expect_ix in 0..n_nodes {
        let (ln, line) = rows
            .next()
            .ok_or_else(|| err(hline, "unexpected end of file in node list"))?;
        let f: Vec<&str> = line.split_whitespace().collect();
        if f.len() != 3 {
            return Err(err(ln, "node line must be 'ix x y'"));
        }
        let ix: usize = f[0].parse().map_err(|_| err(ln, "invalid node index"))?;
        if ix != expect_ix {
            return Err(err(ln, "node indices must be consecutive from 0"));
        }
        let x: f64 = f[1].parse().map_err(|_| err(ln, "invalid node x"))?;
        let y: f64 = f[2].parse().map_err(|_| err(ln, "invalid node y"))?;
        nodes.push(Node { x, y });
    }

    let mut edges = Vec::with_capacity(n_edges);
    for _ in 0..n_edges {
        let (ln, line) = rows
            .next()
            .ok_or_else(|| err(hline, "unexpected end of file in edge list"))?;
        let f: Vec<&str> = line.split_whitespace().collect();
        if f.len() != 3 {
            return Err(err(ln, "edge line must be 'src dst augmented'"));
        }
        let src: usize = f[0].parse().map_err(|_| err(ln, "invalid edge src"))?;
        let dst: usize = f[1].parse().map_err(|_| err(ln, "invalid edge dst"))?;
        if src >= n_nodes || dst >= n_nodes {
            return Err(err(ln, "edge endpoint out of range"));
        }
        let augmented = match f[2] {
            "0" => false,
            "1" => true,
            _ => return Err(err(ln, "augmented flag must be 0 or 1")),
        };
        edges.push(Edge { src, dst, augmented });
    }
    if let Some((ln, _)) = rows.next() {
        return Err(err(ln, "trailing content after edge list"));
    }

    Ok(PoseGraph { nodes, edges })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> PoseGraph {
        PoseGraph {
            nodes: vec![
                Node { x: 1.25, y: 2.0 },
                Node { x: 0.1, y: 7.5 },
                Node { x: 33.0, y: 0.0 },
            ],
            edges: vec![
                Edge { src: 0, dst: 1, augmented: false },
                Edge { src: 1, dst: 0, augmented: false },
                Edge { src: 0, dst: 2, augmented: true },
                Edge { src: 2, dst: 0, augmented: true },
            ],
        }
    }

    #[test]
    fn round_trip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("graph.txt");
        let g = sample();
        write_graph(&path, &g).unwrap();
        assert_eq!(read_graph(&path).unwrap(), g);
    }

    #[test]
    fn empty_graph_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("graph.txt");
        write_graph(&path, &PoseGraph::default()).unwrap();
        assert_eq!(read_graph(&path).unwrap(), PoseGraph::default());
    }

    #[test]
    fn bad_header_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("graph.txt");
        std::fs::write(&path, "3 vertices 0 edges\n").unwrap();
        assert!(matches!(read_graph(&path), Err(Error::Parse { line: 1, .. })));
    }

    #[test]
    fn truncated_node_list_reports_position() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("graph.txt");
        std::fs::write(&path, "2 nodes 0 edges\n0 1.0 2.0\n").unwrap();
        assert!(matches!(read_graph(&path), Err(Error::Parse { .. })));
    }

    #[test]
    fn edge_out_of_range_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("graph.txt");
        std::fs::write(&path, "1 nodes 1 edges\n0 0.0 0.0\n0 5 0\n").unwrap();
        assert!(matches!(read_graph(&path), Err(Error::Parse { line: 3, .. })));
    }
}
