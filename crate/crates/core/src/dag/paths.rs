use std::fmt;

use serde::{Deserialize, Serialize};

use super::{Dag, DagError, Result};

/// Direction of one edge along a path, relative to the path's traversal.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EdgeDirection {
    /// `a -> b` when walking from `a` to `b`.
    Forward,
    /// `a <- b` when walking from `a` to `b`.
    Backward,
}

/// Local structure at an interior node of a path.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Junction {
    /// `-> v ->` or `<- v <-`
    Chain,
    /// `<- v ->`
    Fork,
    /// `-> v <-`
    Collider,
}

/// A simple path in the skeleton of a [`Dag`].
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Path {
    nodes: Vec<String>,
    directions: Vec<EdgeDirection>,
}

impl Path {
    /// Builds a path from a node sequence, reading edge directions from the
    /// graph. Consecutive nodes must be adjacent and no node may repeat.
    pub fn new<S: AsRef<str>>(dag: &Dag, nodes: &[S]) -> Result<Self> {
        let ids = nodes
            .iter()
            .map(|s| dag.id(s.as_ref()))
            .collect::<Result<Vec<_>>>()?;
        if ids.len() < 2 {
            return Err(DagError::InvalidPath("fewer than two nodes".into()));
        }
        for (i, &v) in ids.iter().enumerate() {
            if ids[..i].contains(&v) {
                return Err(DagError::InvalidPath(format!(
                    "{} repeats",
                    dag.name(v)
                )));
            }
        }
        let mut directions = Vec::with_capacity(ids.len() - 1);
        for w in ids.windows(2) {
            if dag.child_ids(w[0]).contains(&w[1]) {
                directions.push(EdgeDirection::Forward);
            } else if dag.child_ids(w[1]).contains(&w[0]) {
                directions.push(EdgeDirection::Backward);
            } else {
                return Err(DagError::InvalidPath(format!(
                    "{} and {} are not adjacent",
                    dag.name(w[0]),
                    dag.name(w[1])
                )));
            }
        }
        Ok(Self::from_ids(dag, &ids, directions))
    }

    pub(crate) fn from_ids(dag: &Dag, ids: &[usize], directions: Vec<EdgeDirection>) -> Self {
        Self {
            nodes: ids.iter().map(|&i| dag.name(i).to_string()).collect(),
            directions,
        }
    }

    pub fn nodes(&self) -> &[String] {
        &self.nodes
    }

    pub fn directions(&self) -> &[EdgeDirection] {
        &self.directions
    }

    /// Number of edges.
    pub fn len(&self) -> usize {
        self.directions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.directions.is_empty()
    }

    pub fn start(&self) -> &str {
        &self.nodes[0]
    }

    pub fn end(&self) -> &str {
        self.nodes.last().expect("path has at least two nodes")
    }

    /// Interior nodes paired with their junction type.
    pub fn junctions(&self) -> impl Iterator<Item = (&str, Junction)> + '_ {
        self.directions.windows(2).enumerate().map(|(i, d)| {
            let j = match (d[0], d[1]) {
                (EdgeDirection::Forward, EdgeDirection::Backward) => Junction::Collider,
                (EdgeDirection::Backward, EdgeDirection::Forward) => Junction::Fork,
                _ => Junction::Chain,
            };
            (self.nodes[i + 1].as_str(), j)
        })
    }

    /// Every edge points away from the start node.
    pub fn is_directed(&self) -> bool {
        self.directions.iter().all(|&d| d == EdgeDirection::Forward)
    }

    /// The first edge points into the start node.
    pub fn is_backdoor(&self) -> bool {
        self.directions.first() == Some(&EdgeDirection::Backward)
    }

    pub fn has_collider(&self) -> bool {
        self.junctions().any(|(_, j)| j == Junction::Collider)
    }

    pub fn contains(&self, node: &str) -> bool {
        self.nodes.iter().any(|n| n == node)
    }
}

impl fmt::Display for Path {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.nodes[0])?;
        for (d, n) in self.directions.iter().zip(&self.nodes[1..]) {
            match d {
                EdgeDirection::Forward => write!(f, " -> {n}")?,
                EdgeDirection::Backward => write!(f, " <- {n}")?,
            }
        }
        Ok(())
    }
}

impl Dag {
    /// All simple paths between `from` and `to` in the skeleton with at most
    /// `max_length` edges, sorted lexicographically by node-name sequence.
    pub fn enumerate_paths(&self, from: &str, to: &str, max_length: usize) -> Result<Vec<Path>> {
        let (x, y) = (self.id(from)?, self.id(to)?);
        if x == y {
            return Err(DagError::SameEndpoints(from.to_string()));
        }
        let mut out = Vec::new();
        let mut on_path = vec![false; self.len()];
        let mut stack = vec![x];
        let mut dirs = Vec::new();
        on_path[x] = true;
        self.extend_paths(y, max_length, &mut on_path, &mut stack, &mut dirs, &mut out);
        out.sort_by(|a, b| a.nodes.cmp(&b.nodes));
        Ok(out)
    }

    /// All simple paths with no length bound.
    pub fn all_paths(&self, from: &str, to: &str) -> Result<Vec<Path>> {
        self.enumerate_paths(from, to, self.len())
    }

    fn extend_paths(
        &self,
        target: usize,
        max_length: usize,
        on_path: &mut [bool],
        stack: &mut Vec<usize>,
        dirs: &mut Vec<EdgeDirection>,
        out: &mut Vec<Path>,
    ) {
        if dirs.len() >= max_length {
            return;
        }
        let v = *stack.last().unwrap();
        let steps = self
            .child_ids(v)
            .iter()
            .map(|&c| (c, EdgeDirection::Forward))
            .chain(self.parent_ids(v).iter().map(|&p| (p, EdgeDirection::Backward)));
        for (w, d) in steps {
            if on_path[w] {
                continue;
            }
            stack.push(w);
            dirs.push(d);
            if w == target {
                out.push(Path::from_ids(self, stack, dirs.clone()));
            } else {
                on_path[w] = true;
                self.extend_paths(target, max_length, on_path, stack, dirs, out);
                on_path[w] = false;
            }
            stack.pop();
            dirs.pop();
        }
    }

    /// d-connection rule for a single path: open iff every non-collider is
    /// outside `given` and every collider is in `given` or has a descendant
    /// in `given`.
    pub fn path_open<I, S>(&self, path: &Path, given: I) -> Result<bool>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let z = self.ids(given)?;
        for end in [path.start(), path.end()] {
            if z.contains(&self.id(end)?) {
                return Err(DagError::EndpointConditioned(end.to_string()));
            }
        }
        let zmask = self.mask(&z);
        // Nodes with a descendant (or themselves) in the conditioning set.
        let opens_collider = self.ancestor_mask(&z);
        for (node, junction) in path.junctions() {
            let v = self.id(node)?;
            let open = match junction {
                Junction::Collider => opens_collider[v],
                Junction::Chain | Junction::Fork => !zmask[v],
            };
            if !open {
                return Ok(false);
            }
        }
        Ok(true)
    }
}

#[cfg(test)]
mod tests {
    use super::super::parse_dag;
    use super::*;

    const NONE: [&str; 0] = [];

    #[test]
    fn chain_path() {
        let dag = parse_dag("dag { A -> B -> C }").unwrap();
        let paths = dag.all_paths("A", "C").unwrap();
        assert_eq!(paths.len(), 1);
        assert_eq!(paths[0].nodes(), &["A", "B", "C"]);
        assert_eq!(paths[0].junctions().collect::<Vec<_>>(), vec![("B", Junction::Chain)]);
        assert!(paths[0].is_directed());
        assert!(!dag.path_open(&paths[0], ["B"]).unwrap());
        assert!(dag.path_open(&paths[0], NONE).unwrap());
    }

    #[test]
    fn collider_path() {
        let dag = parse_dag("dag { A -> C  B -> C  C -> D }").unwrap();
        let paths = dag.all_paths("A", "B").unwrap();
        assert_eq!(paths.len(), 1);
        let p = &paths[0];
        assert_eq!(p.nodes(), &["A", "C", "B"]);
        assert_eq!(p.junctions().next(), Some(("C", Junction::Collider)));
        assert!(!dag.path_open(p, NONE).unwrap());
        assert!(dag.path_open(p, ["C"]).unwrap());
        assert!(dag.path_open(p, ["D"]).unwrap());
        assert_eq!(p.to_string(), "A -> C <- B");
    }

    #[test]
    fn endpoint_in_conditioning_set_is_an_error() {
        let dag = parse_dag("dag { A -> B }").unwrap();
        let p = &dag.all_paths("A", "B").unwrap()[0];
        assert!(matches!(
            dag.path_open(p, ["A"]),
            Err(DagError::EndpointConditioned(_))
        ));
    }

    #[test]
    fn max_length_bounds_enumeration() {
        let dag = parse_dag("dag { A -> B -> C  A -> C }").unwrap();
        assert_eq!(dag.enumerate_paths("A", "C", 1).unwrap().len(), 1);
        assert_eq!(dag.enumerate_paths("A", "C", 2).unwrap().len(), 2);
        assert!(matches!(dag.enumerate_paths("A", "Q", 2), Err(DagError::UnknownNode(_))));
        assert!(matches!(dag.enumerate_paths("A", "A", 2), Err(DagError::SameEndpoints(_))));
    }

    #[test]
    fn explicit_path_construction() {
        let dag = parse_dag("dag { A -> B  C -> B }").unwrap();
        let p = Path::new(&dag, &["A", "B", "C"]).unwrap();
        assert_eq!(p.directions(), &[EdgeDirection::Forward, EdgeDirection::Backward]);
        assert!(Path::new(&dag, &["A", "C"]).is_err());
        assert!(Path::new(&dag, &["A", "B", "A"]).is_err());
    }
}
