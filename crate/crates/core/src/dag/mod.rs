//! Causal graphs: construction, path analysis, d-separation and
//! adjustment-set identification.
//!
//! A [`Dag`] is immutable once built. Nodes keep their declaration order,
//! which is also the order used for every deterministic listing produced by
//! this module (after lexicographic sorting where noted).

mod adjust;
mod dsep;
mod parse;
mod paths;

use std::collections::{BTreeSet, HashMap};
use std::fmt;

use sha2::{Digest, Sha256};
use thiserror::Error;

pub use adjust::{AdjustmentVerdict, Condition, NodeRole};
pub use dsep::ImpliedIndependence;
pub use parse::parse_dag;
pub use paths::{EdgeDirection, Junction, Path};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DagError {
    #[error("syntax error at line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("graph contains a cycle: {}", .0.join(" -> "))]
    Cycle(Vec<String>),
    #[error("{role} declared more than once ({first} and {second})")]
    DuplicateRole {
        role: &'static str,
        first: String,
        second: String,
    },
    #[error("node {0} cannot be both exposure and outcome")]
    ConflictingRole(String),
    #[error("duplicate node {0}")]
    DuplicateNode(String),
    #[error("duplicate edge {0} -> {1}")]
    DuplicateEdge(String, String),
    #[error("self-loop on {0}")]
    SelfLoop(String),
    #[error("unknown node {0}")]
    UnknownNode(String),
    #[error("graph has no {0} annotation")]
    MissingAnnotation(&'static str),
    #[error("{0} is an endpoint and cannot be in the conditioning set")]
    EndpointConditioned(String),
    #[error("invalid path: {0}")]
    InvalidPath(String),
    #[error("endpoints must differ (got {0} twice)")]
    SameEndpoints(String),
}

pub type Result<T> = std::result::Result<T, DagError>;

/// Annotation carried by a node in the graph source.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Annotation {
    Exposure,
    Outcome,
}

/// A directed acyclic graph over named nodes, optionally annotated with one
/// exposure and one outcome.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Dag {
    names: Vec<String>,
    index: HashMap<String, usize>,
    edges: Vec<(usize, usize)>,
    parents: Vec<Vec<usize>>,
    children: Vec<Vec<usize>>,
    topo: Vec<usize>,
    exposure: Option<usize>,
    outcome: Option<usize>,
}

impl Dag {
    /// Builds a graph from declared nodes, edges and annotations.
    ///
    /// Edge endpoints must be declared nodes. Cycles, self-loops, duplicate
    /// edges and repeated annotations are rejected.
    pub fn new<N, E, A>(nodes: N, edges: E, annotations: A) -> Result<Self>
    where
        N: IntoIterator,
        N::Item: Into<String>,
        E: IntoIterator<Item = (String, String)>,
        A: IntoIterator<Item = (String, Annotation)>,
    {
        let names: Vec<String> = nodes.into_iter().map(Into::into).collect();
        let mut index = HashMap::with_capacity(names.len());
        for (i, name) in names.iter().enumerate() {
            if index.insert(name.clone(), i).is_some() {
                return Err(DagError::DuplicateNode(name.clone()));
            }
        }
        let lookup = |name: &str| {
            index
                .get(name)
                .copied()
                .ok_or_else(|| DagError::UnknownNode(name.to_string()))
        };

        let n = names.len();
        let mut parents = vec![Vec::new(); n];
        let mut children = vec![Vec::new(); n];
        let mut edge_list = Vec::new();
        for (from, to) in edges {
            let (f, t) = (lookup(&from)?, lookup(&to)?);
            if f == t {
                return Err(DagError::SelfLoop(from));
            }
            if children[f].contains(&t) {
                return Err(DagError::DuplicateEdge(from, to));
            }
            children[f].push(t);
            parents[t].push(f);
            edge_list.push((f, t));
        }
        for list in parents.iter_mut().chain(children.iter_mut()) {
            list.sort_unstable();
        }

        let mut exposure = None;
        let mut outcome = None;
        for (name, annotation) in annotations {
            let id = lookup(&name)?;
            let (slot, other, role) = match annotation {
                Annotation::Exposure => (&mut exposure, outcome, "exposure"),
                Annotation::Outcome => (&mut outcome, exposure, "outcome"),
            };
            if other == Some(id) {
                return Err(DagError::ConflictingRole(name));
            }
            match *slot {
                Some(prev) if prev != id => {
                    return Err(DagError::DuplicateRole {
                        role,
                        first: names[prev].clone(),
                        second: name,
                    })
                }
                _ => *slot = Some(id),
            }
        }

        let topo = topological_order(&parents, &children)
            .map_err(|cycle| DagError::Cycle(cycle.iter().map(|&i| names[i].clone()).collect()))?;

        Ok(Self {
            names,
            index,
            edges: edge_list,
            parents,
            children,
            topo,
            exposure,
            outcome,
        })
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    /// Node names in declaration order.
    pub fn nodes(&self) -> &[String] {
        &self.names
    }

    /// Edges as `(from, to)` name pairs in declaration order.
    pub fn edges(&self) -> impl Iterator<Item = (&str, &str)> + '_ {
        self.edges
            .iter()
            .map(|&(f, t)| (self.names[f].as_str(), self.names[t].as_str()))
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn contains(&self, name: &str) -> bool {
        self.index.contains_key(name)
    }

    pub fn exposure(&self) -> Option<&str> {
        self.exposure.map(|i| self.names[i].as_str())
    }

    pub fn outcome(&self) -> Option<&str> {
        self.outcome.map(|i| self.names[i].as_str())
    }

    /// Returns a copy of this graph with the exposure and outcome replaced.
    pub fn with_roles(&self, exposure: &str, outcome: &str) -> Result<Self> {
        let x = self.id(exposure)?;
        let y = self.id(outcome)?;
        if x == y {
            return Err(DagError::ConflictingRole(exposure.to_string()));
        }
        let mut dag = self.clone();
        dag.exposure = Some(x);
        dag.outcome = Some(y);
        Ok(dag)
    }

    pub fn parents(&self, name: &str) -> Result<Vec<&str>> {
        let id = self.id(name)?;
        Ok(self.parents[id].iter().map(|&p| self.names[p].as_str()).collect())
    }

    pub fn children(&self, name: &str) -> Result<Vec<&str>> {
        let id = self.id(name)?;
        Ok(self.children[id].iter().map(|&c| self.names[c].as_str()).collect())
    }

    pub fn has_edge(&self, from: &str, to: &str) -> Result<bool> {
        let (f, t) = (self.id(from)?, self.id(to)?);
        Ok(self.children[f].contains(&t))
    }

    pub fn adjacent(&self, a: &str, b: &str) -> Result<bool> {
        let (a, b) = (self.id(a)?, self.id(b)?);
        Ok(self.is_adjacent(a, b))
    }

    /// Node names in a topological order (parents before children; ties by
    /// declaration order).
    pub fn topological_order(&self) -> Vec<&str> {
        self.topo.iter().map(|&i| self.names[i].as_str()).collect()
    }

    /// Strict descendants of `name`, sorted by name.
    pub fn descendants(&self, name: &str) -> Result<BTreeSet<String>> {
        let id = self.id(name)?;
        let mask = self.descendant_mask(&[id]);
        Ok(self.names_of_mask(&mask, Some(id)))
    }

    /// Strict ancestors of `name`, sorted by name.
    pub fn ancestors(&self, name: &str) -> Result<BTreeSet<String>> {
        let id = self.id(name)?;
        let mask = self.ancestor_mask(&[id]);
        Ok(self.names_of_mask(&mask, Some(id)))
    }

    /// Canonical textual form: annotations first, then nodes in declaration
    /// order, then edges sorted by (from, to) name.
    pub fn to_canonical_string(&self) -> String {
        let mut out = String::from("dag {\n");
        for (i, name) in self.names.iter().enumerate() {
            match (self.exposure == Some(i), self.outcome == Some(i)) {
                (true, _) => out.push_str(&format!("  {name} [exposure]\n")),
                (_, true) => out.push_str(&format!("  {name} [outcome]\n")),
                _ => out.push_str(&format!("  {name}\n")),
            }
        }
        let mut edges: Vec<(&str, &str)> = self.edges().collect();
        edges.sort_unstable();
        for (f, t) in edges {
            out.push_str(&format!("  {f} -> {t}\n"));
        }
        out.push_str("}\n");
        out
    }

    /// SHA-256 of the canonical serialization, hex encoded.
    pub fn fingerprint(&self) -> String {
        let digest = Sha256::digest(self.to_canonical_string().as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    // ---- index-level helpers shared by the submodules ----

    pub(crate) fn id(&self, name: &str) -> Result<usize> {
        self.index
            .get(name)
            .copied()
            .ok_or_else(|| DagError::UnknownNode(name.to_string()))
    }

    pub(crate) fn name(&self, id: usize) -> &str {
        &self.names[id]
    }

    pub(crate) fn ids<I, S>(&self, names: I) -> Result<Vec<usize>>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let mut ids: Vec<usize> = names
            .into_iter()
            .map(|s| self.id(s.as_ref()))
            .collect::<Result<_>>()?;
        ids.sort_unstable();
        ids.dedup();
        Ok(ids)
    }

    pub(crate) fn parent_ids(&self, id: usize) -> &[usize] {
        &self.parents[id]
    }

    pub(crate) fn child_ids(&self, id: usize) -> &[usize] {
        &self.children[id]
    }

    pub(crate) fn is_adjacent(&self, a: usize, b: usize) -> bool {
        self.children[a].contains(&b) || self.children[b].contains(&a)
    }

    pub(crate) fn roles(&self) -> Result<(usize, usize)> {
        let x = self.exposure.ok_or(DagError::MissingAnnotation("exposure"))?;
        let y = self.outcome.ok_or(DagError::MissingAnnotation("outcome"))?;
        Ok((x, y))
    }

    /// Mask of `seeds` together with all their descendants.
    pub(crate) fn descendant_mask(&self, seeds: &[usize]) -> Vec<bool> {
        closure(self.len(), seeds, |v| &self.children[v])
    }

    /// Mask of `seeds` together with all their ancestors.
    pub(crate) fn ancestor_mask(&self, seeds: &[usize]) -> Vec<bool> {
        closure(self.len(), seeds, |v| &self.parents[v])
    }

    pub(crate) fn mask(&self, ids: &[usize]) -> Vec<bool> {
        let mut mask = vec![false; self.len()];
        for &i in ids {
            mask[i] = true;
        }
        mask
    }

    fn names_of_mask(&self, mask: &[bool], skip: Option<usize>) -> BTreeSet<String> {
        mask.iter()
            .enumerate()
            .filter(|&(i, &m)| m && Some(i) != skip)
            .map(|(i, _)| self.names[i].clone())
            .collect()
    }
}

impl fmt::Display for Dag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_canonical_string())
    }
}

impl std::str::FromStr for Dag {
    type Err = DagError;

    fn from_str(s: &str) -> Result<Self> {
        parse_dag(s)
    }
}

fn closure<'a, F>(n: usize, seeds: &[usize], next: F) -> Vec<bool>
where
    F: Fn(usize) -> &'a [usize],
{
    let mut seen = vec![false; n];
    let mut stack: Vec<usize> = seeds.to_vec();
    while let Some(v) = stack.pop() {
        if std::mem::replace(&mut seen[v], true) {
            continue;
        }
        stack.extend(next(v).iter().copied().filter(|&w| !seen[w]));
    }
    seen
}

/// Kahn's algorithm with a declaration-order tie break. On failure returns a
/// cycle as a node sequence whose first and last elements coincide.
fn topological_order(
    parents: &[Vec<usize>],
    children: &[Vec<usize>],
) -> std::result::Result<Vec<usize>, Vec<usize>> {
    let n = parents.len();
    let mut indegree: Vec<usize> = parents.iter().map(Vec::len).collect();
    let mut ready: BTreeSet<usize> = (0..n).filter(|&v| indegree[v] == 0).collect();
    let mut order = Vec::with_capacity(n);
    while let Some(v) = ready.pop_first() {
        order.push(v);
        for &c in &children[v] {
            indegree[c] -= 1;
            if indegree[c] == 0 {
                ready.insert(c);
            }
        }
    }
    if order.len() == n {
        return Ok(order);
    }

    // Every remaining node has a remaining parent, so walking parents
    // backwards must revisit a node.
    let remaining: Vec<bool> = indegree.iter().map(|&d| d > 0).collect();
    let start = remaining.iter().position(|&r| r).expect("cycle exists");
    let mut walk = vec![start];
    let mut pos = vec![usize::MAX; n];
    pos[start] = 0;
    let mut v = start;
    loop {
        let p = *parents[v]
            .iter()
            .find(|&&p| remaining[p])
            .expect("remaining node has a remaining parent");
        if pos[p] != usize::MAX {
            let mut cycle: Vec<usize> = walk[pos[p]..].to_vec();
            cycle.reverse();
            cycle.push(*cycle.first().unwrap());
            return Err(cycle);
        }
        pos[p] = walk.len();
        walk.push(p);
        v = p;
    }
}
