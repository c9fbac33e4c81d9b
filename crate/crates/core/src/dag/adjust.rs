//! Adjustment sets for the total effect of the annotated exposure on the
//! annotated outcome.
//!
//! A covariate set is a valid adjustment set when, as a group, it
//!
//! 1. blocks every confounding path (non-causal paths open with nothing
//!    conditioned on),
//! 2. blocks no causal path, neither by containing a node on a directed
//!    exposure-to-outcome path nor a descendant of one, and
//! 3. opens no path through a collider.
//!
//! [`Dag::check_adjustment`] evaluates the three conditions path by path and
//! reports witnesses. [`Dag::minimal_adjustment_sets`] uses the equivalent
//! reachability formulation (forbidden nodes plus d-separation in the proper
//! back-door graph), so the two routes can be checked against each other.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::dsep::for_each_subset;
use super::{Dag, DagError, Path, Result};

/// Structural role of a node relative to the exposure/outcome pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NodeRole {
    Exposure,
    Outcome,
    /// Lies on a directed exposure-to-outcome path.
    Mediator,
    /// Lies on a back-door path that is open when nothing is conditioned on.
    ConfounderPathMember,
    /// Is a collider on some exposure-outcome path.
    Collider,
    Other,
}

impl fmt::Display for NodeRole {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            NodeRole::Exposure => "exposure",
            NodeRole::Outcome => "outcome",
            NodeRole::Mediator => "mediator",
            NodeRole::ConfounderPathMember => "confounder-path member",
            NodeRole::Collider => "collider",
            NodeRole::Other => "other",
        })
    }
}

/// The three graphical adjustment conditions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Condition {
    /// Condition 1: all confounding paths are blocked.
    BlocksConfounding,
    /// Condition 2: no causal path is blocked.
    NoCausalBlocked,
    /// Condition 3: no collider path is opened.
    NoColliderOpened,
}

impl Condition {
    pub fn number(self) -> u8 {
        match self {
            Condition::BlocksConfounding => 1,
            Condition::NoCausalBlocked => 2,
            Condition::NoColliderOpened => 3,
        }
    }

    pub fn describe(self) -> &'static str {
        match self {
            Condition::BlocksConfounding => "a confounding path is left open",
            Condition::NoCausalBlocked => "a causal path is blocked",
            Condition::NoColliderOpened => "a collider path is opened",
        }
    }
}

impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "condition {} ({})", self.number(), self.describe())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OffendingPath {
    pub condition: Condition,
    pub path: Path,
}

/// Result of checking a candidate set against the three conditions.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AdjustmentVerdict {
    pub valid: bool,
    pub condition1_blocked_confounding: bool,
    pub condition2_no_causal_blocked: bool,
    pub condition3_no_collider_opened: bool,
    /// One witnessing path per failed condition.
    pub offending_paths: Vec<OffendingPath>,
}

impl AdjustmentVerdict {
    pub fn failed(&self) -> impl Iterator<Item = &OffendingPath> {
        self.offending_paths.iter()
    }

    pub fn witness(&self, condition: Condition) -> Option<&Path> {
        self.offending_paths
            .iter()
            .find(|o| o.condition == condition)
            .map(|o| &o.path)
    }
}

impl Dag {
    /// Roles of `node` with respect to the annotated exposure and outcome.
    /// A node may have several; `Other` is returned alone when none apply.
    pub fn classify_node(&self, node: &str) -> Result<BTreeSet<NodeRole>> {
        let (x, y) = self.roles()?;
        let v = self.id(node)?;
        let mut roles = BTreeSet::new();
        if v == x {
            roles.insert(NodeRole::Exposure);
            return Ok(roles);
        }
        if v == y {
            roles.insert(NodeRole::Outcome);
            return Ok(roles);
        }
        let desc_x = self.descendant_mask(&[x]);
        let anc_y = self.ancestor_mask(&[y]);
        if desc_x[v] && anc_y[v] {
            roles.insert(NodeRole::Mediator);
        }
        for path in self.all_paths(self.name(x), self.name(y))? {
            if !path.contains(node) {
                continue;
            }
            if path.is_backdoor() && !path.has_collider() {
                roles.insert(NodeRole::ConfounderPathMember);
            }
            if path
                .junctions()
                .any(|(n, j)| n == node && j == super::Junction::Collider)
            {
                roles.insert(NodeRole::Collider);
            }
        }
        if roles.is_empty() {
            roles.insert(NodeRole::Other);
        }
        Ok(roles)
    }

    /// Evaluates the three adjustment conditions for `given` path by path.
    pub fn check_adjustment<I, S>(&self, given: I) -> Result<AdjustmentVerdict>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let (x, y) = self.roles()?;
        let z = self.ids(given)?;
        for id in [x, y] {
            if z.contains(&id) {
                return Err(DagError::EndpointConditioned(self.name(id).to_string()));
            }
        }
        let z_names: Vec<&str> = z.iter().map(|&v| self.name(v)).collect();
        let paths = self.all_paths(self.name(x), self.name(y))?;

        let mut offending = Vec::new();

        // Condition 2: a conditioned node that sits on a causal path, or
        // descends from a node on one, removes part of the causal effect.
        let causal: Vec<&Path> = paths.iter().filter(|p| p.is_directed()).collect();
        let mut witness2 = None;
        'outer: for &w in &z {
            for p in &causal {
                if p.contains(self.name(w)) {
                    witness2 = Some((*p).clone());
                    break 'outer;
                }
            }
            for p in &causal {
                let on_path = self.ids(&p.nodes()[1..])?;
                if self.descendant_mask(&on_path)[w] {
                    witness2 = Some((*p).clone());
                    break 'outer;
                }
            }
        }
        if let Some(path) = witness2 {
            offending.push(OffendingPath {
                condition: Condition::NoCausalBlocked,
                path,
            });
        }

        // Conditions 1 and 3: any non-causal path left open.
        let mut witness1 = None;
        let mut witness3 = None;
        for p in paths.iter().filter(|p| !p.is_directed()) {
            if !self.path_open(p, &z_names)? {
                continue;
            }
            let slot = if p.has_collider() { &mut witness3 } else { &mut witness1 };
            if slot.is_none() {
                *slot = Some(p.clone());
            }
        }
        if let Some(path) = witness1 {
            offending.push(OffendingPath {
                condition: Condition::BlocksConfounding,
                path,
            });
        }
        if let Some(path) = witness3 {
            offending.push(OffendingPath {
                condition: Condition::NoColliderOpened,
                path,
            });
        }
        offending.sort_by_key(|o| o.condition);

        let ok = |c| offending.iter().all(|o: &OffendingPath| o.condition != c);
        let c1 = ok(Condition::BlocksConfounding);
        let c2 = ok(Condition::NoCausalBlocked);
        let c3 = ok(Condition::NoColliderOpened);
        Ok(AdjustmentVerdict {
            valid: c1 && c2 && c3,
            condition1_blocked_confounding: c1,
            condition2_no_causal_blocked: c2,
            condition3_no_collider_opened: c3,
            offending_paths: offending,
        })
    }

    /// Reachability form of the validity check, without path enumeration.
    pub fn is_valid_adjustment_set<I, S>(&self, given: I) -> Result<bool>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let (x, y) = self.roles()?;
        let z = self.ids(given)?;
        if let Some(&e) = z.iter().find(|&&v| v == x || v == y) {
            return Err(DagError::EndpointConditioned(self.name(e).to_string()));
        }
        let ctx = AdjustmentContext::new(self, x, y)?;
        Ok(ctx.valid(&z))
    }

    /// All inclusion-minimal valid adjustment sets among the
    /// non-descendants of the exposure, ordered by size and then by name.
    pub fn minimal_adjustment_sets(&self) -> Result<Vec<Vec<String>>> {
        let (x, y) = self.roles()?;
        let ctx = AdjustmentContext::new(self, x, y)?;
        let desc_x = self.descendant_mask(&[x]);
        let mut pool: Vec<usize> = (0..self.len())
            .filter(|&v| v != y && !desc_x[v])
            .collect();
        pool.sort_by(|&a, &b| self.name(a).cmp(self.name(b)));

        let mut found: Vec<Vec<usize>> = Vec::new();
        for k in 0..=pool.len() {
            let mut this_size = Vec::new();
            for_each_subset(&pool, k, &mut |subset| {
                let has_valid_subset = found
                    .iter()
                    .any(|m| m.iter().all(|v| subset.contains(v)));
                if !has_valid_subset && ctx.valid(subset) {
                    this_size.push(subset.to_vec());
                }
                true
            });
            found.extend(this_size);
        }
        Ok(found
            .into_iter()
            .map(|set| set.into_iter().map(|v| self.name(v).to_string()).collect())
            .collect())
    }

    /// The ancestors of exposure and outcome that are not forbidden. This
    /// set is valid whenever any valid adjustment set exists, so its
    /// verdict names paths that no adjustment set can handle.
    pub fn canonical_adjustment_set(&self) -> Result<Vec<String>> {
        let (x, y) = self.roles()?;
        let ctx = AdjustmentContext::new(self, x, y)?;
        let anc = self.ancestor_mask(&[x, y]);
        let mut set: Vec<String> = (0..self.len())
            .filter(|&v| anc[v] && v != x && v != y && !ctx.forbidden[v])
            .map(|v| self.name(v).to_string())
            .collect();
        set.sort();
        Ok(set)
    }
}

struct AdjustmentContext {
    forbidden: Vec<bool>,
    backdoor_graph: Dag,
    x: usize,
    y: usize,
}

impl AdjustmentContext {
    fn new(dag: &Dag, x: usize, y: usize) -> Result<Self> {
        // Nodes other than the exposure lying on a directed path to the outcome.
        let desc_x = dag.descendant_mask(&[x]);
        let anc_y = dag.ancestor_mask(&[y]);
        let on_causal: Vec<usize> = (0..dag.len())
            .filter(|&v| v != x && desc_x[v] && anc_y[v])
            .collect();
        let forbidden = dag.descendant_mask(&on_causal);

        // Proper back-door graph: drop the first edge of every causal path.
        let on_causal_mask = dag.mask(&on_causal);
        let edges = dag
            .edges
            .iter()
            .filter(|&&(f, t)| !(f == x && on_causal_mask[t]))
            .map(|&(f, t)| (dag.name(f).to_string(), dag.name(t).to_string()));
        let backdoor_graph = Dag::new(dag.nodes().iter().cloned(), edges, [])?;
        Ok(Self {
            forbidden,
            backdoor_graph,
            x,
            y,
        })
    }

    fn valid(&self, z: &[usize]) -> bool {
        z.iter().all(|&v| !self.forbidden[v]) && !self.backdoor_graph.reachable(self.x, z)[self.y]
    }
}
