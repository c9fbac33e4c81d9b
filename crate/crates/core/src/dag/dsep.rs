use serde::{Deserialize, Serialize};

use super::{Dag, DagError, Result};

/// `x` is independent of `y` given `given` under every distribution that
/// factorises over the graph.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ImpliedIndependence {
    pub x: String,
    pub y: String,
    pub given: Vec<String>,
}

impl std::fmt::Display for ImpliedIndependence {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{} _||_ {} | {{{}}}", self.x, self.y, self.given.join(", "))
    }
}

impl Dag {
    /// Tests whether `x` and `y` are d-separated by `given`.
    pub fn d_separated<I, S>(&self, x: &str, y: &str, given: I) -> Result<bool>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let (xi, yi) = (self.id(x)?, self.id(y)?);
        if xi == yi {
            return Err(DagError::SameEndpoints(x.to_string()));
        }
        let z = self.ids(given)?;
        for (id, name) in [(xi, x), (yi, y)] {
            if z.contains(&id) {
                return Err(DagError::EndpointConditioned(name.to_string()));
            }
        }
        Ok(!self.reachable(xi, &z)[yi])
    }

    /// Nodes d-connected to `source` given `z` (active-trail reachability,
    /// linear in the number of edges).
    ///
    /// Each node is visited at most twice: once having arrived from a child
    /// (travelling up) and once from a parent (travelling down).
    pub(crate) fn reachable(&self, source: usize, z: &[usize]) -> Vec<bool> {
        let n = self.len();
        let in_z = self.mask(z);
        let z_or_ancestor = self.ancestor_mask(z);

        const UP: usize = 0;
        const DOWN: usize = 1;
        let mut visited = vec![[false; 2]; n];
        let mut reached = vec![false; n];
        let mut stack = vec![(source, UP)];
        while let Some((v, dir)) = stack.pop() {
            if std::mem::replace(&mut visited[v][dir], true) {
                continue;
            }
            if !in_z[v] {
                reached[v] = true;
            }
            if dir == UP && !in_z[v] {
                stack.extend(self.parent_ids(v).iter().map(|&p| (p, UP)));
                stack.extend(self.child_ids(v).iter().map(|&c| (c, DOWN)));
            } else if dir == DOWN {
                if !in_z[v] {
                    stack.extend(self.child_ids(v).iter().map(|&c| (c, DOWN)));
                }
                if z_or_ancestor[v] {
                    stack.extend(self.parent_ids(v).iter().map(|&p| (p, UP)));
                }
            }
        }
        reached[source] = false;
        reached
    }

    /// For every non-adjacent pair, the first smallest separating set of at
    /// most `max_set_size` nodes.
    ///
    /// Candidate separators are drawn from the ancestors of the pair, which
    /// contain every minimal separator. Pairs are ordered by name with
    /// `x < y`; separator nodes are listed by name.
    pub fn implied_independencies(&self, max_set_size: usize) -> Vec<ImpliedIndependence> {
        let mut out = Vec::new();
        let n = self.len();
        for a in 0..n {
            for b in a + 1..n {
                if self.is_adjacent(a, b) {
                    continue;
                }
                if let Some(sep) = self.smallest_separator(a, b, max_set_size) {
                    let (x, y) = if self.name(a) <= self.name(b) { (a, b) } else { (b, a) };
                    let mut given: Vec<String> =
                        sep.iter().map(|&v| self.name(v).to_string()).collect();
                    given.sort();
                    out.push(ImpliedIndependence {
                        x: self.name(x).to_string(),
                        y: self.name(y).to_string(),
                        given,
                    });
                }
            }
        }
        out.sort_by(|p, q| (&p.x, &p.y).cmp(&(&q.x, &q.y)));
        out
    }

    fn smallest_separator(&self, a: usize, b: usize, max_size: usize) -> Option<Vec<usize>> {
        let anc = self.ancestor_mask(&[a, b]);
        let mut pool: Vec<usize> = (0..self.len())
            .filter(|&v| anc[v] && v != a && v != b)
            .collect();
        pool.sort_by(|&p, &q| self.name(p).cmp(self.name(q)));
        for k in 0..=max_size.min(pool.len()) {
            let mut found = None;
            for_each_subset(&pool, k, &mut |subset| {
                if found.is_none() && !self.reachable(a, subset)[b] {
                    found = Some(subset.to_vec());
                }
                found.is_none()
            });
            if found.is_some() {
                return found;
            }
        }
        None
    }
}

/// Visits the `k`-subsets of `pool` in lexicographic order of positions.
/// The visitor returns `false` to stop early.
pub(crate) fn for_each_subset<F>(pool: &[usize], k: usize, visit: &mut F)
where
    F: FnMut(&[usize]) -> bool,
{
    fn rec<F: FnMut(&[usize]) -> bool>(
        pool: &[usize],
        k: usize,
        start: usize,
        cur: &mut Vec<usize>,
        visit: &mut F,
    ) -> bool {
        if cur.len() == k {
            return visit(cur);
        }
        let need = k - cur.len();
        for i in start..pool.len() {
            if pool.len() - i < need {
                break;
            }
            cur.push(pool[i]);
            let go_on = rec(pool, k, i + 1, cur, visit);
            cur.pop();
            if !go_on {
                return false;
            }
        }
        true
    }
    let mut cur = Vec::with_capacity(k);
    rec(pool, k, 0, &mut cur, visit);
}

#[cfg(test)]
mod tests {
    use super::super::parse_dag;
    use super::*;

    const NONE: [&str; 0] = [];

    #[test]
    fn chain_and_collider() {
        let chain = parse_dag("dag { A -> B -> C }").unwrap();
        assert!(chain.d_separated("A", "C", ["B"]).unwrap());
        assert!(!chain.d_separated("A", "C", NONE).unwrap());

        let collider = parse_dag("dag { A -> C  B -> C }").unwrap();
        assert!(collider.d_separated("A", "B", NONE).unwrap());
        assert!(!collider.d_separated("A", "B", ["C"]).unwrap());
    }

    #[test]
    fn descendant_of_collider_opens() {
        let dag = parse_dag("dag { A -> C  B -> C  C -> D }").unwrap();
        assert!(!dag.d_separated("A", "B", ["D"]).unwrap());
    }

    #[test]
    fn precondition_errors() {
        let dag = parse_dag("dag { A -> B }").unwrap();
        assert!(matches!(dag.d_separated("A", "B", ["A"]), Err(DagError::EndpointConditioned(_))));
        assert!(matches!(dag.d_separated("A", "Z", NONE), Err(DagError::UnknownNode(_))));
        assert!(matches!(dag.d_separated("A", "A", NONE), Err(DagError::SameEndpoints(_))));
    }

    #[test]
    fn implied_chain_and_complete_graph() {
        let chain = parse_dag("dag { A -> B -> C }").unwrap();
        assert_eq!(
            chain.implied_independencies(3),
            vec![ImpliedIndependence {
                x: "A".into(),
                y: "C".into(),
                given: vec!["B".into()],
            }]
        );
        let complete = parse_dag("dag { A -> B  A -> C  B -> C }").unwrap();
        assert!(complete.implied_independencies(3).is_empty());
    }

    #[test]
    fn separator_size_limit() {
        // A and D are separated only by {B, C}.
        let dag = parse_dag("dag { A -> B  A -> C  B -> D  C -> D }").unwrap();
        let within_one = dag.implied_independencies(1);
        assert!(within_one.iter().all(|t| !(t.x == "A" && t.y == "D")));
        let within_two = dag.implied_independencies(2);
        let ad = within_two.iter().find(|t| t.x == "A" && t.y == "D").unwrap();
        assert_eq!(ad.given, vec!["B", "C"]);
    }

    #[test]
    fn subsets_in_order() {
        let mut seen = Vec::new();
        for_each_subset(&[1, 2, 3], 2, &mut |s| {
            seen.push(s.to_vec());
            true
        });
        assert_eq!(seen, vec![vec![1, 2], vec![1, 3], vec![2, 3]]);
        let mut empty = Vec::new();
        for_each_subset(&[1, 2], 0, &mut |s| {
            empty.push(s.to_vec());
            true
        });
        assert_eq!(empty, vec![Vec::<usize>::new()]);
    }
}
