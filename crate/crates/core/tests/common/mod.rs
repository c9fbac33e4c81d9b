#![allow(dead_code)]

use glmcausal::dag::{Annotation, Dag};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const FIG1: &str = include_str!("../../fixtures/fig1.dag");
pub const CHAIN: &str = include_str!("../../fixtures/chain.dag");

/// Adjacency matrix: `adj[a][b]` means `a -> b`.
pub type Adj = Vec<Vec<bool>>;

pub fn name(i: usize) -> String {
    format!("V{i}")
}

pub fn to_dag(adj: &Adj) -> Dag {
    let n = adj.len();
    let mut edges = Vec::new();
    for a in 0..n {
        for b in 0..n {
            if adj[a][b] {
                edges.push((name(a), name(b)));
            }
        }
    }
    Dag::new((0..n).map(name), edges, std::iter::empty::<(String, Annotation)>()).unwrap()
}

fn acyclic(adj: &Adj) -> bool {
    let n = adj.len();
    let mut indeg: Vec<usize> = (0..n).map(|b| (0..n).filter(|&a| adj[a][b]).count()).collect();
    let mut stack: Vec<usize> = (0..n).filter(|&v| indeg[v] == 0).collect();
    let mut seen = 0;
    while let Some(v) = stack.pop() {
        seen += 1;
        for w in 0..n {
            if adj[v][w] {
                indeg[w] -= 1;
                if indeg[w] == 0 {
                    stack.push(w);
                }
            }
        }
    }
    seen == n
}

/// Every DAG on `n` labelled nodes: each unordered pair is absent, forward or
/// backward, and cyclic orientations are dropped.
pub fn all_dags(n: usize) -> Vec<Adj> {
    let pairs: Vec<(usize, usize)> = (0..n).flat_map(|a| (a + 1..n).map(move |b| (a, b))).collect();
    let total = 3usize.pow(pairs.len() as u32);
    let mut out = Vec::new();
    for code in 0..total {
        let mut adj = vec![vec![false; n]; n];
        let mut c = code;
        for &(a, b) in &pairs {
            match c % 3 {
                1 => adj[a][b] = true,
                2 => adj[b][a] = true,
                _ => {}
            }
            c /= 3;
        }
        if acyclic(&adj) {
            out.push(adj);
        }
    }
    out
}

/// Random DAG: edges follow a shuffled order, each present with `density`.
pub fn random_dag(n: usize, density: f64, rng: &mut ChaCha8Rng) -> Adj {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    let mut adj = vec![vec![false; n]; n];
    for i in 0..n {
        for j in i + 1..n {
            if rng.random_bool(density) {
                adj[order[i]][order[j]] = true;
            }
        }
    }
    adj
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// `v` and all its descendants.
pub fn descendants_incl(adj: &Adj, v: usize) -> Vec<bool> {
    let mut seen = vec![false; adj.len()];
    let mut stack = vec![v];
    while let Some(u) = stack.pop() {
        if !seen[u] {
            seen[u] = true;
            stack.extend((0..adj.len()).filter(|&w| adj[u][w]));
        }
    }
    seen
}

/// Every simple path between `x` and `y`, ignoring edge direction.
pub fn simple_paths(adj: &Adj, x: usize, y: usize) -> Vec<Vec<usize>> {
    fn go(adj: &Adj, path: &mut Vec<usize>, y: usize, out: &mut Vec<Vec<usize>>) {
        let u = *path.last().unwrap();
        if u == y {
            out.push(path.clone());
            return;
        }
        for w in 0..adj.len() {
            if (adj[u][w] || adj[w][u]) && !path.contains(&w) {
                path.push(w);
                go(adj, path, y, out);
                path.pop();
            }
        }
    }
    let mut out = Vec::new();
    go(adj, &mut vec![x], y, &mut out);
    out
}

pub fn path_open(adj: &Adj, path: &[usize], z: &[bool]) -> bool {
    path.windows(3).all(|w| {
        let (u, v, t) = (w[0], w[1], w[2]);
        if adj[u][v] && adj[t][v] {
            descendants_incl(adj, v).iter().zip(z).any(|(d, c)| *d && *c)
        } else {
            !z[v]
        }
    })
}

pub fn is_directed(adj: &Adj, path: &[usize]) -> bool {
    path.windows(2).all(|w| adj[w[0]][w[1]])
}

/// d-separation by listing every path and checking each one.
pub fn dsep_oracle(adj: &Adj, x: usize, y: usize, z: &[bool]) -> bool {
    simple_paths(adj, x, y).iter().all(|p| !path_open(adj, p, z))
}

/// Adjustment validity: no member is a descendant of a node (other than
/// `x`) on a directed `x` to `y` path, and every other path is blocked.
pub fn adjustment_oracle(adj: &Adj, x: usize, y: usize, z: &[bool]) -> bool {
    if z[x] || z[y] {
        return false;
    }
    let paths = simple_paths(adj, x, y);
    let mut forbidden = vec![false; adj.len()];
    for p in paths.iter().filter(|p| is_directed(adj, p)) {
        for &v in &p[1..] {
            for (f, d) in forbidden.iter_mut().zip(descendants_incl(adj, v)) {
                *f |= d;
            }
        }
    }
    if forbidden.iter().zip(z).any(|(f, c)| *f && *c) {
        return false;
    }
    paths
        .iter()
        .filter(|p| !is_directed(adj, p))
        .all(|p| !path_open(adj, p, z))
}

/// Valid sets none of whose proper subsets is valid, as sorted name lists.
pub fn minimal_sets_oracle(adj: &Adj, x: usize, y: usize) -> Vec<Vec<String>> {
    let n = adj.len();
    let valid: Vec<bool> = (0..1usize << n)
        .map(|m| adjustment_oracle(adj, x, y, &mask_to_bools(m, n)))
        .collect();
    let mut out: Vec<Vec<String>> = (0..1usize << n)
        .filter(|&m| valid[m])
        .filter(|&m| !(0..m).any(|s| s & m == s && s != m && valid[s]))
        .map(|m| mask_names(m, n))
        .collect();
    out.sort();
    out
}

pub fn mask_to_bools(mask: usize, n: usize) -> Vec<bool> {
    (0..n).map(|i| mask >> i & 1 == 1).collect()
}

pub fn mask_names(mask: usize, n: usize) -> Vec<String> {
    let mut v: Vec<String> = (0..n).filter(|i| mask >> i & 1 == 1).map(name).collect();
    v.sort();
    v
}

/// Adjacency of a parsed graph, indexed by declaration order.
pub fn adjacency(dag: &Dag) -> (Vec<String>, Adj) {
    let names = dag.nodes().to_vec();
    let idx = |s: &str| names.iter().position(|v| v == s).unwrap();
    let mut adj = vec![vec![false; names.len()]; names.len()];
    for (a, b) in dag.edges() {
        adj[idx(a)][idx(b)] = true;
    }
    (names, adj)
}

/// Ordinary least squares through the normal equations, solved by Gaussian
/// elimination with partial pivoting.
pub fn ols_normal_equations(x: &[Vec<f64>], y: &[f64]) -> Vec<f64> {
    let p = x[0].len();
    let mut a = vec![vec![0.0; p + 1]; p];
    for (row, &yi) in x.iter().zip(y) {
        for i in 0..p {
            for j in 0..p {
                a[i][j] += row[i] * row[j];
            }
            a[i][p] += row[i] * yi;
        }
    }
    for c in 0..p {
        let piv = (c..p).max_by(|&i, &j| a[i][c].abs().total_cmp(&a[j][c].abs())).unwrap();
        a.swap(c, piv);
        for r in 0..p {
            if r != c {
                let f = a[r][c] / a[c][c];
                for k in c..=p {
                    a[r][k] -= f * a[c][k];
                }
            }
        }
    }
    (0..p).map(|i| a[i][p] / a[i][i]).collect()
}

pub fn normal(rng: &mut ChaCha8Rng) -> f64 {
    let u1: f64 = rng.random();
    let u2: f64 = rng.random();
    (-2.0 * (1.0 - u1).ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}
