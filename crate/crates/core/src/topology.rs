//! Interference and social graphs over the secondary users.
//!
//! Users are indexed 0..N. Both graphs are undirected, simple and stored as
//! a dense adjacency matrix plus sorted neighbour lists.

use std::collections::{BTreeSet, HashMap};

use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UserParams {
    pub position: (f64, f64),
    contention_prob: f64,
}

impl UserParams {
    pub fn new(position: (f64, f64), contention_prob: f64) -> Result<Self> {
        if !(contention_prob > 0.0 && contention_prob < 1.0) {
            return Err(Error::config(
                "users.contention_probs",
                format!("contention probability {contention_prob} outside (0, 1)"),
            ));
        }
        if !(position.0.is_finite() && position.1.is_finite()) {
            return Err(Error::config("users.positions", "non-finite position"));
        }
        Ok(Self {
            position,
            contention_prob,
        })
    }

    pub fn contention_prob(&self) -> f64 {
        self.contention_prob
    }

    pub fn distance(&self, other: &UserParams) -> f64 {
        let dx = self.position.0 - other.position.0;
        let dy = self.position.1 - other.position.1;
        dx.hypot(dy)
    }
}

/// Undirected simple graph on `n` vertices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Graph {
    n: usize,
    matrix: Vec<bool>,
    lists: Vec<Vec<usize>>,
}

impl Graph {
    pub fn empty(n: usize) -> Self {
        Self {
            n,
            matrix: vec![false; n * n],
            lists: vec![Vec::new(); n],
        }
    }

    /// Builds a graph from an edge iterator. Self-loops and duplicates are dropped.
    pub fn from_edges(n: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Self {
        let mut g = Self::empty(n);
        for (a, b) in edges {
            g.add_edge(a, b);
        }
        g
    }

    fn add_edge(&mut self, a: usize, b: usize) {
        assert!(a < self.n && b < self.n, "edge ({a}, {b}) out of range");
        if a == b || self.matrix[a * self.n + b] {
            return;
        }
        self.matrix[a * self.n + b] = true;
        self.matrix[b * self.n + a] = true;
        let la = &mut self.lists[a];
        let pos = la.binary_search(&b).unwrap_err();
        la.insert(pos, b);
        let lb = &mut self.lists[b];
        let pos = lb.binary_search(&a).unwrap_err();
        lb.insert(pos, a);
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn has_edge(&self, a: usize, b: usize) -> bool {
        self.matrix[a * self.n + b]
    }

    /// Sorted neighbour list. Panics if `user` is out of range; see [`neighbors`].
    pub fn adjacent(&self, user: usize) -> &[usize] {
        &self.lists[user]
    }

    pub fn degree(&self, user: usize) -> usize {
        self.lists[user].len()
    }

    pub fn max_degree(&self) -> usize {
        self.lists.iter().map(Vec::len).max().unwrap_or(0)
    }

    pub fn edge_count(&self) -> usize {
        self.lists.iter().map(Vec::len).sum::<usize>() / 2
    }

    /// Edges as `(a, b)` with `a < b`, in lexicographic order.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::with_capacity(self.edge_count());
        for (a, list) in self.lists.iter().enumerate() {
            out.extend(list.iter().filter(|&&b| b > a).map(|&b| (a, b)));
        }
        out
    }
}

pub fn neighbors(graph: &Graph, user: usize) -> Result<BTreeSet<usize>> {
    if user >= graph.n() {
        return Err(Error::OutOfRange {
            index: user,
            len: graph.n(),
        });
    }
    Ok(graph.adjacent(user).iter().copied().collect())
}

/// Users within `delta` meters of each other interfere.
pub fn build_interference_graph(users: &[UserParams], delta: f64) -> Graph {
    let n = users.len();
    let mut g = Graph::empty(n);
    for a in 0..n {
        for b in a + 1..n {
            if users[a].distance(&users[b]) <= delta {
                g.add_edge(a, b);
            }
        }
    }
    g
}

/// Erdős–Rényi G(n, p). One uniform draw per unordered pair in (a, b)
/// lexicographic order, so graphs built from the same stream are nested in
/// `p_link`.
pub fn generate_er_social_graph<R: Rng + ?Sized>(n: usize, p_link: f64, rng: &mut R) -> Graph {
    let mut g = Graph::empty(n);
    for a in 0..n {
        for b in a + 1..n {
            let u: f64 = rng.random();
            if u < p_link {
                g.add_edge(a, b);
            }
        }
    }
    g
}

/// A parsed edge-list trace with node IDs kept in first-appearance order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EdgeList {
    nodes: Vec<u64>,
    edges: Vec<(u64, u64)>,
}

impl EdgeList {
    /// Distinct node IDs in order of first appearance.
    pub fn nodes(&self) -> &[u64] {
        &self.nodes
    }

    /// Distinct undirected non-loop edges as read (smaller ID first).
    pub fn edges(&self) -> &[(u64, u64)] {
        &self.edges
    }

    /// Induced subgraph on `ids`, where `ids[k]` becomes user `k`.
    pub fn induced(&self, ids: &[u64]) -> Graph {
        let index: HashMap<u64, usize> = ids.iter().enumerate().map(|(k, &id)| (id, k)).collect();
        Graph::from_edges(
            ids.len(),
            self.edges.iter().filter_map(|(a, b)| {
                Some((*index.get(a)?, *index.get(b)?))
            }),
        )
    }
}

/// Parses whitespace-separated integer pairs, one per line. Blank lines and
/// lines starting with `#` or `%` are skipped; columns past the second
/// (weights, timestamps) are ignored.
pub fn parse_edgelist(source: &str) -> Result<EdgeList> {
    let mut nodes = Vec::new();
    let mut seen_nodes = HashMap::new();
    let mut seen_edges = BTreeSet::new();
    let mut edges = Vec::new();
    for (idx, raw) in source.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') || line.starts_with('%') {
            continue;
        }
        let mut fields = line.split_whitespace();
        let mut id = || -> Result<u64> {
            let tok = fields.next().ok_or_else(|| Error::Parse {
                line: idx + 1,
                reason: "expected two node IDs".into(),
            })?;
            tok.parse::<u64>().map_err(|_| Error::Parse {
                line: idx + 1,
                reason: format!("`{tok}` is not a nonnegative integer node ID"),
            })
        };
        let a = id()?;
        let b = id()?;
        for v in [a, b] {
            seen_nodes.entry(v).or_insert_with(|| {
                nodes.push(v);
                nodes.len() - 1
            });
        }
        if a != b {
            let key = (a.min(b), a.max(b));
            if seen_edges.insert(key) {
                edges.push(key);
            }
        }
    }
    Ok(EdgeList { nodes, edges })
}

/// How N users are mapped onto trace nodes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Selection {
    /// The first N distinct IDs in file order, user k = k-th ID.
    FirstN,
    /// N distinct IDs drawn uniformly without replacement, in random order.
    RandomN,
}

/// Restricts a trace to `n` users. Returns the graph and the trace ID assigned
/// to each user.
pub fn select_social_graph<R: Rng + ?Sized>(
    trace: &EdgeList,
    n: usize,
    selection: Selection,
    rng: &mut R,
) -> Result<(Graph, Vec<u64>)> {
    if trace.nodes.len() < n {
        return Err(Error::config(
            "topology.edgelist_path",
            format!(
                "trace has {} distinct nodes but {n} users are configured",
                trace.nodes.len()
            ),
        ));
    }
    let ids: Vec<u64> = match selection {
        Selection::FirstN => trace.nodes[..n].to_vec(),
        Selection::RandomN => {
            let mut pool = trace.nodes.clone();
            let (chosen, _) = pool.partial_shuffle(rng, n);
            chosen.to_vec()
        }
    };
    Ok((trace.induced(&ids), ids))
}

/// Parses a trace and restricts it to the first `n` distinct node IDs.
pub fn load_social_graph_edgelist(source: &str, n: usize) -> Result<Graph> {
    let trace = parse_edgelist(source)?;
    if trace.nodes.len() < n {
        return Err(Error::config(
            "topology.edgelist_path",
            format!(
                "trace has {} distinct nodes but {n} users are configured",
                trace.nodes.len()
            ),
        ));
    }
    Ok(trace.induced(&trace.nodes[..n]))
}

/// Uniform placement in a `side` × `side` meter square.
pub fn place_uniform<R: Rng + ?Sized>(n: usize, side: f64, rng: &mut R) -> Vec<(f64, f64)> {
    (0..n)
        .map(|_| (rng.random::<f64>() * side, rng.random::<f64>() * side))
        .collect()
}

/// The two user graphs of one scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct Topology {
    pub interference: Graph,
    pub social: Graph,
    pub delta: f64,
}

impl Topology {
    pub fn new(interference: Graph, social: Graph, delta: f64) -> Result<Self> {
        if interference.n() != social.n() {
            return Err(Error::config(
                "topology",
                format!(
                    "interference graph has {} users, social graph {}",
                    interference.n(),
                    social.n()
                ),
            ));
        }
        Ok(Self {
            interference,
            social,
            delta,
        })
    }

    pub fn n_users(&self) -> usize {
        self.interference.n()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SimRng;
    use proptest::prelude::*;
    use rand::SeedableRng;

    fn user(x: f64, y: f64) -> UserParams {
        UserParams::new((x, y), 0.2).unwrap()
    }

    #[test]
    fn interference_by_distance() {
        let g = build_interference_graph(&[user(0.0, 0.0), user(50.0, 0.0)], 100.0);
        assert!(g.has_edge(0, 1));
        let g = build_interference_graph(&[user(3.0, 4.0)], 100.0);
        assert_eq!(g.edge_count(), 0);
        let g = build_interference_graph(
            &[user(0.0, 0.0), user(80.0, 0.0), user(160.0, 0.0)],
            100.0,
        );
        assert_eq!(g.edges(), vec![(0, 1), (1, 2)]);
        // the range is inclusive
        let g = build_interference_graph(&[user(0.0, 0.0), user(100.0, 0.0)], 100.0);
        assert!(g.has_edge(0, 1));
    }

    #[test]
    fn contention_probability_must_be_interior() {
        assert!(UserParams::new((0.0, 0.0), 0.0).is_err());
        assert!(UserParams::new((0.0, 0.0), 1.0).is_err());
        assert!(UserParams::new((0.0, 0.0), 0.3).is_ok());
    }

    #[test]
    fn er_extremes() {
        let mut rng = SimRng::seed_from_u64(3);
        assert_eq!(generate_er_social_graph(7, 1.0, &mut rng).edge_count(), 21);
        assert_eq!(generate_er_social_graph(7, 0.0, &mut rng).edge_count(), 0);
    }

    #[test]
    fn er_mean_edge_count() {
        let mut rng = SimRng::seed_from_u64(4);
        let reps = 10_000;
        let counts: Vec<f64> = (0..reps)
            .map(|_| generate_er_social_graph(20, 0.2, &mut rng).edge_count() as f64)
            .collect();
        let mean = counts.iter().sum::<f64>() / reps as f64;
        // binomial(190, 0.2): mean 38, variance 30.4
        let se = (190.0f64 * 0.2 * 0.8 / reps as f64).sqrt();
        assert!((mean - 38.0).abs() < 3.0 * se, "{mean}");
    }

    #[test]
    fn er_is_nested_under_common_stream() {
        let lo = generate_er_social_graph(15, 0.2, &mut SimRng::seed_from_u64(9));
        let hi = generate_er_social_graph(15, 0.5, &mut SimRng::seed_from_u64(9));
        for (a, b) in lo.edges() {
            assert!(hi.has_edge(a, b));
        }
    }

    #[test]
    fn edgelist_direct_read() {
        let g = load_social_graph_edgelist("0 1\n1 2", 3).unwrap();
        assert_eq!(g.edges(), vec![(0, 1), (1, 2)]);
    }

    #[test]
    fn edgelist_symmetrizes_and_drops_loops() {
        let g = load_social_graph_edgelist("0 1\n1 0\n1 1", 2).unwrap();
        assert_eq!(g.edges(), vec![(0, 1)]);
    }

    #[test]
    fn edgelist_comments_and_extra_columns() {
        let src = "# header\n% konect style\n\n10 20 1 1234\n  20\t30\n";
        let trace = parse_edgelist(src).unwrap();
        assert_eq!(trace.nodes(), &[10, 20, 30]);
        assert_eq!(trace.edges(), &[(10, 20), (20, 30)]);
    }

    #[test]
    fn edgelist_malformed_line_reports_number() {
        match parse_edgelist("0 1\n# c\n2 x\n") {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
        match parse_edgelist("5\n") {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 1),
            other => panic!("{other:?}"),
        }
        assert!(parse_edgelist("-1 2").is_err());
    }

    #[test]
    fn edgelist_too_few_nodes() {
        assert!(matches!(
            load_social_graph_edgelist("0 1\n", 3),
            Err(Error::Config { .. })
        ));
    }

    #[test]
    fn trace_restricted_to_first_n_keeps_all_internal_edges() {
        // 100-node ring plus chords
        let mut src = String::new();
        for k in 0..100u64 {
            src.push_str(&format!("{} {}\n", k, (k + 1) % 100));
            src.push_str(&format!("{} {}\n", k, (k * 7 + 3) % 100));
        }
        let g = load_social_graph_edgelist(&src, 10).unwrap();
        // independent re-parse: collect pairs with both endpoints among the
        // first ten IDs in appearance order
        let mut order: Vec<u64> = Vec::new();
        let mut expected = BTreeSet::new();
        for line in src.lines() {
            let v: Vec<u64> = line.split(' ').map(|t| t.parse().unwrap()).collect();
            for x in &v {
                if !order.contains(x) {
                    order.push(*x);
                }
            }
        }
        let first: Vec<u64> = order[..10].to_vec();
        for line in src.lines() {
            let v: Vec<u64> = line.split(' ').map(|t| t.parse().unwrap()).collect();
            let (Some(a), Some(b)) = (
                first.iter().position(|&x| x == v[0]),
                first.iter().position(|&x| x == v[1]),
            ) else {
                continue;
            };
            if a != b {
                expected.insert((a.min(b), a.max(b)));
            }
        }
        let got: BTreeSet<_> = g.edges().into_iter().collect();
        assert_eq!(got, expected);
    }

    #[test]
    fn random_selection_is_seeded() {
        let src: String = (0..50u64).map(|k| format!("{} {}\n", k, (k + 1) % 50)).collect();
        let trace = parse_edgelist(&src).unwrap();
        let (g1, ids1) =
            select_social_graph(&trace, 10, Selection::RandomN, &mut SimRng::seed_from_u64(1))
                .unwrap();
        let (g2, ids2) =
            select_social_graph(&trace, 10, Selection::RandomN, &mut SimRng::seed_from_u64(1))
                .unwrap();
        assert_eq!(ids1, ids2);
        assert_eq!(g1, g2);
        let distinct: BTreeSet<_> = ids1.iter().collect();
        assert_eq!(distinct.len(), 10);
        for (a, b) in g1.edges() {
            let (x, y) = (ids1[a], ids1[b]);
            assert!((x + 1) % 50 == y || (y + 1) % 50 == x);
        }
    }

    #[test]
    fn neighbor_queries() {
        let complete = Graph::from_edges(3, [(0, 1), (0, 2), (1, 2)]);
        assert_eq!(neighbors(&complete, 0).unwrap(), BTreeSet::from([1, 2]));
        assert!(neighbors(&Graph::empty(3), 1).unwrap().is_empty());
        let path = Graph::from_edges(3, [(0, 1), (1, 2)]);
        assert_eq!(neighbors(&path, 1).unwrap(), BTreeSet::from([0, 2]));
        assert!(matches!(
            neighbors(&path, 3),
            Err(Error::OutOfRange { index: 3, len: 3 })
        ));
    }

    proptest! {
        #[test]
        fn graphs_are_symmetric_and_irreflexive(seed in any::<u64>(), n in 1usize..25, p in 0.0f64..1.0) {
            let mut rng = SimRng::seed_from_u64(seed);
            let positions = place_uniform(n, 500.0, &mut rng);
            let users: Vec<_> = positions.iter().map(|&pos| UserParams::new(pos, 0.2).unwrap()).collect();
            for g in [build_interference_graph(&users, 150.0), generate_er_social_graph(n, p, &mut rng)] {
                for a in 0..n {
                    prop_assert!(!g.has_edge(a, a));
                    for &b in g.adjacent(a) {
                        prop_assert!(g.adjacent(b).contains(&a));
                    }
                }
            }
        }

        #[test]
        fn interference_translation_invariant(seed in any::<u64>(), n in 1usize..20, dx in -1e3f64..1e3, dy in -1e3f64..1e3) {
            let mut rng = SimRng::seed_from_u64(seed);
            let positions = place_uniform(n, 300.0, &mut rng);
            let users: Vec<_> = positions.iter().map(|&pos| UserParams::new(pos, 0.2).unwrap()).collect();
            let moved: Vec<_> = positions.iter().map(|&(x, y)| UserParams::new((x + dx, y + dy), 0.2).unwrap()).collect();
            // skip pairs within rounding of the range boundary
            let near_boundary = (0..n).any(|a| (a + 1..n).any(|b| (users[a].distance(&users[b]) - 100.0).abs() < 1e-9));
            prop_assume!(!near_boundary);
            prop_assert_eq!(build_interference_graph(&users, 100.0), build_interference_graph(&moved, 100.0));
        }

        #[test]
        fn er_same_seed_identical(seed in any::<u64>(), n in 0usize..30, p in 0.0f64..1.0) {
            let a = generate_er_social_graph(n, p, &mut SimRng::seed_from_u64(seed));
            let b = generate_er_social_graph(n, p, &mut SimRng::seed_from_u64(seed));
            prop_assert_eq!(a, b);
        }
    }
}
