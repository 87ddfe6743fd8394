//! Calibration tiling on arbitrary coupling graphs: role assignments that
//! measure every qubit frequency and every coupling in as few parallel
//! experiments as possible.
//!
//! Plans are built in two phases. Frequency experiments place an independent
//! set in Ramsey with every other qubit in `|0⟩`; coupling experiments pair a
//! Ramsey qubit with exactly one `|1⟩` neighbor.

use std::collections::BTreeMap;
use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::crosstalk::{derive_targets, ExperimentConfig, QubitRole, Target};
use crate::error::{Error, Result};
use crate::stream::rng_for;

/// Default search-node budget for [`TilingEffort::Exhaustive`].
pub const DEFAULT_NODE_LIMIT: u64 = 1_000_000;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CouplingGraph {
    pub n: usize,
    pub edges: Vec<(usize, usize)>,
}

impl CouplingGraph {
    pub fn new(n: usize, edges: Vec<(usize, usize)>) -> Result<Self> {
        let g = CouplingGraph { n, edges };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        let mut seen = std::collections::HashSet::new();
        for (i, &(a, b)) in self.edges.iter().enumerate() {
            let location = format!("edges[{i}]");
            if a >= self.n || b >= self.n {
                return Err(Error::Parse {
                    location,
                    message: format!("vertex index out of range for n = {}", self.n),
                });
            }
            if a == b {
                return Err(Error::Parse {
                    location,
                    message: format!("self-loop on vertex {a}"),
                });
            }
            if !seen.insert((a.min(b), a.max(b))) {
                return Err(Error::Parse {
                    location,
                    message: format!("duplicate edge {{{a}, {b}}}"),
                });
            }
        }
        Ok(())
    }

    /// Sorted neighbor lists.
    pub fn adjacency(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.n];
        for &(a, b) in &self.edges {
            adj[a].push(b);
            adj[b].push(a);
        }
        for nbrs in &mut adj {
            nbrs.sort_unstable();
        }
        adj
    }

    pub fn max_degree(&self) -> usize {
        self.adjacency().iter().map(Vec::len).max().unwrap_or(0)
    }

    /// Edges with `a < b`, sorted.
    pub fn canonical_edges(&self) -> Vec<(usize, usize)> {
        let mut e: Vec<(usize, usize)> = self.edges.iter().map(|&(a, b)| (a.min(b), a.max(b))).collect();
        e.sort_unstable();
        e
    }

    /// Two-coloring, if the graph is bipartite. Each component's lowest vertex gets color 0.
    pub fn bipartition(&self) -> Option<Vec<u8>> {
        let adj = self.adjacency();
        let mut color = vec![u8::MAX; self.n];
        for s in 0..self.n {
            if color[s] != u8::MAX {
                continue;
            }
            color[s] = 0;
            let mut stack = vec![s];
            while let Some(v) = stack.pop() {
                for &u in &adj[v] {
                    if color[u] == u8::MAX {
                        color[u] = 1 - color[v];
                        stack.push(u);
                    } else if color[u] == color[v] {
                        return None;
                    }
                }
            }
        }
        Some(color)
    }

    pub fn path(n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::domain("a path needs at least two vertices"));
        }
        CouplingGraph::new(n, (0..n - 1).map(|i| (i, i + 1)).collect())
    }

    /// `w × h` square lattice, row-major.
    pub fn grid(w: usize, h: usize) -> Result<Self> {
        if w == 0 || h == 0 || w * h < 2 {
            return Err(Error::domain("grid needs at least two vertices"));
        }
        let mut edges = Vec::new();
        for r in 0..h {
            for c in 0..w {
                let v = r * w + c;
                if c + 1 < w {
                    edges.push((v, v + 1));
                }
                if r + 1 < h {
                    edges.push((v, v + w));
                }
            }
        }
        CouplingGraph::new(w * h, edges)
    }

    /// Heavy-hex lattice: a brick-wall honeycomb of `distance` rows of
    /// hexagons with every edge subdivided by a degree-2 vertex, and dangling
    /// ends trimmed. Bipartite with maximum degree 3.
    pub fn heavy_hex(distance: usize) -> Result<Self> {
        if distance < 2 {
            return Err(Error::domain("heavy-hex distance must be at least 2"));
        }
        let rows = distance + 1;
        let cols = 2 * distance + 2;
        let id = |r: usize, c: usize| r * cols + c;
        let mut base = Vec::new();
        for r in 0..rows {
            for c in 0..cols {
                if c + 1 < cols {
                    base.push((id(r, c), id(r, c + 1)));
                }
                if r + 1 < rows && (r + c) % 2 == 0 {
                    base.push((id(r, c), id(r + 1, c)));
                }
            }
        }
        let mut n = rows * cols;
        let mut edges = Vec::with_capacity(2 * base.len());
        for (a, b) in base {
            edges.push((a, n));
            edges.push((n, b));
            n += 1;
        }
        prune_leaves(n, edges)
    }

    /// Erdős–Rényi `G(n, p)` from a keyed stream.
    pub fn random(n: usize, p: f64, seed: u64) -> Result<Self> {
        let mut rng = rng_for(&[seed, 0x4752_4150_48]);
        let mut edges = Vec::new();
        for a in 0..n {
            for b in a + 1..n {
                if rng.random::<f64>() < p {
                    edges.push((a, b));
                }
            }
        }
        CouplingGraph::new(n, edges)
    }
}

/// Repeatedly removes degree-1 vertices, then drops isolated ones and relabels.
fn prune_leaves(n: usize, mut edges: Vec<(usize, usize)>) -> Result<CouplingGraph> {
    loop {
        let mut deg = vec![0usize; n];
        for &(a, b) in &edges {
            deg[a] += 1;
            deg[b] += 1;
        }
        let before = edges.len();
        edges.retain(|&(a, b)| deg[a] > 1 && deg[b] > 1);
        if edges.len() == before {
            break;
        }
    }
    let mut label = vec![usize::MAX; n];
    let mut next = 0;
    for &(a, b) in &edges {
        for v in [a, b] {
            if label[v] == usize::MAX {
                label[v] = next;
                next += 1;
            }
        }
    }
    CouplingGraph::new(next, edges.into_iter().map(|(a, b)| (label[a], label[b])).collect())
}

/// Parses and validates the `{"n": .., "edges": [[a, b], ..]}` format.
pub fn load_graph(text: &str) -> Result<CouplingGraph> {
    let g: CouplingGraph = serde_json::from_str(text).map_err(|e| Error::Parse {
        location: format!("line {} column {}", e.line(), e.column()),
        message: e.to_string(),
    })?;
    g.validate()?;
    Ok(g)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "effort", rename_all = "kebab-case")]
pub enum TilingEffort {
    Greedy,
    /// Exact minimum per phase within `limit` search nodes, else the greedy plan.
    Exhaustive {
        limit: u64,
    },
}

impl Default for TilingEffort {
    fn default() -> Self {
        TilingEffort::Greedy
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TilingPlan {
    pub experiments: Vec<ExperimentConfig>,
    /// Parameter name (`omega:v`, `J:a-b`) to the experiment measuring it.
    pub coverage: BTreeMap<String, usize>,
    /// `Some(true)` when an exhaustive search finished within its node limit.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub exhaustive_complete: Option<bool>,
}

impl TilingPlan {
    pub fn len(&self) -> usize {
        self.experiments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.experiments.is_empty()
    }

    fn from_experiments(experiments: Vec<ExperimentConfig>) -> Self {
        let mut coverage = BTreeMap::new();
        for (k, e) in experiments.iter().enumerate() {
            for t in &e.targets {
                coverage.entry(target_key(t)).or_insert(k);
            }
        }
        TilingPlan {
            experiments,
            coverage,
            exhaustive_complete: None,
        }
    }
}

pub fn omega_key(v: usize) -> String {
    format!("omega:{v}")
}

pub fn coupling_key(a: usize, b: usize) -> String {
    format!("J:{}-{}", a.min(b), a.max(b))
}

fn target_key(t: &Target) -> String {
    match *t {
        Target::Omega { qubit } => omega_key(qubit),
        Target::Coupling { qubit, neighbor } => coupling_key(qubit, neighbor),
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub experiment: Option<usize>,
    pub subject: String,
    pub rule: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.experiment {
            Some(k) => write!(f, "experiment {k}, {}: {}", self.subject, self.rule),
            None => write!(f, "{}: {}", self.subject, self.rule),
        }
    }
}

/// Every broken rule of `plan` on `graph`; empty iff the plan is valid and complete.
pub fn validate_plan(graph: &CouplingGraph, plan: &TilingPlan) -> Vec<Violation> {
    let adj = graph.adjacency();
    let mut out = Vec::new();
    for (k, e) in plan.experiments.iter().enumerate() {
        if e.roles.len() != graph.n {
            out.push(Violation {
                experiment: Some(k),
                subject: "roles".into(),
                rule: format!("{} roles for {} vertices", e.roles.len(), graph.n),
            });
            continue;
        }
        for v in 0..graph.n {
            if e.roles[v] != QubitRole::Ramsey {
                continue;
            }
            for &u in &adj[v] {
                if u > v && e.roles[u] == QubitRole::Ramsey {
                    out.push(Violation {
                        experiment: Some(k),
                        subject: format!("edge {v}-{u}"),
                        rule: "adjacent Ramsey vertices".into(),
                    });
                }
            }
            let ones = adj[v].iter().filter(|&&u| e.roles[u] == QubitRole::One).count();
            if ones > 1 {
                out.push(Violation {
                    experiment: Some(k),
                    subject: format!("vertex {v}"),
                    rule: format!("Ramsey vertex with {ones} neighbors in |1>"),
                });
            }
        }
        let mut have = e.targets.clone();
        have.sort();
        let mut want = derive_targets(&e.roles, &adj);
        want.sort();
        if have != want {
            out.push(Violation {
                experiment: Some(k),
                subject: "targets".into(),
                rule: format!("targets {have:?} do not follow from roles (expected {want:?})"),
            });
        }
    }
    let measured: std::collections::HashSet<String> = plan
        .experiments
        .iter()
        .flat_map(|e| e.targets.iter().map(target_key))
        .collect();
    let required = (0..graph.n).map(|v| (omega_key(v), format!("vertex {v}"))).chain(
        graph
            .canonical_edges()
            .into_iter()
            .map(|(a, b)| (coupling_key(a, b), format!("edge {a}-{b}"))),
    );
    for (key, subject) in required {
        if !measured.contains(&key) {
            out.push(Violation {
                experiment: None,
                subject,
                rule: format!("{key} is never measured"),
            });
        }
        match plan.coverage.get(&key) {
            None => out.push(Violation {
                experiment: None,
                subject: "coverage".into(),
                rule: format!("{key} missing from the coverage map"),
            }),
            Some(&k) => {
                let ok = plan
                    .experiments
                    .get(k)
                    .is_some_and(|e| e.targets.iter().any(|t| target_key(t) == key));
                if !ok {
                    out.push(Violation {
                        experiment: Some(k),
                        subject: "coverage".into(),
                        rule: format!("coverage map points {key} at an experiment that does not measure it"),
                    });
                }
            }
        }
    }
    out
}

/// Vertex order used by the greedy heuristics: descending degree, ties by index.
fn degree_order(adj: &[Vec<usize>]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..adj.len()).collect();
    order.sort_by(|&a, &b| adj[b].len().cmp(&adj[a].len()).then(a.cmp(&b)));
    order
}

/// Greedy coloring in the given order; colors are independent sets.
fn greedy_coloring(adj: &[Vec<usize>], order: &[usize]) -> Vec<usize> {
    let mut color = vec![usize::MAX; adj.len()];
    for &v in order {
        let used: Vec<usize> = adj[v].iter().map(|&u| color[u]).filter(|&c| c != usize::MAX).collect();
        color[v] = (0..).find(|c| !used.contains(c)).expect("a free color exists");
    }
    color
}

fn color_classes(color: &[usize]) -> Vec<Vec<usize>> {
    let k = color.iter().copied().max().map_or(0, |m| m + 1);
    let mut classes = vec![Vec::new(); k];
    for (v, &c) in color.iter().enumerate() {
        classes[c].push(v);
    }
    classes
}

/// Exact chromatic number by backtracking below `upper` colors.
/// Returns `(coloring, complete)`; `None` means `upper` could not be beaten.
fn exact_coloring(adj: &[Vec<usize>], upper: usize, limit: u64, nodes: &mut u64) -> (Option<Vec<usize>>, bool) {
    let order = degree_order(adj);
    let n = adj.len();
    let mut best: Option<Vec<usize>> = None;
    let mut bound = upper;
    let mut color = vec![usize::MAX; n];
    fn dfs(
        i: usize,
        used: usize,
        order: &[usize],
        adj: &[Vec<usize>],
        color: &mut [usize],
        bound: &mut usize,
        best: &mut Option<Vec<usize>>,
        nodes: &mut u64,
        limit: u64,
    ) -> bool {
        *nodes += 1;
        if *nodes > limit {
            return false;
        }
        if used >= *bound {
            return true;
        }
        if i == order.len() {
            *bound = used;
            *best = Some(color.to_vec());
            return true;
        }
        let v = order[i];
        for c in 0..=used.min(*bound - 1) {
            if c >= *bound {
                break;
            }
            if adj[v].iter().any(|&u| color[u] == c) {
                continue;
            }
            color[v] = c;
            let next_used = used.max(c + 1);
            if !dfs(i + 1, next_used, order, adj, color, bound, best, nodes, limit) {
                color[v] = usize::MAX;
                return false;
            }
            color[v] = usize::MAX;
        }
        true
    }
    if n == 0 {
        return (Some(Vec::new()), true);
    }
    let complete = dfs(0, 0, &order, adj, &mut color, &mut bound, &mut best, nodes, limit);
    (best, complete)
}

fn omega_experiments(adj: &[Vec<usize>], classes: &[Vec<usize>]) -> Vec<ExperimentConfig> {
    classes
        .iter()
        .filter(|c| !c.is_empty())
        .map(|class| {
            let mut roles = vec![QubitRole::Zero; adj.len()];
            for &v in class {
                roles[v] = QubitRole::Ramsey;
            }
            ExperimentConfig::from_roles(roles, adj)
        })
        .collect()
}

fn omega_phase_greedy(graph: &CouplingGraph, adj: &[Vec<usize>]) -> Vec<Vec<usize>> {
    if let Some(col) = graph.bipartition() {
        let classes = color_classes(&col.iter().map(|&c| c as usize).collect::<Vec<_>>());
        return classes.into_iter().filter(|c| !c.is_empty()).collect();
    }
    color_classes(&greedy_coloring(adj, &degree_order(adj)))
}

/// Partial role assignment of one coupling experiment.
#[derive(Clone)]
struct Slate {
    roles: Vec<Option<QubitRole>>,
}

impl Slate {
    fn new(n: usize) -> Self {
        Slate { roles: vec![None; n] }
    }

    /// Whether `v` can be Ramsey with `u` as its single `|1⟩` neighbor.
    fn admits(&self, adj: &[Vec<usize>], v: usize, u: usize) -> bool {
        if self.roles[v].is_some() {
            return false;
        }
        match self.roles[u] {
            Some(QubitRole::One) => {}
            None => {
                if adj[u]
                    .iter()
                    .any(|&w| w != v && self.roles[w] == Some(QubitRole::Ramsey))
                {
                    return false;
                }
            }
            _ => return false,
        }
        adj[v].iter().all(|&w| match self.roles[w] {
            Some(QubitRole::Ramsey) => false,
            Some(QubitRole::One) => w == u,
            _ => true,
        })
    }

    fn assign(&mut self, v: usize, u: usize) {
        self.roles[v] = Some(QubitRole::Ramsey);
        self.roles[u] = Some(QubitRole::One);
    }

    fn finish(&self, adj: &[Vec<usize>]) -> ExperimentConfig {
        let roles = self.roles.iter().map(|r| r.unwrap_or(QubitRole::Zero)).collect();
        ExperimentConfig::from_roles(roles, adj)
    }
}

fn j_phase_greedy(adj: &[Vec<usize>], edges: &[(usize, usize)]) -> Vec<ExperimentConfig> {
    let mut remaining: Vec<(usize, usize)> = edges.to_vec();
    let mut out = Vec::new();
    while !remaining.is_empty() {
        let mut slate = Slate::new(adj.len());
        remaining.retain(|&(a, b)| {
            for (v, u) in [(a, b), (b, a)] {
                if slate.admits(adj, v, u) {
                    slate.assign(v, u);
                    return false;
                }
            }
            true
        });
        out.push(slate.finish(adj));
    }
    out
}

/// Coupling experiments for a bipartite graph with Ramsey qubits drawn from
/// `side`: the opposite side is colored so that no Ramsey qubit sees two
/// same-colored neighbors, and each color class is placed in `|1⟩` in turn.
fn j_phase_lift(adj: &[Vec<usize>], colors: &[u8], side: u8) -> Vec<ExperimentConfig> {
    let n = adj.len();
    let others: Vec<usize> = (0..n).filter(|&v| colors[v] != side && !adj[v].is_empty()).collect();
    let mut conflict = vec![Vec::new(); n];
    for c in (0..n).filter(|&v| colors[v] == side) {
        for (i, &a) in adj[c].iter().enumerate() {
            for &b in &adj[c][i + 1..] {
                conflict[a].push(b);
                conflict[b].push(a);
            }
        }
    }
    for l in &mut conflict {
        l.sort_unstable();
        l.dedup();
    }
    let pairs: Vec<(usize, usize)> = others
        .iter()
        .flat_map(|&a| conflict[a].iter().filter(move |&&b| b > a).map(move |&b| (a, b)))
        .collect();
    let two_colors = CouplingGraph { n, edges: pairs }.bipartition();
    let color: Vec<usize> = match two_colors {
        Some(c) => c.into_iter().map(usize::from).collect(),
        None => {
            let mut order = others.clone();
            order.sort_by(|&a, &b| conflict[b].len().cmp(&conflict[a].len()).then(a.cmp(&b)));
            let mut color = vec![usize::MAX; n];
            for &v in &order {
                let used: Vec<usize> = conflict[v]
                    .iter()
                    .map(|&u| color[u])
                    .filter(|&c| c != usize::MAX)
                    .collect();
                color[v] = (0..).find(|c| !used.contains(c)).expect("free color");
            }
            color
        }
    };
    let k = others.iter().map(|&v| color[v] + 1).max().unwrap_or(0);
    (0..k)
        .map(|c| {
            let mut roles = vec![QubitRole::Zero; n];
            for &v in &others {
                if color[v] == c {
                    roles[v] = QubitRole::One;
                }
            }
            for v in (0..n).filter(|&v| colors[v] == side) {
                let ones = adj[v].iter().filter(|&&u| roles[u] == QubitRole::One).count();
                if ones == 1 {
                    roles[v] = QubitRole::Ramsey;
                }
            }
            ExperimentConfig::from_roles(roles, adj)
        })
        .collect()
}

fn j_phase_heuristic(graph: &CouplingGraph, adj: &[Vec<usize>]) -> Vec<ExperimentConfig> {
    let edges = graph.canonical_edges();
    let mut best = j_phase_greedy(adj, &edges);
    if let Some(colors) = graph.bipartition() {
        for side in [0u8, 1] {
            let cand = j_phase_lift(adj, &colors, side);
            if cand.len() < best.len() {
                best = cand;
            }
        }
    }
    best
}

/// Exact minimum number of coupling experiments below `upper`, by assigning
/// each edge an experiment and an orientation.
fn j_phase_exact(
    adj: &[Vec<usize>],
    edges: &[(usize, usize)],
    upper: usize,
    limit: u64,
    nodes: &mut u64,
) -> (Option<Vec<ExperimentConfig>>, bool) {
    #[allow(clippy::too_many_arguments)]
    fn dfs(
        i: usize,
        edges: &[(usize, usize)],
        adj: &[Vec<usize>],
        slates: &mut Vec<Slate>,
        bound: &mut usize,
        best: &mut Option<Vec<ExperimentConfig>>,
        nodes: &mut u64,
        limit: u64,
    ) -> bool {
        *nodes += 1;
        if *nodes > limit {
            return false;
        }
        if slates.len() >= *bound {
            return true;
        }
        if i == edges.len() {
            *bound = slates.len();
            *best = Some(slates.iter().map(|s| s.finish(adj)).collect());
            return true;
        }
        let (a, b) = edges[i];
        for k in 0..slates.len() {
            for (v, u) in [(a, b), (b, a)] {
                if slates[k].admits(adj, v, u) {
                    let saved = slates[k].clone();
                    slates[k].assign(v, u);
                    let ok = dfs(i + 1, edges, adj, slates, bound, best, nodes, limit);
                    slates[k] = saved;
                    if !ok {
                        return false;
                    }
                }
            }
        }
        if slates.len() + 1 < *bound {
            let mut s = Slate::new(adj.len());
            s.assign(a, b);
            slates.push(s);
            let ok = dfs(i + 1, edges, adj, slates, bound, best, nodes, limit);
            slates.pop();
            if !ok {
                return false;
            }
        }
        true
    }
    if edges.is_empty() {
        return (Some(Vec::new()), true);
    }
    let mut bound = upper;
    let mut best = None;
    let mut slates = Vec::new();
    let complete = dfs(0, edges, adj, &mut slates, &mut bound, &mut best, nodes, limit);
    (best, complete)
}

/// Role assignments covering every frequency and coupling of `graph`.
pub fn tile(graph: &CouplingGraph, effort: TilingEffort) -> Result<TilingPlan> {
    graph.validate()?;
    let adj = graph.adjacency();
    let omega_classes = omega_phase_greedy(graph, &adj);
    let mut omega = omega_experiments(&adj, &omega_classes);
    let mut coupling = j_phase_heuristic(graph, &adj);
    let mut complete = None;
    if let TilingEffort::Exhaustive { limit } = effort {
        let mut nodes = 0u64;
        let (better, done_w) = exact_coloring(&adj, omega.len(), limit, &mut nodes);
        if let Some(col) = better {
            omega = omega_experiments(&adj, &color_classes(&col));
        }
        let mut nodes_j = 0u64;
        let (better, done_j) = j_phase_exact(&adj, &graph.canonical_edges(), coupling.len(), limit, &mut nodes_j);
        if let Some(exps) = better {
            coupling = exps;
        }
        if !(done_w && done_j) {
            log::warn!("exhaustive tiling hit the node limit of {limit}; keeping the best plan found");
        }
        complete = Some(done_w && done_j);
    }
    omega.extend(coupling);
    let mut plan = TilingPlan::from_experiments(omega);
    plan.exhaustive_complete = complete;
    Ok(plan)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_and_reject() {
        let g = load_graph(r#"{"n": 3, "edges": [[0,1],[1,2]]}"#).unwrap();
        assert_eq!(g, CouplingGraph::path(3).unwrap());
        assert!(matches!(
            load_graph(r#"{"n": 2, "edges": [[0,0]]}"#),
            Err(Error::Parse { .. })
        ));
        assert!(matches!(
            load_graph(r#"{"n": 2, "edges": [[0,1],[1,0]]}"#),
            Err(Error::Parse { .. })
        ));
        assert!(matches!(
            load_graph(r#"{"n": 2, "edges": [[0,2]]}"#),
            Err(Error::Parse { .. })
        ));
        match load_graph("{\"n\": 2,\n \"edges\": [[0,1]\n") {
            Err(Error::Parse { location, .. }) => assert!(location.starts_with("line 3")),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn heavy_hex_shape() {
        for d in 2..=4 {
            let g = CouplingGraph::heavy_hex(d).unwrap();
            assert!(g.bipartition().is_some());
            assert!(g.max_degree() <= 3);
            let deg: Vec<usize> = g.adjacency().iter().map(Vec::len).collect();
            assert!(deg.iter().all(|&k| k == 2 || k == 3), "d={d}");
            assert!(deg.contains(&3));
        }
    }

    #[test]
    fn paths_and_heavy_hex_tile_in_four() {
        for n in 4..=30 {
            let g = CouplingGraph::path(n).unwrap();
            let p = tile(&g, TilingEffort::Greedy).unwrap();
            assert_eq!(p.len(), 4, "n={n}");
            assert!(validate_plan(&g, &p).is_empty());
        }
        let g = CouplingGraph::heavy_hex(3).unwrap();
        let p = tile(&g, TilingEffort::Greedy).unwrap();
        assert_eq!(
            p.len(),
            4,
            "{:?}",
            p.experiments.iter().map(|e| e.targets.len()).collect::<Vec<_>>()
        );
        assert!(validate_plan(&g, &p).is_empty());
    }

    #[test]
    fn short_paths_and_star() {
        for n in 2..=3 {
            let g = CouplingGraph::path(n).unwrap();
            let p = tile(
                &g,
                TilingEffort::Exhaustive {
                    limit: DEFAULT_NODE_LIMIT,
                },
            )
            .unwrap();
            assert_eq!(p.len(), 3, "n={n}");
        }
        let star = CouplingGraph::new(5, (1..5).map(|i| (0, i)).collect()).unwrap();
        let p = tile(
            &star,
            TilingEffort::Exhaustive {
                limit: DEFAULT_NODE_LIMIT,
            },
        )
        .unwrap();
        assert_eq!(p.len(), 3);
        assert_eq!(p.exhaustive_complete, Some(true));
        assert!(validate_plan(&star, &p).is_empty());
    }

    #[test]
    fn seeded_defects_are_reported() {
        let g = CouplingGraph::path(3).unwrap();
        let mut p = tile(&g, TilingEffort::Greedy).unwrap();
        let adj = g.adjacency();
        p.experiments.push(ExperimentConfig::from_roles(
            vec![QubitRole::Ramsey, QubitRole::Ramsey, QubitRole::Zero],
            &adj,
        ));
        let v = validate_plan(&g, &p);
        assert_eq!(v.len(), 1, "{v:?}");
        assert!(v[0].rule.contains("adjacent"));

        let mut p = tile(&g, TilingEffort::Greedy).unwrap();
        let k = p.coverage[&coupling_key(1, 2)];
        p.experiments[k].roles[2] = QubitRole::Zero;
        p.experiments[k] = ExperimentConfig::from_roles(p.experiments[k].roles.clone(), &adj);
        p.coverage.remove(&coupling_key(1, 2));
        let v = validate_plan(&g, &p);
        assert!(v.iter().any(|x| x.rule.contains("never measured")), "{v:?}");
    }

    #[test]
    fn random_graphs_validate() {
        for s in 0..30 {
            let g = CouplingGraph::random(12, 0.25, s).unwrap();
            for effort in [TilingEffort::Greedy, TilingEffort::Exhaustive { limit: 20_000 }] {
                let p = tile(&g, effort).unwrap();
                assert!(validate_plan(&g, &p).is_empty(), "seed {s}");
            }
        }
    }
}
