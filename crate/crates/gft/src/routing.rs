//! Training-path construction over the disparity graph.
//!
//! Four strategies: greedy nearest-neighbor from the target, per-source
//! Dijkstra shortest paths, Kruskal MST tree paths, and exhaustive
//! enumeration scored by the generalization bound. Paths list domains in
//! training order: the far end first, the domain adjacent to the target
//! last. Every tie anywhere is broken deterministically.

use std::cmp::Ordering;
use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::bound::{gft_bound_on_graph, BoundBreakdown, BoundParams};
use crate::error::{Error, Result};
use crate::graph::DisparityGraph;

/// An ordered training route: `domains` are fine-tuned first-to-last, then
/// the model is evaluated on `terminal`. `weight` is Δ(ρ), the sum of edge
/// weights along `(domains..., terminal)`; `magnitude` the total training
/// samples over `domains`; `kappa` the domain count.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Path {
    pub domains: Vec<String>,
    pub terminal: String,
    pub weight: f64,
    pub magnitude: u64,
    pub kappa: usize,
}

impl Path {
    /// Builds a path from a domain sequence, validating every consecutive
    /// pair (including the hop onto the target) against the graph's edges
    /// and deriving weight, magnitude, and kappa.
    pub fn trace(domains: Vec<String>, graph: &DisparityGraph) -> Result<Path> {
        if domains.is_empty() {
            return Err(Error::NoCandidatePaths);
        }
        let target = graph.target_id().to_string();
        let mut seen = std::collections::BTreeSet::new();
        for id in &domains {
            if *id == target {
                return Err(Error::InvalidArgument(
                    "the target cannot appear among a path's training domains".into(),
                ));
            }
            graph.index_of(id)?;
            if !seen.insert(id.clone()) {
                return Err(Error::InvalidArgument(format!(
                    "domain {id:?} repeats on the path"
                )));
            }
        }
        let mut weight = 0.0;
        for pair in domains.windows(2) {
            weight += graph.weight_between(&pair[0], &pair[1]).ok_or_else(|| {
                Error::InvalidArgument(format!(
                    "path step {:?}–{:?} is not a graph edge",
                    pair[0], pair[1]
                ))
            })?;
        }
        let last = domains.last().expect("non-empty domains");
        weight += graph.weight_between(last, &target).ok_or_else(|| {
            Error::InvalidArgument(format!(
                "final step {last:?}–{target:?} is not a graph edge"
            ))
        })?;
        let mut magnitude = 0;
        for id in &domains {
            magnitude += graph.size_of(id)?;
        }
        Ok(Path {
            kappa: domains.len(),
            terminal: target,
            weight,
            magnitude,
            domains,
        })
    }

    /// First domain trained, the far end of the route.
    pub fn start(&self) -> &str {
        &self.domains[0]
    }
}

/// Starting at the target, repeatedly hops to the closest unvisited vertex
/// until every source has been visited, then reverses the visitation order
/// into a training path. Ties go to the lexicographically smallest id.
///
/// Intended for the complete graph; on a pruned graph the walk can strand
/// itself with sources left over, which is an error.
pub fn route_nearest_neighbor(graph: &DisparityGraph) -> Result<Path> {
    let adj = graph.adjacency();
    let n = graph.ids.len();
    let target = n - 1;
    let mut visited = vec![false; n];
    visited[target] = true;
    let mut order = Vec::with_capacity(n - 1);
    let mut current = target;
    while order.len() < n - 1 {
        let next = adj[current]
            .iter()
            .filter(|&&(v, _)| !visited[v])
            .min_by(|(u, wu), (v, wv)| {
                wu.total_cmp(wv)
                    .then_with(|| graph.ids[*u].cmp(&graph.ids[*v]))
            })
            .map(|&(v, _)| v);
        match next {
            Some(v) => {
                visited[v] = true;
                order.push(v);
                current = v;
            }
            None => {
                return Err(Error::NearestNeighborDeadEnd {
                    at: graph.ids[current].clone(),
                    unvisited: (n - 1) - order.len(),
                });
            }
        }
    }
    order.reverse();
    Path::trace(order.into_iter().map(|v| graph.ids[v].clone()).collect(), graph)
}

/// Dijkstra key: total distance, then hop count, then the id sequence from
/// the keyed vertex to the target. Every edge strictly increases the key
/// (weights are nonnegative and hops always grow), so settling in key order
/// yields the unique tie-broken optimum per vertex.
#[derive(Clone)]
struct DijkstraKey {
    dist: f64,
    hops: usize,
    /// Vertex indices from this vertex (inclusive) to the target (inclusive).
    seq: Vec<usize>,
}

fn compare_keys(a: &DijkstraKey, b: &DijkstraKey, ids: &[String]) -> Ordering {
    a.dist
        .total_cmp(&b.dist)
        .then(a.hops.cmp(&b.hops))
        .then_with(|| {
            for (&u, &v) in a.seq.iter().zip(&b.seq) {
                match ids[u].cmp(&ids[v]) {
                    Ordering::Equal => continue,
                    other => return other,
                }
            }
            Ordering::Equal
        })
}

/// Minimum-weight simple path from each reachable source to the target.
/// Equal-weight alternatives prefer fewer hops, then the lexicographically
/// smallest id sequence. Unreachable sources yield no entry.
pub fn route_shortest_paths(graph: &DisparityGraph) -> Result<Vec<Path>> {
    let adj = graph.adjacency();
    let n = graph.ids.len();
    let target = n - 1;
    let mut best: Vec<Option<DijkstraKey>> = vec![None; n];
    let mut settled = vec![false; n];
    best[target] = Some(DijkstraKey {
        dist: 0.0,
        hops: 0,
        seq: vec![target],
    });

    loop {
        let u = (0..n)
            .filter(|&v| !settled[v] && best[v].is_some())
            .min_by(|&u, &v| {
                compare_keys(
                    best[u].as_ref().expect("filtered"),
                    best[v].as_ref().expect("filtered"),
                    &graph.ids,
                )
            });
        let Some(u) = u else { break };
        settled[u] = true;
        let key_u = best[u].clone().expect("settled key");
        for &(v, w) in &adj[u] {
            if settled[v] {
                continue;
            }
            let mut seq = Vec::with_capacity(key_u.seq.len() + 1);
            seq.push(v);
            seq.extend_from_slice(&key_u.seq);
            let candidate = DijkstraKey {
                dist: key_u.dist + w,
                hops: key_u.hops + 1,
                seq,
            };
            let better = match &best[v] {
                None => true,
                Some(existing) => {
                    compare_keys(&candidate, existing, &graph.ids) == Ordering::Less
                }
            };
            if better {
                best[v] = Some(candidate);
            }
        }
    }

    let mut paths = Vec::new();
    for (v, key) in best.iter().enumerate() {
        if v == target {
            continue;
        }
        if let Some(key) = key {
            let domains = key.seq[..key.seq.len() - 1]
                .iter()
                .map(|&u| graph.ids[u].clone())
                .collect();
            paths.push(Path::trace(domains, graph)?);
        }
    }
    Ok(paths)
}

/// Disjoint-set forest with path compression for Kruskal.
struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    fn new(n: usize) -> UnionFind {
        UnionFind {
            parent: (0..n).collect(),
        }
    }

    fn find(&mut self, x: usize) -> usize {
        if self.parent[x] != x {
            let root = self.find(self.parent[x]);
            self.parent[x] = root;
        }
        self.parent[x]
    }

    fn union(&mut self, a: usize, b: usize) -> bool {
        let ra = self.find(a);
        let rb = self.find(b);
        if ra == rb {
            return false;
        }
        self.parent[ra] = rb;
        true
    }
}

/// Kruskal minimum spanning forest; equal-weight edges are processed in
/// lexicographic id-pair order. Returns MST edges as index pairs.
fn kruskal_edges(graph: &DisparityGraph) -> Vec<(usize, usize, f64)> {
    let index: BTreeMap<&str, usize> = graph
        .ids
        .iter()
        .enumerate()
        .map(|(i, id)| (id.as_str(), i))
        .collect();
    let mut edges: Vec<(&str, &str, f64)> = graph
        .edges
        .iter()
        .map(|e| {
            if e.a <= e.b {
                (e.a.as_str(), e.b.as_str(), e.weight)
            } else {
                (e.b.as_str(), e.a.as_str(), e.weight)
            }
        })
        .collect();
    edges.sort_by(|(a1, b1, w1), (a2, b2, w2)| {
        w1.total_cmp(w2).then(a1.cmp(a2)).then(b1.cmp(b2))
    });
    let mut dsu = UnionFind::new(graph.ids.len());
    let mut tree = Vec::new();
    for (a, b, w) in edges {
        let (i, j) = (index[a], index[b]);
        if dsu.union(i, j) {
            tree.push((i, j, w));
        }
    }
    tree
}

/// For every source in the target's MST component, the unique tree path
/// from that source to the target, in graph source order.
pub fn route_mst(graph: &DisparityGraph) -> Result<Vec<Path>> {
    let n = graph.ids.len();
    let target = n - 1;
    let mut tree_adj = vec![Vec::new(); n];
    for (i, j, _) in kruskal_edges(graph) {
        tree_adj[i].push(j);
        tree_adj[j].push(i);
    }
    // Parent pointers toward the target within its component.
    let mut parent = vec![usize::MAX; n];
    parent[target] = target;
    let mut queue = std::collections::VecDeque::from([target]);
    while let Some(u) = queue.pop_front() {
        for &v in &tree_adj[u] {
            if parent[v] == usize::MAX {
                parent[v] = u;
                queue.push_back(v);
            }
        }
    }
    let mut paths = Vec::new();
    for v in 0..n - 1 {
        if parent[v] == usize::MAX {
            continue;
        }
        let mut domains = Vec::new();
        let mut u = v;
        while u != target {
            domains.push(graph.ids[u].clone());
            u = parent[u];
        }
        paths.push(Path::trace(domains, graph)?);
    }
    Ok(paths)
}

/// Picks the candidate with the largest magnitude; ties fall through to
/// smaller weight, then fewer hops, then the lexicographically smallest
/// domain sequence.
pub fn select_optimal(candidates: &[Path]) -> Result<Path> {
    candidates
        .iter()
        .min_by(|a, b| prefer(a, b))
        .cloned()
        .ok_or(Error::NoCandidatePaths)
}

fn prefer(a: &Path, b: &Path) -> Ordering {
    b.magnitude
        .cmp(&a.magnitude)
        .then(a.weight.total_cmp(&b.weight))
        .then(a.kappa.cmp(&b.kappa))
        .then_with(|| a.domains.cmp(&b.domains))
}

const UNCAPPED_ENUMERATION_LIMIT: usize = 10;

/// Every simple path through the graph that ends at the target, in
/// depth-first order with neighbors taken in id order. `kappa_cap` bounds
/// the number of domains per path; without a cap, graphs with more than
/// ten sources are refused (the candidate count grows factorially).
pub fn enumerate_paths(
    graph: &DisparityGraph,
    kappa_cap: Option<usize>,
) -> Result<Vec<Path>> {
    let sources = graph.ids.len() - 1;
    if kappa_cap.is_none() && sources > UNCAPPED_ENUMERATION_LIMIT {
        return Err(Error::ExhaustiveSearchTooLarge {
            sources,
            limit: UNCAPPED_ENUMERATION_LIMIT,
        });
    }
    let adj = graph.adjacency();
    let target = graph.ids.len() - 1;
    let mut walk = vec![target];
    let mut visited = vec![false; graph.ids.len()];
    visited[target] = true;
    let mut found: Vec<Vec<usize>> = Vec::new();

    fn dfs(
        u: usize,
        adj: &[Vec<(usize, f64)>],
        walk: &mut Vec<usize>,
        visited: &mut [bool],
        found: &mut Vec<Vec<usize>>,
        cap: Option<usize>,
    ) {
        for &(v, _) in &adj[u] {
            if visited[v] || cap.is_some_and(|c| walk.len() > c) {
                continue;
            }
            walk.push(v);
            visited[v] = true;
            found.push(walk[1..].iter().rev().copied().collect());
            dfs(v, adj, walk, visited, found, cap);
            visited[v] = false;
            walk.pop();
        }
    }
    dfs(target, &adj, &mut walk, &mut visited, &mut found, kappa_cap);

    found
        .into_iter()
        .map(|indices| {
            Path::trace(
                indices.into_iter().map(|v| graph.ids[v].clone()).collect(),
                graph,
            )
        })
        .collect()
}

/// Scores each candidate with the six-term bound, using the first-trained
/// domain's entry of `eps1` as the empirical-loss term.
pub fn score_paths(
    graph: &DisparityGraph,
    candidates: &[Path],
    params: &BoundParams,
    eps1: &BTreeMap<String, f64>,
) -> Result<Vec<BoundBreakdown>> {
    candidates
        .iter()
        .map(|path| {
            let eps = *eps1.get(path.start()).ok_or_else(|| {
                Error::InvalidArgument(format!(
                    "no first-stage loss entry for starting domain {:?}",
                    path.start()
                ))
            })?;
            gft_bound_on_graph(path, graph, params, eps)
        })
        .collect()
}

/// Exhausts every simple path to the target and returns the one whose
/// bound value is smallest. Bound ties fall through to the
/// [`select_optimal`] preference order.
pub fn route_exhaustive_bound_min(
    graph: &DisparityGraph,
    params: &BoundParams,
    eps1: &BTreeMap<String, f64>,
    kappa_cap: Option<usize>,
) -> Result<Path> {
    let candidates = enumerate_paths(graph, kappa_cap)?;
    if candidates.is_empty() {
        return Err(Error::NoCandidatePaths);
    }
    let scored = score_paths(graph, &candidates, params, eps1)?;
    let best_total = scored
        .iter()
        .map(|b| b.total)
        .fold(f64::INFINITY, f64::min);
    let tied: Vec<Path> = scored
        .iter()
        .filter(|b| b.total == best_total)
        .map(|b| b.path.clone())
        .collect();
    select_optimal(&tied)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{build_graph, Edge};
    use crate::otdist::DisparityMatrix;

    fn sizes_all(ids: &[&str], n: u64) -> BTreeMap<String, u64> {
        ids.iter().map(|id| (id.to_string(), n)).collect()
    }

    fn matrix_from_upper(ids: &[&str], upper: &[f64]) -> DisparityMatrix {
        let k1 = ids.len();
        let mut values = vec![0.0; k1 * k1];
        let mut next = upper.iter();
        for i in 0..k1 {
            for j in (i + 1)..k1 {
                let v = *next.next().unwrap();
                values[i * k1 + j] = v;
                values[j * k1 + i] = v;
            }
        }
        DisparityMatrix::new(ids.iter().map(|s| s.to_string()).collect(), values).unwrap()
    }

    fn complete(ids: &[&str], upper: &[f64], n: u64) -> DisparityGraph {
        build_graph(&matrix_from_upper(ids, upper), &sizes_all(ids, n), None).unwrap()
    }

    #[test]
    fn path_trace_derives_weight_and_magnitude() {
        // upper order: (s1,s2) (s1,t) (s2,t)
        let graph = complete(&["s1", "s2", "target"], &[5.0, 1.0, 2.0], 10);
        let path = Path::trace(vec!["s2".into(), "s1".into()], &graph).unwrap();
        assert_eq!(path.weight, 6.0);
        assert_eq!(path.magnitude, 20);
        assert_eq!(path.kappa, 2);
        assert_eq!(path.terminal, "target");
    }

    #[test]
    fn path_trace_rejects_broken_routes() {
        let graph = complete(&["s1", "s2", "target"], &[5.0, 1.0, 2.0], 10);
        assert!(Path::trace(vec![], &graph).is_err());
        assert!(Path::trace(vec!["s1".into(), "s1".into()], &graph).is_err());
        assert!(Path::trace(vec!["target".into()], &graph).is_err());
        assert!(Path::trace(vec!["zzz".into()], &graph).is_err());
        let pruned = build_graph(
            &matrix_from_upper(&["s1", "s2", "target"], &[5.0, 1.0, 2.0]),
            &sizes_all(&["s1", "s2", "target"], 10),
            Some(3.0),
        )
        .unwrap();
        // s1–s2 edge (5.0) was pruned
        assert!(Path::trace(vec!["s1".into(), "s2".into()], &pruned).is_err());
    }

    #[test]
    fn nearest_neighbor_single_source() {
        let graph = complete(&["s1", "target"], &[0.4], 10);
        let path = route_nearest_neighbor(&graph).unwrap();
        assert_eq!(path.domains, vec!["s1"]);
    }

    #[test]
    fn nearest_neighbor_walks_greedily_and_reverses() {
        // T–S1 = 1, T–S2 = 2, S1–S2 = 5: visit T, S1, S2; train [S2, S1]
        let graph = complete(&["s1", "s2", "target"], &[5.0, 1.0, 2.0], 10);
        let path = route_nearest_neighbor(&graph).unwrap();
        assert_eq!(path.domains, vec!["s2", "s1"]);
        assert_eq!(path.weight, 6.0);
    }

    #[test]
    fn nearest_neighbor_breaks_ties_lexicographically() {
        let graph = complete(&["b", "a", "target"], &[1.0, 0.5, 0.5], 10);
        let path = route_nearest_neighbor(&graph).unwrap();
        // both sources sit at 0.5 from the target; "a" is visited first
        assert_eq!(path.domains, vec!["b", "a"]);
    }

    #[test]
    fn nearest_neighbor_dead_end_is_reported() {
        let ids: Vec<String> = vec!["s1".into(), "s2".into(), "target".into()];
        let graph = DisparityGraph::from_parts(
            ids,
            sizes_all(&["s1", "s2", "target"], 10),
            vec![Edge {
                a: "s1".into(),
                b: "target".into(),
                weight: 0.2,
            }],
            Some(0.5),
        )
        .unwrap();
        let err = route_nearest_neighbor(&graph).unwrap_err();
        assert!(
            matches!(err, Error::NearestNeighborDeadEnd { ref at, unvisited: 1 } if at == "s1"),
            "got {err}"
        );
    }

    #[test]
    fn shortest_paths_take_detours_when_cheaper() {
        // upper order: (s1,s2)=1, (s1,t)=1, (s2,t)=3
        let graph = complete(&["s1", "s2", "target"], &[1.0, 1.0, 3.0], 10);
        let paths = route_shortest_paths(&graph).unwrap();
        assert_eq!(paths.len(), 2);
        let s2 = paths.iter().find(|p| p.start() == "s2").unwrap();
        assert_eq!(s2.domains, vec!["s2", "s1"]);
        assert_eq!(s2.weight, 2.0);
        let s1 = paths.iter().find(|p| p.start() == "s1").unwrap();
        assert_eq!(s1.domains, vec!["s1"]);
        assert_eq!(s1.weight, 1.0);
    }

    #[test]
    fn shortest_paths_prefer_fewer_hops_then_lexicographic() {
        // s2 can reach the target directly at 2.0 or via s1 at 1.0 + 1.0
        let graph = complete(&["s1", "s2", "target"], &[1.0, 1.0, 2.0], 10);
        let paths = route_shortest_paths(&graph).unwrap();
        let s2 = paths.iter().find(|p| p.start() == "s2").unwrap();
        assert_eq!(s2.domains, vec!["s2"], "direct hop has fewer hops");

        // two equal-weight equal-hop detours: via "a" or via "b"
        let ids = ["a", "b", "s", "target"];
        let edges = vec![
            Edge { a: "s".into(), b: "a".into(), weight: 1.0 },
            Edge { a: "s".into(), b: "b".into(), weight: 1.0 },
            Edge { a: "a".into(), b: "target".into(), weight: 1.0 },
            Edge { a: "b".into(), b: "target".into(), weight: 1.0 },
        ];
        let graph = DisparityGraph::from_parts(
            ids.iter().map(|s| s.to_string()).collect(),
            sizes_all(&ids, 10),
            edges,
            None,
        )
        .unwrap();
        let paths = route_shortest_paths(&graph).unwrap();
        let s = paths.iter().find(|p| p.start() == "s").unwrap();
        assert_eq!(s.domains, vec!["s", "a"]);
    }

    #[test]
    fn shortest_paths_skip_unreachable_sources() {
        let ids: Vec<String> = vec!["s1".into(), "s2".into(), "target".into()];
        let graph = DisparityGraph::from_parts(
            ids,
            sizes_all(&["s1", "s2", "target"], 10),
            vec![Edge {
                a: "s1".into(),
                b: "target".into(),
                weight: 0.2,
            }],
            Some(0.5),
        )
        .unwrap();
        let paths = route_shortest_paths(&graph).unwrap();
        assert_eq!(paths.len(), 1);
        assert_eq!(paths[0].start(), "s1");
    }

    #[test]
    fn mst_paths_follow_the_tree() {
        // triangle: T–S1 = 1, T–S2 = 2, S1–S2 = 3 → MST keeps both T edges
        let graph = complete(&["s1", "s2", "target"], &[3.0, 1.0, 2.0], 10);
        let paths = route_mst(&graph).unwrap();
        let s2 = paths.iter().find(|p| p.start() == "s2").unwrap();
        assert_eq!(s2.domains, vec!["s2"]);
        let s1 = paths.iter().find(|p| p.start() == "s1").unwrap();
        assert_eq!(s1.domains, vec!["s1"]);
    }

    #[test]
    fn mst_goes_through_hubs_when_cheaper() {
        // S2's direct edge is expensive; tree path is S2–S1–T
        let graph = complete(&["s1", "s2", "target"], &[1.0, 1.0, 3.0], 10);
        let paths = route_mst(&graph).unwrap();
        let s2 = paths.iter().find(|p| p.start() == "s2").unwrap();
        assert_eq!(s2.domains, vec!["s2", "s1"]);
    }

    #[test]
    fn mst_single_source() {
        let graph = complete(&["s1", "target"], &[0.4], 10);
        let paths = route_mst(&graph).unwrap();
        assert_eq!(paths.len(), 1);
        assert_eq!(paths[0].domains, vec!["s1"]);
    }

    #[test]
    fn kruskal_tie_break_is_lexicographic() {
        // all weights equal; edges should be taken in id-pair order:
        // (a,b), (a,target), (b,target) — the last is a cycle and skipped
        let graph = complete(&["a", "b", "target"], &[1.0, 1.0, 1.0], 10);
        let tree = kruskal_edges(&graph);
        let named: Vec<(String, String)> = tree
            .iter()
            .map(|&(i, j, _)| (graph.ids[i].clone(), graph.ids[j].clone()))
            .collect();
        assert_eq!(
            named,
            vec![
                ("a".to_string(), "b".to_string()),
                ("a".to_string(), "target".to_string())
            ]
        );
    }

    #[test]
    fn select_optimal_orders_by_magnitude_weight_hops() {
        let mk = |domains: &[&str], weight: f64, magnitude: u64| Path {
            domains: domains.iter().map(|s| s.to_string()).collect(),
            terminal: "target".into(),
            weight,
            magnitude,
            kappa: domains.len(),
        };
        let picked = select_optimal(&[
            mk(&["s1"], 1.0, 100),
            mk(&["s2", "s1"], 2.0, 300),
            mk(&["s3", "s1"], 1.5, 300),
        ])
        .unwrap();
        assert_eq!(picked.domains, vec!["s3", "s1"]);

        let single = vec![mk(&["s1"], 1.0, 100)];
        assert_eq!(select_optimal(&single).unwrap().domains, vec!["s1"]);

        let equal_magnitudes = vec![
            mk(&["s1"], 0.9, 100),
            mk(&["s2"], 0.4, 100),
            mk(&["s3"], 0.7, 100),
        ];
        assert_eq!(
            select_optimal(&equal_magnitudes).unwrap().domains,
            vec!["s2"]
        );
        assert!(matches!(
            select_optimal(&[]),
            Err(Error::NoCandidatePaths)
        ));
    }

    #[test]
    fn enumeration_lists_every_simple_path() {
        let graph = complete(&["s1", "s2", "target"], &[0.3, 0.1, 0.2], 10);
        let paths = enumerate_paths(&graph, None).unwrap();
        let domain_lists: Vec<Vec<String>> =
            paths.iter().map(|p| p.domains.clone()).collect();
        assert_eq!(domain_lists.len(), 4);
        for expected in [
            vec!["s1".to_string()],
            vec!["s2".to_string()],
            vec!["s1".to_string(), "s2".to_string()],
            vec!["s2".to_string(), "s1".to_string()],
        ] {
            assert!(domain_lists.contains(&expected), "missing {expected:?}");
        }
    }

    #[test]
    fn enumeration_respects_kappa_cap_and_size_guard() {
        let graph = complete(&["s1", "s2", "target"], &[0.3, 0.1, 0.2], 10);
        let capped = enumerate_paths(&graph, Some(1)).unwrap();
        assert_eq!(capped.len(), 2);

        let ids: Vec<&str> = (0..11)
            .map(|i| Box::leak(format!("s{i:02}").into_boxed_str()) as &str)
            .chain(["target"])
            .collect();
        let edge_count = ids.len() * (ids.len() - 1) / 2;
        let graph = complete(&ids, &vec![0.5; edge_count], 10);
        let err = enumerate_paths(&graph, None).unwrap_err();
        assert!(matches!(
            err,
            Error::ExhaustiveSearchTooLarge { sources: 11, limit: 10 }
        ));
        assert!(enumerate_paths(&graph, Some(2)).is_ok());
    }

    #[test]
    fn exhaustive_routing_matches_direct_rescoring() {
        let graph = complete(&["s1", "s2", "target"], &[0.3, 0.45, 0.2], 100);
        let params = BoundParams::default();
        let eps1: BTreeMap<String, f64> =
            [("s1".to_string(), 0.15), ("s2".to_string(), 0.05)].into();
        let winner = route_exhaustive_bound_min(&graph, &params, &eps1, None).unwrap();

        let candidates = enumerate_paths(&graph, None).unwrap();
        let scored = score_paths(&graph, &candidates, &params, &eps1).unwrap();
        let best = scored
            .iter()
            .min_by(|a, b| a.total.total_cmp(&b.total))
            .unwrap();
        assert_eq!(winner.domains, best.path.domains);
    }

    #[test]
    fn larger_domains_never_worsen_the_chosen_bound() {
        let upper = [0.3, 0.45, 0.2];
        let params = BoundParams::default();
        let eps1: BTreeMap<String, f64> =
            [("s1".to_string(), 0.1), ("s2".to_string(), 0.1)].into();
        let mut totals = Vec::new();
        for n in [20u64, 200] {
            let graph = complete(&["s1", "s2", "target"], &upper, n);
            let winner = route_exhaustive_bound_min(&graph, &params, &eps1, None).unwrap();
            let scored = score_paths(&graph, &[winner], &params, &eps1).unwrap();
            totals.push(scored[0].total);
        }
        assert!(totals[1] <= totals[0]);
    }

    #[test]
    fn missing_eps1_entry_is_an_error() {
        let graph = complete(&["s1", "s2", "target"], &[0.3, 0.45, 0.2], 100);
        let eps1: BTreeMap<String, f64> = [("s1".to_string(), 0.1)].into();
        let err =
            route_exhaustive_bound_min(&graph, &BoundParams::default(), &eps1, None).unwrap_err();
        assert!(matches!(err, Error::InvalidArgument(_)));
    }

    #[test]
    fn strategies_are_deterministic() {
        let graph = complete(&["s1", "s2", "s3", "target"], &[0.3, 0.8, 0.2, 0.5, 0.9, 0.4], 50);
        assert_eq!(
            route_nearest_neighbor(&graph).unwrap(),
            route_nearest_neighbor(&graph).unwrap()
        );
        assert_eq!(
            route_shortest_paths(&graph).unwrap(),
            route_shortest_paths(&graph).unwrap()
        );
        assert_eq!(route_mst(&graph).unwrap(), route_mst(&graph).unwrap());
    }

    #[test]
    fn scaling_weights_leaves_shortest_path_routes_unchanged() {
        let ids = ["s1", "s2", "s3", "target"];
        let upper = [0.31, 0.84, 0.27, 0.55, 0.92, 0.48];
        let base = complete(&ids, &upper, 50);
        let scaled_upper: Vec<f64> = upper.iter().map(|w| w * 7.5).collect();
        let scaled = complete(&ids, &scaled_upper, 50);
        let base_routes: Vec<Vec<String>> = route_shortest_paths(&base)
            .unwrap()
            .into_iter()
            .map(|p| p.domains)
            .collect();
        let scaled_routes: Vec<Vec<String>> = route_shortest_paths(&scaled)
            .unwrap()
            .into_iter()
            .map(|p| p.domains)
            .collect();
        assert_eq!(base_routes, scaled_routes);
    }
}
