//! The disparity graph: domains as vertices, estimated Wasserstein
//! distances as edge weights, with optional threshold pruning.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::otdist::DisparityMatrix;

/// Undirected weighted edge; endpoints are stored in matrix id order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    pub a: String,
    pub b: String,
    pub weight: f64,
}

/// G = (V, E) over the K sources plus the target (always the last id).
///
/// Weights are copied from the disparity matrix verbatim, never
/// recomputed. The target's size is carried along for bookkeeping but
/// plays no role in path magnitudes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DisparityGraph {
    pub ids: Vec<String>,
    pub sizes: BTreeMap<String, u64>,
    pub edges: Vec<Edge>,
    pub tau: Option<f64>,
}

impl DisparityGraph {
    /// Assembles a graph directly from parts, validating vertex and edge
    /// consistency. `build_graph` is the usual entry point; this exists for
    /// hand-constructed graphs.
    pub fn from_parts(
        ids: Vec<String>,
        sizes: BTreeMap<String, u64>,
        edges: Vec<Edge>,
        tau: Option<f64>,
    ) -> Result<DisparityGraph> {
        if ids.len() < 2 {
            return Err(Error::InvalidArgument(
                "a disparity graph needs a target and at least one source".into(),
            ));
        }
        let vertex_set: BTreeSet<&String> = ids.iter().collect();
        if vertex_set.len() != ids.len() {
            return Err(Error::InvalidArgument("duplicate vertex ids".into()));
        }
        let target = ids.last().expect("non-empty ids");
        for id in &ids {
            if id != target && !sizes.contains_key(id) {
                return Err(Error::MissingSize(id.clone()));
            }
        }
        let mut seen_pairs = BTreeSet::new();
        for edge in &edges {
            if !vertex_set.contains(&edge.a) {
                return Err(Error::UnknownDomain(edge.a.clone()));
            }
            if !vertex_set.contains(&edge.b) {
                return Err(Error::UnknownDomain(edge.b.clone()));
            }
            if edge.a == edge.b {
                return Err(Error::InvalidArgument(format!(
                    "self-loop on {:?}",
                    edge.a
                )));
            }
            if !(edge.weight >= 0.0 && edge.weight.is_finite()) {
                return Err(Error::InvalidArgument(format!(
                    "edge {:?}–{:?} has weight {}",
                    edge.a, edge.b, edge.weight
                )));
            }
            let key = if edge.a <= edge.b {
                (edge.a.clone(), edge.b.clone())
            } else {
                (edge.b.clone(), edge.a.clone())
            };
            if !seen_pairs.insert(key) {
                return Err(Error::InvalidArgument(format!(
                    "duplicate edge {:?}–{:?}",
                    edge.a, edge.b
                )));
            }
        }
        Ok(DisparityGraph {
            ids,
            sizes,
            edges,
            tau,
        })
    }

    /// The target vertex id (last by construction).
    pub fn target_id(&self) -> &str {
        self.ids.last().expect("non-empty ids")
    }

    pub fn source_ids(&self) -> &[String] {
        &self.ids[..self.ids.len() - 1]
    }

    pub fn index_of(&self, id: &str) -> Result<usize> {
        self.ids
            .iter()
            .position(|x| x == id)
            .ok_or_else(|| Error::UnknownDomain(id.to_string()))
    }

    pub fn size_of(&self, id: &str) -> Result<u64> {
        self.sizes
            .get(id)
            .copied()
            .ok_or_else(|| Error::MissingSize(id.to_string()))
    }

    /// Index-based adjacency lists, neighbors in `ids` order.
    pub fn adjacency(&self) -> Vec<Vec<(usize, f64)>> {
        let mut adj = vec![Vec::new(); self.ids.len()];
        let index: BTreeMap<&str, usize> = self
            .ids
            .iter()
            .enumerate()
            .map(|(i, id)| (id.as_str(), i))
            .collect();
        for edge in &self.edges {
            let i = index[edge.a.as_str()];
            let j = index[edge.b.as_str()];
            adj[i].push((j, edge.weight));
            adj[j].push((i, edge.weight));
        }
        for list in &mut adj {
            list.sort_by_key(|&(v, _)| v);
        }
        adj
    }

    pub fn weight_between(&self, a: &str, b: &str) -> Option<f64> {
        self.edges
            .iter()
            .find(|e| (e.a == a && e.b == b) || (e.a == b && e.b == a))
            .map(|e| e.weight)
    }

    /// DOT rendering for external visualization.
    pub fn to_dot(&self) -> String {
        let mut out = String::from("graph disparity {\n");
        for id in &self.ids {
            let size = self.sizes.get(id).copied().unwrap_or(0);
            out.push_str(&format!("  \"{id}\" [label=\"{id} (n={size})\"];\n"));
        }
        for edge in &self.edges {
            out.push_str(&format!(
                "  \"{}\" -- \"{}\" [label=\"{:.6}\"];\n",
                edge.a, edge.b, edge.weight
            ));
        }
        out.push_str("}\n");
        out
    }
}

/// Builds the disparity graph from a matrix: the complete graph when `tau`
/// is absent, otherwise keeping exactly the edges with weight strictly
/// below `tau`.
pub fn build_graph(
    matrix: &DisparityMatrix,
    sizes: &BTreeMap<String, u64>,
    tau: Option<f64>,
) -> Result<DisparityGraph> {
    matrix.validate()?;
    let ids = matrix.ids.clone();
    let target = matrix.target_id();
    let mut graph_sizes = BTreeMap::new();
    for id in &ids {
        match sizes.get(id) {
            Some(&n) => {
                graph_sizes.insert(id.clone(), n);
            }
            None if id == target => {}
            None => return Err(Error::MissingSize(id.clone())),
        }
    }
    let mut edges = Vec::new();
    for i in 0..ids.len() {
        for j in (i + 1)..ids.len() {
            let weight = matrix.get(i, j);
            if tau.map_or(true, |t| weight < t) {
                edges.push(Edge {
                    a: ids[i].clone(),
                    b: ids[j].clone(),
                    weight,
                });
            }
        }
    }
    DisparityGraph::from_parts(ids, graph_sizes, edges, tau)
}

/// Source ids connected to the target, by breadth-first search.
pub fn reachable_sources(graph: &DisparityGraph) -> BTreeSet<String> {
    let adj = graph.adjacency();
    let target = graph.ids.len() - 1;
    let mut seen = vec![false; graph.ids.len()];
    seen[target] = true;
    let mut queue = VecDeque::from([target]);
    while let Some(u) = queue.pop_front() {
        for &(v, _) in &adj[u] {
            if !seen[v] {
                seen[v] = true;
                queue.push_back(v);
            }
        }
    }
    graph
        .ids
        .iter()
        .enumerate()
        .filter(|&(i, _)| i != target && seen[i])
        .map(|(_, id)| id.clone())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Matrix over `ids` with the given strictly-upper-triangle entries in
    /// row-major order.
    pub(crate) fn matrix_from_upper(ids: &[&str], upper: &[f64]) -> DisparityMatrix {
        let k1 = ids.len();
        assert_eq!(upper.len(), k1 * (k1 - 1) / 2);
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

    fn sizes_for(ids: &[&str]) -> BTreeMap<String, u64> {
        ids.iter().map(|id| (id.to_string(), 10)).collect()
    }

    #[test]
    fn complete_graph_when_tau_absent() {
        let ids = ["s1", "s2", "s3", "target"];
        let matrix = matrix_from_upper(&ids, &[0.1, 0.2, 0.3, 0.4, 0.5, 0.6]);
        let graph = build_graph(&matrix, &sizes_for(&ids), None).unwrap();
        assert_eq!(graph.ids.len(), 4);
        assert_eq!(graph.edges.len(), 6);
    }

    #[test]
    fn tau_zero_prunes_everything() {
        let ids = ["s1", "target"];
        let matrix = matrix_from_upper(&ids, &[0.5]);
        let graph = build_graph(&matrix, &sizes_for(&ids), Some(0.0)).unwrap();
        assert!(graph.edges.is_empty());
    }

    #[test]
    fn tau_above_max_keeps_complete_graph() {
        let ids = ["s1", "s2", "target"];
        let matrix = matrix_from_upper(&ids, &[0.1, 0.9, 0.4]);
        let graph = build_graph(&matrix, &sizes_for(&ids), Some(1.9)).unwrap();
        assert_eq!(graph.edges.len(), 3);
    }

    #[test]
    fn pruning_is_strict_and_monotone() {
        let ids = ["s1", "s2", "target"];
        let matrix = matrix_from_upper(&ids, &[0.1, 0.9, 0.4]);
        let sizes = sizes_for(&ids);
        // strict: an edge exactly at tau is dropped
        let at = build_graph(&matrix, &sizes, Some(0.4)).unwrap();
        assert_eq!(at.edges.len(), 1);
        let mut previous = 0;
        for tau in [0.0, 0.2, 0.5, 1.0] {
            let graph = build_graph(&matrix, &sizes, Some(tau)).unwrap();
            assert!(graph.edges.len() >= previous);
            previous = graph.edges.len();
        }
    }

    #[test]
    fn weights_round_trip_from_matrix() {
        let ids = ["s1", "s2", "target"];
        let upper = [0.123456789f64, 0.5, 0.25];
        let matrix = matrix_from_upper(&ids, &upper);
        let graph = build_graph(&matrix, &sizes_for(&ids), None).unwrap();
        assert_eq!(graph.weight_between("s1", "s2"), Some(upper[0]));
        assert_eq!(graph.weight_between("s1", "target"), Some(upper[1]));
        assert_eq!(graph.weight_between("target", "s2"), Some(upper[2]));
    }

    #[test]
    fn missing_source_size_is_fatal_but_target_size_optional() {
        let ids = ["s1", "target"];
        let matrix = matrix_from_upper(&ids, &[0.5]);
        let mut sizes = BTreeMap::new();
        sizes.insert("s1".to_string(), 7u64);
        let graph = build_graph(&matrix, &sizes, None).unwrap();
        assert_eq!(graph.size_of("s1").unwrap(), 7);
        let err = build_graph(&matrix, &BTreeMap::new(), None).unwrap_err();
        assert!(matches!(err, Error::MissingSize(id) if id == "s1"));
    }

    #[test]
    fn reachability_on_complete_graph_is_everything() {
        let ids = ["s1", "s2", "s3", "target"];
        let matrix = matrix_from_upper(&ids, &[0.1, 0.2, 0.3, 0.4, 0.5, 0.6]);
        let graph = build_graph(&matrix, &sizes_for(&ids), None).unwrap();
        let reach = reachable_sources(&graph);
        assert_eq!(
            reach.into_iter().collect::<Vec<_>>(),
            vec!["s1", "s2", "s3"]
        );
    }

    #[test]
    fn reachability_on_empty_graph_is_empty() {
        let ids = ["s1", "s2", "target"];
        let matrix = matrix_from_upper(&ids, &[0.1, 0.9, 0.4]);
        let graph = build_graph(&matrix, &sizes_for(&ids), Some(0.0)).unwrap();
        assert!(reachable_sources(&graph).is_empty());
    }

    #[test]
    fn reachability_follows_surviving_edges_only() {
        // s1–target and s1–s2 survive; s3 is isolated
        let ids = ["s1", "s2", "s3", "target"];
        let sizes = sizes_for(&ids);
        let edges = vec![
            Edge {
                a: "s1".into(),
                b: "target".into(),
                weight: 0.1,
            },
            Edge {
                a: "s1".into(),
                b: "s2".into(),
                weight: 0.2,
            },
        ];
        let graph = DisparityGraph::from_parts(
            ids.iter().map(|s| s.to_string()).collect(),
            sizes,
            edges,
            Some(0.3),
        )
        .unwrap();
        let reach = reachable_sources(&graph);
        assert_eq!(reach.into_iter().collect::<Vec<_>>(), vec!["s1", "s2"]);
    }

    #[test]
    fn from_parts_rejects_bad_edges() {
        let ids: Vec<String> = vec!["s1".into(), "target".into()];
        let sizes: BTreeMap<String, u64> = [("s1".to_string(), 5u64)].into();
        let self_loop = vec![Edge {
            a: "s1".into(),
            b: "s1".into(),
            weight: 0.1,
        }];
        assert!(DisparityGraph::from_parts(ids.clone(), sizes.clone(), self_loop, None).is_err());
        let unknown = vec![Edge {
            a: "s1".into(),
            b: "zzz".into(),
            weight: 0.1,
        }];
        assert!(DisparityGraph::from_parts(ids.clone(), sizes.clone(), unknown, None).is_err());
        let duplicate = vec![
            Edge {
                a: "s1".into(),
                b: "target".into(),
                weight: 0.1,
            },
            Edge {
                a: "target".into(),
                b: "s1".into(),
                weight: 0.2,
            },
        ];
        assert!(DisparityGraph::from_parts(ids, sizes, duplicate, None).is_err());
    }

    #[test]
    fn dot_export_lists_vertices_and_edges() {
        let ids = ["s1", "target"];
        let matrix = matrix_from_upper(&ids, &[0.5]);
        let graph = build_graph(&matrix, &sizes_for(&ids), None).unwrap();
        let dot = graph.to_dot();
        assert!(dot.contains("\"s1\" [label=\"s1 (n=10)\"]"));
        assert!(dot.contains("\"s1\" -- \"target\""));
    }
}
