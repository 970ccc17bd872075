//! Release acceptance suite. Each test covers one numbered criterion,
//! checks the library (or the binary) against an oracle re-implemented
//! inline from first principles, and prints a single pass/fail line.

use std::collections::{BTreeMap, BTreeSet};
use std::f64::consts::PI;
use std::fs;
use std::path::Path as FsPath;
use std::process::Command;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use gft::bound::{all_sources_bound, closest_source_bound, gft_bound, BoundParams};
use gft::dataset::{Label, Sample};
use gft::graph::{build_graph, DisparityGraph};
use gft::otdist::{exact_ot_small, sinkhorn_distance, DisparityMatrix, SinkhornConfig};
use gft::routing::{
    route_exhaustive_bound_min, route_mst, route_nearest_neighbor, route_shortest_paths, Path,
};
use gft::simulate::{
    path_length_ablation, run_default_comparison, two_source_scenario, DEFAULT_SEEDS, METHOD_GFT,
    METHOD_UNION, SCENARIO_TRAIN, S1_ID, S2_ID,
};
use gft::trainer::{
    accuracy, sample_gradient, sample_loss, train_sequence, LinearModel, LossKind,
};

fn verdict(number: usize, name: &str, ok: bool, detail: &str) {
    println!(
        "criterion {number} ({name}): {}",
        if ok { "pass" } else { "fail" }
    );
    assert!(ok, "criterion {number} ({name}) failed: {detail}");
}

#[test]
fn criterion_1_frozen_scenario_separates_gft_from_baselines() {
    let start = Instant::now();
    let report = run_default_comparison(&DEFAULT_SEEDS).expect("comparison runs");
    let elapsed = start.elapsed();

    let gft_median = report.method(METHOD_GFT).expect("gft summary").median;
    let mut ok = elapsed <= Duration::from_secs(60);
    let mut detail = format!("gft median {gft_median:.4}");
    for name in [S1_ID, S2_ID, METHOD_UNION] {
        let median = report.method(name).expect("baseline summary").median;
        detail.push_str(&format!(", {name} {median:.4}"));
        ok &= gft_median >= median + 0.05;
    }
    detail.push_str(&format!(", elapsed {elapsed:.2?}"));
    verdict(1, "frozen scenario ordering", ok, &detail);
}

#[test]
fn criterion_2_sinkhorn_tracks_exact_transport() {
    let start = Instant::now();
    // Past ~1k iterations the remaining dual error sits far below the
    // entropic bias at this epsilon, so a tight cap only saves time.
    let config = SinkhornConfig {
        epsilon: 0.01,
        max_iterations: 2_000,
        tolerance: 1e-9,
        ..SinkhornConfig::default()
    };
    let weights = vec![1.0 / 6.0; 6];
    let mut ok = true;
    let mut worst_rel = 0.0f64;
    for seed in 0..50u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut cloud = || -> Vec<Vec<f64>> {
            (0..6)
                .map(|_| (0..2).map(|_| rng.random_range(0.0..1.0)).collect())
                .collect()
        };
        let a = cloud();
        let b = cloud();
        let forward = sinkhorn_distance(&a, &b, &weights, &weights, &config)
            .expect("sinkhorn converges")
            .value;
        let backward = sinkhorn_distance(&b, &a, &weights, &weights, &config)
            .expect("sinkhorn converges")
            .value;
        let own = sinkhorn_distance(&a, &a, &weights, &weights, &config)
            .expect("sinkhorn converges")
            .value;
        let exact = exact_ot_small(&a, &b, 1.0).expect("exact solver");
        let rel = (forward - exact).abs() / exact;
        worst_rel = worst_rel.max(rel);
        ok &= rel <= 0.05;
        ok &= own.abs() <= 1e-6;
        ok &= (forward - backward).abs() <= 1e-9;
    }
    let elapsed = start.elapsed();
    ok &= elapsed <= Duration::from_secs(30);
    verdict(
        2,
        "transport oracle",
        ok,
        &format!("worst relative error {worst_rel:.6}, elapsed {elapsed:.2?}"),
    );
}

/// Random complete disparity matrix over `s1..sK` plus the target, with
/// continuous weights so minima are unique far beyond float precision.
fn random_instance(rng: &mut ChaCha8Rng, k: usize) -> (DisparityMatrix, BTreeMap<String, u64>) {
    let mut ids: Vec<String> = (1..=k).map(|i| format!("s{i}")).collect();
    ids.push("target".into());
    let n = ids.len();
    let mut values = vec![0.0; n * n];
    for i in 0..n {
        for j in (i + 1)..n {
            let w = rng.random_range(0.05..2.0);
            values[i * n + j] = w;
            values[j * n + i] = w;
        }
    }
    let sizes = ids[..k]
        .iter()
        .map(|id| (id.clone(), rng.random_range(2..500)))
        .collect();
    (
        DisparityMatrix::new(ids, values).expect("valid matrix"),
        sizes,
    )
}

/// Minimum simple-path weight from every source to the target by brute
/// force, accumulating weights in path order exactly as a traced path does.
fn brute_force_min_paths(graph: &DisparityGraph) -> BTreeMap<String, f64> {
    fn explore(
        vertex: usize,
        total: f64,
        target: usize,
        adjacency: &[Vec<(usize, f64)>],
        visited: &mut [bool],
        best: &mut Option<f64>,
    ) {
        if vertex == target {
            if best.map_or(true, |b| total < b) {
                *best = Some(total);
            }
            return;
        }
        for &(next, weight) in &adjacency[vertex] {
            if visited[next] {
                continue;
            }
            visited[next] = true;
            explore(next, total + weight, target, adjacency, visited, best);
            visited[next] = false;
        }
    }

    let adjacency = graph.adjacency();
    let n = graph.ids.len();
    let target = n - 1;
    let mut minima = BTreeMap::new();
    for source in 0..n - 1 {
        let mut visited = vec![false; n];
        visited[source] = true;
        let mut best = None;
        explore(source, 0.0, target, &adjacency, &mut visited, &mut best);
        if let Some(weight) = best {
            minima.insert(graph.ids[source].clone(), weight);
        }
    }
    minima
}

/// The edge set each routed tree path traverses, as canonically ordered
/// id pairs, together with its total weight in that canonical order.
fn tree_edges_of_paths(graph: &DisparityGraph, paths: &[Path]) -> (usize, f64) {
    let target = graph.target_id().to_string();
    let mut edges: BTreeSet<(String, String)> = BTreeSet::new();
    for path in paths {
        let mut chain: Vec<&str> = path.domains.iter().map(String::as_str).collect();
        chain.push(&target);
        for pair in chain.windows(2) {
            let (a, b) = if pair[0] <= pair[1] {
                (pair[0], pair[1])
            } else {
                (pair[1], pair[0])
            };
            edges.insert((a.to_string(), b.to_string()));
        }
    }
    let weight = edges
        .iter()
        .map(|(a, b)| graph.weight_between(a, b).expect("tree edge exists"))
        .sum();
    (edges.len(), weight)
}

/// Decodes a Prüfer sequence over vertices `0..n` into its tree's edges.
fn prufer_tree(sequence: &[usize], n: usize) -> Vec<(usize, usize)> {
    let mut degree = vec![1usize; n];
    for &v in sequence {
        degree[v] += 1;
    }
    let mut used = vec![false; n];
    let mut edges = Vec::with_capacity(n - 1);
    for &v in sequence {
        let leaf = (0..n)
            .find(|&u| degree[u] == 1 && !used[u])
            .expect("a leaf always remains");
        edges.push((leaf.min(v), leaf.max(v)));
        used[leaf] = true;
        degree[leaf] -= 1;
        degree[v] -= 1;
    }
    let mut rest = (0..n).filter(|&u| !used[u] && degree[u] == 1);
    let a = rest.next().expect("two vertices remain");
    let b = rest.next().expect("two vertices remain");
    edges.push((a.min(b), a.max(b)));
    edges
}

/// Minimum spanning-tree weight by enumerating every labeled tree via
/// Prüfer sequences, summing each candidate in canonical edge order.
fn enumerate_min_spanning_weight(matrix: &DisparityMatrix) -> f64 {
    let n = matrix.ids.len();
    if n == 2 {
        return matrix.values[1];
    }
    let mut best = f64::INFINITY;
    let mut sequence = vec![0usize; n - 2];
    loop {
        let mut edges = prufer_tree(&sequence, n);
        edges.sort_unstable();
        let weight: f64 = edges.iter().map(|&(i, j)| matrix.values[i * n + j]).sum();
        if weight < best {
            best = weight;
        }
        // odometer increment over base-n digits
        let mut pos = 0;
        loop {
            if pos == sequence.len() {
                return best;
            }
            sequence[pos] += 1;
            if sequence[pos] < n {
                break;
            }
            sequence[pos] = 0;
            pos += 1;
        }
    }
}

#[test]
fn criterion_3_routing_matches_exhaustive_oracles() {
    let start = Instant::now();
    let mut ok = true;
    let mut detail = String::new();

    for seed in 0..100u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(1000 + seed);
        let k = rng.random_range(2..=7);
        let (matrix, sizes) = random_instance(&mut rng, k);
        let tau = if seed % 2 == 1 {
            Some(rng.random_range(0.3..1.8))
        } else {
            None
        };
        let graph = build_graph(&matrix, &sizes, tau).expect("graph builds");

        let subject: BTreeMap<String, f64> = route_shortest_paths(&graph)
            .expect("dijkstra runs")
            .into_iter()
            .map(|p| (p.domains[0].clone(), p.weight))
            .collect();
        let oracle = brute_force_min_paths(&graph);
        if subject != oracle {
            ok = false;
            detail = format!("shortest paths diverge on graph seed {seed}");
        }

        if tau.is_none() {
            let nn = route_nearest_neighbor(&graph).expect("nn runs");
            let mut visited = nn.domains.clone();
            visited.sort_unstable();
            let mut all: Vec<String> = graph.source_ids().to_vec();
            all.sort_unstable();
            if visited != all || nn.kappa != k {
                ok = false;
                detail = format!("nn is not a permutation on graph seed {seed}");
            }
        }
    }

    for seed in 0..100u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(2000 + seed);
        let k = rng.random_range(2..=6);
        let (matrix, sizes) = random_instance(&mut rng, k);
        let graph = build_graph(&matrix, &sizes, None).expect("graph builds");
        let paths = route_mst(&graph).expect("mst runs");
        let (edge_count, subject_weight) = tree_edges_of_paths(&graph, &paths);
        let oracle_weight = enumerate_min_spanning_weight(&matrix);
        if edge_count != k || subject_weight != oracle_weight {
            ok = false;
            detail = format!(
                "mst weight {subject_weight} vs enumerated {oracle_weight} on seed {seed}"
            );
        }
    }

    let elapsed = start.elapsed();
    ok &= elapsed <= Duration::from_secs(60);
    if detail.is_empty() {
        detail = format!("elapsed {elapsed:.2?}");
    }
    verdict(3, "routing oracles", ok, &detail);
}

/// One randomized bound evaluation scenario: path geometry plus constants.
struct BoundScenario {
    l: f64,
    r: f64,
    b: f64,
    delta: f64,
    q: f64,
    ns: Vec<u64>,
    deltas: Vec<f64>,
    w_last: f64,
    eps1: f64,
}

impl BoundScenario {
    fn draw(rng: &mut ChaCha8Rng, kappa: usize, min_n: u64) -> BoundScenario {
        BoundScenario {
            l: rng.random_range(0.1..3.0),
            r: rng.random_range(0.0..3.0),
            b: rng.random_range(0.1..3.0),
            delta: rng.random_range(0.01..0.9),
            q: if rng.random_bool(0.5) { 1.0 } else { 0.5 },
            ns: (0..kappa).map(|_| rng.random_range(min_n..10_000)).collect(),
            deltas: (0..kappa - 1).map(|_| rng.random_range(0.01..3.0)).collect(),
            w_last: rng.random_range(0.01..3.0),
            eps1: rng.random_range(0.0..1.0),
        }
    }

    fn params(&self) -> BoundParams {
        BoundParams {
            loss_lipschitz: self.l,
            classifier_lipschitz: self.r,
            rademacher_scale: self.b,
            delta: self.delta,
            seq_exponent: self.q,
        }
    }

    /// The six displayed formulas transcribed term by term, sharing no
    /// code with the library.
    fn expected_terms(&self) -> [f64; 6] {
        let kappa = self.ns.len() as f64;
        let shift = self.l * f64::sqrt(self.r * self.r + 1.0);
        let total_n: u64 = self.ns.iter().sum();
        let term1 = shift * self.w_last;
        let term2 = self.eps1;
        let term3 = (1.0 + 1.0 / kappa) * shift * self.deltas.iter().sum::<f64>();
        let term4 = (4.0 * f64::sqrt(2.0) * self.l * self.b
            + 2.0 * f64::sqrt(2.0) * self.b * f64::sqrt(f64::ln(1.0 / self.delta)))
            * ((kappa - 1.0) / kappa)
            * self
                .ns
                .iter()
                .map(|&n| 1.0 / f64::sqrt(n as f64))
                .sum::<f64>();
        let term5 = 6.0
            * self.b
            * f64::sqrt(4.0 * PI * f64::ln(total_n as f64))
            * (self.b / (total_n as f64).powf(self.q));
        let term6 = (self.b * f64::sqrt(8.0 * f64::ln(1.0 / self.delta)) + 1.0) / kappa
            * f64::sqrt(self.ns.iter().map(|&n| 1.0 / n as f64).sum::<f64>());
        [term1, term2, term3, term4, term5, term6]
    }

    /// A matrix realizing this scenario: consecutive path entries carry the
    /// deltas, the last domain sits `w_last` from the target, everything
    /// else is inert filler.
    fn matrix(&self) -> DisparityMatrix {
        let kappa = self.ns.len();
        let mut ids: Vec<String> = (1..=kappa).map(|i| format!("s{i}")).collect();
        ids.push("target".into());
        let n = ids.len();
        let mut values = vec![0.0; n * n];
        for i in 0..n {
            for j in (i + 1)..n {
                values[i * n + j] = 1.5;
                values[j * n + i] = 1.5;
            }
        }
        for (t, &delta) in self.deltas.iter().enumerate() {
            values[t * n + t + 1] = delta;
            values[(t + 1) * n + t] = delta;
        }
        values[(kappa - 1) * n + kappa] = self.w_last;
        values[kappa * n + kappa - 1] = self.w_last;
        DisparityMatrix::new(ids, values).expect("valid matrix")
    }

    fn sizes(&self) -> BTreeMap<String, u64> {
        self.ns
            .iter()
            .enumerate()
            .map(|(i, &n)| (format!("s{}", i + 1), n))
            .collect()
    }

    fn path(&self) -> Path {
        let domains: Vec<String> = (1..=self.ns.len()).map(|i| format!("s{i}")).collect();
        Path {
            kappa: domains.len(),
            domains,
            terminal: "target".into(),
            weight: self.deltas.iter().sum::<f64>() + self.w_last,
            magnitude: self.ns.iter().sum(),
        }
    }
}

fn close_to(value: f64, reference: f64, rel: f64) -> bool {
    (value - reference).abs() <= rel * reference.abs()
}

#[test]
fn criterion_4_bounds_match_straight_line_formulas() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut ok = true;
    let mut detail = String::new();
    let mut kappa_one_seen = 0;

    for case in 0..200 {
        let kappa = rng.random_range(1..=5);
        let scenario = BoundScenario::draw(&mut rng, kappa, 2);
        let breakdown = gft_bound(
            &scenario.path(),
            &scenario.matrix(),
            &scenario.sizes(),
            &scenario.params(),
            scenario.eps1,
        )
        .expect("bound evaluates");
        let expected = scenario.expected_terms();
        let expected_total: f64 = expected.iter().sum();
        for (i, (&got, &want)) in breakdown.terms().iter().zip(&expected).enumerate() {
            if !close_to(got, want, 1e-12) {
                ok = false;
                detail = format!("case {case}: term{} {got} vs {want}", i + 1);
            }
        }
        if !close_to(breakdown.total, expected_total, 1e-12) {
            ok = false;
            detail = format!("case {case}: total {} vs {expected_total}", breakdown.total);
        }
        if kappa == 1 {
            kappa_one_seen += 1;
            if !(breakdown.term3 == 0.0 && breakdown.term4 == 0.0) {
                ok = false;
                detail = format!(
                    "case {case}: kappa=1 gave term3 {} term4 {}",
                    breakdown.term3, breakdown.term4
                );
            }
        }

        // Baseline evaluators against the same scenario's geometry.
        let matrix = scenario.matrix();
        let sizes = scenario.sizes();
        let eps_hat: BTreeMap<String, f64> = sizes
            .keys()
            .map(|id| (id.clone(), rng.random_range(0.0..1.0)))
            .collect();
        let subject_all = all_sources_bound(&matrix, &sizes, &scenario.params(), &eps_hat)
            .expect("baseline bound evaluates");
        let shift = scenario.l * f64::sqrt(scenario.r * scenario.r + 1.0);
        let total_n: f64 = scenario.ns.iter().map(|&n| n as f64).sum();
        let mut expected_all = 0.0;
        for (i, &n) in scenario.ns.iter().enumerate() {
            let id = format!("s{}", i + 1);
            let w = matrix
                .value_between(&id, "target")
                .expect("matrix covers sources");
            let n = n as f64;
            expected_all += n / total_n * shift * w;
            expected_all += n / total_n * eps_hat[&id];
            expected_all += f64::sqrt(n) * scenario.b / total_n;
            expected_all += f64::ln(1.0 / scenario.delta) * f64::sqrt(n) / total_n;
        }
        if !close_to(subject_all, expected_all, 1e-12) {
            ok = false;
            detail = format!("case {case}: all-sources {subject_all} vs {expected_all}");
        }

        let n_c = scenario.ns[0];
        let subject_closest =
            closest_source_bound(scenario.w_last, n_c, scenario.eps1, &scenario.params());
        let expected_closest = shift * scenario.w_last
            + scenario.eps1
            + scenario.b / f64::sqrt(n_c as f64)
            + f64::ln(1.0 / scenario.delta) / f64::sqrt(n_c as f64);
        if !close_to(subject_closest, expected_closest, 1e-12) {
            ok = false;
            detail = format!("case {case}: closest {subject_closest} vs {expected_closest}");
        }
    }

    ok &= kappa_one_seen > 0;
    if detail.is_empty() {
        detail = format!("200 cases, {kappa_one_seen} with kappa = 1");
    }
    verdict(4, "bound formula fidelity", ok, &detail);
}

#[test]
fn criterion_5_bound_monotonicity() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut ok = true;
    let mut detail = String::new();

    for case in 0..200 {
        let kappa = rng.random_range(2..=5);
        let scenario = BoundScenario::draw(&mut rng, kappa, 3);
        let sizes = scenario.sizes();
        let params = scenario.params();
        let base = gft_bound(
            &scenario.path(),
            &scenario.matrix(),
            &sizes,
            &params,
            scenario.eps1,
        )
        .expect("bound evaluates");

        for t in 0..kappa - 1 {
            let mut bumped = BoundScenario {
                deltas: scenario.deltas.clone(),
                ns: scenario.ns.clone(),
                ..scenario
            };
            bumped.deltas[t] += rng.random_range(0.01..1.0);
            let perturbed = gft_bound(
                &bumped.path(),
                &bumped.matrix(),
                &sizes,
                &params,
                bumped.eps1,
            )
            .expect("bound evaluates");
            if !(perturbed.total > base.total) {
                ok = false;
                detail = format!(
                    "case {case}: raising delta {t} left total {} vs {}",
                    perturbed.total, base.total
                );
            }
        }

        for t in 0..kappa {
            let mut grown = BoundScenario {
                deltas: scenario.deltas.clone(),
                ns: scenario.ns.clone(),
                ..scenario
            };
            grown.ns[t] *= 2;
            let perturbed = gft_bound(
                &grown.path(),
                &grown.matrix(),
                &grown.sizes(),
                &params,
                grown.eps1,
            )
            .expect("bound evaluates");
            let before = base.term4 + base.term5 + base.term6;
            let after = perturbed.term4 + perturbed.term5 + perturbed.term6;
            if after > before {
                ok = false;
                detail =
                    format!("case {case}: doubling n_{t} raised sample terms {after} > {before}");
            }
        }
    }

    if detail.is_empty() {
        detail = "200 configurations".into();
    }
    verdict(5, "bound monotonicity", ok, &detail);
}

/// Every ordering of every nonempty subset of `ids`.
fn all_sequences(ids: &[String]) -> Vec<Vec<String>> {
    fn extend(current: &mut Vec<String>, remaining: &[String], out: &mut Vec<Vec<String>>) {
        for (i, id) in remaining.iter().enumerate() {
            current.push(id.clone());
            out.push(current.clone());
            let mut rest = remaining.to_vec();
            rest.remove(i);
            extend(current, &rest, out);
            current.pop();
        }
    }
    let mut out = Vec::new();
    extend(&mut Vec::new(), ids, &mut out);
    out
}

#[test]
fn criterion_6_exhaustive_routing_minimizes_recomputed_bounds() {
    let mut ok = true;
    let mut detail = String::new();

    for k in [2usize, 3] {
        for seed in 0..25u64 {
            let mut rng = ChaCha8Rng::seed_from_u64(6000 + 100 * k as u64 + seed);
            let (matrix, sizes) = random_instance(&mut rng, k);
            let graph = build_graph(&matrix, &sizes, None).expect("graph builds");
            let params = BoundParams {
                loss_lipschitz: rng.random_range(0.1..3.0),
                classifier_lipschitz: rng.random_range(0.0..3.0),
                rademacher_scale: rng.random_range(0.1..3.0),
                delta: rng.random_range(0.01..0.9),
                seq_exponent: 1.0,
            };
            let eps1: BTreeMap<String, f64> = graph
                .source_ids()
                .iter()
                .map(|id| (id.clone(), rng.random_range(0.0..1.0)))
                .collect();

            let winner = route_exhaustive_bound_min(&graph, &params, &eps1, None)
                .expect("exhaustive routing runs");

            let mut best: Option<(f64, Vec<String>)> = None;
            for sequence in all_sequences(graph.source_ids()) {
                let scenario = BoundScenario {
                    l: params.loss_lipschitz,
                    r: params.classifier_lipschitz,
                    b: params.rademacher_scale,
                    delta: params.delta,
                    q: params.seq_exponent,
                    ns: sequence.iter().map(|id| sizes[id]).collect(),
                    deltas: sequence
                        .windows(2)
                        .map(|pair| matrix.value_between(&pair[0], &pair[1]).unwrap())
                        .collect(),
                    w_last: matrix
                        .value_between("target", sequence.last().unwrap())
                        .unwrap(),
                    eps1: eps1[&sequence[0]],
                };
                let total: f64 = scenario.expected_terms().iter().sum();
                if best.as_ref().map_or(true, |(b, _)| total < *b) {
                    best = Some((total, sequence));
                }
            }
            let (_, expected) = best.expect("candidates exist");
            if winner.domains != expected {
                ok = false;
                detail = format!(
                    "k={k} seed {seed}: routed {:?}, oracle argmin {:?}",
                    winner.domains, expected
                );
            }
        }
    }

    if detail.is_empty() {
        detail = "25 graphs each for k = 2 and k = 3".into();
    }
    verdict(6, "exhaustive routing self-consistency", ok, &detail);
}

#[test]
fn criterion_7_gradients_match_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut ok = true;
    let mut detail = String::new();
    let h = 1e-6;
    let mut checked = 0;

    while checked < 50 {
        let dim = rng.random_range(1..=6);
        let model = LinearModel {
            weights: (0..dim).map(|_| rng.random_range(-2.0..2.0)).collect(),
            bias: rng.random_range(-1.0..1.0),
        };
        let features: Vec<f64> = (0..dim).map(|_| rng.random_range(-2.0..2.0)).collect();
        let label = if rng.random_bool(0.5) {
            Label::Pos
        } else {
            Label::Neg
        };
        let loss = if checked % 2 == 0 {
            LossKind::Hinge
        } else {
            LossKind::Logistic
        };
        let sample = Sample::labeled(features, label);
        if loss == LossKind::Hinge {
            let margin = 1.0 - label.as_f64() * model.score(&sample.features);
            if margin.abs() < 0.1 {
                continue;
            }
        }

        let (grad_w, grad_b) = sample_gradient(&model, &sample, loss).expect("gradient");
        let mut close = true;
        for i in 0..dim {
            let mut plus = model.clone();
            plus.weights[i] += h;
            let mut minus = model.clone();
            minus.weights[i] -= h;
            let numeric = (sample_loss(&plus, &sample, loss).unwrap()
                - sample_loss(&minus, &sample, loss).unwrap())
                / (2.0 * h);
            close &= (grad_w[i] - numeric).abs() <= 1e-4 * numeric.abs().max(1.0);
        }
        let mut plus = model.clone();
        plus.bias += h;
        let mut minus = model.clone();
        minus.bias -= h;
        let numeric = (sample_loss(&plus, &sample, loss).unwrap()
            - sample_loss(&minus, &sample, loss).unwrap())
            / (2.0 * h);
        close &= (grad_b - numeric).abs() <= 1e-4 * numeric.abs().max(1.0);

        if !close {
            ok = false;
            detail = format!("point {checked} ({loss:?}) diverges from central differences");
        }
        checked += 1;
    }

    if detail.is_empty() {
        detail = "50 points across hinge and logistic".into();
    }
    verdict(7, "gradient check", ok, &detail);
}

const PIPELINE_DATA: &str = "\
domain,split,label,f0,f1
s1,train,1,0.82,0.12
s1,train,1,0.74,0.05
s1,train,1,0.88,0.18
s1,train,-1,-0.80,-0.11
s1,train,-1,-0.71,-0.04
s1,train,-1,-0.86,-0.16
s2,train,1,0.61,0.34
s2,train,1,0.55,0.40
s2,train,1,0.66,0.29
s2,train,-1,-0.60,-0.36
s2,train,-1,-0.53,-0.41
s2,train,-1,-0.64,-0.30
s3,train,1,0.31,0.62
s3,train,1,0.25,0.55
s3,train,1,0.36,0.67
s3,train,-1,-0.30,-0.60
s3,train,-1,-0.24,-0.56
s3,train,-1,-0.35,-0.66
target,train,,0.84,0.06
target,train,,0.78,-0.02
target,train,,0.90,0.10
target,train,,-0.83,-0.07
target,train,,-0.76,0.01
target,train,,-0.88,-0.12
target,test,1,0.81,0.04
target,test,1,0.87,0.09
target,test,-1,-0.82,-0.05
target,test,-1,-0.79,-0.09
";

fn snapshot(root: &FsPath) -> BTreeMap<String, Vec<u8>> {
    fn walk(root: &FsPath, dir: &FsPath, files: &mut BTreeMap<String, Vec<u8>>) {
        for entry in fs::read_dir(dir).expect("readable dir") {
            let path = entry.expect("dir entry").path();
            if path.is_dir() {
                walk(root, &path, files);
            } else {
                let rel = path
                    .strip_prefix(root)
                    .expect("under root")
                    .to_string_lossy()
                    .into_owned();
                files.insert(rel, fs::read(&path).expect("readable file"));
            }
        }
    }
    let mut files = BTreeMap::new();
    walk(root, root, &mut files);
    files
}

#[test]
fn criterion_8_pipeline_runs_are_byte_identical() {
    let dir = tempfile::tempdir().expect("tempdir");
    let data = dir.path().join("data.csv");
    fs::write(&data, PIPELINE_DATA).expect("fixture written");
    let out = dir.path().join("out");
    let data = data.to_str().unwrap();
    let out_arg = out.to_str().unwrap();

    let run_all = || {
        for command in ["distances", "route", "train", "ablate"] {
            let output = Command::new(env!("CARGO_BIN_EXE_gft"))
                .args([command, "--data", data, "--out", out_arg])
                .output()
                .expect("binary runs");
            assert!(
                output.status.success(),
                "{command} failed: {}",
                String::from_utf8_lossy(&output.stderr)
            );
        }
        let output = Command::new(env!("CARGO_BIN_EXE_gft"))
            .args(["simulate", "--out", out_arg])
            .output()
            .expect("binary runs");
        assert!(output.status.success());
    };

    run_all();
    let first = snapshot(&out);
    fs::remove_dir_all(&out).expect("fresh slate");
    run_all();
    let second = snapshot(&out);

    let same_names: Vec<&String> = first.keys().collect();
    let ok = first == second && !first.is_empty();
    verdict(
        8,
        "deterministic artifacts",
        ok,
        &format!("{} files compared: {same_names:?}", first.len()),
    );
}

#[test]
fn criterion_9_ablation_rows_equal_direct_training() {
    let collection = two_source_scenario(0);
    let sizes = collection.sizes();
    let ids = vec![S1_ID.to_string(), S2_ID.to_string(), "target".to_string()];
    let values = vec![
        0.0, 0.9, 0.2, //
        0.9, 0.0, 1.0, //
        0.2, 1.0, 0.0,
    ];
    let matrix = DisparityMatrix::new(ids, values).expect("valid matrix");
    let graph = build_graph(&matrix, &sizes, None).expect("graph builds");
    let full = Path::trace(vec![S2_ID.into(), S1_ID.into()], &graph).expect("path valid");

    let report = path_length_ablation(&collection, &full, &SCENARIO_TRAIN, &matrix, &sizes)
        .expect("ablation runs");

    let last_only = train_sequence(&[S1_ID.to_string()], &collection, &SCENARIO_TRAIN)
        .expect("training runs");
    let full_model = train_sequence(
        &[S2_ID.to_string(), S1_ID.to_string()],
        &collection,
        &SCENARIO_TRAIN,
    )
    .expect("training runs");
    let acc_last = accuracy(&last_only, &collection.target.test).expect("evaluation");
    let acc_full = accuracy(&full_model, &collection.target.test).expect("evaluation");

    let ok = report.rows.len() == 2
        && report.rows[0].kappa == 1
        && report.rows[0].accuracy.to_bits() == acc_last.to_bits()
        && report.rows[1].kappa == 2
        && report.rows[1].accuracy.to_bits() == acc_full.to_bits();

    for row in &report.rows {
        println!("ablation trend: k={} accuracy={:.4}", row.kappa, row.accuracy);
    }
    verdict(
        9,
        "ablation harness",
        ok,
        &format!(
            "rows {:?} vs direct ({acc_last}, {acc_full})",
            report
                .rows
                .iter()
                .map(|r| (r.kappa, r.accuracy))
                .collect::<Vec<_>>()
        ),
    );
}
