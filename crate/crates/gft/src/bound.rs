//! Generalization-bound evaluation for gradual fine-tuning paths and the
//! single-shot baselines.
//!
//! Everything here is a pure formula: given distances, sample sizes, and
//! the capacity constants, each function evaluates its displayed bound
//! verbatim. Natural logarithms throughout.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::DisparityGraph;
use crate::otdist::DisparityMatrix;
use crate::routing::Path;

/// Capacity and confidence constants shared by all bounds.
///
/// `loss_lipschitz` is the loss's Lipschitz constant L, `classifier_lipschitz`
/// the hypothesis class's constant R, and `rademacher_scale` the B of
/// `ℛ_n(ℋ) ≤ B/√n`. The sequential Rademacher complexity over a path with N
/// total samples is modeled as `B / N^seq_exponent`; the exponent is 1 by
/// default (the complexity has the same order as 1/N) with ½ available for
/// sensitivity studies. Deserializes field-by-field, so a partial config
/// object fills the gaps from the defaults.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BoundParams {
    pub loss_lipschitz: f64,
    pub classifier_lipschitz: f64,
    pub rademacher_scale: f64,
    pub delta: f64,
    pub seq_exponent: f64,
}

impl Default for BoundParams {
    fn default() -> Self {
        BoundParams {
            loss_lipschitz: 1.0,
            classifier_lipschitz: 1.0,
            rademacher_scale: 1.0,
            delta: 0.1,
            seq_exponent: 1.0,
        }
    }
}

impl BoundParams {
    pub fn validate(&self) -> Result<()> {
        for (name, value) in [
            ("loss_lipschitz", self.loss_lipschitz),
            ("classifier_lipschitz", self.classifier_lipschitz),
        ] {
            if !(value >= 0.0 && value.is_finite()) {
                return Err(Error::InvalidArgument(format!(
                    "{name} must be a nonnegative real, got {value}"
                )));
            }
        }
        if !(self.rademacher_scale > 0.0 && self.rademacher_scale.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "rademacher_scale must be positive, got {}",
                self.rademacher_scale
            )));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "delta must lie strictly inside (0, 1), got {}",
                self.delta
            )));
        }
        if self.seq_exponent != 1.0 && self.seq_exponent != 0.5 {
            return Err(Error::InvalidArgument(format!(
                "seq_exponent must be 1 or 0.5, got {}",
                self.seq_exponent
            )));
        }
        Ok(())
    }

    /// The recurring factor `L·√(R² + 1)`.
    fn transport_factor(&self) -> f64 {
        self.loss_lipschitz * (self.classifier_lipschitz.powi(2) + 1.0).sqrt()
    }

    fn log_inv_delta(&self) -> f64 {
        (1.0 / self.delta).ln()
    }
}

/// The six summands of the GFT bound in display order, plus bookkeeping.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundBreakdown {
    pub term1: f64,
    pub term2: f64,
    pub term3: f64,
    pub term4: f64,
    pub term5: f64,
    pub term6: f64,
    pub total: f64,
    pub path: Path,
    pub eps1_used: f64,
    pub params: BoundParams,
}

impl BoundBreakdown {
    pub fn terms(&self) -> [f64; 6] {
        [
            self.term1, self.term2, self.term3, self.term4, self.term5, self.term6,
        ]
    }
}

/// Distribution-shift penalty of evaluating any classifier across a
/// Wasserstein gap `w1`: `L·√(R² + 1)·w1`.
pub fn lemma1_gap(w1: f64, params: &BoundParams) -> f64 {
    params.transport_factor() * w1
}

/// Expected-error gap between two consecutive fine-tuning stages, where the
/// next stage trains on `n_next` samples across a Wasserstein gap `w`:
/// `4√2·B·L/√n + 4B·√(ln(1/δ)/2n) + L·√(R² + 1)·w`.
pub fn consecutive_step_bound(n_next: u64, w: f64, params: &BoundParams) -> f64 {
    let n = n_next as f64;
    let b = params.rademacher_scale;
    4.0 * b * 2.0_f64.sqrt() * params.loss_lipschitz / n.sqrt()
        + 4.0 * b * (params.log_inv_delta() / (2.0 * n)).sqrt()
        + params.transport_factor() * w
}

/// Shared core once the path geometry has been extracted: `w_last` is the
/// target-to-last-domain distance, `deltas` the κ−1 consecutive gaps in
/// path order, `ns` the per-domain training sizes in path order.
fn evaluate_terms(
    w_last: f64,
    deltas: &[f64],
    ns: &[u64],
    eps1: f64,
    params: &BoundParams,
) -> Result<[f64; 6]> {
    params.validate()?;
    if !(eps1 >= 0.0 && eps1.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "eps1 must be a nonnegative real, got {eps1}"
        )));
    }
    let kappa = ns.len() as f64;
    let b = params.rademacher_scale;
    let log_inv_delta = params.log_inv_delta();

    let term1 = params.transport_factor() * w_last;
    let term2 = eps1;
    let term3 = (1.0 + 1.0 / kappa) * params.transport_factor() * deltas.iter().sum::<f64>();
    let inv_sqrt_sum: f64 = ns.iter().map(|&n| 1.0 / (n as f64).sqrt()).sum();
    let term4 = (4.0 * 2.0_f64.sqrt() * params.loss_lipschitz * b
        + 2.0 * 2.0_f64.sqrt() * b * log_inv_delta.sqrt())
        * ((kappa - 1.0) / kappa)
        * inv_sqrt_sum;
    let total_n: u64 = ns.iter().sum();
    if total_n < 2 {
        return Err(Error::PathTooSmall(total_n));
    }
    let seq_rademacher = b / (total_n as f64).powf(params.seq_exponent);
    let term5 = 6.0 * b * (4.0 * PI * (total_n as f64).ln()).sqrt() * seq_rademacher;
    let inv_sum: f64 = ns.iter().map(|&n| 1.0 / n as f64).sum();
    let term6 = (b * (8.0 * log_inv_delta).sqrt() + 1.0) / kappa * inv_sum.sqrt();
    Ok([term1, term2, term3, term4, term5, term6])
}

fn breakdown_from_terms(
    terms: [f64; 6],
    path: Path,
    eps1: f64,
    params: &BoundParams,
) -> BoundBreakdown {
    BoundBreakdown {
        term1: terms[0],
        term2: terms[1],
        term3: terms[2],
        term4: terms[3],
        term5: terms[4],
        term6: terms[5],
        total: terms.iter().sum(),
        path,
        eps1_used: eps1,
        params: *params,
    }
}

/// Evaluates the six-term GFT bound for a path, reading inter-domain
/// distances from the disparity matrix and sizes from the given map.
///
/// In display order: the target-shift term, the first-stage empirical loss
/// ε̂₁, the accumulated consecutive gaps, the per-stage Rademacher and
/// confidence penalty, the sequential-complexity term over all Σn_t
/// samples, and the pooled confidence term. The κ−1 factors force terms 3
/// and 4 to exactly zero on single-domain paths.
pub fn gft_bound(
    path: &Path,
    matrix: &DisparityMatrix,
    sizes: &BTreeMap<String, u64>,
    params: &BoundParams,
    eps1: f64,
) -> Result<BoundBreakdown> {
    let target = matrix.target_id();
    let last = path.domains.last().ok_or(Error::NoCandidatePaths)?;
    let w_last = matrix.value_between(target, last)?;
    let deltas: Vec<f64> = path
        .domains
        .windows(2)
        .map(|pair| matrix.value_between(&pair[0], &pair[1]))
        .collect::<Result<_>>()?;
    let ns: Vec<u64> = path
        .domains
        .iter()
        .map(|id| {
            sizes
                .get(id)
                .copied()
                .ok_or_else(|| Error::MissingSize(id.clone()))
        })
        .collect::<Result<_>>()?;
    let terms = evaluate_terms(w_last, &deltas, &ns, eps1, params)?;
    Ok(breakdown_from_terms(terms, path.clone(), eps1, params))
}

/// [`gft_bound`] with distances and sizes read off a disparity graph, for
/// scoring routing candidates without carrying the matrix around.
pub fn gft_bound_on_graph(
    path: &Path,
    graph: &DisparityGraph,
    params: &BoundParams,
    eps1: f64,
) -> Result<BoundBreakdown> {
    let target = graph.target_id();
    let last = path.domains.last().ok_or(Error::NoCandidatePaths)?;
    let edge = |a: &str, b: &str| {
        graph.weight_between(a, b).ok_or_else(|| {
            Error::InvalidArgument(format!("path step {a:?}–{b:?} is not a graph edge"))
        })
    };
    let w_last = edge(last, target)?;
    let deltas: Vec<f64> = path
        .domains
        .windows(2)
        .map(|pair| edge(&pair[0], &pair[1]))
        .collect::<Result<_>>()?;
    let ns: Vec<u64> = path
        .domains
        .iter()
        .map(|id| graph.size_of(id))
        .collect::<Result<_>>()?;
    let terms = evaluate_terms(w_last, &deltas, &ns, eps1, params)?;
    Ok(breakdown_from_terms(terms, path.clone(), eps1, params))
}

/// Bound for training once on the union of all sources: a size-weighted
/// mixture of per-source shift and empirical-loss terms plus pooled
/// capacity and confidence terms.
pub fn all_sources_bound(
    matrix: &DisparityMatrix,
    sizes: &BTreeMap<String, u64>,
    params: &BoundParams,
    eps_hat: &BTreeMap<String, f64>,
) -> Result<f64> {
    params.validate()?;
    let target = matrix.target_id().to_string();
    let sources = &matrix.ids[..matrix.ids.len() - 1];
    if sources.is_empty() {
        return Err(Error::NoCandidatePaths);
    }
    let mut ns = Vec::with_capacity(sources.len());
    let mut eps = Vec::with_capacity(sources.len());
    let mut shifts = Vec::with_capacity(sources.len());
    for id in sources {
        let n = sizes
            .get(id)
            .copied()
            .ok_or_else(|| Error::MissingSize(id.clone()))?;
        ns.push(n as f64);
        eps.push(*eps_hat.get(id).ok_or_else(|| {
            Error::InvalidArgument(format!("no empirical loss entry for source {id:?}"))
        })?);
        shifts.push(matrix.value_between(id, &target)?);
    }
    let total: f64 = ns.iter().sum();
    let b = params.rademacher_scale;
    let log_inv_delta = params.log_inv_delta();
    let mut value = 0.0;
    for ((&n, &e), &w) in ns.iter().zip(&eps).zip(&shifts) {
        value += n / total * params.transport_factor() * w;
        value += n / total * e;
        value += n.sqrt() * b / total;
        value += log_inv_delta * n.sqrt() / total;
    }
    Ok(value)
}

/// Bound for training once on the single closest source at distance `w_ct`
/// with `n_c` samples and empirical loss `eps_hat_c`.
pub fn closest_source_bound(w_ct: f64, n_c: u64, eps_hat_c: f64, params: &BoundParams) -> f64 {
    let n = n_c as f64;
    params.transport_factor() * w_ct
        + eps_hat_c
        + params.rademacher_scale / n.sqrt()
        + params.log_inv_delta() / n.sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn params(l: f64, r: f64, b: f64, delta: f64) -> BoundParams {
        BoundParams {
            loss_lipschitz: l,
            classifier_lipschitz: r,
            rademacher_scale: b,
            delta,
            seq_exponent: 1.0,
        }
    }

    fn path(domains: &[&str], weight: f64, magnitude: u64) -> Path {
        Path {
            domains: domains.iter().map(|s| s.to_string()).collect(),
            terminal: "target".into(),
            weight,
            magnitude,
            kappa: domains.len(),
        }
    }

    fn two_domain_matrix(d12: f64, w1t: f64, w2t: f64) -> DisparityMatrix {
        DisparityMatrix::new(
            vec!["s1".into(), "s2".into(), "target".into()],
            vec![0.0, d12, w1t, d12, 0.0, w2t, w1t, w2t, 0.0],
        )
        .unwrap()
    }

    fn sizes(pairs: &[(&str, u64)]) -> BTreeMap<String, u64> {
        pairs.iter().map(|&(id, n)| (id.to_string(), n)).collect()
    }

    #[test]
    fn lemma1_matches_analytic_cases() {
        assert_eq!(lemma1_gap(0.0, &params(1.0, 1.0, 1.0, 0.1)), 0.0);
        assert_eq!(lemma1_gap(2.0, &params(1.0, 0.0, 1.0, 0.1)), 2.0);
        let p = params(2.0, 3.0_f64.sqrt(), 1.0, 0.1);
        assert_abs_diff_eq!(lemma1_gap(0.5, &p), 2.0, epsilon = 1e-12);
    }

    #[test]
    fn consecutive_step_shrinks_with_samples() {
        let p = params(1.0, 1.0, 1.0, 0.1);
        assert!(consecutive_step_bound(100_000_000, 0.0, &p) <= 1e-3);
        let with_log2 = params(0.0, 1.0, 1.0, (-2.0_f64).exp());
        assert_abs_diff_eq!(
            consecutive_step_bound(2, 0.0, &with_log2),
            2.0 * 2.0_f64.sqrt(),
            epsilon = 1e-12
        );
        let p = params(1.3, 0.7, 2.0, 0.05);
        for n in [1u64, 4, 50, 1000] {
            assert!(consecutive_step_bound(2 * n, 0.3, &p) < consecutive_step_bound(n, 0.3, &p));
        }
    }

    #[test]
    fn single_domain_path_zeroes_terms_three_and_four() {
        let matrix = two_domain_matrix(0.5, 0.3, 0.2);
        let sizes = sizes(&[("s1", 40), ("s2", 700)]);
        let p = params(1.0, 1.0, 1.0, 0.1);
        let breakdown = gft_bound(&path(&["s2"], 0.2, 700), &matrix, &sizes, &p, 0.25).unwrap();
        assert_eq!(breakdown.term3, 0.0);
        assert_eq!(breakdown.term4, 0.0);
        assert_eq!(breakdown.term2, 0.25);
        assert_eq!(
            breakdown.total,
            breakdown.term1 + breakdown.term2 + breakdown.term5 + breakdown.term6
        );
    }

    #[test]
    fn two_domain_bound_matches_straight_line_arithmetic() {
        // L=1, R=0, B=1, ln(1/δ)=1, κ=2, n=(100,100), Δ=0.5, W(T,last)=0.2
        let matrix = two_domain_matrix(0.5, 0.7, 0.2);
        let sz = sizes(&[("s1", 100), ("s2", 100)]);
        let p = params(1.0, 0.0, 1.0, (-1.0_f64).exp());
        let eps1 = 0.1;
        let breakdown = gft_bound(&path(&["s1", "s2"], 1.2, 200), &matrix, &sz, &p, eps1).unwrap();

        let term1 = 0.2;
        let term2 = 0.1;
        let term3 = 1.5 * 0.5;
        let term4 = (4.0 * 2.0_f64.sqrt() + 2.0 * 2.0_f64.sqrt()) * 0.5 * (2.0 / 10.0);
        let term5 = 6.0 * (4.0 * PI * 200.0_f64.ln()).sqrt() / 200.0;
        let term6 = ((8.0_f64).sqrt() + 1.0) / 2.0 * (0.02_f64).sqrt();
        let expected = [term1, term2, term3, term4, term5, term6];
        for (ours, reference) in breakdown.terms().iter().zip(expected) {
            assert_abs_diff_eq!(*ours, reference, epsilon = 1e-12 * reference.max(1.0));
        }
        let total: f64 = expected.iter().sum();
        assert!((breakdown.total - total).abs() <= 1e-12 * total);
    }

    #[test]
    fn term3_responds_linearly_to_delta() {
        let sz = sizes(&[("s1", 100), ("s2", 100)]);
        let p = params(1.0, 1.0, 1.0, 0.1);
        let factor = p.loss_lipschitz * (p.classifier_lipschitz.powi(2) + 1.0).sqrt();
        let base = gft_bound(
            &path(&["s1", "s2"], 1.0, 200),
            &two_domain_matrix(0.5, 0.7, 0.2),
            &sz,
            &p,
            0.0,
        )
        .unwrap();
        let bumped = gft_bound(
            &path(&["s1", "s2"], 1.1, 200),
            &two_domain_matrix(0.6, 0.7, 0.2),
            &sz,
            &p,
            0.0,
        )
        .unwrap();
        assert_abs_diff_eq!(
            bumped.term3 - base.term3,
            1.5 * 0.1 * factor,
            epsilon = 1e-12
        );
        assert_eq!(base.term1, bumped.term1);
        assert_eq!(base.term4, bumped.term4);
        assert_eq!(base.term5, bumped.term5);
        assert_eq!(base.term6, bumped.term6);
    }

    #[test]
    fn bigger_samples_never_inflate_capacity_terms() {
        let matrix = two_domain_matrix(0.5, 0.7, 0.2);
        let p = BoundParams::default();
        let small = gft_bound(
            &path(&["s1", "s2"], 1.2, 13),
            &matrix,
            &sizes(&[("s1", 3), ("s2", 10)]),
            &p,
            0.0,
        )
        .unwrap();
        let doubled = gft_bound(
            &path(&["s1", "s2"], 1.2, 16),
            &matrix,
            &sizes(&[("s1", 6), ("s2", 10)]),
            &p,
            0.0,
        )
        .unwrap();
        assert!(doubled.term4 <= small.term4);
        assert!(doubled.term5 <= small.term5);
        assert!(doubled.term6 <= small.term6);
    }

    #[test]
    fn log_guard_rejects_single_sample_paths() {
        let matrix = two_domain_matrix(0.5, 0.7, 0.2);
        let err = gft_bound(
            &path(&["s1"], 0.7, 1),
            &matrix,
            &sizes(&[("s1", 1), ("s2", 10)]),
            &BoundParams::default(),
            0.0,
        )
        .unwrap_err();
        assert!(matches!(err, Error::PathTooSmall(1)));
    }

    #[test]
    fn missing_size_is_fatal() {
        let matrix = two_domain_matrix(0.5, 0.7, 0.2);
        let err = gft_bound(
            &path(&["s1", "s2"], 1.2, 200),
            &matrix,
            &sizes(&[("s1", 100)]),
            &BoundParams::default(),
            0.0,
        )
        .unwrap_err();
        assert!(matches!(err, Error::MissingSize(id) if id == "s2"));
    }

    #[test]
    fn bound_is_bit_reproducible() {
        let matrix = two_domain_matrix(0.51, 0.73, 0.29);
        let sz = sizes(&[("s1", 37), ("s2", 411)]);
        let p = params(1.7, 0.4, 2.3, 0.07);
        let a = gft_bound(&path(&["s1", "s2"], 0.8, 448), &matrix, &sz, &p, 0.31).unwrap();
        let b = gft_bound(&path(&["s1", "s2"], 0.8, 448), &matrix, &sz, &p, 0.31).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn all_sources_collapses_for_a_single_source() {
        let matrix = DisparityMatrix::new(
            vec!["s1".into(), "target".into()],
            vec![0.0, 0.0, 0.0, 0.0],
        )
        .unwrap();
        let p = params(1.0, 1.0, 1.0, 0.1);
        let value = all_sources_bound(
            &matrix,
            &sizes(&[("s1", 25)]),
            &p,
            &[("s1".to_string(), 0.0)].into(),
        )
        .unwrap();
        let expected = 1.0 / 5.0 + (10.0_f64).ln() / 5.0;
        assert_abs_diff_eq!(value, expected, epsilon = 1e-12);
    }

    #[test]
    fn all_sources_dominated_by_heavy_distant_source() {
        let matrix = two_domain_matrix(0.5, 3.0, 0.1);
        let p = params(1.0, 1.0, 1.0, 0.1);
        let n1 = 10_000u64;
        let n2 = 10u64;
        let value = all_sources_bound(
            &matrix,
            &sizes(&[("s1", n1), ("s2", n2)]),
            &p,
            &[("s1".to_string(), 0.2), ("s2".to_string(), 0.2)].into(),
        )
        .unwrap();
        let share = n1 as f64 / (n1 + n2) as f64;
        assert!(value >= share * p.loss_lipschitz * 2.0_f64.sqrt() * 3.0);
    }

    #[test]
    fn closest_source_analytic_cases() {
        let p = params(1.0, 1.0, 1.0, 0.1);
        let expected = (1.0 + (10.0_f64).ln()) / 4.0;
        assert_abs_diff_eq!(
            closest_source_bound(0.0, 16, 0.0, &p),
            expected,
            epsilon = 1e-12
        );
        assert!(closest_source_bound(0.4, 32, 0.1, &p) < closest_source_bound(0.4, 16, 0.1, &p));
    }

    #[test]
    fn invalid_params_are_rejected() {
        let mut p = BoundParams::default();
        p.delta = 1.0;
        assert!(p.validate().is_err());
        p.delta = 0.1;
        p.seq_exponent = 0.7;
        assert!(p.validate().is_err());
        p.seq_exponent = 0.5;
        assert!(p.validate().is_ok());
    }
}
