//! Wasserstein disparity estimation between empirical joint (feature, label)
//! distributions.
//!
//! Distances follow the order-1 transport form with an `ℓ_p` ground metric:
//! the cost of moving mass between two points is the p-norm of their
//! difference, not its p-th power. Estimation runs entropy-regularized
//! Sinkhorn iterations in the log domain; a brute-force assignment solver
//! over tiny clouds serves as the exact oracle.

use std::collections::BTreeMap;

use itertools::Itertools;
use ndarray::Array2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{DomainCollection, Label, Sample};
use crate::error::{Error, Result};

const WEIGHT_SUM_TOLERANCE: f64 = 1e-9;

/// Knobs of the Sinkhorn estimator. Deserializes field-by-field, so a
/// partial config object fills the gaps from the defaults.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SinkhornConfig {
    /// Entropic regularization strength ε.
    pub epsilon: f64,
    pub max_iterations: usize,
    /// Convergence threshold on the sup-norm change of the dual potentials.
    pub tolerance: f64,
    /// Subtract the self-transport terms (Sinkhorn divergence) so that the
    /// distance of a cloud to itself vanishes.
    pub debiased: bool,
    /// The p of the `‖·‖_p` ground metric.
    pub ground_norm_p: f64,
    /// Weight γ of the label coordinate in the joint embedding.
    pub label_scale: f64,
}

impl Default for SinkhornConfig {
    fn default() -> Self {
        SinkhornConfig {
            epsilon: 0.05,
            max_iterations: 1000,
            tolerance: 1e-6,
            debiased: true,
            ground_norm_p: 1.0,
            label_scale: 1.0,
        }
    }
}

impl SinkhornConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "epsilon must be a positive real, got {}",
                self.epsilon
            )));
        }
        if self.max_iterations == 0 {
            return Err(Error::InvalidArgument(
                "max_iterations must be at least 1".into(),
            ));
        }
        if !(self.tolerance > 0.0 && self.tolerance.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "tolerance must be a positive real, got {}",
                self.tolerance
            )));
        }
        if !(self.ground_norm_p >= 1.0 && self.ground_norm_p.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "ground_norm_p must be at least 1, got {}",
                self.ground_norm_p
            )));
        }
        if !(self.label_scale >= 0.0 && self.label_scale.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "label_scale must be nonnegative, got {}",
                self.label_scale
            )));
        }
        Ok(())
    }
}

/// Deterministic per-domain cap on cloud sizes before the Sinkhorn call.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct Subsample {
    pub cap: usize,
    pub seed: u64,
}

impl Default for Subsample {
    fn default() -> Self {
        Subsample { cap: 500, seed: 0 }
    }
}

/// Outcome of one distance estimate. Hitting the iteration cap is reported
/// here rather than treated as an error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SinkhornResult {
    pub value: f64,
    pub converged: bool,
    pub iterations: usize,
}

/// Symmetric (K+1)×(K+1) matrix of pairwise domain disparities, target last.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DisparityMatrix {
    pub ids: Vec<String>,
    /// Row-major, length `ids.len()²`.
    pub values: Vec<f64>,
}

impl DisparityMatrix {
    /// Validates shape, symmetry (exact), zero diagonal, and nonnegativity.
    pub fn new(ids: Vec<String>, values: Vec<f64>) -> Result<DisparityMatrix> {
        let matrix = DisparityMatrix { ids, values };
        matrix.validate()?;
        Ok(matrix)
    }

    pub fn validate(&self) -> Result<()> {
        let k1 = self.ids.len();
        if self.values.len() != k1 * k1 {
            return Err(Error::InvalidArgument(format!(
                "matrix over {k1} ids needs {} values, got {}",
                k1 * k1,
                self.values.len()
            )));
        }
        for i in 0..k1 {
            if self.values[i * k1 + i] != 0.0 {
                return Err(Error::InvalidArgument(format!(
                    "nonzero diagonal entry for {:?}",
                    self.ids[i]
                )));
            }
            for j in 0..k1 {
                let v = self.values[i * k1 + j];
                if !v.is_finite() || v < 0.0 {
                    return Err(Error::InvalidArgument(format!(
                        "entry ({},{}) = {v} is not a nonnegative real",
                        self.ids[i], self.ids[j]
                    )));
                }
                if v != self.values[j * k1 + i] {
                    return Err(Error::InvalidArgument(format!(
                        "asymmetry between {:?} and {:?}",
                        self.ids[i], self.ids[j]
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.ids.len() + j]
    }

    pub fn index_of(&self, id: &str) -> Result<usize> {
        self.ids
            .iter()
            .position(|x| x == id)
            .ok_or_else(|| Error::UnknownDomain(id.to_string()))
    }

    /// The target sits in the last row/column by construction.
    pub fn target_id(&self) -> &str {
        self.ids.last().expect("matrix has at least the target")
    }

    pub fn value_between(&self, a: &str, b: &str) -> Result<f64> {
        Ok(self.get(self.index_of(a)?, self.index_of(b)?))
    }

    /// CSV with a header row and column of domain ids, 9 significant digits.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("domain");
        for id in &self.ids {
            out.push(',');
            out.push_str(id);
        }
        out.push('\n');
        for (i, id) in self.ids.iter().enumerate() {
            out.push_str(id);
            for j in 0..self.ids.len() {
                out.push_str(&format!(",{:.8e}", self.get(i, j)));
            }
            out.push('\n');
        }
        out
    }
}

/// Maps each sample to `(x₀, …, x_{d-1}, label_scale · y)`, order preserved.
pub fn joint_embed(samples: &[Sample], label_scale: f64) -> Result<Vec<Vec<f64>>> {
    if samples.is_empty() {
        return Err(Error::InvalidArgument(
            "cannot embed an empty sample set".into(),
        ));
    }
    samples
        .iter()
        .enumerate()
        .map(|(i, s)| {
            let label = s.label.ok_or_else(|| {
                Error::InvalidArgument(format!(
                    "sample {i} has no label; supply pseudo-labels via joint_embed_relabeled"
                ))
            })?;
            Ok(embed_one(&s.features, label, label_scale))
        })
        .collect()
}

/// Like [`joint_embed`] but takes the label sequence separately, e.g. target
/// pseudo-labels; any labels on the samples themselves are ignored.
pub fn joint_embed_relabeled(
    samples: &[Sample],
    labels: &[Label],
    label_scale: f64,
) -> Result<Vec<Vec<f64>>> {
    if samples.is_empty() {
        return Err(Error::InvalidArgument(
            "cannot embed an empty sample set".into(),
        ));
    }
    if samples.len() != labels.len() {
        return Err(Error::InvalidArgument(format!(
            "{} samples but {} labels",
            samples.len(),
            labels.len()
        )));
    }
    Ok(samples
        .iter()
        .zip(labels)
        .map(|(s, &label)| embed_one(&s.features, label, label_scale))
        .collect())
}

fn embed_one(features: &[f64], label: Label, label_scale: f64) -> Vec<f64> {
    let mut point = Vec::with_capacity(features.len() + 1);
    point.extend_from_slice(features);
    point.push(label_scale * label.as_f64());
    point
}

/// Pairwise ground costs `C[i][j] = ‖A_i − B_j‖_p`.
pub fn ground_cost_matrix(a: &[Vec<f64>], b: &[Vec<f64>], p: f64) -> Result<Array2<f64>> {
    if !(p >= 1.0 && p.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "ground norm order must be at least 1, got {p}"
        )));
    }
    if a.is_empty() || b.is_empty() {
        return Err(Error::InvalidArgument(
            "cost matrix needs non-empty clouds".into(),
        ));
    }
    let dim = a[0].len();
    for point in a.iter().chain(b.iter()) {
        if point.len() != dim {
            return Err(Error::InvalidArgument(format!(
                "point dimension {} does not match {dim}",
                point.len()
            )));
        }
    }
    let mut c = Array2::zeros((a.len(), b.len()));
    for (i, x) in a.iter().enumerate() {
        for (j, y) in b.iter().enumerate() {
            c[[i, j]] = lp_distance(x, y, p);
        }
    }
    Ok(c)
}

fn lp_distance(x: &[f64], y: &[f64], p: f64) -> f64 {
    if p == 1.0 {
        x.iter().zip(y).map(|(a, b)| (a - b).abs()).sum()
    } else if p == 2.0 {
        x.iter()
            .zip(y)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    } else {
        x.iter()
            .zip(y)
            .map(|(a, b)| (a - b).abs().powf(p))
            .sum::<f64>()
            .powf(1.0 / p)
    }
}

fn check_weights(weights: &[f64], cloud_len: usize) -> Result<()> {
    if weights.len() != cloud_len {
        return Err(Error::InvalidArgument(format!(
            "{} weights for a {cloud_len}-point cloud",
            weights.len()
        )));
    }
    if let Some(w) = weights.iter().find(|w| !(**w >= 0.0)) {
        return Err(Error::InvalidArgument(format!(
            "weights must be nonnegative, found {w}"
        )));
    }
    let sum: f64 = weights.iter().sum();
    if (sum - 1.0).abs() > WEIGHT_SUM_TOLERANCE {
        return Err(Error::WeightSum {
            sum,
            tolerance: WEIGHT_SUM_TOLERANCE,
        });
    }
    Ok(())
}

fn logsumexp(xs: &[f64]) -> f64 {
    let max = xs.iter().fold(f64::NEG_INFINITY, |m, &x| m.max(x));
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    max + xs.iter().map(|&x| (x - max).exp()).sum::<f64>().ln()
}

/// One entropic OT solve on a fixed cost matrix; returns `(⟨π, C⟩,
/// converged, iterations)`.
///
/// Both dual potentials advance simultaneously from the previous iterate,
/// averaged with it (`f ← ½(f + T(g))`). The averaging damps the period-2
/// oscillation that plain simultaneous updates exhibit, while the
/// simultaneity keeps the computation symmetric under swapping the two
/// marginals; the fixed point is the usual Sinkhorn one.
fn entropic_ot(
    c: &Array2<f64>,
    log_a: &[f64],
    log_b: &[f64],
    config: &SinkhornConfig,
) -> (f64, bool, usize) {
    let (m, n) = c.dim();
    let eps = config.epsilon;
    let mut f = vec![0.0; m];
    let mut g = vec![0.0; n];
    let mut f_next = vec![0.0; m];
    let mut g_next = vec![0.0; n];
    let mut scratch = vec![0.0; m.max(n)];
    let mut converged = false;
    let mut iterations = 0;

    for _ in 0..config.max_iterations {
        iterations += 1;
        for i in 0..m {
            for (j, &cij) in c.row(i).iter().enumerate() {
                scratch[j] = log_b[j] + (g[j] - cij) / eps;
            }
            f_next[i] = 0.5 * (f[i] - eps * logsumexp(&scratch[..n]));
        }
        for j in 0..n {
            for (i, &cij) in c.column(j).iter().enumerate() {
                scratch[i] = log_a[i] + (f[i] - cij) / eps;
            }
            g_next[j] = 0.5 * (g[j] - eps * logsumexp(&scratch[..m]));
        }
        let delta = f
            .iter()
            .zip(&f_next)
            .chain(g.iter().zip(&g_next))
            .map(|(old, new)| (old - new).abs())
            .fold(0.0_f64, f64::max);
        std::mem::swap(&mut f, &mut f_next);
        std::mem::swap(&mut g, &mut g_next);
        if delta < config.tolerance {
            converged = true;
            break;
        }
    }

    let mut value = 0.0;
    for i in 0..m {
        for (j, &cij) in c.row(i).iter().enumerate() {
            value += (log_a[i] + log_b[j] + (f[i] + g[j] - cij) / eps).exp() * cij;
        }
    }
    (value, converged, iterations)
}

/// Nonzero-weight points and the logs of their (renormalized-free) weights.
fn filter_support(cloud: &[Vec<f64>], weights: &[f64]) -> (Vec<Vec<f64>>, Vec<f64>) {
    cloud
        .iter()
        .zip(weights)
        .filter(|(_, &w)| w > 0.0)
        .map(|(point, &w)| (point.clone(), w.ln()))
        .unzip()
}

fn check_cost(c: &Array2<f64>) -> Result<()> {
    for ((row, col), &v) in c.indexed_iter() {
        if !v.is_finite() {
            return Err(Error::NonFiniteCost { row, col });
        }
    }
    Ok(())
}

/// Entropic transport cost between two weighted clouds.
///
/// Plain mode returns `OT_ε(a, b) = ⟨π*, C⟩`; debiased mode returns the
/// Sinkhorn divergence `OT_ε(a,b) − ½OT_ε(a,a) − ½OT_ε(b,b)` clamped below
/// at zero, which drives the self-distance of any cloud to exactly zero.
pub fn sinkhorn_distance(
    a: &[Vec<f64>],
    b: &[Vec<f64>],
    weights_a: &[f64],
    weights_b: &[f64],
    config: &SinkhornConfig,
) -> Result<SinkhornResult> {
    config.validate()?;
    check_weights(weights_a, a.len())?;
    check_weights(weights_b, b.len())?;
    let (a, log_a) = filter_support(a, weights_a);
    let (b, log_b) = filter_support(b, weights_b);

    let solve = |x: &[Vec<f64>], log_x: &[f64], y: &[Vec<f64>], log_y: &[f64]| -> Result<(f64, bool, usize)> {
        let c = ground_cost_matrix(x, y, config.ground_norm_p)?;
        check_cost(&c)?;
        Ok(entropic_ot(&c, log_x, log_y, config))
    };

    let (ab, ab_converged, ab_iterations) = solve(&a, &log_a, &b, &log_b)?;
    if !config.debiased {
        return Ok(SinkhornResult {
            value: ab,
            converged: ab_converged,
            iterations: ab_iterations,
        });
    }
    let (aa, aa_converged, aa_iterations) = solve(&a, &log_a, &a, &log_a)?;
    let (bb, bb_converged, bb_iterations) = solve(&b, &log_b, &b, &log_b)?;
    Ok(SinkhornResult {
        value: (ab - 0.5 * aa - 0.5 * bb).max(0.0),
        converged: ab_converged && aa_converged && bb_converged,
        iterations: ab_iterations.max(aa_iterations).max(bb_iterations),
    })
}

const EXACT_SOLVER_LIMIT: usize = 8;

/// Exact optimal transport cost between equal-size uniformly weighted
/// clouds: `(1/n) · min_σ Σᵢ C[i][σ(i)]` over all `n!` permutations (the
/// optimal plan for uniform equal-size marginals is a permutation).
pub fn exact_ot_small(a: &[Vec<f64>], b: &[Vec<f64>], p: f64) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::UnequalCloudSizes {
            left: a.len(),
            right: b.len(),
        });
    }
    let n = a.len();
    if n > EXACT_SOLVER_LIMIT {
        return Err(Error::ExactSolverTooLarge {
            n,
            limit: EXACT_SOLVER_LIMIT,
        });
    }
    let c = ground_cost_matrix(a, b, p)?;
    check_cost(&c)?;
    let best = (0..n)
        .permutations(n)
        .map(|perm| {
            perm.iter()
                .enumerate()
                .map(|(i, &j)| c[[i, j]])
                .sum::<f64>()
        })
        .fold(f64::INFINITY, f64::min);
    Ok(best / n as f64)
}

/// Builds the full symmetric disparity matrix over sources plus target.
///
/// Source clouds embed their true training labels; the target cloud embeds
/// the supplied pseudo-labels. All clouds get uniform weights. Entries above
/// the diagonal are computed independently (in parallel) and mirrored.
pub fn pairwise_disparity(
    collection: &DomainCollection,
    target_pseudo_labels: &[Label],
    config: &SinkhornConfig,
    subsample: Option<Subsample>,
) -> Result<DisparityMatrix> {
    config.validate()?;
    if target_pseudo_labels.len() != collection.target.n() {
        return Err(Error::InvalidArgument(format!(
            "{} pseudo-labels for a target train split of {}",
            target_pseudo_labels.len(),
            collection.target.n()
        )));
    }

    let mut ids: Vec<String> = collection
        .sources
        .iter()
        .map(|d| d.domain_id.clone())
        .collect();
    ids.push(collection.target.domain_id.clone());

    let mut clouds: Vec<Vec<Vec<f64>>> = collection
        .sources
        .iter()
        .map(|d| joint_embed(&d.train, config.label_scale))
        .collect::<Result<_>>()?;
    clouds.push(joint_embed_relabeled(
        &collection.target.train,
        target_pseudo_labels,
        config.label_scale,
    )?);

    if let Some(sub) = subsample {
        for (idx, cloud) in clouds.iter_mut().enumerate() {
            *cloud = subsample_cloud(cloud, sub.cap, sub.seed.wrapping_add(idx as u64));
        }
    }

    let k1 = ids.len();
    let pairs: Vec<(usize, usize)> = (0..k1)
        .flat_map(|i| ((i + 1)..k1).map(move |j| (i, j)))
        .collect();
    let entries: Vec<f64> = pairs
        .par_iter()
        .map(|&(i, j)| {
            let wa = uniform_weights(clouds[i].len());
            let wb = uniform_weights(clouds[j].len());
            sinkhorn_distance(&clouds[i], &clouds[j], &wa, &wb, config).map(|r| r.value)
        })
        .collect::<Result<_>>()?;

    let mut values = vec![0.0; k1 * k1];
    for (&(i, j), &v) in pairs.iter().zip(&entries) {
        values[i * k1 + j] = v;
        values[j * k1 + i] = v;
    }
    DisparityMatrix::new(ids, values)
}

fn uniform_weights(n: usize) -> Vec<f64> {
    vec![1.0 / n as f64; n]
}

fn subsample_cloud(cloud: &[Vec<f64>], cap: usize, seed: u64) -> Vec<Vec<f64>> {
    if cloud.len() <= cap || cap == 0 {
        return cloud.to_vec();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut picked = rand::seq::index::sample(&mut rng, cloud.len(), cap).into_vec();
    picked.sort_unstable();
    picked.into_iter().map(|i| cloud[i].clone()).collect()
}

/// Recorded alongside artifacts so cached matrices are reproducible.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DisparityProvenance {
    pub sinkhorn: SinkhornConfig,
    pub subsample: Option<Subsample>,
    pub sizes: BTreeMap<String, u64>,
}
