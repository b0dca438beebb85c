//! Gaussian-mixture feature model with a shared diagonal covariance, the
//! minimum-Mahalanobis-distance classifier, and the classification-accuracy
//! bounds that drive every analytical expression downstream.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mc::{self, SimResult, TrialRng};
use crate::numerics::q_function;

/// Zero-based class index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ClassLabel(pub usize);

impl ClassLabel {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct GmmModelJson {
    #[serde(rename = "L")]
    num_classes: usize,
    #[serde(rename = "N")]
    dim: usize,
    centroids: Vec<Vec<f64>>,
    covariance_diag: Vec<f64>,
}

/// `L` class centroids in `R^N` sharing one diagonal covariance.
///
/// Immutable after construction; serializes as
/// `{"L", "N", "centroids", "covariance_diag"}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "GmmModelJson", into = "GmmModelJson")]
pub struct GmmModel {
    centroids: Vec<Vec<f64>>,
    covariance_diag: Vec<f64>,
    std_dev: Vec<f64>,
}

impl TryFrom<GmmModelJson> for GmmModel {
    type Error = Error;

    fn try_from(raw: GmmModelJson) -> Result<Self> {
        if raw.centroids.len() != raw.num_classes {
            return Err(Error::InvalidModel(format!(
                "L = {} but {} centroids given",
                raw.num_classes,
                raw.centroids.len()
            )));
        }
        if raw.covariance_diag.len() != raw.dim {
            return Err(Error::InvalidModel(format!(
                "N = {} but covariance has {} entries",
                raw.dim,
                raw.covariance_diag.len()
            )));
        }
        GmmModel::new(raw.centroids, raw.covariance_diag)
    }
}

impl From<GmmModel> for GmmModelJson {
    fn from(m: GmmModel) -> Self {
        Self { num_classes: m.num_classes(), dim: m.dim(), centroids: m.centroids, covariance_diag: m.covariance_diag }
    }
}

impl GmmModel {
    pub fn new(centroids: Vec<Vec<f64>>, covariance_diag: Vec<f64>) -> Result<Self> {
        let dim = covariance_diag.len();
        if centroids.len() < 2 {
            return Err(Error::InvalidModel("at least two classes are required".into()));
        }
        if dim == 0 {
            return Err(Error::InvalidModel("feature dimension must be positive".into()));
        }
        if covariance_diag.iter().any(|&c| !(c > 0.0) || !c.is_finite()) {
            return Err(Error::InvalidModel("covariance entries must be positive and finite".into()));
        }
        if centroids.iter().any(|c| c.len() != dim) {
            return Err(Error::InvalidModel(format!("every centroid must have length {dim}")));
        }
        if centroids.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::InvalidModel("centroids must be finite".into()));
        }
        let std_dev = covariance_diag.iter().map(|c| c.sqrt()).collect();
        let model = Self { centroids, covariance_diag, std_dev };
        for a in 0..model.num_classes() {
            for b in a + 1..model.num_classes() {
                if model.discriminant_gain(ClassLabel(a), ClassLabel(b)) <= 0.0 {
                    return Err(Error::InvalidModel(format!("centroids {a} and {b} coincide")));
                }
            }
        }
        Ok(model)
    }

    /// Block-sign construction: class `l` is `-1` on its own block of `N/L`
    /// coordinates and `+1` elsewhere, with isotropic covariance `variance`.
    pub fn synthetic(num_classes: usize, dim: usize, variance: f64) -> Result<Self> {
        if num_classes < 2 || dim == 0 {
            return Err(Error::InvalidModel("need L >= 2 and N >= 1".into()));
        }
        if !dim.is_multiple_of(num_classes) {
            return Err(Error::IndivisibleDimensions { dim, classes: num_classes });
        }
        let block = dim / num_classes;
        let centroids =
            (0..num_classes).map(|l| (0..dim).map(|n| if n / block == l { -1.0 } else { 1.0 }).collect()).collect();
        Self::new(centroids, vec![variance; dim])
    }

    /// Simplex of `L` centroids `sqrt(g/2) * e_l` in `R^L` with unit
    /// covariance, so that every pair has discriminant gain exactly `g`.
    pub fn equidistant(num_classes: usize, g_min: f64) -> Result<Self> {
        if num_classes < 2 {
            return Err(Error::InvalidModel("need L >= 2".into()));
        }
        if !(g_min > 0.0) {
            return Err(Error::InvalidModel(format!("g_min must be positive, got {g_min}")));
        }
        let c = (g_min / 2.0).sqrt();
        let centroids =
            (0..num_classes).map(|l| (0..num_classes).map(|n| if n == l { c } else { 0.0 }).collect()).collect();
        Self::new(centroids, vec![1.0; num_classes])
    }

    pub fn num_classes(&self) -> usize {
        self.centroids.len()
    }

    pub fn dim(&self) -> usize {
        self.covariance_diag.len()
    }

    pub fn centroids(&self) -> &[Vec<f64>] {
        &self.centroids
    }

    pub fn centroid(&self, label: ClassLabel) -> &[f64] {
        &self.centroids[label.0]
    }

    pub fn covariance_diag(&self) -> &[f64] {
        &self.covariance_diag
    }

    /// Symmetric KL divergence between two classes,
    /// `sum_n (mu_a(n) - mu_b(n))^2 / C_nn`.
    pub fn discriminant_gain(&self, a: ClassLabel, b: ClassLabel) -> f64 {
        self.centroids[a.0]
            .iter()
            .zip(&self.centroids[b.0])
            .zip(&self.covariance_diag)
            .map(|((x, y), c)| (x - y) * (x - y) / c)
            .sum()
    }

    /// Smallest pairwise discriminant gain.
    pub fn min_discriminant_gain(&self) -> f64 {
        let l = self.num_classes();
        (0..l)
            .flat_map(|a| (a + 1..l).map(move |b| (a, b)))
            .map(|(a, b)| self.discriminant_gain(ClassLabel(a), ClassLabel(b)))
            .fold(f64::INFINITY, f64::min)
    }

    /// Squared Mahalanobis distance from `x` to the centroid of `label`.
    pub fn mahalanobis_sq(&self, x: &[f64], label: ClassLabel) -> f64 {
        x.iter().zip(&self.centroids[label.0]).zip(&self.covariance_diag).map(|((v, m), c)| (v - m) * (v - m) / c).sum()
    }

    /// Nearest centroid in Mahalanobis distance; ties go to the lowest index.
    pub fn classify(&self, fused: &[f64]) -> ClassLabel {
        assert_eq!(fused.len(), self.dim(), "feature length mismatch");
        let mut best = ClassLabel(0);
        let mut best_d = self.mahalanobis_sq(fused, best);
        for l in 1..self.num_classes() {
            let d = self.mahalanobis_sq(fused, ClassLabel(l));
            if d < best_d {
                best = ClassLabel(l);
                best_d = d;
            }
        }
        best
    }

    /// Adds one draw from `N(mu_label, C)` into `acc`.
    pub(crate) fn accumulate_sample(&self, label: ClassLabel, rng: &mut TrialRng, acc: &mut [f64]) {
        for ((a, m), s) in acc.iter_mut().zip(&self.centroids[label.0]).zip(&self.std_dev) {
            let z: f64 = rng.sample(StandardNormal);
            *a += m + s * z;
        }
    }

    /// `count` i.i.d. feature vectors for `label`, reproducible from `seed`.
    pub fn sample_features(&self, label: ClassLabel, count: usize, seed: u64) -> Vec<Vec<f64>> {
        let mut rng = mc::trial_rng(seed, 0);
        (0..count)
            .map(|_| {
                let mut v = vec![0.0; self.dim()];
                self.accumulate_sample(label, &mut rng, &mut v);
                v
            })
            .collect()
    }
}

/// Coordinate-wise mean of a nonempty set of feature vectors.
pub fn fuse<V: AsRef<[f64]>>(features: &[V]) -> Result<Vec<f64>> {
    let first = features.first().ok_or(Error::EmptyFusion)?.as_ref();
    let mut acc = first.to_vec();
    for v in &features[1..] {
        let v = v.as_ref();
        assert_eq!(v.len(), acc.len(), "feature length mismatch");
        acc.iter_mut().zip(v).for_each(|(a, x)| *a += x);
    }
    let scale = 1.0 / features.len() as f64;
    acc.iter_mut().for_each(|a| *a *= scale);
    Ok(acc)
}

/// Lower bound on classification accuracy with `k` fused observations,
/// clamped from below at the random-guess level `1/L`.
pub fn accuracy_lower_bound(num_classes: usize, g_min: f64, k: u64) -> f64 {
    let floor = 1.0 / num_classes as f64;
    if k == 0 {
        return floor;
    }
    let tail = q_function((k as f64 * g_min).sqrt() / 2.0);
    floor.max(1.0 - (num_classes - 1) as f64 * tail)
}

/// Exact accuracy of the two-class classifier with `k` fused observations.
pub fn binary_accuracy_exact(g12: f64, k: u64) -> f64 {
    q_function(-(k as f64 * g12).sqrt() / 2.0)
}

/// Monte Carlo accuracy of the classifier on `k` fused observations over a
/// lossless link.
pub fn mc_classification_accuracy(model: &GmmModel, k: usize, trials: u64, seed: u64) -> SimResult {
    mc_classification_accuracy_with_workers(model, k, trials, seed, mc::default_workers())
}

pub fn mc_classification_accuracy_with_workers(
    model: &GmmModel,
    k: usize,
    trials: u64,
    seed: u64,
    workers: usize,
) -> SimResult {
    assert!(k >= 1, "need at least one observation");
    let l = model.num_classes();
    mc::run_trials(
        trials,
        seed,
        workers,
        || vec![0.0; model.dim()],
        |acc, rng| {
            let label = ClassLabel(rng.random_range(0..l));
            acc.fill(0.0);
            for _ in 0..k {
                model.accumulate_sample(label, rng, acc);
            }
            let scale = 1.0 / k as f64;
            acc.iter_mut().for_each(|a| *a *= scale);
            model.classify(acc) == label
        },
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn synthetic_binary_model() {
        let m = GmmModel::synthetic(2, 20, 3.0).unwrap();
        assert!((m.min_discriminant_gain() - 80.0 / 3.0).abs() < 1e-12);
        assert!(m.centroids().iter().flatten().all(|&v| v == 1.0 || v == -1.0));
        assert_eq!(&m.centroids()[0][..10], &[-1.0; 10]);
        assert_eq!(&m.centroids()[0][10..], &[1.0; 10]);
    }

    #[test]
    fn synthetic_rejects_indivisible() {
        assert_eq!(GmmModel::synthetic(3, 20, 3.0), Err(Error::IndivisibleDimensions { dim: 20, classes: 3 }));
    }

    #[test]
    fn synthetic_five_class_gain() {
        // Enumerate every pair: distinct blocks of width 4 differ in 8 coordinates.
        let m = GmmModel::synthetic(5, 20, 3.0).unwrap();
        for a in 0..5 {
            for b in 0..5 {
                let g = m.discriminant_gain(ClassLabel(a), ClassLabel(b));
                let expected = if a == b { 0.0 } else { 8.0 * 4.0 / 3.0 };
                assert!((g - expected).abs() < 1e-12);
            }
        }
        assert!((m.min_discriminant_gain() - 32.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn gain_single_coordinate() {
        let m = GmmModel::new(vec![vec![2.0, 0.0, 0.0], vec![0.0, 0.0, 0.0]], vec![1.0; 3]).unwrap();
        assert_eq!(m.discriminant_gain(ClassLabel(0), ClassLabel(1)), 4.0);
        assert_eq!(m.discriminant_gain(ClassLabel(1), ClassLabel(1)), 0.0);
        assert_eq!(m.min_discriminant_gain(), 4.0);
    }

    #[test]
    fn model_validation() {
        assert!(GmmModel::new(vec![vec![0.0], vec![0.0]], vec![1.0]).is_err());
        assert!(GmmModel::new(vec![vec![0.0], vec![1.0]], vec![0.0]).is_err());
        assert!(GmmModel::new(vec![vec![0.0], vec![1.0, 2.0]], vec![1.0]).is_err());
        assert!(GmmModel::new(vec![vec![0.0]], vec![1.0]).is_err());
    }

    #[test]
    fn equidistant_gain() {
        let m = GmmModel::equidistant(4, 2.5).unwrap();
        for a in 0..4 {
            for b in a + 1..4 {
                assert!((m.discriminant_gain(ClassLabel(a), ClassLabel(b)) - 2.5).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn json_round_trip_and_schema() {
        let m = GmmModel::synthetic(2, 4, 3.0).unwrap();
        let s = serde_json::to_string(&m).unwrap();
        assert!(s.contains("\"L\":2") && s.contains("\"N\":4"));
        let back: GmmModel = serde_json::from_str(&s).unwrap();
        assert_eq!(back, m);
        let bad = r#"{"L": 3, "N": 1, "centroids": [[0.0],[1.0]], "covariance_diag": [1.0]}"#;
        assert!(serde_json::from_str::<GmmModel>(bad).is_err());
    }

    #[test]
    fn fuse_cases() {
        let v = vec![1.0, -2.0, 3.5];
        assert_eq!(fuse(std::slice::from_ref(&v)).unwrap(), v);
        let neg: Vec<f64> = v.iter().map(|x| -x).collect();
        assert_eq!(fuse(&[v.clone(), neg]).unwrap(), vec![0.0; 3]);
        let empty: Vec<Vec<f64>> = vec![];
        assert_eq!(fuse(&empty), Err(Error::EmptyFusion));
    }

    #[test]
    fn classify_own_centroid_and_ties() {
        let m = GmmModel::synthetic(4, 8, 3.0).unwrap();
        assert_eq!(m.classify(m.centroid(ClassLabel(1))), ClassLabel(1));
        let m = GmmModel::new(vec![vec![-1.0, 0.0], vec![0.0, 5.0], vec![1.0, 0.0]], vec![1.0, 1.0]).unwrap();
        assert_eq!(m.classify(&[0.0, 0.0]), ClassLabel(0));
    }

    #[test]
    fn classify_agrees_with_distance_table() {
        let m = GmmModel::synthetic(5, 20, 3.0).unwrap();
        for (i, label) in (0..5).cycle().take(10_000).enumerate() {
            let x = m.sample_features(ClassLabel(label), 1, i as u64).pop().unwrap();
            let dists: Vec<f64> =
                m.centroids().iter().map(|c| x.iter().zip(c).map(|(a, b)| (a - b) * (a - b) / 3.0).sum()).collect();
            let mut best = 0;
            for (l, d) in dists.iter().enumerate() {
                if *d < dists[best] {
                    best = l;
                }
            }
            assert_eq!(m.classify(&x), ClassLabel(best));
        }
    }

    #[test]
    fn classify_invariant_to_covariance_scaling() {
        let m =
            GmmModel::new(vec![vec![0.0, 1.0, 2.0], vec![1.0, -1.0, 0.5], vec![2.0, 0.0, -1.0]], vec![0.5, 2.0, 1.5])
                .unwrap();
        let scaled =
            GmmModel::new(m.centroids().to_vec(), m.covariance_diag().iter().map(|c| c * 7.3).collect()).unwrap();
        for (i, x) in m.sample_features(ClassLabel(2), 500, 11).iter().enumerate() {
            assert_eq!(m.classify(x), scaled.classify(x), "sample {i}");
        }
    }

    #[test]
    fn sampling_determinism_and_degenerate_variance() {
        let m = GmmModel::synthetic(2, 4, 3.0).unwrap();
        assert_eq!(m.sample_features(ClassLabel(0), 5, 3), m.sample_features(ClassLabel(0), 5, 3));
        assert_ne!(m.sample_features(ClassLabel(0), 5, 3), m.sample_features(ClassLabel(0), 5, 4));
        let tight = GmmModel::synthetic(2, 4, 1e-300).unwrap();
        for x in tight.sample_features(ClassLabel(1), 10, 1) {
            for (a, b) in x.iter().zip(tight.centroid(ClassLabel(1))) {
                assert!((a - b).abs() < 1e-140);
            }
        }
    }

    #[test]
    fn sample_mean_within_clt_bound() {
        let m = GmmModel::synthetic(2, 4, 3.0).unwrap();
        let n = 1_000_000;
        let xs = m.sample_features(ClassLabel(1), n, 2024);
        let mean = fuse(&xs).unwrap();
        let bound = 5.0 * (3.0f64 / n as f64).sqrt();
        for (a, b) in mean.iter().zip(m.centroid(ClassLabel(1))) {
            assert!((a - b).abs() < bound, "{a} vs {b}");
        }
    }

    #[test]
    fn lower_bound_values() {
        assert_eq!(accuracy_lower_bound(2, 1.0, 0), 0.5);
        assert_eq!(accuracy_lower_bound(7, 3.0, 0), 1.0 / 7.0);
        assert!((accuracy_lower_bound(2, 1.0, 4) - 0.841_344_746_068_543).abs() < 1e-12);
        // 1 - 2 Q(1), Q(1) = 0.15865525393145707
        assert!((accuracy_lower_bound(3, 4.0, 1) - 0.682_689_492_137_086).abs() < 1e-12);
        // large L with tiny gain clamps at 1/L
        assert_eq!(accuracy_lower_bound(10, 0.01, 1), 0.1);
    }

    #[test]
    fn binary_exact_values() {
        assert!((binary_accuracy_exact(1.0, 4) - 0.841_344_746_068_543).abs() < 1e-12);
        assert_eq!(binary_accuracy_exact(1.0, 4), accuracy_lower_bound(2, 1.0, 4));
        // mpmath: 0.5*erfc(-sqrt(80/3)/2/sqrt(2))
        assert!((binary_accuracy_exact(80.0 / 3.0, 1) - 0.995_088_362_746_240).abs() < 1e-12);
        assert_eq!(binary_accuracy_exact(1.0, 1 << 40), 1.0);
    }

    #[test]
    fn mc_binary_matches_exact() {
        let m = GmmModel::synthetic(2, 20, 80.0).unwrap(); // g = 1
        let r = mc_classification_accuracy(&m, 4, 200_000, 5);
        assert!((r.accuracy - binary_accuracy_exact(1.0, 4)).abs() <= 4.0 * r.std_error());
        assert_eq!(r, mc_classification_accuracy(&m, 4, 200_000, 5));
    }

    #[test]
    fn mc_many_snapshots_near_perfect() {
        let m = GmmModel::synthetic(2, 20, 80.0).unwrap();
        let r = mc_classification_accuracy(&m, 400, 20_000, 1);
        assert!(r.accuracy > 0.999);
    }

    mod props {
        use super::super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn bound_monotone_and_in_range(l in 2usize..12, g in 0.01f64..40.0, k in 0u64..60) {
                let b = accuracy_lower_bound(l, g, k);
                prop_assert!(b >= 1.0 / l as f64 && b <= 1.0);
                prop_assert!(accuracy_lower_bound(l, g, k + 1) >= b);
                prop_assert!(accuracy_lower_bound(l, g * 1.1, k) >= b);
                prop_assert!(accuracy_lower_bound(l + 1, g, k) <= b);
            }

            #[test]
            fn gain_symmetric_and_additive(
                a in proptest::collection::vec(-5.0f64..5.0, 6),
                b in proptest::collection::vec(-5.0f64..5.0, 6),
                cov in proptest::collection::vec(0.1f64..4.0, 6),
            ) {
                prop_assume!(a != b);
                let m = GmmModel::new(vec![a.clone(), b.clone()], cov.clone()).unwrap();
                let g = m.discriminant_gain(ClassLabel(0), ClassLabel(1));
                prop_assert!((g - m.discriminant_gain(ClassLabel(1), ClassLabel(0))).abs() < 1e-12);
                prop_assert!(g >= 0.0);
                let parts: f64 = (0..6).map(|n| (a[n] - b[n]).powi(2) / cov[n]).sum();
                prop_assert!((g - parts).abs() < 1e-12);
            }
        }
    }
}
