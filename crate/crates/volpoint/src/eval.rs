//! Viewpoint estimation from predicted distributions, tolerance-accuracy
//! reports, azimuth-elevation error maps and top-k region accuracy.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imgio;
use crate::model::PredictedDistribution;
use crate::render::RenderedImage;
use crate::viewsphere::{
    geodesic_distance_deg, SphericalDirection, SpherePixelization, ViewpointLabel,
};

/// The default evaluation tolerances in degrees.
pub const DEFAULT_TOLERANCES: [f64; 5] = [2.0, 5.0, 8.0, 11.0, 15.0];

/// A point estimate with a dispersion measure: the argmax label and the
/// probability-weighted mean geodesic deviation from it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EstimatedViewpoint {
    pub v_mu: ViewpointLabel,
    pub v_sigma_deg: f64,
}

/// Argmax viewpoint (ties to the lowest label index) plus dispersion
/// sigma = sum_v P_v * d(center(v), center(v_mu)).
pub fn estimate_viewpoint(
    dist: &PredictedDistribution,
    p: &SpherePixelization,
) -> Result<EstimatedViewpoint> {
    if dist.len() != p.n_pixels() {
        return Err(Error::ShapeMismatch(format!(
            "distribution over {} labels, pixelization has {}",
            dist.len(),
            p.n_pixels()
        )));
    }
    let v_mu = ViewpointLabel(dist.argmax());
    let mu_center = p.center_of(v_mu)?;
    let mut sigma = 0.0;
    for (l, &prob) in dist.probabilities().iter().enumerate() {
        if prob > 0.0 {
            sigma += prob * geodesic_distance_deg(p.center_of(ViewpointLabel(l))?, mu_center);
        }
    }
    Ok(EstimatedViewpoint {
        v_mu,
        v_sigma_deg: sigma,
    })
}

/// Fraction of correct predictions at each tolerance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToleranceAccuracyReport {
    pub tolerances_deg: Vec<f64>,
    pub accuracies: Vec<f64>,
    pub sample_count: usize,
}

impl ToleranceAccuracyReport {
    fn new(tolerances_deg: Vec<f64>, accuracies: Vec<f64>, sample_count: usize) -> Result<Self> {
        for pair in accuracies.windows(2) {
            if pair[1] < pair[0] - 1e-12 {
                return Err(Error::InvalidArgument(format!(
                    "accuracy not monotone in tolerance: {} then {}",
                    pair[0], pair[1]
                )));
            }
        }
        if accuracies.iter().any(|a| !(0.0..=1.0).contains(a)) {
            return Err(Error::InvalidArgument("accuracy outside [0, 1]".into()));
        }
        Ok(ToleranceAccuracyReport {
            tolerances_deg,
            accuracies,
            sample_count,
        })
    }

    pub fn accuracy_at(&self, tolerance: f64) -> Option<f64> {
        self.tolerances_deg
            .iter()
            .position(|&t| t == tolerance)
            .map(|i| self.accuracies[i])
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("tolerance_deg,accuracy,sample_count\n");
        for (t, a) in self.tolerances_deg.iter().zip(&self.accuracies) {
            out.push_str(&format!("{t},{a},{}\n", self.sample_count));
        }
        out
    }
}

fn check_lengths(preds: usize, gts: usize) -> Result<()> {
    if preds == 0 {
        return Err(Error::InvalidArgument("no predictions to evaluate".into()));
    }
    if preds != gts {
        return Err(Error::ShapeMismatch(format!(
            "{preds} predictions vs {gts} ground truths"
        )));
    }
    Ok(())
}

fn sorted_tolerances(tolerances: &[f64]) -> Result<Vec<f64>> {
    if tolerances.is_empty() {
        return Err(Error::InvalidArgument("no tolerances given".into()));
    }
    let mut t = tolerances.to_vec();
    t.sort_by(|a, b| a.partial_cmp(b).unwrap());
    Ok(t)
}

/// Accuracy under each tolerance: a prediction counts as correct when the
/// geodesic distance from its estimated region center to the true
/// direction is within the tolerance.
pub fn tolerance_accuracy(
    preds: &[EstimatedViewpoint],
    gts: &[SphericalDirection],
    p: &SpherePixelization,
    tolerances: &[f64],
) -> Result<ToleranceAccuracyReport> {
    check_lengths(preds.len(), gts.len())?;
    let tolerances = sorted_tolerances(tolerances)?;
    let mut hits = vec![0usize; tolerances.len()];
    for (pred, gt) in preds.iter().zip(gts) {
        let d = geodesic_distance_deg(p.center_of(pred.v_mu)?, *gt);
        for (i, &t) in tolerances.iter().enumerate() {
            if d <= t {
                hits[i] += 1;
            }
        }
    }
    let n = preds.len();
    ToleranceAccuracyReport::new(
        tolerances,
        hits.iter().map(|&h| h as f64 / n as f64).collect(),
        n,
    )
}

/// Per-ground-truth-label misclassification counts at one tolerance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorMap {
    pub tolerance_deg: f64,
    /// Misclassified-sample count per ground-truth label.
    pub counts: Vec<usize>,
    /// (azimuth, elevation) of each label center, for plotting.
    pub centers: Vec<(f64, f64)>,
}

impl ErrorMap {
    pub fn total(&self) -> usize {
        self.counts.iter().sum()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("label,azimuth_deg,elevation_deg,miss_count\n");
        for (l, (c, (az, el))) in self.counts.iter().zip(&self.centers).enumerate() {
            out.push_str(&format!("{l},{az},{el},{c}\n"));
        }
        out
    }

    /// Equirectangular heatmap of the miss counts.
    pub fn to_heatmap(
        &self,
        p: &SpherePixelization,
        width: usize,
        height: usize,
    ) -> Result<RenderedImage> {
        let values: Vec<f64> = self.counts.iter().map(|&c| c as f64).collect();
        imgio::heatmap_equirect(p, &values, width, height)
    }
}

/// Count, per ground-truth label, the samples whose estimate errs by more
/// than the tolerance.
pub fn error_map(
    preds: &[EstimatedViewpoint],
    gts: &[SphericalDirection],
    p: &SpherePixelization,
    tolerance_deg: f64,
) -> Result<ErrorMap> {
    check_lengths(preds.len(), gts.len())?;
    let mut counts = vec![0usize; p.n_pixels()];
    for (pred, gt) in preds.iter().zip(gts) {
        let d = geodesic_distance_deg(p.center_of(pred.v_mu)?, *gt);
        if d > tolerance_deg {
            counts[p.label_of(*gt).index()] += 1;
        }
    }
    let centers = (0..p.n_pixels())
        .map(|l| {
            let c = p.center_of(ViewpointLabel(l)).expect("label in range");
            (c.azimuth_deg(), c.elevation_deg())
        })
        .collect();
    Ok(ErrorMap {
        tolerance_deg,
        counts,
        centers,
    })
}

/// Indices of the k highest-probability labels, ties resolved towards
/// lower indices.
pub fn top_k_labels(dist: &PredictedDistribution, k: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..dist.len()).collect();
    let p = dist.probabilities();
    order.sort_by(|&a, &b| p[b].partial_cmp(&p[a]).unwrap().then(a.cmp(&b)));
    order.truncate(k);
    order
}

/// For each sample take its k most probable labels and report the
/// fraction whose centers lie within each tolerance of the true
/// direction, averaged over samples.
pub fn topk_region_accuracy(
    dists: &[PredictedDistribution],
    k: usize,
    gts: &[SphericalDirection],
    p: &SpherePixelization,
    tolerances: &[f64],
) -> Result<ToleranceAccuracyReport> {
    check_lengths(dists.len(), gts.len())?;
    if k == 0 {
        return Err(Error::InvalidArgument("k must be >= 1".into()));
    }
    if k > p.n_pixels() {
        return Err(Error::InvalidArgument(format!(
            "k = {k} exceeds the {} labels",
            p.n_pixels()
        )));
    }
    let tolerances = sorted_tolerances(tolerances)?;
    let mut fracs = vec![0.0f64; tolerances.len()];
    for (dist, gt) in dists.iter().zip(gts) {
        if dist.len() != p.n_pixels() {
            return Err(Error::ShapeMismatch(format!(
                "distribution over {} labels, pixelization has {}",
                dist.len(),
                p.n_pixels()
            )));
        }
        let top = top_k_labels(dist, k);
        for (i, &t) in tolerances.iter().enumerate() {
            let within = top
                .iter()
                .filter(|&&l| {
                    geodesic_distance_deg(
                        p.center_of(ViewpointLabel(l)).expect("label in range"),
                        *gt,
                    ) <= t
                })
                .count();
            fracs[i] += within as f64 / k as f64;
        }
    }
    let n = dists.len();
    ToleranceAccuracyReport::new(
        tolerances,
        fracs.iter().map(|&f| f / n as f64).collect(),
        n,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pixelization() -> SpherePixelization {
        SpherePixelization::new(2).unwrap()
    }

    fn one_hot(n: usize, at: usize) -> PredictedDistribution {
        let mut v = vec![0.0; n];
        v[at] = 1.0;
        PredictedDistribution::new(v).unwrap()
    }

    #[test]
    fn one_hot_estimate_has_zero_sigma() {
        let p = pixelization();
        let est = estimate_viewpoint(&one_hot(48, 31), &p).unwrap();
        assert_eq!(est.v_mu, ViewpointLabel(31));
        assert_eq!(est.v_sigma_deg, 0.0);
    }

    #[test]
    fn uniform_estimate_matches_exhaustive_oracle() {
        let p = pixelization();
        let dist = PredictedDistribution::new(vec![1.0 / 48.0; 48]).unwrap();
        let est = estimate_viewpoint(&dist, &p).unwrap();
        assert_eq!(est.v_mu, ViewpointLabel(0), "tie rule picks label 0");
        // Independent oracle: direct exhaustive sum of distances from
        // label 0's center.
        let c0 = p.center_of(ViewpointLabel(0)).unwrap();
        let expect: f64 = (0..48)
            .map(|l| geodesic_distance_deg(p.center_of(ViewpointLabel(l)).unwrap(), c0) / 48.0)
            .sum();
        assert!((est.v_sigma_deg - expect).abs() < 1e-12);
        assert!(est.v_sigma_deg > 30.0, "uniform spread is wide");
    }

    #[test]
    fn half_half_mass_ties_to_lower_index() {
        let p = pixelization();
        let mut v = vec![0.0; 48];
        v[9] = 0.5;
        v[30] = 0.5;
        let est = estimate_viewpoint(&PredictedDistribution::new(v).unwrap(), &p).unwrap();
        assert_eq!(est.v_mu, ViewpointLabel(9));
        assert!(est.v_sigma_deg > 0.0);
    }

    #[test]
    fn sigma_zero_iff_one_hot() {
        let p = pixelization();
        for l in [0usize, 17, 47] {
            let est = estimate_viewpoint(&one_hot(48, l), &p).unwrap();
            assert_eq!(est.v_sigma_deg, 0.0);
        }
        let mut v = vec![0.0; 48];
        v[3] = 0.999;
        v[40] = 0.001;
        let est = estimate_viewpoint(&PredictedDistribution::new(v).unwrap(), &p).unwrap();
        assert!(est.v_sigma_deg > 0.0);
    }

    #[test]
    fn perfect_predictions_are_fully_accurate() {
        let p = pixelization();
        let preds: Vec<EstimatedViewpoint> = (0..48)
            .map(|l| EstimatedViewpoint {
                v_mu: ViewpointLabel(l),
                v_sigma_deg: 0.0,
            })
            .collect();
        let gts: Vec<SphericalDirection> = (0..48)
            .map(|l| p.center_of(ViewpointLabel(l)).unwrap())
            .collect();
        let report = tolerance_accuracy(&preds, &gts, &p, &DEFAULT_TOLERANCES).unwrap();
        assert!(report.accuracies.iter().all(|&a| a == 1.0));
        assert_eq!(report.sample_count, 48);
    }

    #[test]
    fn antipodal_predictions_have_zero_accuracy() {
        let p = pixelization();
        let gts: Vec<SphericalDirection> = (0..48)
            .map(|l| p.center_of(ViewpointLabel(l)).unwrap())
            .collect();
        let preds: Vec<EstimatedViewpoint> = gts
            .iter()
            .map(|gt| {
                let anti = SphericalDirection::new(
                    gt.azimuth_deg() + 180.0,
                    -gt.elevation_deg(),
                )
                .unwrap();
                EstimatedViewpoint {
                    v_mu: p.label_of(anti),
                    v_sigma_deg: 0.0,
                }
            })
            .collect();
        let report = tolerance_accuracy(&preds, &gts, &p, &DEFAULT_TOLERANCES).unwrap();
        assert!(report.accuracies.iter().all(|&a| a == 0.0));
    }

    #[test]
    fn hand_placed_fixture_counts_match() {
        let p = pixelization();
        // 10 samples at label centers; push d of them one ring over so the
        // distances are either 0 or > 15 degrees.
        let labels = [0usize, 1, 2, 3, 20, 21, 22, 23, 40, 41];
        let wrong = [true, false, true, false, false, true, false, false, true, false];
        let gts: Vec<SphericalDirection> = labels
            .iter()
            .map(|&l| p.center_of(ViewpointLabel(l)).unwrap())
            .collect();
        let preds: Vec<EstimatedViewpoint> = labels
            .iter()
            .zip(wrong)
            .map(|(&l, w)| {
                let target = if w {
                    let c = p.center_of(ViewpointLabel(l)).unwrap();
                    let anti =
                        SphericalDirection::new(c.azimuth_deg() + 180.0, -c.elevation_deg())
                            .unwrap();
                    p.label_of(anti)
                } else {
                    ViewpointLabel(l)
                };
                EstimatedViewpoint {
                    v_mu: target,
                    v_sigma_deg: 0.0,
                }
            })
            .collect();
        let report = tolerance_accuracy(&preds, &gts, &p, &[15.0]).unwrap();
        assert!((report.accuracies[0] - 0.6).abs() < 1e-12);
    }

    #[test]
    fn accuracy_monotone_in_tolerance() {
        let p = pixelization();
        let mut rng_state = 123u64;
        let mut next = move || {
            rng_state = rng_state.wrapping_mul(6364136223846793005).wrapping_add(1);
            (rng_state >> 33) as usize
        };
        let gts: Vec<SphericalDirection> = (0..200)
            .map(|_| p.center_of(ViewpointLabel(next() % 48)).unwrap())
            .collect();
        let preds: Vec<EstimatedViewpoint> = (0..200)
            .map(|_| EstimatedViewpoint {
                v_mu: ViewpointLabel(next() % 48),
                v_sigma_deg: 0.0,
            })
            .collect();
        let report =
            tolerance_accuracy(&preds, &gts, &p, &[15.0, 2.0, 30.0, 8.0, 60.0]).unwrap();
        for pair in report.accuracies.windows(2) {
            assert!(pair[1] >= pair[0]);
        }
    }

    #[test]
    fn error_map_perfect_predictions_all_zero() {
        let p = pixelization();
        let gts: Vec<SphericalDirection> = (0..48)
            .map(|l| p.center_of(ViewpointLabel(l)).unwrap())
            .collect();
        let preds: Vec<EstimatedViewpoint> = (0..48)
            .map(|l| EstimatedViewpoint {
                v_mu: ViewpointLabel(l),
                v_sigma_deg: 0.0,
            })
            .collect();
        let map = error_map(&preds, &gts, &p, 5.0).unwrap();
        assert_eq!(map.total(), 0);
    }

    #[test]
    fn error_map_single_miss_lands_on_ground_truth_label() {
        let p = pixelization();
        let gt_label = 13usize;
        let gts = vec![p.center_of(ViewpointLabel(gt_label)).unwrap()];
        let wrong = {
            let c = gts[0];
            let anti =
                SphericalDirection::new(c.azimuth_deg() + 180.0, -c.elevation_deg()).unwrap();
            p.label_of(anti)
        };
        let preds = vec![EstimatedViewpoint {
            v_mu: wrong,
            v_sigma_deg: 0.0,
        }];
        let map = error_map(&preds, &gts, &p, 5.0).unwrap();
        assert_eq!(map.total(), 1);
        assert_eq!(map.counts[gt_label], 1);
    }

    #[test]
    fn error_map_total_reconciles_with_accuracy() {
        let p = pixelization();
        let mut state = 5u64;
        let mut next = move || {
            state = state.wrapping_mul(2862933555777941757).wrapping_add(3037000493);
            (state >> 33) as usize
        };
        let gts: Vec<SphericalDirection> = (0..300)
            .map(|_| p.center_of(ViewpointLabel(next() % 48)).unwrap())
            .collect();
        let preds: Vec<EstimatedViewpoint> = (0..300)
            .map(|_| EstimatedViewpoint {
                v_mu: ViewpointLabel(next() % 48),
                v_sigma_deg: 0.0,
            })
            .collect();
        let tol = 8.0;
        let report = tolerance_accuracy(&preds, &gts, &p, &[tol]).unwrap();
        let map = error_map(&preds, &gts, &p, tol).unwrap();
        let misses = 300 - (report.accuracies[0] * 300.0).round() as usize;
        assert_eq!(map.total(), misses);
    }

    #[test]
    fn topk_equals_accuracy_for_k1_perfect_argmax() {
        let p = pixelization();
        let gts: Vec<SphericalDirection> = (0..48)
            .map(|l| p.center_of(ViewpointLabel(l)).unwrap())
            .collect();
        let dists: Vec<PredictedDistribution> = (0..48).map(|l| one_hot(48, l)).collect();
        let preds: Vec<EstimatedViewpoint> = dists
            .iter()
            .map(|d| estimate_viewpoint(d, &p).unwrap())
            .collect();
        let a = topk_region_accuracy(&dists, 1, &gts, &p, &DEFAULT_TOLERANCES).unwrap();
        let b = tolerance_accuracy(&preds, &gts, &p, &DEFAULT_TOLERANCES).unwrap();
        assert_eq!(a.accuracies, b.accuracies);
    }

    #[test]
    fn topk_uniform_matches_exhaustive_enumeration() {
        let p = pixelization();
        let dist = PredictedDistribution::new(vec![1.0 / 48.0; 48]).unwrap();
        let gt = p.center_of(ViewpointLabel(30)).unwrap();
        let tol = 25.0;
        let k = 12;
        // Tie rule: a uniform distribution selects labels 0..12. The
        // oracle enumerates those distances directly.
        let expect = (0..k)
            .filter(|&l| {
                geodesic_distance_deg(p.center_of(ViewpointLabel(l)).unwrap(), gt) <= tol
            })
            .count() as f64
            / k as f64;
        let report =
            topk_region_accuracy(&[dist], k, &[gt], &p, &[tol]).unwrap();
        assert!((report.accuracies[0] - expect).abs() < 1e-12);
    }

    #[test]
    fn topk_full_set_is_coverage_fraction() {
        let p = pixelization();
        let dist = PredictedDistribution::new(vec![1.0 / 48.0; 48]).unwrap();
        let gt = p.center_of(ViewpointLabel(5)).unwrap();
        let tol = 30.0;
        let within = (0..48)
            .filter(|&l| {
                geodesic_distance_deg(p.center_of(ViewpointLabel(l)).unwrap(), gt) <= tol
            })
            .count();
        let report = topk_region_accuracy(&[dist], 48, &[gt], &p, &[tol]).unwrap();
        assert!((report.accuracies[0] - within as f64 / 48.0).abs() < 1e-12);
    }

    #[test]
    fn topk_rejects_bad_k() {
        let p = pixelization();
        let dist = PredictedDistribution::new(vec![1.0 / 48.0; 48]).unwrap();
        let gt = p.center_of(ViewpointLabel(0)).unwrap();
        assert!(topk_region_accuracy(&[dist.clone()], 0, &[gt], &p, &[5.0]).is_err());
        assert!(topk_region_accuracy(&[dist], 49, &[gt], &p, &[5.0]).is_err());
    }

    #[test]
    fn length_mismatch_and_empty_inputs_error() {
        let p = pixelization();
        let gt = p.center_of(ViewpointLabel(0)).unwrap();
        let pred = EstimatedViewpoint {
            v_mu: ViewpointLabel(0),
            v_sigma_deg: 0.0,
        };
        assert!(tolerance_accuracy(&[], &[], &p, &[5.0]).is_err());
        assert!(tolerance_accuracy(&[pred], &[gt, gt], &p, &[5.0]).is_err());
    }

    #[test]
    fn report_csv_has_all_rows() {
        let p = pixelization();
        let preds = vec![EstimatedViewpoint {
            v_mu: ViewpointLabel(0),
            v_sigma_deg: 0.0,
        }];
        let gts = vec![p.center_of(ViewpointLabel(0)).unwrap()];
        let report = tolerance_accuracy(&preds, &gts, &p, &DEFAULT_TOLERANCES).unwrap();
        let csv = report.to_csv();
        assert_eq!(csv.lines().count(), 6);
        let map = error_map(&preds, &gts, &p, 5.0).unwrap();
        assert_eq!(map.to_csv().lines().count(), 49);
        assert_eq!(map.to_heatmap(&p, 32, 16).unwrap().width(), 32);
    }
}
