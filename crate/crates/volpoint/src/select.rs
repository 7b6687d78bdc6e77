//! The two applications built on viewpoint estimation: viewing-map
//! accumulation over an image collection, and similarity-weighted
//! viewpoint voting for best-view selection.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imgio;
use crate::model::{self, Parameters, PredictedDistribution};
use crate::render::{
    make_camera, render, CameraOverrides, LightingConfig, Projection, RenderedImage,
};
use crate::transfer::{ColorTF, OpacityTF};
use crate::viewsphere::{SphericalDirection, SpherePixelization, ViewpointLabel};
use crate::volume::VolumeGrid;

/// Default size of the per-voter render set: 8 tilts x 2 backgrounds.
pub const DEFAULT_VOTING_RENDERS: usize = 16;

/// Accumulated predicted distributions of an image collection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ViewingMap {
    pub accumulated: Vec<f64>,
    pub source_count: usize,
}

impl ViewingMap {
    pub fn to_heatmap(
        &self,
        p: &SpherePixelization,
        width: usize,
        height: usize,
    ) -> Result<RenderedImage> {
        imgio::heatmap_equirect(p, &self.accumulated, width, height)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("label,accumulated_probability\n");
        for (l, v) in self.accumulated.iter().enumerate() {
            out.push_str(&format!("{l},{v}\n"));
        }
        out
    }
}

/// Elementwise sum of unit distributions; the map's mass equals the
/// number of source images.
pub fn viewing_map(dists: &[PredictedDistribution]) -> Result<ViewingMap> {
    let first = dists
        .first()
        .ok_or_else(|| Error::InvalidArgument("viewing map needs at least one image".into()))?;
    let mut accumulated = vec![0.0; first.len()];
    for d in dists {
        if d.len() != accumulated.len() {
            return Err(Error::ShapeMismatch(
                "distributions have differing lengths".into(),
            ));
        }
        for (acc, &p) in accumulated.iter_mut().zip(d.probabilities()) {
            *acc += p;
        }
    }
    Ok(ViewingMap {
        accumulated,
        source_count: dists.len(),
    })
}

/// Cosine similarity; zero vectors compare as 0.
pub fn cosine_similarity(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len(), "feature length mismatch");
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        dot / (na * nb)
    }
}

/// Exponential vote weight: exp((w - 0.5) * |C| / 10).
pub fn exponential_weight(w: f64, set_size: usize) -> f64 {
    ((w - 0.5) * set_size as f64 / 10.0).exp()
}

/// Render `k` images of the volume at the region center of `label`,
/// cycling through evenly spaced camera tilts and both background colors,
/// with the zoom drawn per render. This is the comparison set for the
/// feature-similarity weight.
#[allow(clippy::too_many_arguments)]
pub fn voting_render_set<R: Rng + ?Sized>(
    volume: &VolumeGrid,
    otf: &OpacityTF,
    ctf: &ColorTF,
    p: &SpherePixelization,
    label: ViewpointLabel,
    k: usize,
    image_size: (usize, usize),
    rng: &mut R,
) -> Result<Vec<RenderedImage>> {
    if k == 0 {
        return Err(Error::InvalidArgument("render set must be non-empty".into()));
    }
    let radius = volume.viewing_sphere_radius();
    let n_tilts = k.div_ceil(2);
    (0..k)
        .map(|j| {
            let background = if j % 2 == 0 { [0.0; 3] } else { [1.0; 3] };
            let tilt = 360.0 * (j / 2) as f64 / n_tilts as f64;
            let scale = rng.gen_range(1.0..=1.8);
            let camera = make_camera(
                p,
                label,
                radius,
                &CameraOverrides {
                    tilt_deg: Some(tilt),
                    scale: Some(scale),
                    image_size: Some(image_size),
                    projection: Some(Projection::Parallel),
                    ..Default::default()
                },
            )?;
            render(
                volume,
                otf,
                ctf,
                &camera,
                &LightingConfig::headlight(0.9),
                background,
            )
        })
        .collect()
}

/// Similarity weight of a collected image against the volume rendered at
/// its estimated viewpoint: the maximum feature cosine over the render
/// set.
#[allow(clippy::too_many_arguments)]
pub fn similarity_weight<R: Rng + ?Sized>(
    volume: &VolumeGrid,
    otf: &OpacityTF,
    ctf: &ColorTF,
    collected: &RenderedImage,
    label: ViewpointLabel,
    extractor: &Parameters,
    p: &SpherePixelization,
    k: usize,
    rng: &mut R,
) -> Result<f64> {
    let image_size = (extractor.spec.input_h, extractor.spec.input_w);
    let set = voting_render_set(volume, otf, ctf, p, label, k, image_size, rng)?;
    let collected_features = model::feature_vector(extractor, collected)?;
    let mut best = f64::NEG_INFINITY;
    for r in &set {
        let f = model::feature_vector(extractor, r)?;
        best = best.max(cosine_similarity(&f, &collected_features));
    }
    Ok(best)
}

/// Weighted accumulation of voter distributions; returns the optimal
/// label (ties to the lowest index) and the summed vector.
pub fn accumulate_votes(
    dists: &[PredictedDistribution],
    weights: &[f64],
) -> Result<(ViewpointLabel, Vec<f64>)> {
    if dists.is_empty() || dists.len() != weights.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} distributions vs {} weights",
            dists.len(),
            weights.len()
        )));
    }
    let n = dists[0].len();
    let mut summed = vec![0.0; n];
    for (d, &w) in dists.iter().zip(weights) {
        if d.len() != n {
            return Err(Error::ShapeMismatch(
                "distributions have differing lengths".into(),
            ));
        }
        for (acc, &p) in summed.iter_mut().zip(d.probabilities()) {
            *acc += w * p;
        }
    }
    let mut best = 0;
    for (i, &v) in summed.iter().enumerate() {
        if v > summed[best] {
            best = i;
        }
    }
    Ok((ViewpointLabel(best), summed))
}

/// Per-voter record in a [`VotingResult`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VoterDiagnostics {
    pub estimated_label: usize,
    pub similarity: f64,
    pub exp_weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VotingResult {
    pub optimal_label: usize,
    pub summed_probability: Vec<f64>,
    pub voters: Vec<VoterDiagnostics>,
}

impl VotingResult {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("result serializes")
    }

    pub fn summary_csv(&self) -> String {
        let mut out = String::from("voter,estimated_label,similarity,exp_weight\n");
        for (i, v) in self.voters.iter().enumerate() {
            out.push_str(&format!(
                "{i},{},{},{}\n",
                v.estimated_label, v.similarity, v.exp_weight
            ));
        }
        out
    }
}

/// Similarity-voting viewpoint selection: estimate each collected image's
/// viewpoint distribution, weight it by the exponential feature
/// similarity between the image and renders of the query volume at the
/// estimated viewpoint, and sum the weighted votes.
#[allow(clippy::too_many_arguments)]
pub fn select_viewpoint<R: Rng + ?Sized>(
    volume: &VolumeGrid,
    otf: &OpacityTF,
    ctf: &ColorTF,
    collected: &[RenderedImage],
    viewpoint_net: &Parameters,
    extractor: &Parameters,
    p: &SpherePixelization,
    renders_per_voter: usize,
    rng: &mut R,
) -> Result<VotingResult> {
    if collected.is_empty() {
        return Err(Error::InvalidArgument(
            "collected image set must be non-empty".into(),
        ));
    }
    let set_size = collected.len();
    let mut dists = Vec::with_capacity(set_size);
    let mut weights = Vec::with_capacity(set_size);
    let mut voters = Vec::with_capacity(set_size);
    for image in collected {
        let dist = model::predict(viewpoint_net, image)?;
        let label = ViewpointLabel(dist.argmax());
        let w = similarity_weight(
            volume,
            otf,
            ctf,
            image,
            label,
            extractor,
            p,
            renders_per_voter,
            rng,
        )?;
        let w_exp = exponential_weight(w, set_size);
        voters.push(VoterDiagnostics {
            estimated_label: label.index(),
            similarity: w,
            exp_weight: w_exp,
        });
        dists.push(dist);
        weights.push(w_exp);
    }
    let (optimal, summed) = accumulate_votes(&dists, &weights)?;
    Ok(VotingResult {
        optimal_label: optimal.index(),
        summed_probability: summed,
        voters,
    })
}

/// Classify the volume by majority vote over `m` renders from random
/// viewpoints; ties resolve to the lowest category index. Returns the
/// winning category index and its name.
#[allow(clippy::too_many_arguments)]
pub fn determine_category<R: Rng + ?Sized>(
    volume: &VolumeGrid,
    otf: &OpacityTF,
    ctf: &ColorTF,
    classifier: &Parameters,
    category_names: &[String],
    m: usize,
    rng: &mut R,
) -> Result<(usize, String)> {
    if m == 0 {
        return Err(Error::InvalidArgument("need at least one render".into()));
    }
    if category_names.len() != classifier.spec.n_outputs {
        return Err(Error::ShapeMismatch(format!(
            "{} category names for {} outputs",
            category_names.len(),
            classifier.spec.n_outputs
        )));
    }
    let image_size = (classifier.spec.input_h, classifier.spec.input_w);
    let radius = volume.viewing_sphere_radius();
    let mut votes = vec![0usize; category_names.len()];
    for _ in 0..m {
        let z: f64 = rng.gen_range(-1.0..=1.0);
        let az: f64 = rng.gen_range(0.0..360.0);
        let direction =
            SphericalDirection::new(az, z.clamp(-1.0, 1.0).asin().to_degrees())?;
        let tilt: f64 = rng.gen_range(0.0..360.0);
        let background = if rng.gen_bool(0.5) { [0.0; 3] } else { [1.0; 3] };
        let scale: f64 = rng.gen_range(1.0..=1.8);
        let headlight: f64 = rng.gen_range(0.7..=1.0);
        let camera = crate::render::Camera {
            direction,
            tilt_deg: tilt,
            projection: Projection::Parallel,
            scale,
            image_size,
            fov_deg: 45.0,
            viewing_radius: radius,
        };
        let img = render(
            volume,
            otf,
            ctf,
            &camera,
            &LightingConfig::headlight(headlight),
            background,
        )?;
        votes[model::predict(classifier, &img)?.argmax()] += 1;
    }
    let mut best = 0;
    for (i, &v) in votes.iter().enumerate() {
        if v > votes[best] {
            best = i;
        }
    }
    Ok((best, category_names[best].clone()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::NetworkSpec;
    use crate::transfer::designed_tf;
    use crate::volume::{synth_volume, PhantomKind};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn one_hot(n: usize, at: usize) -> PredictedDistribution {
        let mut v = vec![0.0; n];
        v[at] = 1.0;
        PredictedDistribution::new(v).unwrap()
    }

    #[test]
    fn viewing_map_single_one_hot() {
        let map = viewing_map(&[one_hot(48, 9)]).unwrap();
        assert_eq!(map.accumulated[9], 1.0);
        assert_eq!(map.accumulated.iter().sum::<f64>(), 1.0);
        assert_eq!(map.source_count, 1);
    }

    #[test]
    fn viewing_map_is_linear_and_mass_preserving() {
        let d = one_hot(48, 3);
        let map = viewing_map(&[d.clone(), d.clone()]).unwrap();
        assert_eq!(map.accumulated[3], 2.0);
        let uniform = PredictedDistribution::new(vec![1.0 / 48.0; 48]).unwrap();
        let mixed = viewing_map(&[d, uniform]).unwrap();
        assert!((mixed.accumulated.iter().sum::<f64>() - 2.0).abs() < 1e-6);
    }

    #[test]
    fn viewing_map_permutation_invariant() {
        let a = one_hot(48, 1);
        let b = one_hot(48, 2);
        let c = PredictedDistribution::new(vec![1.0 / 48.0; 48]).unwrap();
        let m1 = viewing_map(&[a.clone(), b.clone(), c.clone()]).unwrap();
        let m2 = viewing_map(&[c, a, b]).unwrap();
        for (x, y) in m1.accumulated.iter().zip(&m2.accumulated) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn viewing_map_rejects_empty() {
        assert!(viewing_map(&[]).is_err());
    }

    #[test]
    fn exponential_weight_fixed_points() {
        assert_eq!(exponential_weight(0.5, 1), 1.0);
        assert_eq!(exponential_weight(0.5, 100), 1.0);
        assert!((exponential_weight(0.6, 100) - std::f64::consts::E).abs() < 1e-12);
        // Strict monotonicity.
        assert!(exponential_weight(0.7, 40) > exponential_weight(0.69, 40));
    }

    #[test]
    fn cosine_properties() {
        let a = [1.0, 2.0, -3.0];
        let b = [0.5, -1.0, 2.0];
        let c = cosine_similarity(&a, &b);
        assert!((-1.0..=1.0).contains(&c));
        let scaled: Vec<f64> = a.iter().map(|x| x * 7.5).collect();
        assert!((cosine_similarity(&scaled, &b) - c).abs() < 1e-12);
        assert_eq!(cosine_similarity(&[0.0; 3], &b), 0.0);
        assert!((cosine_similarity(&a, &a) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn accumulate_votes_matches_brute_force() {
        // Three voters with known distributions and weights.
        let d1 = one_hot(48, 10);
        let d2 = one_hot(48, 20);
        let mut v3 = vec![0.0; 48];
        v3[10] = 0.4;
        v3[20] = 0.35;
        v3[30] = 0.25;
        let d3 = PredictedDistribution::new(v3).unwrap();
        let weights = [1.2, 2.0, 0.7];
        let dists = [d1, d2, d3];
        let (optimal, summed) = accumulate_votes(&dists, &weights).unwrap();
        // Brute-force oracle over all labels.
        let mut best = 0;
        let mut best_val = f64::NEG_INFINITY;
        for l in 0..48 {
            let v: f64 = dists
                .iter()
                .zip(&weights)
                .map(|(d, &w)| w * d.probabilities()[l])
                .sum();
            assert!((v - summed[l]).abs() < 1e-12);
            if v > best_val {
                best_val = v;
                best = l;
            }
        }
        assert_eq!(optimal.index(), best);
        assert_eq!(optimal.index(), 20);
    }

    #[test]
    fn accumulate_votes_invariant_under_weight_scaling() {
        let d1 = one_hot(48, 5);
        let mut v2 = vec![0.0; 48];
        v2[5] = 0.3;
        v2[6] = 0.7;
        let d2 = PredictedDistribution::new(v2).unwrap();
        let dists = [d1, d2];
        let (a, _) = accumulate_votes(&dists, &[1.0, 0.8]).unwrap();
        let (b, _) = accumulate_votes(&dists, &[5.0, 4.0]).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn single_voter_equivalence() {
        let mut v = vec![0.0; 48];
        v[17] = 0.6;
        v[3] = 0.4;
        let d = PredictedDistribution::new(v).unwrap();
        let (optimal, _) = accumulate_votes(&[d.clone()], &[0.123]).unwrap();
        assert_eq!(optimal.index(), d.argmax());
    }

    #[test]
    fn two_identical_voters_match_single() {
        let mut v = vec![0.0; 48];
        v[8] = 0.55;
        v[9] = 0.45;
        let d = PredictedDistribution::new(v).unwrap();
        let (single, _) = accumulate_votes(&[d.clone()], &[1.0]).unwrap();
        let (double, _) = accumulate_votes(&[d.clone(), d], &[0.3, 0.9]).unwrap();
        assert_eq!(single, double);
    }

    #[test]
    fn self_similarity_weight_is_one() {
        let volume = synth_volume(PhantomKind::LBlock, (16, 16, 16), 3).unwrap();
        let (otf, ctf) = designed_tf(PhantomKind::LBlock);
        let p = SpherePixelization::new(2).unwrap();
        let spec = NetworkSpec {
            input_h: 16,
            input_w: 16,
            conv_channels: vec![4],
            fc_hidden: 12,
            n_outputs: 48,
        };
        let extractor = Parameters::init(&spec, 5).unwrap();
        let label = ViewpointLabel(11);
        // Build the render set and pick one of its members as the
        // collected image; under the same seed the weight must be 1.
        let mut rng = ChaCha8Rng::seed_from_u64(40);
        let set =
            voting_render_set(&volume, &otf, &ctf, &p, label, 8, (16, 16), &mut rng).unwrap();
        let collected = set[3].clone();
        let mut rng2 = ChaCha8Rng::seed_from_u64(40);
        let w = similarity_weight(
            &volume, &otf, &ctf, &collected, label, &extractor, &p, 8, &mut rng2,
        )
        .unwrap();
        assert!((w - 1.0).abs() < 1e-6, "self weight {w}");
        assert!((-1.0..=1.0 + 1e-12).contains(&w));
    }

    #[test]
    fn similarity_weight_is_deterministic() {
        let volume = synth_volume(PhantomKind::ConeWithHandle, (16, 16, 16), 1).unwrap();
        let (otf, ctf) = designed_tf(PhantomKind::ConeWithHandle);
        let p = SpherePixelization::new(2).unwrap();
        let spec = NetworkSpec {
            input_h: 16,
            input_w: 16,
            conv_channels: vec![4],
            fc_hidden: 8,
            n_outputs: 48,
        };
        let extractor = Parameters::init(&spec, 9).unwrap();
        let collected = voting_render_set(
            &volume,
            &otf,
            &ctf,
            &p,
            ViewpointLabel(30),
            4,
            (16, 16),
            &mut ChaCha8Rng::seed_from_u64(1),
        )
        .unwrap()
        .remove(0);
        let run = |seed: u64| {
            similarity_weight(
                &volume,
                &otf,
                &ctf,
                &collected,
                ViewpointLabel(30),
                &extractor,
                &p,
                6,
                &mut ChaCha8Rng::seed_from_u64(seed),
            )
            .unwrap()
        };
        assert_eq!(run(7), run(7));
    }

    #[test]
    fn select_viewpoint_single_voter_follows_distribution() {
        let volume = synth_volume(PhantomKind::AsymmetricBlobs, (16, 16, 16), 2).unwrap();
        let (otf, ctf) = designed_tf(PhantomKind::AsymmetricBlobs);
        let p = SpherePixelization::new(2).unwrap();
        let spec = NetworkSpec {
            input_h: 16,
            input_w: 16,
            conv_channels: vec![4],
            fc_hidden: 8,
            n_outputs: 48,
        };
        let net = Parameters::init(&spec, 3).unwrap();
        let collected = vec![voting_render_set(
            &volume,
            &otf,
            &ctf,
            &p,
            ViewpointLabel(5),
            2,
            (16, 16),
            &mut ChaCha8Rng::seed_from_u64(2),
        )
        .unwrap()
        .remove(0)];
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let result = select_viewpoint(
            &volume, &otf, &ctf, &collected, &net, &net, &p, 4, &mut rng,
        )
        .unwrap();
        let expect = model::predict(&net, &collected[0]).unwrap().argmax();
        assert_eq!(result.optimal_label, expect);
        assert_eq!(result.voters.len(), 1);
        assert!(select_viewpoint(
            &volume,
            &otf,
            &ctf,
            &[],
            &net,
            &net,
            &p,
            4,
            &mut ChaCha8Rng::seed_from_u64(0)
        )
        .is_err());
    }

    #[test]
    fn determine_category_unanimous_and_deterministic() {
        let volume = synth_volume(PhantomKind::NestedShells, (16, 16, 16), 4).unwrap();
        let (otf, ctf) = designed_tf(PhantomKind::NestedShells);
        let spec = NetworkSpec {
            input_h: 16,
            input_w: 16,
            conv_channels: vec![4],
            fc_hidden: 8,
            n_outputs: 3,
        };
        // Zero weights with a biased output: every image votes class 2.
        let mut params = Parameters::init(&spec, 0).unwrap();
        params.tensors.fc2_w.iter_mut().for_each(|v| *v = 0.0);
        params.tensors.fc2_b[2] = 5.0;
        let names = vec!["a".to_string(), "b".to_string(), "c".to_string()];
        let run = |seed: u64| {
            determine_category(
                &volume,
                &otf,
                &ctf,
                &params,
                &names,
                5,
                &mut ChaCha8Rng::seed_from_u64(seed),
            )
            .unwrap()
        };
        let (idx, name) = run(3);
        assert_eq!(idx, 2);
        assert_eq!(name, "c");
        assert_eq!(run(5).0, 2);
        assert_eq!(run(5), run(5));
    }
}
