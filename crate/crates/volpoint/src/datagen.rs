//! Randomized training-image generation: enumerate viewpoint labels,
//! randomize every nuisance parameter (transfer-function jitter, colors,
//! tilt, projection, background, scale, lighting), render, and emit images
//! plus a JSONL manifest and a CSV summary.
//!
//! Everything is derived from one root seed. Each sample owns an
//! independent RNG stream keyed by its global index, so generation is
//! order-deterministic regardless of scheduling.

use std::fs;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::imgio;
use crate::render::{
    make_camera, render, Camera, CameraOverrides, LightingConfig, LightingMode, Projection,
};
use crate::transfer::{self, ColorTF, OpacityTF};
use crate::viewsphere::{SphericalDirection, SpherePixelization, ViewpointLabel};
use crate::volume::{synth_volume, PhantomKind, VolumeGrid};

/// Where a dataset volume comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case")]
pub enum VolumeSpec {
    Phantom {
        kind: PhantomKind,
        dims: (usize, usize, usize),
        seed: u64,
    },
    HeaderFile {
        path: PathBuf,
    },
}

impl VolumeSpec {
    pub fn load(&self) -> Result<VolumeGrid> {
        match self {
            VolumeSpec::Phantom { kind, dims, seed } => synth_volume(*kind, *dims, *seed),
            VolumeSpec::HeaderFile { path } => VolumeGrid::load_with_header(path),
        }
    }
}

/// Where a designed transfer function comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case")]
pub enum TfSpec {
    Designed { kind: PhantomKind },
    File { path: PathBuf },
}

impl TfSpec {
    pub fn load(&self) -> Result<(OpacityTF, ColorTF)> {
        match self {
            TfSpec::Designed { kind } => Ok(transfer::designed_tf(*kind)),
            TfSpec::File { path } => transfer::load_tf_file(path),
        }
    }

    pub fn id(&self) -> String {
        match self {
            TfSpec::Designed { kind } => format!("designed:{kind}"),
            TfSpec::File { path } => format!("file:{}", path.display()),
        }
    }
}

/// One (volume, designed TF) pair in the dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetEntry {
    pub volume: VolumeSpec,
    pub tf: TfSpec,
    /// Category name recorded in annotations (phantom name by default).
    pub category: String,
}

/// Closed sampling ranges for the randomized rendering parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamRanges {
    pub scale: (f64, f64),
    /// Headlight intensity in the env+headlight mode.
    pub headlight_mode2: (f64, f64),
    /// Headlight and scene intensities in the three-light mode.
    pub lights_mode3: (f64, f64),
    /// Scene-light distance as a multiple of the viewing-sphere radius.
    pub scene_radius_factor: (f64, f64),
    pub diffuse: (f64, f64),
    pub specular: (f64, f64),
    pub shininess: (f64, f64),
}

impl Default for ParamRanges {
    fn default() -> Self {
        ParamRanges {
            scale: (1.0, 1.8),
            headlight_mode2: (0.7, 1.0),
            lights_mode3: (0.35, 0.5),
            scene_radius_factor: (3.0, 5.0),
            diffuse: (0.25, 0.75),
            specular: (0.5, 1.0),
            shininess: (20.0, 100.0),
        }
    }
}

impl ParamRanges {
    fn validate(&self) -> Result<()> {
        for (name, (lo, hi)) in [
            ("scale", self.scale),
            ("headlight_mode2", self.headlight_mode2),
            ("lights_mode3", self.lights_mode3),
            ("scene_radius_factor", self.scene_radius_factor),
            ("diffuse", self.diffuse),
            ("specular", self.specular),
            ("shininess", self.shininess),
        ] {
            if !(lo <= hi) {
                return Err(Error::InvalidArgument(format!(
                    "range {name} requires lo <= hi, got [{lo}, {hi}]"
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationConfig {
    pub nside: u32,
    pub entries: Vec<DatasetEntry>,
    /// Samples rendered per (volume, TF) entry.
    pub images_per_tf: usize,
    pub image_size: (usize, usize),
    #[serde(default)]
    pub ranges: ParamRanges,
    /// Std of the opacity-keypoint jitter, as a fraction of the scalar
    /// domain.
    pub tf_jitter_sigma: f64,
    /// Pool size of distinct jittered TF variants per entry; samples share
    /// variants, letting a split keep train and test TFs disjoint.
    pub tf_variants: usize,
    /// Restrict round-robin label assignment to this subset of labels.
    #[serde(default)]
    pub label_subset: Option<Vec<usize>>,
    /// Lighting modes to draw from: subset of {1, 2, 3}.
    #[serde(default = "default_lighting_modes")]
    pub lighting_modes: Vec<u8>,
    /// Projections to draw from.
    #[serde(default = "default_projections")]
    pub projections: Vec<Projection>,
    /// "ppm" (default) or "png".
    pub image_format: String,
    pub seed: u64,
}

fn default_lighting_modes() -> Vec<u8> {
    vec![1, 2, 3]
}

fn default_projections() -> Vec<Projection> {
    vec![Projection::Parallel, Projection::Perspective]
}

impl GenerationConfig {
    pub fn desk_scale(entries: Vec<DatasetEntry>, seed: u64) -> Self {
        GenerationConfig {
            nside: 2,
            entries,
            images_per_tf: 200,
            image_size: (64, 64),
            ranges: ParamRanges::default(),
            tf_jitter_sigma: 0.02,
            tf_variants: 64,
            label_subset: None,
            lighting_modes: default_lighting_modes(),
            projections: default_projections(),
            image_format: "ppm".into(),
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.nside == 0 {
            return Err(Error::InvalidArgument("nside must be >= 1".into()));
        }
        if self.entries.is_empty() {
            return Err(Error::InvalidArgument("no dataset entries".into()));
        }
        if self.images_per_tf == 0 {
            return Err(Error::InvalidArgument("images_per_tf must be >= 1".into()));
        }
        if self.tf_variants == 0 {
            return Err(Error::InvalidArgument("tf_variants must be >= 1".into()));
        }
        if !(self.tf_jitter_sigma > 0.0) {
            return Err(Error::InvalidArgument(
                "tf_jitter_sigma must be positive".into(),
            ));
        }
        if self.image_format != "ppm" && self.image_format != "png" {
            return Err(Error::InvalidArgument(format!(
                "image_format must be ppm or png, got {}",
                self.image_format
            )));
        }
        if self.lighting_modes.is_empty()
            || self.lighting_modes.iter().any(|m| !(1..=3).contains(m))
        {
            return Err(Error::InvalidArgument(
                "lighting_modes must be a non-empty subset of {1, 2, 3}".into(),
            ));
        }
        if self.projections.is_empty() {
            return Err(Error::InvalidArgument(
                "projections must be non-empty".into(),
            ));
        }
        self.ranges.validate()
    }

    /// Stable hash of the full configuration.
    pub fn hash(&self) -> String {
        let json = serde_json::to_string(self).expect("config serializes");
        let mut hasher = Sha256::new();
        hasher.update(json.as_bytes());
        let digest = hasher.finalize();
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// Everything recorded about one generated sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleAnnotation {
    /// Image path relative to the manifest's directory.
    pub image_path: String,
    pub label: usize,
    /// The jittered direction the camera actually used.
    pub true_direction: SphericalDirection,
    pub tf_id: String,
    /// Jitter-stream id of the TF variant used.
    pub tf_variant: u64,
    pub category: String,
    pub camera: Camera,
    pub lighting: LightingConfig,
    pub background: [f64; 3],
    pub palette: ColorTF,
    /// Global sample index; also the RNG stream of this sample.
    pub rng_draw_index: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub config_hash: String,
    /// "train", "test" or "all".
    pub split: String,
    pub samples: Vec<SampleAnnotation>,
}

impl DatasetManifest {
    /// One JSON object per line: a header object, then one per sample.
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        let header = serde_json::json!({
            "config_hash": self.config_hash,
            "split": self.split,
            "n_samples": self.samples.len(),
        });
        out.push_str(&header.to_string());
        out.push('\n');
        for s in &self.samples {
            out.push_str(&serde_json::to_string(s).expect("annotation serializes"));
            out.push('\n');
        }
        out
    }

    pub fn from_jsonl(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        let first = lines
            .next()
            .ok_or_else(|| Error::parse("manifest", "empty file"))?;
        let header: serde_json::Value = serde_json::from_str(first)
            .map_err(|e| Error::parse("manifest header", e.to_string()))?;
        let config_hash = header["config_hash"]
            .as_str()
            .ok_or_else(|| Error::parse("manifest header", "missing config_hash"))?
            .to_string();
        let split = header["split"].as_str().unwrap_or("all").to_string();
        let samples = lines
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty())
            .map(|(i, l)| {
                serde_json::from_str(l)
                    .map_err(|e| Error::parse(format!("manifest line {}", i + 2), e.to_string()))
            })
            .collect::<Result<Vec<SampleAnnotation>>>()?;
        Ok(DatasetManifest {
            config_hash,
            split,
            samples,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_jsonl()).map_err(|e| Error::io(path.display().to_string(), e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text =
            fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
        Self::from_jsonl(&text)
    }

    /// Human-readable per-sample summary.
    pub fn summary_csv(&self) -> String {
        let mut out = String::from(
            "index,image_path,label,azimuth_deg,elevation_deg,tf_id,tf_variant,category,projection,background,scale,light_mode\n",
        );
        for (i, s) in self.samples.iter().enumerate() {
            let proj = match s.camera.projection {
                Projection::Parallel => "parallel",
                Projection::Perspective => "perspective",
            };
            let bg = if s.background == [0.0, 0.0, 0.0] {
                "black"
            } else {
                "white"
            };
            let mode = match s.lighting.mode {
                LightingMode::EnvOnly => 1,
                LightingMode::EnvHeadlight => 2,
                LightingMode::EnvHeadlightScene => 3,
            };
            out.push_str(&format!(
                "{i},{},{},{},{},{},{},{},{proj},{bg},{},{mode}\n",
                s.image_path,
                s.label,
                s.true_direction.azimuth_deg(),
                s.true_direction.elevation_deg(),
                s.tf_id,
                s.tf_variant,
                s.category,
                s.camera.scale,
            ));
        }
        out
    }
}

fn uniform<R: Rng + ?Sized>(rng: &mut R, range: (f64, f64)) -> f64 {
    if range.0 == range.1 {
        range.0
    } else {
        rng.gen_range(range.0..=range.1)
    }
}

/// The jittered opacity TF for a given entry/variant, derived only from
/// the root seed, so every sample sharing a variant sees the same TF.
fn variant_otf(
    base: &OpacityTF,
    sigma: f64,
    root_seed: u64,
    entry_idx: usize,
    variant: u64,
) -> OpacityTF {
    let mut rng = ChaCha8Rng::seed_from_u64(root_seed ^ 0x7f4a_9c1d_5e33_0b77);
    rng.set_stream((entry_idx as u64) << 32 | variant);
    base.jitter(sigma, &mut rng)
}

/// Generate the dataset into `out_dir`: images, `manifest.jsonl` and
/// `summary.csv`. Returns the manifest. Fully deterministic given the
/// config (including its seed).
pub fn generate_dataset(cfg: &GenerationConfig, out_dir: &Path) -> Result<DatasetManifest> {
    cfg.validate()?;
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir.display().to_string(), e))?;
    let p = SpherePixelization::new(cfg.nside)?;
    let labels: Vec<usize> = match &cfg.label_subset {
        Some(subset) => {
            for &l in subset {
                if l >= p.n_pixels() {
                    return Err(Error::LabelOutOfRange {
                        label: l,
                        n_pixels: p.n_pixels(),
                    });
                }
            }
            subset.clone()
        }
        None => (0..p.n_pixels()).collect(),
    };
    if labels.is_empty() {
        return Err(Error::InvalidArgument("empty label subset".into()));
    }

    let mut prepared = Vec::new();
    for entry in &cfg.entries {
        let volume = entry.volume.load()?;
        let (otf, ctf) = entry.tf.load()?;
        prepared.push((volume, otf, ctf, entry));
    }

    let per_entry = cfg.images_per_tf;
    let total = per_entry * cfg.entries.len();
    let samples: Vec<SampleAnnotation> = (0..total)
        .into_par_iter()
        .map(|g| -> Result<SampleAnnotation> {
            let entry_idx = g / per_entry;
            let i = g % per_entry;
            let (volume, base_otf, base_ctf, entry) = &prepared[entry_idx];
            let radius = volume.viewing_sphere_radius();

            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            rng.set_stream(g as u64 + 1);

            // Draw order is fixed; changing it changes every dataset.
            let label = ViewpointLabel(labels[i % labels.len()]);
            let direction = p.random_direction_within(label, &mut rng)?;
            let tilt = rng.gen_range(0.0..360.0);
            let projection = cfg.projections[rng.gen_range(0..cfg.projections.len())];
            let background = if rng.gen_bool(0.5) {
                [0.0, 0.0, 0.0]
            } else {
                [1.0, 1.0, 1.0]
            };
            let scale = uniform(&mut rng, cfg.ranges.scale);
            let mode = cfg.lighting_modes[rng.gen_range(0..cfg.lighting_modes.len())];
            let (lighting_mode, headlight, scene) = match mode {
                1 => (LightingMode::EnvOnly, 0.0, 0.0),
                2 => (
                    LightingMode::EnvHeadlight,
                    uniform(&mut rng, cfg.ranges.headlight_mode2),
                    0.0,
                ),
                _ => (
                    LightingMode::EnvHeadlightScene,
                    uniform(&mut rng, cfg.ranges.lights_mode3),
                    uniform(&mut rng, cfg.ranges.lights_mode3),
                ),
            };
            // Scene-light position: uniform direction, radius 3-5x the
            // viewing sphere. Drawn for every sample to keep the stream
            // layout independent of the mode.
            let scene_dir = {
                let z: f64 = rng.gen_range(-1.0..=1.0);
                let az: f64 = rng.gen_range(0.0..360.0);
                SphericalDirection::new(az, z.clamp(-1.0, 1.0).asin().to_degrees())?
            };
            let scene_radius = uniform(&mut rng, cfg.ranges.scene_radius_factor) * radius;
            let su = scene_dir.to_unit();
            let scene_position = [
                su[0] * scene_radius,
                su[1] * scene_radius,
                su[2] * scene_radius,
            ];
            let diffuse = uniform(&mut rng, cfg.ranges.diffuse);
            let specular = uniform(&mut rng, cfg.ranges.specular);
            let shininess = uniform(&mut rng, cfg.ranges.shininess);
            let tf_variant = rng.gen_range(0..cfg.tf_variants as u64);
            let palette = transfer::random_colors(&base_ctf.features(), background, &mut rng)?;

            let otf = variant_otf(
                base_otf,
                cfg.tf_jitter_sigma,
                cfg.seed,
                entry_idx,
                tf_variant,
            );
            let camera = make_camera(
                &p,
                label,
                radius,
                &CameraOverrides {
                    direction: Some(direction),
                    tilt_deg: Some(tilt),
                    projection: Some(projection),
                    scale: Some(scale),
                    image_size: Some(cfg.image_size),
                    fov_deg: None,
                },
            )?;
            let lighting = LightingConfig {
                mode: lighting_mode,
                headlight_intensity: headlight,
                scene_intensity: scene,
                scene_position,
                ambient: 1.0,
                diffuse,
                specular,
                shininess,
            };

            let img = render(volume, &otf, &palette, &camera, &lighting, background)?;
            let image_path = format!("img_{entry_idx}_{i:06}.{}", cfg.image_format);
            imgio::write_image(&out_dir.join(&image_path), &img)?;

            Ok(SampleAnnotation {
                image_path,
                label: label.index(),
                true_direction: direction,
                tf_id: entry.tf.id(),
                tf_variant,
                category: entry.category.clone(),
                camera,
                lighting,
                background,
                palette,
                rng_draw_index: g as u64,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let manifest = DatasetManifest {
        config_hash: cfg.hash(),
        split: "all".into(),
        samples,
    };
    manifest.save(&out_dir.join("manifest.jsonl"))?;
    fs::write(out_dir.join("summary.csv"), manifest.summary_csv())
        .map_err(|e| Error::io("summary.csv", e))?;
    Ok(manifest)
}

/// How [`split_manifest`] partitions samples.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SplitMode {
    /// Shuffle samples individually.
    Random,
    /// Keep all samples of a TF variant in the same side, so the test
    /// split only contains transfer functions never seen in training.
    ByTfVariant,
}

/// Split into (train, test) with the given test fraction.
pub fn split_manifest(
    m: &DatasetManifest,
    test_fraction: f64,
    seed: u64,
    mode: SplitMode,
) -> Result<(DatasetManifest, DatasetManifest)> {
    if m.samples.is_empty() {
        return Err(Error::InvalidArgument("empty manifest".into()));
    }
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "test fraction must lie in (0, 1), got {test_fraction}"
        )));
    }
    let n = m.samples.len();
    let n_test = ((n as f64 * test_fraction).round() as usize).clamp(1, n - 1);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut test_idx = vec![false; n];
    match mode {
        SplitMode::Random => {
            let mut order: Vec<usize> = (0..n).collect();
            shuffle(&mut order, &mut rng);
            for &i in order.iter().take(n_test) {
                test_idx[i] = true;
            }
        }
        SplitMode::ByTfVariant => {
            let mut groups: std::collections::BTreeMap<(String, u64), Vec<usize>> =
                std::collections::BTreeMap::new();
            for (i, s) in m.samples.iter().enumerate() {
                groups
                    .entry((s.tf_id.clone(), s.tf_variant))
                    .or_default()
                    .push(i);
            }
            let mut keys: Vec<_> = groups.keys().cloned().collect();
            shuffle(&mut keys, &mut rng);
            let mut assigned = 0usize;
            for key in keys {
                if assigned >= n_test {
                    break;
                }
                for &i in &groups[&key] {
                    test_idx[i] = true;
                }
                assigned += groups[&key].len();
            }
            if assigned == n {
                return Err(Error::InvalidArgument(
                    "TF-variant split assigned every sample to test; need more variants".into(),
                ));
            }
        }
    }
    let pick = |want_test: bool, split: &str| DatasetManifest {
        config_hash: m.config_hash.clone(),
        split: split.into(),
        samples: m
            .samples
            .iter()
            .enumerate()
            .filter(|(i, _)| test_idx[*i] == want_test)
            .map(|(_, s)| s.clone())
            .collect(),
    };
    Ok((pick(false, "train"), pick(true, "test")))
}

fn shuffle<T, R: Rng + ?Sized>(items: &mut [T], rng: &mut R) {
    for i in (1..items.len()).rev() {
        let j = rng.gen_range(0..=i);
        items.swap(i, j);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::viewsphere::SpherePixelization;

    fn tiny_config(seed: u64) -> GenerationConfig {
        let entries = vec![DatasetEntry {
            volume: VolumeSpec::Phantom {
                kind: PhantomKind::AsymmetricBlobs,
                dims: (16, 16, 16),
                seed: 1,
            },
            tf: TfSpec::Designed {
                kind: PhantomKind::AsymmetricBlobs,
            },
            category: "asymmetric-blobs".into(),
        }];
        let mut cfg = GenerationConfig::desk_scale(entries, seed);
        cfg.images_per_tf = 24;
        cfg.image_size = (16, 16);
        cfg.tf_variants = 6;
        cfg
    }

    #[test]
    fn generation_is_reproducible() {
        let cfg = tiny_config(7);
        let dir_a = tempfile::tempdir().unwrap();
        let dir_b = tempfile::tempdir().unwrap();
        let ma = generate_dataset(&cfg, dir_a.path()).unwrap();
        let mb = generate_dataset(&cfg, dir_b.path()).unwrap();
        assert_eq!(ma.to_jsonl(), mb.to_jsonl());
        for s in &ma.samples {
            let a = fs::read(dir_a.path().join(&s.image_path)).unwrap();
            let b = fs::read(dir_b.path().join(&s.image_path)).unwrap();
            assert_eq!(a, b, "{}", s.image_path);
        }
    }

    #[test]
    fn annotations_satisfy_label_containment() {
        let cfg = tiny_config(3);
        let dir = tempfile::tempdir().unwrap();
        let m = generate_dataset(&cfg, dir.path()).unwrap();
        let p = SpherePixelization::new(cfg.nside).unwrap();
        for s in &m.samples {
            assert_eq!(p.label_of(s.true_direction).index(), s.label);
            assert!(dir.path().join(&s.image_path).exists());
        }
    }

    #[test]
    fn draws_stay_inside_configured_ranges() {
        let cfg = tiny_config(11);
        let dir = tempfile::tempdir().unwrap();
        let m = generate_dataset(&cfg, dir.path()).unwrap();
        let r = &cfg.ranges;
        for s in &m.samples {
            assert!(s.camera.scale >= r.scale.0 && s.camera.scale <= r.scale.1);
            assert!(s.camera.tilt_deg >= 0.0 && s.camera.tilt_deg < 360.0);
            assert!(s.lighting.diffuse >= r.diffuse.0 && s.lighting.diffuse <= r.diffuse.1);
            assert!(s.lighting.specular >= r.specular.0 && s.lighting.specular <= r.specular.1);
            assert!(
                s.lighting.shininess >= r.shininess.0 && s.lighting.shininess <= r.shininess.1
            );
            assert_eq!(s.lighting.ambient, 1.0);
            match s.lighting.mode {
                LightingMode::EnvOnly => {
                    assert_eq!(s.lighting.headlight_intensity, 0.0);
                }
                LightingMode::EnvHeadlight => {
                    assert!(
                        s.lighting.headlight_intensity >= r.headlight_mode2.0
                            && s.lighting.headlight_intensity <= r.headlight_mode2.1
                    );
                }
                LightingMode::EnvHeadlightScene => {
                    for v in [s.lighting.headlight_intensity, s.lighting.scene_intensity] {
                        assert!(v >= r.lights_mode3.0 && v <= r.lights_mode3.1);
                    }
                }
            }
            assert!(s.background == [0.0, 0.0, 0.0] || s.background == [1.0, 1.0, 1.0]);
        }
    }

    #[test]
    fn labels_round_robin_balanced() {
        let mut cfg = tiny_config(5);
        cfg.images_per_tf = 96; // 2 per label at nside 2
        let dir = tempfile::tempdir().unwrap();
        let m = generate_dataset(&cfg, dir.path()).unwrap();
        let mut counts = vec![0usize; 48];
        for s in &m.samples {
            counts[s.label] += 1;
        }
        assert!(counts.iter().all(|&c| c == 2), "{counts:?}");
    }

    #[test]
    fn manifest_round_trip() {
        let cfg = tiny_config(9);
        let dir = tempfile::tempdir().unwrap();
        let m = generate_dataset(&cfg, dir.path()).unwrap();
        let loaded = DatasetManifest::load(&dir.path().join("manifest.jsonl")).unwrap();
        let a = m.to_jsonl();
        let b = loaded.to_jsonl();
        for (la, lb) in a.lines().zip(b.lines()) {
            if la != lb {
                let pos = la
                    .bytes()
                    .zip(lb.bytes())
                    .position(|(x, y)| x != y)
                    .unwrap_or(0);
                let lo = pos.saturating_sub(60);
                panic!(
                    "line differs at byte {pos}:\n a: {}\n b: {}",
                    &la[lo..(pos + 60).min(la.len())],
                    &lb[lo..(pos + 60).min(lb.len())]
                );
            }
        }
        assert_eq!(a, b);
    }

    #[test]
    fn split_fraction_and_union() {
        let cfg = tiny_config(2);
        let dir = tempfile::tempdir().unwrap();
        let m = generate_dataset(&cfg, dir.path()).unwrap();
        let (train, test) = split_manifest(&m, 0.5, 4, SplitMode::Random).unwrap();
        assert_eq!(test.samples.len(), 12);
        assert_eq!(train.samples.len() + test.samples.len(), m.samples.len());
        let mut all: Vec<String> = train
            .samples
            .iter()
            .chain(&test.samples)
            .map(|s| s.image_path.clone())
            .collect();
        all.sort();
        let mut orig: Vec<String> = m.samples.iter().map(|s| s.image_path.clone()).collect();
        orig.sort();
        assert_eq!(all, orig);
    }

    #[test]
    fn split_by_tf_variant_is_disjoint() {
        let cfg = tiny_config(8);
        let dir = tempfile::tempdir().unwrap();
        let m = generate_dataset(&cfg, dir.path()).unwrap();
        let (train, test) = split_manifest(&m, 0.3, 1, SplitMode::ByTfVariant).unwrap();
        let train_variants: std::collections::BTreeSet<u64> =
            train.samples.iter().map(|s| s.tf_variant).collect();
        let test_variants: std::collections::BTreeSet<u64> =
            test.samples.iter().map(|s| s.tf_variant).collect();
        assert!(train_variants.is_disjoint(&test_variants));
        assert!(!test.samples.is_empty());
    }

    #[test]
    fn split_rejects_bad_inputs() {
        let cfg = tiny_config(2);
        let dir = tempfile::tempdir().unwrap();
        let m = generate_dataset(&cfg, dir.path()).unwrap();
        assert!(split_manifest(&m, 0.0, 1, SplitMode::Random).is_err());
        let empty = DatasetManifest {
            config_hash: "x".into(),
            split: "all".into(),
            samples: vec![],
        };
        assert!(split_manifest(&empty, 0.5, 1, SplitMode::Random).is_err());
    }

    #[test]
    fn label_subset_restricts_labels() {
        let mut cfg = tiny_config(6);
        cfg.label_subset = Some(vec![3, 40]);
        cfg.images_per_tf = 10;
        let dir = tempfile::tempdir().unwrap();
        let m = generate_dataset(&cfg, dir.path()).unwrap();
        for s in &m.samples {
            assert!(s.label == 3 || s.label == 40);
        }
        let mut bad = tiny_config(6);
        bad.label_subset = Some(vec![99]);
        assert!(generate_dataset(&bad, dir.path()).is_err());
    }

    #[test]
    fn config_hash_changes_with_seed() {
        assert_ne!(tiny_config(1).hash(), tiny_config(2).hash());
    }
}
