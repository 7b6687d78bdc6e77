//! 1D opacity and color transfer functions: piecewise-linear opacity with
//! keypoint jitter, per-feature color segments, and background-contrast
//! biased random palettes.
//!
//! File format: plain text, one line per opacity keypoint (`scalar opacity`)
//! and one line per color segment (`lo hi r g b`); `#` starts a comment.

use std::fs;
use std::path::Path;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::volume::PhantomKind;

/// Minimum scalar separation between keypoints enforced after jitter.
const MIN_KEYPOINT_SEP: f64 = 1e-4;
/// Required luminance distance between a feature color and the background.
const CONTRAST_THRESHOLD: f64 = 0.3;

/// Piecewise-linear opacity over normalized scalar values. Keypoints are
/// strictly ascending in scalar value and include the endpoints 0 and 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OpacityTF {
    keypoints: Vec<(f64, f64)>,
}

impl OpacityTF {
    pub fn new(keypoints: Vec<(f64, f64)>) -> Result<Self> {
        if keypoints.len() < 2 {
            return Err(Error::InvalidArgument(
                "opacity TF needs at least the two endpoint keypoints".into(),
            ));
        }
        if keypoints.first().unwrap().0 != 0.0 || keypoints.last().unwrap().0 != 1.0 {
            return Err(Error::InvalidArgument(
                "opacity TF must have keypoints at scalar 0 and 1".into(),
            ));
        }
        for pair in keypoints.windows(2) {
            if pair[1].0 <= pair[0].0 {
                return Err(Error::InvalidArgument(format!(
                    "keypoints must be strictly ascending: {} then {}",
                    pair[0].0, pair[1].0
                )));
            }
        }
        if keypoints
            .iter()
            .any(|&(s, o)| !(0.0..=1.0).contains(&s) || !(0.0..=1.0).contains(&o))
        {
            return Err(Error::InvalidArgument(
                "keypoint scalars and opacities must lie in [0, 1]".into(),
            ));
        }
        Ok(OpacityTF { keypoints })
    }

    /// Fully transparent TF.
    pub fn zero() -> Self {
        OpacityTF {
            keypoints: vec![(0.0, 0.0), (1.0, 0.0)],
        }
    }

    pub fn keypoints(&self) -> &[(f64, f64)] {
        &self.keypoints
    }

    /// Piecewise-linear interpolation; `s` is clamped to [0, 1].
    pub fn eval(&self, s: f64) -> f64 {
        let s = s.clamp(0.0, 1.0);
        let idx = self.keypoints.partition_point(|&(x, _)| x <= s);
        if idx == 0 {
            return self.keypoints[0].1;
        }
        if idx == self.keypoints.len() {
            return self.keypoints[self.keypoints.len() - 1].1;
        }
        let (x0, y0) = self.keypoints[idx - 1];
        let (x1, y1) = self.keypoints[idx];
        let t = (s - x0) / (x1 - x0);
        y0 + t * (y1 - y0)
    }

    /// Shift every interior keypoint's scalar position by an independent
    /// N(0, sigma^2) draw; endpoints stay fixed, positions are re-sorted
    /// and clamped to a minimum separation. Opacity values do not change.
    pub fn jitter<R: Rng + ?Sized>(&self, sigma: f64, rng: &mut R) -> OpacityTF {
        assert!(sigma > 0.0, "jitter sigma must be positive");
        let normal = Normal::new(0.0, sigma).expect("finite sigma");
        let n = self.keypoints.len();
        let mut pts = self.keypoints.clone();
        for p in &mut pts[1..n - 1] {
            p.0 += normal.sample(rng);
            p.0 = p.0.clamp(MIN_KEYPOINT_SEP, 1.0 - MIN_KEYPOINT_SEP);
        }
        pts[1..n - 1].sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        for i in 1..n {
            if pts[i].0 < pts[i - 1].0 + MIN_KEYPOINT_SEP {
                pts[i].0 = pts[i - 1].0 + MIN_KEYPOINT_SEP;
            }
        }
        pts[n - 1].0 = 1.0;
        for i in (1..n - 1).rev() {
            if pts[i].0 > pts[i + 1].0 - MIN_KEYPOINT_SEP {
                pts[i].0 = pts[i + 1].0 - MIN_KEYPOINT_SEP;
            }
        }
        OpacityTF { keypoints: pts }
    }
}

/// A named scalar-value range occupied by one volume feature.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSpec {
    pub name: String,
    pub lo: f64,
    pub hi: f64,
}

impl FeatureSpec {
    pub fn new(name: impl Into<String>, lo: f64, hi: f64) -> Result<Self> {
        if !(lo < hi) {
            return Err(Error::InvalidArgument(format!(
                "feature range requires lo < hi, got [{lo}, {hi}]"
            )));
        }
        Ok(FeatureSpec {
            name: name.into(),
            lo,
            hi,
        })
    }
}

/// One color segment: a scalar range and the RGB assigned to it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ColorSegment {
    pub lo: f64,
    pub hi: f64,
    pub rgb: [f64; 3],
}

/// Ordered, non-overlapping color segments, one per feature. Scalars not
/// covered by any segment map to black.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColorTF {
    segments: Vec<ColorSegment>,
}

impl ColorTF {
    pub fn new(segments: Vec<ColorSegment>) -> Result<Self> {
        for seg in &segments {
            if !(seg.lo < seg.hi) {
                return Err(Error::InvalidArgument(format!(
                    "color segment requires lo < hi, got [{}, {}]",
                    seg.lo, seg.hi
                )));
            }
        }
        for pair in segments.windows(2) {
            if pair[1].lo < pair[0].hi {
                return Err(Error::InvalidArgument(
                    "color segments must be ordered and non-overlapping".into(),
                ));
            }
        }
        Ok(ColorTF { segments })
    }

    pub fn segments(&self) -> &[ColorSegment] {
        &self.segments
    }

    pub fn eval(&self, s: f64) -> [f64; 3] {
        for seg in &self.segments {
            if s >= seg.lo && s <= seg.hi {
                return seg.rgb;
            }
        }
        [0.0, 0.0, 0.0]
    }

    /// The feature list implied by the segments.
    pub fn features(&self) -> Vec<FeatureSpec> {
        self.segments
            .iter()
            .enumerate()
            .map(|(i, seg)| FeatureSpec {
                name: format!("feature{i}"),
                lo: seg.lo,
                hi: seg.hi,
            })
            .collect()
    }
}

/// Rec. 709 luminance.
pub fn luminance(rgb: [f64; 3]) -> f64 {
    0.2126 * rgb[0] + 0.7152 * rgb[1] + 0.0722 * rgb[2]
}

/// One random RGB per feature, rejection-sampled until its luminance
/// differs from the background's by at least 0.3.
pub fn random_colors<R: Rng + ?Sized>(
    features: &[FeatureSpec],
    background: [f64; 3],
    rng: &mut R,
) -> Result<ColorTF> {
    if features.is_empty() {
        return Err(Error::InvalidArgument(
            "need at least one feature to color".into(),
        ));
    }
    let bg_y = luminance(background);
    let segments = features
        .iter()
        .map(|f| {
            let rgb = loop {
                let c = [rng.gen::<f64>(), rng.gen::<f64>(), rng.gen::<f64>()];
                if (luminance(c) - bg_y).abs() >= CONTRAST_THRESHOLD {
                    break c;
                }
            };
            ColorSegment {
                lo: f.lo,
                hi: f.hi,
                rgb,
            }
        })
        .collect();
    ColorTF::new(segments)
}

/// Serialize a TF pair into the text file format.
pub fn write_tf_text(otf: &OpacityTF, ctf: &ColorTF) -> String {
    let mut out = String::new();
    for &(s, o) in otf.keypoints() {
        out.push_str(&format!("{s} {o}\n"));
    }
    for seg in ctf.segments() {
        out.push_str(&format!(
            "{} {} {} {} {}\n",
            seg.lo, seg.hi, seg.rgb[0], seg.rgb[1], seg.rgb[2]
        ));
    }
    out
}

/// Parse the text file format: 2 numbers per line = opacity keypoint,
/// 5 numbers per line = color segment.
pub fn parse_tf_text(text: &str) -> Result<(OpacityTF, ColorTF)> {
    let mut keypoints = Vec::new();
    let mut segments = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let nums: Vec<f64> = line
            .split_whitespace()
            .map(|tok| {
                tok.parse::<f64>()
                    .map_err(|e| Error::parse(format!("TF line {}", lineno + 1), e.to_string()))
            })
            .collect::<Result<_>>()?;
        match nums.len() {
            2 => keypoints.push((nums[0], nums[1])),
            5 => segments.push(ColorSegment {
                lo: nums[0],
                hi: nums[1],
                rgb: [nums[2], nums[3], nums[4]],
            }),
            n => {
                return Err(Error::parse(
                    format!("TF line {}", lineno + 1),
                    format!("expected 2 or 5 numbers, got {n}"),
                ))
            }
        }
    }
    Ok((OpacityTF::new(keypoints)?, ColorTF::new(segments)?))
}

pub fn load_tf_file(path: &Path) -> Result<(OpacityTF, ColorTF)> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    parse_tf_text(&text)
}

pub fn save_tf_file(path: &Path, otf: &OpacityTF, ctf: &ColorTF) -> Result<()> {
    fs::write(path, write_tf_text(otf, ctf)).map_err(|e| Error::io(path.display().to_string(), e))
}

/// The hand-designed transfer function shipped for each phantom.
pub fn designed_tf(kind: PhantomKind) -> (OpacityTF, ColorTF) {
    let text = match kind {
        PhantomKind::AsymmetricBlobs => include_str!("../fixtures/tf/asymmetric-blobs.tf"),
        PhantomKind::NestedShells => include_str!("../fixtures/tf/nested-shells.tf"),
        PhantomKind::LBlock => include_str!("../fixtures/tf/l-block.tf"),
        PhantomKind::ConeWithHandle => include_str!("../fixtures/tf/cone-with-handle.tf"),
    };
    parse_tf_text(text).expect("shipped fixtures parse")
}
