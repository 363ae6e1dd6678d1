//! Camera trajectories: keyframes joined by sampled segments.

use lodsplat::Camera;
use nalgebra::{Rotation3, UnitQuaternion};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum PathError {
    #[error("a camera path needs at least one keyframe")]
    Empty,
    #[error("samples: expected {expected} per-segment counts, got {got}")]
    SampleCount { expected: usize, got: usize },
    #[error("samples: every segment needs at least one sample")]
    ZeroSamples,
    #[error("keyframe {0}: image size differs from keyframe 0")]
    SizeMismatch(usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Samples {
    Uniform(u32),
    PerSegment(Vec<u32>),
}

impl Default for Samples {
    fn default() -> Self {
        Samples::Uniform(1)
    }
}

/// Keyframes plus per-segment sample counts. Segment `i` contributes
/// `samples[i]` frames starting at keyframe `i`; the last keyframe closes
/// the path, so a path has `Σ samples + 1` frames.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CameraPath {
    pub keyframes: Vec<Camera>,
    #[serde(default)]
    pub samples: Samples,
}

/// Views/path files: either a bare camera list (every camera is a frame)
/// or a keyframe path.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum PathFile {
    Path(CameraPath),
    List(Vec<Camera>),
}

impl PathFile {
    pub fn cameras(&self) -> Result<Vec<Camera>, PathError> {
        match self {
            PathFile::Path(p) => p.sample(),
            PathFile::List(v) => {
                check_sizes(v)?;
                Ok(v.clone())
            }
        }
    }
}

fn check_sizes(cams: &[Camera]) -> Result<(), PathError> {
    let first = cams.first().ok_or(PathError::Empty)?;
    match cams.iter().position(|c| (c.width, c.height) != (first.width, first.height)) {
        Some(i) => Err(PathError::SizeMismatch(i)),
        None => Ok(()),
    }
}

impl CameraPath {
    fn segment_samples(&self) -> Result<Vec<u32>, PathError> {
        let n = self.keyframes.len().saturating_sub(1);
        let v = match &self.samples {
            Samples::Uniform(k) => vec![*k; n],
            Samples::PerSegment(v) => v.clone(),
        };
        if v.len() != n {
            return Err(PathError::SampleCount { expected: n, got: v.len() });
        }
        if v.contains(&0) {
            return Err(PathError::ZeroSamples);
        }
        Ok(v)
    }

    pub fn frame_count(&self) -> Result<usize, PathError> {
        check_sizes(&self.keyframes)?;
        Ok(self.segment_samples()?.iter().map(|&k| k as usize).sum::<usize>() + 1)
    }

    /// Every frame camera in order.
    pub fn sample(&self) -> Result<Vec<Camera>, PathError> {
        check_sizes(&self.keyframes)?;
        let counts = self.segment_samples()?;
        let mut out = Vec::new();
        for (i, &k) in counts.iter().enumerate() {
            for s in 0..k {
                out.push(interpolate(&self.keyframes[i], &self.keyframes[i + 1], s as f64 / k as f64));
            }
        }
        out.push(self.keyframes.last().unwrap().clone());
        Ok(out)
    }
}

/// Linear on translation and intrinsics, spherical-linear on rotation.
/// `t = 0` returns `a` unchanged.
pub fn interpolate(a: &Camera, b: &Camera, t: f64) -> Camera {
    if t == 0.0 {
        return a.clone();
    }
    let lerp = |x: f64, y: f64| x + (y - x) * t;
    let qa = UnitQuaternion::from_rotation_matrix(&Rotation3::from_matrix_unchecked(a.rotation));
    let qb = UnitQuaternion::from_rotation_matrix(&Rotation3::from_matrix_unchecked(b.rotation));
    let q = qa.slerp(&qb, t);
    Camera {
        width: a.width,
        height: a.height,
        fx: lerp(a.fx, b.fx),
        fy: lerp(a.fy, b.fy),
        cx: lerp(a.cx, b.cx),
        cy: lerp(a.cy, b.cy),
        rotation: q.to_rotation_matrix().into_inner(),
        translation: a.translation.lerp(&b.translation, t),
        near: lerp(a.near, b.near),
        far: lerp(a.far, b.far),
    }
}
