use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum CameraError {
    #[error("image dimensions must be positive, got {0}x{1}")]
    EmptyImage(u32, u32),
    #[error("focal lengths must be positive and finite")]
    BadIntrinsics,
    #[error("world-to-camera rotation is not orthonormal")]
    NotOrthonormal,
    #[error("clip planes must satisfy 0 < near < far, got near={0} far={1}")]
    BadClipPlanes(f64, f64),
    #[error("look-at eye and target coincide or up is parallel to the view direction")]
    DegenerateLookAt,
}

/// Pinhole camera looking down +z in camera space, x right, y down.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "CameraDef", into = "CameraDef")]
pub struct Camera {
    pub width: u32,
    pub height: u32,
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub rotation: Matrix3<f64>,
    pub translation: Vector3<f64>,
    pub near: f64,
    pub far: f64,
}

impl Camera {
    /// Camera at `eye` looking toward `target`, with intrinsics derived from
    /// a vertical field of view in degrees and the principal point centred.
    #[allow(clippy::too_many_arguments)]
    pub fn look_at(
        width: u32,
        height: u32,
        fov_y_deg: f64,
        eye: Vector3<f64>,
        target: Vector3<f64>,
        up: Vector3<f64>,
        near: f64,
        far: f64,
    ) -> Result<Self, CameraError> {
        let forward = target - eye;
        if forward.norm() == 0.0 {
            return Err(CameraError::DegenerateLookAt);
        }
        let z = forward.normalize();
        let x = z.cross(&up);
        if x.norm() < 1e-12 {
            return Err(CameraError::DegenerateLookAt);
        }
        let x = x.normalize();
        let y = z.cross(&x);
        let rotation = Matrix3::from_rows(&[x.transpose(), y.transpose(), z.transpose()]);
        let translation = -(rotation * eye);
        let f = 0.5 * height as f64 / (0.5 * fov_y_deg.to_radians()).tan();
        let cam = Self {
            width,
            height,
            fx: f,
            fy: f,
            cx: 0.5 * width as f64,
            cy: 0.5 * height as f64,
            rotation,
            translation,
            near,
            far,
        };
        cam.validate()?;
        Ok(cam)
    }

    pub fn validate(&self) -> Result<(), CameraError> {
        if self.width == 0 || self.height == 0 {
            return Err(CameraError::EmptyImage(self.width, self.height));
        }
        let finite = [self.fx, self.fy, self.cx, self.cy].iter().all(|v| v.is_finite());
        if !finite || self.fx <= 0.0 || self.fy <= 0.0 {
            return Err(CameraError::BadIntrinsics);
        }
        let gram = self.rotation * self.rotation.transpose();
        if (gram - Matrix3::identity()).abs().max() > 1e-6 || !self.translation.iter().all(|v| v.is_finite()) {
            return Err(CameraError::NotOrthonormal);
        }
        if !(self.near > 0.0 && self.near < self.far) {
            return Err(CameraError::BadClipPlanes(self.near, self.far));
        }
        Ok(())
    }

    pub fn world_to_camera(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.rotation * p + self.translation
    }

    /// Camera centre in world coordinates.
    pub fn eye(&self) -> Vector3<f64> {
        -(self.rotation.transpose() * self.translation)
    }
}

/// JSON shape for cameras: either explicit extrinsics or a look-at triple.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
enum CameraDef {
    Explicit {
        width: u32,
        height: u32,
        fx: f64,
        fy: f64,
        cx: f64,
        cy: f64,
        rotation: [[f64; 3]; 3],
        translation: [f64; 3],
        near: f64,
        far: f64,
    },
    LookAt {
        width: u32,
        height: u32,
        fov_y: f64,
        eye: [f64; 3],
        target: [f64; 3],
        #[serde(default = "default_up")]
        up: [f64; 3],
        near: f64,
        far: f64,
    },
}

fn default_up() -> [f64; 3] {
    [0.0, 0.0, 1.0]
}

impl TryFrom<CameraDef> for Camera {
    type Error = CameraError;

    fn try_from(def: CameraDef) -> Result<Self, Self::Error> {
        match def {
            CameraDef::Explicit {
                width,
                height,
                fx,
                fy,
                cx,
                cy,
                rotation,
                translation,
                near,
                far,
            } => {
                let rows = rotation.map(|r| Vector3::from(r).transpose());
                let cam = Camera {
                    width,
                    height,
                    fx,
                    fy,
                    cx,
                    cy,
                    rotation: Matrix3::from_rows(&rows),
                    translation: Vector3::from(translation),
                    near,
                    far,
                };
                cam.validate()?;
                Ok(cam)
            }
            CameraDef::LookAt {
                width,
                height,
                fov_y,
                eye,
                target,
                up,
                near,
                far,
            } => Camera::look_at(
                width,
                height,
                fov_y,
                Vector3::from(eye),
                Vector3::from(target),
                Vector3::from(up),
                near,
                far,
            ),
        }
    }
}

impl From<Camera> for CameraDef {
    fn from(c: Camera) -> Self {
        let r = c.rotation;
        CameraDef::Explicit {
            width: c.width,
            height: c.height,
            fx: c.fx,
            fy: c.fy,
            cx: c.cx,
            cy: c.cy,
            rotation: [
                [r[(0, 0)], r[(0, 1)], r[(0, 2)]],
                [r[(1, 0)], r[(1, 1)], r[(1, 2)]],
                [r[(2, 0)], r[(2, 1)], r[(2, 2)]],
            ],
            translation: [c.translation.x, c.translation.y, c.translation.z],
            near: c.near,
            far: c.far,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cam() -> Camera {
        Camera::look_at(
            64,
            48,
            60.0,
            Vector3::new(0.0, -10.0, 0.0),
            Vector3::zeros(),
            Vector3::z(),
            0.1,
            100.0,
        )
        .unwrap()
    }

    #[test]
    fn look_at_centres_target() {
        let c = cam();
        let p = c.world_to_camera(&Vector3::zeros());
        assert!(p.x.abs() < 1e-12 && p.y.abs() < 1e-12);
        assert!((p.z - 10.0).abs() < 1e-12);
        assert!((c.eye() - Vector3::new(0.0, -10.0, 0.0)).norm() < 1e-12);
        // world up maps to camera -y (image up)
        let up = c.world_to_camera(&Vector3::new(0.0, 0.0, 1.0));
        assert!(up.y < 0.0);
    }

    #[test]
    fn json_round_trip() {
        let c = cam();
        let s = serde_json::to_string(&c).unwrap();
        let back: Camera = serde_json::from_str(&s).unwrap();
        assert_eq!(c, back);
    }

    #[test]
    fn rejects_bad_planes_and_rotation() {
        let mut c = cam();
        c.near = 5.0;
        c.far = 1.0;
        assert!(matches!(c.validate(), Err(CameraError::BadClipPlanes(..))));
        let mut c = cam();
        c.rotation[(0, 0)] *= 2.0;
        assert_eq!(c.validate(), Err(CameraError::NotOrthonormal));
    }

    #[test]
    fn look_at_json_form() {
        let json = r#"{"width":32,"height":32,"fov_y":90,"eye":[0,0,5],"target":[0,0,0],"up":[0,1,0],"near":0.1,"far":50}"#;
        let c: Camera = serde_json::from_str(json).unwrap();
        assert!((c.fx - 16.0).abs() < 1e-9);
    }
}
