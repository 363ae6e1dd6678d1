//! Screen-space projection of 3D Gaussians (EWA Jacobian chain) and the
//! conservative bounding-sphere frustum test.

use nalgebra::{Matrix2x3, Matrix3, Vector3};
use thiserror::Error;

use crate::scene::{Camera, GaussianNode};

/// Low-pass dilation added to both diagonal entries of the 2D covariance.
pub const COV2D_DILATION: f64 = 0.3;

/// Pixel radius in units of the larger screen-space standard deviation.
pub const SIGMA_EXTENT: f64 = 3.0;

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum ProjectionError {
    #[error("projection of node {0} produced non-finite values")]
    NonFinite(u32),
    #[error("2D covariance is not positive definite")]
    NotPositiveDefinite,
}

/// Symmetric 2×2 matrix stored as `[xx, xy, yy]`.
pub type Sym2 = [f64; 3];

/// Screen-space footprint of one node.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Projected2D {
    pub mean2d: [f64; 2],
    pub cov2d: Sym2,
    pub conic: Sym2,
    pub sigma_max: f64,
    pub sigma_min: f64,
    pub depth: f64,
    pub radius: f64,
    pub opacity: f64,
    pub color: [f64; 3],
    pub node: u32,
}

/// Eigenvalues `(λ_max, λ_min)` of a symmetric 2×2 matrix in closed form.
pub fn eigenvalues(m: Sym2) -> (f64, f64) {
    let [a, b, c] = m;
    let mid = 0.5 * (a + c);
    let half_diff = 0.5 * (a - c);
    let disc = (half_diff * half_diff + b * b).sqrt();
    let hi = mid + disc;
    let det = a * c - b * b;
    // det / hi avoids cancellation in mid - disc
    let lo = if hi != 0.0 { det / hi } else { mid - disc };
    (hi, lo)
}

/// `R_2D = 3·sqrt(λ_max)`.
pub fn radius_2d(cov2d: Sym2) -> Result<f64, ProjectionError> {
    let det = cov2d[0] * cov2d[2] - cov2d[1] * cov2d[1];
    if !(cov2d[0] > 0.0 && det > 0.0) {
        return Err(ProjectionError::NotPositiveDefinite);
    }
    Ok(SIGMA_EXTENT * eigenvalues(cov2d).0.sqrt())
}

/// Inward unit normals of the four side planes (through the camera centre)
/// in camera space.
fn side_planes(cam: &Camera) -> [Vector3<f64>; 4] {
    let w = cam.width as f64;
    let h = cam.height as f64;
    [
        Vector3::new(cam.fx, 0.0, cam.cx),
        Vector3::new(-cam.fx, 0.0, w - cam.cx),
        Vector3::new(0.0, cam.fy, cam.cy),
        Vector3::new(0.0, -cam.fy, h - cam.cy),
    ]
    .map(|n| n.normalize())
}

/// Conservative sphere-vs-frustum test for a camera-space centre and radius.
pub fn sphere_in_frustum(center: &Vector3<f64>, radius: f64, cam: &Camera) -> bool {
    if center.z < cam.near - radius || center.z > cam.far + radius {
        return false;
    }
    side_planes(cam).iter().all(|n| n.dot(center) >= -radius)
}

/// True when the node's `3·max(s)` bounding sphere touches the view frustum.
pub fn in_frustum(node: &GaussianNode, cam: &Camera) -> bool {
    let c = cam.world_to_camera(&node.mean_f64());
    sphere_in_frustum(&c, node.bounding_radius(), cam)
}

/// Precomputed frustum planes so hot loops avoid renormalizing per node.
#[derive(Debug, Clone)]
pub struct Frustum {
    sides: [Vector3<f64>; 4],
    near: f64,
    far: f64,
}

impl Frustum {
    pub fn new(cam: &Camera) -> Self {
        Self {
            sides: side_planes(cam),
            near: cam.near,
            far: cam.far,
        }
    }

    pub fn contains_sphere(&self, center: &Vector3<f64>, radius: f64) -> bool {
        if center.z < self.near - radius || center.z > self.far + radius {
            return false;
        }
        self.sides.iter().all(|n| n.dot(center) >= -radius)
    }
}

/// Dilated screen-space covariance `J·W·Σ·Wᵀ·Jᵀ + 0.3·I` at camera-space
/// centre `p` (requires `p.z > 0`).
pub fn screen_covariance(node: &GaussianNode, cam: &Camera, p: &Vector3<f64>) -> Sym2 {
    let inv_z = 1.0 / p.z;
    let jac = Matrix2x3::new(cam.fx * inv_z, 0.0, -cam.fx * p.x * inv_z * inv_z, 0.0, cam.fy * inv_z, -cam.fy * p.y * inv_z * inv_z);
    let t = jac * cam.rotation;
    let cov3: Matrix3<f64> = node.covariance();
    let cov = t * cov3 * t.transpose();
    [cov[(0, 0)] + COV2D_DILATION, 0.5 * (cov[(0, 1)] + cov[(1, 0)]), cov[(1, 1)] + COV2D_DILATION]
}

/// `R_2D` of a node whose camera-space centre is `p`, or `None` when the
/// centre is in front of the near plane or the footprint is degenerate.
pub fn footprint_radius(node: &GaussianNode, cam: &Camera, p: &Vector3<f64>) -> Option<f64> {
    if p.z < cam.near {
        return None;
    }
    radius_2d(screen_covariance(node, cam, p)).ok().filter(|r| r.is_finite())
}

/// Project a node already known to pass the frustum test. Returns `None`
/// when the centre lies in front of the near plane, where the perspective
/// Jacobian is undefined.
pub fn project_visible(node: &GaussianNode, index: u32, cam: &Camera, p: &Vector3<f64>) -> Result<Option<Projected2D>, ProjectionError> {
    let z = p.z;
    if z < cam.near {
        return Ok(None);
    }
    let inv_z = 1.0 / z;
    let cov2d = screen_covariance(node, cam, p);
    let det = cov2d[0] * cov2d[2] - cov2d[1] * cov2d[1];
    let (hi, lo) = eigenvalues(cov2d);
    let sigma_max = hi.sqrt();
    let proj = Projected2D {
        mean2d: [cam.fx * p.x * inv_z + cam.cx, cam.fy * p.y * inv_z + cam.cy],
        cov2d,
        conic: [cov2d[2] / det, -cov2d[1] / det, cov2d[0] / det],
        sigma_max,
        sigma_min: lo.max(0.0).sqrt(),
        depth: z,
        radius: SIGMA_EXTENT * sigma_max,
        opacity: node.opacity as f64,
        color: node.color.map(|c| c as f64),
        node: index,
    };
    let finite = proj.mean2d.iter().chain(&proj.conic).chain(&proj.cov2d).all(|v| v.is_finite())
        && proj.radius.is_finite()
        && det > 0.0;
    if !finite {
        return Err(ProjectionError::NonFinite(index));
    }
    Ok(Some(proj))
}

/// Project `node` (tree index `index`) through `cam`; `Ok(None)` means culled.
pub fn project(node: &GaussianNode, index: u32, cam: &Camera) -> Result<Option<Projected2D>, ProjectionError> {
    let p = cam.world_to_camera(&node.mean_f64());
    if !sphere_in_frustum(&p, node.bounding_radius(), cam) {
        return Ok(None);
    }
    project_visible(node, index, cam, &p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tree::random_rotation;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn axis_cam() -> Camera {
        Camera {
            width: 200,
            height: 200,
            fx: 100.0,
            fy: 100.0,
            cx: 100.0,
            cy: 100.0,
            rotation: Matrix3::identity(),
            translation: Vector3::zeros(),
            near: 0.1,
            far: 100.0,
        }
    }

    fn node_at(mean: [f32; 3], scale: f32) -> GaussianNode {
        GaussianNode::root(mean, [scale; 3], [1.0, 0.0, 0.0, 0.0], 0.5, [1.0; 3])
    }

    #[test]
    fn isotropic_on_axis() {
        let p = project(&node_at([0.0, 0.0, 10.0], 1.0), 0, &axis_cam()).unwrap().unwrap();
        // J = diag(fx/z, fy/z) = diag(10, 10) on the optical axis
        let expected = (10.0f64 * 10.0 + 0.3).sqrt();
        assert!((p.sigma_max - expected).abs() < 1e-9);
        assert!((p.sigma_max - 10.015).abs() < 1e-3);
        assert_eq!(p.depth, 10.0);
        assert_eq!(p.mean2d, [100.0, 100.0]);
        assert!((p.radius - 3.0 * p.sigma_max).abs() < 1e-6);
    }

    #[test]
    fn behind_camera_is_culled() {
        assert!(project(&node_at([0.0, 0.0, -5.0], 0.1), 0, &axis_cam()).unwrap().is_none());
        assert!(!in_frustum(&node_at([0.0, 0.0, -5.0], 0.1), &axis_cam()));
    }

    #[test]
    fn frustum_cases() {
        let cam = axis_cam();
        assert!(in_frustum(&node_at([0.0, 0.0, 50.05], 0.01), &cam));
        assert!(!in_frustum(&node_at([0.0, 0.0, 100.0 + 3.0 + 0.01], 1.0), &cam));
        assert!(in_frustum(&node_at([0.0, 0.0, 102.9], 1.0), &cam));
        // just outside the left side plane, then overlapping it
        assert!(!in_frustum(&node_at([-12.0, 0.0, 10.0], 0.3), &cam));
        assert!(in_frustum(&node_at([-10.5, 0.0, 10.0], 0.3), &cam));
    }

    #[test]
    fn radius_examples() {
        assert_eq!(radius_2d([4.0, 0.0, 4.0]).unwrap(), 6.0);
        assert_eq!(radius_2d([9.0, 0.0, 1.0]).unwrap(), 9.0);
        // eigenvalues of [[5,3],[3,5]] are 8 and 2
        assert!((radius_2d([5.0, 3.0, 5.0]).unwrap() - 3.0 * 8f64.sqrt()).abs() < 1e-12);
        assert!((3.0 * 8f64.sqrt() - 8.485).abs() < 1e-3);
        assert_eq!(radius_2d([1.0, 2.0, 1.0]), Err(ProjectionError::NotPositiveDefinite));
        assert_eq!(radius_2d([-1.0, 0.0, -1.0]), Err(ProjectionError::NotPositiveDefinite));
    }

    fn random_node(rng: &mut ChaCha8Rng) -> GaussianNode {
        let mean = [rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0), rng.gen_range(4.0..30.0)];
        let scale = [rng.gen_range(0.01..1.0), rng.gen_range(0.01..1.0), rng.gen_range(0.01..1.0)];
        GaussianNode::root(mean, scale, random_rotation(rng), 0.5, [0.5; 3])
    }

    #[test]
    fn eigen_reassembly_and_conic() {
        let cam = axis_cam();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut checked = 0;
        for _ in 0..1000 {
            let node = random_node(&mut rng);
            let Some(p) = project(&node, 0, &cam).unwrap() else { continue };
            checked += 1;
            // oracle: eigenvectors from nalgebra's symmetric solver
            let m = nalgebra::Matrix2::new(p.cov2d[0], p.cov2d[1], p.cov2d[1], p.cov2d[2]);
            let eig = m.symmetric_eigen();
            let mut ev = [eig.eigenvalues[0], eig.eigenvalues[1]];
            ev.sort_by(|a, b| b.partial_cmp(a).unwrap());
            let scale = m.abs().max().max(1.0);
            assert!((ev[0] - p.sigma_max.powi(2)).abs() <= 1e-9 * scale);
            assert!((ev[1] - p.sigma_min.powi(2)).abs() <= 1e-9 * scale);
            let re = eig.eigenvectors * nalgebra::Matrix2::from_diagonal(&eig.eigenvalues) * eig.eigenvectors.transpose();
            assert!((re - m).abs().max() <= 1e-6 * scale);
            let conic = nalgebra::Matrix2::new(p.conic[0], p.conic[1], p.conic[1], p.conic[2]);
            assert!((conic * m - nalgebra::Matrix2::identity()).abs().max() < 1e-5);
            assert!(p.sigma_min > 0.0);
        }
        assert!(checked > 900);
    }

    proptest! {
        #[test]
        fn rigid_motion_invariance(seed in any::<u64>(), angle in -3.0f64..3.0, ax in -1.0f64..1.0, ay in -1.0f64..1.0, tx in -5.0f64..5.0) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let node = random_node(&mut rng);
            let cam = axis_cam();
            let axis = nalgebra::Unit::new_normalize(Vector3::new(ax, ay, 1.0));
            let rot = nalgebra::Rotation3::from_axis_angle(&axis, angle);
            let shift = Vector3::new(tx, -tx, 0.5 * tx);
            // move the scene by (rot, shift) and compensate in the camera
            let m = rot * node.mean_f64() + shift;
            let q = nalgebra::UnitQuaternion::from_rotation_matrix(&rot)
                * nalgebra::UnitQuaternion::new_normalize(nalgebra::Quaternion::new(
                    node.rotation[0] as f64, node.rotation[1] as f64, node.rotation[2] as f64, node.rotation[3] as f64));
            let moved = GaussianNode {
                mean: [m.x as f32, m.y as f32, m.z as f32],
                rotation: [q.w as f32, q.i as f32, q.j as f32, q.k as f32],
                ..node
            };
            let mut cam2 = cam.clone();
            cam2.rotation = cam.rotation * rot.matrix().transpose();
            cam2.translation = cam.translation - cam2.rotation * shift;
            let a = project(&node, 0, &cam).unwrap();
            let b = project(&moved, 0, &cam2).unwrap();
            if let (Some(a), Some(b)) = (a, b) {
                let tol = 1e-5 * a.sigma_max.max(1.0) * 10.0;
                prop_assert!((a.sigma_max - b.sigma_max).abs() < tol);
                prop_assert!((a.sigma_min - b.sigma_min).abs() < tol);
                prop_assert!((a.depth - b.depth).abs() < 1e-5 * a.depth.max(1.0));
                prop_assert!((a.radius - b.radius).abs() < 3.0 * tol);
            }
        }

        #[test]
        fn doubling_scale_doubles_sigma(seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let node = random_node(&mut rng);
            let big = GaussianNode { scale: node.scale.map(|s| 2.0 * s), ..node };
            let cam = axis_cam();
            let p = cam.world_to_camera(&node.mean_f64());
            if p.z >= cam.near {
                let a = project_visible(&node, 0, &cam, &p).unwrap().unwrap();
                let b = project_visible(&big, 0, &cam, &p).unwrap().unwrap();
                let undilated = |q: &Projected2D| eigenvalues([q.cov2d[0] - COV2D_DILATION, q.cov2d[1], q.cov2d[2] - COV2D_DILATION]).0.sqrt();
                prop_assert!(undilated(&b) >= 2.0 * undilated(&a) * (1.0 - 1e-9));
            }
        }
    }
}
