use nalgebra::{Matrix3, Rotation3, Unit, Vector3};
use serde::{Deserialize, Serialize};

use super::GeometryError;
use crate::events::SensorDims;

/// Pinhole camera. `rotation` maps camera-frame vectors to the world frame;
/// the camera looks along its +z axis with image x to the right and y down.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CameraModel {
    pub center: Vector3<f64>,
    pub rotation: Rotation3<f64>,
    pub focal: f64,
    pub cu: f64,
    pub cv: f64,
    pub dims: SensorDims,
}

/// A half-line in world coordinates with unit direction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ray {
    pub origin: Vector3<f64>,
    pub direction: Unit<Vector3<f64>>,
}

impl Ray {
    pub fn at(&self, s: f64) -> Vector3<f64> {
        self.origin + self.direction.into_inner() * s
    }

    /// Perpendicular distance from `p` to the supporting line.
    pub fn distance_to(&self, p: &Vector3<f64>) -> f64 {
        let w = p - self.origin;
        (w - self.direction.into_inner() * w.dot(&self.direction)).norm()
    }
}

impl CameraModel {
    pub fn new(
        center: Vector3<f64>,
        rotation: Matrix3<f64>,
        focal: f64,
        principal: (f64, f64),
        dims: SensorDims,
    ) -> Result<Self, GeometryError> {
        let err = (rotation.transpose() * rotation - Matrix3::identity()).abs().max();
        if err > 1e-9 || (rotation.determinant() - 1.0).abs() > 1e-9 {
            return Err(GeometryError::InvalidCamera(
                "rotation must be orthonormal with det +1".into(),
            ));
        }
        if !(focal > 0.0) {
            return Err(GeometryError::InvalidCamera("focal length must be positive".into()));
        }
        Ok(Self {
            center,
            rotation: Rotation3::from_matrix_unchecked(rotation),
            focal,
            cu: principal.0,
            cv: principal.1,
            dims,
        })
    }

    /// Camera at `center` aimed at `target`, with world `up` projecting to
    /// the top of the image. Principal point at the sensor centre.
    pub fn look_at(
        center: Vector3<f64>,
        target: Vector3<f64>,
        up: Vector3<f64>,
        focal: f64,
        dims: SensorDims,
    ) -> Result<Self, GeometryError> {
        let forward = (target - center)
            .try_normalize(1e-12)
            .ok_or_else(|| GeometryError::InvalidCamera("target coincides with center".into()))?;
        let right = forward
            .cross(&up)
            .try_normalize(1e-12)
            .ok_or_else(|| GeometryError::InvalidCamera("up is parallel to view direction".into()))?;
        let down = forward.cross(&right);
        let rot = Matrix3::from_columns(&[right, down, forward]);
        Self::new(
            center,
            rot,
            focal,
            (dims.width as f64 / 2.0 - 0.5, dims.height as f64 / 2.0 - 0.5),
            dims,
        )
    }

    pub fn optical_axis(&self) -> Vector3<f64> {
        self.rotation * Vector3::z()
    }

    pub fn to_camera(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.rotation.inverse() * (p - self.center)
    }

    /// Pixel coordinates and depth of a world point, or `None` behind the camera.
    pub fn project(&self, p: &Vector3<f64>) -> Option<(f64, f64, f64)> {
        let pc = self.to_camera(p);
        if pc.z <= 1e-9 {
            return None;
        }
        Some((
            self.cu + self.focal * pc.x / pc.z,
            self.cv + self.focal * pc.y / pc.z,
            pc.z,
        ))
    }

    pub fn in_bounds(&self, u: f64, v: f64) -> bool {
        u >= -0.5 && v >= -0.5 && u < self.dims.width as f64 - 0.5 && v < self.dims.height as f64 - 0.5
    }
}

/// Back-projects a pixel to a world-frame viewing ray through the optical center.
pub fn pixel_to_ray(camera: &CameraModel, u: f64, v: f64) -> Ray {
    let dir_cam = Vector3::new((u - camera.cu) / camera.focal, (v - camera.cv) / camera.focal, 1.0);
    Ray {
        origin: camera.center,
        direction: Unit::new_normalize(camera.rotation * dir_cam),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn cam() -> CameraModel {
        CameraModel::new(
            Vector3::new(0.5, -2.0, 0.3),
            Matrix3::identity(),
            100.0,
            (320.0, 240.0),
            SensorDims::new(640, 480),
        )
        .unwrap()
    }

    #[test]
    fn principal_point_maps_to_axis() {
        let c = CameraModel::look_at(
            Vector3::new(0.0, -2.0, 0.5),
            Vector3::new(0.8, 0.0, 0.2),
            Vector3::z(),
            1200.0,
            SensorDims::new(1280, 720),
        )
        .unwrap();
        let r = pixel_to_ray(&c, c.cu, c.cv);
        assert_relative_eq!(r.direction.into_inner(), c.optical_axis(), epsilon = 1e-12);
    }

    #[test]
    fn forty_five_degrees() {
        let c = cam();
        let r = pixel_to_ray(&c, c.cu + 100.0, c.cv);
        let s = std::f64::consts::FRAC_1_SQRT_2;
        assert_relative_eq!(r.direction.into_inner(), Vector3::new(s, 0.0, s), epsilon = 1e-12);
    }

    #[test]
    fn project_then_back_project() {
        let c = CameraModel::look_at(
            Vector3::new(0.2, -2.2, 0.5),
            Vector3::new(0.8, 0.0, 0.25),
            Vector3::z(),
            1500.0,
            SensorDims::new(1280, 720),
        )
        .unwrap();
        for p in [
            Vector3::new(0.8, 0.0, 0.25),
            Vector3::new(1.4, 0.3, 0.1),
            Vector3::new(0.1, -0.4, 0.6),
        ] {
            let (u, v, _) = c.project(&p).unwrap();
            assert!(pixel_to_ray(&c, u, v).distance_to(&p) < 1e-9);
        }
    }

    #[test]
    fn look_at_up_is_image_up() {
        let c = CameraModel::look_at(
            Vector3::new(0.0, -2.0, 0.0),
            Vector3::zeros(),
            Vector3::z(),
            1000.0,
            SensorDims::new(640, 480),
        )
        .unwrap();
        let (_, v_hi, _) = c.project(&Vector3::new(0.0, 0.0, 0.1)).unwrap();
        let (u_right, _, _) = c.project(&Vector3::new(0.1, 0.0, 0.0)).unwrap();
        assert!(v_hi < c.cv);
        assert!(u_right > c.cu);
        assert!(c.project(&Vector3::new(0.0, -3.0, 0.0)).is_none());
    }

    #[test]
    fn rejects_non_orthonormal() {
        let m = Matrix3::new(1.0, 0.1, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0);
        assert!(CameraModel::new(Vector3::zeros(), m, 100.0, (0.0, 0.0), SensorDims::new(10, 10)).is_err());
        let flip = Matrix3::new(-1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0);
        assert!(CameraModel::new(Vector3::zeros(), flip, 100.0, (0.0, 0.0), SensorDims::new(10, 10)).is_err());
    }
}
