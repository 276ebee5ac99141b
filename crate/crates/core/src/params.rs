//! Vehicle parameters: mass properties, aerodynamic surface geometry,
//! propulsion constants.
//!
//! The surface frame convention is: `x_s` along the chord (leading
//! direction), `y_s` along the span, `z_s` the plate normal (right-handed).
//! Flat-plate normal force acts along `-z_s`. The world frame is NED-style
//! (z down), so gravity is `+m g e_z` in world coordinates.

use nalgebra::{Matrix3, Vector3};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ParamsError {
    #[error("invalid parameter: {0}")]
    Invalid(String),
    #[error("parameter file parse error: {0}")]
    Parse(String),
}

/// Which deflection channel drives an actuated surface.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SurfaceActuation {
    /// Index into the deflection vector `[ar, al, e, r]`.
    pub channel: usize,
    /// Sign convention relating channel deflection to rotation about the
    /// surface span axis.
    pub sign: f64,
}

/// One flat-plate aerodynamic surface.
#[derive(Debug, Clone)]
pub struct AeroSurface {
    pub name: String,
    /// Plate area, m^2.
    pub area: f64,
    /// Rotation taking body-frame vectors into the (undeflected) surface
    /// frame.
    pub mount_rotation: Matrix3<f64>,
    /// Body-frame vector from the center of mass to the surface hinge, m.
    pub hinge_offset: Vector3<f64>,
    /// Scalar offset along body e_x defining the moment arm r_s, m.
    pub l_h: f64,
    /// Scalar offset along surface e_x from the hinge to the center of
    /// pressure, m.
    pub l_s: f64,
    /// Backwash velocity coefficient gamma_i (dimensionless, >= 0).
    pub backwash_gain: f64,
    /// None for fixed surfaces.
    pub actuation: Option<SurfaceActuation>,
}

impl AeroSurface {
    pub fn validate(&self) -> Result<(), ParamsError> {
        if !(self.area > 0.0) {
            return Err(ParamsError::Invalid(format!(
                "surface {}: area must be positive",
                self.name
            )));
        }
        if self.backwash_gain < 0.0 {
            return Err(ParamsError::Invalid(format!(
                "surface {}: backwash gain must be non-negative",
                self.name
            )));
        }
        let r = &self.mount_rotation;
        let orth = (r.transpose() * r - Matrix3::identity()).abs().max();
        if orth > 1e-9 || (r.determinant() - 1.0).abs() > 1e-9 {
            return Err(ParamsError::Invalid(format!(
                "surface {}: mount rotation is not a proper rotation",
                self.name
            )));
        }
        if let Some(act) = &self.actuation {
            if act.channel >= 4 {
                return Err(ParamsError::Invalid(format!(
                    "surface {}: actuation channel out of range",
                    self.name
                )));
            }
        }
        Ok(())
    }
}

/// Full vehicle parameter set.
#[derive(Debug, Clone)]
pub struct AircraftParams {
    /// Vehicle mass, kg.
    pub mass: f64,
    /// Inertia tensor about the center of mass, kg m^2.
    pub inertia: Matrix3<f64>,
    pub surfaces: Vec<AeroSurface>,
    /// Air density, kg/m^3.
    pub rho: f64,
    /// Propeller actuator-disk area, m^2.
    pub disk_area: f64,
    /// Rotation taking thrust-frame vectors into the body frame; thrust
    /// acts along the thrust-frame e_x.
    pub thrust_mount: Matrix3<f64>,
    /// Thrust lag pole a_t, 1/s.
    pub thrust_a: f64,
    /// Thrust input gain b_t, N per unit input per second.
    pub thrust_b: f64,
    /// Gravitational acceleration, m/s^2.
    pub gravity: f64,
    /// Body-frame lever arm from the center of mass to the propeller,
    /// used to evaluate the velocity at the prop, m.
    pub prop_offset: Vector3<f64>,
    /// Pitch margin from +-pi/2 below which the Euler rate map is
    /// considered singular, rad.
    pub eps_gimbal: f64,
    /// Planar surface-flow speed below which the force contribution is
    /// treated as zero, m/s.
    pub eps_velocity: f64,
}

impl AircraftParams {
    pub fn validate(&self) -> Result<(), ParamsError> {
        if !(self.mass > 0.0) {
            return Err(ParamsError::Invalid("mass must be positive".into()));
        }
        if !(self.rho > 0.0) {
            return Err(ParamsError::Invalid("rho must be positive".into()));
        }
        if !(self.disk_area > 0.0) {
            return Err(ParamsError::Invalid("disk_area must be positive".into()));
        }
        let sym = (self.inertia - self.inertia.transpose()).abs().max();
        if sym > 1e-12 {
            return Err(ParamsError::Invalid("inertia must be symmetric".into()));
        }
        if self
            .inertia
            .symmetric_eigenvalues()
            .iter()
            .any(|&e| e <= 0.0)
        {
            return Err(ParamsError::Invalid(
                "inertia must be positive definite".into(),
            ));
        }
        for s in &self.surfaces {
            s.validate()?;
        }
        Ok(())
    }

    /// Look up a surface by name.
    pub fn surface(&self, name: &str) -> Option<&AeroSurface> {
        self.surfaces.iter().find(|s| s.name == name)
    }

    /// Default parameter set for the 24-inch Edge 540 foam model.
    ///
    /// Thrust coefficients, backwash gains and mass are the identified
    /// values; surface areas and offsets are illustrative geometry for a
    /// 24-inch aerobatic foamie.
    pub fn edge540_24in() -> Self {
        let horizontal = Matrix3::identity();
        // Vertical plate: chord along body x, normal along body y.
        let vertical = rotation_from_axes(
            Vector3::new(1.0, 0.0, 0.0),
            Vector3::new(0.0, 1.0, 0.0),
        );
        let surfaces = vec![
            AeroSurface {
                name: "wing".into(),
                area: 0.105,
                mount_rotation: horizontal,
                hinge_offset: Vector3::new(0.02, 0.0, 0.0),
                l_h: 0.02,
                l_s: 0.0,
                backwash_gain: 0.0,
                actuation: None,
            },
            AeroSurface {
                name: "fuselage_h".into(),
                area: 0.020,
                mount_rotation: horizontal,
                hinge_offset: Vector3::new(-0.05, 0.0, 0.0),
                l_h: -0.05,
                l_s: 0.0,
                backwash_gain: 0.0,
                actuation: None,
            },
            AeroSurface {
                name: "fuselage_v".into(),
                area: 0.035,
                mount_rotation: vertical,
                hinge_offset: Vector3::new(-0.05, 0.0, 0.0),
                l_h: -0.05,
                l_s: 0.0,
                backwash_gain: 0.0,
                actuation: None,
            },
            AeroSurface {
                name: "tail_h".into(),
                area: 0.010,
                mount_rotation: horizontal,
                hinge_offset: Vector3::new(-0.36, 0.0, 0.0),
                l_h: -0.36,
                l_s: 0.0,
                backwash_gain: 0.0,
                actuation: None,
            },
            AeroSurface {
                name: "tail_v".into(),
                area: 0.008,
                mount_rotation: vertical,
                hinge_offset: Vector3::new(-0.36, 0.0, -0.03),
                l_h: -0.36,
                l_s: 0.0,
                backwash_gain: 0.0,
                actuation: None,
            },
            AeroSurface {
                name: "aileron_r".into(),
                area: 0.012,
                mount_rotation: horizontal,
                hinge_offset: Vector3::new(-0.05, 0.20, 0.0),
                l_h: -0.05,
                l_s: -0.03,
                backwash_gain: 0.1,
                actuation: Some(SurfaceActuation {
                    channel: 0,
                    sign: 1.0,
                }),
            },
            AeroSurface {
                name: "aileron_l".into(),
                area: 0.012,
                mount_rotation: horizontal,
                hinge_offset: Vector3::new(-0.05, -0.20, 0.0),
                l_h: -0.05,
                l_s: -0.03,
                backwash_gain: 0.1,
                actuation: Some(SurfaceActuation {
                    channel: 1,
                    sign: 1.0,
                }),
            },
            AeroSurface {
                name: "elevator".into(),
                area: 0.012,
                mount_rotation: horizontal,
                hinge_offset: Vector3::new(-0.40, 0.0, 0.0),
                l_h: -0.40,
                l_s: -0.025,
                backwash_gain: 0.3,
                actuation: Some(SurfaceActuation {
                    channel: 2,
                    sign: 1.0,
                }),
            },
            AeroSurface {
                name: "rudder".into(),
                area: 0.012,
                mount_rotation: vertical,
                hinge_offset: Vector3::new(-0.40, 0.0, -0.02),
                l_h: -0.40,
                l_s: -0.025,
                backwash_gain: 0.1,
                actuation: Some(SurfaceActuation {
                    channel: 3,
                    sign: 1.0,
                }),
            },
        ];
        Self {
            mass: 0.120,
            inertia: Matrix3::from_diagonal(&Vector3::new(0.0020, 0.0030, 0.0045)),
            surfaces,
            rho: 1.225,
            disk_area: 0.0249,
            thrust_mount: Matrix3::identity(),
            thrust_a: -4.9167,
            thrust_b: 9.6466,
            gravity: 9.81,
            prop_offset: Vector3::new(0.25, 0.0, 0.0),
            eps_gimbal: 1e-3,
            eps_velocity: 1e-9,
        }
    }

    /// Parameter set emulating the flight-identified corrections: wing and
    /// horizontal fuselage area doubled, rudder area scaled by 0.75.
    /// Used as the "truth" side of the model-mismatch experiments.
    pub fn edge540_24in_identified() -> Self {
        let mut p = Self::edge540_24in();
        for s in &mut p.surfaces {
            match s.name.as_str() {
                "wing" | "fuselage_h" => s.area *= 2.0,
                "rudder" => s.area *= 0.75,
                _ => {}
            }
        }
        p
    }
}

/// Build a rotation (body -> surface) from the surface chord axis `x_s`
/// and plate normal `z_s`, both given in body coordinates.
pub fn rotation_from_axes(x_s: Vector3<f64>, z_s: Vector3<f64>) -> Matrix3<f64> {
    let x = x_s.normalize();
    let z = z_s.normalize();
    let y = z.cross(&x).normalize();
    // Rows are the surface axes expressed in body coordinates.
    Matrix3::from_rows(&[x.transpose(), y.transpose(), z.transpose()])
}
