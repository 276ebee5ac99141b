//! On-disk configuration formats: vehicle parameters, maps, and solver
//! settings as versioned TOML. Loading is fail-fast; every file is parsed
//! and validated before any computation starts.

use nalgebra::{Matrix3, Vector3};
use poststall::environment::{Aabb, HallwaySpec};
use poststall::params::{AeroSurface, AircraftParams, SurfaceActuation};
use poststall::trajopt::SolverConfig;
use serde::{Deserialize, Serialize};

use crate::CliError;

pub const FORMAT_VERSION: u32 = 1;

fn check_version(version: u32, what: &str) -> Result<(), CliError> {
    if version != FORMAT_VERSION {
        return Err(CliError::Config(format!(
            "{what}: unsupported format version {version} (expected {FORMAT_VERSION})"
        )));
    }
    Ok(())
}

fn mat3(rows: &[[f64; 3]; 3]) -> Matrix3<f64> {
    Matrix3::from_fn(|i, j| rows[i][j])
}

fn rows3(m: &Matrix3<f64>) -> [[f64; 3]; 3] {
    [
        [m[(0, 0)], m[(0, 1)], m[(0, 2)]],
        [m[(1, 0)], m[(1, 1)], m[(1, 2)]],
        [m[(2, 0)], m[(2, 1)], m[(2, 2)]],
    ]
}

fn vec3(v: &[f64; 3]) -> Vector3<f64> {
    Vector3::new(v[0], v[1], v[2])
}

/// One aerodynamic surface block in a vehicle parameter file.
#[derive(Debug, Serialize, Deserialize)]
pub struct SurfaceFile {
    pub name: String,
    /// Plate area, m^2.
    pub area: f64,
    /// Rotation taking body-frame vectors into the surface frame,
    /// row-major.
    pub rotation: [[f64; 3]; 3],
    /// Body-frame hinge position relative to the center of mass, m.
    pub hinge_offset: [f64; 3],
    /// Moment-arm offset along body x, m.
    pub l_h: f64,
    /// Hinge-to-center-of-pressure offset along surface x, m.
    pub l_s: f64,
    /// Propeller backwash gain (dimensionless).
    pub backwash_gain: f64,
    /// Deflection channel index for actuated surfaces; absent = fixed.
    pub channel: Option<usize>,
    /// Deflection sign convention for the channel.
    pub sign: Option<f64>,
}

/// Vehicle parameter file: SI units throughout.
#[derive(Debug, Serialize, Deserialize)]
pub struct ParamsFile {
    pub version: u32,
    /// Mass, kg.
    pub mass: f64,
    /// Inertia tensor about the center of mass, kg m^2, row-major.
    pub inertia: [[f64; 3]; 3],
    /// Air density, kg/m^3.
    pub rho: f64,
    /// Propeller actuator-disk area, m^2.
    pub disk_area: f64,
    /// Rotation taking thrust-frame vectors into the body frame.
    pub thrust_mount: [[f64; 3]; 3],
    /// Thrust lag pole, 1/s.
    pub thrust_a: f64,
    /// Thrust input gain, N/s per unit input.
    pub thrust_b: f64,
    /// Gravitational acceleration, m/s^2.
    pub gravity: f64,
    /// Body-frame propeller position relative to the center of mass, m.
    pub prop_offset: [f64; 3],
    /// Gimbal-lock pitch margin, rad.
    pub eps_gimbal: f64,
    /// Surface-flow dead band, m/s.
    pub eps_velocity: f64,
    #[serde(rename = "surface")]
    pub surfaces: Vec<SurfaceFile>,
}

impl From<&AircraftParams> for ParamsFile {
    fn from(p: &AircraftParams) -> Self {
        Self {
            version: FORMAT_VERSION,
            mass: p.mass,
            inertia: rows3(&p.inertia),
            rho: p.rho,
            disk_area: p.disk_area,
            thrust_mount: rows3(&p.thrust_mount),
            thrust_a: p.thrust_a,
            thrust_b: p.thrust_b,
            gravity: p.gravity,
            prop_offset: [p.prop_offset[0], p.prop_offset[1], p.prop_offset[2]],
            eps_gimbal: p.eps_gimbal,
            eps_velocity: p.eps_velocity,
            surfaces: p
                .surfaces
                .iter()
                .map(|s| SurfaceFile {
                    name: s.name.clone(),
                    area: s.area,
                    rotation: rows3(&s.mount_rotation),
                    hinge_offset: [s.hinge_offset[0], s.hinge_offset[1], s.hinge_offset[2]],
                    l_h: s.l_h,
                    l_s: s.l_s,
                    backwash_gain: s.backwash_gain,
                    channel: s.actuation.map(|a| a.channel),
                    sign: s.actuation.map(|a| a.sign),
                })
                .collect(),
        }
    }
}

impl ParamsFile {
    pub fn into_params(self) -> Result<AircraftParams, CliError> {
        check_version(self.version, "vehicle parameters")?;
        let surfaces = self
            .surfaces
            .into_iter()
            .map(|s| {
                let actuation = match (s.channel, s.sign) {
                    (Some(channel), sign) => Some(SurfaceActuation {
                        channel,
                        sign: sign.unwrap_or(1.0),
                    }),
                    (None, _) => None,
                };
                AeroSurface {
                    name: s.name,
                    area: s.area,
                    mount_rotation: mat3(&s.rotation),
                    hinge_offset: vec3(&s.hinge_offset),
                    l_h: s.l_h,
                    l_s: s.l_s,
                    backwash_gain: s.backwash_gain,
                    actuation,
                }
            })
            .collect();
        let params = AircraftParams {
            mass: self.mass,
            inertia: mat3(&self.inertia),
            surfaces,
            rho: self.rho,
            disk_area: self.disk_area,
            thrust_mount: mat3(&self.thrust_mount),
            thrust_a: self.thrust_a,
            thrust_b: self.thrust_b,
            gravity: self.gravity,
            prop_offset: vec3(&self.prop_offset),
            eps_gimbal: self.eps_gimbal,
            eps_velocity: self.eps_velocity,
        };
        params
            .validate()
            .map_err(|e| CliError::Config(format!("vehicle parameters: {e}")))?;
        Ok(params)
    }
}

/// One axis-aligned free-space box in a map file.
#[derive(Debug, Serialize, Deserialize)]
pub struct BoxFile {
    pub min: [f64; 3],
    pub max: [f64; 3],
}

/// Corridor map file: free space is the union of the boxes.
#[derive(Debug, Serialize, Deserialize)]
pub struct MapFile {
    pub version: u32,
    /// Nominal corridor width, m.
    pub width: f64,
    /// Nominal corridor height, m.
    pub height: f64,
    pub start: [f64; 3],
    pub start_yaw: f64,
    pub goal: [f64; 3],
    #[serde(rename = "box")]
    pub boxes: Vec<BoxFile>,
}

impl From<&HallwaySpec> for MapFile {
    fn from(spec: &HallwaySpec) -> Self {
        Self {
            version: FORMAT_VERSION,
            width: spec.width,
            height: spec.height,
            start: [spec.start[0], spec.start[1], spec.start[2]],
            start_yaw: spec.start_yaw,
            goal: [spec.goal[0], spec.goal[1], spec.goal[2]],
            boxes: spec
                .segments
                .iter()
                .map(|b| BoxFile {
                    min: [b.min[0], b.min[1], b.min[2]],
                    max: [b.max[0], b.max[1], b.max[2]],
                })
                .collect(),
        }
    }
}

impl MapFile {
    pub fn into_spec(self) -> Result<HallwaySpec, CliError> {
        check_version(self.version, "map")?;
        let spec = HallwaySpec {
            segments: self
                .boxes
                .iter()
                .map(|b| Aabb::new(vec3(&b.min), vec3(&b.max)))
                .collect(),
            width: self.width,
            height: self.height,
            goal: vec3(&self.goal),
            start: vec3(&self.start),
            start_yaw: self.start_yaw,
        };
        spec.validate()
            .map_err(|e| CliError::Config(format!("map: {e}")))?;
        Ok(spec)
    }
}

/// Solver settings file.
#[derive(Debug, Serialize, Deserialize)]
pub struct SolverFile {
    pub version: u32,
    pub tol_defect: f64,
    pub tol_cons: f64,
    pub max_outer: usize,
    pub max_inner: usize,
    pub mu0: f64,
    pub mu_scale: f64,
}

impl SolverFile {
    pub fn into_config(self) -> Result<SolverConfig, CliError> {
        check_version(self.version, "solver config")?;
        if !(self.tol_defect > 0.0 && self.tol_cons > 0.0 && self.mu0 > 0.0)
            || self.mu_scale <= 1.0
            || self.max_outer == 0
            || self.max_inner == 0
        {
            return Err(CliError::Config(
                "solver config: tolerances and penalties must be positive, \
                 mu_scale > 1, iteration caps nonzero"
                    .into(),
            ));
        }
        Ok(SolverConfig {
            tol_defect: self.tol_defect,
            tol_cons: self.tol_cons,
            max_outer: self.max_outer,
            max_inner: self.max_inner,
            mu0: self.mu0,
            mu_scale: self.mu_scale,
        })
    }
}

fn load_toml<T: serde::de::DeserializeOwned>(path: &std::path::Path, what: &str) -> Result<T, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| {
        CliError::Config(format!("{what} file {}: {e}", path.display()))
    })?;
    toml::from_str(&text)
        .map_err(|e| CliError::Config(format!("{what} file {}: {e}", path.display())))
}

pub fn load_params(path: &std::path::Path) -> Result<AircraftParams, CliError> {
    load_toml::<ParamsFile>(path, "vehicle parameter")?.into_params()
}

pub fn load_map(path: &std::path::Path) -> Result<HallwaySpec, CliError> {
    load_toml::<MapFile>(path, "map")?.into_spec()
}

pub fn load_solver(path: &std::path::Path) -> Result<SolverConfig, CliError> {
    load_toml::<SolverFile>(path, "solver config")?.into_config()
}
