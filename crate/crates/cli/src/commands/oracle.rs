//! `oracle`: analytic ground-truth polarization for a lit sphere or
//! ellipsoid, written as a property-map scene.

use std::path::Path;

use polar_core::error::{Error, Result};
use polar_core::oracle::{make_ellipsoid, make_sphere, render_polar, Material, ReflectionMode, SceneLight};

use crate::commands::{echo, ModeArg, ShapeArg};
use crate::scene::{self, SceneMeta};

pub struct OracleParams {
    pub shape: ShapeArg,
    pub resolution: usize,
    pub eta: f64,
    pub mode: ModeArg,
    pub albedo: f64,
    pub ambient: f64,
    pub light: [f64; 3],
    pub radius_frac: f64,
    pub aspect: f64,
}

pub fn run(out: &Path, params: &OracleParams, seed: u64) -> Result<()> {
    // Scenes are written with peak = 1.0; cap the shading budget so the
    // brightest pixel cannot exceed it.
    if params.albedo + params.ambient > 1.0 {
        return Err(Error::Precondition(format!(
            "albedo + ambient must stay within the unit peak, got {} + {}",
            params.albedo, params.ambient
        )));
    }
    let normals = match params.shape {
        ShapeArg::Sphere => make_sphere(params.resolution, params.radius_frac)?,
        ShapeArg::Ellipsoid => {
            let c = (params.resolution as f64 - 1.0) / 2.0;
            let r = params.radius_frac * params.resolution as f64 / 2.0;
            make_ellipsoid(params.resolution, c, c, r * params.aspect, r / params.aspect)?
        }
    };
    let material = Material {
        eta: params.eta,
        mode: match params.mode {
            ModeArg::Diffuse => ReflectionMode::Diffuse,
            ModeArg::Specular => ReflectionMode::Specular,
        },
        albedo: params.albedo,
    };
    let light = SceneLight::from_direction(params.light, params.ambient)?;
    let state = render_polar(&normals, &material, &light)?;

    let shape_label = match params.shape {
        ShapeArg::Sphere => "sphere".to_string(),
        ShapeArg::Ellipsoid => format!("ellipsoid(aspect={})", params.aspect),
    };
    let mode_label = match params.mode {
        ModeArg::Diffuse => "diffuse",
        ModeArg::Specular => "specular",
    };
    echo(
        "oracle",
        seed,
        &[
            ("out", out.display().to_string()),
            ("shape", shape_label),
            ("resolution", params.resolution.to_string()),
            ("eta", params.eta.to_string()),
            ("mode", mode_label.to_string()),
            ("albedo", params.albedo.to_string()),
            ("ambient", params.ambient.to_string()),
            (
                "light",
                format!("{},{},{}", light.direction[0], light.direction[1], light.direction[2]),
            ),
            ("radius_frac", params.radius_frac.to_string()),
        ],
    );

    let meta = SceneMeta { peak: Some(1.0), ..SceneMeta::default() };
    scene::write_state(out, &state, &meta)
}
