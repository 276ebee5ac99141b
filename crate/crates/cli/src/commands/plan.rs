//! `plan`: kinematic seed path through the map as CSV, plus an optional
//! horizontal distance-field slice for plotting.

use nalgebra::Vector3;

use crate::output::{write_atomic, Csv};
use crate::{CliError, Context};

pub fn run(ctx: &Context, slice_z: Option<f64>) -> Result<(), CliError> {
    let (field, tp) = super::plan_seed_path(ctx)?;

    let mut csv = Csv::new(&["t", "x", "y", "z", "vx", "vy", "vz", "kappa"]);
    let n = ((tp.total_time / 0.02).ceil() as usize).max(1);
    for i in 0..=n {
        let t = tp.total_time * i as f64 / n as f64;
        let (pos, tangent, speed) = tp.sample(t);
        let kappa = tp.smooth.curvature(tp.arclength_of_time(t));
        csv.num_row(&[
            t,
            pos[0],
            pos[1],
            pos[2],
            tangent[0] * speed,
            tangent[1] * speed,
            tangent[2] * speed,
            kappa,
        ]);
    }
    let path = write_atomic(&ctx.out_dir, "path.csv", &csv.finish())?;
    println!("wrote {}", path.display());

    if let Some(z) = slice_z {
        let mut slice = Csv::new(&["x", "y", "distance"]);
        for i in 0..field.dims[0] {
            for j in 0..field.dims[1] {
                let p = Vector3::new(
                    field.origin[0] + field.resolution * (i as f64 + 0.5),
                    field.origin[1] + field.resolution * (j as f64 + 0.5),
                    z,
                );
                slice.num_row(&[p[0], p[1], field.min_distance(&p)]);
            }
        }
        let path = write_atomic(&ctx.out_dir, "map_slice.csv", &slice.finish())?;
        println!("wrote {}", path.display());
    }
    Ok(())
}
