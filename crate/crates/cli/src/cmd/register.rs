use std::path::{Path, PathBuf};

use clap::Args;
use elastic_register::fem::PenaltyConstraint;
use elastic_register::geometry::io::{self, format_nodal_csv, load_node_list};
use elastic_register::geometry::{MeshFormat, PointCloud, VolumeMesh};
use elastic_register::registration::{trace_to_csv, ForceMask, Registrar, RegistrationConfig, RegistrationResult};
use elastic_register::synthesis::{CASE_CLOUD_FILE, CASE_MESH_FILE};
use elastic_register::Error;
use serde::Serialize;

use super::{create_dir, required, write_json, write_text};
use crate::error::{at, CmdResult, Failure};
use crate::{Ctx, RegistrationFlags};

pub const U_FILE: &str = "u.csv";
pub const F_FILE: &str = "f.csv";
pub const TRACE_FILE: &str = "trace.csv";
pub const META_FILE: &str = "meta.json";
/// Default output directory inside a case directory.
pub const CASE_RUN_DIR: &str = "run";

#[derive(Debug, Args)]
pub struct RegisterArgs {
    /// Synthetic case directory; supplies mesh and cloud, output defaults to `<case>/run`.
    #[arg(long, value_name = "DIR")]
    case: Option<PathBuf>,
    /// Volume mesh (`.vtk` or native `.tet`).
    #[arg(long)]
    mesh: Option<PathBuf>,
    /// Point cloud (`.xyz`, `.ply` or `.csv`).
    #[arg(long)]
    cloud: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Node list held at zero displacement.
    #[arg(long, value_name = "PATH")]
    fixed_nodes: Option<PathBuf>,
    /// `surface`, `all`, or a node-list file.
    #[arg(long, value_name = "MASK")]
    force_mask: Option<String>,
    #[command(flatten)]
    params: RegistrationFlags,
}

/// Run description written next to the results.
#[derive(Debug, Serialize)]
struct RunMeta<'a> {
    mesh: String,
    cloud: String,
    num_nodes: usize,
    num_tets: usize,
    num_points: usize,
    iterations: usize,
    stopped_early: bool,
    initial_j: f64,
    final_j: f64,
    final_mean_residual: f64,
    config: &'a RegistrationConfig,
}

pub fn run(ctx: &Ctx, args: &RegisterArgs) -> CmdResult {
    let file = &ctx.config;
    let (mesh_path, cloud_path, default_out) = match &args.case {
        Some(dir) => (
            dir.join(CASE_MESH_FILE),
            dir.join(CASE_CLOUD_FILE),
            Some(dir.join(CASE_RUN_DIR)),
        ),
        None => (
            required(args.mesh.as_ref(), file.mesh.as_ref(), "--mesh")?,
            required(args.cloud.as_ref(), file.cloud.as_ref(), "--cloud")?,
            None,
        ),
    };
    let out = args
        .out
        .clone()
        .or_else(|| file.out.clone())
        .or(default_out)
        .ok_or_else(|| Failure::Usage("missing --out".into()))?;

    let mesh = io::load_volume_mesh(&mesh_path).map_err(at("loading mesh"))?;
    let cloud = io::load_point_cloud(&cloud_path).map_err(at("loading point cloud"))?;
    let mut cfg = args.params.apply(file.registration.clone());
    if let Some(path) = args.fixed_nodes.as_ref().or(file.fixed_nodes.as_ref()) {
        cfg.fixed_nodes = Some(PenaltyConstraint::new(
            load_node_list(path).map_err(at("loading fixed nodes"))?,
        ));
    }
    match args.force_mask.as_deref() {
        Some("surface") => cfg.force_mask = ForceMask::Surface,
        Some("all") => cfg.force_mask = ForceMask::AllNodes,
        Some(path) => cfg.force_mask = ForceMask::Nodes(load_node_list(path).map_err(at("loading force mask"))?),
        None => {
            if let Some(path) = &file.force_mask {
                cfg.force_mask = ForceMask::Nodes(load_node_list(path).map_err(at("loading force mask"))?);
            }
        }
    }
    cfg.validate().map_err(at("configuration"))?;

    create_dir(&out)?;
    let registrar = Registrar::new(&mesh, cfg.clone()).map_err(at("building stiffness system"))?;
    let result = match registrar.run(&cloud) {
        Ok(r) => r,
        Err(Error::NonFiniteState { iteration, trace }) => {
            write_text(&out.join(TRACE_FILE), &trace_to_csv(&trace))?;
            return Err(at("registration")(Error::NonFiniteState { iteration, trace }));
        }
        Err(e) => return Err(at("registration")(e)),
    };
    if ctx.trace {
        for t in &result.trace {
            eprintln!(
                "iter {:>4}  J {:.6e}  alpha {:.4e}  |g| {:.4e}  mean dist {:.4}",
                t.iter, t.j, t.alpha, t.grad_norm, t.mean_residual
            );
        }
    }
    write_outputs(&out, &mesh_path, &cloud_path, &mesh, &cloud, &cfg, &result)?;
    println!(
        "registered {} points onto {} nodes: {} iterations, J {:.6e} -> {:.6e}, mean distance {:.4} mm, {:.2} s",
        cloud.len(),
        mesh.num_nodes(),
        result.converged_iterations,
        result.trace.first().map_or(result.final_j, |t| t.j),
        result.final_j,
        result.final_mean_residual,
        result.wall_time.as_secs_f64()
    );
    println!("results written to {}", out.display());
    Ok(())
}

fn write_outputs(
    out: &Path,
    mesh_path: &Path,
    cloud_path: &Path,
    mesh: &VolumeMesh,
    cloud: &PointCloud,
    cfg: &RegistrationConfig,
    result: &RegistrationResult,
) -> CmdResult {
    let u = result.u_final.as_slice();
    let deformed = mesh.with_nodes(mesh.deformed_nodes(u)).map_err(at("deforming mesh"))?;
    let format = MeshFormat::from_path(mesh_path);
    let deformed_path = out.join(format!("deformed.{}", format.extension()));
    match format {
        MeshFormat::Vtk => io::save_vtk_with_displacement(&deformed_path, &deformed, u),
        MeshFormat::Native => io::save_volume_mesh(&deformed_path, &deformed, format),
    }
    .map_err(at("writing deformed mesh"))?;
    write_text(&out.join(U_FILE), &format_nodal_csv(u, ["ux", "uy", "uz"]))?;
    write_text(
        &out.join(F_FILE),
        &format_nodal_csv(result.f_final.as_slice(), ["fx", "fy", "fz"]),
    )?;
    write_text(&out.join(TRACE_FILE), &trace_to_csv(&result.trace))?;
    let meta = RunMeta {
        mesh: mesh_path.display().to_string(),
        cloud: cloud_path.display().to_string(),
        num_nodes: mesh.num_nodes(),
        num_tets: mesh.tets().len(),
        num_points: cloud.len(),
        iterations: result.converged_iterations,
        stopped_early: result.stopped_early,
        initial_j: result.trace.first().map_or(result.final_j, |t| t.j),
        final_j: result.final_j,
        final_mean_residual: result.final_mean_residual,
        config: cfg,
    };
    write_json(&out.join(META_FILE), &meta)
}
