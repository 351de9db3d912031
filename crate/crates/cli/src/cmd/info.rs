use std::path::{Path, PathBuf};

use clap::Args;
use elastic_register::geometry::{io, VolumeMesh};
use elastic_register::synthesis::{SyntheticCase, CASE_TRUTH_FILE};

use crate::error::{at, CmdResult, Failure};
use crate::Ctx;

#[derive(Debug, Args)]
pub struct InfoArgs {
    /// Meshes, clouds or case directories. With none, prints the effective
    /// registration configuration as TOML.
    paths: Vec<PathBuf>,
}

fn describe_mesh(mesh: &VolumeMesh) {
    let vols: Vec<f64> = (0..mesh.tets().len()).map(|t| mesh.tet_volume(t)).collect();
    let mean = mesh.total_volume() / vols.len() as f64;
    let min = vols.iter().copied().fold(f64::INFINITY, f64::min);
    let s = mesh.surface();
    println!("  nodes            {}", mesh.num_nodes());
    println!("  tetrahedra       {}", mesh.tets().len());
    println!("  surface nodes    {}", s.num_nodes());
    println!("  surface triangles {}", s.triangles().len());
    println!("  surface area     {:.3}", s.total_area());
    println!("  volume           {:.3}", mesh.total_volume());
    println!("  bbox diagonal    {:.3}", mesh.bbox_diagonal());
    println!("  min/mean tet vol {:.4}", min / mean);
}

fn describe(path: &Path) -> CmdResult {
    println!("{}", path.display());
    if path.is_dir() {
        if !path.join(CASE_TRUTH_FILE).is_file() {
            return Err(Failure::input(format!("{} is not a case directory", path.display())));
        }
        let case = SyntheticCase::load(path).map_err(at("loading case"))?;
        describe_mesh(&case.mesh);
        println!("  cloud points     {}", case.cloud.len());
        println!(
            "  visibility       {:.4} (requested {})",
            case.visibility_ratio, case.spec.visibility
        );
        println!("  noise sigma      {}", case.noise_sigma);
        println!("  seed             {}", case.rng_seed);
        println!("  max |u| true     {:.4}", case.true_u.max_norm());
        println!("  mean |u| true    {:.4}", case.true_u.mean_norm());
        println!("  force nodes      {}", case.true_forces.support().len());
        if let Some(f) = &case.true_fixed_nodes {
            println!("  fixed nodes      {}", f.len());
        }
        return Ok(());
    }
    let ext = path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase);
    if matches!(ext.as_deref(), Some("vtk" | "tet")) {
        describe_mesh(&io::load_volume_mesh(path).map_err(at("loading mesh"))?);
    } else {
        let cloud = io::load_point_cloud(path).map_err(at("loading point cloud"))?;
        let c = cloud.centroid();
        println!("  points           {}", cloud.len());
        println!("  centroid         {:.3} {:.3} {:.3}", c.x, c.y, c.z);
        println!(
            "  bbox diagonal    {:.3}",
            elastic_register::geometry::bbox_diagonal(cloud.points())
        );
    }
    Ok(())
}

pub fn run(ctx: &Ctx, args: &InfoArgs) -> CmdResult {
    if args.paths.is_empty() {
        let text = toml::to_string(&ctx.config.registration).map_err(|e| Failure::input(e.to_string()))?;
        println!("[registration]\n{text}");
        return Ok(());
    }
    args.paths.iter().try_for_each(|p| describe(p))
}
