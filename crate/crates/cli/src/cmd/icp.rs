use std::path::{Path, PathBuf};

use clap::Args;
use elastic_register::geometry::io;
use elastic_register::geometry::{PointCloud, Transformable};
use elastic_register::registration::rigid_icp;

use super::{create_dir, write_json};
use crate::error::{at, CmdResult, Failure};
use crate::Ctx;

#[derive(Debug, Args)]
pub struct IcpArgs {
    /// Points to move.
    #[arg(long)]
    source: PathBuf,
    /// Fixed points, or a volume mesh whose surface nodes are used.
    #[arg(long)]
    target: PathBuf,
    #[arg(long, default_value_t = 50)]
    max_iters: usize,
    /// Stop when the RMS distance improves by less than this.
    #[arg(long, default_value_t = 1e-6)]
    tol: f64,
    /// Writes `transform.json` and `aligned.xyz` here.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn load_target(path: &Path) -> CmdResult<PointCloud> {
    let ext = path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase);
    if !matches!(ext.as_deref(), Some("vtk" | "tet")) {
        return io::load_point_cloud(path).map_err(at("loading target"));
    }
    let mesh = io::load_volume_mesh(path).map_err(at("loading target mesh"))?;
    let pts = mesh.surface().node_indices().iter().map(|&i| mesh.nodes()[i]).collect();
    PointCloud::new(pts).map_err(at("loading target mesh"))
}

pub fn run(ctx: &Ctx, args: &IcpArgs) -> CmdResult {
    if args.max_iters == 0 {
        return Err(Failure::Usage("--max-iters must be at least 1".into()));
    }
    let source = io::load_point_cloud(&args.source).map_err(at("loading source"))?;
    let target = load_target(&args.target)?;
    let res = rigid_icp(&source, &target, args.max_iters, args.tol).map_err(at("rigid alignment"))?;
    println!(
        "rms {:.4} mm after {} iterations, rotation {:.3} deg, translation {:.3} mm",
        res.rms,
        res.iterations,
        res.transform.angle().to_degrees(),
        res.transform.translation().norm()
    );
    if let Some(out) = args.out.as_ref().or(ctx.config.out.as_ref()) {
        create_dir(out)?;
        write_json(&out.join("transform.json"), &res.transform)?;
        io::save_point_cloud(out.join("aligned.xyz"), &source.transformed(&res.transform))
            .map_err(at("writing aligned cloud"))?;
    }
    Ok(())
}
