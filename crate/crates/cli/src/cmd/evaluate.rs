use std::path::{Path, PathBuf};

use clap::Args;
use elastic_register::evaluation::{
    compute_errors, load_fiducials_csv, nodal_errors, summarize_runs, summary_to_csv, DisplacementInterpolator,
    EvalReport, GroupBy, InterpolationMode, ReportMeta, Warp,
};
use elastic_register::geometry::io::{self, parse_nodal_csv};
use elastic_register::geometry::{DisplacementField, RigidTransform};
use elastic_register::synthesis::{SyntheticCase, CASE_MESH_FILE, CASE_TRUTH_FILE};

use super::register::{CASE_RUN_DIR, U_FILE};
use super::{dir_name, dirs_with, write_text};
use crate::error::{at, CmdResult, Failure};
use crate::Ctx;

pub const REPORT_STEM: &str = "eval";
pub const SUMMARY_FILE: &str = "summary.csv";

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// Registration output directory holding `u.csv` (default: `<case>/run`).
    #[arg(long)]
    run: Option<PathBuf>,
    /// Synthetic case directory; its truth gives per-node errors.
    #[arg(long)]
    case: Option<PathBuf>,
    /// Fiducial pairs `label,x_pre,y_pre,z_pre,x_post,y_post,z_post`.
    #[arg(long)]
    fiducials: Option<PathBuf>,
    /// Mesh of the run, needed with `--fiducials` when no case is given.
    #[arg(long)]
    mesh: Option<PathBuf>,
    /// Rigid transform JSON applied after the displacement.
    #[arg(long, value_name = "PATH")]
    transform: Option<PathBuf>,
    /// Use the nearest node's displacement instead of 4-node inverse-distance weights.
    #[arg(long)]
    nearest: bool,
    /// Where the report is written (default: the run directory).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Evaluate every case under this root that has a `run/` result.
    #[arg(long, value_name = "ROOT", conflicts_with_all = ["run", "case", "fiducials"])]
    batch: Option<PathBuf>,
}

fn load_u(run: &Path) -> CmdResult<DisplacementField> {
    let path = run.join(U_FILE);
    let text =
        std::fs::read_to_string(&path).map_err(|e| Failure::input(format!("reading {}: {e}", path.display())))?;
    let flat = parse_nodal_csv(&text).map_err(at("reading displacement"))?;
    DisplacementField::from_flat(flat).map_err(at("reading displacement"))
}

fn case_meta(case_dir: &Path, case: &SyntheticCase) -> ReportMeta {
    ReportMeta {
        case_id: Some(dir_name(case_dir)),
        method: Some("elastreg".into()),
        visibility: Some(case.spec.visibility),
        noise_sigma: Some(case.noise_sigma),
        ..Default::default()
    }
}

/// Per-node errors of the run in `run_dir` against the truth of `case_dir`.
pub fn evaluate_case(case_dir: &Path, run_dir: &Path) -> CmdResult<EvalReport> {
    let case = SyntheticCase::load(case_dir).map_err(at("loading case"))?;
    let u = load_u(run_dir)?;
    Ok(nodal_errors(&u, &case.true_u)
        .map_err(at("evaluating"))?
        .with_meta(case_meta(case_dir, &case)))
}

pub fn run(ctx: &Ctx, args: &EvaluateArgs) -> CmdResult {
    if let Some(root) = &args.batch {
        return batch(root, args.out.as_deref());
    }
    let run_dir = match (&args.run, &args.case) {
        (Some(r), _) => r.clone(),
        (None, Some(c)) => c.join(CASE_RUN_DIR),
        (None, None) => return Err(Failure::Usage("need --run, --case or --batch".into())),
    };
    let report = if let Some(fid) = &args.fiducials {
        let mesh_path = args
            .mesh
            .clone()
            .or_else(|| args.case.as_ref().map(|c| c.join(CASE_MESH_FILE)))
            .or_else(|| ctx.config.mesh.clone())
            .ok_or_else(|| Failure::Usage("--fiducials needs --mesh or --case".into()))?;
        let mesh = io::load_volume_mesh(&mesh_path).map_err(at("loading mesh"))?;
        let targets = load_fiducials_csv(fid).map_err(at("loading fiducials"))?;
        let rigid = match &args.transform {
            Some(p) => load_transform(p)?,
            None => RigidTransform::identity(),
        };
        let mode = if args.nearest {
            InterpolationMode::Nearest
        } else {
            InterpolationMode::Idw4
        };
        let interp = DisplacementInterpolator::for_mesh(&mesh, load_u(&run_dir)?, mode).map_err(at("evaluating"))?;
        compute_errors(&targets, &Warp::new(interp, rigid))
            .map_err(at("evaluating"))?
            .with_meta(ReportMeta {
                case_id: Some(dir_name(&run_dir)),
                method: Some("elastreg".into()),
                ..Default::default()
            })
    } else if let Some(case_dir) = &args.case {
        if !case_dir.join(CASE_TRUTH_FILE).is_file() {
            return Err(Failure::input(format!(
                "{} has no {CASE_TRUTH_FILE}",
                case_dir.display()
            )));
        }
        evaluate_case(case_dir, &run_dir)?
    } else {
        return Err(Failure::Usage("need --case or --fiducials as ground truth".into()));
    };
    let out = args.out.clone().unwrap_or(run_dir);
    report.save(&out, REPORT_STEM).map_err(at("writing report"))?;
    println!("{}", report.table_entry());
    Ok(())
}

fn load_transform(path: &Path) -> CmdResult<RigidTransform> {
    let text = std::fs::read_to_string(path).map_err(|e| Failure::input(format!("reading {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| Failure::input(format!("transform {}: {e}", path.display())))
}

fn batch(root: &Path, out: Option<&Path>) -> CmdResult {
    let mut reports = Vec::new();
    for case_dir in dirs_with(root, CASE_TRUTH_FILE)? {
        let run_dir = case_dir.join(CASE_RUN_DIR);
        if !run_dir.join(U_FILE).is_file() {
            eprintln!("skipping {}: no {CASE_RUN_DIR}/{U_FILE}", case_dir.display());
            continue;
        }
        let report = evaluate_case(&case_dir, &run_dir)?;
        report.save(&run_dir, REPORT_STEM).map_err(at("writing report"))?;
        reports.push(report);
    }
    if reports.is_empty() {
        return Err(Failure::input(format!("no evaluated runs under {}", root.display())));
    }
    let rows = summarize_runs(&reports, &[GroupBy::Visibility, GroupBy::NoiseSigma]).map_err(at("summarizing"))?;
    println!("visibility,noise_sigma,runs,mean ± std (median)");
    for r in &rows {
        println!("{},{},{},{}", r.group[0], r.group[1], r.runs, r.table_entry());
    }
    let out = out.unwrap_or(root);
    write_text(&out.join(SUMMARY_FILE), &summary_to_csv(&rows))
}
