use std::fmt::Write as _;
use std::path::PathBuf;

use clap::Args;
use elastic_register::geometry::io;
use elastic_register::synthesis::{
    generate_case, liver_phantom, perturb_rigid, reference_spec, CaseSpec, CropSeed, ForceSpec, LIVER_PHANTOM_CELLS,
    REFERENCE_VISIBILITY,
};
use rayon::prelude::*;

use super::{create_dir, node_list_csv, write_text};
use crate::error::{at, CmdResult, Failure};
use crate::Ctx;

pub const FIXED_NODES_FILE: &str = "fixed_nodes.csv";
pub const FORCE_NODES_FILE: &str = "force_nodes.csv";
pub const MANIFEST_FILE: &str = "cases.csv";

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Output root; one subdirectory per case.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Volume mesh to deform (default: the built-in liver phantom).
    #[arg(long)]
    mesh: Option<PathBuf>,
    /// Named scenario; `reference` is the single z-loaded liver case.
    #[arg(long)]
    preset: Option<String>,
    /// Visible surface fractions.
    #[arg(long, value_delimiter = ',')]
    visibility: Vec<f64>,
    /// Noise standard deviations in mm.
    #[arg(long, value_delimiter = ',')]
    noise: Vec<f64>,
    /// Seeds per (visibility, noise) pair, counted up from `--seed`.
    #[arg(long)]
    seeds: Option<u64>,
    /// Phantom grid cells along x, y and z.
    #[arg(long, value_delimiter = ',')]
    cells: Vec<usize>,
    /// Apply a random rigid motion of at most this many degrees to each cloud.
    #[arg(long, value_name = "DEG")]
    rigid_angle: Option<f64>,
    /// Maximum translation in mm of the random rigid motion.
    #[arg(long, value_name = "MM", default_value_t = 0.0)]
    rigid_translation: f64,
}

/// Random inward surface loads for scenarios without a preset.
fn random_patch_spec(diag: f64) -> CaseSpec {
    CaseSpec {
        forces: ForceSpec::RandomPatches {
            count: 3,
            radius: 0.15 * diag,
            magnitude: 1.0,
            inward: true,
        },
        peak_displacement: Some(0.06 * diag),
        crop_seed: CropSeed::RandomSurfaceNode,
        ..CaseSpec::default()
    }
}

pub fn case_name(visibility: f64, noise: f64, seed: u64) -> String {
    format!("vis{visibility}_noise{noise}_seed{seed}")
}

pub fn run(ctx: &Ctx, args: &SimulateArgs) -> CmdResult {
    let file = &ctx.config.simulate;
    let out = args
        .out
        .clone()
        .or_else(|| ctx.config.out.clone())
        .ok_or_else(|| Failure::Usage("missing --out".into()))?;
    let mesh = match args.mesh.as_ref().or(ctx.config.mesh.as_ref()) {
        Some(p) => io::load_volume_mesh(p).map_err(at("loading mesh"))?,
        None => {
            let cells = match (args.cells.as_slice(), file.cells) {
                ([a, b, c], _) => [*a, *b, *c],
                ([], Some(c)) => c,
                ([], None) => LIVER_PHANTOM_CELLS,
                _ => return Err(Failure::Usage("--cells takes three comma-separated counts".into())),
            };
            liver_phantom(cells).map_err(at("building phantom"))?
        }
    };

    let preset = args.preset.as_deref().or(file.preset.as_deref());
    let (base, default_vis) = match preset {
        Some("reference") => (reference_spec(&mesh), REFERENCE_VISIBILITY),
        Some(other) => return Err(Failure::Usage(format!("unknown preset {other:?} (known: reference)"))),
        None => (
            file.case
                .clone()
                .unwrap_or_else(|| random_patch_spec(mesh.bbox_diagonal())),
            1.0,
        ),
    };
    let pick = |flag: &[f64], cfg: &[f64], default: f64| -> Vec<f64> {
        if !flag.is_empty() {
            flag.to_vec()
        } else if !cfg.is_empty() {
            cfg.to_vec()
        } else {
            vec![default]
        }
    };
    let visibilities = pick(&args.visibility, &file.visibility, default_vis);
    let noises = pick(&args.noise, &file.noise, 0.0);
    let n_seeds = args.seeds.or(file.seeds).unwrap_or(1);
    if n_seeds == 0 {
        return Err(Failure::Usage("--seeds must be at least 1".into()));
    }

    let mut jobs = Vec::new();
    for &v in &visibilities {
        for &n in &noises {
            for s in ctx.seed..ctx.seed + n_seeds {
                let spec = CaseSpec {
                    visibility: v,
                    noise_sigma: n,
                    seed: s,
                    ..base.clone()
                };
                jobs.push((case_name(v, n, s), spec));
            }
        }
    }

    create_dir(&out)?;
    let rows: Vec<CmdResult<String>> = jobs
        .par_iter()
        .map(|(name, spec)| {
            let mut case = generate_case(&mesh, spec).map_err(at("simulating case"))?;
            if let Some(angle) = args.rigid_angle {
                case = perturb_rigid(&case, angle, args.rigid_translation, spec.seed);
            }
            let dir = out.join(name);
            case.save(&dir).map_err(at("writing case"))?;
            write_text(&dir.join(FORCE_NODES_FILE), &node_list_csv(&case.true_forces.support()))?;
            if let Some(fixed) = &case.true_fixed_nodes {
                write_text(&dir.join(FIXED_NODES_FILE), &node_list_csv(fixed))?;
            }
            Ok(format!(
                "{name},{:?},{:?},{},{:?},{}",
                spec.visibility,
                spec.noise_sigma,
                spec.seed,
                case.visibility_ratio,
                case.cloud.len()
            ))
        })
        .collect();

    let mut manifest = String::from("case,visibility,noise_sigma,seed,achieved_visibility,num_points\n");
    for row in rows {
        let row = row?;
        println!("{row}");
        let _ = writeln!(manifest, "{row}");
    }
    write_text(&out.join(MANIFEST_FILE), &manifest)?;
    println!("{} cases written to {}", jobs.len(), out.display());
    Ok(())
}
