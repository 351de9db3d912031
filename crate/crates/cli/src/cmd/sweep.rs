use std::fmt::Write as _;
use std::path::PathBuf;

use clap::Args;
use elastic_register::evaluation::{nodal_errors, summarize_runs, summary_to_csv, EvalReport, GroupBy, ReportMeta};
use elastic_register::registration::{register, RegistrationConfig};
use elastic_register::synthesis::{SyntheticCase, CASE_TRUTH_FILE};
use rayon::prelude::*;

use super::{create_dir, dir_name, dirs_with, write_text};
use crate::error::{at, CmdResult, Failure};
use crate::{Ctx, RegistrationFlags};

pub const RUNS_FILE: &str = "sweep_runs.csv";
pub const SUMMARY_FILE: &str = "sweep_summary.csv";

#[derive(Debug, Args)]
pub struct SweepArgs {
    /// Root directory of synthetic cases.
    #[arg(long, value_name = "ROOT")]
    cases: Option<PathBuf>,
    /// Individual case directories.
    #[arg(long = "case", value_name = "DIR")]
    case_dirs: Vec<PathBuf>,
    /// Soft-spring constants to try.
    #[arg(long, value_delimiter = ',')]
    kss_grid: Vec<f64>,
    /// Poisson ratios to try.
    #[arg(long, value_delimiter = ',')]
    nu_grid: Vec<f64>,
    /// Iteration counts to try.
    #[arg(long, value_delimiter = ',')]
    iters_grid: Vec<usize>,
    /// Output directory for the run table and the grouped summary.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Baseline values for the parameters not being varied.
    #[command(flatten)]
    baseline: RegistrationFlags,
}

/// One varied parameter value; everything else stays at the baseline.
struct Variant {
    param: &'static str,
    value: String,
    config: RegistrationConfig,
}

fn variants(base: &RegistrationConfig, kss: &[f64], nu: &[f64], iters: &[usize]) -> Vec<Variant> {
    let mut out = Vec::new();
    for &v in kss {
        out.push(Variant {
            param: "k_ss",
            value: v.to_string(),
            config: RegistrationConfig {
                k_ss: v,
                ..base.clone()
            },
        });
    }
    for &v in nu {
        out.push(Variant {
            param: "poisson_ratio",
            value: v.to_string(),
            config: RegistrationConfig {
                poisson_ratio: v,
                ..base.clone()
            },
        });
    }
    for &v in iters {
        out.push(Variant {
            param: "iters",
            value: v.to_string(),
            config: RegistrationConfig {
                max_iters: v,
                ..base.clone()
            },
        });
    }
    out
}

fn pick<T: Clone>(flag: &[T], file: &[T]) -> Vec<T> {
    if flag.is_empty() {
        file.to_vec()
    } else {
        flag.to_vec()
    }
}

pub fn run(ctx: &Ctx, args: &SweepArgs) -> CmdResult {
    let file = &ctx.config.sweep;
    let out = args
        .out
        .clone()
        .or_else(|| ctx.config.out.clone())
        .ok_or_else(|| Failure::Usage("missing --out".into()))?;
    let mut case_dirs = args.case_dirs.clone();
    if let Some(root) = &args.cases {
        case_dirs.extend(dirs_with(root, CASE_TRUTH_FILE)?);
    }
    if case_dirs.is_empty() {
        return Err(Failure::Usage("need --cases or --case".into()));
    }
    let base = args.baseline.apply(ctx.config.registration.clone());
    let grid = variants(
        &base,
        &pick(&args.kss_grid, &file.k_ss),
        &pick(&args.nu_grid, &file.poisson_ratio),
        &pick(&args.iters_grid, &file.iters),
    );
    if grid.is_empty() {
        return Err(Failure::Usage(
            "empty sweep: give --kss-grid, --nu-grid or --iters-grid".into(),
        ));
    }
    for v in &grid {
        v.config.validate().map_err(at("configuration"))?;
    }
    let cases = case_dirs
        .iter()
        .map(|d| SyntheticCase::load(d).map(|c| (dir_name(d), c)))
        .collect::<Result<Vec<_>, _>>()
        .map_err(at("loading case"))?;

    let jobs: Vec<(&Variant, &(String, SyntheticCase))> =
        grid.iter().flat_map(|v| cases.iter().map(move |c| (v, c))).collect();
    let results: Vec<CmdResult<(EvalReport, f64, usize)>> = jobs
        .par_iter()
        .map(|(variant, (name, case))| {
            let res = register(&case.mesh, &case.cloud, &variant.config).map_err(at("registration"))?;
            let mut meta = ReportMeta {
                case_id: Some(name.clone()),
                visibility: Some(case.spec.visibility),
                noise_sigma: Some(case.noise_sigma),
                ..Default::default()
            };
            meta.extra.insert("param".into(), variant.param.into());
            meta.extra.insert("value".into(), variant.value.clone());
            let report = nodal_errors(&res.u_final, &case.true_u)
                .map_err(at("evaluating"))?
                .with_meta(meta);
            Ok((report, res.final_j, res.converged_iterations))
        })
        .collect();

    let mut table = String::from("param,value,case,mean_error,final_j,iterations\n");
    let mut reports = Vec::new();
    for ((variant, (name, _)), r) in jobs.iter().zip(results) {
        let (report, j, iters) = r?;
        let _ = writeln!(
            table,
            "{},{},{name},{:?},{:?},{iters}",
            variant.param, variant.value, report.summary.mean, j
        );
        reports.push(report);
    }
    let rows = summarize_runs(
        &reports,
        &[GroupBy::Extra("param".into()), GroupBy::Extra("value".into())],
    )
    .map_err(at("summarizing"))?;
    println!("param,value,runs,mean ± std (median)");
    for r in &rows {
        println!("{},{},{},{}", r.group[0], r.group[1], r.runs, r.table_entry());
    }
    create_dir(&out)?;
    write_text(&out.join(RUNS_FILE), &table)?;
    write_text(&out.join(SUMMARY_FILE), &summary_to_csv(&rows))
}
