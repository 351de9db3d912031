use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::interpolate::TargetMap;
use super::targets::TargetSet;
use crate::error::{Error, Result};
use crate::geometry::DisplacementField;

/// Mean, population standard deviation, median, min and max of a sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorSummary {
    pub count: usize,
    pub mean: f64,
    pub std: f64,
    pub median: f64,
    pub min: f64,
    pub max: f64,
}

impl ErrorSummary {
    pub fn from_values(values: &[f64]) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::EmptyTargets);
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        let mut sorted = values.to_vec();
        sorted.sort_by(f64::total_cmp);
        let mid = sorted.len() / 2;
        let median = if sorted.len() % 2 == 1 {
            sorted[mid]
        } else {
            0.5 * (sorted[mid - 1] + sorted[mid])
        };
        Ok(Self {
            count: values.len(),
            mean,
            std: var.sqrt(),
            median,
            min: sorted[0],
            max: sorted[sorted.len() - 1],
        })
    }

    /// `mean ± std (max)` with two decimals.
    pub fn table_entry(&self) -> String {
        format!("{:.2} ± {:.2} ({:.2})", self.mean, self.std, self.max)
    }
}

/// Descriptive fields carried with a report for grouping.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ReportMeta {
    pub case_id: Option<String>,
    pub method: Option<String>,
    pub visibility: Option<f64>,
    pub noise_sigma: Option<f64>,
    #[serde(default)]
    pub extra: BTreeMap<String, String>,
}

/// Per-target errors in mm with their summary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub labels: Vec<String>,
    pub errors: Vec<f64>,
    pub summary: ErrorSummary,
    pub meta: ReportMeta,
}

/// `error_i = ‖Y_i − W(X_i)‖`.
pub fn compute_errors<W: TargetMap + ?Sized>(targets: &TargetSet, warp: &W) -> Result<EvalReport> {
    if targets.is_empty() {
        return Err(Error::EmptyTargets);
    }
    let errors: Vec<f64> = targets
        .pre()
        .iter()
        .zip(targets.post())
        .map(|(x, y)| (y - warp.map_point(x)).norm())
        .collect();
    EvalReport::from_errors(targets.labels().to_vec(), errors)
}

/// Per-node Euclidean difference of two displacement fields.
pub fn nodal_errors(estimated: &DisplacementField, truth: &DisplacementField) -> Result<EvalReport> {
    if estimated.num_nodes() != truth.num_nodes() {
        return Err(Error::DimensionMismatch {
            expected: truth.num_nodes(),
            actual: estimated.num_nodes(),
        });
    }
    let errors = estimated
        .iter_nodes()
        .zip(truth.iter_nodes())
        .map(|(a, b)| (a - b).norm())
        .collect();
    EvalReport::from_errors((0..truth.num_nodes()).map(|i| i.to_string()).collect(), errors)
}

impl EvalReport {
    pub fn from_errors(labels: Vec<String>, errors: Vec<f64>) -> Result<Self> {
        if labels.len() != errors.len() {
            return Err(Error::DimensionMismatch {
                expected: errors.len(),
                actual: labels.len(),
            });
        }
        let summary = ErrorSummary::from_values(&errors)?;
        Ok(Self {
            labels,
            errors,
            summary,
            meta: ReportMeta::default(),
        })
    }

    pub fn with_meta(mut self, meta: ReportMeta) -> Self {
        self.meta = meta;
        self
    }

    pub fn table_entry(&self) -> String {
        self.summary.table_entry()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report is serializable")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::parse("report json", e.to_string()))
    }

    /// Header plus one summary row.
    pub fn to_csv(&self) -> String {
        let m = &self.meta;
        let s = &self.summary;
        format!(
            "case_id,method,visibility,noise_sigma,count,mean,std,median,min,max\n{},{},{},{},{},{:?},{:?},{:?},{:?},{:?}\n",
            m.case_id.as_deref().unwrap_or(""),
            m.method.as_deref().unwrap_or(""),
            m.visibility.map(|v| format!("{v:?}")).unwrap_or_default(),
            m.noise_sigma.map(|v| format!("{v:?}")).unwrap_or_default(),
            s.count,
            s.mean,
            s.std,
            s.median,
            s.min,
            s.max
        )
    }

    pub fn save(&self, dir: impl AsRef<Path>, stem: &str) -> Result<()> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        for (ext, body) in [("json", self.to_json()), ("csv", self.to_csv())] {
            let path = dir.join(format!("{stem}.{ext}"));
            std::fs::write(&path, body).map_err(|e| Error::io(&path, e))?;
        }
        Ok(())
    }
}

/// How reports are grouped by [`summarize_runs`].
#[derive(Debug, Clone, PartialEq)]
pub enum GroupBy {
    None,
    Method,
    CaseId,
    NoiseSigma,
    Visibility,
    /// Half-open visibility bins `[edges[i], edges[i+1])`; anything outside
    /// goes to an `other` group.
    VisibilityBins(Vec<f64>),
    /// A key of [`ReportMeta::extra`].
    Extra(String),
}

impl GroupBy {
    /// Visibility bins 20–28 %, 28–36 % and 36–44 %.
    pub fn standard_visibility_bins() -> Self {
        GroupBy::VisibilityBins(vec![0.20, 0.28, 0.36, 0.44])
    }

    fn key(&self, meta: &ReportMeta) -> String {
        let opt = |v: Option<f64>| v.map(|x| format!("{x}")).unwrap_or_else(|| "-".into());
        match self {
            GroupBy::None => "all".into(),
            GroupBy::Method => meta.method.clone().unwrap_or_else(|| "-".into()),
            GroupBy::CaseId => meta.case_id.clone().unwrap_or_else(|| "-".into()),
            GroupBy::NoiseSigma => opt(meta.noise_sigma),
            GroupBy::Visibility => opt(meta.visibility),
            GroupBy::VisibilityBins(edges) => meta
                .visibility
                .and_then(|v| {
                    edges
                        .windows(2)
                        .find(|w| w[0] <= v && v < w[1])
                        .map(|w| format!("{}-{}%", (w[0] * 100.0).round(), (w[1] * 100.0).round()))
                })
                .unwrap_or_else(|| "other".into()),
            GroupBy::Extra(k) => meta.extra.get(k).cloned().unwrap_or_else(|| "-".into()),
        }
    }
}

/// Statistics of per-report mean errors within one group.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub group: Vec<String>,
    pub runs: usize,
    pub mean_of_means: f64,
    pub std_of_means: f64,
    pub median_of_means: f64,
    pub max_of_means: f64,
}

impl SummaryRow {
    /// `mean ± std (median)` with two decimals.
    pub fn table_entry(&self) -> String {
        format!(
            "{:.2} ± {:.2} ({:.2})",
            self.mean_of_means, self.std_of_means, self.median_of_means
        )
    }
}

/// Aggregates report means per group. Groups keep first-appearance order.
pub fn summarize_runs(reports: &[EvalReport], group_by: &[GroupBy]) -> Result<Vec<SummaryRow>> {
    if reports.is_empty() {
        return Err(Error::EmptyTargets);
    }
    let mut order: Vec<Vec<String>> = Vec::new();
    let mut groups: BTreeMap<Vec<String>, Vec<f64>> = BTreeMap::new();
    for r in reports {
        let key: Vec<String> = group_by.iter().map(|g| g.key(&r.meta)).collect();
        if !groups.contains_key(&key) {
            order.push(key.clone());
        }
        groups.entry(key).or_default().push(r.summary.mean);
    }
    order
        .into_iter()
        .map(|key| {
            let s = ErrorSummary::from_values(&groups[&key])?;
            Ok(SummaryRow {
                group: key,
                runs: s.count,
                mean_of_means: s.mean,
                std_of_means: s.std,
                median_of_means: s.median,
                max_of_means: s.max,
            })
        })
        .collect()
}

/// `group,runs,mean_of_means,std_of_means,median_of_means,max_of_means`; multi-key groups are joined with `|`.
pub fn summary_to_csv(rows: &[SummaryRow]) -> String {
    let mut out = String::from("group,runs,mean_of_means,std_of_means,median_of_means,max_of_means\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{:?},{:?},{:?},{:?}",
            r.group.join("|"),
            r.runs,
            r.mean_of_means,
            r.std_of_means,
            r.median_of_means,
            r.max_of_means
        );
    }
    out
}
