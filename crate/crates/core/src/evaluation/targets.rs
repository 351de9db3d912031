use std::path::Path;

use crate::error::{Error, Result};
use crate::geometry::{DisplacementField, Vec3};

/// Paired target positions before (`pre`) and after (`post`) deformation.
#[derive(Debug, Clone, PartialEq)]
pub struct TargetSet {
    pre: Vec<Vec3>,
    post: Vec<Vec3>,
    labels: Vec<String>,
}

pub const FIDUCIAL_HEADER: &str = "label,x_pre,y_pre,z_pre,x_post,y_post,z_post";

impl TargetSet {
    pub fn new(pre: Vec<Vec3>, post: Vec<Vec3>, labels: Vec<String>) -> Result<Self> {
        if pre.len() != post.len() {
            return Err(Error::DimensionMismatch {
                expected: pre.len(),
                actual: post.len(),
            });
        }
        if labels.len() != pre.len() {
            return Err(Error::DimensionMismatch {
                expected: pre.len(),
                actual: labels.len(),
            });
        }
        if pre.iter().chain(&post).any(|p| !p.iter().all(|c| c.is_finite())) {
            return Err(Error::InvalidArgument("target coordinates must be finite".into()));
        }
        Ok(Self { pre, post, labels })
    }

    /// Labels `0, 1, …`.
    pub fn unlabeled(pre: Vec<Vec3>, post: Vec<Vec3>) -> Result<Self> {
        let labels = (0..pre.len()).map(|i| i.to_string()).collect();
        Self::new(pre, post, labels)
    }

    /// Every mesh node as a target, displaced by `u`.
    pub fn from_nodes(nodes: &[Vec3], u: &DisplacementField) -> Result<Self> {
        if u.num_nodes() != nodes.len() {
            return Err(Error::DimensionMismatch {
                expected: nodes.len(),
                actual: u.num_nodes(),
            });
        }
        let post = nodes.iter().zip(u.iter_nodes()).map(|(x, d)| x + d).collect();
        Self::unlabeled(nodes.to_vec(), post)
    }

    pub fn pre(&self) -> &[Vec3] {
        &self.pre
    }

    pub fn post(&self) -> &[Vec3] {
        &self.post
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.pre.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pre.is_empty()
    }

    pub fn to_csv(&self) -> String {
        let mut out = format!("{FIDUCIAL_HEADER}\n");
        for ((l, a), b) in self.labels.iter().zip(&self.pre).zip(&self.post) {
            out.push_str(&format!(
                "{l},{:?},{:?},{:?},{:?},{:?},{:?}\n",
                a.x, a.y, a.z, b.x, b.y, b.z
            ));
        }
        out
    }
}

/// Parses fiducial pairs with header `label,x_pre,y_pre,z_pre,x_post,y_post,z_post`.
pub fn parse_fiducials_csv(text: &str) -> Result<TargetSet> {
    let ctx = "fiducial csv";
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (_, header) = lines.next().ok_or_else(|| Error::parse(ctx, "missing header"))?;
    let cols: Vec<&str> = header.split(',').map(str::trim).collect();
    let want: Vec<&str> = FIDUCIAL_HEADER.split(',').collect();
    if cols != want {
        return Err(Error::parse(
            ctx,
            format!("expected header `{FIDUCIAL_HEADER}`, got `{header}`"),
        ));
    }
    let (mut pre, mut post, mut labels) = (Vec::new(), Vec::new(), Vec::new());
    for (lineno, line) in lines {
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != 7 {
            return Err(Error::parse(
                ctx,
                format!("line {}: expected 7 fields, got {}", lineno + 1, fields.len()),
            ));
        }
        let mut v = [0.0; 6];
        for (k, f) in fields[1..].iter().enumerate() {
            v[k] = f
                .parse()
                .map_err(|_| Error::parse(ctx, format!("line {}: bad number `{f}`", lineno + 1)))?;
        }
        labels.push(fields[0].to_string());
        pre.push(Vec3::new(v[0], v[1], v[2]));
        post.push(Vec3::new(v[3], v[4], v[5]));
    }
    TargetSet::new(pre, post, labels)
}

pub fn load_fiducials_csv(path: impl AsRef<Path>) -> Result<TargetSet> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_fiducials_csv(&text)
}
