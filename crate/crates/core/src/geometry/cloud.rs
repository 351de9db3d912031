use super::Vec3;
use crate::error::{Error, Result};

/// Intraoperative surface observation: an unordered set of points (mm).
#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud {
    points: Vec<Vec3>,
    labels: Option<Vec<String>>,
}

impl PointCloud {
    pub fn new(points: Vec<Vec3>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::EmptyCloud);
        }
        if let Some(i) = points.iter().position(|p| !p.iter().all(|c| c.is_finite())) {
            return Err(Error::parse("point cloud", format!("point {i} is not finite")));
        }
        Ok(Self { points, labels: None })
    }

    pub fn with_labels(points: Vec<Vec3>, labels: Vec<String>) -> Result<Self> {
        if labels.len() != points.len() {
            return Err(Error::DimensionMismatch {
                expected: points.len(),
                actual: labels.len(),
            });
        }
        let mut cloud = Self::new(points)?;
        cloud.labels = Some(labels);
        Ok(cloud)
    }

    pub fn points(&self) -> &[Vec3] {
        &self.points
    }

    pub fn labels(&self) -> Option<&[String]> {
        self.labels.as_deref()
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn centroid(&self) -> Vec3 {
        self.points.iter().sum::<Vec3>() / self.points.len() as f64
    }

    /// Flat `3m` coordinate vector `[x0, y0, z0, x1, ...]`.
    pub fn to_flat(&self) -> Vec<f64> {
        self.points.iter().flat_map(|p| [p.x, p.y, p.z]).collect()
    }

    pub(crate) fn map_points(&self, f: impl Fn(&Vec3) -> Vec3) -> Self {
        Self {
            points: self.points.iter().map(f).collect(),
            labels: self.labels.clone(),
        }
    }
}
