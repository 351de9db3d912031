use nalgebra::Matrix3;

use crate::error::{Error, Result};
use crate::geometry::{KdTree, PointCloud, RigidTransform, Vec3};

/// Relative tolerance on the second singular value of the centered source
/// spread; below it the points are treated as collinear.
const COLLINEAR_RTOL: f64 = 1e-10;

fn centroid(points: &[Vec3]) -> Vec3 {
    points.iter().sum::<Vec3>() / points.len() as f64
}

/// Least-squares rigid transform mapping `source[i]` onto `target[i]`.
///
/// The rotation comes from the SVD of the cross-covariance with the sign of
/// the last singular direction corrected, so it is always proper.
pub fn procrustes(source: &[Vec3], target: &[Vec3]) -> Result<RigidTransform> {
    if source.len() != target.len() {
        return Err(Error::DimensionMismatch {
            expected: source.len(),
            actual: target.len(),
        });
    }
    if source.len() < 3 {
        return Err(Error::DegenerateConfiguration(format!(
            "procrustes needs at least 3 pairs, got {}",
            source.len()
        )));
    }
    let cs = centroid(source);
    let ct = centroid(target);
    let mut h = Matrix3::zeros();
    let mut spread = Matrix3::zeros();
    for (s, t) in source.iter().zip(target) {
        let ds = s - cs;
        h += ds * (t - ct).transpose();
        spread += ds * ds.transpose();
    }
    let sv = spread.symmetric_eigenvalues();
    let mut sv: Vec<f64> = sv.iter().copied().collect();
    sv.sort_by(|a, b| b.total_cmp(a));
    if !(sv[1] > COLLINEAR_RTOL * sv[0]) {
        return Err(Error::DegenerateConfiguration("source points are collinear".into()));
    }
    let svd = h.svd(true, true);
    let u = svd.u.expect("requested U");
    let v_t = svd.v_t.expect("requested Vᵀ");
    let v = v_t.transpose();
    let d = (v * u.transpose()).determinant().signum();
    let correction = Matrix3::from_diagonal(&Vec3::new(1.0, 1.0, d));
    let r = v * correction * u.transpose();
    let t = ct - r * cs;
    RigidTransform::new(r, t)
}

/// Outcome of [`rigid_icp`].
#[derive(Debug, Clone, PartialEq)]
pub struct IcpResult {
    /// Maps the source cloud onto the target.
    pub transform: RigidTransform,
    /// Root-mean-square closest-point distance after applying `transform`.
    pub rms: f64,
    pub iterations: usize,
}

/// Point-to-point ICP from `source` onto `target`, starting at the identity.
///
/// Alternates nearest-neighbour matching and [`procrustes`] until the RMS
/// changes by less than `tol`, and returns the lowest-RMS transform seen.
pub fn rigid_icp(source: &PointCloud, target: &PointCloud, max_iters: usize, tol: f64) -> Result<IcpResult> {
    if source.len() < 3 || target.len() < 3 {
        return Err(Error::DegenerateConfiguration(
            "ICP needs at least 3 points per cloud".into(),
        ));
    }
    let tree = KdTree::new(target.points());
    let src = source.points();
    let rms_at = |t: &RigidTransform| -> (f64, Vec<Vec3>) {
        let mut sum = 0.0;
        let matched = src
            .iter()
            .map(|p| {
                let (i, d) = tree.nearest(&t.apply(p)).expect("non-empty target");
                sum += d * d;
                target.points()[i]
            })
            .collect();
        ((sum / src.len() as f64).sqrt(), matched)
    };

    let mut current = RigidTransform::identity();
    let (mut rms, mut matched) = rms_at(&current);
    let mut best = IcpResult {
        transform: current.clone(),
        rms,
        iterations: 0,
    };
    for it in 1..=max_iters {
        current = procrustes(src, &matched)?;
        let (next_rms, next_matched) = rms_at(&current);
        if next_rms < best.rms {
            best = IcpResult {
                transform: current.clone(),
                rms: next_rms,
                iterations: it,
            };
        }
        let change = (rms - next_rms).abs();
        rms = next_rms;
        matched = next_matched;
        if change < tol {
            best.iterations = it;
            break;
        }
    }
    Ok(best)
}
