use crate::error::{Error, Result};
use crate::geometry::Vec3;

const DEGENERATE_RTOL: f64 = 1e-12;

/// Closest point on a closed triangle together with its barycentric weights.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClosestPoint {
    pub point: Vec3,
    /// Weights of `(a, b, c)`: non-negative, summing to one.
    pub bary: [f64; 3],
    pub distance: f64,
}

/// Closest point of triangle `abc` to `p`.
///
/// Region tests follow the Voronoi-region classification (vertices, then
/// edges, then the face), so vertex and edge hits come back with exact zeros
/// in the barycentric weights.
pub fn closest_point_on_triangle(p: &Vec3, a: &Vec3, b: &Vec3, c: &Vec3) -> Result<ClosestPoint> {
    let twice_area = (b - a).cross(&(c - a)).norm();
    let longest = (b - a)
        .norm_squared()
        .max((c - a).norm_squared())
        .max((c - b).norm_squared());
    if !(twice_area > DEGENERATE_RTOL * longest) {
        return Err(Error::DegenerateTriangle { area: 0.5 * twice_area });
    }
    Ok(closest_point_unchecked(p, a, b, c))
}

fn finish(p: &Vec3, a: &Vec3, b: &Vec3, c: &Vec3, bary: [f64; 3]) -> ClosestPoint {
    let point = a * bary[0] + b * bary[1] + c * bary[2];
    ClosestPoint {
        point,
        bary,
        distance: (p - point).norm(),
    }
}

/// Segment `ab` closest point as a weight pair.
fn segment_weights(p: &Vec3, a: &Vec3, b: &Vec3) -> (f64, f64) {
    let ab = b - a;
    let len2 = ab.norm_squared();
    if len2 == 0.0 {
        return (1.0, 0.0);
    }
    let t = ((p - a).dot(&ab) / len2).clamp(0.0, 1.0);
    (1.0 - t, t)
}

/// As [`closest_point_on_triangle`] without the degeneracy check; collapsed
/// triangles fall back to the nearest of their three edges.
pub(crate) fn closest_point_unchecked(p: &Vec3, a: &Vec3, b: &Vec3, c: &Vec3) -> ClosestPoint {
    let ab = b - a;
    let ac = c - a;
    if ab.cross(&ac).norm_squared() == 0.0 {
        return degenerate_fallback(p, a, b, c);
    }

    let ap = p - a;
    let d1 = ab.dot(&ap);
    let d2 = ac.dot(&ap);
    if d1 <= 0.0 && d2 <= 0.0 {
        return finish(p, a, b, c, [1.0, 0.0, 0.0]);
    }

    let bp = p - b;
    let d3 = ab.dot(&bp);
    let d4 = ac.dot(&bp);
    if d3 >= 0.0 && d4 <= d3 {
        return finish(p, a, b, c, [0.0, 1.0, 0.0]);
    }

    let vc = d1 * d4 - d3 * d2;
    if vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0 {
        let v = d1 / (d1 - d3);
        return finish(p, a, b, c, [1.0 - v, v, 0.0]);
    }

    let cp = p - c;
    let d5 = ab.dot(&cp);
    let d6 = ac.dot(&cp);
    if d6 >= 0.0 && d5 <= d6 {
        return finish(p, a, b, c, [0.0, 0.0, 1.0]);
    }

    let vb = d5 * d2 - d1 * d6;
    if vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0 {
        let w = d2 / (d2 - d6);
        return finish(p, a, b, c, [1.0 - w, 0.0, w]);
    }

    let va = d3 * d6 - d5 * d4;
    if va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0 {
        let w = (d4 - d3) / ((d4 - d3) + (d5 - d6));
        return finish(p, a, b, c, [0.0, 1.0 - w, w]);
    }

    let denom = 1.0 / (va + vb + vc);
    finish(p, a, b, c, [va * denom, vb * denom, vc * denom])
}

fn degenerate_fallback(p: &Vec3, a: &Vec3, b: &Vec3, c: &Vec3) -> ClosestPoint {
    let (s, t) = segment_weights(p, a, b);
    let mut best = finish(p, a, b, c, [s, t, 0.0]);
    let (s, t) = segment_weights(p, b, c);
    let cand = finish(p, a, b, c, [0.0, s, t]);
    if cand.distance < best.distance {
        best = cand;
    }
    let (s, t) = segment_weights(p, a, c);
    let cand = finish(p, a, b, c, [s, 0.0, t]);
    if cand.distance < best.distance {
        best = cand;
    }
    best
}
