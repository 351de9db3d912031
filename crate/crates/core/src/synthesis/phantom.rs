use crate::error::{Error, Result};
use crate::geometry::{Vec3, VolumeMesh};

/// Cell counts of [`liver_phantom`]; gives 4290 nodes and 21000 tets.
pub const LIVER_PHANTOM_CELLS: [usize; 3] = [25, 14, 10];

/// Semi-axes of the liver phantom in mm (about 200 × 150 × 90 mm overall).
pub const LIVER_PHANTOM_SEMI_AXES: [f64; 3] = [100.0, 75.0, 45.0];

// The six tets of a unit cube around its main diagonal. Every cube uses the
// same split, so shared faces are cut identically and the mesh is conforming.
const KUHN: [[usize; 4]; 6] = [
    [0, 1, 3, 7],
    [0, 1, 5, 7],
    [0, 2, 3, 7],
    [0, 2, 6, 7],
    [0, 4, 5, 7],
    [0, 4, 6, 7],
];

/// Structured grid of `cells` hexahedra spanning `[0, size]`, each split into
/// six tetrahedra.
pub fn box_mesh(cells: [usize; 3], size: Vec3) -> Result<VolumeMesh> {
    grid_mesh(cells, |s| Vec3::new(s.x * size.x, s.y * size.y, s.z * size.z))
}

/// Structured tet grid over the unit cube with node positions given by
/// `map` applied to the unit-cube coordinates.
pub fn grid_mesh(cells: [usize; 3], map: impl Fn(Vec3) -> Vec3) -> Result<VolumeMesh> {
    let [nx, ny, nz] = cells;
    if nx == 0 || ny == 0 || nz == 0 {
        return Err(Error::InvalidArgument(format!(
            "grid needs at least one cell per axis, got {cells:?}"
        )));
    }
    let id = |i: usize, j: usize, k: usize| i + (nx + 1) * (j + (ny + 1) * k);
    let mut nodes = Vec::with_capacity((nx + 1) * (ny + 1) * (nz + 1));
    for k in 0..=nz {
        for j in 0..=ny {
            for i in 0..=nx {
                let s = Vec3::new(i as f64 / nx as f64, j as f64 / ny as f64, k as f64 / nz as f64);
                nodes.push(map(s));
            }
        }
    }
    let mut tets = Vec::with_capacity(6 * nx * ny * nz);
    for k in 0..nz {
        for j in 0..ny {
            for i in 0..nx {
                // Corner c has offsets (c & 1, c >> 1 & 1, c >> 2 & 1).
                let corner = |c: usize| id(i + (c & 1), j + ((c >> 1) & 1), k + ((c >> 2) & 1));
                for t in KUHN {
                    tets.push(t.map(corner));
                }
            }
        }
    }
    VolumeMesh::new(nodes, tets)
}

/// Maps the cube `[-1, 1]³` onto the unit ball, smoothly and bijectively.
fn cube_to_ball(p: Vec3) -> Vec3 {
    let (x2, y2, z2) = (p.x * p.x, p.y * p.y, p.z * p.z);
    Vec3::new(
        p.x * (1.0 - y2 / 2.0 - z2 / 2.0 + y2 * z2 / 3.0).sqrt(),
        p.y * (1.0 - z2 / 2.0 - x2 / 2.0 + z2 * x2 / 3.0).sqrt(),
        p.z * (1.0 - x2 / 2.0 - y2 / 2.0 + x2 * y2 / 3.0).sqrt(),
    )
}

/// Liver-like phantom: a rounded, tapered slab whose right lobe (negative x)
/// is thick and whose left lobe thins out, centred at the origin.
///
/// Anterior is `+z` and posterior is `-z`.
pub fn liver_phantom(cells: [usize; 3]) -> Result<VolumeMesh> {
    let [a, b, c] = LIVER_PHANTOM_SEMI_AXES;
    grid_mesh(cells, |s| {
        let q = s * 2.0 - Vec3::repeat(1.0);
        // Blend toward the ball so corners stay well shaped.
        let r = q * 0.3 + cube_to_ball(q) * 0.7;
        let lobe = (r.x + 1.0) / 2.0;
        let thickness = 1.0 - 0.45 * lobe;
        let width = 1.0 - 0.25 * lobe;
        // Slight dome on the anterior face, flatter posterior face.
        let z = if r.z > 0.0 { r.z } else { 0.8 * r.z };
        Vec3::new(
            a * r.x,
            b * width * r.y,
            c * thickness * z + 8.0 * (1.0 - r.x * r.x) * (1.0 - r.y * r.y),
        )
    })
}
