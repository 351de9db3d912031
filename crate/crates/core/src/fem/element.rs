use nalgebra::{Matrix3, SMatrix};

use super::ElasticMaterial;
use crate::error::{Error, Result};
use crate::geometry::{bbox_diagonal, signed_tet_volume, Vec3};

pub type ElementMatrix = SMatrix<f64, 12, 12>;
type StrainDisplacement = SMatrix<f64, 6, 12>;
type Constitutive = SMatrix<f64, 6, 6>;

const DEGENERATE_ELEMENT_RTOL: f64 = 1e-12;

/// Gradients of the four linear shape functions; constant over the element.
pub(crate) fn shape_gradients(x: &[Vec3; 4]) -> Option<[Vec3; 4]> {
    let jac = Matrix3::from_columns(&[x[1] - x[0], x[2] - x[0], x[3] - x[0]]);
    let inv = jac.try_inverse()?;
    let g1 = inv.row(0).transpose();
    let g2 = inv.row(1).transpose();
    let g3 = inv.row(2).transpose();
    Some([-(g1 + g2 + g3), g1, g2, g3])
}

fn constitutive(material: &ElasticMaterial) -> Constitutive {
    let lambda = material.lame_lambda();
    let mu = material.lame_mu();
    let mut d = Constitutive::zeros();
    for i in 0..3 {
        for j in 0..3 {
            d[(i, j)] = lambda;
        }
        d[(i, i)] += 2.0 * mu;
        d[(i + 3, i + 3)] = mu;
    }
    d
}

/// Voigt strain ordering: xx, yy, zz, yz, xz, xy (engineering shear).
fn strain_displacement(grads: &[Vec3; 4]) -> StrainDisplacement {
    let mut b = StrainDisplacement::zeros();
    for (a, g) in grads.iter().enumerate() {
        let c = 3 * a;
        b[(0, c)] = g.x;
        b[(1, c + 1)] = g.y;
        b[(2, c + 2)] = g.z;
        b[(3, c + 1)] = g.z;
        b[(3, c + 2)] = g.y;
        b[(4, c)] = g.z;
        b[(4, c + 2)] = g.x;
        b[(5, c)] = g.y;
        b[(5, c + 1)] = g.x;
    }
    b
}

/// Constant-strain tetrahedron stiffness `V·BᵀDB`, DOFs ordered
/// `[x0, y0, z0, x1, ...]`.
///
/// The result is exactly symmetric: the upper triangle is computed and
/// mirrored. Fails when the volume is below `1e-12 × d³`, `d` being the
/// element's bounding-box diagonal.
pub fn element_stiffness(x: &[Vec3; 4], material: &ElasticMaterial) -> Result<ElementMatrix> {
    let volume = signed_tet_volume(&x[0], &x[1], &x[2], &x[3]);
    let threshold = DEGENERATE_ELEMENT_RTOL * bbox_diagonal(x.iter()).powi(3);
    if !(volume > threshold) {
        return Err(Error::DegenerateElement {
            index: 0,
            volume,
            threshold,
        });
    }
    let grads = shape_gradients(x).ok_or(Error::DegenerateElement {
        index: 0,
        volume,
        threshold,
    })?;
    let b = strain_displacement(&grads);
    let db = constitutive(material) * b;
    let mut k = ElementMatrix::zeros();
    for i in 0..12 {
        for j in i..12 {
            let v = volume * b.column(i).dot(&db.column(j));
            k[(i, j)] = v;
            k[(j, i)] = v;
        }
    }
    Ok(k)
}
