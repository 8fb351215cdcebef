use nalgebra::{DMatrix, Matrix2};

use crate::error::{Error, Result};

/// 2×2 Gauss rule on `[-1, 1]²`: `(ξ, η, weight)`.
pub const GAUSS_2X2: [(f64, f64, f64); 4] = {
    const G: f64 = 0.577_350_269_189_625_8; // 1/√3
    [(-G, -G, 1.0), (G, -G, 1.0), (G, G, 1.0), (-G, G, 1.0)]
};

/// Axial strain operator of a 2-node bar in 3D.
///
/// Returns `B = [-n, n] / L` (1×6, dofs `[u_a; u_b]`) and `w = area · L`.
pub fn bar_operator(a: [f64; 3], b: [f64; 3], area: f64) -> Result<(DMatrix<f64>, f64)> {
    let d = [b[0] - a[0], b[1] - a[1], b[2] - a[2]];
    let len = (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt();
    if !(len > 0.0 && len.is_finite()) {
        return Err(Error::DegenerateElement {
            element: usize::MAX,
            reason: "zero-length bar".into(),
        });
    }
    if !(area > 0.0 && area.is_finite()) {
        return Err(Error::DegenerateElement {
            element: usize::MAX,
            reason: format!("non-positive bar area {area}"),
        });
    }
    let mut op = DMatrix::zeros(1, 6);
    for k in 0..3 {
        let c = d[k] / (len * len);
        op[(0, k)] = -c;
        op[(0, 3 + k)] = c;
    }
    Ok((op, area * len))
}

/// Plane-strain operator of a bilinear quad at parametric point `(ξ, η)`.
///
/// Nodes are counter-clockwise; dofs are `[u₁ v₁ u₂ v₂ …]`; strains in
/// Voigt form `(ε₁₁, ε₂₂, 2ε₁₂)`. Returns `B` (3×8) and
/// `w = det J · gauss_weight · thickness`.
pub fn quad4_operator(
    nodes: [[f64; 2]; 4],
    xi: f64,
    eta: f64,
    gauss_weight: f64,
    thickness: f64,
) -> Result<(DMatrix<f64>, f64)> {
    const SIGNS: [(f64, f64); 4] = [(-1.0, -1.0), (1.0, -1.0), (1.0, 1.0), (-1.0, 1.0)];
    let mut dn = [[0.0; 2]; 4];
    for (a, (sx, sy)) in SIGNS.iter().enumerate() {
        dn[a] = [0.25 * sx * (1.0 + sy * eta), 0.25 * sy * (1.0 + sx * xi)];
    }
    let mut jac = Matrix2::<f64>::zeros();
    for a in 0..4 {
        for i in 0..2 {
            for j in 0..2 {
                jac[(i, j)] += dn[a][i] * nodes[a][j];
            }
        }
    }
    let det = jac.determinant();
    if !(det > 0.0) {
        return Err(Error::DegenerateElement {
            element: usize::MAX,
            reason: format!("non-positive Jacobian determinant {det:e}"),
        });
    }
    let inv = jac.try_inverse().expect("positive determinant");
    let mut op = DMatrix::zeros(3, 8);
    for a in 0..4 {
        let dx = inv[(0, 0)] * dn[a][0] + inv[(0, 1)] * dn[a][1];
        let dy = inv[(1, 0)] * dn[a][0] + inv[(1, 1)] * dn[a][1];
        op[(0, 2 * a)] = dx;
        op[(1, 2 * a + 1)] = dy;
        op[(2, 2 * a)] = dy;
        op[(2, 2 * a + 1)] = dx;
    }
    Ok((op, det * gauss_weight * thickness))
}

/// Physical position of parametric point `(ξ, η)`.
pub(crate) fn quad4_position(nodes: [[f64; 2]; 4], xi: f64, eta: f64) -> [f64; 2] {
    let shape = [
        0.25 * (1.0 - xi) * (1.0 - eta),
        0.25 * (1.0 + xi) * (1.0 - eta),
        0.25 * (1.0 + xi) * (1.0 + eta),
        0.25 * (1.0 - xi) * (1.0 + eta),
    ];
    let mut p = [0.0; 2];
    for a in 0..4 {
        p[0] += shape[a] * nodes[a][0];
        p[1] += shape[a] * nodes[a][1];
    }
    p
}
