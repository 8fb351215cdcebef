use std::f64::consts::FRAC_PI_2;

use crate::error::{Error, Result};
use crate::fem::{MetricSpec, Model, ModelElement, Problem};

/// Quarter of a plate with a central circular hole, loaded in `y` on the top
/// edge. The quarter occupies `[0, width] × [0, height]` minus the disk of
/// radius `hole_radius` around the origin. Units mm and MPa.
#[derive(Clone, Debug, PartialEq)]
pub struct PlateSpec {
    pub width: f64,
    pub height: f64,
    pub hole_radius: f64,
    /// Tensile traction on the top edge.
    pub traction: f64,
    /// Elements per edge. The mesh has `2 density²` quads.
    pub density: usize,
    /// Ratio of the outermost to the innermost radial element size.
    pub grading: f64,
    pub thickness: f64,
    pub young: f64,
    pub poisson: f64,
}

impl Default for PlateSpec {
    fn default() -> Self {
        Self {
            width: 100.0,
            height: 100.0,
            hole_radius: 25.0,
            traction: 200.0,
            density: 7,
            grading: 3.0,
            thickness: 1.0,
            young: 100_000.0,
            poisson: 0.3,
        }
    }
}

impl PlateSpec {
    pub fn validate(&self) -> Result<()> {
        let positive = [self.width, self.height, self.hole_radius, self.thickness, self.young, self.grading];
        if positive.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(Error::InvalidArgument("plate dimensions, thickness, modulus and grading must be positive".into()));
        }
        if self.hole_radius >= 0.5 * self.width.min(self.height) {
            return Err(Error::InvalidArgument(format!(
                "hole radius {} must be below half the smaller plate side",
                self.hole_radius
            )));
        }
        if !(self.poisson > -1.0 && self.poisson < 0.5) {
            return Err(Error::InvalidArgument(format!("Poisson ratio {} out of range", self.poisson)));
        }
        if !self.traction.is_finite() {
            return Err(Error::InvalidArgument("traction must be finite".into()));
        }
        if self.density == 0 || self.density > 400 {
            return Err(Error::InvalidArgument(format!("mesh density {} outside 1..=400", self.density)));
        }
        Ok(())
    }

    /// Radial coordinates `0 = t₀ < … < t_n = 1` with geometric growth.
    fn radial_stations(&self) -> Vec<f64> {
        let n = self.density;
        let q = if n > 1 { self.grading.powf(1.0 / (n - 1) as f64) } else { 1.0 };
        let mut t = vec![0.0];
        let mut h = 1.0;
        for _ in 0..n {
            let last = *t.last().unwrap();
            t.push(last + h);
            h *= q;
        }
        let total = t[n];
        t.iter().map(|v| v / total).collect()
    }
}

/// Structured mesh. Node `(i, j)`: `i ∈ 0..=2n` runs counter-clockwise from
/// the `x` axis to the `y` axis, `j ∈ 0..=n` from the hole outward. The
/// diagonal `atan2(H, W)` splits the hole arc between the right and top
/// edges.
pub fn plate_model(spec: &PlateSpec) -> Result<Model> {
    spec.validate()?;
    let n = spec.density;
    let (w, h, r) = (spec.width, spec.height, spec.hole_radius);
    let corner = h.atan2(w);
    let t = spec.radial_stations();
    let id = |i: usize, j: usize| i * (n + 1) + j;

    let mut nodes = Vec::with_capacity((2 * n + 1) * (n + 1));
    for i in 0..=2 * n {
        let (theta, outer) = if i <= n {
            let s = i as f64 / n as f64;
            (corner * s, [w, h * s])
        } else {
            let s = (i - n) as f64 / n as f64;
            (corner + (FRAC_PI_2 - corner) * s, [w * (1.0 - s), h])
        };
        let inner = [r * theta.cos(), r * theta.sin()];
        for &tj in &t {
            nodes.push([
                inner[0] + tj * (outer[0] - inner[0]),
                inner[1] + tj * (outer[1] - inner[1]),
                0.0,
            ]);
        }
    }
    // snap the symmetry lines exactly
    for j in 0..=n {
        nodes[id(0, j)][1] = 0.0;
        nodes[id(2 * n, j)][0] = 0.0;
    }

    let mut elements = Vec::with_capacity(2 * n * n);
    for i in 0..2 * n {
        for j in 0..n {
            elements.push(ModelElement::Quad4 {
                nodes: [id(i, j), id(i, j + 1), id(i + 1, j + 1), id(i + 1, j)],
                thickness: spec.thickness,
            });
        }
    }

    let mut fixes = Vec::new();
    for j in 0..=n {
        fixes.push((id(0, j), 1, 0.0));
        fixes.push((id(2 * n, j), 0, 0.0));
    }

    // consistent loads of a constant traction on linear edges: half of each
    // segment's resultant to either end
    let mut top = vec![0.0; 2 * n + 1];
    for i in n..2 * n {
        let a = nodes[id(i, n)];
        let b = nodes[id(i + 1, n)];
        let half = 0.5 * spec.traction * spec.thickness * (b[0] - a[0]).abs();
        top[i] += half;
        top[i + 1] += half;
    }
    let loads = (n..=2 * n).map(|i| (id(i, n), 1, top[i])).collect();

    Ok(Model {
        nodes,
        elements,
        loads,
        fixes,
        metric: MetricSpec::PlaneStrain {
            young: spec.young,
            poisson: spec.poisson,
        },
    })
}

pub fn build_plate(spec: &PlateSpec) -> Result<Problem> {
    plate_model(spec)?.to_problem()
}

/// Index of the material point with the largest `σ_yy` component among
/// `stresses`, if any.
pub fn peak_stress_point(stresses: &[nalgebra::DVector<f64>], component: usize) -> Option<usize> {
    stresses
        .iter()
        .enumerate()
        .filter(|(_, s)| s.len() > component)
        .max_by(|a, b| a.1[component].total_cmp(&b.1[component]))
        .map(|(i, _)| i)
}
