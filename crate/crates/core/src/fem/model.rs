//! Text container for problems built from nodes and elements.
//!
//! ```text
//! tenvote-model 1
//! # comment
//! metric scalar 100000            | metric plane-strain <E> <nu> | metric matrix <m> <c11 c12 ...>
//! node <x> <y> [<z>]              ids are implicit, 0-based, in file order
//! bar <a> <b> <area>
//! quad4 <a> <b> <c> <d> <thickness>
//! load <node> <x|y|z> <value>
//! fix <node> <x|y|z> [<value>]
//! ```
//!
//! Bars make a 3D problem (3 dofs per node); quads a plane-strain one
//! (2 dofs per node). The two kinds cannot be mixed.

use std::fmt::Write as _;
use std::path::Path;

use nalgebra::{DMatrix, DVector};

use super::elements::{bar_operator, quad4_operator, quad4_position, GAUSS_2X2};
use super::{Element, Problem};
use crate::error::{Error, Result};
use crate::phase_space::MetricTensor;

const MAGIC: &str = "tenvote-model 1";

#[derive(Clone, Debug, PartialEq)]
pub enum MetricSpec {
    /// `ℂ = c₀ I`.
    Scalar(f64),
    PlaneStrain { young: f64, poisson: f64 },
    Matrix(DMatrix<f64>),
}

impl MetricSpec {
    pub fn build(&self, m_e: usize) -> Result<MetricTensor> {
        match self {
            MetricSpec::Scalar(c0) => MetricTensor::scalar(*c0, m_e),
            MetricSpec::PlaneStrain { young, poisson } => {
                if m_e != 3 {
                    return Err(Error::DimensionMismatch {
                        expected: 3,
                        actual: m_e,
                    });
                }
                MetricTensor::isotropic_plane_strain(*young, *poisson)
            }
            MetricSpec::Matrix(c) => {
                if c.nrows() != m_e {
                    return Err(Error::DimensionMismatch {
                        expected: m_e,
                        actual: c.nrows(),
                    });
                }
                MetricTensor::new(c.clone())
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum ModelElement {
    Bar { nodes: [usize; 2], area: f64 },
    Quad4 { nodes: [usize; 4], thickness: f64 },
}

#[derive(Clone, Debug, PartialEq)]
pub struct Model {
    /// Always three coordinates; `z = 0` for plane models.
    pub nodes: Vec<[f64; 3]>,
    pub elements: Vec<ModelElement>,
    /// `(node, component, value)`.
    pub loads: Vec<(usize, usize, f64)>,
    pub fixes: Vec<(usize, usize, f64)>,
    pub metric: MetricSpec,
}

impl Model {
    /// Dofs per node: 3 for bar models, 2 for quad models.
    pub fn node_dofs(&self) -> Result<usize> {
        let bars = self
            .elements
            .iter()
            .filter(|e| matches!(e, ModelElement::Bar { .. }))
            .count();
        match (bars, self.elements.len() - bars) {
            (0, 0) => Err(Error::InvalidArgument("model has no elements".into())),
            (_, 0) => Ok(3),
            (0, _) => Ok(2),
            _ => Err(Error::InvalidArgument("bars and quads cannot be mixed".into())),
        }
    }

    pub fn n_dofs(&self) -> Result<usize> {
        Ok(self.nodes.len() * self.node_dofs()?)
    }

    /// Bars become one material point each; quads four (2×2 Gauss points).
    pub fn to_problem(&self) -> Result<Problem> {
        let nd = self.node_dofs()?;
        let m_e = if nd == 3 { 1 } else { 3 };
        let metric = self.metric.build(m_e)?;
        let n_dofs = self.nodes.len() * nd;
        let node = |i: usize| {
            self.nodes.get(i).copied().ok_or(Error::IndexOutOfRange {
                index: i,
                len: self.nodes.len(),
            })
        };
        let dofs_of = |nodes: &[usize]| -> Vec<usize> {
            nodes
                .iter()
                .flat_map(|&n| (0..nd).map(move |k| n * nd + k))
                .collect()
        };
        let tag = |i: usize, e: Error| match e {
            Error::DegenerateElement { reason, .. } => Error::DegenerateElement { element: i, reason },
            other => other,
        };

        let mut elements = Vec::new();
        for (i, el) in self.elements.iter().enumerate() {
            match *el {
                ModelElement::Bar { nodes, area } => {
                    let (a, b) = (node(nodes[0])?, node(nodes[1])?);
                    let (op, w) = bar_operator(a, b, area).map_err(|e| tag(i, e))?;
                    elements.push(Element {
                        b: op,
                        weight: w,
                        dofs: dofs_of(&nodes),
                        metric: 0,
                        position: [
                            0.5 * (a[0] + b[0]),
                            0.5 * (a[1] + b[1]),
                            0.5 * (a[2] + b[2]),
                        ],
                    });
                }
                ModelElement::Quad4 { nodes, thickness } => {
                    if !(thickness > 0.0 && thickness.is_finite()) {
                        return Err(Error::DegenerateElement {
                            element: i,
                            reason: format!("non-positive thickness {thickness}"),
                        });
                    }
                    let mut xy = [[0.0; 2]; 4];
                    for (k, &n) in nodes.iter().enumerate() {
                        let p = node(n)?;
                        xy[k] = [p[0], p[1]];
                    }
                    for (xi, eta, gw) in GAUSS_2X2 {
                        let (op, w) =
                            quad4_operator(xy, xi, eta, gw, thickness).map_err(|e| tag(i, e))?;
                        let p = quad4_position(xy, xi, eta);
                        elements.push(Element {
                            b: op,
                            weight: w,
                            dofs: dofs_of(&nodes),
                            metric: 0,
                            position: [p[0], p[1], 0.0],
                        });
                    }
                }
            }
        }

        let dof = |n: usize, c: usize| -> Result<usize> {
            if n >= self.nodes.len() {
                return Err(Error::IndexOutOfRange {
                    index: n,
                    len: self.nodes.len(),
                });
            }
            if c >= nd {
                return Err(Error::InvalidArgument(format!(
                    "component {c} invalid for {nd} dofs per node"
                )));
            }
            Ok(n * nd + c)
        };
        let mut loads = DVector::zeros(n_dofs);
        for &(n, c, v) in &self.loads {
            loads[dof(n, c)?] += v;
        }
        let dirichlet = self
            .fixes
            .iter()
            .map(|&(n, c, v)| Ok((dof(n, c)?, v)))
            .collect::<Result<Vec<_>>>()?;
        let problem = Problem {
            elements,
            n_dofs,
            loads,
            dirichlet,
            metrics: vec![metric],
        };
        problem.validate()?;
        Ok(problem)
    }
}

fn component_name(c: usize) -> &'static str {
    ["x", "y", "z"][c]
}

fn parse_component(s: &str) -> Option<usize> {
    match s {
        "x" | "0" => Some(0),
        "y" | "1" => Some(1),
        "z" | "2" => Some(2),
        _ => None,
    }
}

/// Serializes with round-trip float precision.
pub fn write_model(model: &Model) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "{MAGIC}");
    match &model.metric {
        MetricSpec::Scalar(c0) => {
            let _ = writeln!(s, "metric scalar {c0:e}");
        }
        MetricSpec::PlaneStrain { young, poisson } => {
            let _ = writeln!(s, "metric plane-strain {young:e} {poisson:e}");
        }
        MetricSpec::Matrix(c) => {
            let _ = write!(s, "metric matrix {}", c.nrows());
            for i in 0..c.nrows() {
                for j in 0..c.ncols() {
                    let _ = write!(s, " {:e}", c[(i, j)]);
                }
            }
            s.push('\n');
        }
    }
    for p in &model.nodes {
        let _ = writeln!(s, "node {:e} {:e} {:e}", p[0], p[1], p[2]);
    }
    for el in &model.elements {
        match el {
            ModelElement::Bar { nodes, area } => {
                let _ = writeln!(s, "bar {} {} {area:e}", nodes[0], nodes[1]);
            }
            ModelElement::Quad4 { nodes, thickness } => {
                let _ = writeln!(
                    s,
                    "quad4 {} {} {} {} {thickness:e}",
                    nodes[0], nodes[1], nodes[2], nodes[3]
                );
            }
        }
    }
    for &(n, c, v) in &model.loads {
        let _ = writeln!(s, "load {n} {} {v:e}", component_name(c));
    }
    for &(n, c, v) in &model.fixes {
        let _ = writeln!(s, "fix {n} {} {v:e}", component_name(c));
    }
    s
}

/// Parses a model; `path` is only used in error messages.
pub fn parse_model(text: &str, path: &Path) -> Result<Model> {
    let bad = |line: usize, reason: String| Error::Malformed {
        path: path.to_path_buf(),
        line,
        reason,
    };
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.split('#').next().unwrap_or("").trim()))
        .filter(|(_, l)| !l.is_empty());
    match lines.next() {
        Some((_, l)) if l == MAGIC => {}
        Some((n, _)) => return Err(bad(n, format!("expected header `{MAGIC}`"))),
        None => return Err(bad(0, "empty file".into())),
    }

    let mut metric = None;
    let mut model = Model {
        nodes: Vec::new(),
        elements: Vec::new(),
        loads: Vec::new(),
        fixes: Vec::new(),
        metric: MetricSpec::Scalar(1.0),
    };
    for (ln, line) in lines {
        let tok: Vec<&str> = line.split_whitespace().collect();
        let float = |i: usize| -> Result<f64> {
            tok.get(i)
                .ok_or_else(|| bad(ln, format!("missing field {i}")))?
                .parse::<f64>()
                .map_err(|e| bad(ln, format!("field {i}: {e}")))
        };
        let int = |i: usize| -> Result<usize> {
            tok.get(i)
                .ok_or_else(|| bad(ln, format!("missing field {i}")))?
                .parse::<usize>()
                .map_err(|e| bad(ln, format!("field {i}: {e}")))
        };
        let arity = |lo: usize, hi: usize| -> Result<()> {
            if tok.len() < lo || tok.len() > hi {
                Err(bad(ln, format!("`{}` takes {} to {} fields", tok[0], lo - 1, hi - 1)))
            } else {
                Ok(())
            }
        };
        let component = |i: usize| -> Result<usize> {
            tok.get(i)
                .and_then(|s| parse_component(s))
                .ok_or_else(|| bad(ln, "expected component x, y or z".into()))
        };
        match tok[0] {
            "metric" => {
                let spec = match tok.get(1).copied() {
                    Some("scalar") => {
                        arity(3, 3)?;
                        MetricSpec::Scalar(float(2)?)
                    }
                    Some("plane-strain") => {
                        arity(4, 4)?;
                        MetricSpec::PlaneStrain {
                            young: float(2)?,
                            poisson: float(3)?,
                        }
                    }
                    Some("matrix") => {
                        let m = int(2)?;
                        arity(3 + m * m, 3 + m * m)?;
                        let vals = (0..m * m).map(|k| float(3 + k)).collect::<Result<Vec<_>>>()?;
                        MetricSpec::Matrix(DMatrix::from_row_slice(m, m, &vals))
                    }
                    _ => return Err(bad(ln, "unknown metric kind".into())),
                };
                if metric.replace(spec).is_some() {
                    return Err(bad(ln, "metric given twice".into()));
                }
            }
            "node" => {
                arity(3, 4)?;
                let z = if tok.len() == 4 { float(3)? } else { 0.0 };
                model.nodes.push([float(1)?, float(2)?, z]);
            }
            "bar" => {
                arity(4, 4)?;
                model.elements.push(ModelElement::Bar {
                    nodes: [int(1)?, int(2)?],
                    area: float(3)?,
                });
            }
            "quad4" => {
                arity(6, 6)?;
                model.elements.push(ModelElement::Quad4 {
                    nodes: [int(1)?, int(2)?, int(3)?, int(4)?],
                    thickness: float(5)?,
                });
            }
            "load" => {
                arity(4, 4)?;
                model.loads.push((int(1)?, component(2)?, float(3)?));
            }
            "fix" => {
                arity(3, 4)?;
                let v = if tok.len() == 4 { float(3)? } else { 0.0 };
                model.fixes.push((int(1)?, component(2)?, v));
            }
            other => return Err(bad(ln, format!("unknown record `{other}`"))),
        }
    }
    model.metric = metric.ok_or_else(|| Error::Inconsistent {
        path: path.to_path_buf(),
        reason: "no metric record".into(),
    })?;
    let n = model.nodes.len();
    let out_of_range = model.elements.iter().any(|e| match e {
        ModelElement::Bar { nodes, .. } => nodes.iter().any(|&i| i >= n),
        ModelElement::Quad4 { nodes, .. } => nodes.iter().any(|&i| i >= n),
    }) || model.loads.iter().chain(&model.fixes).any(|&(i, _, _)| i >= n);
    if out_of_range {
        return Err(Error::Inconsistent {
            path: path.to_path_buf(),
            reason: format!("node index out of range ({n} nodes)"),
        });
    }
    Ok(model)
}

pub fn read_model(path: impl AsRef<Path>) -> Result<Model> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_model(&text, path)
}
