//! The two benchmark families: a lattice truss tower with a softening bar
//! law and a quarter plate with a hole under a nonlinear anisotropic law.

mod laws;
mod plate;
mod truss;

pub use laws::{plate_reference_law, truss_reference_law, PlateLaw, TanhLaw};
pub use plate::{build_plate, peak_stress_point, plate_model, PlateSpec};
pub use truss::{build_truss, lattice_tower, lattice_tower_counts, truss_model, TrussGenerator, TrussSpec};
