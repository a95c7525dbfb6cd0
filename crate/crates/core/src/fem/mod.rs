//! P1 finite elements on [0,1]^d for the canonical and lifted operators.

pub mod assembly;
pub mod coefficient;
pub mod force;
pub mod matrices;
pub mod mesh;

pub use assembly::{
    assemble_canonical, assemble_reiterated, assemble_two_scale, lifted_dof, AssemblyOptions, LiftedSystem,
};
pub use coefficient::MultiscaleCoefficient;
pub use force::{assemble_force, evaluate_p1, interpolate, l2_h1_error};
pub use matrices::{lifted_unit_stiffness, mass_1d, mass_1d_extended, mass_d, stiffness_1d, stiffness_d};
pub use mesh::TensorMesh;

/// Which unknown a nodal vector represents.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Level {
    Canonical,
    /// u₀ for 0, corrector uₖ for k ≥ 1.
    Homogenized(usize),
}

/// Nodal coefficients of a finite element function.
#[derive(Clone, Debug, PartialEq)]
pub struct FemSolution<T> {
    pub mesh: TensorMesh,
    pub level: Level,
    pub coefficients: Vec<T>,
}

impl<T> FemSolution<T> {
    /// Expected coefficient count for a level on a mesh.
    pub fn expected_len(mesh: &TensorMesh, level: Level) -> usize {
        let nd = mesh.n().pow(mesh.d() as u32);
        match level {
            Level::Canonical | Level::Homogenized(0) => nd,
            Level::Homogenized(k) => (mesh.n() + 2).pow((k * mesh.d()) as u32) * nd,
        }
    }

    pub fn new(mesh: TensorMesh, level: Level, coefficients: Vec<T>) -> crate::Result<Self> {
        let want = Self::expected_len(&mesh, level);
        if coefficients.len() != want {
            return Err(crate::Error::DimensionMismatch { what: "FEM coefficient vector", left: coefficients.len(), right: want });
        }
        Ok(FemSolution { mesh, level, coefficients })
    }
}
