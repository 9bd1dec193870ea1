//! Finite-element computation of Helmholtz transmission eigenvalues.
//!
//! The quadratic eigenproblem is linearized into a block pencil `K x = lambda M x`
//! with `K` symmetric positive definite. Bogner–Fox–Schmit bicubic elements give
//! an `H^2_0`-conforming discretization on structured rectangular meshes. Eigenpairs
//! come from an Arnoldi iteration on `K^{-1} M`, either directly on a fine mesh or
//! through a two-grid correction that solves the eigenproblem only on a coarse mesh.
//!
//! All kernels are generic over [`Real`]; the `*F64` aliases below are what the
//! command-line tools use.

pub mod arnoldi;
pub mod assembly;
pub mod element;
pub mod error;
pub mod linalg;
pub mod mesh;
pub mod scalar;
pub mod sparse;
pub mod two_grid;

pub use arnoldi::{ArnoldiOptions, DualPair, EigenPair, SpectrumResult};
pub use assembly::{BlockPencil, DofMap, FeMatrices, RefractionIndex};
pub use element::ShapeTable;
pub use error::{Error, Result};
pub use mesh::{DomainSpec, Mesh, NestingMap};
pub use scalar::Real;
pub use sparse::SparseMatrix;
pub use two_grid::{CoarsePair, TwoGridResult, TwoGridSolver};

pub type MeshF64 = Mesh<f64>;
pub type NestingMapF64 = NestingMap<f64>;
pub type ShapeTableF64 = ShapeTable<f64>;
pub type RefractionF64 = RefractionIndex<f64>;
pub type FeMatricesF64 = FeMatrices<f64>;
pub type PencilF64 = BlockPencil<f64>;
pub type SparseMatrixF64 = SparseMatrix<f64>;
pub type SpdFactorF64 = linalg::SpdFactor<f64>;
pub type EigenPairF64 = EigenPair<f64>;
pub type DualPairF64 = DualPair<f64>;
pub type SpectrumF64 = SpectrumResult<f64>;
pub type TwoGridResultF64 = TwoGridResult<f64>;

pub type MeshF32 = Mesh<f32>;
pub type PencilF32 = BlockPencil<f32>;
pub type SpectrumF32 = SpectrumResult<f32>;
