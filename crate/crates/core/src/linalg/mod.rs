//! Self-contained linear algebra used by the eigensolvers.

pub mod dense;
pub mod hessenberg;
pub mod skyline;

pub use dense::{dense_solve_complex, ComplexLu, ComplexMatrix};
pub use hessenberg::{dense_eigen, hessenberg_eigen, hessenberg_eigenvalues, reduce_to_hessenberg, HessenbergEig};
pub use skyline::SpdFactor;
