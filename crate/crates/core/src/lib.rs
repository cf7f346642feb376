//! Numerical toolkit for the geometric pressure and hyperbolic dimension of
//! polynomial Julia sets, with the machinery needed to study polynomials
//! whose disconnected Julia set has analytic-arc components.

pub mod chebyshev_lift;
pub mod components;
pub mod cubic_family;
pub mod dd;
pub mod error;
pub mod escape;
pub mod grid;
pub mod lowerbound;
pub mod polynomial;
pub mod pressure;
pub mod sampling;

pub use components::{ComponentAtlas, ComponentChain, ComponentMask, LevelGrid, PolyLikeRestriction, VBranch};
pub use error::{Error, Result};
pub use escape::{DynSetup, OrbitClass};
pub use grid::{ComplexBox, PixelGrid};
pub use polynomial::{ComplexPoint, Polynomial, Precision, Root};
