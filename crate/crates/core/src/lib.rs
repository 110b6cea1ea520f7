//! Grid laboratory for Lipschitz truncation of second-order Sobolev
//! functions, variational p-capacity, Hausdorff-measure estimates and the
//! change-of-variables formula with multiplicity.

pub mod grid;
pub mod io;
pub mod capacity;
pub mod corpus;
pub mod covmap;
pub mod oracle;
pub mod sobolev;
pub mod truncation;
pub mod scenario;
mod stencil;

pub use grid::{
    ball_average, lebesgue_measure, mask_closure, mask_interior, precise_representative,
    DyadicLadder, ExtensionMode, GridDomain, GridError, MaskFlavor, RegionMask, ScalarField,
    VectorField,
};
