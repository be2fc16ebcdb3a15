//! Vertical and conical square functions on a discretized upper half-space,
//! tent-space norms, Muckenhoupt weights, and the heat/Poisson semigroup
//! fields of divergence-form elliptic operators, together with the explicit
//! field families separating the two kinds of square function.
//!
//! The spatial domain is a periodic torus `[-l/2, l/2)^n` (n = 1 or 2); the
//! time axis is a geometric lattice with midpoint `dt/t` quadrature. Test
//! data is kept effectively supported in a central sub-box and an interior
//! time range, so truncation and wrap-around sit below quadrature tolerance.

pub mod corpus;
pub mod counterexample;
pub mod elliptic;
pub mod error;
pub mod field;
pub mod fit;
pub mod grid;
pub mod io;
pub mod maximal;
pub mod squarefn;
pub mod weights;

pub use error::{CoreError, Result};
pub use field::{
    cone_integral, cone_integral_parabolic, sample_field, sample_field_real, HalfSpaceField,
    SpatialFunction,
};
pub use grid::{make_grid, unit_ball_volume, Grid};
pub use maximal::maximal_function;
pub use squarefn::{
    apply_squarefn, averaging_identity_residual, compare_norms, explicit_comparison_constant,
    lp_norm, lp_norm_pth_power, tent_tinfty_norm, CompareRecord, SquareFunctionSpec, SquareKind,
};
pub use weights::{
    ap_characteristic, rh_characteristic, weighted_compare, Weight, WeightedCompareRecord,
};
