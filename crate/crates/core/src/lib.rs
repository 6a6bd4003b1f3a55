//! Numerical toolkit for mollification, weak derivatives and Sobolev norms
//! on box domains in one to three dimensions.
//!
//! Functions live on tensor grids ([`Grid`], [`GridFunction`]) and are
//! smoothed by convolution with a rescaled bump ([`Mollifier`]). Weak
//! derivatives are checked by pairing against compactly supported test
//! functions, and Sobolev norms are assembled from derivative families.
//!
//! ```
//! use sobolevkit::{convergence_study, BoxDomain, Grid, GridFunction, MollifierProfile};
//!
//! let grid = Grid::uniform(BoxDomain::unit(1)?, 400)?;
//! let f = GridFunction::from_fn(&grid, |x| (2.0 * std::f64::consts::PI * x[0]).sin());
//! let table = convergence_study(&f, &MollifierProfile::bump(1)?, 2.0, &[0.2, 0.1, 0.05])?;
//! assert!(table.strictly_decreasing());
//! # Ok::<(), sobolevkit::Error>(())
//! ```

mod bump;
pub mod convolution;
pub mod csv;
pub mod dynamics;
mod error;
pub mod expr;
pub mod grid;
pub mod mollifier;
pub mod sobolev;
pub mod suite;
pub mod weakdiff;

pub use convolution::{
    compose, convergence_study, mollify, mollify_zero_extended, orbit, ConvergenceRow, ConvergenceTable,
    KernelReport, OrbitEntry, OrbitNet,
};
pub use dynamics::{
    distributional_shadow, distributional_shadow_with_order, exponential_flow, invertibility_check, mollify_sections, newton_net, section_pairing,
    FlowCheck, InvertibilityReport, NewtonTrace, ShadowReport, VectorGridFunction,
};
pub use error::{Error, Result};
pub use expr::{Ast, EvalError, Expr, ParseError};
pub use grid::{ae_equal, interior_region, lp_norm, quadrature, BoxDomain, Grid, GridFunction, Region};
pub use mollifier::{standard_bump, verify_unit, Mollifier, MollifierProfile, UnitReport};
pub use sobolev::{
    boundary_vanish_check, membership_report, sobolev_norm, sobolev_norm_on, BoundaryTable, DerivativeFamily,
    MembershipReport, MembershipRow,
};
pub use weakdiff::{
    commutation_residual, mollified_derivative, pair, verify_weak_derivative, MultiIndex, PairingResidual,
    TestFunction,
};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../README.md")]
    mod readme {}
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/grids.md")]
    mod grids {}
    #[doc = include_str!("../../../book/src/mollifiers.md")]
    mod mollifiers {}
    #[doc = include_str!("../../../book/src/convolution.md")]
    mod convolution {}
    #[doc = include_str!("../../../book/src/weak-derivatives.md")]
    mod weak_derivatives {}
    #[doc = include_str!("../../../book/src/sobolev.md")]
    mod sobolev {}
    #[doc = include_str!("../../../book/src/dynamics.md")]
    mod dynamics {}
    #[doc = include_str!("../../../book/src/expressions.md")]
    mod expressions {}
}
