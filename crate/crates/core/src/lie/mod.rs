//! Left-invariant unit vector fields on three families of Lie groups.

pub mod classify;
pub mod expected;
pub mod model;

pub use classify::{classify, ClassifyOptions, Component, ComponentKind, CriticalSet, SetKind};
pub use expected::{
    compare_expected, compare_set, cross_residual, expected_set, min_residual_on, CompareReport, ExpectedComponent,
    ExpectedSet, Scope,
};
pub use model::{
    critical_expression, critical_system_residual, critical_system_residual_with_multiplier,
    curvature_terms, model_laplacian, LaplacianData, LeftInvariantModel, ModelKind, Problem,
};
