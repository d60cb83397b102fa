//! Finite-time stable/unstable manifolds, admissible charts of n-rectangles,
//! the `(H)`, `(F)`, `(G)` predicates and saturation into (n+1)-rectangles.
//!
//! Everything is computed in lifted plane coordinates. Charts store their
//! nodes as offsets from an origin so that tiny rectangles keep full relative
//! precision.

mod chart;
mod checks;
mod saturate;
mod trace;

pub use chart::{
    build_chart, build_chart_with, AdmissibleChart, ChartGrid, ChartOptions, ChartRecord, DEFAULT_GRID, DEFAULT_K_TOL,
};
pub use checks::{
    check_predicates, check_regularity, f_report, field_oscillation, g_report, h_report, predicates_from,
    tangent_alignment, FReport, Factor, GReport, HReport, HkRecord, NodeDynamics, PredicateReport, RegularityReport,
};
pub use saturate::{saturate, SaturateOptions, Saturation, SaturationReport};
pub use trace::{intersect, trace_leaf, trace_manifold, CurveRecord, LeafKind, ManifoldCurve, STEPS_PER_HALFLENGTH};
