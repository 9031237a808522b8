//! Planar analytic domains and Fermi normal-coordinate data.

mod curve;
mod domain;
mod fermi;
pub mod polyline;
pub mod vec2;

pub use curve::{ParamCurve, TrigSeries};
pub use domain::{Domain, DomainSpec};
pub use fermi::{
    build_fermi_chart, curve_frame, estimate_r_max, fermi_point, focal_bound, offset_jacobian, ChartSample,
    FermiChart, FramePoint,
};
pub use vec2::Vec2;
