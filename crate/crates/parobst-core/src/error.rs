use thiserror::Error;

/// Errors produced by grid construction, solvers and diagnostics.
#[derive(Debug, Error)]
pub enum Error {
    #[error("spacing must be positive: {name} = {value}")]
    NonPositiveSpacing { name: &'static str, value: f64 },

    #[error("grid needs at least 9 spatial nodes per axis, got {nodes}")]
    TooFewNodes { nodes: usize },

    #[error("grid needs at least 5 time levels, got {levels}")]
    TooFewLevels { levels: usize },

    #[error("time depth must be an integer multiple of the time step (T/k = {ratio})")]
    DepthNotMultipleOfStep { ratio: f64 },

    #[error("unsupported spatial dimension {0}, only 1 and 2 are available")]
    BadDimension(usize),

    #[error("cylinder does not fit the grid: {reason}")]
    CylinderOutsideGrid { reason: String },

    #[error("cylinder center ({x}, {y}, {t}) is not a grid node")]
    CenterOffGrid { x: f64, y: f64, t: f64 },

    #[error("empty node mask (radius {radius})")]
    EmptyMask { radius: f64 },

    #[error("missing stencil neighbor at node (x = {x}, y = {y}, t = {t}): {which}")]
    MissingStencil { x: f64, y: f64, t: f64, which: &'static str },

    #[error("boundary data incomplete or non-finite at node index {node}")]
    BadBoundaryData { node: usize },

    #[error("non-finite field value at node index {node}")]
    NonFiniteValue { node: usize },

    #[error("time must be negative, got {0}")]
    NonNegativeTime(f64),

    #[error("radius must be positive, got {0}")]
    NonPositiveRadius(f64),

    #[error("radius {0} is not dyadic-compatible with the grid")]
    NonDyadicRadius(f64),

    #[error("field has zero norm where a nonzero one is required")]
    TrivialField,

    #[error("field is expected caloric but max |Hw| = {residual} exceeds {tol}")]
    NotCaloric { residual: f64, tol: f64 },

    #[error("quadrature tail bound violated: {detail}")]
    QuadratureTail { detail: String },

    #[error("source field must be constant for this diagnostic, it varies by {0}")]
    NonConstantSource(f64),

    #[error("telescope depth {depth} too deep for this grid (max {max})")]
    TelescopeTooDeep { depth: usize, max: usize },

    #[error("diagnostic curve too short: need at least {need} radii, got {got}")]
    CurveTooShort { need: usize, got: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

pub type Result<T, E = Error> = core::result::Result<T, E>;
