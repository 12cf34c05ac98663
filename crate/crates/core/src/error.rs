use thiserror::Error;

use crate::invariants::IntegerEstimate;

pub type Result<T> = std::result::Result<T, Error>;

/// Error type shared by the whole crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("input is not on the unit sphere: |norm^2 - 1| = {deviation:.3e}")]
    NotUnit { deviation: f64 },

    #[error("matrix is not a rotation: {reason}")]
    NotRotation { reason: String },

    #[error("unsupported exponent m = {0}: only m >= 1 is defined")]
    UnsupportedExponent(i64),

    #[error("point is within {distance:.3e} of the projection pole")]
    PoleTooClose { distance: f64 },

    #[error("finite-difference step {0:.3e} outside [1e-7, 1e-3]")]
    StepOutOfRange(f64),

    #[error("map evaluation produced a non-finite value near ({w:.4}, {x:.4}, {y:.4}, {z:.4})")]
    NonFiniteEvaluation { w: f64, x: f64, y: f64, z: f64 },

    #[error("corrector diverged after {iterations} iterations, residual {residual:.3e}")]
    CorrectorDiverged { iterations: usize, residual: f64 },

    #[error("curve failed to close after {steps} steps (gap to start {gap:.3e})")]
    NonClosure { steps: usize, gap: f64 },

    #[error("traced loop has only {vertices} vertices; reduce the step size")]
    LoopTooShort { vertices: usize },

    #[error("invalid trace configuration: {reason}")]
    BadTraceConfig { reason: String },

    #[error("no preimage of the requested value found within the seed budget")]
    NoPreimage,

    #[error("value is not regular for map `{map}`: worst margin {margin:.3e}")]
    NotRegularValue { map: String, margin: f64 },

    #[error(
        "loops too close for reliable linking: min distance {min_distance:.3e} <= {required:.3e}; refine the curves"
    )]
    LoopsTooClose { min_distance: f64, required: f64 },

    #[error("linking sum inconclusive: residual {residual:.3e} from nearest integer")]
    LinkingInconclusive { residual: f64 },

    #[error("too few samples: {got} (minimum {minimum})")]
    TooFewSamples { got: u64, minimum: u64 },

    #[error(
        "estimate inconclusive (raw {raw:.4}, residual {residual:.3}, stderr {std_error:.3}); more samples needed",
        raw = estimate.raw,
        residual = estimate.residual,
        std_error = estimate.std_error
    )]
    Inconclusive { estimate: IntegerEstimate },

    #[error("chart point outside the chart domain: {reason}")]
    OutsideChart { reason: String },

    #[error(
        "frame convention degenerates on x^2 + v^(2d) = 0; witness |det| = {witness_det:.3e} at x = {x_re:.4}+{x_im:.4}i, v = {v_re:.4}+{v_im:.4}i"
    )]
    DegenerateFrameConvention {
        witness_det: f64,
        x_re: f64,
        x_im: f64,
        v_re: f64,
        v_im: f64,
    },

    #[error("immersion rank drop: sigma_6 = {sigma:.3e} at sampled chart point")]
    RankDrop { sigma: f64 },

    #[error("unsupported parameter d = {0}: expected 1 <= d <= 6")]
    UnsupportedLinkDegree(i64),
}
