//! Error type shared by every analysis module.

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("rational frequency detected at depth {depth} (remainder {remainder:e})")]
    RationalDetected { depth: usize, remainder: f64 },
    #[error("integer overflow while building convergent {depth}")]
    Overflow { depth: usize },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("numerically singular cocycle sample at theta = {theta}")]
    SingularSample { theta: String },
    #[error("cocycle is not homotopic to the identity (winding {winding})")]
    NotHomotopicToIdentity { winding: i64 },
    #[error("sampler is not real on the real axis (max imaginary part {max_imag:e})")]
    NonRealSampler { max_imag: f64 },
    #[error("strip exceeded: |eps| = {eps} >= strip radius {radius}")]
    StripExceeded { eps: f64, radius: f64 },
    #[error("projective angle step {step} exceeds half a turn")]
    AngleStepTooLarge { step: f64 },

    #[error("fitted slope {slope} (units of 2pi) is {distance} away from an integer")]
    SnapFailure { slope: f64, distance: f64 },
    #[error("profile grid ends too close to the first turning point {breakpoint}")]
    GridTooShort { breakpoint: f64 },
    #[error("IDS is constant over all scales around E0 = {e0}")]
    DegenerateWindow { e0: f64 },

    #[error("leading Fourier coefficient too small: |v_d| = {modulus:e}")]
    DegenerateLeadingCoefficient { modulus: f64 },
    #[error("symplectic pairing violated: |L_i + L_(2d+1-i)| = {deviation:e} > {tolerance:e}")]
    PairingViolation { deviation: f64, tolerance: f64 },

    #[error("center splitting degenerate at theta = {theta}: principal angles {angles:?}")]
    SplittingDegenerate { theta: f64, angles: Vec<f64> },
    #[error("square-root branch jumps by {jump} turns at theta = {theta}")]
    BranchDiscontinuity { theta: f64, jump: f64 },
    #[error("center is symplectically degenerate at theta = {theta}: |c| = {modulus:e}")]
    CenterDegenerate { theta: f64, modulus: f64 },
    #[error("energy {energy} is outside the type I window: {reason}")]
    WindowViolation { energy: f64, reason: String },
    #[error("frame alignment failed for truncation {n}: {reason}")]
    FrameAlignmentFailure { n: usize, reason: String },
    #[error("small divisor {divisor:e} at Fourier mode {mode}")]
    SmallDivisorOverflow { mode: i64, divisor: f64 },
    #[error("conjugation stalled at residual {residual:e} after {steps} steps")]
    ConjugationStalled { residual: f64, steps: usize },
    #[error("rotation number {rho} rejected by the Diophantine window at k = {k}")]
    WindowRejected { rho: f64, k: i64 },
}

pub type Result<T> = std::result::Result<T, Error>;
