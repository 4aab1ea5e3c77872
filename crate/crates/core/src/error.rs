use thiserror::Error;

/// Errors produced anywhere in the reconstruction pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("Newton iteration did not converge after {iters} steps (residual {residual:.3e})")]
    NoConvergence { iters: usize, residual: f64 },
    #[error("singular Jacobian in tangency system: {context}")]
    SingularJacobian { context: String },
    #[error("Bolker condition violated: |det M| = {det:.3e}")]
    BolkerViolated { det: f64 },
    #[error("nondegeneracy violated: {context} (|det| = {det:.3e})")]
    NondegeneracyViolated { context: String, det: f64 },
    #[error("finite-difference step too large: Richardson error estimate {estimate:.3e}")]
    StepTooLarge { estimate: f64 },
    #[error("Newton left the configured chart neighborhood")]
    OutOfChart,
    #[error("coordinate split invalid: |det of (t, y-hat) block| = {det:.3e}")]
    SplitInvalid { det: f64 },
    #[error("special function pole: order a = {a} is a nonpositive integer")]
    PoleOrder { a: f64 },
    #[error("kappa = {kappa} < 0: filter order too low for the data singularity")]
    NegativeKappa { kappa: f64 },
    #[error("stationary point is degenerate: |det (Psi o Phi)_tt| = {det:.3e}")]
    DegenerateStationaryPoint { det: f64 },
    #[error("sample window too small: {context}")]
    WindowTooSmall { context: String },
    #[error("interpolation point outside the padded sample window")]
    OutOfWindow,
    #[error("quadrature failed to reach tolerance {tol:.3e} (best error {err:.3e})")]
    QuadratureFailure { tol: f64, err: f64 },
    #[error("fine grid too coarse: oversampling factor {rho} below minimum {min}")]
    GridTooCoarse { rho: f64, min: f64 },
    #[error("backprojection window exceeds the configured chart")]
    ChartExceeded,
    #[error("grid violates the Nyquist safeguard for the requested symbol")]
    NyquistViolated,
    #[error("kappa = {kappa} is not supported (supported: 0, (0,1), and 1)")]
    UnsupportedKappa { kappa: f64 },
    #[error("kappa = 0 prediction requires a continuous interior value")]
    MissingInteriorValue,
    #[error("auxiliary-function tail above tolerance at the A-cutoff: {tail:.3e}")]
    SlowDecay { tail: f64 },
    #[error("interior-value extrapolation did not converge: estimate {estimate:.3e} of jump scale")]
    NonConvergentExtrapolation { estimate: f64 },
    #[error("degenerate fit: {context}")]
    DegenerateFit { context: String },
    #[error("evaluation at the singular point h = 0 of the continuous profile")]
    EvalAtSingularity,
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("i/o failure: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }
}
