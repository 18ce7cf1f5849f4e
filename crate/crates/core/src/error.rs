use thiserror::Error;

/// Errors shared by the game model and the solvers.
#[derive(Debug, Error)]
pub enum GameError {
    #[error("dimension mismatch for player {player}: expected {expected}, got {got}")]
    DimensionMismatch {
        player: usize,
        expected: usize,
        got: usize,
    },

    #[error("player {player} has no gradient oracle")]
    GradientUnavailable { player: usize },

    #[error("feasible section of player {player} is empty (bundle outside the constraint-map domain)")]
    OutsideDomain { player: usize },

    #[error("variational equilibria require a shared constraint set")]
    SharedSetRequired,

    #[error("objective of player {player} is not convex in its own block (negative curvature {curvature})")]
    NotConvex { player: usize, curvature: f64 },

    #[error("negative curvature {curvature} encountered; quadratic term is not positive semidefinite")]
    NotPsd { curvature: f64 },

    #[error("projection did not converge within {max_iter} iterations (residual {residual})")]
    ProjectionStalled {
        max_iter: usize,
        residual: f64,
        last_iterate: Vec<f64>,
    },

    #[error("invalid weight vector: component {index} is {value}, weights must be strictly positive")]
    InvalidWeight { index: usize, value: f64 },

    #[error("weight vectors must differ in exactly one coordinate, found {differing} differing")]
    WeightCoordinateMismatch { differing: usize },

    #[error("zero bias direction: the two equilibria agree in block {player}")]
    ZeroBiasDirection { player: usize },

    #[error("no point of the set-valued graph found after {attempts} membership probes; graph appears empty")]
    GraphAppearsEmpty { attempts: usize },

    #[error("point {value} outside the map's domain [0, 1]")]
    OutsideUnitInterval { value: f64 },

    #[error("{0}")]
    InvalidSpec(String),
}

pub type Result<T> = std::result::Result<T, GameError>;
