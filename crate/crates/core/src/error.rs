use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GeometryError {
    #[error("an array needs at least two microphones, got {0}")]
    TooFewMicrophones(usize),
    #[error("expected {expected} weights, got {got}")]
    WeightCount { expected: usize, got: usize },
    #[error("microphone {0} has a non-finite position")]
    NonFinitePosition(usize),
    #[error("non-finite reference point")]
    NonFiniteCenter,
    #[error("microphones {0} and {1} coincide")]
    CoincidentMicrophones(usize, usize),
    #[error("weight {0} is negative or not finite")]
    InvalidWeight(usize),
    #[error("at least two microphones need a positive weight")]
    TooFewActiveMicrophones,
    #[error("ring counts and radii must be non-empty and of equal length")]
    RingSpec,
    #[error("every ring needs at least one microphone")]
    EmptyRing,
    #[error("ring radii must be positive and strictly increasing")]
    RingRadii,
    #[error("grid spacing must be positive")]
    GridSpacing,
    #[error("grid needs at least one row and one column")]
    GridCounts,
    #[error("grid width and height must be positive")]
    GridDimensions,
    #[error("grid axes must be orthonormal")]
    GridAxes,
    #[error("point lies outside the scan grid")]
    OutsideGrid,
    #[error("sound speed and reference pressure must be positive")]
    Medium,
    #[error("source position is not finite")]
    SourcePosition,
    #[error("source frequency must be positive")]
    SourceFrequency,
    #[error("source amplitude must be non-negative")]
    SourceAmplitude,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SpectraError {
    #[error("frequency must be positive and finite, got {0}")]
    Frequency(f64),
    #[error("grid point {point} is within 1e-9 m of microphone {mic}")]
    GridOnMicrophone { point: usize, mic: usize },
    #[error("grid point {0} coincides with the array center")]
    GridOnCenter(usize),
    #[error("source {source_index} coincides with microphone {mic}")]
    SourceOnMicrophone { source_index: usize, mic: usize },
    #[error("shear-layer delay model returned a non-finite value")]
    NonFiniteDelay,
    #[error("expected {expected} weights, got {got}")]
    WeightCount { expected: usize, got: usize },
    #[error("weight {0} is negative or not finite")]
    InvalidWeight(usize),
    #[error("diagonal already removed")]
    DiagonalAlreadyRemoved,
    #[error("matrix dimensions differ: {0} vs {1}")]
    Dimension(usize, usize),
    #[error("frequency mismatch: {0} Hz vs {1} Hz")]
    FrequencyMismatch(f64, f64),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BeamformError {
    #[error("frequency mismatch: CSM at {csm} Hz, steering at {steering} Hz")]
    FrequencyMismatch { csm: f64, steering: f64 },
    #[error("CSM has {csm} microphones, steering vectors have {steering}")]
    Dimension { csm: usize, steering: usize },
    #[error("beamform output at grid point {0} has a non-negligible imaginary part")]
    NotReal(usize),
    #[error("weighting leaves a zero denominator")]
    ZeroDenominator,
    #[error("region is empty")]
    EmptyRegion,
    #[error("index {index} outside a map of {len} points")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("map has no strictly positive maximum")]
    FlatMap,
    #[error("map length {map} does not match grid size {grid}")]
    Length { map: usize, grid: usize },
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DamasError {
    #[error("steering component ({mic}, {point}) is zero and cannot be inverted")]
    ZeroSteering { mic: usize, point: usize },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("propagator diagonal at {index} is {value}, expected 1")]
    Diagonal { index: usize, value: f64 },
    #[error("non-finite value at grid point {index} during iteration {iteration}")]
    NotFinite { iteration: usize, index: usize },
    #[error("max_iterations must be at least 1")]
    MaxIterations,
    #[error("tolerance must be finite and non-negative")]
    Tolerance,
    #[error("problem size {0} exceeds the oracle cap of {1}")]
    TooLarge(usize, usize),
    #[error("weighting leaves a zero denominator")]
    ZeroDenominator,
    #[error(transparent)]
    Beamform(#[from] BeamformError),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ScenarioError {
    #[error("text is empty")]
    EmptyText,
    #[error("character {0:?} has no glyph")]
    UnknownGlyph(char),
    #[error("text needs {needed_cols}x{needed_rows} cells, grid has {cols}x{rows}")]
    TextTooLarge {
        needed_cols: usize,
        needed_rows: usize,
        cols: usize,
        rows: usize,
    },
    #[error("grid-spacing ratio {0} is not achievable (expected 0 < ratio <= 1)")]
    Ratio(f64),
    #[error("checkpoints must be non-empty and strictly increasing")]
    Checkpoints,
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Spectra(#[from] SpectraError),
    #[error(transparent)]
    Beamform(#[from] BeamformError),
    #[error(transparent)]
    Damas(#[from] DamasError),
}
