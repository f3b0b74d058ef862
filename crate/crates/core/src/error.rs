use thiserror::Error;

#[derive(Error, Debug)]
pub enum PolarError {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("bad magic")]
    BadMagic,

    #[error("truncated payload")]
    TruncatedPayload,

    #[error("zero-dimensional tensor")]
    ZeroDimensionalTensor,

    #[error("dimension {0} exceeds u32 range")]
    DimOverflow(usize),

    #[error("non-finite value in tensor")]
    NonFinite,

    #[error("invalid dimensions: {0}")]
    InvalidDims(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("degenerate PSF")]
    DegeneratePsf,

    #[error("mask is not a per-pixel partition")]
    MaskPartition,

    #[error("degenerate channel")]
    DegenerateChannel,

    #[error("dense operator size guard exceeded: {0} > 65536")]
    SizeGuard(usize),

    #[error("solver diverged: {0}")]
    SolverDiverged(String),

    #[error("negative curvature in conjugate gradient (operator not SPD)")]
    NegativeCurvature,

    #[error("need at least 4 correspondences, got {0}")]
    NotEnoughPoints(usize),

    #[error("degenerate point configuration")]
    DegenerateConfiguration,

    #[error("singular homography")]
    SingularHomography,

    #[error("required angle {0} degrees missing from stack")]
    MissingAngle(u32),

    #[error("image smaller than SSIM window")]
    ImageTooSmall,

    #[error("parse error: {0}")]
    Parse(String),

    #[error("png error: {0}")]
    Png(#[from] image::ImageError),
}

pub type Result<T> = std::result::Result<T, PolarError>;
