use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid architecture: {0}")]
    InvalidArchitecture(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("non-finite input: {0}")]
    NonFinite(&'static str),
    #[error("{what}: expected length {expected}, found {found}")]
    LengthMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("pixel ({row}, {col}) outside {width}x{height} image")]
    PixelOutOfBounds {
        row: usize,
        col: usize,
        width: usize,
        height: usize,
    },
    #[error("negative density {0} at sample")]
    NegativeDensity(f64),
    #[error("dataset has no frames")]
    EmptyDataset,
    #[error("no pixels of the target classes")]
    NoTargetPixels,
    #[error("no positive rays: no labeled pixel belongs to the target classes")]
    NoPositiveRays,
    #[error("color component {0} outside [0, 255]")]
    ColorOutOfRange(f64),
    #[error("cannot form {k} clusters from {n} points")]
    TooFewPoints { k: usize, n: usize },
    #[error("image {width}x{height} smaller than the {window}x{window} window")]
    WindowTooLarge {
        width: usize,
        height: usize,
        window: usize,
    },
    #[error("image dimensions differ: {0}x{1} vs {2}x{3}")]
    DimensionMismatch(usize, usize, usize, usize),
    #[error("invalid scene: {0}")]
    InvalidScene(String),
    #[error("invalid dataset: {0}")]
    InvalidDataset(String),
    #[error("frame {frame}: label value {value} is not below class count {class_count}")]
    InvalidLabel {
        frame: usize,
        value: u8,
        class_count: usize,
    },
    #[error("training diverged at iteration {iteration}: loss_p={loss_p}, loss_s={loss_s}")]
    Divergence {
        iteration: usize,
        loss_p: f64,
        loss_s: f64,
    },
}
