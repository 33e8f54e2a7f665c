//! Gaussian scene models: PLY parsing, attribute activation and the
//! shared multi-model registry.

mod activate;
mod ply;
mod registry;

pub use activate::{activate, ActivatedPrimitives, SH_C0};
pub use ply::{parse_ply, write_ply, MAX_REST};
pub use registry::{
    scan_model_directory, Clock, ManualClock, ModelLease, ModelRecord, ModelRegistry, ModelState,
    SystemClock, DEFAULT_EVICTION_TIMEOUT,
};

use thiserror::Error;

/// Number of SH coefficients per channel stored for each Gaussian (degree 3).
pub const SH_COEFFS: usize = 16;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("malformed PLY header: {0}")]
    MalformedHeader(String),
    #[error("missing PLY property `{0}`")]
    MissingProperty(String),
    #[error("truncated body: expected {expected} bytes, found {actual}")]
    TruncatedBody { expected: usize, actual: usize },
    #[error("non-finite {attribute} attribute at gaussian {index}")]
    NonFiniteAttribute { index: usize, attribute: &'static str },
    #[error("model root `{0}` not found")]
    RootNotFound(String),
    #[error("unknown model `{0}`")]
    UnknownModel(String),
    #[error("failed to load model `{id}`: {reason}")]
    LoadFailed { id: String, reason: String },
    #[error("release of model `{0}` with zero references")]
    UnderflowRelease(String),
    #[error("attribute arrays disagree on length")]
    LengthMismatch,
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Raw per-Gaussian attributes as stored on disk.
///
/// All arrays share the same length; `sh_coeffs[n][0]` is the DC term.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct GaussianPrimitiveSet {
    pub means: Vec<[f32; 3]>,
    pub log_scales: Vec<[f32; 3]>,
    /// `(w, x, y, z)` order.
    pub quaternions: Vec<[f32; 4]>,
    pub opacity_logits: Vec<f32>,
    pub sh_coeffs: Vec<[[f32; 3]; SH_COEFFS]>,
}

impl GaussianPrimitiveSet {
    pub fn with_capacity(n: usize) -> Self {
        Self {
            means: Vec::with_capacity(n),
            log_scales: Vec::with_capacity(n),
            quaternions: Vec::with_capacity(n),
            opacity_logits: Vec::with_capacity(n),
            sh_coeffs: Vec::with_capacity(n),
        }
    }

    pub fn len(&self) -> usize {
        self.means.len()
    }

    pub fn is_empty(&self) -> bool {
        self.means.is_empty()
    }

    /// Checks the equal-length and finiteness invariants.
    pub fn validate(&self) -> Result<(), ModelError> {
        let n = self.means.len();
        if self.log_scales.len() != n
            || self.quaternions.len() != n
            || self.opacity_logits.len() != n
            || self.sh_coeffs.len() != n
        {
            return Err(ModelError::LengthMismatch);
        }
        for i in 0..n {
            let finite = self.means[i].iter().all(|v| v.is_finite())
                && self.log_scales[i].iter().all(|v| v.is_finite())
                && self.quaternions[i].iter().all(|v| v.is_finite())
                && self.opacity_logits[i].is_finite()
                && self.sh_coeffs[i].iter().flatten().all(|v| v.is_finite());
            if !finite {
                return Err(ModelError::NonFiniteAttribute {
                    index: i,
                    attribute: "raw",
                });
            }
        }
        Ok(())
    }
}
