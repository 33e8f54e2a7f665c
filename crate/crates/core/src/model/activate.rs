use super::{GaussianPrimitiveSet, ModelError, SH_COEFFS};

/// Degree-0 spherical harmonic basis constant, `1 / (2 sqrt(pi))`.
pub const SH_C0: f64 = 0.28209479177;

/// Render-ready Gaussian attributes. Immutable once built.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ActivatedPrimitives {
    pub means: Vec<[f64; 3]>,
    /// Strictly positive world-unit extents.
    pub scales: Vec<[f64; 3]>,
    /// Unit quaternions, `(w, x, y, z)`.
    pub rotations: Vec<[f64; 4]>,
    pub opacities: Vec<f64>,
    /// View-independent color in `[0, 1]`.
    pub colors_dc: Vec<[f64; 3]>,
    pub sh_coeffs: Vec<[[f32; 3]; SH_COEFFS]>,
}

impl ActivatedPrimitives {
    pub fn len(&self) -> usize {
        self.means.len()
    }

    pub fn is_empty(&self) -> bool {
        self.means.is_empty()
    }
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Applies the exp / sigmoid / normalize activations to raw attributes.
pub fn activate(set: &GaussianPrimitiveSet) -> Result<ActivatedPrimitives, ModelError> {
    set.validate()?;
    let n = set.len();
    let mut out = ActivatedPrimitives {
        means: Vec::with_capacity(n),
        scales: Vec::with_capacity(n),
        rotations: Vec::with_capacity(n),
        opacities: Vec::with_capacity(n),
        colors_dc: Vec::with_capacity(n),
        sh_coeffs: set.sh_coeffs.clone(),
    };
    let fail = |index, attribute| ModelError::NonFiniteAttribute { index, attribute };

    for i in 0..n {
        out.means.push(set.means[i].map(f64::from));

        // Underflow to zero is floored so scales stay strictly positive.
        let scale = set.log_scales[i].map(|s| f64::from(s).exp().max(f64::MIN_POSITIVE));
        if scale.iter().any(|s| !s.is_finite()) {
            return Err(fail(i, "scale"));
        }
        out.scales.push(scale);

        let q = set.quaternions[i].map(f64::from);
        let norm = q.iter().map(|v| v * v).sum::<f64>().sqrt();
        if !(norm.is_finite() && norm > 0.0) {
            return Err(fail(i, "rotation"));
        }
        out.rotations.push(q.map(|v| v / norm));

        out.opacities.push(sigmoid(f64::from(set.opacity_logits[i])));

        let dc = set.sh_coeffs[i][0];
        out.colors_dc
            .push(dc.map(|c| (SH_C0 * f64::from(c) + 0.5).clamp(0.0, 1.0)));
    }
    Ok(out)
}
