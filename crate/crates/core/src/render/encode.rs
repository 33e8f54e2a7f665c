use jpeg_encoder::{ColorType, Encoder, SamplingFactor};

use super::{Framebuffer, RenderError};

/// Baseline JFIF encoding. Chroma is subsampled 4:2:0 below quality 90 and
/// kept at 4:4:4 from 90 up.
pub fn encode_jpeg(fb: &Framebuffer, quality: u8) -> Result<Vec<u8>, RenderError> {
    let fail = |reason: String| RenderError::EncodeFailure {
        width: fb.width,
        height: fb.height,
        reason,
    };
    if fb.width == 0 || fb.height == 0 {
        return Err(fail("zero dimension".into()));
    }
    if !(1..=100).contains(&quality) {
        return Err(RenderError::InvalidQuality(quality));
    }
    let (w, h) = match (u16::try_from(fb.width), u16::try_from(fb.height)) {
        (Ok(w), Ok(h)) => (w, h),
        _ => return Err(fail("dimension exceeds 65535".into())),
    };
    let mut out = Vec::with_capacity(fb.width as usize * fb.height as usize / 4);
    let mut encoder = Encoder::new(&mut out, quality);
    encoder.set_sampling_factor(if quality < 90 {
        SamplingFactor::F_2_2
    } else {
        SamplingFactor::F_1_1
    });
    encoder
        .encode(&fb.to_rgb8(), w, h, ColorType::Rgb)
        .map_err(|e| fail(e.to_string()))?;
    Ok(out)
}

/// Lossless 8-bit RGB PNG.
pub fn encode_png(fb: &Framebuffer) -> Result<Vec<u8>, RenderError> {
    if fb.width == 0 || fb.height == 0 {
        return Err(RenderError::EncodeFailure {
            width: fb.width,
            height: fb.height,
            reason: "zero dimension".into(),
        });
    }
    let mut out = std::io::Cursor::new(Vec::new());
    fb.to_image()
        .write_to(&mut out, image::ImageFormat::Png)
        .map_err(|e| RenderError::EncodeFailure {
            width: fb.width,
            height: fb.height,
            reason: e.to_string(),
        })?;
    Ok(out.into_inner())
}

/// Decodes a JPEG or PNG payload to 8-bit RGB.
pub fn decode_image(bytes: &[u8]) -> Result<image::RgbImage, RenderError> {
    image::load_from_memory(bytes)
        .map(|img| img.to_rgb8())
        .map_err(|e| RenderError::Decode(e.to_string()))
}
