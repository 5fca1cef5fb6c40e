//! Generator-trace injection. Every artifact maps the already-quantized
//! real frame to the fake frame, so strength 0 is the identity.

use super::ArtifactType;

/// Peak checkerboard residual at strength 1, in 8-bit levels.
pub(crate) const CHECKERBOARD_AMPLITUDE: f64 = 24.0;

pub(crate) fn apply_artifact(
    kind: ArtifactType,
    strength: f64,
    rgb: &[u8],
    width: usize,
    height: usize,
) -> Vec<u8> {
    match kind {
        ArtifactType::Checkerboard => checkerboard(strength, rgb, width, height),
        ArtifactType::SpectralNotch => spectral_notch(strength, rgb, width, height),
        ArtifactType::TextureSmoothing => texture_smoothing(strength, rgb, width, height),
    }
}

/// Period-2 alternating residual, the footprint of stride-2 transposed
/// convolution upsampling.
fn checkerboard(strength: f64, rgb: &[u8], width: usize, height: usize) -> Vec<u8> {
    let amp = strength * CHECKERBOARD_AMPLITUDE;
    let mut out = vec![0u8; rgb.len()];
    for y in 0..height {
        for x in 0..width {
            let sign = if (x + y) % 2 == 0 { 1.0 } else { -1.0 };
            let delta = amp * sign;
            let i = (y * width + x) * 3;
            for c in 0..3 {
                out[i + c] = (rgb[i + c] as f64 + delta).round().clamp(0.0, 255.0) as u8;
            }
        }
    }
    out
}

/// Box blur with an odd kernel of the given radius, edge-clamped.
fn box_blur(rgb: &[f64], width: usize, height: usize, radius: usize) -> Vec<f64> {
    let mut tmp = vec![0.0f64; rgb.len()];
    let mut out = vec![0.0f64; rgb.len()];
    let k = (2 * radius + 1) as f64;
    // Horizontal pass.
    for y in 0..height {
        for x in 0..width {
            for c in 0..3 {
                let mut acc = 0.0;
                for dx in -(radius as isize)..=(radius as isize) {
                    let sx = (x as isize + dx).clamp(0, width as isize - 1) as usize;
                    acc += rgb[(y * width + sx) * 3 + c];
                }
                tmp[(y * width + x) * 3 + c] = acc / k;
            }
        }
    }
    // Vertical pass.
    for y in 0..height {
        for x in 0..width {
            for c in 0..3 {
                let mut acc = 0.0;
                for dy in -(radius as isize)..=(radius as isize) {
                    let sy = (y as isize + dy).clamp(0, height as isize - 1) as usize;
                    acc += tmp[(sy * width + x) * 3 + c];
                }
                out[(y * width + x) * 3 + c] = acc / k;
            }
        }
    }
    out
}

fn to_f64(rgb: &[u8]) -> Vec<f64> {
    rgb.iter().map(|&v| v as f64).collect()
}

fn quantize(values: &[f64]) -> Vec<u8> {
    values
        .iter()
        .map(|&v| v.round().clamp(0.0, 255.0) as u8)
        .collect()
}

/// Suppresses the mid-frequency band isolated by a difference of box
/// blurs, leaving a dip in the spectrum.
fn spectral_notch(strength: f64, rgb: &[u8], width: usize, height: usize) -> Vec<u8> {
    let x = to_f64(rgb);
    let fine = box_blur(&x, width, height, 1);
    let coarse = box_blur(&x, width, height, 3);
    let out: Vec<f64> = x
        .iter()
        .zip(fine.iter().zip(&coarse))
        .map(|(&v, (&f, &c))| v - strength * (f - c))
        .collect();
    quantize(&out)
}

/// Blends toward a blurred copy, the over-smoothed look of a generator
/// that cannot reproduce fine texture.
fn texture_smoothing(strength: f64, rgb: &[u8], width: usize, height: usize) -> Vec<u8> {
    let x = to_f64(rgb);
    let blurred = box_blur(&x, width, height, 2);
    let out: Vec<f64> = x
        .iter()
        .zip(&blurred)
        .map(|(&v, &b)| (1.0 - strength) * v + strength * b)
        .collect();
    quantize(&out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gradient_frame(w: usize, h: usize) -> Vec<u8> {
        let mut rgb = vec![0u8; w * h * 3];
        for y in 0..h {
            for x in 0..w {
                let i = (y * w + x) * 3;
                rgb[i] = ((x * 255) / w) as u8;
                rgb[i + 1] = ((y * 255) / h) as u8;
                rgb[i + 2] = (((x + y) * 127) / (w + h)) as u8;
            }
        }
        rgb
    }

    #[test]
    fn vanishing_strength_approaches_identity() {
        let frame = gradient_frame(32, 32);
        for kind in ArtifactType::ALL {
            let out = apply_artifact(kind, 1e-9, &frame, 32, 32);
            assert_eq!(out, frame, "{kind} at strength ~0 must be the identity");
        }
    }

    #[test]
    fn checkerboard_alternates_sign() {
        let frame = vec![128u8; 8 * 8 * 3];
        let out = apply_artifact(ArtifactType::Checkerboard, 0.5, &frame, 8, 8);
        let amp = (0.5 * CHECKERBOARD_AMPLITUDE) as i16;
        assert_eq!(out[0] as i16 - 128, amp);
        assert_eq!(out[3] as i16 - 128, -amp);
        assert_eq!(out[(8 * 3)] as i16 - 128, -amp);
    }

    #[test]
    fn smoothing_reduces_local_variation() {
        let frame = gradient_frame(32, 32);
        let mut noisy = frame.clone();
        for (i, v) in noisy.iter_mut().enumerate() {
            if i % 7 == 0 {
                *v = v.saturating_add(40);
            }
        }
        let smooth = apply_artifact(ArtifactType::TextureSmoothing, 1.0, &noisy, 32, 32);
        let variation = |f: &[u8]| -> f64 {
            f.windows(4)
                .map(|w| (w[0] as f64 - w[3] as f64).abs())
                .sum::<f64>()
        };
        assert!(variation(&smooth) < variation(&noisy));
    }
}
