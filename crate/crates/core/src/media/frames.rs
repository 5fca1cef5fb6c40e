//! Frame extraction and preprocessing.

use super::avi;
use super::codec::{parse_encoding_comment, read_rgb_frames};
use super::{MediaError, Result};
use crate::dataset::{ProbedMeta, VideoProber, VideoRecord};
use ndarray::Array3;
use std::path::Path;

/// A decoded 8-bit RGB frame in presentation order.
#[derive(Debug, Clone)]
pub struct RawFrame {
    pub video_id: String,
    pub frame_index: u32,
    pub width: u32,
    pub height: u32,
    /// Packed top-down RGB, `width * height * 3` bytes.
    pub rgb: Vec<u8>,
}

/// A preprocessed frame ready for the network: `(height, width, 3)` values
/// in [-1, 1].
#[derive(Debug, Clone)]
pub struct FrameTensor {
    pub video_id: String,
    pub frame_index: u32,
    pub data: Array3<f32>,
}

impl FrameTensor {
    pub fn height(&self) -> usize {
        self.data.shape()[0]
    }

    pub fn width(&self) -> usize {
        self.data.shape()[1]
    }
}

/// Decodes every frame of a recorded video, verifying the stored frame
/// count on the way out.
pub fn extract_frames(record: &VideoRecord) -> Result<Vec<RawFrame>> {
    let (video, frames) = read_rgb_frames(&record.path)?;
    if frames.len() as u32 != record.frame_count {
        return Err(MediaError::FrameCountMismatch {
            expected: record.frame_count,
            actual: frames.len() as u32,
        });
    }
    Ok(frames
        .into_iter()
        .enumerate()
        .map(|(i, rgb)| RawFrame {
            video_id: record.video_id.clone(),
            frame_index: i as u32,
            width: video.width,
            height: video.height,
            rgb,
        })
        .collect())
}

/// Bilinear resample of a packed RGB frame, half-pixel-centered sampling
/// with edge clamping. Returns `(out_h, out_w, 3)` values still on the
/// 0..255 scale.
pub(crate) fn resize_bilinear(
    rgb: &[u8],
    src_w: usize,
    src_h: usize,
    out_w: usize,
    out_h: usize,
) -> Array3<f32> {
    // Interpolate in f64; only the final store narrows to f32.
    let scale_x = src_w as f64 / out_w as f64;
    let scale_y = src_h as f64 / out_h as f64;
    let mut out = Array3::<f32>::zeros((out_h, out_w, 3));
    for oy in 0..out_h {
        let sy = ((oy as f64 + 0.5) * scale_y - 0.5).max(0.0);
        let y0 = (sy.floor() as usize).min(src_h - 1);
        let y1 = (y0 + 1).min(src_h - 1);
        let fy = sy - y0 as f64;
        for ox in 0..out_w {
            let sx = ((ox as f64 + 0.5) * scale_x - 0.5).max(0.0);
            let x0 = (sx.floor() as usize).min(src_w - 1);
            let x1 = (x0 + 1).min(src_w - 1);
            let fx = sx - x0 as f64;
            for c in 0..3 {
                let p00 = rgb[(y0 * src_w + x0) * 3 + c] as f64;
                let p01 = rgb[(y0 * src_w + x1) * 3 + c] as f64;
                let p10 = rgb[(y1 * src_w + x0) * 3 + c] as f64;
                let p11 = rgb[(y1 * src_w + x1) * 3 + c] as f64;
                let top = p00 + (p01 - p00) * fx;
                let bottom = p10 + (p11 - p10) * fx;
                out[(oy, ox, c)] = (top + (bottom - top) * fy) as f32;
            }
        }
    }
    out
}

/// Resize to the network resolution and map 8-bit values linearly onto
/// [-1, 1] (`v / 127.5 - 1`).
pub fn preprocess_frame(frame: &RawFrame, out_height: usize, out_width: usize) -> Result<FrameTensor> {
    let (w, h) = (frame.width as usize, frame.height as usize);
    if w == 0 || h == 0 {
        return Err(MediaError::InvalidFrame("empty frame".into()));
    }
    if frame.rgb.len() != w * h * 3 {
        return Err(MediaError::InvalidFrame(format!(
            "frame buffer is {} bytes; expected {} for {w}x{h} RGB",
            frame.rgb.len(),
            w * h * 3
        )));
    }
    let mut data = resize_bilinear(&frame.rgb, w, h, out_width, out_height);
    data.mapv_inplace(|v| v / 127.5 - 1.0);
    Ok(FrameTensor {
        video_id: frame.video_id.clone(),
        frame_index: frame.frame_index,
        data,
    })
}

/// Container prober backing manifest construction and validation.
pub struct AviProber;

impl VideoProber for AviProber {
    fn probe(&self, path: &Path) -> std::result::Result<ProbedMeta, String> {
        let meta = avi::probe_avi(path).map_err(|e| e.to_string())?;
        let encoding = meta.comment.as_deref().and_then(parse_encoding_comment);
        Ok(ProbedMeta {
            frame_count: meta.frame_count,
            width: meta.width,
            height: meta.height,
            fps: meta.fps,
            encoding,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn frame_of(rgb: Vec<u8>, width: u32, height: u32) -> RawFrame {
        RawFrame {
            video_id: "t".into(),
            frame_index: 0,
            width,
            height,
            rgb,
        }
    }

    #[test]
    fn constant_255_maps_to_exactly_one() {
        let frame = frame_of(vec![255; 256 * 512 * 3], 512, 256);
        let tensor = preprocess_frame(&frame, 256, 512).unwrap();
        assert_eq!(tensor.data.shape(), &[256, 512, 3]);
        assert!(tensor.data.iter().all(|&v| v == 1.0));
    }

    #[test]
    fn constant_zero_maps_to_minus_one() {
        let frame = frame_of(vec![0; 64 * 64 * 3], 64, 64);
        let tensor = preprocess_frame(&frame, 32, 32).unwrap();
        assert!(tensor.data.iter().all(|&v| v == -1.0));
    }

    #[test]
    fn same_size_resize_is_identity() {
        let mut rgb = vec![0u8; 8 * 8 * 3];
        for (i, b) in rgb.iter_mut().enumerate() {
            *b = (i * 31 % 256) as u8;
        }
        let out = resize_bilinear(&rgb, 8, 8, 8, 8);
        for y in 0..8 {
            for x in 0..8 {
                for c in 0..3 {
                    assert_eq!(out[(y, x, c)], rgb[(y * 8 + x) * 3 + c] as f32);
                }
            }
        }
    }

    /// Straight double-loop reference resampler, written independently of
    /// the production code path.
    fn reference_bilinear(
        rgb: &[u8],
        src_w: usize,
        src_h: usize,
        out_w: usize,
        out_h: usize,
    ) -> Vec<f64> {
        let mut out = vec![0.0f64; out_h * out_w * 3];
        for oy in 0..out_h {
            for ox in 0..out_w {
                let sy = (oy as f64 + 0.5) * (src_h as f64 / out_h as f64) - 0.5;
                let sx = (ox as f64 + 0.5) * (src_w as f64 / out_w as f64) - 0.5;
                let sy = sy.clamp(0.0, (src_h - 1) as f64);
                let sx = sx.clamp(0.0, (src_w - 1) as f64);
                let (y0, x0) = (sy.floor() as usize, sx.floor() as usize);
                let (y1, x1) = ((y0 + 1).min(src_h - 1), (x0 + 1).min(src_w - 1));
                let (dy, dx) = (sy - y0 as f64, sx - x0 as f64);
                for c in 0..3 {
                    let at = |y: usize, x: usize| rgb[(y * src_w + x) * 3 + c] as f64;
                    let v = at(y0, x0) * (1.0 - dy) * (1.0 - dx)
                        + at(y0, x1) * (1.0 - dy) * dx
                        + at(y1, x0) * dy * (1.0 - dx)
                        + at(y1, x1) * dy * dx;
                    out[(oy * out_w + ox) * 3 + c] = v;
                }
            }
        }
        out
    }

    #[test]
    fn checkerboard_matches_reference_resampler() {
        let (sw, sh) = (100usize, 100usize);
        let mut rgb = vec![0u8; sw * sh * 3];
        for y in 0..sh {
            for x in 0..sw {
                let v = if (x + y) % 2 == 0 { 255 } else { 0 };
                for c in 0..3 {
                    rgb[(y * sw + x) * 3 + c] = v;
                }
            }
        }
        for (ow, oh) in [(50usize, 50usize), (64, 32), (130, 70)] {
            let got = resize_bilinear(&rgb, sw, sh, ow, oh);
            let want = reference_bilinear(&rgb, sw, sh, ow, oh);
            for oy in 0..oh {
                for ox in 0..ow {
                    for c in 0..3 {
                        let g = got[(oy, ox, c)] as f64;
                        let w = want[(oy * ow + ox) * 3 + c];
                        assert!(
                            (g - w).abs() <= 1e-6 * 255.0,
                            "({oy},{ox},{c}) {g} vs {w} at {ow}x{oh}"
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn halving_paper_native_resolution() {
        let (sw, sh) = (1024usize, 512usize);
        let mut rgb = vec![0u8; sw * sh * 3];
        for (i, b) in rgb.iter_mut().enumerate() {
            *b = (i % 251) as u8;
        }
        let frame = frame_of(rgb, sw as u32, sh as u32);
        let tensor = preprocess_frame(&frame, 256, 512).unwrap();
        assert_eq!(tensor.data.shape(), &[256, 512, 3]);
        assert!(tensor.data.iter().all(|&v| (-1.0..=1.0).contains(&v)));
    }

    #[test]
    fn bad_buffer_size_is_rejected() {
        let frame = frame_of(vec![0; 10], 64, 64);
        assert!(matches!(
            preprocess_frame(&frame, 32, 32),
            Err(MediaError::InvalidFrame(_))
        ));
    }
}
