//! Full-range BT.601 RGB <-> I420 conversion.
//!
//! Both directions use the same matrix so an encode/decode pair only
//! suffers codec loss, not colorspace drift. Chroma is subsampled by
//! averaging each 2x2 block and upsampled by replication.

fn clamp_u8(v: f32) -> u8 {
    v.round().clamp(0.0, 255.0) as u8
}

/// Packed top-down RGB24 to I420 planes (Y then U then V).
///
/// Width and height must be even (4:2:0 chroma sites).
pub fn rgb_to_i420(rgb: &[u8], width: usize, height: usize) -> Vec<u8> {
    assert_eq!(rgb.len(), width * height * 3, "rgb buffer size");
    assert!(width % 2 == 0 && height % 2 == 0, "4:2:0 needs even dimensions");
    let mut out = vec![0u8; width * height * 3 / 2];
    let (y_plane, uv) = out.split_at_mut(width * height);
    let (u_plane, v_plane) = uv.split_at_mut(width * height / 4);

    let mut u_acc = vec![0.0f32; width * height / 4];
    let mut v_acc = vec![0.0f32; width * height / 4];
    for row in 0..height {
        for col in 0..width {
            let i = (row * width + col) * 3;
            let (r, g, b) = (rgb[i] as f32, rgb[i + 1] as f32, rgb[i + 2] as f32);
            let y = 0.299 * r + 0.587 * g + 0.114 * b;
            let u = -0.168_736 * r - 0.331_264 * g + 0.5 * b + 128.0;
            let v = 0.5 * r - 0.418_688 * g - 0.081_312 * b + 128.0;
            y_plane[row * width + col] = clamp_u8(y);
            let c = (row / 2) * (width / 2) + col / 2;
            u_acc[c] += u;
            v_acc[c] += v;
        }
    }
    for (dst, acc) in u_plane.iter_mut().zip(&u_acc) {
        *dst = clamp_u8(acc / 4.0);
    }
    for (dst, acc) in v_plane.iter_mut().zip(&v_acc) {
        *dst = clamp_u8(acc / 4.0);
    }
    out
}

/// I420 planes (possibly strided) back to packed top-down RGB24.
#[allow(clippy::too_many_arguments)]
pub fn i420_to_rgb(
    y: &[u8],
    u: &[u8],
    v: &[u8],
    width: usize,
    height: usize,
    y_stride: usize,
    u_stride: usize,
    v_stride: usize,
) -> Vec<u8> {
    let mut rgb = vec![0u8; width * height * 3];
    for row in 0..height {
        for col in 0..width {
            let yv = y[row * y_stride + col] as f32;
            let uv = u[(row / 2) * u_stride + col / 2] as f32 - 128.0;
            let vv = v[(row / 2) * v_stride + col / 2] as f32 - 128.0;
            let r = yv + 1.402 * vv;
            let g = yv - 0.344_136 * uv - 0.714_136 * vv;
            let b = yv + 1.772 * uv;
            let i = (row * width + col) * 3;
            rgb[i] = clamp_u8(r);
            rgb[i + 1] = clamp_u8(g);
            rgb[i + 2] = clamp_u8(b);
        }
    }
    rgb
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grayscale_round_trip_is_near_exact() {
        let (w, h) = (16usize, 8usize);
        let mut rgb = vec![0u8; w * h * 3];
        for (i, px) in rgb.chunks_mut(3).enumerate() {
            let g = ((i * 7) % 256) as u8;
            px.copy_from_slice(&[g, g, g]);
        }
        let yuv = rgb_to_i420(&rgb, w, h);
        let (y, uv) = yuv.split_at(w * h);
        let (u, v) = uv.split_at(w * h / 4);
        let back = i420_to_rgb(y, u, v, w, h, w, w / 2, w / 2);
        for (a, b) in rgb.iter().zip(&back) {
            assert!((*a as i16 - *b as i16).abs() <= 1, "{a} vs {b}");
        }
    }

    #[test]
    fn saturated_colors_survive_round_trip() {
        let (w, h) = (4usize, 4usize);
        for color in [[255u8, 0, 0], [0, 255, 0], [0, 0, 255], [255, 255, 255]] {
            let rgb: Vec<u8> = color.iter().copied().cycle().take(w * h * 3).collect();
            let yuv = rgb_to_i420(&rgb, w, h);
            let (y, uv) = yuv.split_at(w * h);
            let (u, v) = uv.split_at(w * h / 4);
            let back = i420_to_rgb(y, u, v, w, h, w, w / 2, w / 2);
            for (a, b) in rgb.iter().zip(&back) {
                assert!((*a as i16 - *b as i16).abs() <= 2, "{color:?}: {a} vs {b}");
            }
        }
    }
}
