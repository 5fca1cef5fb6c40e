//! Temporally coherent base scenes.
//!
//! Each scene is a sum of drifting periodic value-noise octaves whose
//! amplitudes halve as spatial frequency doubles, which lands close to a
//! 1/f amplitude spectrum. Chroma rides on two extra low-frequency
//! fields so frames look like tinted organic footage rather than gray
//! noise.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use sha2::{Digest, Sha256};

const OCTAVES: usize = 5;
const BASE_GRID: usize = 4;

/// Stream key for a video's scene; shared by the real and fake variants
/// of the same index so the artifact is the only difference.
pub(crate) fn scene_rng(seed: u64, video_index: usize) -> ChaCha20Rng {
    let mut hasher = Sha256::new();
    hasher.update(b"synthgen.scene");
    hasher.update(seed.to_le_bytes());
    hasher.update((video_index as u64).to_le_bytes());
    let digest = hasher.finalize();
    let mut key = [0u8; 32];
    key.copy_from_slice(&digest[..32]);
    ChaCha20Rng::from_seed(key)
}

struct Octave {
    grid: Vec<f32>,
    size: usize,
    amplitude: f32,
    vx: f32,
    vy: f32,
}

impl Octave {
    fn sample(&self, x: f32, y: f32, t: f32) -> f32 {
        let n = self.size as f32;
        let sx = (x + self.vx * t).rem_euclid(n);
        let sy = (y + self.vy * t).rem_euclid(n);
        let x0 = sx.floor() as usize % self.size;
        let y0 = sy.floor() as usize % self.size;
        let x1 = (x0 + 1) % self.size;
        let y1 = (y0 + 1) % self.size;
        let fx = sx - sx.floor();
        let fy = sy - sy.floor();
        let at = |yy: usize, xx: usize| self.grid[yy * self.size + xx];
        let top = at(y0, x0) * (1.0 - fx) + at(y0, x1) * fx;
        let bottom = at(y1, x0) * (1.0 - fx) + at(y1, x1) * fx;
        (top * (1.0 - fy) + bottom * fy) * self.amplitude
    }
}

pub(crate) struct Scene {
    luma: Vec<Octave>,
    chroma_u: Octave,
    chroma_v: Octave,
    width: usize,
    height: usize,
}

/// `drift` is the peak speed as a fraction of the full image per frame,
/// so all octaves move at comparable pixel velocity.
fn octave(rng: &mut ChaCha20Rng, level: usize, amplitude: f32, drift: f32) -> Octave {
    let size = BASE_GRID << level;
    let grid = (0..size * size)
        .map(|_| rng.random::<f32>() * 2.0 - 1.0)
        .collect();
    let scale = drift * size as f32;
    Octave {
        grid,
        size,
        amplitude,
        vx: (rng.random::<f32>() * 2.0 - 1.0) * scale,
        vy: (rng.random::<f32>() * 2.0 - 1.0) * scale,
    }
}

impl Scene {
    pub fn new(seed: u64, video_index: usize, width: usize, height: usize) -> Scene {
        let mut rng = scene_rng(seed, video_index);
        let luma = (0..OCTAVES)
            .map(|level| octave(&mut rng, level, 0.5f32.powi(level as i32), 0.012))
            .collect();
        let chroma_u = octave(&mut rng, 1, 1.0, 0.004);
        let chroma_v = octave(&mut rng, 1, 1.0, 0.004);
        Scene {
            luma,
            chroma_u,
            chroma_v,
            width,
            height,
        }
    }

    /// Renders frame `t` as packed RGB.
    pub fn render(&self, t: u32) -> Vec<u8> {
        let (w, h) = (self.width, self.height);
        let mut rgb = vec![0u8; w * h * 3];
        let tf = t as f32;
        for y in 0..h {
            for x in 0..w {
                // Octave grids are periodic; map the frame onto them.
                let mut luma = 0.0f32;
                for oct in &self.luma {
                    let gx = x as f32 / w as f32 * oct.size as f32;
                    let gy = y as f32 / h as f32 * oct.size as f32;
                    luma += oct.sample(gx, gy, tf);
                }
                let ux = x as f32 / w as f32 * self.chroma_u.size as f32;
                let uy = y as f32 / h as f32 * self.chroma_u.size as f32;
                let cu = self.chroma_u.sample(ux, uy, tf);
                let cv = self.chroma_v.sample(ux, uy, tf);

                let base = 128.0 + 55.0 * luma;
                let r = base + 28.0 * cv;
                let g = base - 14.0 * cu - 14.0 * cv;
                let b = base + 28.0 * cu;
                let i = (y * w + x) * 3;
                rgb[i] = r.round().clamp(0.0, 255.0) as u8;
                rgb[i + 1] = g.round().clamp(0.0, 255.0) as u8;
                rgb[i + 2] = b.round().clamp(0.0, 255.0) as u8;
            }
        }
        rgb
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scenes_are_deterministic_per_index() {
        let a = Scene::new(7, 3, 64, 32).render(5);
        let b = Scene::new(7, 3, 64, 32).render(5);
        assert_eq!(a, b);
        let c = Scene::new(7, 4, 64, 32).render(5);
        assert_ne!(a, c, "different indices must differ");
        let d = Scene::new(8, 3, 64, 32).render(5);
        assert_ne!(a, d, "different seeds must differ");
    }

    #[test]
    fn consecutive_frames_are_coherent_but_not_static() {
        let scene = Scene::new(1, 0, 64, 64);
        let f0 = scene.render(0);
        let f1 = scene.render(1);
        assert_ne!(f0, f1);
        let mean_abs_diff: f64 = f0
            .iter()
            .zip(&f1)
            .map(|(&a, &b)| (a as f64 - b as f64).abs())
            .sum::<f64>()
            / f0.len() as f64;
        assert!(
            mean_abs_diff < 12.0,
            "adjacent frames should drift, not jump: {mean_abs_diff}"
        );
    }

    #[test]
    fn pixel_values_use_a_wide_range() {
        let scene = Scene::new(2, 0, 128, 64);
        let frame = scene.render(0);
        let min = *frame.iter().min().unwrap();
        let max = *frame.iter().max().unwrap();
        assert!(max - min > 60, "scene too flat: {min}..{max}");
    }
}
