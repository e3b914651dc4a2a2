//! Synthetic image fixtures shared by the integration suites.

use biqme::RasterImage;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Procedural "natural" scene: layered gradients, a few colored shapes,
/// and grain. Seeds vary palette, geometry, and base exposure.
pub fn natural_image(w: usize, h: usize, seed: u64) -> RasterImage {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let base: f64 = rng.gen_range(70.0..170.0);
    let amp1: f64 = rng.gen_range(20.0..60.0);
    let amp2: f64 = rng.gen_range(10.0..50.0);
    let fx: f64 = rng.gen_range(0.02..0.2);
    let fy: f64 = rng.gen_range(0.02..0.2);
    let phase: f64 = rng.gen_range(0.0..6.28);
    let tint: (f64, f64, f64) = (
        rng.gen_range(-30.0..30.0),
        rng.gen_range(-30.0..30.0),
        rng.gen_range(-30.0..30.0),
    );
    let noise_amp: f64 = rng.gen_range(4.0..18.0);

    struct Blob {
        cx: f64,
        cy: f64,
        r: f64,
        color: (f64, f64, f64),
    }
    let blobs: Vec<Blob> = (0..rng.gen_range(2..6))
        .map(|_| Blob {
            cx: rng.gen_range(0.0..w as f64),
            cy: rng.gen_range(0.0..h as f64),
            r: rng.gen_range(4.0..(w.min(h) as f64 / 2.5)),
            color: (
                rng.gen_range(-80.0..80.0),
                rng.gen_range(-80.0..80.0),
                rng.gen_range(-80.0..80.0),
            ),
        })
        .collect();

    let mut data = Vec::with_capacity(w * h * 3);
    for y in 0..h {
        for x in 0..w {
            let luma = base
                + amp1 * ((x as f64) * fx + phase).sin()
                + amp2 * ((y as f64) * fy).cos();
            let mut rgb = (luma + tint.0, luma + tint.1 * 0.5, luma + tint.2);
            for b in &blobs {
                let d2 = (x as f64 - b.cx).powi(2) + (y as f64 - b.cy).powi(2);
                let fall = (-d2 / (2.0 * b.r * b.r)).exp();
                rgb.0 += b.color.0 * fall;
                rgb.1 += b.color.1 * fall;
                rgb.2 += b.color.2 * fall;
            }
            let n: f64 = rng.gen_range(-noise_amp..noise_amp);
            rgb.0 += n;
            rgb.1 += n * rng.gen_range(0.7..1.3);
            rgb.2 += n;
            data.push(rgb.0.clamp(0.0, 255.0) as u8);
            data.push(rgb.1.clamp(0.0, 255.0) as u8);
            data.push(rgb.2.clamp(0.0, 255.0) as u8);
        }
    }
    RasterImage::new(w, h, 3, data).unwrap()
}

/// Uniform random RGB noise.
pub fn noise_image(w: usize, h: usize, seed: u64) -> RasterImage {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    RasterImage::new(w, h, 3, (0..w * h * 3).map(|_| rng.gen()).collect()).unwrap()
}

pub fn constant_image(w: usize, h: usize, v: u8) -> RasterImage {
    RasterImage::new(w, h, 3, vec![v; w * h * 3]).unwrap()
}

pub fn checkerboard(w: usize, h: usize, cell: usize, lo: u8, hi: u8) -> RasterImage {
    let mut data = Vec::with_capacity(w * h * 3);
    for y in 0..h {
        for x in 0..w {
            let v = if ((x / cell) + (y / cell)) % 2 == 0 { lo } else { hi };
            data.extend([v, v, v]);
        }
    }
    RasterImage::new(w, h, 3, data).unwrap()
}

pub fn step_edge(w: usize, h: usize, lo: u8, hi: u8) -> RasterImage {
    let mut data = Vec::with_capacity(w * h * 3);
    for _y in 0..h {
        for x in 0..w {
            let v = if x < w / 2 { lo } else { hi };
            data.extend([v, v, v]);
        }
    }
    RasterImage::new(w, h, 3, data).unwrap()
}

pub fn impulse_image(w: usize, h: usize) -> RasterImage {
    let mut data = vec![0u8; w * h * 3];
    let c = ((h / 2) * w + w / 2) * 3;
    data[c] = 255;
    data[c + 1] = 255;
    data[c + 2] = 255;
    RasterImage::new(w, h, 3, data).unwrap()
}

/// Applies one LUT to all channels.
pub fn apply_gray_lut(img: &RasterImage, lut: impl Fn(u8) -> u8) -> RasterImage {
    RasterImage::new(
        img.width(),
        img.height(),
        img.channels(),
        img.data().iter().map(|&v| lut(v)).collect(),
    )
    .unwrap()
}

/// Compresses the dynamic range into [96, 160].
pub fn low_contrast(img: &RasterImage) -> RasterImage {
    apply_gray_lut(img, |v| (96.0 + v as f64 * 64.0 / 255.0).round() as u8)
}

/// Darkens with a crushing gamma.
pub fn low_light(img: &RasterImage) -> RasterImage {
    apply_gray_lut(img, |v| {
        (255.0 * (v as f64 / 255.0).powf(2.2) * 0.45).round() as u8
    })
}
