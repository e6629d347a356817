//! Image stacks as `(H, W, 3, N)` tensors with values in `[0, 1]`.
//!
//! PSNR on these tensors uses peak 1.0; exported PNGs use 8-bit channels,
//! where the equivalent peak is 255.

#[cfg(feature = "images")]
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::synthetic::random_permutation;
use crate::error::{Error, Result};
use crate::tensor::RealTensor;

#[derive(Clone, Debug)]
pub struct ImageStack {
    pub tensor: RealTensor,
    /// Source file name of every frame, in tensor order.
    pub names: Vec<String>,
}

fn check_stack(t: &RealTensor) -> Result<(usize, usize, usize)> {
    match t.shape() {
        &[h, w, 3, n] => Ok((h, w, n)),
        s => Err(Error::InvalidShape {
            shape: s.to_vec(),
            reason: "image stack must be H x W x 3 x N",
        }),
    }
}

/// Reorders frames with a seeded permutation; returns the permutation
/// (output frame `i` is input frame `perm[i]`).
pub fn shuffle_frames(t: &RealTensor, seed: u64) -> Result<(RealTensor, Vec<usize>)> {
    let (_, _, n) = check_stack(t)?;
    let perm = random_permutation(n, seed);
    Ok((t.permute_mode(3, &perm)?, perm))
}

/// One frame as RGBA bytes, row-major.
pub fn frame_rgba(t: &RealTensor, frame: usize) -> Result<Vec<u8>> {
    let (h, w, n) = check_stack(t)?;
    if frame >= n {
        return Err(Error::IndexOutOfRange {
            index: vec![frame],
            shape: vec![n],
        });
    }
    let mut out = Vec::with_capacity(h * w * 4);
    for y in 0..h {
        for x in 0..w {
            for c in 0..3 {
                out.push(to_u8(t.get(&[y, x, c, frame])?));
            }
            out.push(255);
        }
    }
    Ok(out)
}

pub fn to_u8(v: f64) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

/// A synthetic image sequence: a colour gradient background, a woven
/// texture, a few soft blobs drifting across frames and mild pixel noise
/// (σ = 0.01). Stands in for photographs in tests and demos.
pub fn image_fixture(h: usize, w: usize, frames: usize, seed: u64) -> Result<RealTensor> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let base: [f64; 3] = [
        rng.random_range(0.2..0.5),
        rng.random_range(0.2..0.5),
        rng.random_range(0.2..0.5),
    ];
    let tilt: [(f64, f64); 3] = std::array::from_fn(|_| (rng.random_range(-0.2..0.2), rng.random_range(-0.2..0.2)));
    struct Blob {
        cx: f64,
        cy: f64,
        vx: f64,
        vy: f64,
        r: f64,
        color: [f64; 3],
    }
    let blobs: Vec<Blob> = (0..3)
        .map(|_| Blob {
            cx: rng.random_range(0.25..0.75),
            cy: rng.random_range(0.25..0.75),
            vx: rng.random_range(-0.02..0.02),
            vy: rng.random_range(-0.02..0.02),
            r: rng.random_range(0.12..0.22),
            color: [
                rng.random_range(-0.3..0.5),
                rng.random_range(-0.3..0.5),
                rng.random_range(-0.3..0.5),
            ],
        })
        .collect();
    let (fx, fy) = (rng.random_range(4.0..7.0), rng.random_range(4.0..7.0));
    let weave: [f64; 3] = std::array::from_fn(|_| rng.random_range(0.03..0.08));
    let noise = Normal::new(0.0, 0.01).expect("valid sigma");
    RealTensor::from_fn(&[h, w, 3, frames], |i| {
        let (y, x, c, f) = (i[0] as f64 / h as f64, i[1] as f64 / w as f64, i[2], i[3] as f64);
        let tau = std::f64::consts::TAU;
        let mut v = base[c] + tilt[c].0 * (y - 0.5) + tilt[c].1 * (x - 0.5);
        v += weave[c] * (tau * fx * x).sin() * (tau * fy * y).cos();
        v += noise.sample(&mut rng);
        for b in &blobs {
            let dx = x - (b.cx + b.vx * f);
            let dy = y - (b.cy + b.vy * f);
            v += b.color[c] * (-(dx * dx + dy * dy) / (2.0 * b.r * b.r)).exp();
        }
        v.clamp(0.0, 1.0)
    })
}

#[cfg(feature = "images")]
fn is_image(path: &Path) -> bool {
    matches!(
        path.extension()
            .and_then(|e| e.to_str())
            .map(|e| e.to_ascii_lowercase())
            .as_deref(),
        Some("png" | "jpg" | "jpeg" | "bmp" | "tif" | "tiff" | "gif")
    )
}

/// Decodes every image in `dir` (sorted by file name) into an
/// `(H, W, 3, N)` tensor. All images must share one size.
#[cfg(feature = "images")]
pub fn ingest_images(dir: &Path, shuffle_seed: Option<u64>) -> Result<ImageStack> {
    let mut files: Vec<PathBuf> = std::fs::read_dir(dir)?
        .map(|e| e.map(|e| e.path()))
        .collect::<std::io::Result<_>>()?;
    files.retain(|p| p.is_file() && is_image(p));
    files.sort();
    if files.is_empty() {
        return Err(Error::InvalidArgument(format!("no images found in {}", dir.display())));
    }
    let mut frames = Vec::with_capacity(files.len());
    for f in &files {
        let img = image::open(f)?.to_rgb8();
        if let Some(first) = frames.first() {
            let first: &image::RgbImage = first;
            if first.dimensions() != img.dimensions() {
                return Err(Error::DimensionMismatch(format!(
                    "{} is {:?}, expected {:?}",
                    f.display(),
                    img.dimensions(),
                    first.dimensions()
                )));
            }
        }
        frames.push(img);
    }
    let (w, h) = frames[0].dimensions();
    let tensor = RealTensor::from_fn(&[h as usize, w as usize, 3, frames.len()], |i| {
        frames[i[3]].get_pixel(i[1] as u32, i[0] as u32)[i[2]] as f64 / 255.0
    })?;
    let mut names: Vec<String> = files
        .iter()
        .map(|p| {
            p.file_name()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_default()
        })
        .collect();
    let tensor = match shuffle_seed {
        Some(seed) => {
            let (t, perm) = shuffle_frames(&tensor, seed)?;
            names = perm.iter().map(|&i| names[i].clone()).collect();
            t
        }
        None => tensor,
    };
    Ok(ImageStack { tensor, names })
}

/// Writes each frame as `{prefix}{index:03}.png`.
#[cfg(feature = "images")]
pub fn export_images(t: &RealTensor, dir: &Path, prefix: &str) -> Result<Vec<PathBuf>> {
    let (h, w, n) = check_stack(t)?;
    std::fs::create_dir_all(dir)?;
    (0..n)
        .map(|f| {
            let rgba = frame_rgba(t, f)?;
            let rgb: Vec<u8> = rgba.chunks_exact(4).flat_map(|p| [p[0], p[1], p[2]]).collect();
            let img = image::RgbImage::from_raw(w as u32, h as u32, rgb)
                .ok_or_else(|| Error::Format("frame buffer size".into()))?;
            let path = dir.join(format!("{prefix}{f:03}.png"));
            img.save(&path)?;
            Ok(path)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fixture_shape_and_range() {
        let t = image_fixture(16, 12, 4, 1).unwrap();
        assert_eq!(t.shape(), &[16, 12, 3, 4]);
        assert!(t.data().iter().all(|v| (0.0..=1.0).contains(v)));
        assert_eq!(t, image_fixture(16, 12, 4, 1).unwrap());
    }

    #[test]
    fn shuffle_preserves_frames() {
        let t = image_fixture(6, 5, 7, 2).unwrap();
        let (s, perm) = shuffle_frames(&t, 9).unwrap();
        let frame = |t: &RealTensor, f: usize| frame_rgba(t, f).unwrap();
        let mut a: Vec<_> = (0..7).map(|f| frame(&t, f)).collect();
        let mut b: Vec<_> = (0..7).map(|f| frame(&s, f)).collect();
        for (i, &p) in perm.iter().enumerate() {
            assert_eq!(b[i], a[p]);
        }
        a.sort();
        b.sort();
        assert_eq!(a, b);
    }

    #[cfg(feature = "images")]
    #[test]
    fn ingest_single_image() {
        let dir = tempfile::tempdir().unwrap();
        let img = image::RgbImage::from_raw(2, 2, vec![0, 10, 20, 30, 40, 50, 60, 70, 80, 90, 100, 255]).unwrap();
        img.save(dir.path().join("a.png")).unwrap();
        let stack = ingest_images(dir.path(), None).unwrap();
        assert_eq!(stack.tensor.shape(), &[2, 2, 3, 1]);
        assert_eq!(stack.tensor.get(&[0, 1, 2, 0]).unwrap(), 50.0 / 255.0);
        assert_eq!(stack.tensor.get(&[1, 1, 2, 0]).unwrap(), 1.0);
    }

    #[cfg(feature = "images")]
    #[test]
    fn export_ingest_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let t = image_fixture(8, 9, 3, 4).unwrap();
        export_images(&t, dir.path(), "frame_").unwrap();
        let back = ingest_images(dir.path(), None).unwrap();
        assert_eq!(back.names, vec!["frame_000.png", "frame_001.png", "frame_002.png"]);
        assert!(back.tensor.max_abs_diff(&t).unwrap() <= 0.5 / 255.0 + 1e-12);
    }

    #[cfg(feature = "images")]
    #[test]
    fn mixed_sizes_and_bad_files_fail() {
        let dir = tempfile::tempdir().unwrap();
        image::RgbImage::new(2, 2).save(dir.path().join("a.png")).unwrap();
        image::RgbImage::new(3, 2).save(dir.path().join("b.png")).unwrap();
        assert!(ingest_images(dir.path(), None).is_err());
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("x.png"), b"not a png").unwrap();
        assert!(ingest_images(dir.path(), None).is_err());
    }
}
