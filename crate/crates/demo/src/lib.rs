//! Browser bindings for the `www/` page: image inpainting, a synthetic
//! recovery run with its residual curve, and a transform-domain shrinkage
//! explorer.

use wasm_bindgen::prelude::*;

use tu1_core::decomposition::tdst_sparsity;
use tu1_core::harness::images::{frame_rgba, image_fixture};
use tu1_core::harness::{default_family, gen_mask, gen_synthetic, psnr, relative_error, SyntheticSpec};
use tu1_core::norms::soft_threshold;
use tu1_core::solver::{self, Model, SolverConfig, Status};
use tu1_core::{AnyTensor, FamilySpec, RealTensor, Result, TransformFamily, TransformKind};

fn js(e: tu1_core::Error) -> JsError {
    JsError::new(&e.to_string())
}

#[wasm_bindgen]
pub struct Inpainting {
    truth: RealTensor,
    observed: RealTensor,
    recovered: RealTensor,
    psnr: f64,
    iterations: usize,
    converged: bool,
}

impl Inpainting {
    pub fn run(size: usize, frames: usize, p: f64, seed: u32, max_iter: usize) -> Result<Self> {
        let truth = image_fixture(size, size, frames, seed as u64)?;
        let mask = gen_mask(truth.shape(), p, seed as u64 + 1)?;
        let observed = mask.project(&truth)?;
        let fam = default_family(Model::TcU1, 4, false).build(truth.shape())?;
        let cfg = SolverConfig {
            max_iter,
            ..SolverConfig::default()
        };
        let out = solver::solve(&observed, &mask, &fam, &cfg)?;
        let recovered = out.x.map(|v| v.clamp(0.0, 1.0));
        Ok(Self {
            psnr: psnr(&truth, &recovered, 1.0)?,
            iterations: out.diagnostics.iterations,
            converged: out.diagnostics.status == Status::Converged,
            truth,
            observed,
            recovered,
        })
    }
}

#[wasm_bindgen]
impl Inpainting {
    /// Completes a `size x size x 3 x frames` synthetic image stack with a
    /// fraction `p` of its entries observed.
    #[wasm_bindgen(constructor)]
    pub fn new(size: usize, frames: usize, p: f64, seed: u32, max_iter: usize) -> Result<Inpainting, JsError> {
        Self::run(size, frames, p, seed, max_iter).map_err(js)
    }

    #[wasm_bindgen(getter)]
    pub fn psnr(&self) -> f64 {
        self.psnr
    }

    #[wasm_bindgen(getter)]
    pub fn iterations(&self) -> usize {
        self.iterations
    }

    #[wasm_bindgen(getter)]
    pub fn converged(&self) -> bool {
        self.converged
    }

    /// RGBA bytes of one frame of `"truth"`, `"observed"` or `"recovered"`.
    pub fn frame(&self, which: &str, index: usize) -> Result<Vec<u8>, JsError> {
        let t = match which {
            "truth" => &self.truth,
            "observed" => &self.observed,
            "recovered" => &self.recovered,
            _ => return Err(JsError::new(&format!("unknown image '{which}'"))),
        };
        frame_rgba(t, index).map_err(js)
    }
}

#[wasm_bindgen]
pub struct RecoveryRun {
    re: f64,
    converged: bool,
    rel_residuals: Vec<f64>,
    steps: Vec<f64>,
}

impl RecoveryRun {
    pub fn run(n: usize, rank: usize, p: f64, seed: u32, max_iter: usize) -> Result<Self> {
        let shape = [n, n, n];
        let m = gen_synthetic(&SyntheticSpec::new(&shape, rank, seed as u64))?;
        let mask = gen_mask(&shape, p, seed as u64 + 1)?;
        let fam = default_family(Model::TcU1, 3, true).build(&shape)?;
        let cfg = SolverConfig {
            max_iter,
            ..SolverConfig::default()
        };
        let (mut rel_residuals, mut steps) = (Vec::new(), Vec::new());
        let out = solver::solve_with(&mask.project(&m)?, &mask, &fam, &cfg, |rec| {
            rel_residuals.push(rec.rel_residual);
            steps.push(rec.dz);
        })?;
        Ok(Self {
            re: relative_error(&m, &out.x)?,
            converged: out.diagnostics.status == Status::Converged,
            rel_residuals,
            steps,
        })
    }
}

#[wasm_bindgen]
impl RecoveryRun {
    /// Recovers a rank-`rank` `n x n x n` tensor from a fraction `p` of
    /// its entries, recording the solver trace.
    #[wasm_bindgen(constructor)]
    pub fn new(n: usize, rank: usize, p: f64, seed: u32, max_iter: usize) -> Result<RecoveryRun, JsError> {
        Self::run(n, rank, p, seed, max_iter).map_err(js)
    }

    #[wasm_bindgen(getter)]
    pub fn re(&self) -> f64 {
        self.re
    }

    #[wasm_bindgen(getter)]
    pub fn converged(&self) -> bool {
        self.converged
    }

    /// Relative feasibility residual per iteration.
    #[wasm_bindgen(getter, js_name = relResiduals)]
    pub fn rel_residuals(&self) -> Vec<f64> {
        self.rel_residuals.clone()
    }

    /// Largest change of the core tensor per iteration.
    #[wasm_bindgen(getter)]
    pub fn steps(&self) -> Vec<f64> {
        self.steps.clone()
    }
}

/// Soft thresholding of one image in a chosen transform domain.
#[wasm_bindgen]
pub struct Shrinkage {
    image: RealTensor,
}

fn spatial_family(kind: &str, shape: &[usize]) -> Result<TransformFamily> {
    let k: TransformKind = kind.parse()?;
    FamilySpec::new()
        .with(1, k)
        .with(2, k)
        .with(3, TransformKind::Identity)
        .with(4, TransformKind::Identity)
        .build(shape)
}

impl Shrinkage {
    pub fn build(size: usize, seed: u32) -> Result<Self> {
        Ok(Self {
            image: image_fixture(size, size, 1, seed as u64)?,
        })
    }

    /// `(rgba, kept_fraction, psnr)` after thresholding at `tau`.
    pub fn shrink(&self, kind: &str, tau: f64) -> Result<(Vec<u8>, f64, f64)> {
        let fam = spatial_family(kind, self.image.shape())?;
        let t = fam.transform(&self.image)?;
        let (thresholded, kept) = match t {
            AnyTensor::Real(t) => {
                let s = soft_threshold(&t, tau);
                let kept = s.norms().l0;
                (AnyTensor::Real(s), kept)
            }
            AnyTensor::Complex(t) => {
                let s = soft_threshold(&t, tau);
                let kept = s.norms().l0;
                (AnyTensor::Complex(s), kept)
            }
        };
        let (back, _) = fam.untransform::<f64>(&thresholded)?;
        let back = back.map(|v| v.clamp(0.0, 1.0));
        Ok((
            frame_rgba(&back, 0)?,
            kept as f64 / back.len() as f64,
            psnr(&self.image, &back, 1.0)?,
        ))
    }

    /// Energy fraction captured by the largest coefficients, at the
    /// kept fractions of [`tu1_core::decomposition::ENERGY_FRACTIONS`].
    pub fn profile(&self, kind: &str) -> Result<Vec<f64>> {
        let fam = spatial_family(kind, self.image.shape())?;
        Ok(tdst_sparsity(&self.image, &fam)?
            .energy_profile
            .iter()
            .map(|p| p.energy_fraction)
            .collect())
    }
}

#[wasm_bindgen]
pub struct ShrinkView {
    rgba: Vec<u8>,
    kept: f64,
    psnr: f64,
}

#[wasm_bindgen]
impl ShrinkView {
    #[wasm_bindgen(getter)]
    pub fn rgba(&self) -> Vec<u8> {
        self.rgba.clone()
    }

    /// Fraction of coefficients left nonzero.
    #[wasm_bindgen(getter)]
    pub fn kept(&self) -> f64 {
        self.kept
    }

    #[wasm_bindgen(getter)]
    pub fn psnr(&self) -> f64 {
        self.psnr
    }
}

#[wasm_bindgen]
impl Shrinkage {
    #[wasm_bindgen(constructor)]
    pub fn new(size: usize, seed: u32) -> Result<Shrinkage, JsError> {
        Self::build(size, seed).map_err(js)
    }

    /// `kind` is `identity`, `dcm` or `dfm`, applied to rows and columns.
    pub fn apply(&self, kind: &str, tau: f64) -> Result<ShrinkView, JsError> {
        let (rgba, kept, psnr) = self.shrink(kind, tau).map_err(js)?;
        Ok(ShrinkView { rgba, kept, psnr })
    }

    #[wasm_bindgen(js_name = energyProfile)]
    pub fn energy_profile(&self, kind: &str) -> Result<Vec<f64>, JsError> {
        self.profile(kind).map_err(js)
    }

    #[wasm_bindgen(js_name = keptFractions)]
    pub fn kept_fractions() -> Vec<f64> {
        tu1_core::decomposition::ENERGY_FRACTIONS.to_vec()
    }
}
