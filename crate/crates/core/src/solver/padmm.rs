use log::{debug, warn};
use nalgebra::DMatrix;

use super::config::{update_penalties, LearnableInit, Model, PenaltyScale, SolverConfig};
use super::diagnostics::{Diagnostics, IterationRecord, Status};
use super::mask::Mask;
use crate::error::{Error, Result};
use crate::linalg::polar_unitary;
use crate::norms::{self, slice_svt_any, soft_threshold_any, SlicePair};
use crate::scalar::Scalar;
use crate::tensor::Tensor;
use crate::transforms::{random_orthogonal, unitarity_error, ModeTransform, TransformFamily};

/// Factors whose unitarity error exceeds this are rejected by [`update_z`].
pub const STATE_UNITARY_TOL: f64 = 1e-8;

/// Imaginary residue (relative) tolerated when a real problem goes
/// through a complex transform.
pub const IMAG_REL_TOL: f64 = 1e-8;

/// Learnable factors paired with their modes, in ascending mode order.
pub type Factors<T> = Vec<(usize, DMatrix<T>)>;

#[derive(Clone, Debug)]
pub struct SolverState<T> {
    pub z: Tensor<T>,
    pub u: Factors<T>,
    pub e: Tensor<T>,
    pub y: Tensor<T>,
    pub mu: f64,
    pub eta: f64,
    pub t: usize,
}

impl<T: Scalar> SolverState<T> {
    /// `Z = Ψ(M) ×_n U_n`, `E = 0`, `Y = 0`.
    pub fn init(observed: &Tensor<T>, u: Factors<T>, mu: f64, eta: f64) -> Result<Self> {
        Ok(Self {
            z: apply_factors(observed, &u, false)?,
            u,
            e: Tensor::zeros(observed.shape())?,
            y: Tensor::zeros(observed.shape())?,
            mu,
            eta,
            t: 0,
        })
    }
}

/// Initial learnable factors for `fam`.
pub fn initial_factors<T: Scalar>(fam: &TransformFamily, shape: &[usize], init: LearnableInit) -> Result<Factors<T>> {
    fam.learnable_modes()
        .into_iter()
        .map(|k| {
            let n = shape[k];
            let u = match init {
                LearnableInit::Identity => DMatrix::identity(n, n),
                LearnableInit::Random(seed) => random_orthogonal(n, seed.wrapping_add(k as u64))?.map(T::from_real),
            };
            Ok((k, u))
        })
        .collect()
}

/// `A ×_n U_n` over all factors, or `A ×_n U_nᴴ` when `adjoint`.
pub fn apply_factors<T: Scalar>(a: &Tensor<T>, factors: &[(usize, DMatrix<T>)], adjoint: bool) -> Result<Tensor<T>> {
    let mut out = a.clone();
    for (k, u) in factors {
        out = if adjoint {
            out.mode_product(&u.adjoint(), *k)?
        } else {
            out.mode_product(u, *k)?
        };
    }
    Ok(out)
}

/// `X = Z ×_n U_nᴴ`.
pub fn reconstruct<T: Scalar>(z: &Tensor<T>, factors: &[(usize, DMatrix<T>)]) -> Result<Tensor<T>> {
    apply_factors(z, factors, true)
}

/// `P̂ = Ψ(M) − E + Y/μ`.
pub fn p_hat<T: Scalar>(observed: &Tensor<T>, e: &Tensor<T>, y: &Tensor<T>, mu: f64) -> Result<Tensor<T>> {
    observed.sub(e)?.add(&y.scale(1.0 / mu))
}

/// Result of the Z step.
#[derive(Clone, Debug)]
pub struct ZStep<T> {
    pub z: Tensor<T>,
    /// Regularizer value at the new `Z`.
    pub objective: f64,
    /// Largest discarded imaginary part relative to `‖Z‖_∞`.
    pub imag_residue: f64,
}

/// Prox step on `Z` with threshold `1/(μ+η)`.
pub fn update_z<T: Scalar>(
    state: &SolverState<T>,
    fam: &TransformFamily,
    model: Model,
    p_hat: &Tensor<T>,
) -> Result<ZStep<T>> {
    for (k, u) in &state.u {
        let deviation = unitarity_error(u);
        if deviation > STATE_UNITARY_TOL {
            return Err(Error::NotUnitary { mode: *k, deviation });
        }
    }
    let (mu, eta) = (state.mu, state.eta);
    let pu = apply_factors(p_hat, &state.u, false)?;
    let avg = pu.scale(mu).add(&state.z.scale(eta))?.scale(1.0 / (mu + eta));
    let tau = 1.0 / (mu + eta);
    let t = fam.transform(&avg)?;
    let (shrunk, objective) = match model {
        Model::TcU1 => {
            let s = soft_threshold_any(&t, tau);
            let l1 = s.norms().l1;
            (s, l1)
        }
        Model::TcSl(pair) => slice_svt_any(&t, pair, tau)?,
    };
    let (z, imag) = fam.untransform::<T>(&shrunk)?;
    let scale = z.max_modulus();
    let imag_residue = if imag == 0.0 {
        0.0
    } else {
        imag / scale.max(f64::MIN_POSITIVE)
    };
    Ok(ZStep {
        z,
        objective,
        imag_residue,
    })
}

/// `μ/2 ‖B ×_n U − A‖² + η/2 ‖U_prev − U‖²`.
#[allow(clippy::too_many_arguments)]
pub fn procrustes_objective<T: Scalar>(
    a: &Tensor<T>,
    b: &Tensor<T>,
    u: &DMatrix<T>,
    u_prev: &DMatrix<T>,
    mode: usize,
    mu: f64,
    eta: f64,
) -> Result<f64> {
    let fit = b.mode_product(u, mode)?.sub(a)?.fro_norm();
    let reg = (u_prev - u).norm();
    Ok(0.5 * mu * fit * fit + 0.5 * eta * reg * reg)
}

/// Result of one factor update.
#[derive(Clone, Debug)]
pub struct UStep<T> {
    pub u: DMatrix<T>,
    /// Procrustes objective at the previous factor.
    pub before: f64,
    /// Procrustes objective at the returned factor.
    pub after: f64,
}

/// Updates factor `i` of `current`. `updated` holds the new values of the
/// factors before `i`; later factors still use their current values.
pub fn update_u<T: Scalar>(
    z_next: &Tensor<T>,
    p_hat: &Tensor<T>,
    current: &[(usize, DMatrix<T>)],
    updated: &[DMatrix<T>],
    i: usize,
    mu: f64,
    eta: f64,
) -> Result<UStep<T>> {
    if i >= current.len() || updated.len() != i {
        return Err(Error::InvalidArgument(format!(
            "factor index {i} with {} updated of {}",
            updated.len(),
            current.len()
        )));
    }
    let (mode, u_t) = (current[i].0, &current[i].1);
    let a = apply_factors(z_next, &current[i + 1..], true)?;
    let earlier: Vec<_> = current[..i]
        .iter()
        .zip(updated)
        .map(|((k, _), u)| (*k, u.clone()))
        .collect();
    let b = apply_factors(p_hat, &earlier, false)?;
    let g = a.mode_gram(&b, mode)? * T::from_real(mu) + u_t * T::from_real(eta);
    let u = polar_unitary(&g)?;
    let before = procrustes_objective(&a, &b, u_t, u_t, mode, mu, eta)?;
    let after = procrustes_objective(&a, &b, &u, u_t, mode, mu, eta)?;
    Ok(UStep { u, before, after })
}

/// `E⁺ = Ψ_{Iᶜ}((μ(Ψ(M) − X⁺) + Y + ηE) / (μ+η))`.
pub fn update_e<T: Scalar>(
    observed: &Tensor<T>,
    mask: &Mask,
    x_next: &Tensor<T>,
    state: &SolverState<T>,
) -> Result<Tensor<T>> {
    let (mu, eta) = (state.mu, state.eta);
    let num = observed
        .sub(x_next)?
        .scale(mu)
        .add(&state.y)?
        .add(&state.e.scale(eta))?;
    mask.project_complement(&num.scale(1.0 / (mu + eta)))
}

/// `Y⁺ = Y + μ(Ψ(M) − X⁺ − E⁺)`.
pub fn update_y<T: Scalar>(
    observed: &Tensor<T>,
    x_next: &Tensor<T>,
    e_next: &Tensor<T>,
    y: &Tensor<T>,
    mu: f64,
) -> Result<Tensor<T>> {
    y.add(&observed.sub(x_next)?.sub(e_next)?.scale(mu))
}

#[derive(Clone, Debug)]
pub struct SolveOutput<T> {
    pub x: Tensor<T>,
    pub z: Tensor<T>,
    pub factors: Factors<T>,
    pub e: Tensor<T>,
    pub y: Tensor<T>,
    pub diagnostics: Diagnostics,
}

fn check_problem<T: Scalar>(observed: &Tensor<T>, mask: &Mask, fam: &TransformFamily, model: Model) -> Result<()> {
    if mask.shape() != observed.shape() {
        return Err(Error::DimensionMismatch(format!(
            "mask shape {:?} vs data shape {:?}",
            mask.shape(),
            observed.shape()
        )));
    }
    if mask.is_empty() {
        return Err(Error::InvalidArgument("mask has no observed entries".into()));
    }
    fam.check_shape(observed.shape())?;
    if let Model::TcSl(pair) = model {
        SlicePair::new(pair.k1, pair.k2, observed.order())?;
        for k in [pair.k1, pair.k2] {
            if matches!(fam.mode(k), Some(ModeTransform::Learnable)) {
                return Err(Error::Config(format!("slice mode {} cannot be learnable", k + 1)));
            }
        }
    }
    Ok(())
}

fn dual_norm<T: Scalar>(z0: &Tensor<T>, fam: &TransformFamily, model: Model) -> Result<f64> {
    match model {
        Model::TcU1 => norms::uinf_norm(z0, fam),
        Model::TcSl(pair) => norms::slice_spectral_norm(z0, fam, pair),
    }
}

/// Runs PADMM on `Ψ(M)` until the stopping test passes or `max_iter`.
///
/// Reaching `max_iter` is reported through `diagnostics.status`, not as an
/// error.
pub fn solve<T: Scalar>(
    observed: &Tensor<T>,
    mask: &Mask,
    fam: &TransformFamily,
    config: &SolverConfig,
) -> Result<SolveOutput<T>> {
    solve_with(observed, mask, fam, config, |_| {})
}

/// [`solve`] with a callback invoked after every iteration.
pub fn solve_with<T: Scalar>(
    observed: &Tensor<T>,
    mask: &Mask,
    fam: &TransformFamily,
    config: &SolverConfig,
    mut on_iter: impl FnMut(&IterationRecord),
) -> Result<SolveOutput<T>> {
    config.validate()?;
    let model = config.model;
    check_problem(observed, mask, fam, model)?;
    let m = mask.project(observed)?;
    let factors = initial_factors::<T>(fam, m.shape(), config.init)?;

    let z0 = apply_factors(&m, &factors, false)?;
    let scale = match config.penalty_scale {
        PenaltyScale::Absolute => 1.0,
        PenaltyScale::DualNorm => {
            let s = dual_norm(&z0, fam, model)?;
            if s.is_finite() && s > 0.0 {
                s
            } else {
                1.0
            }
        }
    };
    let (mu_bar, eta_bar) = (config.mu_bar / scale, config.eta_bar / scale);
    let mut state = SolverState::init(&m, factors, config.mu0 / scale, config.eta0 / scale)?;

    let m_fro = m.fro_norm().max(f64::MIN_POSITIVE);
    let m_inf = m.max_modulus();
    let eps_abs = if m_inf > 0.0 { config.eps * m_inf } else { config.eps };

    let mut x = m.clone();
    let mut diag = Diagnostics {
        status: Status::MaxIter,
        iterations: 0,
        records: Vec::new(),
        penalty_scale: scale,
        eta_capped_early: false,
        max_unitarity_error: state.u.iter().map(|(_, u)| unitarity_error(u)).fold(0.0, f64::max),
        e_support_violations: 0,
        max_imag_residue: 0.0,
        max_y_norm: 0.0,
    };

    for t in 1..=config.max_iter {
        let ph = p_hat(&m, &state.e, &state.y, state.mu)?;
        let zs = update_z(&state, fam, model, &ph)?;
        diag.max_imag_residue = diag.max_imag_residue.max(zs.imag_residue);

        let mut new_u: Vec<DMatrix<T>> = Vec::with_capacity(state.u.len());
        let mut procrustes_increase = f64::NEG_INFINITY;
        for i in 0..state.u.len() {
            let step = update_u(&zs.z, &ph, &state.u, &new_u, i, state.mu, state.eta)?;
            procrustes_increase = procrustes_increase.max(step.after - step.before);
            new_u.push(step.u);
        }
        if new_u.is_empty() {
            procrustes_increase = 0.0;
        }
        let new_factors: Factors<T> = state.u.iter().map(|(k, _)| *k).zip(new_u).collect();

        let x_next = reconstruct(&zs.z, &new_factors)?;
        let e_next = update_e(&m, mask, &x_next, &state)?;
        let y_next = update_y(&m, &x_next, &e_next, &state.y, state.mu)?;

        let residual = m.sub(&x_next)?.sub(&e_next)?.fro_norm();
        let rel_residual = residual / m_fro;
        let z_diff = zs.z.sub(&state.z)?;
        let e_diff = e_next.sub(&state.e)?;
        let dz = z_diff.max_modulus();
        let dx = x_next.max_abs_diff(&x)?;
        let mut du_max: f64 = 0.0;
        let mut du_sq = 0.0;
        for ((_, old), (_, new)) in state.u.iter().zip(&new_factors) {
            let d = new - old;
            du_max = d.iter().map(|v| v.modulus()).fold(du_max, f64::max);
            du_sq += d.norm_squared();
        }
        let delta_sq = z_diff.fro_norm().powi(2) + du_sq + e_diff.fro_norm().powi(2);
        for (v, &obs) in e_next.data().iter().zip(mask.as_slice()) {
            if obs && *v != T::zero() {
                diag.e_support_violations += 1;
            }
        }
        for (_, u) in &new_factors {
            diag.max_unitarity_error = diag.max_unitarity_error.max(unitarity_error(u));
        }
        let y_norm = y_next.fro_norm();
        diag.max_y_norm = diag.max_y_norm.max(y_norm);

        let rec = IterationRecord {
            t,
            objective: zs.objective,
            residual,
            rel_residual,
            mu: state.mu,
            eta: state.eta,
            dz,
            dx,
            du_max,
            y_norm,
            weighted_delta: state.eta * delta_sq,
            procrustes_increase,
        };
        on_iter(&rec);
        debug!(
            "iter {t}: obj {:.6e} rel_res {:.3e} dz {:.3e}",
            rec.objective, rel_residual, dz
        );
        diag.records.push(rec);
        diag.iterations = t;

        let converged = dz < eps_abs && dx < eps_abs && du_max < config.eps && rel_residual <= config.feas_tol;
        state = SolverState {
            z: zs.z,
            u: new_factors,
            e: e_next,
            y: y_next,
            mu: state.mu,
            eta: state.eta,
            t,
        };
        x = x_next;

        if !y_norm.is_finite() || y_norm > config.y_bound {
            warn!("multiplier norm {y_norm:.3e} exceeded bound at iteration {t}");
            diag.status = Status::Diverged;
            break;
        }
        if converged {
            diag.status = Status::Converged;
            break;
        }
        let (mu, eta) = update_penalties(state.mu, state.eta, config.rho_mu, config.rho_eta, mu_bar, eta_bar);
        if eta >= eta_bar && !diag.eta_capped_early {
            warn!("eta reached its cap at iteration {t} before convergence");
            diag.eta_capped_early = true;
        }
        state.mu = mu;
        state.eta = eta;
    }

    if diag.max_imag_residue > IMAG_REL_TOL {
        return Err(Error::ComplexResidue(diag.max_imag_residue));
    }
    Ok(SolveOutput {
        x,
        z: state.z,
        factors: state.u,
        e: state.e,
        y: state.y,
        diagnostics: diag,
    })
}
