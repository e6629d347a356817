//! SVD-based helpers on nalgebra matrices. The factorization itself is
//! computed by faer.

use faer::Mat;
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::scalar::{Scalar, ScalarKind};
use crate::transforms::{unitarity_error, UNITARY_TOL};

/// Thin SVD `M = U diag(σ) Vᴴ` with `σ` nonincreasing.
#[derive(Clone, Debug)]
pub struct Svd<T: Scalar> {
    pub u: DMatrix<T>,
    pub singular_values: DVector<f64>,
    pub v_t: DMatrix<T>,
}

impl<T: Scalar> Svd<T> {
    pub fn rank(&self) -> usize {
        self.singular_values.len()
    }

    pub fn recompose(&self) -> DMatrix<T> {
        let mut us = self.u.clone();
        for (j, &s) in self.singular_values.iter().enumerate() {
            us.column_mut(j).scale_mut(s);
        }
        us * &self.v_t
    }
}

fn from_faer<T: Scalar>(
    m: &DMatrix<T>,
    u: faer::MatRef<'_, Complex64>,
    s: &[f64],
    v: faer::MatRef<'_, Complex64>,
) -> Svd<T> {
    let k = s.len();
    let back = |z: Complex64| T::from_complex_lossy(z).0;
    Svd {
        u: DMatrix::from_fn(m.nrows(), k, |i, j| back(u[(i, j)])),
        singular_values: DVector::from_column_slice(s),
        v_t: DMatrix::from_fn(k, m.ncols(), |i, j| back(v[(j, i)].conj())),
    }
}

/// Thin SVD with singular values sorted in nonincreasing order.
pub fn svd<T: Scalar>(m: &DMatrix<T>) -> Result<Svd<T>> {
    let (r, c) = m.shape();
    let k = r.min(c);
    if k == 0 {
        return Ok(Svd {
            u: DMatrix::zeros(r, 0),
            singular_values: DVector::zeros(0),
            v_t: DMatrix::zeros(0, c),
        });
    }
    if !m.iter().all(|z| z.to_complex().is_finite()) {
        return Err(Error::SvdFailed);
    }
    match T::KIND {
        ScalarKind::Real => {
            let a = Mat::<f64>::from_fn(r, c, |i, j| m[(i, j)].to_complex().re);
            let d = a.thin_svd().map_err(|_| Error::SvdFailed)?;
            let s: Vec<f64> = (0..k).map(|i| d.S().column_vector()[i]).collect();
            let u = Mat::<Complex64>::from_fn(r, k, |i, j| Complex64::new(d.U()[(i, j)], 0.0));
            let v = Mat::<Complex64>::from_fn(c, k, |i, j| Complex64::new(d.V()[(i, j)], 0.0));
            Ok(from_faer(m, u.as_ref(), &s, v.as_ref()))
        }
        ScalarKind::Complex => {
            let a = Mat::<Complex64>::from_fn(r, c, |i, j| m[(i, j)].to_complex());
            let d = a.thin_svd().map_err(|_| Error::SvdFailed)?;
            let s: Vec<f64> = (0..k).map(|i| d.S().column_vector()[i].re).collect();
            Ok(from_faer(m, d.U(), &s, d.V()))
        }
    }
}

pub fn singular_values<T: Scalar>(m: &DMatrix<T>) -> Result<DVector<f64>> {
    Ok(svd(m)?.singular_values)
}

/// Singular value thresholding: `U max(Σ − τ, 0) Vᴴ`.
pub fn svt<T: Scalar>(m: &DMatrix<T>, tau: f64) -> Result<DMatrix<T>> {
    if tau <= 0.0 {
        return Ok(m.clone());
    }
    let s = svd(m)?;
    let (u, v_t) = (&s.u, &s.v_t);
    let k = s.singular_values.iter().take_while(|&&x| x > tau).count();
    let mut out = DMatrix::zeros(m.nrows(), m.ncols());
    for i in 0..k {
        let w = T::from_real(s.singular_values[i] - tau);
        out += u.column(i) * v_t.row(i) * w;
    }
    Ok(out)
}

/// Best rank-`r` approximation (Eckart–Young).
pub fn truncate_rank<T: Scalar>(m: &DMatrix<T>, r: usize) -> Result<DMatrix<T>> {
    let s = svd(m)?;
    let (u, v_t) = (&s.u, &s.v_t);
    let mut out = DMatrix::zeros(m.nrows(), m.ncols());
    for i in 0..r.min(s.singular_values.len()) {
        out += u.column(i) * v_t.row(i) * T::from_real(s.singular_values[i]);
    }
    Ok(out)
}

/// Unitary polar factor `W Vᴴ` of a square matrix `G = W Σ Vᴴ`, i.e. the
/// unitary `Q` maximizing `Re tr(Qᴴ G)`.
pub fn polar_unitary<T: Scalar>(g: &DMatrix<T>) -> Result<DMatrix<T>> {
    let s = svd(g)?;
    let mut q = s.u * s.v_t;
    // one more polar step if backend rounding left visible drift
    if unitarity_error(&q) > UNITARY_TOL {
        let s = svd(&q)?;
        q = s.u * s.v_t;
    }
    Ok(q)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn svt_edge_cases() {
        let m = DMatrix::from_row_slice(2, 2, &[3.0, 1.0, 0.5, 2.0]);
        let top = singular_values(&m).unwrap()[0];
        assert_eq!(svt(&m, top + 1e-9).unwrap(), DMatrix::zeros(2, 2));
        assert_eq!(svt(&m, 0.0).unwrap(), m);
    }

    #[test]
    fn truncation_keeps_leading_values() {
        let m = DMatrix::from_row_slice(3, 3, &[4.0, 0.0, 0.0, 0.0, 2.0, 0.0, 0.0, 0.0, 1.0]);
        let t = truncate_rank(&m, 2).unwrap();
        assert!((t[(2, 2)]).abs() < 1e-12 && (t[(0, 0)] - 4.0).abs() < 1e-12);
        assert!((truncate_rank(&m, 3).unwrap() - &m).norm() < 1e-12);
    }

    #[test]
    fn rank_deficient_slice_reconstructs() {
        let m = DMatrix::from_row_slice(
            6,
            5,
            &[
                -0.34256719402216551,
                -0.14455822025408713,
                -0.07871135070739679,
                -0.27865198625054138,
                -0.34123746449946085,
                -0.53283243053912011,
                -0.68326504111415942,
                0.36951777732099889,
                -0.05418878071842703,
                -0.66863150646468528,
                0.12917545417017473,
                0.51589038847037527,
                -0.46544489009639389,
                -0.27660581288887182,
                0.26743236175179447,
                -0.38083261423244402,
                0.01750971107501054,
                -0.27875351261697034,
                -0.45720786620735965,
                -0.32575677458802721,
                0.56509272787032061,
                0.90886479161382638,
                -0.58959632977878884,
                -0.09493718499229695,
                0.76452066083508197,
                -0.32458788864812410,
                -0.68267884332325657,
                0.51104015186885565,
                0.18741325369075990,
                -0.48744738961879508,
            ],
        );
        let s = svd(&m).unwrap();
        assert!((s.recompose() - &m).norm() < 1e-12);
    }

    #[test]
    fn polar_of_spd_is_identity() {
        let g = DMatrix::from_row_slice(2, 2, &[2.0, 0.5, 0.5, 1.0]);
        let q = polar_unitary(&g).unwrap();
        assert!((q - DMatrix::<f64>::identity(2, 2)).norm() < 1e-12);
    }
}
