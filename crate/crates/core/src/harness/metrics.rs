use serde::{Serialize, Serializer};

use crate::error::{Error, Result};
use crate::tensor::RealTensor;

/// `‖M − M̂‖_F / ‖M‖_F`. A zero reference gives 0 for a zero estimate
/// and +∞ otherwise.
pub fn relative_error(m: &RealTensor, m_hat: &RealTensor) -> Result<f64> {
    let diff = m.sub(m_hat)?.fro_norm();
    let norm = m.fro_norm();
    Ok(if norm > 0.0 {
        diff / norm
    } else if diff == 0.0 {
        0.0
    } else {
        f64::INFINITY
    })
}

/// `10 log10(peak² / MSE)`; identical inputs give `f64::INFINITY`.
pub fn psnr(reference: &RealTensor, estimate: &RealTensor, peak: f64) -> Result<f64> {
    if !(peak > 0.0) {
        return Err(Error::InvalidArgument(format!("peak {peak} must be positive")));
    }
    let d = reference.sub(estimate)?;
    let mse = d.data().iter().map(|x| x * x).sum::<f64>() / d.len() as f64;
    Ok(psnr_from_mse(mse, peak))
}

pub fn psnr_from_mse(mse: f64, peak: f64) -> f64 {
    if mse == 0.0 {
        f64::INFINITY
    } else {
        10.0 * (peak * peak / mse).log10()
    }
}

/// Writes non-finite values as the strings `"inf"`, `"-inf"`, `"nan"`.
pub fn serialize_f64_sentinel<S: Serializer>(v: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
    if v.is_finite() {
        s.serialize_f64(*v)
    } else if v.is_nan() {
        s.serialize_str("nan")
    } else if *v > 0.0 {
        s.serialize_str("inf")
    } else {
        s.serialize_str("-inf")
    }
}

pub fn serialize_opt_f64_sentinel<S: Serializer>(v: &Option<f64>, s: S) -> std::result::Result<S::Ok, S::Error> {
    match v {
        Some(v) => serialize_f64_sentinel(v, s),
        None => s.serialize_none(),
    }
}

/// Summary of one completion run, written as `metrics.json`.
#[derive(Clone, Debug, Serialize)]
pub struct CompletionMetrics {
    pub model: String,
    pub transforms: String,
    pub shape: Vec<usize>,
    pub sampling_rate: f64,
    pub observed: usize,
    pub seed: u64,
    /// Relative error against the ground truth, when one is known.
    #[serde(serialize_with = "serialize_opt_f64_sentinel")]
    pub re: Option<f64>,
    /// PSNR in dB at peak 1.0, for image-valued ground truth.
    #[serde(serialize_with = "serialize_opt_f64_sentinel")]
    pub psnr_db: Option<f64>,
    pub iterations: usize,
    pub status: crate::solver::Status,
    pub final_rel_residual: f64,
    pub penalty_scale: f64,
    pub eta_capped_early: bool,
    pub max_unitarity_error: f64,
    pub wall_time_s: f64,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[derive(Serialize)]
    struct Probe {
        #[serde(serialize_with = "serialize_f64_sentinel")]
        v: f64,
    }

    fn t(v: &[f64]) -> RealTensor {
        RealTensor::new(vec![v.len()], v.to_vec()).unwrap()
    }

    #[test]
    fn relative_error_cases() {
        let m = t(&[1.0, -2.0, 3.0]);
        assert_eq!(relative_error(&m, &m).unwrap(), 0.0);
        assert_eq!(relative_error(&m, &t(&[0.0; 3])).unwrap(), 1.0);
        assert!((relative_error(&m, &m.scale(2.0)).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn psnr_cases() {
        let r = t(&[0.0, 0.0]);
        assert_eq!(psnr(&r, &t(&[1.0, -1.0]), 1.0).unwrap(), 0.0);
        assert_eq!(psnr(&r, &r, 1.0).unwrap(), f64::INFINITY);
        let x = psnr_from_mse(255.0, 255.0);
        assert!((x - 24.065_401_804_339_55).abs() < 1e-9, "{x}");
    }

    #[test]
    fn sentinel_serialization() {
        let s = serde_json::to_string(&Probe { v: f64::INFINITY }).unwrap();
        assert_eq!(s, r#"{"v":"inf"}"#);
        let s = serde_json::to_string(&Probe { v: 1.5 }).unwrap();
        assert_eq!(s, r#"{"v":1.5}"#);
    }
}
