//! Supervised losses and representation distances, with their local
//! gradients.
//!
//! Everything here operates on plain logit/activation slices; the network
//! itself stays out of the picture so these functions double as independent
//! oracles in tests.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Supervised target for one example.
#[derive(Debug, Clone, PartialEq)]
pub enum Target {
    /// Single-label classification: softmax cross-entropy against a class id.
    Class(usize),
    /// Regression-style target: squared l-2 distance against a vector.
    Vector(Vec<f64>),
    /// Multi-label classification: independent one-vs-rest logistic heads,
    /// one sigmoid cross-entropy term per class.
    MultiHot(Vec<bool>),
}

/// Distance between two representations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DistanceMetric {
    /// `sum_i |a_i - b_i|`
    L1,
    /// `sum_i (a_i - b_i)^2`
    SquaredL2,
    /// `CE(softmax(b) as target, softmax(a) as prediction)`. Asymmetric;
    /// only meaningful on output logits.
    CrossEntropy,
    /// Average of the cross-entropy distance in both directions.
    SymmetricCrossEntropy,
}

impl DistanceMetric {
    /// Cross-entropy variants compare label distributions, so they require
    /// the representation to be the output logits.
    pub fn requires_output_repr(self) -> bool {
        matches!(self, DistanceMetric::CrossEntropy | DistanceMetric::SymmetricCrossEntropy)
    }
}

impl std::str::FromStr for DistanceMetric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "l1" => Ok(DistanceMetric::L1),
            "l2" | "squared-l2" => Ok(DistanceMetric::SquaredL2),
            "cross-entropy" => Ok(DistanceMetric::CrossEntropy),
            "symmetric-cross-entropy" => Ok(DistanceMetric::SymmetricCrossEntropy),
            other => Err(Error::InvalidConfig(format!("unknown distance metric {other:?}"))),
        }
    }
}

/// `log(sum_i exp(x_i))` computed with the max subtracted first.
pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let max = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max;
    }
    max + xs.iter().map(|&x| (x - max).exp()).sum::<f64>().ln()
}

/// Numerically stable softmax.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let lse = log_sum_exp(logits);
    logits.iter().map(|&x| (x - lse).exp()).collect()
}

/// Supervised loss `c(g, target)`.
pub fn supervised_loss(logits: &[f64], target: &Target) -> Result<f64> {
    Ok(supervised_loss_grad(logits, target)?.0)
}

/// Supervised loss plus its gradient with respect to the logits.
pub fn supervised_loss_grad(logits: &[f64], target: &Target) -> Result<(f64, Vec<f64>)> {
    match target {
        Target::Class(y) => {
            if *y >= logits.len() {
                return Err(Error::InvalidLabel { label: *y, n_classes: logits.len() });
            }
            let lse = log_sum_exp(logits);
            let value = lse - logits[*y];
            let mut grad = softmax(logits);
            grad[*y] -= 1.0;
            Ok((value, grad))
        }
        Target::Vector(y) => {
            if y.len() != logits.len() {
                return Err(Error::Shape(format!(
                    "target length {} does not match logit length {}",
                    y.len(),
                    logits.len()
                )));
            }
            let mut value = 0.0;
            let mut grad = vec![0.0; logits.len()];
            for i in 0..logits.len() {
                let diff = logits[i] - y[i];
                value += diff * diff;
                grad[i] = 2.0 * diff;
            }
            Ok((value, grad))
        }
        Target::MultiHot(y) => {
            if y.len() != logits.len() {
                return Err(Error::Shape(format!(
                    "multi-hot target length {} does not match logit length {}",
                    y.len(),
                    logits.len()
                )));
            }
            // Stable sigmoid cross-entropy: max(g,0) - g*t + ln(1 + e^{-|g|}).
            let mut value = 0.0;
            let mut grad = vec![0.0; logits.len()];
            for i in 0..logits.len() {
                let g = logits[i];
                let t = if y[i] { 1.0 } else { 0.0 };
                value += g.max(0.0) - g * t + (-g.abs()).exp().ln_1p();
                let sigma = 1.0 / (1.0 + (-g).exp());
                grad[i] = sigma - t;
            }
            Ok((value, grad))
        }
    }
}

/// Distance `d(h_u, h_v)` between two representations.
pub fn hidden_distance(h_u: &[f64], h_v: &[f64], metric: DistanceMetric) -> Result<f64> {
    Ok(hidden_distance_grad(h_u, h_v, metric)?.0)
}

/// Distance plus gradients with respect to both endpoints.
pub fn hidden_distance_grad(
    h_u: &[f64],
    h_v: &[f64],
    metric: DistanceMetric,
) -> Result<(f64, Vec<f64>, Vec<f64>)> {
    if h_u.len() != h_v.len() {
        return Err(Error::Shape(format!(
            "representation lengths differ: {} vs {}",
            h_u.len(),
            h_v.len()
        )));
    }
    match metric {
        DistanceMetric::L1 => {
            let mut value = 0.0;
            let mut gu = vec![0.0; h_u.len()];
            let mut gv = vec![0.0; h_v.len()];
            for i in 0..h_u.len() {
                let diff = h_u[i] - h_v[i];
                value += diff.abs();
                let s = if diff > 0.0 {
                    1.0
                } else if diff < 0.0 {
                    -1.0
                } else {
                    0.0
                };
                gu[i] = s;
                gv[i] = -s;
            }
            Ok((value, gu, gv))
        }
        DistanceMetric::SquaredL2 => {
            let mut value = 0.0;
            let mut gu = vec![0.0; h_u.len()];
            let mut gv = vec![0.0; h_v.len()];
            for i in 0..h_u.len() {
                let diff = h_u[i] - h_v[i];
                value += diff * diff;
                gu[i] = 2.0 * diff;
                gv[i] = -2.0 * diff;
            }
            Ok((value, gu, gv))
        }
        DistanceMetric::CrossEntropy => Ok(cross_entropy_distance(h_u, h_v)),
        DistanceMetric::SymmetricCrossEntropy => {
            let (d_uv, gu1, gv1) = cross_entropy_distance(h_u, h_v);
            let (d_vu, gv2, gu2) = cross_entropy_distance(h_v, h_u);
            let value = 0.5 * (d_uv + d_vu);
            let gu = gu1.iter().zip(&gu2).map(|(a, b)| 0.5 * (a + b)).collect();
            let gv = gv1.iter().zip(&gv2).map(|(a, b)| 0.5 * (a + b)).collect();
            Ok((value, gu, gv))
        }
    }
}

/// `CE(softmax(target_logits), softmax(pred_logits))`, i.e. the second
/// argument of the public API is the target side.
///
/// Returns `(value, d/d pred_logits, d/d target_logits)`.
fn cross_entropy_distance(pred_logits: &[f64], target_logits: &[f64]) -> (f64, Vec<f64>, Vec<f64>) {
    let p_pred = softmax(pred_logits);
    let p_tgt = softmax(target_logits);
    let lse_pred = log_sum_exp(pred_logits);
    // log p_pred[i] without re-exponentiating.
    let log_pred: Vec<f64> = pred_logits.iter().map(|&x| x - lse_pred).collect();

    let value = -p_tgt.iter().zip(&log_pred).map(|(t, lp)| t * lp).sum::<f64>();

    // d/d pred[j] = p_pred[j] - p_tgt[j]
    let g_pred: Vec<f64> = p_pred.iter().zip(&p_tgt).map(|(p, t)| p - t).collect();

    // d/d tgt[j] = -p_tgt[j] * (log_pred[j] - sum_i p_tgt[i] log_pred[i])
    let mean_lp: f64 = p_tgt.iter().zip(&log_pred).map(|(t, lp)| t * lp).sum();
    let g_tgt: Vec<f64> =
        p_tgt.iter().zip(&log_pred).map(|(t, lp)| -t * (lp - mean_lp)).collect();

    (value, g_pred, g_tgt)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_logits_cross_entropy_is_ln2() {
        let v = supervised_loss(&[0.0, 0.0], &Target::Class(0)).unwrap();
        assert!((v - std::f64::consts::LN_2).abs() < 1e-12);
    }

    #[test]
    fn squared_l2_zero_at_target() {
        let v = supervised_loss(&[1.0, -2.0, 3.0], &Target::Vector(vec![1.0, -2.0, 3.0])).unwrap();
        assert_eq!(v, 0.0);
    }

    #[test]
    fn rejects_label_out_of_range() {
        assert!(matches!(
            supervised_loss(&[0.0, 0.0], &Target::Class(2)),
            Err(Error::InvalidLabel { .. })
        ));
    }

    // Brute-force softmax cross-entropy evaluated the long way.
    fn ce_oracle(logits: &[f64], y: usize) -> f64 {
        let exps: Vec<f64> = logits.iter().map(|&x| x.exp()).collect();
        let z: f64 = exps.iter().sum();
        -(exps[y] / z).ln()
    }

    #[test]
    fn cross_entropy_matches_direct_evaluation() {
        let logits = [3.0, 1.0, -2.0];
        let v = supervised_loss(&logits, &Target::Class(1)).unwrap();
        assert!((v - ce_oracle(&logits, 1)).abs() < 1e-12);
    }

    #[test]
    fn cross_entropy_stable_at_large_logits() {
        let v = supervised_loss(&[1e4, -1e4, 0.0], &Target::Class(1)).unwrap();
        assert!(v.is_finite());
        assert!(v >= 0.0);
    }

    #[test]
    fn l1_distance_by_definition() {
        let (v, _, _) = hidden_distance_grad(&[1.0, 0.0], &[0.0, 1.0], DistanceMetric::L1).unwrap();
        assert_eq!(v, 2.0);
    }

    #[test]
    fn distances_are_symmetric_and_zero_on_diagonal() {
        let a = [0.4, -1.3, 2.2];
        let b = [1.9, 0.3, -0.8];
        for metric in [DistanceMetric::L1, DistanceMetric::SquaredL2] {
            let ab = hidden_distance(&a, &b, metric).unwrap();
            let ba = hidden_distance(&b, &a, metric).unwrap();
            assert_eq!(ab, ba);
            assert_eq!(hidden_distance(&a, &a, metric).unwrap(), 0.0);
        }
    }

    #[test]
    fn cross_entropy_distance_matches_brute_force() {
        let u = [0.2, -0.5, 1.3];
        let v = [1.0, 0.1, -0.3];
        let (d, _, _) = hidden_distance_grad(&u, &v, DistanceMetric::CrossEntropy).unwrap();
        let pu = softmax(&u);
        let pv = softmax(&v);
        let expected: f64 = -pv.iter().zip(&pu).map(|(t, p)| t * p.ln()).sum::<f64>();
        assert!((d - expected).abs() < 1e-12);
        // Asymmetry and the symmetrized average.
        let (d_rev, _, _) = hidden_distance_grad(&v, &u, DistanceMetric::CrossEntropy).unwrap();
        assert!((d - d_rev).abs() > 1e-6);
        let (d_sym, _, _) =
            hidden_distance_grad(&u, &v, DistanceMetric::SymmetricCrossEntropy).unwrap();
        assert!((d_sym - 0.5 * (d + d_rev)).abs() < 1e-12);
    }

    #[test]
    fn distance_rejects_length_mismatch() {
        assert!(matches!(
            hidden_distance(&[1.0], &[1.0, 2.0], DistanceMetric::L1),
            Err(Error::Shape(_))
        ));
    }

    #[test]
    fn multi_hot_loss_matches_naive_form() {
        let logits = [0.7, -1.1, 2.0];
        let target = Target::MultiHot(vec![true, false, true]);
        let (v, g) = supervised_loss_grad(&logits, &target).unwrap();
        let naive: f64 = logits
            .iter()
            .zip([1.0, 0.0, 1.0])
            .map(|(&x, t)| {
                let p = 1.0 / (1.0 + (-x).exp());
                -(t * p.ln() + (1.0 - t) * (1.0 - p).ln())
            })
            .sum();
        assert!((v - naive).abs() < 1e-12);
        assert_eq!(g.len(), 3);
    }
}
