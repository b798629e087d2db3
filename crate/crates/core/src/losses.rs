//! Ranked selection loss on maxima, plus the data and smoothness terms of the
//! composite objective.

use serde::{Deserialize, Serialize};

use crate::backprop::measure_pixel_grad;
use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::image::Image;
use crate::maxtree::MaxTree;
use crate::measures::{measure, MeasureKind};
use crate::scalar::{cmp, Scalar};

/// Weights and measure choices of the objective
/// `data_weight*||f - y||^2 + lambda1*J_r(sm, im; ell) + lambda2*||grad f||^2`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LossConfig<T> {
    /// Number of maxima to keep.
    pub ell: usize,
    pub margin: T,
    pub saliency: MeasureKind,
    pub importance: MeasureKind,
    pub lambda1: T,
    pub lambda2: T,
    /// Weight of the L2 data term; 0 leaves the ranked loss on its own.
    pub data_weight: T,
}

impl<T: Scalar> Default for LossConfig<T> {
    fn default() -> Self {
        LossConfig {
            ell: 1,
            margin: T::of(0.1),
            saliency: MeasureKind::Dyn,
            importance: MeasureKind::Dyn,
            lambda1: T::one(),
            lambda2: T::zero(),
            data_weight: T::one(),
        }
    }
}

impl<T: Scalar> LossConfig<T> {
    /// Lists every violated constraint.
    pub fn problems(&self) -> Vec<String> {
        let mut out = Vec::new();
        if !(self.margin > T::zero()) || !self.margin.is_finite() {
            out.push(format!(
                "loss.margin must be positive and finite, got {}",
                self.margin
            ));
        }
        for (name, w) in [
            ("loss.lambda1", self.lambda1),
            ("loss.lambda2", self.lambda2),
            ("loss.data_weight", self.data_weight),
        ] {
            if !w.is_finite() || w < T::zero() {
                out.push(format!("{name} must be finite and non-negative, got {w}"));
            }
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        let problems = self.problems();
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(problems))
        }
    }
}

/// Permutation sorting `values` in decreasing order, ties by smaller index.
pub fn argsort_desc<T: Scalar>(values: &[T]) -> Vec<usize> {
    let mut r: Vec<usize> = (0..values.len()).collect();
    r.sort_by(|&a, &b| cmp(values[b], values[a]).then(a.cmp(&b)));
    r
}

/// Ranked selection loss: the `ell` maxima ranked highest by `importance` are
/// pushed to a saliency of at least `margin`, all others to zero saliency.
/// Returns the value and its gradient with respect to `saliency`; the
/// gradient with respect to `importance` is zero.
pub fn ranked_selection_loss<T: Scalar>(
    saliency: &[T],
    importance: &[T],
    ell: usize,
    margin: T,
) -> Result<(T, Vec<T>)> {
    if saliency.len() != importance.len() {
        return Err(Error::LengthMismatch {
            what: "saliency vs importance",
            expected: saliency.len(),
            actual: importance.len(),
        });
    }
    let r = argsort_desc(importance);
    let mut value = T::zero();
    let mut grad = vec![T::zero(); saliency.len()];
    for (rank, &i) in r.iter().enumerate() {
        let s = saliency[i];
        if rank < ell {
            if s < margin {
                value = value + (margin - s);
                grad[i] = -T::one();
            }
        } else {
            value = value + s;
            grad[i] = T::one();
        }
    }
    Ok((value, grad))
}

fn check_len(what: &'static str, expected: usize, actual: usize) -> Result<()> {
    if expected == actual {
        Ok(())
    } else {
        Err(Error::LengthMismatch {
            what,
            expected,
            actual,
        })
    }
}

/// `sum (f_i - y_i)^2` and its gradient `2(f - y)`.
pub fn l2_loss<T: Scalar>(f: &[T], y: &[T]) -> Result<(T, Vec<T>)> {
    check_len("l2 operands", f.len(), y.len())?;
    let two = T::of(2.0);
    let mut value = T::zero();
    let grad = f
        .iter()
        .zip(y)
        .map(|(&a, &b)| {
            let d = a - b;
            value = value + d * d;
            two * d
        })
        .collect();
    Ok((value, grad))
}

/// Squared differences over horizontally and vertically adjacent pixel pairs,
/// each pair once, no wrap-around.
pub fn smoothness_loss<T: Scalar>(f: &[T], grid: &Grid) -> Result<(T, Vec<T>)> {
    check_len("smoothness operand vs grid", grid.len(), f.len())?;
    let two = T::of(2.0);
    let mut value = T::zero();
    let mut grad = vec![T::zero(); f.len()];
    for (p, q) in grid.axis_pairs() {
        let d = f[p] - f[q];
        value = value + d * d;
        grad[p] = grad[p] + two * d;
        grad[q] = grad[q] - two * d;
    }
    Ok((value, grad))
}

/// Term values of one evaluation.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct LossBreakdown<T> {
    pub total: T,
    pub l2: T,
    pub jr: T,
    pub smooth: T,
}

/// Value, pixel gradient and the tree the measures were taken on.
#[derive(Clone, Debug)]
pub struct Evaluation<T> {
    pub breakdown: LossBreakdown<T>,
    pub grad: Vec<T>,
    pub tree: MaxTree<T>,
}

/// Composite objective with data term, ranked selection loss and smoothness.
pub fn composite_loss<T: Scalar>(
    f: &Image<T>,
    y: &[T],
    config: &LossConfig<T>,
) -> Result<Evaluation<T>> {
    check_len("composite operands", f.len(), y.len())?;
    let tree = MaxTree::build(f);
    let n = f.len();
    let mut grad = vec![T::zero(); n];
    let mut bd = LossBreakdown::default();

    let (l2, g) = l2_loss(f.values(), y)?;
    bd.l2 = l2;
    if config.data_weight != T::zero() {
        for (a, b) in grad.iter_mut().zip(g) {
            *a = *a + config.data_weight * b;
        }
    }

    let attrs = tree.attributes();
    let sm = measure(&tree, &attrs, config.saliency);
    let im = if config.importance == config.saliency {
        None
    } else {
        Some(measure(&tree, &attrs, config.importance))
    };
    let im_values = im.as_ref().map_or(&sm.values, |m| &m.values);
    let (jr, gsm) = ranked_selection_loss(&sm.values, im_values, config.ell, config.margin)?;
    bd.jr = jr;
    if config.lambda1 != T::zero() {
        let gf = measure_pixel_grad(&tree, &attrs, &sm, &gsm)?;
        for (a, b) in grad.iter_mut().zip(gf.0) {
            *a = *a + config.lambda1 * b;
        }
    }

    let (smooth, g) = smoothness_loss(f.values(), f.grid())?;
    bd.smooth = smooth;
    if config.lambda2 != T::zero() {
        for (a, b) in grad.iter_mut().zip(g) {
            *a = *a + config.lambda2 * b;
        }
    }

    bd.total = config.data_weight * bd.l2 + config.lambda1 * bd.jr + config.lambda2 * bd.smooth;
    Ok(Evaluation {
        breakdown: bd,
        grad,
        tree,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Connectivity;
    use proptest::prelude::*;

    #[test]
    fn ranked_selection_hand_example() {
        let (v, g) = ranked_selection_loss(&[1.0f64, 3.0], &[1.0, 3.0], 1, 2.0).unwrap();
        assert_eq!(v, 1.0);
        assert_eq!(g, vec![1.0, 0.0]);
    }

    #[test]
    fn ranked_selection_edge_cases() {
        let (v, g) = ranked_selection_loss(&[0.5f64, 0.7], &[0.5, 0.7], 5, 0.1).unwrap();
        assert_eq!((v, g), (0.0, vec![0.0, 0.0]));
        let (v, g) = ranked_selection_loss(&[0.5f64, 0.25], &[1.0, 2.0], 0, 0.1).unwrap();
        assert_eq!((v, g), (0.75, vec![1.0, 1.0]));
        let (v, g) = ranked_selection_loss(&[0.05f64, 0.3], &[2.0, 1.0], 1, 0.1).unwrap();
        assert!((v - 0.35).abs() < 1e-15);
        assert_eq!(g, vec![-1.0, 1.0]);
        assert!(ranked_selection_loss(&[1.0f64], &[1.0, 2.0], 1, 0.1).is_err());
    }

    #[test]
    fn ties_in_importance_go_to_smaller_index() {
        assert_eq!(argsort_desc(&[1.0f64, 2.0, 2.0, 0.0]), vec![1, 2, 0, 3]);
    }

    #[test]
    fn l2_and_smoothness_examples() {
        let (v, g) = l2_loss(&[1.0f64, 0.0], &[0.0, 0.0]).unwrap();
        assert_eq!((v, g), (1.0, vec![2.0, 0.0]));
        let (v, g) = l2_loss(&[0.3f64, 0.4], &[0.3, 0.4]).unwrap();
        assert_eq!((v, g), (0.0, vec![0.0, 0.0]));
        assert!(l2_loss(&[0.0f64], &[0.0, 1.0]).is_err());

        let grid = Grid::chain(2).unwrap();
        let (v, g) = smoothness_loss(&[0.0f64, 1.0], &grid).unwrap();
        assert_eq!((v, g), (1.0, vec![-2.0, 2.0]));
        let g3 = Grid::new(3, 3, Connectivity::Conn8).unwrap();
        let (v, g) = smoothness_loss(&[0.7f64; 9], &g3).unwrap();
        assert_eq!(v, 0.0);
        assert!(g.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn composite_without_tree_terms_is_l2() {
        let y = Image::from_signal(vec![0.0f64, 1.0, 0.5, 0.2]).unwrap();
        let f = Image::from_signal(vec![0.1f64, 0.8, 0.5, 0.4]).unwrap();
        let cfg = LossConfig {
            lambda1: 0.0,
            lambda2: 0.0,
            ..LossConfig::default()
        };
        let e = composite_loss(&f, y.values(), &cfg).unwrap();
        let (l2, g) = l2_loss(f.values(), y.values()).unwrap();
        assert_eq!(e.breakdown.total, l2);
        assert_eq!(e.grad, g);
    }

    #[test]
    fn config_validation_lists_everything() {
        let cfg = LossConfig {
            margin: -1.0f64,
            lambda1: f64::NAN,
            lambda2: -2.0,
            ..LossConfig::default()
        };
        match cfg.validate() {
            Err(Error::Config(p)) => assert_eq!(p.len(), 3),
            other => panic!("{other:?}"),
        }
    }

    proptest! {
        #[test]
        fn jr_properties(
            pairs in prop::collection::vec((0.0f64..2.0, -5.0f64..5.0), 1..12),
            ell in 0usize..14,
            margin in 0.01f64..1.5,
            scale in 0.1f64..10.0,
            shift in 0usize..12,
        ) {
            let sm: Vec<f64> = pairs.iter().map(|p| p.0).collect();
            let im: Vec<f64> = pairs.iter().map(|p| p.1).collect();
            let (v, g) = ranked_selection_loss(&sm, &im, ell, margin).unwrap();
            prop_assert!(v >= 0.0);
            prop_assert!(g.iter().all(|&x| x == -1.0 || x == 0.0 || x == 1.0));

            let scaled: Vec<f64> = im.iter().map(|x| x * scale).collect();
            let (v2, g2) = ranked_selection_loss(&sm, &scaled, ell, margin).unwrap();
            prop_assert_eq!(v, v2);
            prop_assert_eq!(&g, &g2);

            // joint rotation of (sm, im) pairs; value only depends on the pairing
            let k = sm.len();
            let s = shift % k;
            let distinct = {
                let mut c = im.clone();
                c.sort_by(|a, b| a.partial_cmp(b).unwrap());
                c.windows(2).all(|w| w[0] != w[1])
            };
            if distinct {
                let sm_r: Vec<f64> = (0..k).map(|i| sm[(i + s) % k]).collect();
                let im_r: Vec<f64> = (0..k).map(|i| im[(i + s) % k]).collect();
                let (v3, _) = ranked_selection_loss(&sm_r, &im_r, ell, margin).unwrap();
                prop_assert!((v - v3).abs() < 1e-12);
            }

            // zero exactly when selected reach the margin and discarded vanish
            let r = argsort_desc(&im);
            let satisfied = r.iter().enumerate().all(|(rank, &i)| {
                if rank < ell { sm[i] >= margin } else { sm[i] == 0.0 }
            });
            prop_assert_eq!(v == 0.0, satisfied);
        }
    }
}
