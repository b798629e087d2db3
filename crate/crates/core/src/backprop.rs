//! Backward rules: measure gradients onto node altitudes, then node altitudes
//! onto pixels.
//!
//! The tree, the saddles and every ranking are held fixed while
//! differentiating; the result is the gradient of the active smooth piece.
//! Moving all proper pixels of a node by the same amount moves its altitude
//! by that amount and leaves the hierarchy unchanged, so the altitude Jacobian
//! is the 0/1 matrix mapping each pixel to its proper node.

use crate::error::{Error, Result};
use crate::maxtree::{MaxTree, NodeAttributes};
use crate::measures::{MeasureKind, MeasureVector};
use crate::scalar::Scalar;

/// Gradient of an error with respect to the node altitudes.
#[derive(Clone, Debug, PartialEq)]
pub struct AltitudeGrad<T>(pub Vec<T>);

/// Gradient of an error with respect to the pixel values.
#[derive(Clone, Debug, PartialEq)]
pub struct PixelGrad<T>(pub Vec<T>);

/// `grad_f[i] = grad_a[proper_node[i]]`.
pub fn backprop_altitudes<T: Scalar>(
    tree: &MaxTree<T>,
    grad_a: &AltitudeGrad<T>,
) -> Result<PixelGrad<T>> {
    if grad_a.0.len() != tree.node_count() {
        return Err(Error::LengthMismatch {
            what: "altitude gradient vs node count",
            expected: tree.node_count(),
            actual: grad_a.0.len(),
        });
    }
    Ok(PixelGrad(
        tree.proper_node().iter().map(|&c| grad_a.0[c]).collect(),
    ))
}

/// Pulls per-maximum gradients back onto node altitudes. Contributions of
/// several maxima add up.
pub fn backprop_measure<T: Scalar>(
    tree: &MaxTree<T>,
    attrs: &NodeAttributes<T>,
    measure: &MeasureVector<T>,
    grad_m: &[T],
) -> Result<AltitudeGrad<T>> {
    let k = tree.leaves().len();
    if grad_m.len() != k || measure.len() != k {
        return Err(Error::LengthMismatch {
            what: "measure gradient vs leaf count",
            expected: k,
            actual: if measure.len() != k {
                measure.len()
            } else {
                grad_m.len()
            },
        });
    }
    let m = tree.node_count();
    let mut grad = vec![T::zero(); m];
    match measure.kind {
        MeasureKind::Alt => {
            for (&leaf, &g) in tree.leaves().iter().zip(grad_m) {
                grad[leaf] = grad[leaf] + g;
            }
        }
        MeasureKind::Dyn => {
            for (i, (&leaf, &g)) in tree.leaves().iter().zip(grad_m).enumerate() {
                let s = measure.saddle[i];
                grad[leaf] = grad[leaf] + g;
                grad[s] = grad[s] - g;
            }
        }
        MeasureKind::Vol => {
            // value_i = sum_{Y in subtree(top)} pc[Y]*a[Y] - area[top]*a[saddle];
            // subtree membership is accumulated top-down as a running weight
            let mut weight = vec![T::zero(); m];
            for (i, &g) in grad_m.iter().enumerate() {
                let top = measure.support(tree, i);
                let s = measure.saddle[i];
                weight[top] = weight[top] + g;
                grad[s] = grad[s] - g * T::of_usize(attrs.area[top]);
            }
            for c in 1..m {
                let p = tree.parent()[c];
                weight[c] = weight[c] + weight[p];
            }
            for c in 0..m {
                grad[c] = grad[c] + weight[c] * T::of_usize(attrs.proper_count[c]);
            }
        }
    }
    Ok(AltitudeGrad(grad))
}

/// Composition of [`backprop_measure`] and [`backprop_altitudes`].
pub fn measure_pixel_grad<T: Scalar>(
    tree: &MaxTree<T>,
    attrs: &NodeAttributes<T>,
    measure: &MeasureVector<T>,
    grad_m: &[T],
) -> Result<PixelGrad<T>> {
    let ga = backprop_measure(tree, attrs, measure, grad_m)?;
    backprop_altitudes(tree, &ga)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::image::Image;
    use crate::measures::{alt_measure, dyn_measure, vol_measure};

    fn fig1_tree() -> MaxTree<f64> {
        MaxTree::build(&Image::from_signal(vec![0.0, 0.0, 2.0, 2.0, 1.0, 3.0]).unwrap())
    }

    #[test]
    fn jacobian_transpose_of_fig1() {
        let t = fig1_tree();
        let expected = [
            [1.0, 1.0, 0.0, 0.0, 0.0, 0.0],
            [0.0, 0.0, 0.0, 0.0, 1.0, 0.0],
            [0.0, 0.0, 1.0, 1.0, 0.0, 0.0],
            [0.0, 0.0, 0.0, 0.0, 0.0, 1.0],
        ];
        for (node, row) in expected.iter().enumerate() {
            let mut ga = vec![0.0; 4];
            ga[node] = 1.0;
            let gf = backprop_altitudes(&t, &AltitudeGrad(ga)).unwrap();
            assert_eq!(&gf.0[..], &row[..]);
        }
        let zero = backprop_altitudes(&t, &AltitudeGrad(vec![0.0; 4])).unwrap();
        assert!(zero.0.iter().all(|&g| g == 0.0));
        assert!(backprop_altitudes(&t, &AltitudeGrad(vec![0.0; 3])).is_err());
    }

    #[test]
    fn dyn_rule_on_fig1() {
        let t = fig1_tree();
        let a = t.attributes();
        let m = dyn_measure(&t);
        let ga = backprop_measure(&t, &a, &m, &[1.0, 0.0]).unwrap();
        assert_eq!(ga.0, vec![0.0, -1.0, 1.0, 0.0]);
        // dominant maximum pairs with the root
        let ga = backprop_measure(&t, &a, &m, &[0.0, 1.0]).unwrap();
        assert_eq!(ga.0, vec![-1.0, 0.0, 0.0, 1.0]);
        assert!(backprop_measure(&t, &a, &m, &[1.0]).is_err());
    }

    #[test]
    fn alt_rule_is_one_hot() {
        let t = fig1_tree();
        let a = t.attributes();
        let m = alt_measure(&t);
        let ga = backprop_measure(&t, &a, &m, &[0.0, 1.0]).unwrap();
        assert_eq!(ga.0, vec![0.0, 0.0, 0.0, 1.0]);
    }

    #[test]
    fn vol_rule_on_fig1() {
        let t = fig1_tree();
        let a = t.attributes();
        let m = vol_measure(&t, &a);
        // C4: value = a[C4] - a[C2]
        let ga = backprop_measure(&t, &a, &m, &[0.0, 1.0]).unwrap();
        assert_eq!(ga.0, vec![0.0, -1.0, 0.0, 1.0]);
        // C3 is dominant: value = sum f - 6*a[root]
        let ga = backprop_measure(&t, &a, &m, &[1.0, 0.0]).unwrap();
        assert_eq!(ga.0, vec![2.0 - 6.0, 1.0, 2.0, 1.0]);
        let gf = backprop_altitudes(&t, &ga).unwrap();
        assert_eq!(gf.0, vec![-4.0, -4.0, 2.0, 2.0, 1.0, 1.0]);
    }
}
