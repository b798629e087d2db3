//! Per-maximum measures: highest altitude, dynamics and volume extinction.
//!
//! Extinction values are read off the tree by locating, for every leaf, its
//! saddle node: the closest ancestor whose subtree holds a maximum that
//! ranks higher. A single bottom-up pass does this. At each node the child
//! branches compete, the winner passes its dominant leaf upward, and every
//! losing branch records the node as the saddle of its dominant leaf. The
//! leaf that wins all the way to the root gets the root as saddle.
//!
//! Ties always go to the smaller leaf position so rebuilds are reproducible.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::maxtree::{MaxTree, NodeAttributes};
use crate::scalar::{cmp, Scalar};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MeasureKind {
    /// Highest altitude of the maximum.
    Alt,
    /// Dynamics: extinction value of the height filter.
    Dyn,
    /// Extinction value of the volume filter.
    Vol,
}

impl MeasureKind {
    pub const ALL: [MeasureKind; 3] = [MeasureKind::Alt, MeasureKind::Dyn, MeasureKind::Vol];
}

impl fmt::Display for MeasureKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MeasureKind::Alt => "alt",
            MeasureKind::Dyn => "dyn",
            MeasureKind::Vol => "vol",
        })
    }
}

impl FromStr for MeasureKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "alt" => Ok(MeasureKind::Alt),
            "dyn" => Ok(MeasureKind::Dyn),
            "vol" => Ok(MeasureKind::Vol),
            other => Err(Error::Config(vec![format!("unknown measure '{other}'")])),
        }
    }
}

/// Saddle structure of the maxima under some ranking.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Saddles {
    /// Per leaf position: nearest ancestor holding a higher-ranked maximum,
    /// or the root.
    pub saddle: Vec<usize>,
    /// Per leaf position: child of the saddle on the path to the leaf. For the
    /// top-ranked leaf this is the root's child on that path, or the root
    /// itself in a single-node tree.
    pub branch_top: Vec<usize>,
    /// Leaf position of the top-ranked maximum.
    pub dominant: usize,
}

/// Values of one measure on every maximum, in leaf order, together with the
/// saddle structure its backward rule needs.
#[derive(Clone, Debug, PartialEq)]
pub struct MeasureVector<T> {
    pub kind: MeasureKind,
    pub values: Vec<T>,
    pub saddle: Vec<usize>,
    pub branch_top: Vec<usize>,
    pub dominant: usize,
}

impl<T: Scalar> MeasureVector<T> {
    #[inline]
    pub fn len(&self) -> usize {
        self.values.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Node whose subtree carries the volume of maximum `i`: the branch top,
    /// or the whole tree for the dominant maximum.
    pub fn support(&self, tree: &MaxTree<T>, i: usize) -> usize {
        if i == self.dominant {
            tree.root()
        } else {
            self.branch_top[i]
        }
    }
}

/// Runs the competition pass. `key(child, dominant_leaf_pos)` scores a child
/// branch at its parent; larger wins, ties go to the smaller leaf position.
fn merge_pass<T, K>(tree: &MaxTree<T>, key: K) -> Saddles
where
    T: Scalar,
    K: Fn(usize, usize) -> T,
{
    let m = tree.node_count();
    let k = tree.leaves().len();
    let mut dom = vec![usize::MAX; m];
    let mut winner_child = vec![usize::MAX; m];
    let mut saddle = vec![tree.root(); k];
    let mut branch_top = vec![tree.root(); k];

    for c in (0..m).rev() {
        if let Some(pos) = tree.leaf_position(c) {
            dom[c] = pos;
            continue;
        }
        let children = tree.children(c);
        let mut best = children[0];
        let mut best_key = key(best, dom[best]);
        for &d in &children[1..] {
            let kd = key(d, dom[d]);
            let ord = cmp(kd, best_key).then(dom[best].cmp(&dom[d]));
            if ord == std::cmp::Ordering::Greater {
                best = d;
                best_key = kd;
            }
        }
        for &d in children {
            if d != best {
                saddle[dom[d]] = c;
                branch_top[dom[d]] = d;
            }
        }
        dom[c] = dom[best];
        winner_child[c] = best;
    }

    let root = tree.root();
    let dominant = dom[root];
    saddle[dominant] = root;
    branch_top[dominant] = if tree.is_leaf(root) {
        root
    } else {
        winner_child[root]
    };
    Saddles {
        saddle,
        branch_top,
        dominant,
    }
}

/// Saddles for a per-leaf ranking (larger ranks higher).
pub fn saddle_nodes<T: Scalar>(tree: &MaxTree<T>, ranking: &[T]) -> Result<Saddles> {
    let k = tree.leaves().len();
    if ranking.len() != k {
        return Err(Error::LengthMismatch {
            what: "ranking vs leaf count",
            expected: k,
            actual: ranking.len(),
        });
    }
    Ok(merge_pass(tree, |_, leaf| ranking[leaf]))
}

pub fn alt_measure<T: Scalar>(tree: &MaxTree<T>) -> MeasureVector<T> {
    let a = tree.altitude();
    let values: Vec<T> = tree.leaves().iter().map(|&l| a[l]).collect();
    let dominant = argmax_first(&values);
    MeasureVector {
        kind: MeasureKind::Alt,
        saddle: tree.leaves().iter().map(|&l| tree.parent()[l]).collect(),
        branch_top: tree.leaves().to_vec(),
        values,
        dominant,
    }
}

pub fn dyn_measure<T: Scalar>(tree: &MaxTree<T>) -> MeasureVector<T> {
    let a = tree.altitude();
    let ranking: Vec<T> = tree.leaves().iter().map(|&l| a[l]).collect();
    let s = merge_pass(tree, |_, leaf| ranking[leaf]);
    let values = tree
        .leaves()
        .iter()
        .zip(&s.saddle)
        .map(|(&l, &sd)| a[l] - a[sd])
        .collect();
    MeasureVector {
        kind: MeasureKind::Dyn,
        values,
        saddle: s.saddle,
        branch_top: s.branch_top,
        dominant: s.dominant,
    }
}

/// Volume extinction. A child branch competes at its parent with its volume
/// above the parent's level, which is exactly the parent-referenced
/// [`NodeAttributes::volume`].
pub fn vol_measure<T: Scalar>(tree: &MaxTree<T>, attrs: &NodeAttributes<T>) -> MeasureVector<T> {
    let s = merge_pass(tree, |child, _| attrs.volume[child]);
    let values = (0..tree.leaves().len())
        .map(|i| {
            if i == s.dominant {
                attrs.volume[tree.root()]
            } else {
                attrs.volume[s.branch_top[i]]
            }
        })
        .collect();
    MeasureVector {
        kind: MeasureKind::Vol,
        values,
        saddle: s.saddle,
        branch_top: s.branch_top,
        dominant: s.dominant,
    }
}

pub fn measure<T: Scalar>(
    tree: &MaxTree<T>,
    attrs: &NodeAttributes<T>,
    kind: MeasureKind,
) -> MeasureVector<T> {
    match kind {
        MeasureKind::Alt => alt_measure(tree),
        MeasureKind::Dyn => dyn_measure(tree),
        MeasureKind::Vol => vol_measure(tree, attrs),
    }
}

fn argmax_first<T: Scalar>(values: &[T]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{Connectivity, Grid};
    use crate::image::Image;

    fn fig1_tree() -> MaxTree<f64> {
        MaxTree::build(&Image::from_signal(vec![0.0, 0.0, 2.0, 2.0, 1.0, 3.0]).unwrap())
    }

    #[test]
    fn fig1_alt() {
        let t = fig1_tree();
        let m = alt_measure(&t);
        assert_eq!(m.values, vec![2.0, 3.0]);
        assert_eq!(m.dominant, 1);
    }

    #[test]
    fn fig1_saddles_by_altitude() {
        let t = fig1_tree();
        let s = saddle_nodes(&t, &[2.0, 3.0]).unwrap();
        assert_eq!(s.saddle, vec![1, 0]);
        assert_eq!(s.branch_top, vec![2, 1]);
        assert_eq!(s.dominant, 1);
        assert!(saddle_nodes(&t, &[1.0]).is_err());
    }

    #[test]
    fn fig1_dyn() {
        let m = dyn_measure(&fig1_tree());
        assert_eq!(m.values, vec![1.0, 3.0]);
        assert_eq!(m.saddle, vec![1, 0]);
    }

    #[test]
    fn fig1_vol_tie_goes_to_smaller_leaf() {
        let t = fig1_tree();
        let m = vol_measure(&t, &t.attributes());
        // both branches carry surface 2 above level 1; C3 wins the tie
        assert_eq!(m.values, vec![8.0, 2.0]);
        assert_eq!(m.dominant, 0);
        assert_eq!(m.saddle, vec![0, 1]);
        assert_eq!(m.branch_top, vec![1, 3]);
        assert_eq!(m.support(&t, 0), 0);
        assert_eq!(m.support(&t, 1), 3);
    }

    #[test]
    fn constant_image_measures() {
        let g = Grid::new(4, 4, Connectivity::Conn8).unwrap();
        let t = MaxTree::build(&Image::constant(g, 0.3f64));
        let a = t.attributes();
        assert_eq!(alt_measure(&t).values, vec![0.3]);
        for kind in [MeasureKind::Dyn, MeasureKind::Vol] {
            let m = measure(&t, &a, kind);
            assert_eq!(m.values, vec![0.0]);
            assert_eq!(m.saddle, vec![0]);
            assert_eq!(m.branch_top, vec![0]);
        }
    }

    #[test]
    fn non_dominant_maximum_can_merge_at_root() {
        let t = MaxTree::build(&Image::from_signal(vec![0.0f64, 2.0, 0.0, 3.0]).unwrap());
        let m = dyn_measure(&t);
        assert_eq!(m.values, vec![2.0, 3.0]);
        assert_eq!(m.saddle, vec![0, 0]);
        assert_eq!(m.dominant, 1);
    }

    #[test]
    fn measure_kind_parsing() {
        assert_eq!("vol".parse::<MeasureKind>().unwrap(), MeasureKind::Vol);
        assert!("area".parse::<MeasureKind>().is_err());
    }
}
