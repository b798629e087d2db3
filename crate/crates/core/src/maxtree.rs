//! Canonical max-tree of an image.
//!
//! Nodes are the distinct connected components of all upper level sets.
//! Construction sorts pixels by decreasing value (ascending index on ties),
//! merges them with a union-find, then collapses equal-level parent chains
//! so every node has a strictly larger altitude than its parent.
//!
//! Nodes are numbered by increasing altitude, ties broken by the smallest
//! pixel of the component. The root is therefore node 0 and every parent
//! index is smaller than its children's, which lets bottom-up passes run as
//! plain reverse loops.

use serde::{Deserialize, Serialize};

use crate::image::Image;
use crate::scalar::{cmp, Scalar};

#[derive(Clone, Debug, PartialEq)]
pub struct MaxTree<T> {
    parent: Vec<usize>,
    altitude: Vec<T>,
    proper_node: Vec<usize>,
    // children in CSR layout, each list ascending
    child_start: Vec<usize>,
    child_list: Vec<usize>,
    leaves: Vec<usize>,
    leaf_pos: Vec<Option<usize>>,
}

/// Per-node attributes computed in one bottom-up pass.
#[derive(Clone, Debug, PartialEq)]
pub struct NodeAttributes<T> {
    /// Pixel count of the component.
    pub area: Vec<usize>,
    /// Number of proper pixels.
    pub proper_count: Vec<usize>,
    /// Highest altitude in the subtree minus the node's own altitude.
    pub height: Vec<T>,
    /// `sum over p in node of (f_p - altitude[parent])`, with the root using
    /// its own altitude as the reference level.
    pub volume: Vec<T>,
    /// Highest altitude in the subtree.
    pub max_altitude: Vec<T>,
}

/// JSON tree dump; field order is part of the format.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TreeDump {
    pub parent: Vec<usize>,
    pub altitude: Vec<f64>,
    pub proper_node: Vec<usize>,
    pub area: Vec<usize>,
}

const UNSET: usize = usize::MAX;

fn find(zpar: &mut [usize], p: usize) -> usize {
    let mut root = p;
    while zpar[root] != root {
        root = zpar[root];
    }
    let mut q = p;
    while zpar[q] != root {
        let next = zpar[q];
        zpar[q] = root;
        q = next;
    }
    root
}

impl<T: Scalar> MaxTree<T> {
    /// Builds the canonical max-tree of `image` using the image's grid
    /// adjacency.
    pub fn build(image: &Image<T>) -> Self {
        let f = image.values();
        let grid = image.grid();
        let n = f.len();

        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| cmp(f[b], f[a]).then(a.cmp(&b)));

        // pixel-level parent forest; `zpar` is the union-find over it
        let mut par = vec![UNSET; n];
        let mut zpar = vec![UNSET; n];
        for &p in &order {
            par[p] = p;
            zpar[p] = p;
            for q in grid.neighbors_iter(p) {
                if zpar[q] == UNSET {
                    continue;
                }
                let r = find(&mut zpar, q);
                if r != p {
                    par[r] = p;
                    zpar[r] = p;
                }
            }
        }

        // canonicalise, lowest pixels first so parents are already canonical
        for &p in order.iter().rev() {
            let q = par[p];
            if f[par[q]] == f[q] {
                par[p] = par[q];
            }
        }

        // one provisional node per canonical pixel
        let is_canonical = |p: usize| par[p] == p || f[par[p]] != f[p];
        let mut tmp_of = vec![UNSET; n];
        let mut canon = Vec::new();
        for &p in order.iter().rev() {
            if is_canonical(p) {
                tmp_of[p] = canon.len();
                canon.push(p);
            }
        }
        let m = canon.len();
        let mut min_pixel = vec![usize::MAX; m];
        for (p, &up) in par.iter().enumerate().take(n) {
            let c = if is_canonical(p) { p } else { up };
            let t = tmp_of[c];
            min_pixel[t] = min_pixel[t].min(p);
        }
        let tmp_parent: Vec<usize> = canon.iter().map(|&c| tmp_of[par[c]]).collect();
        // `canon` runs from low to high altitude, so reverse visits children first
        for t in (0..m).rev() {
            let pt = tmp_parent[t];
            if pt != t {
                min_pixel[pt] = min_pixel[pt].min(min_pixel[t]);
            }
        }

        let mut rank: Vec<usize> = (0..m).collect();
        rank.sort_by(|&a, &b| cmp(f[canon[a]], f[canon[b]]).then(min_pixel[a].cmp(&min_pixel[b])));
        let mut node_of_tmp = vec![0; m];
        for (node, &t) in rank.iter().enumerate() {
            node_of_tmp[t] = node;
        }

        let mut parent = vec![0; m];
        let mut altitude = vec![T::zero(); m];
        for t in 0..m {
            let node = node_of_tmp[t];
            parent[node] = node_of_tmp[tmp_parent[t]];
            altitude[node] = f[canon[t]];
        }
        let proper_node = (0..n)
            .map(|p| {
                let c = if is_canonical(p) { p } else { par[p] };
                node_of_tmp[tmp_of[c]]
            })
            .collect();

        MaxTree::from_parts(parent, altitude, proper_node)
    }

    fn from_parts(parent: Vec<usize>, altitude: Vec<T>, proper_node: Vec<usize>) -> Self {
        let m = parent.len();
        let mut counts = vec![0usize; m + 1];
        for c in 1..m {
            counts[parent[c] + 1] += 1;
        }
        for i in 0..m {
            counts[i + 1] += counts[i];
        }
        let child_start = counts.clone();
        let mut fill = counts;
        let mut child_list = vec![0; m.saturating_sub(1)];
        for (c, &p) in parent.iter().enumerate().skip(1) {
            child_list[fill[p]] = c;
            fill[p] += 1;
        }
        let leaves: Vec<usize> = (0..m)
            .filter(|&c| child_start[c] == child_start[c + 1])
            .collect();
        let mut leaf_pos = vec![None; m];
        for (i, &l) in leaves.iter().enumerate() {
            leaf_pos[l] = Some(i);
        }
        MaxTree {
            parent,
            altitude,
            proper_node,
            child_start,
            child_list,
            leaves,
            leaf_pos,
        }
    }

    #[inline]
    pub fn node_count(&self) -> usize {
        self.parent.len()
    }

    #[inline]
    pub fn pixel_count(&self) -> usize {
        self.proper_node.len()
    }

    #[inline]
    pub fn root(&self) -> usize {
        0
    }

    #[inline]
    pub fn parent(&self) -> &[usize] {
        &self.parent
    }

    /// The altitude vector `a`.
    #[inline]
    pub fn altitude(&self) -> &[T] {
        &self.altitude
    }

    /// `proper_node[v]` is the node of which pixel `v` is a proper pixel.
    #[inline]
    pub fn proper_node(&self) -> &[usize] {
        &self.proper_node
    }

    #[inline]
    pub fn children(&self, node: usize) -> &[usize] {
        &self.child_list[self.child_start[node]..self.child_start[node + 1]]
    }

    #[inline]
    pub fn is_leaf(&self, node: usize) -> bool {
        self.child_start[node] == self.child_start[node + 1]
    }

    /// Leaf nodes (regional maxima) in ascending node order. Every per-maximum
    /// vector in the crate is indexed by position in this list.
    #[inline]
    pub fn leaves(&self) -> &[usize] {
        &self.leaves
    }

    /// Position of `node` in [`leaves`](Self::leaves), if it is a leaf.
    #[inline]
    pub fn leaf_position(&self, node: usize) -> Option<usize> {
        self.leaf_pos[node]
    }

    /// Ancestors of `node` from its parent up to the root.
    pub fn ancestors(&self, node: usize) -> impl Iterator<Item = usize> + '_ {
        let mut cur = node;
        std::iter::from_fn(move || {
            if cur == self.root() {
                None
            } else {
                cur = self.parent[cur];
                Some(cur)
            }
        })
    }

    /// Whether `ancestor` is `node` or lies on its path to the root.
    pub fn is_ancestor_or_self(&self, ancestor: usize, node: usize) -> bool {
        let mut cur = node;
        loop {
            if cur == ancestor {
                return true;
            }
            if cur == self.root() || cur < ancestor {
                return false;
            }
            cur = self.parent[cur];
        }
    }

    /// Image with each pixel set to the altitude of its proper node.
    pub fn reconstruct(&self, grid: crate::grid::Grid) -> crate::error::Result<Image<T>> {
        let values = self.proper_node.iter().map(|&c| self.altitude[c]).collect();
        Image::new(values, grid)
    }

    /// Pixel sets of every node (component = proper pixels of the subtree),
    /// each ascending.
    pub fn node_pixel_sets(&self) -> Vec<Vec<usize>> {
        let mut sets = vec![Vec::new(); self.node_count()];
        for (p, &c) in self.proper_node.iter().enumerate() {
            sets[c].push(p);
        }
        for c in (1..self.node_count()).rev() {
            let own = std::mem::take(&mut sets[c]);
            sets[self.parent[c]].extend_from_slice(&own);
            sets[c] = own;
        }
        for s in &mut sets {
            s.sort_unstable();
        }
        sets
    }

    pub fn attributes(&self) -> NodeAttributes<T> {
        let m = self.node_count();
        let mut proper_count = vec![0usize; m];
        for &c in &self.proper_node {
            proper_count[c] += 1;
        }
        let mut area = proper_count.clone();
        let mut max_altitude = self.altitude.clone();
        let mut volume = vec![T::zero(); m];
        for c in (0..m).rev() {
            let reference = self.altitude[self.parent[c]];
            // children's volumes are referenced to this node's altitude
            volume[c] = volume[c] + T::of_usize(area[c]) * (self.altitude[c] - reference);
            if c != self.root() {
                let p = self.parent[c];
                area[p] += area[c];
                max_altitude[p] = max_altitude[p].max(max_altitude[c]);
                volume[p] = volume[p] + volume[c];
            }
        }
        let height = (0..m).map(|c| max_altitude[c] - self.altitude[c]).collect();
        NodeAttributes {
            area,
            proper_count,
            height,
            volume,
            max_altitude,
        }
    }

    pub fn dump(&self) -> TreeDump {
        TreeDump {
            parent: self.parent.clone(),
            altitude: self.altitude.iter().map(|a| a.as_f64()).collect(),
            proper_node: self.proper_node.clone(),
            area: self.attributes().area,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{Connectivity, Grid};

    fn fig1() -> Image<f64> {
        Image::from_signal(vec![0.0, 0.0, 2.0, 2.0, 1.0, 3.0]).unwrap()
    }

    #[test]
    fn fig1_structure() {
        let t = MaxTree::build(&fig1());
        assert_eq!(t.node_count(), 4);
        assert_eq!(t.altitude(), &[0.0, 1.0, 2.0, 3.0]);
        assert_eq!(t.parent(), &[0, 0, 1, 1]);
        assert_eq!(t.proper_node(), &[0, 0, 2, 2, 1, 3]);
        assert_eq!(t.leaves(), &[2, 3]);
        assert_eq!(t.children(1), &[2, 3]);
        assert_eq!(
            t.node_pixel_sets(),
            vec![
                vec![0, 1, 2, 3, 4, 5],
                vec![2, 3, 4, 5],
                vec![2, 3],
                vec![5]
            ]
        );
    }

    #[test]
    fn fig1_attributes() {
        let t = MaxTree::build(&fig1());
        let a = t.attributes();
        assert_eq!(a.area, vec![6, 4, 2, 1]);
        assert_eq!(a.proper_count, vec![2, 1, 2, 1]);
        assert_eq!(a.height, vec![3.0, 2.0, 0.0, 0.0]);
        // C2: (2-0)+(2-0)+(1-0)+(3-0); C3: 2*(2-1); C4: 3-1; root: sum f - 0
        assert_eq!(a.volume, vec![8.0, 8.0, 2.0, 2.0]);
    }

    #[test]
    fn constant_image_is_single_node() {
        let g = Grid::new(3, 2, Connectivity::Conn8).unwrap();
        let img = Image::constant(g, 0.5f64);
        let t = MaxTree::build(&img);
        assert_eq!(t.node_count(), 1);
        assert_eq!(t.leaves(), &[0]);
        assert_eq!(t.altitude(), &[0.5]);
        let a = t.attributes();
        assert_eq!(a.area, vec![6]);
        assert_eq!(a.height, vec![0.0]);
        assert_eq!(a.volume, vec![0.0]);
        assert_eq!(t.reconstruct(g).unwrap(), img);
    }

    #[test]
    fn reconstruction_and_perturbation_of_one_node() {
        let img = fig1();
        let t = MaxTree::build(&img);
        assert_eq!(t.reconstruct(*img.grid()).unwrap(), img);

        let mut v = img.values().to_vec();
        v[2] += 0.25;
        v[3] += 0.25;
        let moved = Image::from_signal(v).unwrap();
        let t2 = MaxTree::build(&moved);
        assert_eq!(t2.parent(), t.parent());
        assert_eq!(t2.proper_node(), t.proper_node());
        let r = t2.reconstruct(*img.grid()).unwrap();
        let diff: Vec<usize> = (0..6)
            .filter(|&i| r.values()[i] != img.values()[i])
            .collect();
        assert_eq!(diff, vec![2, 3]);
    }

    #[test]
    fn plateau_split_by_connectivity() {
        // diagonal 1s are one component under conn8, two under conn4
        let v = vec![1.0f64, 0.0, 0.0, 1.0];
        let g8 = Grid::new(2, 2, Connectivity::Conn8).unwrap();
        let g4 = g8.with_connectivity(Connectivity::Conn4).unwrap();
        let t8 = MaxTree::build(&Image::new(v.clone(), g8).unwrap());
        let t4 = MaxTree::build(&Image::new(v, g4).unwrap());
        assert_eq!(t8.leaves().len(), 1);
        assert_eq!(t4.leaves().len(), 2);
        assert_eq!(t4.proper_node(), &[1, 0, 0, 2]);
    }

    #[test]
    fn canonical_invariants_on_random_images() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        for _ in 0..200 {
            let w = rng.gen_range(1..8);
            let h = rng.gen_range(1..8);
            let g = Grid::new(w, h, Connectivity::Conn8).unwrap();
            let v: Vec<f64> = (0..g.len())
                .map(|_| f64::from(rng.gen_range(0..5)))
                .collect();
            let img = Image::new(v, g).unwrap();
            let t = MaxTree::build(&img);
            let a = t.attributes();
            assert_eq!(a.area[t.root()], g.len());
            assert_eq!(a.proper_count.iter().sum::<usize>(), g.len());
            for c in 1..t.node_count() {
                assert!(t.parent()[c] < c);
                assert!(t.altitude()[c] > t.altitude()[t.parent()[c]]);
                let kids: usize = t.children(c).iter().map(|&k| a.area[k]).sum();
                assert_eq!(a.area[c], a.proper_count[c] + kids);
                assert!(a.proper_count[c] >= 1 || t.children(c).len() >= 2);
            }
            assert_eq!(t.reconstruct(g).unwrap(), img);
            let total: f64 = img.values().iter().map(|x| x - t.altitude()[0]).sum();
            assert_eq!(a.volume[0], total);
        }
    }
}
