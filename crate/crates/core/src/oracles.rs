//! Brute-force reference implementations used to validate the fast paths.
//!
//! Everything here works straight from the level-set definitions (flood fills
//! of thresholded images, explicit filtering and rescanning) and is guarded
//! against large inputs. None of it is used by the optimiser.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::grid::{connected_components, flood_fill, Grid};
use crate::image::Image;
use crate::measures::MeasureKind;
use crate::scalar::{cmp, Scalar};

/// Largest image the exhaustive oracles accept.
pub const ORACLE_MAX_PIXELS: usize = 256;

fn guard(n: usize) -> Result<()> {
    if n > ORACLE_MAX_PIXELS {
        Err(Error::OracleSizeGuard {
            pixels: n,
            limit: ORACLE_MAX_PIXELS,
        })
    } else {
        Ok(())
    }
}

/// Component tree built by enumerating every upper level set.
///
/// Components are numbered by increasing altitude, then by smallest pixel;
/// `parent[c]` is the smallest component strictly containing `c` (the root
/// points to itself).
#[derive(Clone, Debug, PartialEq)]
pub struct OracleTree<T> {
    pub components: Vec<Vec<usize>>,
    pub altitudes: Vec<T>,
    pub parent: Vec<usize>,
}

impl<T: Scalar> OracleTree<T> {
    pub fn is_leaf(&self, c: usize) -> bool {
        !self
            .parent
            .iter()
            .enumerate()
            .any(|(d, &p)| p == c && d != c)
    }

    pub fn leaves(&self) -> Vec<usize> {
        (0..self.components.len())
            .filter(|&c| self.is_leaf(c))
            .collect()
    }

    pub fn root(&self) -> usize {
        (0..self.parent.len())
            .find(|&c| self.parent[c] == c)
            .expect("oracle tree has a root")
    }
}

pub fn oracle_component_tree<T: Scalar>(image: &Image<T>) -> Result<OracleTree<T>> {
    let n = image.len();
    guard(n)?;
    let f = image.values();
    let grid = image.grid();

    let mut levels: Vec<T> = f.to_vec();
    levels.sort_by(|a, b| cmp(*a, *b));
    levels.dedup();

    // pixel set -> highest level at which it is a component
    let mut found: BTreeMap<Vec<usize>, T> = BTreeMap::new();
    for &lambda in &levels {
        let mask: Vec<bool> = f.iter().map(|&v| v >= lambda).collect();
        for comp in connected_components(grid, &mask) {
            let entry = found.entry(comp).or_insert(lambda);
            if lambda > *entry {
                *entry = lambda;
            }
        }
    }

    let mut comps: Vec<(Vec<usize>, T)> = found.into_iter().collect();
    comps.sort_by(|a, b| cmp(a.1, b.1).then(a.0[0].cmp(&b.0[0])));

    let is_subset = |small: &[usize], big: &[usize]| {
        small.len() < big.len() && small.iter().all(|p| big.binary_search(p).is_ok())
    };
    let parent = (0..comps.len())
        .map(|c| {
            (0..comps.len())
                .filter(|&d| is_subset(&comps[c].0, &comps[d].0))
                .min_by_key(|&d| comps[d].0.len())
                .unwrap_or(c)
        })
        .collect();
    let (components, altitudes) = comps.into_iter().unzip();
    Ok(OracleTree {
        components,
        altitudes,
        parent,
    })
}

/// Regional maxima by direct scan: flat connected zones whose outside
/// neighbours are all strictly lower. Each zone is sorted; zones are ordered
/// by smallest pixel.
pub fn regional_maxima<T: Scalar>(image: &Image<T>) -> Vec<Vec<usize>> {
    let f = image.values();
    let grid = image.grid();
    let n = f.len();
    let mut visited = vec![false; n];
    let mut out = Vec::new();
    for p in 0..n {
        if visited[p] {
            continue;
        }
        let mask: Vec<bool> = f.iter().map(|&v| v == f[p]).collect();
        let zone = flood_fill(grid, &mask, p);
        for &q in &zone {
            visited[q] = true;
        }
        let is_max = zone
            .iter()
            .all(|&q| grid.neighbors_iter(q).all(|r| mask[r] || f[r] < f[p]));
        if is_max {
            out.push(zone);
        }
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq, PartialOrd)]
struct Key<T> {
    attr: T,
    // larger is kept longer: negated leaf rank, then negated depth
    leaf_priority: i64,
    depth_priority: i64,
}

fn key_cmp<T: Scalar>(a: &Key<T>, b: &Key<T>) -> std::cmp::Ordering {
    cmp(a.attr, b.attr)
        .then(a.leaf_priority.cmp(&b.leaf_priority))
        .then(a.depth_priority.cmp(&b.depth_priority))
}

/// Extinction value of every maximum under the attribute filter of `kind`,
/// found by filtering, reconstructing and rescanning for maxima.
///
/// The filter `sigma_k` keeps a component when its attribute reaches `k`,
/// where the attribute is measured from the parent's level (dynamics: highest
/// value inside minus parent altitude; volume: sum of `f - parent altitude`
/// inside), the root using its own altitude. A maximum is alive at `k` when
/// its pixel set lies inside a regional maximum of `sigma_k(f)`; once the root
/// is filtered out nothing is alive. The extinction value is the last `k`
/// before the maximum is first found dead.
///
/// Attribute ties are resolved by a symbolic perturbation: among equal
/// attributes the branch of the maximum with the smaller leaf position
/// survives longer, and ancestors outlive descendants. Leaf positions follow
/// the max-tree numbering (increasing altitude, then smallest pixel).
///
/// Returns `(maximum pixel set, extinction)` in leaf order.
pub fn oracle_extinctions<T: Scalar>(
    image: &Image<T>,
    kind: MeasureKind,
) -> Result<Vec<(Vec<usize>, T)>> {
    if kind == MeasureKind::Alt {
        return Err(Error::Oracle("altitude is not an extinction value".into()));
    }
    let tree = oracle_component_tree(image)?;
    let f = image.values();
    let m = tree.components.len();
    let root = tree.root();

    let attr: Vec<T> = (0..m)
        .map(|c| {
            let reference = tree.altitudes[tree.parent[c]];
            let px = &tree.components[c];
            match kind {
                MeasureKind::Dyn => {
                    px.iter().map(|&p| f[p]).fold(T::neg_infinity(), T::max) - reference
                }
                _ => px.iter().map(|&p| f[p] - reference).sum(),
            }
        })
        .collect();
    let leaves = tree.leaves();
    let mut leaf_rank = vec![usize::MAX; m];
    for (r, &l) in leaves.iter().enumerate() {
        leaf_rank[l] = r;
    }
    let depth: Vec<i64> = (0..m)
        .map(|c| {
            let mut d = 0;
            let mut cur = c;
            while tree.parent[cur] != cur {
                cur = tree.parent[cur];
                d += 1;
            }
            d
        })
        .collect();

    // dominant leaf of every component, smallest components first
    let mut by_size: Vec<usize> = (0..m).collect();
    by_size.sort_by_key(|&c| tree.components[c].len());
    let mut dominant = vec![usize::MAX; m];
    let mut keys: Vec<Option<Key<T>>> = vec![None; m];
    for &c in &by_size {
        if leaf_rank[c] != usize::MAX {
            dominant[c] = c;
        } else {
            let best = (0..m)
                .filter(|&d| d != c && tree.parent[d] == c)
                .max_by(|&a, &b| key_cmp(keys[a].as_ref().unwrap(), keys[b].as_ref().unwrap()))
                .expect("internal component has children");
            dominant[c] = dominant[best];
        }
        keys[c] = Some(Key {
            attr: attr[c],
            leaf_priority: -(leaf_rank[dominant[c]] as i64),
            depth_priority: -depth[c],
        });
    }
    let keys: Vec<Key<T>> = keys.into_iter().map(Option::unwrap).collect();
    let mut thresholds: Vec<usize> = (0..m).collect();
    thresholds.sort_by(|&a, &b| key_cmp(&keys[a], &keys[b]));

    // smallest component holding each pixel
    let mut pixel_comp = vec![usize::MAX; f.len()];
    for c in 0..m {
        for &p in &tree.components[c] {
            let cur = pixel_comp[p];
            if cur == usize::MAX || tree.components[c].len() < tree.components[cur].len() {
                pixel_comp[p] = c;
            }
        }
    }

    let mut extinction: Vec<Option<T>> = vec![None; leaves.len()];
    let mut dead = vec![false; leaves.len()];
    for &t in &thresholds {
        let threshold = keys[t];
        let mut kept = vec![false; m];
        // components by increasing size visit parents after children, so
        // walk by decreasing size to decide ancestors first
        for &c in by_size.iter().rev() {
            let parent_ok = c == root || kept[tree.parent[c]];
            kept[c] = parent_ok && key_cmp(&keys[c], &threshold) != std::cmp::Ordering::Less;
        }
        let alive: Vec<bool> = if !kept[root] {
            vec![false; leaves.len()]
        } else {
            let values: Vec<T> = (0..f.len())
                .map(|p| {
                    let mut c = pixel_comp[p];
                    while !kept[c] {
                        c = tree.parent[c];
                    }
                    tree.altitudes[c]
                })
                .collect();
            let filtered = Image::new(values, *image.grid())?;
            let maxima = regional_maxima(&filtered);
            leaves
                .iter()
                .map(|&l| {
                    let set = &tree.components[l];
                    maxima
                        .iter()
                        .any(|z| set.iter().all(|p| z.binary_search(p).is_ok()))
                })
                .collect()
        };
        // a removed maximum may later sit inside a flattened plateau; only
        // the first threshold at which it is not contained counts
        for (i, &a) in alive.iter().enumerate() {
            if dead[i] {
                continue;
            }
            if a {
                extinction[i] = Some(threshold.attr);
            } else {
                dead[i] = true;
            }
        }
        if dead.iter().all(|&d| d) {
            break;
        }
    }

    leaves
        .iter()
        .zip(extinction)
        .map(|(&l, e)| {
            let e =
                e.ok_or_else(|| Error::Oracle(format!("maximum at component {l} never alive")))?;
            Ok((tree.components[l].clone(), e))
        })
        .collect()
}

/// Extinction value of the maximum containing `pixel`.
pub fn oracle_extinction<T: Scalar>(
    image: &Image<T>,
    kind: MeasureKind,
    pixel: usize,
) -> Result<T> {
    oracle_extinctions(image, kind)?
        .into_iter()
        .find(|(set, _)| set.binary_search(&pixel).is_ok())
        .map(|(_, e)| e)
        .ok_or_else(|| Error::Oracle(format!("pixel {pixel} is not in a regional maximum")))
}

/// 0-dimensional superlevel persistence of a 1-d signal by a decreasing sweep
/// with union-find (elder rule). Returns `(peak pixel, lifetime)` sorted by
/// peak pixel; the global maximum is paired with the global minimum.
pub fn oracle_persistence_1d<T: Scalar>(signal: &[T]) -> Vec<(usize, T)> {
    let n = signal.len();
    if n == 0 {
        return Vec::new();
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| cmp(signal[b], signal[a]).then(a.cmp(&b)));

    let mut comp = vec![usize::MAX; n];
    let mut peak: Vec<usize> = Vec::new();
    let mut link: Vec<usize> = Vec::new();
    fn root(link: &mut [usize], mut c: usize) -> usize {
        while link[c] != c {
            link[c] = link[link[c]];
            c = link[c];
        }
        c
    }
    let elder = |a: usize, b: usize| {
        // peaks compare by value, then by smaller index
        cmp(signal[a], signal[b]).then(b.cmp(&a)) == std::cmp::Ordering::Greater
    };

    let mut pairs = Vec::new();
    for &p in &order {
        let mut roots: Vec<usize> = [p.wrapping_sub(1), p + 1]
            .into_iter()
            .filter(|&q| q < n && comp[q] != usize::MAX)
            .map(|q| root(&mut link, comp[q]))
            .collect();
        roots.dedup();
        match roots.as_slice() {
            [] => {
                let id = peak.len();
                peak.push(p);
                link.push(id);
                comp[p] = id;
            }
            [r] => comp[p] = *r,
            [a, b] => {
                let (keep, die) = if elder(peak[*a], peak[*b]) {
                    (*a, *b)
                } else {
                    (*b, *a)
                };
                pairs.push((peak[die], signal[peak[die]] - signal[p]));
                link[die] = keep;
                comp[p] = keep;
            }
            _ => unreachable!("a 1-d sample has at most two neighbours"),
        }
    }
    let last = root(&mut link, comp[order[0]]);
    let global_min = signal[order[n - 1]];
    pairs.push((peak[last], signal[peak[last]] - global_min));
    pairs.sort_by_key(|&(p, _)| p);
    pairs
}

/// Central finite differences of `func` at `point`, one coordinate at a time.
pub fn finite_difference_grad<T, F>(func: F, point: &[T], step: T) -> Vec<T>
where
    T: Scalar,
    F: Fn(&[T]) -> T,
{
    let mut x = point.to_vec();
    let two = T::of(2.0);
    (0..point.len())
        .map(|i| {
            x[i] = point[i] + step;
            let up = func(&x);
            x[i] = point[i] - step;
            let down = func(&x);
            x[i] = point[i];
            (up - down) / (two * step)
        })
        .collect()
}

/// Builds a random integer image for oracle sweeps.
pub fn random_integer_image<R: rand::Rng>(rng: &mut R, grid: Grid, levels: u32) -> Image<f64> {
    let values = (0..grid.len())
        .map(|_| f64::from(rng.gen_range(0..levels)))
        .collect();
    Image::new(values, grid).expect("integer values are finite")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Connectivity;

    fn fig1() -> Image<f64> {
        Image::from_signal(vec![0.0, 0.0, 2.0, 2.0, 1.0, 3.0]).unwrap()
    }

    #[test]
    fn fig1_components() {
        let t = oracle_component_tree(&fig1()).unwrap();
        assert_eq!(
            t.components,
            vec![
                vec![0, 1, 2, 3, 4, 5],
                vec![2, 3, 4, 5],
                vec![2, 3],
                vec![5]
            ]
        );
        assert_eq!(t.altitudes, vec![0.0, 1.0, 2.0, 3.0]);
        assert_eq!(t.parent, vec![0, 0, 1, 1]);
        assert_eq!(t.leaves(), vec![2, 3]);
        assert_eq!(regional_maxima(&fig1()), vec![vec![2, 3], vec![5]]);
    }

    #[test]
    fn constant_image_has_one_component() {
        let g = Grid::new(3, 3, Connectivity::Conn4).unwrap();
        let img = Image::constant(g, 1.0f64);
        let t = oracle_component_tree(&img).unwrap();
        assert_eq!(t.components.len(), 1);
        assert_eq!(regional_maxima(&img).len(), 1);
    }

    #[test]
    fn size_guard() {
        let g = Grid::new(17, 16, Connectivity::Conn8).unwrap();
        let img = Image::constant(g, 0.0f64);
        assert!(matches!(
            oracle_component_tree(&img),
            Err(Error::OracleSizeGuard { .. })
        ));
    }

    #[test]
    fn fig1_extinctions() {
        let img = fig1();
        assert_eq!(oracle_extinction(&img, MeasureKind::Dyn, 5).unwrap(), 3.0);
        assert_eq!(oracle_extinction(&img, MeasureKind::Dyn, 2).unwrap(), 1.0);
        let vol = oracle_extinctions(&img, MeasureKind::Vol).unwrap();
        assert_eq!(vol, vec![(vec![2, 3], 8.0), (vec![5], 2.0)]);
        assert!(oracle_extinction(&img, MeasureKind::Dyn, 0).is_err());
        assert!(oracle_extinctions(&img, MeasureKind::Alt).is_err());
    }

    #[test]
    fn single_maximum_survives_to_full_range() {
        let img = Image::from_signal(vec![0.0f64, 1.0, 4.0, 2.0]).unwrap();
        assert_eq!(oracle_extinction(&img, MeasureKind::Dyn, 2).unwrap(), 4.0);
        assert_eq!(oracle_extinction(&img, MeasureKind::Vol, 2).unwrap(), 7.0);
    }

    #[test]
    fn persistence_examples() {
        let pairs = oracle_persistence_1d(&[0.0f64, 2.0, 1.0, 3.0, 0.0]);
        assert_eq!(pairs, vec![(1, 1.0), (3, 3.0)]);
        let mono = oracle_persistence_1d(&[0.0f64, 1.0, 2.0, 5.0]);
        assert_eq!(mono, vec![(3, 5.0)]);
    }

    #[test]
    fn finite_differences_of_quadratic() {
        let g = finite_difference_grad(
            |x: &[f64]| x.iter().map(|v| v * v).sum(),
            &[1.0, 0.0, 0.0],
            1e-4,
        );
        assert!((g[0] - 2.0).abs() < 1e-8);
        assert!(g[1].abs() < 1e-8 && g[2].abs() < 1e-8);
    }

    #[test]
    fn oracle_leaf_count_matches_maxima_scan() {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        for _ in 0..100 {
            let g = Grid::new(4, 4, Connectivity::Conn8).unwrap();
            let img = random_integer_image(&mut rng, g, 4);
            let t = oracle_component_tree(&img).unwrap();
            let leaves: Vec<Vec<usize>> = t
                .leaves()
                .into_iter()
                .map(|l| t.components[l].clone())
                .collect();
            let mut scan = regional_maxima(&img);
            let mut leaves = leaves;
            leaves.sort();
            scan.sort();
            assert_eq!(leaves, scan);
        }
    }
}
