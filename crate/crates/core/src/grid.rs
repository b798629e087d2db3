//! Pixel domain and adjacency.
//!
//! Pixels are indexed `0..width*height` in row-major order. A grid with
//! `height == 1` encodes a 1-d signal.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Connectivity {
    /// Left/right neighbours of a 1-d signal.
    Chain2,
    Conn4,
    Conn8,
}

impl Connectivity {
    fn offsets(self) -> &'static [(isize, isize)] {
        // (dx, dy) listed so that neighbour indices come out ascending.
        match self {
            Connectivity::Chain2 => &[(-1, 0), (1, 0)],
            Connectivity::Conn4 => &[(0, -1), (-1, 0), (1, 0), (0, 1)],
            Connectivity::Conn8 => &[
                (-1, -1),
                (0, -1),
                (1, -1),
                (-1, 0),
                (1, 0),
                (-1, 1),
                (0, 1),
                (1, 1),
            ],
        }
    }
}

impl fmt::Display for Connectivity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Connectivity::Chain2 => "chain2",
            Connectivity::Conn4 => "conn4",
            Connectivity::Conn8 => "conn8",
        })
    }
}

impl FromStr for Connectivity {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "chain2" => Ok(Connectivity::Chain2),
            "conn4" => Ok(Connectivity::Conn4),
            "conn8" => Ok(Connectivity::Conn8),
            other => Err(Error::Grid(format!("unknown connectivity '{other}'"))),
        }
    }
}

/// Immutable rectangular pixel grid.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Grid {
    width: usize,
    height: usize,
    connectivity: Connectivity,
}

impl Grid {
    pub fn new(width: usize, height: usize, connectivity: Connectivity) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::Grid(format!(
                "dimensions must be positive, got {width}x{height}"
            )));
        }
        if connectivity == Connectivity::Chain2 && height != 1 {
            return Err(Error::Grid(format!(
                "chain2 connectivity requires height 1, got {height}"
            )));
        }
        Ok(Grid {
            width,
            height,
            connectivity,
        })
    }

    /// 1-d signal of `len` samples.
    pub fn chain(len: usize) -> Result<Self> {
        Grid::new(len, 1, Connectivity::Chain2)
    }

    /// Default connectivity for a `width x height` domain: chain for 1-d
    /// signals, 8-adjacency otherwise.
    pub fn with_default_connectivity(width: usize, height: usize) -> Result<Self> {
        let connectivity = if height == 1 {
            Connectivity::Chain2
        } else {
            Connectivity::Conn8
        };
        Grid::new(width, height, connectivity)
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn connectivity(&self) -> Connectivity {
        self.connectivity
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.width * self.height
    }

    /// Always false; grids have at least one pixel.
    #[inline]
    pub fn is_empty(&self) -> bool {
        false
    }

    #[inline]
    pub fn coords(&self, i: usize) -> (usize, usize) {
        (i % self.width, i / self.width)
    }

    #[inline]
    pub fn index(&self, x: usize, y: usize) -> usize {
        y * self.width + x
    }

    /// Same geometry with another adjacency relation.
    pub fn with_connectivity(&self, connectivity: Connectivity) -> Result<Self> {
        Grid::new(self.width, self.height, connectivity)
    }

    /// Neighbours of pixel `i` in ascending index order.
    pub fn neighbors(&self, i: usize) -> Result<Vec<usize>> {
        if i >= self.len() {
            return Err(Error::PixelOutOfRange {
                index: i,
                len: self.len(),
            });
        }
        Ok(self.neighbors_iter(i).collect())
    }

    /// Unchecked neighbour iterator; `i` must be in range.
    #[inline]
    pub fn neighbors_iter(&self, i: usize) -> Neighbors {
        let (x, y) = self.coords(i);
        Neighbors {
            offsets: self.connectivity.offsets().iter(),
            x: x as isize,
            y: y as isize,
            width: self.width as isize,
            height: self.height as isize,
        }
    }

    /// Pixel pairs `(p, q)` with `p < q` that are horizontally or vertically
    /// adjacent, each pair once. Independent of the tree connectivity.
    pub fn axis_pairs(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        let w = self.width;
        let h = self.height;
        (0..h).flat_map(move |y| {
            (0..w).flat_map(move |x| {
                let p = y * w + x;
                let right = (x + 1 < w).then_some((p, p + 1));
                let down = (y + 1 < h).then_some((p, p + w));
                right.into_iter().chain(down)
            })
        })
    }
}

/// Pixels reachable from `start` through pixels where `mask` is true,
/// ascending. Empty when `start` itself is masked out.
pub fn flood_fill(grid: &Grid, mask: &[bool], start: usize) -> Vec<usize> {
    if !mask[start] {
        return Vec::new();
    }
    let mut seen = vec![false; grid.len()];
    let mut stack = vec![start];
    let mut out = Vec::new();
    seen[start] = true;
    while let Some(p) = stack.pop() {
        out.push(p);
        for q in grid.neighbors_iter(p) {
            if mask[q] && !seen[q] {
                seen[q] = true;
                stack.push(q);
            }
        }
    }
    out.sort_unstable();
    out
}

/// Connected components of the masked pixel set, each sorted, ordered by
/// smallest pixel.
pub fn connected_components(grid: &Grid, mask: &[bool]) -> Vec<Vec<usize>> {
    let mut assigned = vec![false; grid.len()];
    let mut comps = Vec::new();
    for p in 0..grid.len() {
        if mask[p] && !assigned[p] {
            let comp = flood_fill(grid, mask, p);
            for &q in &comp {
                assigned[q] = true;
            }
            comps.push(comp);
        }
    }
    comps
}

/// Iterator over the neighbours of one pixel.
#[derive(Clone, Debug)]
pub struct Neighbors {
    offsets: std::slice::Iter<'static, (isize, isize)>,
    x: isize,
    y: isize,
    width: isize,
    height: isize,
}

impl Iterator for Neighbors {
    type Item = usize;

    #[inline]
    fn next(&mut self) -> Option<usize> {
        for &(dx, dy) in self.offsets.by_ref() {
            let nx = self.x + dx;
            let ny = self.y + dy;
            if nx >= 0 && ny >= 0 && nx < self.width && ny < self.height {
                return Some((ny * self.width + nx) as usize);
            }
        }
        None
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_dimensions() {
        assert!(Grid::new(0, 3, Connectivity::Conn4).is_err());
        assert!(Grid::new(3, 0, Connectivity::Conn8).is_err());
        assert!(Grid::new(3, 2, Connectivity::Chain2).is_err());
        assert!(Grid::new(6, 1, Connectivity::Chain2).is_ok());
    }

    #[test]
    fn chain_neighbors() {
        let g = Grid::chain(6).unwrap();
        assert_eq!(g.len(), 6);
        assert_eq!(g.neighbors(0).unwrap(), vec![1]);
        assert_eq!(g.neighbors(3).unwrap(), vec![2, 4]);
        assert_eq!(g.neighbors(5).unwrap(), vec![4]);
        assert!(g.neighbors(6).is_err());
    }

    #[test]
    fn single_pixel_has_no_neighbors() {
        let g = Grid::new(1, 1, Connectivity::Conn4).unwrap();
        assert!(g.neighbors(0).unwrap().is_empty());
    }

    #[test]
    fn conn8_counts() {
        let g = Grid::new(3, 3, Connectivity::Conn8).unwrap();
        assert_eq!(g.neighbors(4).unwrap(), vec![0, 1, 2, 3, 5, 6, 7, 8]);
        assert_eq!(g.neighbors(0).unwrap().len(), 3);
        let g4 = g.with_connectivity(Connectivity::Conn4).unwrap();
        assert_eq!(g4.neighbors(4).unwrap(), vec![1, 3, 5, 7]);
        assert_eq!(g4.neighbors(8).unwrap(), vec![5, 7]);
    }

    #[test]
    fn adjacency_is_symmetric_and_irreflexive() {
        for conn in [Connectivity::Conn4, Connectivity::Conn8] {
            for (w, h) in [(1, 5), (5, 1), (4, 3), (5, 5)] {
                let g = Grid::new(w, h, conn).unwrap();
                for i in 0..g.len() {
                    let ns = g.neighbors(i).unwrap();
                    assert!(ns.windows(2).all(|p| p[0] < p[1]));
                    assert!(!ns.contains(&i));
                    for j in ns {
                        assert!(g.neighbors(j).unwrap().contains(&i));
                    }
                }
            }
        }
    }

    #[test]
    fn axis_pairs_cover_4_adjacency_once() {
        let g = Grid::new(4, 3, Connectivity::Conn8).unwrap();
        let pairs: Vec<_> = g.axis_pairs().collect();
        assert_eq!(pairs.len(), 3 * 3 + 4 * 2);
        let g4 = g.with_connectivity(Connectivity::Conn4).unwrap();
        for (p, q) in pairs {
            assert!(p < q);
            assert!(g4.neighbors(p).unwrap().contains(&q));
        }
    }
    #[test]
    fn flood_fill_matches_adjacency_closure() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for _ in 0..200 {
            let w = rng.gen_range(1..=5);
            let h = rng.gen_range(1..=5);
            let conn = if rng.gen_bool(0.5) {
                Connectivity::Conn4
            } else {
                Connectivity::Conn8
            };
            let g = Grid::new(w, h, conn).unwrap();
            let n = g.len();
            let mask: Vec<bool> = (0..n).map(|_| rng.gen_bool(0.6)).collect();
            // reach[i][j]: transitive closure of adjacency restricted to the mask
            let mut reach = vec![vec![false; n]; n];
            for i in 0..n {
                reach[i][i] = mask[i];
                for j in 0..n {
                    let (xi, yi) = g.coords(i);
                    let (xj, yj) = g.coords(j);
                    let dx = xi.abs_diff(xj);
                    let dy = yi.abs_diff(yj);
                    let adj = match conn {
                        Connectivity::Conn4 => dx + dy == 1,
                        _ => dx.max(dy) == 1,
                    };
                    if adj && mask[i] && mask[j] {
                        reach[i][j] = true;
                    }
                }
            }
            for k in 0..n {
                for i in 0..n {
                    for j in 0..n {
                        if reach[i][k] && reach[k][j] {
                            reach[i][j] = true;
                        }
                    }
                }
            }
            for (s, row) in reach.iter().enumerate() {
                let expected: Vec<usize> = (0..n).filter(|&j| row[j]).collect();
                assert_eq!(flood_fill(&g, &mask, s), expected);
            }
            let total: usize = connected_components(&g, &mask).iter().map(Vec::len).sum();
            assert_eq!(total, mask.iter().filter(|&&b| b).count());
        }
    }
}
