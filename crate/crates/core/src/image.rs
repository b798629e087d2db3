use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::scalar::Scalar;

/// Real-valued image on a [`Grid`]: the optimisation variable.
#[derive(Clone, Debug, PartialEq)]
pub struct Image<T> {
    values: Vec<T>,
    grid: Grid,
}

impl<T: Scalar> Image<T> {
    /// Fails when the length does not match the grid or a value is not finite.
    pub fn new(values: Vec<T>, grid: Grid) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::LengthMismatch {
                what: "image values vs grid size",
                expected: grid.len(),
                actual: values.len(),
            });
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinitePixel(i));
        }
        Ok(Image { values, grid })
    }

    /// 1-d signal on a chain grid.
    pub fn from_signal(values: Vec<T>) -> Result<Self> {
        let grid = Grid::chain(values.len())?;
        Image::new(values, grid)
    }

    pub fn constant(grid: Grid, value: T) -> Self {
        Image {
            values: vec![value; grid.len()],
            grid,
        }
    }

    #[inline]
    pub fn values(&self) -> &[T] {
        &self.values
    }

    #[inline]
    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.values.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn into_values(self) -> Vec<T> {
        self.values
    }

    /// Replaces the grid, keeping the pixel values.
    pub fn with_grid(self, grid: Grid) -> Result<Self> {
        Image::new(self.values, grid)
    }

    /// Unchecked mutable access for in-place optimiser updates; callers are
    /// responsible for keeping values finite.
    pub(crate) fn values_mut(&mut self) -> &mut [T] {
        &mut self.values
    }

    pub fn min_max(&self) -> (T, T) {
        self.values
            .iter()
            .fold((T::infinity(), T::neg_infinity()), |(lo, hi), &v| {
                (lo.min(v), hi.max(v))
            })
    }

    /// Converts to another scalar precision.
    pub fn cast<U: Scalar>(&self) -> Image<U> {
        Image {
            values: self.values.iter().map(|v| U::of(v.as_f64())).collect(),
            grid: self.grid,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Connectivity;

    #[test]
    fn rejects_mismatch_and_nan() {
        let g = Grid::new(2, 2, Connectivity::Conn4).unwrap();
        assert!(Image::new(vec![0.0f64; 3], g).is_err());
        assert!(matches!(
            Image::new(vec![0.0, f64::NAN, 0.0, 0.0], g),
            Err(Error::NonFinitePixel(1))
        ));
        let img = Image::new(vec![0.5f64, -1.0, 2.0, 0.0], g).unwrap();
        assert_eq!(img.min_max(), (-1.0, 2.0));
    }
}
