//! Row-major image container used for masks, scalar maps, and normal maps.

use crate::Vec3;

/// A dense `height × width` raster stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid<T> {
    width: usize,
    height: usize,
    data: Vec<T>,
}

impl<T: Clone> Grid<T> {
    /// Creates a grid filled with `value`.
    pub fn filled(width: usize, height: usize, value: T) -> Self {
        Self {
            width,
            height,
            data: vec![value; width * height],
        }
    }
}

impl<T> Grid<T> {
    /// Builds a grid by evaluating `f(x, y)` at every pixel.
    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Self {
            width,
            height,
            data,
        }
    }

    /// Wraps an existing row-major buffer. Panics if the length disagrees.
    pub fn from_vec(width: usize, height: usize, data: Vec<T>) -> Self {
        assert_eq!(data.len(), width * height, "grid buffer length mismatch");
        Self {
            width,
            height,
            data,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    /// `(width, height)` pair.
    pub fn shape(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> &T {
        &self.data[y * self.width + x]
    }

    #[inline]
    pub fn get_mut(&mut self, x: usize, y: usize) -> &mut T {
        &mut self.data[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, value: T) {
        self.data[y * self.width + x] = value;
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<T> {
        self.data
    }

    pub fn iter(&self) -> std::slice::Iter<'_, T> {
        self.data.iter()
    }

    /// Iterates `(x, y, &value)` in row-major order.
    pub fn pixels(&self) -> impl Iterator<Item = (usize, usize, &T)> {
        let w = self.width;
        self.data
            .iter()
            .enumerate()
            .map(move |(i, v)| (i % w, i / w, v))
    }

    /// Applies `f` to every pixel, producing a new grid of the same shape.
    pub fn map<U>(&self, f: impl FnMut(&T) -> U) -> Grid<U> {
        Grid {
            width: self.width,
            height: self.height,
            data: self.data.iter().map(f).collect(),
        }
    }

    /// True when both grids have identical width and height.
    pub fn same_shape<U>(&self, other: &Grid<U>) -> bool {
        self.width == other.width && self.height == other.height
    }
}

impl Grid<bool> {
    /// Number of `true` pixels.
    pub fn count_true(&self) -> usize {
        self.data.iter().filter(|&&b| b).count()
    }

    /// Converts a binary mask to a 0.0/1.0 scalar map.
    pub fn to_scalar(&self) -> Grid<f64> {
        self.map(|&b| if b { 1.0 } else { 0.0 })
    }
}

/// Binary coverage mask.
pub type Mask = Grid<bool>;
/// Scalar-valued raster (intensity, DoP, AoP, depth).
pub type ScalarMap = Grid<f64>;
/// Per-pixel 3-vector raster (normal maps).
pub type VectorMap = Grid<Vec3>;

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn from_fn_indexing() {
        let g = Grid::from_fn(3, 2, |x, y| 10 * y + x);
        assert_eq!(*g.get(2, 1), 12);
        assert_eq!(*g.get(0, 0), 0);
        assert_eq!(g.shape(), (3, 2));
    }

    #[test]
    fn mask_count_and_scalar() {
        let mut m = Mask::filled(2, 2, false);
        m.set(1, 0, true);
        assert_eq!(m.count_true(), 1);
        assert_eq!(*m.to_scalar().get(1, 0), 1.0);
        assert_eq!(*m.to_scalar().get(0, 0), 0.0);
    }

    #[test]
    #[should_panic]
    fn from_vec_length_checked() {
        let _ = Grid::from_vec(2, 2, vec![1.0; 3]);
    }
}
