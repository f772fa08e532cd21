use alloc::vec;
use alloc::vec::Vec;
use core::ops::{Index, IndexMut};

/// Dense 3D array stored x-fastest: `(i, j, k) -> i + nx * (j + ny * k)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Field3 {
    dims: [usize; 3],
    data: Vec<f64>,
}

impl Field3 {
    pub fn zeros(nx: usize, ny: usize, nz: usize) -> Self {
        Self { dims: [nx, ny, nz], data: vec![0.0; nx * ny * nz] }
    }

    pub fn from_fn(nx: usize, ny: usize, nz: usize, mut f: impl FnMut(usize, usize, usize) -> f64) -> Self {
        let mut out = Self::zeros(nx, ny, nz);
        for k in 0..nz {
            for j in 0..ny {
                for i in 0..nx {
                    out[(i, j, k)] = f(i, j, k);
                }
            }
        }
        out
    }

    #[inline]
    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    #[inline]
    pub fn offset(&self, i: usize, j: usize, k: usize) -> usize {
        debug_assert!(i < self.dims[0] && j < self.dims[1] && k < self.dims[2]);
        i + self.dims[0] * (j + self.dims[1] * k)
    }

    /// The x-row at `(j, k)`.
    #[inline]
    pub fn row(&self, j: usize, k: usize) -> &[f64] {
        let o = self.offset(0, j, k);
        &self.data[o..o + self.dims[0]]
    }

    #[inline]
    pub fn row_mut(&mut self, j: usize, k: usize) -> &mut [f64] {
        let o = self.offset(0, j, k);
        let n = self.dims[0];
        &mut self.data[o..o + n]
    }

    /// `len` contiguous values starting at the row `(j, k)`.
    #[inline]
    pub fn span(&self, j: usize, k: usize, len: usize) -> &[f64] {
        let o = self.offset(0, j, k);
        &self.data[o..o + len]
    }

    #[inline]
    pub fn span_mut(&mut self, j: usize, k: usize, len: usize) -> &mut [f64] {
        let o = self.offset(0, j, k);
        &mut self.data[o..o + len]
    }

    /// Set `self[(i, dst)] = f(i, self[(i, src)])` for `i` in `range`, where
    /// `dst` and `src` are `(j, k)` row indices.
    #[inline]
    pub fn set_row_from(
        &mut self,
        dst: (usize, usize),
        src: (usize, usize),
        range: core::ops::Range<usize>,
        mut f: impl FnMut(usize, f64) -> f64,
    ) {
        let (d, s) = (self.offset(0, dst.0, dst.1), self.offset(0, src.0, src.1));
        assert!(range.end <= self.dims[0]);
        for i in range {
            self.data[d + i] = f(i, self.data[s + i]);
        }
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn fill(&mut self, value: f64) {
        self.data.iter_mut().for_each(|x| *x = value);
    }

    pub fn iter(&self) -> impl Iterator<Item = &f64> {
        self.data.iter()
    }

    /// First non-finite entry, if any.
    pub fn first_non_finite(&self) -> Option<((usize, usize, usize), f64)> {
        let pos = self.data.iter().position(|x| !x.is_finite())?;
        let [nx, ny, _] = self.dims;
        Some(((pos % nx, (pos / nx) % ny, pos / (nx * ny)), self.data[pos]))
    }
}

impl Index<(usize, usize, usize)> for Field3 {
    type Output = f64;
    #[inline]
    fn index(&self, (i, j, k): (usize, usize, usize)) -> &f64 {
        &self.data[self.offset(i, j, k)]
    }
}

impl IndexMut<(usize, usize, usize)> for Field3 {
    #[inline]
    fn index_mut(&mut self, (i, j, k): (usize, usize, usize)) -> &mut f64 {
        let o = self.offset(i, j, k);
        &mut self.data[o]
    }
}
