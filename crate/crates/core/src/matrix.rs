use num_traits::Float;

/// Dense `dim × cols` matrix stored column by column, so each embedding
/// vector is a contiguous slice.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix<F> {
    dim: usize,
    cols: usize,
    data: Vec<F>,
}

impl<F: Float> Matrix<F> {
    pub fn zeros(dim: usize, cols: usize) -> Self {
        Matrix { dim, cols, data: vec![F::zero(); dim * cols] }
    }

    pub fn from_columns(dim: usize, data: Vec<F>) -> Self {
        assert!(dim > 0 && data.len().is_multiple_of(dim), "column data does not match dimension");
        Matrix { dim, cols: data.len() / dim, data }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn col(&self, j: usize) -> &[F] {
        &self.data[j * self.dim..(j + 1) * self.dim]
    }

    #[inline]
    pub fn col_mut(&mut self, j: usize) -> &mut [F] {
        &mut self.data[j * self.dim..(j + 1) * self.dim]
    }

    pub fn get(&self, row: usize, col: usize) -> F {
        self.data[col * self.dim + row]
    }

    pub fn set(&mut self, row: usize, col: usize, value: F) {
        self.data[col * self.dim + row] = value;
    }

    pub fn push_col(&mut self, values: &[F]) {
        assert_eq!(values.len(), self.dim);
        self.data.extend_from_slice(values);
        self.cols += 1;
    }

    pub fn as_slice(&self) -> &[F] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [F] {
        &mut self.data
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    pub fn cast<G: Float>(&self) -> Matrix<G> {
        Matrix {
            dim: self.dim,
            cols: self.cols,
            data: self.data.iter().map(|&x| G::from(x).unwrap_or_else(G::nan)).collect(),
        }
    }
}
