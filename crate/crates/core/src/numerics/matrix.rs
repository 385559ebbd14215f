use std::fmt;

use crate::error::{Error, Result};

/// Row-major dense matrix of `f64`.
#[derive(Clone, PartialEq)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self::filled(rows, cols, 0.0)
    }

    pub fn filled(rows: usize, cols: usize, value: f64) -> Self {
        Self {
            rows,
            cols,
            data: vec![value; rows * cols],
        }
    }

    pub fn scalar(value: f64) -> Self {
        Self::filled(1, 1, value)
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::dim(
                "from_vec",
                format!("{} values for a {rows}x{cols} matrix", data.len()),
            ));
        }
        Ok(Self { rows, cols, data })
    }

    /// Builds a matrix from equally sized rows.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let cols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(rows.len() * cols);
        for (i, r) in rows.iter().enumerate() {
            let r = r.as_ref();
            if r.len() != cols {
                return Err(Error::dim(
                    "from_rows",
                    format!("row {i} has {} entries, expected {cols}", r.len()),
                ));
            }
            data.extend_from_slice(r);
        }
        Ok(Self {
            rows: rows.len(),
            cols,
            data,
        })
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.set(i, i, 1.0);
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, value: f64) {
        self.data[r * self.cols + c] = value;
    }

    #[inline]
    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn row_iter(&self) -> impl Iterator<Item = &[f64]> {
        // chunks_exact panics on 0; a 0-column matrix has no meaningful rows anyway
        self.data.chunks_exact(self.cols.max(1)).take(self.rows)
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn transpose(&self) -> Self {
        let mut out = Self::zeros(self.cols, self.rows);
        for r in 0..self.rows {
            for c in 0..self.cols {
                out.data[c * self.rows + r] = self.data[r * self.cols + c];
            }
        }
        out
    }

    /// Copies the listed rows, in order, into a new matrix.
    pub fn gather_rows(&self, indices: &[usize]) -> Result<Self> {
        let mut data = Vec::with_capacity(indices.len() * self.cols);
        for &i in indices {
            if i >= self.rows {
                return Err(Error::IndexOutOfRange {
                    what: "matrix row",
                    index: i,
                    size: self.rows,
                });
            }
            data.extend_from_slice(self.row(i));
        }
        Ok(Self {
            rows: indices.len(),
            cols: self.cols,
            data,
        })
    }

    /// `self += other`, shapes must agree.
    pub fn add_assign(&mut self, other: &DenseMatrix) -> Result<()> {
        self.ensure_same_shape(other, "add_assign")?;
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
        Ok(())
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub(crate) fn ensure_same_shape(&self, other: &DenseMatrix, op: &'static str) -> Result<()> {
        if self.shape() != other.shape() {
            return Err(Error::dim(
                op,
                format!("{:?} vs {:?}", self.shape(), other.shape()),
            ));
        }
        Ok(())
    }
}

impl fmt::Debug for DenseMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "DenseMatrix {}x{} [", self.rows, self.cols)?;
        for r in 0..self.rows.min(8) {
            writeln!(f, "  {:?}", self.row(r))?;
        }
        if self.rows > 8 {
            writeln!(f, "  ... {} more rows", self.rows - 8)?;
        }
        write!(f, "]")
    }
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub(crate) fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// `a · b` for `a: n×k`, `b: k×m`.
pub fn matmul(a: &DenseMatrix, b: &DenseMatrix) -> Result<DenseMatrix> {
    if a.cols != b.rows {
        return Err(Error::dim(
            "matmul",
            format!("{:?} x {:?}", a.shape(), b.shape()),
        ));
    }
    let mut out = DenseMatrix::zeros(a.rows, b.cols);
    for i in 0..a.rows {
        let a_row = a.row(i);
        let out_row = &mut out.data[i * b.cols..(i + 1) * b.cols];
        for (k, &a_ik) in a_row.iter().enumerate() {
            if a_ik == 0.0 {
                continue;
            }
            for (o, &b_kj) in out_row.iter_mut().zip(b.row(k)) {
                *o += a_ik * b_kj;
            }
        }
    }
    Ok(out)
}

/// `aᵀ · b` for `a: k×n`, `b: k×m`, without materializing the transpose.
pub fn matmul_tn(a: &DenseMatrix, b: &DenseMatrix) -> Result<DenseMatrix> {
    if a.rows != b.rows {
        return Err(Error::dim(
            "matmul_tn",
            format!("{:?}ᵀ x {:?}", a.shape(), b.shape()),
        ));
    }
    let mut out = DenseMatrix::zeros(a.cols, b.cols);
    for k in 0..a.rows {
        let b_row = b.row(k);
        for (i, &a_ki) in a.row(k).iter().enumerate() {
            if a_ki == 0.0 {
                continue;
            }
            let out_row = &mut out.data[i * b.cols..(i + 1) * b.cols];
            for (o, &b_kj) in out_row.iter_mut().zip(b_row) {
                *o += a_ki * b_kj;
            }
        }
    }
    Ok(out)
}

/// `a · bᵀ` for `a: n×k`, `b: m×k`.
pub fn matmul_nt(a: &DenseMatrix, b: &DenseMatrix) -> Result<DenseMatrix> {
    if a.cols != b.cols {
        return Err(Error::dim(
            "matmul_nt",
            format!("{:?} x {:?}ᵀ", a.shape(), b.shape()),
        ));
    }
    let mut out = DenseMatrix::zeros(a.rows, b.rows);
    for i in 0..a.rows {
        let a_row = a.row(i);
        for j in 0..b.rows {
            out.data[i * b.rows + j] = dot(a_row, b.row(j));
        }
    }
    Ok(out)
}
