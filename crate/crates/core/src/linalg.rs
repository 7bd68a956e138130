//! Sparse matrices and a Jacobi-preconditioned conjugate gradient solver.

use std::io::Write;

/// Compressed sparse row matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    rows: usize,
    cols: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<f64>,
}

/// Coordinate-format accumulator. Duplicate entries are summed on conversion.
#[derive(Debug, Clone, Default)]
pub struct TripletBuilder {
    rows: usize,
    cols: usize,
    entries: Vec<(usize, usize, f64)>,
}

impl TripletBuilder {
    pub fn new(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            entries: Vec::new(),
        }
    }

    pub fn push(&mut self, row: usize, col: usize, value: f64) {
        debug_assert!(row < self.rows && col < self.cols);
        self.entries.push((row, col, value));
    }

    pub fn extend(&mut self, other: TripletBuilder) {
        self.entries.extend(other.entries);
    }

    /// Adds `weight * (e_i - e_j)(e_i - e_j)^T`, the Hessian block of
    /// `weight * (x_i - x_j)^2` up to a factor of two.
    pub fn push_pair(&mut self, i: usize, j: usize, weight: f64) {
        self.push(i, i, weight);
        self.push(j, j, weight);
        self.push(i, j, -weight);
        self.push(j, i, -weight);
    }

    pub fn build(mut self) -> CsrMatrix {
        self.entries.sort_by_key(|e| (e.0, e.1));
        let mut indptr = vec![0usize; self.rows + 1];
        let mut indices = Vec::with_capacity(self.entries.len());
        let mut values: Vec<f64> = Vec::with_capacity(self.entries.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in self.entries {
            if last == Some((r, c)) {
                *values.last_mut().expect("entry present") += v;
            } else {
                indices.push(c);
                values.push(v);
                indptr[r + 1] += 1;
                last = Some((r, c));
            }
        }
        for r in 0..self.rows {
            indptr[r + 1] += indptr[r];
        }
        CsrMatrix {
            rows: self.rows,
            cols: self.cols,
            indptr,
            indices,
            values,
        }
    }
}

impl CsrMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        TripletBuilder::new(rows, cols).build()
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let span = self.indptr[r]..self.indptr[r + 1];
        self.indices[span.clone()]
            .iter()
            .copied()
            .zip(self.values[span].iter().copied())
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.row(r).find(|&(cc, _)| cc == c).map_or(0.0, |(_, v)| v)
    }

    /// `y = self * x`
    pub fn mul_vec(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.cols);
        assert_eq!(y.len(), self.rows);
        for (r, out) in y.iter_mut().enumerate() {
            *out = self.row(r).map(|(c, v)| v * x[c]).sum();
        }
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.rows.min(self.cols)).map(|r| self.get(r, r)).collect()
    }

    pub fn scaled(&self, factor: f64) -> Self {
        let mut out = self.clone();
        out.values.iter_mut().for_each(|v| *v *= factor);
        out
    }

    /// `self + other`, both of identical shape.
    pub fn add(&self, other: &CsrMatrix) -> CsrMatrix {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        let mut b = TripletBuilder::new(self.rows, self.cols);
        for m in [self, other] {
            for r in 0..m.rows {
                for (c, v) in m.row(r) {
                    b.push(r, c, v);
                }
            }
        }
        b.build()
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut out = vec![vec![0.0; self.cols]; self.rows];
        for (r, row) in out.iter_mut().enumerate() {
            for (c, v) in self.row(r) {
                row[c] += v;
            }
        }
        out
    }

    pub fn max_asymmetry(&self) -> f64 {
        let mut worst = 0.0f64;
        for r in 0..self.rows {
            for (c, v) in self.row(r) {
                worst = worst.max((v - self.get(c, r)).abs());
            }
        }
        worst
    }

    /// Matrix Market coordinate dump for debugging.
    pub fn write_matrix_market(&self, mut out: impl Write) -> std::io::Result<()> {
        writeln!(out, "%%MatrixMarket matrix coordinate real general")?;
        writeln!(out, "{} {} {}", self.rows, self.cols, self.nnz())?;
        for r in 0..self.rows {
            for (c, v) in self.row(r) {
                writeln!(out, "{} {} {:.17e}", r + 1, c + 1, v)?;
            }
        }
        Ok(())
    }
}

/// Symmetric positive (semi-)definite operator usable by [`pcg`].
pub trait LinearOperator {
    fn dim(&self) -> usize;
    fn apply(&self, x: &[f64], y: &mut [f64]);
    /// Diagonal used for Jacobi preconditioning.
    fn diagonal(&self) -> Vec<f64>;
}

impl LinearOperator for CsrMatrix {
    fn dim(&self) -> usize {
        self.rows
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        self.mul_vec(x, y)
    }

    fn diagonal(&self) -> Vec<f64> {
        CsrMatrix::diagonal(self)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CgOptions {
    /// Stop once `||b - Ax|| <= tol * ||b||`.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for CgOptions {
    fn default() -> Self {
        Self {
            tol: 1e-6,
            max_iter: 2000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CgReport {
    pub iterations: usize,
    pub residual_norm: f64,
    pub rhs_norm: f64,
    pub converged: bool,
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Solves `A x = b` in place starting from the contents of `x`.
///
/// `observe` is called with the iterate after every CG step.
pub fn pcg_observed<Op: LinearOperator + ?Sized>(
    op: &Op,
    b: &[f64],
    x: &mut [f64],
    opts: CgOptions,
    mut observe: impl FnMut(&[f64]),
) -> CgReport {
    let n = op.dim();
    assert_eq!(b.len(), n);
    assert_eq!(x.len(), n);
    let inv_diag: Vec<f64> = op
        .diagonal()
        .into_iter()
        .map(|d| if d > 0.0 { 1.0 / d } else { 1.0 })
        .collect();
    let b_norm = norm(b);
    let target = opts.tol * b_norm;

    let mut ax = vec![0.0; n];
    op.apply(x, &mut ax);
    let mut r: Vec<f64> = b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect();
    let mut r_norm = norm(&r);
    if r_norm <= target {
        return CgReport {
            iterations: 0,
            residual_norm: r_norm,
            rhs_norm: b_norm,
            converged: true,
        };
    }
    let mut z: Vec<f64> = r.iter().zip(&inv_diag).map(|(ri, di)| ri * di).collect();
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut ap = vec![0.0; n];
    for it in 1..=opts.max_iter {
        op.apply(&p, &mut ap);
        let pap = dot(&p, &ap);
        if !(pap > 0.0) {
            // Search direction in the null space; nothing more to gain.
            return CgReport {
                iterations: it - 1,
                residual_norm: r_norm,
                rhs_norm: b_norm,
                converged: r_norm <= target,
            };
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        observe(x);
        r_norm = norm(&r);
        if r_norm <= target {
            return CgReport {
                iterations: it,
                residual_norm: r_norm,
                rhs_norm: b_norm,
                converged: true,
            };
        }
        for i in 0..n {
            z[i] = r[i] * inv_diag[i];
        }
        let rz_next = dot(&r, &z);
        let beta = rz_next / rz;
        rz = rz_next;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    CgReport {
        iterations: opts.max_iter,
        residual_norm: r_norm,
        rhs_norm: b_norm,
        converged: false,
    }
}

pub fn pcg<Op: LinearOperator + ?Sized>(op: &Op, b: &[f64], x: &mut [f64], opts: CgOptions) -> CgReport {
    pcg_observed(op, b, x, opts, |_| {})
}
