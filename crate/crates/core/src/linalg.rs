//! Sparse symmetric storage, subdomain solvers and small dense kernels.
//!
//! Subdomain systems on structured meshes are banded, so the direct path is a
//! band Cholesky factorization. Conjugate gradients takes over when the band
//! would not fit the storage budget.

use nalgebra::{Complex, DMatrix, DVector};

use crate::error::{Error, Result};

pub type DenseMatrix = DMatrix<f64>;

/// Symmetric sparse matrix; only `row <= col` entries are kept.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseSym {
    n: usize,
    upper: Vec<(usize, usize, f64)>,
    // full (both triangles) CSR for products
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl SparseSym {
    /// Builds from `(row, col, value)` triplets in either triangle; duplicates are summed.
    pub fn from_triplets<I>(n: usize, triplets: I) -> Self
    where
        I: IntoIterator<Item = (usize, usize, f64)>,
    {
        let mut t: Vec<(usize, usize, f64)> = triplets
            .into_iter()
            .map(|(r, c, v)| {
                assert!(r < n && c < n, "entry ({r}, {c}) outside {n}x{n}");
                (r.min(c), r.max(c), v)
            })
            .collect();
        t.sort_by_key(|a| (a.0, a.1));
        let mut upper: Vec<(usize, usize, f64)> = Vec::with_capacity(t.len());
        for (r, c, v) in t {
            match upper.last_mut() {
                Some(last) if last.0 == r && last.1 == c => last.2 += v,
                _ => upper.push((r, c, v)),
            }
        }
        Self::from_upper(n, upper)
    }

    fn from_upper(n: usize, upper: Vec<(usize, usize, f64)>) -> Self {
        let mut counts = vec![0usize; n];
        for &(r, c, _) in &upper {
            counts[r] += 1;
            if r != c {
                counts[c] += 1;
            }
        }
        let mut row_ptr = vec![0usize; n + 1];
        for i in 0..n {
            row_ptr[i + 1] = row_ptr[i] + counts[i];
        }
        let nnz = row_ptr[n];
        let mut col_idx = vec![0usize; nnz];
        let mut values = vec![0.0; nnz];
        let mut fill = row_ptr.clone();
        for &(r, c, v) in &upper {
            col_idx[fill[r]] = c;
            values[fill[r]] = v;
            fill[r] += 1;
            if r != c {
                col_idx[fill[c]] = r;
                values[fill[c]] = v;
                fill[c] += 1;
            }
        }
        for i in 0..n {
            let (s, e) = (row_ptr[i], row_ptr[i + 1]);
            let mut row: Vec<(usize, f64)> = col_idx[s..e].iter().copied().zip(values[s..e].iter().copied()).collect();
            row.sort_by_key(|x| x.0);
            for (k, (c, v)) in row.into_iter().enumerate() {
                col_idx[s + k] = c;
                values[s + k] = v;
            }
        }
        Self { n, upper, row_ptr, col_idx, values }
    }

    pub fn zeros(n: usize) -> Self {
        Self::from_upper(n, Vec::new())
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn nnz_upper(&self) -> usize {
        self.upper.len()
    }

    /// Upper-triangle entries, sorted by `(row, col)`.
    pub fn upper(&self) -> &[(usize, usize, f64)] {
        &self.upper
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        let (s, e) = (self.row_ptr[r], self.row_ptr[r + 1]);
        match self.col_idx[s..e].binary_search(&c) {
            Ok(k) => self.values[s + k],
            Err(_) => 0.0,
        }
    }

    /// `(column, value)` pairs of row `r`, both triangles.
    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let (s, e) = (self.row_ptr[r], self.row_ptr[r + 1]);
        self.col_idx[s..e].iter().copied().zip(self.values[s..e].iter().copied())
    }

    pub fn row_sum(&self, r: usize) -> f64 {
        self.row(r).map(|(_, v)| v).sum()
    }

    pub fn row_dot(&self, r: usize, x: &[f64]) -> f64 {
        self.row(r).map(|(c, v)| v * x[c]).sum()
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        self.mul_vec_into(x, &mut y);
        y
    }

    pub fn mul_vec_into(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.n);
        for (r, out) in y.iter_mut().enumerate().take(self.n) {
            *out = self.row_dot(r, x);
        }
    }

    /// Largest `|row - col|` over stored entries.
    pub fn bandwidth(&self) -> usize {
        self.upper.iter().map(|&(r, c, _)| c - r).max().unwrap_or(0)
    }

    /// `self + other`.
    pub fn add(&self, other: &SparseSym) -> SparseSym {
        assert_eq!(self.n, other.n);
        SparseSym::from_triplets(self.n, self.upper.iter().chain(other.upper.iter()).copied())
    }

    pub fn to_dense(&self) -> DenseMatrix {
        let mut d = DenseMatrix::zeros(self.n, self.n);
        for &(r, c, v) in &self.upper {
            d[(r, c)] = v;
            d[(c, r)] = v;
        }
        d
    }
}

/// Band Cholesky factor `M = L L^T` with half-bandwidth `bw`.
#[derive(Debug, Clone)]
pub struct BandCholesky {
    n: usize,
    bw: usize,
    // row i holds L[i][i-bw..=i], left-padded
    band: Vec<f64>,
}

impl BandCholesky {
    pub fn new(m: &SparseSym) -> Result<Self> {
        let n = m.n();
        let bw = m.bandwidth();
        let w = bw + 1;
        let mut band = vec![0.0; n * w];
        for &(r, c, v) in m.upper() {
            // store lower triangle: (c, r) with r <= c
            band[c * w + (bw - (c - r))] = v;
        }
        for i in 0..n {
            let j0 = i.saturating_sub(bw);
            for j in j0..=i {
                let mut s = band[i * w + (bw - (i - j))];
                let k0 = j0.max(j.saturating_sub(bw));
                for k in k0..j {
                    s -= band[i * w + (bw - (i - k))] * band[j * w + (bw - (j - k))];
                }
                if j == i {
                    if !(s > 0.0) || !s.is_finite() {
                        return Err(Error::Singular { row: i, pivot: s });
                    }
                    band[i * w + bw] = s.sqrt();
                } else {
                    band[i * w + (bw - (i - j))] = s / band[j * w + bw];
                }
            }
        }
        Ok(Self { n, bw, band })
    }

    #[allow(clippy::needless_range_loop)]
    pub fn solve_in_place(&self, x: &mut [f64]) {
        let (n, bw, w) = (self.n, self.bw, self.bw + 1);
        for i in 0..n {
            let mut s = x[i];
            for k in i.saturating_sub(bw)..i {
                s -= self.band[i * w + (bw - (i - k))] * x[k];
            }
            x[i] = s / self.band[i * w + bw];
        }
        for i in (0..n).rev() {
            let mut s = x[i];
            for k in i + 1..(i + bw + 1).min(n) {
                s -= self.band[k * w + (bw - (k - i))] * x[k];
            }
            x[i] = s / self.band[i * w + bw];
        }
    }
}

/// Unpreconditioned conjugate gradients used when the band is too wide.
#[derive(Debug, Clone)]
pub struct ConjugateGradient {
    matrix: SparseSym,
    pub rel_tol: f64,
    pub max_iter: usize,
}

impl ConjugateGradient {
    pub fn new(m: &SparseSym) -> Self {
        Self { matrix: m.clone(), rel_tol: 1e-14, max_iter: 10 * m.n().max(1) }
    }

    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        let n = self.matrix.n();
        let bnorm = norm2(b);
        let mut x = vec![0.0; n];
        if bnorm == 0.0 {
            return Ok(x);
        }
        let mut r = b.to_vec();
        let mut p = r.clone();
        let mut ap = vec![0.0; n];
        let mut rr = dot(&r, &r);
        for _ in 0..self.max_iter {
            if rr.sqrt() <= self.rel_tol * bnorm {
                return Ok(x);
            }
            self.matrix.mul_vec_into(&p, &mut ap);
            let pap = dot(&p, &ap);
            if !(pap > 0.0) {
                return Err(Error::Numeric(format!("CG breakdown, p^T A p = {pap:e}")));
            }
            let alpha = rr / pap;
            for k in 0..n {
                x[k] += alpha * p[k];
                r[k] -= alpha * ap[k];
            }
            let rr_new = dot(&r, &r);
            let beta = rr_new / rr;
            rr = rr_new;
            for k in 0..n {
                p[k] = r[k] + beta * p[k];
            }
        }
        if rr.sqrt() <= self.rel_tol * bnorm {
            Ok(x)
        } else {
            Err(Error::Numeric(format!(
                "CG did not reach relative residual {:e} in {} iterations ({:e})",
                self.rel_tol,
                self.max_iter,
                rr.sqrt() / bnorm
            )))
        }
    }
}

/// Reusable solver for a symmetric positive definite system.
#[derive(Debug, Clone)]
pub enum Factorization {
    Band(BandCholesky),
    Iterative(ConjugateGradient),
}

/// Band entries above which [`factorize`] switches to conjugate gradients.
pub const BAND_STORAGE_LIMIT: usize = 1 << 26;

pub fn factorize(m: &SparseSym) -> Result<Factorization> {
    if m.n() * (m.bandwidth() + 1) > BAND_STORAGE_LIMIT {
        // CG still needs positive diagonal entries
        for i in 0..m.n() {
            let d = m.get(i, i);
            if !(d > 0.0) {
                return Err(Error::Singular { row: i, pivot: d });
            }
        }
        return Ok(Factorization::Iterative(ConjugateGradient::new(m)));
    }
    Ok(Factorization::Band(BandCholesky::new(m)?))
}

impl Factorization {
    pub fn n(&self) -> usize {
        match self {
            Factorization::Band(f) => f.n,
            Factorization::Iterative(cg) => cg.matrix.n(),
        }
    }

    pub fn solve(&self, rhs: &[f64]) -> Result<Vec<f64>> {
        if rhs.len() != self.n() {
            return Err(Error::Contract(format!("right-hand side has length {}, system has {}", rhs.len(), self.n())));
        }
        match self {
            Factorization::Band(f) => {
                let mut x = rhs.to_vec();
                f.solve_in_place(&mut x);
                Ok(x)
            }
            Factorization::Iterative(cg) => cg.solve(rhs),
        }
    }
}

/// Moore-Penrose pseudo-inverse through the SVD; singular values below
/// `1e-12 * sigma_max` count as zero.
pub fn pseudo_inverse(m: &DenseMatrix) -> DenseMatrix {
    let (r, c) = m.shape();
    if r == 0 || c == 0 {
        return DenseMatrix::zeros(c, r);
    }
    let svd = m.clone().svd(true, true);
    let u = svd.u.expect("U requested");
    let vt = svd.v_t.expect("V^T requested");
    let smax = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    let cut = 1e-12 * smax;
    let mut out = DenseMatrix::zeros(c, r);
    for (k, &s) in svd.singular_values.iter().enumerate() {
        if s > cut {
            out += (vt.row(k).transpose() * u.column(k).transpose()) / s;
        }
    }
    out
}

/// Eigenpairs of a small dense matrix.
#[derive(Debug, Clone)]
pub struct EigenDecomposition {
    /// Sorted by real part, then imaginary part.
    pub values: Vec<Complex<f64>>,
    /// Unit-norm eigenvector for each entry of `values`.
    pub vectors: Vec<DVector<Complex<f64>>>,
}

impl EigenDecomposition {
    /// Eigenvalues whose imaginary part is below `tol`, as reals.
    pub fn real_values(&self, tol: f64) -> Vec<f64> {
        self.values.iter().filter(|z| z.im.abs() <= tol).map(|z| z.re).collect()
    }
}

/// Largest supported order for [`eig_small`].
pub const EIG_MAX_ORDER: usize = 16;

/// Full eigen-decomposition via real Schur form; eigenvectors are null vectors
/// of `M - lambda I` from a complex SVD.
pub fn eig_small(m: &DenseMatrix) -> Result<EigenDecomposition> {
    let n = m.nrows();
    if n != m.ncols() || n > EIG_MAX_ORDER {
        return Err(Error::Contract(format!(
            "eig_small needs a square matrix of order <= {EIG_MAX_ORDER}, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    let schur = nalgebra::linalg::Schur::try_new(m.clone(), 1e-15, 10_000)
        .ok_or_else(|| Error::Numeric("Schur iteration did not converge".into()))?;
    let mut values: Vec<Complex<f64>> = schur.complex_eigenvalues().iter().copied().collect();
    values.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
    let mc: DMatrix<Complex<f64>> = m.map(|x| Complex::new(x, 0.0));
    let mut vectors = Vec::with_capacity(n);
    for &lambda in &values {
        let shifted = &mc - DMatrix::<Complex<f64>>::identity(n, n) * lambda;
        let svd = shifted.svd(false, true);
        let vt = svd.v_t.ok_or_else(|| Error::Numeric("SVD failed".into()))?;
        let (kmin, _) =
            svd.singular_values
                .iter()
                .enumerate()
                .fold((0, f64::INFINITY), |acc, (k, &s)| if s < acc.1 { (k, s) } else { acc });
        let v: DVector<Complex<f64>> = vt.row(kmin).adjoint();
        vectors.push(v.normalize());
    }
    Ok(EigenDecomposition { values, vectors })
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn norm_inf(a: &[f64]) -> f64 {
    a.iter().fold(0.0, |m, x| m.max(x.abs()))
}
