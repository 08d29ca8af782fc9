//! Block BFGS metric: block triples, the dense update, the limited-memory
//! two-loop recursion and the factored recursion.
//!
//! A triple `(D, Y, chol(D^T Y))` stores one block of curvature. The
//! implicit inverse-Hessian approximation after triples `1..=t` is
//!
//! ```text
//! H_t = V_t H_{t-1} V_t^T + D_t Delta_t D_t^T,   V_t = I - D_t Delta_t Y_t^T,
//! ```
//!
//! with `Delta_t = (D_t^T Y_t)^{-1}` and the oldest retained `H` taken as the
//! identity. Every multiplication by `Delta_t` is two triangular solves with
//! the stored Cholesky factor; no `d x d` matrix is formed outside of
//! [`dense_update`] and [`dense_reconstruct`].

use std::collections::VecDeque;

use thiserror::Error;

use crate::linalg::{self, cholesky, solve_with_factor, LinalgError, LowerTriangularFactor, Matrix};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricError {
    #[error("sketched curvature D^T Y is not positive definite: {0}")]
    RankDeficient(LinalgError),
    #[error("dimension mismatch: expected {expected}, got {found}")]
    DimensionMismatch { expected: String, found: String },
    #[error("buffer is not in factored mode, or a triple lacks factored data")]
    BufferNotFactored,
    #[error("dense reconstruction limited to d <= {limit}, got {dim}")]
    TooLarge { dim: usize, limit: usize },
}

fn mismatch(expected: impl ToString, found: impl ToString) -> MetricError {
    MetricError::DimensionMismatch {
        expected: expected.to_string(),
        found: found.to_string(),
    }
}

impl From<LinalgError> for MetricError {
    fn from(e: LinalgError) -> Self {
        match e {
            LinalgError::DimensionMismatch { expected, found } => MetricError::DimensionMismatch { expected, found },
            other => MetricError::RankDeficient(other),
        }
    }
}

/// Extra data for the factored form: the identity columns `C` the sketch was
/// drawn from, and `R` with `R R^T = Delta`.
#[derive(Debug, Clone, PartialEq)]
pub struct FactoredExtras {
    columns: Vec<usize>,
    r_fact: Matrix,
}

impl FactoredExtras {
    pub fn columns(&self) -> &[usize] {
        &self.columns
    }

    pub fn r_fact(&self) -> &Matrix {
        &self.r_fact
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BlockTriple {
    d: Matrix,
    y: Matrix,
    chol: LowerTriangularFactor,
    factored: Option<FactoredExtras>,
}

impl BlockTriple {
    /// Builds a triple from a sketch `D` and its Hessian action `Y`.
    ///
    /// `D^T Y` is symmetrized before factorization. Passing `columns` stores the
    /// factored extras, with `R = chol(D^T Y)^{-T}`.
    pub fn new(d: Matrix, y: Matrix, columns: Option<Vec<usize>>) -> Result<Self, MetricError> {
        if d.shape() != y.shape() {
            return Err(mismatch(
                format!("Y of shape {}x{}", d.rows(), d.cols()),
                format!("{}x{}", y.rows(), y.cols()),
            ));
        }
        let gram = d.t_matmul(&y)?.symmetrized()?;
        let chol = cholesky(&gram)?;
        let factored = match columns {
            Some(columns) => {
                if columns.len() != d.cols() {
                    return Err(mismatch(
                        format!("{} sketch columns", d.cols()),
                        format!("{}", columns.len()),
                    ));
                }
                if let Some(&c) = columns.iter().find(|&&c| c >= d.rows()) {
                    return Err(mismatch(format!("column index < {}", d.rows()), c));
                }
                Some(FactoredExtras {
                    columns,
                    r_fact: chol.inverse_transpose(),
                })
            }
            None => None,
        };
        Ok(BlockTriple { d, y, chol, factored })
    }

    pub fn dim(&self) -> usize {
        self.d.rows()
    }

    pub fn block_size(&self) -> usize {
        self.d.cols()
    }

    pub fn d(&self) -> &Matrix {
        &self.d
    }

    pub fn y(&self) -> &Matrix {
        &self.y
    }

    pub fn chol(&self) -> &LowerTriangularFactor {
        &self.chol
    }

    pub fn factored(&self) -> Option<&FactoredExtras> {
        self.factored.as_ref()
    }

    /// `Delta` as an explicit matrix. Oracle use only.
    pub fn delta(&self) -> Matrix {
        solve_with_factor(&self.chol, &Matrix::identity(self.block_size())).expect("square")
    }
}

/// Ring of at most `capacity` triples, oldest first.
#[derive(Debug, Clone)]
pub struct CurvatureBuffer {
    capacity: usize,
    dim: usize,
    factored: bool,
    triples: VecDeque<BlockTriple>,
}

impl CurvatureBuffer {
    pub fn new(dim: usize, capacity: usize) -> Self {
        CurvatureBuffer {
            capacity,
            dim,
            factored: false,
            triples: VecDeque::with_capacity(capacity),
        }
    }

    /// A buffer whose triples must all carry factored extras.
    pub fn new_factored(dim: usize, capacity: usize) -> Self {
        CurvatureBuffer {
            factored: true,
            ..CurvatureBuffer::new(dim, capacity)
        }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn is_factored(&self) -> bool {
        self.factored
    }

    pub fn len(&self) -> usize {
        self.triples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.triples.is_empty()
    }

    pub fn triples(&self) -> impl DoubleEndedIterator<Item = &BlockTriple> + ExactSizeIterator {
        self.triples.iter()
    }

    pub fn newest(&self) -> Option<&BlockTriple> {
        self.triples.back()
    }

    /// Appends a triple, evicting the oldest at capacity. With capacity zero
    /// the triple is discarded and the metric stays the identity.
    pub fn push(&mut self, triple: BlockTriple) -> Result<(), MetricError> {
        if triple.dim() != self.dim {
            return Err(mismatch(format!("triple of dimension {}", self.dim), triple.dim()));
        }
        if self.factored && triple.factored.is_none() {
            return Err(MetricError::BufferNotFactored);
        }
        if self.capacity == 0 {
            return Ok(());
        }
        if self.triples.len() == self.capacity {
            self.triples.pop_front();
        }
        self.triples.push_back(triple);
        Ok(())
    }

    pub fn clear(&mut self) {
        self.triples.clear();
    }
}

/// Convenience wrapper for [`BlockTriple::new`].
pub fn make_triple(d: Matrix, y: Matrix, columns: Option<Vec<usize>>) -> Result<BlockTriple, MetricError> {
    BlockTriple::new(d, y, columns)
}

/// One explicit block BFGS step:
/// `H+ = D Delta D^T + (I - D Delta Y^T) H (I - Y Delta D^T)`.
///
/// `H = 0` is accepted and yields `D (D^T Y)^{-1} D^T`.
pub fn dense_update(h: &Matrix, triple: &BlockTriple) -> Result<Matrix, MetricError> {
    let d = triple.dim();
    if h.shape() != (d, d) {
        return Err(mismatch(
            format!("{d}x{d} metric"),
            format!("{}x{}", h.rows(), h.cols()),
        ));
    }
    let dd = triple.d();
    let yy = triple.y();
    // E = D Delta (d x q); V = I - E Y^T
    let e = solve_with_factor(triple.chol(), &dd.transpose())?.transpose();
    // H V^T = H - (H Y) E^T ; V (H V^T) = H V^T - E (Y^T H V^T)
    let hy = h.matmul(yy)?;
    let hvt = h.sub(&hy.matmul(&e.transpose())?)?;
    let yt_hvt = yy.t_matmul(&hvt)?;
    let vhvt = hvt.sub(&e.matmul(&yt_hvt)?)?;
    let mut out = vhvt.add(&e.matmul(&dd.transpose())?)?;
    // exact symmetry; the two halves differ only by rounding
    out = out.symmetrized()?;
    Ok(out)
}

/// `H_t g` by the block two-loop recursion, with the oldest retained metric
/// equal to the identity. Working memory is one `d`-vector plus `M q` scalars.
pub fn two_loop_apply(buffer: &CurvatureBuffer, g: &[f64]) -> Result<Vec<f64>, MetricError> {
    let mut v = g.to_vec();
    two_loop_apply_in_place(buffer, &mut v)?;
    Ok(v)
}

pub fn two_loop_apply_in_place(buffer: &CurvatureBuffer, v: &mut [f64]) -> Result<(), MetricError> {
    if v.len() != buffer.dim() {
        return Err(mismatch(format!("vector of length {}", buffer.dim()), v.len()));
    }
    let mut alphas: Vec<Vec<f64>> = Vec::with_capacity(buffer.len());
    for t in buffer.triples().rev() {
        let q = t.block_size();
        let mut alpha: Vec<f64> = (0..q).map(|j| linalg::dot(t.d().col(j), v)).collect();
        t.chol().solve_vec_in_place(&mut alpha);
        for (j, &a) in alpha.iter().enumerate() {
            linalg::axpy(-a, t.y().col(j), v);
        }
        alphas.push(alpha);
    }
    for (t, alpha) in buffer.triples().zip(alphas.iter().rev()) {
        let q = t.block_size();
        let mut beta: Vec<f64> = (0..q).map(|j| linalg::dot(t.y().col(j), v)).collect();
        t.chol().solve_vec_in_place(&mut beta);
        for j in 0..q {
            linalg::axpy(alpha[j] - beta[j], t.d().col(j), v);
        }
    }
    Ok(())
}

fn require_factored(buffer: &CurvatureBuffer) -> Result<(), MetricError> {
    if !buffer.is_factored() || buffer.triples().any(|t| t.factored.is_none()) {
        return Err(MetricError::BufferNotFactored);
    }
    Ok(())
}

/// `L_t V` for the factored form `L_t L_t^T = H_t`, expanded as
///
/// ```text
/// L_t = V_t ... V_{t+1-M} + sum_i V_t ... V_{i+1} D_i R_i I_{C_i:}
/// ```
///
/// with the oldest retained factor equal to the identity. The rows `C_i`
/// are taken from the input `V`, so each correction term is propagated
/// through the later `V_j` exactly as in the expansion.
pub fn factored_apply(buffer: &CurvatureBuffer, v: &Matrix) -> Result<Matrix, MetricError> {
    require_factored(buffer)?;
    if v.rows() != buffer.dim() {
        return Err(mismatch(format!("{} rows", buffer.dim()), v.rows()));
    }
    let k = v.cols();
    let mut w = v.clone();
    for t in buffer.triples() {
        let extras = t.factored().expect("checked");
        let q = t.block_size();
        // coef = -Delta Y^T W + R V_{C,:}   (q x k); W += D coef
        let mut coef = t.y().t_matmul(&w)?;
        for j in 0..k {
            t.chol().solve_vec_in_place(coef.col_mut(j));
        }
        let selected = Matrix::from_fn(q, k, |r, j| v.get(extras.columns[r], j))?;
        let lifted = extras.r_fact.matmul(&selected)?;
        for j in 0..k {
            for r in 0..q {
                let c = lifted.get(r, j) - coef.get(r, j);
                linalg::axpy(c, t.d().col(r), w.col_mut(j));
            }
        }
    }
    Ok(w)
}

/// `L_t^T V`: walks the triples newest to oldest, accumulating
/// `I_{:C_i} R_i^T D_i^T u` while `u <- V_i^T u`.
pub fn factored_apply_transpose(buffer: &CurvatureBuffer, v: &Matrix) -> Result<Matrix, MetricError> {
    require_factored(buffer)?;
    if v.rows() != buffer.dim() {
        return Err(mismatch(format!("{} rows", buffer.dim()), v.rows()));
    }
    let k = v.cols();
    let mut u = v.clone();
    let mut acc = Matrix::zeros(v.rows(), k);
    for t in buffer.triples().rev() {
        let extras = t.factored().expect("checked");
        let q = t.block_size();
        let dtu = t.d().t_matmul(&u)?;
        let lifted = extras.r_fact.t_matmul(&dtu)?;
        for j in 0..k {
            for r in 0..q {
                let row = extras.columns[r];
                acc.set(row, j, acc.get(row, j) + lifted.get(r, j));
            }
        }
        // u <- u - Y Delta D^T u
        let mut coef = dtu;
        for j in 0..k {
            t.chol().solve_vec_in_place(coef.col_mut(j));
        }
        for j in 0..k {
            for r in 0..q {
                linalg::axpy(-coef.get(r, j), t.y().col(r), u.col_mut(j));
            }
        }
    }
    Ok(u.add(&acc)?)
}

/// Largest dimension accepted by [`dense_reconstruct`].
pub const DENSE_RECONSTRUCT_LIMIT: usize = 1000;

/// The implicit `H_t` as a dense matrix, column `j` being `H_t e_j`.
pub fn dense_reconstruct(buffer: &CurvatureBuffer) -> Result<Matrix, MetricError> {
    let d = buffer.dim();
    if d > DENSE_RECONSTRUCT_LIMIT {
        return Err(MetricError::TooLarge {
            dim: d,
            limit: DENSE_RECONSTRUCT_LIMIT,
        });
    }
    let mut h = Matrix::identity(d);
    for j in 0..d {
        two_loop_apply_in_place(buffer, h.col_mut(j))?;
    }
    Ok(h)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RandomStream;
    use approx::assert_relative_eq;

    fn scalar(v: f64) -> Matrix {
        Matrix::from_rows(&[&[v]]).unwrap()
    }

    fn random_matrix(s: &mut RandomStream, rows: usize, cols: usize) -> Matrix {
        Matrix::from_fn(rows, cols, |_, _| s.standard_normal()).unwrap()
    }

    fn random_spd(s: &mut RandomStream, n: usize) -> Matrix {
        let b = random_matrix(s, n, n);
        let mut a = b.t_matmul(&b).unwrap().scale(1.0 / n as f64);
        for i in 0..n {
            a.set(i, i, a.get(i, i) + 0.5);
        }
        a
    }

    fn rel(a: &Matrix, b: &Matrix) -> f64 {
        a.sub(b).unwrap().frobenius_norm() / b.frobenius_norm().max(1e-300)
    }

    #[test]
    fn scalar_triple() {
        let t = make_triple(scalar(1.0), scalar(2.0), None).unwrap();
        assert_relative_eq!(t.chol().get(0, 0), 2.0_f64.sqrt());
        assert_relative_eq!(t.delta().get(0, 0), 0.5);
    }

    #[test]
    fn orthonormal_sketch_with_identity_hessian() {
        let d = Matrix::from_rows(&[&[1.0, 0.0], &[0.0, 1.0], &[0.0, 0.0]]).unwrap();
        let t = make_triple(d.clone(), d, None).unwrap();
        assert_eq!(t.chol().reconstruct(), Matrix::identity(2));
    }

    #[test]
    fn duplicated_column_is_rank_deficient() {
        let mut s = RandomStream::new(4);
        let g = random_spd(&mut s, 6);
        let good = random_matrix(&mut s, 6, 3);
        assert!(make_triple(good.clone(), g.matmul(&good).unwrap(), None).is_ok());
        let col = good.col(0).to_vec();
        let dup = Matrix::from_columns(&[&col, good.col(1), &col]).unwrap();
        let err = make_triple(dup.clone(), g.matmul(&dup).unwrap(), None).unwrap_err();
        assert!(matches!(err, MetricError::RankDeficient(_)));
        assert!(matches!(
            make_triple(dup, Matrix::zeros(6, 2), None),
            Err(MetricError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn dense_update_scalar_and_full_sketch() {
        let t = make_triple(scalar(1.0), scalar(2.0), None).unwrap();
        assert_relative_eq!(dense_update(&scalar(1.0), &t).unwrap().get(0, 0), 0.5, epsilon = 1e-15);

        let mut s = RandomStream::new(17);
        let g = random_spd(&mut s, 5);
        let h = random_spd(&mut s, 5);
        let t = make_triple(Matrix::identity(5), g.clone(), None).unwrap();
        let hp = dense_update(&h, &t).unwrap();
        let err = hp
            .matmul(&g)
            .unwrap()
            .sub(&Matrix::identity(5))
            .unwrap()
            .frobenius_norm();
        assert!(err <= 1e-10, "{err:e}");
    }

    #[test]
    fn dense_update_from_zero_is_sdna_matrix() {
        let mut s = RandomStream::new(23);
        let g = random_spd(&mut s, 7);
        let d = random_matrix(&mut s, 7, 3);
        let y = g.matmul(&d).unwrap();
        let t = make_triple(d.clone(), y.clone(), None).unwrap();
        let sdna = d.matmul(&t.delta()).unwrap().matmul(&d.transpose()).unwrap();
        assert!(rel(&dense_update(&Matrix::zeros(7, 7), &t).unwrap(), &sdna) <= 1e-12);
    }

    #[test]
    fn dense_update_is_span_invariant() {
        let mut s = RandomStream::new(29);
        let g = random_spd(&mut s, 6);
        let h = random_spd(&mut s, 6);
        let d = random_matrix(&mut s, 6, 3);
        let mix = random_matrix(&mut s, 3, 3);
        let d2 = d.matmul(&mix).unwrap();
        let a = dense_update(&h, &make_triple(d.clone(), g.matmul(&d).unwrap(), None).unwrap()).unwrap();
        let b = dense_update(&h, &make_triple(d2.clone(), g.matmul(&d2).unwrap(), None).unwrap()).unwrap();
        assert!(rel(&b, &a) <= 1e-9);
    }

    #[test]
    fn two_loop_basic_cases() {
        let mut empty = CurvatureBuffer::new(3, 5);
        assert_eq!(two_loop_apply(&empty, &[1.0, -2.0, 3.0]).unwrap(), vec![1.0, -2.0, 3.0]);
        assert!(two_loop_apply(&empty, &[1.0]).is_err());
        empty.clear();

        let mut buf = CurvatureBuffer::new(1, 2);
        buf.push(make_triple(scalar(1.0), scalar(2.0), None).unwrap()).unwrap();
        assert_relative_eq!(two_loop_apply(&buf, &[4.0]).unwrap()[0], 2.0, epsilon = 1e-15);
    }

    fn random_buffer(s: &mut RandomStream, d: usize, q: usize, m: usize) -> (CurvatureBuffer, Vec<BlockTriple>) {
        let mut buf = CurvatureBuffer::new(d, m);
        let mut all = Vec::new();
        for _ in 0..m {
            let g = random_spd(s, d);
            let dd = random_matrix(s, d, q);
            let t = make_triple(dd.clone(), g.matmul(&dd).unwrap(), None).unwrap();
            buf.push(t.clone()).unwrap();
            all.push(t);
        }
        (buf, all)
    }

    #[test]
    fn two_loop_matches_dense_chain() {
        let mut s = RandomStream::new(31);
        let (buf, triples) = random_buffer(&mut s, 20, 3, 4);
        let mut h = Matrix::identity(20);
        for t in &triples {
            h = dense_update(&h, t).unwrap();
        }
        assert!(rel(&dense_reconstruct(&buf).unwrap(), &h) <= 1e-10);
        let g: Vec<f64> = (0..20).map(|_| s.standard_normal()).collect();
        let hg = two_loop_apply(&buf, &g).unwrap();
        let expected = h.mul_vec(&g).unwrap();
        let err: f64 = hg
            .iter()
            .zip(&expected)
            .map(|(a, b)| (a - b).powi(2))
            .sum::<f64>()
            .sqrt();
        assert!(err <= 1e-10 * linalg::norm(&expected));
    }

    #[test]
    fn dense_reconstruct_cases() {
        assert_eq!(
            dense_reconstruct(&CurvatureBuffer::new(4, 3)).unwrap(),
            Matrix::identity(4)
        );
        let mut s = RandomStream::new(37);
        let (buf, triples) = random_buffer(&mut s, 6, 2, 1);
        let expected = dense_update(&Matrix::identity(6), &triples[0]).unwrap();
        assert!(rel(&dense_reconstruct(&buf).unwrap(), &expected) <= 1e-10);
        assert!(matches!(
            dense_reconstruct(&CurvatureBuffer::new(1001, 1)),
            Err(MetricError::TooLarge { .. })
        ));
    }

    #[test]
    fn eviction_keeps_newest() {
        let mut s = RandomStream::new(41);
        let (buf, triples) = random_buffer(&mut s, 5, 2, 3);
        let mut small = CurvatureBuffer::new(5, 2);
        for t in &triples {
            small.push(t.clone()).unwrap();
        }
        assert_eq!(small.len(), 2);
        assert_eq!(small.newest(), buf.newest());
        let mut h = Matrix::identity(5);
        for t in &triples[1..] {
            h = dense_update(&h, t).unwrap();
        }
        assert!(rel(&dense_reconstruct(&small).unwrap(), &h) <= 1e-10);
        let mut none = CurvatureBuffer::new(5, 0);
        none.push(triples[0].clone()).unwrap();
        assert!(none.is_empty());
    }

    #[test]
    fn factored_scalar_example() {
        // L_0 = 1, C = {0}, D = [1], G = 4 so Y = [4], Delta = 1/4, R = 1/2
        let mut buf = CurvatureBuffer::new_factored(1, 3);
        let t = make_triple(scalar(1.0), scalar(4.0), Some(vec![0])).unwrap();
        assert_relative_eq!(t.factored().unwrap().r_fact().get(0, 0), 0.5);
        buf.push(t).unwrap();
        let l = factored_apply(&buf, &scalar(1.0)).unwrap();
        assert_relative_eq!(l.get(0, 0), 0.5, epsilon = 1e-15);
        assert_relative_eq!(l.get(0, 0).powi(2), 0.25, epsilon = 1e-15);
    }

    #[test]
    fn factored_requires_extras() {
        let plain = CurvatureBuffer::new(2, 2);
        assert_eq!(
            factored_apply(&plain, &Matrix::identity(2)),
            Err(MetricError::BufferNotFactored)
        );
        let mut fact = CurvatureBuffer::new_factored(1, 2);
        let t = make_triple(scalar(1.0), scalar(2.0), None).unwrap();
        assert_eq!(fact.push(t), Err(MetricError::BufferNotFactored));
        let empty = CurvatureBuffer::new_factored(3, 2);
        let v = Matrix::from_rows(&[&[1.0], &[2.0], &[3.0]]).unwrap();
        assert_eq!(factored_apply(&empty, &v).unwrap(), v);
    }

    /// Builds a factored buffer the way the self-conditioning sketch does:
    /// `D_i = L_{i-1} I_{:C_i}` with `L` from the buffer so far.
    fn random_factored_buffer(s: &mut RandomStream, d: usize, q: usize, m: usize) -> CurvatureBuffer {
        let mut buf = CurvatureBuffer::new_factored(d, m);
        for _ in 0..m {
            let g = random_spd(s, d);
            let cols = crate::dataset::sample_indices(s, d, q).unwrap().to_vec();
            let selector = Matrix::from_fn(d, q, |i, j| if i == cols[j] { 1.0 } else { 0.0 }).unwrap();
            let dd = factored_apply(&buf, &selector).unwrap();
            let t = make_triple(dd.clone(), g.matmul(&dd).unwrap(), Some(cols)).unwrap();
            buf.push(t).unwrap();
        }
        buf
    }

    #[test]
    fn factored_form_reproduces_metric() {
        let mut s = RandomStream::new(43);
        for m in 1..=4 {
            let buf = random_factored_buffer(&mut s, 9, 3, m);
            let h = dense_reconstruct(&buf).unwrap();
            let l = factored_apply(&buf, &Matrix::identity(9)).unwrap();
            assert!(rel(&l.matmul(&l.transpose()).unwrap(), &h) <= 1e-8, "m = {m}");
            let lt = factored_apply_transpose(&buf, &Matrix::identity(9)).unwrap();
            assert!(rel(&lt, &l.transpose()) <= 1e-10, "m = {m}");
        }
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(48))]

            #[test]
            fn sketched_inverse_equation_and_positivity(seed in any::<u64>(), d in 2usize..16, q in 1usize..4, m in 1usize..5) {
                let q = q.min(d);
                let mut s = RandomStream::new(seed);
                let (buf, _) = random_buffer(&mut s, d, q, m);
                let h = dense_reconstruct(&buf).unwrap();
                let newest = buf.newest().unwrap();
                let err = rel(&h.matmul(newest.y()).unwrap(), newest.d());
                prop_assert!(err <= 1e-9, "{:e}", err);
                prop_assert!(rel(&h.transpose(), &h) <= 1e-10);
                let eig = linalg::sym_eigenvalues(&h.symmetrized().unwrap()).unwrap();
                prop_assert!(eig[0] > 0.0);
            }

            #[test]
            fn factored_consistency(seed in any::<u64>(), d in 2usize..12, q in 1usize..4, m in 1usize..5) {
                let q = q.min(d);
                let mut s = RandomStream::new(seed);
                let buf = random_factored_buffer(&mut s, d, q, m);
                let v = Matrix::from_fn(d, 1, |_, _| s.standard_normal()).unwrap();
                let llt_v = factored_apply(&buf, &factored_apply_transpose(&buf, &v).unwrap()).unwrap();
                let hv = two_loop_apply(&buf, v.col(0)).unwrap();
                let hv = Matrix::from_col_major(d, 1, hv).unwrap();
                prop_assert!(rel(&llt_v, &hv) <= 1e-8);
            }
        }
    }
}
