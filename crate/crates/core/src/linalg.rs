//! Dense linear algebra helpers on top of `faer`: a Lanczos eigensolver for the
//! few largest eigenpairs of a symmetric operator, truncated singular value
//! decompositions with a deterministic sign convention, and small vector kernels.

use crate::error::{Error, Result};
use faer::linalg::matmul::matmul;
use faer::{Accum, Mat, MatMut, MatRef, Par, Side};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

/// Relative residual at which a Ritz pair counts as converged.
const RITZ_TOL: f64 = 1e-10;
/// Below this dimension the operator is materialized and diagonalized directly.
const DENSE_CUTOFF: usize = 48;
const START_SEED: u64 = 0x5eed_1a2c_7055_0001;

pub fn dot(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| a * b).sum()
}

pub fn norm(x: &[f64]) -> f64 {
    dot(x, x).sqrt()
}

/// `y += alpha * x`
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

pub fn scale(alpha: f64, x: &mut [f64]) {
    x.iter_mut().for_each(|v| *v *= alpha);
}

/// `out = a * x` or `out = a^T * x`.
pub fn gemv(out: &mut [f64], a: MatRef<'_, f64>, x: &[f64], transpose: bool) {
    let lhs = if transpose { a.transpose() } else { a };
    let rhs = MatRef::from_column_major_slice(x, x.len(), 1);
    let dst = MatMut::from_column_major_slice_mut(out, lhs.nrows(), 1);
    matmul(dst, Accum::Replace, lhs, rhs, 1.0, Par::Seq);
}

/// `a * b` without threading.
pub fn matmul_seq(a: MatRef<'_, f64>, b: MatRef<'_, f64>) -> Mat<f64> {
    let mut out = Mat::<f64>::zeros(a.nrows(), b.ncols());
    matmul(out.as_mut(), Accum::Replace, a, b, 1.0, Par::Seq);
    out
}

/// `alpha * a * a^T`, full symmetric result.
pub fn gram(a: MatRef<'_, f64>, alpha: f64) -> Mat<f64> {
    use faer::linalg::matmul::triangular::{matmul as tri_matmul, BlockStructure};
    let p = a.nrows();
    let mut out = Mat::<f64>::zeros(p, p);
    tri_matmul(
        out.as_mut(),
        BlockStructure::TriangularLower,
        Accum::Replace,
        a,
        BlockStructure::Rectangular,
        a.transpose(),
        BlockStructure::Rectangular,
        alpha,
        Par::Seq,
    );
    for j in 0..p {
        for i in 0..j {
            out[(i, j)] = out[(j, i)];
        }
    }
    out
}

/// Flip `u` (and `v` with it) so the largest-magnitude entry of `u` is positive.
/// Ties go to the lowest index.
pub fn orient(u: &mut [f64], v: &mut [f64]) {
    let mut best = 0;
    for (i, x) in u.iter().enumerate() {
        if x.abs() > u[best].abs() {
            best = i;
        }
    }
    if u.get(best).is_some_and(|x| *x < 0.0) {
        scale(-1.0, u);
        scale(-1.0, v);
    }
}

/// Largest eigenpairs, eigenvalues in descending order.
#[derive(Debug, Clone)]
pub struct Eigenpairs {
    pub values: Vec<f64>,
    /// One eigenvector per column.
    pub vectors: Mat<f64>,
}

/// Top `want` eigenpairs of the symmetric operator `apply` on `R^dim`, by
/// Lanczos with full reorthogonalization. Deterministic: the start vector is
/// drawn from a fixed seed.
pub fn lanczos_top(dim: usize, want: usize, mut apply: impl FnMut(&[f64], &mut [f64])) -> Result<Eigenpairs> {
    let want = want.min(dim);
    if want == 0 {
        return Ok(Eigenpairs {
            values: Vec::new(),
            vectors: Mat::zeros(dim, 0),
        });
    }
    if dim <= DENSE_CUTOFF {
        return dense_top(dim, want, apply);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(START_SEED);
    let mut basis: Vec<Vec<f64>> = Vec::new();
    let mut alphas: Vec<f64> = Vec::new();
    let mut betas: Vec<f64> = Vec::new();
    let mut q = random_unit(dim, &mut rng, &basis).ok_or_else(|| Error::Numerical("lanczos start".into()))?;
    let mut w = vec![0.0; dim];
    let mut scale_est = 0.0f64;

    loop {
        apply(&q, &mut w);
        let alpha = dot(&q, &w);
        basis.push(q.clone());
        alphas.push(alpha);
        // Two passes of classical Gram-Schmidt against the whole basis.
        for _ in 0..2 {
            for b in &basis {
                let c = dot(b, &w);
                axpy(-c, b, &mut w);
            }
        }
        let beta = norm(&w);
        let j = basis.len();
        scale_est = scale_est.max(alpha.abs()).max(beta);

        let exhausted = j == dim;
        let breakdown = beta <= 1e-13 * scale_est.max(f64::MIN_POSITIVE);
        if j >= want {
            let (vals, vecs) = tridiagonal_eigen(&alphas, &betas)?;
            let top = vals[0].abs().max(scale_est * 1e-300);
            let converged = (0..want).all(|i| beta * vecs[(j - 1, i)].abs() <= RITZ_TOL * top);
            if converged || exhausted {
                return Ok(assemble(&basis, &vals, &vecs, want, dim));
            }
        }
        if exhausted {
            let (vals, vecs) = tridiagonal_eigen(&alphas, &betas)?;
            return Ok(assemble(&basis, &vals, &vecs, want, dim));
        }
        if breakdown {
            // Invariant subspace: continue with a fresh direction orthogonal to it.
            match random_unit(dim, &mut rng, &basis) {
                Some(next) => {
                    betas.push(0.0);
                    q = next;
                }
                None => {
                    let (vals, vecs) = tridiagonal_eigen(&alphas, &betas)?;
                    return Ok(assemble(&basis, &vals, &vecs, want, dim));
                }
            }
        } else {
            betas.push(beta);
            q = w.iter().map(|x| x / beta).collect();
        }
    }
}

fn random_unit(dim: usize, rng: &mut ChaCha8Rng, basis: &[Vec<f64>]) -> Option<Vec<f64>> {
    for _ in 0..4 {
        let mut v: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(rng)).collect();
        for _ in 0..2 {
            for b in basis {
                let c = dot(b, &v);
                axpy(-c, b, &mut v);
            }
        }
        let nv = norm(&v);
        if nv > 1e-8 {
            scale(1.0 / nv, &mut v);
            return Some(v);
        }
    }
    None
}

/// Eigen-decomposition of the symmetric tridiagonal matrix, values descending.
fn tridiagonal_eigen(alphas: &[f64], betas: &[f64]) -> Result<(Vec<f64>, Mat<f64>)> {
    let k = alphas.len();
    let mut t = Mat::<f64>::zeros(k, k);
    for i in 0..k {
        t[(i, i)] = alphas[i];
        if i + 1 < k {
            t[(i + 1, i)] = betas[i];
            t[(i, i + 1)] = betas[i];
        }
    }
    descending_eigen(t.as_ref())
}

/// Full symmetric eigen-decomposition with eigenvalues sorted descending.
pub fn descending_eigen(a: MatRef<'_, f64>) -> Result<(Vec<f64>, Mat<f64>)> {
    let evd = a
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| Error::Numerical(format!("symmetric eigendecomposition: {e:?}")))?;
    let k = a.nrows();
    let s = evd.S();
    let u = evd.U();
    let values = (0..k).rev().map(|i| s[i]).collect();
    let vectors = Mat::from_fn(k, k, |i, j| u[(i, k - 1 - j)]);
    Ok((values, vectors))
}

fn assemble(basis: &[Vec<f64>], vals: &[f64], vecs: &Mat<f64>, want: usize, dim: usize) -> Eigenpairs {
    let mut vectors = Mat::<f64>::zeros(dim, want);
    for c in 0..want {
        let col = vectors.col_as_slice_mut(c);
        for (l, b) in basis.iter().enumerate() {
            axpy(vecs[(l, c)], b, col);
        }
        let nc = norm(col);
        if nc > 0.0 {
            scale(1.0 / nc, col);
        }
    }
    Eigenpairs {
        values: vals[..want].to_vec(),
        vectors,
    }
}

fn dense_top(dim: usize, want: usize, mut apply: impl FnMut(&[f64], &mut [f64])) -> Result<Eigenpairs> {
    let mut a = Mat::<f64>::zeros(dim, dim);
    let mut e = vec![0.0; dim];
    let mut out = vec![0.0; dim];
    for j in 0..dim {
        e.iter_mut().for_each(|x| *x = 0.0);
        e[j] = 1.0;
        apply(&e, &mut out);
        a.col_as_slice_mut(j).copy_from_slice(&out);
    }
    let sym = Mat::from_fn(dim, dim, |i, j| 0.5 * (a[(i, j)] + a[(j, i)]));
    let (values, vectors) = descending_eigen(sym.as_ref())?;
    Ok(Eigenpairs {
        values: values[..want].to_vec(),
        vectors: Mat::from_fn(dim, want, |i, j| vectors[(i, j)]),
    })
}

/// Leading singular triplets `(values, U, V)`, values descending, each pair oriented.
#[derive(Debug, Clone)]
pub struct Triplets {
    pub values: Vec<f64>,
    pub u: Mat<f64>,
    pub v: Mat<f64>,
}

impl Triplets {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Top `k` singular triplets of `y`, via Lanczos on the smaller Gram matrix.
pub fn top_singular_triplets(y: MatRef<'_, f64>, k: usize) -> Result<Triplets> {
    let (p, n) = (y.nrows(), y.ncols());
    let k = k.min(p.min(n));
    let wide = p <= n;
    let (dim, other) = if wide { (p, n) } else { (n, p) };
    let mut tmp = vec![0.0; other];
    let pairs = lanczos_top(dim, k, |x, out| {
        if wide {
            gemv(&mut tmp, y, x, true);
            gemv(out, y, &tmp, false);
        } else {
            gemv(&mut tmp, y, x, false);
            gemv(out, y, &tmp, true);
        }
    })?;
    let mut values = Vec::with_capacity(k);
    let mut u = Mat::<f64>::zeros(p, k);
    let mut v = Mat::<f64>::zeros(n, k);
    for c in 0..k {
        let theta = pairs.values[c].max(0.0).sqrt();
        values.push(theta);
        let small = pairs.vectors.col_as_slice(c);
        let mut big = vec![0.0; other];
        gemv(&mut big, y, small, wide);
        if theta > 0.0 {
            scale(1.0 / theta, &mut big);
        }
        let (mut uc, mut vc) = if wide { (small.to_vec(), big) } else { (big, small.to_vec()) };
        orient(&mut uc, &mut vc);
        u.col_as_slice_mut(c).copy_from_slice(&uc);
        v.col_as_slice_mut(c).copy_from_slice(&vc);
    }
    Ok(Triplets { values, u, v })
}

/// Thin SVD of `y` with every pair oriented by the sign convention.
pub fn thin_svd(y: MatRef<'_, f64>) -> Result<Triplets> {
    let svd = y
        .thin_svd()
        .map_err(|e| Error::Numerical(format!("singular value decomposition: {e:?}")))?;
    let q = y.nrows().min(y.ncols());
    let mut u = svd.U().to_owned();
    let mut v = svd.V().to_owned();
    let s = svd.S();
    let values = (0..q).map(|i| s[i]).collect();
    for c in 0..q {
        let mut uc = u.col_as_slice(c).to_vec();
        let mut vc = v.col_as_slice(c).to_vec();
        orient(&mut uc, &mut vc);
        u.col_as_slice_mut(c).copy_from_slice(&uc);
        v.col_as_slice_mut(c).copy_from_slice(&vc);
    }
    Ok(Triplets { values, u, v })
}

/// Orthonormalize the columns of `a` in place (modified Gram-Schmidt, two passes).
pub fn orthonormalize_columns(a: &mut Mat<f64>) -> Result<()> {
    for j in 0..a.ncols() {
        let mut col = a.col_as_slice(j).to_vec();
        for _ in 0..2 {
            for i in 0..j {
                let prev = a.col_as_slice(i);
                let c = dot(prev, &col);
                axpy(-c, prev, &mut col);
            }
        }
        let nc = norm(&col);
        if nc <= 1e-12 {
            return Err(Error::Numerical("columns are linearly dependent".into()));
        }
        scale(1.0 / nc, &mut col);
        a.col_as_slice_mut(j).copy_from_slice(&col);
    }
    Ok(())
}

/// `x <- L x` or `x <- L^T x` for lower-triangular `L`.
pub fn lower_mul_in_place(l: MatRef<'_, f64>, x: &mut [f64], transpose: bool) {
    use faer::linalg::matmul::triangular::{matmul as tri_matmul, BlockStructure};
    let rhs = MatRef::from_column_major_slice(x, x.len(), 1).to_owned();
    let (lhs, structure) = if transpose {
        (l.transpose(), BlockStructure::TriangularUpper)
    } else {
        (l, BlockStructure::TriangularLower)
    };
    let dst = MatMut::from_column_major_slice_mut(x, l.nrows(), 1);
    tri_matmul(
        dst,
        BlockStructure::Rectangular,
        Accum::Replace,
        lhs,
        structure,
        rhs.as_ref(),
        BlockStructure::Rectangular,
        1.0,
        Par::Seq,
    );
}

/// `x <- L^-1 x` or `x <- L^-T x` for lower-triangular `L`.
pub fn lower_solve_in_place(l: MatRef<'_, f64>, x: &mut [f64], transpose: bool) {
    use faer::linalg::triangular_solve::{solve_lower_triangular_in_place, solve_upper_triangular_in_place};
    let n = x.len();
    let rhs = MatMut::from_column_major_slice_mut(x, n, 1);
    if transpose {
        solve_upper_triangular_in_place(l.transpose(), rhs, Par::Seq);
    } else {
        solve_lower_triangular_in_place(l, rhs, Par::Seq);
    }
}

/// Lower Cholesky factor of a symmetric positive definite matrix.
pub fn cholesky_lower(a: MatRef<'_, f64>) -> Result<Mat<f64>> {
    let llt = a
        .llt(Side::Lower)
        .map_err(|e| Error::IllConditioned(format!("Cholesky factorization failed: {e:?}")))?;
    Ok(llt.L().to_owned())
}
