use crate::error::{Error, Result};
use crate::numerics::matrix::{dot, DenseMatrix};

pub const SPECTRAL_TOL: f64 = 1e-8;
pub const SPECTRAL_MAX_ITER: usize = 10_000;

/// Largest singular value by power iteration on `MᵀM`, started from the
/// normalized all-ones vector.
pub fn spectral_norm(m: &DenseMatrix) -> Result<f64> {
    if m.is_empty() {
        return Err(Error::InvalidArgument("spectral norm of an empty matrix".into()));
    }
    let n = m.cols();
    let mut v = vec![1.0 / (n as f64).sqrt(); n];
    let mut sigma = 0.0;
    for _ in 0..SPECTRAL_MAX_ITER {
        let mv = m.matvec(&v)?;
        let w = m.matvec_t(&mv)?;
        let norm = dot(&w, &w).sqrt();
        if norm == 0.0 {
            // v is in the null space; a rank-deficient start can only happen
            // when the all-ones direction is orthogonal to the row space.
            return if m.max_abs() == 0.0 { Ok(0.0) } else { fallback_start(m) };
        }
        let next = mv.norm();
        v.iter_mut().zip(w.iter()).for_each(|(vi, wi)| *vi = wi / norm);
        if (next - sigma).abs() <= SPECTRAL_TOL * next {
            // one more Rayleigh quotient with the updated vector
            return Ok(m.matvec(&v)?.norm().max(next));
        }
        sigma = next;
    }
    Err(Error::ConvergenceFailure { iterations: SPECTRAL_MAX_ITER, estimate: sigma })
}

fn fallback_start(m: &DenseMatrix) -> Result<f64> {
    // Restart from the column with the largest norm.
    let norms = m.col_norms_sq();
    let j = (0..norms.len()).max_by(|&a, &b| norms[a].total_cmp(&norms[b])).unwrap_or(0);
    let mut v = vec![0.0; m.cols()];
    v[j] = 1.0;
    let mut sigma = 0.0;
    for _ in 0..SPECTRAL_MAX_ITER {
        let mv = m.matvec(&v)?;
        let w = m.matvec_t(&mv)?;
        let norm = dot(&w, &w).sqrt();
        let next = mv.norm();
        if norm == 0.0 {
            return Ok(next);
        }
        v.iter_mut().zip(w.iter()).for_each(|(vi, wi)| *vi = wi / norm);
        if (next - sigma).abs() <= SPECTRAL_TOL * next {
            return Ok(m.matvec(&v)?.norm().max(next));
        }
        sigma = next;
    }
    Err(Error::ConvergenceFailure { iterations: SPECTRAL_MAX_ITER, estimate: sigma })
}

/// Lower-triangular Cholesky factor `L` with `M = L Lᵀ`, reusable across solves.
#[derive(Clone, Debug)]
pub struct Cholesky {
    n: usize,
    lower: Vec<f64>,
}

impl Cholesky {
    pub fn factor(m: &DenseMatrix) -> Result<Self> {
        let n = m.rows();
        if m.cols() != n {
            return Err(Error::InvalidArgument(format!("cholesky of {:?} matrix", m.shape())));
        }
        let mut l = vec![0.0; n * n];
        for j in 0..n {
            let mut diag = m.get(j, j);
            for k in 0..j {
                diag -= l[j * n + k] * l[j * n + k];
            }
            if !(diag > 0.0) {
                return Err(Error::NotPositiveDefinite { pivot: j, value: diag });
            }
            let diag = diag.sqrt();
            l[j * n + j] = diag;
            for i in j + 1..n {
                let mut s = m.get(i, j);
                for k in 0..j {
                    s -= l[i * n + k] * l[j * n + k];
                }
                l[i * n + j] = s / diag;
            }
        }
        Ok(Self { n, lower: l })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Solves `M X = B` column by column.
    pub fn solve(&self, b: &DenseMatrix) -> Result<DenseMatrix> {
        let n = self.n;
        if b.rows() != n {
            return Err(Error::InvalidArgument(format!(
                "solve: {n}x{n} system with right-hand side {:?}",
                b.shape()
            )));
        }
        let m = b.cols();
        let mut x = b.clone();
        let l = &self.lower;
        let xs = x.as_mut_slice();
        // forward: L y = b, processing all right-hand sides row by row
        for i in 0..n {
            for k in 0..i {
                let lik = l[i * n + k];
                if lik == 0.0 {
                    continue;
                }
                let (head, tail) = xs.split_at_mut(i * m);
                let src = &head[k * m..(k + 1) * m];
                for (t, &s) in tail[..m].iter_mut().zip(src) {
                    *t -= lik * s;
                }
            }
            let inv = 1.0 / l[i * n + i];
            xs[i * m..(i + 1) * m].iter_mut().for_each(|v| *v *= inv);
        }
        // backward: Lᵀ x = y
        for i in (0..n).rev() {
            for k in i + 1..n {
                let lki = l[k * n + i];
                if lki == 0.0 {
                    continue;
                }
                let (head, tail) = xs.split_at_mut(k * m);
                let src = &tail[..m];
                for (t, &s) in head[i * m..(i + 1) * m].iter_mut().zip(src) {
                    *t -= lki * s;
                }
            }
            let inv = 1.0 / l[i * n + i];
            xs[i * m..(i + 1) * m].iter_mut().for_each(|v| *v *= inv);
        }
        Ok(x)
    }
}

/// Solves `M X = B` for symmetric positive definite `M`.
pub fn solve_spd(m: &DenseMatrix, b: &DenseMatrix) -> Result<DenseMatrix> {
    Cholesky::factor(m)?.solve(b)
}
