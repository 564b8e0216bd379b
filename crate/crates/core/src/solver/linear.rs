//! Sparse linear solves for the Newton correction.
//!
//! Systems up to [`DIRECT_LIMIT`] unknowns go through a sparse LU with
//! partial pivoting; larger ones use restarted GMRES right-preconditioned by
//! an incomplete LU factorization with the sparsity of the matrix, falling
//! back to the LU when GMRES stalls.

use faer::linalg::solvers::Solve;
use faer::sparse::{SparseColMat, Triplet};
use faer::Mat;

use super::SolverError;
use crate::grid::CsrMatrix;

pub const DIRECT_LIMIT: usize = 4_000;

/// Solves `A x = b` to relative residual `tol` (iterative path) or to
/// working precision (direct path).
pub fn solve_linear(a: &CsrMatrix, b: &[f64], tol: f64) -> Result<Vec<f64>, SolverError> {
    if a.nrows <= DIRECT_LIMIT {
        solve_direct(a, b)
    } else {
        gmres_ilu0(a, b, tol, 60, 40).or_else(|_| solve_direct(a, b))
    }
}

pub fn solve_direct(a: &CsrMatrix, b: &[f64]) -> Result<Vec<f64>, SolverError> {
    faer::set_global_parallelism(faer::Par::Seq);
    let n = a.nrows;
    let triplets: Vec<Triplet<usize, usize, f64>> = a.triplets().map(|(r, c, v)| Triplet::new(r, c, v)).collect();
    let m = SparseColMat::<usize, f64>::try_new_from_triplets(n, a.ncols, &triplets)
        .map_err(|e| SolverError::LinearSolve(format!("matrix assembly: {e:?}")))?;
    let lu = m.sp_lu().map_err(|e| SolverError::LinearSolve(format!("factorization: {e:?}")))?;
    let rhs = Mat::from_fn(n, 1, |i, _| b[i]);
    let x = lu.solve(&rhs);
    let x: Vec<f64> = (0..n).map(|i| x[(i, 0)]).collect();
    if x.iter().all(|v| v.is_finite()) {
        Ok(x)
    } else {
        Err(SolverError::LinearSolve("singular Jacobian".into()))
    }
}

/// ILU(0): `L` and `U` packed into a copy of the CSR pattern of `A`.
struct Ilu0 {
    m: CsrMatrix,
    diag: Vec<usize>,
}

impl Ilu0 {
    fn new(a: &CsrMatrix) -> Result<Self, SolverError> {
        let mut m = a.clone();
        let n = m.nrows;
        let mut diag = vec![usize::MAX; n];
        for i in 0..n {
            for p in m.row_ptr[i]..m.row_ptr[i + 1] {
                if m.cols[p] == i {
                    diag[i] = p;
                }
            }
            if diag[i] == usize::MAX {
                return Err(SolverError::LinearSolve(format!("missing diagonal in row {i}")));
            }
        }
        let mut pos = vec![usize::MAX; n];
        for i in 0..n {
            let (s, e) = (m.row_ptr[i], m.row_ptr[i + 1]);
            for p in s..e {
                pos[m.cols[p]] = p;
            }
            for p in s..e {
                let k = m.cols[p];
                if k >= i {
                    break;
                }
                let piv = m.vals[diag[k]];
                if piv == 0.0 {
                    return Err(SolverError::LinearSolve("zero pivot in ILU(0)".into()));
                }
                let lik = m.vals[p] / piv;
                m.vals[p] = lik;
                for q in diag[k] + 1..m.row_ptr[k + 1] {
                    let j = m.cols[q];
                    if pos[j] != usize::MAX {
                        m.vals[pos[j]] -= lik * m.vals[q];
                    }
                }
            }
            for p in s..e {
                pos[m.cols[p]] = usize::MAX;
            }
        }
        Ok(Self { m, diag })
    }

    fn apply(&self, r: &[f64]) -> Vec<f64> {
        let m = &self.m;
        let n = m.nrows;
        let mut y = r.to_vec();
        for i in 0..n {
            for p in m.row_ptr[i]..self.diag[i] {
                y[i] -= m.vals[p] * y[m.cols[p]];
            }
        }
        for i in (0..n).rev() {
            for p in self.diag[i] + 1..m.row_ptr[i + 1] {
                y[i] -= m.vals[p] * y[m.cols[p]];
            }
            y[i] /= m.vals[self.diag[i]];
        }
        y
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Restarted GMRES(`restart`) with right ILU(0) preconditioning.
pub fn gmres_ilu0(a: &CsrMatrix, b: &[f64], tol: f64, restart: usize, max_cycles: usize) -> Result<Vec<f64>, SolverError> {
    let n = a.nrows;
    let pc = Ilu0::new(a)?;
    let bnorm = norm2(b);
    let mut x = vec![0.0; n];
    if bnorm == 0.0 {
        return Ok(x);
    }
    for _ in 0..max_cycles {
        let ax = a.matvec(&x);
        let r: Vec<f64> = b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect();
        let beta = norm2(&r);
        if beta <= tol * bnorm {
            return Ok(x);
        }
        let mut v: Vec<Vec<f64>> = vec![r.iter().map(|ri| ri / beta).collect()];
        let mut hess = vec![vec![0.0; restart]; restart + 1];
        let (mut cs, mut sn) = (vec![0.0; restart], vec![0.0; restart]);
        let mut g = vec![0.0; restart + 1];
        g[0] = beta;
        let mut k_used = 0;
        for k in 0..restart {
            let z = pc.apply(&v[k]);
            let mut w = a.matvec(&z);
            for (j, vj) in v.iter().enumerate() {
                let hjk = dot(&w, vj);
                hess[j][k] = hjk;
                w.iter_mut().zip(vj).for_each(|(wi, vi)| *wi -= hjk * vi);
            }
            let hn = norm2(&w);
            hess[k + 1][k] = hn;
            for j in 0..k {
                let t = cs[j] * hess[j][k] + sn[j] * hess[j + 1][k];
                hess[j + 1][k] = -sn[j] * hess[j][k] + cs[j] * hess[j + 1][k];
                hess[j][k] = t;
            }
            let d = hess[k][k].hypot(hess[k + 1][k]);
            cs[k] = hess[k][k] / d;
            sn[k] = hess[k + 1][k] / d;
            hess[k][k] = d;
            hess[k + 1][k] = 0.0;
            g[k + 1] = -sn[k] * g[k];
            g[k] *= cs[k];
            k_used = k + 1;
            if g[k + 1].abs() <= tol * bnorm || hn == 0.0 {
                break;
            }
            v.push(w.iter().map(|wi| wi / hn).collect());
        }
        let mut y = vec![0.0; k_used];
        for i in (0..k_used).rev() {
            let s: f64 = (i + 1..k_used).map(|j| hess[i][j] * y[j]).sum();
            y[i] = (g[i] - s) / hess[i][i];
        }
        let mut dz = vec![0.0; n];
        for (yj, vj) in y.iter().zip(&v) {
            dz.iter_mut().zip(vj).for_each(|(d, vi)| *d += yj * vi);
        }
        let dx = pc.apply(&dz);
        x.iter_mut().zip(&dx).for_each(|(xi, di)| *xi += di);
        if !x.iter().all(|v| v.is_finite()) {
            return Err(SolverError::LinearSolve("GMRES diverged".into()));
        }
    }
    let ax = a.matvec(&x);
    let rn = norm2(&b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect::<Vec<_>>());
    if rn <= tol * bnorm {
        Ok(x)
    } else {
        Err(SolverError::LinearSolve(format!("GMRES stalled at relative residual {:.3e}", rn / bnorm)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn laplacian_1d(n: usize, shift: f64) -> CsrMatrix {
        let rows = (0..n)
            .map(|i| {
                let mut r = vec![(i, -2.0 - shift)];
                if i > 0 {
                    r.push((i - 1, 1.0));
                }
                if i + 1 < n {
                    r.push((i + 1, 0.9));
                }
                r
            })
            .collect();
        CsrMatrix::from_rows(n, rows)
    }

    #[test]
    fn direct_and_gmres_agree() {
        let a = laplacian_1d(200, 0.05);
        let b: Vec<f64> = (0..200).map(|i| ((i as f64) * 0.1).sin()).collect();
        let x1 = solve_direct(&a, &b).unwrap();
        let x2 = gmres_ilu0(&a, &b, 1e-12, 30, 50).unwrap();
        let r = a.matvec(&x1);
        assert!(r.iter().zip(&b).all(|(u, v)| (u - v).abs() < 1e-10));
        assert!(x1.iter().zip(&x2).all(|(u, v)| (u - v).abs() < 1e-8 * (1.0 + u.abs())));
    }

    #[test]
    fn singular_system_reported() {
        let a = CsrMatrix::from_rows(2, vec![vec![(0, 1.0), (1, 1.0)], vec![(0, 1.0), (1, 1.0)]]);
        assert!(matches!(solve_direct(&a, &[1.0, 2.0]), Err(SolverError::LinearSolve(_))));
    }
}
