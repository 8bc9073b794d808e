//! Small dense linear algebra used by the factorization and affinity code.

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| {
            let d = x - y;
            d * d
        })
        .sum()
}

/// Cholesky factorization of a symmetric positive definite matrix, in place.
/// `a` is n x n row-major; on success the lower triangle holds L.
/// Returns false when the matrix is not numerically SPD.
fn cholesky_in_place(a: &mut [f64], n: usize) -> bool {
    for j in 0..n {
        let mut diag = a[j * n + j];
        for k in 0..j {
            diag -= a[j * n + k] * a[j * n + k];
        }
        if diag <= 0.0 || !diag.is_finite() {
            return false;
        }
        let l_jj = diag.sqrt();
        a[j * n + j] = l_jj;
        for i in (j + 1)..n {
            let mut v = a[i * n + j];
            for k in 0..j {
                v -= a[i * n + k] * a[j * n + k];
            }
            a[i * n + j] = v / l_jj;
        }
    }
    true
}

/// Solve `A x = b` for SPD `A` (row-major, n x n). `a` and `b` are clobbered;
/// the solution lands in `b`. Returns false if the factorization fails.
pub(crate) fn spd_solve_in_place(a: &mut [f64], b: &mut [f64], n: usize) -> bool {
    if !cholesky_in_place(a, n) {
        return false;
    }
    // forward: L y = b
    for i in 0..n {
        let mut v = b[i];
        for k in 0..i {
            v -= a[i * n + k] * b[k];
        }
        b[i] = v / a[i * n + i];
    }
    // backward: L^T x = y
    for i in (0..n).rev() {
        let mut v = b[i];
        for k in (i + 1)..n {
            v -= a[k * n + i] * b[k];
        }
        b[i] = v / a[i * n + i];
    }
    true
}

/// Minimize `x^T (G + reg I) x - 2 b^T x` subject to `x >= 0`.
///
/// `gram` is the d x d Gram matrix of the observed design (row-major,
/// symmetric, without the ridge term). Starts from the unconstrained
/// solution, clamps negative coordinates to zero and re-solves on the free
/// set until the KKT conditions hold or `max_passes` is exhausted.
/// Returns None when a linear solve produces no finite solution.
pub(crate) fn nnls_ridge(
    gram: &[f64],
    b: &[f64],
    reg: f64,
    d: usize,
    max_passes: usize,
) -> Option<Vec<f64>> {
    const KKT_TOL: f64 = 1e-10;

    let mut free = vec![true; d];
    let mut x = vec![0.0; d];
    let mut scratch_a = vec![0.0; d * d];
    let mut scratch_b = vec![0.0; d];

    for _ in 0..max_passes {
        let free_idx: Vec<usize> = (0..d).filter(|&j| free[j]).collect();
        let nf = free_idx.len();
        if nf == 0 {
            return Some(x);
        }

        for (ri, &i) in free_idx.iter().enumerate() {
            for (ci, &j) in free_idx.iter().enumerate() {
                let mut v = gram[i * d + j];
                if i == j {
                    v += reg;
                }
                scratch_a[ri * nf + ci] = v;
            }
            scratch_b[ri] = b[i];
        }
        if !spd_solve_in_place(&mut scratch_a[..nf * nf], &mut scratch_b[..nf], nf) {
            return None;
        }
        if scratch_b[..nf].iter().any(|v| !v.is_finite()) {
            return None;
        }

        x.iter_mut().for_each(|v| *v = 0.0);
        let mut any_negative = false;
        for (ri, &i) in free_idx.iter().enumerate() {
            let v = scratch_b[ri];
            if v < 0.0 {
                free[i] = false;
                any_negative = true;
            } else {
                x[i] = v;
            }
        }
        if any_negative {
            continue;
        }

        // KKT check on the bound set: gradient (G+regI)x - b must be >= 0.
        let mut worst = -KKT_TOL;
        let mut worst_j = None;
        for j in 0..d {
            if free[j] {
                continue;
            }
            let mut g = -b[j];
            for &i in &free_idx {
                g += gram[j * d + i] * x[i];
            }
            if g < worst {
                worst = g;
                worst_j = Some(j);
            }
        }
        match worst_j {
            Some(j) => free[j] = true,
            None => {
                for v in &mut x {
                    *v = v.max(0.0);
                }
                return Some(x);
            }
        }
    }
    for v in &mut x {
        *v = v.max(0.0);
    }
    Some(x)
}
