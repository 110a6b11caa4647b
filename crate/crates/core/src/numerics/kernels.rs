//! Dense matrix-product kernels.
//!
//! Every kernel accumulates into its output (`out += ...`). The parallel
//! variants split work by output row and run the exact same per-row loop as
//! the sequential ones, so both produce bit-identical results; the dispatch
//! functions at module level pick the parallel path only for products large
//! enough to amortize the fork/join.

use super::Real;

/// Products below this many multiply-adds stay on the calling thread.
#[cfg(feature = "parallel")]
pub const PAR_THRESHOLD: usize = 1 << 16;

/// `out[m,n] += a[m,k] · b[k,n]`
pub fn matmul_acc<F: Real>(a: &[F], b: &[F], out: &mut [F], m: usize, k: usize, n: usize) {
    #[cfg(feature = "parallel")]
    if m > 1 && m * k * n >= PAR_THRESHOLD {
        return par::matmul_acc(a, b, out, m, k, n);
    }
    seq::matmul_acc(a, b, out, m, k, n)
}

/// `out[k,n] += a[m,k]ᵀ · b[m,n]`
pub fn matmul_at_b_acc<F: Real>(a: &[F], b: &[F], out: &mut [F], m: usize, k: usize, n: usize) {
    #[cfg(feature = "parallel")]
    if k > 1 && m * k * n >= PAR_THRESHOLD {
        return par::matmul_at_b_acc(a, b, out, m, k, n);
    }
    seq::matmul_at_b_acc(a, b, out, m, k, n)
}

/// `out[m,n] += a[m,k] · b[n,k]ᵀ`
pub fn matmul_a_bt_acc<F: Real>(a: &[F], b: &[F], out: &mut [F], m: usize, k: usize, n: usize) {
    #[cfg(feature = "parallel")]
    if m > 1 && m * k * n >= PAR_THRESHOLD {
        return par::matmul_a_bt_acc(a, b, out, m, k, n);
    }
    seq::matmul_a_bt_acc(a, b, out, m, k, n)
}

/// Dot product with eight independent partial sums so the loop vectorizes;
/// the summation order is fixed, hence deterministic.
#[inline(always)]
fn dot<F: Real>(x: &[F], y: &[F]) -> F {
    let mut acc = [F::zero(); 8];
    let xc = x.chunks_exact(8);
    let yc = y.chunks_exact(8);
    let (xr, yr) = (xc.remainder(), yc.remainder());
    for (xs, ys) in xc.zip(yc) {
        for l in 0..8 {
            acc[l] += xs[l] * ys[l];
        }
    }
    let mut tail = F::zero();
    for (&a, &b) in xr.iter().zip(yr) {
        tail += a * b;
    }
    ((acc[0] + acc[4]) + (acc[1] + acc[5])) + ((acc[2] + acc[6]) + (acc[3] + acc[7])) + tail
}

#[inline(always)]
fn a_bt_row<F: Real>(arow: &[F], b: &[F], orow: &mut [F], k: usize) {
    for (j, o) in orow.iter_mut().enumerate() {
        *o += dot(arow, &b[j * k..(j + 1) * k]);
    }
}

#[inline(always)]
fn axpy<F: Real>(alpha: F, x: &[F], y: &mut [F]) {
    for (yi, &xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

#[inline(always)]
fn matmul_row<F: Real>(arow: &[F], b: &[F], orow: &mut [F], n: usize) {
    for (p, &av) in arow.iter().enumerate() {
        axpy(av, &b[p * n..(p + 1) * n], orow);
    }
}

#[inline(always)]
fn at_b_row<F: Real>(a: &[F], b: &[F], orow: &mut [F], col: usize, m: usize, k: usize, n: usize) {
    for r in 0..m {
        axpy(a[r * k + col], &b[r * n..(r + 1) * n], orow);
    }
}

pub mod seq {
    use super::*;

    pub fn matmul_acc<F: Real>(a: &[F], b: &[F], out: &mut [F], m: usize, k: usize, n: usize) {
        debug_assert!(a.len() == m * k && b.len() == k * n && out.len() == m * n);
        for (i, orow) in out.chunks_mut(n.max(1)).enumerate().take(m) {
            matmul_row(&a[i * k..(i + 1) * k], b, orow, n);
        }
    }

    pub fn matmul_at_b_acc<F: Real>(a: &[F], b: &[F], out: &mut [F], m: usize, k: usize, n: usize) {
        debug_assert!(a.len() == m * k && b.len() == m * n && out.len() == k * n);
        for (col, orow) in out.chunks_mut(n.max(1)).enumerate().take(k) {
            at_b_row(a, b, orow, col, m, k, n);
        }
    }

    pub fn matmul_a_bt_acc<F: Real>(a: &[F], b: &[F], out: &mut [F], m: usize, k: usize, n: usize) {
        debug_assert!(a.len() == m * k && b.len() == n * k && out.len() == m * n);
        for (i, orow) in out.chunks_mut(n.max(1)).enumerate().take(m) {
            a_bt_row(&a[i * k..(i + 1) * k], b, orow, k);
        }
    }
}

#[cfg(feature = "parallel")]
pub mod par {
    use rayon::prelude::*;

    use super::*;

    pub fn matmul_acc<F: Real>(a: &[F], b: &[F], out: &mut [F], m: usize, k: usize, n: usize) {
        debug_assert!(a.len() == m * k && b.len() == k * n && out.len() == m * n);
        out.par_chunks_mut(n.max(1))
            .enumerate()
            .for_each(|(i, orow)| matmul_row(&a[i * k..(i + 1) * k], b, orow, n));
    }

    pub fn matmul_at_b_acc<F: Real>(a: &[F], b: &[F], out: &mut [F], m: usize, k: usize, n: usize) {
        debug_assert!(a.len() == m * k && b.len() == m * n && out.len() == k * n);
        out.par_chunks_mut(n.max(1))
            .enumerate()
            .for_each(|(col, orow)| at_b_row(a, b, orow, col, m, k, n));
    }

    pub fn matmul_a_bt_acc<F: Real>(a: &[F], b: &[F], out: &mut [F], m: usize, k: usize, n: usize) {
        debug_assert!(a.len() == m * k && b.len() == n * k && out.len() == m * n);
        out.par_chunks_mut(n.max(1))
            .enumerate()
            .for_each(|(i, orow)| a_bt_row(&a[i * k..(i + 1) * k], b, orow, k));
    }
}
