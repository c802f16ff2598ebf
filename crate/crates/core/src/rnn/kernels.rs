//! Dense linear-algebra kernels on row-major slices. Reductions use a fixed
//! eight-lane order so results do not depend on the caller.

use super::Real;

const LANES: usize = 8;

#[inline]
pub fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [T::zero(); LANES];
    let ca = a.chunks_exact(LANES);
    let cb = b.chunks_exact(LANES);
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        for k in 0..LANES {
            acc[k] += x[k] * y[k];
        }
    }
    let mut s = ((acc[0] + acc[4]) + (acc[1] + acc[5])) + ((acc[2] + acc[6]) + (acc[3] + acc[7]));
    for (x, y) in ra.iter().zip(rb) {
        s += *x * *y;
    }
    s
}

/// `y += a * x`.
#[inline]
pub fn axpy<T: Real>(y: &mut [T], a: T, x: &[T]) {
    debug_assert_eq!(x.len(), y.len());
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * *xi;
    }
}

/// `out[r] += Σ_c mat[r, c] · x[c]` for a `rows × x.len()` matrix.
#[inline]
pub fn gemv_acc<T: Real>(out: &mut [T], mat: &[T], x: &[T]) {
    let cols = x.len();
    debug_assert_eq!(mat.len(), out.len() * cols);
    for (o, row) in out.iter_mut().zip(mat.chunks_exact(cols)) {
        *o += dot(row, x);
    }
}

/// `out[c] += Σ_r v[r] · mat[r, c]` (transpose product).
#[inline]
pub fn gemv_t_acc<T: Real>(out: &mut [T], mat: &[T], v: &[T]) {
    let cols = out.len();
    debug_assert_eq!(mat.len(), v.len() * cols);
    for (vr, row) in v.iter().zip(mat.chunks_exact(cols)) {
        if *vr != T::zero() {
            axpy(out, *vr, row);
        }
    }
}

/// `grad[r, c] += u[r] · x[c]`.
#[inline]
pub fn outer_acc<T: Real>(grad: &mut [T], u: &[T], x: &[T]) {
    let cols = x.len();
    debug_assert_eq!(grad.len(), u.len() * cols);
    for (ur, row) in u.iter().zip(grad.chunks_exact_mut(cols)) {
        if *ur != T::zero() {
            axpy(row, *ur, x);
        }
    }
}
