use core::fmt::Debug;
use core::iter::Sum;
use core::ops::{AddAssign, MulAssign, SubAssign};

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Floating point type the field and trainer are generic over.
///
/// `f32` is the training default; `f64` is used for gradient checks.
pub trait Real:
    Float
    + FromPrimitive
    + ToPrimitive
    + Default
    + Debug
    + Send
    + Sync
    + AddAssign
    + SubAssign
    + MulAssign
    + Sum
    + 'static
{
    /// Short name used in file headers and logs.
    const NAME: &'static str;

    /// `c = a * b + beta * c` for strided row/column matrices.
    ///
    /// # Safety
    /// Every element addressed by the dimensions and strides must lie inside
    /// the corresponding slice; callers go through [`matmul`].
    #[allow(clippy::too_many_arguments)]
    unsafe fn gemm_raw(
        m: usize,
        k: usize,
        n: usize,
        a: *const Self,
        rsa: isize,
        csa: isize,
        b: *const Self,
        rsb: isize,
        csb: isize,
        beta: Self,
        c: *mut Self,
        rsc: isize,
        csc: isize,
    );

    #[inline]
    fn lit(x: f64) -> Self {
        // Every f64 is representable (possibly rounded) in both impls.
        Self::from_f64(x).unwrap()
    }

    #[inline]
    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Real for f32 {
    const NAME: &'static str = "f32";

    unsafe fn gemm_raw(
        m: usize,
        k: usize,
        n: usize,
        a: *const f32,
        rsa: isize,
        csa: isize,
        b: *const f32,
        rsb: isize,
        csb: isize,
        beta: f32,
        c: *mut f32,
        rsc: isize,
        csc: isize,
    ) {
        matrixmultiply::sgemm(m, k, n, 1.0, a, rsa, csa, b, rsb, csb, beta, c, rsc, csc)
    }
}

impl Real for f64 {
    const NAME: &'static str = "f64";

    unsafe fn gemm_raw(
        m: usize,
        k: usize,
        n: usize,
        a: *const f64,
        rsa: isize,
        csa: isize,
        b: *const f64,
        rsb: isize,
        csb: isize,
        beta: f64,
        c: *mut f64,
        rsc: isize,
        csc: isize,
    ) {
        matrixmultiply::dgemm(m, k, n, 1.0, a, rsa, csa, b, rsb, csb, beta, c, rsc, csc)
    }
}

/// A dense matrix view: `rows x cols` with element `(i, j)` at
/// `data[i * row_stride + j * col_stride]`.
#[derive(Clone, Copy)]
pub struct MatRef<'a, F> {
    pub data: &'a [F],
    pub rows: usize,
    pub cols: usize,
    pub row_stride: usize,
    pub col_stride: usize,
}

impl<'a, F> MatRef<'a, F> {
    /// Row-major `rows x cols`.
    pub fn row_major(data: &'a [F], rows: usize, cols: usize) -> Self {
        Self {
            data,
            rows,
            cols,
            row_stride: cols,
            col_stride: 1,
        }
    }

    /// Transposed view of a row-major `cols x rows` buffer.
    pub fn transposed(data: &'a [F], rows: usize, cols: usize) -> Self {
        Self {
            data,
            rows,
            cols,
            row_stride: 1,
            col_stride: rows,
        }
    }

    fn span(&self) -> usize {
        if self.rows == 0 || self.cols == 0 {
            0
        } else {
            (self.rows - 1) * self.row_stride + (self.cols - 1) * self.col_stride + 1
        }
    }
}

/// `out = a * b + beta * out`, where `out` is row-major `a.rows x b.cols`.
///
/// Panics if shapes disagree or a view addresses memory outside its slice.
pub fn matmul<F: Real>(a: MatRef<'_, F>, b: MatRef<'_, F>, beta: F, out: &mut [F]) {
    assert_eq!(a.cols, b.rows, "inner dimensions differ");
    assert!(a.span() <= a.data.len(), "lhs view out of bounds");
    assert!(b.span() <= b.data.len(), "rhs view out of bounds");
    assert!(out.len() >= a.rows * b.cols, "output too small");
    if a.rows == 0 || b.cols == 0 {
        return;
    }
    if a.cols == 0 {
        for v in &mut out[..a.rows * b.cols] {
            *v *= beta;
        }
        return;
    }
    // SAFETY: spans were checked against the slice lengths above.
    unsafe {
        F::gemm_raw(
            a.rows,
            a.cols,
            b.cols,
            a.data.as_ptr(),
            a.row_stride as isize,
            a.col_stride as isize,
            b.data.as_ptr(),
            b.row_stride as isize,
            b.col_stride as isize,
            beta,
            out.as_mut_ptr(),
            b.cols as isize,
            1,
        );
    }
}

#[inline]
pub fn sigmoid<F: Real>(x: F) -> F {
    if x >= F::zero() {
        F::one() / (F::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (F::one() + e)
    }
}

/// `ln(1 + e^x)` without overflow for large `x`.
#[inline]
pub fn softplus<F: Real>(x: F) -> F {
    if x > F::lit(20.0) {
        x + (-x).exp()
    } else {
        x.exp().ln_1p()
    }
}
