//! Scalar abstraction shared by every numeric routine in the crate.
//!
//! Everything downstream is written against [`Real`], so networks can be
//! trained in `f64` (the default used by the harness) or `f32`.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, NumAssign, ToPrimitive};

/// Floating-point scalar usable in matrices, activations and optimizers.
pub trait Real:
    Float + FromPrimitive + ToPrimitive + NumAssign + Sum + Default + Debug + Display + Send + Sync + 'static
{
    /// Converts an `f64` constant into this type.
    #[inline]
    fn lit(v: f64) -> Self {
        Self::from_f64(v).expect("f64 constant representable")
    }

    /// Widens to `f64`, used for serialization and metrics.
    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().expect("finite widening to f64")
    }

    /// `c = a · b` for strided operands; `a` is `m×k`, `b` is `k×n`, `c` is `m×n`
    /// with row stride `n`. `c` is overwritten.
    ///
    /// The default is a plain i-k-j loop; `f32`/`f64` override it with a
    /// blocked kernel.
    #[allow(clippy::too_many_arguments)]
    fn gemm(
        m: usize,
        k: usize,
        n: usize,
        a: &[Self],
        a_strides: (usize, usize),
        b: &[Self],
        b_strides: (usize, usize),
        c: &mut [Self],
    ) {
        naive_gemm(m, k, n, a, a_strides, b, b_strides, c)
    }
}

#[allow(clippy::too_many_arguments)]
pub(crate) fn naive_gemm<T: Real>(
    m: usize,
    k: usize,
    n: usize,
    a: &[T],
    (ars, acs): (usize, usize),
    b: &[T],
    (brs, bcs): (usize, usize),
    c: &mut [T],
) {
    c[..m * n].iter_mut().for_each(|v| *v = T::zero());
    for i in 0..m {
        let row = &mut c[i * n..(i + 1) * n];
        for p in 0..k {
            let aip = a[i * ars + p * acs];
            if aip == T::zero() {
                continue;
            }
            for (j, out) in row.iter_mut().enumerate() {
                *out += aip * b[p * brs + j * bcs];
            }
        }
    }
}

fn check_extent(len: usize, rows: usize, cols: usize, (rs, cs): (usize, usize)) {
    if rows > 0 && cols > 0 {
        assert!((rows - 1) * rs + (cols - 1) * cs < len, "strided operand out of bounds");
    }
}

macro_rules! blocked_gemm {
    ($t:ty, $kernel:path) => {
        impl Real for $t {
            fn gemm(
                m: usize,
                k: usize,
                n: usize,
                a: &[Self],
                a_strides: (usize, usize),
                b: &[Self],
                b_strides: (usize, usize),
                c: &mut [Self],
            ) {
                check_extent(a.len(), m, k, a_strides);
                check_extent(b.len(), k, n, b_strides);
                assert!(c.len() >= m * n, "output buffer too small");
                if m == 0 || n == 0 {
                    return;
                }
                if k == 0 {
                    c[..m * n].iter_mut().for_each(|v| *v = 0.0);
                    return;
                }
                // SAFETY: extents of all three operands were checked above and
                // `c` does not alias `a` or `b` (distinct borrows).
                unsafe {
                    $kernel(
                        m,
                        k,
                        n,
                        1.0,
                        a.as_ptr(),
                        a_strides.0 as isize,
                        a_strides.1 as isize,
                        b.as_ptr(),
                        b_strides.0 as isize,
                        b_strides.1 as isize,
                        0.0,
                        c.as_mut_ptr(),
                        n as isize,
                        1,
                    );
                }
            }
        }
    };
}

blocked_gemm!(f64, matrixmultiply::dgemm);
blocked_gemm!(f32, matrixmultiply::sgemm);
