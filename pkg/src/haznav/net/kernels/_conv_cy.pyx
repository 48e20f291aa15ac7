# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled convolution core: C-loop im2col/col2im around BLAS dgemm.

Same contract as the pure-numpy backend (NHWC float64, weights
(KH, KW, Cin, Cout)); the win is fused gather/scatter loops and no
intermediate numpy temporaries beyond the column buffer.
"""

import numpy as np

cimport numpy as cnp
from scipy.linalg.cython_blas cimport dgemm

cnp.import_array()

BACKEND_NAME = "cython"


cdef void _gemm_rm(char ta, char tb, int m, int n, int k,
                   double* a, int lda, double* b, int ldb,
                   double* c, int ldc, double beta) noexcept nogil:
    """C_rm(m,n) = op(A)_rm(m,k) . op(B)_rm(k,n).

    Row-major matrices are handed to column-major BLAS via the identity
    C_rm = A.B  <=>  C_cm^T = B_cm^T . A_cm^T, i.e. swap the operands.
    lda/ldb/ldc are the row-major leading dimensions (column counts).
    """
    cdef double alpha = 1.0
    dgemm(&tb, &ta, &n, &m, &k, &alpha, b, &ldb, a, &lda, &beta, c, &ldc)


cdef void _im2col(const double* x, double* col,
                  int n, int h, int w, int c,
                  int kh, int kw, int sh, int sw, int ph, int pw,
                  int oh, int ow) noexcept nogil:
    cdef int img, r, q, i, j, ch, ir, ic
    cdef long dst = 0
    cdef const double* src
    for img in range(n):
        for r in range(oh):
            for q in range(ow):
                for i in range(kh):
                    ir = r * sh + i - ph
                    for j in range(kw):
                        ic = q * sw + j - pw
                        if 0 <= ir < h and 0 <= ic < w:
                            src = x + (((<long>img * h + ir) * w + ic) * c)
                            for ch in range(c):
                                col[dst + ch] = src[ch]
                        else:
                            for ch in range(c):
                                col[dst + ch] = 0.0
                        dst += c


cdef void _col2im(const double* col, double* dx,
                  int n, int h, int w, int c,
                  int kh, int kw, int sh, int sw, int ph, int pw,
                  int oh, int ow) noexcept nogil:
    cdef int img, r, q, i, j, ch, ir, ic
    cdef long src = 0
    cdef double* dst
    for img in range(n):
        for r in range(oh):
            for q in range(ow):
                for i in range(kh):
                    ir = r * sh + i - ph
                    for j in range(kw):
                        ic = q * sw + j - pw
                        if 0 <= ir < h and 0 <= ic < w:
                            dst = dx + (((<long>img * h + ir) * w + ic) * c)
                            for ch in range(c):
                                dst[ch] += col[src + ch]
                        src += c


def conv2d_forward(cnp.ndarray[double, ndim=4] x,
                   cnp.ndarray[double, ndim=4] w,
                   cnp.ndarray[double, ndim=1] b,
                   stride, pad):
    cdef int n = x.shape[0], h = x.shape[1], wd = x.shape[2], cin = x.shape[3]
    cdef int kh = w.shape[0], kw = w.shape[1], cout = w.shape[3]
    cdef int sh = stride[0], sw = stride[1], ph = pad[0], pw = pad[1]
    cdef int oh = (h + 2 * ph - kh) // sh + 1
    cdef int ow = (wd + 2 * pw - kw) // sw + 1
    cdef long m = <long>n * oh * ow
    cdef int k = kh * kw * cin

    x = np.ascontiguousarray(x)
    w = np.ascontiguousarray(w)
    b = np.ascontiguousarray(b)
    cdef cnp.ndarray[double, ndim=2] col = np.empty((m, k), dtype=np.float64)
    cdef cnp.ndarray[double, ndim=2] y = np.empty((m, cout), dtype=np.float64)
    cdef long r
    cdef int ch
    with nogil:
        _im2col(<const double*>x.data, <double*>col.data,
                n, h, wd, cin, kh, kw, sh, sw, ph, pw, oh, ow)
        _gemm_rm(b'N', b'N', <int>m, cout, k,
                 <double*>col.data, k, <double*>w.data, cout,
                 <double*>y.data, cout, 0.0)
        for r in range(m):
            for ch in range(cout):
                (<double*>y.data)[r * cout + ch] += (<const double*>b.data)[ch]
    return y.reshape(n, oh, ow, cout)


def conv2d_backward(cnp.ndarray[double, ndim=4] x,
                    cnp.ndarray[double, ndim=4] w,
                    cnp.ndarray[double, ndim=4] dy,
                    stride, pad):
    cdef int n = x.shape[0], h = x.shape[1], wd = x.shape[2], cin = x.shape[3]
    cdef int kh = w.shape[0], kw = w.shape[1], cout = w.shape[3]
    cdef int sh = stride[0], sw = stride[1], ph = pad[0], pw = pad[1]
    cdef int oh = (h + 2 * ph - kh) // sh + 1
    cdef int ow = (wd + 2 * pw - kw) // sw + 1
    cdef long m = <long>n * oh * ow
    cdef int k = kh * kw * cin

    x = np.ascontiguousarray(x)
    w = np.ascontiguousarray(w)
    dy = np.ascontiguousarray(dy)
    cdef cnp.ndarray[double, ndim=2] col = np.empty((m, k), dtype=np.float64)
    cdef cnp.ndarray[double, ndim=4] dw = np.empty_like(w)
    cdef cnp.ndarray[double, ndim=1] db = np.zeros(cout, dtype=np.float64)
    cdef cnp.ndarray[double, ndim=4] dx = np.zeros_like(x)
    cdef long r
    cdef int ch
    with nogil:
        _im2col(<const double*>x.data, <double*>col.data,
                n, h, wd, cin, kh, kw, sh, sw, ph, pw, oh, ow)
        # dW(k, cout) = col^T . dy
        _gemm_rm(b'T', b'N', k, cout, <int>m,
                 <double*>col.data, k, <double*>dy.data, cout,
                 <double*>dw.data, cout, 0.0)
        for r in range(m):
            for ch in range(cout):
                (<double*>db.data)[ch] += (<const double*>dy.data)[r * cout + ch]
        # dcol(m, k) = dy . W^T, written over the column buffer
        _gemm_rm(b'N', b'T', <int>m, k, cout,
                 <double*>dy.data, cout, <double*>w.data, cout,
                 <double*>col.data, k, 0.0)
        _col2im(<const double*>col.data, <double*>dx.data,
                n, h, wd, cin, kh, kw, sh, sw, ph, pw, oh, ow)
    return dx, dw, db
