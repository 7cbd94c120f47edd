use serde::{Deserialize, Serialize};

use super::{Element, LayerGrad, Tensor};
use crate::error::{param_err, shape_err, Result};

/// Upper bound on the im2col scratch buffer, in elements. Batches are
/// processed in sample chunks that fit under it.
const COLS_BUDGET: usize = 1 << 22;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Padding {
    /// Output extent `ceil(in / stride)`, zero padding split evenly with the
    /// odd element on the trailing side.
    Same,
    /// No padding; output extent `floor((in - k) / stride) + 1`.
    Valid,
}

/// Output extent and leading padding along one spatial axis.
pub fn conv_output_extent(
    input: usize,
    kernel: usize,
    stride: usize,
    padding: Padding,
) -> Result<(usize, usize)> {
    if stride == 0 {
        return Err(param_err!("stride must be >= 1"));
    }
    if kernel == 0 || input == 0 {
        return Err(shape_err!("zero-sized kernel or input"));
    }
    match padding {
        Padding::Same => {
            let out = input.div_ceil(stride);
            let total = ((out - 1) * stride + kernel).saturating_sub(input);
            Ok((out, total / 2))
        }
        Padding::Valid => {
            if input < kernel {
                return Err(shape_err!(
                    "valid convolution of extent {input} with kernel {kernel} is empty"
                ));
            }
            Ok(((input - kernel) / stride + 1, 0))
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct Geometry {
    n: usize,
    h: usize,
    w: usize,
    cin: usize,
    kh: usize,
    kw: usize,
    cout: usize,
    stride: usize,
    oh: usize,
    ow: usize,
    pad_top: usize,
    pad_left: usize,
}

impl Geometry {
    fn new<T: Element>(
        input: &Tensor<T>,
        kernel: &Tensor<T>,
        stride: usize,
        padding: Padding,
    ) -> Result<Self> {
        let (n, h, w, cin) = input.dims4()?;
        let (kh, kw, kin, cout) = kernel.dims4()?;
        if kin != cin {
            return Err(shape_err!(
                "kernel expects {kin} input channels, input has {cin}"
            ));
        }
        let (oh, pad_top) = conv_output_extent(h, kh, stride, padding)?;
        let (ow, pad_left) = conv_output_extent(w, kw, stride, padding)?;
        Ok(Self {
            n,
            h,
            w,
            cin,
            kh,
            kw,
            cout,
            stride,
            oh,
            ow,
            pad_top,
            pad_left,
        })
    }

    fn patch_len(&self) -> usize {
        self.kh * self.kw * self.cin
    }

    fn out_shape(&self) -> [usize; 4] {
        [self.n, self.oh, self.ow, self.cout]
    }

    /// 1×1 stride-1 convolutions read the input directly as the patch matrix.
    fn is_pointwise(&self) -> bool {
        self.kh == 1 && self.kw == 1 && self.stride == 1
    }

    fn samples_per_chunk(&self) -> usize {
        let per_sample = self.oh * self.ow * self.patch_len();
        (COLS_BUDGET / per_sample.max(1)).clamp(1, self.n)
    }

    /// Input pixel `(iy, ix)` feeding output `(oy, ox)` through tap `(ky, kx)`.
    #[inline]
    fn source(&self, oy: usize, ox: usize, ky: usize, kx: usize) -> Option<(usize, usize)> {
        let iy = (oy * self.stride + ky).checked_sub(self.pad_top)?;
        let ix = (ox * self.stride + kx).checked_sub(self.pad_left)?;
        (iy < self.h && ix < self.w).then_some((iy, ix))
    }
}

fn im2col<T: Element>(input: &[T], g: &Geometry, samples: std::ops::Range<usize>, cols: &mut [T]) {
    let plen = g.patch_len();
    let mut row = 0;
    for n in samples {
        for oy in 0..g.oh {
            for ox in 0..g.ow {
                let dst = &mut cols[row * plen..(row + 1) * plen];
                for ky in 0..g.kh {
                    for kx in 0..g.kw {
                        let off = (ky * g.kw + kx) * g.cin;
                        let slot = &mut dst[off..off + g.cin];
                        match g.source(oy, ox, ky, kx) {
                            Some((iy, ix)) => {
                                let src = ((n * g.h + iy) * g.w + ix) * g.cin;
                                slot.copy_from_slice(&input[src..src + g.cin]);
                            }
                            None => slot.fill(T::zero()),
                        }
                    }
                }
                row += 1;
            }
        }
    }
}

fn col2im_add<T: Element>(
    cols: &[T],
    g: &Geometry,
    samples: std::ops::Range<usize>,
    d_input: &mut [T],
) {
    let plen = g.patch_len();
    let mut row = 0;
    for n in samples {
        for oy in 0..g.oh {
            for ox in 0..g.ow {
                let src = &cols[row * plen..(row + 1) * plen];
                for ky in 0..g.kh {
                    for kx in 0..g.kw {
                        if let Some((iy, ix)) = g.source(oy, ox, ky, kx) {
                            let off = (ky * g.kw + kx) * g.cin;
                            let dst = ((n * g.h + iy) * g.w + ix) * g.cin;
                            for (d, &s) in d_input[dst..dst + g.cin]
                                .iter_mut()
                                .zip(&src[off..off + g.cin])
                            {
                                *d = *d + s;
                            }
                        }
                    }
                }
                row += 1;
            }
        }
    }
}

/// 2-D convolution (cross-correlation) of an NHWC batch with a
/// `kh × kw × cin × cout` kernel. No bias.
pub fn conv2d_forward<T: Element>(
    input: &Tensor<T>,
    kernel: &Tensor<T>,
    stride: usize,
    padding: Padding,
) -> Result<Tensor<T>> {
    let g = Geometry::new(input, kernel, stride, padding)?;
    let plen = g.patch_len();
    let rows_per_sample = g.oh * g.ow;
    let mut out = vec![T::zero(); g.n * rows_per_sample * g.cout];

    if g.is_pointwise() {
        T::gemm(
            g.n * rows_per_sample,
            plen,
            g.cout,
            T::one(),
            input.data(),
            plen as isize,
            1,
            kernel.data(),
            g.cout as isize,
            1,
            T::zero(),
            &mut out,
            g.cout as isize,
            1,
        );
        return Tensor::from_vec(&g.out_shape(), out);
    }

    let chunk = g.samples_per_chunk();
    let mut cols = vec![T::zero(); chunk * rows_per_sample * plen];
    let mut start = 0;
    while start < g.n {
        let end = (start + chunk).min(g.n);
        let rows = (end - start) * rows_per_sample;
        im2col(input.data(), &g, start..end, &mut cols);
        T::gemm(
            rows,
            plen,
            g.cout,
            T::one(),
            &cols[..rows * plen],
            plen as isize,
            1,
            kernel.data(),
            g.cout as isize,
            1,
            T::zero(),
            &mut out[start * rows_per_sample * g.cout..end * rows_per_sample * g.cout],
            g.cout as isize,
            1,
        );
        start = end;
    }
    Tensor::from_vec(&g.out_shape(), out)
}

/// Gradients of a convolution with respect to its input and kernel.
/// `d_params` holds the single kernel gradient.
pub fn conv2d_backward<T: Element>(
    input: &Tensor<T>,
    kernel: &Tensor<T>,
    stride: usize,
    padding: Padding,
    d_output: &Tensor<T>,
) -> Result<LayerGrad<T>> {
    let g = Geometry::new(input, kernel, stride, padding)?;
    d_output.expect_shape(&g.out_shape())?;
    let plen = g.patch_len();
    let rows_per_sample = g.oh * g.ow;
    let mut d_kernel = vec![T::zero(); plen * g.cout];
    let mut d_input = vec![T::zero(); input.len()];
    let dout = d_output.data();

    if g.is_pointwise() {
        let rows = g.n * rows_per_sample;
        T::gemm(
            plen,
            rows,
            g.cout,
            T::one(),
            input.data(),
            1,
            plen as isize,
            dout,
            g.cout as isize,
            1,
            T::zero(),
            &mut d_kernel,
            g.cout as isize,
            1,
        );
        T::gemm(
            rows,
            g.cout,
            plen,
            T::one(),
            dout,
            g.cout as isize,
            1,
            kernel.data(),
            1,
            g.cout as isize,
            T::zero(),
            &mut d_input,
            plen as isize,
            1,
        );
    } else {
        let chunk = g.samples_per_chunk();
        let mut cols = vec![T::zero(); chunk * rows_per_sample * plen];
        let mut start = 0;
        while start < g.n {
            let end = (start + chunk).min(g.n);
            let rows = (end - start) * rows_per_sample;
            let dout_chunk =
                &dout[start * rows_per_sample * g.cout..end * rows_per_sample * g.cout];
            im2col(input.data(), &g, start..end, &mut cols);
            T::gemm(
                plen,
                rows,
                g.cout,
                T::one(),
                &cols[..rows * plen],
                1,
                plen as isize,
                dout_chunk,
                g.cout as isize,
                1,
                T::one(),
                &mut d_kernel,
                g.cout as isize,
                1,
            );
            T::gemm(
                rows,
                g.cout,
                plen,
                T::one(),
                dout_chunk,
                g.cout as isize,
                1,
                kernel.data(),
                1,
                g.cout as isize,
                T::zero(),
                &mut cols[..rows * plen],
                plen as isize,
                1,
            );
            col2im_add(&cols[..rows * plen], &g, start..end, &mut d_input);
            start = end;
        }
    }

    Ok(LayerGrad {
        d_input: Tensor::from_vec(input.shape(), d_input)?,
        d_params: vec![Tensor::from_vec(kernel.shape(), d_kernel)?],
    })
}

/// Two-pass separable convolution: a `1 × n` pass (`col_kernel`, shape
/// `1 × n × cin × cmid`) followed by an `n × 1` pass (`row_kernel`, shape
/// `n × 1 × cmid × cout`).
///
/// This equals a full `n × n` convolution only when the full kernel factors
/// as [`outer_kernel`] of the two passes, i.e. is spatially rank-1 per
/// channel pair. Only stride 1 is accepted.
pub fn conv2d_separable<T: Element>(
    input: &Tensor<T>,
    col_kernel: &Tensor<T>,
    row_kernel: &Tensor<T>,
    stride: usize,
    padding: Padding,
) -> Result<Tensor<T>> {
    let (ch, cn, _, cmid) = col_kernel.dims4()?;
    let (rn, rw, rmid, _) = row_kernel.dims4()?;
    if ch != 1 || rw != 1 {
        return Err(shape_err!(
            "separable kernels must be 1×n and n×1, got {:?} and {:?}",
            col_kernel.shape(),
            row_kernel.shape()
        ));
    }
    if cn != rn {
        return Err(shape_err!("separable kernel sizes differ: 1×{cn} vs {rn}×1"));
    }
    if cmid != rmid {
        return Err(shape_err!(
            "intermediate channels differ: {cmid} vs {rmid}"
        ));
    }
    if stride != 1 {
        return Err(param_err!(
            "separable convolution is only equivalent at stride 1, got {stride}"
        ));
    }
    let horizontal = conv2d_forward(input, col_kernel, 1, padding)?;
    conv2d_forward(&horizontal, row_kernel, 1, padding)
}

/// Full `n × n × cin × cout` kernel equivalent to the separable pair:
/// `k[y][x][i][o] = Σ_m row[y][0][m][o] · col[0][x][i][m]`.
pub fn outer_kernel<T: Element>(col_kernel: &Tensor<T>, row_kernel: &Tensor<T>) -> Result<Tensor<T>> {
    let (_, n, cin, cmid) = col_kernel.dims4()?;
    let (rn, _, rmid, cout) = row_kernel.dims4()?;
    if rn != n || rmid != cmid {
        return Err(shape_err!(
            "incompatible separable pair {:?} / {:?}",
            col_kernel.shape(),
            row_kernel.shape()
        ));
    }
    let col = col_kernel.data();
    let row = row_kernel.data();
    let mut out = vec![T::zero(); n * n * cin * cout];
    for y in 0..n {
        for x in 0..n {
            for i in 0..cin {
                for o in 0..cout {
                    let mut acc = 0.0;
                    for m in 0..cmid {
                        acc += row[(y * rmid + m) * cout + o].as_f64()
                            * col[(x * cin + i) * cmid + m].as_f64();
                    }
                    out[((y * n + x) * cin + i) * cout + o] = T::from_f64(acc);
                }
            }
        }
    }
    Tensor::from_vec(&[n, n, cin, cout], out)
}
