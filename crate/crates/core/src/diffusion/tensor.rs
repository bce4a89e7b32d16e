//! Minimal NCHW tensor plus the lowering used by the convolution layers.
//!
//! Convolutions are evaluated as one GEMM per layer call: the 3×3
//! neighborhoods of every output position are gathered into a patch matrix
//! (`im2col`), multiplied against the reshaped kernel, and the backward pass
//! uses the exact adjoint (`col2im` scatter-add). Activations internally live
//! in a `(N·H·W, C)` row layout so GEMM outputs need no permutation.

use crate::error::{Error, Result};
use ndarray::Array2;

/// Dense rank-4 tensor in NCHW order (batch, channel, row, column).
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    n: usize,
    c: usize,
    h: usize,
    w: usize,
    data: Vec<f64>,
}

impl Tensor {
    pub fn new(n: usize, c: usize, h: usize, w: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != n * c * h * w {
            return Err(Error::Dimension(format!(
                "tensor data length {} does not match shape {n}x{c}x{h}x{w}",
                data.len()
            )));
        }
        Ok(Self { n, c, h, w, data })
    }

    pub fn zeros(n: usize, c: usize, h: usize, w: usize) -> Self {
        Self { n, c, h, w, data: vec![0.0; n * c * h * w] }
    }

    pub fn shape(&self) -> [usize; 4] {
        [self.n, self.c, self.h, self.w]
    }

    pub fn batch(&self) -> usize {
        self.n
    }

    pub fn channels(&self) -> usize {
        self.c
    }

    pub fn height(&self) -> usize {
        self.h
    }

    pub fn width(&self) -> usize {
        self.w
    }

    pub fn numel(&self) -> usize {
        self.data.len()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn at(&self, n: usize, c: usize, y: usize, x: usize) -> f64 {
        self.data[((n * self.c + c) * self.h + y) * self.w + x]
    }

    pub fn set(&mut self, n: usize, c: usize, y: usize, x: usize, value: f64) {
        self.data[((n * self.c + c) * self.h + y) * self.w + x] = value;
    }

    /// Extracts batch item `b` as a 1-item tensor.
    pub fn item(&self, b: usize) -> Tensor {
        let stride = self.c * self.h * self.w;
        Tensor {
            n: 1,
            c: self.c,
            h: self.h,
            w: self.w,
            data: self.data[b * stride..(b + 1) * stride].to_vec(),
        }
    }

    /// Stacks 1-item tensors of identical shape into a batch.
    pub fn stack(items: &[Tensor]) -> Result<Tensor> {
        let first = items
            .first()
            .ok_or_else(|| Error::Precondition("cannot stack an empty tensor list".into()))?;
        let mut data = Vec::with_capacity(items.len() * first.numel());
        for item in items {
            if item.n != 1 || item.c != first.c || item.h != first.h || item.w != first.w {
                return Err(Error::Dimension("stacked tensors must be 1-item and same-shape".into()));
            }
            data.extend_from_slice(&item.data);
        }
        Tensor::new(items.len(), first.c, first.h, first.w, data)
    }
}

/// Activation storage used inside the network: row `r = (b·H + y)·W + x`
/// holds the C channel values of one spatial position, so a convolution is
/// `im2col(rows) · kernel` with no post-GEMM permutation.
#[derive(Debug, Clone)]
pub(crate) struct FeatMatrix {
    /// `(N·H·W, C)`, standard (row-major) layout.
    pub rows: Array2<f64>,
    pub n: usize,
    pub h: usize,
    pub w: usize,
}

impl FeatMatrix {
    pub fn channels(&self) -> usize {
        self.rows.ncols()
    }

    #[cfg(test)]
    pub fn zeros(n: usize, c: usize, h: usize, w: usize) -> Self {
        Self { rows: Array2::zeros((n * h * w, c)), n, h, w }
    }

    pub fn from_tensor(t: &Tensor) -> Self {
        let [n, c, h, w] = t.shape();
        let mut rows = Array2::zeros((n * h * w, c));
        let out = rows.as_slice_mut().expect("freshly built matrix is contiguous");
        let src = t.data();
        for b in 0..n {
            for ch in 0..c {
                let plane = &src[(b * c + ch) * h * w..(b * c + ch + 1) * h * w];
                for (p, &v) in plane.iter().enumerate() {
                    out[(b * h * w + p) * c + ch] = v;
                }
            }
        }
        Self { rows, n, h, w }
    }

    pub fn to_tensor(&self) -> Tensor {
        let (n, c, h, w) = (self.n, self.channels(), self.h, self.w);
        let src = self.rows.as_slice().expect("contiguous");
        let mut data = vec![0.0; n * c * h * w];
        for b in 0..n {
            for ch in 0..c {
                let plane = &mut data[(b * c + ch) * h * w..(b * c + ch + 1) * h * w];
                for (p, v) in plane.iter_mut().enumerate() {
                    *v = src[(b * h * w + p) * c + ch];
                }
            }
        }
        Tensor::new(n, c, h, w, data).expect("shape is consistent by construction")
    }

    /// Concatenates along the channel axis; shapes must agree spatially.
    pub fn concat_channels(a: &FeatMatrix, b: &FeatMatrix) -> Result<FeatMatrix> {
        if a.n != b.n || a.h != b.h || a.w != b.w {
            return Err(Error::Dimension("channel concat requires matching spatial shape".into()));
        }
        let (ca, cb) = (a.channels(), b.channels());
        let mut rows = Array2::zeros((a.rows.nrows(), ca + cb));
        let out = rows.as_slice_mut().expect("contiguous");
        let sa = a.rows.as_slice().expect("contiguous");
        let sb = b.rows.as_slice().expect("contiguous");
        for r in 0..a.rows.nrows() {
            out[r * (ca + cb)..r * (ca + cb) + ca].copy_from_slice(&sa[r * ca..(r + 1) * ca]);
            out[r * (ca + cb) + ca..(r + 1) * (ca + cb)].copy_from_slice(&sb[r * cb..(r + 1) * cb]);
        }
        Ok(FeatMatrix { rows, n: a.n, h: a.h, w: a.w })
    }

    /// Splits the channel axis at `c_left`, inverting [`Self::concat_channels`].
    pub fn split_channels(&self, c_left: usize) -> (FeatMatrix, FeatMatrix) {
        let c = self.channels();
        assert!(c_left <= c, "split point beyond channel count");
        let left = self.rows.slice(ndarray::s![.., ..c_left]).to_owned();
        let right = self.rows.slice(ndarray::s![.., c_left..]).to_owned();
        (
            FeatMatrix { rows: left, n: self.n, h: self.h, w: self.w },
            FeatMatrix { rows: right, n: self.n, h: self.h, w: self.w },
        )
    }

    /// Gathers 3×3 zero-padded neighborhoods: output `(N·H·W, 9·C)`, with the
    /// entry at row `(b,y,x)`, column `k·C + c` holding channel `c` at tap
    /// `k = (ky·3 + kx)` of the neighborhood (taps off the image are zero).
    pub fn im2col(&self) -> Array2<f64> {
        let (n, c, h, w) = (self.n, self.channels(), self.h, self.w);
        let src = self.rows.as_slice().expect("contiguous");
        let mut col = Array2::zeros((n * h * w, 9 * c));
        let out = col.as_slice_mut().expect("contiguous");
        let row_len = 9 * c;
        for b in 0..n {
            for y in 0..h {
                for x in 0..w {
                    let r = (b * h + y) * w + x;
                    for ky in 0..3usize {
                        let sy = y as isize + ky as isize - 1;
                        if sy < 0 || sy >= h as isize {
                            continue;
                        }
                        for kx in 0..3usize {
                            let sx = x as isize + kx as isize - 1;
                            if sx < 0 || sx >= w as isize {
                                continue;
                            }
                            let sr = (b * h + sy as usize) * w + sx as usize;
                            let k = ky * 3 + kx;
                            out[r * row_len + k * c..r * row_len + (k + 1) * c]
                                .copy_from_slice(&src[sr * c..(sr + 1) * c]);
                        }
                    }
                }
            }
        }
        col
    }

    /// Exact adjoint of [`Self::im2col`]: scatter-adds a `(N·H·W, 9·C)`
    /// cotangent back onto the `(N·H·W, C)` input layout.
    pub fn col2im(dcol: &Array2<f64>, n: usize, c: usize, h: usize, w: usize) -> FeatMatrix {
        assert_eq!(dcol.nrows(), n * h * w);
        assert_eq!(dcol.ncols(), 9 * c);
        // `dot` products with a unit inner dimension come back column-major.
        let dcol = dcol.as_standard_layout();
        let src = dcol.as_slice().expect("standard layout");
        let mut rows = Array2::zeros((n * h * w, c));
        let out = rows.as_slice_mut().expect("contiguous");
        let row_len = 9 * c;
        for b in 0..n {
            for y in 0..h {
                for x in 0..w {
                    let r = (b * h + y) * w + x;
                    for ky in 0..3usize {
                        let sy = y as isize + ky as isize - 1;
                        if sy < 0 || sy >= h as isize {
                            continue;
                        }
                        for kx in 0..3usize {
                            let sx = x as isize + kx as isize - 1;
                            if sx < 0 || sx >= w as isize {
                                continue;
                            }
                            let sr = (b * h + sy as usize) * w + sx as usize;
                            let k = ky * 3 + kx;
                            for ch in 0..c {
                                out[sr * c + ch] += src[r * row_len + k * c + ch];
                            }
                        }
                    }
                }
            }
        }
        FeatMatrix { rows, n, h, w }
    }

    /// Nearest-neighbor 2× upsampling (each input position becomes a 2×2
    /// block), used to align condition features with the double-size grid
    /// target.
    pub fn upsample2(&self) -> FeatMatrix {
        let (n, c, h, w) = (self.n, self.channels(), self.h, self.w);
        let (oh, ow) = (2 * h, 2 * w);
        let src = self.rows.as_slice().expect("contiguous");
        let mut rows = Array2::zeros((n * oh * ow, c));
        let out = rows.as_slice_mut().expect("contiguous");
        for b in 0..n {
            for y in 0..oh {
                for x in 0..ow {
                    let r = (b * oh + y) * ow + x;
                    let sr = (b * h + y / 2) * w + x / 2;
                    out[r * c..(r + 1) * c].copy_from_slice(&src[sr * c..(sr + 1) * c]);
                }
            }
        }
        FeatMatrix { rows, n, h: oh, w: ow }
    }

    /// Adjoint of [`Self::upsample2`]: sums each 2×2 block of the cotangent
    /// into its source position.
    pub fn downsample2_adjoint(&self) -> FeatMatrix {
        let (n, c, oh, ow) = (self.n, self.channels(), self.h, self.w);
        assert!(oh % 2 == 0 && ow % 2 == 0, "adjoint needs even dimensions");
        let (h, w) = (oh / 2, ow / 2);
        let src = self.rows.as_slice().expect("contiguous");
        let mut rows = Array2::zeros((n * h * w, c));
        let out = rows.as_slice_mut().expect("contiguous");
        for b in 0..n {
            for y in 0..oh {
                for x in 0..ow {
                    let r = (b * oh + y) * ow + x;
                    let dr = (b * h + y / 2) * w + x / 2;
                    for ch in 0..c {
                        out[dr * c + ch] += src[r * c + ch];
                    }
                }
            }
        }
        FeatMatrix { rows, n, h, w }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_feat(rng: &mut ChaCha8Rng, n: usize, c: usize, h: usize, w: usize) -> FeatMatrix {
        let mut f = FeatMatrix::zeros(n, c, h, w);
        for v in f.rows.iter_mut() {
            *v = rng.gen_range(-1.0..1.0);
        }
        f
    }

    #[test]
    fn tensor_roundtrip_through_feature_layout() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let data: Vec<f64> = (0..2 * 3 * 4 * 5).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let t = Tensor::new(2, 3, 4, 5, data).unwrap();
        let back = FeatMatrix::from_tensor(&t).to_tensor();
        assert_eq!(t, back);
        assert_eq!(t.at(1, 2, 3, 4), back.at(1, 2, 3, 4));
    }

    #[test]
    fn tensor_shape_validation() {
        assert!(Tensor::new(1, 1, 2, 2, vec![0.0; 3]).is_err());
        assert!(Tensor::stack(&[]).is_err());
        let a = Tensor::zeros(1, 2, 3, 3);
        let b = Tensor::zeros(1, 3, 3, 3);
        assert!(Tensor::stack(&[a.clone(), b]).is_err());
        let stacked = Tensor::stack(&[a.clone(), a.clone()]).unwrap();
        assert_eq!(stacked.shape(), [2, 2, 3, 3]);
        assert_eq!(stacked.item(1).shape(), [1, 2, 3, 3]);
    }

    #[test]
    fn im2col_center_tap_is_identity() {
        // Column k=4 (center tap) of the patch matrix reproduces the input.
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let f = random_feat(&mut rng, 2, 3, 4, 4);
        let col = f.im2col();
        for r in 0..f.rows.nrows() {
            for ch in 0..3 {
                assert_eq!(col[[r, 4 * 3 + ch]], f.rows[[r, ch]]);
            }
        }
    }

    #[test]
    fn im2col_edges_are_zero_padded() {
        let f = FeatMatrix {
            rows: Array2::from_elem((9, 1), 1.0),
            n: 1,
            h: 3,
            w: 3,
        };
        let col = f.im2col();
        // Top-left output position: taps above/left fall off the image.
        assert_eq!(col[[0, 0]], 0.0); // (ky=0,kx=0)
        assert_eq!(col[[0, 1]], 0.0);
        assert_eq!(col[[0, 3]], 0.0); // (ky=1,kx=0)
        assert_eq!(col[[0, 4]], 1.0); // center
        assert_eq!(col[[0, 8]], 1.0); // (ky=2,kx=2) exists
        // Center output position sees all nine taps.
        for k in 0..9 {
            assert_eq!(col[[4, k]], 1.0);
        }
    }

    #[test]
    fn col2im_is_adjoint_of_im2col() {
        // <im2col(x), y> must equal <x, col2im(y)> for random x, y: this pins
        // the backward scatter as the exact transpose of the forward gather.
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let x = random_feat(&mut rng, 2, 3, 5, 4);
        let col = x.im2col();
        let mut y = Array2::zeros(col.dim());
        for v in y.iter_mut() {
            *v = rng.gen_range(-1.0..1.0);
        }
        let lhs: f64 = col.iter().zip(y.iter()).map(|(a, b)| a * b).sum();
        let back = FeatMatrix::col2im(&y, 2, 3, 5, 4);
        let rhs: f64 = x.rows.iter().zip(back.rows.iter()).map(|(a, b)| a * b).sum();
        assert_relative_eq!(lhs, rhs, max_relative = 1e-12);
    }

    #[test]
    fn upsample_matches_nearest_and_adjoint_sums() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let x = random_feat(&mut rng, 1, 2, 3, 2);
        let up = x.upsample2();
        assert_eq!((up.h, up.w), (6, 4));
        for y in 0..6 {
            for xp in 0..4 {
                for ch in 0..2 {
                    assert_eq!(up.rows[[y * 4 + xp, ch]], x.rows[[(y / 2) * 2 + xp / 2, ch]]);
                }
            }
        }
        // Adjoint identity <up(x), g> == <x, down(g)>.
        let g = random_feat(&mut rng, 1, 2, 6, 4);
        let lhs: f64 = up.rows.iter().zip(g.rows.iter()).map(|(a, b)| a * b).sum();
        let down = g.downsample2_adjoint();
        let rhs: f64 = x.rows.iter().zip(down.rows.iter()).map(|(a, b)| a * b).sum();
        assert_relative_eq!(lhs, rhs, max_relative = 1e-12);
    }

    #[test]
    fn concat_then_split_roundtrips() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let a = random_feat(&mut rng, 2, 3, 4, 4);
        let b = random_feat(&mut rng, 2, 5, 4, 4);
        let cat = FeatMatrix::concat_channels(&a, &b).unwrap();
        assert_eq!(cat.channels(), 8);
        let (la, lb) = cat.split_channels(3);
        assert_eq!(la.rows, a.rows);
        assert_eq!(lb.rows, b.rows);
    }
}
