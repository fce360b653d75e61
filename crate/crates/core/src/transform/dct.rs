//! Orthonormal 8x8 type-II DCT over image blocks.

use std::f64::consts::PI;
use std::sync::OnceLock;

use crate::image::{Plane, Raster};

pub type Block = [f64; 64];

/// Row `u` holds basis `c(u) cos((2x + 1) u pi / 16)`.
fn basis() -> &'static [[f64; 8]; 8] {
    static BASIS: OnceLock<[[f64; 8]; 8]> = OnceLock::new();
    BASIS.get_or_init(|| {
        let mut m = [[0.0; 8]; 8];
        for (u, row) in m.iter_mut().enumerate() {
            let c = if u == 0 { (1.0f64 / 8.0).sqrt() } else { (2.0f64 / 8.0).sqrt() };
            for (x, v) in row.iter_mut().enumerate() {
                *v = c * ((2 * x + 1) as f64 * u as f64 * PI / 16.0).cos();
            }
        }
        m
    })
}

/// Forward transform of one block (row-major, index `v * 8 + u` for the output).
pub fn dct8(block: &Block) -> Block {
    let c = basis();
    let mut tmp = [0.0; 64];
    // rows: tmp[y][u] = sum_x c[u][x] b[y][x]
    for y in 0..8 {
        for u in 0..8 {
            tmp[y * 8 + u] = (0..8).map(|x| c[u][x] * block[y * 8 + x]).sum();
        }
    }
    let mut out = [0.0; 64];
    for v in 0..8 {
        for u in 0..8 {
            out[v * 8 + u] = (0..8).map(|y| c[v][y] * tmp[y * 8 + u]).sum();
        }
    }
    out
}

pub fn idct8(coeffs: &Block) -> Block {
    let c = basis();
    let mut tmp = [0.0; 64];
    for y in 0..8 {
        for u in 0..8 {
            tmp[y * 8 + u] = (0..8).map(|v| c[v][y] * coeffs[v * 8 + u]).sum();
        }
    }
    let mut out = [0.0; 64];
    for y in 0..8 {
        for x in 0..8 {
            out[y * 8 + x] = (0..8).map(|u| c[u][x] * tmp[y * 8 + u]).sum();
        }
    }
    out
}

/// Per-block coefficients, blocks in row-major order.
#[derive(Clone, Debug)]
pub struct BlockDct {
    pub blocks_x: usize,
    pub blocks_y: usize,
    pub blocks: Vec<Block>,
}

impl BlockDct {
    pub fn block(&self, bx: usize, by: usize) -> &Block {
        &self.blocks[by * self.blocks_x + bx]
    }

    /// Tiles the coefficient blocks back into a `(8 * blocks_x) x (8 * blocks_y)`
    /// raster after applying `f` per coefficient index.
    pub fn to_raster(&self, f: impl Fn(usize, f64) -> f64) -> Raster {
        let w = self.blocks_x * 8;
        let mut r = Raster::zeros(w, self.blocks_y * 8);
        for by in 0..self.blocks_y {
            for bx in 0..self.blocks_x {
                let b = self.block(bx, by);
                for (k, &c) in b.iter().enumerate() {
                    r.set(bx * 8 + k % 8, by * 8 + k / 8, f(k, c));
                }
            }
        }
        r
    }
}

/// Forward DCT of every 8x8 block; partial blocks on the right/bottom are
/// zero-padded.
pub fn block_dct8<P: Plane + ?Sized>(img: &P) -> BlockDct {
    let (w, h) = (img.width(), img.height());
    let bxn = w.div_ceil(8);
    let byn = h.div_ceil(8);
    let mut blocks = Vec::with_capacity(bxn * byn);
    for by in 0..byn {
        for bx in 0..bxn {
            let mut b = [0.0; 64];
            for j in 0..8 {
                let y = by * 8 + j;
                if y >= h {
                    break;
                }
                for i in 0..8 {
                    let x = bx * 8 + i;
                    if x < w {
                        b[j * 8 + i] = img.at(x, y);
                    }
                }
            }
            blocks.push(dct8(&b));
        }
    }
    BlockDct {
        blocks_x: bxn,
        blocks_y: byn,
        blocks,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::image::GrayImage;

    fn naive_dct(b: &Block) -> Block {
        let mut out = [0.0; 64];
        for v in 0..8 {
            for u in 0..8 {
                let cu = if u == 0 { (0.125f64).sqrt() } else { 0.5 };
                let cv = if v == 0 { (0.125f64).sqrt() } else { 0.5 };
                let mut acc = 0.0;
                for y in 0..8 {
                    for x in 0..8 {
                        acc += b[y * 8 + x]
                            * ((2 * x + 1) as f64 * u as f64 * PI / 16.0).cos()
                            * ((2 * y + 1) as f64 * v as f64 * PI / 16.0).cos();
                    }
                }
                out[v * 8 + u] = cu * cv * acc;
            }
        }
        out
    }

    #[test]
    fn constant_block_has_only_dc() {
        let c = dct8(&[0.3; 64]);
        assert!((c[0] - 8.0 * 0.3).abs() < 1e-12);
        assert!(c[1..].iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn impulse_matches_naive_definition() {
        let mut b = [0.0; 64];
        b[0] = 1.0;
        let fast = dct8(&b);
        let slow = naive_dct(&b);
        for k in 0..64 {
            assert!((fast[k] - slow[k]).abs() < 1e-12);
        }
    }

    #[test]
    fn arbitrary_block_matches_naive_and_inverts() {
        let b: Block = std::array::from_fn(|k| ((k * 37 + 11) % 17) as f64 / 17.0);
        let fast = dct8(&b);
        let slow = naive_dct(&b);
        for k in 0..64 {
            assert!((fast[k] - slow[k]).abs() < 1e-12);
        }
        let back = idct8(&fast);
        for k in 0..64 {
            assert!((back[k] - b[k]).abs() < 1e-6);
        }
    }

    #[test]
    fn partial_blocks_are_zero_padded() {
        let img = GrayImage::constant(10, 9, 1.0);
        let d = block_dct8(&img);
        assert_eq!((d.blocks_x, d.blocks_y), (2, 2));
        assert!((d.block(0, 0)[0] - 8.0).abs() < 1e-12);
        // 2 of 64 samples present in the right column block
        assert!((d.block(1, 0)[0] - 16.0 / 8.0).abs() < 1e-12);
    }
}
