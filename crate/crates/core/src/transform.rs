//! Separable trigonometric transforms between the spectral box `[-K, K]³`
//! and an `M³` collocation grid on `[0, 2π)³`.
//!
//! Synthesis evaluates `Re Σ_k ĝ(k) e^{ik·x}` one axis at a time, costing
//! `O(M³·L + M²·L² + M·L³)` with `L = 2K + 1` instead of `O(M³·L³)`.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use num_complex::Complex64;

/// `e^{i k x_l}` for `k ∈ [-K, K]`, `x_l = 2πl/M`, stored as `table[(k+K)·M + l]`.
#[derive(Debug, Clone)]
pub struct PhaseTable {
    cutoff: usize,
    resolution: usize,
    table: Vec<Complex64>,
}

impl PhaseTable {
    pub fn new(cutoff: usize, resolution: usize) -> Self {
        let k_max = cutoff as i64;
        let mut table = Vec::with_capacity((2 * cutoff + 1) * resolution);
        for k in -k_max..=k_max {
            for l in 0..resolution as i64 {
                // reduce the phase index first so large k·l keeps full accuracy
                let p = (k * l).rem_euclid(resolution as i64) as f64;
                let theta = 2.0 * PI * p / resolution as f64;
                table.push(Complex64::new(libm::cos(theta), libm::sin(theta)));
            }
        }
        PhaseTable {
            cutoff,
            resolution,
            table,
        }
    }

    pub fn cutoff(&self) -> usize {
        self.cutoff
    }

    pub fn resolution(&self) -> usize {
        self.resolution
    }

    /// Spectral box side `2K + 1`.
    pub fn side(&self) -> usize {
        2 * self.cutoff + 1
    }

    #[inline]
    fn phase(&self, k_shifted: usize, l: usize) -> Complex64 {
        self.table[k_shifted * self.resolution + l]
    }

    /// Box offset of wavevector `k`.
    pub fn box_index(&self, k: [i32; 3]) -> usize {
        let s = self.side();
        let c = self.cutoff as i32;
        (((k[0] + c) as usize) * s + (k[1] + c) as usize) * s + (k[2] + c) as usize
    }

    /// Real part of the trigonometric sum, on the `M³` grid in row-major `(x, y, z)` order.
    pub fn synthesize(&self, spectrum: &[Complex64]) -> Vec<f64> {
        let s = self.side();
        let m = self.resolution;
        debug_assert_eq!(spectrum.len(), s * s * s);
        let zero = Complex64::new(0.0, 0.0);

        // z: [kx][ky][z]
        let mut t1 = vec![zero; s * s * m];
        for kx in 0..s {
            for ky in 0..s {
                let row = &spectrum[(kx * s + ky) * s..(kx * s + ky + 1) * s];
                if row.iter().all(|v| *v == zero) {
                    continue;
                }
                let out = &mut t1[(kx * s + ky) * m..(kx * s + ky + 1) * m];
                for (kz, &v) in row.iter().enumerate() {
                    if v == zero {
                        continue;
                    }
                    for (z, o) in out.iter_mut().enumerate() {
                        *o += v * self.phase(kz, z);
                    }
                }
            }
        }
        // y: [kx][y][z]
        let mut t2 = vec![zero; s * m * m];
        for kx in 0..s {
            for ky in 0..s {
                let src = &t1[(kx * s + ky) * m..(kx * s + ky + 1) * m];
                if src.iter().all(|v| *v == zero) {
                    continue;
                }
                for y in 0..m {
                    let ph = self.phase(ky, y);
                    let dst = &mut t2[(kx * m + y) * m..(kx * m + y + 1) * m];
                    for (d, &v) in dst.iter_mut().zip(src) {
                        *d += v * ph;
                    }
                }
            }
        }
        // x: [x][y][z], real part only
        let mut out = vec![0.0; m * m * m];
        for kx in 0..s {
            let src = &t2[kx * m * m..(kx + 1) * m * m];
            for x in 0..m {
                let ph = self.phase(kx, x);
                let dst = &mut out[x * m * m..(x + 1) * m * m];
                for (d, &v) in dst.iter_mut().zip(src) {
                    *d += v.re * ph.re - v.im * ph.im;
                }
            }
        }
        out
    }

    /// Discrete Fourier coefficients `(1/M³) Σ_x g(x) e^{-ik·x}` over the spectral box.
    pub fn analyze(&self, grid: &[f64]) -> Vec<Complex64> {
        let s = self.side();
        let m = self.resolution;
        debug_assert_eq!(grid.len(), m * m * m);
        let zero = Complex64::new(0.0, 0.0);

        // x: [kx][y][z]
        let mut t1 = vec![zero; s * m * m];
        for kx in 0..s {
            let dst = &mut t1[kx * m * m..(kx + 1) * m * m];
            for x in 0..m {
                let ph = self.phase(kx, x).conj();
                let src = &grid[x * m * m..(x + 1) * m * m];
                for (d, &g) in dst.iter_mut().zip(src) {
                    *d += ph * g;
                }
            }
        }
        // y: [kx][ky][z]
        let mut t2 = vec![zero; s * s * m];
        for kx in 0..s {
            for ky in 0..s {
                let dst = &mut t2[(kx * s + ky) * m..(kx * s + ky + 1) * m];
                for y in 0..m {
                    let ph = self.phase(ky, y).conj();
                    let src = &t1[(kx * m + y) * m..(kx * m + y + 1) * m];
                    for (d, &v) in dst.iter_mut().zip(src) {
                        *d += v * ph;
                    }
                }
            }
        }
        // z: [kx][ky][kz]
        let norm = 1.0 / (m * m * m) as f64;
        let mut out = vec![zero; s * s * s];
        for kx in 0..s {
            for ky in 0..s {
                let src = &t2[(kx * s + ky) * m..(kx * s + ky + 1) * m];
                for kz in 0..s {
                    let mut acc = zero;
                    for (z, &v) in src.iter().enumerate() {
                        acc += v * self.phase(kz, z).conj();
                    }
                    out[(kx * s + ky) * s + kz] = acc * norm;
                }
            }
        }
        out
    }
}
