//! Minimal 3D FFT on a cubic grid, built on per-line 1D transforms.
//!
//! Each pass transforms the contiguous (last) axis and then rotates the axis
//! order, so three passes transform all axes and restore the original layout.
//! Lines are independent, so the parallel schedule cannot change results.

use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};
use std::sync::Arc;

use crate::Complex64;

#[derive(Clone)]
pub(crate) struct Fft3 {
    size: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl Fft3 {
    pub fn new(size: usize) -> Self {
        let mut planner = FftPlanner::new();
        Fft3 {
            size,
            forward: planner.plan_fft_forward(size),
            inverse: planner.plan_fft_inverse(size),
        }
    }

    /// Unnormalized forward transform, kernel `exp(-2*pi*i*j*k/G)` per axis.
    pub fn forward(&self, data: &mut Vec<Complex64>) {
        self.run(data, true);
    }

    /// Unnormalized inverse transform, kernel `exp(+2*pi*i*j*k/G)` per axis.
    pub fn inverse(&self, data: &mut Vec<Complex64>) {
        self.run(data, false);
    }

    fn run(&self, data: &mut Vec<Complex64>, fwd: bool) {
        let g = self.size;
        assert_eq!(data.len(), g * g * g, "grid buffer size mismatch");
        let plan = if fwd { &self.forward } else { &self.inverse };
        let mut scratch = vec![Complex64::new(0.0, 0.0); g * g * g];
        for _pass in 0..3 {
            data.par_chunks_mut(g).for_each_init(
                || vec![Complex64::new(0.0, 0.0); plan.get_inplace_scratch_len()],
                |line_scratch, line| {
                    plan.process_with_scratch(line, line_scratch);
                },
            );
            // Rotate layout (a,b,c) -> (c,a,b) so the next axis is contiguous.
            scratch
                .par_chunks_mut(g * g)
                .enumerate()
                .for_each(|(c, slab)| {
                    for a in 0..g {
                        for (b, slot) in slab[a * g..(a + 1) * g].iter_mut().enumerate() {
                            *slot = data[(a * g + b) * g + c];
                        }
                    }
                });
            std::mem::swap(data, &mut scratch);
        }
    }
}

/// Smallest grid size with only factors 2, 3, 5 that is at least `min`.
pub(crate) fn smooth_size(min: usize) -> usize {
    let mut g = min.max(2);
    loop {
        let mut r = g;
        for f in [2, 3, 5] {
            while r % f == 0 {
                r /= f;
            }
        }
        if r == 1 {
            return g;
        }
        g += 1;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn smooth_sizes() {
        assert_eq!(smooth_size(7), 8);
        assert_eq!(smooth_size(13), 15);
        assert_eq!(smooth_size(19), 20);
        assert_eq!(smooth_size(25), 25);
        assert_eq!(smooth_size(49), 50);
    }

    #[test]
    fn matches_naive_dft() {
        let g = 4usize;
        let mut data: Vec<Complex64> = (0..g * g * g)
            .map(|i| Complex64::new((i as f64 * 0.37).sin(), (i as f64 * 0.71).cos()))
            .collect();
        let original = data.clone();
        let fft = Fft3::new(g);
        fft.forward(&mut data);

        let idx = |x: usize, y: usize, z: usize| (x * g + y) * g + z;
        let tau = -2.0 * std::f64::consts::PI / g as f64;
        for kx in 0..g {
            for ky in 0..g {
                for kz in 0..g {
                    let mut acc = Complex64::new(0.0, 0.0);
                    for x in 0..g {
                        for y in 0..g {
                            for z in 0..g {
                                let phase =
                                    tau * (kx * x + ky * y + kz * z) as f64;
                                acc += original[idx(x, y, z)]
                                    * Complex64::new(phase.cos(), phase.sin());
                            }
                        }
                    }
                    assert!((acc - data[idx(kx, ky, kz)]).norm() <= 1e-10);
                }
            }
        }
    }

    #[test]
    fn inverse_undoes_forward_up_to_volume() {
        let g = 6usize;
        let mut data: Vec<Complex64> = (0..g * g * g)
            .map(|i| Complex64::new((i as f64 * 1.3).cos(), (i as f64 * 0.2).sin()))
            .collect();
        let original = data.clone();
        let fft = Fft3::new(g);
        fft.forward(&mut data);
        fft.inverse(&mut data);
        let vol = (g * g * g) as f64;
        for (a, b) in data.iter().zip(original.iter()) {
            assert!((a / vol - b).norm() <= 1e-12);
        }
    }
}
