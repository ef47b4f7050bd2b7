//! Three-dimensional complex FFT over the `x1`-major layout of [`DomainSpec`].
//!
//! The forward transform is normalized by `1/N` so coefficients are Fourier
//! series amplitudes; the inverse is unnormalized.

use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::grid::DomainSpec;

pub struct Fft3 {
    n: [usize; 3],
    forward: [Arc<dyn Fft<f64>>; 3],
    inverse: [Arc<dyn Fft<f64>>; 3],
    lane: Vec<Complex64>,
    scratch: Vec<Complex64>,
}

impl Fft3 {
    pub fn new(domain: &DomainSpec) -> Self {
        let mut planner = FftPlanner::new();
        let forward = domain.n.map(|n| planner.plan_fft_forward(n));
        let inverse = domain.n.map(|n| planner.plan_fft_inverse(n));
        let scratch_len = forward
            .iter()
            .chain(inverse.iter())
            .map(|p| p.get_inplace_scratch_len())
            .max()
            .unwrap_or(0);
        let max_n = domain.n.iter().copied().max().unwrap_or(0);
        Self {
            n: domain.n,
            forward,
            inverse,
            lane: vec![Complex64::default(); max_n],
            scratch: vec![Complex64::default(); scratch_len],
        }
    }

    pub fn forward(&mut self, data: &mut [Complex64]) {
        self.run(data, true);
        let scale = 1.0 / data.len() as f64;
        for v in data.iter_mut() {
            *v *= scale;
        }
    }

    pub fn inverse(&mut self, data: &mut [Complex64]) {
        self.run(data, false);
    }

    fn run(&mut self, data: &mut [Complex64], forward: bool) {
        let [n1, n2, n3] = self.n;
        assert_eq!(data.len(), n1 * n2 * n3, "buffer does not match the FFT plan");
        let plans = if forward { &self.forward } else { &self.inverse };

        // x3 lines are contiguous
        plans[2].process_with_scratch(data, &mut self.scratch);

        let lane = &mut self.lane[..n2];
        for i1 in 0..n1 {
            for i3 in 0..n3 {
                let base = i1 * n2 * n3 + i3;
                for (i2, v) in lane.iter_mut().enumerate() {
                    *v = data[base + i2 * n3];
                }
                plans[1].process_with_scratch(lane, &mut self.scratch);
                for (i2, v) in lane.iter().enumerate() {
                    data[base + i2 * n3] = *v;
                }
            }
        }

        let lane = &mut self.lane[..n1];
        let stride = n2 * n3;
        for j in 0..stride {
            for (i1, v) in lane.iter_mut().enumerate() {
                *v = data[j + i1 * stride];
            }
            plans[0].process_with_scratch(lane, &mut self.scratch);
            for (i1, v) in lane.iter().enumerate() {
                data[j + i1 * stride] = *v;
            }
        }
    }
}

impl std::fmt::Debug for Fft3 {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Fft3").field("n", &self.n).finish()
    }
}
