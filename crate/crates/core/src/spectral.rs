//! Fourier-space vector calculus on the periodic box: transforms, spectral
//! derivatives, curl/divergence, Leray projection, pressure solve, 2/3-rule
//! dealiasing and band-limited evaluation off the `x3` grid.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::fft::Fft3;
use crate::grid::DomainSpec;

const I: Complex64 = Complex64::new(0.0, 1.0);

/// Fourier coefficients of a real scalar field.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralScalar {
    pub domain: DomainSpec,
    pub data: Vec<Complex64>,
}

/// Fourier coefficients of a real 3-vector field, one array per component.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralVectorField {
    pub domain: DomainSpec,
    pub comps: [Vec<Complex64>; 3],
}

/// Real samples of a 3-vector field on the physical grid.
#[derive(Debug, Clone, PartialEq)]
pub struct RealVectorField {
    pub domain: DomainSpec,
    pub comps: [Vec<f64>; 3],
}

impl RealVectorField {
    pub fn new(domain: DomainSpec, comps: [Vec<f64>; 3]) -> Result<Self> {
        for c in &comps {
            if c.len() != domain.len() {
                return Err(Error::ShapeMismatch(format!(
                    "component has {} samples, domain has {}",
                    c.len(),
                    domain.len()
                )));
            }
            if c.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite("RealVectorField"));
            }
        }
        Ok(Self { domain, comps })
    }

    pub fn zeros(domain: DomainSpec) -> Self {
        let n = domain.len();
        Self {
            domain,
            comps: [vec![0.0; n], vec![0.0; n], vec![0.0; n]],
        }
    }

    /// Samples `f(x1, x2, x3)` at grid coordinates `i * h`.
    pub fn from_fn(domain: DomainSpec, f: impl Fn(f64, f64, f64) -> [f64; 3]) -> Self {
        let mut out = Self::zeros(domain);
        for i1 in 0..domain.n[0] {
            let x1 = domain.coord(0, i1);
            for i2 in 0..domain.n[1] {
                let x2 = domain.coord(1, i2);
                for i3 in 0..domain.n[2] {
                    let v = f(x1, x2, domain.coord(2, i3));
                    let idx = domain.index(i1, i2, i3);
                    for c in 0..3 {
                        out.comps[c][idx] = v[c];
                    }
                }
            }
        }
        out
    }

    pub fn magnitude_at(&self, idx: usize) -> f64 {
        let [a, b, c] = [self.comps[0][idx], self.comps[1][idx], self.comps[2][idx]];
        (a * a + b * b + c * c).sqrt()
    }

    pub fn max_magnitude(&self) -> f64 {
        (0..self.domain.len())
            .map(|i| self.magnitude_at(i))
            .fold(0.0, f64::max)
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.comps
            .iter()
            .zip(&other.comps)
            .flat_map(|(a, b)| a.iter().zip(b).map(|(x, y)| (x - y).abs()))
            .fold(0.0, f64::max)
    }

    /// Grid quadrature of `|f|^2`.
    pub fn l2_norm_sq(&self) -> f64 {
        let sum: f64 = self.comps.iter().flat_map(|c| c.iter()).map(|v| v * v).sum();
        sum * self.domain.cell_volume()
    }
}

impl SpectralScalar {
    pub fn zeros(domain: DomainSpec) -> Self {
        Self {
            domain,
            data: vec![Complex64::default(); domain.len()],
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|c| c.norm()).fold(0.0, f64::max)
    }
}

impl SpectralVectorField {
    pub fn zeros(domain: DomainSpec) -> Self {
        let n = domain.len();
        let z = Complex64::default();
        Self {
            domain,
            comps: [vec![z; n], vec![z; n], vec![z; n]],
        }
    }

    pub fn scale(&mut self, s: f64) {
        for c in &mut self.comps {
            for v in c.iter_mut() {
                *v *= s;
            }
        }
    }

    pub fn scaled(&self, s: f64) -> Self {
        let mut out = self.clone();
        out.scale(s);
        out
    }

    pub fn add_assign(&mut self, other: &Self) {
        for (a, b) in self.comps.iter_mut().zip(&other.comps) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += *y;
            }
        }
    }

    pub fn axpy(&mut self, alpha: f64, other: &Self) {
        for (a, b) in self.comps.iter_mut().zip(&other.comps) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += alpha * *y;
            }
        }
    }

    pub fn sub(&self, other: &Self) -> Self {
        let mut out = self.clone();
        out.axpy(-1.0, other);
        out
    }

    /// `V * Σ|f̂|^2`, which equals the physical `L^2` norm squared (Parseval).
    pub fn l2_norm_sq(&self) -> f64 {
        let sum: f64 = self
            .comps
            .iter()
            .flat_map(|c| c.iter())
            .map(|v| v.norm_sqr())
            .sum();
        sum * self.domain.volume()
    }

    pub fn max_coeff(&self) -> f64 {
        self.comps
            .iter()
            .flat_map(|c| c.iter())
            .map(|v| v.norm())
            .fold(0.0, f64::max)
    }

    pub fn is_zero(&self) -> bool {
        self.comps.iter().all(|c| c.iter().all(|v| *v == Complex64::default()))
    }

    /// Largest deviation from `f̂(-k) = conj(f̂(k))`.
    pub fn hermitian_defect(&self) -> f64 {
        let d = self.domain;
        let [n1, n2, n3] = d.n;
        let mut worst: f64 = 0.0;
        for c in &self.comps {
            for i1 in 0..n1 {
                let j1 = (n1 - i1) % n1;
                for i2 in 0..n2 {
                    let j2 = (n2 - i2) % n2;
                    for i3 in 0..n3 {
                        let j3 = (n3 - i3) % n3;
                        let a = c[d.index(i1, i2, i3)];
                        let b = c[d.index(j1, j2, j3)];
                        worst = worst.max((a - b.conj()).norm());
                    }
                }
            }
        }
        worst
    }
}

/// Per-axis angular wavenumbers and 2/3-rule masks of a domain.
#[derive(Debug, Clone)]
pub struct Wavenumbers {
    pub k: [Vec<f64>; 3],
    pub keep: [Vec<bool>; 3],
}

impl Wavenumbers {
    pub fn new(domain: &DomainSpec) -> Self {
        let k = [0, 1, 2].map(|a| (0..domain.n[a]).map(|i| domain.wavenumber(a, i)).collect());
        let keep = [0, 1, 2].map(|a| {
            (0..domain.n[a])
                .map(|i| domain.mode(a, i).abs() <= domain.dealias_cutoff(a))
                .collect()
        });
        Self { k, keep }
    }
}

/// Visits every mode with its wavevector, in storage order.
#[inline]
fn for_each_mode(domain: &DomainSpec, wn: &Wavenumbers, mut f: impl FnMut(usize, [f64; 3])) {
    let [n1, n2, n3] = domain.n;
    let mut idx = 0;
    for i1 in 0..n1 {
        let k1 = wn.k[0][i1];
        for i2 in 0..n2 {
            let k2 = wn.k[1][i2];
            for i3 in 0..n3 {
                f(idx, [k1, k2, wn.k[2][i3]]);
                idx += 1;
            }
        }
    }
}

pub fn curl(f: &SpectralVectorField) -> SpectralVectorField {
    let wn = Wavenumbers::new(&f.domain);
    let mut out = SpectralVectorField::zeros(f.domain);
    let [o0, o1, o2] = &mut out.comps;
    for_each_mode(&f.domain, &wn, |idx, k| {
        let (a, b, c) = (f.comps[0][idx], f.comps[1][idx], f.comps[2][idx]);
        o0[idx] = I * (k[1] * c - k[2] * b);
        o1[idx] = I * (k[2] * a - k[0] * c);
        o2[idx] = I * (k[0] * b - k[1] * a);
    });
    out
}

pub fn divergence(f: &SpectralVectorField) -> SpectralScalar {
    let wn = Wavenumbers::new(&f.domain);
    let mut out = SpectralScalar::zeros(f.domain);
    for_each_mode(&f.domain, &wn, |idx, k| {
        out.data[idx] =
            I * (k[0] * f.comps[0][idx] + k[1] * f.comps[1][idx] + k[2] * f.comps[2][idx]);
    });
    out
}

pub fn gradient(g: &SpectralScalar) -> SpectralVectorField {
    let wn = Wavenumbers::new(&g.domain);
    let mut out = SpectralVectorField::zeros(g.domain);
    let [o0, o1, o2] = &mut out.comps;
    for_each_mode(&g.domain, &wn, |idx, k| {
        let v = I * g.data[idx];
        o0[idx] = k[0] * v;
        o1[idx] = k[1] * v;
        o2[idx] = k[2] * v;
    });
    out
}

pub fn laplacian(g: &SpectralScalar) -> SpectralScalar {
    let wn = Wavenumbers::new(&g.domain);
    let mut out = SpectralScalar::zeros(g.domain);
    for_each_mode(&g.domain, &wn, |idx, k| {
        out.data[idx] = -(k[0] * k[0] + k[1] * k[1] + k[2] * k[2]) * g.data[idx];
    });
    out
}

/// Removes the gradient part mode by mode: `f̂ - k (k·f̂) / |k|^2`.
pub fn leray_project(f: &SpectralVectorField) -> SpectralVectorField {
    let mut out = f.clone();
    leray_project_in_place(&mut out);
    out
}

pub fn leray_project_in_place(f: &mut SpectralVectorField) {
    let domain = f.domain;
    let wn = Wavenumbers::new(&domain);
    let [c0, c1, c2] = &mut f.comps;
    for_each_mode(&domain, &wn, |idx, k| {
        let k2 = k[0] * k[0] + k[1] * k[1] + k[2] * k[2];
        if k2 == 0.0 {
            return;
        }
        let dot = (k[0] * c0[idx] + k[1] * c1[idx] + k[2] * c2[idx]) / k2;
        c0[idx] -= k[0] * dot;
        c1[idx] -= k[1] * dot;
        c2[idx] -= k[2] * dot;
    });
}

/// Zeroes every mode with some `|m_i| > n_i / 3`.
pub fn dealias_in_place(data: &mut [Complex64], domain: &DomainSpec) {
    let wn = Wavenumbers::new(domain);
    dealias_with(data, domain, &wn);
}

fn dealias_with(data: &mut [Complex64], domain: &DomainSpec, wn: &Wavenumbers) {
    let [n1, n2, n3] = domain.n;
    let mut idx = 0;
    for i1 in 0..n1 {
        for i2 in 0..n2 {
            let transverse = wn.keep[0][i1] && wn.keep[1][i2];
            for i3 in 0..n3 {
                if !(transverse && wn.keep[2][i3]) {
                    data[idx] = Complex64::default();
                }
                idx += 1;
            }
        }
    }
}

pub fn dealias(f: &SpectralVectorField) -> SpectralVectorField {
    let mut out = f.clone();
    for c in &mut out.comps {
        dealias_in_place(c, &f.domain);
    }
    out
}

/// Whether every coefficient outside the 2/3 band vanishes.
pub fn is_dealiased(f: &SpectralVectorField) -> bool {
    let d = f.domain;
    f.comps.iter().all(|c| {
        c.iter().enumerate().all(|(idx, v)| {
            let (i1, i2, i3) = d.unindex(idx);
            d.keeps_mode(i1, i2, i3) || *v == Complex64::default()
        })
    })
}

/// `∂^α f` for a multi-index `α`.
pub fn derivative(f: &SpectralVectorField, alpha: [u32; 3]) -> SpectralVectorField {
    let wn = Wavenumbers::new(&f.domain);
    let mut out = f.clone();
    let [c0, c1, c2] = &mut out.comps;
    for_each_mode(&f.domain, &wn, |idx, k| {
        let m = multiplier(k, alpha);
        c0[idx] *= m;
        c1[idx] *= m;
        c2[idx] *= m;
    });
    out
}

#[inline]
fn multiplier(k: [f64; 3], alpha: [u32; 3]) -> Complex64 {
    let mut m = Complex64::new(1.0, 0.0);
    for a in 0..3 {
        for _ in 0..alpha[a] {
            m *= I * k[a];
        }
    }
    m
}

/// All multi-indices with `|α| = order`, in lexicographic order.
pub fn multi_indices(order: u32) -> Vec<[u32; 3]> {
    let mut out = Vec::new();
    for a1 in (0..=order).rev() {
        for a2 in (0..=order - a1).rev() {
            out.push([a1, a2, order - a1 - a2]);
        }
    }
    out
}

/// Number of ordered index tuples that collapse onto `α`: `|α|! / α!`.
pub fn multinomial(alpha: [u32; 3]) -> f64 {
    let fact = |n: u32| (1..=n).map(f64::from).product::<f64>();
    fact(alpha[0] + alpha[1] + alpha[2]) / (fact(alpha[0]) * fact(alpha[1]) * fact(alpha[2]))
}

/// `f(x1, x2, x3 + s)`: a phase shift along `x3`, exact for band-limited fields.
pub fn shift_x3(f: &SpectralVectorField, s: f64) -> SpectralVectorField {
    let mut out = f.clone();
    shift_x3_in_place(&mut out, s);
    out
}

pub fn shift_x3_in_place(f: &mut SpectralVectorField, s: f64) {
    let d = f.domain;
    let phases = x3_phases(&d, s);
    let n3 = d.n[2];
    for c in &mut f.comps {
        for (j, v) in c.iter_mut().enumerate() {
            *v *= phases[j % n3];
        }
    }
}

/// `R f(R x)` with `R = diag(1, 1, -1)`: `f̂(k1, k2, k3) -> R f̂(k1, k2, -k3)`.
pub fn mirror_x3(f: &SpectralVectorField) -> SpectralVectorField {
    let d = f.domain;
    let n3 = d.n[2];
    let mut out = f.clone();
    for (c, comp) in out.comps.iter_mut().enumerate() {
        let sign = if c == 2 { -1.0 } else { 1.0 };
        for (idx, v) in comp.iter_mut().enumerate() {
            let i3 = idx % n3;
            let src = idx - i3 + (n3 - i3) % n3;
            *v = f.comps[c][src] * sign;
        }
    }
    out
}

fn x3_phases(d: &DomainSpec, s: f64) -> Vec<Complex64> {
    let n3 = d.n[2];
    (0..n3)
        .map(|i3| {
            let k = std::f64::consts::TAU * d.mode(2, i3) as f64 / d.l[2];
            if 2 * i3 == n3 {
                // the Nyquist term of a real band-limited interpolant is a cosine
                Complex64::new((k * s).cos(), 0.0)
            } else {
                Complex64::from_polar(1.0, k * s)
            }
        })
        .collect()
}

/// Band-limited evaluation of `f` at grid column `(i1, i2)` and an arbitrary
/// `x3` (grid coordinates, period `L3`).
pub fn interpolate_x3(f: &SpectralVectorField, i1: usize, i2: usize, x3: f64) -> [f64; 3] {
    let d = f.domain;
    let [n1, n2, n3] = d.n;
    let x1 = d.coord(0, i1);
    let x2 = d.coord(1, i2);
    let tau = std::f64::consts::TAU;
    let phase1: Vec<Complex64> = (0..n1)
        .map(|j| Complex64::from_polar(1.0, tau * d.mode(0, j) as f64 * x1 / d.l[0]))
        .collect();
    let phase2: Vec<Complex64> = (0..n2)
        .map(|j| Complex64::from_polar(1.0, tau * d.mode(1, j) as f64 * x2 / d.l[1]))
        .collect();
    let phase3 = x3_phases(&d, x3);
    let mut out = [0.0; 3];
    for (c, comp) in f.comps.iter().enumerate() {
        let mut acc = Complex64::default();
        for j1 in 0..n1 {
            for j2 in 0..n2 {
                let p12 = phase1[j1] * phase2[j2];
                let base = d.index(j1, j2, 0);
                let mut line = Complex64::default();
                for j3 in 0..n3 {
                    line += comp[base + j3] * phase3[j3];
                }
                acc += p12 * line;
            }
        }
        out[c] = acc.re;
    }
    out
}

/// Transform workspace: FFT plans plus cached wavenumbers for one domain.
#[derive(Debug)]
pub struct Spectral {
    pub domain: DomainSpec,
    pub wn: Wavenumbers,
    fft: Fft3,
    buf: Vec<Complex64>,
}

impl Spectral {
    pub fn new(domain: DomainSpec) -> Self {
        Self {
            domain,
            wn: Wavenumbers::new(&domain),
            fft: Fft3::new(&domain),
            buf: vec![Complex64::default(); domain.len()],
        }
    }

    fn check(&self, domain: &DomainSpec) -> Result<()> {
        if *domain != self.domain {
            return Err(Error::ShapeMismatch(format!(
                "field on {:?} passed to workspace for {:?}",
                domain.n, self.domain.n
            )));
        }
        Ok(())
    }

    pub fn forward_scalar(&mut self, samples: &[f64]) -> Vec<Complex64> {
        let mut out: Vec<Complex64> = samples.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.fft.forward(&mut out);
        out
    }

    /// Real part of the inverse transform, written into `out`.
    pub fn inverse_scalar_into(&mut self, coeffs: &[Complex64], out: &mut [f64]) {
        self.buf.copy_from_slice(coeffs);
        self.fft.inverse(&mut self.buf);
        for (o, v) in out.iter_mut().zip(&self.buf) {
            *o = v.re;
        }
    }

    pub fn inverse_scalar(&mut self, coeffs: &[Complex64]) -> Vec<f64> {
        let mut out = vec![0.0; coeffs.len()];
        self.inverse_scalar_into(coeffs, &mut out);
        out
    }

    pub fn transform(&mut self, f: &RealVectorField) -> Result<SpectralVectorField> {
        self.check(&f.domain)?;
        if f.comps.iter().any(|c| c.iter().any(|v| !v.is_finite())) {
            return Err(Error::NonFinite("RealVectorField"));
        }
        Ok(SpectralVectorField {
            domain: f.domain,
            comps: [0, 1, 2].map(|c| self.forward_scalar(&f.comps[c])),
        })
    }

    pub fn inverse(&mut self, f: &SpectralVectorField) -> Result<RealVectorField> {
        self.check(&f.domain)?;
        let mut out = RealVectorField::zeros(f.domain);
        for c in 0..3 {
            self.inverse_scalar_into(&f.comps[c], &mut out.comps[c]);
        }
        Ok(out)
    }

    /// Pressure from `-Δp = ∂_i z-^j ∂_j z+^i`, with zero mean.
    pub fn solve_pressure(
        &mut self,
        zp: &SpectralVectorField,
        zm: &SpectralVectorField,
    ) -> Result<SpectralScalar> {
        self.check(&zp.domain)?;
        self.check(&zm.domain)?;
        let t = self.product_tensor(zp, zm);
        Ok(self.pressure_from_tensor(&t))
    }

    /// Dealiased `T^{ij} = z+^i z-^j`, stored row-major (`3 * i + j`).
    pub fn product_tensor(
        &mut self,
        zp: &SpectralVectorField,
        zm: &SpectralVectorField,
    ) -> Vec<Vec<Complex64>> {
        let n = self.domain.len();
        let mut phys_p = vec![vec![0.0; n]; 3];
        let mut phys_m = vec![vec![0.0; n]; 3];
        for c in 0..3 {
            self.inverse_scalar_into(&zp.comps[c], &mut phys_p[c]);
            self.inverse_scalar_into(&zm.comps[c], &mut phys_m[c]);
        }
        self.product_tensor_physical(&phys_p, &phys_m)
    }

    pub(crate) fn product_tensor_physical(
        &mut self,
        phys_p: &[Vec<f64>],
        phys_m: &[Vec<f64>],
    ) -> Vec<Vec<Complex64>> {
        let mut out = Vec::with_capacity(9);
        for i in 0..3 {
            for j in 0..3 {
                let mut prod: Vec<Complex64> = phys_p[i]
                    .iter()
                    .zip(&phys_m[j])
                    .map(|(a, b)| Complex64::new(a * b, 0.0))
                    .collect();
                self.fft.forward(&mut prod);
                dealias_with(&mut prod, &self.domain, &self.wn);
                out.push(prod);
            }
        }
        out
    }

    /// `p̂ = -k_i k_j T̂^{ij} / |k|^2`.
    pub fn pressure_from_tensor(&self, t: &[Vec<Complex64>]) -> SpectralScalar {
        let mut p = SpectralScalar::zeros(self.domain);
        for_each_mode(&self.domain, &self.wn, |idx, k| {
            let k2 = k[0] * k[0] + k[1] * k[1] + k[2] * k[2];
            if k2 == 0.0 {
                return;
            }
            let mut s = Complex64::default();
            for i in 0..3 {
                for j in 0..3 {
                    s += k[i] * k[j] * t[3 * i + j][idx];
                }
            }
            p.data[idx] = -s / k2;
        });
        p
    }

    /// Divergence-form advection terms from the product tensor:
    /// `(z-·∇z+)^i = ∂_j T^{ij}` and `(z+·∇z-)^i = ∂_j T^{ji}`.
    pub fn advection_from_tensor(
        &self,
        t: &[Vec<Complex64>],
    ) -> (SpectralVectorField, SpectralVectorField) {
        let mut np = SpectralVectorField::zeros(self.domain);
        let mut nm = SpectralVectorField::zeros(self.domain);
        for_each_mode(&self.domain, &self.wn, |idx, k| {
            for i in 0..3 {
                let mut a = Complex64::default();
                let mut b = Complex64::default();
                for j in 0..3 {
                    a += k[j] * t[3 * i + j][idx];
                    b += k[j] * t[3 * j + i][idx];
                }
                np.comps[i][idx] = I * a;
                nm.comps[i][idx] = I * b;
            }
        });
        (np, nm)
    }

    /// Largest physical `|div f|` on the grid.
    pub fn max_divergence(&mut self, f: &SpectralVectorField) -> f64 {
        let div = divergence(f);
        self.inverse_scalar(&div.data)
            .iter()
            .fold(0.0, |m, v| m.max(v.abs()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::{PI, TAU};

    fn noise(domain: DomainSpec, seed: u64) -> RealVectorField {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = domain.len();
        let comps = [0, 1, 2].map(|_| (0..n).map(|_| rng.random_range(-1.0..1.0)).collect());
        RealVectorField::new(domain, comps).unwrap()
    }

    fn max_abs(v: &[f64]) -> f64 {
        v.iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    #[test]
    fn constant_field_has_only_mean_mode() {
        let d = DomainSpec::new([8, 8, 16], [1.0, 2.0, 3.0]).unwrap();
        let mut sp = Spectral::new(d);
        let f = RealVectorField::from_fn(d, |_, _, _| [1.0, 0.0, 0.0]);
        let g = sp.transform(&f).unwrap();
        assert_abs_diff_eq!(g.comps[0][0].re, 1.0, epsilon = 1e-15);
        for (c, comp) in g.comps.iter().enumerate() {
            for (idx, v) in comp.iter().enumerate() {
                if c == 0 && idx == 0 {
                    continue;
                }
                assert!(v.norm() < 1e-15);
            }
        }
    }

    #[test]
    fn single_sine_is_two_conjugate_modes() {
        let d = DomainSpec::new([16, 8, 8], [2.0, 1.0, 1.0]).unwrap();
        let mut sp = Spectral::new(d);
        let f = RealVectorField::from_fn(d, |x1, _, _| [0.0, 0.0, (TAU * x1 / 2.0).sin()]);
        let g = sp.transform(&f).unwrap();
        let big: Vec<usize> = (0..d.len()).filter(|&i| g.comps[2][i].norm() > 1e-12).collect();
        assert_eq!(big, vec![d.index(1, 0, 0), d.index(15, 0, 0)]);
        let (a, b) = (g.comps[2][big[0]], g.comps[2][big[1]]);
        assert_abs_diff_eq!((a - b.conj()).norm(), 0.0, epsilon = 1e-15);
        assert!(g.comps[0].iter().chain(&g.comps[1]).all(|v| v.norm() < 1e-15));
    }

    #[test]
    fn round_trip_noise() {
        let d = DomainSpec::new([16, 8, 32], [1.0, 1.0, 4.0]).unwrap();
        let mut sp = Spectral::new(d);
        let f = noise(d, 7);
        let hat = sp.transform(&f).unwrap();
        let back = sp.inverse(&hat).unwrap();
        assert!(back.max_abs_diff(&f) <= 1e-13 * f.max_magnitude());
        assert!(sp.transform(&f).unwrap().hermitian_defect() < 1e-15);
    }

    #[test]
    fn rejects_mismatched_and_non_finite() {
        let d = DomainSpec::cube(8, 1.0).unwrap();
        let other = DomainSpec::cube(16, 1.0).unwrap();
        let mut sp = Spectral::new(d);
        assert!(matches!(
            sp.transform(&RealVectorField::zeros(other)),
            Err(Error::ShapeMismatch(_))
        ));
        let mut bad = RealVectorField::zeros(d);
        bad.comps[1][3] = f64::NAN;
        assert!(sp.transform(&bad).is_err());
        assert!(RealVectorField::new(d, bad.comps).is_err());
    }

    #[test]
    fn curl_examples() {
        let d = DomainSpec::new([16, 8, 8], [TAU, 1.0, 1.0]).unwrap();
        let mut sp = Spectral::new(d);
        let c = sp
            .transform(&RealVectorField::from_fn(d, |_, _, _| [1.0, -2.0, 0.5]))
            .unwrap();
        assert!(curl(&c).max_coeff() == 0.0);

        let f = sp
            .transform(&RealVectorField::from_fn(d, |x1, _, _| [0.0, 0.0, x1.sin()]))
            .unwrap();
        let got = sp.inverse(&curl(&f)).unwrap();
        let want = RealVectorField::from_fn(d, |x1, _, _| [0.0, -x1.cos(), 0.0]);
        assert!(got.max_abs_diff(&want) < 1e-13);
    }

    #[test]
    fn div_curl_and_curl_grad_vanish() {
        let d = DomainSpec::new([16, 16, 16], [1.0, 2.0, 3.0]).unwrap();
        let mut sp = Spectral::new(d);
        let f = sp.transform(&noise(d, 3)).unwrap();
        assert!(sp.max_divergence(&curl(&f)) < 1e-13 * f.max_coeff().max(1.0) * 100.0);
        let g = SpectralScalar {
            domain: d,
            data: f.comps[0].clone(),
        };
        let cg = curl(&gradient(&g));
        assert!(cg.max_coeff() < 1e-13);
    }

    #[test]
    fn div_grad_is_laplacian() {
        let d = DomainSpec::cube(16, 2.0).unwrap();
        let mut sp = Spectral::new(d);
        let f = sp.transform(&noise(d, 11)).unwrap();
        let g = SpectralScalar {
            domain: d,
            data: f.comps[1].clone(),
        };
        let a = divergence(&gradient(&g));
        let b = laplacian(&g);
        for (x, y) in a.data.iter().zip(&b.data) {
            assert!((x - y).norm() <= 1e-12 * y.norm().max(1.0));
        }
        let zero = sp
            .transform(&RealVectorField::from_fn(d, |_, _, _| [3.0, 1.0, 2.0]))
            .unwrap();
        assert_eq!(divergence(&zero).max_abs(), 0.0);
    }

    #[test]
    fn leray_projection_properties() {
        let d = DomainSpec::new([16, 8, 32], [2.0, 1.0, 4.0]).unwrap();
        let mut sp = Spectral::new(d);
        let f = sp.transform(&noise(d, 5)).unwrap();
        let p = leray_project(&f);
        assert!(sp.max_divergence(&p) <= 1e-12);
        let pp = leray_project(&p);
        assert!(pp.sub(&p).max_coeff() <= 1e-13);

        let g = SpectralScalar {
            domain: d,
            data: f.comps[2].clone(),
        };
        let grad = gradient(&g);
        assert!(leray_project(&grad).max_coeff() <= 1e-13 * grad.max_coeff().max(1.0));
    }

    #[test]
    fn parseval_matches_quadrature() {
        let d = DomainSpec::new([8, 16, 32], [1.0, 3.0, 5.0]).unwrap();
        let mut sp = Spectral::new(d);
        let f = noise(d, 9);
        let g = sp.transform(&f).unwrap();
        let (a, b) = (f.l2_norm_sq(), g.l2_norm_sq());
        assert!((a - b).abs() <= 1e-12 * a);
    }

    #[test]
    fn dealiased_product_of_single_modes_is_exact() {
        // cos(3x) * cos(4x) = (cos x + cos 7x) / 2 on n=24: mode 7 sits inside the
        // 2/3 band and must be reproduced without aliasing
        let d = DomainSpec::new([8, 8, 32], [1.0, 1.0, TAU]).unwrap();
        let mut sp = Spectral::new(d);
        let a = RealVectorField::from_fn(d, |_, _, x| [(3.0 * x).cos(), 0.0, 0.0]);
        let b = RealVectorField::from_fn(d, |_, _, x| [(4.0 * x).cos(), 0.0, 0.0]);
        let t = sp.product_tensor_physical(&a.comps, &b.comps);
        let got = sp.inverse_scalar(&t[0]);
        let want: Vec<f64> = (0..d.len())
            .map(|idx| {
                let x = d.coord(2, d.unindex(idx).2);
                0.5 * (x.cos() + (7.0 * x).cos())
            })
            .collect();
        let err = got.iter().zip(&want).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        assert!(err < 1e-14);

        // modes 6 and 8 give 14 > 32/3: truncated, and 2 is kept
        let a = RealVectorField::from_fn(d, |_, _, x| [(6.0 * x).cos(), 0.0, 0.0]);
        let b = RealVectorField::from_fn(d, |_, _, x| [(8.0 * x).cos(), 0.0, 0.0]);
        let t = sp.product_tensor_physical(&a.comps, &b.comps);
        let got = sp.inverse_scalar(&t[0]);
        let want: Vec<f64> = (0..d.len())
            .map(|idx| 0.5 * (2.0 * d.coord(2, d.unindex(idx).2)).cos())
            .collect();
        let err = got.iter().zip(&want).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        assert!(err < 1e-14);
    }

    #[test]
    fn interpolation_examples() {
        let d = DomainSpec::new([8, 8, 32], [1.0, 1.0, TAU]).unwrap();
        let mut sp = Spectral::new(d);
        let f = sp
            .transform(&RealVectorField::from_fn(d, |_, _, x3| [0.0, 0.0, x3.sin()]))
            .unwrap();
        let v = interpolate_x3(&f, 2, 5, 0.5);
        assert_abs_diff_eq!(v[2], 0.5f64.sin(), epsilon = 1e-13);

        let raw = noise(d, 1);
        let g = sp.transform(&raw).unwrap();
        let (i1, i2, i3) = (3, 6, 17);
        let on_grid = interpolate_x3(&g, i1, i2, d.coord(2, i3));
        for c in 0..3 {
            assert_abs_diff_eq!(on_grid[c], raw.comps[c][d.index(i1, i2, i3)], epsilon = 1e-13);
        }
    }

    #[test]
    fn interpolation_matches_oversampled_grid() {
        // oracle: zero-pad the x3 spectrum of one column 4x and inverse-transform
        let d = DomainSpec::new([8, 8, 32], [1.0, 1.0, 5.0]).unwrap();
        let mut sp = Spectral::new(d);
        let mut g = sp.transform(&noise(d, 21)).unwrap();
        for c in &mut g.comps {
            dealias_in_place(c, &d);
        }
        let (i1, i2) = (5, 2);
        let column = |g: &SpectralVectorField, c: usize| -> Vec<Complex64> {
            // 1D coefficients of the column: sum transverse modes with their phases
            let mut out = vec![Complex64::default(); d.n[2]];
            for j1 in 0..d.n[0] {
                for j2 in 0..d.n[1] {
                    let ph = Complex64::from_polar(
                        1.0,
                        TAU * (d.mode(0, j1) as f64 * d.coord(0, i1) / d.l[0]
                            + d.mode(1, j2) as f64 * d.coord(1, i2) / d.l[1]),
                    );
                    for j3 in 0..d.n[2] {
                        out[j3] += ph * g.comps[c][d.index(j1, j2, j3)];
                    }
                }
            }
            out
        };
        let fine_n = 4 * d.n[2];
        let mut planner = rustfft::FftPlanner::new();
        let ifft = planner.plan_fft_inverse(fine_n);
        for c in 0..3 {
            let coarse = column(&g, c);
            let mut fine = vec![Complex64::default(); fine_n];
            for j3 in 0..d.n[2] {
                let m = d.mode(2, j3);
                let slot = if m >= 0 { m as usize } else { (fine_n as i64 + m) as usize };
                fine[slot] = coarse[j3];
            }
            ifft.process(&mut fine);
            for (j, v) in fine.iter().enumerate() {
                let x3 = j as f64 * d.l[2] / fine_n as f64;
                let got = interpolate_x3(&g, i1, i2, x3)[c];
                assert!((got - v.re).abs() <= 1e-11, "c={c} j={j}: {got} vs {}", v.re);
            }
        }
    }

    #[test]
    fn shift_agrees_with_pointwise_interpolation() {
        let d = DomainSpec::new([8, 8, 32], [1.0, 2.0, 6.0]).unwrap();
        let mut sp = Spectral::new(d);
        let g = dealias(&sp.transform(&noise(d, 4)).unwrap());
        let s = 0.37 * PI;
        let shifted = sp.inverse(&shift_x3(&g, s)).unwrap();
        for (i1, i2, i3) in [(0, 0, 0), (3, 5, 9), (7, 1, 31)] {
            let v = interpolate_x3(&g, i1, i2, d.coord(2, i3) + s);
            for c in 0..3 {
                assert_abs_diff_eq!(v[c], shifted.comps[c][d.index(i1, i2, i3)], epsilon = 1e-12);
            }
        }
        assert!(max_abs(&shifted.comps[0]) > 0.0);
    }

    #[test]
    fn multi_index_enumeration() {
        assert_eq!(multi_indices(0), vec![[0, 0, 0]]);
        assert_eq!(multi_indices(1).len(), 3);
        assert_eq!(multi_indices(2).len(), 6);
        assert_eq!(multi_indices(3).len(), 10);
        assert_eq!(multinomial([1, 1, 0]), 2.0);
        assert_eq!(multinomial([2, 0, 1]), 3.0);
        let total: f64 = multi_indices(3).into_iter().map(multinomial).sum();
        assert_eq!(total, 27.0);
    }
}
