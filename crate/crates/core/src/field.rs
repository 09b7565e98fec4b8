//! Periodic grids, spectral differential operators, quadrature norms and the
//! energy functionals of both equations.
//!
//! Fields are stored flat in row-major order (last axis fastest). Grid
//! coordinates are cell centred on `[-L/2, L/2)^d`, so the box is symmetric
//! about the origin and no node sits on the boundary.

use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nonlinearity::{NlsNonlinearitySpec, NonlinearitySpec};
use crate::sampling::{pairwise_sum, pairwise_sum_by};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub d: usize,
    pub n: usize,
    pub l: f64,
}

impl GridSpec {
    pub fn new(d: usize, n: usize, l: f64) -> Result<Self> {
        let g = Self { d, n, l };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        if !(1..=3).contains(&self.d) {
            return Err(Error::Grid(format!("dimension d must be 1, 2 or 3, got {}", self.d)));
        }
        if self.n < 8 || !self.n.is_power_of_two() {
            return Err(Error::Grid(format!(
                "points per axis N must be a power of two >= 8, got {}",
                self.n
            )));
        }
        if !(self.l > 0.0 && self.l.is_finite()) {
            return Err(Error::Grid(format!("box length L must be positive, got {}", self.l)));
        }
        Ok(())
    }

    /// Grid spacing `L/N`.
    pub fn h(&self) -> f64 {
        self.l / self.n as f64
    }

    /// Quadrature weight `h^d` of one cell.
    pub fn cell_volume(&self) -> f64 {
        self.h().powi(self.d as i32)
    }

    /// Total number of nodes `N^d`.
    pub fn len(&self) -> usize {
        self.n.pow(self.d as u32)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Cell-centred coordinate of node `j` along one axis.
    pub fn coord(&self, j: usize) -> f64 {
        -0.5 * self.l + (j as f64 + 0.5) * self.h()
    }

    /// Per-axis indices of the flat index `idx`.
    pub fn unflatten(&self, mut idx: usize) -> [usize; 3] {
        let mut out = [0; 3];
        for a in (0..self.d).rev() {
            out[a] = idx % self.n;
            idx /= self.n;
        }
        out
    }

    /// Coordinates of flat index `idx` (unused axes are zero).
    pub fn point(&self, idx: usize) -> [f64; 3] {
        let ix = self.unflatten(idx);
        let mut x = [0.0; 3];
        for a in 0..self.d {
            x[a] = self.coord(ix[a]);
        }
        x
    }

    /// Integer wavenumber of index `j` (`j - N` above the Nyquist index).
    pub fn wavenumber(&self, j: usize) -> f64 {
        let j = j as i64;
        let n = self.n as i64;
        let k = if j <= n / 2 { j } else { j - n };
        2.0 * std::f64::consts::PI / self.l * k as f64
    }

    pub fn check_len(&self, got: usize) -> Result<()> {
        if got != self.len() {
            return Err(Error::DimensionMismatch { expected: self.len(), got });
        }
        Ok(())
    }
}

/// FFT plans and the `|ξ|²` symbol for one grid.
#[derive(Clone)]
pub struct Spectral {
    grid: GridSpec,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    k2: Vec<f64>,
}

impl std::fmt::Debug for Spectral {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Spectral").field("grid", &self.grid).finish()
    }
}

impl Spectral {
    pub fn new(grid: GridSpec) -> Result<Self> {
        grid.validate()?;
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(grid.n);
        let inverse = planner.plan_fft_inverse(grid.n);
        let k2 = (0..grid.len())
            .map(|idx| {
                let ix = grid.unflatten(idx);
                (0..grid.d).map(|a| grid.wavenumber(ix[a]).powi(2)).sum()
            })
            .collect();
        Ok(Self { grid, forward, inverse, k2 })
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    /// `|ξ|²` for every Fourier mode, in the same flat order as the field.
    pub fn symbol(&self) -> &[f64] {
        &self.k2
    }

    fn transform(&self, data: &mut [Complex64], plan: &Arc<dyn Fft<f64>>) {
        let n = self.grid.n;
        let d = self.grid.d;
        let total = self.grid.len();
        let mut scratch = vec![Complex64::new(0.0, 0.0); plan.get_inplace_scratch_len()];
        let mut line = vec![Complex64::new(0.0, 0.0); n];
        for axis in 0..d {
            let stride = n.pow((d - 1 - axis) as u32);
            if stride == 1 {
                for chunk in data.chunks_exact_mut(n) {
                    plan.process_with_scratch(chunk, &mut scratch);
                }
                continue;
            }
            let block = stride * n;
            for base in (0..total).step_by(block) {
                for off in 0..stride {
                    let start = base + off;
                    for (j, v) in line.iter_mut().enumerate() {
                        *v = data[start + j * stride];
                    }
                    plan.process_with_scratch(&mut line, &mut scratch);
                    for (j, v) in line.iter().enumerate() {
                        data[start + j * stride] = *v;
                    }
                }
            }
        }
    }

    /// Unnormalised forward DFT in place.
    pub fn forward(&self, data: &mut [Complex64]) {
        self.transform(data, &self.forward);
    }

    /// Inverse DFT in place, normalised by `1/N^d`.
    pub fn inverse(&self, data: &mut [Complex64]) {
        self.transform(data, &self.inverse);
        let s = 1.0 / self.grid.len() as f64;
        for v in data.iter_mut() {
            *v *= s;
        }
    }

    pub fn forward_real(&self, u: &[f64]) -> Vec<Complex64> {
        let mut c: Vec<Complex64> = u.iter().map(|&x| Complex64::new(x, 0.0)).collect();
        self.forward(&mut c);
        c
    }

    /// Spectral Laplacian of a real field.
    pub fn laplacian(&self, u: &[f64]) -> Result<Vec<f64>> {
        self.grid.check_len(u.len())?;
        let mut c = self.forward_real(u);
        for (v, k2) in c.iter_mut().zip(&self.k2) {
            *v *= -k2;
        }
        self.inverse(&mut c);
        Ok(c.into_iter().map(|z| z.re).collect())
    }

    /// Spectral Laplacian of a complex field.
    pub fn laplacian_complex(&self, u: &[Complex64]) -> Result<Vec<Complex64>> {
        self.grid.check_len(u.len())?;
        let mut c = u.to_vec();
        self.forward(&mut c);
        for (v, k2) in c.iter_mut().zip(&self.k2) {
            *v *= -k2;
        }
        self.inverse(&mut c);
        Ok(c)
    }

    /// `‖∇u‖²` by Parseval: `h^d/N^d Σ |ξ|² |û_ξ|²`.
    pub fn gradient_norm_sq(&self, u: &[f64]) -> Result<f64> {
        self.grid.check_len(u.len())?;
        let c = self.forward_real(u);
        Ok(self.weighted_spectrum(&c))
    }

    pub fn gradient_norm_sq_complex(&self, u: &[Complex64]) -> Result<f64> {
        self.grid.check_len(u.len())?;
        let mut c = u.to_vec();
        self.forward(&mut c);
        Ok(self.weighted_spectrum(&c))
    }

    fn weighted_spectrum(&self, c: &[Complex64]) -> f64 {
        let norm = self.grid.cell_volume() / self.grid.len() as f64;
        norm * pairwise_sum_by(c.len(), |i| self.k2[i] * c[i].norm_sqr())
    }

    /// `⟨∇a, ∇b⟩` by Parseval.
    pub fn gradient_inner(&self, a: &[f64], b: &[f64]) -> Result<f64> {
        self.grid.check_len(a.len())?;
        self.grid.check_len(b.len())?;
        let ca = self.forward_real(a);
        let cb = self.forward_real(b);
        let norm = self.grid.cell_volume() / self.grid.len() as f64;
        Ok(norm * pairwise_sum_by(ca.len(), |i| self.k2[i] * (ca[i] * cb[i].conj()).re))
    }

    /// `‖u‖²` evaluated on the Fourier side, `h^d/N^d Σ |û_ξ|²`.
    pub fn fourier_l2_norm_sq(&self, u: &[f64]) -> Result<f64> {
        self.grid.check_len(u.len())?;
        let c = self.forward_real(u);
        let norm = self.grid.cell_volume() / self.grid.len() as f64;
        Ok(norm * pairwise_sum_by(c.len(), |i| c[i].norm_sqr()))
    }
}

/// Trigonometric interpolation from `coarse` onto `fine` (same box and
/// dimension, `fine.n >= coarse.n`). The two cell-centred grids are offset
/// by half a cell difference, which is applied as a phase; the coarse
/// Nyquist modes are dropped.
pub fn prolong_complex(u: &[Complex64], coarse: &Spectral, fine: &Spectral) -> Result<Vec<Complex64>> {
    let (gc, gf) = (*coarse.grid(), *fine.grid());
    gc.check_len(u.len())?;
    if gc.d != gf.d || gc.l != gf.l || gf.n < gc.n {
        return Err(Error::Mismatch(format!(
            "cannot prolong from (d={}, N={}, L={}) to (d={}, N={}, L={})",
            gc.d, gc.n, gc.l, gf.d, gf.n, gf.l
        )));
    }
    let mut c = u.to_vec();
    coarse.forward(&mut c);
    let shift = 0.5 * (gf.h() - gc.h());
    let scale = gf.len() as f64 / gc.len() as f64;
    let nyq = (gc.n / 2) as i64;
    let mut out = vec![Complex64::new(0.0, 0.0); gf.len()];
    'modes: for (idx, coef) in c.iter().enumerate() {
        let ix = gc.unflatten(idx);
        let mut target = 0;
        let mut phase = 0.0;
        for a in 0..gc.d {
            let j = ix[a] as i64;
            let m = if j <= nyq { j } else { j - gc.n as i64 };
            if m.abs() == nyq {
                continue 'modes;
            }
            let jf = m.rem_euclid(gf.n as i64) as usize;
            target = target * gf.n + jf;
            phase += gc.wavenumber(ix[a]) * shift;
        }
        out[target] = coef * Complex64::from_polar(scale, phase);
    }
    fine.inverse(&mut out);
    Ok(out)
}

pub fn prolong_real(u: &[f64], coarse: &Spectral, fine: &Spectral) -> Result<Vec<f64>> {
    let c: Vec<Complex64> = u.iter().map(|&x| Complex64::new(x, 0.0)).collect();
    Ok(prolong_complex(&c, coarse, fine)?.into_iter().map(|z| z.re).collect())
}

/// `‖u‖² = h^d Σ |u_i|²`.
pub fn l2_norm_sq(u: &[f64], grid: &GridSpec) -> Result<f64> {
    grid.check_len(u.len())?;
    Ok(grid.cell_volume() * pairwise_sum_by(u.len(), |i| u[i] * u[i]))
}

pub fn l2_norm_sq_complex(u: &[Complex64], grid: &GridSpec) -> Result<f64> {
    grid.check_len(u.len())?;
    Ok(grid.cell_volume() * pairwise_sum_by(u.len(), |i| u[i].norm_sqr()))
}

/// `h^d Σ a_i b_i`.
pub fn inner(a: &[f64], b: &[f64], grid: &GridSpec) -> Result<f64> {
    grid.check_len(a.len())?;
    grid.check_len(b.len())?;
    Ok(grid.cell_volume() * pairwise_sum_by(a.len(), |i| a[i] * b[i]))
}

/// `h^d Σ g(i)`.
pub fn integrate_by(grid: &GridSpec, g: impl Fn(usize) -> f64) -> f64 {
    grid.cell_volume() * pairwise_sum_by(grid.len(), g)
}

pub fn sup_norm(u: &[f64]) -> f64 {
    u.iter().fold(0.0, |m, x| m.max(x.abs()))
}

pub fn sup_norm_complex(u: &[Complex64]) -> f64 {
    u.iter().fold(0.0, |m, x| m.max(x.norm()))
}

#[derive(Debug, Clone, PartialEq)]
pub struct WaveState {
    pub grid: GridSpec,
    pub u: Vec<f64>,
    pub ut: Vec<f64>,
    pub t: f64,
}

impl WaveState {
    pub fn new(grid: GridSpec, u: Vec<f64>, ut: Vec<f64>, t: f64) -> Result<Self> {
        grid.check_len(u.len())?;
        grid.check_len(ut.len())?;
        let s = Self { grid, u, ut, t };
        s.check_finite()?;
        Ok(s)
    }

    pub fn zero(grid: GridSpec) -> Self {
        Self { grid, u: vec![0.0; grid.len()], ut: vec![0.0; grid.len()], t: 0.0 }
    }

    pub fn is_finite(&self) -> bool {
        self.u.iter().chain(&self.ut).all(|x| x.is_finite())
    }

    pub fn check_finite(&self) -> Result<()> {
        if self.is_finite() {
            Ok(())
        } else {
            Err(Error::NonFinite { what: "wave state", t: self.t })
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NlsState {
    pub grid: GridSpec,
    pub u: Vec<Complex64>,
    pub t: f64,
}

impl NlsState {
    pub fn new(grid: GridSpec, u: Vec<Complex64>, t: f64) -> Result<Self> {
        grid.check_len(u.len())?;
        let s = Self { grid, u, t };
        if !s.is_finite() {
            return Err(Error::NonFinite { what: "nls state", t });
        }
        Ok(s)
    }

    pub fn is_finite(&self) -> bool {
        self.u.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }
}

/// Energy split into its parts. For the wave equation `kinetic = ½‖u_t‖²`
/// and `gradient = ½‖∇u‖²`; for the Schrödinger equation the gradient part is
/// carried in `kinetic` (`½‖∇u‖²`), `gradient` is zero and `mass = ‖u‖²`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyReport {
    pub kinetic: f64,
    pub gradient: f64,
    pub potential: f64,
    pub total: f64,
    pub mass: Option<f64>,
}

impl EnergyReport {
    fn from_parts(kinetic: f64, gradient: f64, potential: f64, mass: Option<f64>) -> Self {
        Self { kinetic, gradient, potential, total: kinetic + gradient + potential, mass }
    }
}

/// Wave energy `∫ ½|u_t|² + ½|∇u|² + F(u)`.
pub fn wave_energy(state: &WaveState, spec: &NonlinearitySpec, spectral: &Spectral) -> Result<EnergyReport> {
    let grid = &state.grid;
    let kinetic = 0.5 * l2_norm_sq(&state.ut, grid)?;
    let gradient = 0.5 * spectral.gradient_norm_sq(&state.u)?;
    let potential = integrate_by(grid, |i| spec.potential(state.u[i]));
    if !potential.is_finite() {
        return Err(Error::NonFinite { what: "potential energy (reduce the data amplitude)", t: state.t });
    }
    Ok(EnergyReport::from_parts(kinetic, gradient, potential, None))
}

/// Schrödinger Hamiltonian `½‖∇u‖² + ∫F(|u|²/2)` together with the mass `‖u‖²`.
pub fn nls_energy(state: &NlsState, spec: &NlsNonlinearitySpec, spectral: &Spectral) -> Result<EnergyReport> {
    let grid = &state.grid;
    let kinetic = 0.5 * spectral.gradient_norm_sq_complex(&state.u)?;
    let potential = integrate_by(grid, |i| spec.potential(state.u[i]));
    if !potential.is_finite() {
        return Err(Error::NonFinite { what: "potential energy (reduce the data amplitude)", t: state.t });
    }
    let mass = l2_norm_sq_complex(&state.u, grid)?;
    Ok(EnergyReport::from_parts(kinetic, 0.0, potential, Some(mass)))
}

/// Fraction of `Σ density` carried by nodes within `margin` of the box
/// boundary (in max-norm distance from the centre).
pub fn boundary_leakage_density(density: &[f64], grid: &GridSpec, margin: f64) -> Result<f64> {
    grid.check_len(density.len())?;
    if !(margin > 0.0 && margin < 0.5 * grid.l) {
        return Err(Error::Invalid(format!("margin must lie in (0, L/2), got {margin}")));
    }
    let inner_radius = 0.5 * grid.l - margin;
    let total = pairwise_sum(density);
    if total == 0.0 {
        return Ok(0.0);
    }
    let shell = pairwise_sum_by(density.len(), |i| {
        let x = grid.point(i);
        let far = (0..grid.d).any(|a| x[a].abs() > inner_radius);
        if far { density[i] } else { 0.0 }
    });
    Ok(shell / total)
}

pub fn wave_leakage(state: &WaveState, margin: f64) -> Result<f64> {
    let dens: Vec<f64> = state.u.iter().map(|x| x * x).collect();
    boundary_leakage_density(&dens, &state.grid, margin)
}

pub fn nls_leakage(state: &NlsState, margin: f64) -> Result<f64> {
    let dens: Vec<f64> = state.u.iter().map(|z| z.norm_sqr()).collect();
    boundary_leakage_density(&dens, &state.grid, margin)
}

/// Smooth compactly supported profile `exp(1 - 1/(1 - s²))` for `|s| < 1`,
/// normalised to peak value one.
pub fn bump_profile(s: f64) -> f64 {
    let a = 1.0 - s * s;
    if a <= 0.0 {
        0.0
    } else {
        (1.0 - 1.0 / a).exp()
    }
}

/// Tensor-product bump `amplitude Π_a φ((x_a - center)/radius)`.
pub fn tensor_bump(grid: &GridSpec, amplitude: f64, radius: f64, center: f64) -> Vec<f64> {
    (0..grid.len())
        .map(|i| {
            let x = grid.point(i);
            (0..grid.d).fold(amplitude, |acc, a| acc * bump_profile((x[a] - center) / radius))
        })
        .collect()
}
