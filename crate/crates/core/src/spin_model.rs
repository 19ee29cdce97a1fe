//! NV ground-state spin Hamiltonian and unitary propagation.
//!
//! The product basis is electron ⊗ nitrogen nucleus, both spin 1, ordered
//! `m = +1, 0, -1` on each factor (see [`basis_index`]). All matrices are in
//! angular units (rad/s); public parameters are given in Hz and converted
//! once, here.
//!
//! Microwave control is modeled in the frame rotating at the carrier with the
//! rotating-wave approximation. The drive only couples `m_S = 0 <-> -1`, so
//! the dynamics split into three independent two-level blocks, one per
//! nuclear projection. [`two_level_hamiltonian`] and
//! [`two_level_propagator`] are the closed-form fast path for one block.

use nalgebra::{Complex, DMatrix, DVector, RealField, SymmetricEigen};
use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::Real;

pub type CMatrix<T> = DMatrix<Complex<T>>;
pub type CVector<T> = DVector<Complex<T>>;

/// Spin projections in basis order.
pub const SPIN_PROJECTIONS: [i8; 3] = [1, 0, -1];

/// Largest carrier detuning, in units of the Rabi frequency, accepted by
/// [`drive_hamiltonian_rotating`].
pub const MAX_DETUNING_PER_RABI: f64 = 1e3;

/// Index of `|m_S, m_I>` in the 9-dimensional product basis.
pub fn basis_index(m_s: i8, m_i: i8) -> usize {
    debug_assert!((-1..=1).contains(&m_s) && (-1..=1).contains(&m_i));
    (3 * (1 - m_s as i32) + (1 - m_i as i32)) as usize
}

/// `(m_S, m_I)` labels of the product basis, in index order.
pub fn basis_labels() -> [(i8, i8); 9] {
    let mut out = [(0, 0); 9];
    for m_s in SPIN_PROJECTIONS {
        for m_i in SPIN_PROJECTIONS {
            out[basis_index(m_s, m_i)] = (m_s, m_i);
        }
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HamiltonianParams<T> {
    pub zero_field_splitting_hz: T,
    /// Electron gyromagnetic ratio γ/2π.
    pub gamma_e_hz_per_t: T,
    /// ¹⁴N gyromagnetic ratio γ_n/2π.
    pub gamma_n_hz_per_t: T,
    pub hyperfine_hz: T,
    pub b_z_t: T,
}

impl<T: Real> Default for HamiltonianParams<T> {
    /// D = 2.87 GHz, γ/2π = 28.7 GHz/T, γ_n/2π = 3.08 MHz/T, A = 2.16 MHz,
    /// B_z = 4.6 mT.
    fn default() -> Self {
        Self {
            zero_field_splitting_hz: T::lit(2.87e9),
            gamma_e_hz_per_t: T::lit(28.7e9),
            gamma_n_hz_per_t: T::lit(3.08e6),
            hyperfine_hz: T::lit(2.16e6),
            b_z_t: T::lit(4.6e-3),
        }
    }
}

impl<T: Real> HamiltonianParams<T> {
    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("zero_field_splitting_hz", self.zero_field_splitting_hz),
            ("gamma_e_hz_per_t", self.gamma_e_hz_per_t),
            ("gamma_n_hz_per_t", self.gamma_n_hz_per_t),
            ("hyperfine_hz", self.hyperfine_hz),
            ("b_z_t", self.b_z_t),
        ];
        for (name, v) in fields {
            if !v.is_finite() {
                return Err(Error::invalid(name, "must be finite"));
            }
        }
        if self.zero_field_splitting_hz <= T::zero() {
            return Err(Error::invalid("zero_field_splitting_hz", "must be > 0"));
        }
        if self.hyperfine_hz <= T::zero() {
            return Err(Error::invalid("hyperfine_hz", "must be > 0"));
        }
        Ok(())
    }

    /// γ in rad/(s·T).
    pub fn gamma_e_rad(&self) -> T {
        T::TAU() * self.gamma_e_hz_per_t
    }

    /// Frequency of the `m_S = 0 -> -1` line for the given nuclear projection.
    pub fn lower_transition_hz(&self, m_i: i8) -> T {
        self.zero_field_splitting_hz
            - self.gamma_e_hz_per_t * self.b_z_t
            - self.hyperfine_hz * T::lit(m_i as f64)
    }
}

/// Microwave drive of the `m_S = 0 <-> -1` transition.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DriveParams<T> {
    /// Nominal Rabi frequency Ω: a resonant π pulse takes `1/(2Ω)`.
    pub rabi_hz: T,
    /// Carrier offset from the `m_I = 0` line.
    pub carrier_detuning_hz: T,
    /// Relative amplitude error Δg; the applied Rabi frequency is `Ω(1 + Δg)`.
    pub amplitude_error: T,
    pub phase_rad: T,
}

impl<T: Real> DriveParams<T> {
    pub fn resonant(rabi_hz: T, phase_rad: T) -> Self {
        Self {
            rabi_hz,
            carrier_detuning_hz: T::zero(),
            amplitude_error: T::zero(),
            phase_rad,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.rabi_hz.is_finite()
            && self.carrier_detuning_hz.is_finite()
            && self.amplitude_error.is_finite()
            && self.phase_rad.is_finite())
        {
            return Err(Error::invalid("drive", "all fields must be finite"));
        }
        if self.rabi_hz < T::zero() {
            return Err(Error::invalid("rabi_hz", "must be >= 0"));
        }
        if self.amplitude_error <= -T::one() {
            return Err(Error::invalid("amplitude_error", "must be > -1"));
        }
        Ok(())
    }

    /// Applied Rabi frequency including the amplitude error.
    pub fn effective_rabi_hz(&self) -> T {
        self.rabi_hz * (T::one() + self.amplitude_error)
    }
}

/// Electron and nuclear spin-1 operators embedded in the product space.
#[derive(Clone, Debug, PartialEq)]
pub struct SpinOperatorSet<T: RealField> {
    pub s_x: CMatrix<T>,
    pub s_y: CMatrix<T>,
    pub s_z: CMatrix<T>,
    pub i_z: CMatrix<T>,
}

fn c<T: Real>(re: f64, im: f64) -> Complex<T> {
    Complex::new(T::lit(re), T::lit(im))
}

pub fn build_operators<T: Real + RealField>() -> SpinOperatorSet<T> {
    let r = std::f64::consts::FRAC_1_SQRT_2;
    let z = c::<T>(0.0, 0.0);
    let sx = CMatrix::from_row_slice(
        3,
        3,
        &[z, c(r, 0.0), z, c(r, 0.0), z, c(r, 0.0), z, c(r, 0.0), z],
    );
    let sy = CMatrix::from_row_slice(
        3,
        3,
        &[z, c(0.0, -r), z, c(0.0, r), z, c(0.0, -r), z, c(0.0, r), z],
    );
    let sz = CMatrix::from_diagonal(&CVector::from_vec(vec![c(1.0, 0.0), z, c(-1.0, 0.0)]));
    let id = CMatrix::<T>::identity(3, 3);
    SpinOperatorSet {
        s_x: sx.kronecker(&id),
        s_y: sy.kronecker(&id),
        s_z: sz.kronecker(&id),
        i_z: id.kronecker(&sz),
    }
}

/// Static Hamiltonian `D S_z² + B_z(γ S_z + γ_n I_z) + A S_z I_z` in rad/s.
pub fn static_hamiltonian<T: Real + RealField>(p: &HamiltonianParams<T>) -> Result<CMatrix<T>> {
    p.validate()?;
    let ops = build_operators::<T>();
    let two_pi = T::TAU();
    let re = |x: T| Complex::new(x, T::zero());
    let sz2 = &ops.s_z * &ops.s_z;
    let szi = &ops.s_z * &ops.i_z;
    let h = sz2 * re(two_pi * p.zero_field_splitting_hz)
        + &ops.s_z * re(two_pi * p.b_z_t * p.gamma_e_hz_per_t)
        + &ops.i_z * re(two_pi * p.b_z_t * p.gamma_n_hz_per_t)
        + szi * re(two_pi * p.hyperfine_hz);
    Ok(h)
}

/// Projector onto the `m_S = -1` manifold.
fn lower_manifold_projector<T: Real + RealField>() -> CMatrix<T> {
    let mut proj = CMatrix::<T>::zeros(9, 9);
    for m_i in SPIN_PROJECTIONS {
        let k = basis_index(-1, m_i);
        proj[(k, k)] = Complex::new(T::one(), T::zero());
    }
    proj
}

/// Rotating-frame Hamiltonian during a microwave pulse.
///
/// The frame rotates at the carrier `f(m_I = 0) + Δf` on the `m_S = -1`
/// manifold. Each `|0, m_I> <-> |-1, m_I>` pair is coupled with amplitude
/// `πΩ(1 + Δg) e^{-iφ}`; `m_S = +1` is left uncoupled.
pub fn drive_hamiltonian_rotating<T: Real + RealField>(
    p: &HamiltonianParams<T>,
    d: &DriveParams<T>,
) -> Result<CMatrix<T>> {
    d.validate()?;
    check_detuning_regime(d)?;
    let mut h = free_hamiltonian_rotating(p, d.carrier_detuning_hz, T::zero())?;
    let amp = T::PI() * d.effective_rabi_hz();
    let (s, co) = Float::sin_cos(d.phase_rad);
    let coupling = Complex::new(amp * co, -amp * s);
    for m_i in SPIN_PROJECTIONS {
        let a = basis_index(0, m_i);
        let b = basis_index(-1, m_i);
        h[(a, b)] = coupling;
        h[(b, a)] = coupling.conj();
    }
    Ok(h)
}

fn check_detuning_regime<T: Real>(d: &DriveParams<T>) -> Result<()> {
    let limit = d.rabi_hz * T::lit(MAX_DETUNING_PER_RABI);
    if Float::abs(d.carrier_detuning_hz) > limit {
        return Err(Error::OutOfRegime(format!(
            "carrier detuning {} Hz exceeds {}x the Rabi frequency {} Hz",
            d.carrier_detuning_hz, MAX_DETUNING_PER_RABI, d.rabi_hz
        )));
    }
    Ok(())
}

/// Rotating-frame Hamiltonian without drive, with an extra axial field
/// `delta_b_z_t` on top of the static bias. Diagonal in the product basis.
pub fn free_hamiltonian_rotating<T: Real + RealField>(
    p: &HamiltonianParams<T>,
    carrier_detuning_hz: T,
    delta_b_z_t: T,
) -> Result<CMatrix<T>> {
    let mut h = static_hamiltonian(p)?;
    let carrier = T::TAU() * (p.lower_transition_hz(0) + carrier_detuning_hz);
    h -= lower_manifold_projector::<T>() * Complex::new(carrier, T::zero());
    if delta_b_z_t != T::zero() {
        let ops = build_operators::<T>();
        h += ops.s_z * Complex::new(p.gamma_e_rad() * delta_b_z_t, T::zero());
    }
    Ok(h)
}

/// Pure state in either the full product space or one two-level block.
#[derive(Clone, Debug, PartialEq)]
pub struct QuantumState<T: RealField> {
    pub amplitudes: CVector<T>,
    pub basis: Basis,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Basis {
    /// Electron ⊗ nucleus, 9 states, ordered by [`basis_index`].
    Product,
    /// `{|m_S = 0>, |m_S = -1>}` at fixed nuclear projection.
    TwoLevel { m_i: i8 },
}

impl<T: Real + RealField> QuantumState<T> {
    pub fn product(m_s: i8, m_i: i8) -> Self {
        let mut amplitudes = CVector::zeros(9);
        amplitudes[basis_index(m_s, m_i)] = Complex::new(T::one(), T::zero());
        Self {
            amplitudes,
            basis: Basis::Product,
        }
    }

    /// `|m_S = 0>` in the two-level block of the given nuclear projection.
    pub fn two_level_bright(m_i: i8) -> Self {
        Self {
            amplitudes: CVector::from_vec(vec![
                Complex::new(T::one(), T::zero()),
                Complex::new(T::zero(), T::zero()),
            ]),
            basis: Basis::TwoLevel { m_i },
        }
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn norm(&self) -> T {
        Float::sqrt(
            self.amplitudes
                .iter()
                .fold(T::zero(), |acc, a| acc + a.norm_sqr()),
        )
    }

    /// Total population of the electron projection `m_s`.
    pub fn population(&self, m_s: i8) -> T {
        match self.basis {
            Basis::Product => SPIN_PROJECTIONS
                .iter()
                .map(|&m_i| self.amplitudes[basis_index(m_s, m_i)].norm_sqr())
                .fold(T::zero(), |a, b| a + b),
            Basis::TwoLevel { .. } => match m_s {
                0 => self.amplitudes[0].norm_sqr(),
                -1 => self.amplitudes[1].norm_sqr(),
                _ => T::zero(),
            },
        }
    }
}

fn is_diagonal<T: Real + RealField>(h: &CMatrix<T>) -> bool {
    let n = h.nrows();
    (0..n).all(|i| (0..n).all(|j| i == j || h[(i, j)] == Complex::new(T::zero(), T::zero())))
}

/// `exp(-i H dt)` for a Hermitian `H`.
///
/// Diagonal inputs are exponentiated entrywise; everything else goes through
/// a Hermitian eigendecomposition.
pub fn propagator<T: Real + RealField>(h: &CMatrix<T>, dt: T) -> CMatrix<T> {
    let n = h.nrows();
    let phase = |lambda: T| {
        let (s, c) = Float::sin_cos(lambda * dt);
        Complex::new(c, -s)
    };
    if is_diagonal(h) {
        let d = CVector::from_iterator(n, (0..n).map(|k| phase(h[(k, k)].re)));
        return CMatrix::from_diagonal(&d);
    }
    let eig = SymmetricEigen::new(h.clone());
    let v = &eig.eigenvectors;
    let d = CVector::from_iterator(n, eig.eigenvalues.iter().map(|&l| phase(l)));
    v * CMatrix::from_diagonal(&d) * v.adjoint()
}

/// Applies `exp(-i H dt)` to `state`.
pub fn evolve<T: Real + RealField>(
    state: &QuantumState<T>,
    h: &CMatrix<T>,
    dt: T,
) -> Result<QuantumState<T>> {
    if !(dt >= T::zero()) {
        return Err(Error::invalid("dt", "must be >= 0"));
    }
    if h.nrows() != state.dim() || h.ncols() != state.dim() {
        return Err(Error::GridMismatch(format!(
            "hamiltonian is {}x{}, state has dimension {}",
            h.nrows(),
            h.ncols(),
            state.dim()
        )));
    }
    Ok(QuantumState {
        amplitudes: propagator(h, dt) * &state.amplitudes,
        basis: state.basis,
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Transition<T> {
    /// Target electron projection; the source is always `m_S = 0`.
    pub m_s: i8,
    pub m_i: i8,
    pub frequency_hz: T,
}

/// Single-quantum electron transitions `|0, m_I> -> |±1, m_I>` from the
/// eigenvalues of the static Hamiltonian.
pub fn transition_frequencies<T: Real + RealField>(
    p: &HamiltonianParams<T>,
) -> Result<Vec<Transition<T>>> {
    let h = static_hamiltonian(p)?;
    // The static Hamiltonian is diagonal in the product basis, so its
    // eigenvalues are the diagonal entries.
    let energy = |m_s: i8, m_i: i8| {
        let k = basis_index(m_s, m_i);
        h[(k, k)].re / T::TAU()
    };
    let mut out = Vec::with_capacity(6);
    for m_s in [-1i8, 1] {
        for m_i in SPIN_PROJECTIONS {
            out.push(Transition {
                m_s,
                m_i,
                frequency_hz: Float::abs(energy(m_s, m_i) - energy(0, m_i)),
            });
        }
    }
    Ok(out)
}

/// 2×2 rotating-frame Hamiltonian of one nuclear block, basis
/// `{|0>, |-1>}`, rad/s. `rabi_hz` is the applied (error-included) Rabi
/// frequency; pass zero for free evolution. `extra_splitting_rad` adds to the
/// `|-1>` energy (e.g. `-γ δB` for an extra axial field).
pub fn two_level_hamiltonian<T: Real + RealField>(
    p: &HamiltonianParams<T>,
    m_i: i8,
    carrier_detuning_hz: T,
    rabi_hz: T,
    phase_rad: T,
    extra_splitting_rad: T,
) -> CMatrix<T> {
    let lower = -T::TAU() * (p.hyperfine_hz * T::lit(m_i as f64) + carrier_detuning_hz)
        + extra_splitting_rad;
    let amp = T::PI() * rabi_hz;
    let (s, co) = Float::sin_cos(phase_rad);
    let z = Complex::new(T::zero(), T::zero());
    let coupling = Complex::new(amp * co, -amp * s);
    CMatrix::from_row_slice(
        2,
        2,
        &[z, coupling, coupling.conj(), Complex::new(lower, T::zero())],
    )
}

/// Closed-form SU(2) propagator `exp(-i H dt)` for a 2×2 Hermitian
/// `H = [[h00, h01], [conj(h01), h11]]`.
pub fn two_level_propagator<T: Real>(
    h00: T,
    h11: T,
    h01: Complex<T>,
    dt: T,
) -> [[Complex<T>; 2]; 2] {
    let half = T::lit(0.5);
    let mean = (h00 + h11) * half;
    let bz = (h00 - h11) * half;
    let bx = h01.re;
    let by = -h01.im;
    let b = Float::sqrt(bx * bx + by * by + bz * bz);
    let theta = b * dt;
    let (sin_t, cos_t) = Float::sin_cos(theta);
    // sin(b dt)/b, continuous at b = 0
    let sinc = if b > T::zero() { sin_t / b } else { dt };
    let (sg, cg) = Float::sin_cos(mean * dt);
    let global = Complex::new(cg, -sg);
    let minus_i = Complex::new(T::zero(), -T::one());
    let u00 = Complex::new(cos_t, T::zero()) + minus_i * Complex::new(sinc * bz, T::zero());
    let u11 = Complex::new(cos_t, T::zero()) - minus_i * Complex::new(sinc * bz, T::zero());
    // (b·σ)_{01} = bx - i by, (b·σ)_{10} = bx + i by
    let u01 = minus_i * Complex::new(sinc * bx, -sinc * by);
    let u10 = minus_i * Complex::new(sinc * bx, sinc * by);
    [[global * u00, global * u01], [global * u10, global * u11]]
}

#[inline]
pub(crate) fn apply2<T: Real>(u: &[[Complex<T>; 2]; 2], psi: [Complex<T>; 2]) -> [Complex<T>; 2] {
    [
        u[0][0] * psi[0] + u[0][1] * psi[1],
        u[1][0] * psi[0] + u[1][1] * psi[1],
    ]
}
