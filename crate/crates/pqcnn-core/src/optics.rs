//! Beam-splitter circuits, their composition into `m`-mode unitaries, and the
//! permanent-based lift to unitaries on a fixed-photon-number subspace.

use std::sync::Arc;

use ndarray::{Array1, Array2, ArrayView2};
use num_complex::Complex;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::fock::{MixedState, PureState, SubspaceBasis};
use crate::linalg;
use crate::scalar::cr;
use crate::{Error, Real, Result};

/// Largest matrix the permanent routine accepts.
pub const PERMANENT_SIZE_CAP: usize = 20;

/// Two-mode beam-splitter matrix
/// `[[cos θ, e^{iφ} sin θ], [-e^{-iφ} sin θ, cos θ]]`.
pub fn bs_matrix<T: Real>(theta: T, phi: T) -> Array2<Complex<T>> {
    let (s, c) = theta.sin_cos();
    let eph = Complex::from_polar(T::one(), phi);
    ndarray::arr2(&[[cr(c), eph * s], [-eph.conj() * s, cr(c)]])
}

/// Derivative of [`bs_matrix`] with respect to `theta`.
pub fn d_bs_matrix<T: Real>(theta: T, phi: T) -> Array2<Complex<T>> {
    let (s, c) = theta.sin_cos();
    let eph = Complex::from_polar(T::one(), phi);
    ndarray::arr2(&[[cr(-s), eph * c], [-eph.conj() * c, cr(-s)]])
}

/// A gate angle is either a literal or a reference into a shared parameter
/// vector; shared slots express weight tying.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum GateAngle<T> {
    Fixed(T),
    Slot(usize),
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BeamSplitterGate<T> {
    pub modes: (usize, usize),
    pub theta: GateAngle<T>,
    pub phi: T,
}

/// Ordered list of beam-splitter placements over `m` modes.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Circuit<T> {
    m: usize,
    gates: Vec<BeamSplitterGate<T>>,
    slots: usize,
}

impl<T: Real> Circuit<T> {
    pub fn new(m: usize) -> Self {
        Circuit {
            m,
            gates: Vec::new(),
            slots: 0,
        }
    }

    pub fn push(&mut self, gate: BeamSplitterGate<T>) {
        let (a, b) = gate.modes;
        assert!(a != b, "beam splitter needs two distinct modes");
        assert!(a < self.m && b < self.m, "gate modes out of range");
        if let GateAngle::Slot(s) = gate.theta {
            self.slots = self.slots.max(s + 1);
        }
        self.gates.push(gate);
    }

    /// Gate with a literal angle (and phase 0).
    pub fn push_fixed(&mut self, a: usize, b: usize, theta: T) {
        self.push(BeamSplitterGate {
            modes: (a, b),
            theta: GateAngle::Fixed(theta),
            phi: T::zero(),
        });
    }

    /// Parameterized gate with phase 0.
    pub fn push_slot(&mut self, a: usize, b: usize, slot: usize) {
        self.push(BeamSplitterGate {
            modes: (a, b),
            theta: GateAngle::Slot(slot),
            phi: T::zero(),
        });
    }

    pub fn push_slot_with_phase(&mut self, a: usize, b: usize, slot: usize, phi: T) {
        self.push(BeamSplitterGate {
            modes: (a, b),
            theta: GateAngle::Slot(slot),
            phi,
        });
    }

    pub fn modes(&self) -> usize {
        self.m
    }

    pub fn gates(&self) -> &[BeamSplitterGate<T>] {
        &self.gates
    }

    /// Number of parameter slots the circuit expects.
    pub fn param_count(&self) -> usize {
        self.slots
    }

    /// Overwrite the phase of every gate (used for frozen random phases).
    pub fn set_phases(&mut self, phases: &[T]) {
        assert_eq!(phases.len(), self.gates.len());
        for (g, &p) in self.gates.iter_mut().zip(phases) {
            g.phi = p;
        }
    }

    /// Every declared slot must be referenced by at least one gate.
    pub fn validate_slots(&self) -> Result<()> {
        let mut used = vec![false; self.slots];
        for g in &self.gates {
            if let GateAngle::Slot(s) = g.theta {
                used[s] = true;
            }
        }
        match used.iter().position(|u| !u) {
            Some(s) => Err(Error::BadSlot {
                slot: s,
                provided: self.slots,
            }),
            None => Ok(()),
        }
    }

    fn angle(&self, gate: &BeamSplitterGate<T>, params: &[T]) -> T {
        match gate.theta {
            GateAngle::Fixed(t) => t,
            GateAngle::Slot(s) => params[s],
        }
    }

    /// Product of the gate embeddings in application order.
    pub fn compose(&self, params: &[T]) -> Result<ModeUnitary<T>> {
        if params.len() != self.slots {
            return Err(Error::BadSlot {
                slot: self.slots.saturating_sub(1),
                provided: params.len(),
            });
        }
        self.validate_slots()?;
        let mut u = linalg::identity::<T>(self.m);
        for gate in &self.gates {
            apply_gate_left(
                &mut u,
                gate.modes,
                &bs_matrix(self.angle(gate, params), gate.phi),
            );
        }
        ModeUnitary::new(u)
    }

    /// Compose and return, for every parameter slot, the exact derivative of
    /// the composed matrix with respect to that slot (product rule over all
    /// gates bound to it).
    pub fn compose_with_gradient(
        &self,
        params: &[T],
    ) -> Result<(ModeUnitary<T>, Vec<Array2<Complex<T>>>)> {
        if params.len() != self.slots {
            return Err(Error::BadSlot {
                slot: self.slots.saturating_sub(1),
                provided: params.len(),
            });
        }
        self.validate_slots()?;
        let n = self.gates.len();
        let mut prefixes = Vec::with_capacity(n + 1);
        prefixes.push(linalg::identity::<T>(self.m));
        for gate in &self.gates {
            let mut next = prefixes.last().unwrap().clone();
            apply_gate_left(
                &mut next,
                gate.modes,
                &bs_matrix(self.angle(gate, params), gate.phi),
            );
            prefixes.push(next);
        }
        let u = ModeUnitary::new(prefixes[n].clone())?;

        let mut grads = vec![Array2::<Complex<T>>::zeros((self.m, self.m)); self.slots];
        let mut suffix = linalg::identity::<T>(self.m);
        for (g, gate) in self.gates.iter().enumerate().rev() {
            if let GateAngle::Slot(slot) = gate.theta {
                let d2 = d_bs_matrix(params[slot], gate.phi);
                let (a, b) = gate.modes;
                let pre = &prefixes[g];
                // dE . prefix has only rows a and b populated.
                let row_a: Array1<Complex<T>> = (0..self.m)
                    .map(|j| d2[(0, 0)] * pre[(a, j)] + d2[(0, 1)] * pre[(b, j)])
                    .collect();
                let row_b: Array1<Complex<T>> = (0..self.m)
                    .map(|j| d2[(1, 0)] * pre[(a, j)] + d2[(1, 1)] * pre[(b, j)])
                    .collect();
                let grad = &mut grads[slot];
                for i in 0..self.m {
                    let sa = suffix[(i, a)];
                    let sb = suffix[(i, b)];
                    for j in 0..self.m {
                        grad[(i, j)] = grad[(i, j)] + sa * row_a[j] + sb * row_b[j];
                    }
                }
            }
            // Absorb this gate into the suffix: suffix <- suffix . E_g.
            let bsm = bs_matrix(self.angle(gate, params), gate.phi);
            apply_gate_right(&mut suffix, gate.modes, &bsm);
        }
        Ok((u, grads))
    }
}

/// `u <- E . u` where `E` embeds the 2x2 `block` on the mode pair.
fn apply_gate_left<T: Real>(
    u: &mut Array2<Complex<T>>,
    (a, b): (usize, usize),
    block: &Array2<Complex<T>>,
) {
    let cols = u.ncols();
    for j in 0..cols {
        let ua = u[(a, j)];
        let ub = u[(b, j)];
        u[(a, j)] = block[(0, 0)] * ua + block[(0, 1)] * ub;
        u[(b, j)] = block[(1, 0)] * ua + block[(1, 1)] * ub;
    }
}

/// `u <- u . E` where `E` embeds the 2x2 `block` on the mode pair.
fn apply_gate_right<T: Real>(
    u: &mut Array2<Complex<T>>,
    (a, b): (usize, usize),
    block: &Array2<Complex<T>>,
) {
    let rows = u.nrows();
    for i in 0..rows {
        let ua = u[(i, a)];
        let ub = u[(i, b)];
        u[(i, a)] = ua * block[(0, 0)] + ub * block[(1, 0)];
        u[(i, b)] = ua * block[(0, 1)] + ub * block[(1, 1)];
    }
}

/// Validated unitary matrix acting on the single-photon mode space.
#[derive(Clone, Debug)]
pub struct ModeUnitary<T: Real> {
    matrix: Array2<Complex<T>>,
}

impl<T: Real> ModeUnitary<T> {
    pub fn new(matrix: Array2<Complex<T>>) -> Result<Self> {
        let dev = linalg::unitarity_deviation(&matrix.view());
        if dev > T::CHECK_TOL {
            return Err(Error::NotUnitary {
                deviation: dev.to_f64().unwrap_or(f64::NAN),
            });
        }
        Ok(ModeUnitary { matrix })
    }

    pub fn modes(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &Array2<Complex<T>> {
        &self.matrix
    }
}

/// Validated unitary on a fixed-photon-number subspace.
#[derive(Clone, Debug)]
pub struct SubspaceUnitary<T: Real> {
    basis: Arc<SubspaceBasis>,
    matrix: Array2<Complex<T>>,
}

impl<T: Real> SubspaceUnitary<T> {
    pub fn new(basis: Arc<SubspaceBasis>, matrix: Array2<Complex<T>>) -> Result<Self> {
        if matrix.nrows() != basis.len() || matrix.ncols() != basis.len() {
            return Err(Error::Dimension {
                what: "subspace matrix",
                expected: basis.len(),
                got: matrix.nrows(),
            });
        }
        let dev = linalg::unitarity_deviation(&matrix.view());
        if dev > T::LIFT_TOL {
            return Err(Error::NotUnitary {
                deviation: dev.to_f64().unwrap_or(f64::NAN),
            });
        }
        Ok(SubspaceUnitary { basis, matrix })
    }

    pub fn basis(&self) -> &Arc<SubspaceBasis> {
        &self.basis
    }

    pub fn matrix(&self) -> &Array2<Complex<T>> {
        &self.matrix
    }

    /// `psi -> U psi`.
    pub fn apply_pure(&self, psi: &PureState<T>) -> Result<PureState<T>> {
        if !self.basis.same_subspace(psi.basis()) {
            return Err(Error::BasisMismatch);
        }
        let out = self.matrix.dot(psi.amplitudes());
        PureState::new(self.basis.clone(), out)
    }

    /// `rho -> U rho U†`.
    pub fn apply_mixed(&self, rho: &MixedState<T>) -> Result<MixedState<T>> {
        if !self.basis.same_subspace(rho.basis()) {
            return Err(Error::BasisMismatch);
        }
        let ud = linalg::dagger(&self.matrix.view());
        let out = self.matrix.dot(rho.rho()).dot(&ud);
        MixedState::new(self.basis.clone(), out)
    }
}

/// Permanent of a square complex matrix by the Ryser formula with Gray-code
/// iteration over column subsets.
pub fn permanent<T: Real>(a: &ArrayView2<Complex<T>>) -> Result<Complex<T>> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(Error::Dimension {
            what: "permanent operand (square)",
            expected: n,
            got: a.ncols(),
        });
    }
    if n > PERMANENT_SIZE_CAP {
        return Err(Error::Dimension {
            what: "permanent operand size",
            expected: PERMANENT_SIZE_CAP,
            got: n,
        });
    }
    let flat: Vec<Complex<T>> = a.iter().copied().collect();
    Ok(permanent_flat(n, &flat))
}

/// Ryser permanent over a row-major flat buffer.
fn permanent_flat<T: Real>(n: usize, a: &[Complex<T>]) -> Complex<T> {
    let zero = Complex::new(T::zero(), T::zero());
    let one = Complex::new(T::one(), T::zero());
    if n == 0 {
        return one;
    }
    let mut row_sums = vec![zero; n];
    let mut signed_sum = zero;
    let mut gray: u64 = 0;
    for g in 1..(1u64 << n) {
        let next = g ^ (g >> 1);
        let diff = next ^ gray;
        let j = diff.trailing_zeros() as usize;
        if next & diff != 0 {
            for (i, rs) in row_sums.iter_mut().enumerate() {
                *rs = *rs + a[i * n + j];
            }
        } else {
            for (i, rs) in row_sums.iter_mut().enumerate() {
                *rs = *rs - a[i * n + j];
            }
        }
        gray = next;
        let prod = row_sums.iter().fold(one, |acc, v| acc * *v);
        if next.count_ones() % 2 == 0 {
            signed_sum = signed_sum + prod;
        } else {
            signed_sum = signed_sum - prod;
        }
    }
    if n % 2 == 0 {
        signed_sum
    } else {
        -signed_sum
    }
}

/// Per-state metadata for the lift: the mode of each photon (with
/// multiplicity) and the product of occupation factorials.
fn lift_meta<T: Real>(basis: &SubspaceBasis) -> Vec<(Vec<usize>, T)> {
    basis
        .states()
        .iter()
        .map(|s| {
            let mut modes = Vec::with_capacity(basis.photons());
            let mut fact = T::one();
            for (m, &occ) in s.occupations().iter().enumerate() {
                for _ in 0..occ {
                    modes.push(m);
                }
                let mut f = T::one();
                for i in 2..=occ {
                    f = f * T::from_u32(i).unwrap();
                }
                fact = fact * f;
            }
            (modes, fact)
        })
        .collect()
}

/// Lift an `m`-mode unitary to the `k`-photon subspace: element `(S, T)` is
/// `Per(U_{S,T}) / sqrt(prod s_i! prod t_j!)` where `U_{S,T}` repeats row `i`
/// `s_i` times and column `j` `t_j` times. For `k = 1` this is `U` itself.
pub fn lift<T: Real>(u: &ModeUnitary<T>, basis: &Arc<SubspaceBasis>) -> Result<SubspaceUnitary<T>> {
    if u.modes() != basis.modes() {
        return Err(Error::Dimension {
            what: "lift mode count",
            expected: basis.modes(),
            got: u.modes(),
        });
    }
    let meta = lift_meta::<T>(basis);
    let k = basis.photons();
    let dim = basis.len();
    let um = u.matrix();

    let rows: Vec<Vec<Complex<T>>> = (0..dim)
        .into_par_iter()
        .map(|r| {
            let (row_modes, row_fact) = &meta[r];
            let mut sub = vec![Complex::new(T::zero(), T::zero()); k * k];
            let mut out = Vec::with_capacity(dim);
            for c in 0..dim {
                let (col_modes, col_fact) = &meta[c];
                for (i, &rm) in row_modes.iter().enumerate() {
                    for (j, &cm) in col_modes.iter().enumerate() {
                        sub[i * k + j] = um[(rm, cm)];
                    }
                }
                let per = permanent_flat(k, &sub);
                out.push(per / cr((*row_fact * *col_fact).sqrt()));
            }
            out
        })
        .collect();

    let mut matrix = Array2::zeros((dim, dim));
    for (r, row) in rows.into_iter().enumerate() {
        for (c, v) in row.into_iter().enumerate() {
            matrix[(r, c)] = v;
        }
    }
    SubspaceUnitary::new(basis.clone(), matrix)
}

/// Exact directional derivative of the lift along `du`: the permanent is
/// multilinear in rows, so each element differentiates into a sum of `k`
/// permanents with one row of `U_{S,T}` replaced by the same row of
/// `dU_{S,T}`.
pub fn lift_directional<T: Real>(
    u: &ModeUnitary<T>,
    du: &Array2<Complex<T>>,
    basis: &Arc<SubspaceBasis>,
) -> Result<Array2<Complex<T>>> {
    if u.modes() != basis.modes() || du.nrows() != u.modes() || du.ncols() != u.modes() {
        return Err(Error::Dimension {
            what: "lift derivative mode count",
            expected: basis.modes(),
            got: du.nrows(),
        });
    }
    let meta = lift_meta::<T>(basis);
    let k = basis.photons();
    let dim = basis.len();
    let um = u.matrix();

    let rows: Vec<Vec<Complex<T>>> = (0..dim)
        .into_par_iter()
        .map(|r| {
            let (row_modes, row_fact) = &meta[r];
            let zero = Complex::new(T::zero(), T::zero());
            let mut base = vec![zero; k * k];
            let mut scratch = vec![zero; k * k];
            let mut out = Vec::with_capacity(dim);
            for c in 0..dim {
                let (col_modes, col_fact) = &meta[c];
                for (i, &rm) in row_modes.iter().enumerate() {
                    for (j, &cm) in col_modes.iter().enumerate() {
                        base[i * k + j] = um[(rm, cm)];
                    }
                }
                let mut total = zero;
                for repl in 0..k {
                    scratch.copy_from_slice(&base);
                    let rm = row_modes[repl];
                    for (j, &cm) in col_modes.iter().enumerate() {
                        scratch[repl * k + j] = du[(rm, cm)];
                    }
                    total = total + permanent_flat(k, &scratch);
                }
                out.push(total / cr((*row_fact * *col_fact).sqrt()));
            }
            out
        })
        .collect();

    let mut matrix = Array2::zeros((dim, dim));
    for (r, row) in rows.into_iter().enumerate() {
        for (c, v) in row.into_iter().enumerate() {
            matrix[(r, c)] = v;
        }
    }
    Ok(matrix)
}

/// Rectangular mesh: `layers` alternating nearest-neighbor layers over `m`
/// modes, one independently parameterized gate per placement, slots numbered
/// in creation order.
pub fn mesh_layers<T: Real>(m: usize, layers: usize) -> Circuit<T> {
    assert!(m >= 2, "mesh needs at least two modes");
    let mut c = Circuit::new(m);
    let mut slot = 0;
    for l in 0..layers {
        let mut a = l % 2;
        while a + 1 < m {
            c.push_slot(a, a + 1, slot);
            slot += 1;
            a += 2;
        }
    }
    c
}

/// Universal rectangular mesh: `m` alternating layers, `m(m-1)/2` gates,
/// every mode pair crossing once.
pub fn mesh_universal<T: Real>(m: usize) -> Circuit<T> {
    mesh_layers(m, m)
}
