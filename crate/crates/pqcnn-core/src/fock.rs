//! Fock-basis combinatorics and quantum-state containers restricted to
//! subspaces with a fixed number of photons.

use std::collections::HashMap;
use std::fmt;
use std::sync::Arc;

use ndarray::{Array1, Array2, ArrayViewD, Dimension};
use num_complex::Complex;

use crate::linalg;
use crate::scalar::cr;
use crate::{Error, Real, Result};

/// Default cap on the number of basis states a subspace may hold.
pub const BASIS_STATE_CAP: usize = 1_000_000;

/// Occupation-number vector: photons per mode.
#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub struct FockState(Vec<u32>);

impl FockState {
    pub fn new(occupations: Vec<u32>) -> Self {
        FockState(occupations)
    }

    /// Single photon in `mode`, vacuum elsewhere.
    pub fn single_photon(modes: usize, mode: usize) -> Self {
        let mut occ = vec![0; modes];
        occ[mode] = 1;
        FockState(occ)
    }

    pub fn occupations(&self) -> &[u32] {
        &self.0
    }

    pub fn modes(&self) -> usize {
        self.0.len()
    }

    pub fn photons(&self) -> usize {
        self.0.iter().map(|&o| o as usize).sum()
    }
}

impl fmt::Display for FockState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "|")?;
        for (i, o) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{o}")?;
        }
        write!(f, ">")
    }
}

/// Number of Fock states with `m` modes and `k` photons: binomial(m+k-1, k).
pub fn subspace_dimension(m: usize, k: usize) -> u128 {
    let n = (m + k - 1) as u128;
    let k = k as u128;
    let mut res: u128 = 1;
    for i in 1..=k {
        res = res * (n - k + i) / i;
    }
    res
}

/// Ordered enumeration of every Fock state with `m` modes and `k` photons,
/// with an index lookup. The ordering is lexicographic descending on the
/// occupation vectors, so it is identical across runs; for `k = 1` state `i`
/// is the single photon in mode `i`.
#[derive(Debug)]
pub struct SubspaceBasis {
    m: usize,
    k: usize,
    states: Vec<FockState>,
    index: HashMap<FockState, usize>,
}

impl SubspaceBasis {
    /// Enumerate the basis under the default state cap.
    pub fn enumerate(m: usize, k: usize) -> Result<Arc<Self>> {
        Self::enumerate_with_cap(m, k, BASIS_STATE_CAP)
    }

    pub fn enumerate_with_cap(m: usize, k: usize, cap: usize) -> Result<Arc<Self>> {
        assert!(m >= 1, "mode count must be at least 1");
        let size = subspace_dimension(m, k);
        if size > cap as u128 {
            return Err(Error::Capacity {
                modes: m,
                photons: k,
                size,
                cap,
            });
        }
        let mut states = Vec::with_capacity(size as usize);
        let mut occ = vec![0u32; m];
        fill(&mut states, &mut occ, 0, k);
        debug_assert_eq!(states.len() as u128, size);
        let index = states
            .iter()
            .enumerate()
            .map(|(i, s)| (s.clone(), i))
            .collect();
        Ok(Arc::new(SubspaceBasis {
            m,
            k,
            states,
            index,
        }))
    }

    pub fn modes(&self) -> usize {
        self.m
    }

    pub fn photons(&self) -> usize {
        self.k
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn states(&self) -> &[FockState] {
        &self.states
    }

    pub fn state(&self, i: usize) -> &FockState {
        &self.states[i]
    }

    pub fn index_of(&self, state: &FockState) -> Option<usize> {
        self.index.get(state).copied()
    }

    /// Two enumerations agree iff they cover the same (m, k); the ordering is
    /// deterministic, so structural equality is enough for compatibility.
    pub fn same_subspace(&self, other: &SubspaceBasis) -> bool {
        self.m == other.m && self.k == other.k
    }
}

fn fill(states: &mut Vec<FockState>, occ: &mut Vec<u32>, mode: usize, left: usize) {
    if mode == occ.len() - 1 {
        occ[mode] = left as u32;
        states.push(FockState(occ.clone()));
        occ[mode] = 0;
        return;
    }
    for c in (0..=left).rev() {
        occ[mode] = c as u32;
        fill(states, occ, mode + 1, left - c);
    }
    occ[mode] = 0;
}

/// Complex amplitude vector over a subspace basis; squared 2-norm 1.
#[derive(Clone, Debug)]
pub struct PureState<T: Real> {
    basis: Arc<SubspaceBasis>,
    amplitudes: Array1<Complex<T>>,
}

impl<T: Real> PureState<T> {
    /// Wrap an already-normalized amplitude vector.
    pub fn new(basis: Arc<SubspaceBasis>, amplitudes: Array1<Complex<T>>) -> Result<Self> {
        if amplitudes.len() != basis.len() {
            return Err(Error::Dimension {
                what: "amplitude vector",
                expected: basis.len(),
                got: amplitudes.len(),
            });
        }
        let n: T = amplitudes.iter().map(|a| a.norm_sqr()).sum();
        if (n - T::one()).abs() > T::CHECK_TOL {
            return Err(Error::NotNormalized {
                deviation: (n - T::one()).abs().to_f64().unwrap_or(f64::NAN),
            });
        }
        Ok(PureState { basis, amplitudes })
    }

    /// Normalize and wrap; errors on zero norm.
    pub fn from_unnormalized(
        basis: Arc<SubspaceBasis>,
        amplitudes: Array1<Complex<T>>,
    ) -> Result<Self> {
        if amplitudes.len() != basis.len() {
            return Err(Error::Dimension {
                what: "amplitude vector",
                expected: basis.len(),
                got: amplitudes.len(),
            });
        }
        let n: T = amplitudes.iter().map(|a| a.norm_sqr()).sum();
        if n <= T::zero() || !n.is_finite() {
            return Err(Error::ZeroNorm);
        }
        let inv = cr(T::one() / n.sqrt());
        Ok(PureState {
            basis,
            amplitudes: amplitudes.mapv(|a| a * inv),
        })
    }

    /// Basis state `i` with amplitude 1.
    pub fn basis_state(basis: Arc<SubspaceBasis>, i: usize) -> Self {
        let mut amps = Array1::zeros(basis.len());
        amps[i] = Complex::new(T::one(), T::zero());
        PureState {
            basis,
            amplitudes: amps,
        }
    }

    pub fn basis(&self) -> &Arc<SubspaceBasis> {
        &self.basis
    }

    pub fn amplitudes(&self) -> &Array1<Complex<T>> {
        &self.amplitudes
    }

    /// Detection probabilities in the Fock basis.
    pub fn probabilities(&self) -> Array1<T> {
        self.amplitudes.mapv(|a| a.norm_sqr())
    }
}

/// Hermitian, trace-1, positive semidefinite operator over a subspace basis.
#[derive(Clone, Debug)]
pub struct MixedState<T: Real> {
    basis: Arc<SubspaceBasis>,
    rho: Array2<Complex<T>>,
}

impl<T: Real> MixedState<T> {
    /// Validates hermiticity and unit trace. Positivity is not checked here
    /// (it costs an eigendecomposition); use [`MixedState::validate_psd`].
    pub fn new(basis: Arc<SubspaceBasis>, rho: Array2<Complex<T>>) -> Result<Self> {
        if rho.nrows() != basis.len() || rho.ncols() != basis.len() {
            return Err(Error::Dimension {
                what: "density matrix",
                expected: basis.len(),
                got: rho.nrows(),
            });
        }
        let herm = linalg::hermiticity_deviation(&rho.view());
        if herm > T::CHECK_TOL {
            return Err(Error::NotDensity {
                what: "hermiticity",
                deviation: herm.to_f64().unwrap_or(f64::NAN),
            });
        }
        let tr = trace_re(&rho);
        if (tr - T::one()).abs() > T::CHECK_TOL {
            return Err(Error::NotDensity {
                what: "unit trace",
                deviation: (tr - T::one()).abs().to_f64().unwrap_or(f64::NAN),
            });
        }
        Ok(MixedState { basis, rho })
    }

    pub(crate) fn new_unchecked(basis: Arc<SubspaceBasis>, rho: Array2<Complex<T>>) -> Self {
        MixedState { basis, rho }
    }

    pub fn basis(&self) -> &Arc<SubspaceBasis> {
        &self.basis
    }

    pub fn rho(&self) -> &Array2<Complex<T>> {
        &self.rho
    }

    pub fn trace(&self) -> T {
        trace_re(&self.rho)
    }

    pub fn min_eigenvalue(&self) -> T {
        linalg::hermitian_eigenvalues(&self.rho.view())[0]
    }

    /// Check all eigenvalues are nonnegative up to the PSD slack.
    pub fn validate_psd(&self) -> Result<()> {
        let min = self.min_eigenvalue();
        if min < -T::PSD_TOL {
            return Err(Error::NotDensity {
                what: "positivity",
                deviation: min.to_f64().unwrap_or(f64::NAN),
            });
        }
        Ok(())
    }
}

fn trace_re<T: Real>(rho: &Array2<Complex<T>>) -> T {
    (0..rho.nrows()).map(|i| rho[(i, i)].re).sum()
}

/// Amplitude-encode a real tensor of shape `d_1 x ... x d_k` onto products of
/// single-excitation register states: the Fock state with one photon at
/// position `i_l` inside register `l` carries amplitude `x[i_1..i_k] / ||x||`.
pub fn tensor_encode<T: Real>(
    tensor: ArrayViewD<'_, T>,
    registers: &[usize],
    basis: &Arc<SubspaceBasis>,
) -> Result<PureState<T>> {
    if tensor.shape() != registers {
        return Err(Error::Dimension {
            what: "tensor shape vs registers",
            expected: registers.iter().product(),
            got: tensor.len(),
        });
    }
    let m: usize = registers.iter().sum();
    if basis.modes() != m {
        return Err(Error::Dimension {
            what: "basis mode count",
            expected: m,
            got: basis.modes(),
        });
    }
    if basis.photons() != registers.len() {
        return Err(Error::Dimension {
            what: "basis photon count",
            expected: registers.len(),
            got: basis.photons(),
        });
    }
    let norm_sqr: T = tensor.iter().map(|&x| x * x).sum();
    if norm_sqr <= T::zero() {
        return Err(Error::ZeroNorm);
    }
    let norm = norm_sqr.sqrt();

    let mut offsets = Vec::with_capacity(registers.len());
    let mut acc = 0;
    for &d in registers {
        offsets.push(acc);
        acc += d;
    }

    let mut amps: Array1<Complex<T>> = Array1::zeros(basis.len());
    let mut occ = vec![0u32; m];
    for (idx, &x) in tensor.indexed_iter() {
        occ.iter_mut().for_each(|o| *o = 0);
        for (l, &i_l) in idx.slice().iter().enumerate() {
            occ[offsets[l] + i_l] = 1;
        }
        let state = FockState::new(occ.clone());
        let pos = basis
            .index_of(&state)
            .expect("product state missing from basis");
        amps[pos] = cr(x / norm);
    }
    PureState::new(basis.clone(), amps)
}

/// Outer product of a pure state with itself.
pub fn pure_to_mixed<T: Real>(psi: &PureState<T>) -> MixedState<T> {
    let rho = linalg::outer(psi.amplitudes(), psi.amplitudes());
    MixedState::new_unchecked(psi.basis().clone(), rho)
}
