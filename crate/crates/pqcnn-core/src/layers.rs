//! The four PQCNN stages as composable transformations: tensor-encoding data
//! loaders, tied-filter convolution, measurement-based pooling with state
//! injection, and the dense layer with its readout binning.

use std::sync::Arc;

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};
use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::fock::{FockState, MixedState, PureState, SubspaceBasis};
use crate::optics::{lift, Circuit};
use crate::scalar::cr;
use crate::{Error, Real, Result};

/// Register sizes `d_1..d_k`; register `l` spans `d_l` contiguous modes and
/// carries exactly one photon, encoding one tensor axis.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegisterLayout {
    sizes: Vec<usize>,
}

impl RegisterLayout {
    pub fn new(sizes: Vec<usize>) -> Result<Self> {
        if sizes.is_empty() || sizes.iter().any(|&d| d < 2) {
            return Err(Error::Dimension {
                what: "register sizes (each must be >= 2)",
                expected: 2,
                got: sizes.iter().copied().min().unwrap_or(0),
            });
        }
        Ok(RegisterLayout { sizes })
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    /// Number of registers; equals the photon number `k`.
    pub fn register_count(&self) -> usize {
        self.sizes.len()
    }

    /// Total mode count `m`.
    pub fn modes(&self) -> usize {
        self.sizes.iter().sum()
    }

    pub fn offsets(&self) -> Vec<usize> {
        let mut offs = Vec::with_capacity(self.sizes.len());
        let mut acc = 0;
        for &d in &self.sizes {
            offs.push(acc);
            acc += d;
        }
        offs
    }

    /// All tuples of per-register photon positions, first register slowest.
    pub fn product_positions(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new()];
        for &d in &self.sizes {
            let mut next = Vec::with_capacity(out.len() * d);
            for prefix in &out {
                for i in 0..d {
                    let mut t = prefix.clone();
                    t.push(i);
                    next.push(t);
                }
            }
            out = next;
        }
        out
    }

    /// Fock state with one photon per register at the given local positions.
    pub fn product_state(&self, positions: &[usize]) -> FockState {
        debug_assert_eq!(positions.len(), self.sizes.len());
        let mut occ = vec![0u32; self.modes()];
        for ((&p, &d), off) in positions.iter().zip(&self.sizes).zip(self.offsets()) {
            debug_assert!(p < d);
            occ[off + p] = 1;
        }
        FockState::new(occ)
    }

    /// Probability mass a state carries outside the one-photon-per-register
    /// product states.
    pub fn off_support_mass<T: Real>(&self, psi: &PureState<T>) -> T {
        let mut on = T::zero();
        for pos in self.product_positions() {
            let s = self.product_state(&pos);
            if let Some(i) = psi.basis().index_of(&s) {
                on = on + psi.amplitudes()[i].norm_sqr();
            }
        }
        (T::one() - on).max(T::zero())
    }
}

/// Which modes of a pooled register are measured, and the paired modes a
/// fresh photon is injected into when the matching detector clicks.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PooledRegister {
    pub measured: Vec<usize>,
    pub targets: Vec<usize>,
}

/// Per-register pooling choices; `None` leaves a register untouched.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PoolingSpec {
    registers: Vec<Option<PooledRegister>>,
}

impl PoolingSpec {
    pub fn new(registers: Vec<Option<PooledRegister>>, layout: &RegisterLayout) -> Result<Self> {
        let spec = PoolingSpec { registers };
        spec.validate(layout)?;
        Ok(spec)
    }

    /// Pool every register by half: measure the 1st, 3rd, ... mode of each
    /// register and pair each with the mode immediately following it.
    pub fn halve(layout: &RegisterLayout) -> Result<Self> {
        let mut registers = Vec::with_capacity(layout.register_count());
        for (r, &d) in layout.sizes().iter().enumerate() {
            if d % 2 != 0 {
                return Err(Error::FilterShape {
                    register: r,
                    size: d,
                    filter: 2,
                });
            }
            let measured: Vec<usize> = (0..d).step_by(2).collect();
            let targets: Vec<usize> = measured.iter().map(|&m| m + 1).collect();
            registers.push(Some(PooledRegister { measured, targets }));
        }
        Ok(PoolingSpec { registers })
    }

    pub fn registers(&self) -> &[Option<PooledRegister>] {
        &self.registers
    }

    pub fn validate(&self, layout: &RegisterLayout) -> Result<()> {
        if self.registers.len() != layout.register_count() {
            return Err(Error::Dimension {
                what: "pooling spec register count",
                expected: layout.register_count(),
                got: self.registers.len(),
            });
        }
        for (r, (reg, &d)) in self.registers.iter().zip(layout.sizes()).enumerate() {
            let Some(p) = reg else { continue };
            if p.measured.len() != d / 2 || p.measured.len() != p.targets.len() {
                return Err(Error::FilterShape {
                    register: r,
                    size: d,
                    filter: 2,
                });
            }
            for (&m, &t) in p.measured.iter().zip(&p.targets) {
                if t != m + 1 || t >= d || p.measured.contains(&t) {
                    return Err(Error::FilterShape {
                        register: r,
                        size: d,
                        filter: 2,
                    });
                }
            }
        }
        Ok(())
    }

    /// Register sizes after pooling.
    pub fn output_sizes(&self, layout: &RegisterLayout) -> Vec<usize> {
        layout
            .sizes()
            .iter()
            .zip(&self.registers)
            .map(|(&d, reg)| match reg {
                Some(p) => d - p.measured.len(),
                None => d,
            })
            .collect()
    }

    pub fn output_layout(&self, layout: &RegisterLayout) -> Result<RegisterLayout> {
        RegisterLayout::new(self.output_sizes(layout))
    }
}

/// One photon-counting outcome of the pooling layer: for every register,
/// either the local measured mode that clicked or `None` when the register's
/// photon survived in an unmeasured mode.
pub type PoolingOutcome = Vec<Option<usize>>;

/// A resolved pooling branch: outcome, its probability, and the conditional
/// state on the surviving modes (injected photons included).
#[derive(Clone, Debug)]
pub struct PoolingBranch<T: Real> {
    pub outcome: PoolingOutcome,
    pub probability: T,
    pub state: PureState<T>,
}

/// Sparse linear action of one pooling outcome: the amplitude at input
/// product state `in` is routed to output basis state `out`.
#[derive(Clone, Debug)]
pub struct BranchMap {
    pub outcome: PoolingOutcome,
    pub pairs: Vec<(usize, usize)>,
}

/// Build the outcome maps from the input `(m, k)` basis to an output basis;
/// the output basis may carry extra trailing vacuum modes (dense-layer
/// padding), which the maps leave unoccupied.
pub fn build_branch_maps(
    layout: &RegisterLayout,
    spec: &PoolingSpec,
    in_basis: &Arc<SubspaceBasis>,
    out_basis: &Arc<SubspaceBasis>,
) -> Result<Vec<BranchMap>> {
    spec.validate(layout)?;
    if in_basis.modes() != layout.modes() || in_basis.photons() != layout.register_count() {
        return Err(Error::BasisMismatch);
    }
    let out_sizes = spec.output_sizes(layout);
    let out_modes_data: usize = out_sizes.iter().sum();
    if out_basis.modes() < out_modes_data || out_basis.photons() != in_basis.photons() {
        return Err(Error::BasisMismatch);
    }

    let n_regs = layout.register_count();
    // Per register: local mode -> output position (surviving modes only).
    let mut survive_pos: Vec<Vec<Option<usize>>> = Vec::with_capacity(n_regs);
    for (reg, &d) in spec.registers().iter().zip(layout.sizes()) {
        let mut pos = vec![None; d];
        match reg {
            Some(p) => {
                let mut next = 0;
                for local in 0..d {
                    if !p.measured.contains(&local) {
                        pos[local] = Some(next);
                        next += 1;
                    }
                }
            }
            None => {
                for (local, slot) in pos.iter_mut().enumerate() {
                    *slot = Some(local);
                }
            }
        }
        survive_pos.push(pos);
    }

    let mut out_offsets = Vec::with_capacity(n_regs);
    let mut acc = 0;
    for &d in &out_sizes {
        out_offsets.push(acc);
        acc += d;
    }

    // Outcome options per register: each measured mode clicking, then no click.
    let mut options: Vec<Vec<Option<usize>>> = Vec::with_capacity(n_regs);
    for reg in spec.registers() {
        let mut opts: Vec<Option<usize>> = match reg {
            Some(p) => p.measured.iter().map(|&m| Some(m)).collect(),
            None => Vec::new(),
        };
        opts.push(None);
        options.push(opts);
    }

    let mut outcomes = vec![Vec::new()];
    for opts in &options {
        let mut next = Vec::with_capacity(outcomes.len() * opts.len());
        for prefix in &outcomes {
            for &o in opts {
                let mut t: Vec<Option<usize>> = prefix.clone();
                t.push(o);
                next.push(t);
            }
        }
        outcomes = next;
    }

    let positions = layout.product_positions();
    let mut maps = Vec::with_capacity(outcomes.len());
    for outcome in outcomes {
        let mut pairs = Vec::new();
        'state: for pos in &positions {
            let mut occ = vec![0u32; out_basis.modes()];
            for r in 0..n_regs {
                let local = pos[r];
                let out_local = match (&spec.registers()[r], outcome[r]) {
                    (Some(p), Some(clicked)) => {
                        if local != clicked {
                            continue 'state;
                        }
                        // Photon detected: a fresh photon lands on the paired
                        // target mode.
                        let w = p.measured.iter().position(|&m| m == clicked).unwrap();
                        survive_pos[r][p.targets[w]].expect("target mode must survive")
                    }
                    (Some(_), None) => match survive_pos[r][local] {
                        Some(out) => out,
                        None => continue 'state, // photon sat in a measured mode
                    },
                    (None, None) => local,
                    (None, Some(_)) => unreachable!("unpooled register cannot click"),
                };
                occ[out_offsets[r] + out_local] = 1;
            }
            let in_idx = in_basis
                .index_of(&layout.product_state(pos))
                .expect("product state in input basis");
            let out_idx = out_basis
                .index_of(&FockState::new(occ))
                .expect("mapped state in output basis");
            pairs.push((in_idx, out_idx));
        }
        maps.push(BranchMap { outcome, pairs });
    }
    Ok(maps)
}

fn check_product_support<T: Real>(layout: &RegisterLayout, psi: &PureState<T>) -> Result<()> {
    let off = layout.off_support_mass(psi);
    if off > T::CHECK_TOL {
        return Err(Error::NotNormalized {
            deviation: off.to_f64().unwrap_or(f64::NAN),
        });
    }
    Ok(())
}

/// Enumerate all photon-counting outcomes on the measured modes. Branches
/// with zero probability are omitted; the probabilities of the returned
/// branches sum to 1.
pub fn pooling_branches<T: Real>(
    psi: &PureState<T>,
    layout: &RegisterLayout,
    spec: &PoolingSpec,
) -> Result<Vec<PoolingBranch<T>>> {
    check_product_support(layout, psi)?;
    let out_modes: usize = spec.output_sizes(layout).iter().sum();
    let out_basis = SubspaceBasis::enumerate(out_modes, psi.basis().photons())?;
    let maps = build_branch_maps(layout, spec, psi.basis(), &out_basis)?;

    let mut branches = Vec::new();
    for map in maps {
        let mut amps: Array1<Complex<T>> = Array1::zeros(out_basis.len());
        let mut p = T::zero();
        for &(i, o) in &map.pairs {
            let a = psi.amplitudes()[i];
            amps[o] = amps[o] + a;
            p = p + a.norm_sqr();
        }
        if p > T::epsilon() {
            let inv = cr(T::one() / p.sqrt());
            let state = PureState::new(out_basis.clone(), amps.mapv(|a| a * inv))?;
            branches.push(PoolingBranch {
                outcome: map.outcome,
                probability: p,
                state,
            });
        }
    }
    Ok(branches)
}

/// The pooling layer as a channel: the probability-weighted mixture of the
/// conditional states over all outcomes.
pub fn pooling_channel<T: Real>(
    psi: &PureState<T>,
    layout: &RegisterLayout,
    spec: &PoolingSpec,
) -> Result<MixedState<T>> {
    check_product_support(layout, psi)?;
    let out_modes: usize = spec.output_sizes(layout).iter().sum();
    let out_basis = SubspaceBasis::enumerate(out_modes, psi.basis().photons())?;
    let maps = build_branch_maps(layout, spec, psi.basis(), &out_basis)?;
    let mut rho: Array2<Complex<T>> = Array2::zeros((out_basis.len(), out_basis.len()));
    for map in &maps {
        for &(i1, o1) in &map.pairs {
            let a1 = psi.amplitudes()[i1];
            for &(i2, o2) in &map.pairs {
                let a2 = psi.amplitudes()[i2];
                rho[(o1, o2)] = rho[(o1, o2)] + a1 * a2.conj();
            }
        }
    }
    MixedState::new(out_basis, rho)
}

/// Pooling channel on a density operator input: `rho -> sum_o L_o rho L_o†`.
pub fn pooling_channel_mixed<T: Real>(
    rho: &MixedState<T>,
    layout: &RegisterLayout,
    spec: &PoolingSpec,
) -> Result<MixedState<T>> {
    let out_modes: usize = spec.output_sizes(layout).iter().sum();
    let out_basis = SubspaceBasis::enumerate(out_modes, rho.basis().photons())?;
    let maps = build_branch_maps(layout, spec, rho.basis(), &out_basis)?;
    let mut out: Array2<Complex<T>> = Array2::zeros((out_basis.len(), out_basis.len()));
    for map in &maps {
        for &(i1, o1) in &map.pairs {
            for &(i2, o2) in &map.pairs {
                out[(o1, o2)] = out[(o1, o2)] + rho.rho()[(i1, i2)];
            }
        }
    }
    MixedState::new(out_basis, out)
}

/// Cascade angles that route a single photon injected in the first of `d`
/// modes to amplitudes `v / ||v||`: gate `j` couples modes `j` and `j+1`.
pub fn qdl_loader_angles<T: Real>(v: &[T]) -> Result<Vec<T>> {
    let norm_sqr: T = v.iter().map(|&x| x * x).sum();
    if norm_sqr <= T::zero() || !norm_sqr.is_finite() {
        return Err(Error::ZeroNorm);
    }
    let norm = norm_sqr.sqrt();
    let d = v.len();
    let mut angles = Vec::with_capacity(d.saturating_sub(1));
    let mut rem_sqr = T::one(); // squared norm of the not-yet-placed suffix
    for j in 0..d.saturating_sub(1) {
        let wj = v[j] / norm;
        let rest = (rem_sqr - wj * wj).max(T::zero());
        let theta = if j + 2 == d {
            (-v[d - 1] / norm).atan2(wj)
        } else {
            (-rest.sqrt()).atan2(wj)
        };
        angles.push(theta);
        rem_sqr = rest;
    }
    Ok(angles)
}

/// The cascade circuit for a register of `angles.len() + 1` modes.
pub fn loader_circuit<T: Real>(angles: &[T]) -> Circuit<T> {
    let d = angles.len() + 1;
    let mut c = Circuit::new(d);
    for (j, &t) in angles.iter().enumerate() {
        c.push_fixed(j, j + 1, t);
    }
    c
}

/// Single-photon amplitudes produced by simulating the cascade on a photon
/// injected in mode 0.
pub fn loader_amplitudes<T: Real>(angles: &[T]) -> Result<Array1<Complex<T>>> {
    let u = loader_circuit(angles).compose(&[])?;
    Ok(u.matrix().column(0).to_owned())
}

/// Assemble the product state with the given per-register single-photon
/// amplitudes.
pub fn encode_registers<T: Real>(
    register_amps: &[Array1<Complex<T>>],
    layout: &RegisterLayout,
    basis: &Arc<SubspaceBasis>,
) -> Result<PureState<T>> {
    if register_amps.len() != layout.register_count() {
        return Err(Error::Dimension {
            what: "register amplitude vectors",
            expected: layout.register_count(),
            got: register_amps.len(),
        });
    }
    for (a, &d) in register_amps.iter().zip(layout.sizes()) {
        if a.len() != d {
            return Err(Error::Dimension {
                what: "register amplitude length",
                expected: d,
                got: a.len(),
            });
        }
    }
    if basis.modes() != layout.modes() || basis.photons() != layout.register_count() {
        return Err(Error::BasisMismatch);
    }
    let mut amps: Array1<Complex<T>> = Array1::zeros(basis.len());
    for pos in layout.product_positions() {
        let mut a = Complex::new(T::one(), T::zero());
        for (r, &p) in pos.iter().enumerate() {
            a = a * register_amps[r][p];
        }
        let idx = basis
            .index_of(&layout.product_state(&pos))
            .expect("product state in basis");
        amps[idx] = a;
    }
    PureState::new(basis.clone(), amps)
}

/// Encode by replaying explicit per-register loader angles.
pub fn encode_from_angles<T: Real>(
    per_register: &[Vec<T>],
    layout: &RegisterLayout,
    basis: &Arc<SubspaceBasis>,
) -> Result<PureState<T>> {
    let amps: Vec<Array1<Complex<T>>> = per_register
        .iter()
        .map(|a| loader_amplitudes(a))
        .collect::<Result<_>>()?;
    encode_registers(&amps, layout, basis)
}

/// Best rank-1 factorization `image ~ scale * row col^T` by power iteration,
/// with the relative Frobenius residual of the approximation.
#[derive(Clone, Debug)]
pub struct RankOneFactor<T: Real> {
    pub scale: T,
    pub row: Array1<T>,
    pub col: Array1<T>,
    pub relative_residual: T,
}

pub fn rank1_factor<T: Real>(image: &ArrayView2<T>) -> Result<RankOneFactor<T>> {
    let (rows, cols) = image.dim();
    let fro_sqr: T = image.iter().map(|&x| x * x).sum();
    if fro_sqr <= T::zero() || !fro_sqr.is_finite() {
        return Err(Error::ZeroNorm);
    }
    // Start from the column-norm profile; nonnegative and never orthogonal to
    // the top singular vector of a nonnegative image.
    let mut w = Array1::from_shape_fn(cols, |j| {
        image.column(j).iter().map(|&x| x * x).sum::<T>().sqrt()
    });
    let wn: T = w.iter().map(|&x| x * x).sum::<T>().sqrt();
    if wn > T::zero() {
        w.mapv_inplace(|x| x / wn);
    } else {
        w[0] = T::one();
    }
    let mut u: Array1<T>;
    let mut scale: T;
    for _ in 0..100 {
        u = image.dot(&w);
        scale = u.iter().map(|&x| x * x).sum::<T>().sqrt();
        if scale <= T::zero() {
            // Start vector was orthogonal to the row space; perturb.
            w = Array1::from_elem(cols, T::one() / T::from_usize(cols).unwrap().sqrt());
            u = image.dot(&w);
            scale = u.iter().map(|&x| x * x).sum::<T>().sqrt();
            if scale <= T::zero() {
                return Err(Error::ZeroNorm);
            }
        }
        u.mapv_inplace(|x| x / scale);
        w = image.t().dot(&u);
        let n: T = w.iter().map(|&x| x * x).sum::<T>().sqrt();
        w.mapv_inplace(|x| x / n);
    }
    u = image.dot(&w);
    scale = u.iter().map(|&x| x * x).sum::<T>().sqrt();
    u.mapv_inplace(|x| x / scale);

    // Canonical sign: the largest-magnitude column entry is positive.
    let mut arg = 0;
    for j in 0..cols {
        if w[j].abs() > w[arg].abs() {
            arg = j;
        }
    }
    if w[arg] < T::zero() {
        w.mapv_inplace(|x| -x);
        u.mapv_inplace(|x| -x);
    }

    let mut res_sqr = T::zero();
    for i in 0..rows {
        for j in 0..cols {
            let d = image[(i, j)] - scale * u[i] * w[j];
            res_sqr = res_sqr + d * d;
        }
    }
    Ok(RankOneFactor {
        scale,
        row: u,
        col: w,
        relative_residual: (res_sqr / fro_sqr).sqrt(),
    })
}

/// Residual threshold below which an image counts as an exact outer product.
pub fn rank1_tolerance<T: Real>() -> T {
    T::CHECK_TOL.sqrt()
}

/// Encode a 2-dimensional image through the separable per-register cascades.
/// Only outer-product images are exactly encodable; others are rejected
/// unless `allow_rank1_approx` asks for the nearest rank-1 approximation.
pub fn qdl_encode<T: Real>(
    image: &ArrayView2<T>,
    layout: &RegisterLayout,
    basis: &Arc<SubspaceBasis>,
    allow_rank1_approx: bool,
) -> Result<PureState<T>> {
    if layout.register_count() != 2
        || layout.sizes()[0] != image.nrows()
        || layout.sizes()[1] != image.ncols()
    {
        return Err(Error::Dimension {
            what: "image shape vs register layout",
            expected: layout.modes(),
            got: image.nrows() + image.ncols(),
        });
    }
    let f = rank1_factor(image)?;
    if f.relative_residual > rank1_tolerance::<T>() && !allow_rank1_approx {
        return Err(Error::NotRankOne {
            relative_residual: f.relative_residual.to_f64().unwrap_or(f64::NAN),
        });
    }
    let row_angles = qdl_loader_angles(f.row.as_slice().unwrap())?;
    let col_angles = qdl_loader_angles(f.col.as_slice().unwrap())?;
    encode_from_angles(&[row_angles, col_angles], layout, basis)
}

/// Circuit applying the same `filter`-mode mesh to each consecutive partition
/// of `filter` modes in every register, with `filter(filter-1)/2` angles tied
/// across the windows of a register (slots are per register). The windows
/// tile the register without overlap, so the effective stride equals the
/// filter size; overlapping windows would need the input re-loaded shifted
/// on an extra register and are out of scope here.
pub fn conv_circuit<T: Real>(layout: &RegisterLayout, filter: usize) -> Result<Circuit<T>> {
    let per_register = filter * filter.saturating_sub(1) / 2;
    let mut c = Circuit::new(layout.modes());
    let pattern: Vec<(usize, usize, usize)> = if filter >= 2 {
        crate::optics::mesh_universal::<T>(filter)
            .gates()
            .iter()
            .map(|g| {
                let s = match g.theta {
                    crate::optics::GateAngle::Slot(s) => s,
                    crate::optics::GateAngle::Fixed(_) => unreachable!(),
                };
                (g.modes.0, g.modes.1, s)
            })
            .collect()
    } else {
        Vec::new()
    };
    for (r, (&d, off)) in layout.sizes().iter().zip(layout.offsets()).enumerate() {
        if d % filter != 0 {
            return Err(Error::FilterShape {
                register: r,
                size: d,
                filter,
            });
        }
        for window in 0..d / filter {
            let base = off + window * filter;
            for &(a, b, s) in &pattern {
                c.push_slot(base + a, base + b, r * per_register + s);
            }
        }
    }
    Ok(c)
}

/// Apply the convolutional layer: lift the tied-filter circuit to the state's
/// subspace and act with it. `angles` holds `filter(filter-1)/2` values per
/// register.
pub fn conv_layer<T: Real>(
    psi: &PureState<T>,
    filter: usize,
    angles: &[T],
    layout: &RegisterLayout,
) -> Result<PureState<T>> {
    let circuit = conv_circuit::<T>(layout, filter)?;
    let u = circuit.compose(angles)?;
    let w = lift(&u, psi.basis())?;
    w.apply_pure(psi)
}

/// Embed a density operator into a basis with `alpha` extra trailing vacuum
/// modes.
pub fn pad_vacuum<T: Real>(rho: &MixedState<T>, alpha: usize) -> Result<MixedState<T>> {
    let m = rho.basis().modes();
    let k = rho.basis().photons();
    let big = SubspaceBasis::enumerate(m + alpha, k)?;
    let map: Vec<usize> = rho
        .basis()
        .states()
        .iter()
        .map(|s| {
            let mut occ = s.occupations().to_vec();
            occ.extend(std::iter::repeat(0).take(alpha));
            big.index_of(&FockState::new(occ)).expect("padded state")
        })
        .collect();
    let mut out: Array2<Complex<T>> = Array2::zeros((big.len(), big.len()));
    for (i, &bi) in map.iter().enumerate() {
        for (j, &bj) in map.iter().enumerate() {
            out[(bi, bj)] = rho.rho()[(i, j)];
        }
    }
    MixedState::new(big, out)
}

/// Dense layer: pad with `alpha` vacuum modes, lift the circuit to the padded
/// subspace, and conjugate.
pub fn dense_layer<T: Real>(
    rho: &MixedState<T>,
    circuit: &Circuit<T>,
    params: &[T],
    alpha: usize,
) -> Result<MixedState<T>> {
    if circuit.modes() != rho.basis().modes() + alpha {
        return Err(Error::Dimension {
            what: "dense circuit mode count",
            expected: rho.basis().modes() + alpha,
            got: circuit.modes(),
        });
    }
    let padded = pad_vacuum(rho, alpha)?;
    let u = circuit.compose(params)?;
    let w = lift(&u, padded.basis())?;
    w.apply_mixed(&padded)
}

/// Detection probabilities: the diagonal of the density operator in the Fock
/// basis.
pub fn measure_distribution<T: Real>(rho: &MixedState<T>) -> Array1<T> {
    Array1::from_shape_fn(rho.basis().len(), |i| rho.rho()[(i, i)].re)
}

/// Basis indices of the collision-free configurations (at most one photon
/// per mode), in basis order.
pub fn collision_free_indices(basis: &SubspaceBasis) -> Vec<usize> {
    basis
        .states()
        .iter()
        .enumerate()
        .filter(|(_, s)| s.occupations().iter().all(|&o| o <= 1))
        .map(|(i, _)| i)
        .collect()
}

/// Assignment of output detection events to the two class labels.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum ReadoutBinning {
    /// Partition of the collision-free configurations: `label0` holds indices
    /// into the collision-free list, the complement is label 1.
    Clusters { label0: Vec<usize> },
    /// Two disjoint mode groups; a configuration contributes to every group
    /// it puts at least one photon in, and the raw masses are renormalized.
    ModeGroups {
        group0: Vec<usize>,
        group1: Vec<usize>,
    },
}

impl ReadoutBinning {
    /// Label 0 on the first half of the output modes, label 1 on the second.
    pub fn canonical_mode_groups(modes: usize) -> Self {
        ReadoutBinning::ModeGroups {
            group0: (0..modes / 2).collect(),
            group1: (modes / 2..modes).collect(),
        }
    }

    /// Label 0 on the first register's output modes, label 1 on the other
    /// registers' modes; trailing padding modes stay unassigned.
    pub fn register_groups(output_sizes: &[usize]) -> Self {
        let first = output_sizes.first().copied().unwrap_or(0);
        let rest: usize = output_sizes.iter().skip(1).sum();
        ReadoutBinning::ModeGroups {
            group0: (0..first).collect(),
            group1: (first..first + rest).collect(),
        }
    }

    /// Per-class membership masks over the collision-free list, used both by
    /// the readout and by the gradient.
    pub(crate) fn class_masks(
        &self,
        basis: &SubspaceBasis,
        cf: &[usize],
    ) -> Result<[Vec<bool>; 2]> {
        match self {
            ReadoutBinning::Clusters { label0 } => {
                for &i in label0 {
                    if i >= cf.len() {
                        return Err(Error::Dimension {
                            what: "cluster configuration index",
                            expected: cf.len(),
                            got: i,
                        });
                    }
                }
                let mut m0 = vec![false; cf.len()];
                for &i in label0 {
                    m0[i] = true;
                }
                let m1: Vec<bool> = m0.iter().map(|&b| !b).collect();
                Ok([m0, m1])
            }
            ReadoutBinning::ModeGroups { group0, group1 } => {
                for &m in group0.iter().chain(group1) {
                    if m >= basis.modes() {
                        return Err(Error::Dimension {
                            what: "mode group index",
                            expected: basis.modes(),
                            got: m,
                        });
                    }
                }
                if group0.iter().any(|m| group1.contains(m)) {
                    return Err(Error::InvalidTag {
                        what: "mode groups (must be disjoint)",
                        got: format!("{group0:?} vs {group1:?}"),
                    });
                }
                let touches = |idx: usize, group: &[usize]| {
                    let occ = basis.state(cf[idx]).occupations();
                    group.iter().any(|&m| occ[m] >= 1)
                };
                let m0: Vec<bool> = (0..cf.len()).map(|i| touches(i, group0)).collect();
                let m1: Vec<bool> = (0..cf.len()).map(|i| touches(i, group1)).collect();
                Ok([m0, m1])
            }
        }
    }
}

/// Class probabilities from a detection distribution: sum the assigned
/// collision-free events per class and renormalize over the assigned mass.
pub fn readout<T: Real>(
    dist: &ArrayView1<T>,
    binning: &ReadoutBinning,
    basis: &SubspaceBasis,
) -> Result<[T; 2]> {
    if dist.len() != basis.len() {
        return Err(Error::Dimension {
            what: "distribution length",
            expected: basis.len(),
            got: dist.len(),
        });
    }
    let cf = collision_free_indices(basis);
    let masks = binning.class_masks(basis, &cf)?;
    for (label, mask) in masks.iter().enumerate() {
        if mask.iter().all(|&b| !b) {
            return Err(Error::EmptyBin { label: label as u8 });
        }
    }
    let mut raw = [T::zero(); 2];
    for (c, mask) in masks.iter().enumerate() {
        for (i, &keep) in mask.iter().enumerate() {
            if keep {
                raw[c] = raw[c] + dist[cf[i]];
            }
        }
    }
    let s = raw[0] + raw[1];
    if s <= T::zero() {
        return Err(Error::NoEventMass);
    }
    Ok([raw[0] / s, raw[1] / s])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::{pure_to_mixed, tensor_encode};
    use crate::linalg;
    use crate::optics::bs_matrix;
    use ndarray::{arr2, ArrayD};
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha12Rng;

    fn layout44() -> RegisterLayout {
        RegisterLayout::new(vec![4, 4]).unwrap()
    }

    fn encode_tensor(x: &Array2<f64>, layout: &RegisterLayout) -> PureState<f64> {
        let basis = SubspaceBasis::enumerate(layout.modes(), layout.register_count()).unwrap();
        let xd = ArrayD::from_shape_vec(vec![x.nrows(), x.ncols()], x.iter().copied().collect())
            .unwrap();
        tensor_encode(xd.view(), layout.sizes(), &basis).unwrap()
    }

    #[test]
    fn loader_angles_one_hot_gives_zero_angles() {
        let angles = qdl_loader_angles(&[1.0f64, 0.0, 0.0, 0.0]).unwrap();
        assert_eq!(angles, vec![0.0, 0.0, 0.0]);
    }

    #[test]
    fn loader_uniform_vector_gives_uniform_distribution() {
        let angles = qdl_loader_angles(&[1.0f64; 4]).unwrap();
        let amps = loader_amplitudes(&angles).unwrap();
        for a in amps.iter() {
            assert!((a.norm_sqr() - 0.25).abs() < 1e-12);
        }
    }

    #[test]
    fn loader_round_trip_reproduces_amplitudes() {
        let mut rng = ChaCha12Rng::seed_from_u64(9);
        for _ in 0..20 {
            let d = rng.gen_range(2..=8);
            let v: Vec<f64> = (0..d).map(|_| rng.gen_range(-1.0..1.0f64)).collect();
            let norm: f64 = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm < 1e-6 {
                continue;
            }
            let angles = qdl_loader_angles(&v).unwrap();
            let amps = loader_amplitudes(&angles).unwrap();
            for (a, &x) in amps.iter().zip(&v) {
                assert!((a.re - x / norm).abs() < 1e-10, "d={d}");
                assert!(a.im.abs() < 1e-12);
            }
        }
    }

    #[test]
    fn loader_rejects_zero_vector() {
        assert_eq!(
            qdl_loader_angles(&[0.0f64; 4]).unwrap_err(),
            Error::ZeroNorm
        );
    }

    #[test]
    fn qdl_encode_single_bright_row() {
        let layout = layout44();
        let basis = SubspaceBasis::enumerate(8, 2).unwrap();
        let mut img = Array2::<f64>::zeros((4, 4));
        for j in 0..4 {
            img[(2, j)] = 1.0;
        }
        let psi = qdl_encode(&img.view(), &layout, &basis, false).unwrap();
        // Row register one-hot at row 2, column register uniform.
        for pos in layout.product_positions() {
            let idx = basis.index_of(&layout.product_state(&pos)).unwrap();
            let p = psi.amplitudes()[idx].norm_sqr();
            if pos[0] == 2 {
                assert!((p - 0.25).abs() < 1e-12);
            } else {
                assert!(p < 1e-20);
            }
        }
    }

    #[test]
    fn qdl_encode_matches_tensor_encode_on_rank1_images() {
        let mut rng = ChaCha12Rng::seed_from_u64(15);
        let layout = layout44();
        let basis = SubspaceBasis::enumerate(8, 2).unwrap();
        for _ in 0..10 {
            let u: Vec<f64> = (0..4).map(|_| rng.gen_range(0.05..1.0)).collect();
            let v: Vec<f64> = (0..4).map(|_| rng.gen_range(0.05..1.0)).collect();
            let img = Array2::from_shape_fn((4, 4), |(i, j)| u[i] * v[j]);
            let psi = qdl_encode(&img.view(), &layout, &basis, false).unwrap();
            let expected = encode_tensor(&img, &layout);
            for (a, b) in psi.amplitudes().iter().zip(expected.amplitudes()) {
                assert!((a - b).norm() < 1e-10);
            }
        }
    }

    #[test]
    fn qdl_encode_rejects_non_rank1_without_flag() {
        let layout = layout44();
        let basis = SubspaceBasis::enumerate(8, 2).unwrap();
        let img = arr2(&[
            [1.0, 0.0, 0.0, 0.0],
            [0.0, 1.0, 0.0, 0.0],
            [0.0, 0.0, 1.0, 0.0],
            [0.0, 0.0, 0.0, 1.0],
        ]);
        let err = qdl_encode(&img.view(), &layout, &basis, false).unwrap_err();
        assert!(matches!(err, Error::NotRankOne { .. }));

        // With the flag the nearest rank-1 approximation is encoded.
        let psi = qdl_encode(&img.view(), &layout, &basis, true).unwrap();
        let f = rank1_factor(&img.view()).unwrap();
        let approx = Array2::from_shape_fn((4, 4), |(i, j)| f.scale * f.row[i] * f.col[j]);
        let expected = encode_tensor(&approx, &layout);
        for (a, b) in psi.amplitudes().iter().zip(expected.amplitudes()) {
            assert!((a - b).norm() < 1e-8);
        }
    }

    #[test]
    fn conv_zero_angles_is_identity() {
        let layout = layout44();
        let x = Array2::from_shape_fn((4, 4), |(i, j)| 0.3 + (i * 4 + j) as f64);
        let psi = encode_tensor(&x, &layout);
        let out = conv_layer(&psi, 2, &[0.0, 0.0], &layout).unwrap();
        for (a, b) in out.amplitudes().iter().zip(psi.amplitudes()) {
            assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn conv_matches_blockwise_matrix_oracle() {
        // K=2 on two 4-mode registers: per-register single-photon matrix is
        // block-diagonal with the same 2x2 rotation in both windows; the
        // output tensor must equal B_row X B_col^T.
        let mut rng = ChaCha12Rng::seed_from_u64(77);
        let layout = layout44();
        for _ in 0..5 {
            let x = Array2::from_shape_fn((4, 4), |_| rng.gen_range(-1.0..1.0f64));
            let t_row = rng.gen_range(0.0..std::f64::consts::PI);
            let t_col = rng.gen_range(0.0..std::f64::consts::PI);
            let psi = encode_tensor(&x, &layout);
            let out = conv_layer(&psi, 2, &[t_row, t_col], &layout).unwrap();

            let block = |theta: f64| {
                let b = bs_matrix(theta, 0.0);
                let mut m = Array2::<f64>::zeros((4, 4));
                for w in 0..2 {
                    for i in 0..2 {
                        for j in 0..2 {
                            m[(2 * w + i, 2 * w + j)] = b[(i, j)].re;
                        }
                    }
                }
                m
            };
            let norm: f64 = x.iter().map(|v| v * v).sum::<f64>().sqrt();
            let expected = block(t_row).dot(&x).dot(&block(t_col).t());
            let basis = psi.basis();
            for pos in layout.product_positions() {
                let idx = basis.index_of(&layout.product_state(&pos)).unwrap();
                let got = out.amplitudes()[idx].re;
                assert!(
                    (got - expected[(pos[0], pos[1])] / norm).abs() < 1e-10,
                    "pos {pos:?}"
                );
            }
        }
    }

    #[test]
    fn conv_rejects_filter_that_does_not_partition() {
        let layout = layout44();
        assert!(matches!(
            conv_circuit::<f64>(&layout, 3).unwrap_err(),
            Error::FilterShape { .. }
        ));
    }

    #[test]
    fn conv_commutes_with_window_aligned_cyclic_shift() {
        let mut rng = ChaCha12Rng::seed_from_u64(99);
        let layout = layout44();
        let x = Array2::from_shape_fn((4, 4), |_| rng.gen_range(-1.0..1.0f64));
        let angles = [0.8, -0.3];
        let shift = |m: &Array2<f64>| Array2::from_shape_fn((4, 4), |(i, j)| m[((i + 2) % 4, j)]);
        let a = conv_layer(&encode_tensor(&shift(&x), &layout), 2, &angles, &layout).unwrap();
        let b = conv_layer(&encode_tensor(&x, &layout), 2, &angles, &layout).unwrap();
        // Running on the shifted input must equal shifting the output.
        let basis = a.basis();
        for pos in layout.product_positions() {
            let shifted = vec![(pos[0] + 2) % 4, pos[1]];
            let ia = basis.index_of(&layout.product_state(&shifted)).unwrap();
            let ib = basis.index_of(&layout.product_state(&pos)).unwrap();
            assert!((a.amplitudes()[ia] - b.amplitudes()[ib]).norm() < 1e-10);
        }
    }

    #[test]
    fn pooling_photon_in_unmeasured_modes_passes_through() {
        let layout = layout44();
        let spec = PoolingSpec::halve(&layout).unwrap();
        let mut x = Array2::<f64>::zeros((4, 4));
        x[(1, 3)] = 1.0; // both local positions odd: unmeasured
        let psi = encode_tensor(&x, &layout);
        let branches = pooling_branches(&psi, &layout, &spec).unwrap();
        assert_eq!(branches.len(), 1);
        let b = &branches[0];
        assert!((b.probability - 1.0).abs() < 1e-12);
        assert_eq!(b.outcome, vec![None, None]);
        // Mode 1 -> output position 0, mode 3 -> output position 1.
        let out_layout = spec.output_layout(&layout).unwrap();
        let idx = b
            .state
            .basis()
            .index_of(&out_layout.product_state(&[0, 1]))
            .unwrap();
        assert!((b.state.amplitudes()[idx].norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn pooling_photon_in_measured_modes_forces_injection() {
        let layout = layout44();
        let spec = PoolingSpec::halve(&layout).unwrap();
        let mut x = Array2::<f64>::zeros((4, 4));
        x[(0, 2)] = 1.0; // both measured (local 0 and 2)
        let psi = encode_tensor(&x, &layout);
        let branches = pooling_branches(&psi, &layout, &spec).unwrap();
        assert_eq!(branches.len(), 1);
        let b = &branches[0];
        assert!((b.probability - 1.0).abs() < 1e-12);
        assert_eq!(b.outcome, vec![Some(0), Some(2)]);
        // Injection targets 1 and 3 sit at output positions 0 and 1.
        let out_layout = spec.output_layout(&layout).unwrap();
        let idx = b
            .state
            .basis()
            .index_of(&out_layout.product_state(&[0, 1]))
            .unwrap();
        assert!((b.state.amplitudes()[idx].norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn pooling_probabilities_sum_to_one() {
        let mut rng = ChaCha12Rng::seed_from_u64(5);
        let layout = layout44();
        let spec = PoolingSpec::halve(&layout).unwrap();
        for _ in 0..10 {
            let x = Array2::from_shape_fn((4, 4), |_| rng.gen_range(-1.0..1.0f64));
            let psi = encode_tensor(&x, &layout);
            let branches = pooling_branches(&psi, &layout, &spec).unwrap();
            let total: f64 = branches.iter().map(|b| b.probability).sum();
            assert!((total - 1.0).abs() < 1e-10);
            for b in &branches {
                let rho = pure_to_mixed(&b.state);
                assert!((rho.trace() - 1.0).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn pooling_channel_matches_printed_polynomials() {
        // The 4x4 output density operator of pooling both registers of a 4x4
        // tensor-encoded input follows a 2x2-window polynomial pattern.
        let mut rng = ChaCha12Rng::seed_from_u64(13);
        let layout = layout44();
        let spec = PoolingSpec::halve(&layout).unwrap();
        let x = Array2::from_shape_fn((4, 4), |_| rng.gen_range(-1.0..1.0f64));
        let nsq: f64 = x.iter().map(|v| v * v).sum();
        let psi = encode_tensor(&x, &layout);
        let rho = pooling_channel(&psi, &layout, &spec).unwrap();
        // The support lives on the 4 one-photon-per-register states of the
        // 10-dimensional (4 modes, 2 photons) output basis.
        let out_layout = spec.output_layout(&layout).unwrap();
        let at = |a: usize, b: usize| {
            rho.basis()
                .index_of(&out_layout.product_state(&[a, b]))
                .unwrap()
        };
        // Second diagonal entry: rows 1-2, columns 3-4 window (1-based).
        let d2 =
            (x[(0, 2)].powi(2) + x[(0, 3)].powi(2) + x[(1, 2)].powi(2) + x[(1, 3)].powi(2)) / nsq;
        assert!((rho.rho()[(at(0, 1), at(0, 1))].re - d2).abs() < 1e-12);
        // Off-diagonal (1,2) entry: x12*x14 + x22*x24 (1-based).
        let od = (x[(0, 1)] * x[(0, 3)] + x[(1, 1)] * x[(1, 3)]) / nsq;
        assert!((rho.rho()[(at(0, 0), at(0, 1))].re - od).abs() < 1e-12);
        rho.validate_psd().unwrap();
    }

    #[test]
    fn pooling_channel_equals_branch_mixture_and_mixed_path() {
        let mut rng = ChaCha12Rng::seed_from_u64(21);
        let layout = layout44();
        let spec = PoolingSpec::halve(&layout).unwrap();
        let x = Array2::from_shape_fn((4, 4), |_| rng.gen_range(-1.0..1.0f64));
        let psi = encode_tensor(&x, &layout);
        let rho = pooling_channel(&psi, &layout, &spec).unwrap();

        let mut acc = Array2::<Complex<f64>>::zeros(rho.rho().dim());
        for b in pooling_branches(&psi, &layout, &spec).unwrap() {
            let outer = linalg::outer(b.state.amplitudes(), b.state.amplitudes());
            acc = acc + outer.mapv(|v| v * b.probability);
        }
        assert!(linalg::max_abs_diff(&acc.view(), &rho.rho().view()) < 1e-12);

        let via_mixed = pooling_channel_mixed(&pure_to_mixed(&psi), &layout, &spec).unwrap();
        assert!(linalg::max_abs_diff(&via_mixed.rho().view(), &rho.rho().view()) < 1e-12);
    }

    #[test]
    fn dense_layer_identity_embeds_unchanged() {
        let layout = RegisterLayout::new(vec![2, 2]).unwrap();
        let x = arr2(&[[0.6, 0.2], [0.1, 0.9]]);
        let rho = pure_to_mixed(&encode_tensor(&x, &layout));
        let circuit = Circuit::<f64>::new(6);
        let out = dense_layer(&rho, &circuit, &[], 2).unwrap();
        assert_eq!(out.basis().modes(), 6);
        assert!((out.trace() - 1.0).abs() < 1e-12);
        // The embedded block must be untouched.
        let small = rho.basis();
        let big = out.basis();
        for (i, si) in small.states().iter().enumerate() {
            for (j, sj) in small.states().iter().enumerate() {
                let mut oi = si.occupations().to_vec();
                oi.extend([0, 0]);
                let mut oj = sj.occupations().to_vec();
                oj.extend([0, 0]);
                let bi = big.index_of(&FockState::new(oi)).unwrap();
                let bj = big.index_of(&FockState::new(oj)).unwrap();
                assert!((out.rho()[(bi, bj)] - rho.rho()[(i, j)]).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn dense_layer_single_photon_is_column_stochastic_mixing() {
        // k=1, alpha=0: diagonal evolves by the |W_ij|^2 matrix.
        let basis = SubspaceBasis::enumerate(3, 1).unwrap();
        let mut rho_in = Array2::<Complex<f64>>::zeros((3, 3));
        let probs = [0.5, 0.3, 0.2];
        for (i, &p) in probs.iter().enumerate() {
            rho_in[(i, i)] = Complex::new(p, 0.0);
        }
        let rho = MixedState::new(basis, rho_in).unwrap();
        let circuit = crate::optics::mesh_universal::<f64>(3);
        let params = [0.4, 1.1, -0.6];
        let out = dense_layer(&rho, &circuit, &params, 0).unwrap();
        let u = circuit.compose(&params).unwrap();
        for i in 0..3 {
            let expected: f64 = (0..3)
                .map(|j| u.matrix()[(i, j)].norm_sqr() * probs[j])
                .sum();
            assert!((out.rho()[(i, i)].re - expected).abs() < 1e-12);
        }
    }

    #[test]
    fn dense_layer_experimental_shape() {
        // 4 surviving modes + alpha=2 -> 6-mode dense with 2 photons, 21 states.
        let layout = RegisterLayout::new(vec![2, 2]).unwrap();
        let x = arr2(&[[1.0, 0.5], [0.25, 0.8]]);
        let rho = pure_to_mixed(&encode_tensor(&x, &layout));
        let circuit = crate::optics::mesh_layers::<f64>(6, 3);
        assert_eq!(circuit.param_count(), 8);
        let params: Vec<f64> = (0..8).map(|i| 0.1 * (i as f64 + 1.0)).collect();
        // Input lives on 4 modes; padding with alpha=2 gives the 6-mode,
        // 2-photon dense space with binomial(7,2) = 21 states.
        let out = dense_layer(&rho, &circuit, &params, 2).unwrap();
        assert_eq!(out.basis().len(), 21);
        assert!((out.trace() - 1.0).abs() < 1e-10);
        out.validate_psd().unwrap();
    }

    #[test]
    fn measure_distribution_cases() {
        let basis = SubspaceBasis::enumerate(3, 2).unwrap();
        let n = basis.len();
        let pure = PureState::<f64>::basis_state(basis.clone(), 2);
        let d = measure_distribution(&pure_to_mixed(&pure));
        for (i, &p) in d.iter().enumerate() {
            let expect = if i == 2 { 1.0 } else { 0.0 };
            assert!((p - expect).abs() < 1e-15);
        }

        let mixed = MixedState::new(
            basis,
            Array2::from_shape_fn((n, n), |(i, j)| {
                if i == j {
                    Complex::new(1.0 / n as f64, 0.0)
                } else {
                    Complex::new(0.0, 0.0)
                }
            }),
        )
        .unwrap();
        let d = measure_distribution(&mixed);
        for &p in d.iter() {
            assert!((p - 1.0 / n as f64).abs() < 1e-15);
        }
    }

    #[test]
    fn readout_enumerates_15_coincidences_on_6_modes() {
        let basis = SubspaceBasis::enumerate(6, 2).unwrap();
        assert_eq!(basis.len(), 21);
        assert_eq!(collision_free_indices(&basis).len(), 15);
    }

    #[test]
    fn readout_single_configuration_and_cluster_sums() {
        let basis = SubspaceBasis::enumerate(6, 2).unwrap();
        let cf = collision_free_indices(&basis);
        let mut dist = Array1::<f64>::zeros(basis.len());
        dist[cf[3]] = 1.0;
        let binning = ReadoutBinning::Clusters {
            label0: vec![0, 3, 5],
        };
        let p = readout(&dist.view(), &binning, &basis).unwrap();
        assert!((p[0] - 1.0).abs() < 1e-15);
        assert_eq!(p[1], 0.0);

        // Random distribution: class 0 mass is the (renormalized) sum over
        // the 7 assigned coincidences.
        let mut rng = ChaCha12Rng::seed_from_u64(2);
        let mut dist = Array1::from_shape_fn(basis.len(), |_| rng.gen_range(0.0..1.0f64));
        let total: f64 = dist.iter().sum();
        dist.mapv_inplace(|v| v / total);
        let label0: Vec<usize> = (0..7).collect();
        let binning = ReadoutBinning::Clusters {
            label0: label0.clone(),
        };
        let p = readout(&dist.view(), &binning, &basis).unwrap();
        let cf_mass: f64 = cf.iter().map(|&i| dist[i]).sum();
        let c0: f64 = label0.iter().map(|&i| dist[cf[i]]).sum();
        assert!((p[0] - c0 / cf_mass).abs() < 1e-12);
        assert!((p[0] + p[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn readout_mode_groups_renormalizes_shared_events() {
        let basis = SubspaceBasis::enumerate(4, 2).unwrap();
        let cf = collision_free_indices(&basis);
        assert_eq!(cf.len(), 6);
        let binning = ReadoutBinning::canonical_mode_groups(4);
        let mut dist = Array1::<f64>::zeros(basis.len());
        // All mass on the split configuration |1,0,1,0>: touches both groups.
        let split = basis.index_of(&FockState::new(vec![1, 0, 1, 0])).unwrap();
        dist[split] = 1.0;
        let p = readout(&dist.view(), &binning, &basis).unwrap();
        assert!((p[0] - 0.5).abs() < 1e-15);
        assert!((p[1] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn readout_errors() {
        let basis = SubspaceBasis::enumerate(6, 2).unwrap();
        let dist = Array1::<f64>::zeros(basis.len());
        let empty = ReadoutBinning::Clusters { label0: vec![] };
        assert_eq!(
            readout(&dist.view(), &empty, &basis).unwrap_err(),
            Error::EmptyBin { label: 0 }
        );
        let binning = ReadoutBinning::canonical_mode_groups(6);
        assert_eq!(
            readout(&dist.view(), &binning, &basis).unwrap_err(),
            Error::NoEventMass
        );
    }
}
