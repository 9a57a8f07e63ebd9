//! Variational training of the photonic convolutional classifier: the full
//! model, exact gradients, ADAM with decoupled weight decay, the offline
//! readout-layer search, and evaluation metrics.

use std::sync::Arc;

use ndarray::{Array1, Array2};
use num_complex::Complex;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{DatasetSplit, Sample};
use crate::fock::{PureState, SubspaceBasis};
use crate::layers::{
    build_branch_maps, collision_free_indices, conv_circuit, dense_layer, encode_from_angles,
    measure_distribution, pooling_channel, qdl_encode, readout, PoolingSpec, ReadoutBinning,
    RegisterLayout,
};
use crate::linalg;
use crate::optics::{lift, lift_directional, mesh_layers, Circuit, SubspaceUnitary};
use crate::{Error, Real, Result};

/// The full layer stack with a flat parameter vector: conv angles first, then
/// dense angles.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PqcnnModel<T: Real> {
    pub layout: RegisterLayout,
    pub filter: usize,
    pub conv: Circuit<T>,
    pub pooling: PoolingSpec,
    pub dense: Circuit<T>,
    pub alpha: usize,
    pub readout: ReadoutBinning,
    pub params: Vec<T>,
    /// Encode non-outer-product images as their nearest rank-1 approximation.
    pub rank1_approx: bool,
}

impl<T: Real> PqcnnModel<T> {
    pub fn conv_param_count(&self) -> usize {
        self.conv.param_count()
    }

    pub fn dense_param_count(&self) -> usize {
        self.dense.param_count()
    }

    pub fn param_count(&self) -> usize {
        self.conv_param_count() + self.dense_param_count()
    }

    pub fn conv_params(&self) -> &[T] {
        &self.params[..self.conv_param_count()]
    }

    pub fn dense_params(&self) -> &[T] {
        &self.params[self.conv_param_count()..]
    }

    /// Mode count of the dense stage: surviving pooled modes plus padding.
    pub fn dense_modes(&self) -> usize {
        self.pooling
            .output_sizes(&self.layout)
            .iter()
            .sum::<usize>()
            + self.alpha
    }

    pub fn validate(&self) -> Result<()> {
        self.pooling.validate(&self.layout)?;
        if self.params.len() != self.param_count() {
            return Err(Error::Dimension {
                what: "parameter vector",
                expected: self.param_count(),
                got: self.params.len(),
            });
        }
        if self.params.iter().any(|p| !p.is_finite()) {
            return Err(Error::NonFinite {
                what: "model parameters",
            });
        }
        if self.dense.modes() != self.dense_modes() {
            return Err(Error::Dimension {
                what: "dense circuit modes",
                expected: self.dense_modes(),
                got: self.dense.modes(),
            });
        }
        Ok(())
    }

    pub fn compile(&self) -> Result<CompiledModel<T>> {
        self.compile_inner(false)
    }

    pub fn compile_with_gradient(&self) -> Result<CompiledModel<T>> {
        self.compile_inner(true)
    }

    fn compile_inner(&self, with_gradient: bool) -> Result<CompiledModel<T>> {
        self.validate()?;
        let in_basis = SubspaceBasis::enumerate(self.layout.modes(), self.layout.register_count())?;
        let dense_basis =
            SubspaceBasis::enumerate(self.dense_modes(), self.layout.register_count())?;
        let branch_pairs: Vec<Vec<(usize, usize)>> =
            build_branch_maps(&self.layout, &self.pooling, &in_basis, &dense_basis)?
                .into_iter()
                .map(|m| m.pairs)
                .collect();
        let cf = collision_free_indices(&dense_basis);
        let masks = self.readout.class_masks(&dense_basis, &cf)?;
        for (label, mask) in masks.iter().enumerate() {
            if mask.iter().all(|&b| !b) {
                return Err(Error::EmptyBin { label: label as u8 });
            }
        }

        let (conv_u, conv_dus) = self.conv.compose_with_gradient(self.conv_params())?;
        let (dense_u, dense_dus) = self.dense.compose_with_gradient(self.dense_params())?;
        let conv_lift = lift(&conv_u, &in_basis)?;
        let dense_lift = lift(&dense_u, &dense_basis)?;

        let (conv_dlifts, dense_dlifts, dense_lift_dagger) = if with_gradient {
            let conv_dlifts = conv_dus
                .iter()
                .map(|du| lift_directional(&conv_u, du, &in_basis))
                .collect::<Result<Vec<_>>>()?;
            let dense_dlifts = dense_dus
                .iter()
                .map(|du| lift_directional(&dense_u, du, &dense_basis))
                .collect::<Result<Vec<_>>>()?;
            let dagger = linalg::dagger(&dense_lift.matrix().view());
            (conv_dlifts, dense_dlifts, Some(dagger))
        } else {
            (Vec::new(), Vec::new(), None)
        };

        Ok(CompiledModel {
            in_basis,
            dense_basis,
            conv_lift,
            dense_lift,
            branch_pairs,
            cf,
            masks,
            conv_dlifts,
            dense_dlifts,
            dense_lift_dagger,
        })
    }
}

/// Architecture knobs from which a model is built.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Architecture {
    pub register_sizes: Vec<usize>,
    pub filter: usize,
    pub alpha: usize,
    /// Mesh layers of the dense circuit; `None` means the full universal
    /// mesh (as many layers as modes).
    pub dense_layers: Option<usize>,
    /// Draw a frozen random phase for every dense gate instead of phase 0.
    pub dense_random_phases: bool,
    pub rank1_approx: bool,
}

impl Architecture {
    /// The 4x4-image shape: two 4-mode registers, 2x2 filter, two extra dense
    /// modes, and the 8-gate dense circuit over six modes.
    pub fn bas4() -> Self {
        Architecture {
            register_sizes: vec![4, 4],
            filter: 2,
            alpha: 2,
            dense_layers: Some(3),
            dense_random_phases: false,
            rank1_approx: false,
        }
    }

    /// The 8x8-image shape: two 8-mode registers, 2x2 filter, no extra dense
    /// modes, full universal mesh on the 8 surviving modes.
    pub fn mnist8() -> Self {
        Architecture {
            register_sizes: vec![8, 8],
            filter: 2,
            alpha: 0,
            dense_layers: None,
            dense_random_phases: false,
            rank1_approx: true,
        }
    }

    /// (conv, dense) trainable-angle accounting.
    pub fn expected_params(&self) -> Result<(usize, usize)> {
        let layout = RegisterLayout::new(self.register_sizes.clone())?;
        let conv = conv_circuit::<f64>(&layout, self.filter)?.param_count();
        let pooling = PoolingSpec::halve(&layout)?;
        let dense_m = pooling.output_sizes(&layout).iter().sum::<usize>() + self.alpha;
        let dense = mesh_layers::<f64>(dense_m, self.dense_layers.unwrap_or(dense_m)).param_count();
        Ok((conv, dense))
    }
}

/// Build a model with angles drawn uniformly from `[0, init_max_angle)` and,
/// when enabled, frozen dense-gate phases drawn uniformly from `[0, 2pi)`.
/// The draw order is fixed: phases first, then the parameter vector.
pub fn build_model<T: Real>(
    arch: &Architecture,
    init_max_angle: f64,
    rng: &mut impl Rng,
) -> Result<PqcnnModel<T>> {
    let layout = RegisterLayout::new(arch.register_sizes.clone())?;
    let conv = conv_circuit::<T>(&layout, arch.filter)?;
    let pooling = PoolingSpec::halve(&layout)?;
    let dense_m = pooling.output_sizes(&layout).iter().sum::<usize>() + arch.alpha;
    let mut dense = mesh_layers::<T>(dense_m, arch.dense_layers.unwrap_or(dense_m));
    if arch.dense_random_phases {
        let phases: Vec<T> = (0..dense.gates().len())
            .map(|_| T::from_f64(rng.gen_range(0.0..std::f64::consts::TAU)).unwrap())
            .collect();
        dense.set_phases(&phases);
    }
    let readout = ReadoutBinning::register_groups(&pooling.output_sizes(&layout));
    let n_params = conv.param_count() + dense.param_count();
    let params: Vec<T> = (0..n_params)
        .map(|_| T::from_f64(rng.gen_range(0.0..init_max_angle)).unwrap())
        .collect();
    let model = PqcnnModel {
        layout,
        filter: arch.filter,
        conv,
        pooling,
        dense,
        alpha: arch.alpha,
        readout,
        params,
        rank1_approx: arch.rank1_approx,
    };
    model.validate()?;
    Ok(model)
}

/// Build a model from a bare seed (the deterministic entry point used by
/// the command-line harness).
pub fn build_model_seeded<T: Real>(
    arch: &Architecture,
    init_max_angle: f64,
    seed: u64,
) -> Result<PqcnnModel<T>> {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    build_model(arch, init_max_angle, &mut rng)
}

/// Parameter-dependent precomputations for fast forward and gradient
/// evaluation: the lifted conv and dense unitaries, the pooling outcome maps
/// (with dense-stage padding fused in), and the readout event masks.
pub struct CompiledModel<T: Real> {
    pub in_basis: Arc<SubspaceBasis>,
    pub dense_basis: Arc<SubspaceBasis>,
    conv_lift: SubspaceUnitary<T>,
    dense_lift: SubspaceUnitary<T>,
    branch_pairs: Vec<Vec<(usize, usize)>>,
    cf: Vec<usize>,
    masks: [Vec<bool>; 2],
    conv_dlifts: Vec<Array2<Complex<T>>>,
    dense_dlifts: Vec<Array2<Complex<T>>>,
    dense_lift_dagger: Option<Array2<Complex<T>>>,
}

/// Encode one sample: replay stored loader angles when present, otherwise run
/// the separable loader on the pixels.
pub fn encode_sample<T: Real>(
    model: &PqcnnModel<T>,
    sample: &Sample<T>,
    basis: &Arc<SubspaceBasis>,
) -> Result<PureState<T>> {
    match &sample.qdl_angles {
        Some(angles) => encode_from_angles(&angles[..], &model.layout, basis),
        None => qdl_encode(
            &sample.pixels.view(),
            &model.layout,
            basis,
            model.rank1_approx,
        ),
    }
}

struct ForwardData<T: Real> {
    phis: Vec<Array1<Complex<T>>>,
    chis: Vec<Array1<Complex<T>>>,
    probs: [T; 2],
    total: T,
}

impl<T: Real> CompiledModel<T> {
    fn forward_data(&self, psi0: &Array1<Complex<T>>) -> Result<ForwardData<T>> {
        let psi1 = self.conv_lift.matrix().dot(psi0);
        let n2 = self.dense_basis.len();
        let mut q = Array1::<T>::zeros(n2);
        let mut phis = Vec::with_capacity(self.branch_pairs.len());
        let mut chis = Vec::with_capacity(self.branch_pairs.len());
        for pairs in &self.branch_pairs {
            let mut phi = Array1::<Complex<T>>::zeros(n2);
            for &(i, o) in pairs {
                phi[o] = phi[o] + psi1[i];
            }
            let chi = self.dense_lift.matrix().dot(&phi);
            for (qi, c) in q.iter_mut().zip(chi.iter()) {
                *qi = *qi + c.norm_sqr();
            }
            phis.push(phi);
            chis.push(chi);
        }
        let mut raw = [T::zero(); 2];
        for (c, mask) in self.masks.iter().enumerate() {
            for (t, &keep) in mask.iter().enumerate() {
                if keep {
                    raw[c] = raw[c] + q[self.cf[t]];
                }
            }
        }
        let total = raw[0] + raw[1];
        if total <= T::zero() {
            return Err(Error::NoEventMass);
        }
        Ok(ForwardData {
            phis,
            chis,
            probs: [raw[0] / total, raw[1] / total],
            total,
        })
    }

    /// Class probabilities for an encoded input.
    pub fn probabilities(&self, psi0: &Array1<Complex<T>>) -> Result<[T; 2]> {
        Ok(self.forward_data(psi0)?.probs)
    }

    /// Loss and exact parameter gradient for one encoded, labeled input.
    /// Reverse mode: the readout adjoint is pulled back through the dense
    /// conjugation and the pooling maps, then contracted against the
    /// per-parameter derivative lifts.
    pub fn loss_and_gradient(&self, psi0: &Array1<Complex<T>>, label: u8) -> Result<(T, Vec<T>)> {
        let data = self.forward_data(psi0)?;
        let two = T::one() + T::one();
        let target = [
            if label == 0 { T::one() } else { T::zero() },
            if label == 1 { T::one() } else { T::zero() },
        ];
        let loss = (data.probs[0] - target[0]).powi(2) + (data.probs[1] - target[1]).powi(2);
        let dldp = [
            two * (data.probs[0] - target[0]),
            two * (data.probs[1] - target[1]),
        ];

        // Adjoint of the loss with respect to the detection distribution q:
        // dp_c/dq_j = (mask_c[j] - p_c * mult_j) / total on coincidence
        // events, 0 elsewhere.
        let n2 = self.dense_basis.len();
        let mut g = Array1::<T>::zeros(n2);
        for (t, &idx) in self.cf.iter().enumerate() {
            let m0 = self.masks[0][t];
            let m1 = self.masks[1][t];
            let mult = T::from_u32(u32::from(m0) + u32::from(m1)).unwrap();
            let mut v = T::zero();
            if m0 {
                v = v + dldp[0];
            }
            if m1 {
                v = v + dldp[1];
            }
            v = v - (dldp[0] * data.probs[0] + dldp[1] * data.probs[1]) * mult;
            g[idx] = v / data.total;
        }

        let dagger = self
            .dense_lift_dagger
            .as_ref()
            .expect("compiled without gradients");
        let n_conv = self.conv_dlifts.len();
        let mut grad = vec![T::zero(); n_conv + self.dense_dlifts.len()];

        // Dense parameters: dL/dtheta_j = 2 Re tr(W_j Z) with
        // Z = sum_b phi_b (g . chi_b)^dagger.
        let mut z = Array2::<Complex<T>>::zeros((n2, n2));
        let mut weighted: Vec<Array1<Complex<T>>> = Vec::with_capacity(data.chis.len());
        for (phi, chi) in data.phis.iter().zip(&data.chis) {
            let gchi = Array1::from_shape_fn(n2, |i| chi[i] * g[i]);
            for a in 0..n2 {
                let pa = phi[a];
                if pa.norm_sqr() > T::zero() {
                    for i in 0..n2 {
                        z[(a, i)] = z[(a, i)] + pa * gchi[i].conj();
                    }
                }
            }
            weighted.push(gchi);
        }
        for (j, wj) in self.dense_dlifts.iter().enumerate() {
            let mut acc = Complex::new(T::zero(), T::zero());
            for i in 0..n2 {
                for a in 0..n2 {
                    acc = acc + wj[(i, a)] * z[(a, i)];
                }
            }
            grad[n_conv + j] = two * acc.re;
        }

        // Conv parameters: pull the weighted outputs back through the dense
        // unitary and the pooling maps, then contract with the derivative
        // lifts: dL/dtheta_c = 2 Re <y, A_c psi0>.
        let n1 = self.in_basis.len();
        let mut y = Array1::<Complex<T>>::zeros(n1);
        for (pairs, gchi) in self.branch_pairs.iter().zip(&weighted) {
            let wb = dagger.dot(gchi);
            for &(i, o) in pairs {
                y[i] = y[i] + wb[o];
            }
        }
        for (c, ac) in self.conv_dlifts.iter().enumerate() {
            let dpsi1 = ac.dot(psi0);
            let mut acc = Complex::new(T::zero(), T::zero());
            for i in 0..n1 {
                acc = acc + y[i].conj() * dpsi1[i];
            }
            grad[c] = two * acc.re;
        }

        Ok((loss, grad))
    }
}

/// Squared-error loss against the one-hot label.
pub fn mse_loss<T: Real>(pred: [T; 2], label: u8) -> T {
    let t0 = if label == 0 { T::one() } else { T::zero() };
    let t1 = if label == 1 { T::one() } else { T::zero() };
    (pred[0] - t0).powi(2) + (pred[1] - t1).powi(2)
}

/// Predicted label; ties go to label 0.
pub fn predict<T: Real>(probs: [T; 2]) -> u8 {
    u8::from(probs[0] < probs[1])
}

/// Full pipeline on one sample: loader, convolution, pooling channel, dense
/// layer, measurement, readout.
pub fn forward<T: Real>(model: &PqcnnModel<T>, sample: &Sample<T>) -> Result<[T; 2]> {
    let compiled = model.compile()?;
    let psi0 = encode_sample(model, sample, &compiled.in_basis)?;
    compiled.probabilities(psi0.amplitudes())
}

/// Layer-by-layer states of the pipeline for one sample, for inspection.
pub struct StageTrace<T: Real> {
    pub qdl: PureState<T>,
    pub conv: PureState<T>,
    pub pooled: crate::fock::MixedState<T>,
    pub dense: crate::fock::MixedState<T>,
    pub distribution: Array1<T>,
    pub class_probs: [T; 2],
}

/// Run the pipeline through the layer APIs (no compiled fast path), keeping
/// every intermediate state.
pub fn run_stages<T: Real>(model: &PqcnnModel<T>, sample: &Sample<T>) -> Result<StageTrace<T>> {
    model.validate()?;
    let in_basis = SubspaceBasis::enumerate(model.layout.modes(), model.layout.register_count())?;
    let qdl = encode_sample(model, sample, &in_basis)?;
    let conv_u = model.conv.compose(model.conv_params())?;
    let conv = lift(&conv_u, &in_basis)?.apply_pure(&qdl)?;
    let pooled = pooling_channel(&conv, &model.layout, &model.pooling)?;
    let dense = dense_layer(&pooled, &model.dense, model.dense_params(), model.alpha)?;
    let distribution = measure_distribution(&dense);
    let class_probs = readout(&distribution.view(), &model.readout, dense.basis())?;
    Ok(StageTrace {
        qdl,
        conv,
        pooled,
        dense,
        distribution,
        class_probs,
    })
}

/// Mean loss and exact mean gradient over a batch of samples.
pub fn gradient<T: Real>(model: &PqcnnModel<T>, batch: &[Sample<T>]) -> Result<(T, Vec<T>)> {
    assert!(!batch.is_empty(), "gradient needs a non-empty batch");
    let compiled = model.compile_with_gradient()?;
    let encoded: Vec<(Array1<Complex<T>>, u8)> = batch
        .iter()
        .map(|s| {
            encode_sample(model, s, &compiled.in_basis)
                .map(|psi| (psi.amplitudes().clone(), s.label))
        })
        .collect::<Result<_>>()?;
    gradient_encoded(&compiled, &encoded)
}

fn gradient_encoded<T: Real>(
    compiled: &CompiledModel<T>,
    encoded: &[(Array1<Complex<T>>, u8)],
) -> Result<(T, Vec<T>)> {
    let per_sample: Vec<Result<(T, Vec<T>)>> = encoded
        .par_iter()
        .map(|(psi0, label)| compiled.loss_and_gradient(psi0, *label))
        .collect();
    let n = T::from_usize(encoded.len()).unwrap();
    let mut loss = T::zero();
    let mut grad: Option<Vec<T>> = None;
    for r in per_sample {
        let (l, g) = r?;
        loss = loss + l;
        match &mut grad {
            None => grad = Some(g),
            Some(acc) => {
                for (a, v) in acc.iter_mut().zip(g) {
                    *a = *a + v;
                }
            }
        }
    }
    let mut grad = grad.expect("non-empty batch");
    for g in grad.iter_mut() {
        *g = *g / n;
    }
    Ok((loss / n, grad))
}

/// Central-finite-difference gradient of the mean batch loss; the
/// independent arbiter for the analytic gradient.
pub fn finite_diff_gradient<T: Real>(
    model: &PqcnnModel<T>,
    batch: &[Sample<T>],
    step: f64,
) -> Result<(T, Vec<T>)> {
    let compiled = model.compile()?;
    let encoded: Vec<(Array1<Complex<T>>, u8)> = batch
        .iter()
        .map(|s| {
            encode_sample(model, s, &compiled.in_basis)
                .map(|psi| (psi.amplitudes().clone(), s.label))
        })
        .collect::<Result<_>>()?;
    let loss_at = |params: &[T]| -> Result<T> {
        let mut m = model.clone();
        m.params = params.to_vec();
        let c = m.compile()?;
        let mut total = T::zero();
        for (psi0, label) in &encoded {
            total = total + mse_loss(c.probabilities(psi0)?, *label);
        }
        Ok(total / T::from_usize(encoded.len()).unwrap())
    };
    let h = T::from_f64(step).unwrap();
    let base = loss_at(&model.params)?;
    let mut grad = Vec::with_capacity(model.params.len());
    for i in 0..model.params.len() {
        let mut plus = model.params.clone();
        let mut minus = model.params.clone();
        plus[i] = plus[i] + h;
        minus[i] = minus[i] - h;
        grad.push((loss_at(&plus)? - loss_at(&minus)?) / (h + h));
    }
    Ok((base, grad))
}

/// ADAM moment state; weight decay is decoupled (applied directly to the
/// parameters, not folded into the gradient).
#[derive(Clone, Debug)]
pub struct AdamW<T: Real> {
    m: Vec<T>,
    v: Vec<T>,
    t: i32,
    pub beta1: T,
    pub beta2: T,
    pub epsilon: T,
}

impl<T: Real> AdamW<T> {
    pub fn new(n: usize) -> Self {
        AdamW {
            m: vec![T::zero(); n],
            v: vec![T::zero(); n],
            t: 0,
            beta1: T::from_f64(0.9).unwrap(),
            beta2: T::from_f64(0.999).unwrap(),
            epsilon: T::from_f64(1e-8).unwrap(),
        }
    }

    pub fn step(&mut self, params: &mut [T], grad: &[T], lr: T, weight_decay: T) {
        assert_eq!(params.len(), grad.len());
        assert_eq!(params.len(), self.m.len());
        self.t += 1;
        let b1c = T::one() - self.beta1.powi(self.t);
        let b2c = T::one() - self.beta2.powi(self.t);
        for i in 0..params.len() {
            self.m[i] = self.beta1 * self.m[i] + (T::one() - self.beta1) * grad[i];
            self.v[i] = self.beta2 * self.v[i] + (T::one() - self.beta2) * grad[i] * grad[i];
            let m_hat = self.m[i] / b1c;
            let v_hat = self.v[i] / b2c;
            params[i] = params[i]
                - lr * (m_hat / (v_hat.sqrt() + self.epsilon))
                - lr * weight_decay * params[i];
        }
    }
}

/// How the training gradient is computed.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GradientMethod {
    Analytic,
    FiniteDifference,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    pub weight_decay: f64,
    /// Number of random initial parameter sets.
    pub seeds: usize,
    pub base_seed: u64,
    /// Samples per optimizer step; `None` runs full-batch epochs.
    pub batch_size: Option<usize>,
    pub gradient: GradientMethod,
    /// Angles initialize uniformly in `[0, init_max_angle)`.
    pub init_max_angle: f64,
    pub shuffle_each_epoch: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 30,
            learning_rate: 1e-3,
            weight_decay: 1e-4,
            seeds: 5,
            base_seed: 0,
            batch_size: Some(1),
            gradient: GradientMethod::Analytic,
            init_max_angle: std::f64::consts::FRAC_PI_2,
            shuffle_each_epoch: true,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub train_acc: f64,
    pub test_loss: f64,
    pub test_acc: f64,
}

/// Two-by-two prediction counts, rows = predicted label, columns = true
/// label (the coincidence-table orientation).
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct Confusion {
    pub counts: [[usize; 2]; 2],
}

impl Confusion {
    pub fn tally(preds: &[u8], labels: &[u8]) -> Self {
        assert_eq!(preds.len(), labels.len());
        let mut counts = [[0usize; 2]; 2];
        for (&p, &t) in preds.iter().zip(labels) {
            counts[p as usize][t as usize] += 1;
        }
        Confusion { counts }
    }

    pub fn accuracy(&self) -> f64 {
        let correct = self.counts[0][0] + self.counts[1][1];
        let total: usize = self.counts.iter().flatten().sum();
        if total == 0 {
            0.0
        } else {
            correct as f64 / total as f64
        }
    }

    /// Each column normalized over the number of samples of that true class.
    pub fn normalized_columns(&self) -> [[f64; 2]; 2] {
        let mut out = [[0.0; 2]; 2];
        for t in 0..2 {
            let total = (self.counts[0][t] + self.counts[1][t]) as f64;
            if total > 0.0 {
                out[0][t] = self.counts[0][t] as f64 / total;
                out[1][t] = self.counts[1][t] as f64 / total;
            }
        }
        out
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SeedRun<T: Real> {
    pub seed: u64,
    pub epochs: Vec<EpochRecord>,
    pub model: PqcnnModel<T>,
    pub diverged: bool,
    pub confusion: Confusion,
}

impl<T: Real> SeedRun<T> {
    pub fn final_record(&self) -> &EpochRecord {
        self.epochs.last().expect("at least the epoch-0 record")
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TrainReport<T: Real> {
    pub runs: Vec<SeedRun<T>>,
    pub mean_train_acc: f64,
    pub std_train_acc: f64,
    pub mean_test_acc: f64,
    pub std_test_acc: f64,
    pub best_seed: u64,
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

fn evaluate<T: Real>(
    compiled: &CompiledModel<T>,
    encoded: &[(Array1<Complex<T>>, u8)],
) -> Result<(f64, f64, Vec<u8>)> {
    let results: Vec<Result<(T, u8)>> = encoded
        .par_iter()
        .map(|(psi0, label)| {
            let p = compiled.probabilities(psi0)?;
            Ok((mse_loss(p, *label), predict(p)))
        })
        .collect();
    let mut loss = T::zero();
    let mut preds = Vec::with_capacity(encoded.len());
    let mut correct = 0usize;
    for (r, (_, label)) in results.into_iter().zip(encoded) {
        let (l, p) = r?;
        loss = loss + l;
        if p == *label {
            correct += 1;
        }
        preds.push(p);
    }
    let n = encoded.len() as f64;
    Ok((loss.to_f64().unwrap() / n, correct as f64 / n, preds))
}

/// Train one random initialization.
pub fn train_seed<T: Real>(
    arch: &Architecture,
    data: &DatasetSplit<T>,
    cfg: &TrainConfig,
    seed: u64,
) -> Result<SeedRun<T>> {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut model = build_model::<T>(arch, cfg.init_max_angle, &mut rng)?;
    let in_basis = SubspaceBasis::enumerate(model.layout.modes(), model.layout.register_count())?;
    let encode_all = |samples: &[Sample<T>]| -> Result<Vec<(Array1<Complex<T>>, u8)>> {
        samples
            .iter()
            .map(|s| {
                encode_sample(&model, s, &in_basis).map(|psi| (psi.amplitudes().clone(), s.label))
            })
            .collect()
    };
    let train_enc = encode_all(&data.train)?;
    let test_enc = encode_all(&data.test)?;

    let mut adam = AdamW::<T>::new(model.params.len());
    let lr = T::from_f64(cfg.learning_rate).unwrap();
    let wd = T::from_f64(cfg.weight_decay).unwrap();
    let fd_step = 1e-5;

    let mut epochs = Vec::with_capacity(cfg.epochs + 1);
    let record = |model: &PqcnnModel<T>, epoch: usize| -> Result<(EpochRecord, Vec<u8>)> {
        let compiled = model.compile()?;
        let (train_loss, train_acc, _) = evaluate(&compiled, &train_enc)?;
        let (test_loss, test_acc, preds) = evaluate(&compiled, &test_enc)?;
        Ok((
            EpochRecord {
                epoch,
                train_loss,
                train_acc,
                test_loss,
                test_acc,
            },
            preds,
        ))
    };
    let (rec0, mut test_preds) = record(&model, 0)?;
    epochs.push(rec0);

    let n_train = train_enc.len();
    let batch = cfg.batch_size.unwrap_or(n_train).max(1).min(n_train);
    let mut order: Vec<usize> = (0..n_train).collect();
    let mut diverged = false;

    'training: for epoch in 1..=cfg.epochs {
        if cfg.shuffle_each_epoch {
            order.shuffle(&mut rng);
        }
        for chunk in order.chunks(batch) {
            let step_result: Result<(T, Vec<T>)> = match cfg.gradient {
                GradientMethod::Analytic => {
                    let compiled = model.compile_with_gradient()?;
                    let batch_enc: Vec<(Array1<Complex<T>>, u8)> =
                        chunk.iter().map(|&i| train_enc[i].clone()).collect();
                    gradient_encoded(&compiled, &batch_enc)
                }
                GradientMethod::FiniteDifference => {
                    let batch_samples: Vec<Sample<T>> =
                        chunk.iter().map(|&i| data.train[i].clone()).collect();
                    finite_diff_gradient(&model, &batch_samples, fd_step)
                }
            };
            let (loss, grad) = step_result?;
            if !loss.is_finite() || grad.iter().any(|g| !g.is_finite()) {
                diverged = true;
                break 'training;
            }
            adam.step(&mut model.params, &grad, lr, wd);
            if model.params.iter().any(|p| !p.is_finite()) {
                diverged = true;
                break 'training;
            }
        }
        let (rec, preds) = record(&model, epoch)?;
        test_preds = preds;
        epochs.push(rec);
    }

    let labels: Vec<u8> = data.test.iter().map(|s| s.label).collect();
    let confusion = Confusion::tally(&test_preds, &labels);
    Ok(SeedRun {
        seed,
        epochs,
        model,
        diverged,
        confusion,
    })
}

/// Train `cfg.seeds` random initializations and aggregate the final
/// accuracies (mean and sample standard deviation over non-diverged seeds).
pub fn train<T: Real>(
    arch: &Architecture,
    data: &DatasetSplit<T>,
    cfg: &TrainConfig,
) -> Result<TrainReport<T>> {
    assert!(cfg.seeds >= 1, "at least one seed");
    let mut runs = Vec::with_capacity(cfg.seeds);
    for i in 0..cfg.seeds {
        runs.push(train_seed(arch, data, cfg, cfg.base_seed + i as u64)?);
    }
    let finished: Vec<&SeedRun<T>> = runs.iter().filter(|r| !r.diverged).collect();
    let train_accs: Vec<f64> = finished
        .iter()
        .map(|r| r.final_record().train_acc)
        .collect();
    let test_accs: Vec<f64> = finished.iter().map(|r| r.final_record().test_acc).collect();
    let (mean_train_acc, std_train_acc) = mean_std(&train_accs);
    let (mean_test_acc, std_test_acc) = mean_std(&test_accs);
    let best_seed = finished
        .iter()
        .max_by(|a, b| {
            a.final_record()
                .test_acc
                .partial_cmp(&b.final_record().test_acc)
                .unwrap()
        })
        .map(|r| r.seed)
        .unwrap_or(cfg.base_seed);
    Ok(TrainReport {
        runs,
        mean_train_acc,
        std_train_acc,
        mean_test_acc,
        std_test_acc,
        best_seed,
    })
}

/// Per-epoch metrics in CSV form (deterministic formatting).
pub fn metrics_csv(records: &[EpochRecord]) -> String {
    let mut out = String::from("epoch,train_loss,train_acc,test_loss,test_acc\n");
    for r in records {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            r.epoch, r.train_loss, r.train_acc, r.test_loss, r.test_acc
        ));
    }
    out
}

/// Readout-layer training strategy.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ReadoutStrategy {
    /// Exhaustive search over clusters of collision-free configurations with
    /// floor(n/2) or ceil(n/2) elements assigned to label 0.
    Clusters,
    /// Exhaustive search over mode pairs assigned to label 0 (the complement
    /// modes form the label-1 group).
    ModePairs,
}

#[derive(Clone, Debug)]
pub struct ReadoutSearch {
    pub binning: ReadoutBinning,
    pub train_accuracy: f64,
    pub candidates_evaluated: usize,
}

const CLUSTER_SEARCH_CAP: usize = 5_000_000;

fn combinations(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    if k == 0 || k > n {
        return out;
    }
    let mut comb: Vec<usize> = (0..k).collect();
    loop {
        out.push(comb.clone());
        // Advance to the lexicographically next combination.
        let mut i = k;
        loop {
            if i == 0 {
                return out;
            }
            i -= 1;
            if comb[i] != i + n - k {
                break;
            }
        }
        comb[i] += 1;
        for j in i + 1..k {
            comb[j] = comb[j - 1] + 1;
        }
    }
}

fn binom(n: usize, k: usize) -> usize {
    crate::fock::subspace_dimension(n - k + 1, k) as usize
}

/// Search for the binning of the dense layer's output events that maximizes
/// the training accuracy over precomputed per-sample output distributions.
/// Ties keep the earliest candidate in enumeration order.
pub fn train_readout<T: Real>(
    dists: &[Array1<T>],
    labels: &[u8],
    strategy: ReadoutStrategy,
    basis: &SubspaceBasis,
) -> Result<ReadoutSearch> {
    assert_eq!(dists.len(), labels.len());
    assert!(!dists.is_empty(), "readout search needs samples");
    let cf = collision_free_indices(basis);
    match strategy {
        ReadoutStrategy::Clusters => {
            // Per-sample coincidence mass, renormalized: label 0 wins when
            // the assigned subset carries more than half of it.
            let vectors: Vec<Vec<f64>> = dists
                .iter()
                .map(|d| {
                    let total: T = cf.iter().map(|&i| d[i]).sum();
                    cf.iter()
                        .map(|&i| (d[i] / total).to_f64().unwrap())
                        .collect()
                })
                .collect();
            let n = cf.len();
            let low = n / 2;
            let high = n - low;
            let mut sizes = vec![low];
            if high != low {
                sizes.push(high);
            }
            let total_candidates: usize = sizes.iter().map(|&k| binom(n, k)).sum();
            if total_candidates > CLUSTER_SEARCH_CAP {
                return Err(Error::Capacity {
                    modes: basis.modes(),
                    photons: basis.photons(),
                    size: total_candidates as u128,
                    cap: CLUSTER_SEARCH_CAP,
                });
            }
            let mut best: Option<(f64, Vec<usize>)> = None;
            let mut evaluated = 0usize;
            for &k in &sizes {
                for subset in combinations(n, k) {
                    evaluated += 1;
                    let mut correct = 0usize;
                    for (v, &label) in vectors.iter().zip(labels) {
                        let mass0: f64 = subset.iter().map(|&t| v[t]).sum();
                        let pred = u8::from(mass0 < 0.5);
                        if pred == label {
                            correct += 1;
                        }
                    }
                    let acc = correct as f64 / labels.len() as f64;
                    if best.as_ref().map_or(true, |(b, _)| acc > *b) {
                        best = Some((acc, subset));
                    }
                }
            }
            let (train_accuracy, label0) = best.expect("at least one candidate");
            Ok(ReadoutSearch {
                binning: ReadoutBinning::Clusters { label0 },
                train_accuracy,
                candidates_evaluated: evaluated,
            })
        }
        ReadoutStrategy::ModePairs => {
            let m = basis.modes();
            let mut best: Option<(f64, ReadoutBinning)> = None;
            let mut evaluated = 0usize;
            for a in 0..m {
                for b in (a + 1)..m {
                    evaluated += 1;
                    let binning = ReadoutBinning::ModeGroups {
                        group0: vec![a, b],
                        group1: (0..m).filter(|&x| x != a && x != b).collect(),
                    };
                    let mut correct = 0usize;
                    for (d, &label) in dists.iter().zip(labels) {
                        let p = readout(&d.view(), &binning, basis)?;
                        if predict(p) == label {
                            correct += 1;
                        }
                    }
                    let acc = correct as f64 / labels.len() as f64;
                    if best.as_ref().map_or(true, |(bacc, _)| acc > *bacc) {
                        best = Some((acc, binning));
                    }
                }
            }
            let (train_accuracy, binning) = best.expect("at least one pair");
            Ok(ReadoutSearch {
                binning,
                train_accuracy,
                candidates_evaluated: evaluated,
            })
        }
    }
}

/// Overlap `S = sum_x sqrt(p(x) q(x))` between two distributions; 1 iff they
/// coincide.
pub fn similarity<T: Real>(p: &[T], q: &[T]) -> Result<T> {
    if p.len() != q.len() {
        return Err(Error::Dimension {
            what: "similarity operands",
            expected: p.len(),
            got: q.len(),
        });
    }
    let tol = T::from_f64(1e-6).unwrap();
    for d in [p, q] {
        let total: T = d.iter().copied().sum();
        if (total - T::one()).abs() > tol {
            return Err(Error::NotNormalized {
                deviation: (total - T::one()).abs().to_f64().unwrap_or(f64::NAN),
            });
        }
    }
    Ok(p.iter()
        .zip(q)
        .map(|(&a, &b)| (a.max(T::zero()) * b.max(T::zero())).sqrt())
        .sum())
}
