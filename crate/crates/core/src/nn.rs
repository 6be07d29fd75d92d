//! The fixed DQN function approximator.
//!
//! Layout of the network (all 32-bit floats):
//!
//! ```text
//! input   4 x 21 x 21
//! conv1   32 filters 5x5, stride 2   -> 32 x 9 x 9, ReLU
//! conv2   64 filters 3x3, stride 1   -> 64 x 7 x 7, ReLU
//! fc1     3136 -> 256, ReLU
//! head    256 -> 3, linear
//! ```
//!
//! Convolutions are lowered to matrix products (im2col). Internally the
//! activations of a batch are stored channel-major, `[channel][sample][pixel]`,
//! so that each layer is a single GEMM over the whole batch.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

pub const FRAMES: usize = 4;
pub const GRID: usize = 21;
pub const FRAME_LEN: usize = GRID * GRID;
/// Length of one flattened observation.
pub const OBS_LEN: usize = FRAMES * FRAME_LEN;

pub const CONV1_OUT: usize = 32;
pub const CONV1_KERNEL: usize = 5;
pub const CONV1_STRIDE: usize = 2;
pub const CONV1_SIDE: usize = (GRID - CONV1_KERNEL) / CONV1_STRIDE + 1;
const CONV1_PIX: usize = CONV1_SIDE * CONV1_SIDE;
const CONV1_FAN_IN: usize = FRAMES * CONV1_KERNEL * CONV1_KERNEL;

pub const CONV2_OUT: usize = 64;
pub const CONV2_KERNEL: usize = 3;
pub const CONV2_SIDE: usize = CONV1_SIDE - CONV2_KERNEL + 1;
const CONV2_PIX: usize = CONV2_SIDE * CONV2_SIDE;
const CONV2_FAN_IN: usize = CONV1_OUT * CONV2_KERNEL * CONV2_KERNEL;

pub const FLAT: usize = CONV2_OUT * CONV2_PIX;
pub const HIDDEN: usize = 256;
pub const ACTIONS: usize = 3;

pub const TENSOR_COUNT: usize = 8;

/// Identifies one learnable tensor of the network.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum TensorId {
    Conv1Weight,
    Conv1Bias,
    Conv2Weight,
    Conv2Bias,
    Fc1Weight,
    Fc1Bias,
    HeadWeight,
    HeadBias,
}

impl TensorId {
    pub const ALL: [TensorId; TENSOR_COUNT] = [
        TensorId::Conv1Weight,
        TensorId::Conv1Bias,
        TensorId::Conv2Weight,
        TensorId::Conv2Bias,
        TensorId::Fc1Weight,
        TensorId::Fc1Bias,
        TensorId::HeadWeight,
        TensorId::HeadBias,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    /// Name used in checkpoint files.
    pub fn name(self) -> &'static str {
        match self {
            TensorId::Conv1Weight => "conv1.weight",
            TensorId::Conv1Bias => "conv1.bias",
            TensorId::Conv2Weight => "conv2.weight",
            TensorId::Conv2Bias => "conv2.bias",
            TensorId::Fc1Weight => "fc1.weight",
            TensorId::Fc1Bias => "fc1.bias",
            TensorId::HeadWeight => "head.weight",
            TensorId::HeadBias => "head.bias",
        }
    }

    pub fn from_name(name: &str) -> Option<TensorId> {
        TensorId::ALL.into_iter().find(|t| t.name() == name)
    }

    pub fn shape(self) -> &'static [usize] {
        match self {
            TensorId::Conv1Weight => &[CONV1_OUT, FRAMES, CONV1_KERNEL, CONV1_KERNEL],
            TensorId::Conv1Bias => &[CONV1_OUT],
            TensorId::Conv2Weight => &[CONV2_OUT, CONV1_OUT, CONV2_KERNEL, CONV2_KERNEL],
            TensorId::Conv2Bias => &[CONV2_OUT],
            TensorId::Fc1Weight => &[HIDDEN, FLAT],
            TensorId::Fc1Bias => &[HIDDEN],
            TensorId::HeadWeight => &[ACTIONS, HIDDEN],
            TensorId::HeadBias => &[ACTIONS],
        }
    }

    pub fn len(self) -> usize {
        self.shape().iter().product()
    }

    pub fn is_bias(self) -> bool {
        matches!(
            self,
            TensorId::Conv1Bias | TensorId::Conv2Bias | TensorId::Fc1Bias | TensorId::HeadBias
        )
    }

    /// Head tensors are the ones replaced on transfer; everything else is the body.
    pub fn is_head(self) -> bool {
        matches!(self, TensorId::HeadWeight | TensorId::HeadBias)
    }

    /// Fan-in of the layer this tensor belongs to.
    pub fn fan_in(self) -> usize {
        match self {
            TensorId::Conv1Weight | TensorId::Conv1Bias => CONV1_FAN_IN,
            TensorId::Conv2Weight | TensorId::Conv2Bias => CONV2_FAN_IN,
            TensorId::Fc1Weight | TensorId::Fc1Bias => FLAT,
            TensorId::HeadWeight | TensorId::HeadBias => HIDDEN,
        }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum NnError {
    #[error("non-finite loss {loss}")]
    NonFiniteLoss { loss: f32 },
    #[error("tensor {name}: expected {expected} values, got {actual}")]
    ShapeMismatch {
        name: &'static str,
        expected: usize,
        actual: usize,
    },
}

fn zeroed_tensors() -> [Vec<f32>; TENSOR_COUNT] {
    TensorId::ALL.map(|t| vec![0.0; t.len()])
}

/// All learnable tensors of the network.
#[derive(Clone, Debug, PartialEq)]
pub struct NetworkParams {
    tensors: [Vec<f32>; TENSOR_COUNT],
}

impl NetworkParams {
    pub fn zeros() -> Self {
        NetworkParams {
            tensors: zeroed_tensors(),
        }
    }

    /// Builds parameters from raw tensors, checking every length.
    pub fn from_tensors(tensors: [Vec<f32>; TENSOR_COUNT]) -> Result<Self, NnError> {
        for id in TensorId::ALL {
            let actual = tensors[id.index()].len();
            if actual != id.len() {
                return Err(NnError::ShapeMismatch {
                    name: id.name(),
                    expected: id.len(),
                    actual,
                });
            }
        }
        Ok(NetworkParams { tensors })
    }

    pub fn get(&self, id: TensorId) -> &[f32] {
        &self.tensors[id.index()]
    }

    pub fn get_mut(&mut self, id: TensorId) -> &mut [f32] {
        &mut self.tensors[id.index()]
    }

    pub fn iter(&self) -> impl Iterator<Item = (TensorId, &[f32])> {
        TensorId::ALL
            .into_iter()
            .map(move |id| (id, self.tensors[id.index()].as_slice()))
    }

    pub fn num_parameters(&self) -> usize {
        self.tensors.iter().map(Vec::len).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.tensors.iter().flatten().all(|v| v.is_finite())
    }

    /// Bitwise equality of one tensor, used for frozen-layer checks.
    pub fn tensor_bits_eq(&self, other: &NetworkParams, id: TensorId) -> bool {
        self.get(id)
            .iter()
            .zip(other.get(id))
            .all(|(a, b)| a.to_bits() == b.to_bits())
    }

    pub fn bits_eq(&self, other: &NetworkParams) -> bool {
        TensorId::ALL.iter().all(|&id| self.tensor_bits_eq(other, id))
    }
}

/// Gradients of the loss with respect to every [`NetworkParams`] tensor.
#[derive(Clone, Debug, PartialEq)]
pub struct GradientBuffer {
    tensors: [Vec<f32>; TENSOR_COUNT],
}

impl GradientBuffer {
    pub fn zeros() -> Self {
        GradientBuffer {
            tensors: zeroed_tensors(),
        }
    }

    pub fn get(&self, id: TensorId) -> &[f32] {
        &self.tensors[id.index()]
    }

    pub fn get_mut(&mut self, id: TensorId) -> &mut [f32] {
        &mut self.tensors[id.index()]
    }

    /// Global L2 norm across all tensors.
    pub fn norm(&self) -> f32 {
        self.tensors
            .iter()
            .flatten()
            .map(|g| f64::from(*g) * f64::from(*g))
            .sum::<f64>()
            .sqrt() as f32
    }

    /// Rescales the whole buffer so its global norm is at most `max_norm`.
    pub fn clip_norm(&mut self, max_norm: f32) {
        let norm = self.norm();
        if norm > max_norm && norm > 0.0 {
            let scale = max_norm / norm;
            self.tensors.iter_mut().flatten().for_each(|g| *g *= scale);
        }
    }
}

/// Per-tensor trainable flags.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct TrainableMask([bool; TENSOR_COUNT]);

impl TrainableMask {
    pub fn all() -> Self {
        TrainableMask([true; TENSOR_COUNT])
    }

    pub fn head_only() -> Self {
        TrainableMask(TensorId::ALL.map(TensorId::is_head))
    }

    pub fn is_trainable(&self, id: TensorId) -> bool {
        self.0[id.index()]
    }

    pub fn frozen_count(&self) -> usize {
        self.0.iter().filter(|t| !**t).count()
    }

    /// True when every body tensor is frozen, so backprop can stop at the head.
    fn body_frozen(&self) -> bool {
        TensorId::ALL
            .iter()
            .filter(|t| !t.is_head())
            .all(|&t| !self.is_trainable(t))
    }
}

impl Default for TrainableMask {
    fn default() -> Self {
        TrainableMask::all()
    }
}

fn he_uniform_fill(values: &mut [f32], fan_in: usize, rng: &mut ChaCha8Rng) {
    let bound = (6.0 / fan_in as f64).sqrt() as f32;
    for v in values {
        *v = rng.gen_range(-bound..bound);
    }
}

/// He-uniform weights (bound `sqrt(6 / fan_in)`) and zero biases.
pub fn init_params(seed: u64) -> NetworkParams {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut params = NetworkParams::zeros();
    for id in TensorId::ALL {
        if !id.is_bias() {
            he_uniform_fill(params.get_mut(id), id.fan_in(), &mut rng);
        }
    }
    params
}

/// Replaces the head with a fresh He-uniform initialisation drawn from `seed`.
pub fn reinit_head(params: &mut NetworkParams, seed: u64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for id in [TensorId::HeadWeight, TensorId::HeadBias] {
        if id.is_bias() {
            params.get_mut(id).fill(0.0);
        } else {
            he_uniform_fill(params.get_mut(id), id.fan_in(), &mut rng);
        }
    }
}

/// C = A * B + beta * C with arbitrary strides on A and B and a row-major C.
#[allow(clippy::too_many_arguments)]
fn gemm(
    m: usize,
    k: usize,
    n: usize,
    a: &[f32],
    a_strides: (usize, usize),
    b: &[f32],
    b_strides: (usize, usize),
    beta: f32,
    c: &mut [f32],
) {
    let (rsa, csa) = a_strides;
    let (rsb, csb) = b_strides;
    if m == 0 || n == 0 {
        return;
    }
    assert!(k == 0 || a.len() > (m - 1) * rsa + (k - 1) * csa);
    assert!(k == 0 || b.len() > (k - 1) * rsb + (n - 1) * csb);
    assert!(c.len() >= m * n);
    // SAFETY: the asserts above bound every index touched by the kernel.
    unsafe {
        matrixmultiply::sgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            rsa as isize,
            csa as isize,
            b.as_ptr(),
            rsb as isize,
            csb as isize,
            beta,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

/// Intermediate activations of one forward pass, kept for backprop.
struct Activations {
    batch: usize,
    cols1: Vec<f32>,
    act1: Vec<f32>,
    cols2: Vec<f32>,
    act2: Vec<f32>,
    flat: Vec<f32>,
    hidden: Vec<f32>,
    q: Vec<f32>,
}

fn im2col_conv1(input: &[f32], batch: usize) -> Vec<f32> {
    let cols_n = batch * CONV1_PIX;
    let mut cols = vec![0.0f32; CONV1_FAN_IN * cols_n];
    for c in 0..FRAMES {
        for ky in 0..CONV1_KERNEL {
            for kx in 0..CONV1_KERNEL {
                let row = (c * CONV1_KERNEL + ky) * CONV1_KERNEL + kx;
                let dst = &mut cols[row * cols_n..(row + 1) * cols_n];
                for n in 0..batch {
                    let plane = &input[n * OBS_LEN + c * FRAME_LEN..][..FRAME_LEN];
                    for oy in 0..CONV1_SIDE {
                        let src_row = &plane[(oy * CONV1_STRIDE + ky) * GRID..];
                        let out = &mut dst[n * CONV1_PIX + oy * CONV1_SIDE..][..CONV1_SIDE];
                        for (ox, o) in out.iter_mut().enumerate() {
                            *o = src_row[ox * CONV1_STRIDE + kx];
                        }
                    }
                }
            }
        }
    }
    cols
}

fn im2col_conv2(act1: &[f32], batch: usize) -> Vec<f32> {
    let in_n = batch * CONV1_PIX;
    let cols_n = batch * CONV2_PIX;
    let mut cols = vec![0.0f32; CONV2_FAN_IN * cols_n];
    for c in 0..CONV1_OUT {
        for ky in 0..CONV2_KERNEL {
            for kx in 0..CONV2_KERNEL {
                let row = (c * CONV2_KERNEL + ky) * CONV2_KERNEL + kx;
                let dst = &mut cols[row * cols_n..(row + 1) * cols_n];
                for n in 0..batch {
                    let plane = &act1[c * in_n + n * CONV1_PIX..][..CONV1_PIX];
                    for oy in 0..CONV2_SIDE {
                        let src = &plane[(oy + ky) * CONV1_SIDE + kx..][..CONV2_SIDE];
                        dst[n * CONV2_PIX + oy * CONV2_SIDE..][..CONV2_SIDE].copy_from_slice(src);
                    }
                }
            }
        }
    }
    cols
}

/// Scatter-adds conv2 column gradients back onto the conv1 activation grid.
fn col2im_conv2(dcols: &[f32], batch: usize) -> Vec<f32> {
    let in_n = batch * CONV1_PIX;
    let cols_n = batch * CONV2_PIX;
    let mut dact = vec![0.0f32; CONV1_OUT * in_n];
    for c in 0..CONV1_OUT {
        for ky in 0..CONV2_KERNEL {
            for kx in 0..CONV2_KERNEL {
                let row = (c * CONV2_KERNEL + ky) * CONV2_KERNEL + kx;
                let src = &dcols[row * cols_n..(row + 1) * cols_n];
                for n in 0..batch {
                    let plane = &mut dact[c * in_n + n * CONV1_PIX..][..CONV1_PIX];
                    for oy in 0..CONV2_SIDE {
                        let s = &src[n * CONV2_PIX + oy * CONV2_SIDE..][..CONV2_SIDE];
                        let d = &mut plane[(oy + ky) * CONV1_SIDE + kx..][..CONV2_SIDE];
                        for (d, s) in d.iter_mut().zip(s) {
                            *d += *s;
                        }
                    }
                }
            }
        }
    }
    dact
}

fn add_channel_bias_relu(z: &mut [f32], bias: &[f32], per_channel: usize) {
    for (chunk, b) in z.chunks_exact_mut(per_channel).zip(bias) {
        for v in chunk {
            *v = (*v + b).max(0.0);
        }
    }
}

fn check_batch(input: &[f32]) -> usize {
    assert!(
        input.len() % OBS_LEN == 0,
        "input length {} is not a multiple of {OBS_LEN}",
        input.len()
    );
    input.len() / OBS_LEN
}

fn forward_full(params: &NetworkParams, input: &[f32]) -> Activations {
    let batch = check_batch(input);

    let cols1 = im2col_conv1(input, batch);
    let n1 = batch * CONV1_PIX;
    let mut act1 = vec![0.0f32; CONV1_OUT * n1];
    gemm(
        CONV1_OUT,
        CONV1_FAN_IN,
        n1,
        params.get(TensorId::Conv1Weight),
        (CONV1_FAN_IN, 1),
        &cols1,
        (n1, 1),
        0.0,
        &mut act1,
    );
    add_channel_bias_relu(&mut act1, params.get(TensorId::Conv1Bias), n1);

    let cols2 = im2col_conv2(&act1, batch);
    let n2 = batch * CONV2_PIX;
    let mut act2 = vec![0.0f32; CONV2_OUT * n2];
    gemm(
        CONV2_OUT,
        CONV2_FAN_IN,
        n2,
        params.get(TensorId::Conv2Weight),
        (CONV2_FAN_IN, 1),
        &cols2,
        (n2, 1),
        0.0,
        &mut act2,
    );
    add_channel_bias_relu(&mut act2, params.get(TensorId::Conv2Bias), n2);

    // [channel][sample][pixel] -> [sample][channel * pixel]
    let mut flat = vec![0.0f32; batch * FLAT];
    for c in 0..CONV2_OUT {
        for n in 0..batch {
            flat[n * FLAT + c * CONV2_PIX..][..CONV2_PIX]
                .copy_from_slice(&act2[c * n2 + n * CONV2_PIX..][..CONV2_PIX]);
        }
    }

    let mut hidden = vec![0.0f32; batch * HIDDEN];
    gemm(
        batch,
        FLAT,
        HIDDEN,
        &flat,
        (FLAT, 1),
        params.get(TensorId::Fc1Weight),
        (1, FLAT),
        0.0,
        &mut hidden,
    );
    for row in hidden.chunks_exact_mut(HIDDEN) {
        for (h, b) in row.iter_mut().zip(params.get(TensorId::Fc1Bias)) {
            *h = (*h + b).max(0.0);
        }
    }

    let mut q = vec![0.0f32; batch * ACTIONS];
    gemm(
        batch,
        HIDDEN,
        ACTIONS,
        &hidden,
        (HIDDEN, 1),
        params.get(TensorId::HeadWeight),
        (1, HIDDEN),
        0.0,
        &mut q,
    );
    for row in q.chunks_exact_mut(ACTIONS) {
        for (v, b) in row.iter_mut().zip(params.get(TensorId::HeadBias)) {
            *v += b;
        }
    }

    Activations {
        batch,
        cols1,
        act1,
        cols2,
        act2,
        flat,
        hidden,
        q,
    }
}

/// Q-values for a batch of flattened observations (`B * OBS_LEN` values),
/// returned row-major as `B * ACTIONS`.
pub fn forward(params: &NetworkParams, input: &[f32]) -> Vec<f32> {
    forward_full(params, input).q
}

fn row_sums(values: &[f32], rows: usize, out: &mut [f32]) {
    let width = values.len() / rows;
    for (o, row) in out.iter_mut().zip(values.chunks_exact(width)) {
        *o = row.iter().sum();
    }
}

/// Mean squared TD error on the taken actions and its exact gradient.
///
/// Tensors frozen by `mask` get zero gradients; if the whole body is frozen
/// backprop stops after the head.
pub fn backward_masked(
    params: &NetworkParams,
    input: &[f32],
    actions: &[usize],
    targets: &[f32],
    mask: &TrainableMask,
) -> Result<(f32, GradientBuffer), NnError> {
    let acts = forward_full(params, input);
    let batch = acts.batch;
    assert_eq!(actions.len(), batch, "one action per sample");
    assert_eq!(targets.len(), batch, "one target per sample");

    let mut dq = vec![0.0f32; batch * ACTIONS];
    let mut loss = 0.0f64;
    for (n, (&a, &y)) in actions.iter().zip(targets).enumerate() {
        assert!(a < ACTIONS, "action index {a} out of range");
        let err = acts.q[n * ACTIONS + a] - y;
        loss += f64::from(err) * f64::from(err);
        dq[n * ACTIONS + a] = 2.0 * err / batch as f32;
    }
    let loss = (loss / batch as f64) as f32;
    if !loss.is_finite() {
        return Err(NnError::NonFiniteLoss { loss });
    }

    let mut grads = GradientBuffer::zeros();

    // head
    gemm(
        ACTIONS,
        batch,
        HIDDEN,
        &dq,
        (1, ACTIONS),
        &acts.hidden,
        (HIDDEN, 1),
        0.0,
        grads.get_mut(TensorId::HeadWeight),
    );
    {
        let gb = grads.get_mut(TensorId::HeadBias);
        for row in dq.chunks_exact(ACTIONS) {
            for (g, d) in gb.iter_mut().zip(row) {
                *g += d;
            }
        }
    }
    if mask.body_frozen() {
        return Ok((loss, grads));
    }

    let mut dhidden = vec![0.0f32; batch * HIDDEN];
    gemm(
        batch,
        ACTIONS,
        HIDDEN,
        &dq,
        (ACTIONS, 1),
        params.get(TensorId::HeadWeight),
        (HIDDEN, 1),
        0.0,
        &mut dhidden,
    );
    for (d, h) in dhidden.iter_mut().zip(&acts.hidden) {
        if *h <= 0.0 {
            *d = 0.0;
        }
    }

    // fc1
    gemm(
        HIDDEN,
        batch,
        FLAT,
        &dhidden,
        (1, HIDDEN),
        &acts.flat,
        (FLAT, 1),
        0.0,
        grads.get_mut(TensorId::Fc1Weight),
    );
    {
        let gb = grads.get_mut(TensorId::Fc1Bias);
        for row in dhidden.chunks_exact(HIDDEN) {
            for (g, d) in gb.iter_mut().zip(row) {
                *g += d;
            }
        }
    }
    let mut dflat = vec![0.0f32; batch * FLAT];
    gemm(
        batch,
        HIDDEN,
        FLAT,
        &dhidden,
        (HIDDEN, 1),
        params.get(TensorId::Fc1Weight),
        (FLAT, 1),
        0.0,
        &mut dflat,
    );

    // conv2
    let n2 = batch * CONV2_PIX;
    let mut dz2 = vec![0.0f32; CONV2_OUT * n2];
    for c in 0..CONV2_OUT {
        for n in 0..batch {
            dz2[c * n2 + n * CONV2_PIX..][..CONV2_PIX]
                .copy_from_slice(&dflat[n * FLAT + c * CONV2_PIX..][..CONV2_PIX]);
        }
    }
    for (d, a) in dz2.iter_mut().zip(&acts.act2) {
        if *a <= 0.0 {
            *d = 0.0;
        }
    }
    gemm(
        CONV2_OUT,
        n2,
        CONV2_FAN_IN,
        &dz2,
        (n2, 1),
        &acts.cols2,
        (1, n2),
        0.0,
        grads.get_mut(TensorId::Conv2Weight),
    );
    row_sums(&dz2, CONV2_OUT, grads.get_mut(TensorId::Conv2Bias));

    let mut dcols2 = vec![0.0f32; CONV2_FAN_IN * n2];
    gemm(
        CONV2_FAN_IN,
        CONV2_OUT,
        n2,
        params.get(TensorId::Conv2Weight),
        (1, CONV2_FAN_IN),
        &dz2,
        (n2, 1),
        0.0,
        &mut dcols2,
    );

    // conv1
    let n1 = batch * CONV1_PIX;
    let mut dz1 = col2im_conv2(&dcols2, batch);
    for (d, a) in dz1.iter_mut().zip(&acts.act1) {
        if *a <= 0.0 {
            *d = 0.0;
        }
    }
    gemm(
        CONV1_OUT,
        n1,
        CONV1_FAN_IN,
        &dz1,
        (n1, 1),
        &acts.cols1,
        (1, n1),
        0.0,
        grads.get_mut(TensorId::Conv1Weight),
    );
    row_sums(&dz1, CONV1_OUT, grads.get_mut(TensorId::Conv1Bias));

    for id in TensorId::ALL {
        if !mask.is_trainable(id) {
            grads.get_mut(id).fill(0.0);
        }
    }
    Ok((loss, grads))
}

/// [`backward_masked`] with every tensor trainable.
pub fn backward(
    params: &NetworkParams,
    input: &[f32],
    actions: &[usize],
    targets: &[f32],
) -> Result<(f32, GradientBuffer), NnError> {
    backward_masked(params, input, actions, targets, &TrainableMask::all())
}

/// RMSprop hyperparameters.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RmsPropConfig {
    pub lr: f32,
    pub rho: f32,
    pub eps: f32,
}

impl Default for RmsPropConfig {
    fn default() -> Self {
        RmsPropConfig {
            lr: 0.00025,
            rho: 0.95,
            eps: 0.01,
        }
    }
}

/// Squared-gradient accumulators for RMSprop.
#[derive(Clone, Debug, PartialEq)]
pub struct OptimizerState {
    pub config: RmsPropConfig,
    acc: [Vec<f32>; TENSOR_COUNT],
}

impl OptimizerState {
    pub fn new(config: RmsPropConfig) -> Self {
        OptimizerState {
            config,
            acc: zeroed_tensors(),
        }
    }

    pub fn accumulator(&self, id: TensorId) -> &[f32] {
        &self.acc[id.index()]
    }
}

/// One RMSprop update, in place:
/// `acc = rho * acc + (1 - rho) * g^2`, `p -= lr * g / sqrt(acc + eps)`.
///
/// Frozen tensors are skipped entirely, including their accumulators.
pub fn rmsprop_step(
    params: &mut NetworkParams,
    grads: &GradientBuffer,
    state: &mut OptimizerState,
    mask: &TrainableMask,
) {
    let RmsPropConfig { lr, rho, eps } = state.config;
    for id in TensorId::ALL {
        if !mask.is_trainable(id) {
            continue;
        }
        let p = &mut params.tensors[id.index()];
        let acc = &mut state.acc[id.index()];
        let g = grads.get(id);
        for ((p, a), g) in p.iter_mut().zip(acc.iter_mut()).zip(g) {
            *a = rho * *a + (1.0 - rho) * g * g;
            *p -= lr * g / (*a + eps).sqrt();
        }
    }
}

/// Index of the largest value, lowest index on ties.
pub fn argmax(values: &[f32]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate().skip(1) {
        if *v > values[best] {
            best = i;
        }
    }
    best
}
