//! Detection losses and a single-layer reference head that trains on them.
//!
//! The head is a 3×3 same-padded convolution from a `C`-channel feature map
//! to `2k` classification logits and `5k` regression offsets per cell. It is
//! there to exercise the losses end to end; no backbone is implemented.

use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::anchor::{anchor_side, encode, AnchorGrid, OffsetVector};
use crate::geom::RotatedRect;
use crate::matching::{angle_match, hard_negatives, MatchAssignment};
use crate::math;

/// Floor applied to probabilities before taking logs.
pub const PROB_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum LossError {
    #[error("shape mismatch: {0}")]
    Shape(&'static str),
    #[error("loss diverged to {value} at step {step}")]
    Diverged { step: usize, value: f64 },
}

/// Per-image head output. `cls` holds raw logits, one (graspable,
/// ungraspable) pair per anchor; `reg` holds one offset vector per anchor.
/// Both are laid out cell-major in anchor-index order.
#[derive(Debug, Clone, PartialEq)]
pub struct DetectionTensor {
    n: usize,
    k: usize,
    cls: Vec<f64>,
    reg: Vec<f64>,
}

impl DetectionTensor {
    pub fn zeros(n: usize, k: usize) -> Self {
        Self {
            n,
            k,
            cls: vec![0.0; n * n * 2 * k],
            reg: vec![0.0; n * n * 5 * k],
        }
    }

    pub fn from_parts(n: usize, k: usize, cls: Vec<f64>, reg: Vec<f64>) -> Result<Self, LossError> {
        if cls.len() != n * n * 2 * k {
            return Err(LossError::Shape(
                "classification map must hold n·n·2k logits",
            ));
        }
        if reg.len() != n * n * 5 * k {
            return Err(LossError::Shape("regression map must hold n·n·5k offsets"));
        }
        Ok(Self { n, k, cls, reg })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn anchors(&self) -> usize {
        self.n * self.n * self.k
    }

    pub fn matches_grid(&self, grid: &AnchorGrid) -> bool {
        self.n == grid.n() && self.k == grid.k()
    }

    pub fn cls(&self) -> &[f64] {
        &self.cls
    }

    pub fn reg(&self) -> &[f64] {
        &self.reg
    }

    pub fn cls_mut(&mut self) -> &mut [f64] {
        &mut self.cls
    }

    pub fn reg_mut(&mut self) -> &mut [f64] {
        &mut self.reg
    }

    pub fn logits(&self, anchor: usize) -> (f64, f64) {
        (self.cls[2 * anchor], self.cls[2 * anchor + 1])
    }

    /// Softmax `(p_g, p_u)` of one anchor.
    pub fn probabilities(&self, anchor: usize) -> (f64, f64) {
        let (g, u) = self.logits(anchor);
        softmax_pair(g, u)
    }

    pub fn graspable_scores(&self) -> Vec<f64> {
        (0..self.anchors())
            .map(|a| self.probabilities(a).0)
            .collect()
    }

    pub fn offsets(&self, anchor: usize) -> OffsetVector {
        OffsetVector::from_slice(&self.reg[5 * anchor..5 * anchor + 5])
    }

    pub fn set_logits(&mut self, anchor: usize, graspable: f64, ungraspable: f64) {
        self.cls[2 * anchor] = graspable;
        self.cls[2 * anchor + 1] = ungraspable;
    }

    pub fn set_offsets(&mut self, anchor: usize, t: &OffsetVector) {
        self.reg[5 * anchor..5 * anchor + 5].copy_from_slice(&t.to_array());
    }
}

pub fn softmax_pair(a: f64, b: f64) -> (f64, f64) {
    let m = a.max(b);
    let ea = math::exp(a - m);
    let eb = math::exp(b - m);
    let s = ea + eb;
    (ea / s, eb / s)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossConfig {
    /// Weight of the regression term.
    pub alpha: f64,
    /// Mined negatives per positive.
    pub neg_ratio: usize,
}

impl Default for LossConfig {
    fn default() -> Self {
        Self {
            alpha: 2.0,
            neg_ratio: 3,
        }
    }
}

pub fn smooth_l1(x: f64) -> f64 {
    let a = x.abs();
    if a < 1.0 {
        0.5 * x * x
    } else {
        a - 0.5
    }
}

pub fn smooth_l1_grad(x: f64) -> f64 {
    if x.abs() < 1.0 {
        x
    } else {
        x.signum()
    }
}

/// `(anchor index, target offsets)` for every positive pair.
pub type RegressionTargets = Vec<(usize, OffsetVector)>;

pub fn encode_targets(
    grid: &AnchorGrid,
    gts: &[RotatedRect],
    assignment: &MatchAssignment,
) -> RegressionTargets {
    assignment
        .pairs
        .iter()
        .map(|p| (p.anchor, encode(grid.get(p.anchor), &gts[p.gt], grid.k())))
        .collect()
}

/// Sum of smooth-L1 residuals over positives and the five offset components.
pub fn reg_loss(pred: &DetectionTensor, targets: &[(usize, OffsetVector)]) -> f64 {
    targets
        .iter()
        .map(|(a, t)| {
            let p = pred.offsets(*a).to_array();
            p.iter()
                .zip(t.to_array())
                .map(|(p, t)| smooth_l1(p - t))
                .sum::<f64>()
        })
        .sum()
}

// NaN passes through so divergence stays visible.
fn floored(p: f64) -> f64 {
    if p < PROB_FLOOR {
        PROB_FLOOR
    } else {
        p
    }
}

/// Cross entropy: `−ln p_g` over positives plus `−ln p_u` over mined negatives.
pub fn cls_loss(pred: &DetectionTensor, positives: &[usize], negatives: &[usize]) -> f64 {
    let pos: f64 = positives
        .iter()
        .map(|&a| -math::ln(floored(pred.probabilities(a).0)))
        .sum();
    let neg: f64 = negatives
        .iter()
        .map(|&a| -math::ln(floored(pred.probabilities(a).1)))
        .sum();
    pos + neg
}

/// `(cls + α·reg) / 4P`, or 0 without positives.
pub fn total_loss(cls: f64, reg: f64, positives: usize, cfg: &LossConfig) -> f64 {
    if positives == 0 {
        return 0.0;
    }
    (cls + cfg.alpha * reg) / (4.0 * positives as f64)
}

/// Everything the loss needs about one image besides the prediction.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageTargets {
    pub positives: Vec<usize>,
    pub negatives: Vec<usize>,
    pub regression: RegressionTargets,
}

impl ImageTargets {
    /// Angle-Match the ground truths and mine negatives against `pred`.
    pub fn build(
        pred: &DetectionTensor,
        grid: &AnchorGrid,
        gts: &[RotatedRect],
        cfg: &LossConfig,
    ) -> Self {
        let assignment = angle_match(grid, gts);
        let negatives = hard_negatives(&pred.graspable_scores(), &assignment, cfg.neg_ratio);
        Self {
            positives: assignment.pairs.iter().map(|p| p.anchor).collect(),
            negatives,
            regression: encode_targets(grid, gts, &assignment),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossBreakdown {
    pub cls: f64,
    pub reg: f64,
    pub positives: usize,
    pub total: f64,
}

/// Loss over a batch; `P` is the positive count of the whole batch.
pub fn batch_loss(
    preds: &[DetectionTensor],
    targets: &[ImageTargets],
    cfg: &LossConfig,
) -> LossBreakdown {
    let mut cls = 0.0;
    let mut reg = 0.0;
    let mut positives = 0;
    for (p, t) in preds.iter().zip(targets) {
        cls += cls_loss(p, &t.positives, &t.negatives);
        reg += reg_loss(p, &t.regression);
        positives += t.positives.len();
    }
    LossBreakdown {
        cls,
        reg,
        positives,
        total: total_loss(cls, reg, positives, cfg),
    }
}

/// Gradient of [`batch_loss`]'s total with respect to each head output.
fn output_gradients(
    preds: &[DetectionTensor],
    targets: &[ImageTargets],
    cfg: &LossConfig,
) -> Vec<DetectionTensor> {
    let positives: usize = targets.iter().map(|t| t.positives.len()).sum();
    let mut grads: Vec<DetectionTensor> = preds
        .iter()
        .map(|p| DetectionTensor::zeros(p.n, p.k))
        .collect();
    if positives == 0 {
        return grads;
    }
    let norm = 1.0 / (4.0 * positives as f64);
    for ((pred, t), grad) in preds.iter().zip(targets).zip(grads.iter_mut()) {
        // d(−ln p_c)/d logit_j = p_j − [j = c], zero where the floor is active.
        let mut class_grad = |anchor: usize, graspable: bool| {
            let (pg, pu) = pred.probabilities(anchor);
            let p_true = if graspable { pg } else { pu };
            if p_true <= PROB_FLOOR {
                return;
            }
            let (dg, du) = if graspable {
                (pg - 1.0, pu)
            } else {
                (pg, pu - 1.0)
            };
            grad.cls[2 * anchor] += norm * dg;
            grad.cls[2 * anchor + 1] += norm * du;
        };
        for &a in &t.positives {
            class_grad(a, true);
        }
        for &a in &t.negatives {
            class_grad(a, false);
        }
        for (a, target) in &t.regression {
            let p = pred.offsets(*a).to_array();
            for (c, (p, q)) in p.iter().zip(target.to_array()).enumerate() {
                grad.reg[5 * a + c] += norm * cfg.alpha * smooth_l1_grad(p - q);
            }
        }
    }
    grads
}

/// `height × width × channels`, row-major, channels fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMap {
    pub height: usize,
    pub width: usize,
    pub channels: usize,
    pub data: Vec<f64>,
}

impl FeatureMap {
    pub fn new(
        height: usize,
        width: usize,
        channels: usize,
        data: Vec<f64>,
    ) -> Result<Self, LossError> {
        if data.len() != height * width * channels {
            return Err(LossError::Shape(
                "feature data must hold height·width·channels values",
            ));
        }
        Ok(Self {
            height,
            width,
            channels,
            data,
        })
    }

    pub fn at(&self, row: usize, col: usize, c: usize) -> f64 {
        self.data[(row * self.width + col) * self.channels + c]
    }

    /// Standard-normal-ish features from a seed (sum of uniforms).
    pub fn random(n: usize, channels: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let data = (0..n * n * channels)
            .map(|_| (0..4).map(|_| rng.random_range(-1.0..1.0)).sum::<f64>() * 0.866)
            .collect();
        Self {
            height: n,
            width: n,
            channels,
            data,
        }
    }
}

/// 3×3 convolution head with SGD-with-momentum state.
///
/// Weights are indexed `[out][in][ky][kx]`; outputs `0..2k` are logits and
/// `2k..7k` offsets, anchor-major within each block.
#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceHead {
    pub in_channels: usize,
    pub k: usize,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
    velocity_w: Vec<f64>,
    velocity_b: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HeadGradients {
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl ReferenceHead {
    pub fn zeros(in_channels: usize, k: usize) -> Self {
        let out = 7 * k;
        Self {
            in_channels,
            k,
            weights: vec![0.0; out * in_channels * 9],
            bias: vec![0.0; out],
            velocity_w: vec![0.0; out * in_channels * 9],
            velocity_b: vec![0.0; out],
        }
    }

    /// Uniform weights in `±scale`, zero bias.
    pub fn random(in_channels: usize, k: usize, scale: f64, seed: u64) -> Self {
        let mut head = Self::zeros(in_channels, k);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for w in &mut head.weights {
            *w = rng.random_range(-scale..scale);
        }
        head
    }

    pub fn out_channels(&self) -> usize {
        7 * self.k
    }

    pub fn weight_index(&self, out: usize, inp: usize, ky: usize, kx: usize) -> usize {
        ((out * self.in_channels + inp) * 3 + ky) * 3 + kx
    }

    /// Output channel of an anchor's classification logit (`class` 0 =
    /// graspable) or offset component.
    fn cls_channel(&self, m: usize, class: usize) -> usize {
        2 * m + class
    }

    fn reg_channel(&self, m: usize, c: usize) -> usize {
        2 * self.k + 5 * m + c
    }

    fn check(&self, features: &FeatureMap, grid: &AnchorGrid) -> Result<(), LossError> {
        if features.channels != self.in_channels {
            return Err(LossError::Shape(
                "feature channels differ from head input channels",
            ));
        }
        if features.height != grid.n() || features.width != grid.n() {
            return Err(LossError::Shape(
                "feature map size differs from grid cells per side",
            ));
        }
        if grid.k() != self.k {
            return Err(LossError::Shape("head anchors per cell differ from grid"));
        }
        Ok(())
    }

    /// Raw convolution output, `n × n × 7k`.
    fn convolve(&self, f: &FeatureMap) -> Vec<f64> {
        let (n, oc, ic) = (f.height, self.out_channels(), self.in_channels);
        let mut out = vec![0.0; n * n * oc];
        for row in 0..n {
            for col in 0..n {
                let o_base = (row * n + col) * oc;
                out[o_base..o_base + oc].copy_from_slice(&self.bias);
                for ky in 0..3 {
                    let Some(r) = (row + ky).checked_sub(1).filter(|&r| r < n) else {
                        continue;
                    };
                    for kx in 0..3 {
                        let Some(c) = (col + kx).checked_sub(1).filter(|&c| c < n) else {
                            continue;
                        };
                        let x = &f.data[(r * n + c) * ic..(r * n + c + 1) * ic];
                        for o in 0..oc {
                            let mut acc = 0.0;
                            for (i, xv) in x.iter().enumerate() {
                                acc += self.weights[self.weight_index(o, i, ky, kx)] * xv;
                            }
                            out[o_base + o] += acc;
                        }
                    }
                }
            }
        }
        out
    }

    pub fn forward(
        &self,
        features: &FeatureMap,
        grid: &AnchorGrid,
    ) -> Result<DetectionTensor, LossError> {
        self.check(features, grid)?;
        let n = grid.n();
        let raw = self.convolve(features);
        let mut t = DetectionTensor::zeros(n, self.k);
        let oc = self.out_channels();
        for cell in 0..n * n {
            for m in 0..self.k {
                let a = cell * self.k + m;
                t.cls[2 * a] = raw[cell * oc + self.cls_channel(m, 0)];
                t.cls[2 * a + 1] = raw[cell * oc + self.cls_channel(m, 1)];
                for c in 0..5 {
                    t.reg[5 * a + c] = raw[cell * oc + self.reg_channel(m, c)];
                }
            }
        }
        Ok(t)
    }

    /// Backpropagate output gradients to weights and bias.
    fn backward(&self, features: &FeatureMap, grad: &DetectionTensor, acc: &mut HeadGradients) {
        let n = features.height;
        let (oc, ic) = (self.out_channels(), self.in_channels);
        let mut g_out = vec![0.0; oc];
        for row in 0..n {
            for col in 0..n {
                let cell = row * n + col;
                for m in 0..self.k {
                    let a = cell * self.k + m;
                    g_out[self.cls_channel(m, 0)] = grad.cls[2 * a];
                    g_out[self.cls_channel(m, 1)] = grad.cls[2 * a + 1];
                    for c in 0..5 {
                        g_out[self.reg_channel(m, c)] = grad.reg[5 * a + c];
                    }
                }
                for (b, g) in acc.bias.iter_mut().zip(&g_out) {
                    *b += g;
                }
                for ky in 0..3 {
                    let Some(r) = (row + ky).checked_sub(1).filter(|&r| r < n) else {
                        continue;
                    };
                    for kx in 0..3 {
                        let Some(c) = (col + kx).checked_sub(1).filter(|&c| c < n) else {
                            continue;
                        };
                        let x = &features.data[(r * n + c) * ic..(r * n + c + 1) * ic];
                        for (o, g) in g_out.iter().enumerate() {
                            if *g == 0.0 {
                                continue;
                            }
                            for (i, xv) in x.iter().enumerate() {
                                acc.weights[self.weight_index(o, i, ky, kx)] += g * xv;
                            }
                        }
                    }
                }
            }
        }
    }

    /// Loss and its gradient for a batch, with matching and mining done
    /// against the current predictions.
    pub fn loss_and_gradients(
        &self,
        batch: &[TrainSample],
        grid: &AnchorGrid,
        cfg: &LossConfig,
    ) -> Result<(LossBreakdown, HeadGradients), LossError> {
        let preds = batch
            .iter()
            .map(|s| self.forward(&s.features, grid))
            .collect::<Result<Vec<_>, _>>()?;
        let targets: Vec<ImageTargets> = preds
            .iter()
            .zip(batch)
            .map(|(p, s)| ImageTargets::build(p, grid, &s.gts, cfg))
            .collect();
        let loss = batch_loss(&preds, &targets, cfg);
        let out_grads = output_gradients(&preds, &targets, cfg);
        let mut grads = HeadGradients {
            weights: vec![0.0; self.weights.len()],
            bias: vec![0.0; self.bias.len()],
        };
        for (s, g) in batch.iter().zip(&out_grads) {
            self.backward(&s.features, g, &mut grads);
        }
        Ok((loss, grads))
    }

    /// Loss with fixed targets (no re-matching or re-mining).
    pub fn loss_with_targets(
        &self,
        batch: &[TrainSample],
        targets: &[ImageTargets],
        grid: &AnchorGrid,
        cfg: &LossConfig,
    ) -> Result<LossBreakdown, LossError> {
        let preds = batch
            .iter()
            .map(|s| self.forward(&s.features, grid))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(batch_loss(&preds, targets, cfg))
    }

    /// Targets the current head would train against.
    pub fn targets(
        &self,
        batch: &[TrainSample],
        grid: &AnchorGrid,
        cfg: &LossConfig,
    ) -> Result<Vec<ImageTargets>, LossError> {
        batch
            .iter()
            .map(|s| {
                Ok(ImageTargets::build(
                    &self.forward(&s.features, grid)?,
                    grid,
                    &s.gts,
                    cfg,
                ))
            })
            .collect()
    }

    /// Weights then biases, as one flat parameter vector.
    pub fn param_mut(&mut self, idx: usize) -> &mut f64 {
        let n_w = self.weights.len();
        if idx < n_w {
            &mut self.weights[idx]
        } else {
            &mut self.bias[idx - n_w]
        }
    }

    /// `v ← μ·v + g; w ← w − lr·v`.
    pub fn apply_sgd(&mut self, grads: &HeadGradients, lr: f64, momentum: f64) {
        sgd_momentum(
            &mut self.weights,
            &mut self.velocity_w,
            &grads.weights,
            lr,
            momentum,
        );
        sgd_momentum(
            &mut self.bias,
            &mut self.velocity_b,
            &grads.bias,
            lr,
            momentum,
        );
    }
}

pub fn sgd_momentum(
    params: &mut [f64],
    velocity: &mut [f64],
    grads: &[f64],
    lr: f64,
    momentum: f64,
) {
    for ((p, v), g) in params.iter_mut().zip(velocity.iter_mut()).zip(grads) {
        *v = momentum * *v + g;
        *p -= lr * *v;
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainSample {
    pub features: FeatureMap,
    pub gts: Vec<RotatedRect>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    pub lr: f64,
    pub momentum: f64,
    /// Per-step multiplicative learning-rate decay; 0 disables it.
    pub lr_decay: f64,
    pub loss: LossConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            lr: 1e-3,
            momentum: 0.9,
            lr_decay: 0.0,
            loss: LossConfig::default(),
        }
    }
}

/// One SGD step; returns the loss before the update.
pub fn train_step(
    head: &mut ReferenceHead,
    batch: &[TrainSample],
    grid: &AnchorGrid,
    cfg: &TrainConfig,
    step: usize,
) -> Result<LossBreakdown, LossError> {
    let (loss, grads) = head.loss_and_gradients(batch, grid, &cfg.loss)?;
    if !loss.total.is_finite() {
        return Err(LossError::Diverged {
            step,
            value: loss.total,
        });
    }
    let lr = cfg.lr * libm::pow(1.0 - cfg.lr_decay, step as f64);
    head.apply_sgd(&grads, lr, cfg.momentum);
    Ok(loss)
}

/// Runs `steps` updates and returns the loss before each one.
pub fn train(
    head: &mut ReferenceHead,
    batch: &[TrainSample],
    grid: &AnchorGrid,
    cfg: &TrainConfig,
    steps: usize,
) -> Result<Vec<f64>, LossError> {
    (0..steps)
        .map(|s| train_step(head, batch, grid, cfg, s).map(|l| l.total))
        .collect()
}

/// Random features paired with random ground truths inside the grid's
/// input, reproducible from `seed`.
pub fn synthetic_batch(
    grid: &AnchorGrid,
    images: usize,
    grasps: usize,
    channels: usize,
    seed: u64,
) -> Vec<TrainSample> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let size = grid.input_size() as f64;
    let side = anchor_side(grid.stride());
    (0..images as u64)
        .map(|i| {
            let gts = (0..grasps)
                .map(|_| {
                    RotatedRect::new(
                        rng.random_range(0.04 * size..0.96 * size),
                        rng.random_range(0.04 * size..0.96 * size),
                        rng.random_range(0.4 * side..1.5 * side),
                        rng.random_range(0.2 * side..0.6 * side),
                        rng.random_range(-90.0..90.0),
                    )
                    .expect("positive sizes")
                })
                .collect();
            TrainSample {
                features: FeatureMap::random(
                    grid.n(),
                    channels,
                    seed.wrapping_mul(10).wrapping_add(i),
                ),
                gts,
            }
        })
        .collect()
}

/// Result of comparing analytic and central-difference gradients.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradCheck {
    pub max_rel_error: f64,
    pub max_abs_error: f64,
    pub checked: usize,
}

/// Denominator floor for relative gradient errors.
pub const GRAD_REL_FLOOR: f64 = 1e-3;

/// Central-difference check of every head parameter with targets frozen at
/// the current weights.
pub fn gradient_check(
    head: &ReferenceHead,
    batch: &[TrainSample],
    grid: &AnchorGrid,
    cfg: &LossConfig,
    step: f64,
) -> Result<GradCheck, LossError> {
    let targets = head.targets(batch, grid, cfg)?;
    let (_, grads) = head.loss_and_gradients(batch, grid, cfg)?;
    let mut probe = head.clone();
    let mut worst = GradCheck {
        max_rel_error: 0.0,
        max_abs_error: 0.0,
        checked: 0,
    };
    let analytic_all = grads.weights.iter().chain(&grads.bias).copied();
    for (idx, analytic) in analytic_all.enumerate() {
        let original = *probe.param_mut(idx);
        *probe.param_mut(idx) = original + step;
        let plus = probe.loss_with_targets(batch, &targets, grid, cfg)?.total;
        *probe.param_mut(idx) = original - step;
        let minus = probe.loss_with_targets(batch, &targets, grid, cfg)?.total;
        *probe.param_mut(idx) = original;
        let numeric = (plus - minus) / (2.0 * step);
        let abs = (analytic - numeric).abs();
        let rel = abs / analytic.abs().max(numeric.abs()).max(GRAD_REL_FLOOR);
        worst.max_abs_error = worst.max_abs_error.max(abs);
        worst.max_rel_error = worst.max_rel_error.max(rel);
        worst.checked += 1;
    }
    Ok(worst)
}
