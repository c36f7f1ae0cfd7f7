//! The competing-filter network and its group importance statistic.
//!
//! The first layer has one linear neuron per group that sees only that
//! group's originals and knockoffs: `h_j = S_j·x_{G_j} + S̃_j·x̃_{G_j}`. Its
//! output is scaled elementwise by `W0` and fed to a two-hidden-layer ReLU
//! MLP of width `m` with a scalar linear output:
//!
//! ```text
//! a1 = relu(W1ᵀ (W0 ∘ h) + b1)
//! a2 = relu(W2ᵀ a1 + b2)
//! ŷ  = W3ᵀ a2 + b3
//! ```
//!
//! Training minimizes mean squared error plus an L1 penalty on every weight
//! (filters and `W0..W3`, not biases) with mini-batch Adam.
//!
//! After training, `w = W0 ∘ (W1 W2 W3)` measures how much each group
//! neuron reaches the output, and the group statistic is
//! `W_j = Z_j² − Z̃_j²` with `Z_j = (‖S_j‖²/p_j)|w_j|` and
//! `Z̃_j = (‖S̃_j‖²/p_j)|w_j|`. Both sides of a group share `w_j` because
//! they feed the same neuron.

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::knockoff::AugmentedDesign;
use crate::partition::GroupPartition;
use crate::rng::Stream;

#[derive(Debug, Clone, PartialEq)]
pub struct NetworkWeights {
    partition: GroupPartition,
    /// `S_j`, one entry per feature of group `j`.
    pub filters: Vec<Vec<f64>>,
    /// `S̃_j`.
    pub knock_filters: Vec<Vec<f64>>,
    pub w0: Vec<f64>,
    /// Row `i` connects MLP input `i` to every first-layer neuron.
    pub w1: DMatrix<f64>,
    pub b1: Vec<f64>,
    pub w2: DMatrix<f64>,
    pub b2: Vec<f64>,
    pub w3: Vec<f64>,
    pub b3: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub l1_strength: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    /// Stop after this many epochs without a relative improvement of
    /// [`PLATEAU_REL_TOL`] in the training objective. Zero disables it.
    pub patience: usize,
}

pub const PLATEAU_REL_TOL: f64 = 1e-4;

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            l1_strength: 1e-3,
            epochs: 200,
            batch_size: 64,
            seed: 0,
            patience: 20,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "learning rate must be positive, got {}",
                self.learning_rate
            )));
        }
        if !(self.l1_strength >= 0.0 && self.l1_strength.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "l1 strength must be non-negative, got {}",
                self.l1_strength
            )));
        }
        if self.batch_size == 0 {
            return Err(Error::InvalidArgument("batch size must be at least 1".into()));
        }
        Ok(())
    }
}

/// Per-group importances read off a trained network.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupImportance {
    pub z: Vec<f64>,
    pub z_knock: Vec<f64>,
    pub w_stat: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub weights: NetworkWeights,
    /// Full-data objective before training and after every epoch.
    pub loss_trace: Vec<f64>,
    pub epochs_run: usize,
}

/// Offsets of each parameter block in the flat parameter vector.
#[derive(Debug, Clone, Copy)]
struct Layout {
    m: usize,
    p: usize,
    knock: usize,
    w0: usize,
    w1: usize,
    b1: usize,
    w2: usize,
    b2: usize,
    w3: usize,
    b3: usize,
    len: usize,
}

impl Layout {
    fn new(p: usize, m: usize) -> Self {
        let knock = p;
        let w0 = knock + p;
        let w1 = w0 + m;
        let b1 = w1 + m * m;
        let w2 = b1 + m;
        let b2 = w2 + m * m;
        let w3 = b2 + m;
        let b3 = w3 + m;
        Self {
            m,
            p,
            knock,
            w0,
            w1,
            b1,
            w2,
            b2,
            w3,
            b3,
            len: b3 + 1,
        }
    }

    fn is_penalized(&self, k: usize) -> bool {
        !((self.b1..self.b1 + self.m).contains(&k)
            || (self.b2..self.b2 + self.m).contains(&k)
            || k == self.b3)
    }
}

/// Filter parameters are laid out group by group, in partition order.
fn filter_offsets(partition: &GroupPartition) -> Vec<usize> {
    let mut offsets = Vec::with_capacity(partition.m());
    let mut acc = 0;
    for g in partition.groups() {
        offsets.push(acc);
        acc += g.len();
    }
    offsets
}

impl NetworkWeights {
    /// All-zero network for `partition`.
    pub fn zeros(partition: &GroupPartition) -> Self {
        let m = partition.m();
        Self {
            partition: partition.clone(),
            filters: partition.groups().iter().map(|g| vec![0.0; g.len()]).collect(),
            knock_filters: partition.groups().iter().map(|g| vec![0.0; g.len()]).collect(),
            w0: vec![0.0; m],
            w1: DMatrix::zeros(m, m),
            b1: vec![0.0; m],
            w2: DMatrix::zeros(m, m),
            b2: vec![0.0; m],
            w3: vec![0.0; m],
            b3: 0.0,
        }
    }

    pub fn partition(&self) -> &GroupPartition {
        &self.partition
    }

    pub fn m(&self) -> usize {
        self.partition.m()
    }

    fn layout(&self) -> Layout {
        Layout::new(self.partition.p(), self.m())
    }

    pub fn param_count(&self) -> usize {
        self.layout().len
    }

    /// Flat copy of every parameter.
    pub fn params(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        out.extend(self.filters.iter().flatten());
        out.extend(self.knock_filters.iter().flatten());
        out.extend(&self.w0);
        out.extend(self.w1.iter());
        out.extend(&self.b1);
        out.extend(self.w2.iter());
        out.extend(&self.b2);
        out.extend(&self.w3);
        out.push(self.b3);
        out
    }

    pub fn set_params(&mut self, flat: &[f64]) {
        let lay = self.layout();
        assert_eq!(flat.len(), lay.len, "parameter vector length");
        let mut k = 0;
        for f in self.filters.iter_mut().chain(self.knock_filters.iter_mut()) {
            let len = f.len();
            f.copy_from_slice(&flat[k..k + len]);
            k += len;
        }
        let m = lay.m;
        self.w0.copy_from_slice(&flat[lay.w0..lay.w0 + m]);
        self.w1.copy_from_slice(&flat[lay.w1..lay.w1 + m * m]);
        self.b1.copy_from_slice(&flat[lay.b1..lay.b1 + m]);
        self.w2.copy_from_slice(&flat[lay.w2..lay.w2 + m * m]);
        self.b2.copy_from_slice(&flat[lay.b2..lay.b2 + m]);
        self.w3.copy_from_slice(&flat[lay.w3..lay.w3 + m]);
        self.b3 = flat[lay.b3];
    }

    /// Whether flat parameter `k` carries the L1 penalty.
    pub fn is_penalized(&self, k: usize) -> bool {
        self.layout().is_penalized(k)
    }

    /// Exchanges `S_j` and `S̃_j` for group `j`.
    pub fn swap_filters(&mut self, j: usize) {
        std::mem::swap(&mut self.filters[j], &mut self.knock_filters[j]);
    }

    fn check_shape(&self) -> Result<()> {
        let sizes = self.partition.sizes();
        let m = sizes.len();
        let ok = self.filters.len() == m
            && self.knock_filters.len() == m
            && self.filters.iter().zip(&sizes).all(|(f, &s)| f.len() == s)
            && self.knock_filters.iter().zip(&sizes).all(|(f, &s)| f.len() == s)
            && self.w0.len() == m
            && self.w1.shape() == (m, m)
            && self.w2.shape() == (m, m)
            && self.b1.len() == m
            && self.b2.len() == m
            && self.w3.len() == m;
        if ok {
            Ok(())
        } else {
            Err(Error::DimensionMismatch(
                "network weights do not match their partition".into(),
            ))
        }
    }
}

/// Swap-symmetric initialization: each feature's `(S, S̃)` pair is two
/// i.i.d. draws, so exchanging the streams would mirror the assignment. MLP
/// weights are `N(0, 1/fan_in)`; biases start at zero.
pub fn init_network(partition: &GroupPartition, seed: u64) -> NetworkWeights {
    let mut rng = Stream::NetworkInit.rng(seed);
    let mut net = NetworkWeights::zeros(partition);
    let m = partition.m();
    for j in 0..m {
        let scale = 1.0 / (2.0 * partition.group(j).len() as f64).sqrt();
        for a in 0..partition.group(j).len() {
            net.filters[j][a] = scale * rng.sample::<f64, _>(StandardNormal);
            net.knock_filters[j][a] = scale * rng.sample::<f64, _>(StandardNormal);
        }
    }
    for v in net.w0.iter_mut() {
        *v = rng.sample(StandardNormal);
    }
    let hidden = 1.0 / (m as f64).sqrt();
    for v in net.w1.iter_mut().chain(net.w2.iter_mut()).chain(net.w3.iter_mut()) {
        *v = hidden * rng.sample::<f64, _>(StandardNormal);
    }
    net
}

/// Rows of `[x, x̃]`, row-major, `2p` values each.
#[derive(Debug, Clone)]
pub struct DesignRows {
    data: Vec<f64>,
    p: usize,
}

impl DesignRows {
    pub fn from_design(design: &AugmentedDesign) -> Self {
        let (n, p) = (design.n(), design.p());
        let mut data = Vec::with_capacity(n * 2 * p);
        for i in 0..n {
            data.extend(design.x().row(i).iter());
            data.extend(design.x_knock().row(i).iter());
        }
        Self { data, p }
    }

    pub fn n(&self) -> usize {
        self.data.len() / (2 * self.p).max(1)
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * 2 * self.p..(i + 1) * 2 * self.p]
    }
}

/// Intermediate activations for one row.
struct Activations {
    h: Vec<f64>,
    u: Vec<f64>,
    z1: Vec<f64>,
    a1: Vec<f64>,
    z2: Vec<f64>,
    a2: Vec<f64>,
    out: f64,
}

impl Activations {
    fn new(m: usize) -> Self {
        Self {
            h: vec![0.0; m],
            u: vec![0.0; m],
            z1: vec![0.0; m],
            a1: vec![0.0; m],
            z2: vec![0.0; m],
            a2: vec![0.0; m],
            out: 0.0,
        }
    }
}

fn forward_into(net: &NetworkWeights, row: &[f64], act: &mut Activations) {
    let p = net.partition.p();
    let m = net.m();
    for (j, group) in net.partition.groups().iter().enumerate() {
        let (s, sk) = (&net.filters[j], &net.knock_filters[j]);
        let mut h = 0.0;
        for (a, &i) in group.iter().enumerate() {
            h += s[a] * row[i] + sk[a] * row[p + i];
        }
        act.h[j] = h;
        act.u[j] = net.w0[j] * h;
    }
    for b in 0..m {
        let mut z = net.b1[b];
        for i in 0..m {
            z += net.w1[(i, b)] * act.u[i];
        }
        act.z1[b] = z;
        act.a1[b] = z.max(0.0);
    }
    for b in 0..m {
        let mut z = net.b2[b];
        for a in 0..m {
            z += net.w2[(a, b)] * act.a1[a];
        }
        act.z2[b] = z;
        act.a2[b] = z.max(0.0);
    }
    act.out = net.b3 + net.w3.iter().zip(&act.a2).map(|(w, a)| w * a).sum::<f64>();
}

/// Network output for one `[x, x̃]` row.
pub fn forward(net: &NetworkWeights, row: &[f64]) -> Result<f64> {
    net.check_shape()?;
    if row.len() != 2 * net.partition.p() {
        return Err(Error::DimensionMismatch(format!(
            "row has {} values, network expects {}",
            row.len(),
            2 * net.partition.p()
        )));
    }
    let mut act = Activations::new(net.m());
    forward_into(net, row, &mut act);
    Ok(act.out)
}

/// Adds `scale · ∂(ŷ − y)²/∂θ` for one row into `grad`; returns the
/// squared error.
fn backprop_row(
    net: &NetworkWeights,
    lay: &Layout,
    offsets: &[usize],
    row: &[f64],
    target: f64,
    scale: f64,
    act: &mut Activations,
    grad: &mut [f64],
) -> f64 {
    let m = lay.m;
    forward_into(net, row, act);
    let err = act.out - target;
    let d_out = 2.0 * err * scale;

    grad[lay.b3] += d_out;
    let mut dz2 = vec![0.0; m];
    for b in 0..m {
        grad[lay.w3 + b] += d_out * act.a2[b];
        if act.z2[b] > 0.0 {
            dz2[b] = d_out * net.w3[b];
        }
    }
    let mut dz1 = vec![0.0; m];
    for b in 0..m {
        grad[lay.b2 + b] += dz2[b];
    }
    for a in 0..m {
        let mut da1 = 0.0;
        for b in 0..m {
            // w2 is column-major: element (a, b) lives at a + b m.
            grad[lay.w2 + a + b * m] += act.a1[a] * dz2[b];
            da1 += net.w2[(a, b)] * dz2[b];
        }
        if act.z1[a] > 0.0 {
            dz1[a] = da1;
        }
    }
    for b in 0..m {
        grad[lay.b1 + b] += dz1[b];
    }
    for i in 0..m {
        let mut du = 0.0;
        for b in 0..m {
            grad[lay.w1 + i + b * m] += act.u[i] * dz1[b];
            du += net.w1[(i, b)] * dz1[b];
        }
        grad[lay.w0 + i] += du * act.h[i];
        let dh = du * net.w0[i];
        if dh != 0.0 {
            for (a, &f) in net.partition.group(i).iter().enumerate() {
                grad[offsets[i] + a] += dh * row[f];
                grad[lay.knock + offsets[i] + a] += dh * row[lay.p + f];
            }
        }
    }
    err * err
}

fn l1_norm(net: &NetworkWeights, params: &[f64]) -> f64 {
    let lay = net.layout();
    params
        .iter()
        .enumerate()
        .filter(|(k, _)| lay.is_penalized(*k))
        .map(|(_, v)| v.abs())
        .sum()
}

/// Mean squared error over `rows` plus `l1 · Σ|w|`.
pub fn objective(net: &NetworkWeights, rows: &DesignRows, y: &[f64], l1: f64) -> f64 {
    let mut act = Activations::new(net.m());
    let mut sse = 0.0;
    for (i, &target) in y.iter().enumerate() {
        forward_into(net, rows.row(i), &mut act);
        sse += (act.out - target).powi(2);
    }
    sse / y.len().max(1) as f64 + l1 * l1_norm(net, &net.params())
}

/// The objective on the listed rows and its gradient with respect to the
/// flat parameters. The L1 term contributes `l1 · sign(w)` (zero at zero).
pub fn objective_and_gradient(
    net: &NetworkWeights,
    rows: &DesignRows,
    y: &[f64],
    batch: &[usize],
    l1: f64,
) -> (f64, Vec<f64>) {
    let lay = net.layout();
    let offsets = filter_offsets(&net.partition);
    let mut grad = vec![0.0; lay.len];
    let mut act = Activations::new(lay.m);
    let scale = 1.0 / batch.len().max(1) as f64;
    let mut sse = 0.0;
    for &i in batch {
        sse += backprop_row(net, &lay, &offsets, rows.row(i), y[i], scale, &mut act, &mut grad);
    }
    let params = net.params();
    let mut penalty = 0.0;
    if l1 > 0.0 {
        for (k, (g, w)) in grad.iter_mut().zip(&params).enumerate() {
            if lay.is_penalized(k) {
                penalty += w.abs();
                if *w != 0.0 {
                    *g += l1 * w.signum();
                }
            }
        }
    }
    (sse * scale + l1 * penalty, grad)
}

struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Adam {
    const BETA1: f64 = 0.9;
    const BETA2: f64 = 0.999;
    const EPS: f64 = 1e-8;

    fn new(len: usize) -> Self {
        Self {
            m: vec![0.0; len],
            v: vec![0.0; len],
            t: 0,
        }
    }

    fn step(&mut self, params: &mut [f64], grad: &[f64], lr: f64) {
        self.t += 1;
        let c1 = 1.0 - Self::BETA1.powi(self.t);
        let c2 = 1.0 - Self::BETA2.powi(self.t);
        for k in 0..params.len() {
            self.m[k] = Self::BETA1 * self.m[k] + (1.0 - Self::BETA1) * grad[k];
            self.v[k] = Self::BETA2 * self.v[k] + (1.0 - Self::BETA2) * grad[k] * grad[k];
            let m_hat = self.m[k] / c1;
            let v_hat = self.v[k] / c2;
            params[k] -= lr * m_hat / (v_hat.sqrt() + Self::EPS);
        }
    }
}

/// Mini-batch Adam on MSE + L1. Rows are reshuffled every epoch from the
/// training stream of `cfg.seed`.
pub fn train(
    net: NetworkWeights,
    design: &AugmentedDesign,
    y: &[f64],
    cfg: &TrainConfig,
) -> Result<TrainOutcome> {
    cfg.validate()?;
    net.check_shape()?;
    if design.n() != y.len() {
        return Err(Error::DimensionMismatch(format!(
            "design has {} rows, response has {}",
            design.n(),
            y.len()
        )));
    }
    if design.partition() != net.partition() {
        return Err(Error::DimensionMismatch(
            "design and network use different partitions".into(),
        ));
    }
    if y.is_empty() {
        return Err(Error::EmptyInput("no training rows"));
    }
    let rows = DesignRows::from_design(design);
    let mut rng = Stream::Training.rng(cfg.seed);
    let mut net = net;
    let mut params = net.params();
    let mut adam = Adam::new(params.len());
    let mut order: Vec<usize> = (0..y.len()).collect();

    let initial = objective(&net, &rows, y, cfg.l1_strength);
    if !initial.is_finite() {
        return Err(Error::NumericalDivergence { epoch: 0 });
    }
    let mut trace = vec![initial];
    let mut best = initial;
    let mut stale = 0;
    let mut epochs_run = 0;

    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut rng);
        for batch in order.chunks(cfg.batch_size) {
            let (_, grad) = objective_and_gradient(&net, &rows, y, batch, cfg.l1_strength);
            adam.step(&mut params, &grad, cfg.learning_rate);
            net.set_params(&params);
        }
        epochs_run = epoch;
        let loss = objective(&net, &rows, y, cfg.l1_strength);
        if !loss.is_finite() {
            return Err(Error::NumericalDivergence { epoch });
        }
        trace.push(loss);
        if loss < best * (1.0 - PLATEAU_REL_TOL) {
            best = loss;
            stale = 0;
        } else {
            stale += 1;
            if cfg.patience > 0 && stale >= cfg.patience {
                break;
            }
        }
    }
    Ok(TrainOutcome {
        weights: net,
        loss_trace: trace,
        epochs_run,
    })
}

/// `w = W0 ∘ (W1 W2 W3)`.
pub fn path_weights(net: &NetworkWeights) -> Vec<f64> {
    let w3 = DVector::from_column_slice(&net.w3);
    let through = &net.w1 * (&net.w2 * w3);
    net.w0.iter().zip(through.iter()).map(|(a, b)| a * b).collect()
}

pub fn group_importance(net: &NetworkWeights) -> GroupImportance {
    let w = path_weights(net);
    let mut z = Vec::with_capacity(net.m());
    let mut z_knock = Vec::with_capacity(net.m());
    for j in 0..net.m() {
        let size = net.filters[j].len() as f64;
        let reach = w[j].abs();
        z.push(net.filters[j].iter().map(|v| v * v).sum::<f64>() / size * reach);
        z_knock.push(net.knock_filters[j].iter().map(|v| v * v).sum::<f64>() / size * reach);
    }
    let w_stat = z.iter().zip(&z_knock).map(|(a, b)| a * a - b * b).collect();
    GroupImportance { z, z_knock, w_stat }
}
