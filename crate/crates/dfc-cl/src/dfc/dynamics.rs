//! Controlled neuronal dynamics: feedforward pass, per-datapoint feedback
//! weights, winner-take-all suppression, recurrent gating, and the Euler
//! integration that settles the network into its target state.

use crate::dfc::config::DfcConfig;
use crate::dfc::params::NetworkParams;
use crate::error::{Error, Result};
use crate::numerics::matrix::dot;
use crate::numerics::softmax::error_signal;
use crate::numerics::{sigmoid, Matrix};

/// Row-major boolean mask, one row per sample.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BoolMat {
    rows: usize,
    cols: usize,
    data: Vec<bool>,
}

impl BoolMat {
    pub fn falses(rows: usize, cols: usize) -> Self {
        BoolMat {
            rows,
            cols,
            data: vec![false; rows * cols],
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[bool] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, i: usize) -> &mut [bool] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> bool {
        self.data[i * self.cols + j]
    }

    pub fn count_row(&self, i: usize) -> usize {
        self.row(i).iter().filter(|&&b| b).count()
    }

    /// Columns that are set in at least one row.
    pub fn any_per_col(&self) -> Vec<bool> {
        let mut out = vec![false; self.cols];
        for i in 0..self.rows {
            for (o, &b) in out.iter_mut().zip(self.row(i)) {
                *o |= b;
            }
        }
        out
    }

    /// Columns that are set in every row.
    pub fn all_per_col(&self) -> Vec<bool> {
        let mut out = vec![true; self.cols];
        for i in 0..self.rows {
            for (o, &b) in out.iter_mut().zip(self.row(i)) {
                *o &= b;
            }
        }
        out
    }
}

/// Pre- and post-nonlinearity activations of every layer for one batch.
#[derive(Debug, Clone)]
pub struct ForwardPass {
    /// v_i per weight layer, batch rows.
    pub pre: Vec<Matrix>,
    /// phi(v_i) per weight layer; the last entry is the network output.
    pub post: Vec<Matrix>,
}

impl ForwardPass {
    pub fn output(&self) -> &Matrix {
        self.post.last().unwrap()
    }
}

/// Plain test-time pass: no controller, no gating, no sparsity. Predictions
/// depend on the forward weights alone.
pub fn feedforward_pass(params: &NetworkParams, x: &Matrix) -> Result<ForwardPass> {
    if x.cols() != params.input_dim() {
        return Err(Error::ShapeMismatch(format!(
            "input has {} features, network expects {}",
            x.cols(),
            params.input_dim()
        )));
    }
    let mut pre = Vec::with_capacity(params.num_layers());
    let mut post = Vec::with_capacity(params.num_layers());
    let mut current = x;
    for i in 0..params.num_layers() {
        let v = current.matmul_bt(&params.weights[i])?;
        let r = params.activation(i).apply(&v);
        pre.push(v);
        post.push(r);
        current = post.last().unwrap();
    }
    Ok(ForwardPass { pre, post })
}

/// One small matrix per sample; feedback weights are per-datapoint.
#[derive(Debug, Clone)]
pub struct PerSampleMatrices {
    samples: usize,
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl PerSampleMatrices {
    pub fn zeros(samples: usize, rows: usize, cols: usize) -> Self {
        PerSampleMatrices {
            samples,
            rows,
            cols,
            data: vec![0.0; samples * rows * cols],
        }
    }

    pub fn samples(&self) -> usize {
        self.samples
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    #[inline]
    pub fn row(&self, sample: usize, r: usize) -> &[f64] {
        let base = (sample * self.rows + r) * self.cols;
        &self.data[base..base + self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, sample: usize, r: usize) -> &mut [f64] {
        let base = (sample * self.rows + r) * self.cols;
        &mut self.data[base..base + self.cols]
    }

    /// Per-sample matrix-vector product: `out[b] = M[b] @ u[b]`, written into
    /// `out` (batch x rows). `u` is batch x cols.
    pub fn apply_batched(&self, u: &Matrix, out: &mut Matrix) {
        debug_assert_eq!(u.rows(), self.samples);
        debug_assert_eq!(u.cols(), self.cols);
        debug_assert_eq!(out.shape(), (self.samples, self.rows));
        for b in 0..self.samples {
            let u_row = u.row(b);
            let out_row = out.row_mut(b);
            for (r, o) in out_row.iter_mut().enumerate() {
                *o = dot(self.row(b, r), u_row);
            }
        }
    }
}

/// Feedback weights Q_i for every layer, recomputed per datapoint as the
/// transposed Jacobian of the network output with respect to the layer's
/// pre-activations, evaluated at the feedforward state.
#[derive(Debug, Clone)]
pub struct FeedbackWeights {
    /// Indexed by weight layer; each entry holds one n_i x n_L matrix per
    /// sample.
    pub per_layer: Vec<PerSampleMatrices>,
}

pub fn compute_feedback_weights(
    params: &NetworkParams,
    fp: &ForwardPass,
) -> Result<FeedbackWeights> {
    let num_layers = params.num_layers();
    let n_out = params.output_dim();
    let batch = fp.pre[0].rows();

    let mut per_layer: Vec<PerSampleMatrices> = (0..num_layers)
        .map(|i| PerSampleMatrices::zeros(batch, params.width(i), n_out))
        .collect();

    // chain holds d r_out / d v_i (n_out x n_i) while walking down the net
    for b in 0..batch {
        let out_deriv = params.activation(num_layers - 1);
        let v_out = fp.pre[num_layers - 1].row(b);
        let mut chain = Matrix::zeros(n_out, n_out);
        for o in 0..n_out {
            chain.set(o, o, out_deriv.derivative_scalar(v_out[o]));
        }
        store_transposed(&chain, &mut per_layer[num_layers - 1], b);

        for i in (0..num_layers - 1).rev() {
            let mut next = chain.matmul(&params.weights[i + 1])?;
            let v_i = fp.pre[i].row(b);
            let act = params.activation(i);
            for o in 0..next.rows() {
                for (j, value) in next.row_mut(o).iter_mut().enumerate() {
                    *value *= act.derivative_scalar(v_i[j]);
                }
            }
            store_transposed(&next, &mut per_layer[i], b);
            chain = next;
        }
    }

    Ok(FeedbackWeights { per_layer })
}

fn store_transposed(chain: &Matrix, dst: &mut PerSampleMatrices, sample: usize) {
    // chain is n_out x n_i; Q is its transpose
    for j in 0..chain.cols() {
        let row = dst.row_mut(sample, j);
        for (o, value) in row.iter_mut().enumerate() {
            *value = chain.get(o, j);
        }
    }
}

/// Desired output: the current output nudged against the softmax
/// cross-entropy gradient by `target_step`.
pub fn output_target(output: &Matrix, labels: &[u8], target_step: f64) -> Result<Matrix> {
    if output.rows() != labels.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} outputs vs {} labels",
            output.rows(),
            labels.len()
        )));
    }
    let mut grad = error_signal(output, labels);
    grad.scale(-target_step);
    let mut target = output.clone();
    target.add_assign(&grad)?;
    Ok(target)
}

/// Score every neuron by a scale-balanced mix of feedforward and feedback
/// magnitude and suppress the `floor(fraction * n)` lowest-scoring ones.
/// Each magnitude is divided by its layer mean before mixing so `rho` is a
/// genuine proportion; ties break toward the lower index.
pub fn wta_select(v_ff: &[f64], v_fb: &[f64], rho: f64, fraction: f64) -> Result<Vec<bool>> {
    if v_ff.len() != v_fb.len() {
        return Err(Error::ShapeMismatch(format!(
            "wta_select: {} vs {} entries",
            v_ff.len(),
            v_fb.len()
        )));
    }
    if !(0.0..=1.0).contains(&rho) || !(0.0..1.0).contains(&fraction) {
        return Err(Error::InvalidArgument(
            "wta_select: rho in [0,1], fraction in [0,1) required".into(),
        ));
    }
    let mut mask = vec![false; v_ff.len()];
    let mut scratch = Vec::new();
    wta_select_into(v_ff, v_fb, rho, fraction, &mut mask, &mut scratch);
    Ok(mask)
}

fn wta_select_into(
    v_ff: &[f64],
    v_fb: &[f64],
    rho: f64,
    fraction: f64,
    mask: &mut [bool],
    scratch: &mut Vec<(f64, usize)>,
) {
    let n = v_ff.len();
    mask.fill(false);
    let count = (fraction * n as f64).floor() as usize;
    if count == 0 {
        return;
    }

    let mean_ff = v_ff.iter().map(|v| v.abs()).sum::<f64>() / n as f64;
    let mean_fb = v_fb.iter().map(|v| v.abs()).sum::<f64>() / n as f64;
    let ff_scale = if mean_ff > 0.0 { (1.0 - rho) / mean_ff } else { 0.0 };
    let fb_scale = if mean_fb > 0.0 { rho / mean_fb } else { 0.0 };

    scratch.clear();
    scratch.extend(
        (0..n).map(|j| (ff_scale * v_ff[j].abs() + fb_scale * v_fb[j].abs(), j)),
    );
    scratch.select_nth_unstable_by(count - 1, |a, b| {
        a.0.total_cmp(&b.0).then(a.1.cmp(&b.1))
    });
    for &(_, j) in scratch.iter().take(count) {
        mask[j] = true;
    }
}

/// Multiplicative lateral gating with activity conservation: the drive is
/// scaled elementwise by `sigmoid(R |r|)` and then rescaled so its summed
/// absolute magnitude is unchanged. A drive gated to exactly zero stays zero
/// (degenerate, logged at debug level).
pub fn apply_recurrent_gating(pre_gate: &[f64], rec: &Matrix, r: &[f64]) -> Result<Vec<f64>> {
    let n = pre_gate.len();
    if rec.shape() != (n, n) || r.len() != n {
        return Err(Error::ShapeMismatch(format!(
            "gating: drive {n}, R {}x{}, r {}",
            rec.rows(),
            rec.cols(),
            r.len()
        )));
    }
    let abs_r: Vec<f64> = r.iter().map(|v| v.abs()).collect();
    let mut gated = vec![0.0; n];
    for j in 0..n {
        gated[j] = pre_gate[j] * sigmoid(dot(rec.row(j), &abs_r));
    }
    rescale_row(&mut gated, pre_gate);
    Ok(gated)
}

/// Batch version used inside the integration loop: `pre` and `r` are
/// batch x n, `abs_buf`/`out` are reused across steps.
fn gate_batch(pre: &Matrix, rec: &Matrix, r: &Matrix, abs_buf: &mut Matrix, out: &mut Matrix) {
    debug_assert_eq!(pre.shape(), r.shape());
    for (dst, &src) in abs_buf.as_mut_slice().iter_mut().zip(r.as_slice()) {
        *dst = src.abs();
    }
    // out[b][j] = sigmoid(sum_k R[j][k] |r[b][k]|)
    for b in 0..pre.rows() {
        let abs_row = abs_buf.row(b);
        let out_row = out.row_mut(b);
        for (j, o) in out_row.iter_mut().enumerate() {
            *o = sigmoid(dot(rec.row(j), abs_row));
        }
        let pre_row = pre.row(b);
        for (o, &p) in out_row.iter_mut().zip(pre_row) {
            *o *= p;
        }
        rescale_row(out_row, pre_row);
    }
}

/// Rescale `gated` so its L1 norm matches `pre`'s.
fn rescale_row(gated: &mut [f64], pre: &[f64]) {
    let pre_norm: f64 = pre.iter().map(|v| v.abs()).sum();
    let gated_norm: f64 = gated.iter().map(|v| v.abs()).sum();
    if gated_norm > 0.0 {
        let c = pre_norm / gated_norm;
        for v in gated.iter_mut() {
            *v *= c;
        }
    } else if pre_norm > 0.0 {
        log::debug!("recurrent gate annihilated a non-zero drive; leaving zeros");
    }
}

/// Steady state reached by the controlled dynamics for one batch.
#[derive(Debug, Clone)]
pub struct ConvergedState {
    /// r_i at the settled state: controller and gating included, suppressed
    /// entries exactly zero (output layer never masked).
    pub targets: Vec<Matrix>,
    /// phi of the feedforward drive at the settled state: gating and the
    /// masked presynaptic activity included, controller excluded. Not masked
    /// postsynaptically, so a suppressed neuron's entry is what it would
    /// have fired.
    pub ff_activations: Vec<Matrix>,
    /// Feedforward drive before gating, W_i r_{i-1,ss}.
    pub pre_gate: Vec<Matrix>,
    /// Suppression masks; for the output layer this only marks update
    /// eligibility.
    pub suppressed: Vec<BoolMat>,
    /// r_L* minus the settled output.
    pub output_error: Matrix,
    pub steps: usize,
    pub converged: bool,
}

impl ConvergedState {
    pub fn num_layers(&self) -> usize {
        self.targets.len()
    }

    pub fn batch_size(&self) -> usize {
        self.targets[0].rows()
    }
}

/// Integrate the controlled dynamics for one batch until the output error
/// settles below tolerance (only checked once the sparsity ramp is complete)
/// or the step budget runs out.
///
/// `feedback` must be freshly computed for `x`.
pub fn simulate_dynamics(
    params: &NetworkParams,
    x: &Matrix,
    r_target: &Matrix,
    feedback: &FeedbackWeights,
    cfg: &DfcConfig,
) -> Result<ConvergedState> {
    let num_layers = params.num_layers();
    cfg.validate(num_layers)?;
    let batch = x.rows();
    let n_out = params.output_dim();
    if r_target.shape() != (batch, n_out) {
        return Err(Error::ShapeMismatch(format!(
            "target {}x{}, expected {}x{}",
            r_target.rows(),
            r_target.cols(),
            batch,
            n_out
        )));
    }

    // state: v initialized by an ungated feedforward sweep (initial gating is
    // uniform because r starts at the sweep values and masks are empty)
    let fp = feedforward_pass(params, x)?;
    let mut v = fp.pre;
    let mut r: Vec<Matrix> = (0..num_layers)
        .map(|i| Matrix::zeros(batch, params.width(i)))
        .collect();
    let mut masks: Vec<BoolMat> = (0..num_layers)
        .map(|i| BoolMat::falses(batch, params.width(i)))
        .collect();
    let mut u_int = Matrix::zeros(batch, n_out);
    let mut u = Matrix::zeros(batch, n_out);
    let mut pre_gate: Vec<Matrix> = r.clone();
    let mut drive: Vec<Matrix> = r.clone();
    let mut fb: Vec<Matrix> = r.clone();
    let mut abs_buf: Vec<Matrix> = r.clone();
    let mut err = Matrix::zeros(batch, n_out);
    let mut scratch: Vec<(f64, usize)> = Vec::new();

    let dt_v = cfg.dt / cfg.tau_v;
    let dt_u = cfg.dt / cfg.tau_u;
    let mut steps_taken = 0usize;
    let mut converged = false;

    for step in 1..=cfg.n_steps {
        compute_masked_activations(params, &v, &masks, &mut r);
        compute_error(r_target, r.last().unwrap(), &mut err);
        if step - 1 >= cfg.ramp_steps && max_row_norm(&err) < cfg.conv_tol {
            converged = true;
            break;
        }

        // leaky integral + proportional control
        for b in 0..batch {
            let e_row = err.row(b);
            let ui_row = u_int.row_mut(b);
            for (ui, &e) in ui_row.iter_mut().zip(e_row) {
                *ui += dt_u * (e - cfg.alpha_u * *ui);
            }
            let u_row = u.row_mut(b);
            for ((uu, &e), &ui) in u_row.iter_mut().zip(e_row).zip(u_int.row(b)) {
                *uu = cfg.k_p * e + cfg.k_i * ui;
            }
        }

        for i in 0..num_layers {
            let below = if i == 0 { x } else { &r[i - 1] };
            matmul_bt_into(below, &params.weights[i], &mut pre_gate[i]);
            if i < params.num_hidden_layers() {
                let (pg, dr, ab) = (&pre_gate[i], &mut drive[i], &mut abs_buf[i]);
                gate_batch(pg, &params.recurrent[i], &r[i], ab, dr);
            } else {
                drive[i].as_mut_slice().copy_from_slice(pre_gate[i].as_slice());
            }
            feedback.per_layer[i].apply_batched(&u, &mut fb[i]);

            let vi = v[i].as_mut_slice();
            let di = drive[i].as_slice();
            let fi = fb[i].as_slice();
            for ((vv, &dd), &ff) in vi.iter_mut().zip(di).zip(fi) {
                *vv += dt_v * (-*vv + dd + ff);
            }
        }

        for (i, vi) in v.iter().enumerate() {
            let worst = vi.max_abs();
            if !worst.is_finite() || worst > cfg.divergence_limit {
                return Err(Error::Diverged(format!(
                    "layer {i} reached |v| = {worst:.3e} at step {step}"
                )));
            }
        }

        steps_taken = step;
        for i in 0..num_layers {
            let fraction = cfg.scheduled_fraction(i, step);
            for b in 0..batch {
                wta_select_into(
                    drive[i].row(b),
                    fb[i].row(b),
                    cfg.rho,
                    fraction,
                    masks[i].row_mut(b),
                    &mut scratch,
                );
            }
        }
    }

    compute_masked_activations(params, &v, &masks, &mut r);
    compute_error(r_target, r.last().unwrap(), &mut err);
    if !converged && cfg.ramp_steps <= steps_taken && max_row_norm(&err) < cfg.conv_tol {
        converged = true;
    }

    // settled feedforward-only quantities, driven by the masked presynaptic
    // targets but without the controller contribution
    let mut ff_activations = Vec::with_capacity(num_layers);
    let mut pre_gate_ss = Vec::with_capacity(num_layers);
    for i in 0..num_layers {
        let below = if i == 0 { x } else { &r[i - 1] };
        let pg = below.matmul_bt(&params.weights[i])?;
        let gated = if i < params.num_hidden_layers() {
            let mut out = Matrix::zeros(batch, params.width(i));
            let mut abs = Matrix::zeros(batch, params.width(i));
            gate_batch(&pg, &params.recurrent[i], &r[i], &mut abs, &mut out);
            out
        } else {
            pg.clone()
        };
        ff_activations.push(params.activation(i).apply(&gated));
        pre_gate_ss.push(pg);
    }

    Ok(ConvergedState {
        targets: r,
        ff_activations,
        pre_gate: pre_gate_ss,
        suppressed: masks,
        output_error: err,
        steps: steps_taken,
        converged,
    })
}

fn compute_masked_activations(
    params: &NetworkParams,
    v: &[Matrix],
    masks: &[BoolMat],
    r: &mut [Matrix],
) {
    let last = params.num_layers() - 1;
    for i in 0..params.num_layers() {
        let act = params.activation(i);
        let vi = v[i].as_slice();
        let ri = r[i].as_mut_slice();
        if i == last {
            // output activity is never masked; its mask gates updates only
            for (rr, &vv) in ri.iter_mut().zip(vi) {
                *rr = act.apply_scalar(vv);
            }
        } else {
            let rows = v[i].rows();
            let cols = v[i].cols();
            for b in 0..rows {
                let mask_row = masks[i].row(b);
                for j in 0..cols {
                    let idx = b * cols + j;
                    ri[idx] = if mask_row[j] { 0.0 } else { act.apply_scalar(vi[idx]) };
                }
            }
        }
    }
}

fn compute_error(target: &Matrix, output: &Matrix, err: &mut Matrix) {
    for ((e, &t), &o) in err
        .as_mut_slice()
        .iter_mut()
        .zip(target.as_slice())
        .zip(output.as_slice())
    {
        *e = t - o;
    }
}

fn max_row_norm(m: &Matrix) -> f64 {
    (0..m.rows())
        .map(|i| dot(m.row(i), m.row(i)).sqrt())
        .fold(0.0f64, f64::max)
}

fn matmul_bt_into(a: &Matrix, b: &Matrix, out: &mut Matrix) {
    debug_assert_eq!(a.cols(), b.cols());
    debug_assert_eq!(out.shape(), (a.rows(), b.rows()));
    for i in 0..a.rows() {
        let a_row = a.row(i);
        let out_row = out.row_mut(i);
        for j in 0..b.rows() {
            out_row[j] = dot(a_row, b.row(j));
        }
    }
}
