//! The frequency-domain residual network.
//!
//! Each layer owns `K` parallel branches. Branch `j` of layer `i` multiplies
//! the layer input elementwise by a per-frequency weight map and adds a bias
//! map (`Q = F .* W + B`), then circularly convolves `Q` with a small
//! `(2N+1) x (2N+1)` smoothing kernel. The branch outputs are summed into the
//! layer output `S_i`, which feeds the next layer. A final additive stage
//! mixes every layer output with scalar coefficients and applies one last
//! per-frequency weight map: `P = (sum_i alpha_i * S_i) .* W_final`.
//!
//! All circular convolutions and their adjoints run as dense window sums
//! over a wrap-padded copy of the operand, which keeps the inner loops on
//! contiguous slices. [`backward`] consumes the [`ForwardTrace`] recorded by
//! [`forward`] and returns exact analytic gradients for every parameter class
//! plus the gradient with respect to the input spectrum; the adjoint of a
//! circular convolution is the matching circular correlation, and kernel
//! gradients are correlations of the upstream gradient with the convolution
//! input at every tap lag.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::{FrequencyMap, Grid};

/// Shape of the network: layer/branch counts and the plane it operates on.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NetworkArch {
    /// Number of layers `L`.
    pub layers: usize,
    /// Branches (weight/bias/kernel triples) per layer, `K`.
    pub kernels_per_layer: usize,
    /// Smoothing kernel half-width `N`; kernels are `(2N+1) x (2N+1)`.
    pub half_width: usize,
    /// Plane height the network is bound to.
    pub height: usize,
    /// Plane width the network is bound to.
    pub width: usize,
    /// Tie per-frequency weights across Hartley mirror frequencies
    /// (`(u, v) <-> (R-u mod R, C-v mod C)`), halving the effective weight
    /// count; biases and kernels are unaffected.
    pub tie_symmetric_weights: bool,
}

impl NetworkArch {
    /// Kernel side length `2N + 1`.
    pub fn kernel_side(&self) -> usize {
        2 * self.half_width + 1
    }

    pub fn branch_count(&self) -> usize {
        self.layers * self.kernels_per_layer
    }

    pub fn validate(&self) -> Result<()> {
        if self.layers == 0 || self.kernels_per_layer == 0 {
            return Err(Error::invalid("arch: layers and kernels_per_layer must be at least 1"));
        }
        if self.height == 0 || self.width == 0 {
            return Err(Error::invalid("arch: plane dimensions must be at least 1x1"));
        }
        if self.kernel_side() > self.height.min(self.width) {
            return Err(Error::invalid(format!(
                "arch: kernel side {} exceeds plane side {}x{}",
                self.kernel_side(),
                self.height,
                self.width
            )));
        }
        Ok(())
    }
}

/// All learnable tensors. Branch tensors are stored layer-major: the branch
/// `j` of layer `i` lives at index `i * kernels_per_layer + j`.
#[derive(Clone, Debug, PartialEq)]
pub struct NetworkParams {
    pub arch: NetworkArch,
    /// Per-frequency weight maps `W`, one `height x width` grid per branch.
    pub weights: Vec<Grid>,
    /// Bias maps `B`, same layout as `weights`.
    pub biases: Vec<Grid>,
    /// Smoothing kernels `C`, one `(2N+1) x (2N+1)` grid per branch.
    pub kernels: Vec<Grid>,
    /// Additive-stage mixing coefficients `alpha`, one per layer.
    pub layer_mix: Vec<f64>,
    /// Final per-frequency weight map applied after mixing.
    pub final_weight: Grid,
}

impl NetworkParams {
    /// Flat index of branch `k` in layer `l`.
    pub fn branch(&self, l: usize, k: usize) -> usize {
        l * self.arch.kernels_per_layer + k
    }

    /// Random initialization, deterministic in `seed`.
    ///
    /// Weights start near identity (`U[0.9, 1.1]`), biases at zero, kernels
    /// as a centered unit impulse plus `U[-0.01, 0.01]` jitter, the mixing
    /// coefficients uniformly at `1/L`, and the final weight map small
    /// (`U[-0.01, 0.01]`) so the initial residual is nearly zero.
    pub fn init(arch: &NetworkArch, seed: u64) -> Result<NetworkParams> {
        arch.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let side = arch.kernel_side();
        let (h, w) = (arch.height, arch.width);
        let branches = arch.branch_count();

        let mut weights = Vec::with_capacity(branches);
        let mut kernels = Vec::with_capacity(branches);
        for _ in 0..branches {
            let mut map = Grid::from_fn(h, w, |_, _| rng.random_range(0.9..1.1));
            if arch.tie_symmetric_weights {
                map = symmetrize_mirror(&map);
            }
            weights.push(map);
            let mut kernel = Grid::from_fn(side, side, |_, _| rng.random_range(-0.01..0.01));
            kernel[(arch.half_width, arch.half_width)] += 1.0;
            kernels.push(kernel);
        }
        let biases = vec![Grid::new(h, w); branches];
        let layer_mix = vec![1.0 / arch.layers as f64; arch.layers];
        let final_weight = Grid::from_fn(h, w, |_, _| rng.random_range(-0.01..0.01));

        Ok(NetworkParams { arch: arch.clone(), weights, biases, kernels, layer_mix, final_weight })
    }

    /// Parameters for which the residual is identically zero: identity
    /// branches with all mixing coefficients and the final weight map at
    /// zero. Useful as a do-nothing baseline model.
    pub fn zero_residual(arch: &NetworkArch) -> Result<NetworkParams> {
        arch.validate()?;
        let branches = arch.branch_count();
        let side = arch.kernel_side();
        let mut kernel = Grid::new(side, side);
        kernel[(arch.half_width, arch.half_width)] = 1.0;
        Ok(NetworkParams {
            arch: arch.clone(),
            weights: vec![Grid::filled(arch.height, arch.width, 1.0); branches],
            biases: vec![Grid::new(arch.height, arch.width); branches],
            kernels: vec![kernel; branches],
            layer_mix: vec![0.0; arch.layers],
            final_weight: Grid::new(arch.height, arch.width),
        })
    }

    /// Checks that the tensor counts and shapes agree with `arch`.
    pub fn validate(&self) -> Result<()> {
        self.arch.validate()?;
        let branches = self.arch.branch_count();
        let side = self.arch.kernel_side();
        if self.weights.len() != branches
            || self.biases.len() != branches
            || self.kernels.len() != branches
        {
            return Err(Error::mismatch(format!(
                "params: expected {branches} branch tensors, got {}/{}/{}",
                self.weights.len(),
                self.biases.len(),
                self.kernels.len()
            )));
        }
        if self.layer_mix.len() != self.arch.layers {
            return Err(Error::mismatch(format!(
                "params: expected {} mixing coefficients, got {}",
                self.arch.layers,
                self.layer_mix.len()
            )));
        }
        for grid in self.weights.iter().chain(&self.biases) {
            if grid.dims() != (self.arch.height, self.arch.width) {
                return Err(Error::mismatch("params: weight/bias map shape"));
            }
        }
        for kernel in &self.kernels {
            if kernel.dims() != (side, side) {
                return Err(Error::mismatch("params: kernel shape"));
            }
        }
        if self.final_weight.dims() != (self.arch.height, self.arch.width) {
            return Err(Error::mismatch("params: final weight map shape"));
        }
        Ok(())
    }

    /// Per-layer views of the branch tensors for layer `l`.
    fn layer_slices(&self, l: usize) -> (&[Grid], &[Grid], &[Grid]) {
        let k = self.arch.kernels_per_layer;
        let range = l * k..(l + 1) * k;
        (&self.weights[range.clone()], &self.biases[range.clone()], &self.kernels[range])
    }

    /// Total number of scalar parameters.
    pub fn scalar_count(&self) -> usize {
        let per_map = self.arch.height * self.arch.width;
        let side = self.arch.kernel_side();
        self.arch.branch_count() * (2 * per_map + side * side)
            + self.arch.layers
            + per_map
    }

    pub fn is_finite(&self) -> bool {
        self.weights.iter().all(Grid::is_finite)
            && self.biases.iter().all(Grid::is_finite)
            && self.kernels.iter().all(Grid::is_finite)
            && self.layer_mix.iter().all(|v| v.is_finite())
            && self.final_weight.is_finite()
    }
}

/// Gradients for every parameter class, same layout as [`NetworkParams`].
#[derive(Clone, Debug)]
pub struct ParamGradients {
    pub weights: Vec<Grid>,
    pub biases: Vec<Grid>,
    pub kernels: Vec<Grid>,
    pub layer_mix: Vec<f64>,
    pub final_weight: Grid,
}

impl ParamGradients {
    pub fn zeros_like(params: &NetworkParams) -> ParamGradients {
        let arch = &params.arch;
        let side = arch.kernel_side();
        let branches = arch.branch_count();
        ParamGradients {
            weights: vec![Grid::new(arch.height, arch.width); branches],
            biases: vec![Grid::new(arch.height, arch.width); branches],
            kernels: vec![Grid::new(side, side); branches],
            layer_mix: vec![0.0; arch.layers],
            final_weight: Grid::new(arch.height, arch.width),
        }
    }

    /// Accumulates `other` into `self`.
    pub fn add_assign(&mut self, other: &ParamGradients) -> Result<()> {
        if self.weights.len() != other.weights.len()
            || self.layer_mix.len() != other.layer_mix.len()
        {
            return Err(Error::mismatch("gradient accumulation: layout"));
        }
        for (a, b) in self.weights.iter_mut().zip(&other.weights) {
            a.add_scaled(b, 1.0)?;
        }
        for (a, b) in self.biases.iter_mut().zip(&other.biases) {
            a.add_scaled(b, 1.0)?;
        }
        for (a, b) in self.kernels.iter_mut().zip(&other.kernels) {
            a.add_scaled(b, 1.0)?;
        }
        for (a, b) in self.layer_mix.iter_mut().zip(&other.layer_mix) {
            *a += b;
        }
        self.final_weight.add_scaled(&other.final_weight, 1.0)
    }

    pub fn scale(&mut self, factor: f64) {
        for grid in self
            .weights
            .iter_mut()
            .chain(&mut self.biases)
            .chain(&mut self.kernels)
        {
            for v in grid.as_mut_slice() {
                *v *= factor;
            }
        }
        for v in &mut self.layer_mix {
            *v *= factor;
        }
        for v in self.final_weight.as_mut_slice() {
            *v *= factor;
        }
    }

    pub fn is_finite(&self) -> bool {
        self.weights.iter().all(Grid::is_finite)
            && self.biases.iter().all(Grid::is_finite)
            && self.kernels.iter().all(Grid::is_finite)
            && self.layer_mix.iter().all(|v| v.is_finite())
            && self.final_weight.is_finite()
    }

    pub fn max_abs(&self) -> f64 {
        let grids = self
            .weights
            .iter()
            .chain(&self.biases)
            .chain(&self.kernels)
            .fold(0.0f64, |m, g| m.max(g.max_abs()));
        let mix = self.layer_mix.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        grids.max(mix).max(self.final_weight.max_abs())
    }
}

/// Everything [`backward`] needs from a forward evaluation.
#[derive(Clone, Debug)]
pub struct ForwardTrace {
    /// Input to each layer: element 0 is the network input, element `i`
    /// equals `layer_sums[i - 1]`.
    pub layer_inputs: Vec<FrequencyMap>,
    /// Weighted inputs `Q` per branch, layer-major.
    pub products: Vec<FrequencyMap>,
    /// Layer outputs `S_i`.
    pub layer_sums: Vec<FrequencyMap>,
    /// Mixed map `sum_i alpha_i * S_i` feeding the final weighting.
    pub mixed: FrequencyMap,
    /// Network output `P` (the predicted residual spectrum).
    pub prediction: FrequencyMap,
}

/// Averages a map with its Hartley mirror image so that
/// `g(u, v) == g((R-u) mod R, (C-v) mod C)`.
pub fn symmetrize_mirror(map: &Grid) -> Grid {
    let (rows, cols) = map.dims();
    Grid::from_fn(rows, cols, |u, v| {
        0.5 * (map[(u, v)] + map[((rows - u) % rows, (cols - v) % cols)])
    })
}

/// Per-frequency weighting `Q = F .* W + B`.
pub fn weighting_forward(f: &FrequencyMap, w: &Grid, b: &Grid) -> Result<FrequencyMap> {
    f.check_nonempty("weighting_forward")?;
    f.check_same_dims(w, "weighting_forward: weight map")?;
    f.check_same_dims(b, "weighting_forward: bias map")?;
    let mut out = b.clone();
    let dst = out.as_mut_slice();
    for (i, (&fv, &wv)) in f.as_slice().iter().zip(w.as_slice()).enumerate() {
        dst[i] += fv * wv;
    }
    Ok(out)
}

/// Wrap-padded copy of `src` with a border of `n` cells on every side.
/// Returns the padded buffer and its column count.
fn extend_circular(src: &Grid, n: usize) -> (Vec<f64>, usize) {
    let (rows, cols) = src.dims();
    let (erows, ecols) = (rows + 2 * n, cols + 2 * n);
    let mut ext = vec![0.0; erows * ecols];
    for i in 0..erows {
        let sr = (i + rows - n) % rows;
        let row = src.row(sr);
        let dst = &mut ext[i * ecols..(i + 1) * ecols];
        dst[..n].copy_from_slice(&row[cols - n..]);
        dst[n..n + cols].copy_from_slice(row);
        dst[n + cols..].copy_from_slice(&row[..n]);
    }
    (ext, ecols)
}

/// `out[l][k] = sum_{a,b} taps[a][b] * ext[l + a][k + b]` over all output
/// cells; `ext` must be the wrap-padded operand. Circular convolution uses
/// the 180-degree-rotated kernel as `taps`, circular correlation the kernel
/// itself.
fn dense_window_sum(ext: &[f64], ecols: usize, taps: &Grid, rows: usize, cols: usize) -> Grid {
    let side = taps.rows();
    let mut out = Grid::new(rows, cols);
    out.as_mut_slice()
        .par_chunks_mut(cols)
        .enumerate()
        .for_each(|(l, acc)| {
            for a in 0..side {
                let base = (l + a) * ecols;
                for b in 0..side {
                    let tap = taps[(a, b)];
                    let src = &ext[base + b..base + b + cols];
                    for (d, &s) in acc.iter_mut().zip(src) {
                        *d += tap * s;
                    }
                }
            }
        });
    out
}

fn rot180(kernel: &Grid) -> Grid {
    let (rows, cols) = kernel.dims();
    Grid::from_fn(rows, cols, |i, j| kernel[(rows - 1 - i, cols - 1 - j)])
}

fn check_kernel(q: &Grid, kernel: &Grid, what: &str) -> Result<usize> {
    q.check_nonempty(what)?;
    let side = kernel.rows();
    if kernel.cols() != side {
        return Err(Error::invalid(format!("{what}: kernel must be square")));
    }
    if side % 2 == 0 || side == 0 {
        return Err(Error::invalid(format!("{what}: kernel side must be odd, got {side}")));
    }
    if side > q.rows().min(q.cols()) {
        return Err(Error::invalid(format!(
            "{what}: kernel side {side} exceeds plane {}x{}",
            q.rows(),
            q.cols()
        )));
    }
    Ok((side - 1) / 2)
}

/// Circular convolution with a small kernel:
/// `R(l, k) = sum_{m,n in [-N, N]} Q((l - m) mod rows, (k - n) mod cols) * C(m, n)`.
pub fn smoothing_forward(q: &FrequencyMap, kernel: &Grid) -> Result<FrequencyMap> {
    let n = check_kernel(q, kernel, "smoothing_forward")?;
    let (rows, cols) = q.dims();
    let (ext, ecols) = extend_circular(q, n);
    Ok(dense_window_sum(&ext, ecols, &rot180(kernel), rows, cols))
}

/// Adjoint of [`smoothing_forward`] with respect to its input: circular
/// correlation `dQ(l, k) = sum_{m,n} dR((l + m) mod rows, (k + n) mod cols) * C(m, n)`.
fn smoothing_backward_input(d_r: &Grid, kernel: &Grid) -> Result<Grid> {
    let n = check_kernel(d_r, kernel, "smoothing_backward_input")?;
    let (rows, cols) = d_r.dims();
    let (ext, ecols) = extend_circular(d_r, n);
    Ok(dense_window_sum(&ext, ecols, kernel, rows, cols))
}

/// Kernel gradient of [`smoothing_forward`]:
/// `dC(m, n) = sum_{l,k} dR(l, k) * Q((l - m) mod rows, (k - n) mod cols)`.
fn smoothing_backward_kernel(d_r: &Grid, q: &Grid, side: usize) -> Grid {
    let n = (side - 1) / 2;
    let (rows, cols) = q.dims();
    let (ext, ecols) = extend_circular(q, n);
    let d_r_data = d_r.as_slice();
    let mut lagged = Grid::new(side, side);
    lagged
        .as_mut_slice()
        .par_chunks_mut(side)
        .enumerate()
        .for_each(|(a, row)| {
            for (b, cell) in row.iter_mut().enumerate() {
                let mut acc = 0.0;
                for l in 0..rows {
                    let src = &ext[(l + a) * ecols + b..(l + a) * ecols + b + cols];
                    let up = &d_r_data[l * cols..(l + 1) * cols];
                    let mut dot = 0.0;
                    for (&u, &s) in up.iter().zip(src) {
                        dot += u * s;
                    }
                    acc += dot;
                }
                *cell = acc;
            }
        });
    // lagged[a][b] corresponds to lag (m, n) = (N - a, N - b).
    rot180(&lagged)
}

/// One full layer: sum over branches of smoothed weighted inputs.
pub fn layer_forward(
    f: &FrequencyMap,
    weights: &[Grid],
    biases: &[Grid],
    kernels: &[Grid],
) -> Result<FrequencyMap> {
    if weights.is_empty() || weights.len() != biases.len() || weights.len() != kernels.len() {
        return Err(Error::mismatch(format!(
            "layer_forward: branch counts {}/{}/{}",
            weights.len(),
            biases.len(),
            kernels.len()
        )));
    }
    let mut sum = Grid::new(f.rows(), f.cols());
    for ((w, b), c) in weights.iter().zip(biases).zip(kernels) {
        let q = weighting_forward(f, w, b)?;
        sum.add_scaled(&smoothing_forward(&q, c)?, 1.0)?;
    }
    Ok(sum)
}

/// Additive stage: `P = (sum_i alpha_i * S_i) .* W_final`.
pub fn additive_forward(
    layer_sums: &[FrequencyMap],
    layer_mix: &[f64],
    final_weight: &Grid,
) -> Result<FrequencyMap> {
    let (mixed, prediction) = additive_forward_parts(layer_sums, layer_mix, final_weight)?;
    drop(mixed);
    Ok(prediction)
}

fn additive_forward_parts(
    layer_sums: &[FrequencyMap],
    layer_mix: &[f64],
    final_weight: &Grid,
) -> Result<(FrequencyMap, FrequencyMap)> {
    if layer_sums.is_empty() || layer_sums.len() != layer_mix.len() {
        return Err(Error::mismatch(format!(
            "additive_forward: {} layer outputs vs {} coefficients",
            layer_sums.len(),
            layer_mix.len()
        )));
    }
    let mut mixed = Grid::new(final_weight.rows(), final_weight.cols());
    for (s, &alpha) in layer_sums.iter().zip(layer_mix) {
        mixed.add_scaled(s, alpha)?;
    }
    let prediction = mixed.hadamard(final_weight)?;
    Ok((mixed, prediction))
}

/// Runs the network on an input spectrum, recording everything the backward
/// pass needs. The prediction is available as `trace.prediction`.
pub fn forward(input: &FrequencyMap, params: &NetworkParams) -> Result<ForwardTrace> {
    params.validate()?;
    if input.dims() != (params.arch.height, params.arch.width) {
        return Err(Error::mismatch(format!(
            "forward: input {}x{} vs network {}x{}",
            input.rows(),
            input.cols(),
            params.arch.height,
            params.arch.width
        )));
    }
    if !input.is_finite() {
        return Err(Error::invalid("forward: input contains non-finite values"));
    }

    let arch = &params.arch;
    let mut layer_inputs = Vec::with_capacity(arch.layers);
    let mut products = Vec::with_capacity(arch.branch_count());
    let mut layer_sums = Vec::with_capacity(arch.layers);

    let mut current = input.clone();
    for l in 0..arch.layers {
        let (weights, biases, kernels) = params.layer_slices(l);
        let mut sum = Grid::new(current.rows(), current.cols());
        for ((w, b), c) in weights.iter().zip(biases).zip(kernels) {
            let q = weighting_forward(&current, w, b)?;
            sum.add_scaled(&smoothing_forward(&q, c)?, 1.0)?;
            products.push(q);
        }
        layer_inputs.push(current);
        layer_sums.push(sum.clone());
        current = sum;
    }

    let (mixed, prediction) =
        additive_forward_parts(&layer_sums, &params.layer_mix, &params.final_weight)?;
    Ok(ForwardTrace { layer_inputs, products, layer_sums, mixed, prediction })
}

/// Backpropagates `dloss_dprediction` through a recorded forward pass.
///
/// Returns gradients for every parameter class and the gradient with respect
/// to the network input. Layer outputs receive contributions both from the
/// additive stage and from the next layer, so layers are processed last to
/// first while accumulating the running input gradient.
pub fn backward(
    trace: &ForwardTrace,
    params: &NetworkParams,
    dloss_dprediction: &FrequencyMap,
) -> Result<(ParamGradients, FrequencyMap)> {
    params.validate()?;
    let arch = &params.arch;
    if trace.layer_inputs.len() != arch.layers
        || trace.layer_sums.len() != arch.layers
        || trace.products.len() != arch.branch_count()
    {
        return Err(Error::mismatch("backward: trace does not match architecture"));
    }
    dloss_dprediction.check_same_dims(&trace.prediction, "backward: upstream gradient")?;

    let mut grads = ParamGradients::zeros_like(params);
    let side = arch.kernel_side();

    // Additive stage: P = mixed .* W_final, mixed = sum alpha_i S_i.
    let d_mixed = dloss_dprediction.hadamard(&params.final_weight)?;
    grads.final_weight = trace.mixed.hadamard(dloss_dprediction)?;
    for (i, s) in trace.layer_sums.iter().enumerate() {
        grads.layer_mix[i] = s.hadamard(&d_mixed)?.sum();
    }

    // d_next holds dLoss/dS_l flowing in from layer l + 1 (none for the top).
    let mut d_next: Option<Grid> = None;
    for l in (0..arch.layers).rev() {
        let mut d_s = d_mixed.scaled(params.layer_mix[l]);
        if let Some(from_above) = d_next.take() {
            d_s.add_scaled(&from_above, 1.0)?;
        }

        let (weights, _biases, kernels) = params.layer_slices(l);
        let layer_input = &trace.layer_inputs[l];
        let mut d_input = Grid::new(d_s.rows(), d_s.cols());
        for (k, ((w, c), q)) in weights
            .iter()
            .zip(kernels)
            .zip(&trace.products[l * arch.kernels_per_layer..(l + 1) * arch.kernels_per_layer])
            .enumerate()
        {
            let branch = params.branch(l, k);
            // Through the smoothing: dQ is the circular correlation of dS
            // with the kernel; dC correlates dS against Q at every lag.
            let d_q = smoothing_backward_input(&d_s, c)?;
            grads.kernels[branch] = smoothing_backward_kernel(&d_s, q, side);
            // Through the weighting: Q = F .* W + B.
            let mut d_w = d_q.hadamard(layer_input)?;
            if arch.tie_symmetric_weights {
                d_w = symmetrize_mirror(&d_w);
            }
            grads.weights[branch] = d_w;
            d_input.add_scaled(&d_q.hadamard(w)?, 1.0)?;
            grads.biases[branch] = d_q;
        }
        d_next = Some(d_input);
    }

    let d_input = d_next.expect("at least one layer");
    Ok((grads, d_input))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_arch() -> NetworkArch {
        NetworkArch {
            layers: 2,
            kernels_per_layer: 2,
            half_width: 1,
            height: 8,
            width: 8,
            tie_symmetric_weights: false,
        }
    }

    fn seeded_grid(rows: usize, cols: usize, seed: u64) -> Grid {
        use rand::Rng;
        use rand::SeedableRng;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Grid::from_fn(rows, cols, |_, _| rng.random_range(-1.0..1.0))
    }

    /// Literal wrap-around convolution for cross-checking the window-sum path.
    fn smoothing_oracle(q: &Grid, kernel: &Grid) -> Grid {
        let (rows, cols) = q.dims();
        let side = kernel.rows();
        let n = (side - 1) / 2;
        Grid::from_fn(rows, cols, |l, k| {
            let mut acc = 0.0;
            for m in 0..side {
                for nn in 0..side {
                    let qr = (l + rows + n - m) % rows;
                    let qc = (k + cols + n - nn) % cols;
                    acc += q[(qr, qc)] * kernel[(m, nn)];
                }
            }
            acc
        })
    }

    #[test]
    fn weighting_matches_definition() {
        let f = Grid::from_vec(1, 3, vec![1.0, 2.0, 3.0]).unwrap();
        let w = Grid::from_vec(1, 3, vec![2.0, 0.5, -1.0]).unwrap();
        let b = Grid::from_vec(1, 3, vec![0.0, 1.0, 0.25]).unwrap();
        let q = weighting_forward(&f, &w, &b).unwrap();
        assert_eq!(q.as_slice(), &[2.0, 2.0, -2.75]);
    }

    #[test]
    fn delta_kernel_is_identity_smoothing() {
        let q = seeded_grid(6, 9, 1);
        let mut kernel = Grid::new(3, 3);
        kernel[(1, 1)] = 1.0;
        let r = smoothing_forward(&q, &kernel).unwrap();
        assert!(r.max_abs_diff(&q).unwrap() < 1e-15);
    }

    #[test]
    fn shifted_delta_kernel_rolls_the_plane() {
        let q = seeded_grid(5, 5, 2);
        // Impulse at (m, n) = (1, 0): R(l, k) = Q(l - 1, k) circularly.
        let mut kernel = Grid::new(3, 3);
        kernel[(2, 1)] = 1.0;
        let r = smoothing_forward(&q, &kernel).unwrap();
        for l in 0..5 {
            for k in 0..5 {
                assert_eq!(r[(l, k)], q[((l + 4) % 5, k)]);
            }
        }
    }

    #[test]
    fn smoothing_matches_direct_oracle() {
        for &(rows, cols, side, seed) in &[(8usize, 8usize, 3usize, 3u64), (9, 7, 5, 4), (12, 5, 3, 5)] {
            let q = seeded_grid(rows, cols, seed);
            let kernel = seeded_grid(side, side, seed + 100);
            let fast = smoothing_forward(&q, &kernel).unwrap();
            let slow = smoothing_oracle(&q, &kernel);
            assert!(fast.max_abs_diff(&slow).unwrap() < 1e-12);
        }
    }

    #[test]
    fn bad_kernels_are_rejected() {
        let q = seeded_grid(8, 8, 6);
        assert!(smoothing_forward(&q, &Grid::new(2, 2)).is_err()); // even side
        assert!(smoothing_forward(&q, &Grid::new(3, 5)).is_err()); // not square
        assert!(smoothing_forward(&q, &Grid::new(9, 9)).is_err()); // larger than plane
    }

    #[test]
    fn layer_forward_is_branch_additive() {
        let arch = tiny_arch();
        let params = NetworkParams::init(&arch, 9).unwrap();
        let f = seeded_grid(8, 8, 7);
        let (w, b, c) = params.layer_slices(0);
        let whole = layer_forward(&f, w, b, c).unwrap();
        let mut by_parts = Grid::new(8, 8);
        for k in 0..arch.kernels_per_layer {
            let single =
                layer_forward(&f, &w[k..k + 1], &b[k..k + 1], &c[k..k + 1]).unwrap();
            by_parts.add_scaled(&single, 1.0).unwrap();
        }
        assert!(whole.max_abs_diff(&by_parts).unwrap() < 1e-12);
    }

    #[test]
    fn identity_branch_passes_input_through() {
        let arch = NetworkArch { layers: 1, kernels_per_layer: 1, ..tiny_arch() };
        let params = NetworkParams::zero_residual(&arch).unwrap();
        let f = seeded_grid(8, 8, 8);
        let (w, b, c) = params.layer_slices(0);
        let s = layer_forward(&f, w, b, c).unwrap();
        assert!(s.max_abs_diff(&f).unwrap() < 1e-15);
    }

    #[test]
    fn zero_mix_zeroes_the_prediction() {
        let arch = tiny_arch();
        let params = NetworkParams::zero_residual(&arch).unwrap();
        let f = seeded_grid(8, 8, 10);
        let trace = forward(&f, &params).unwrap();
        assert_eq!(trace.prediction.max_abs(), 0.0);
    }

    #[test]
    fn forward_is_linear_when_biases_are_zero() {
        let arch = tiny_arch();
        let mut params = NetworkParams::init(&arch, 11).unwrap();
        for b in &mut params.biases {
            *b = Grid::new(8, 8);
        }
        let f1 = seeded_grid(8, 8, 12);
        let f2 = seeded_grid(8, 8, 13);
        let (a, b) = (0.7, -1.3);
        let combo = f1.scaled(a).add(&f2.scaled(b)).unwrap();
        let lhs = forward(&combo, &params).unwrap().prediction;
        let rhs = forward(&f1, &params)
            .unwrap()
            .prediction
            .scaled(a)
            .add(&forward(&f2, &params).unwrap().prediction.scaled(b))
            .unwrap();
        assert!(lhs.max_abs_diff(&rhs).unwrap() < 1e-10);
    }

    #[test]
    fn forward_is_deterministic() {
        let arch = tiny_arch();
        let params = NetworkParams::init(&arch, 14).unwrap();
        let f = seeded_grid(8, 8, 15);
        let a = forward(&f, &params).unwrap().prediction;
        let b = forward(&f, &params).unwrap().prediction;
        assert_eq!(a, b);
    }

    #[test]
    fn zero_mix_gradients_vanish_except_alpha() {
        let arch = tiny_arch();
        let mut params = NetworkParams::init(&arch, 16).unwrap();
        params.layer_mix = vec![0.0; arch.layers];
        let f = seeded_grid(8, 8, 17);
        let trace = forward(&f, &params).unwrap();
        let upstream = seeded_grid(8, 8, 18);
        let (grads, d_input) = backward(&trace, &params, &upstream).unwrap();
        for g in grads.weights.iter().chain(&grads.biases).chain(&grads.kernels) {
            assert_eq!(g.max_abs(), 0.0);
        }
        assert_eq!(d_input.max_abs(), 0.0);
        // P = 0 .* W_final, so its gradient vanishes too; only the mixing
        // coefficients see a signal.
        assert_eq!(grads.final_weight.max_abs(), 0.0);
        for (i, s) in trace.layer_sums.iter().enumerate() {
            let expect = s
                .hadamard(&params.final_weight)
                .unwrap()
                .hadamard(&upstream)
                .unwrap()
                .sum();
            assert!((grads.layer_mix[i] - expect).abs() < 1e-12);
        }
    }

    #[test]
    fn symmetrize_mirror_is_idempotent_and_even() {
        let g = seeded_grid(6, 9, 19);
        let s = symmetrize_mirror(&g);
        for u in 0..6 {
            for v in 0..9 {
                assert_eq!(s[(u, v)], s[((6 - u) % 6, (9 - v) % 9)]);
            }
        }
        assert!(s.max_abs_diff(&symmetrize_mirror(&s)).unwrap() < 1e-15);
    }

    #[test]
    fn tied_weights_stay_mirror_even_through_gradients() {
        let arch = NetworkArch { tie_symmetric_weights: true, ..tiny_arch() };
        let params = NetworkParams::init(&arch, 20).unwrap();
        for w in &params.weights {
            assert!(w.max_abs_diff(&symmetrize_mirror(w)).unwrap() < 1e-15);
        }
        let f = seeded_grid(8, 8, 21);
        let trace = forward(&f, &params).unwrap();
        let (grads, _) = backward(&trace, &params, &seeded_grid(8, 8, 22)).unwrap();
        for dw in &grads.weights {
            assert!(dw.max_abs_diff(&symmetrize_mirror(dw)).unwrap() < 1e-12);
        }
    }

    #[test]
    fn arch_validation_rejects_degenerate_shapes() {
        assert!(NetworkArch { layers: 0, ..tiny_arch() }.validate().is_err());
        assert!(NetworkArch { kernels_per_layer: 0, ..tiny_arch() }.validate().is_err());
        assert!(NetworkArch { height: 0, ..tiny_arch() }.validate().is_err());
        // Kernel side 2*4+1 = 9 exceeds the 8x8 plane.
        assert!(NetworkArch { half_width: 4, ..tiny_arch() }.validate().is_err());
    }

    #[test]
    fn forward_rejects_mismatched_input() {
        let params = NetworkParams::init(&tiny_arch(), 23).unwrap();
        assert!(forward(&Grid::new(4, 4), &params).is_err());
    }

    #[test]
    fn init_is_deterministic_and_in_range() {
        let arch = tiny_arch();
        let a = NetworkParams::init(&arch, 99).unwrap();
        let b = NetworkParams::init(&arch, 99).unwrap();
        assert_eq!(a, b);
        let c = NetworkParams::init(&arch, 100).unwrap();
        assert_ne!(a, c);
        for w in &a.weights {
            for &v in w.as_slice() {
                assert!((0.9..1.1).contains(&v));
            }
        }
        for b_map in &a.biases {
            assert_eq!(b_map.max_abs(), 0.0);
        }
        for (i, kernel) in a.kernels.iter().enumerate() {
            let center = kernel[(arch.half_width, arch.half_width)];
            assert!((0.99..1.01).contains(&center), "kernel {i} center {center}");
        }
        for &alpha in &a.layer_mix {
            assert_eq!(alpha, 0.5);
        }
        assert!(a.final_weight.max_abs() <= 0.01);
    }
}
