use rand_distr::{Distribution, Normal};

use super::arch::{Architecture, LayerGeometry, LayerSpec};
use crate::error::{Error, Result};
use crate::gradcore::{Graph, Parameter, Tensor, Var};
use crate::rng;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum UnitKind {
    ConvFilter,
    DenseNode,
}

/// A conv filter or hidden dense node that can be removed as a group.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct PrunableUnit {
    pub layer_index: usize,
    pub unit_index: usize,
    pub kind: UnitKind,
}

/// Mask scores `S` (one per prunable unit) and the retained set `Ω`.
///
/// A unit outside `Ω` always has score exactly 0, and every layer keeps at
/// least one unit.
#[derive(Clone, Debug, PartialEq)]
pub struct MaskState {
    scores: Parameter,
    retained: Vec<bool>,
    offsets: Vec<usize>,
}

impl MaskState {
    /// All scores 1, every unit retained.
    pub fn full(arch: &Architecture) -> Self {
        let n = arch.num_units();
        Self {
            scores: Parameter::new(Tensor::filled(&[n], 1.0), true),
            retained: vec![true; n],
            offsets: arch.layer_offsets(),
        }
    }

    /// Builds a mask from explicit scores; units with `retained[i] == false`
    /// get score 0.
    pub fn from_parts(arch: &Architecture, scores: &[f64], retained: &[bool]) -> Result<Self> {
        let n = arch.num_units();
        if scores.len() != n || retained.len() != n {
            return Err(Error::ArchMismatch(format!(
                "mask of length {}/{} for {n} units",
                scores.len(),
                retained.len()
            )));
        }
        let data = scores
            .iter()
            .zip(retained)
            .map(|(&s, &r)| if r { s } else { 0.0 })
            .collect();
        let mask = Self {
            scores: Parameter::new(Tensor::new(vec![n], data)?, true),
            retained: retained.to_vec(),
            offsets: arch.layer_offsets(),
        };
        mask.check_layers()?;
        Ok(mask)
    }

    /// Scores 1 on `retained`, 0 elsewhere.
    pub fn binary(arch: &Architecture, retained: &[bool]) -> Result<Self> {
        Self::from_parts(arch, &vec![1.0; retained.len()], retained)
    }

    fn check_layers(&self) -> Result<()> {
        for layer in 0..self.num_layers() {
            if self.layer_retained(layer) == 0 {
                return Err(Error::EmptyLayer { layer });
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.retained.len()
    }

    pub fn is_empty(&self) -> bool {
        self.retained.is_empty()
    }

    pub fn num_layers(&self) -> usize {
        self.offsets.len() - 1
    }

    pub fn scores(&self) -> &[f64] {
        self.scores.value().data()
    }

    pub fn score_param(&self) -> &Parameter {
        &self.scores
    }

    pub fn score_param_mut(&mut self) -> &mut Parameter {
        &mut self.scores
    }

    pub fn retained(&self) -> &[bool] {
        &self.retained
    }

    pub fn is_retained(&self, unit: usize) -> bool {
        self.retained[unit]
    }

    pub fn retained_count(&self) -> usize {
        self.retained.iter().filter(|&&r| r).count()
    }

    /// `1 - |Ω| / n`.
    pub fn pruning_ratio(&self) -> f64 {
        1.0 - self.retained_count() as f64 / self.len() as f64
    }

    pub fn layer_of(&self, unit: usize) -> usize {
        self.offsets.partition_point(|&o| o <= unit) - 1
    }

    pub fn layer_range(&self, layer: usize) -> std::ops::Range<usize> {
        self.offsets[layer]..self.offsets[layer + 1]
    }

    pub fn layer_retained(&self, layer: usize) -> usize {
        self.retained[self.layer_range(layer)].iter().filter(|&&r| r).count()
    }

    /// Removes `unit` from `Ω` and zeroes its score.
    pub fn prune(&mut self, unit: usize) {
        self.retained[unit] = false;
        self.scores.values_mut()[unit] = 0.0;
    }

    /// Re-applies `unit ∉ Ω ⇒ S = 0` after an optimizer step.
    pub fn enforce_zeroes(&mut self) {
        let retained = self.retained.clone();
        for (s, r) in self.scores.values_mut().iter_mut().zip(retained) {
            if !r {
                *s = 0.0;
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LayerParams {
    pub weight: Parameter,
    pub bias: Parameter,
}

impl LayerParams {
    fn set_trainable(&mut self, trainable: bool) {
        self.weight.set_trainable(trainable);
        self.bias.set_trainable(trainable);
    }
}

/// Graph handles for every parameter used in one recorded forward pass.
#[derive(Clone, Debug)]
pub struct Bindings {
    hidden: Vec<(Var, Var)>,
    head: Option<(Var, Var)>,
    scores: Option<Var>,
}

impl Bindings {
    pub fn scores(&self) -> Option<Var> {
        self.scores
    }

    pub fn hidden(&self) -> &[(Var, Var)] {
        &self.hidden
    }

    pub fn head(&self) -> Option<(Var, Var)> {
        self.head
    }
}

/// A prunable network: architecture, weights `Θ`, and an optional mask.
///
/// With a mask present every hidden unit's post-activation output is
/// multiplied by its score. Sub-networks produced by
/// [`MaskedNetwork::extract_subnetwork`] carry no mask.
#[derive(Clone, Debug, PartialEq)]
pub struct MaskedNetwork {
    arch_id: String,
    arch: Architecture,
    hidden: Vec<LayerParams>,
    head: LayerParams,
    mask: Option<MaskState>,
}

impl MaskedNetwork {
    /// He-normal weights, zero biases, no mask.
    pub fn new(arch_id: impl Into<String>, arch: Architecture, seed: u64) -> Result<Self> {
        let geo = arch.geometry()?;
        let mut rng = rng::seeded(seed);
        let mut init = |shape: &[usize], fan_in: usize| {
            let normal = Normal::new(0.0, (2.0 / fan_in as f64).sqrt()).expect("positive std");
            Tensor::from_fn(shape, |_| normal.sample(&mut rng))
        };
        let mut hidden = Vec::with_capacity(arch.hidden.len());
        for (layer, g) in arch.hidden.iter().zip(&geo) {
            let (shape, fan_in) = weight_shape(layer, g);
            hidden.push(LayerParams {
                weight: Parameter::new(init(&shape, fan_in), true),
                bias: Parameter::new(Tensor::zeros(&[layer.units()]), true),
            });
        }
        let (units, block) = arch.head_input()?;
        let fan_in = units * block;
        let head = LayerParams {
            weight: Parameter::new(init(&[arch.num_classes, fan_in], fan_in), true),
            bias: Parameter::new(Tensor::zeros(&[arch.num_classes]), true),
        };
        Ok(Self {
            arch_id: arch_id.into(),
            arch,
            hidden,
            head,
            mask: None,
        })
    }

    /// Assembles a network from explicit parameters, checking every shape.
    pub fn from_parts(
        arch_id: impl Into<String>,
        arch: Architecture,
        hidden: Vec<LayerParams>,
        head: LayerParams,
        mask: Option<MaskState>,
    ) -> Result<Self> {
        let geo = arch.geometry()?;
        if hidden.len() != arch.hidden.len() {
            return Err(Error::ArchMismatch(format!(
                "{} hidden parameter sets for {} layers",
                hidden.len(),
                arch.hidden.len()
            )));
        }
        let check = |p: &Parameter, want: &[usize]| -> Result<()> {
            if p.value().shape() != want {
                return Err(Error::ShapeMismatch {
                    op: "from_parts",
                    expected: want.to_vec(),
                    actual: p.value().shape().to_vec(),
                });
            }
            Ok(())
        };
        for ((layer, g), params) in arch.hidden.iter().zip(&geo).zip(&hidden) {
            check(&params.weight, &weight_shape(layer, g).0)?;
            check(&params.bias, &[layer.units()])?;
        }
        let (units, block) = arch.head_input()?;
        check(&head.weight, &[arch.num_classes, units * block])?;
        check(&head.bias, &[arch.num_classes])?;
        if let Some(m) = &mask {
            if m.len() != arch.num_units() {
                return Err(Error::ArchMismatch(format!(
                    "mask of length {} for {} units",
                    m.len(),
                    arch.num_units()
                )));
            }
        }
        Ok(Self {
            arch_id: arch_id.into(),
            arch,
            hidden,
            head,
            mask,
        })
    }

    pub fn arch_id(&self) -> &str {
        &self.arch_id
    }

    pub fn arch(&self) -> &Architecture {
        &self.arch
    }

    pub fn num_units(&self) -> usize {
        self.arch.num_units()
    }

    pub fn hidden_params(&self) -> &[LayerParams] {
        &self.hidden
    }

    pub fn head_params(&self) -> &LayerParams {
        &self.head
    }

    pub fn mask(&self) -> Option<&MaskState> {
        self.mask.as_ref()
    }

    pub fn mask_mut(&mut self) -> Option<&mut MaskState> {
        self.mask.as_mut()
    }

    pub fn set_mask(&mut self, mask: Option<MaskState>) -> Result<()> {
        if let Some(m) = &mask {
            if m.len() != self.num_units() {
                return Err(Error::ArchMismatch(format!(
                    "mask of length {} for {} units",
                    m.len(),
                    self.num_units()
                )));
            }
        }
        self.mask = mask;
        Ok(())
    }

    /// Copy with a fresh all-ones mask attached.
    pub fn with_fresh_mask(&self) -> Self {
        let mut net = self.clone();
        net.mask = Some(MaskState::full(&self.arch));
        net
    }

    /// Every prunable unit in global index order.
    pub fn units(&self) -> Vec<PrunableUnit> {
        self.arch
            .hidden
            .iter()
            .enumerate()
            .flat_map(|(layer_index, layer)| {
                let kind = if layer.is_conv() {
                    UnitKind::ConvFilter
                } else {
                    UnitKind::DenseNode
                };
                (0..layer.units()).map(move |unit_index| PrunableUnit {
                    layer_index,
                    unit_index,
                    kind,
                })
            })
            .collect()
    }

    pub fn num_parameters(&self) -> usize {
        self.hidden
            .iter()
            .chain(std::iter::once(&self.head))
            .map(|p| p.weight.value().len() + p.bias.value().len())
            .sum()
    }

    /// Freezes or unfreezes every weight and bias (mask scores untouched).
    pub fn set_weights_trainable(&mut self, trainable: bool) {
        for p in &mut self.hidden {
            p.set_trainable(trainable);
        }
        self.head.set_trainable(trainable);
    }

    /// Weights and biases in layer order, then mask scores if present.
    pub fn parameters_mut(&mut self) -> Vec<&mut Parameter> {
        let mut out: Vec<&mut Parameter> = Vec::with_capacity(2 * self.hidden.len() + 3);
        for p in self.hidden.iter_mut().chain(std::iter::once(&mut self.head)) {
            out.push(&mut p.weight);
            out.push(&mut p.bias);
        }
        if let Some(m) = &mut self.mask {
            out.push(&mut m.scores);
        }
        out
    }

    /// Weights and biases only, in layer order.
    pub fn weight_parameters(&self) -> Vec<&Parameter> {
        self.hidden
            .iter()
            .chain(std::iter::once(&self.head))
            .flat_map(|p| [&p.weight, &p.bias])
            .collect()
    }

    fn check_batch(&self, batch: &Tensor) -> Result<()> {
        let i = self.arch.input;
        let want = [i.channels, i.height, i.width];
        if batch.rank() != 4 || batch.shape()[1..] != want {
            let mut expected = vec![batch.shape().first().copied().unwrap_or(0)];
            expected.extend_from_slice(&want);
            return Err(Error::ShapeMismatch {
                op: "forward",
                expected,
                actual: batch.shape().to_vec(),
            });
        }
        Ok(())
    }

    /// Records the hidden stack on `g` and returns the flattened features fed
    /// to the classifier. `masked == false` skips every mask multiplication.
    pub fn record_features(&self, g: &mut Graph, batch: &Tensor, masked: bool) -> Result<(Var, Bindings)> {
        self.check_batch(batch)?;
        let mask = if masked { self.mask.as_ref() } else { None };
        let scores = mask.map(|m| g.param(&m.scores));
        let offsets = self.arch.layer_offsets();
        let mut x = g.input(batch.clone());
        let mut bindings = Bindings {
            hidden: Vec::with_capacity(self.hidden.len()),
            head: None,
            scores,
        };
        for (l, (layer, params)) in self.arch.hidden.iter().zip(&self.hidden).enumerate() {
            let w = g.param(&params.weight);
            let b = g.param(&params.bias);
            bindings.hidden.push((w, b));
            let pool = match *layer {
                LayerSpec::Conv {
                    stride,
                    padding,
                    pool,
                    ..
                } => {
                    x = g.conv2d(x, w, stride, padding)?;
                    pool
                }
                LayerSpec::Dense { .. } => {
                    x = g.flatten(x)?;
                    x = g.matmul_t(x, w)?;
                    false
                }
            };
            x = g.add_bias(x, b)?;
            x = g.relu(x)?;
            if let (Some(m), Some(s)) = (mask, scores) {
                let layer_scores = g.slice(s, offsets[l]..offsets[l + 1])?;
                x = g.scale_units(x, layer_scores, &m.retained[offsets[l]..offsets[l + 1]])?;
            }
            if pool {
                x = g.max_pool2(x)?;
            }
        }
        let x = g.flatten(x)?;
        Ok((x, bindings))
    }

    /// Records a full forward pass on `g`, returning logits and bindings.
    pub fn record_forward(&self, g: &mut Graph, batch: &Tensor, masked: bool) -> Result<(Var, Bindings)> {
        let (x, mut bindings) = self.record_features(g, batch, masked)?;
        let w = g.param(&self.head.weight);
        let b = g.param(&self.head.bias);
        bindings.head = Some((w, b));
        let logits = g.matmul_t(x, w)?;
        let logits = g.add_bias(logits, b)?;
        Ok((logits, bindings))
    }

    /// Forward pass applying the mask (if any).
    pub fn masked_forward(&self, batch: &Tensor) -> Result<Tensor> {
        self.eval(batch, true)
    }

    /// Forward pass ignoring the mask entirely.
    pub fn forward_unmasked(&self, batch: &Tensor) -> Result<Tensor> {
        self.eval(batch, false)
    }

    fn eval(&self, batch: &Tensor, masked: bool) -> Result<Tensor> {
        let mut g = Graph::new();
        let (logits, _) = self.record_forward(&mut g, batch, masked)?;
        Ok(g.value(logits).clone())
    }

    /// Penultimate (classifier input) features, masked.
    pub fn features(&self, batch: &Tensor) -> Result<Tensor> {
        let mut g = Graph::new();
        let (x, _) = self.record_features(&mut g, batch, true)?;
        Ok(g.value(x).clone())
    }

    /// Cross-entropy plus `l1_weight · Σ_{i∈Ω} |S_i|` (the L1 term only when
    /// a mask is present and `l1_weight > 0`).
    pub fn record_loss(
        &self,
        g: &mut Graph,
        batch: &Tensor,
        labels: &[usize],
        l1_weight: f64,
    ) -> Result<(Var, Bindings)> {
        let (logits, bindings) = self.record_forward(g, batch, true)?;
        let mut loss = g.cross_entropy(logits, labels)?;
        if let (Some(m), Some(s)) = (&self.mask, bindings.scores) {
            if l1_weight > 0.0 {
                let l1 = g.l1(s, &m.retained)?;
                let l1 = g.scale(l1, l1_weight)?;
                loss = g.add(loss, l1)?;
            }
        }
        Ok((loss, bindings))
    }

    /// Adds gradients recorded on `g` into the matching parameters.
    pub fn accumulate_gradients(&mut self, g: &Graph, bindings: &Bindings) -> Result<()> {
        for (p, &(w, b)) in self.hidden.iter_mut().zip(&bindings.hidden) {
            g.accumulate_into(w, &mut p.weight)?;
            g.accumulate_into(b, &mut p.bias)?;
        }
        if let Some((w, b)) = bindings.head {
            g.accumulate_into(w, &mut self.head.weight)?;
            g.accumulate_into(b, &mut self.head.bias)?;
        }
        if let (Some(m), Some(s)) = (&mut self.mask, bindings.scores) {
            g.accumulate_into(s, &mut m.scores)?;
        }
        Ok(())
    }

    /// Loss value and gradients for one batch; gradients are accumulated
    /// into the parameters, the caller applies the optimizer step.
    pub fn loss_and_grad(&mut self, batch: &Tensor, labels: &[usize], l1_weight: f64) -> Result<f64> {
        let mut g = Graph::new();
        let (loss, bindings) = self.record_loss(&mut g, batch, labels, l1_weight)?;
        g.backward(loss)?;
        self.accumulate_gradients(&g, &bindings)?;
        Ok(g.value(loss).item())
    }

    /// Predicted class per sample, evaluated in chunks.
    pub fn predict(&self, x: &Tensor) -> Result<Vec<usize>> {
        let mut preds = Vec::with_capacity(x.rows());
        for chunk in chunk_indices(x.rows(), 256) {
            let logits = self.masked_forward(&x.select_rows(&chunk))?;
            preds.extend((0..logits.rows()).map(|r| argmax(logits.row(r))));
        }
        Ok(preds)
    }

    /// Fraction of samples classified correctly, in `[0, 1]`.
    pub fn accuracy(&self, x: &Tensor, labels: &[usize]) -> Result<f64> {
        if labels.is_empty() {
            return Err(Error::EmptyInput("accuracy"));
        }
        let preds = self.predict(x)?;
        let hits = preds.iter().zip(labels).filter(|(p, y)| p == y).count();
        Ok(hits as f64 / labels.len() as f64)
    }

    /// Copy whose classifier keeps only rows `classes`, in the given order.
    pub fn with_head_rows(&self, classes: &[usize]) -> Result<Self> {
        if classes.is_empty() {
            return Err(Error::EmptyInput("head classes"));
        }
        if let Some(&bad) = classes.iter().find(|&&c| c >= self.arch.num_classes) {
            return Err(Error::LabelOutOfRange {
                label: bad,
                num_classes: self.arch.num_classes,
            });
        }
        let mut net = self.clone();
        net.arch.num_classes = classes.len();
        net.head = LayerParams {
            weight: Parameter::new(self.head.weight.value().select_rows(classes), self.head.weight.trainable()),
            bias: Parameter::new(self.head.bias.value().select_rows(classes), self.head.bias.trainable()),
        };
        Ok(net)
    }

    /// Copy with a fresh `num_classes`-way classifier set to the
    /// nearest-class-mean rule on this network's masked features:
    /// row `c` is the mean feature `μ_c`, bias `-½‖μ_c‖²`.
    pub fn with_imprinted_head(&self, x: &Tensor, labels: &[usize], num_classes: usize) -> Result<Self> {
        if labels.is_empty() {
            return Err(Error::EmptyInput("imprint samples"));
        }
        if let Some(&bad) = labels.iter().find(|&&y| y >= num_classes) {
            return Err(Error::LabelOutOfRange {
                label: bad,
                num_classes,
            });
        }
        let mut sums: Option<Vec<Vec<f64>>> = None;
        let mut counts = vec![0usize; num_classes];
        for chunk in chunk_indices(x.rows(), 256) {
            let feats = self.features(&x.select_rows(&chunk))?;
            let width = feats.row_len();
            let sums = sums.get_or_insert_with(|| vec![vec![0.0; width]; num_classes]);
            for (r, &i) in chunk.iter().enumerate() {
                let y = labels[i];
                counts[y] += 1;
                for (s, f) in sums[y].iter_mut().zip(feats.row(r)) {
                    *s += f;
                }
            }
        }
        let sums = sums.expect("at least one chunk");
        let width = sums[0].len();
        let mut weight = Vec::with_capacity(num_classes * width);
        let mut bias = Vec::with_capacity(num_classes);
        for (row, &count) in sums.iter().zip(&counts) {
            let denom = count.max(1) as f64;
            let mean: Vec<f64> = row.iter().map(|s| s / denom).collect();
            bias.push(-0.5 * mean.iter().map(|m| m * m).sum::<f64>());
            weight.extend(mean);
        }
        let mut net = self.clone();
        net.arch.num_classes = num_classes;
        net.head = LayerParams {
            weight: Parameter::new(Tensor::new(vec![num_classes, width], weight)?, true),
            bias: Parameter::new(Tensor::new(vec![num_classes], bias)?, true),
        };
        Ok(net)
    }

    /// Physically removes every unit outside `Ω`, together with the
    /// consuming layer's input slices. The result has no mask; its forward
    /// equals the source's masked forward with scores 1 on `Ω`, 0 elsewhere.
    pub fn extract_subnetwork(&self) -> Result<Self> {
        let Some(mask) = &self.mask else {
            return Ok(self.clone());
        };
        let offsets = self.arch.layer_offsets();
        let keep: Vec<Vec<usize>> = (0..self.arch.num_layers())
            .map(|l| {
                (offsets[l]..offsets[l + 1])
                    .filter(|&u| mask.retained[u])
                    .map(|u| u - offsets[l])
                    .collect()
            })
            .collect();
        if let Some(layer) = keep.iter().position(Vec::is_empty) {
            return Err(Error::EmptyLayer { layer });
        }
        let geo = self.arch.geometry()?;
        let mut hidden = Vec::with_capacity(self.hidden.len());
        let mut hidden_specs = Vec::with_capacity(self.hidden.len());
        for (l, (layer, params)) in self.arch.hidden.iter().zip(&self.hidden).enumerate() {
            let inputs: Option<&[usize]> = if l == 0 { None } else { Some(&keep[l - 1]) };
            let block = weight_block(layer, &geo[l]);
            let weight = slice_weight(params.weight.value(), geo[l].in_units, block, &keep[l], inputs)?;
            hidden.push(LayerParams {
                weight: Parameter::new(weight, params.weight.trainable()),
                bias: Parameter::new(params.bias.value().select_rows(&keep[l]), params.bias.trainable()),
            });
            hidden_specs.push(layer.with_units(keep[l].len()));
        }
        let (head_units, head_block) = self.arch.head_input()?;
        let all_classes: Vec<usize> = (0..self.arch.num_classes).collect();
        let head_inputs = keep.last().map(Vec::as_slice);
        let head_weight = slice_weight(
            self.head.weight.value(),
            head_units,
            head_block,
            &all_classes,
            head_inputs,
        )?;
        let arch = Architecture {
            input: self.arch.input,
            hidden: hidden_specs,
            num_classes: self.arch.num_classes,
        };
        Self::from_parts(
            self.arch_id.clone(),
            arch,
            hidden,
            LayerParams {
                weight: Parameter::new(head_weight, self.head.weight.trainable()),
                bias: self.head.bias.clone(),
            },
            None,
        )
    }
}

fn weight_shape(layer: &LayerSpec, g: &LayerGeometry) -> (Vec<usize>, usize) {
    match *layer {
        LayerSpec::Conv {
            out_channels,
            kernel,
            ..
        } => (
            vec![out_channels, g.in_units, kernel, kernel],
            g.in_units * kernel * kernel,
        ),
        LayerSpec::Dense { width } => {
            let fan_in = g.in_units * g.in_block;
            (vec![width, fan_in], fan_in)
        }
    }
}

/// Contiguous weight entries that belong to one (output, input-unit) pair.
fn weight_block(layer: &LayerSpec, g: &LayerGeometry) -> usize {
    match *layer {
        LayerSpec::Conv { kernel, .. } => kernel * kernel,
        LayerSpec::Dense { .. } => g.in_block,
    }
}

/// Views `w` as `[out, in_units, block]` and keeps rows `outputs` and input
/// units `inputs` (all inputs when `None`).
fn slice_weight(
    w: &Tensor,
    in_units: usize,
    block: usize,
    outputs: &[usize],
    inputs: Option<&[usize]>,
) -> Result<Tensor> {
    let all: Vec<usize>;
    let inputs = match inputs {
        Some(i) => i,
        None => {
            all = (0..in_units).collect();
            &all
        }
    };
    let row = in_units * block;
    let mut data = Vec::with_capacity(outputs.len() * inputs.len() * block);
    for &o in outputs {
        let base = o * row;
        for &i in inputs {
            data.extend_from_slice(&w.data()[base + i * block..base + (i + 1) * block]);
        }
    }
    let mut shape = w.shape().to_vec();
    shape[0] = outputs.len();
    if shape.len() == 4 {
        shape[1] = inputs.len();
    } else {
        shape[1] = inputs.len() * block;
    }
    Tensor::new(shape, data)
}

pub(crate) fn chunk_indices(n: usize, chunk: usize) -> impl Iterator<Item = Vec<usize>> {
    (0..n).step_by(chunk).map(move |start| (start..(start + chunk).min(n)).collect())
}

pub(crate) fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in row.iter().enumerate() {
        if *v > row[best] {
            best = i;
        }
    }
    best
}
