//! Two-part model: an MLP feature extractor followed by a bias-free linear
//! classifier, with a hand-written reverse pass.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::loss::{classifier_logits, softmax_ce};
use super::matrix::{check_lr, Matrix};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Activation {
    Identity,
    Relu,
}

impl Activation {
    fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Identity => x,
            Activation::Relu => x.max(0.0),
        }
    }

    /// Derivative evaluated at the pre-activation; ReLU uses 0 at the kink.
    fn derivative(self, pre: f64) -> f64 {
        match self {
            Activation::Identity => 1.0,
            Activation::Relu => {
                if pre > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }
}

/// Fully connected layer computing `act(x · W + b)`; `weight` is `in × out`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    pub weight: Matrix,
    pub bias: Vec<f64>,
    pub activation: Activation,
}

impl Layer {
    pub fn new(weight: Matrix, bias: Vec<f64>, activation: Activation) -> Result<Self> {
        if bias.len() != weight.cols() {
            return Err(Error::invalid(format!(
                "bias length {} does not match layer width {}",
                bias.len(),
                weight.cols()
            )));
        }
        Ok(Layer {
            weight,
            bias,
            activation,
        })
    }

    pub fn input_dim(&self) -> usize {
        self.weight.rows()
    }

    pub fn output_dim(&self) -> usize {
        self.weight.cols()
    }

    fn pre_activation(&self, input: &Matrix) -> Result<Matrix> {
        let mut pre = input.matmul(&self.weight)?;
        for i in 0..pre.rows() {
            for (x, b) in pre.row_mut(i).iter_mut().zip(&self.bias) {
                *x += b;
            }
        }
        Ok(pre)
    }
}

/// Feature extractor `f_u`: a chain of layers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Extractor {
    layers: Vec<Layer>,
}

impl Extractor {
    pub fn new(layers: Vec<Layer>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::invalid("extractor needs at least one layer"));
        }
        for pair in layers.windows(2) {
            if pair[0].output_dim() != pair[1].input_dim() {
                return Err(Error::invalid(format!(
                    "layer output {} does not feed layer input {}",
                    pair[0].output_dim(),
                    pair[1].input_dim()
                )));
            }
        }
        Ok(Extractor { layers })
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].input_dim()
    }

    pub fn feature_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].output_dim()
    }

    /// Maps every input row to its feature vector.
    pub fn forward(&self, batch: &Matrix) -> Result<Matrix> {
        self.check_input(batch)?;
        let mut h = batch.clone();
        for layer in &self.layers {
            let act = layer.activation;
            h = layer.pre_activation(&h)?.map(|x| act.apply(x));
        }
        Ok(h)
    }

    fn check_input(&self, batch: &Matrix) -> Result<()> {
        if batch.cols() != self.input_dim() {
            return Err(Error::invalid(format!(
                "batch has {} columns, extractor expects {}",
                batch.cols(),
                self.input_dim()
            )));
        }
        Ok(())
    }
}

/// Layer sizes for building a fresh model.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelDims {
    pub input_dim: usize,
    pub hidden: Vec<usize>,
    pub feature_dim: usize,
    pub classes: usize,
}

/// Model parameters `w = {u, v}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub extractor: Extractor,
    pub classifier: Matrix,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerGrad {
    pub weight: Matrix,
    pub bias: Vec<f64>,
}

/// Gradients shaped like a [`ModelParams`].
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub layers: Vec<LayerGrad>,
    pub classifier: Matrix,
}

impl ModelParams {
    pub fn new(extractor: Extractor, classifier: Matrix) -> Result<Self> {
        if classifier.cols() != extractor.feature_dim() {
            return Err(Error::invalid(format!(
                "classifier has {} columns, features have dimension {}",
                classifier.cols(),
                extractor.feature_dim()
            )));
        }
        if classifier.rows() < 1 {
            return Err(Error::invalid("classifier needs at least one class row"));
        }
        Ok(ModelParams {
            extractor,
            classifier,
        })
    }

    /// He-uniform hidden weights, zero biases, ReLU everywhere in the
    /// extractor, and a small uniform classifier.
    pub fn init(dims: &ModelDims, rng: &mut impl Rng) -> Result<Self> {
        if dims.input_dim == 0 || dims.feature_dim == 0 || dims.classes == 0 {
            return Err(Error::invalid("model dimensions must be positive"));
        }
        let mut widths = vec![dims.input_dim];
        widths.extend(dims.hidden.iter().copied());
        widths.push(dims.feature_dim);
        if widths.contains(&0) {
            return Err(Error::invalid("hidden widths must be positive"));
        }
        let mut layers = Vec::with_capacity(widths.len() - 1);
        for pair in widths.windows(2) {
            let bound = (6.0 / pair[0] as f64).sqrt();
            let weight = Matrix::from_fn(pair[0], pair[1], |_, _| rng.random_range(-bound..bound));
            layers.push(Layer::new(weight, vec![0.0; pair[1]], Activation::Relu)?);
        }
        Self::new(Extractor::new(layers)?, init_classifier(dims.classes, dims.feature_dim, rng))
    }

    pub fn classes(&self) -> usize {
        self.classifier.rows()
    }

    pub fn feature_dim(&self) -> usize {
        self.classifier.cols()
    }

    pub fn input_dim(&self) -> usize {
        self.extractor.input_dim()
    }

    pub fn logits(&self, batch: &Matrix) -> Result<Matrix> {
        classifier_logits(&self.classifier, &self.extractor.forward(batch)?)
    }

    pub fn with_classifier(&self, classifier: Matrix) -> Result<ModelParams> {
        ModelParams::new(self.extractor.clone(), classifier)
    }

    /// Mean softmax cross-entropy over the batch and its exact gradient with
    /// respect to every parameter.
    pub fn backward(&self, batch: &Matrix, labels: &[usize]) -> Result<(f64, Gradients)> {
        self.extractor.check_input(batch)?;
        // Forward pass, keeping each layer's input and pre-activation.
        let mut inputs = Vec::with_capacity(self.extractor.layers.len());
        let mut pres = Vec::with_capacity(self.extractor.layers.len());
        let mut h = batch.clone();
        for layer in &self.extractor.layers {
            let pre = layer.pre_activation(&h)?;
            let act = layer.activation;
            let next = pre.map(|x| act.apply(x));
            inputs.push(h);
            pres.push(pre);
            h = next;
        }
        let features = h;
        let logits = classifier_logits(&self.classifier, &features)?;
        let (loss, dlogits) = softmax_ce(&logits, labels)?;

        let classifier_grad = dlogits.t_matmul(&features)?;
        let mut upstream = dlogits.matmul(&self.classifier)?;
        let mut layer_grads = Vec::with_capacity(self.extractor.layers.len());
        for (idx, layer) in self.extractor.layers.iter().enumerate().rev() {
            let pre = &pres[idx];
            let mut dpre = upstream;
            for (g, &p) in dpre.as_mut_slice().iter_mut().zip(pre.as_slice()) {
                *g *= layer.activation.derivative(p);
            }
            let weight = inputs[idx].t_matmul(&dpre)?;
            let bias = dpre.column_sums();
            if idx > 0 {
                upstream = dpre.matmul_t(&layer.weight)?;
            } else {
                upstream = Matrix::zeros(0, 0);
            }
            layer_grads.push(LayerGrad { weight, bias });
        }
        layer_grads.reverse();
        Ok((
            loss,
            Gradients {
                layers: layer_grads,
                classifier: classifier_grad,
            },
        ))
    }

    pub fn zero_grads(&self) -> Gradients {
        Gradients {
            layers: self
                .extractor
                .layers
                .iter()
                .map(|l| LayerGrad {
                    weight: Matrix::zeros(l.weight.rows(), l.weight.cols()),
                    bias: vec![0.0; l.bias.len()],
                })
                .collect(),
            classifier: Matrix::zeros(self.classifier.rows(), self.classifier.cols()),
        }
    }

    fn check_grads(&self, grads: &Gradients) -> Result<()> {
        let same = grads.layers.len() == self.extractor.layers.len()
            && grads.classifier.shape() == self.classifier.shape()
            && grads
                .layers
                .iter()
                .zip(&self.extractor.layers)
                .all(|(g, l)| g.weight.shape() == l.weight.shape() && g.bias.len() == l.bias.len());
        if same {
            Ok(())
        } else {
            Err(Error::invalid("gradient shapes do not match parameters"))
        }
    }

    /// `w − lr · grad` for every parameter.
    pub fn sgd_step(&self, grads: &Gradients, lr: f64) -> Result<ModelParams> {
        self.check_grads(grads)?;
        check_lr(lr)?;
        let mut out = self.clone();
        for (layer, g) in out.extractor.layers.iter_mut().zip(&grads.layers) {
            layer.weight = layer.weight.sgd_step(&g.weight, lr)?;
            for (b, gb) in layer.bias.iter_mut().zip(&g.bias) {
                *b -= lr * gb;
            }
        }
        out.classifier = out.classifier.sgd_step(&grads.classifier, lr)?;
        Ok(out)
    }

    /// Flat view of every parameter in a fixed order: each layer's weight
    /// then bias, then the classifier.
    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for layer in &self.extractor.layers {
            out.extend_from_slice(layer.weight.as_slice());
            out.extend_from_slice(&layer.bias);
        }
        out.extend_from_slice(self.classifier.as_slice());
        out
    }

    /// Inverse of [`flatten`](Self::flatten): a model shaped like `self`
    /// holding `values`.
    pub fn from_flat(&self, values: &[f64]) -> Result<ModelParams> {
        if values.len() != self.parameter_count() {
            return Err(Error::invalid(format!(
                "{} values for {} parameters",
                values.len(),
                self.parameter_count()
            )));
        }
        if values.iter().any(|x| !x.is_finite()) {
            return Err(Error::invalid("parameters must be finite"));
        }
        let mut out = self.clone();
        let mut rest = values;
        let mut take = |dst: &mut [f64]| {
            let (head, tail) = rest.split_at(dst.len());
            dst.copy_from_slice(head);
            rest = tail;
        };
        for layer in &mut out.extractor.layers {
            take(layer.weight.as_mut_slice());
            take(&mut layer.bias);
        }
        take(out.classifier.as_mut_slice());
        Ok(out)
    }

    pub fn parameter_count(&self) -> usize {
        self.extractor
            .layers
            .iter()
            .map(|l| l.weight.as_slice().len() + l.bias.len())
            .sum::<usize>()
            + self.classifier.as_slice().len()
    }

    /// Applies `f(param, other_param)` elementwise over two shape-identical
    /// models, in [`flatten`](Self::flatten) order.
    pub(crate) fn zip_for_each(
        &mut self,
        other: &ModelParams,
        mut f: impl FnMut(&mut f64, f64),
    ) -> Result<()> {
        if !self.same_shape(other) {
            return Err(Error::invalid("models have different shapes"));
        }
        for (a, b) in self.extractor.layers.iter_mut().zip(&other.extractor.layers) {
            for (x, &y) in a.weight.as_mut_slice().iter_mut().zip(b.weight.as_slice()) {
                f(x, y);
            }
            for (x, &y) in a.bias.iter_mut().zip(&b.bias) {
                f(x, y);
            }
        }
        for (x, &y) in self
            .classifier
            .as_mut_slice()
            .iter_mut()
            .zip(other.classifier.as_slice())
        {
            f(x, y);
        }
        Ok(())
    }

    pub fn same_shape(&self, other: &ModelParams) -> bool {
        self.classifier.shape() == other.classifier.shape()
            && self.extractor.layers.len() == other.extractor.layers.len()
            && self
                .extractor
                .layers
                .iter()
                .zip(&other.extractor.layers)
                .all(|(a, b)| {
                    a.weight.shape() == b.weight.shape() && a.activation == b.activation
                })
    }

    pub fn map_params(&self, f: impl Fn(f64) -> f64) -> ModelParams {
        let mut out = self.clone();
        for layer in &mut out.extractor.layers {
            layer.weight = layer.weight.map(&f);
            layer.bias.iter_mut().for_each(|b| *b = f(*b));
        }
        out.classifier = out.classifier.map(&f);
        out
    }
}

impl Gradients {
    /// Flat view in the same order as [`ModelParams::flatten`].
    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for layer in &self.layers {
            out.extend_from_slice(layer.weight.as_slice());
            out.extend_from_slice(&layer.bias);
        }
        out.extend_from_slice(self.classifier.as_slice());
        out
    }

    /// `self += alpha * (params − anchor)`, used by the proximal term.
    pub(crate) fn add_scaled_difference(
        &mut self,
        alpha: f64,
        params: &ModelParams,
        anchor: &ModelParams,
    ) -> Result<()> {
        if !params.same_shape(anchor) {
            return Err(Error::invalid("proximal anchor shape mismatch"));
        }
        for ((g, p), a) in self
            .layers
            .iter_mut()
            .zip(params.extractor.layers())
            .zip(anchor.extractor.layers())
        {
            let diff = p.weight.sub(&a.weight)?;
            g.weight.axpy(alpha, &diff)?;
            for ((gb, pb), ab) in g.bias.iter_mut().zip(&p.bias).zip(&a.bias) {
                *gb += alpha * (pb - ab);
            }
        }
        let diff = params.classifier.sub(&anchor.classifier)?;
        self.classifier.axpy(alpha, &diff)
    }
}

/// Uniform `[-1/√d, 1/√d)` classifier rows.
pub fn init_classifier(classes: usize, feature_dim: usize, rng: &mut impl Rng) -> Matrix {
    let bound = 1.0 / (feature_dim as f64).sqrt();
    Matrix::from_fn(classes, feature_dim, |_, _| rng.random_range(-bound..bound))
}
