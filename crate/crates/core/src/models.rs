//! Linear match classifiers trained by full-batch gradient descent.
//!
//! Both models score a pair as `z = w·x + b`. Logistic regression minimizes
//! mean log-loss, the linear SVM minimizes mean hinge loss; both add an L2
//! penalty `(λ/2)·‖w‖²` that leaves the bias alone. Gradients are reduced over
//! fixed row blocks (see [`crate::reduce`]), so a given matrix and config
//! always produce the same model bit for bit.

use std::fmt::{self, Write as _};
use std::path::Path;
use std::str::FromStr;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::features::FeatureMatrix;
use crate::reduce::block_reduce;
use crate::scalar::Scalar;

pub const MODEL_FORMAT_HEADER: &str = "pairlink-linear-model v1";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LossKind {
    Logistic,
    Hinge,
}

impl LossKind {
    pub fn default_threshold<T: Scalar>(self) -> T {
        match self {
            LossKind::Logistic => T::lit(0.5),
            LossKind::Hinge => T::zero(),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            LossKind::Logistic => "logistic",
            LossKind::Hinge => "hinge",
        }
    }
}

impl fmt::Display for LossKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for LossKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "logistic" => Ok(LossKind::Logistic),
            "hinge" | "svm" => Ok(LossKind::Hinge),
            other => Err(Error::Config(format!("unknown loss `{other}` (expected logistic|hinge)"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Schedule {
    Constant,
    /// `lr / sqrt(epoch)`
    #[default]
    InvSqrt,
}

impl Schedule {
    fn rate<T: Scalar>(self, base: T, epoch: usize) -> T {
        match self {
            Schedule::Constant => base,
            Schedule::InvSqrt => base / T::from_count(epoch).sqrt(),
        }
    }
}

impl fmt::Display for Schedule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Schedule::Constant => "constant",
            Schedule::InvSqrt => "inv-sqrt",
        })
    }
}

impl FromStr for Schedule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "constant" => Ok(Schedule::Constant),
            "inv-sqrt" => Ok(Schedule::InvSqrt),
            other => Err(Error::Config(format!("unknown schedule `{other}` (expected constant|inv-sqrt)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig<T> {
    pub loss: LossKind,
    pub learning_rate: T,
    pub epochs: usize,
    pub l2: T,
    /// Stop once the gradient max-norm falls below this.
    pub tolerance: T,
    pub schedule: Schedule,
}

impl<T: Scalar> TrainConfig<T> {
    pub fn new(loss: LossKind) -> Self {
        Self {
            loss,
            learning_rate: T::one(),
            epochs: 100,
            l2: T::lit(0.01),
            tolerance: T::lit(1e-6),
            schedule: Schedule::InvSqrt,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > T::zero() && self.learning_rate.is_finite()) {
            return Err(Error::Config(format!("learning rate {} must be > 0", self.learning_rate)));
        }
        if self.epochs == 0 {
            return Err(Error::Config("epochs must be at least 1".into()));
        }
        if !(self.l2 >= T::zero()) {
            return Err(Error::Config(format!("l2 strength {} must be >= 0", self.l2)));
        }
        if !(self.tolerance >= T::zero()) {
            return Err(Error::Config(format!("tolerance {} must be >= 0", self.tolerance)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainingMeta<T> {
    pub epochs_run: usize,
    pub converged: bool,
    pub final_loss: T,
    pub learning_rate: T,
    pub l2: T,
    pub tolerance: T,
    pub schedule: Schedule,
    pub columns: Vec<String>,
    /// Objective at the start of each epoch. Not serialized.
    pub loss_history: Vec<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainedModel<T> {
    pub weights: Vec<T>,
    pub bias: T,
    pub loss: LossKind,
    pub threshold: T,
    pub meta: TrainingMeta<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Gradient<T> {
    pub weights: Vec<T>,
    pub bias: T,
}

impl<T: Scalar> Gradient<T> {
    pub fn max_norm(&self) -> T {
        self.weights
            .iter()
            .fold(self.bias.abs(), |m, g| m.max(g.abs()))
    }
}

pub fn sigmoid<T: Scalar>(z: T) -> T {
    if z >= T::zero() {
        T::one() / (T::one() + (-z).exp())
    } else {
        let e = z.exp();
        e / (T::one() + e)
    }
}

/// `ln(1 + e^z)` without overflow.
fn softplus<T: Scalar>(z: T) -> T {
    z.max(T::zero()) + (-z.abs()).exp().ln_1p()
}

/// Per-sample loss and its derivative with respect to the score `z`.
#[inline]
fn pointwise<T: Scalar>(loss: LossKind, z: T, label: u8) -> (T, T) {
    match loss {
        LossKind::Logistic => {
            let y = if label == 1 { T::one() } else { T::zero() };
            (softplus(z) - y * z, sigmoid(z) - y)
        }
        LossKind::Hinge => {
            let y = if label == 1 { T::one() } else { -T::one() };
            let margin = y * z;
            if margin < T::one() {
                (T::one() - margin, -y)
            } else {
                // at the kink the zero subgradient is chosen
                (T::zero(), T::zero())
            }
        }
    }
}

#[inline]
fn score<T: Scalar>(weights: &[T], bias: T, x: &[T]) -> T {
    weights.iter().zip(x).fold(bias, |acc, (w, v)| acc + *w * *v)
}

fn check_width<T: Scalar>(weights: &[T], m: &FeatureMatrix<T>) -> Result<()> {
    if weights.len() != m.width() {
        return Err(Error::Shape {
            expected: weights.len(),
            actual: m.width(),
        });
    }
    Ok(())
}

fn objective<T: Scalar>(
    loss: LossKind,
    weights: &[T],
    bias: T,
    l2: T,
    m: &FeatureMatrix<T>,
    epoch: usize,
) -> Result<(T, Gradient<T>)> {
    check_width(weights, m)?;
    if m.is_empty() {
        return Err(Error::InvalidInput("empty feature matrix".into()));
    }
    let width = m.width();
    let labels = m.labels();
    let zero = (T::zero(), vec![T::zero(); width], T::zero());
    let (loss_sum, mut gw, gb) = block_reduce(
        m.len(),
        zero.clone(),
        |range| {
            let (mut l, mut g, mut b) = zero.clone();
            for i in range {
                let x = m.row(i);
                let (li, dz) = pointwise(loss, score(weights, bias, x), labels[i]);
                l = l + li;
                b = b + dz;
                if dz != T::zero() {
                    for (gj, xj) in g.iter_mut().zip(x) {
                        *gj = *gj + dz * *xj;
                    }
                }
            }
            (l, g, b)
        },
        |(la, mut ga, ba), (lb, gb, bb)| {
            for (a, b) in ga.iter_mut().zip(&gb) {
                *a = *a + *b;
            }
            (la + lb, ga, ba + bb)
        },
    );
    let n = T::from_count(m.len());
    let penalty = l2 * T::lit(0.5) * weights.iter().map(|w| *w * *w).sum::<T>();
    let value = loss_sum / n + penalty;
    for (g, w) in gw.iter_mut().zip(weights) {
        *g = *g / n + l2 * *w;
    }
    let grad = Gradient {
        weights: gw,
        bias: gb / n,
    };
    if !value.is_finite() || !grad.max_norm().is_finite() {
        return Err(Error::Numeric {
            epoch,
            msg: "loss or gradient is not finite; try a smaller learning rate".into(),
        });
    }
    Ok((value, grad))
}

/// Objective value and (sub)gradient of `model` on `m`, including the L2 term.
pub fn loss_and_gradient<T: Scalar>(model: &TrainedModel<T>, m: &FeatureMatrix<T>) -> Result<(T, Gradient<T>)> {
    objective(model.loss, &model.weights, model.bias, model.meta.l2, m, 0)
}

impl<T: Scalar> TrainedModel<T> {
    /// An untrained model with the given parameters, mostly useful for scoring
    /// and tests.
    pub fn with_params(loss: LossKind, weights: Vec<T>, bias: T, l2: T) -> Self {
        let columns = (0..weights.len()).map(|i| format!("x{i}")).collect();
        Self {
            threshold: loss.default_threshold(),
            loss,
            bias,
            meta: TrainingMeta {
                epochs_run: 0,
                converged: false,
                final_loss: T::nan(),
                learning_rate: T::zero(),
                l2,
                tolerance: T::zero(),
                schedule: Schedule::default(),
                columns,
                loss_history: Vec::new(),
            },
            weights,
        }
    }

    pub fn width(&self) -> usize {
        self.weights.len()
    }

    pub fn decision_value(&self, x: &[T]) -> T {
        score(&self.weights, self.bias, x)
    }
}

/// Full-batch gradient descent from zero weights.
pub fn train<T: Scalar>(m: &FeatureMatrix<T>, config: &TrainConfig<T>) -> Result<TrainedModel<T>> {
    config.validate()?;
    if m.is_empty() {
        return Err(Error::Training("no training rows".into()));
    }
    let pos = m.positives();
    if pos == 0 || pos == m.len() {
        return Err(Error::Training(format!(
            "training data has a single class ({pos} positive of {} rows)",
            m.len()
        )));
    }
    let mut w = vec![T::zero(); m.width()];
    let mut b = T::zero();
    let mut history = Vec::with_capacity(config.epochs);
    let mut epochs_run = 0;
    let mut converged = false;
    for epoch in 1..=config.epochs {
        let (value, grad) = objective(config.loss, &w, b, config.l2, m, epoch)?;
        history.push(value);
        if grad.max_norm() < config.tolerance {
            converged = true;
            break;
        }
        let step = config.schedule.rate(config.learning_rate, epoch);
        for (wj, gj) in w.iter_mut().zip(&grad.weights) {
            *wj = *wj - step * *gj;
        }
        b = b - step * grad.bias;
        epochs_run = epoch;
    }
    let (final_loss, _) = objective(config.loss, &w, b, config.l2, m, epochs_run + 1)?;
    Ok(TrainedModel {
        weights: w,
        bias: b,
        loss: config.loss,
        threshold: config.loss.default_threshold(),
        meta: TrainingMeta {
            epochs_run,
            converged,
            final_loss,
            learning_rate: config.learning_rate,
            l2: config.l2,
            tolerance: config.tolerance,
            schedule: config.schedule,
            columns: m.columns().to_vec(),
            loss_history: history,
        },
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Predictions<T> {
    pub labels: Vec<u8>,
    /// Probability for logistic models, margin for SVMs.
    pub scores: Vec<T>,
}

pub fn predict<T: Scalar>(model: &TrainedModel<T>, m: &FeatureMatrix<T>) -> Result<Predictions<T>> {
    check_width(&model.weights, m)?;
    let scored: Vec<(u8, T)> = (0..m.len())
        .into_par_iter()
        .map(|i| {
            let z = model.decision_value(m.row(i));
            let s = match model.loss {
                LossKind::Logistic => sigmoid(z),
                LossKind::Hinge => z,
            };
            (u8::from(s >= model.threshold), s)
        })
        .collect();
    let (labels, scores) = scored.into_iter().unzip();
    Ok(Predictions { labels, scores })
}

impl<T: Scalar> TrainedModel<T> {
    /// Versioned plain-text serialization.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{MODEL_FORMAT_HEADER}");
        let _ = writeln!(out, "loss={}", self.loss);
        let _ = writeln!(out, "threshold={}", self.threshold);
        let _ = writeln!(out, "bias={}", self.bias);
        let _ = writeln!(out, "columns={}", self.meta.columns.join(","));
        for (c, w) in self.meta.columns.iter().zip(&self.weights) {
            let _ = writeln!(out, "weight.{c}={w}");
        }
        let _ = writeln!(out, "meta.epochs_run={}", self.meta.epochs_run);
        let _ = writeln!(out, "meta.converged={}", self.meta.converged);
        let _ = writeln!(out, "meta.final_loss={}", self.meta.final_loss);
        let _ = writeln!(out, "meta.learning_rate={}", self.meta.learning_rate);
        let _ = writeln!(out, "meta.l2={}", self.meta.l2);
        let _ = writeln!(out, "meta.tolerance={}", self.meta.tolerance);
        let _ = writeln!(out, "meta.schedule={}", self.meta.schedule);
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        if lines.next().map(str::trim) != Some(MODEL_FORMAT_HEADER) {
            return Err(Error::Schema(format!("model file must start with `{MODEL_FORMAT_HEADER}`")));
        }
        let doc = crate::kv::KvDoc::parse(&lines.collect::<Vec<_>>().join("\n"))?;
        let get = |k: &str| doc.get(k).ok_or_else(|| Error::Schema(format!("model file lacks `{k}`")));
        let num = |k: &str| -> Result<T> {
            let v = get(k)?;
            v.parse::<T>()
                .map_err(|_| Error::Schema(format!("model field `{k}` is not a number: `{v}`")))
        };
        let columns: Vec<String> = get("columns")?
            .split(',')
            .filter(|s| !s.is_empty())
            .map(str::to_string)
            .collect();
        let weights = columns
            .iter()
            .map(|c| num(&format!("weight.{c}")))
            .collect::<Result<Vec<T>>>()?;
        let epochs_run = get("meta.epochs_run")?
            .parse()
            .map_err(|_| Error::Schema("bad meta.epochs_run".into()))?;
        Ok(TrainedModel {
            weights,
            bias: num("bias")?,
            loss: get("loss")?.parse()?,
            threshold: num("threshold")?,
            meta: TrainingMeta {
                epochs_run,
                converged: get("meta.converged")? == "true",
                final_loss: num("meta.final_loss")?,
                learning_rate: num("meta.learning_rate")?,
                l2: num("meta.l2")?,
                tolerance: num("meta.tolerance")?,
                schedule: get("meta.schedule")?.parse()?,
                columns,
                loss_history: Vec::new(),
            },
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_text(&text)
    }
}
