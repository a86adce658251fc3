//! Trainable parameters: embedding table, the shared context encoder, the
//! fact encoder, and the four ensemble scalars. Checkpoints round-trip
//! exactly in the stored precision via shortest-round-trip decimal text.

use super::config::ModelConfig;
use super::ModelError;
use crate::data::EmbeddingMatrix;
use crate::tensor::{BiGruParamIds, BiGruParams, Graph, NodeId, Real, Tensor};
use rand::Rng;
use std::any::TypeId;
use std::io::{BufRead, Write};

/// Parameter groups reported by the gradient checker and used for
/// freeze scheduling.
pub const GROUP_EMBEDDINGS: &str = "embeddings";
pub const GROUP_CTX_ENCODER: &str = "ctx_encoder";
pub const GROUP_FACT_ENCODER: &str = "fact_encoder";
pub const GROUP_ENSEMBLE: &str = "ensemble_weights";

#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams<T> {
    /// |V| x E lookup table.
    pub embeddings: Tensor<T>,
    /// Shared document/question encoder.
    pub ctx_encoder: BiGruParams<T>,
    /// Separate fact-chain encoder.
    pub fact_encoder: BiGruParams<T>,
    /// W1..W4, each a 1-element tensor, initialized to 1.0.
    pub ensemble_weights: [Tensor<T>; 4],
}

impl<T: Real> ModelParams<T> {
    /// Seeded initialization. Embedding rows come from `pretrained` when
    /// given, otherwise uniform [-0.1, 0.1]; gate matrices are
    /// Glorot-uniform; ensemble scalars start at 1.0.
    pub fn init<R: Rng>(
        cfg: &ModelConfig,
        vocab_size: usize,
        pretrained: Option<&EmbeddingMatrix>,
        rng: &mut R,
    ) -> Result<Self, ModelError> {
        let embeddings = match pretrained {
            Some(m) => {
                if m.dim != cfg.embed_dim {
                    return Err(ModelError::ConfigMismatch(format!(
                        "embedding file width {} but embed_dim {}",
                        m.dim, cfg.embed_dim
                    )));
                }
                if m.vocab_size() != vocab_size {
                    return Err(ModelError::ConfigMismatch(format!(
                        "embedding rows {} but vocabulary size {}",
                        m.vocab_size(),
                        vocab_size
                    )));
                }
                Tensor::from_f64(vec![vocab_size, cfg.embed_dim], &m.values)?
            }
            None => {
                let data = (0..vocab_size * cfg.embed_dim)
                    .map(|_| T::from_f64_lossy(rng.random_range(-0.1..0.1)))
                    .collect();
                Tensor::new(vec![vocab_size, cfg.embed_dim], data)?
            }
        };
        // The fact encoder starts as a copy of the context encoder (they
        // diverge in training): encoding facts and text in one space from
        // step zero gives the dot-product attention same-token alignment
        // before any learning.
        let ctx_encoder = BiGruParams::glorot(cfg.embed_dim, cfg.hidden_size, rng);
        Ok(ModelParams {
            embeddings,
            fact_encoder: ctx_encoder.clone(),
            ctx_encoder,
            ensemble_weights: std::array::from_fn(|_| Tensor::scalar(T::one())),
        })
    }

    pub fn vocab_size(&self) -> usize {
        self.embeddings.shape()[0]
    }

    pub fn embed_dim(&self) -> usize {
        self.embeddings.shape()[1]
    }

    pub fn hidden_size(&self) -> usize {
        self.ctx_encoder.hidden_size()
    }

    /// Stable (name, tensor) listing; the order defines the optimizer's
    /// moment alignment and the checkpoint layout.
    pub fn named_tensors(&self) -> Vec<(String, &Tensor<T>)> {
        let mut out: Vec<(String, &Tensor<T>)> =
            vec![("embeddings".to_string(), &self.embeddings)];
        for (enc_name, enc) in [("ctx", &self.ctx_encoder), ("fact", &self.fact_encoder)] {
            for (dir_name, dir) in [("fwd", &enc.fwd), ("bwd", &enc.bwd)] {
                for (n, t) in dir.named_tensors() {
                    out.push((format!("{enc_name}.{dir_name}.{n}"), t));
                }
            }
        }
        for (i, w) in self.ensemble_weights.iter().enumerate() {
            out.push((format!("w{}", i + 1), w));
        }
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut Tensor<T>> {
        let mut out: Vec<&mut Tensor<T>> = vec![&mut self.embeddings];
        out.extend(self.ctx_encoder.fwd.tensors_mut());
        out.extend(self.ctx_encoder.bwd.tensors_mut());
        out.extend(self.fact_encoder.fwd.tensors_mut());
        out.extend(self.fact_encoder.bwd.tensors_mut());
        for w in self.ensemble_weights.iter_mut() {
            out.push(w);
        }
        out
    }

    /// Group name for a `named_tensors` entry.
    pub fn group_of(name: &str) -> &'static str {
        if name == "embeddings" {
            GROUP_EMBEDDINGS
        } else if name.starts_with("ctx.") {
            GROUP_CTX_ENCODER
        } else if name.starts_with("fact.") {
            GROUP_FACT_ENCODER
        } else {
            GROUP_ENSEMBLE
        }
    }

    pub fn shapes(&self) -> Vec<Vec<usize>> {
        self.named_tensors()
            .iter()
            .map(|(_, t)| t.shape().to_vec())
            .collect()
    }

    pub fn register(&self, g: &mut Graph<T>) -> ParamIds {
        ParamIds {
            embeddings: g.param(&self.embeddings),
            ctx: BiGruParamIds::register(g, &self.ctx_encoder),
            fact: BiGruParamIds::register(g, &self.fact_encoder),
            ensemble: std::array::from_fn(|i| g.param(&self.ensemble_weights[i])),
        }
    }

    pub fn save<W: Write>(&self, mut w: W) -> Result<(), ModelError> {
        writeln!(w, "knreader-checkpoint v1")?;
        writeln!(w, "precision {}", precision_tag::<T>())?;
        let named = self.named_tensors();
        writeln!(w, "tensors {}", named.len())?;
        for (name, t) in named {
            let dims: Vec<String> = t.shape().iter().map(|d| d.to_string()).collect();
            writeln!(w, "tensor {name} {} {}", t.shape().len(), dims.join(" "))?;
            let vals: Vec<String> = t.data().iter().map(|v| format!("{v}")).collect();
            writeln!(w, "{}", vals.join(" "))?;
        }
        Ok(())
    }

    /// Load a checkpoint saved at the same precision. The tensor layout is
    /// validated against a freshly shaped parameter set.
    pub fn load<R: BufRead>(r: R, cfg: &ModelConfig, vocab_size: usize) -> Result<Self, ModelError> {
        let ck = |message: String| ModelError::Checkpoint { message };
        let mut lines = r.lines();
        let mut next = || -> Result<String, ModelError> {
            lines
                .next()
                .ok_or_else(|| ck("unexpected end of checkpoint".into()))?
                .map_err(ModelError::from)
        };
        let header = next()?;
        if header.trim() != "knreader-checkpoint v1" {
            return Err(ck(format!("unknown checkpoint header {header:?}")));
        }
        let prec = next()?;
        let tag = prec
            .strip_prefix("precision ")
            .ok_or_else(|| ck("expected precision line".into()))?
            .trim()
            .to_string();
        if tag != precision_tag::<T>() {
            return Err(ck(format!(
                "checkpoint precision {tag} does not match requested {}",
                precision_tag::<T>()
            )));
        }
        let count_line = next()?;
        let count: usize = count_line
            .strip_prefix("tensors ")
            .and_then(|v| v.trim().parse().ok())
            .ok_or_else(|| ck("expected tensor count line".into()))?;

        // Shape template with zeroed values; filled in below.
        let mut params = ModelParams {
            embeddings: Tensor::zeros(vec![vocab_size, cfg.embed_dim]),
            ctx_encoder: BiGruParams::zeros(cfg.embed_dim, cfg.hidden_size),
            fact_encoder: BiGruParams::zeros(cfg.embed_dim, cfg.hidden_size),
            ensemble_weights: std::array::from_fn(|_| Tensor::scalar(T::zero())),
        };
        let expected: Vec<(String, Vec<usize>)> = params
            .named_tensors()
            .iter()
            .map(|(n, t)| (n.clone(), t.shape().to_vec()))
            .collect();
        if count != expected.len() {
            return Err(ck(format!(
                "checkpoint holds {count} tensors, model needs {}",
                expected.len()
            )));
        }

        let mut slots = params.tensors_mut();
        for (i, (name, shape)) in expected.iter().enumerate() {
            let head = next()?;
            let parts: Vec<&str> = head.split_whitespace().collect();
            if parts.len() < 3 || parts[0] != "tensor" || parts[1] != name {
                return Err(ck(format!(
                    "expected tensor {name}, found {head:?}"
                )));
            }
            let dims: Vec<usize> = parts[3..]
                .iter()
                .map(|d| d.parse().map_err(|_| ck(format!("bad dimension in {head:?}"))))
                .collect::<Result<_, _>>()?;
            if &dims != shape {
                return Err(ck(format!(
                    "tensor {name} has shape {dims:?}, expected {shape:?}"
                )));
            }
            let values_line = next()?;
            let data: Vec<T> = values_line
                .split_whitespace()
                .map(|v| {
                    v.parse::<f64>()
                        .map(T::from_f64_lossy)
                        .map_err(|_| ck(format!("bad value {v:?} in tensor {name}")))
                })
                .collect::<Result<_, _>>()?;
            if data.len() != shape.iter().product::<usize>() {
                return Err(ck(format!(
                    "tensor {name} holds {} values, expected {}",
                    data.len(),
                    shape.iter().product::<usize>()
                )));
            }
            *slots[i] = Tensor::new(shape.clone(), data)?;
        }
        drop(slots);
        Ok(params)
    }
}

/// Graph handles after registering all parameters.
#[derive(Debug, Clone, Copy)]
pub struct ParamIds {
    pub embeddings: NodeId,
    pub ctx: BiGruParamIds,
    pub fact: BiGruParamIds,
    pub ensemble: [NodeId; 4],
}

impl ParamIds {
    /// Node ids in `named_tensors` order.
    pub fn ordered(&self) -> Vec<NodeId> {
        let gru = |p: &crate::tensor::GruParamIds| {
            vec![p.w_z, p.u_z, p.b_z, p.w_r, p.u_r, p.b_r, p.w_h, p.u_h, p.b_h]
        };
        let mut out = vec![self.embeddings];
        out.extend(gru(&self.ctx.fwd));
        out.extend(gru(&self.ctx.bwd));
        out.extend(gru(&self.fact.fwd));
        out.extend(gru(&self.fact.bwd));
        out.extend(self.ensemble);
        out
    }

    /// Gradients for every parameter, zeros where none flowed.
    pub fn gradients<T: Real>(&self, g: &Graph<T>) -> Vec<Tensor<T>> {
        self.ordered().iter().map(|&id| g.grad_tensor(id)).collect()
    }
}

fn precision_tag<T: 'static>() -> &'static str {
    if TypeId::of::<T>() == TypeId::of::<f32>() {
        "f32"
    } else if TypeId::of::<T>() == TypeId::of::<f64>() {
        "f64"
    } else {
        "unknown"
    }
}
