use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::math::sqrt;
use crate::{Error, Result};

/// Row-major dense tensor. Vectors are stored as `n x 1` or `1 x n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Param {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Param {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    /// Glorot-uniform: `U(-sqrt(6 / (fan_in + fan_out)), +...)`.
    pub fn glorot(rows: usize, cols: usize, rng: &mut impl Rng) -> Self {
        let limit = sqrt(6.0 / (rows + cols) as f64);
        Self {
            rows,
            cols,
            data: (0..rows * cols)
                .map(|_| rng.gen_range(-limit..=limit))
                .collect(),
        }
    }

    pub fn zeros_like(&self) -> Self {
        Self::zeros(self.rows, self.cols)
    }

    #[inline]
    pub fn at(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    /// `out[j] += sum_i x[i] * self[i, j]`.
    pub(crate) fn left_mul_add(&self, x: &[f64], out: &mut [f64]) {
        debug_assert_eq!(x.len(), self.rows);
        debug_assert_eq!(out.len(), self.cols);
        for (i, &xi) in x.iter().enumerate() {
            if xi == 0.0 {
                continue;
            }
            let row = &self.data[i * self.cols..(i + 1) * self.cols];
            for (o, &m) in out.iter_mut().zip(row) {
                *o += xi * m;
            }
        }
    }

    /// `out[i] += sum_j self[i, j] * d[j]`, i.e. backprop through `x . M`.
    pub(crate) fn right_mul_add(&self, d: &[f64], out: &mut [f64]) {
        debug_assert_eq!(d.len(), self.cols);
        debug_assert_eq!(out.len(), self.rows);
        for (i, o) in out.iter_mut().enumerate() {
            let row = &self.data[i * self.cols..(i + 1) * self.cols];
            *o += row.iter().zip(d).map(|(m, g)| m * g).sum::<f64>();
        }
    }

    /// `self[i, j] += x[i] * d[j]`.
    pub(crate) fn outer_add(&mut self, x: &[f64], d: &[f64]) {
        debug_assert_eq!(x.len(), self.rows);
        debug_assert_eq!(d.len(), self.cols);
        for (i, &xi) in x.iter().enumerate() {
            if xi == 0.0 {
                continue;
            }
            let row = &mut self.data[i * self.cols..(i + 1) * self.cols];
            for (r, &g) in row.iter_mut().zip(d) {
                *r += xi * g;
            }
        }
    }

    pub(crate) fn add_slice(&mut self, d: &[f64]) {
        for (r, g) in self.data.iter_mut().zip(d) {
            *r += g;
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum AttentionKind {
    /// `score(h) = w . h + b`
    Affine,
    /// `score(h) = v . tanh(h W_a + b_a) + b`
    TanhMlp { size: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum AttentionScorer {
    Affine {
        w: Param,
        b: Param,
    },
    TanhMlp {
        w_a: Param,
        b_a: Param,
        v: Param,
        b: Param,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelShape {
    pub input_size: usize,
    pub hidden_size: usize,
    pub dense_size: usize,
    pub attention: AttentionKind,
}

impl ModelShape {
    /// Dense layer sized at a quarter of the GRU width.
    pub fn with_ratio(input_size: usize, hidden_size: usize) -> Self {
        Self {
            input_size,
            hidden_size,
            dense_size: (hidden_size / 4).max(1),
            attention: AttentionKind::Affine,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_size == 0 || self.hidden_size == 0 || self.dense_size == 0 {
            return Err(Error::InvalidConfig("model sizes must be positive".into()));
        }
        if let AttentionKind::TanhMlp { size: 0 } = self.attention {
            return Err(Error::InvalidConfig(
                "attention MLP size must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// GRU, attention scorer, dense layer and output unit weights.
///
/// Input-to-hidden matrices are `D x H`, hidden-to-hidden `H x H`, and
/// every layer computes `x . W + b` with `x` a row vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub shape: ModelShape,
    pub w_z: Param,
    pub u_z: Param,
    pub b_z: Param,
    pub w_r: Param,
    pub u_r: Param,
    pub b_r: Param,
    pub w_h: Param,
    pub u_h: Param,
    pub b_h: Param,
    pub attention: AttentionScorer,
    pub w_d: Param,
    pub b_d: Param,
    pub w_o: Param,
    pub b_o: Param,
}

impl ModelParams {
    pub fn zeros(shape: ModelShape) -> Result<Self> {
        shape.validate()?;
        let (d, h, f) = (shape.input_size, shape.hidden_size, shape.dense_size);
        let attention = match shape.attention {
            AttentionKind::Affine => AttentionScorer::Affine {
                w: Param::zeros(h, 1),
                b: Param::zeros(1, 1),
            },
            AttentionKind::TanhMlp { size } => AttentionScorer::TanhMlp {
                w_a: Param::zeros(h, size),
                b_a: Param::zeros(1, size),
                v: Param::zeros(size, 1),
                b: Param::zeros(1, 1),
            },
        };
        Ok(Self {
            shape,
            w_z: Param::zeros(d, h),
            u_z: Param::zeros(h, h),
            b_z: Param::zeros(1, h),
            w_r: Param::zeros(d, h),
            u_r: Param::zeros(h, h),
            b_r: Param::zeros(1, h),
            w_h: Param::zeros(d, h),
            u_h: Param::zeros(h, h),
            b_h: Param::zeros(1, h),
            attention,
            w_d: Param::zeros(h, f),
            b_d: Param::zeros(1, f),
            w_o: Param::zeros(f, 1),
            b_o: Param::zeros(1, 1),
        })
    }

    /// Glorot-uniform weight matrices, zero biases.
    pub fn init(shape: ModelShape, rng: &mut impl Rng) -> Result<Self> {
        let mut p = Self::zeros(shape)?;
        let (d, h, f) = (shape.input_size, shape.hidden_size, shape.dense_size);
        p.w_z = Param::glorot(d, h, rng);
        p.u_z = Param::glorot(h, h, rng);
        p.w_r = Param::glorot(d, h, rng);
        p.u_r = Param::glorot(h, h, rng);
        p.w_h = Param::glorot(d, h, rng);
        p.u_h = Param::glorot(h, h, rng);
        p.attention = match shape.attention {
            AttentionKind::Affine => AttentionScorer::Affine {
                w: Param::glorot(h, 1, rng),
                b: Param::zeros(1, 1),
            },
            AttentionKind::TanhMlp { size } => AttentionScorer::TanhMlp {
                w_a: Param::glorot(h, size, rng),
                b_a: Param::zeros(1, size),
                v: Param::glorot(size, 1, rng),
                b: Param::zeros(1, 1),
            },
        };
        p.w_d = Param::glorot(h, f, rng);
        p.w_o = Param::glorot(f, 1, rng);
        Ok(p)
    }

    pub fn zeros_like(&self) -> Self {
        Self::zeros(self.shape).expect("shape already validated")
    }

    /// Tensors in a fixed order: GRU, attention, dense, output.
    pub fn tensors(&self) -> Vec<&Param> {
        let mut out = vec![
            &self.w_z, &self.u_z, &self.b_z, &self.w_r, &self.u_r, &self.b_r, &self.w_h, &self.u_h,
            &self.b_h,
        ];
        match &self.attention {
            AttentionScorer::Affine { w, b } => out.extend([w, b]),
            AttentionScorer::TanhMlp { w_a, b_a, v, b } => out.extend([w_a, b_a, v, b]),
        }
        out.extend([&self.w_d, &self.b_d, &self.w_o, &self.b_o]);
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut Param> {
        let mut out = vec![
            &mut self.w_z,
            &mut self.u_z,
            &mut self.b_z,
            &mut self.w_r,
            &mut self.u_r,
            &mut self.b_r,
            &mut self.w_h,
            &mut self.u_h,
            &mut self.b_h,
        ];
        match &mut self.attention {
            AttentionScorer::Affine { w, b } => out.extend([w, b]),
            AttentionScorer::TanhMlp { w_a, b_a, v, b } => out.extend([w_a, b_a, v, b]),
        }
        out.extend([&mut self.w_d, &mut self.b_d, &mut self.w_o, &mut self.b_o]);
        out
    }

    pub fn tensor_names(&self) -> Vec<&'static str> {
        let mut out = vec![
            "w_z", "u_z", "b_z", "w_r", "u_r", "b_r", "w_h", "u_h", "b_h",
        ];
        match self.attention {
            AttentionScorer::Affine { .. } => out.extend(["attn_w", "attn_b"]),
            AttentionScorer::TanhMlp { .. } => {
                out.extend(["attn_w_a", "attn_b_a", "attn_v", "attn_b"])
            }
        }
        out.extend(["w_d", "b_d", "w_o", "b_o"]);
        out
    }

    pub fn num_parameters(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.tensors()
            .iter()
            .all(|t| t.data.iter().all(|v| v.is_finite()))
    }

    pub(crate) fn scale(&mut self, factor: f64) {
        for t in self.tensors_mut() {
            t.data.iter_mut().for_each(|v| *v *= factor);
        }
    }

    pub(crate) fn set_zero(&mut self) {
        for t in self.tensors_mut() {
            t.data.iter_mut().for_each(|v| *v = 0.0);
        }
    }
}
