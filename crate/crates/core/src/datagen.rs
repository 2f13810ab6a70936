//! Synthetic realizable datasets and the fixed-permutation minibatch
//! schedule used by the SGLD sampler.

use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::models::{forward, ModelSpec, ParamVector, Task};
use crate::numerics::linalg::Matrix;
use crate::numerics::rng::Rng;

/// Regression targets are dense rows; classification targets are class
/// indices.
#[derive(Clone, Debug, PartialEq)]
pub enum Targets {
    Regression(Vec<f64>),
    Classes(Vec<usize>),
}

/// An in-memory dataset of n rows, inputs stored row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub inputs: Vec<f64>,
    pub targets: Targets,
    pub n: usize,
    pub input_dim: usize,
    pub output_dim: usize,
}

impl Dataset {
    #[inline]
    pub fn input(&self, i: usize) -> &[f64] {
        &self.inputs[i * self.input_dim..(i + 1) * self.input_dim]
    }

    pub fn all_indices(&self) -> Vec<usize> {
        (0..self.n).collect()
    }
}

/// Inputs uniform on [-10, 10]^H0 and targets produced noiselessly by the
/// given true parameter.
pub fn gen_realizable(
    spec: &ModelSpec,
    w_true: &ParamVector,
    n: usize,
    rng: &mut Rng,
) -> Result<Dataset> {
    if n == 0 {
        return Err(Error::InvalidArgument("dataset needs n >= 1".into()));
    }
    let in_dim = spec.input_dim();
    let out_dim = spec.output_dim();
    let mut inputs = Vec::with_capacity(n * in_dim);
    for _ in 0..n * in_dim {
        inputs.push(rng.uniform_in(-10.0, 10.0));
    }
    let targets = match spec.task {
        Task::Regression => {
            let mut ys = Vec::with_capacity(n * out_dim);
            for i in 0..n {
                let y = forward(spec, w_true, &inputs[i * in_dim..(i + 1) * in_dim])?;
                ys.extend_from_slice(&y);
            }
            Targets::Regression(ys)
        }
        Task::Classification => {
            let mut cs = Vec::with_capacity(n);
            for i in 0..n {
                let y = forward(spec, w_true, &inputs[i * in_dim..(i + 1) * in_dim])?;
                let argmax = y
                    .iter()
                    .enumerate()
                    .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
                    .map(|(k, _)| k)
                    .unwrap();
                cs.push(argmax);
            }
            Targets::Classes(cs)
        }
    };
    Ok(Dataset {
        inputs,
        targets,
        n,
        input_dim: in_dim,
        output_dim: out_dim,
    })
}

/// A random true DLN parameter following the synthetic-experiment protocol:
/// each W_j has i.i.d. N(0,1) entries, and with probability 1/2 it is
/// replaced by a rank-r_j product of two Gaussian factors with
/// r_j ~ U(0..=min(H_{j-1}, H_j)). The factorization makes each layer's rank
/// exact by construction, and the rank of the full product is almost surely
/// the minimum of the layer ranks.
pub fn random_true_dln(spec: &ModelSpec, rng: &mut Rng) -> Result<(ParamVector, usize)> {
    let mut mats = Vec::with_capacity(spec.depth());
    let mut product_rank = usize::MAX;
    for j in 1..=spec.depth() {
        let rows = spec.widths[j];
        let cols = spec.widths[j - 1];
        let full_rank = rows.min(cols);
        let truncate = rng.uniform() < 0.5;
        let (mat, layer_rank) = if truncate {
            let r = rng.uniform_range_usize(0, full_rank);
            if r == 0 {
                (Matrix::zeros(rows, cols), 0)
            } else {
                let a = Matrix::gaussian(rows, r, rng);
                let b = Matrix::gaussian(r, cols, rng);
                (a.matmul(&b)?, r)
            }
        } else {
            (Matrix::gaussian(rows, cols, rng), full_rank)
        };
        product_rank = product_rank.min(layer_rank);
        mats.push(mat);
    }
    Ok((ParamVector::from_matrices(spec, &mats)?, product_rank))
}

/// Fixed-permutation minibatch schedule: the dataset is shuffled once and
/// partitioned into consecutive size-m segments; the final short segment of
/// an epoch is emitted as-is, and the next epoch reuses the same permutation.
#[derive(Clone, Debug)]
pub struct MinibatchSchedule {
    perm: Vec<usize>,
    batch_size: usize,
    cursor: usize,
}

impl MinibatchSchedule {
    pub fn new(n: usize, batch_size: usize, rng: &mut Rng) -> Result<Self> {
        if n == 0 || batch_size == 0 {
            return Err(Error::InvalidArgument(
                "schedule needs n >= 1 and batch_size >= 1".into(),
            ));
        }
        if batch_size > n {
            return Err(Error::InvalidArgument(format!(
                "batch size {batch_size} exceeds dataset size {n}"
            )));
        }
        Ok(MinibatchSchedule {
            perm: rng.permutation(n),
            batch_size,
            cursor: 0,
        })
    }

    pub fn next_batch(&mut self) -> &[usize] {
        let n = self.perm.len();
        if self.cursor >= n {
            self.cursor = 0;
        }
        let start = self.cursor;
        let end = (start + self.batch_size).min(n);
        self.cursor = end;
        &self.perm[start..end]
    }

    pub fn batches_per_epoch(&self) -> usize {
        self.perm.len().div_ceil(self.batch_size)
    }
}

// ---------------------------------------------------------------------------
// Dataset files
// ---------------------------------------------------------------------------

const DATASET_MAGIC: &[u8; 8] = b"LLCDATA1";

/// Write a dataset. Layout (little-endian): magic "LLCDATA1", endian tag u8
/// (1), float width u8 (8), task u8, n u64, input dim u32, output dim u32,
/// inputs (n*input_dim f64), then targets (regression: n*output_dim f64;
/// classification: n u32 class indices).
pub fn save_dataset(path: &Path, data: &Dataset) -> Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    f.write_all(DATASET_MAGIC)?;
    let task_tag = match data.targets {
        Targets::Regression(_) => 0u8,
        Targets::Classes(_) => 1u8,
    };
    f.write_all(&[1u8, 8u8, task_tag])?;
    f.write_all(&(data.n as u64).to_le_bytes())?;
    f.write_all(&(data.input_dim as u32).to_le_bytes())?;
    f.write_all(&(data.output_dim as u32).to_le_bytes())?;
    for v in &data.inputs {
        f.write_all(&v.to_le_bytes())?;
    }
    match &data.targets {
        Targets::Regression(ys) => {
            for v in ys {
                f.write_all(&v.to_le_bytes())?;
            }
        }
        Targets::Classes(cs) => {
            for &c in cs {
                f.write_all(&(c as u32).to_le_bytes())?;
            }
        }
    }
    Ok(())
}

pub fn load_dataset(path: &Path) -> Result<Dataset> {
    let mut f = std::io::BufReader::new(std::fs::File::open(path)?);
    let mut magic = [0u8; 8];
    f.read_exact(&mut magic)?;
    if &magic != DATASET_MAGIC {
        return Err(Error::Format("not a dataset file".into()));
    }
    let mut head = [0u8; 3];
    f.read_exact(&mut head)?;
    if head[0] != 1 || head[1] != 8 {
        return Err(Error::Format(
            "unsupported endianness or float width".into(),
        ));
    }
    let mut u64buf = [0u8; 8];
    f.read_exact(&mut u64buf)?;
    let n = u64::from_le_bytes(u64buf) as usize;
    let mut u32buf = [0u8; 4];
    f.read_exact(&mut u32buf)?;
    let input_dim = u32::from_le_bytes(u32buf) as usize;
    f.read_exact(&mut u32buf)?;
    let output_dim = u32::from_le_bytes(u32buf) as usize;
    if n == 0 || input_dim == 0 || output_dim == 0 {
        return Err(Error::Format("empty dataset dimensions".into()));
    }
    let mut f64buf = [0u8; 8];
    let mut inputs = Vec::with_capacity(n * input_dim);
    for _ in 0..n * input_dim {
        f.read_exact(&mut f64buf)?;
        inputs.push(f64::from_le_bytes(f64buf));
    }
    let targets = match head[2] {
        0 => {
            let mut ys = Vec::with_capacity(n * output_dim);
            for _ in 0..n * output_dim {
                f.read_exact(&mut f64buf)?;
                ys.push(f64::from_le_bytes(f64buf));
            }
            Targets::Regression(ys)
        }
        1 => {
            let mut cs = Vec::with_capacity(n);
            for _ in 0..n {
                f.read_exact(&mut u32buf)?;
                cs.push(u32::from_le_bytes(u32buf) as usize);
            }
            Targets::Classes(cs)
        }
        t => return Err(Error::Format(format!("unknown task tag {t}"))),
    };
    Ok(Dataset {
        inputs,
        targets,
        n,
        input_dim,
        output_dim,
    })
}
