//! Versioned flat checkpoint: layer shapes, online and target parameters,
//! ADAM state, schedule progress, and the exploration RNG state. Save, load,
//! save reproduces identical bytes.
//!
//! Byte layout (all integers and floats little-endian):
//!
//! ```text
//! offset  size  field
//! 0       4     magic "DQSL"
//! 4       2     format version (currently 1)
//! 6       2     reserved, zero
//! 8       4     u32 layer count L
//! 12      8*L   per layer: u32 in_dim, u32 out_dim
//! ...           online params, per layer: weights (out*in f64) then biases
//! ...           target params, same layout
//! ...           u64 adam step, then adam m and v in the param layout
//! ...           f64 gamma, alpha_init, alpha_final, epsilon_init,
//! ...             epsilon_final
//! ...           u64 buffer_capacity, batch_size, target_sync,
//! ...             episodes_total, episodes_done, train_steps, train_every
//! ...           rng: 32-byte seed, u64 stream, u128 word position
//! ```

use std::path::Path;

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha12Rng;
use thiserror::Error;

use crate::agent::{Hyperparams, Learner, ReplayBuffer};
use crate::nn::{Adam, Dense, Mlp, ParamGrads};

const MAGIC: &[u8; 4] = b"DQSL";
const VERSION: u16 = 1;

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("not a checkpoint file (bad magic)")]
    BadMagic,
    #[error("unsupported checkpoint version {0}")]
    BadVersion(u16),
    #[error("checkpoint truncated at offset {0}")]
    Truncated(usize),
    #[error("layer shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Everything needed to resume training or run greedy evaluation.
pub struct Checkpoint {
    pub hp: Hyperparams,
    pub online: Mlp,
    pub target: Mlp,
    pub adam: Adam,
    pub episodes_done: u64,
    pub train_steps: u64,
    pub rng: ChaCha12Rng,
}

impl Checkpoint {
    pub fn from_learner(learner: &Learner, episodes_done: u64, rng: &ChaCha12Rng) -> Checkpoint {
        Checkpoint {
            hp: learner.hp.clone(),
            online: learner.online.clone(),
            target: learner.target.clone(),
            adam: learner.adam.clone(),
            episodes_done,
            train_steps: learner.train_steps,
            rng: rng.clone(),
        }
    }

    /// Rebuilds a learner (with an empty replay buffer: experience is not
    /// checkpointed) plus the exploration RNG.
    pub fn into_learner(self) -> (Learner, u64, ChaCha12Rng) {
        let buffer = ReplayBuffer::new(self.hp.buffer_capacity);
        let learner = Learner {
            online: self.online,
            target: self.target,
            adam: self.adam,
            buffer,
            hp: self.hp,
            train_steps: self.train_steps,
        };
        (learner, self.episodes_done, self.rng)
    }
}

struct Writer {
    buf: Vec<u8>,
}

impl Writer {
    fn new() -> Writer {
        Writer { buf: Vec::with_capacity(4096) }
    }

    fn u16(&mut self, v: u16) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    fn u32(&mut self, v: u32) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    fn u64(&mut self, v: u64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    fn u128(&mut self, v: u128) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    fn f64(&mut self, v: f64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    fn f64s(&mut self, vs: &[f64]) {
        for v in vs {
            self.f64(*v);
        }
    }
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], CheckpointError> {
        if self.pos + n > self.buf.len() {
            return Err(CheckpointError::Truncated(self.pos));
        }
        let slice = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(slice)
    }

    fn u16(&mut self) -> Result<u16, CheckpointError> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    fn u32(&mut self) -> Result<u32, CheckpointError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64, CheckpointError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn u128(&mut self) -> Result<u128, CheckpointError> {
        Ok(u128::from_le_bytes(self.take(16)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64, CheckpointError> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64s(&mut self, n: usize) -> Result<Vec<f64>, CheckpointError> {
        let mut out = Vec::with_capacity(n);
        for _ in 0..n {
            out.push(self.f64()?);
        }
        Ok(out)
    }
}

fn write_params(w: &mut Writer, net: &Mlp) {
    for layer in &net.layers {
        w.f64s(&layer.weights);
        w.f64s(&layer.biases);
    }
}

fn write_grads(w: &mut Writer, grads: &ParamGrads) {
    for (gw, gb) in &grads.layers {
        w.f64s(gw);
        w.f64s(gb);
    }
}

pub fn encode(cp: &Checkpoint) -> Vec<u8> {
    let mut w = Writer::new();
    w.buf.extend_from_slice(MAGIC);
    w.u16(VERSION);
    w.u16(0);
    let shapes: Vec<(usize, usize)> =
        cp.online.layers.iter().map(|l| (l.in_dim, l.out_dim)).collect();
    w.u32(shapes.len() as u32);
    for (i, o) in &shapes {
        w.u32(*i as u32);
        w.u32(*o as u32);
    }
    write_params(&mut w, &cp.online);
    write_params(&mut w, &cp.target);
    w.u64(cp.adam.step);
    write_grads(&mut w, &cp.adam.m);
    write_grads(&mut w, &cp.adam.v);
    w.f64(cp.hp.gamma);
    w.f64(cp.hp.alpha_init);
    w.f64(cp.hp.alpha_final);
    w.f64(cp.hp.epsilon_init);
    w.f64(cp.hp.epsilon_final);
    w.u64(cp.hp.buffer_capacity as u64);
    w.u64(cp.hp.batch_size as u64);
    w.u64(cp.hp.target_sync);
    w.u64(cp.hp.episodes);
    w.u64(cp.episodes_done);
    w.u64(cp.train_steps);
    w.u64(cp.hp.train_every as u64);
    w.buf.extend_from_slice(&cp.rng.get_seed());
    w.u64(cp.rng.get_stream());
    w.u128(cp.rng.get_word_pos());
    w.buf
}

fn read_net(r: &mut Reader, shapes: &[(usize, usize)]) -> Result<Mlp, CheckpointError> {
    let mut layers = Vec::with_capacity(shapes.len());
    for &(in_dim, out_dim) in shapes {
        let weights = r.f64s(in_dim * out_dim)?;
        let biases = r.f64s(out_dim)?;
        layers.push(Dense { weights, biases, in_dim, out_dim });
    }
    Ok(Mlp { layers })
}

fn read_grads(
    r: &mut Reader,
    shapes: &[(usize, usize)],
) -> Result<ParamGrads, CheckpointError> {
    let mut layers = Vec::with_capacity(shapes.len());
    for &(in_dim, out_dim) in shapes {
        let gw = r.f64s(in_dim * out_dim)?;
        let gb = r.f64s(out_dim)?;
        layers.push((gw, gb));
    }
    Ok(ParamGrads { layers })
}

pub fn decode(bytes: &[u8]) -> Result<Checkpoint, CheckpointError> {
    let mut r = Reader { buf: bytes, pos: 0 };
    if r.take(4)? != MAGIC {
        return Err(CheckpointError::BadMagic);
    }
    let version = r.u16()?;
    if version != VERSION {
        return Err(CheckpointError::BadVersion(version));
    }
    r.u16()?; // reserved
    let n_layers = r.u32()? as usize;
    let mut shapes = Vec::with_capacity(n_layers);
    for _ in 0..n_layers {
        let in_dim = r.u32()? as usize;
        let out_dim = r.u32()? as usize;
        shapes.push((in_dim, out_dim));
    }
    for pair in shapes.windows(2) {
        if pair[0].1 != pair[1].0 {
            return Err(CheckpointError::ShapeMismatch(format!(
                "layer output {} feeds layer input {}",
                pair[0].1, pair[1].0
            )));
        }
    }
    let online = read_net(&mut r, &shapes)?;
    let target = read_net(&mut r, &shapes)?;
    let adam_step = r.u64()?;
    let m = read_grads(&mut r, &shapes)?;
    let v = read_grads(&mut r, &shapes)?;
    let gamma = r.f64()?;
    let alpha_init = r.f64()?;
    let alpha_final = r.f64()?;
    let epsilon_init = r.f64()?;
    let epsilon_final = r.f64()?;
    let buffer_capacity = r.u64()? as usize;
    let batch_size = r.u64()? as usize;
    let target_sync = r.u64()?;
    let episodes = r.u64()?;
    let episodes_done = r.u64()?;
    let train_steps = r.u64()?;
    let train_every = r.u64()? as usize;
    let seed: [u8; 32] = r.take(32)?.try_into().unwrap();
    let stream = r.u64()?;
    let word_pos = r.u128()?;
    let mut rng = ChaCha12Rng::from_seed(seed);
    rng.set_stream(stream);
    rng.set_word_pos(word_pos);

    let hidden: Vec<usize> = shapes[..shapes.len() - 1].iter().map(|&(_, o)| o).collect();
    let hp = Hyperparams {
        gamma,
        alpha_init,
        alpha_final,
        epsilon_init,
        epsilon_final,
        buffer_capacity,
        batch_size,
        target_sync,
        episodes,
        hidden,
        train_every,
        ..Hyperparams::default()
    };
    let mut adam = Adam::new(&online, hp.adam_beta1, hp.adam_beta2, hp.adam_epsilon);
    adam.step = adam_step;
    adam.m = m;
    adam.v = v;
    Ok(Checkpoint { hp, online, target, adam, episodes_done, train_steps, rng })
}

pub fn save(cp: &Checkpoint, path: &Path) -> Result<(), CheckpointError> {
    std::fs::write(path, encode(cp))?;
    Ok(())
}

pub fn load(path: &Path) -> Result<Checkpoint, CheckpointError> {
    decode(&std::fs::read(path)?)
}
