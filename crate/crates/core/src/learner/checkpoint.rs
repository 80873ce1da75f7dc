//! Binary agent snapshot. Little-endian throughout:
//!
//! ```text
//! magic "TTAG" | u32 version | u32 len + config JSON
//! 4 x network (actor, critic, actor target, critic target)
//! 2 x Adam (actor, critic)
//! rng: 32-byte seed | u64 stream | u128 word position
//! ```
//!
//! A network is `u8 output activation | u32 layers | per layer: u32 rows,
//! u32 cols, rows*cols f64 weights (row-major), rows f64 bias`. An Adam
//! state is `f64 lr, beta1, beta2, eps | u64 step | m and v` with the
//! layer shapes of its network.

use std::io::{Read, Write};
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::nn::{Activation, Adam, Dense, Grads, Mlp};
use super::{Agent, AgentConfig, LearnerError};

pub const MAGIC: &[u8; 4] = b"TTAG";
pub const VERSION: u32 = 1;

fn bad(msg: impl Into<String>) -> LearnerError {
    LearnerError::Checkpoint(msg.into())
}

struct Writer(Vec<u8>);

impl Writer {
    fn u8(&mut self, v: u8) {
        self.0.push(v);
    }
    fn u32(&mut self, v: usize) {
        self.0.extend_from_slice(&(v as u32).to_le_bytes());
    }
    fn u64(&mut self, v: u64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn f64(&mut self, v: f64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }

    fn layers(&mut self, layers: &[Dense]) {
        self.u32(layers.len());
        for l in layers {
            self.u32(l.w.nrows());
            self.u32(l.w.ncols());
            for r in 0..l.w.nrows() {
                for c in 0..l.w.ncols() {
                    self.f64(l.w[(r, c)]);
                }
            }
            for v in l.b.iter() {
                self.f64(*v);
            }
        }
    }

    fn net(&mut self, net: &Mlp) {
        self.u8(net.output.to_code());
        self.layers(&net.layers);
    }

    fn adam(&mut self, a: &Adam) {
        for v in [a.lr, a.beta1, a.beta2, a.eps] {
            self.f64(v);
        }
        self.u64(a.step);
        self.layers(&a.m);
        self.layers(&a.v);
    }
}

struct Reader<'a>(&'a [u8]);

impl Reader<'_> {
    fn take(&mut self, n: usize) -> Result<&[u8], LearnerError> {
        if self.0.len() < n {
            return Err(bad("truncated file"));
        }
        let (head, rest) = self.0.split_at(n);
        self.0 = rest;
        Ok(head)
    }
    fn array<const N: usize>(&mut self) -> Result<[u8; N], LearnerError> {
        Ok(self.take(N)?.try_into().expect("length checked"))
    }
    fn u8(&mut self) -> Result<u8, LearnerError> {
        Ok(self.take(1)?[0])
    }
    fn u32(&mut self) -> Result<usize, LearnerError> {
        Ok(u32::from_le_bytes(self.array()?) as usize)
    }
    fn u64(&mut self) -> Result<u64, LearnerError> {
        Ok(u64::from_le_bytes(self.array()?))
    }
    fn f64(&mut self) -> Result<f64, LearnerError> {
        Ok(f64::from_le_bytes(self.array()?))
    }

    fn layers(&mut self) -> Result<Vec<Dense>, LearnerError> {
        let n = self.u32()?;
        let mut out = Vec::with_capacity(n.min(64));
        for _ in 0..n {
            let (rows, cols) = (self.u32()?, self.u32()?);
            if rows.saturating_mul(cols).saturating_mul(8) > self.0.len() {
                return Err(bad("layer larger than remaining data"));
            }
            let mut w = DMatrix::zeros(rows, cols);
            for r in 0..rows {
                for c in 0..cols {
                    w[(r, c)] = self.f64()?;
                }
            }
            let b = DVector::from_iterator(rows, (0..rows).map(|_| self.f64()).collect::<Result<Vec<_>, _>>()?);
            out.push(Dense { w, b });
        }
        Ok(out)
    }

    fn net(&mut self) -> Result<Mlp, LearnerError> {
        let output = Activation::from_code(self.u8()?).ok_or_else(|| bad("unknown activation"))?;
        let layers = self.layers()?;
        for pair in layers.windows(2) {
            if pair[1].w.ncols() != pair[0].w.nrows() {
                return Err(bad("inconsistent layer shapes"));
            }
        }
        Ok(Mlp { layers, output })
    }

    fn adam(&mut self, net: &Mlp) -> Result<Adam, LearnerError> {
        let (lr, beta1, beta2, eps) = (self.f64()?, self.f64()?, self.f64()?, self.f64()?);
        let step = self.u64()?;
        let (m, v) = (self.layers()?, self.layers()?);
        let same = |g: &Grads| {
            g.len() == net.layers.len() && g.iter().zip(&net.layers).all(|(a, b)| a.w.shape() == b.w.shape())
        };
        if !same(&m) || !same(&v) {
            return Err(bad("optimizer state does not match its network"));
        }
        Ok(Adam {
            lr,
            beta1,
            beta2,
            eps,
            step,
            m,
            v,
        })
    }
}

pub fn to_bytes(agent: &Agent) -> Vec<u8> {
    let mut w = Writer(Vec::new());
    w.0.extend_from_slice(MAGIC);
    w.u32(VERSION as usize);
    let cfg = serde_json::to_vec(&agent.cfg).expect("config serializes");
    w.u32(cfg.len());
    w.0.extend_from_slice(&cfg);
    for net in [&agent.actor, &agent.critic, &agent.actor_target, &agent.critic_target] {
        w.net(net);
    }
    w.adam(&agent.actor_opt);
    w.adam(&agent.critic_opt);
    w.0.extend_from_slice(&agent.rng.get_seed());
    w.u64(agent.rng.get_stream());
    w.0.extend_from_slice(&agent.rng.get_word_pos().to_le_bytes());
    w.0
}

pub fn from_bytes(bytes: &[u8]) -> Result<Agent, LearnerError> {
    let mut r = Reader(bytes);
    if r.take(4)? != MAGIC {
        return Err(bad("not an agent checkpoint"));
    }
    let version = r.u32()?;
    if version != VERSION as usize {
        return Err(bad(format!("unsupported version {version}")));
    }
    let len = r.u32()?;
    let cfg: AgentConfig = serde_json::from_slice(r.take(len)?).map_err(|e| bad(format!("config: {e}")))?;
    cfg.validate()?;
    let actor = r.net()?;
    let critic = r.net()?;
    let actor_target = r.net()?;
    let critic_target = r.net()?;
    let actor_opt = r.adam(&actor)?;
    let critic_opt = r.adam(&critic)?;
    let mut rng = ChaCha8Rng::from_seed(r.array()?);
    rng.set_stream(r.u64()?);
    rng.set_word_pos(u128::from_le_bytes(r.array()?));
    if !r.0.is_empty() {
        return Err(bad("trailing bytes"));
    }
    Ok(Agent {
        cfg,
        actor,
        critic,
        actor_target,
        critic_target,
        actor_opt,
        critic_opt,
        rng,
    })
}

pub fn save(agent: &Agent, path: impl AsRef<Path>) -> Result<(), LearnerError> {
    let mut f = std::fs::File::create(path)?;
    f.write_all(&to_bytes(agent))?;
    Ok(())
}

pub fn load(path: impl AsRef<Path>) -> Result<Agent, LearnerError> {
    let mut buf = Vec::new();
    std::fs::File::open(path)?.read_to_end(&mut buf)?;
    from_bytes(&buf)
}
