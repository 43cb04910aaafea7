//! Binary model container.
//!
//! Layout, all integers `u32` and all reals `f64`, little-endian:
//!
//! ```text
//! "SUDN" | version | layer count
//! per layer: input_dim | output_dim | activation tag | levels | weights (row-major) | biases
//! ```
//!
//! Activation tags: 0 linear, 1 tanh, 2 relu, 3 sudo, 4 r-sudo, 5 softmax.
//! `levels` is 0 for non-discretized layers. The loss is implied by the
//! output layer: softmax means cross-entropy, anything else SSE.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::activations::ActivationKind;
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::network::{Dense, LayerActivation, LayerSpec, Loss, Network, NetworkSpec};
use crate::scalar::Real;

pub const MAGIC: [u8; 4] = *b"SUDN";
pub const VERSION: u32 = 1;

fn tag(activation: LayerActivation) -> (u32, u32) {
    match activation {
        LayerActivation::Linear => (0, 0),
        LayerActivation::Unit(ActivationKind::Tanh) => (1, 0),
        LayerActivation::Unit(ActivationKind::Relu) => (2, 0),
        LayerActivation::Unit(ActivationKind::Sudo(l)) => (3, l.get()),
        LayerActivation::Unit(ActivationKind::RSudo(l)) => (4, l.get()),
        LayerActivation::Softmax => (5, 0),
    }
}

fn untag(tag: u32, levels: u32) -> Result<LayerActivation> {
    Ok(match tag {
        0 => LayerActivation::Linear,
        1 => ActivationKind::Tanh.into(),
        2 => ActivationKind::Relu.into(),
        3 => ActivationKind::sudo(levels)?.into(),
        4 => ActivationKind::rsudo(levels)?.into(),
        5 => LayerActivation::Softmax,
        other => return Err(Error::Model(format!("unknown activation tag {other}"))),
    })
}

pub fn write_model<T: Real, W: Write>(net: &Network<T>, mut w: W) -> Result<()> {
    w.write_all(&MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    w.write_all(&u32_of(net.layers().len())?.to_le_bytes())?;
    for (spec, dense) in net.spec().layers().iter().zip(net.layers()) {
        let (t, l) = tag(spec.activation);
        for v in [u32_of(spec.input_dim)?, u32_of(spec.output_dim)?, t, l] {
            w.write_all(&v.to_le_bytes())?;
        }
        for v in dense.weights.as_slice().iter().chain(dense.bias.as_slice()) {
            w.write_all(&v.as_f64().to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn read_model<T: Real, R: Read>(mut r: R) -> Result<Network<T>> {
    let mut magic = [0u8; 4];
    read_exact(&mut r, &mut magic, "magic")?;
    if magic != MAGIC {
        return Err(Error::Model(format!("bad magic {magic:?}, expected \"SUDN\"")));
    }
    let version = read_u32(&mut r, "version")?;
    if version != VERSION {
        return Err(Error::Model(format!("unsupported version {version}")));
    }
    let count = read_u32(&mut r, "layer count")? as usize;
    if count == 0 {
        return Err(Error::Model("model has no layers".into()));
    }
    let mut specs = Vec::with_capacity(count);
    let mut layers = Vec::with_capacity(count);
    for _ in 0..count {
        let input_dim = read_u32(&mut r, "input_dim")? as usize;
        let output_dim = read_u32(&mut r, "output_dim")? as usize;
        let activation = untag(read_u32(&mut r, "activation")?, read_u32(&mut r, "levels")?)?;
        let weights = read_reals(&mut r, input_dim, output_dim)?;
        let bias = read_reals(&mut r, 1, output_dim)?;
        specs.push(LayerSpec { input_dim, output_dim, activation });
        layers.push(Dense { weights, bias });
    }
    let mut trailing = [0u8; 1];
    if r.read(&mut trailing)? != 0 {
        return Err(Error::Model("trailing bytes after last layer".into()));
    }
    let loss = match specs[count - 1].activation {
        LayerActivation::Softmax => Loss::SoftmaxCrossEntropy,
        _ => Loss::Sse,
    };
    Network::from_parts(NetworkSpec::new(specs, loss)?, layers)
}

pub fn save_model<T: Real>(net: &Network<T>, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::file(path, e))?;
    write_model(net, BufWriter::new(file))
}

pub fn load_model<T: Real>(path: impl AsRef<Path>) -> Result<Network<T>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::file(path, e))?;
    read_model(BufReader::new(file))
}

fn u32_of(v: usize) -> Result<u32> {
    u32::try_from(v).map_err(|_| Error::Model(format!("dimension {v} exceeds u32")))
}

fn read_exact<R: Read>(r: &mut R, buf: &mut [u8], what: &str) -> Result<()> {
    r.read_exact(buf).map_err(|e| match e.kind() {
        std::io::ErrorKind::UnexpectedEof => Error::Model(format!("truncated while reading {what}")),
        _ => e.into(),
    })
}

fn read_u32<R: Read>(r: &mut R, what: &str) -> Result<u32> {
    let mut b = [0u8; 4];
    read_exact(r, &mut b, what)?;
    Ok(u32::from_le_bytes(b))
}

fn read_reals<T: Real, R: Read>(r: &mut R, rows: usize, cols: usize) -> Result<Matrix<T>> {
    let mut data = Vec::with_capacity(rows * cols);
    let mut b = [0u8; 8];
    for _ in 0..rows * cols {
        read_exact(r, &mut b, "parameters")?;
        data.push(T::lit(f64::from_le_bytes(b)));
    }
    Matrix::new(rows, cols, data)
}
