//! Versioned binary checkpoint format for named networks.
//!
//! Layout (all integers little-endian, all parameters stored as f64 bits so
//! that f32 and f64 nets both round-trip bitwise):
//!
//! ```text
//! magic    b"TNCD"
//! version  u32 = 1
//! nets     u32
//! per net:
//!   name_len u32, name utf-8 bytes
//!   input_dim u32
//!   layers u32
//!   per layer:
//!     activation u8   (0 identity, 1 relu, 2 sigmoid, 3 softmax)
//!     out_dim u32, in_dim u32
//!     weights  out*in f64 (row-major)
//!     bias     out f64
//! ```

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::nn::{Activation, DenseNet};
use crate::scalar::Float;

const MAGIC: &[u8; 4] = b"TNCD";
const VERSION: u32 = 1;

fn activation_tag(a: Activation) -> u8 {
    match a {
        Activation::Identity => 0,
        Activation::Relu => 1,
        Activation::Sigmoid => 2,
        Activation::Softmax => 3,
    }
}

fn tag_activation(t: u8) -> Result<Activation> {
    match t {
        0 => Ok(Activation::Identity),
        1 => Ok(Activation::Relu),
        2 => Ok(Activation::Sigmoid),
        3 => Ok(Activation::Softmax),
        other => Err(Error::data(format!("unknown activation tag {other}"))),
    }
}

pub fn save_nets<F: Float>(path: &Path, nets: &[(&str, &DenseNet<F>)]) -> Result<()> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            std::fs::create_dir_all(dir)?;
        }
    }
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    w.write_all(&(nets.len() as u32).to_le_bytes())?;
    for (name, net) in nets {
        w.write_all(&(name.len() as u32).to_le_bytes())?;
        w.write_all(name.as_bytes())?;
        w.write_all(&(net.input_dim() as u32).to_le_bytes())?;
        w.write_all(&(net.num_layers() as u32).to_le_bytes())?;
        for li in 0..net.num_layers() {
            let layer = net.layer(li);
            w.write_all(&[activation_tag(layer.activation())])?;
            w.write_all(&(layer.out_dim() as u32).to_le_bytes())?;
            w.write_all(&(layer.in_dim() as u32).to_le_bytes())?;
            for v in layer.weights().data() {
                w.write_all(&v.to_f64().unwrap().to_le_bytes())?;
            }
            for v in layer.bias() {
                w.write_all(&v.to_f64().unwrap().to_le_bytes())?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

pub fn load_nets<F: Float>(path: &Path) -> Result<Vec<(String, DenseNet<F>)>> {
    let mut r = BufReader::new(File::open(path)?);
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::data(format!("not a checkpoint file: {path:?}")));
    }
    let version = read_u32(&mut r)?;
    if version != VERSION {
        return Err(Error::data(format!("unsupported checkpoint version {version}")));
    }
    let n_nets = read_u32(&mut r)? as usize;
    let mut nets = Vec::with_capacity(n_nets);
    for _ in 0..n_nets {
        let name_len = read_u32(&mut r)? as usize;
        let mut name_buf = vec![0u8; name_len];
        r.read_exact(&mut name_buf)?;
        let name = String::from_utf8(name_buf)
            .map_err(|_| Error::data("invalid utf-8 in checkpoint net name"))?;
        let input_dim = read_u32(&mut r)? as usize;
        let n_layers = read_u32(&mut r)? as usize;
        let mut layers = Vec::with_capacity(n_layers);
        for _ in 0..n_layers {
            let mut tag = [0u8; 1];
            r.read_exact(&mut tag)?;
            let activation = tag_activation(tag[0])?;
            let out_dim = read_u32(&mut r)? as usize;
            let in_dim = read_u32(&mut r)? as usize;
            let mut data = Vec::with_capacity(out_dim * in_dim);
            for _ in 0..out_dim * in_dim {
                data.push(F::c(read_f64(&mut r)?));
            }
            let weights = Matrix::from_vec(out_dim, in_dim, data)?;
            let mut bias = Vec::with_capacity(out_dim);
            for _ in 0..out_dim {
                bias.push(F::c(read_f64(&mut r)?));
            }
            layers.push((weights, bias, activation));
        }
        nets.push((name, DenseNet::from_layers(input_dim, layers)?));
    }
    Ok(nets)
}

/// Loads one net by name from a checkpoint.
pub fn load_named<F: Float>(path: &Path, name: &str) -> Result<DenseNet<F>> {
    load_nets(path)?
        .into_iter()
        .find(|(n, _)| n == name)
        .map(|(_, net)| net)
        .ok_or_else(|| Error::data(format!("checkpoint {path:?} has no net named {name:?}")))
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    let mut buf = [0u8; 4];
    r.read_exact(&mut buf)?;
    Ok(u32::from_le_bytes(buf))
}

fn read_f64<R: Read>(r: &mut R) -> Result<f64> {
    let mut buf = [0u8; 8];
    r.read_exact(&mut buf)?;
    Ok(f64::from_le_bytes(buf))
}
