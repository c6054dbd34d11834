//! Versioned binary serialization of trained models plus their fitted
//! thresholds. Dense parameters are narrowed to little-endian f32 on
//! disk; forest splits stay f64 so a reloaded forest scores bit-identically.

use std::fs::File;
use std::io::{self, BufReader, BufWriter, Read, Write};
use std::path::Path;

use thiserror::Error;

use super::dense::{DenseNetwork, Layer, VaeHead};
use super::forest::{IsolationForest, Node};
use super::{Model, ModelKind, Threshold};

const MAGIC: &[u8; 4] = b"AMB1";
/// Caps applied when reading untrusted files.
const MAX_DIM: u32 = 1_000_000;
const MAX_TREES: u32 = 100_000;
const MAX_NODE_DEPTH: usize = 64;

#[derive(Debug, Error)]
pub enum BlobError {
    #[error("model blob i/o: {0}")]
    Io(#[from] io::Error),
    #[error("bad model blob: {0}")]
    Format(String),
}

fn bad(msg: impl Into<String>) -> BlobError {
    BlobError::Format(msg.into())
}

/// A trained model and the threshold fitted for it — everything the
/// detection engine needs to resume scoring.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelBundle {
    pub model: Model,
    pub threshold: Threshold,
}

struct R<'a, T: Read>(&'a mut T);

impl<T: Read> R<'_, T> {
    fn u8(&mut self) -> Result<u8, BlobError> {
        let mut b = [0u8; 1];
        self.0.read_exact(&mut b)?;
        Ok(b[0])
    }

    fn u32(&mut self) -> Result<u32, BlobError> {
        let mut b = [0u8; 4];
        self.0.read_exact(&mut b)?;
        Ok(u32::from_le_bytes(b))
    }

    fn u64(&mut self) -> Result<u64, BlobError> {
        let mut b = [0u8; 8];
        self.0.read_exact(&mut b)?;
        Ok(u64::from_le_bytes(b))
    }

    fn f32(&mut self) -> Result<f32, BlobError> {
        let mut b = [0u8; 4];
        self.0.read_exact(&mut b)?;
        Ok(f32::from_le_bytes(b))
    }

    fn f64(&mut self) -> Result<f64, BlobError> {
        let mut b = [0u8; 8];
        self.0.read_exact(&mut b)?;
        Ok(f64::from_le_bytes(b))
    }
}

fn write_dense<W: Write>(w: &mut W, net: &DenseNetwork) -> Result<(), BlobError> {
    w.write_all(&[net.dims().len() as u8])?;
    for &d in net.dims() {
        w.write_all(&(d as u32).to_le_bytes())?;
    }
    w.write_all(&[net.latent_linear() as u8])?;
    for p in net.params() {
        w.write_all(&(p as f32).to_le_bytes())?;
    }
    Ok(())
}

fn read_dense<T: Read>(r: &mut R<T>) -> Result<DenseNetwork, BlobError> {
    let ndims = r.u8()? as usize;
    if ndims != 5 {
        return Err(bad(format!("expected 5 layer widths, found {ndims}")));
    }
    let mut dims = Vec::with_capacity(ndims);
    for _ in 0..ndims {
        let d = r.u32()?;
        if d == 0 || d > MAX_DIM {
            return Err(bad(format!("layer width {d} out of range")));
        }
        dims.push(d as usize);
    }
    let latent_linear = match r.u8()? {
        0 => false,
        1 => true,
        other => return Err(bad(format!("latent flag byte {other}"))),
    };
    let mut layers = Vec::with_capacity(4);
    for i in 0..4 {
        layers.push(read_layer(r, dims[i + 1], dims[i])?);
    }
    Ok(DenseNetwork::from_parts(dims, latent_linear, layers))
}

fn read_layer<T: Read>(r: &mut R<T>, rows: usize, cols: usize) -> Result<Layer, BlobError> {
    let mut w = Vec::with_capacity(rows * cols);
    for _ in 0..rows * cols {
        w.push(r.f32()? as f64);
    }
    let mut b = Vec::with_capacity(rows);
    for _ in 0..rows {
        b.push(r.f32()? as f64);
    }
    Ok(Layer { rows, cols, w, b })
}

fn write_layer<W: Write>(w: &mut W, layer: &Layer) -> Result<(), BlobError> {
    for v in layer.w.iter().chain(layer.b.iter()) {
        w.write_all(&(*v as f32).to_le_bytes())?;
    }
    Ok(())
}

fn write_node<W: Write>(w: &mut W, node: &Node) -> Result<(), BlobError> {
    match node {
        Node::Leaf { size } => {
            w.write_all(&[0])?;
            w.write_all(&size.to_le_bytes())?;
        }
        Node::Internal {
            attr,
            split,
            left,
            right,
        } => {
            w.write_all(&[1])?;
            w.write_all(&attr.to_le_bytes())?;
            w.write_all(&split.to_le_bytes())?;
            write_node(w, left)?;
            write_node(w, right)?;
        }
    }
    Ok(())
}

fn read_node<T: Read>(r: &mut R<T>, dim: u32, depth: usize) -> Result<Node, BlobError> {
    if depth > MAX_NODE_DEPTH {
        return Err(bad("tree deeper than the format allows"));
    }
    match r.u8()? {
        0 => Ok(Node::Leaf { size: r.u32()? }),
        1 => {
            let attr = r.u32()?;
            if attr >= dim {
                return Err(bad(format!("split attribute {attr} out of range")));
            }
            let split = r.f64()?;
            if !split.is_finite() {
                return Err(bad("non-finite split value"));
            }
            let left = Box::new(read_node(r, dim, depth + 1)?);
            let right = Box::new(read_node(r, dim, depth + 1)?);
            Ok(Node::Internal {
                attr,
                split,
                left,
                right,
            })
        }
        other => Err(bad(format!("node tag {other}"))),
    }
}

/// Writes a model bundle to a stream.
pub fn write_model<W: Write>(w: &mut W, bundle: &ModelBundle) -> Result<(), BlobError> {
    w.write_all(MAGIC)?;
    let kind = match bundle.model.kind() {
        ModelKind::Ae => 1u8,
        ModelKind::Dae => 2,
        ModelKind::Vae => 3,
        ModelKind::IForest => 4,
    };
    w.write_all(&[kind])?;
    match &bundle.model {
        Model::Ae(net) | Model::Dae(net) => write_dense(w, net)?,
        Model::Vae(net, head) => {
            write_dense(w, net)?;
            write_layer(w, &head.layer)?;
        }
        Model::IForest(f) => {
            w.write_all(&(f.dim as u32).to_le_bytes())?;
            w.write_all(&(f.subsample_size as u32).to_le_bytes())?;
            w.write_all(&(f.trees.len() as u32).to_le_bytes())?;
            for t in &f.trees {
                write_node(w, t)?;
            }
        }
    }
    let t = &bundle.threshold;
    w.write_all(&t.tau.to_le_bytes())?;
    w.write_all(&t.percentile.to_le_bytes())?;
    w.write_all(&(t.fitted_on as u64).to_le_bytes())?;
    Ok(())
}

/// Reads a model bundle from a stream, validating structure as it goes.
pub fn read_model<T: Read>(r: &mut T) -> Result<ModelBundle, BlobError> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(bad("not a model blob (bad magic)"));
    }
    let mut r = R(r);
    let kind = r.u8()?;
    let model = match kind {
        1 => Model::Ae(read_dense(&mut r)?),
        2 => Model::Dae(read_dense(&mut r)?),
        3 => {
            let net = read_dense(&mut r)?;
            let head = read_layer(&mut r, net.latent_width(), net.hidden_width())?;
            Model::Vae(net, VaeHead::from_layer(head))
        }
        4 => {
            let dim = r.u32()?;
            if dim == 0 || dim > MAX_DIM {
                return Err(bad(format!("forest dim {dim} out of range")));
            }
            let subsample = r.u32()?;
            let tree_count = r.u32()?;
            if tree_count == 0 || tree_count > MAX_TREES {
                return Err(bad(format!("tree count {tree_count} out of range")));
            }
            let mut trees = Vec::with_capacity(tree_count.min(1024) as usize);
            for _ in 0..tree_count {
                trees.push(read_node(&mut r, dim, 0)?);
            }
            Model::IForest(IsolationForest {
                trees,
                subsample_size: subsample as usize,
                dim: dim as usize,
            })
        }
        other => return Err(bad(format!("unknown model kind byte {other}"))),
    };
    let tau = r.f64()?;
    let percentile = r.f64()?;
    let fitted_on = r.u64()? as usize;
    if !tau.is_finite() || tau < 0.0 {
        return Err(bad(format!("threshold {tau} out of range")));
    }
    Ok(ModelBundle {
        model,
        threshold: Threshold {
            tau,
            percentile,
            fitted_on,
        },
    })
}

pub fn save_model(path: &Path, bundle: &ModelBundle) -> Result<(), BlobError> {
    let mut w = BufWriter::new(File::create(path)?);
    write_model(&mut w, bundle)?;
    w.flush()?;
    Ok(())
}

pub fn load_model(path: &Path) -> Result<ModelBundle, BlobError> {
    let mut r = BufReader::new(File::open(path)?);
    let bundle = read_model(&mut r)?;
    // Trailing garbage means the file is not what we wrote.
    let mut probe = [0u8; 1];
    if r.read(&mut probe)? != 0 {
        return Err(bad("trailing bytes after model blob"));
    }
    Ok(bundle)
}
