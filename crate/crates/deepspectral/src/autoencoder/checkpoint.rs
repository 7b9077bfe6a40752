//! Binary model checkpoints.
//!
//! Layout (all integers little-endian): magic `DSCM`, u32 version, u32 layer
//! count, then per layer u32 out, u32 in, u8 activation tag (0 relu,
//! 1 linear), `out*in` f64 weights row-major, `out` f64 biases; finally a
//! u32 encoder layer count. Round-trips are bit-exact.

use super::model::{Activation, Layer, MlpModel};
use crate::error::{Error, Result};
use crate::numerics::Matrix;
use std::fs::File;
use std::io::{self, BufReader, BufWriter, Read, Write};
use std::path::Path;

const MAGIC: &[u8; 4] = b"DSCM";
const VERSION: u32 = 1;
/// Upper bound on elements in one weight matrix, to reject corrupt headers
/// before they turn into giant allocations.
const MAX_LAYER_ELEMENTS: u64 = 100_000_000;

fn io_error(path: &Path, source: io::Error) -> Error {
    Error::io(path.to_path_buf(), source)
}

/// Writes `model` to `path`, replacing any existing file.
pub fn save_model(model: &MlpModel, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| io_error(path, e))?;
    let mut w = BufWriter::new(file);
    let write = |w: &mut BufWriter<File>, bytes: &[u8]| -> Result<()> {
        w.write_all(bytes).map_err(|e| io_error(path, e))
    };

    write(&mut w, MAGIC)?;
    write(&mut w, &VERSION.to_le_bytes())?;
    write(&mut w, &(model.layers.len() as u32).to_le_bytes())?;
    for layer in &model.layers {
        write(&mut w, &(layer.weights.rows() as u32).to_le_bytes())?;
        write(&mut w, &(layer.weights.cols() as u32).to_le_bytes())?;
        let tag: u8 = match layer.activation {
            Activation::Relu => 0,
            Activation::Linear => 1,
        };
        write(&mut w, &[tag])?;
        for v in layer.weights.as_slice() {
            write(&mut w, &v.to_le_bytes())?;
        }
        for v in &layer.biases {
            write(&mut w, &v.to_le_bytes())?;
        }
    }
    write(&mut w, &(model.encoder_end as u32).to_le_bytes())?;
    w.flush().map_err(|e| io_error(path, e))
}

struct CheckpointReader<'a> {
    reader: BufReader<File>,
    path: &'a Path,
}

impl<'a> CheckpointReader<'a> {
    fn read_bytes(&mut self, buf: &mut [u8]) -> Result<()> {
        self.reader.read_exact(buf).map_err(|e| {
            if e.kind() == io::ErrorKind::UnexpectedEof {
                Error::format("checkpoint ends unexpectedly (truncated file?)")
            } else {
                io_error(self.path, e)
            }
        })
    }

    fn read_u32(&mut self) -> Result<u32> {
        let mut buf = [0u8; 4];
        self.read_bytes(&mut buf)?;
        Ok(u32::from_le_bytes(buf))
    }

    fn read_u8(&mut self) -> Result<u8> {
        let mut buf = [0u8; 1];
        self.read_bytes(&mut buf)?;
        Ok(buf[0])
    }

    fn read_f64_vec(&mut self, count: usize) -> Result<Vec<f64>> {
        let mut bytes = vec![0u8; count * 8];
        self.read_bytes(&mut bytes)?;
        Ok(bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect())
    }
}

/// Reads a model previously written by [`save_model`], validating the
/// header, layer geometry, and encoder split.
pub fn load_model(path: &Path) -> Result<MlpModel> {
    let file = File::open(path).map_err(|e| io_error(path, e))?;
    let mut r = CheckpointReader { reader: BufReader::new(file), path };

    let mut magic = [0u8; 4];
    r.read_bytes(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::format("not a model checkpoint (bad magic)"));
    }
    let version = r.read_u32()?;
    if version != VERSION {
        return Err(Error::format(format!(
            "unsupported checkpoint version {version}, expected {VERSION}"
        )));
    }

    let layer_count = r.read_u32()? as usize;
    if layer_count < 2 {
        return Err(Error::format(format!(
            "checkpoint declares {layer_count} layers, need at least an encoder and a decoder"
        )));
    }

    let mut layers: Vec<Layer> = Vec::with_capacity(layer_count);
    for idx in 0..layer_count {
        let out = r.read_u32()? as usize;
        let inw = r.read_u32()? as usize;
        if out == 0 || inw == 0 || (out as u64) * (inw as u64) > MAX_LAYER_ELEMENTS {
            return Err(Error::format(format!("layer {idx} has implausible shape {out}x{inw}")));
        }
        if let Some(prev) = layers.last() {
            if prev.weights.rows() != inw {
                return Err(Error::format(format!(
                    "layer {idx} expects input width {inw} but the previous layer outputs {}",
                    prev.weights.rows()
                )));
            }
        }
        let activation = match r.read_u8()? {
            0 => Activation::Relu,
            1 => Activation::Linear,
            tag => return Err(Error::format(format!("unknown activation tag {tag}"))),
        };
        let weights = Matrix::from_vec(out, inw, r.read_f64_vec(out * inw)?);
        let biases = r.read_f64_vec(out)?;
        layers.push(Layer { weights, biases, activation });
    }

    let encoder_end = r.read_u32()? as usize;
    if encoder_end == 0 || encoder_end >= layer_count {
        return Err(Error::format(format!(
            "encoder split {encoder_end} out of range for {layer_count} layers"
        )));
    }

    let mut trailing = [0u8; 1];
    match r.reader.read(&mut trailing) {
        Ok(0) => {}
        Ok(_) => return Err(Error::format("checkpoint has trailing bytes")),
        Err(e) => return Err(io_error(path, e)),
    }

    Ok(MlpModel { layers, encoder_end })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autoencoder::init_model;
    use std::fs;

    fn bits(model: &MlpModel) -> Vec<u64> {
        model
            .layers
            .iter()
            .flat_map(|l| {
                l.weights
                    .as_slice()
                    .iter()
                    .chain(&l.biases)
                    .map(|v| v.to_bits())
                    .collect::<Vec<_>>()
            })
            .collect()
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.dscm");
        let model = init_model(&[7, 5, 3, 5, 7], 13).unwrap();
        save_model(&model, &path).unwrap();
        let loaded = load_model(&path).unwrap();
        assert_eq!(bits(&model), bits(&loaded));
        assert_eq!(model.encoder_end, loaded.encoder_end);
        let acts: Vec<_> = loaded.layers.iter().map(|l| l.activation).collect();
        let expected: Vec<_> = model.layers.iter().map(|l| l.activation).collect();
        assert_eq!(acts, expected);
    }

    #[test]
    fn corrupt_headers_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.dscm");
        let model = init_model(&[4, 2, 4], 1).unwrap();
        save_model(&model, &path).unwrap();
        let good = fs::read(&path).unwrap();

        // Bad magic.
        let mut bad = good.clone();
        bad[0] = b'X';
        fs::write(&path, &bad).unwrap();
        assert!(matches!(load_model(&path), Err(Error::Format(_))));

        // Unsupported version.
        let mut bad = good.clone();
        bad[4] = 9;
        fs::write(&path, &bad).unwrap();
        assert!(matches!(load_model(&path), Err(Error::Format(_))));

        // Truncated.
        fs::write(&path, &good[..good.len() - 3]).unwrap();
        assert!(matches!(load_model(&path), Err(Error::Format(_))));

        // Trailing garbage.
        let mut bad = good.clone();
        bad.push(0);
        fs::write(&path, &bad).unwrap();
        assert!(matches!(load_model(&path), Err(Error::Format(_))));

        // Activation tag out of range: first layer tag sits after
        // magic(4) + version(4) + count(4) + out(4) + in(4).
        let mut bad = good;
        bad[20] = 7;
        fs::write(&path, &bad).unwrap();
        assert!(matches!(load_model(&path), Err(Error::Format(_))));
    }

    #[test]
    fn missing_file_reports_the_path() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("absent.dscm");
        match load_model(&path) {
            Err(Error::Io { path: p, .. }) => assert_eq!(p, path),
            other => panic!("expected Io error, got {other:?}"),
        }
    }
}
