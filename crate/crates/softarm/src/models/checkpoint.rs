use crate::ioutil::{expect_magic, read_str, read_u32, read_u64, read_u8, write_str, write_u32,
    write_u64, write_u8};
use crate::nn::Tensor;
use crate::{Error, Result};
use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

const MAGIC: &[u8] = b"SSCK1";
const FORMAT_VERSION: u32 = 1;
const MAX_NAME: usize = 4096;

/// Raw tensor payload inside a checkpoint.
#[derive(Clone, Debug, PartialEq)]
pub enum TensorPayload {
    F32(Vec<f32>),
    F64(Vec<f64>),
}

impl TensorPayload {
    fn dtype_tag(&self) -> u8 {
        match self {
            TensorPayload::F32(_) => 0,
            TensorPayload::F64(_) => 1,
        }
    }

    fn len(&self) -> usize {
        match self {
            TensorPayload::F32(v) => v.len(),
            TensorPayload::F64(v) => v.len(),
        }
    }
}

/// Named tensor table plus a string metadata block.
///
/// Layout: magic `SSCK1`, format version, tensor count, then per tensor the
/// name, dtype tag (0 = f32, 1 = f64), rank, dims and little-endian data;
/// finally the metadata key/value pairs.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Checkpoint {
    tensors: Vec<(String, Vec<usize>, TensorPayload)>,
    pub meta: BTreeMap<String, String>,
}

impl Checkpoint {
    pub fn new() -> Self {
        Checkpoint::default()
    }

    pub fn add_f32(&mut self, name: &str, shape: &[usize], data: Vec<f32>) {
        debug_assert_eq!(shape.iter().product::<usize>(), data.len());
        self.tensors
            .push((name.to_string(), shape.to_vec(), TensorPayload::F32(data)));
    }

    pub fn add_f64(&mut self, name: &str, shape: &[usize], data: Vec<f64>) {
        debug_assert_eq!(shape.iter().product::<usize>(), data.len());
        self.tensors
            .push((name.to_string(), shape.to_vec(), TensorPayload::F64(data)));
    }

    pub fn add_tensor_f32(&mut self, name: &str, tensor: &Tensor<f32>) {
        self.add_f32(name, tensor.shape(), tensor.data().to_vec());
    }

    pub fn tensor_names(&self) -> Vec<&str> {
        self.tensors.iter().map(|(n, _, _)| n.as_str()).collect()
    }

    fn find(&self, name: &str) -> Result<&(String, Vec<usize>, TensorPayload)> {
        self.tensors
            .iter()
            .find(|(n, _, _)| n == name)
            .ok_or_else(|| Error::Format(format!("checkpoint is missing tensor '{name}'")))
    }

    pub fn get_f32(&self, name: &str) -> Result<Tensor<f32>> {
        let (_, shape, payload) = self.find(name)?;
        match payload {
            TensorPayload::F32(v) => Tensor::from_vec(shape, v.clone()),
            TensorPayload::F64(_) => Err(Error::Format(format!(
                "tensor '{name}' stored as f64, expected f32"
            ))),
        }
    }

    pub fn get_f64_data(&self, name: &str) -> Result<Vec<f64>> {
        let (_, _, payload) = self.find(name)?;
        match payload {
            TensorPayload::F64(v) => Ok(v.clone()),
            TensorPayload::F32(v) => Ok(v.iter().map(|&x| x as f64).collect()),
        }
    }

    pub fn meta_str(&self, key: &str) -> Result<&str> {
        self.meta
            .get(key)
            .map(|s| s.as_str())
            .ok_or_else(|| Error::Format(format!("checkpoint is missing metadata key '{key}'")))
    }

    pub fn meta_parse<T: std::str::FromStr>(&self, key: &str) -> Result<T> {
        self.meta_str(key)?.parse().map_err(|_| {
            Error::Format(format!(
                "checkpoint metadata '{key}' = '{}' failed to parse",
                self.meta.get(key).unwrap()
            ))
        })
    }

    pub fn set_meta(&mut self, key: &str, value: impl ToString) {
        self.meta.insert(key.to_string(), value.to_string());
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        w.write_all(MAGIC)?;
        write_u32(&mut w, FORMAT_VERSION)?;
        write_u32(&mut w, self.tensors.len() as u32)?;
        for (name, shape, payload) in &self.tensors {
            write_str(&mut w, name)?;
            write_u8(&mut w, payload.dtype_tag())?;
            write_u32(&mut w, shape.len() as u32)?;
            for &d in shape {
                write_u64(&mut w, d as u64)?;
            }
            match payload {
                TensorPayload::F32(v) => {
                    for &x in v {
                        w.write_all(&x.to_le_bytes())?;
                    }
                }
                TensorPayload::F64(v) => {
                    for &x in v {
                        w.write_all(&x.to_le_bytes())?;
                    }
                }
            }
        }
        write_u32(&mut w, self.meta.len() as u32)?;
        for (k, v) in &self.meta {
            write_str(&mut w, k)?;
            write_str(&mut w, v)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Checkpoint> {
        let mut r = BufReader::new(File::open(path)?);
        expect_magic(&mut r, MAGIC, "checkpoint")?;
        let version = read_u32(&mut r)?;
        if version != FORMAT_VERSION {
            return Err(Error::Format(format!(
                "unsupported checkpoint version {version}"
            )));
        }
        let n_tensors = read_u32(&mut r)? as usize;
        let mut tensors = Vec::with_capacity(n_tensors);
        for _ in 0..n_tensors {
            let name = read_str(&mut r, MAX_NAME)?;
            let dtype = read_u8(&mut r)?;
            let rank = read_u32(&mut r)? as usize;
            if rank > 8 {
                return Err(Error::Format(format!("tensor '{name}' has rank {rank}")));
            }
            let mut shape = Vec::with_capacity(rank);
            for _ in 0..rank {
                shape.push(read_u64(&mut r)? as usize);
            }
            let len: usize = shape.iter().product();
            let payload = match dtype {
                0 => {
                    let mut buf = vec![0u8; len * 4];
                    r.read_exact(&mut buf)?;
                    TensorPayload::F32(
                        buf.chunks_exact(4)
                            .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]))
                            .collect(),
                    )
                }
                1 => {
                    let mut buf = vec![0u8; len * 8];
                    r.read_exact(&mut buf)?;
                    TensorPayload::F64(
                        buf.chunks_exact(8)
                            .map(|b| {
                                f64::from_le_bytes([
                                    b[0], b[1], b[2], b[3], b[4], b[5], b[6], b[7],
                                ])
                            })
                            .collect(),
                    )
                }
                other => {
                    return Err(Error::Format(format!(
                        "tensor '{name}' has unknown dtype tag {other}"
                    )))
                }
            };
            debug_assert_eq!(payload.len(), len);
            tensors.push((name, shape, payload));
        }
        let n_meta = read_u32(&mut r)? as usize;
        let mut meta = BTreeMap::new();
        for _ in 0..n_meta {
            let k = read_str(&mut r, MAX_NAME)?;
            let v = read_str(&mut r, 1 << 20)?;
            meta.insert(k, v);
        }
        Ok(Checkpoint { tensors, meta })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_preserves_tensors_and_meta() {
        let mut ck = Checkpoint::new();
        ck.add_f32("a.weights", &[2, 3], vec![1.0, -2.0, 3.5, 0.0, 1e-20, 7.25]);
        ck.add_f64("norm.min", &[4], vec![0.1, 0.2, -0.3, 1e-15]);
        ck.set_meta("seed", 42u64);
        ck.set_meta("kind", "test");

        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ck.ssck");
        ck.save(&path).unwrap();
        let loaded = Checkpoint::load(&path).unwrap();
        assert_eq!(loaded, ck);
        assert_eq!(loaded.meta_parse::<u64>("seed").unwrap(), 42);
        let t = loaded.get_f32("a.weights").unwrap();
        assert_eq!(t.shape(), &[2, 3]);
    }

    #[test]
    fn missing_tensor_is_a_format_error() {
        let ck = Checkpoint::new();
        assert!(matches!(ck.get_f32("nope"), Err(Error::Format(_))));
    }

    #[test]
    fn truncated_file_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.ssck");
        std::fs::write(&path, b"SSCK1\x01\x00\x00\x00\x05").unwrap();
        assert!(Checkpoint::load(&path).is_err());
    }
}
