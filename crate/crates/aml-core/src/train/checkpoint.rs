//! Checkpoint files: every stored tensor (parameters and running buffers)
//! with shape headers, little-endian f64, bit-exact on round-trip.

use crate::error::{CoreError, Result};
use crate::nn::{DenseMatrix, ParamStore};
use std::fs;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

const MAGIC: &[u8; 8] = b"AMLCKPT1";

pub fn save_checkpoint(store: &ParamStore, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = fs::File::create(path).map_err(|e| CoreError::io(path.display().to_string(), e))?;
    let mut w = BufWriter::new(file);
    let mut write = |bytes: &[u8]| -> Result<()> {
        w.write_all(bytes)
            .map_err(|e| CoreError::io(path.display().to_string(), e))
    };
    write(MAGIC)?;
    write(&(store.len() as u32).to_le_bytes())?;
    for (id, tensor) in store.iter() {
        let name = store.name(id).as_bytes();
        write(&(name.len() as u32).to_le_bytes())?;
        write(name)?;
        write(&(tensor.value.rows() as u32).to_le_bytes())?;
        write(&(tensor.value.cols() as u32).to_le_bytes())?;
        write(&[u8::from(tensor.trainable)])?;
        for &v in tensor.value.data() {
            write(&v.to_le_bytes())?;
        }
    }
    Ok(())
}

/// Restores values into a store built from the same model configuration.
/// Names, shapes, and order must match exactly.
pub fn load_checkpoint(store: &mut ParamStore, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut bytes = Vec::new();
    fs::File::open(path)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .map_err(|e| CoreError::io(path.display().to_string(), e))?;
    let corrupt = |message: String| CoreError::CorruptFile {
        path: path.display().to_string(),
        message,
    };
    if bytes.len() < 12 || &bytes[0..8] != MAGIC {
        return Err(corrupt("bad magic".into()));
    }
    let count = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
    if count != store.len() {
        return Err(corrupt(format!(
            "checkpoint has {count} tensors, model expects {}",
            store.len()
        )));
    }
    let mut off = 12usize;
    let mut take = |n: usize| -> Result<&[u8]> {
        if off + n > bytes.len() {
            return Err(CoreError::CorruptFile {
                path: path.display().to_string(),
                message: "truncated".into(),
            });
        }
        let s = &bytes[off..off + n];
        off += n;
        Ok(s)
    };
    for id in store.ids().collect::<Vec<_>>() {
        let name_len = u32::from_le_bytes(take(4)?.try_into().unwrap()) as usize;
        let name = String::from_utf8(take(name_len)?.to_vec())
            .map_err(|_| corrupt("invalid tensor name".into()))?;
        if name != store.name(id) {
            return Err(corrupt(format!(
                "tensor name mismatch: file has '{name}', model expects '{}'",
                store.name(id)
            )));
        }
        let rows = u32::from_le_bytes(take(4)?.try_into().unwrap()) as usize;
        let cols = u32::from_le_bytes(take(4)?.try_into().unwrap()) as usize;
        let _trainable = take(1)?[0];
        let current = store.value(id);
        if rows != current.rows() || cols != current.cols() {
            return Err(corrupt(format!(
                "tensor '{name}' has shape {rows}x{cols}, model expects {}x{}",
                current.rows(),
                current.cols()
            )));
        }
        let mut data = Vec::with_capacity(rows * cols);
        for _ in 0..rows * cols {
            data.push(f64::from_le_bytes(take(8)?.try_into().unwrap()));
        }
        store.get_mut(id).value = DenseMatrix::from_vec(rows, cols, data);
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_bit_exact() {
        let mut store = ParamStore::new();
        store.add(
            "a.w",
            DenseMatrix::from_vec(2, 2, vec![0.1, -2.5e-17, f64::MIN_POSITIVE, 3.0]),
            true,
        );
        store.add("a.buf", DenseMatrix::from_vec(1, 3, vec![1.0, 2.0, -0.0]), false);

        let dir = std::env::temp_dir().join(format!("ckpt_test_{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("ckpt.bin");
        save_checkpoint(&store, &path).unwrap();

        let mut restored = ParamStore::new();
        restored.add("a.w", DenseMatrix::zeros(2, 2), true);
        restored.add("a.buf", DenseMatrix::zeros(1, 3), false);
        load_checkpoint(&mut restored, &path).unwrap();

        for (id, t) in store.iter() {
            let other = restored.find(store.name(id)).unwrap();
            let a: Vec<u64> = t.value.data().iter().map(|v| v.to_bits()).collect();
            let b: Vec<u64> = restored.value(other).data().iter().map(|v| v.to_bits()).collect();
            assert_eq!(a, b);
        }
        std::fs::remove_dir_all(&dir).ok();
    }

    #[test]
    fn mismatched_model_is_rejected() {
        let mut store = ParamStore::new();
        store.add("w", DenseMatrix::zeros(2, 2), true);
        let dir = std::env::temp_dir().join(format!("ckpt_test2_{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("ckpt.bin");
        save_checkpoint(&store, &path).unwrap();

        let mut other = ParamStore::new();
        other.add("different", DenseMatrix::zeros(2, 2), true);
        assert!(load_checkpoint(&mut other, &path).is_err());

        let mut wrong_shape = ParamStore::new();
        wrong_shape.add("w", DenseMatrix::zeros(3, 2), true);
        assert!(load_checkpoint(&mut wrong_shape, &path).is_err());
        std::fs::remove_dir_all(&dir).ok();
    }
}
