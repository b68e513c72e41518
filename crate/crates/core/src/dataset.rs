//! On-disk dataset container shared by the RF, quantum, and EEG generators.
//!
//! Layout: magic `CXDS`, a little-endian u32 JSON header length, the header,
//! then `f32` little-endian interleaved `(re, im)` sample data for the train,
//! val, and test splits in order, then one class-id byte per sample. Sample
//! values are quantized to `f32` at generation time so in-memory pipelines and
//! file round-trips see bit-identical data.

use crate::cnum::Cplx;
use crate::{Error, Result};
use std::io::{Read, Write};
use std::path::Path;

pub const MAGIC: &[u8; 4] = b"CXDS";
pub const FORMAT_VERSION: u32 = 1;

/// One labeled complex-valued sample: `[ch][t]` channel-major.
#[derive(Debug, Clone)]
pub struct ComplexSeq {
    pub samples: Vec<Cplx>,
    pub label: u8,
}

impl ComplexSeq {
    /// Quantize through `f32` so generated data matches the file format
    /// exactly.
    pub fn quantized(samples: Vec<Cplx>, label: u8) -> Self {
        let samples = samples
            .into_iter()
            .map(|z| Cplx::new(z.re as f32 as f64, z.im as f32 as f64))
            .collect();
        ComplexSeq { samples, label }
    }
}

#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct DatasetHeader {
    pub format_version: u32,
    pub domain: String,
    pub condition: String,
    pub class_names: Vec<String>,
    pub ch: usize,
    pub t: usize,
    pub n_train: usize,
    pub n_val: usize,
    pub n_test: usize,
    pub seed: u64,
    /// Generator-specific condition echo (SNR set, potentials, noise levels).
    pub meta: serde_json::Value,
}

/// A generated dataset with train/val/test splits.
#[derive(Debug, Clone)]
pub struct LabeledDataset {
    pub header: DatasetHeader,
    pub train: Vec<ComplexSeq>,
    pub val: Vec<ComplexSeq>,
    pub test: Vec<ComplexSeq>,
}

impl LabeledDataset {
    pub fn classes(&self) -> usize {
        self.header.class_names.len()
    }

    pub fn split(&self, which: Split) -> &[ComplexSeq] {
        match which {
            Split::Train => &self.train,
            Split::Val => &self.val,
            Split::Test => &self.test,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Split {
    Train,
    Val,
    Test,
}

pub fn write_dataset(path: &Path, ds: &LabeledDataset) -> Result<()> {
    let mut header = ds.header.clone();
    header.n_train = ds.train.len();
    header.n_val = ds.val.len();
    header.n_test = ds.test.len();
    let header_bytes = serde_json::to_vec(&header).map_err(|e| Error::Format(e.to_string()))?;
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)?;
    }
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    f.write_all(MAGIC)?;
    f.write_all(&(header_bytes.len() as u32).to_le_bytes())?;
    f.write_all(&header_bytes)?;
    let expect = header.ch * header.t;
    for seq in ds.train.iter().chain(&ds.val).chain(&ds.test) {
        debug_assert_eq!(seq.samples.len(), expect);
        for z in &seq.samples {
            f.write_all(&(z.re as f32).to_le_bytes())?;
            f.write_all(&(z.im as f32).to_le_bytes())?;
        }
    }
    for seq in ds.train.iter().chain(&ds.val).chain(&ds.test) {
        f.write_all(&[seq.label])?;
    }
    f.flush()?;
    Ok(())
}

pub fn read_dataset(path: &Path) -> Result<LabeledDataset> {
    let mut f = std::io::BufReader::new(std::fs::File::open(path)?);
    let mut magic = [0u8; 4];
    f.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::Format(format!("{}: not a dataset file", path.display())));
    }
    let mut len4 = [0u8; 4];
    f.read_exact(&mut len4)?;
    let hlen = u32::from_le_bytes(len4) as usize;
    let mut hbytes = vec![0u8; hlen];
    f.read_exact(&mut hbytes)?;
    let header: DatasetHeader =
        serde_json::from_slice(&hbytes).map_err(|e| Error::Format(e.to_string()))?;
    if header.format_version != FORMAT_VERSION {
        return Err(Error::Format(format!(
            "unsupported dataset format version {}",
            header.format_version
        )));
    }
    let n_total = header.n_train + header.n_val + header.n_test;
    let per = header.ch * header.t;
    let mut raw = vec![0u8; n_total * per * 8];
    f.read_exact(&mut raw)?;
    let mut labels = vec![0u8; n_total];
    f.read_exact(&mut labels)?;

    let mut all = Vec::with_capacity(n_total);
    for (i, &label) in labels.iter().enumerate() {
        let mut samples = Vec::with_capacity(per);
        let base = i * per * 8;
        for s in 0..per {
            let off = base + s * 8;
            let re = f32::from_le_bytes(raw[off..off + 4].try_into().unwrap());
            let im = f32::from_le_bytes(raw[off + 4..off + 8].try_into().unwrap());
            samples.push(Cplx::new(re as f64, im as f64));
        }
        all.push(ComplexSeq { samples, label });
    }
    let test = all.split_off(header.n_train + header.n_val);
    let val = all.split_off(header.n_train);
    Ok(LabeledDataset { header, train: all, val, test })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_dataset() -> LabeledDataset {
        let mk = |label: u8, base: f64| {
            ComplexSeq::quantized(
                (0..6).map(|i| Cplx::new(base + i as f64 * 0.25, -base * 0.5)).collect(),
                label,
            )
        };
        LabeledDataset {
            header: DatasetHeader {
                format_version: FORMAT_VERSION,
                domain: "rf".into(),
                condition: "psk_only".into(),
                class_names: vec!["a".into(), "b".into()],
                ch: 2,
                t: 3,
                n_train: 2,
                n_val: 1,
                n_test: 1,
                seed: 7,
                meta: serde_json::json!({"snr_db": [10.0]}),
            },
            train: vec![mk(0, 0.1), mk(1, 0.7)],
            val: vec![mk(0, -0.3)],
            test: vec![mk(1, 1.3)],
        }
    }

    #[test]
    fn round_trips_bit_exactly() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("tiny.cxds");
        let ds = tiny_dataset();
        write_dataset(&path, &ds).unwrap();
        let back = read_dataset(&path).unwrap();
        assert_eq!(back.header.class_names, ds.header.class_names);
        assert_eq!(back.train.len(), 2);
        assert_eq!(back.val.len(), 1);
        assert_eq!(back.test.len(), 1);
        for (a, b) in ds.train.iter().zip(&back.train) {
            assert_eq!(a.label, b.label);
            for (x, y) in a.samples.iter().zip(&b.samples) {
                assert_eq!(x.re.to_bits(), y.re.to_bits());
                assert_eq!(x.im.to_bits(), y.im.to_bits());
            }
        }
        // Writing twice produces identical bytes.
        let path2 = dir.path().join("tiny2.cxds");
        write_dataset(&path2, &ds).unwrap();
        assert_eq!(std::fs::read(&path).unwrap(), std::fs::read(&path2).unwrap());
    }

    #[test]
    fn rejects_garbage() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.cxds");
        std::fs::write(&path, b"not a dataset at all").unwrap();
        assert!(matches!(read_dataset(&path), Err(Error::Format(_))));
    }
}
