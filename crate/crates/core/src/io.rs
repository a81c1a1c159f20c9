//! A small binary container of named dense matrices.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! magic    8 bytes  "DCSCAMAT"
//! version  u32      1
//! count    u32      number of entries
//! entry*   name_len u32, name (UTF-8), rows u64, cols u64,
//!          rows*cols f64 values in row-major order
//! ```
//!
//! Scalars are stored as 1×1 matrices and vectors as single-column matrices.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::anomaly::{AnomalyProblem, AnomalyState};
use crate::capped_l1::CappedL1Problem;
use crate::error::{Error, Result};
use crate::numerics::{DenseMatrix, DenseVector};

const MAGIC: &[u8; 8] = b"DCSCAMAT";
const VERSION: u32 = 1;
/// Refuse absurd headers before allocating.
const MAX_ENTRIES: u32 = 1 << 16;
const MAX_NAME_LEN: u32 = 1 << 12;

/// Ordered collection of named matrices.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct MatrixArchive {
    entries: Vec<(String, DenseMatrix)>,
}

impl MatrixArchive {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds or replaces an entry; insertion order is kept.
    pub fn insert(&mut self, name: &str, m: DenseMatrix) {
        match self.entries.iter_mut().find(|(n, _)| n == name) {
            Some(slot) => slot.1 = m,
            None => self.entries.push((name.to_owned(), m)),
        }
    }

    pub fn insert_scalar(&mut self, name: &str, v: f64) {
        self.insert(name, DenseMatrix::from_rows(&[&[v]]));
    }

    pub fn insert_vector(&mut self, name: &str, v: &[f64]) {
        self.insert(name, DenseMatrix::from_fn(v.len(), 1, |i, _| v[i]));
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|(n, _)| n.as_str())
    }

    pub fn get(&self, name: &str) -> Result<&DenseMatrix> {
        self.entries
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, m)| m)
            .ok_or_else(|| Error::Format(format!("missing entry `{name}`")))
    }

    pub fn scalar(&self, name: &str) -> Result<f64> {
        let m = self.get(name)?;
        if m.shape() != (1, 1) {
            return Err(Error::Format(format!("entry `{name}` is {:?}, expected a scalar", m.shape())));
        }
        Ok(m.get(0, 0))
    }

    pub fn vector(&self, name: &str) -> Result<DenseVector> {
        let m = self.get(name)?;
        if m.cols() != 1 {
            return Err(Error::Format(format!("entry `{name}` is {:?}, expected a column", m.shape())));
        }
        Ok(DenseVector::from(m.as_slice().to_vec()))
    }

    pub fn write_to(&self, mut w: impl Write) -> Result<()> {
        w.write_all(MAGIC)?;
        w.write_all(&VERSION.to_le_bytes())?;
        w.write_all(&(self.entries.len() as u32).to_le_bytes())?;
        for (name, m) in &self.entries {
            w.write_all(&(name.len() as u32).to_le_bytes())?;
            w.write_all(name.as_bytes())?;
            w.write_all(&(m.rows() as u64).to_le_bytes())?;
            w.write_all(&(m.cols() as u64).to_le_bytes())?;
            for v in m.as_slice() {
                w.write_all(&v.to_le_bytes())?;
            }
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_from(mut r: impl Read) -> Result<Self> {
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(Error::Format("not a matrix archive (bad magic)".into()));
        }
        let version = read_u32(&mut r)?;
        if version != VERSION {
            return Err(Error::Format(format!("unsupported archive version {version}")));
        }
        let count = read_u32(&mut r)?;
        if count > MAX_ENTRIES {
            return Err(Error::Format(format!("implausible entry count {count}")));
        }
        let mut out = Self::new();
        for _ in 0..count {
            let len = read_u32(&mut r)?;
            if len > MAX_NAME_LEN {
                return Err(Error::Format(format!("implausible name length {len}")));
            }
            let mut name = vec![0u8; len as usize];
            r.read_exact(&mut name)?;
            let name = String::from_utf8(name).map_err(|_| Error::Format("entry name is not UTF-8".into()))?;
            let rows = read_u64(&mut r)? as usize;
            let cols = read_u64(&mut r)? as usize;
            let n = rows.checked_mul(cols).ok_or_else(|| Error::Format(format!("entry `{name}` too large")))?;
            let mut data = Vec::new();
            let mut buf = [0u8; 8];
            for _ in 0..n {
                r.read_exact(&mut buf)?;
                data.push(f64::from_le_bytes(buf));
            }
            out.insert(&name, DenseMatrix::new(rows, cols, data)?);
        }
        Ok(out)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let f = File::create(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        self.write_to(BufWriter::new(f))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let f = File::open(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        Self::read_from(BufReader::new(f))
    }
}

fn read_u32(r: &mut impl Read) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_u64(r: &mut impl Read) -> Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

/// Entry `kind` tells the two problem families apart.
const KIND_ANOMALY: f64 = 1.0;
const KIND_CAPPED: f64 = 2.0;

/// Instance file contents.
#[derive(Clone, Debug)]
pub enum Instance {
    Anomaly(AnomalyProblem),
    CappedL1(CappedL1Problem),
}

impl Instance {
    pub fn to_archive(&self) -> MatrixArchive {
        let mut a = MatrixArchive::new();
        match self {
            Instance::Anomaly(p) => {
                a.insert_scalar("kind", KIND_ANOMALY);
                a.insert("Y", p.y().clone());
                a.insert("D", p.d().clone());
                a.insert_scalar("lambda", p.lambda());
                a.insert_scalar("mu", p.mu());
                a.insert_scalar("rho", p.rho() as f64);
            }
            Instance::CappedL1(p) => {
                a.insert_scalar("kind", KIND_CAPPED);
                a.insert("A", p.a().clone());
                a.insert_vector("b", p.b());
                a.insert_scalar("mu", p.mu());
                a.insert_scalar("theta", p.theta());
            }
        }
        a
    }

    pub fn from_archive(a: &MatrixArchive) -> Result<Self> {
        let kind = a.scalar("kind")?;
        if kind == KIND_ANOMALY {
            let rho = a.scalar("rho")?;
            if !(rho >= 1.0) || rho.fract() != 0.0 {
                return Err(Error::Format(format!("rank entry {rho} is not a positive integer")));
            }
            let p = AnomalyProblem::new(a.get("Y")?.clone(), a.get("D")?.clone(), a.scalar("lambda")?, a.scalar("mu")?, rho as usize)?;
            Ok(Instance::Anomaly(p))
        } else if kind == KIND_CAPPED {
            let p = CappedL1Problem::new(a.get("A")?.clone(), a.vector("b")?, a.scalar("mu")?, a.scalar("theta")?)?;
            Ok(Instance::CappedL1(p))
        } else {
            Err(Error::Format(format!("unknown instance kind {kind}")))
        }
    }
}

/// Anomaly ground truth or iterate as entries `P`, `Q`, `S`.
pub fn anomaly_state_archive(z: &AnomalyState) -> MatrixArchive {
    let mut a = MatrixArchive::new();
    a.insert("P", z.p.clone());
    a.insert("Q", z.q.clone());
    a.insert("S", z.s.clone());
    a
}

pub fn anomaly_state_from_archive(a: &MatrixArchive) -> Result<AnomalyState> {
    Ok(AnomalyState { p: a.get("P")?.clone(), q: a.get("Q")?.clone(), s: a.get("S")?.clone() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::anomaly;
    use crate::capped_l1;

    #[test]
    fn round_trips_bitwise() {
        let mut a = MatrixArchive::new();
        a.insert("M", DenseMatrix::from_rows(&[&[1.0, -0.0, f64::MIN_POSITIVE], &[1e300, 2.5, -7.0]]));
        a.insert_scalar("x", 0.1);
        a.insert("E", DenseMatrix::zeros(0, 3));
        let mut buf = Vec::new();
        a.write_to(&mut buf).unwrap();
        assert_eq!(&buf[..8], b"DCSCAMAT");
        let b = MatrixArchive::read_from(buf.as_slice()).unwrap();
        assert_eq!(b.names().collect::<Vec<_>>(), vec!["M", "x", "E"]);
        let bits = |m: &DenseMatrix| m.as_slice().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(b.get("M").unwrap()), bits(a.get("M").unwrap()));
        assert_eq!(b.scalar("x").unwrap(), 0.1);
        assert_eq!(b.get("E").unwrap().shape(), (0, 3));
    }

    #[test]
    fn rejects_garbage() {
        assert!(MatrixArchive::read_from(&b"NOTMAGIC\x01\0\0\0\0\0\0\0"[..]).is_err());
        let mut buf = Vec::new();
        let mut a = MatrixArchive::new();
        a.insert_scalar("x", 1.0);
        a.write_to(&mut buf).unwrap();
        buf.truncate(buf.len() - 3);
        assert!(MatrixArchive::read_from(buf.as_slice()).is_err());
        assert!(a.get("missing").is_err());
    }

    #[test]
    fn instances_round_trip() {
        let (p, truth) = anomaly::generate_data(6, 7, 5, 2, 3).unwrap();
        let mut buf = Vec::new();
        Instance::Anomaly(p.clone()).to_archive().write_to(&mut buf).unwrap();
        let back = Instance::from_archive(&MatrixArchive::read_from(buf.as_slice()).unwrap()).unwrap();
        match back {
            Instance::Anomaly(q) => {
                assert_eq!((q.y(), q.d(), q.lambda(), q.mu(), q.rho()), (p.y(), p.d(), p.lambda(), p.mu(), p.rho()))
            }
            _ => panic!("wrong kind"),
        }
        assert_eq!(anomaly_state_from_archive(&anomaly_state_archive(&truth)).unwrap(), truth);

        let (c, _) = capped_l1::generate_data(10, 20, 0.2, 1e-4, 1).unwrap();
        let back = Instance::from_archive(&Instance::CappedL1(c.clone()).to_archive()).unwrap();
        match back {
            Instance::CappedL1(d) => assert_eq!((d.a(), d.b(), d.mu(), d.theta()), (c.a(), c.b(), c.mu(), c.theta())),
            _ => panic!("wrong kind"),
        }
    }
}
