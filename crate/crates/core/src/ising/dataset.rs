//! Spin datasets and their on-disk formats.
//!
//! Binary layout: the 5 magic bytes `ISNG1`, little-endian u64 N, u64 M,
//! then M·N bytes in row-major order with 0 for −1 and 1 for +1. A JSON
//! sidecar with the same stem holds the provenance.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MAGIC: &[u8; 5] = b"ISNG1";

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Provenance {
    pub sampler: String,
    pub seed: Option<u64>,
    pub burn_in: usize,
    pub thin: usize,
    #[serde(default)]
    pub description: String,
}

/// M×N matrix of ±1 spins, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct SpinDataset {
    n: usize,
    m: usize,
    spins: Vec<i8>,
    pub provenance: Provenance,
}

impl SpinDataset {
    pub fn new(n: usize, m: usize, spins: Vec<i8>, provenance: Provenance) -> Result<Self> {
        if m == 0 {
            return Err(Error::Dataset("a dataset needs M >= 1".into()));
        }
        if spins.len() != n * m {
            return Err(Error::Dataset(format!(
                "expected {} entries for M = {m}, N = {n}, found {}",
                n * m,
                spins.len()
            )));
        }
        if let Some(bad) = spins.iter().find(|&&s| s != 1 && s != -1) {
            return Err(Error::Dataset(format!("entry {bad} is not a spin value")));
        }
        Ok(Self { n, m, spins, provenance })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn spins(&self) -> &[i8] {
        &self.spins
    }

    #[inline]
    pub fn row(&self, mu: usize) -> &[i8] {
        &self.spins[mu * self.n..(mu + 1) * self.n]
    }

    #[inline]
    pub fn get(&self, mu: usize, i: usize) -> i8 {
        self.spins[mu * self.n + i]
    }

    pub fn column(&self, i: usize) -> Vec<f64> {
        (0..self.m).map(|mu| self.get(mu, i) as f64).collect()
    }

    pub fn column_mean(&self, i: usize) -> f64 {
        (0..self.m).map(|mu| self.get(mu, i) as f64).sum::<f64>() / self.m as f64
    }

    /// The first `m` samples.
    pub fn prefix(&self, m: usize) -> Result<Self> {
        if m == 0 || m > self.m {
            return Err(Error::Dataset(format!("prefix length {m} outside 1..={}", self.m)));
        }
        Ok(Self {
            n: self.n,
            m,
            spins: self.spins[..m * self.n].to_vec(),
            provenance: self.provenance.clone(),
        })
    }

    /// Negate every sample of spin i.
    pub fn flip_column(&mut self, i: usize) {
        for mu in 0..self.m {
            self.spins[mu * self.n + i] *= -1;
        }
    }

    /// Reorder variables: new column k is old column perm[k].
    pub fn permute_columns(&self, perm: &[usize]) -> Result<Self> {
        if perm.len() != self.n {
            return Err(Error::Dataset("permutation length differs from N".into()));
        }
        let mut spins = Vec::with_capacity(self.spins.len());
        for mu in 0..self.m {
            let row = self.row(mu);
            spins.extend(perm.iter().map(|&p| row[p]));
        }
        Self::new(self.n, self.m, spins, self.provenance.clone())
    }

    pub fn write_binary<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(MAGIC)?;
        w.write_all(&(self.n as u64).to_le_bytes())?;
        w.write_all(&(self.m as u64).to_le_bytes())?;
        let bytes: Vec<u8> = self.spins.iter().map(|&s| u8::from(s > 0)).collect();
        w.write_all(&bytes)?;
        Ok(())
    }

    pub fn read_binary<R: Read>(mut r: R) -> Result<Self> {
        let mut magic = [0u8; 5];
        r.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(Error::Dataset("bad magic bytes".into()));
        }
        let mut word = [0u8; 8];
        r.read_exact(&mut word)?;
        let n = u64::from_le_bytes(word) as usize;
        r.read_exact(&mut word)?;
        let m = u64::from_le_bytes(word) as usize;
        let len = n
            .checked_mul(m)
            .ok_or_else(|| Error::Dataset("header size overflows".into()))?;
        let mut bytes = vec![0u8; len];
        r.read_exact(&mut bytes).map_err(|e| Error::Dataset(format!("truncated payload: {e}")))?;
        let mut rest = [0u8; 1];
        if r.read(&mut rest)? != 0 {
            return Err(Error::Dataset("trailing bytes after payload".into()));
        }
        let spins = bytes
            .into_iter()
            .map(|b| match b {
                0 => Ok(-1),
                1 => Ok(1),
                other => Err(Error::Dataset(format!("byte {other} is not 0 or 1"))),
            })
            .collect::<Result<Vec<i8>>>()?;
        Self::new(n, m, spins, Provenance::default())
    }

    pub fn sidecar_path(path: &Path) -> PathBuf {
        path.with_extension("json")
    }

    /// Binary file plus JSON sidecar.
    pub fn save(&self, path: &Path) -> Result<()> {
        self.write_binary(BufWriter::new(File::create(path)?))?;
        let sidecar = File::create(Self::sidecar_path(path))?;
        serde_json::to_writer_pretty(sidecar, &self.provenance)?;
        Ok(())
    }

    /// Reads the binary file, and the sidecar when present.
    pub fn load(path: &Path) -> Result<Self> {
        let mut data = Self::read_binary(BufReader::new(File::open(path)?))?;
        let sidecar = Self::sidecar_path(path);
        if sidecar.exists() {
            data.provenance = serde_json::from_reader(BufReader::new(File::open(sidecar)?))?;
        }
        Ok(data)
    }

    /// CSV with header s0,…,s{N−1} and one row per sample.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut w = BufWriter::new(w);
        let header: Vec<String> = (0..self.n).map(|i| format!("s{i}")).collect();
        writeln!(w, "{}", header.join(","))?;
        for mu in 0..self.m {
            let row: Vec<String> = self.row(mu).iter().map(|s| s.to_string()).collect();
            writeln!(w, "{}", row.join(","))?;
        }
        w.flush()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> SpinDataset {
        SpinDataset::new(3, 2, vec![1, -1, 1, -1, -1, 1], Provenance::default()).unwrap()
    }

    #[test]
    fn binary_round_trip() {
        let d = sample();
        let mut buf = Vec::new();
        d.write_binary(&mut buf).unwrap();
        assert_eq!(&buf[..5], b"ISNG1");
        assert_eq!(buf.len(), 5 + 16 + 6);
        assert_eq!(&buf[21..], &[1, 0, 1, 0, 0, 1]);
        assert_eq!(SpinDataset::read_binary(&buf[..]).unwrap(), d);
    }

    #[test]
    fn rejects_corruption() {
        let d = sample();
        let mut buf = Vec::new();
        d.write_binary(&mut buf).unwrap();
        let mut bad = buf.clone();
        bad[0] = b'X';
        assert!(SpinDataset::read_binary(&bad[..]).is_err());
        assert!(SpinDataset::read_binary(&buf[..buf.len() - 1]).is_err());
        let mut bad = buf.clone();
        bad[22] = 7;
        assert!(SpinDataset::read_binary(&bad[..]).is_err());
        assert!(SpinDataset::new(2, 1, vec![1, 0], Provenance::default()).is_err());
        assert!(SpinDataset::new(2, 0, vec![], Provenance::default()).is_err());
    }

    #[test]
    fn file_round_trip_with_sidecar() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.isng");
        let mut d = sample();
        d.provenance = Provenance {
            sampler: "metropolis".into(),
            seed: Some(9),
            burn_in: 10,
            thin: 2,
            description: "test".into(),
        };
        d.save(&path).unwrap();
        assert_eq!(SpinDataset::load(&path).unwrap(), d);
        let mut csv = Vec::new();
        d.write_csv(&mut csv).unwrap();
        assert_eq!(String::from_utf8(csv).unwrap(), "s0,s1,s2\n1,-1,1\n-1,-1,1\n");
    }
}
