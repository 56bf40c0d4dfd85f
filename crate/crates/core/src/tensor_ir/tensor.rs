//! Dense row-major tensors and their file formats.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use rand::Rng;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

#[derive(Debug, Error)]
pub enum TensorIoError {
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error("bad header: {0}")]
    Header(String),
    #[error("expected {expected} values, found {found}")]
    Length { expected: usize, found: usize },
    #[error("bad value '{0}'")]
    Value(String),
}

impl Tensor {
    pub fn new(shape: Vec<usize>, data: Vec<f64>) -> Self {
        assert_eq!(shape.iter().product::<usize>(), data.len(), "data length vs shape");
        Tensor { shape, data }
    }

    pub fn zeros(shape: &[usize]) -> Self {
        Tensor { shape: shape.to_vec(), data: vec![0.0; shape.iter().product()] }
    }

    pub fn filled(shape: &[usize], v: f64) -> Self {
        Tensor { shape: shape.to_vec(), data: vec![v; shape.iter().product()] }
    }

    /// Square identity matrix.
    pub fn identity(n: usize) -> Self {
        let mut t = Tensor::zeros(&[n, n]);
        for i in 0..n {
            t.data[i * n + i] = 1.0;
        }
        t
    }

    pub fn random_uniform<R: Rng>(shape: &[usize], lo: f64, hi: f64, rng: &mut R) -> Self {
        let n = shape.iter().product();
        Tensor { shape: shape.to_vec(), data: (0..n).map(|_| rng.gen_range(lo..=hi)).collect() }
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn get(&self, index: &[usize]) -> f64 {
        self.data[offset(&self.shape, index)]
    }

    /// `max |a-b| / max(1, max |b|)`, a scale-aware relative error.
    pub fn max_rel_error(&self, reference: &Tensor) -> f64 {
        assert_eq!(self.shape, reference.shape);
        let scale = reference.data.iter().fold(1.0f64, |m, v| m.max(v.abs()));
        self.data.iter().zip(&reference.data).fold(0.0f64, |m, (a, b)| m.max((a - b).abs())) / scale
    }

    pub fn mse(&self, reference: &Tensor) -> f64 {
        assert_eq!(self.shape, reference.shape);
        let sum: f64 = self.data.iter().zip(&reference.data).map(|(a, b)| (a - b) * (a - b)).sum();
        sum / self.data.len().max(1) as f64
    }

    /// Write `<dir>/<name>.bin` (little-endian f64) and `<dir>/<name>.hdr`.
    pub fn write_binary(&self, dir: &Path, name: &str) -> Result<PathBuf, TensorIoError> {
        let bin = dir.join(format!("{name}.bin"));
        let bytes: Vec<u8> = self.data.iter().flat_map(|v| v.to_le_bytes()).collect();
        fs::write(&bin, bytes)?;
        let dims: Vec<String> = self.shape.iter().map(|d| d.to_string()).collect();
        fs::write(dir.join(format!("{name}.hdr")), format!("{name} {} {}\n", self.shape.len(), dims.join(" ")))?;
        Ok(bin)
    }

    pub fn read_binary(dir: &Path, name: &str) -> Result<Tensor, TensorIoError> {
        let header = fs::read_to_string(dir.join(format!("{name}.hdr")))?;
        let fields: Vec<&str> = header.split_whitespace().collect();
        let bad = || TensorIoError::Header(header.trim().to_string());
        if fields.len() < 2 || fields[0] != name {
            return Err(bad());
        }
        let rank: usize = fields[1].parse().map_err(|_| bad())?;
        let shape: Vec<usize> = fields[2..].iter().map(|f| f.parse().map_err(|_| bad())).collect::<Result<_, _>>()?;
        if shape.len() != rank {
            return Err(bad());
        }
        let bytes = fs::read(dir.join(format!("{name}.bin")))?;
        let expected: usize = shape.iter().product();
        if bytes.len() != expected * 8 {
            return Err(TensorIoError::Length { expected, found: bytes.len() / 8 });
        }
        let data = bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
        Ok(Tensor { shape, data })
    }

    /// Whitespace-separated values in row-major order.
    pub fn parse_text(text: &str, shape: &[usize]) -> Result<Tensor, TensorIoError> {
        let data: Vec<f64> =
            text.split_whitespace().map(|t| t.parse().map_err(|_| TensorIoError::Value(t.to_string()))).collect::<Result<_, _>>()?;
        let expected: usize = shape.iter().product();
        if data.len() != expected {
            return Err(TensorIoError::Length { expected, found: data.len() });
        }
        Ok(Tensor { shape: shape.to_vec(), data })
    }

    pub fn to_text(&self) -> String {
        let last = self.shape.last().copied().unwrap_or(1).max(1);
        let mut out = String::new();
        for row in self.data.chunks(last) {
            let r: Vec<String> = row.iter().map(|v| format!("{v:e}")).collect();
            out.push_str(&r.join(" "));
            out.push('\n');
        }
        out
    }
}

/// Row-major offset of `index` in `shape`.
pub fn offset(shape: &[usize], index: &[usize]) -> usize {
    debug_assert_eq!(shape.len(), index.len());
    index.iter().zip(shape).fold(0, |acc, (&i, &d)| acc * d + i)
}

/// Row-major strides.
pub fn strides(shape: &[usize]) -> Vec<usize> {
    let mut s = vec![1; shape.len()];
    for i in (0..shape.len().saturating_sub(1)).rev() {
        s[i] = s[i + 1] * shape[i + 1];
    }
    s
}

/// Iterator over all multi-indices of `shape` in lexicographic order.
pub struct IndexIter {
    shape: Vec<usize>,
    next: Option<Vec<usize>>,
}

impl IndexIter {
    pub fn new(shape: &[usize]) -> Self {
        let next = if shape.contains(&0) { None } else { Some(vec![0; shape.len()]) };
        IndexIter { shape: shape.to_vec(), next }
    }
}

impl Iterator for IndexIter {
    type Item = Vec<usize>;

    fn next(&mut self) -> Option<Vec<usize>> {
        let cur = self.next.take()?;
        let mut n = cur.clone();
        let mut k = n.len();
        loop {
            if k == 0 {
                break;
            }
            k -= 1;
            n[k] += 1;
            if n[k] < self.shape[k] {
                self.next = Some(n);
                break;
            }
            n[k] = 0;
        }
        Some(cur)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn index_iteration_is_lexicographic() {
        let all: Vec<Vec<usize>> = IndexIter::new(&[2, 3]).collect();
        assert_eq!(all.len(), 6);
        assert_eq!(all[1], vec![0, 1]);
        assert_eq!(all[3], vec![1, 0]);
        assert_eq!(IndexIter::new(&[]).count(), 1);
        for (k, idx) in IndexIter::new(&[3, 2, 4]).enumerate() {
            assert_eq!(offset(&[3, 2, 4], &idx), k);
        }
        assert_eq!(strides(&[3, 2, 4]), vec![8, 4, 1]);
    }

    #[test]
    fn binary_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let t = Tensor::new(vec![2, 3], vec![1.0, -2.5, 3.25, 0.0, 1e-300, -7.0]);
        t.write_binary(dir.path(), "u").unwrap();
        let hdr = fs::read_to_string(dir.path().join("u.hdr")).unwrap();
        assert_eq!(hdr, "u 2 2 3\n");
        assert_eq!(Tensor::read_binary(dir.path(), "u").unwrap(), t);
    }

    #[test]
    fn text_round_trip() {
        let t = Tensor::new(vec![2, 2], vec![0.1, -0.2, 3.0, 4.5]);
        assert_eq!(Tensor::parse_text(&t.to_text(), &[2, 2]).unwrap(), t);
        assert!(Tensor::parse_text("1 2 3", &[2, 2]).is_err());
    }
}
