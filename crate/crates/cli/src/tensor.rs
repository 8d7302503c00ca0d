//! Raw little-endian tensor files: the magic `PROSEP01`, a `u32` rank, one
//! `u64` per dimension, then row-major `f64` payload.

use std::io::{Read, Write};
use std::path::Path;

use anyhow::{bail, ensure, Context, Result};
use nalgebra::DMatrix;
use prosep::phantom::{sample_times, Movie};
use prosep::radon::Frame;

use crate::output::write_atomic;

pub const MAGIC: &[u8; 8] = b"PROSEP01";

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    pub dims: Vec<usize>,
    pub data: Vec<f64>,
}

impl Tensor {
    pub fn new(dims: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        let expected = dims.iter().try_fold(1usize, |acc, &d| acc.checked_mul(d));
        ensure!(
            expected == Some(data.len()),
            "tensor dims {dims:?} do not match {} values",
            data.len()
        );
        Ok(Tensor { dims, data })
    }

    pub fn vector(values: &[f64]) -> Self {
        Tensor {
            dims: vec![values.len()],
            data: values.to_vec(),
        }
    }

    /// Dims `[rows, cols]`.
    pub fn from_matrix(m: &DMatrix<f64>) -> Self {
        let data = (0..m.nrows())
            .flat_map(|r| m.row(r).iter().copied().collect::<Vec<_>>())
            .collect();
        Tensor {
            dims: vec![m.nrows(), m.ncols()],
            data,
        }
    }

    pub fn to_matrix(&self) -> Result<DMatrix<f64>> {
        ensure!(
            self.dims.len() == 2,
            "expected a rank-2 tensor, got dims {:?}",
            self.dims
        );
        Ok(DMatrix::from_row_slice(
            self.dims[0],
            self.dims[1],
            &self.data,
        ))
    }

    /// Dims `[P, W, W]`, frames in time order.
    pub fn from_movie(movie: &Movie) -> Self {
        let width = movie.width();
        let data = movie
            .frames
            .iter()
            .flat_map(|f| f.values().iter().copied())
            .collect();
        Tensor {
            dims: vec![movie.len(), width, width],
            data,
        }
    }

    /// Frames sampled at `t_p = p/P`.
    pub fn to_movie(&self, pixel_size: f64) -> Result<Movie> {
        ensure!(
            self.dims.len() == 3 && self.dims[1] == self.dims[2],
            "expected a movie tensor [P, W, W], got dims {:?}",
            self.dims
        );
        let (views, width) = (self.dims[0], self.dims[1]);
        let frames = self
            .data
            .chunks(width * width)
            .map(|chunk| Frame::new(width, pixel_size, chunk.to_vec()))
            .collect::<prosep::Result<Vec<_>>>()?;
        Ok(Movie::new(frames, sample_times(views))?)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(12 + 8 * (self.dims.len() + self.data.len()));
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&(self.dims.len() as u32).to_le_bytes());
        for &d in &self.dims {
            out.extend_from_slice(&(d as u64).to_le_bytes());
        }
        for v in &self.data {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    pub fn read_from(mut reader: impl Read) -> Result<Self> {
        let mut magic = [0u8; 8];
        reader
            .read_exact(&mut magic)
            .context("reading tensor header")?;
        if &magic != MAGIC {
            bail!("not a tensor file (bad magic)");
        }
        let mut word = [0u8; 4];
        reader.read_exact(&mut word)?;
        let rank = u32::from_le_bytes(word) as usize;
        let mut dims = Vec::with_capacity(rank);
        let mut long = [0u8; 8];
        for _ in 0..rank {
            reader.read_exact(&mut long)?;
            dims.push(usize::try_from(u64::from_le_bytes(long))?);
        }
        let mut payload = Vec::new();
        reader.read_to_end(&mut payload)?;
        ensure!(
            payload.len() % 8 == 0,
            "payload is not a whole number of f64 values"
        );
        let data = payload
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
            .collect();
        Tensor::new(dims, data)
    }

    pub fn write_to(&self, mut writer: impl Write) -> Result<()> {
        writer.write_all(&self.to_bytes())?;
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_atomic(path, &self.to_bytes())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file =
            std::fs::File::open(path).with_context(|| format!("opening {}", path.display()))?;
        Tensor::read_from(std::io::BufReader::new(file))
            .with_context(|| format!("reading {}", path.display()))
    }
}
