//! Binary model checkpoints.
//!
//! Layout: 8-byte magic `ECNNCK01`, one kind byte, the three dimensions
//! `n, m, p` as little-endian u32, then every parameter tensor as
//! little-endian f64 in row-major order. Tensor order matches each model's
//! parameter list; nothing else is stored, so equal parameters always
//! produce byte-identical files.

use std::path::Path;

use crate::baselines::{LstmParams, RnnParams};
use crate::ecnn::EcnnParams;
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::model::ModelKind;

pub const MAGIC: [u8; 8] = *b"ECNNCK01";

#[derive(Clone, Debug, PartialEq)]
pub enum ModelCheckpoint {
    Ecnn(EcnnParams<f64>),
    Rnn(RnnParams<f64>),
    Lstm(LstmParams<f64>),
}

impl ModelCheckpoint {
    pub fn kind(&self) -> ModelKind {
        match self {
            ModelCheckpoint::Ecnn(_) => ModelKind::Ecnn,
            ModelCheckpoint::Rnn(_) => ModelKind::Rnn,
            ModelCheckpoint::Lstm(_) => ModelKind::Lstm,
        }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let (n, m, p) = match self {
            ModelCheckpoint::Ecnn(e) => (e.state_dim(), e.input_dim(), e.output_dim()),
            ModelCheckpoint::Rnn(r) => (r.state_dim(), r.input_dim(), r.output_dim()),
            ModelCheckpoint::Lstm(l) => (l.state_dim(), l.input_dim(), l.output_dim()),
        };
        let mut out = Vec::new();
        out.extend_from_slice(&MAGIC);
        out.push(self.kind().tag());
        for dim in [n, m, p] {
            out.extend_from_slice(&(dim as u32).to_le_bytes());
        }
        let tensors: Vec<&Matrix<f64>> = match self {
            ModelCheckpoint::Ecnn(e) => vec![&e.a, &e.b, &e.c, &e.d],
            ModelCheckpoint::Rnn(r) => vec![&r.a, &r.b, &r.c],
            ModelCheckpoint::Lstm(l) => vec![
                &l.w_i, &l.w_f, &l.w_o, &l.w_g, &l.b_i, &l.b_f, &l.b_o, &l.b_g, &l.c_out,
            ],
        };
        for t in tensors {
            for &v in t.as_slice() {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut cur = Cursor { data: bytes, pos: 0 };
        if cur.take(8)? != MAGIC {
            return Err(Error::Data("not a checkpoint: bad magic".into()));
        }
        let kind = ModelKind::from_tag(cur.u8()?)?;
        let n = cur.u32()? as usize;
        let m = cur.u32()? as usize;
        let p = cur.u32()? as usize;
        if n == 0 || m == 0 || p == 0 {
            return Err(Error::Data(format!("checkpoint has zero dimension n={n} m={m} p={p}")));
        }
        let checkpoint = match kind {
            ModelKind::Ecnn => ModelCheckpoint::Ecnn(EcnnParams::new(
                cur.matrix(n, n)?,
                cur.matrix(n, m)?,
                cur.matrix(p, n)?,
                cur.matrix(n, p)?,
            )?),
            ModelKind::Rnn => ModelCheckpoint::Rnn(RnnParams::new(
                cur.matrix(n, n)?,
                cur.matrix(n, m)?,
                cur.matrix(p, n)?,
            )?),
            ModelKind::Lstm => {
                let params = LstmParams {
                    w_i: cur.matrix(n, n + m)?,
                    w_f: cur.matrix(n, n + m)?,
                    w_o: cur.matrix(n, n + m)?,
                    w_g: cur.matrix(n, n + m)?,
                    b_i: cur.matrix(n, 1)?,
                    b_f: cur.matrix(n, 1)?,
                    b_o: cur.matrix(n, 1)?,
                    b_g: cur.matrix(n, 1)?,
                    c_out: cur.matrix(p, n)?,
                };
                params.validate()?;
                ModelCheckpoint::Lstm(params)
            }
        };
        if cur.pos != bytes.len() {
            return Err(Error::Data(format!(
                "checkpoint has {} trailing bytes",
                bytes.len() - cur.pos
            )));
        }
        Ok(checkpoint)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes =
            std::fs::read(path).map_err(|e| Error::Data(format!("{}: {e}", path.display())))?;
        Self::from_bytes(&bytes)
    }
}

struct Cursor<'a> {
    data: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.data.len() {
            return Err(Error::Data("truncated checkpoint".into()));
        }
        let slice = &self.data[self.pos..self.pos + n];
        self.pos += n;
        Ok(slice)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn matrix(&mut self, rows: usize, cols: usize) -> Result<Matrix<f64>> {
        let raw = self.take(rows * cols * 8)?;
        let mut data = Vec::with_capacity(rows * cols);
        for chunk in raw.chunks_exact(8) {
            let v = f64::from_le_bytes(chunk.try_into().unwrap());
            if !v.is_finite() {
                return Err(Error::Data("non-finite value in checkpoint".into()));
            }
            data.push(v);
        }
        Matrix::new(rows, cols, data)
    }
}
