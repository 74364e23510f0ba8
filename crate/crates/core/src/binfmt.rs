//! Little-endian primitives shared by the kernel cache and model files.

use crate::error::{Error, Result};
use crate::kernel::Provenance;

pub(crate) struct Writer {
    buf: Vec<u8>,
}

impl Writer {
    pub fn with_capacity(n: usize) -> Self {
        Self { buf: Vec::with_capacity(n) }
    }

    pub fn bytes(&mut self, b: &[u8]) {
        self.buf.extend_from_slice(b);
    }

    pub fn u8(&mut self, v: u8) {
        self.buf.push(v);
    }

    pub fn u64(&mut self, v: u64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    pub fn f64(&mut self, v: f64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    pub fn finish(self) -> Vec<u8> {
        self.buf
    }
}

pub(crate) struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    pub fn new(buf: &'a [u8]) -> Self {
        Self { buf, pos: 0 }
    }

    pub fn remaining(&self) -> usize {
        self.buf.len() - self.pos
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.remaining() < n {
            return Err(Error::Format(format!(
                "truncated: needed {n} bytes at offset {}, {} left",
                self.pos,
                self.remaining()
            )));
        }
        let out = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(out)
    }

    pub fn expect_magic(&mut self, magic: &[u8; 4]) -> Result<()> {
        let got = self.take(4)?;
        if got != magic {
            return Err(Error::Format(format!(
                "magic {:?}, expected {:?}",
                String::from_utf8_lossy(got),
                String::from_utf8_lossy(magic)
            )));
        }
        Ok(())
    }

    pub fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    pub fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    pub fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
}

/// Tag u8 then payload: sampled carries shots u64 + seed u64, RBF carries gamma f64.
pub(crate) fn write_provenance(w: &mut Writer, p: &Provenance) {
    match *p {
        Provenance::QuantumExact => w.u8(0),
        Provenance::QuantumSampled { shots, seed } => {
            w.u8(1);
            w.u64(shots);
            w.u64(seed);
        }
        Provenance::ClassicalLinear => w.u8(2),
        Provenance::ClassicalRbf { gamma } => {
            w.u8(3);
            w.f64(gamma);
        }
    }
}

pub(crate) fn read_provenance(r: &mut Reader<'_>) -> Result<Provenance> {
    Ok(match r.u8()? {
        0 => Provenance::QuantumExact,
        1 => Provenance::QuantumSampled { shots: r.u64()?, seed: r.u64()? },
        2 => Provenance::ClassicalLinear,
        3 => Provenance::ClassicalRbf { gamma: r.f64()? },
        other => return Err(Error::Format(format!("unknown provenance tag {other}"))),
    })
}
