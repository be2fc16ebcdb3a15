//! Binary container for grids, half-space fields, spatial functions, and
//! coefficient fields.
//!
//! Layout (all integers and floats little-endian):
//!
//! ```text
//! magic    [u8; 4]  = "HSFC"
//! version  u32      = 1
//! n        u32      spatial dimension
//! nx       u32      cells per axis
//! nt       u32      time nodes
//! channels u32      components per sample (0 for a bare grid)
//! payload  u32      0 = grid only, 1 = half-space field, 2 = spatial samples
//! period   f64      spatial period l
//! t_min    f64
//! t_max    f64
//! data     f64...   complex samples as (re, im) pairs, time-major
//!                   (payload 1: nt * nx^n * channels; payload 2: nx^n * channels)
//! ```

use std::io::{Read, Write};
use std::path::Path;

use num_complex::Complex64;

use crate::error::{CoreError, Result};
use crate::field::{HalfSpaceField, SpatialFunction};
use crate::grid::{make_grid, Grid};

const MAGIC: [u8; 4] = *b"HSFC";
const VERSION: u32 = 1;

/// What a container carries.
#[derive(Debug, Clone, PartialEq)]
pub enum Payload {
    Grid,
    /// `channels` components per `(t, y)` sample.
    HalfSpace { channels: usize, data: Vec<Complex64> },
    /// `channels` components per spatial sample (time axis unused);
    /// coefficient fields are stored this way with `channels = n*n`.
    Spatial { channels: usize, data: Vec<Complex64> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Container {
    pub grid: Grid,
    pub payload: Payload,
}

impl Container {
    pub fn grid_only(grid: Grid) -> Self {
        Self {
            grid,
            payload: Payload::Grid,
        }
    }

    pub fn from_field(f: &HalfSpaceField) -> Self {
        Self {
            grid: f.grid().clone(),
            payload: Payload::HalfSpace {
                channels: f.channels(),
                data: f.values().to_vec(),
            },
        }
    }

    pub fn from_spatial(f: &SpatialFunction) -> Self {
        Self {
            grid: f.grid().clone(),
            payload: Payload::Spatial {
                channels: 1,
                data: f.values().to_vec(),
            },
        }
    }

    pub fn into_field(self) -> Result<HalfSpaceField> {
        match self.payload {
            Payload::HalfSpace { channels, data } => {
                HalfSpaceField::from_values(self.grid, channels, data)
            }
            _ => Err(CoreError::Format("container does not hold a half-space field".into())),
        }
    }

    pub fn into_spatial(self) -> Result<SpatialFunction> {
        match self.payload {
            Payload::Spatial { channels: 1, data } => SpatialFunction::from_values(self.grid, data),
            Payload::Spatial { channels, .. } => Err(CoreError::Format(format!(
                "spatial payload has {channels} channels, expected 1"
            ))),
            _ => Err(CoreError::Format("container does not hold spatial samples".into())),
        }
    }

    pub fn write_to(&self, w: &mut impl Write) -> Result<()> {
        let (payload_kind, channels, data): (u32, usize, &[Complex64]) = match &self.payload {
            Payload::Grid => (0, 0, &[]),
            Payload::HalfSpace { channels, data } => (1, *channels, data),
            Payload::Spatial { channels, data } => (2, *channels, data),
        };
        w.write_all(&MAGIC)?;
        for v in [
            VERSION,
            self.grid.dim() as u32,
            self.grid.nx() as u32,
            self.grid.nt() as u32,
            channels as u32,
            payload_kind,
        ] {
            w.write_all(&v.to_le_bytes())?;
        }
        for v in [self.grid.period(), self.grid.t_min(), self.grid.t_max()] {
            w.write_all(&v.to_le_bytes())?;
        }
        for z in data {
            w.write_all(&z.re.to_le_bytes())?;
            w.write_all(&z.im.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_from(r: &mut impl Read) -> Result<Self> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if magic != MAGIC {
            return Err(CoreError::Format(format!("bad magic {magic:?}")));
        }
        let mut u32s = [0u32; 6];
        for v in u32s.iter_mut() {
            let mut b = [0u8; 4];
            r.read_exact(&mut b)?;
            *v = u32::from_le_bytes(b);
        }
        let [version, n, nx, nt, channels, payload_kind] = u32s;
        if version != VERSION {
            return Err(CoreError::Format(format!("unsupported version {version}")));
        }
        let mut f64s = [0f64; 3];
        for v in f64s.iter_mut() {
            let mut b = [0u8; 8];
            r.read_exact(&mut b)?;
            *v = f64::from_le_bytes(b);
        }
        let [period, t_min, t_max] = f64s;
        let grid = make_grid(n as usize, period, nx as usize, t_min, t_max, nt as usize)?;
        let count = match payload_kind {
            0 => 0,
            1 => grid.nt() * grid.spatial_len() * channels as usize,
            2 => grid.spatial_len() * channels as usize,
            k => return Err(CoreError::Format(format!("unknown payload kind {k}"))),
        };
        let mut data = Vec::with_capacity(count);
        for _ in 0..count {
            let mut b = [0u8; 8];
            r.read_exact(&mut b)?;
            let re = f64::from_le_bytes(b);
            r.read_exact(&mut b)?;
            let im = f64::from_le_bytes(b);
            data.push(Complex64::new(re, im));
        }
        let payload = match payload_kind {
            0 => Payload::Grid,
            1 => Payload::HalfSpace {
                channels: channels as usize,
                data,
            },
            _ => Payload::Spatial {
                channels: channels as usize,
                data,
            },
        };
        Ok(Self { grid, payload })
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        self.write_to(&mut out).expect("in-memory write cannot fail");
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut cursor = bytes;
        Self::read_from(&mut cursor)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut f = std::fs::File::create(path)?;
        self.write_to(&mut f)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let mut f = std::fs::File::open(path)?;
        Self::read_from(&mut f)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::sample_field_real;
    use proptest::prelude::*;

    #[test]
    fn grid_roundtrip() {
        let g = make_grid(2, 8.0, 16, 0.1, 2.0, 12).unwrap();
        let c = Container::grid_only(g.clone());
        let back = Container::from_bytes(&c.to_bytes()).unwrap();
        assert_eq!(back.grid, g);
        assert_eq!(back.payload, Payload::Grid);
    }

    #[test]
    fn bad_header_rejected() {
        let g = make_grid(1, 8.0, 16, 0.1, 2.0, 4).unwrap();
        let mut bytes = Container::grid_only(g).to_bytes();
        bytes[0] = b'X';
        assert!(Container::from_bytes(&bytes).is_err());
        assert!(Container::from_bytes(&[1, 2, 3]).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]
        #[test]
        fn field_roundtrip_is_lossless(seed in 0u64..1000, nx_pow in 3u32..6, nt in 2usize..10) {
            let nx = 1usize << nx_pow;
            let g = make_grid(1, 8.0, nx, 0.05, 2.0, nt).unwrap();
            let f = sample_field_real(&g, |y, t| {
                ((y[0] * seed as f64).sin() + t).cos()
            }).unwrap();
            let c = Container::from_field(&f);
            let back = Container::from_bytes(&c.to_bytes()).unwrap().into_field().unwrap();
            prop_assert_eq!(back, f);
        }
    }
}
