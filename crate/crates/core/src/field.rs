//! Three-component vector fields in physical or spectral space, and the
//! binary snapshot container.

use std::io::{Read, Write};

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::fft::Transformer;
use crate::grid::Grid3;

type C = Complex64;

const MAGIC: &[u8; 8] = b"DWFIELD1";

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Space {
    Physical,
    Spectral,
}

impl Space {
    fn tag(self) -> u8 {
        match self {
            Space::Physical => 0,
            Space::Spectral => 1,
        }
    }

    fn from_tag(tag: u8) -> Result<Self> {
        match tag {
            0 => Ok(Space::Physical),
            1 => Ok(Space::Spectral),
            _ => Err(Error::Shape(format!("unknown space tag {tag}"))),
        }
    }
}

/// Real vector field sampled on the lattice.
#[derive(Clone, Debug, PartialEq)]
pub struct PhysicalField {
    grid: Grid3,
    pub comps: [Vec<f64>; 3],
}

/// Fourier coefficients of a vector field, scaled as in [`Transformer`].
#[derive(Clone, Debug, PartialEq)]
pub struct SpectralField {
    grid: Grid3,
    pub comps: [Vec<C>; 3],
}

impl PhysicalField {
    pub fn new(grid: Grid3, comps: [Vec<f64>; 3]) -> Result<Self> {
        for (a, c) in comps.iter().enumerate() {
            if c.len() != grid.len() {
                return Err(Error::Shape(format!(
                    "component {a} has {} values, grid needs {}",
                    c.len(),
                    grid.len()
                )));
            }
        }
        Ok(Self { grid, comps })
    }

    pub fn zeros(grid: Grid3) -> Self {
        let z = vec![0.0; grid.len()];
        Self {
            grid,
            comps: [z.clone(), z.clone(), z],
        }
    }

    pub fn from_fn(grid: Grid3, f: impl Fn([f64; 3]) -> [f64; 3]) -> Self {
        let mut out = Self::zeros(grid);
        for idx in 0..grid.len() {
            let v = f(grid.position(idx));
            for a in 0..3 {
                out.comps[a][idx] = v[a];
            }
        }
        out
    }

    pub fn grid(&self) -> &Grid3 {
        &self.grid
    }

    pub fn to_spectral_with(&self, tr: &Transformer) -> Result<SpectralField> {
        check_grid(&self.grid, tr.grid())?;
        let (a, b) = tr.forward_real_pair(&self.comps[0], &self.comps[1]);
        let c = tr.forward_real(&self.comps[2]);
        Ok(SpectralField {
            grid: self.grid,
            comps: [a, b, c],
        })
    }

    pub fn to_spectral(&self) -> SpectralField {
        self.to_spectral_with(&Transformer::new(self.grid))
            .expect("transformer built for this grid")
    }

    pub fn scaled(&self, s: f64) -> Self {
        let mut out = self.clone();
        out.comps.iter_mut().flatten().for_each(|v| *v *= s);
        out
    }

    pub fn max_abs(&self) -> f64 {
        self.comps
            .iter()
            .flatten()
            .fold(0.0_f64, |m, v| m.max(v.abs()))
    }
}

impl SpectralField {
    pub fn new(grid: Grid3, comps: [Vec<C>; 3]) -> Result<Self> {
        for (a, c) in comps.iter().enumerate() {
            if c.len() != grid.len() {
                return Err(Error::Shape(format!(
                    "component {a} has {} coefficients, grid needs {}",
                    c.len(),
                    grid.len()
                )));
            }
        }
        Ok(Self { grid, comps })
    }

    pub fn zeros(grid: Grid3) -> Self {
        let z = vec![C::new(0.0, 0.0); grid.len()];
        Self {
            grid,
            comps: [z.clone(), z.clone(), z],
        }
    }

    pub fn grid(&self) -> &Grid3 {
        &self.grid
    }

    pub fn to_physical_with(&self, tr: &Transformer) -> Result<PhysicalField> {
        check_grid(&self.grid, tr.grid())?;
        let (a, b) = tr.inverse_real_pair(&self.comps[0], &self.comps[1]);
        let c = tr.inverse_real(&self.comps[2]);
        Ok(PhysicalField {
            grid: self.grid,
            comps: [a, b, c],
        })
    }

    pub fn to_physical(&self) -> PhysicalField {
        self.to_physical_with(&Transformer::new(self.grid))
            .expect("transformer built for this grid")
    }

    pub fn scaled(&self, s: f64) -> Self {
        let mut out = self.clone();
        out.comps.iter_mut().flatten().for_each(|v| *v *= s);
        out
    }

    pub fn add_assign(&mut self, other: &SpectralField) -> Result<()> {
        check_grid(&self.grid, &other.grid)?;
        for a in 0..3 {
            for (x, y) in self.comps[a].iter_mut().zip(&other.comps[a]) {
                *x += y;
            }
        }
        Ok(())
    }

    /// `self += s * other`
    pub fn axpy(&mut self, s: f64, other: &SpectralField) -> Result<()> {
        check_grid(&self.grid, &other.grid)?;
        for a in 0..3 {
            for (x, y) in self.comps[a].iter_mut().zip(&other.comps[a]) {
                *x += s * y;
            }
        }
        Ok(())
    }

    pub fn max_abs(&self) -> f64 {
        self.comps
            .iter()
            .flatten()
            .fold(0.0_f64, |m, v| m.max(v.norm()))
    }

    /// `max |c(-k) - conj c(k)|` relative to the largest coefficient (0 for the zero field).
    pub fn hermitian_defect(&self) -> f64 {
        let scale = self.max_abs();
        if scale == 0.0 {
            return 0.0;
        }
        let mut worst = 0.0_f64;
        for comp in &self.comps {
            for idx in 0..self.grid.len() {
                let m = self.grid.mirror_index(idx);
                worst = worst.max((comp[m] - comp[idx].conj()).norm());
            }
        }
        worst / scale
    }

    /// Coefficient at the zero wave vector, per component.
    pub fn mean_coefficients(&self) -> [C; 3] {
        [self.comps[0][0], self.comps[1][0], self.comps[2][0]]
    }
}

/// A vector field tagged with the space it lives in.
#[derive(Clone, Debug, PartialEq)]
pub enum VectorField {
    Physical(PhysicalField),
    Spectral(SpectralField),
}

impl VectorField {
    pub fn grid(&self) -> &Grid3 {
        match self {
            VectorField::Physical(f) => f.grid(),
            VectorField::Spectral(f) => f.grid(),
        }
    }

    pub fn space(&self) -> Space {
        match self {
            VectorField::Physical(_) => Space::Physical,
            VectorField::Spectral(_) => Space::Spectral,
        }
    }

    /// Forward or inverse transform, depending on the current space.
    pub fn transform(&self) -> VectorField {
        match self {
            VectorField::Physical(f) => VectorField::Spectral(f.to_spectral()),
            VectorField::Spectral(f) => VectorField::Physical(f.to_physical()),
        }
    }

    pub fn as_physical(&self) -> Result<&PhysicalField> {
        match self {
            VectorField::Physical(f) => Ok(f),
            VectorField::Spectral(_) => Err(Error::Shape("expected a physical-space field".into())),
        }
    }

    pub fn as_spectral(&self) -> Result<&SpectralField> {
        match self {
            VectorField::Spectral(f) => Ok(f),
            VectorField::Physical(_) => Err(Error::Shape("expected a spectral-space field".into())),
        }
    }
}

impl From<PhysicalField> for VectorField {
    fn from(f: PhysicalField) -> Self {
        VectorField::Physical(f)
    }
}

impl From<SpectralField> for VectorField {
    fn from(f: SpectralField) -> Self {
        VectorField::Spectral(f)
    }
}

pub(crate) fn check_grid(a: &Grid3, b: &Grid3) -> Result<()> {
    if a != b {
        return Err(Error::Shape(format!(
            "grid mismatch: n={} L={} vs n={} L={}",
            a.n(),
            a.box_length(),
            b.n(),
            b.box_length()
        )));
    }
    Ok(())
}

/// Payload of a snapshot file.
#[derive(Clone, Debug, PartialEq)]
pub enum SnapshotData {
    Physical(Vec<Vec<f64>>),
    Spectral(Vec<Vec<C>>),
}

/// One field (or a stack of fields) with its grid and optional time stamp.
///
/// Layout: 8-byte magic, `n: u64`, `L: f64`, space tag `u8`, component count
/// `u32`, time `f64` (NaN when absent), then little-endian `f64` values,
/// component-major and x-fastest; spectral values are stored as `(re, im)` pairs.
#[derive(Clone, Debug, PartialEq)]
pub struct Snapshot {
    pub grid: Grid3,
    pub time: Option<f64>,
    pub data: SnapshotData,
}

impl Snapshot {
    pub fn from_field(field: &VectorField, time: Option<f64>) -> Self {
        let data = match field {
            VectorField::Physical(f) => SnapshotData::Physical(f.comps.to_vec()),
            VectorField::Spectral(f) => SnapshotData::Spectral(f.comps.to_vec()),
        };
        Self {
            grid: *field.grid(),
            time,
            data,
        }
    }

    pub fn components(&self) -> usize {
        match &self.data {
            SnapshotData::Physical(v) => v.len(),
            SnapshotData::Spectral(v) => v.len(),
        }
    }

    /// Reassembles a three-component field; fails for other component counts.
    pub fn to_field(&self) -> Result<VectorField> {
        if self.components() != 3 {
            return Err(Error::Shape(format!(
                "snapshot holds {} components, expected 3",
                self.components()
            )));
        }
        Ok(match &self.data {
            SnapshotData::Physical(v) => VectorField::Physical(PhysicalField::new(
                self.grid,
                [v[0].clone(), v[1].clone(), v[2].clone()],
            )?),
            SnapshotData::Spectral(v) => VectorField::Spectral(SpectralField::new(
                self.grid,
                [v[0].clone(), v[1].clone(), v[2].clone()],
            )?),
        })
    }

    pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(MAGIC)?;
        w.write_all(&(self.grid.n() as u64).to_le_bytes())?;
        w.write_all(&self.grid.box_length().to_le_bytes())?;
        let (space, count) = match &self.data {
            SnapshotData::Physical(v) => (Space::Physical, v.len()),
            SnapshotData::Spectral(v) => (Space::Spectral, v.len()),
        };
        w.write_all(&[space.tag()])?;
        w.write_all(&(count as u32).to_le_bytes())?;
        w.write_all(&self.time.unwrap_or(f64::NAN).to_le_bytes())?;
        let mut buf = Vec::with_capacity(16 * self.grid.len());
        match &self.data {
            SnapshotData::Physical(v) => {
                for comp in v {
                    buf.clear();
                    for x in comp {
                        buf.extend_from_slice(&x.to_le_bytes());
                    }
                    w.write_all(&buf)?;
                }
            }
            SnapshotData::Spectral(v) => {
                for comp in v {
                    buf.clear();
                    for c in comp {
                        buf.extend_from_slice(&c.re.to_le_bytes());
                        buf.extend_from_slice(&c.im.to_le_bytes());
                    }
                    w.write_all(&buf)?;
                }
            }
        }
        Ok(())
    }

    pub fn read_from<R: Read>(mut r: R) -> Result<Self> {
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(Error::Shape("not a field snapshot".into()));
        }
        let n = read_u64(&mut r)? as usize;
        let box_length = read_f64(&mut r)?;
        let grid = Grid3::new(n, box_length)?;
        let mut tag = [0u8; 1];
        r.read_exact(&mut tag)?;
        let space = Space::from_tag(tag[0])?;
        let mut count = [0u8; 4];
        r.read_exact(&mut count)?;
        let count = u32::from_le_bytes(count) as usize;
        let time = read_f64(&mut r)?;
        let time = if time.is_nan() { None } else { Some(time) };
        let len = grid.len();
        let data = match space {
            Space::Physical => {
                let mut comps = Vec::with_capacity(count);
                for _ in 0..count {
                    let mut comp = Vec::with_capacity(len);
                    for _ in 0..len {
                        comp.push(read_f64(&mut r)?);
                    }
                    comps.push(comp);
                }
                SnapshotData::Physical(comps)
            }
            Space::Spectral => {
                let mut comps = Vec::with_capacity(count);
                for _ in 0..count {
                    let mut comp = Vec::with_capacity(len);
                    for _ in 0..len {
                        let re = read_f64(&mut r)?;
                        let im = read_f64(&mut r)?;
                        comp.push(C::new(re, im));
                    }
                    comps.push(comp);
                }
                SnapshotData::Spectral(comps)
            }
        };
        Ok(Self { grid, time, data })
    }
}

fn read_u64<R: Read>(r: &mut R) -> Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

fn read_f64<R: Read>(r: &mut R) -> Result<f64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(f64::from_le_bytes(b))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn zero_field_has_zero_spectrum() {
        let g = Grid3::new(8, 1.0).unwrap();
        let s = PhysicalField::zeros(g).to_spectral();
        assert_eq!(s.max_abs(), 0.0);
    }

    #[test]
    fn cosine_has_two_coefficients() {
        let g = Grid3::new(8, 2.0 * PI).unwrap();
        let f = PhysicalField::from_fn(g, |x| [x[0].cos(), 0.0, 0.0]);
        let s = f.to_spectral();
        let nonzero: Vec<[i64; 3]> = (0..g.len())
            .filter(|&i| s.comps[0][i].norm() > 1e-12)
            .map(|i| g.integer_wave_vector(i))
            .collect();
        assert_eq!(nonzero.len(), 2);
        assert!(nonzero.contains(&[1, 0, 0]));
        assert!(nonzero.contains(&[-1, 0, 0]));
        assert!(s.comps[1].iter().chain(&s.comps[2]).all(|c| c.norm() < 1e-14));
    }

    #[test]
    fn snapshot_round_trip() {
        let g = Grid3::new(8, 3.0).unwrap();
        let f = PhysicalField::from_fn(g, |x| [x[0], x[1] * x[2], (x[0] + 1.0).sin()]);
        for field in [VectorField::from(f.clone()), VectorField::from(f.to_spectral())] {
            for time in [None, Some(2.5)] {
                let snap = Snapshot::from_field(&field, time);
                let mut bytes = Vec::new();
                snap.write_to(&mut bytes).unwrap();
                let back = Snapshot::read_from(bytes.as_slice()).unwrap();
                assert_eq!(back, snap);
                assert_eq!(back.to_field().unwrap(), field);
            }
        }
    }

    #[test]
    fn rejects_wrong_lengths() {
        let g = Grid3::new(8, 1.0).unwrap();
        assert!(PhysicalField::new(g, [vec![0.0; 10], vec![0.0; 512], vec![0.0; 512]]).is_err());
        let a = SpectralField::zeros(g);
        let b = SpectralField::zeros(Grid3::new(8, 2.0).unwrap());
        assert!(a.clone().add_assign(&b).is_err());
    }
}
