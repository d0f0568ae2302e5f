//! Fourier multipliers applied coefficientwise to spectral fields.

use num_complex::Complex64;
use serde::Deserialize;

use crate::error::{Error, Result};
use crate::field::{SpectralField, VectorField};
use crate::grid::{CutoffSpec, FrequencyPart, Grid3};
use crate::kernels::{self, DampingParams, DiffusionKind, KernelKind};

type C = Complex64;

#[derive(Clone, Debug, PartialEq)]
pub enum Symbol {
    Identity,
    /// `(i xi)^alpha` for a multi-index.
    Derivative([u32; 3]),
    /// `R_a = xi_a / |xi|`, without the factor `-i`, so that
    /// `sum_a R_a R_a` is the identity off the mean; norms are unaffected.
    Riesz(usize),
    Cutoff(CutoffSpec, FrequencyPart),
    Kernel {
        params: DampingParams,
        which: KernelKind,
        t: f64,
        order: usize,
    },
    Diffusion {
        params: DampingParams,
        which: DiffusionKind,
        t: f64,
    },
    /// `|xi|^{-1}`
    InverseGradient,
    /// `e^{-nu |xi|^2 t / 2}`
    Heat { nu: f64, t: f64 },
    Product(Vec<Symbol>),
}

/// Named parameters for [`Symbol::from_id`].
#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SymbolParams {
    pub alpha: Option<[u32; 3]>,
    pub axis: Option<usize>,
    pub c0: Option<f64>,
    pub c1: Option<f64>,
    pub beta: Option<f64>,
    pub nu: Option<f64>,
    pub t: Option<f64>,
    pub order: Option<usize>,
}

fn need<T: Copy>(v: Option<T>, name: &str, id: &str) -> Result<T> {
    v.ok_or_else(|| Error::InvalidParams(format!("symbol `{id}` needs parameter `{name}`")))
}

impl Symbol {
    /// Builds a symbol from its identifier: `identity`, `derivative`, `riesz`,
    /// `chi_low`, `chi_mid`, `chi_high`, `k0`, `k1`, `g0`, `g1`, `k00`,
    /// `inv_grad` or `heat`.
    pub fn from_id(id: &str, p: &SymbolParams) -> Result<Self> {
        let damping = || -> Result<DampingParams> {
            DampingParams::new(need(p.beta, "beta", id)?, need(p.nu, "nu", id)?)
        };
        let cutoff = || -> Result<CutoffSpec> { CutoffSpec::new(need(p.c0, "c0", id)?, need(p.c1, "c1", id)?) };
        let sym = match id {
            "identity" => Symbol::Identity,
            "derivative" => Symbol::Derivative(need(p.alpha, "alpha", id)?),
            "riesz" => {
                let axis = need(p.axis, "axis", id)?;
                if axis > 2 {
                    return Err(Error::InvalidParams(format!("riesz axis {axis} out of range")));
                }
                Symbol::Riesz(axis)
            }
            "chi_low" => Symbol::Cutoff(cutoff()?, FrequencyPart::Low),
            "chi_mid" => Symbol::Cutoff(cutoff()?, FrequencyPart::Mid),
            "chi_high" => Symbol::Cutoff(cutoff()?, FrequencyPart::High),
            "k0" | "k1" => {
                let order = p.order.unwrap_or(0);
                if order > 2 {
                    return Err(Error::UnsupportedOrder(order));
                }
                Symbol::Kernel {
                    params: damping()?,
                    which: if id == "k0" { KernelKind::K0 } else { KernelKind::K1 },
                    t: need(p.t, "t", id)?,
                    order,
                }
            }
            "g0" | "g1" | "k00" => Symbol::Diffusion {
                params: damping()?,
                which: match id {
                    "g0" => DiffusionKind::G0,
                    "g1" => DiffusionKind::G1,
                    _ => DiffusionKind::K00,
                },
                t: need(p.t, "t", id)?,
            },
            "inv_grad" => Symbol::InverseGradient,
            "heat" => Symbol::Heat {
                nu: need(p.nu, "nu", id)?,
                t: need(p.t, "t", id)?,
            },
            other => return Err(Error::UnsupportedSymbol(other.to_string())),
        };
        Ok(sym)
    }

    fn factors(&self) -> Vec<&Symbol> {
        match self {
            Symbol::Product(v) => v.iter().flat_map(|s| s.factors()).collect(),
            s => vec![s],
        }
    }

    /// Whether the symbol carries a `0/0` form at the origin.
    fn singular_at_origin(&self) -> bool {
        self.factors()
            .iter()
            .any(|s| matches!(s, Symbol::Riesz(_) | Symbol::InverseGradient))
    }

    /// Value of a factor that depends on `|xi|` only.
    fn radial_value(&self, r: f64) -> Option<f64> {
        Some(match self {
            Symbol::Identity => 1.0,
            Symbol::Cutoff(spec, part) => spec.chi(*part, r),
            Symbol::Kernel {
                params,
                which,
                t,
                order,
            } => kernels::kernel_hat(*t, r, params, *which, *order).ok()?,
            Symbol::Diffusion { params, which, t } => kernels::diffusion_hat(*t, r, params, *which).ok()?,
            Symbol::InverseGradient => {
                if r == 0.0 {
                    0.0
                } else {
                    1.0 / r
                }
            }
            Symbol::Heat { nu, t } => (-0.5 * nu * r * r * t).exp(),
            _ => return None,
        })
    }

    /// Symbol value at lattice slot `idx`.
    pub fn value(&self, grid: &Grid3, idx: usize) -> C {
        let xi = grid.wave_vector(idx);
        let r = (xi[0] * xi[0] + xi[1] * xi[1] + xi[2] * xi[2]).sqrt();
        self.factors()
            .iter()
            .fold(C::new(1.0, 0.0), |acc, f| acc * f.factor_value(grid, idx, xi, r))
    }

    fn factor_value(&self, grid: &Grid3, idx: usize, xi: [f64; 3], r: f64) -> C {
        match self {
            Symbol::Derivative(alpha) => derivative_value(grid, idx, xi, *alpha),
            Symbol::Riesz(a) => {
                if r == 0.0 || grid.nyquist_axes(idx)[*a] {
                    C::new(0.0, 0.0)
                } else {
                    C::new(xi[*a] / r, 0.0)
                }
            }
            Symbol::Product(_) => self.value(grid, idx),
            other => C::new(other.radial_value(r).unwrap_or(f64::NAN), 0.0),
        }
    }
}

/// `(i xi)^alpha`, zeroed where an odd power meets a Nyquist axis so that
/// real fields stay real.
pub fn derivative_value(grid: &Grid3, idx: usize, xi: [f64; 3], alpha: [u32; 3]) -> C {
    let nyq = grid.nyquist_axes(idx);
    let mut v = C::new(1.0, 0.0);
    for a in 0..3 {
        if alpha[a] == 0 {
            continue;
        }
        if alpha[a] % 2 == 1 && nyq[a] {
            return C::new(0.0, 0.0);
        }
        v *= C::new(0.0, xi[a]).powu(alpha[a]);
    }
    v
}

/// Output of [`apply_symbol`].
#[derive(Clone, Debug)]
pub struct Applied {
    pub field: SpectralField,
    /// Set when a symbol singular at `xi = 0` met a field with nonzero mean.
    pub mean_nonzero: bool,
}

/// Multiplies every coefficient by the symbol. Factors that depend on `|xi|`
/// only are tabulated once per lattice shell.
pub fn apply_symbol(field: &VectorField, symbol: &Symbol) -> Result<Applied> {
    let input = field.as_spectral()?;
    let grid = *input.grid();
    let factors = symbol.factors();
    for f in &factors {
        if let Symbol::Kernel { order, .. } = f {
            if *order > 2 {
                return Err(Error::UnsupportedOrder(*order));
            }
        }
        if let Symbol::Riesz(a) = f {
            if *a > 2 {
                return Err(Error::InvalidParams(format!("riesz axis {a} out of range")));
            }
        }
    }
    let radial: Vec<&Symbol> = factors
        .iter()
        .copied()
        .filter(|f| !matches!(f, Symbol::Derivative(_) | Symbol::Riesz(_)))
        .collect();
    let directional: Vec<&Symbol> = factors
        .iter()
        .copied()
        .filter(|f| matches!(f, Symbol::Derivative(_) | Symbol::Riesz(_)))
        .collect();
    let dk = grid.dk();
    let mut table = vec![f64::NAN; grid.max_shell_index() + 1];
    let mut out = SpectralField::zeros(grid);
    for idx in 0..grid.len() {
        let shell = grid.shell_index(idx);
        if table[shell].is_nan() {
            let r = dk * (shell as f64).sqrt();
            table[shell] = radial
                .iter()
                .map(|f| f.radial_value(r).unwrap_or(f64::NAN))
                .product();
        }
        let mut v = C::new(table[shell], 0.0);
        if !directional.is_empty() {
            let xi = grid.wave_vector(idx);
            let r = dk * (shell as f64).sqrt();
            for f in &directional {
                v *= f.factor_value(&grid, idx, xi, r);
            }
        }
        for a in 0..3 {
            out.comps[a][idx] = v * input.comps[a][idx];
        }
    }
    let mean_nonzero = symbol.singular_at_origin() && {
        let m = input.mean_coefficients();
        let scale = input.max_abs();
        m.iter().any(|c| c.norm() > 1e-12 * scale)
    };
    Ok(Applied {
        field: out,
        mean_nonzero,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::PhysicalField;
    use std::f64::consts::PI;

    fn sample_field(grid: Grid3) -> SpectralField {
        PhysicalField::from_fn(grid, |x| {
            [
                (-(x[0] * x[0] + x[1] * x[1] + x[2] * x[2])).exp() + 0.3,
                (x[0] - x[2]).sin() * (-(x[1] * x[1])).exp(),
                x[0] * (-(x[0] * x[0] + x[2] * x[2])).exp(),
            ]
        })
        .to_spectral()
    }

    #[test]
    fn identity_is_identity() {
        let g = Grid3::new(8, 5.0).unwrap();
        let f = sample_field(g);
        let out = apply_symbol(&f.clone().into(), &Symbol::Identity).unwrap();
        assert_eq!(out.field, f);
        assert!(!out.mean_nonzero);
    }

    #[test]
    fn riesz_sum_removes_mean() {
        let g = Grid3::new(8, 5.0).unwrap();
        let f = sample_field(g);
        let mut acc = SpectralField::zeros(g);
        let mut flagged = false;
        for a in 0..3 {
            let s = Symbol::Product(vec![Symbol::Riesz(a), Symbol::Riesz(a)]);
            let out = apply_symbol(&f.clone().into(), &s).unwrap();
            flagged |= out.mean_nonzero;
            acc.add_assign(&out.field).unwrap();
        }
        assert!(flagged);
        for idx in 0..g.len() {
            let nyq = g.nyquist_axes(idx);
            for c in 0..3 {
                if idx == 0 {
                    assert_eq!(acc.comps[c][idx], C::new(0.0, 0.0));
                } else if !nyq.iter().any(|&b| b) {
                    assert!((acc.comps[c][idx] - f.comps[c][idx]).norm() < 1e-14);
                }
            }
        }
    }

    #[test]
    fn derivative_of_plane_wave() {
        let g = Grid3::new(8, 2.0 * PI).unwrap();
        let f = PhysicalField::from_fn(g, |x| [x[0].cos(), x[0].sin(), 0.0]).to_spectral();
        let out = apply_symbol(&f.clone().into(), &Symbol::Derivative([1, 0, 0])).unwrap();
        let idx = g.flatten(1, 0, 0);
        for c in 0..2 {
            assert!((out.field.comps[c][idx] - C::i() * f.comps[c][idx]).norm() < 1e-14);
        }
        let back = out.field.to_physical();
        for idx in 0..g.len() {
            let x = g.position(idx);
            assert!((back.comps[0][idx] + x[0].sin()).abs() < 1e-12);
            assert!((back.comps[1][idx] - x[0].cos()).abs() < 1e-12);
        }
    }

    #[test]
    fn unknown_id_is_rejected() {
        let err = Symbol::from_id("laplace_beltrami", &SymbolParams::default()).unwrap_err();
        assert!(matches!(err, Error::UnsupportedSymbol(_)));
        assert!(Symbol::from_id("k1", &SymbolParams::default()).is_err());
        let p = SymbolParams {
            beta: Some(1.0),
            nu: Some(1.0),
            t: Some(1.0),
            order: Some(3),
            ..Default::default()
        };
        assert!(matches!(Symbol::from_id("k0", &p), Err(Error::UnsupportedOrder(3))));
    }

    #[test]
    fn physical_input_is_rejected() {
        let g = Grid3::new(8, 1.0).unwrap();
        let f = PhysicalField::zeros(g);
        assert!(apply_symbol(&f.into(), &Symbol::Identity).is_err());
    }
}
