//! Row-parallel evaluation of a copula quantity on a [`GridSpec`].

use std::io::Write;

use bmcopula_core::Copula;
use rayon::prelude::*;

use crate::config::GridSpec;
use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Quantity {
    Cdf,
    Density,
}

impl Quantity {
    pub fn label(&self) -> &'static str {
        match self {
            Quantity::Cdf => "C(u, v)",
            Quantity::Density => "c(u, v)",
        }
    }
}

/// Values on a grid, row-major with `v` as the row index.
#[derive(Debug, Clone, PartialEq)]
pub struct GridValues {
    pub spec: GridSpec,
    pub quantity: Quantity,
    pub values: Vec<f64>,
}

impl GridValues {
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[j * self.spec.nu + i]
    }

    /// Writes `u,v,value` rows, `u` varying fastest.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "u,v,value")?;
        for j in 0..self.spec.nv {
            let v = self.spec.v(j);
            for i in 0..self.spec.nu {
                writeln!(out, "{},{},{}", self.spec.u(i), v, self.get(i, j))?;
            }
        }
        out.flush()
    }
}

pub fn evaluate(copula: &Copula, spec: &GridSpec, quantity: Quantity) -> Result<GridValues, CliError> {
    let rows: Vec<Vec<f64>> = (0..spec.nv)
        .into_par_iter()
        .map(|j| {
            let v = spec.v(j);
            (0..spec.nu)
                .map(|i| match quantity {
                    Quantity::Cdf => copula.cdf(spec.u(i), v),
                    Quantity::Density => copula.density(spec.u(i), v),
                })
                .collect::<bmcopula_core::Result<Vec<f64>>>()
        })
        .collect::<bmcopula_core::Result<_>>()?;
    Ok(GridValues {
        spec: *spec,
        quantity,
        values: rows.concat(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use bmcopula_core::CopulaKind;

    #[test]
    fn independence_grid() {
        let kind = CopulaKind::CorrTerminalVsMax {
            mu: 0.4,
            rho: 0.0,
            s: 0.25,
            t: 0.75,
            horizon: 1.0,
        };
        let spec = GridSpec {
            nu: 9,
            nv: 7,
            ..GridSpec::default()
        };
        let g = evaluate(&Copula::with_cache(kind).unwrap(), &spec, Quantity::Cdf).unwrap();
        for j in 0..spec.nv {
            for i in 0..spec.nu {
                assert!((g.get(i, j) - spec.u(i) * spec.v(j)).abs() < 1e-7);
            }
        }
        let mut buf = Vec::new();
        g.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 1 + 63);
        assert!(text.starts_with("u,v,value\n0.001,0.001,"));
    }
}
