//! Dyadic sample tables of the 1-D generators, built by the cascade
//! algorithm.

use nalgebra::DMatrix;

use super::family::{BasisFamily, Generator};
use super::MraError;

pub const MIN_TABLE_DEPTH: u32 = 4;
pub const MAX_TABLE_DEPTH: u32 = 14;

/// Samples of `φ`, `ψ` and their finite-difference slopes on `[0, L-1]` at
/// spacing `2^{-q}`. Sample `i` sits at `x = i / 2^q`.
#[derive(Debug, Clone)]
pub struct DyadicTable {
    family: BasisFamily,
    q: u32,
    phi: Vec<f64>,
    psi: Vec<f64>,
    dphi: Vec<f64>,
    dpsi: Vec<f64>,
}

/// Integer-point values of the refinable function with mask `h`: the unit
/// eigenvector of `A[n][m] = √2 h_{2n-m}`, normalized to sum 1.
pub fn integer_values(h: &[f64]) -> Result<Vec<f64>, MraError> {
    let l = h.len();
    if l < 2 {
        return Err(MraError::Construction("mask needs at least two taps".into()));
    }
    let n = l; // points 0..=L-1
    let s2 = std::f64::consts::SQRT_2;
    let mut a = DMatrix::<f64>::zeros(n, n);
    for r in 0..n {
        for c in 0..n {
            let idx = 2 * r as i64 - c as i64;
            if idx >= 0 && (idx as usize) < l {
                a[(r, c)] = s2 * h[idx as usize];
            }
        }
    }
    // Null space of (A - I) via SVD; a unique unit eigenvalue means exactly one
    // vanishing singular value.
    let shifted = &a - DMatrix::<f64>::identity(n, n);
    let svd = shifted.svd(false, true);
    let v_t = svd.v_t.ok_or_else(|| MraError::Construction("SVD failed".into()))?;
    let sv = &svd.singular_values;
    let scale = sv.max().max(1.0);
    let null: Vec<usize> = (0..n).filter(|&i| sv[i] <= 1e-10 * scale).collect();
    if null.len() != 1 {
        return Err(MraError::Construction(format!(
            "refinement matrix has {} unit eigenvalues, expected exactly one",
            null.len()
        )));
    }
    let row = v_t.row(null[0]);
    let sum: f64 = row.iter().sum();
    if sum.abs() < 1e-12 {
        return Err(MraError::Construction(
            "unit eigenvector has zero sum and cannot be normalized".into(),
        ));
    }
    Ok(row.iter().map(|v| v / sum).collect())
}

/// Forward/backward/centred differences at spacing `dx`.
fn slopes(v: &[f64], dx: f64) -> Vec<f64> {
    let n = v.len();
    (0..n)
        .map(|i| {
            if i == 0 {
                (v[1] - v[0]) / dx
            } else if i == n - 1 {
                (v[n - 1] - v[n - 2]) / dx
            } else {
                (v[i + 1] - v[i - 1]) / (2.0 * dx)
            }
        })
        .collect()
}

impl DyadicTable {
    pub fn build(family: BasisFamily, q: u32) -> Result<Self, MraError> {
        if !(MIN_TABLE_DEPTH..=MAX_TABLE_DEPTH).contains(&q) {
            return Err(MraError::Construction(format!(
                "table depth q={q} outside [{MIN_TABLE_DEPTH}, {MAX_TABLE_DEPTH}]"
            )));
        }
        let (phi, psi) = match family {
            BasisFamily::Haar => {
                let m = 1usize << q;
                let phi: Vec<f64> = (0..=m).map(|i| if i < m { 1.0 } else { 0.0 }).collect();
                let psi: Vec<f64> = (0..=m)
                    .map(|i| {
                        if i < m / 2 {
                            1.0
                        } else if i < m {
                            -1.0
                        } else {
                            0.0
                        }
                    })
                    .collect();
                (phi, psi)
            }
            _ => cascade(&family.lowpass(), &family.highpass(), q)?,
        };
        let dx = 1.0 / (1u64 << q) as f64;
        let dphi = slopes(&phi, dx);
        let dpsi = slopes(&psi, dx);
        Ok(Self {
            family,
            q,
            phi,
            psi,
            dphi,
            dpsi,
        })
    }

    pub fn family(&self) -> BasisFamily {
        self.family
    }

    pub fn depth(&self) -> u32 {
        self.q
    }

    /// Table samples for `g`, one per point `i / 2^q` on `[0, L-1]`.
    pub fn samples(&self, g: Generator) -> &[f64] {
        match g {
            Generator::Phi => &self.phi,
            Generator::Psi => &self.psi,
        }
    }

    pub fn slope_samples(&self, g: Generator) -> &[f64] {
        match g {
            Generator::Phi => &self.dphi,
            Generator::Psi => &self.dpsi,
        }
    }

    pub fn spacing(&self) -> f64 {
        1.0 / (1u64 << self.q) as f64
    }

    fn interp(&self, data: &[f64], t: f64) -> f64 {
        let last = (data.len() - 1) as f64;
        let s = t * (1u64 << self.q) as f64;
        if !(0.0..=last).contains(&s) {
            return 0.0;
        }
        let i = s.floor() as usize;
        if i + 1 >= data.len() {
            return data[data.len() - 1];
        }
        let w = s - i as f64;
        if w == 0.0 {
            data[i]
        } else {
            data[i] * (1.0 - w) + data[i + 1] * w
        }
    }

    /// Linear interpolation of the tabulated mother generator at `t`
    /// (table coordinate, support `[0, L-1]`); 0 outside the table.
    pub fn value(&self, g: Generator, t: f64) -> f64 {
        self.interp(self.samples(g), t)
    }

    pub fn slope(&self, g: Generator, t: f64) -> f64 {
        self.interp(self.slope_samples(g), t)
    }

    /// Largest two-scale residual `|φ(x) - √2 Σ h_k φ(2x - k)|` over the table.
    pub fn two_scale_residual(&self) -> f64 {
        let h = self.family.lowpass();
        let s2 = std::f64::consts::SQRT_2;
        let m = 1i64 << self.q;
        let n = self.phi.len() as i64;
        let at = |i: i64| -> f64 {
            if i < 0 || i >= n {
                0.0
            } else {
                self.phi[i as usize]
            }
        };
        let mut worst = 0.0f64;
        // Points whose refinement lands on the table: x = i/2^q with 2i in range.
        for i in 0..n {
            if self.family == BasisFamily::Haar && (i == 0 || i == m) {
                // jump points of the step function
                continue;
            }
            let rhs: f64 = h
                .iter()
                .enumerate()
                .map(|(k, hk)| s2 * hk * at(2 * i - k as i64 * m))
                .sum();
            worst = worst.max((self.phi[i as usize] - rhs).abs());
        }
        worst
    }

    /// Largest deviation of `Σ_k φ(x - k)` from 1 over one unit period.
    pub fn partition_of_unity_defect(&self) -> f64 {
        let m = 1usize << self.q;
        let n = self.phi.len();
        let mut worst = 0.0f64;
        for i in 0..m {
            let mut s = 0.0;
            let mut idx = i;
            while idx < n {
                s += self.phi[idx];
                idx += m;
            }
            worst = worst.max((s - 1.0).abs());
        }
        worst
    }
}

/// Cascade tabulation of `φ` and `ψ` on `[0, L-1]` at spacing `2^{-q}`.
fn cascade(h: &[f64], g: &[f64], q: u32) -> Result<(Vec<f64>, Vec<f64>), MraError> {
    let l = h.len();
    let width = l - 1;
    let m = 1usize << q;
    let n = width * m + 1;
    let s2 = std::f64::consts::SQRT_2;
    let ints = integer_values(h)?;
    let mut phi = vec![0.0; n];
    for (k, v) in ints.iter().enumerate() {
        phi[k * m] = *v;
    }
    // Fill level r from level r-1: odd multiples of 2^{q-r}.
    for r in 1..=q {
        let step = 1usize << (q - r);
        let mut i = step;
        while i < n {
            let mut s = 0.0;
            for (k, hk) in h.iter().enumerate() {
                let idx = 2 * i as i64 - (k * m) as i64;
                if idx >= 0 && (idx as usize) < n {
                    s += hk * phi[idx as usize];
                }
            }
            phi[i] = s2 * s;
            i += 2 * step;
        }
    }
    let mut psi = vec![0.0; n];
    for (i, out) in psi.iter_mut().enumerate() {
        let mut s = 0.0;
        for (k, gk) in g.iter().enumerate() {
            let idx = 2 * i as i64 - (k * m) as i64;
            if idx >= 0 && (idx as usize) < n {
                s += gk * phi[idx as usize];
            }
        }
        *out = s2 * s;
    }
    Ok((phi, psi))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn haar_table_is_the_step_pair() {
        let t = DyadicTable::build(BasisFamily::Haar, 4).unwrap();
        assert_eq!(t.value(Generator::Phi, 0.3), 1.0);
        assert_eq!(t.value(Generator::Psi, 0.25), 1.0);
        assert_eq!(t.value(Generator::Psi, 0.75), -1.0);
        assert_eq!(t.value(Generator::Phi, 1.5), 0.0);
    }

    #[test]
    fn haar_mask_has_no_unique_eigenvector() {
        assert!(matches!(
            integer_values(&BasisFamily::Haar.lowpass()),
            Err(MraError::Construction(_))
        ));
    }

    #[test]
    fn depth_is_validated() {
        assert!(DyadicTable::build(BasisFamily::Daubechies4, 3).is_err());
        assert!(DyadicTable::build(BasisFamily::Daubechies4, 15).is_err());
    }

    #[test]
    fn hat_table_is_exact() {
        let t = DyadicTable::build(BasisFamily::HierarchicalHat, 6).unwrap();
        for &x in &[0.0, 0.25, 0.5, 1.0, 1.375, 2.0] {
            let expect = 1.0 - (x - 1.0f64).abs();
            assert!((t.value(Generator::Phi, x) - expect).abs() < 1e-14);
        }
        assert!((t.value(Generator::Psi, 0.5) - 1.0).abs() < 1e-14);
        assert_eq!(t.value(Generator::Psi, 1.5), 0.0);
    }

    #[test]
    fn residuals_are_small() {
        for f in BasisFamily::ALL {
            let t = DyadicTable::build(f, 8).unwrap();
            assert!(t.two_scale_residual() < 1e-10, "{f}");
            assert!(t.partition_of_unity_defect() < 1e-10, "{f}");
        }
    }
}
