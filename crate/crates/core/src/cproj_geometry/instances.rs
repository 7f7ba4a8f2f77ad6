//! Reference instances used by tests and the command line.

use std::collections::BTreeMap;

use num_complex::Complex64;

use super::{fs_log_form, fs_potential_den, CProjectiveData, LineBundleData, OneForm};
use crate::error::Result;
use crate::polynomial_algebra::{PolyField, RationalField};

/// Fubini–Study Levi-Civita connection `Γ^k_ij = −(zb_i δ^k_j + zb_j δ^k_i)/u`
/// with `u = 1 + z·zb`, and `θ_i = c·zb_i / u`.
pub fn fs_instance(n: usize, theta_scale: Complex64) -> Result<(CProjectiveData, LineBundleData)> {
    let u = fs_potential_den(n)?;
    let mut entries = BTreeMap::new();
    for k in 0..n {
        for i in 0..n {
            for j in i..n {
                let mut num = PolyField::zero(n);
                if k == j {
                    num = num.sub(&PolyField::zb(n, i));
                }
                if k == i {
                    num = num.sub(&PolyField::zb(n, j));
                }
                if !num.is_zero() {
                    entries.insert((k, i, j), RationalField::new(num, u.clone())?);
                }
            }
        }
    }
    let data = CProjectiveData::from_entries(n, entries)?;
    let theta = LineBundleData::new(fs_log_form(n, theta_scale)?)?;
    Ok((data, theta))
}

/// `∂log(1 + z·zb)`; shifting the Fubini–Study data by this form gives the
/// flat connection.
pub fn fs_shift_form(n: usize) -> Result<OneForm> {
    Ok(OneForm::from_holomorphic(fs_log_form(n, Complex64::new(1.0, 0.0))?))
}

/// Flat `C²` perturbed by `Γ^1_11 = z_2 / 2`, whose curvature has a
/// nonzero (2,0) part.
pub fn pert_instance() -> Result<CProjectiveData> {
    let mut entries = BTreeMap::new();
    entries.insert((0, 0, 0), PolyField::z(2, 1).scale(Complex64::new(0.5, 0.0)).into());
    CProjectiveData::from_entries(2, entries)
}
