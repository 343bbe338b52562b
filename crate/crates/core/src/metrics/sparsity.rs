use crate::cca::ConceptBank;
use crate::error::{Error, Result};
use crate::linalg::{dot, norm2};
use crate::sparse::SparseCode;

/// `1 − mean_{i≠j} |cos(c_i, c_j)|`.
pub fn concept_orthogonality(bank: &ConceptBank) -> Result<f64> {
    let k = bank.k();
    if k < 2 {
        return Err(Error::Parameter(format!(
            "orthogonality needs at least 2 concepts, got {k}"
        )));
    }
    let cols = bank.normalized_columns();
    let mut total = 0.0;
    for i in 0..k {
        for j in (i + 1)..k {
            total += dot(&cols[i], &cols[j]).abs().min(1.0);
        }
    }
    // Each unordered pair stands for two ordered ones.
    let pairs = (k * (k - 1) / 2) as f64;
    Ok(1.0 - total / pairs)
}

/// `(√k − ‖w‖₁/‖w‖₂) / (√k − 1)`.
pub fn hoyer_sparsity(w: &[f64]) -> Result<f64> {
    let k = w.len();
    if k < 2 {
        return Err(Error::Parameter(format!(
            "Hoyer index needs k >= 2, got {k}"
        )));
    }
    let l2 = norm2(w);
    if l2 == 0.0 {
        return Err(Error::Degenerate("Hoyer index of a zero vector".into()));
    }
    let l1: f64 = w.iter().map(|v| v.abs()).sum();
    let rk = (k as f64).sqrt();
    Ok(((rk - l1 / l2) / (rk - 1.0)).clamp(0.0, 1.0))
}

/// Mean over codes of the share of `Σ_j w_j²‖ĉ_j‖²` held by the `top` largest
/// terms. All-zero codes count as fully covered.
pub fn energy_coverage_at(codes: &[SparseCode], bank: &ConceptBank, top: usize) -> Result<f64> {
    if top == 0 {
        return Err(Error::Parameter("energy coverage needs top >= 1".into()));
    }
    if codes.is_empty() {
        return Err(Error::Dimension("energy coverage of no codes".into()));
    }
    let unit_norms_sq: Vec<f64> = bank
        .normalized_columns()
        .iter()
        .map(|c| dot(c, c))
        .collect();
    let mut sum = 0.0;
    for code in codes {
        if code.w.len() != bank.k() {
            return Err(Error::Dimension(format!(
                "code of length {} for {} concepts",
                code.w.len(),
                bank.k()
            )));
        }
        let mut terms: Vec<f64> = code
            .w
            .iter()
            .zip(&unit_norms_sq)
            .map(|(w, n)| w * w * n)
            .collect();
        let total: f64 = terms.iter().sum();
        if total == 0.0 {
            sum += 1.0;
            continue;
        }
        terms.sort_by(|a, b| b.total_cmp(a));
        let covered: f64 = terms.iter().take(top).sum();
        sum += (covered / total).min(1.0);
    }
    Ok(sum / codes.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hoyer_endpoints() {
        assert_eq!(hoyer_sparsity(&[0.0, 3.0, 0.0, 0.0]).unwrap(), 1.0);
        assert_eq!(hoyer_sparsity(&[2.0; 5]).unwrap(), 0.0);
        assert!(hoyer_sparsity(&[0.0, 0.0]).is_err());
        assert!(hoyer_sparsity(&[1.0]).is_err());
    }

    #[test]
    fn uniform_energy_split() {
        let bank = ConceptBank::new(
            crate::linalg::Matrix::identity(20),
            vec![0.0; 20],
            crate::cca::Provenance::External,
        )
        .unwrap();
        let w: Vec<f64> = (0..20)
            .map(|i| if i % 2 == 0 { 1.0 } else { -1.0 })
            .collect();
        let codes = [SparseCode::from_coefficients(w)];
        assert!((energy_coverage_at(&codes, &bank, 10).unwrap() - 0.5).abs() < 1e-15);
        let zero = [SparseCode::from_coefficients(vec![0.0; 20])];
        assert_eq!(energy_coverage_at(&zero, &bank, 10).unwrap(), 1.0);
    }
}
