//! Eigen-structure of the 6×6 linearizations.
//!
//! Eigenvalues come from a real Schur decomposition (Hessenberg reduction and
//! shifted QR). Eigenvectors are the null space of `A − λI` for each cluster
//! of numerically equal eigenvalues, put in reduced row-echelon form so that
//! decoupled modes read `e_i + λ e_{i+3}` and repeated eigenvalues get a
//! deterministic basis.

use nalgebra::linalg::Schur;
use nalgebra::{Dyn, OMatrix, SMatrix, SVector, U6};
use num_complex::Complex64;
use thiserror::Error;

use crate::linearization::{Mat26, Mat6, Vec6};

pub type CVec6 = SVector<Complex64, 6>;
type CMat6 = SMatrix<Complex64, 6, 6>;
type Mat6xN = OMatrix<f64, U6, Dyn>;

/// QR sweep budget per eigenvalue.
pub const QR_SWEEPS: usize = 100;
/// Residual bound `‖A v − λ v‖ ≤ RESIDUAL_TOL · ‖A‖_F` for unit `v`.
pub const RESIDUAL_TOL: f64 = 1e-10;
/// A mode violates the constraint when `‖C v‖/‖v‖` exceeds this.
pub const CONSTRAINT_TOL: f64 = 1e-8;
/// Modes with `|Re λ|` below this cannot be classified.
pub const HYPERBOLICITY_TOL: f64 = 1e-9;
/// Eigenvalues closer than this (relative to `max(1, ‖A‖)`) are one cluster.
const CLUSTER_TOL: f64 = 1e-7;
/// Minimum singular value of a basis for it to count as independent.
const INDEPENDENCE_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SpectralError {
    #[error("matrix has non-finite entries")]
    NonFinite,
    #[error("QR iteration did not converge within {0} sweeps")]
    NoConvergence(usize),
    #[error("eigenvalue {0} has fewer independent eigenvectors than its multiplicity")]
    Defective(Complex64),
    #[error("mode with eigenvalue {0} is not hyperbolic")]
    AmbiguousMode(Complex64),
    #[error("no stable modes")]
    EmptySubspace,
    #[error("constraint matrix is rank deficient (singular values {0:?})")]
    RankDeficient([f64; 2]),
}

/// Eigenpairs sorted by (real part, imaginary part). Vectors have unit norm
/// and their pivot entry (first dominant component) is real and positive.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenStructure {
    pub values: [Complex64; 6],
    pub vectors: [CVec6; 6],
    pub residuals: [f64; 6],
    pivots: [usize; 6],
}

impl EigenStructure {
    /// Eigenvector `i` scaled so its pivot entry is one, e.g. `e₃ − 1.0477 e₆`.
    pub fn pivot_form(&self, i: usize) -> CVec6 {
        let v = self.vectors[i];
        v / v[self.pivots[i]]
    }

    pub fn pivot(&self, i: usize) -> usize {
        self.pivots[i]
    }

    pub fn len(&self) -> usize {
        6
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

pub fn eigen_decompose(a: &Mat6) -> Result<EigenStructure, SpectralError> {
    if !a.iter().all(|x| x.is_finite()) {
        return Err(SpectralError::NonFinite);
    }
    let norm = a.norm();
    let scale = norm.max(1.0);
    let schur = Schur::try_new(*a, f64::EPSILON, QR_SWEEPS * 6)
        .ok_or(SpectralError::NoConvergence(QR_SWEEPS))?;
    let raw = schur.complex_eigenvalues();
    let clusters = cluster(raw.as_slice(), CLUSTER_TOL * scale);

    let mut modes: Vec<(Complex64, CVec6, usize)> = Vec::with_capacity(6);
    let mut done = vec![false; clusters.len()];
    for (ci, (lambda, k)) in clusters.iter().enumerate() {
        if done[ci] {
            continue;
        }
        done[ci] = true;
        let basis = null_basis(a, *lambda, *k);
        if lambda.im != 0.0 {
            // The conjugate cluster gets the conjugate vectors.
            let partner = clusters
                .iter()
                .position(|(mu, m)| *m == *k && *mu == lambda.conj())
                .ok_or(SpectralError::Defective(*lambda))?;
            done[partner] = true;
            for (v, p) in &basis {
                modes.push((lambda.conj(), v.map(|z| z.conj()), *p));
            }
        }
        for (v, p) in basis {
            modes.push((*lambda, v, p));
        }
    }
    debug_assert_eq!(modes.len(), 6);
    modes.sort_by(|x, y| {
        x.0.re
            .total_cmp(&y.0.re)
            .then(x.0.im.total_cmp(&y.0.im))
            .then(x.2.cmp(&y.2))
    });

    let ac = a.map(Complex64::from);
    let mut values = [Complex64::default(); 6];
    let mut vectors = [CVec6::zeros(); 6];
    let mut residuals = [0.0; 6];
    let mut pivots = [0; 6];
    for (i, (lambda, v, p)) in modes.into_iter().enumerate() {
        let r = (ac * v - v * lambda).norm();
        if r > RESIDUAL_TOL * norm {
            return Err(SpectralError::Defective(lambda));
        }
        values[i] = lambda;
        vectors[i] = v;
        residuals[i] = r;
        pivots[i] = p;
    }
    Ok(EigenStructure { values, vectors, residuals, pivots })
}

/// Groups eigenvalues within `tol` of each other and replaces each group by
/// its mean; imaginary parts below `tol` are zeroed and conjugate groups are
/// made exact conjugates. Returns `(mean, multiplicity)`.
fn cluster(raw: &[Complex64], tol: f64) -> Vec<(Complex64, usize)> {
    let n = raw.len();
    let mut label = vec![usize::MAX; n];
    let mut groups: Vec<Vec<usize>> = Vec::new();
    for i in 0..n {
        if label[i] != usize::MAX {
            continue;
        }
        let g = groups.len();
        let mut members = vec![i];
        label[i] = g;
        let mut cursor = 0;
        while cursor < members.len() {
            let m = members[cursor];
            for j in 0..n {
                if label[j] == usize::MAX && (raw[j] - raw[m]).norm() <= tol {
                    label[j] = g;
                    members.push(j);
                }
            }
            cursor += 1;
        }
        groups.push(members);
    }
    let mut out: Vec<(Complex64, usize)> = groups
        .iter()
        .map(|g| {
            let mean = g.iter().map(|&i| raw[i]).sum::<Complex64>() / g.len() as f64;
            let im = if mean.im.abs() <= tol { 0.0 } else { mean.im };
            (Complex64::new(mean.re, im), g.len())
        })
        .collect();
    for i in 0..out.len() {
        if out[i].0.im <= 0.0 {
            continue;
        }
        if let Some(j) = (0..out.len()).find(|&j| out[j].0.im < 0.0 && (out[j].0 - out[i].0.conj()).norm() <= tol) {
            let re = 0.5 * (out[i].0.re + out[j].0.re);
            let im = 0.5 * (out[i].0.im - out[j].0.im);
            out[i].0 = Complex64::new(re, im);
            out[j].0 = Complex64::new(re, -im);
        }
    }
    out
}

/// `k` null vectors of `A − λI` in row-echelon form, each paired with its
/// pivot index. Real eigenvalues get real vectors.
fn null_basis(a: &Mat6, lambda: Complex64, k: usize) -> Vec<(CVec6, usize)> {
    let candidates: Vec<CVec6> = if lambda.im == 0.0 {
        let shifted = a - Mat6::identity() * lambda.re;
        let svd = shifted.svd(false, true);
        smallest_right_vectors(svd.singular_values.as_slice(), k)
            .into_iter()
            .map(|i| svd.v_t.as_ref().unwrap().row(i).transpose().map(Complex64::from))
            .collect()
    } else {
        let shifted: CMat6 = a.map(Complex64::from) - CMat6::identity() * lambda;
        let svd = shifted.svd(false, true);
        smallest_right_vectors(svd.singular_values.as_slice(), k)
            .into_iter()
            .map(|i| svd.v_t.as_ref().unwrap().row(i).adjoint())
            .collect()
    };
    echelon(candidates)
}

fn smallest_right_vectors(sv: &[f64], k: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..sv.len()).collect();
    idx.sort_by(|&i, &j| sv[i].total_cmp(&sv[j]));
    idx.truncate(k);
    idx
}

/// Reduced row-echelon form of the span of `vs`: pivot columns are chosen as
/// the lowest index carrying a non-negligible entry; each output vector has
/// one at its pivot and zeros at the others, then is scaled to unit norm.
fn echelon(vs: Vec<CVec6>) -> Vec<(CVec6, usize)> {
    let k = vs.len();
    let mut rows = vs;
    let scale = rows.iter().flat_map(|v| v.iter()).map(|z| z.norm()).fold(0.0, f64::max);
    let tol = 1e-6 * scale;
    let mut pivots = Vec::with_capacity(k);
    let mut col = 0;
    for r in 0..k {
        // lowest column with a usable entry in the remaining rows
        let (pc, pr) = loop {
            if col >= 6 {
                break (usize::MAX, usize::MAX);
            }
            let best = (r..k).max_by(|&x, &y| rows[x][col].norm().total_cmp(&rows[y][col].norm())).unwrap();
            if rows[best][col].norm() > tol {
                break (col, best);
            }
            col += 1;
        };
        if pc == usize::MAX {
            break;
        }
        rows.swap(r, pr);
        let p = rows[r][pc];
        rows[r] /= p;
        for other in 0..k {
            if other != r {
                let f = rows[other][pc];
                let pivot_row = rows[r];
                rows[other] -= pivot_row * f;
            }
        }
        pivots.push(pc);
        col += 1;
    }
    rows.into_iter()
        .zip(pivots)
        .map(|(mut v, p)| {
            v[p] = Complex64::new(1.0, 0.0);
            (v / Complex64::from(v.norm()), p)
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StabilityLabel {
    AsymptoticallyStable,
    /// All modes stable and oscillatory.
    StableFocus,
    Saddle,
    /// All retained modes unstable.
    Unstable,
    /// No mode survives the constraint filter.
    CenterDegenerate,
}

impl std::fmt::Display for StabilityLabel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            StabilityLabel::AsymptoticallyStable => "asymptotically-stable",
            StabilityLabel::StableFocus => "stable-focus",
            StabilityLabel::Saddle => "saddle",
            StabilityLabel::Unstable => "unstable",
            StabilityLabel::CenterDegenerate => "center-degenerate",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Classification {
    pub stable: usize,
    pub unstable: usize,
    pub label: StabilityLabel,
    /// Indices of the modes counted, after the constraint filter.
    pub retained: Vec<usize>,
}

fn satisfies(c: &Mat26, v: &CVec6) -> bool {
    let cc = c.map(Complex64::from);
    (cc * v).norm() <= CONSTRAINT_TOL * v.norm()
}

fn retained_modes(e: &EigenStructure, c: Option<&Mat26>) -> Vec<usize> {
    (0..6).filter(|&i| c.is_none_or(|c| satisfies(c, &e.vectors[i]))).collect()
}

/// Counts stable and unstable modes among those admissible under `c`.
pub fn classify_equilibrium(e: &EigenStructure, c: Option<&Mat26>) -> Result<Classification, SpectralError> {
    if let Some(c) = c {
        check_rank(c)?;
    }
    let retained = retained_modes(e, c);
    let mut stable = 0;
    let mut unstable = 0;
    for &i in &retained {
        let lambda = e.values[i];
        if lambda.re.abs() < HYPERBOLICITY_TOL {
            return Err(SpectralError::AmbiguousMode(lambda));
        }
        if lambda.re < 0.0 {
            stable += 1;
        } else {
            unstable += 1;
        }
    }
    let oscillatory = e.values.iter().all(|l| l.im.abs() > HYPERBOLICITY_TOL);
    let label = match (stable, unstable) {
        (0, 0) => StabilityLabel::CenterDegenerate,
        (_, 0) if oscillatory => StabilityLabel::StableFocus,
        (_, 0) => StabilityLabel::AsymptoticallyStable,
        (0, _) => StabilityLabel::Unstable,
        _ => StabilityLabel::Saddle,
    };
    Ok(Classification { stable, unstable, label, retained })
}

/// Real basis of a subspace with the eigenvalue attached to each vector.
#[derive(Debug, Clone, PartialEq)]
pub struct SubspaceBasis {
    pub vectors: Vec<Vec6>,
    pub eigenvalues: Vec<Complex64>,
}

impl SubspaceBasis {
    pub fn dim(&self) -> usize {
        self.vectors.len()
    }

    pub fn min_singular_value(&self) -> f64 {
        if self.vectors.is_empty() {
            return 0.0;
        }
        let cols: Vec<Vec6> = self.vectors.iter().map(|v| v / v.norm()).collect();
        let m = Mat6xN::from_columns(&cols);
        m.singular_values().min()
    }
}

/// Stable eigenspace in the `e_i + λ e_{i+3}` normalization. Complex pairs
/// contribute their real and imaginary parts.
pub fn stable_subspace(e: &EigenStructure, c: Option<&Mat26>) -> Result<SubspaceBasis, SpectralError> {
    let mut vectors = Vec::new();
    let mut eigenvalues = Vec::new();
    for i in retained_modes(e, c) {
        let lambda = e.values[i];
        if lambda.re > -HYPERBOLICITY_TOL {
            continue;
        }
        let v = e.pivot_form(i);
        if lambda.im == 0.0 {
            vectors.push(v.map(|z| z.re));
            eigenvalues.push(lambda);
        } else if lambda.im > 0.0 {
            vectors.push(v.map(|z| z.re));
            vectors.push(v.map(|z| z.im));
            eigenvalues.push(lambda);
            eigenvalues.push(lambda.conj());
        }
    }
    if vectors.is_empty() {
        return Err(SpectralError::EmptySubspace);
    }
    let basis = SubspaceBasis { vectors, eigenvalues };
    if basis.min_singular_value() <= INDEPENDENCE_TOL {
        return Err(SpectralError::Defective(basis.eigenvalues[0]));
    }
    Ok(basis)
}

fn check_rank(c: &Mat26) -> Result<(), SpectralError> {
    let sv = c.singular_values();
    let (hi, lo) = (sv.max(), sv.min());
    if !(lo > 1e-12 * hi.max(1e-300)) {
        return Err(SpectralError::RankDeficient([hi, lo]));
    }
    Ok(())
}

/// Orthonormal basis of `null(C)`, from Gram–Schmidt on the columns of the
/// projector `I − Cᵀ(CCᵀ)⁻¹C` in index order.
pub fn nullspace_basis(c: &Mat26) -> Result<SubspaceBasis, SpectralError> {
    check_rank(c)?;
    let cct = c * c.transpose();
    let inv = cct.try_inverse().ok_or(SpectralError::RankDeficient([0.0, 0.0]))?;
    let proj = Mat6::identity() - c.transpose() * inv * c;
    let mut basis: Vec<Vec6> = Vec::with_capacity(4);
    for k in 0..6 {
        let mut v = proj.column(k).into_owned();
        // two passes keep the result orthogonal to roundoff
        for _ in 0..2 {
            for b in &basis {
                v -= b * b.dot(&v);
            }
            v = proj * v;
        }
        let n = v.norm();
        if n > 1e-8 {
            basis.push(v / n);
        }
        if basis.len() == 4 {
            break;
        }
    }
    Ok(SubspaceBasis { vectors: basis, eigenvalues: Vec::new() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::{exp_rot, Rotation, TangentStateS2, TangentStateSO3, UnitVector, Vec3};
    use crate::linearization::{a_matrix_s2, a_matrix_so3, c_matrix_s2};
    use crate::models::{S2Params, SO3Params};
    use std::f64::consts::PI;

    fn unit(i: usize) -> Vec6 {
        let mut v = Vec6::zeros();
        v[i] = 1.0;
        v
    }

    /// Distance from `v` to `span(basis)` relative to `‖v‖`.
    fn off_span(v: &Vec6, basis: &[Vec6]) -> f64 {
        let m = Mat6xN::from_columns(basis);
        let q = m.qr().q();
        (v - &q * (q.transpose() * v)).norm() / v.norm()
    }

    fn so3_eq(i: usize) -> TangentStateSO3 {
        if i == 0 {
            return TangentStateSO3::at_rest(Rotation::identity());
        }
        let mut axis = Vec3::zeros();
        axis[i - 1] = PI;
        TangentStateSO3::at_rest(exp_rot(&axis))
    }

    #[test]
    fn diagonal_matrix() {
        let a = Mat6::from_diagonal(&Vec6::new(1.0, 2.0, 3.0, 4.0, 5.0, 6.0));
        let e = eigen_decompose(&a).unwrap();
        for i in 0..6 {
            assert!((e.values[i] - Complex64::from(i as f64 + 1.0)).norm() < 1e-14);
            assert!((e.vectors[i].map(|z| z.re) - unit(i)).norm() < 1e-14);
        }
    }

    #[test]
    fn hanging_spectrum() {
        let p = S2Params::default();
        let lin = a_matrix_s2(&TangentStateS2::at_rest(UnitVector::e3()), &p);
        let e = eigen_decompose(&lin.a).unwrap();
        let s3 = 3f64.sqrt() / 2.0;
        let expected = [
            Complex64::new(-1.0, 0.0),
            Complex64::new(-0.5, -s3),
            Complex64::new(-0.5, -s3),
            Complex64::new(-0.5, s3),
            Complex64::new(-0.5, s3),
            Complex64::new(0.0, 0.0),
        ];
        for (l, x) in e.values.iter().zip(expected) {
            assert!((l - x).norm() < 1e-10, "{l} vs {x}");
        }
        // e1 + λ e4 and e2 + λ e5 for the upper pair
        let v = e.pivot_form(3);
        assert!((v[0] - Complex64::from(1.0)).norm() < 1e-12);
        assert!((v[3] - expected[3]).norm() < 1e-12);
        let v = e.pivot_form(4);
        assert!((v[1] - Complex64::from(1.0)).norm() < 1e-12);
        assert!((v[4] - expected[4]).norm() < 1e-12);

        let c = lin.c.unwrap();
        let cls = classify_equilibrium(&e, Some(&c)).unwrap();
        assert_eq!((cls.stable, cls.unstable), (4, 0));
        assert_eq!(cls.label, StabilityLabel::AsymptoticallyStable);
        assert_eq!(cls.retained, vec![1, 2, 3, 4]);
    }

    #[test]
    fn inverted_spectrum_and_stable_space() {
        let p = S2Params::default();
        let lin = a_matrix_s2(&TangentStateS2::at_rest(-UnitVector::e3()), &p);
        let e = eigen_decompose(&lin.a).unwrap();
        let phi = (5f64.sqrt() + 1.0) / 2.0;
        let expected = [-phi, -phi, -1.0, 0.0, phi - 1.0, phi - 1.0];
        for (l, x) in e.values.iter().zip(expected) {
            assert!((l - Complex64::from(x)).norm() < 1e-10);
        }
        let c = lin.c.unwrap();
        let cls = classify_equilibrium(&e, Some(&c)).unwrap();
        assert_eq!((cls.stable, cls.unstable, cls.label), (2, 2, StabilityLabel::Saddle));

        let s = stable_subspace(&e, Some(&c)).unwrap();
        assert_eq!(s.dim(), 2);
        let v1 = unit(0) - phi * unit(3);
        let v2 = unit(1) - phi * unit(4);
        assert!((s.vectors[0] - v1).norm() < 1e-12);
        assert!((s.vectors[1] - v2).norm() < 1e-12);
        for v in &s.vectors {
            assert!((c * v).norm() < 1e-12);
        }
        // Without the constraint the spurious λ = −1 mode e6 joins in.
        let loose = stable_subspace(&e, None).unwrap();
        assert_eq!(loose.dim(), 3);
    }

    #[test]
    fn so3_tables() {
        let p = SO3Params::default();
        let tables: [(&[f64], (usize, usize)); 3] = [
            (&[-0.7813, -0.5854, -1.0477, 0.4480, 0.0854, 0.0477], (3, 3)),
            (&[-0.3775, -1.0, -0.9472, -0.0528, 0.0442, 0.5], (4, 2)),
            (&[-0.0613, -0.2721, -0.1382, -0.3618, -1.5954, 0.5954], (5, 1)),
        ];
        for (i, (table, counts)) in tables.iter().enumerate() {
            let lin = a_matrix_so3(&so3_eq(i + 1), &p);
            let e = eigen_decompose(&lin.a).unwrap();
            let mut printed: Vec<f64> = table.to_vec();
            printed.sort_by(f64::total_cmp);
            for (l, x) in e.values.iter().zip(&printed) {
                assert!(l.im == 0.0 && (l.re - x).abs() < 5e-4, "{l} vs {x}");
            }
            let cls = classify_equilibrium(&e, None).unwrap();
            assert_eq!((cls.stable, cls.unstable), *counts);
            assert_eq!(cls.label, StabilityLabel::Saddle);
        }
        let e = eigen_decompose(&a_matrix_so3(&so3_eq(0), &p).a).unwrap();
        let cls = classify_equilibrium(&e, None).unwrap();
        assert_eq!((cls.stable, cls.label), (6, StabilityLabel::StableFocus));
    }

    #[test]
    fn decoupled_eigenvector_form() {
        let p = SO3Params::default();
        let e = eigen_decompose(&a_matrix_so3(&so3_eq(1), &p).a).unwrap();
        for i in 0..6 {
            let v = e.pivot_form(i);
            let piv = e.pivot(i);
            assert!(piv < 3);
            let lambda = e.values[i];
            for k in 0..6 {
                let expected = if k == piv {
                    Complex64::from(1.0)
                } else if k == piv + 3 {
                    lambda
                } else {
                    Complex64::from(0.0)
                };
                assert!((v[k] - expected).norm() < 1e-12);
            }
        }
        // the ê2 table's λ = 0.5 mode is e2 + 0.5 e5
        let e = eigen_decompose(&a_matrix_so3(&so3_eq(2), &p).a).unwrap();
        let v = e.pivot_form(5);
        assert!((e.values[5].re - 0.5).abs() < 1e-12);
        assert!((v[1].re - 1.0).abs() < 1e-12 && (v[4].re - 0.5).abs() < 1e-12);
        // the ê3 table's λ = 0.5954 mode is e3 + 0.5954 e6
        let e = eigen_decompose(&a_matrix_so3(&so3_eq(3), &p).a).unwrap();
        assert_eq!(e.pivot(5), 2);
    }

    #[test]
    fn so3_e3_stable_space_is_five_dimensional() {
        let p = SO3Params::default();
        let e = eigen_decompose(&a_matrix_so3(&so3_eq(3), &p).a).unwrap();
        let s = stable_subspace(&e, None).unwrap();
        assert_eq!(s.dim(), 5);
        let mut got: Vec<f64> = s.eigenvalues.iter().map(|l| l.re).collect();
        got.sort_by(f64::total_cmp);
        let mut want = vec![-0.0613, -0.2721, -0.1382, -0.3618, -1.5954];
        want.sort_by(f64::total_cmp);
        for (g, w) in got.iter().zip(&want) {
            assert!((g - w).abs() < 5e-4);
        }
    }

    #[test]
    fn diagonal_stable_space() {
        let a = Mat6::from_diagonal(&Vec6::new(-1.0, -2.0, 3.0, 4.0, 5.0, 6.0));
        let e = eigen_decompose(&a).unwrap();
        let s = stable_subspace(&e, None).unwrap();
        assert_eq!(s.dim(), 2);
        assert!(off_span(&unit(0), &s.vectors) < 1e-14);
        assert!(off_span(&unit(1), &s.vectors) < 1e-14);
        let pos = Mat6::from_diagonal(&Vec6::new(1.0, 2.0, 3.0, 4.0, 5.0, 6.0));
        assert_eq!(
            stable_subspace(&eigen_decompose(&pos).unwrap(), None),
            Err(SpectralError::EmptySubspace)
        );
    }

    #[test]
    fn nullspace_examples() {
        let c = c_matrix_s2(&TangentStateS2::at_rest(UnitVector::e3()));
        let n = nullspace_basis(&c).unwrap();
        assert_eq!(n.vectors, vec![unit(0), unit(1), unit(3), unit(4)]);

        let c = c_matrix_s2(&TangentStateS2::at_rest(UnitVector::e1()));
        let n = nullspace_basis(&c).unwrap();
        for k in [1, 2, 4, 5] {
            assert!(off_span(&unit(k), &n.vectors) < 1e-14);
        }

        let s = TangentStateS2::new(UnitVector::e3(), 0.2 * Vec3::x()).unwrap();
        let c = c_matrix_s2(&s);
        let n = nullspace_basis(&c).unwrap();
        assert_eq!(n.dim(), 4);
        for (i, v) in n.vectors.iter().enumerate() {
            assert!((c * v).norm() <= 1e-12);
            for w in &n.vectors[..i] {
                assert!(v.dot(w).abs() < 1e-14);
            }
        }

        assert!(matches!(nullspace_basis(&Mat26::zeros()), Err(SpectralError::RankDeficient(_))));
    }

    #[test]
    fn ambiguous_mode_is_reported() {
        let p = S2Params::default();
        let lin = a_matrix_s2(&TangentStateS2::at_rest(UnitVector::e3()), &p);
        let e = eigen_decompose(&lin.a).unwrap();
        // Without the constraint the λ = 0 mode is counted.
        assert!(matches!(classify_equilibrium(&e, None), Err(SpectralError::AmbiguousMode(_))));
    }

    #[test]
    fn rejects_non_finite() {
        let mut a = Mat6::identity();
        a[(2, 3)] = f64::NAN;
        assert_eq!(eigen_decompose(&a), Err(SpectralError::NonFinite));
    }
}
