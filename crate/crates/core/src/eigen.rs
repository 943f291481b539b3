//! Hermitian diagonalization, the closed-form electronic cubic and the
//! second-order series for the dressed-state spectrum.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use num_complex::Complex64;

use crate::dressed::StateClass;
use crate::error::EigenError;
use crate::spin::{
    hermiticity_defect, spin1_operators, transverse_electronic_hamiltonian, CMatrix, CVector, FieldConfiguration,
    PhysicalConstants, ScaledFields, SpinOperatorSet, ZERO,
};

const MAX_SWEEPS: usize = 100;

/// Per-state metadata attached to an [`EigenSolution`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StateLabel {
    /// ⟨S_z⟩ (electron), for 3- and 9-dimensional problems.
    pub sz: Option<f64>,
    /// ⟨I_z⟩, for 9-dimensional problems.
    pub iz: Option<f64>,
    pub class: Option<StateClass>,
}

/// Eigenvalues in ascending order with matching eigenvectors stored as the
/// columns of `vectors`.
#[derive(Debug, Clone)]
pub struct EigenSolution {
    pub values: Vec<f64>,
    pub vectors: CMatrix,
    pub labels: Vec<StateLabel>,
}

impl EigenSolution {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn vector(&self, k: usize) -> CVector {
        self.vectors.column(k).into_owned()
    }
}

/// Raw cyclic Jacobi. Returns unsorted eigenvalues and the accumulated
/// unitary.
fn jacobi(h: &CMatrix) -> (Vec<f64>, CMatrix) {
    let n = h.nrows();
    let mut a = h.clone();
    let mut v = CMatrix::identity(n, n);
    let scale = h.norm().max(f64::MIN_POSITIVE);

    for _ in 0..MAX_SWEEPS {
        let mut off = 0.0;
        for p in 0..n {
            for q in (p + 1)..n {
                off += a[(p, q)].norm_sqr();
            }
        }
        if off.sqrt() <= 1e-15 * scale {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[(p, q)];
                let mag = apq.norm();
                if mag <= 1e-300 {
                    continue;
                }
                let phase = apq / mag; // e^{iφ}
                let app = a[(p, p)].re;
                let aqq = a[(q, q)].re;
                let tau = (aqq - app) / (2.0 * mag);
                let t = if tau >= 0.0 {
                    1.0 / (tau + (1.0 + tau * tau).sqrt())
                } else {
                    -1.0 / (-tau + (1.0 + tau * tau).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                let em = phase.conj(); // e^{-iφ}

                // A <- A U
                for k in 0..n {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = akp * c - akq * em * s;
                    a[(k, q)] = akp * s + akq * em * c;
                }
                // A <- U† A
                for k in 0..n {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = apk * c - aqk * phase * s;
                    a[(q, k)] = apk * s + aqk * phase * c;
                }
                a[(p, q)] = ZERO;
                a[(q, p)] = ZERO;
                a[(p, p)] = Complex64::new(a[(p, p)].re, 0.0);
                a[(q, q)] = Complex64::new(a[(q, q)].re, 0.0);

                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = vkp * c - vkq * em * s;
                    v[(k, q)] = vkp * s + vkq * em * c;
                }
            }
        }
    }
    ((0..n).map(|k| a[(k, k)].re).collect(), v)
}

fn expectation(op: &CMatrix, v: &CVector) -> f64 {
    v.dotc(&(op * v)).re
}

/// Multiply by a global phase so the first component with modulus above
/// 1e-8 is real and positive.
pub fn fix_phase(v: &mut CVector) {
    if let Some(z) = v.iter().find(|z| z.norm() > 1e-8).copied() {
        let ph = z.conj() / z.norm();
        for x in v.iter_mut() {
            *x *= ph;
        }
    }
}

/// Operator used to split degenerate clusters deterministically.
fn tiebreak_operator(n: usize, ops: &SpinOperatorSet) -> Option<CMatrix> {
    match n {
        3 => Some(ops.sz.clone()),
        9 => Some(ops.sz_lifted() + ops.iz_lifted() * Complex64::new(0.1, 0.0)),
        _ => None,
    }
}

/// Orthonormal basis of span(cols) built by Gram–Schmidt over unit vectors.
fn canonical_basis(cols: &[CVector]) -> Vec<CVector> {
    let n = cols[0].len();
    let m = cols.len();
    let mut out: Vec<CVector> = Vec::with_capacity(m);
    for e in 0..n {
        if out.len() == m {
            break;
        }
        // projection of e onto the cluster
        let mut w = CVector::zeros(n);
        for c in cols {
            w += c * c[e].conj();
        }
        for u in &out {
            let ov = u.dotc(&w);
            w -= u * ov;
        }
        let nrm = w.norm();
        if nrm > 1e-6 {
            out.push(w / Complex64::new(nrm, 0.0));
        }
    }
    out
}

/// Diagonalize a Hermitian matrix (2 ≤ n ≤ 16).
///
/// Eigenvalues are ascending. Within a degenerate cluster the basis is fixed
/// by diagonalizing `S_z + 0.1 I_z` (n = 9) or `S_z` (n = 3) inside the
/// cluster, ordered by descending ⟨S_z⟩ then ⟨I_z⟩; other sizes use
/// Gram–Schmidt over the unit vectors. Each vector's global phase makes its
/// first non-negligible component real positive.
pub fn diagonalize_hermitian(h: &CMatrix) -> Result<EigenSolution, EigenError> {
    let (rows, cols) = h.shape();
    if rows != cols || !(2..=16).contains(&rows) {
        return Err(EigenError::BadDimension { rows, cols });
    }
    if h.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(EigenError::NonFinite);
    }
    let defect = hermiticity_defect(h);
    if defect > 1e-10 {
        return Err(EigenError::NonHermitianInput(defect));
    }
    let n = rows;
    let hs = (h + h.adjoint()) * Complex64::new(0.5, 0.0);
    let (vals, v) = jacobi(&hs);

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| vals[i].total_cmp(&vals[j]));

    let ops = spin1_operators();
    let tiebreak = tiebreak_operator(n, &ops);
    let tol = 1e-10 * hs.norm().max(1.0);

    let mut values = Vec::with_capacity(n);
    let mut vectors: Vec<CVector> = Vec::with_capacity(n);
    let mut start = 0;
    while start < n {
        let mut end = start + 1;
        while end < n && vals[order[end]] - vals[order[end - 1]] <= tol {
            end += 1;
        }
        let cluster: Vec<CVector> = order[start..end].iter().map(|&k| v.column(k).into_owned()).collect();
        let mean = order[start..end].iter().map(|&k| vals[k]).sum::<f64>() / (end - start) as f64;
        let basis = if cluster.len() == 1 {
            cluster
        } else {
            let basis = canonical_basis(&cluster);
            match &tiebreak {
                Some(op) => {
                    let m = basis.len();
                    let mut proj = CMatrix::zeros(m, m);
                    for i in 0..m {
                        let ov = op * &basis[i];
                        for j in 0..m {
                            proj[(j, i)] = basis[j].dotc(&ov);
                        }
                    }
                    let proj = (&proj + proj.adjoint()) * Complex64::new(0.5, 0.0);
                    let (pv, pu) = jacobi(&proj);
                    let mut idx: Vec<usize> = (0..m).collect();
                    // descending S_z + 0.1 I_z
                    idx.sort_by(|&i, &j| pv[j].total_cmp(&pv[i]));
                    idx.iter()
                        .map(|&k| {
                            let mut w = CVector::zeros(n);
                            for (j, b) in basis.iter().enumerate() {
                                w += b * pu[(j, k)];
                            }
                            w
                        })
                        .collect()
                }
                None => basis,
            }
        };
        for (k, mut b) in basis.into_iter().enumerate() {
            fix_phase(&mut b);
            values.push(if end - start == 1 { vals[order[start + k]] } else { mean });
            vectors.push(b);
        }
        start = end;
    }

    let labels = vectors
        .iter()
        .map(|vk| match n {
            3 => {
                let sz = expectation(&ops.sz, vk);
                StateLabel {
                    sz: Some(sz),
                    iz: None,
                    class: Some(StateClass::from_sz(sz)),
                }
            }
            9 => {
                let sz = expectation(&ops.sz_lifted(), vk);
                StateLabel {
                    sz: Some(sz),
                    iz: Some(expectation(&ops.iz_lifted(), vk)),
                    class: Some(StateClass::from_sz(sz)),
                }
            }
            _ => StateLabel {
                sz: None,
                iz: None,
                class: None,
            },
        })
        .collect();

    Ok(EigenSolution {
        values,
        vectors: CMatrix::from_columns(&vectors),
        labels,
    })
}

fn cubic_value(a: f64, b: f64, c: f64, x: f64) -> (f64, f64) {
    let f = ((x + a) * x + b) * x + c;
    let df = (3.0 * x + 2.0 * a) * x + b;
    (f, df)
}

fn newton_polish(a: f64, b: f64, c: f64, mut x: f64) -> f64 {
    for _ in 0..8 {
        let (f, df) = cubic_value(a, b, c, x);
        if df == 0.0 || f == 0.0 {
            break;
        }
        let nx = x - f / df;
        if cubic_value(a, b, c, nx).0.abs() >= f.abs() {
            break;
        }
        x = nx;
    }
    x
}

/// Real roots of the Hermitian 3×3 characteristic polynomial, ascending.
fn hermitian3_roots(h: &CMatrix) -> [f64; 3] {
    // shift by the mean of the outer diagonal entries to keep coefficients small
    let shift = 0.5 * (h[(0, 0)].re + h[(2, 2)].re);
    let m00 = h[(0, 0)].re - shift;
    let m11 = h[(1, 1)].re - shift;
    let m22 = h[(2, 2)].re - shift;
    let m01 = h[(0, 1)];
    let m12 = h[(1, 2)];
    let m02 = h[(0, 2)];

    let tr = m00 + m11 + m22;
    let minors = m00 * m11 - m01.norm_sqr() + m00 * m22 - m02.norm_sqr() + m11 * m22 - m12.norm_sqr();
    let det = m00 * m11 * m22 + 2.0 * (m01 * m12 * m02.conj()).re
        - m00 * m12.norm_sqr()
        - m11 * m02.norm_sqr()
        - m22 * m01.norm_sqr();
    // μ³ + aμ² + bμ + c
    let a = -tr;
    let b = minors;
    let c = -det;

    let p = b - a * a / 3.0;
    let q = 2.0 * a * a * a / 27.0 - a * b / 3.0 + c;
    let mut roots = if p.abs() < 1e-300 {
        let t = (-q).cbrt();
        [t - a / 3.0; 3]
    } else {
        let r = 2.0 * (-p / 3.0).max(0.0).sqrt();
        let arg = if r == 0.0 {
            0.0
        } else {
            (3.0 * q / (p * r)).clamp(-1.0, 1.0)
        };
        let phi = arg.acos() / 3.0;
        let mut out = [0.0; 3];
        for (k, o) in out.iter_mut().enumerate() {
            *o = r * (phi - 2.0 * PI * k as f64 / 3.0).cos() - a / 3.0;
        }
        out
    };
    roots.sort_by(f64::total_cmp);

    // polish the most isolated root, then deflate for the remaining pair
    let gaps = [
        roots[1] - roots[0],
        (roots[1] - roots[0]).min(roots[2] - roots[1]),
        roots[2] - roots[1],
    ];
    let iso = if gaps[0] >= gaps[2] { 0 } else { 2 };
    let r0 = newton_polish(a, b, c, roots[iso]);
    let s1 = a + r0;
    let s0 = if r0.abs() > 1e-12 * (1.0 + a.abs()) {
        -c / r0
    } else {
        b + r0 * s1
    };
    // μ² + s1 μ + s0
    let disc = (s1 * s1 - 4.0 * s0).max(0.0);
    let qq = -0.5 * (s1 + s1.signum() * disc.sqrt());
    let (x1, x2) = if qq == 0.0 { (0.0, 0.0) } else { (qq, s0 / qq) };
    let x1 = newton_polish(a, b, c, x1);
    let x2 = newton_polish(a, b, c, x2);
    let mut out = [r0 + shift, x1 + shift, x2 + shift];
    out.sort_by(f64::total_cmp);
    out
}

/// Closed-form eigenvalues of the transverse electronic Hamiltonian
/// (the axial field components are ignored), ascending.
pub fn cubic_eigenvalues_exact(c: &PhysicalConstants, f: &FieldConfiguration) -> [f64; 3] {
    hermitian3_roots(&transverse_electronic_hamiltonian(c, f))
}

/// Dimensionless inputs of the series expansion.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PerturbationParams {
    /// 𝓑_⊥ / D.
    pub zeta: f64,
    /// ℰ D / 𝓑_⊥² (infinite when 𝓑_⊥ = 0).
    pub r: f64,
    /// ℰ = d_⊥ Π_⊥, MHz.
    pub e_script: f64,
    /// 𝓑_⊥ = γ_e B_⊥, MHz.
    pub b_script_perp: f64,
    /// 𝓑_∥ = γ_e B_∥, MHz.
    pub b_script_par: f64,
    pub d_gs: f64,
}

impl PerturbationParams {
    pub fn from_fields(c: &PhysicalConstants, f: &FieldConfiguration) -> Self {
        let s = ScaledFields::new(c, f);
        let zeta = s.b_perp / c.d_gs;
        let r = if s.b_perp > 0.0 {
            s.e_perp * c.d_gs / (s.b_perp * s.b_perp)
        } else {
            f64::INFINITY
        };
        Self {
            zeta,
            r,
            e_script: s.e_perp,
            b_script_perp: s.b_perp,
            b_script_par: s.b_par,
            d_gs: c.d_gs,
        }
    }

    pub fn from_zeta_r(zeta: f64, r: f64, d_gs: f64, b_script_par: f64) -> Self {
        Self {
            zeta,
            r,
            e_script: r * zeta * zeta * d_gs,
            b_script_perp: zeta * d_gs,
            b_script_par,
            d_gs,
        }
    }

    fn check(&self) -> Result<(), EigenError> {
        if !(self.zeta >= 0.0 && self.zeta < 0.2) {
            return Err(EigenError::SeriesOutOfRange(self.zeta));
        }
        Ok(())
    }

    /// (𝓑²/D) e^{2iφ_B} − 2ℰ e^{−iφ_Π}; its modulus is E_gap and half its
    /// argument is θ.
    fn gap_phasor(&self, phi_b: f64, phi_pi: f64) -> Complex64 {
        let b2d = self.b_script_perp * self.b_script_perp / self.d_gs;
        Complex64::from_polar(b2d, 2.0 * phi_b) - Complex64::from_polar(2.0 * self.e_script, -phi_pi)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PerturbativeSpectrum {
    pub e0: f64,
    pub e_minus: f64,
    pub e_plus: f64,
    pub e_gap: f64,
    /// Rotation angle in (−π/2, π/2].
    pub theta: f64,
}

/// Second-order energies and the dressed-pair rotation angle.
pub fn perturbative_spectrum(
    p: &PerturbationParams,
    phi_b: f64,
    phi_pi: f64,
) -> Result<PerturbativeSpectrum, EigenError> {
    p.check()?;
    let d = p.d_gs;
    let b2d = p.b_script_perp * p.b_script_perp / d;
    let ph = p.gap_phasor(phi_b, phi_pi);
    let e_gap = 2.0
        * ((0.5 * b2d).powi(2) + p.e_script.powi(2) - p.e_script * b2d * (2.0 * phi_b + phi_pi).cos())
            .max(0.0)
            .sqrt();
    let theta = 0.5 * ph.arg();
    let mid = d + 0.5 * b2d;
    Ok(PerturbativeSpectrum {
        e0: -b2d,
        e_minus: mid - 0.5 * e_gap,
        e_plus: mid + 0.5 * e_gap,
        e_gap,
        theta,
    })
}

/// `|−⟩_θ = (e^{−iθ}, 0, −e^{iθ})/√2`.
pub fn dressed_minus(theta: f64) -> CVector {
    CVector::from_row_slice(&[
        Complex64::from_polar(FRAC_1_SQRT_2, -theta),
        ZERO,
        -Complex64::from_polar(FRAC_1_SQRT_2, theta),
    ])
}

/// `|+⟩_θ = (e^{−iθ}, 0, e^{iθ})/√2`.
pub fn dressed_plus(theta: f64) -> CVector {
    CVector::from_row_slice(&[
        Complex64::from_polar(FRAC_1_SQRT_2, -theta),
        ZERO,
        Complex64::from_polar(FRAC_1_SQRT_2, theta),
    ])
}

fn normalized(mut v: CVector) -> CVector {
    let n = v.norm();
    v /= Complex64::new(n, 0.0);
    fix_phase(&mut v);
    v
}

/// First-order eigenvectors `[|0⟩, |1⟩, |2⟩]`, normalized and phase fixed.
///
/// |1⟩ and |2⟩ are the rotated dressed states with an O(ζ) admixture of
/// `|S_z=0⟩`; |0⟩ picks up the opposite admixture of the dressed pair.
pub fn perturbative_eigenvectors(p: &PerturbationParams, phi_b: f64, phi_pi: f64) -> Result<[CVector; 3], EigenError> {
    let spec = perturbative_spectrum(p, phi_b, phi_pi)?;
    let theta = spec.theta;
    let k = p.zeta;
    let cs = (phi_b - theta).cos();
    let sn = (phi_b - theta).sin();
    let minus = dressed_minus(theta);
    let plus = dressed_plus(theta);
    let mut zero = CVector::zeros(3);
    zero[1] = Complex64::new(1.0, 0.0);
    let i = Complex64::new(0.0, 1.0);

    let v1 = &minus + &zero * (i * k * sn);
    let v2 = &plus + &zero * Complex64::new(k * cs, 0.0);
    let v0 = &zero - &plus * Complex64::new(k * cs, 0.0) + &minus * (i * k * sn);
    Ok([normalized(v0), normalized(v1), normalized(v2)])
}
