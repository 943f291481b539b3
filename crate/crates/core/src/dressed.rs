//! Dressed and partially-dressed states of the |±1⟩ pair under an axial
//! field, state classification, trace distances and branch identification
//! in the full electron–nuclear spectrum.

use num_complex::Complex64;

use crate::eigen::{diagonalize_hermitian, dressed_minus, perturbative_spectrum, EigenSolution, PerturbationParams};
use crate::error::{DressedError, EigenError};
use crate::spin::{
    full_hamiltonian, spin1_operators, CMatrix, CVector, FieldConfiguration, PhysicalConstants, ScaledFields, ZERO,
};

/// |⟨S_z⟩| below this is called dressed.
pub const DRESSED_THRESHOLD: f64 = 0.05;
/// |⟨S_z⟩| above this is called strong-axial.
pub const STRONG_AXIAL_THRESHOLD: f64 = 0.95;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum StateClass {
    Dressed,
    PartiallyDressed,
    StrongAxial,
}

impl StateClass {
    pub fn from_sz(sz: f64) -> Self {
        let a = sz.abs();
        if a < DRESSED_THRESHOLD {
            StateClass::Dressed
        } else if a > STRONG_AXIAL_THRESHOLD {
            StateClass::StrongAxial
        } else {
            StateClass::PartiallyDressed
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            StateClass::Dressed => "dressed",
            StateClass::PartiallyDressed => "partially-dressed",
            StateClass::StrongAxial => "strong-axial",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Classification {
    pub class: StateClass,
    /// |⟨S_z⟩|.
    pub score: f64,
}

/// Two-level model of the |±1⟩ pair with an axial field.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DressedPairModel {
    pub theta: f64,
    pub e_gap: f64,
    /// 𝓑_∥ = γ_e B_∥, MHz.
    pub b_script_par: f64,
    /// Mixing angle in (0, π), tan γ = (E_gap/2)/𝓑_∥.
    pub gamma: f64,
    /// D + 𝓑_⊥²/2D.
    pub e_m: f64,
}

impl DressedPairModel {
    pub fn new(theta: f64, e_gap: f64, b_script_par: f64, e_m: f64) -> Self {
        Self {
            theta,
            e_gap,
            b_script_par,
            gamma: (0.5 * e_gap).atan2(b_script_par),
            e_m,
        }
    }

    /// Model for the given fields, with θ and E_gap from the series
    /// expansion and an optional extra axial shift (e.g. a hyperfine term).
    pub fn from_fields(c: &PhysicalConstants, f: &FieldConfiguration, extra_axial: f64) -> Result<Self, EigenError> {
        let p = PerturbationParams::from_fields(c, f);
        let s = perturbative_spectrum(&p, f.phi_b(), f.phi_pi())?;
        let e_m = c.d_gs + 0.5 * p.b_script_perp * p.b_script_perp / c.d_gs;
        Ok(Self::new(s.theta, s.e_gap, p.b_script_par + extra_axial, e_m))
    }

    /// 2×2 Hamiltonian on (|+1⟩, |−1⟩).
    pub fn reduced_hamiltonian(&self) -> CMatrix {
        let w = Complex64::from_polar(0.5 * self.e_gap, -2.0 * self.theta);
        CMatrix::from_row_slice(
            2,
            2,
            &[
                Complex64::new(self.e_m + self.b_script_par, 0.0),
                w,
                w.conj(),
                Complex64::new(self.e_m - self.b_script_par, 0.0),
            ],
        )
    }
}

/// The two eigenstates of the pair model as 3-component electronic vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct PartiallyDressedPair {
    pub minus: CVector,
    pub plus: CVector,
    pub e_minus: f64,
    pub e_plus: f64,
}

pub fn partially_dressed_basis(m: &DressedPairModel) -> PartiallyDressedPair {
    let (s, c) = (0.5 * m.gamma).sin_cos();
    let e = Complex64::from_polar(1.0, -m.theta);
    let minus = CVector::from_row_slice(&[e * s, ZERO, -e.conj() * c]);
    let plus = CVector::from_row_slice(&[e * c, ZERO, e.conj() * s]);
    let half = (0.25 * m.e_gap * m.e_gap + m.b_script_par * m.b_script_par).sqrt();
    PartiallyDressedPair {
        minus,
        plus,
        e_minus: m.e_m - half,
        e_plus: m.e_m + half,
    }
}

fn check_state(v: &CVector) -> Result<(), DressedError> {
    if v.len() != 3 && v.len() != 9 {
        return Err(DressedError::BadLength(v.len()));
    }
    let n = v.norm();
    if (n - 1.0).abs() > 1e-8 {
        return Err(DressedError::UnnormalizedInput(n));
    }
    Ok(())
}

/// ⟨v|S_z|v⟩ for a 3-component electronic or 9-component joint state.
pub fn sz_expectation(v: &CVector) -> Result<f64, DressedError> {
    check_state(v)?;
    let w = |k: usize| -> f64 {
        if v.len() == 3 {
            v[k].norm_sqr()
        } else {
            (0..3).map(|j| v[3 * k + j].norm_sqr()).sum()
        }
    };
    Ok(w(0) - w(2))
}

pub fn classify_state(v: &CVector) -> Result<Classification, DressedError> {
    let sz = sz_expectation(v)?;
    Ok(Classification {
        class: StateClass::from_sz(sz),
        score: sz.abs(),
    })
}

/// |v⟩⟨v|.
pub fn density_matrix(v: &CVector) -> CMatrix {
    v * v.adjoint()
}

fn check_density(rho: &CMatrix, name: &str) -> Result<(), DressedError> {
    let bad = |m: String| DressedError::InvalidDensityMatrix(format!("{name}: {m}"));
    if !rho.is_square() {
        return Err(bad("not square".into()));
    }
    let herm = (rho - rho.adjoint()).iter().map(|z| z.norm()).fold(0.0, f64::max);
    if herm > 1e-9 {
        return Err(bad(format!("not Hermitian ({herm:.2e})")));
    }
    let tr = rho.trace();
    if (tr.re - 1.0).abs() > 1e-9 || tr.im.abs() > 1e-9 {
        return Err(bad(format!("trace {tr}")));
    }
    let vals = diagonalize_hermitian(rho)?.values;
    if vals[0] < -1e-9 {
        return Err(bad(format!("negative eigenvalue {}", vals[0])));
    }
    Ok(())
}

/// ½ Tr|ρ − σ|.
pub fn trace_distance(rho: &CMatrix, sigma: &CMatrix) -> Result<f64, DressedError> {
    if rho.shape() != sigma.shape() {
        return Err(DressedError::InvalidDensityMatrix("shape mismatch".into()));
    }
    check_density(rho, "rho")?;
    check_density(sigma, "sigma")?;
    let diff = rho - sigma;
    let vals = diagonalize_hermitian(&diff)?.values;
    Ok((0.5 * vals.iter().map(|x| x.abs()).sum::<f64>()).min(1.0))
}

/// Energy scale 𝓑_∥²𝓑_⊥²/D³ of the mixing neglected by the pair model.
pub fn mixing_bound(c: &PhysicalConstants, f: &FieldConfiguration) -> f64 {
    let s = ScaledFields::new(c, f);
    s.b_par * s.b_par * s.b_perp * s.b_perp / c.d_gs.powi(3)
}

/// Nuclear projections in basis order.
pub const IZ_VALUES: [i8; 3] = [1, 0, -1];

fn iz_index(iz: i8) -> usize {
    match iz {
        1 => 0,
        0 => 1,
        -1 => 2,
        _ => panic!("I_z must be -1, 0 or +1"),
    }
}

/// Weight of a 9-component state on the (S_z, I_z) subspace, S_z given as a
/// set of electronic indices.
fn weight(v: &CVector, electron: &[usize], nuc: usize) -> f64 {
    electron.iter().map(|&e| v[3 * e + nuc].norm_sqr()).sum()
}

/// Assign three states to I_z = +1, 0, −1 maximizing total nuclear weight.
fn assign_nuclear(sol: &EigenSolution, states: &[usize; 3], electron: &[usize]) -> [usize; 3] {
    const PERMS: [[usize; 3]; 6] = [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];
    let mut best = (f64::NEG_INFINITY, PERMS[0]);
    for perm in PERMS {
        // perm[n] = which of `states` carries nuclear index n
        let score: f64 = (0..3).map(|n| weight(&sol.vector(states[perm[n]]), electron, n)).sum();
        if score > best.0 + 1e-12 {
            best = (score, perm);
        }
    }
    [states[best.1[0]], states[best.1[1]], states[best.1[2]]]
}

/// Exact 9×9 eigenstates sorted into the S_z≈0 manifold and the lower and
/// upper branches of the |±1⟩ manifold, each indexed by I_z = +1, 0, −1.
#[derive(Debug, Clone)]
pub struct BranchAnalysis {
    pub solution: EigenSolution,
    pub ground: [usize; 3],
    pub lower: [usize; 3],
    pub upper: [usize; 3],
}

impl BranchAnalysis {
    pub fn new(c: &PhysicalConstants, f: &FieldConfiguration) -> Result<Self, EigenError> {
        let solution = diagonalize_hermitian(&full_hamiltonian(c, f))?;
        let zero_weight: Vec<f64> = (0..9)
            .map(|k| {
                let v = solution.vector(k);
                (0..3).map(|n| weight(&v, &[1], n)).sum()
            })
            .collect();
        let mut by_zero: Vec<usize> = (0..9).collect();
        by_zero.sort_by(|&a, &b| zero_weight[b].total_cmp(&zero_weight[a]).then(a.cmp(&b)));
        let mut ground = [by_zero[0], by_zero[1], by_zero[2]];
        ground.sort_unstable();
        let mut rest: Vec<usize> = by_zero[3..].to_vec();
        rest.sort_unstable(); // eigenvalues ascend with index
        let lower_set = [rest[0], rest[1], rest[2]];
        let upper_set = [rest[3], rest[4], rest[5]];
        Ok(Self {
            ground: assign_nuclear(&solution, &ground, &[1]),
            lower: assign_nuclear(&solution, &lower_set, &[0, 2]),
            upper: assign_nuclear(&solution, &upper_set, &[0, 2]),
            solution,
        })
    }

    pub fn lower_state(&self, iz: i8) -> CVector {
        self.solution.vector(self.lower[iz_index(iz)])
    }

    pub fn upper_state(&self, iz: i8) -> CVector {
        self.solution.vector(self.upper[iz_index(iz)])
    }

    pub fn ground_state(&self, iz: i8) -> CVector {
        self.solution.vector(self.ground[iz_index(iz)])
    }

    pub fn lower_energy(&self, iz: i8) -> f64 {
        self.solution.values[self.lower[iz_index(iz)]]
    }

    pub fn upper_energy(&self, iz: i8) -> f64 {
        self.solution.values[self.upper[iz_index(iz)]]
    }

    pub fn ground_energy(&self, iz: i8) -> f64 {
        self.solution.values[self.ground[iz_index(iz)]]
    }
}

/// `|e⟩ ⊗ |I_z⟩`.
pub fn with_nuclear(electron: &CVector, iz: i8) -> CVector {
    let mut nuc = CVector::zeros(3);
    nuc[iz_index(iz)] = Complex64::new(1.0, 0.0);
    electron.kronecker(&nuc)
}

/// Trace distance between `|−⟩_θ ⊗ |I_z⟩` and the exact lower-branch state
/// with the same I_z, for I_z = −1, 0, +1 (in that order).
pub fn dressed_trace_distances(c: &PhysicalConstants, f: &FieldConfiguration) -> Result<[f64; 3], DressedError> {
    let p = PerturbationParams::from_fields(c, f);
    let theta = perturbative_spectrum(&p, f.phi_b(), f.phi_pi())?.theta;
    let model = dressed_minus(theta);
    let branches = BranchAnalysis::new(c, f)?;
    let mut out = [0.0; 3];
    for (slot, iz) in [-1i8, 0, 1].into_iter().enumerate() {
        let rho = density_matrix(&with_nuclear(&model, iz));
        let sigma = density_matrix(&branches.lower_state(iz));
        out[slot] = trace_distance(&rho, &sigma)?;
    }
    Ok(out)
}

/// The two working points used throughout: A has no axial field; B has the
/// axial field that cancels the hyperfine shift of the I_z = −1 manifold,
/// γ_e B_∥ = A_∥.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WorkingPoint {
    A,
    B,
}

impl WorkingPoint {
    pub fn b_par(self, c: &PhysicalConstants) -> f64 {
        match self {
            WorkingPoint::A => 0.0,
            WorkingPoint::B => c.a_par / c.gamma_e,
        }
    }
}

impl std::str::FromStr for WorkingPoint {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "A" | "a" => Ok(WorkingPoint::A),
            "B" | "b" => Ok(WorkingPoint::B),
            other => Err(format!("unknown working point `{other}` (expected A or B)")),
        }
    }
}

/// S_z lifted to the joint space, for callers that want the operator.
pub fn sz_joint() -> CMatrix {
    spin1_operators().sz_lifted()
}
