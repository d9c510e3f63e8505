//! Spin-1/2 systems: single-spin operators, many-body embedding, the
//! chemical-shift plus isotropic J-coupling Hamiltonian, its Liouvillian,
//! the initial state `−I_y` and detection operators.
//!
//! Basis ordering: site 0 is the slowest-varying Kronecker factor and the
//! single-spin basis is `(up, down)`, so `I_z = diag(1/2, −1/2)`.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::sparse::{kron, linear_combine, trace_form, vectorize, SparseMatrix, StateVector, TraceForm, C64};

/// Physical problem definition. Frequencies are angular, in radians per unit
/// of simulation time.
#[derive(Clone, Debug, PartialEq)]
pub struct SpinSystemSpec {
    omega0: Vec<f64>,
    coupling: Vec<Vec<f64>>,
}

impl SpinSystemSpec {
    pub fn new(omega0: Vec<f64>, coupling: Vec<Vec<f64>>) -> Result<Self> {
        let n = omega0.len();
        if n == 0 {
            return Err(Error::InvalidArgument("a spin system needs at least one spin".into()));
        }
        if let Some(j) = omega0.iter().position(|w| !w.is_finite()) {
            return Err(Error::InvalidArgument(format!("Larmor frequency {j} is not finite")));
        }
        if coupling.len() != n || coupling.iter().any(|row| row.len() != n) {
            return Err(Error::Dimension(format!("coupling matrix must be {n}x{n}")));
        }
        for j in 0..n {
            if coupling[j][j] != 0.0 {
                return Err(Error::InvalidArgument(format!("coupling diagonal entry ({j},{j}) must be zero")));
            }
            for l in 0..j {
                if !coupling[j][l].is_finite() || coupling[j][l] != coupling[l][j] {
                    return Err(Error::InvalidArgument(format!(
                        "coupling matrix is not symmetric: J[{l}][{j}] = {} but J[{j}][{l}] = {}",
                        coupling[l][j], coupling[j][l]
                    )));
                }
            }
        }
        Ok(SpinSystemSpec { omega0, coupling })
    }

    /// Uncoupled spins.
    pub fn uncoupled(omega0: Vec<f64>) -> Result<Self> {
        let n = omega0.len();
        Self::new(omega0, vec![vec![0.0; n]; n])
    }

    /// Builds a system from frequencies in Hz; `time_unit` is the simulation
    /// time unit in seconds (1.0 for seconds, 1e-3 for milliseconds).
    pub fn from_hz(larmor_hz: &[f64], j_hz: &[Vec<f64>], time_unit: f64) -> Result<Self> {
        let to_rad = 2.0 * PI * time_unit;
        Self::new(
            larmor_hz.iter().map(|f| f * to_rad).collect(),
            j_hz.iter().map(|row| row.iter().map(|f| f * to_rad).collect()).collect(),
        )
    }

    /// Random system with Larmor and coupling frequencies drawn uniformly (in
    /// Hz) from the given ranges; each pair is coupled with probability
    /// `coupling_probability`.
    pub fn random(n: usize, params: &RandomSpinParams, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (lo, hi) = params.larmor_hz;
        let larmor: Vec<f64> = (0..n).map(|_| rng.random_range(lo..=hi)).collect();
        let mut j = vec![vec![0.0; n]; n];
        for a in 0..n {
            for b in (a + 1)..n {
                if rng.random_bool(params.coupling_probability.clamp(0.0, 1.0)) {
                    let v = rng.random_range(params.j_hz.0..=params.j_hz.1);
                    j[a][b] = v;
                    j[b][a] = v;
                }
            }
        }
        Self::from_hz(&larmor, &j, params.time_unit)
    }

    pub fn n_spins(&self) -> usize {
        self.omega0.len()
    }

    pub fn omega0(&self) -> &[f64] {
        &self.omega0
    }

    pub fn coupling(&self) -> &[Vec<f64>] {
        &self.coupling
    }

    /// Hilbert-space dimension `2^n`.
    pub fn hilbert_dim(&self) -> usize {
        1 << self.n_spins()
    }

    /// Liouville-space dimension `4^n`.
    pub fn liouville_dim(&self) -> usize {
        self.hilbert_dim() * self.hilbert_dim()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RandomSpinParams {
    pub larmor_hz: (f64, f64),
    pub j_hz: (f64, f64),
    pub coupling_probability: f64,
    pub time_unit: f64,
}

impl Default for RandomSpinParams {
    fn default() -> Self {
        RandomSpinParams { larmor_hz: (10.0, 500.0), j_hz: (0.0, 20.0), coupling_probability: 1.0, time_unit: 1.0 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SpinComponent {
    X,
    Y,
    Z,
    /// Shift-up operator `I_x + i I_y`.
    Plus,
    /// Shift-down operator `I_x − i I_y`.
    Minus,
}

/// Spin-1/2 operators `I_x`, `I_y`, `I_z`.
#[derive(Clone, Debug)]
pub struct SpinOperatorSet {
    pub ix: SparseMatrix,
    pub iy: SparseMatrix,
    pub iz: SparseMatrix,
}

impl SpinOperatorSet {
    pub fn spin_half() -> Self {
        SpinOperatorSet {
            ix: single_spin(SpinComponent::X),
            iy: single_spin(SpinComponent::Y),
            iz: single_spin(SpinComponent::Z),
        }
    }
}

pub fn single_spin(component: SpinComponent) -> SparseMatrix {
    let h = 0.5;
    let t: Vec<(usize, usize, C64)> = match component {
        SpinComponent::X => vec![(0, 1, C64::new(h, 0.0)), (1, 0, C64::new(h, 0.0))],
        SpinComponent::Y => vec![(0, 1, C64::new(0.0, -h)), (1, 0, C64::new(0.0, h))],
        SpinComponent::Z => vec![(0, 0, C64::new(h, 0.0)), (1, 1, C64::new(-h, 0.0))],
        SpinComponent::Plus => vec![(0, 1, C64::new(1.0, 0.0))],
        SpinComponent::Minus => vec![(1, 0, C64::new(1.0, 0.0))],
    };
    SparseMatrix::from_triplets(2, 2, t).expect("2x2 entries")
}

/// `Id ⊗ … ⊗ op ⊗ … ⊗ Id` with `op` on site `site` of `n`.
pub fn embed(op: &SparseMatrix, site: usize, n: usize) -> Result<SparseMatrix> {
    if site >= n {
        return Err(Error::InvalidArgument(format!("site {site} out of range for {n} spins")));
    }
    if op.nrows() != 2 || op.ncols() != 2 {
        return Err(Error::Dimension("embedded operator must be 2x2".into()));
    }
    let left = SparseMatrix::identity(1 << site);
    let right = SparseMatrix::identity(1 << (n - site - 1));
    kron(&left, &kron(op, &right)?)
}

/// `Σ_j embed(op_j)` over all sites.
pub fn total_operator(component: SpinComponent, n: usize) -> Result<SparseMatrix> {
    let op = single_spin(component);
    let dim = 1usize << n;
    let mut total = SparseMatrix::zeros(dim, dim);
    let one = C64::new(1.0, 0.0);
    for j in 0..n {
        total = linear_combine(one, &total, one, &embed(&op, j, n)?)?;
    }
    Ok(total)
}

/// `H = −Σ_j ω_j I_j^z + Σ_{j<l} J_jl I_j·I_l`, assembled directly in the
/// product basis. Each unordered pair contributes once.
pub fn build_hamiltonian(spec: &SpinSystemSpec) -> SparseMatrix {
    let n = spec.n_spins();
    let dim = spec.hilbert_dim();
    // +1/2 for up (bit 0), −1/2 for down (bit 1)
    let m = |s: usize, j: usize| if (s >> (n - 1 - j)) & 1 == 0 { 0.5 } else { -0.5 };
    let mut triplets = Vec::new();
    for s in 0..dim {
        let mut diag = 0.0;
        for j in 0..n {
            diag -= spec.omega0[j] * m(s, j);
            for l in (j + 1)..n {
                let jl = spec.coupling[j][l];
                if jl == 0.0 {
                    continue;
                }
                diag += jl * m(s, j) * m(s, l);
                if m(s, j) != m(s, l) {
                    // ½ J (I+ I− + I− I+) exchanges an up and a down spin
                    let flipped = s ^ (1 << (n - 1 - j)) ^ (1 << (n - 1 - l));
                    triplets.push((flipped, s, C64::new(0.5 * jl, 0.0)));
                }
            }
        }
        triplets.push((s, s, C64::new(diag, 0.0)));
    }
    SparseMatrix::from_triplets(dim, dim, triplets).expect("indices within 2^n")
}

/// Commutator superoperator with `L·vec(ρ) = vec(Hρ − ρH)` under column
/// stacking, i.e. `L = Id ⊗ H − Hᵀ ⊗ Id`.
pub fn build_liouvillian(h: &SparseMatrix) -> Result<SparseMatrix> {
    if !h.is_square() {
        return Err(Error::Dimension("Hamiltonian must be square".into()));
    }
    let id = SparseMatrix::identity(h.nrows());
    let left = kron(&id, h)?;
    let right = kron(&h.transpose(), &id)?;
    linear_combine(C64::new(1.0, 0.0), &left, C64::new(-1.0, 0.0), &right)
}

/// `vec(−Σ_j I_j^y)`.
pub fn initial_state(n: usize) -> Result<StateVector> {
    if n == 0 {
        return Err(Error::InvalidArgument("need at least one spin".into()));
    }
    let iy = total_operator(SpinComponent::Y, n)?;
    vectorize(&iy.scaled(C64::new(-1.0, 0.0)))
}

/// Total shift-up operator `Σ_j (I_j^x + i I_j^y)`.
pub fn observable_ip(n: usize) -> Result<SparseMatrix> {
    if n == 0 {
        return Err(Error::InvalidArgument("need at least one spin".into()));
    }
    total_operator(SpinComponent::Plus, n)
}

/// Named detection operators: `ip`, `im`, `ix`, `iy`, `iz` for totals, or
/// `iz:2` style names for a single site.
pub fn named_observable(name: &str, n: usize) -> Result<(String, TraceForm)> {
    let (op, site) = match name.split_once(':') {
        Some((op, site)) => {
            let site: usize =
                site.trim().parse().map_err(|_| Error::Config(format!("bad site index in observable '{name}'")))?;
            (op.trim(), Some(site))
        }
        None => (name.trim(), None),
    };
    let component = match op.to_ascii_lowercase().as_str() {
        "ip" | "iplus" => SpinComponent::Plus,
        "im" | "iminus" => SpinComponent::Minus,
        "ix" => SpinComponent::X,
        "iy" => SpinComponent::Y,
        "iz" => SpinComponent::Z,
        _ => return Err(Error::Config(format!("unknown observable '{name}'"))),
    };
    let matrix = match site {
        Some(j) => embed(&single_spin(component), j, n).map_err(|e| Error::Config(e.to_string()))?,
        None => total_operator(component, n)?,
    };
    Ok((name.trim().to_string(), trace_form(&matrix)?))
}

/// Liouvillian, initial state and the total `I_p` trace form for a spec.
pub struct SpinProblem {
    pub spec: SpinSystemSpec,
    pub hamiltonian: SparseMatrix,
    pub liouvillian: SparseMatrix,
    pub rho0: StateVector,
}

impl SpinProblem {
    pub fn new(spec: SpinSystemSpec) -> Result<Self> {
        let hamiltonian = build_hamiltonian(&spec);
        let liouvillian = build_liouvillian(&hamiltonian)?;
        let rho0 = initial_state(spec.n_spins())?;
        Ok(SpinProblem { spec, hamiltonian, liouvillian, rho0 })
    }

    pub fn fid_form(&self) -> TraceForm {
        trace_form(&observable_ip(self.spec.n_spins()).expect("n >= 1")).expect("square")
    }
}
