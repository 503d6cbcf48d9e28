//! Conductivity phantoms, current bases, and the multiplicative Gaussian
//! noise model for simulated electrode measurements.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fem::{BasisKind, Conductivity, CurrentBasis, MeasurementMatrix};
use crate::mesh::Mesh;
use crate::spectral;

/// Whether an inclusion raises or lowers the background conductivity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InclusionSign {
    Conductive,
    Resistive,
}

/// Geometric support of one inclusion.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "snake_case")]
pub enum Shape {
    Disk { center: [f64; 2], radius: f64 },
    Polygon { vertices: Vec<[f64; 2]> },
}

impl Shape {
    pub fn contains(&self, x: f64, y: f64) -> bool {
        match self {
            Shape::Disk { center, radius } => {
                let dx = x - center[0];
                let dy = y - center[1];
                dx * dx + dy * dy < radius * radius
            }
            Shape::Polygon { vertices } => {
                // Even-odd ray cast along +x.
                let mut inside = false;
                let n = vertices.len();
                for i in 0..n {
                    let [x1, y1] = vertices[i];
                    let [x2, y2] = vertices[(i + 1) % n];
                    if (y1 > y) != (y2 > y) {
                        let t = (y - y1) / (y2 - y1);
                        if x < x1 + t * (x2 - x1) {
                            inside = !inside;
                        }
                    }
                }
                inside
            }
        }
    }

    fn strictly_inside_unit_disk(&self) -> bool {
        match self {
            Shape::Disk { center, radius } => {
                (center[0] * center[0] + center[1] * center[1]).sqrt() + radius < 1.0
            }
            Shape::Polygon { vertices } => {
                vertices.len() >= 3
                    && vertices.iter().all(|v| (v[0] * v[0] + v[1] * v[1]).sqrt() < 1.0)
            }
        }
    }
}

/// One inclusion: a shape with a positive contrast and a sign.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Inclusion {
    #[serde(flatten)]
    pub shape: Shape,
    pub contrast: f64,
    pub sign: InclusionSign,
}

/// A conductivity phantom on the unit disk.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Phantom {
    pub gamma0: f64,
    pub inclusions: Vec<Inclusion>,
}

impl Phantom {
    pub fn validate(&self) -> Result<()> {
        if !(self.gamma0 > 0.0) {
            return Err(Error::Phantom(format!("background must be positive, got {}", self.gamma0)));
        }
        for (i, inc) in self.inclusions.iter().enumerate() {
            if !(inc.contrast > 0.0) {
                return Err(Error::Phantom(format!("inclusion {i} contrast must be positive")));
            }
            if inc.sign == InclusionSign::Resistive && inc.contrast >= self.gamma0 {
                return Err(Error::Phantom(format!(
                    "inclusion {i} drops conductivity to {} <= 0",
                    self.gamma0 - inc.contrast
                )));
            }
            if !inc.shape.strictly_inside_unit_disk() {
                return Err(Error::Phantom(format!("inclusion {i} is not strictly inside the unit disk")));
            }
        }
        Ok(())
    }

    pub fn homogeneous(gamma0: f64) -> Self {
        Phantom {
            gamma0,
            inclusions: Vec::new(),
        }
    }

    /// Index of the inclusion containing each triangle centroid, if any.
    pub fn inclusion_mask(&self, mesh: &Mesh) -> Vec<Option<usize>> {
        (0..mesh.n_triangles())
            .map(|t| {
                let c = mesh.centroid(t);
                self.inclusions.iter().position(|inc| inc.shape.contains(c.x, c.y))
            })
            .collect()
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let phantom: Phantom =
            serde_json::from_str(text).map_err(|e| Error::Phantom(format!("bad phantom JSON: {e}")))?;
        phantom.validate()?;
        Ok(phantom)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("phantom serialization cannot fail")
    }
}

/// Evaluates a phantom on a mesh as a simplex-wise constant conductivity:
/// a triangle takes the perturbed value when its centroid lies inside an
/// inclusion.
pub fn rasterize_phantom(phantom: &Phantom, mesh: &Mesh) -> Result<Conductivity> {
    phantom.validate()?;
    let mask = phantom.inclusion_mask(mesh);
    let values: Vec<f64> = mask
        .iter()
        .map(|&hit| match hit {
            Some(i) => {
                let inc = &phantom.inclusions[i];
                match inc.sign {
                    InclusionSign::Conductive => phantom.gamma0 + inc.contrast,
                    InclusionSign::Resistive => phantom.gamma0 - inc.contrast,
                }
            }
            None => phantom.gamma0,
        })
        .collect();
    let lb = values.iter().copied().fold(f64::INFINITY, f64::min);
    Conductivity::new(values, lb)
}

/// Builds a current basis of the requested kind for `k` electrodes.
pub fn current_basis(kind: BasisKind, k: usize) -> Result<CurrentBasis> {
    if k < 2 {
        return Err(Error::Basis(format!("need at least 2 electrodes, got {k}")));
    }
    let tau = 2.0 * std::f64::consts::PI;
    let mut m = DMatrix::zeros(k, k - 1);
    match kind {
        BasisKind::Trig => {
            if k % 2 != 0 {
                return Err(Error::Basis(format!("trigonometric basis needs even k, got {k}")));
            }
            for c in 0..k - 1 {
                for j in 0..k {
                    let pos = (j + 1) as f64;
                    m[(j, c)] = if c < k / 2 {
                        let freq = (c + 1) as f64;
                        (freq * tau * pos / k as f64).cos()
                    } else {
                        let freq = (c + 1 - k / 2) as f64;
                        (freq * tau * pos / k as f64).sin()
                    };
                }
            }
        }
        BasisKind::Dipole => {
            for c in 0..k - 1 {
                m[(0, c)] = 1.0;
                m[(c + 1, c)] = -1.0;
            }
        }
        BasisKind::GramSchmidt => {
            for c in 0..k - 1 {
                let mm = (c + 1) as f64;
                let head = (1.0 / (mm * (mm + 1.0))).sqrt();
                for j in 0..=c {
                    m[(j, c)] = head;
                }
                m[(c + 1, c)] = -(mm / (mm + 1.0)).sqrt();
            }
        }
    }
    CurrentBasis::try_new(kind, m)
}

/// Standard deviation and seed for the relative Gaussian entry noise.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct NoiseSpec {
    pub sigma: f64,
    pub seed: u64,
}

/// Deterministic counter-based generator (splitmix64) with a Box-Muller
/// transform for Gaussian draws; reproducible independently of platform
/// RNG libraries.
#[derive(Debug, Clone)]
pub struct CounterRng {
    state: u64,
}

impl CounterRng {
    pub fn new(seed: u64) -> Self {
        CounterRng { state: seed }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9e3779b97f4a7c15);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
        z ^ (z >> 31)
    }

    /// Uniform draw in `[0, 1)` with 53 random bits.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Standard normal draw via Box-Muller; consumes two uniforms.
    pub fn next_gaussian(&mut self) -> f64 {
        let u1 = ((self.next_u64() >> 11) + 1) as f64 * (1.0 / (1u64 << 53) as f64);
        let u2 = self.next_f64();
        (-2.0 * u1.ln()).sqrt() * (tau() * u2).cos()
    }
}

fn tau() -> f64 {
    2.0 * std::f64::consts::PI
}

/// Noisy voltage data with the exact spectral-norm bound of the induced
/// perturbation of the symmetrized measurement operator.
#[derive(Debug, Clone)]
pub struct NoisyVoltages {
    pub vtilde: DMatrix<f64>,
    /// Spectral norm of the perturbation of the symmetrized operator.
    pub delta_bound: f64,
    /// Frobenius-relative distance between clean and symmetrized noisy data.
    pub relative_error: f64,
}

/// Perturbs every voltage entry by a relative Gaussian factor and reports
/// the exact operator-level noise bound used by the regularization theory.
pub fn apply_noise(voltages: &DMatrix<f64>, basis: &CurrentBasis, spec: &NoiseSpec) -> Result<NoisyVoltages> {
    if spec.sigma < 0.0 {
        return Err(Error::Config(format!("noise sigma must be nonnegative, got {}", spec.sigma)));
    }
    if voltages.iter().any(|v| !v.is_finite()) {
        return Err(Error::Config("voltage table contains non-finite entries".into()));
    }
    let mut vtilde = voltages.clone();
    if spec.sigma > 0.0 {
        let mut rng = CounterRng::new(spec.seed);
        for i in 0..vtilde.nrows() {
            for j in 0..vtilde.ncols() {
                let y = spec.sigma * rng.next_gaussian();
                vtilde[(i, j)] *= 1.0 + y;
            }
        }
    }
    let clean_rep = MeasurementMatrix::from_voltage_columns(basis, voltages)?;
    let noisy_rep = MeasurementMatrix::from_voltage_columns(basis, &vtilde)?;
    let delta_bound = spectral::spectral_norm(&(noisy_rep.entries() - clean_rep.entries()));
    let symmetrized = spectral::symmetrize_data(&vtilde, basis.matrix())?;
    let relative_error = (voltages - &symmetrized).norm() / voltages.norm().max(f64::MIN_POSITIVE);
    Ok(NoisyVoltages {
        vtilde,
        delta_bound,
        relative_error,
    })
}

/// Simulated voltage table for a basis: column `m` holds the electrode
/// voltages of the m-th basis current.
pub fn simulate_voltages(
    system: &crate::fem::CemSystem,
    basis: &CurrentBasis,
) -> Result<DMatrix<f64>> {
    let k = basis.k();
    let cols = k - 1;
    let columns: Vec<Result<DVector<f64>>> = crate::exec::map_indexed(cols, |m| {
        let current = DVector::from_iterator(k, basis.matrix().column(m).iter().copied());
        crate::fem::solve_cem(system, &current).map(|sol| sol.voltages)
    });
    let mut v = DMatrix::zeros(k, cols);
    for (m, col) in columns.into_iter().enumerate() {
        v.set_column(m, &col?);
    }
    Ok(v)
}
