//! Elastic-constant bookkeeping for transversely isotropic plies.
//!
//! The fiber axis is `x1`, the plate normal is `x3`. Stiffness matrices use
//! Voigt ordering `(11, 22, 33, 23, 13, 12)`.

use std::fmt;
use std::path::Path;

use nalgebra::{Matrix3, Matrix6, SymmetricEigen};
use serde::{Deserialize, Serialize};

/// Ten commercial CFRP systems, SI units.
pub const CATALOG_JSON: &str = include_str!("../data/materials.json");

#[derive(Debug, thiserror::Error)]
pub enum MaterialError {
    #[error("material property `{name}` must be positive, got {value}")]
    NonPositive { name: &'static str, value: f64 },
    #[error("material property `{name}` is not finite")]
    NotFinite { name: &'static str },
    #[error("elastic matrix is not positive definite: eigenvalue #{index} = {value:.6e}")]
    NotPositiveDefinite { index: usize, value: f64 },
    #[error("rotation angle must be finite")]
    BadAngle,
    #[error("rotated stiffness overflowed")]
    Overflow,
    #[error("ply count {n_plies} is not a positive multiple of {pattern} for a symmetric {kind} layup")]
    BadPlyCount { n_plies: usize, pattern: usize, kind: LayupKind },
    #[error("total thickness must be positive, got {0}")]
    BadThickness(f64),
    #[error("failed to read material file: {0}")]
    Io(#[from] std::io::Error),
    #[error("failed to parse material JSON: {0}")]
    Json(#[from] serde_json::Error),
}

/// Density and five engineering constants of a transversely isotropic ply.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Material {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    /// kg/m³
    pub rho: f64,
    /// Pa
    pub e1: f64,
    /// Pa
    pub e2: f64,
    /// Pa
    pub g12: f64,
    pub nu12: f64,
    pub nu23: f64,
}

impl Material {
    pub fn new(rho: f64, e1: f64, e2: f64, g12: f64, nu12: f64, nu23: f64) -> Self {
        Material { name: None, rho, e1, e2, g12, nu12, nu23 }
    }

    pub fn named(mut self, name: impl Into<String>) -> Self {
        self.name = Some(name.into());
        self
    }

    /// Isotropic material expressed through the transversely isotropic
    /// parameterization (`G12 = E / 2(1 + ν)`).
    pub fn isotropic(rho: f64, e: f64, nu: f64) -> Self {
        Material::new(rho, e, e, e / (2.0 * (1.0 + nu)), nu, nu)
    }

    pub fn label(&self) -> &str {
        self.name.as_deref().unwrap_or("unnamed")
    }

    /// `G23` implied by transverse isotropy.
    pub fn g23(&self) -> f64 {
        self.e2 / (2.0 * (1.0 + self.nu23))
    }

    pub fn validate(&self) -> Result<(), MaterialError> {
        for (name, value) in [
            ("rho", self.rho),
            ("e1", self.e1),
            ("e2", self.e2),
            ("g12", self.g12),
            ("nu12", self.nu12),
            ("nu23", self.nu23),
        ] {
            if !value.is_finite() {
                return Err(MaterialError::NotFinite { name });
            }
        }
        for (name, value) in [("rho", self.rho), ("e1", self.e1), ("e2", self.e2), ("g12", self.g12)] {
            if value <= 0.0 {
                return Err(MaterialError::NonPositive { name, value });
            }
        }
        Ok(())
    }

    pub fn from_json_file(path: impl AsRef<Path>) -> Result<Material, MaterialError> {
        let text = std::fs::read_to_string(path)?;
        let mat: Material = serde_json::from_str(&text)?;
        mat.validate()?;
        Ok(mat)
    }

    /// Reads either a single material object or an array of them.
    pub fn list_from_json_file(path: impl AsRef<Path>) -> Result<Vec<Material>, MaterialError> {
        let text = std::fs::read_to_string(path)?;
        parse_material_list(&text)
    }

    /// The bundled commercial material table.
    pub fn catalog() -> Vec<Material> {
        parse_material_list(CATALOG_JSON).expect("bundled material table is valid")
    }

    /// Looks a bundled material up by name (case-insensitive).
    pub fn from_catalog(name: &str) -> Option<Material> {
        Material::catalog()
            .into_iter()
            .find(|m| m.name.as_deref().is_some_and(|n| n.eq_ignore_ascii_case(name)))
    }
}

fn parse_material_list(text: &str) -> Result<Vec<Material>, MaterialError> {
    let value: serde_json::Value = serde_json::from_str(text)?;
    let mats: Vec<Material> = if value.is_array() {
        serde_json::from_value(value)?
    } else {
        vec![serde_json::from_value(value)?]
    };
    for m in &mats {
        m.validate()?;
    }
    Ok(mats)
}

/// 6×6 stiffness in Voigt notation, Pa.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StiffnessMatrix {
    pub c: Matrix6<f64>,
}

/// Stiffness expressed in a frame rotated about the plate normal.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RotatedStiffness {
    pub c: Matrix6<f64>,
    /// radians
    pub angle: f64,
}

impl RotatedStiffness {
    /// Entry by 1-based Voigt indices, e.g. `at(1, 6)` for C16.
    #[inline]
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.c[(i - 1, j - 1)]
    }
}

/// Assembles the compliance matrix from engineering constants and inverts it.
pub fn stiffness_from_engineering(mat: &Material) -> Result<StiffnessMatrix, MaterialError> {
    mat.validate()?;
    let Material { e1, e2, g12, nu12, nu23, .. } = *mat;
    let mut s = Matrix6::<f64>::zeros();
    s[(0, 0)] = 1.0 / e1;
    s[(1, 1)] = 1.0 / e2;
    s[(2, 2)] = 1.0 / e2;
    s[(0, 1)] = -nu12 / e1;
    s[(0, 2)] = -nu12 / e1;
    s[(1, 2)] = -nu23 / e2;
    s[(1, 0)] = s[(0, 1)];
    s[(2, 0)] = s[(0, 2)];
    s[(2, 1)] = s[(1, 2)];
    s[(3, 3)] = 1.0 / mat.g23();
    s[(4, 4)] = 1.0 / g12;
    s[(5, 5)] = 1.0 / g12;

    // Compliance is SPD iff stiffness is; check before inverting.
    let eig = SymmetricEigen::new(s).eigenvalues;
    for (index, &value) in eig.iter().enumerate() {
        if value <= 0.0 {
            return Err(MaterialError::NotPositiveDefinite { index, value });
        }
    }
    let c = s.try_inverse().ok_or(MaterialError::NotPositiveDefinite { index: 0, value: 0.0 })?;
    // Inversion leaves asymmetry at the ulp level; symmetrize exactly.
    let c = (c + c.transpose()) * 0.5;
    let eig = SymmetricEigen::new(c).eigenvalues;
    for (index, &value) in eig.iter().enumerate() {
        if value <= 0.0 {
            return Err(MaterialError::NotPositiveDefinite { index, value });
        }
    }
    Ok(StiffnessMatrix { c })
}

/// Voigt index (0-based) of the symmetric tensor index pair `(i, j)`.
#[inline]
pub fn voigt(i: usize, j: usize) -> usize {
    match (i, j) {
        (0, 0) => 0,
        (1, 1) => 1,
        (2, 2) => 2,
        (1, 2) | (2, 1) => 3,
        (0, 2) | (2, 0) => 4,
        (0, 1) | (1, 0) => 5,
        _ => unreachable!("tensor index out of range"),
    }
}

/// Full fourth-order tensor from Voigt form.
pub fn to_tensor(c: &Matrix6<f64>) -> [[[[f64; 3]; 3]; 3]; 3] {
    let mut t = [[[[0.0; 3]; 3]; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            for k in 0..3 {
                for l in 0..3 {
                    t[i][j][k][l] = c[(voigt(i, j), voigt(k, l))];
                }
            }
        }
    }
    t
}

pub fn from_tensor(t: &[[[[f64; 3]; 3]; 3]; 3]) -> Matrix6<f64> {
    const PAIRS: [(usize, usize); 6] = [(0, 0), (1, 1), (2, 2), (1, 2), (0, 2), (0, 1)];
    Matrix6::from_fn(|a, b| {
        let (i, j) = PAIRS[a];
        let (k, l) = PAIRS[b];
        t[i][j][k][l]
    })
}

/// Rotates the material by `angle` about `x3`.
///
/// A positive angle carries the fiber axis from `x1` towards `x2`, so a ply
/// with orientation `θ` seen from a wave travelling at `φ` uses `θ − φ`.
pub fn rotate_stiffness(c: &StiffnessMatrix, angle: f64) -> Result<RotatedStiffness, MaterialError> {
    if !angle.is_finite() {
        return Err(MaterialError::BadAngle);
    }
    let (s, co) = angle.sin_cos();
    let r = Matrix3::new(co, -s, 0.0, s, co, 0.0, 0.0, 0.0, 1.0);
    let t = to_tensor(&c.c);

    // Contract one index at a time: O(4·3⁵) instead of O(3⁸).
    let mut a = [[[[0.0; 3]; 3]; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            for k in 0..3 {
                for l in 0..3 {
                    a[i][j][k][l] = (0..3).map(|p| r[(i, p)] * t[p][j][k][l]).sum();
                }
            }
        }
    }
    let mut b = [[[[0.0; 3]; 3]; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            for k in 0..3 {
                for l in 0..3 {
                    b[i][j][k][l] = (0..3).map(|q| r[(j, q)] * a[i][q][k][l]).sum();
                }
            }
        }
    }
    for i in 0..3 {
        for j in 0..3 {
            for k in 0..3 {
                for l in 0..3 {
                    a[i][j][k][l] = (0..3).map(|m| r[(k, m)] * b[i][j][m][l]).sum();
                }
            }
        }
    }
    for i in 0..3 {
        for j in 0..3 {
            for k in 0..3 {
                for l in 0..3 {
                    b[i][j][k][l] = (0..3).map(|n| r[(l, n)] * a[i][j][k][n]).sum();
                }
            }
        }
    }
    let out = from_tensor(&b);
    if out.iter().any(|v| !v.is_finite()) {
        return Err(MaterialError::Overflow);
    }
    // Symmetrize against rounding in the contractions.
    let out = (out + out.transpose()) * 0.5;
    Ok(RotatedStiffness { c: if angle == 0.0 { c.c } else { out }, angle })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LayupKind {
    Unidirectional,
    CrossPly,
    QuasiIsotropic,
}

impl LayupKind {
    pub const ALL: [LayupKind; 3] = [LayupKind::Unidirectional, LayupKind::CrossPly, LayupKind::QuasiIsotropic];

    /// Half-laminate repeating unit.
    pub fn pattern(self) -> &'static [f64] {
        match self {
            LayupKind::Unidirectional => &[0.0],
            LayupKind::CrossPly => &[0.0, 90.0],
            LayupKind::QuasiIsotropic => &[0.0, 45.0, -45.0, 90.0],
        }
    }

    pub fn tag(self) -> &'static str {
        match self {
            LayupKind::Unidirectional => "ud",
            LayupKind::CrossPly => "cp",
            LayupKind::QuasiIsotropic => "qi",
        }
    }
}

impl fmt::Display for LayupKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            LayupKind::Unidirectional => "unidirectional",
            LayupKind::CrossPly => "cross-ply",
            LayupKind::QuasiIsotropic => "quasi-isotropic",
        })
    }
}

impl std::str::FromStr for LayupKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().replace('_', "-").as_str() {
            "unidirectional" | "ud" => Ok(LayupKind::Unidirectional),
            "cross-ply" | "crossply" | "cp" => Ok(LayupKind::CrossPly),
            "quasi-isotropic" | "quasiisotropic" | "qi" => Ok(LayupKind::QuasiIsotropic),
            other => Err(format!("unknown layup kind `{other}`")),
        }
    }
}

/// Ordered ply stack, bottom to top.
#[derive(Debug, Clone, PartialEq)]
pub struct Layup {
    /// degrees
    pub ply_angles: Vec<f64>,
    /// m
    pub ply_thickness: f64,
    pub kind: LayupKind,
}

impl Layup {
    pub fn total_thickness(&self) -> f64 {
        self.ply_thickness * self.ply_angles.len() as f64
    }

    pub fn is_symmetric(&self) -> bool {
        self.ply_angles.iter().eq(self.ply_angles.iter().rev())
    }

    /// True when reflecting every ply angle (`θ → −θ`) reproduces the stack,
    /// so the wave field is mirror-symmetric about the `x1` axis.
    pub fn is_reflection_invariant(&self) -> bool {
        let norm = |a: f64| a.rem_euclid(180.0);
        self.ply_angles
            .iter()
            .all(|&a| (norm(a) - norm(-a)).abs() < 1e-9 || (norm(a) - norm(-a)).abs() > 180.0 - 1e-9)
    }

    /// Adjacent plies with equal orientation merged into thicker layers.
    pub fn merged_layers(&self) -> Vec<(f64, f64)> {
        let mut out: Vec<(f64, f64)> = Vec::new();
        for &a in &self.ply_angles {
            match out.last_mut() {
                Some((angle, t)) if *angle == a => *t += self.ply_thickness,
                _ => out.push((a, self.ply_thickness)),
            }
        }
        out
    }
}

/// Symmetric laminate: the kind's pattern repeated to fill the upper half and
/// mirrored about the midplane.
pub fn build_layup(kind: LayupKind, n_plies: usize, total_thickness: f64) -> Result<Layup, MaterialError> {
    if !(total_thickness > 0.0) || !total_thickness.is_finite() {
        return Err(MaterialError::BadThickness(total_thickness));
    }
    let pattern = kind.pattern();
    let half = n_plies / 2;
    if n_plies == 0 || n_plies % 2 != 0 || half % pattern.len() != 0 {
        return Err(MaterialError::BadPlyCount { n_plies, pattern: 2 * pattern.len(), kind });
    }
    let lower: Vec<f64> = pattern.iter().copied().cycle().take(half).collect();
    let mut ply_angles = lower.clone();
    ply_angles.extend(lower.iter().rev());
    Ok(Layup { ply_angles, ply_thickness: total_thickness / n_plies as f64, kind })
}

/// The 16-ply, 2 mm configuration used throughout the dataset.
pub fn standard_layup(kind: LayupKind) -> Layup {
    build_layup(kind, 16, 2e-3).expect("16 plies fit every pattern")
}
