use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forward::ConductivityField;
use crate::mesh::TriMesh;

/// Background resistivity in Ω·m.
pub const BACKGROUND_RESISTIVITY: f64 = 4.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PhantomId {
    A,
    B,
    C,
}

impl PhantomId {
    pub const ALL: [PhantomId; 3] = [PhantomId::A, PhantomId::B, PhantomId::C];

    pub fn index(self) -> u64 {
        match self {
            Self::A => 0,
            Self::B => 1,
            Self::C => 2,
        }
    }
}

impl fmt::Display for PhantomId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self:?}")
    }
}

impl FromStr for PhantomId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_uppercase().as_str() {
            "A" => Ok(Self::A),
            "B" => Ok(Self::B),
            "C" => Ok(Self::C),
            other => Err(Error::Experiment(format!("unknown phantom {other:?} (expected A, B or C)"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Inclusion {
    pub center: [f64; 2],
    pub radius: f64,
    /// Ω·m
    pub resistivity: f64,
}

impl Inclusion {
    fn contains(&self, p: [f64; 2]) -> bool {
        let (dx, dy) = (p[0] - self.center[0], p[1] - self.center[1]);
        dx * dx + dy * dy < self.radius * self.radius
    }
}

/// Circular inclusions in a homogeneous unit disk.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Phantom {
    pub id: Option<PhantomId>,
    pub inclusions: Vec<Inclusion>,
    pub background_resistivity: f64,
}

const fn inc(x: f64, y: f64, radius: f64, resistivity: f64) -> Inclusion {
    Inclusion { center: [x, y], radius, resistivity }
}

impl Phantom {
    /// The three reference phantoms: conductive (1 Ω·m) and resistive
    /// (8 Ω·m) disks in a 4 Ω·m background.
    pub fn reference(id: PhantomId) -> Self {
        let inclusions = match id {
            PhantomId::A => vec![inc(-0.4, 0.3, 0.2, 1.0), inc(0.4, -0.3, 0.2, 8.0)],
            PhantomId::B => vec![inc(-0.45, 0.25, 0.18, 1.0), inc(0.45, 0.25, 0.18, 8.0), inc(0.0, -0.45, 0.18, 1.0)],
            PhantomId::C => vec![
                inc(0.0, 0.0, 0.15, 8.0),
                inc(0.5, 0.5, 0.15, 1.0),
                inc(-0.5, 0.5, 0.15, 8.0),
                inc(-0.5, -0.5, 0.15, 1.0),
                inc(0.5, -0.5, 0.15, 8.0),
            ],
        };
        Self { id: Some(id), inclusions, background_resistivity: BACKGROUND_RESISTIVITY }
    }

    pub fn background() -> Self {
        Self { id: None, inclusions: Vec::new(), background_resistivity: BACKGROUND_RESISTIVITY }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.background_resistivity > 0.0) {
            return Err(Error::Experiment("background resistivity must be positive".into()));
        }
        for (i, a) in self.inclusions.iter().enumerate() {
            let r = (a.center[0].powi(2) + a.center[1].powi(2)).sqrt();
            if !(a.resistivity > 0.0 && a.radius > 0.0 && r + a.radius < 1.0) {
                return Err(Error::Experiment(format!("inclusion {i} is not strictly inside the disk")));
            }
            for (j, b) in self.inclusions.iter().enumerate().skip(i + 1) {
                let dist = ((a.center[0] - b.center[0]).powi(2) + (a.center[1] - b.center[1]).powi(2)).sqrt();
                if dist <= a.radius + b.radius {
                    return Err(Error::Experiment(format!("inclusions {i} and {j} overlap")));
                }
            }
        }
        Ok(())
    }

    /// Region of point `p`: `Some(i)` for inclusion `i`, `None` for background.
    pub fn region(&self, p: [f64; 2]) -> Option<usize> {
        self.inclusions.iter().position(|inc| inc.contains(p))
    }

    /// Conductivity at `p` (S/m).
    pub fn conductivity_at(&self, p: [f64; 2]) -> f64 {
        match self.region(p) {
            Some(i) => 1.0 / self.inclusions[i].resistivity,
            None => 1.0 / self.background_resistivity,
        }
    }

    pub fn background_conductivity(&self) -> f64 {
        1.0 / self.background_resistivity
    }
}

/// Element conductivities of `phantom` sampled at element barycenters.
pub fn build_phantom(phantom: &Phantom, mesh: &TriMesh) -> Result<ConductivityField> {
    phantom.validate()?;
    let values = (0..mesh.element_count()).map(|e| phantom.conductivity_at(mesh.barycenter(e))).collect();
    ConductivityField::new(mesh, values)
}
