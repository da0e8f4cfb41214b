use serde::{Deserialize, Serialize};

/// Per-axis flags, `1` where the attribute along that canonical axis is
/// meaningful and `0` where it is degenerate.
pub type Indicator = [u8; 3];

pub fn indicator_vector(ind: &Indicator) -> nalgebra::Vector3<f64> {
    nalgebra::Vector3::new(ind[0] as f64, ind[1] as f64, ind[2] as f64)
}

pub fn indicator_all(ind: &Indicator) -> bool {
    ind.iter().all(|&v| v == 1)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QuadricKind {
    Point,
    Line,
    Plane,
    Sphere,
    Cylinder,
    Cone,
    Ellipsoid,
    EllipticCylinder,
    EllipticCone,
    Unclassified,
}

/// Degeneracy indicators `(I_s, I_R, I_t)` of a quadric type.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Degeneracy {
    pub scale: Indicator,
    pub rotation: Indicator,
    pub translation: Indicator,
}

impl QuadricKind {
    pub const TABLE: [QuadricKind; 6] = [
        QuadricKind::Point,
        QuadricKind::Line,
        QuadricKind::Plane,
        QuadricKind::Sphere,
        QuadricKind::Cylinder,
        QuadricKind::Cone,
    ];

    /// Sign pattern `I_C` of the canonical matrix diagonal.
    pub fn signature(self) -> Option<[i8; 4]> {
        use QuadricKind::*;
        Some(match self {
            Point => [1, 1, 1, 0],
            Line => [1, 1, 0, 0],
            Plane => [1, 0, 0, 0],
            Sphere | Ellipsoid => [1, 1, 1, -1],
            Cylinder | EllipticCylinder => [1, 1, 0, -1],
            Cone | EllipticCone => [1, 1, -1, 0],
            Unclassified => return None,
        })
    }

    /// Indicators for the generic instance of the type. Elliptic variants have
    /// three distinct eigenvalues and therefore no rotational symmetry.
    pub fn degeneracy(self) -> Degeneracy {
        use QuadricKind::*;
        let (scale, rotation, translation) = match self {
            Point => ([0, 0, 0], [0, 0, 0], [1, 1, 1]),
            Line => ([0, 0, 0], [0, 0, 1], [1, 1, 0]),
            Plane => ([0, 0, 0], [1, 0, 0], [1, 0, 0]),
            Sphere => ([1, 1, 1], [0, 0, 0], [1, 1, 1]),
            Cylinder => ([1, 1, 0], [0, 0, 1], [1, 1, 0]),
            Cone => ([1, 1, 0], [0, 0, 1], [1, 1, 1]),
            Ellipsoid => ([1, 1, 1], [1, 1, 1], [1, 1, 1]),
            EllipticCylinder => ([1, 1, 0], [1, 1, 1], [1, 1, 0]),
            EllipticCone => ([1, 1, 0], [1, 1, 1], [1, 1, 1]),
            Unclassified => ([0, 0, 0], [0, 0, 0], [0, 0, 0]),
        };
        Degeneracy {
            scale,
            rotation,
            translation,
        }
    }

    /// Number of leading full-scale components that define the element's size
    /// (length, area or volume).
    pub fn size_rank(self) -> usize {
        match self {
            QuadricKind::Line => 1,
            QuadricKind::Plane => 2,
            _ => 3,
        }
    }

    /// Kinds whose canonical constant term vanishes; their implicit form is a
    /// squared distance and carries no absolute scale.
    pub fn is_scale_free(self) -> bool {
        matches!(
            self,
            QuadricKind::Point
                | QuadricKind::Line
                | QuadricKind::Plane
                | QuadricKind::Cone
                | QuadricKind::EllipticCone
        )
    }

    pub fn name(self) -> &'static str {
        use QuadricKind::*;
        match self {
            Point => "point",
            Line => "line",
            Plane => "plane",
            Sphere => "sphere",
            Cylinder => "cylinder",
            Cone => "cone",
            Ellipsoid => "ellipsoid",
            EllipticCylinder => "elliptic cylinder",
            EllipticCone => "elliptic cone",
            Unclassified => "unclassified",
        }
    }
}

impl std::fmt::Display for QuadricKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}
