//! Parametric electrode geometry: panel meshes of the segmented trap, the
//! downstream einzel lens, and auxiliary test shapes.
//!
//! Blades are modeled as metallized faces only: the narrow front faces carry
//! the RF / RF-ground electrodes, bands on the top and bottom faces carry
//! the DC segments.  The polyimide bulk is not part of the electrostatic
//! problem.

mod builders;
mod validate;

pub use builders::{
    build_lens_mesh, build_trap_mesh, cylinder_shell, plate_pair, rect_electrode, sphere_mesh,
};
pub use validate::{validate_mesh, MeshReport};

use crate::error::{CoreError, CoreResult};
use crate::vec3::Vec3;

/// Identity of one physical electrode surface.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ElectrodeId {
    /// RF front faces (one opposing blade pair).
    Rf,
    /// Grounded front faces (the other blade pair).
    RfGround,
    /// DC band: `blade` in 0..4, `segment` 1-based.
    Dc { blade: u8, segment: u8 },
    /// Deflection plate.
    Deflector { index: u8 },
    /// Einzel-lens tube electrode, 0..3 along the beam.
    Lens { index: u8 },
    /// Grounded enclosure tube around the trap.
    Shield,
    /// Auxiliary electrode (validation shapes).
    Aux(u32),
}

/// Electrical drive channel; DC segments are ganged across blades.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ChannelId {
    Rf,
    RfGround,
    /// Ganged DC segment (all blades, top and bottom bands), 1-based.
    Dc(u8),
    Deflector(u8),
    Lens(u8),
    Shield,
    Aux(u32),
}

impl ElectrodeId {
    pub fn channel(self) -> ChannelId {
        match self {
            ElectrodeId::Rf => ChannelId::Rf,
            ElectrodeId::RfGround => ChannelId::RfGround,
            ElectrodeId::Dc { segment, .. } => ChannelId::Dc(segment),
            ElectrodeId::Deflector { index } => ChannelId::Deflector(index),
            ElectrodeId::Lens { index } => ChannelId::Lens(index),
            ElectrodeId::Shield => ChannelId::Shield,
            ElectrodeId::Aux(k) => ChannelId::Aux(k),
        }
    }
}

impl core::fmt::Display for ElectrodeId {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            ElectrodeId::Rf => write!(f, "rf"),
            ElectrodeId::RfGround => write!(f, "rf_ground"),
            ElectrodeId::Dc { blade, segment } => write!(f, "dc_b{blade}_s{segment}"),
            ElectrodeId::Deflector { index } => write!(f, "defl_{index}"),
            ElectrodeId::Lens { index } => write!(f, "lens_{index}"),
            ElectrodeId::Shield => write!(f, "shield"),
            ElectrodeId::Aux(k) => write!(f, "aux_{k}"),
        }
    }
}

impl core::fmt::Display for ChannelId {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            ChannelId::Rf => write!(f, "rf"),
            ChannelId::RfGround => write!(f, "rf_ground"),
            ChannelId::Dc(s) => write!(f, "dc_{s}"),
            ChannelId::Deflector(i) => write!(f, "defl_{i}"),
            ChannelId::Lens(i) => write!(f, "lens_{i}"),
            ChannelId::Shield => write!(f, "shield"),
            ChannelId::Aux(k) => write!(f, "aux_{k}"),
        }
    }
}

/// Vertex set of a panel: planar triangle or quadrilateral.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PanelShape {
    Tri([Vec3; 3]),
    Quad([Vec3; 4]),
}

/// One flat conducting surface element.
#[derive(Debug, Clone, PartialEq)]
pub struct Panel {
    pub shape: PanelShape,
    pub centroid: Vec3,
    /// m^2
    pub area: f64,
    /// Unit normal; orientation fixed by vertex winding (right-hand rule).
    pub normal: Vec3,
    pub electrode: ElectrodeId,
}

impl Panel {
    pub fn tri(v: [Vec3; 3], electrode: ElectrodeId) -> Panel {
        let n = (v[1] - v[0]).cross(v[2] - v[0]);
        let area = 0.5 * n.norm();
        Panel {
            shape: PanelShape::Tri(v),
            centroid: (v[0] + v[1] + v[2]) / 3.0,
            area,
            normal: n.normalized(),
            electrode,
        }
    }

    /// Planar quad with vertices wound counterclockwise about the normal.
    pub fn quad(v: [Vec3; 4], electrode: ElectrodeId) -> Panel {
        let n1 = (v[1] - v[0]).cross(v[3] - v[0]);
        let a1 = 0.5 * (v[1] - v[0]).cross(v[2] - v[0]).norm();
        let a2 = 0.5 * (v[2] - v[0]).cross(v[3] - v[0]).norm();
        let c1 = (v[0] + v[1] + v[2]) / 3.0;
        let c2 = (v[0] + v[2] + v[3]) / 3.0;
        let area = a1 + a2;
        Panel {
            shape: PanelShape::Quad(v),
            centroid: (c1 * a1 + c2 * a2) / area,
            area,
            normal: n1.normalized(),
            electrode,
        }
    }

    pub fn vertices(&self) -> &[Vec3] {
        match &self.shape {
            PanelShape::Tri(v) => v,
            PanelShape::Quad(v) => v,
        }
    }

    /// Largest vertex-to-vertex distance.
    pub fn diameter(&self) -> f64 {
        let v = self.vertices();
        let mut d2: f64 = 0.0;
        for i in 0..v.len() {
            for j in (i + 1)..v.len() {
                d2 = d2.max((v[i] - v[j]).norm_sq());
            }
        }
        d2.sqrt()
    }
}

/// Collection of panels grouped by electrode.
#[derive(Debug, Clone, Default)]
pub struct ElectrodeMesh {
    pub panels: Vec<Panel>,
}

impl ElectrodeMesh {
    pub fn len(&self) -> usize {
        self.panels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.panels.is_empty()
    }

    pub fn extend(&mut self, other: ElectrodeMesh) {
        self.panels.extend(other.panels);
    }

    /// Distinct electrode ids, sorted.
    pub fn electrode_ids(&self) -> Vec<ElectrodeId> {
        let mut ids: Vec<ElectrodeId> = self.panels.iter().map(|p| p.electrode).collect();
        ids.sort();
        ids.dedup();
        ids
    }

    /// Distinct electrical channels, sorted.
    pub fn channels(&self) -> Vec<ChannelId> {
        let mut ids: Vec<ChannelId> = self
            .panels
            .iter()
            .map(|p| p.electrode.channel())
            .collect();
        ids.sort();
        ids.dedup();
        ids
    }

    pub fn total_area(&self, id: ElectrodeId) -> f64 {
        self.panels
            .iter()
            .filter(|p| p.electrode == id)
            .map(|p| p.area)
            .sum()
    }

    pub fn centroids(&self) -> Vec<Vec3> {
        self.panels.iter().map(|p| p.centroid).collect()
    }
}

/// Parametric description of the segmented trap.
#[derive(Debug, Clone, PartialEq)]
pub struct TrapSpec {
    /// Blade thickness = width of the metallized front face, m.
    pub blade_thickness: f64,
    /// Blade length along the trap axis, m.
    pub blade_length: f64,
    /// Distance between inner front faces of opposing blades, m.
    pub face_separation: f64,
    /// Conductor width of one DC segment along the axis, m.
    pub segment_width: f64,
    /// Insulation gap between adjacent segments, m.
    pub segment_gap: f64,
    /// Number of DC segments per blade.
    pub n_segments: u8,
    /// Width of the metallized front face, m (equal to the blade thickness
    /// in the reference design).
    pub rf_face_width: f64,
    /// Radial extent of the DC bands on the blade top/bottom faces, m.
    pub dc_band_depth: f64,
    /// Radial clearance between the front-face metallization and the DC
    /// bands, m.
    pub dc_band_setback: f64,
    pub deflector: DeflectorSpec,
    /// Grounded enclosure tube; kills the open-structure monopole tail the
    /// way the real vacuum chamber does.
    pub shield: Option<ShieldSpec>,
}

/// Coaxial grounded tube around the trap, open at both ends.
#[derive(Debug, Clone, PartialEq)]
pub struct ShieldSpec {
    pub radius: f64,
    pub z_min: f64,
    pub z_max: f64,
    /// Coarse panel target for the tube.
    pub panel_size: f64,
}

impl Default for ShieldSpec {
    fn default() -> Self {
        ShieldSpec {
            radius: 12e-3,
            z_min: -45e-3,
            z_max: 65e-3,
            panel_size: 3e-3,
        }
    }
}

/// Two flat deflection plates downstream of the trap, normal to +/-x.
#[derive(Debug, Clone, PartialEq)]
pub struct DeflectorSpec {
    /// Square plate side, m.
    pub size: f64,
    /// Distance between the plates, m.
    pub gap: f64,
    /// Axial position of the plate centers (from the trap center), m.
    pub z_center: f64,
}

impl Default for DeflectorSpec {
    fn default() -> Self {
        DeflectorSpec {
            size: 4.0e-3,
            gap: 4.0e-3,
            z_center: 36.0e-3,
        }
    }
}

impl Default for TrapSpec {
    fn default() -> Self {
        TrapSpec {
            blade_thickness: 410e-6,
            blade_length: 65e-3,
            face_separation: 2e-3,
            segment_width: 0.7e-3,
            segment_gap: 0.05e-3,
            n_segments: 8,
            rf_face_width: 410e-6,
            dc_band_depth: 1.2e-3,
            dc_band_setback: 0.3e-3,
            deflector: DeflectorSpec::default(),
            shield: Some(ShieldSpec::default()),
        }
    }
}

impl TrapSpec {
    /// Axial pitch of the DC segments.
    pub fn segment_pitch(&self) -> f64 {
        self.segment_width + self.segment_gap
    }

    /// Axial span [lo, hi] of the conductor of 1-based segment k.
    pub fn segment_span(&self, k: u8) -> (f64, f64) {
        let center = (k as f64 - (self.n_segments as f64 + 1.0) / 2.0) * self.segment_pitch();
        (
            center - self.segment_width / 2.0,
            center + self.segment_width / 2.0,
        )
    }

    pub fn validate(&self) -> CoreResult<()> {
        let all = [
            ("blade_thickness", self.blade_thickness),
            ("blade_length", self.blade_length),
            ("face_separation", self.face_separation),
            ("segment_width", self.segment_width),
            ("rf_face_width", self.rf_face_width),
            ("dc_band_depth", self.dc_band_depth),
            ("deflector.size", self.deflector.size),
            ("deflector.gap", self.deflector.gap),
        ];
        for (name, v) in all {
            if !(v > 0.0) {
                return Err(CoreError::Geometry(format!("{name} must be > 0, got {v}")));
            }
        }
        if self.segment_gap < 0.0 || self.dc_band_setback < 0.0 {
            return Err(CoreError::Geometry(
                "segment_gap and dc_band_setback must be >= 0".into(),
            ));
        }
        if self.n_segments < 1 {
            return Err(CoreError::Geometry("n_segments must be >= 1".into()));
        }
        if self.segment_width * self.n_segments as f64 > self.blade_length {
            return Err(CoreError::Geometry(format!(
                "segments do not fit: segment_width * n_segments = {:.4e} exceeds blade_length = {:.4e}",
                self.segment_width * self.n_segments as f64,
                self.blade_length
            )));
        }
        if self.segment_pitch() * self.n_segments as f64 > self.blade_length {
            return Err(CoreError::Geometry(
                "segments with gaps do not fit on the blade".into(),
            ));
        }
        if self.blade_thickness >= self.face_separation {
            return Err(CoreError::Geometry(format!(
                "overlapping blades: blade_thickness = {:.4e} must be smaller than face_separation = {:.4e}",
                self.blade_thickness, self.face_separation
            )));
        }
        if self.rf_face_width > self.blade_thickness {
            return Err(CoreError::Geometry(
                "rf_face_width exceeds the blade thickness".into(),
            ));
        }
        if let Some(sh) = &self.shield {
            let reach = (self.face_separation / 2.0 + self.dc_band_setback + self.dc_band_depth)
                .max(self.deflector.gap / 2.0);
            if sh.radius <= reach {
                return Err(CoreError::Geometry(format!(
                    "shield radius {:.3e} must clear the electrodes (outermost reach {:.3e})",
                    sh.radius, reach
                )));
            }
            if !(sh.z_max > sh.z_min) || !(sh.panel_size > 0.0) {
                return Err(CoreError::Geometry("invalid shield extent".into()));
            }
        }
        Ok(())
    }
}

/// Three-tube einzel lens, coaxial with the beam axis.
#[derive(Debug, Clone, PartialEq)]
pub struct LensSpec {
    pub bore_diameter: f64,
    /// Design focal length; used by the focusing search, not by the mesh.
    pub focal_length_target: f64,
    /// Length of each tube electrode along the axis, m.
    pub electrode_length: f64,
    /// Gap between adjacent tube electrodes, m.
    pub gap: f64,
    /// Axial position of the lens center (middle of the center electrode), m.
    pub center_z: f64,
    /// Voltage applied to the center electrode, V (outer tubes grounded).
    pub center_voltage: f64,
}

impl Default for LensSpec {
    fn default() -> Self {
        LensSpec {
            bore_diameter: 1e-3,
            focal_length_target: 9e-3,
            electrode_length: 2e-3,
            gap: 0.5e-3,
            center_z: 287e-3,
            center_voltage: 2000.0,
        }
    }
}

impl LensSpec {
    pub fn validate(&self) -> CoreResult<()> {
        if !(self.bore_diameter > 0.0) {
            return Err(CoreError::Geometry("lens bore_diameter must be > 0".into()));
        }
        if !(self.electrode_length > 0.0) {
            return Err(CoreError::Geometry(
                "lens electrode_length must be > 0".into(),
            ));
        }
        if !(self.gap > 0.0) {
            return Err(CoreError::Geometry(
                "lens electrodes overlap: gap must be > 0".into(),
            ));
        }
        Ok(())
    }

    /// Total axial extent of the three tubes and two gaps.
    pub fn total_length(&self) -> f64 {
        3.0 * self.electrode_length + 2.0 * self.gap
    }
}

/// Full scene: trap plus downstream planes and optional lens.
#[derive(Debug, Clone, PartialEq)]
pub struct SceneSpec {
    pub trap: TrapSpec,
    pub lens: Option<LensSpec>,
    /// Aperture stop radius; `None` = no aperture.
    pub aperture_radius: Option<f64>,
    /// Axial position of the aperture plane, m.
    pub aperture_distance: f64,
    /// Axial position of the detector plane, m.
    pub detector_distance: f64,
    /// Axial position of the measurement (spot/divergence) plane, m.
    pub measurement_plane_distance: f64,
}

impl Default for SceneSpec {
    fn default() -> Self {
        SceneSpec {
            trap: TrapSpec::default(),
            lens: None,
            aperture_radius: None,
            aperture_distance: 280e-3,
            detector_distance: 287e-3,
            measurement_plane_distance: 257e-3,
        }
    }
}

impl SceneSpec {
    pub fn validate(&self) -> CoreResult<()> {
        self.trap.validate()?;
        if let Some(lens) = &self.lens {
            lens.validate()?;
        }
        for (name, d) in [
            ("measurement_plane_distance", self.measurement_plane_distance),
            ("aperture_distance", self.aperture_distance),
            ("detector_distance", self.detector_distance),
        ] {
            if !(d > 0.0) {
                return Err(CoreError::Geometry(format!("{name} must be > 0")));
            }
        }
        if self.measurement_plane_distance >= self.detector_distance
            || self.aperture_distance > self.detector_distance
        {
            return Err(CoreError::Geometry(
                "scene planes must increase along the beam axis (measurement < detector, aperture <= detector)".into(),
            ));
        }
        Ok(())
    }
}
