//! Discretized soil column: node positions and per-element / per-node material data.
//!
//! Indexing follows the mesh: nodes `0..=κ` with node 0 at the surface, elements
//! `0..κ` where element `e` spans nodes `e` and `e + 1`. Conductivities are
//! piecewise constant (one value per element); capacities and latent heat are
//! nodal values of piecewise-linear fields.

use serde::{Deserialize, Serialize};

use crate::error::ModelError;

/// Thermal constants of one soil material, SI units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Material {
    /// W/(m·K)
    pub k_frozen: f64,
    /// W/(m·K); only reachable at exactly 0 °C, where it never enters a flux.
    pub k_mushy: f64,
    /// W/(m·K)
    pub k_unfrozen: f64,
    /// J/(m³·K)
    pub c_frozen: f64,
    /// J/(m³·K)
    pub c_unfrozen: f64,
    /// Volumetric latent heat of fusion, J/m³
    pub latent_heat: f64,
}

impl Material {
    /// Permafrost-like benchmark soil used by the shipped Neumann configs.
    pub const PERMAFROST_BENCHMARK: Material = Material {
        k_frozen: 2.5,
        k_mushy: 2.0,
        k_unfrozen: 1.5,
        c_frozen: 2.0e6,
        c_unfrozen: 3.0e6,
        latent_heat: 1.0e8,
    };

    pub fn validate(&self) -> Result<(), ModelError> {
        let fields = [
            ("k_frozen", self.k_frozen),
            ("k_mushy", self.k_mushy),
            ("k_unfrozen", self.k_unfrozen),
            ("c_frozen", self.c_frozen),
            ("c_unfrozen", self.c_unfrozen),
            ("latent_heat", self.latent_heat),
        ];
        for (name, value) in fields {
            check_positive(name, 0, value)?;
        }
        Ok(())
    }

    fn lerp(&self, other: &Material, w: f64) -> Material {
        let mix = |a: f64, b: f64| a + w * (b - a);
        Material {
            k_frozen: mix(self.k_frozen, other.k_frozen),
            k_mushy: mix(self.k_mushy, other.k_mushy),
            k_unfrozen: mix(self.k_unfrozen, other.k_unfrozen),
            c_frozen: mix(self.c_frozen, other.c_frozen),
            c_unfrozen: mix(self.c_unfrozen, other.c_unfrozen),
            latent_heat: mix(self.latent_heat, other.latent_heat),
        }
    }
}

/// A horizontal soil layer of uniform material.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    /// m
    pub thickness: f64,
    pub material: Material,
}

/// How the column depth is subdivided into elements.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MeshSpec {
    Uniform {
        elements: usize,
    },
    /// Geometric grading: each element is `ratio` times thicker than the one above.
    Graded {
        elements: usize,
        ratio: f64,
    },
}

impl MeshSpec {
    pub fn elements(&self) -> usize {
        match *self {
            MeshSpec::Uniform { elements } | MeshSpec::Graded { elements, .. } => elements,
        }
    }

    /// Node depths covering `[0, depth]`.
    pub fn node_depths(&self, depth: f64) -> Result<Vec<f64>, ModelError> {
        check_positive("depth", 0, depth)?;
        let kappa = self.elements();
        if kappa == 0 {
            return Err(ModelError::TooFewNodes(1));
        }
        let mut nodes = Vec::with_capacity(kappa + 1);
        match *self {
            MeshSpec::Uniform { .. } => {
                nodes.extend((0..=kappa).map(|i| depth * i as f64 / kappa as f64));
            }
            MeshSpec::Graded { ratio, .. } => {
                check_positive("ratio", 0, ratio)?;
                if (ratio - 1.0).abs() < 1e-12 {
                    nodes.extend((0..=kappa).map(|i| depth * i as f64 / kappa as f64));
                } else {
                    let total = ratio.powi(kappa as i32) - 1.0;
                    nodes.extend((0..=kappa).map(|i| depth * (ratio.powi(i as i32) - 1.0) / total));
                }
            }
        }
        nodes[kappa] = depth;
        Ok(nodes)
    }
}

/// The discretized domain with all material data the discrete equations need.
#[derive(Debug, Clone, PartialEq)]
pub struct SoilColumn {
    nodes: Vec<f64>,
    h: Vec<f64>,
    k_frozen: Vec<f64>,
    k_mushy: Vec<f64>,
    k_unfrozen: Vec<f64>,
    c_frozen: Vec<f64>,
    c_unfrozen: Vec<f64>,
    latent_heat: Vec<f64>,
}

impl SoilColumn {
    /// Element arrays have length κ, node arrays κ + 1, where κ = `nodes.len() - 1`.
    pub fn new(
        nodes: Vec<f64>,
        k_frozen: Vec<f64>,
        k_mushy: Vec<f64>,
        k_unfrozen: Vec<f64>,
        c_frozen: Vec<f64>,
        c_unfrozen: Vec<f64>,
        latent_heat: Vec<f64>,
    ) -> Result<Self, ModelError> {
        if nodes.len() < 2 {
            return Err(ModelError::TooFewNodes(nodes.len()));
        }
        if nodes[0] != 0.0 {
            return Err(ModelError::SurfaceNotAtZero(nodes[0]));
        }
        let kappa = nodes.len() - 1;
        let mut h = Vec::with_capacity(kappa);
        for i in 1..=kappa {
            let size = nodes[i] - nodes[i - 1];
            if !(size > 0.0 && size.is_finite()) {
                return Err(ModelError::NonIncreasingNodes {
                    index: i,
                    depth: nodes[i],
                });
            }
            h.push(size);
        }
        for (name, values, expected) in [
            ("k_frozen", &k_frozen, kappa),
            ("k_mushy", &k_mushy, kappa),
            ("k_unfrozen", &k_unfrozen, kappa),
            ("c_frozen", &c_frozen, kappa + 1),
            ("c_unfrozen", &c_unfrozen, kappa + 1),
            ("latent_heat", &latent_heat, kappa + 1),
        ] {
            if values.len() != expected {
                return Err(ModelError::LengthMismatch {
                    name,
                    got: values.len(),
                    expected,
                });
            }
            for (index, &value) in values.iter().enumerate() {
                check_positive(name, index, value)?;
            }
        }
        Ok(SoilColumn {
            nodes,
            h,
            k_frozen,
            k_mushy,
            k_unfrozen,
            c_frozen,
            c_unfrozen,
            latent_heat,
        })
    }

    /// Single-material column.
    pub fn homogeneous(material: Material, depth: f64, mesh: MeshSpec) -> Result<Self, ModelError> {
        build_column(
            &[Layer {
                thickness: depth,
                material,
            }],
            mesh,
        )
    }

    /// Number of elements κ (also the number of unknowns).
    pub fn elements(&self) -> usize {
        self.h.len()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn depth(&self) -> f64 {
        self.nodes[self.elements()]
    }

    pub fn element_sizes(&self) -> &[f64] {
        &self.h
    }

    pub fn element_size(&self, element: usize) -> f64 {
        self.h[element]
    }

    pub fn min_element_size(&self) -> f64 {
        self.h.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn k_frozen(&self) -> &[f64] {
        &self.k_frozen
    }

    pub fn k_mushy(&self) -> &[f64] {
        &self.k_mushy
    }

    pub fn k_unfrozen(&self) -> &[f64] {
        &self.k_unfrozen
    }

    pub fn c_frozen(&self) -> &[f64] {
        &self.c_frozen
    }

    pub fn c_unfrozen(&self) -> &[f64] {
        &self.c_unfrozen
    }

    pub fn latent_heat(&self) -> &[f64] {
        &self.latent_heat
    }

    /// Split every element into `factor` equal sub-elements. Conductivities are
    /// copied, nodal fields are linearly interpolated (they live in the P1 space).
    pub fn refine(&self, factor: usize) -> Result<SoilColumn, ModelError> {
        if factor == 0 {
            return Err(ModelError::InvalidParameter {
                name: "refinement",
                value: 0.0,
                reason: "must be at least 1",
            });
        }
        let kappa = self.elements();
        let fine = kappa * factor;
        let mut nodes = Vec::with_capacity(fine + 1);
        let mut c_f = Vec::with_capacity(fine + 1);
        let mut c_u = Vec::with_capacity(fine + 1);
        let mut lat = Vec::with_capacity(fine + 1);
        let mut k_f = Vec::with_capacity(fine);
        let mut k_m = Vec::with_capacity(fine);
        let mut k_u = Vec::with_capacity(fine);
        for e in 0..kappa {
            for s in 0..factor {
                let w = s as f64 / factor as f64;
                let lerp = |v: &[f64]| v[e] + w * (v[e + 1] - v[e]);
                nodes.push(self.nodes[e] + w * self.h[e]);
                c_f.push(lerp(&self.c_frozen));
                c_u.push(lerp(&self.c_unfrozen));
                lat.push(lerp(&self.latent_heat));
                k_f.push(self.k_frozen[e]);
                k_m.push(self.k_mushy[e]);
                k_u.push(self.k_unfrozen[e]);
            }
        }
        nodes.push(self.depth());
        c_f.push(self.c_frozen[kappa]);
        c_u.push(self.c_unfrozen[kappa]);
        lat.push(self.latent_heat[kappa]);
        SoilColumn::new(nodes, k_f, k_m, k_u, c_f, c_u, lat)
    }
}

/// Assemble a column from stacked layers.
///
/// Element conductivities come from the layer containing the element midpoint.
/// Nodal capacities and latent heats come from the layer containing the node;
/// a node sitting on a layer interface takes the arithmetic mean of both layers.
pub fn build_column(layers: &[Layer], mesh: MeshSpec) -> Result<SoilColumn, ModelError> {
    if layers.is_empty() {
        return Err(ModelError::NoLayers);
    }
    for (index, layer) in layers.iter().enumerate() {
        check_positive("layer thickness", index, layer.thickness)?;
        layer.material.validate()?;
    }
    let mut bounds = Vec::with_capacity(layers.len());
    let mut acc = 0.0;
    for layer in layers {
        acc += layer.thickness;
        bounds.push(acc);
    }
    let depth = acc;
    let nodes = mesh.node_depths(depth)?;
    let kappa = nodes.len() - 1;
    let snap = 1e-9 * depth.max(1.0);

    let layer_at = |x: f64| -> usize { bounds.iter().position(|&b| x < b).unwrap_or(layers.len() - 1) };

    let mut k_f = Vec::with_capacity(kappa);
    let mut k_m = Vec::with_capacity(kappa);
    let mut k_u = Vec::with_capacity(kappa);
    for e in 0..kappa {
        let m = &layers[layer_at(0.5 * (nodes[e] + nodes[e + 1]))].material;
        k_f.push(m.k_frozen);
        k_m.push(m.k_mushy);
        k_u.push(m.k_unfrozen);
    }

    let mut c_f = Vec::with_capacity(kappa + 1);
    let mut c_u = Vec::with_capacity(kappa + 1);
    let mut lat = Vec::with_capacity(kappa + 1);
    for &x in &nodes {
        let interface = bounds[..layers.len() - 1].iter().position(|&b| (x - b).abs() <= snap);
        let m = match interface {
            Some(l) => layers[l].material.lerp(&layers[l + 1].material, 0.5),
            None => layers[layer_at(x)].material,
        };
        c_f.push(m.c_frozen);
        c_u.push(m.c_unfrozen);
        lat.push(m.latent_heat);
    }
    SoilColumn::new(nodes, k_f, k_m, k_u, c_f, c_u, lat)
}

fn check_positive(name: &'static str, index: usize, value: f64) -> Result<(), ModelError> {
    if value > 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(ModelError::NonPositive { name, index, value })
    }
}
