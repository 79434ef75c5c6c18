//! Job configuration files. Every rejection names the offending value by
//! its JSON pointer.

use std::path::{Path, PathBuf};

use betti_core::betti_heights::{FullHeightOptions, QuadOptions};
use betti_core::brody::ZoomOptions;
use betti_core::forms_generic::ProductMap;
use betti_core::{Disc, EllipticSurface, Section};
use serde::de::DeserializeOwned;
use serde_json::{Map, Value};

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq)]
pub struct BrodyConfig {
    pub disc: Disc,
    pub ns: Vec<i64>,
    pub target_c: f64,
    pub probe_radius: f64,
    pub grid_n: usize,
    pub tol: f64,
    pub zoom: ZoomOptions,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Outputs {
    pub csv: Option<PathBuf>,
    pub svg: Option<PathBuf>,
}

#[derive(Debug, Clone)]
pub struct JobConfig {
    pub name: Option<String>,
    pub surface: Option<EllipticSurface>,
    pub sections: Vec<Section>,
    pub discs: Vec<Disc>,
    pub quadrature: QuadOptions,
    pub tate_iters: u32,
    pub full: FullHeightOptions,
    pub m_max: i64,
    pub map: Option<ProductMap>,
    pub family: Option<ProductMap>,
    pub brody: Option<BrodyConfig>,
    pub outputs: Outputs,
    /// The input as parsed; hashed for the cache.
    pub raw: Value,
}

const KNOWN: [&str; 13] = [
    "name",
    "surface",
    "sections",
    "discs",
    "quadrature",
    "tate_iters",
    "full",
    "m_max",
    "map",
    "family",
    "brody",
    "outputs",
    "description",
];

fn typed<T: DeserializeOwned>(v: &Value, pointer: &str) -> Result<T, CliError> {
    serde_json::from_value(v.clone()).map_err(|e| CliError::validation(pointer, e.to_string()))
}

fn field<T: DeserializeOwned>(
    obj: &Map<String, Value>,
    key: &str,
    base: &str,
) -> Result<Option<T>, CliError> {
    obj.get(key)
        .map(|v| typed(v, &format!("{base}/{key}")))
        .transpose()
}

fn product_map(v: &Value, pointer: &str) -> Result<ProductMap, CliError> {
    let obj = v
        .as_object()
        .ok_or_else(|| CliError::validation(pointer, "expected an object"))?;
    let comps = obj
        .get("components")
        .and_then(Value::as_array)
        .ok_or_else(|| {
            CliError::validation(
                format!("{pointer}/components"),
                "missing array of expressions",
            )
        })?;
    if comps.is_empty() {
        return Err(CliError::validation(
            format!("{pointer}/components"),
            "at least one component required",
        ));
    }
    let mut components = Vec::with_capacity(comps.len());
    for (i, c) in comps.iter().enumerate() {
        let at = format!("{pointer}/components/{i}");
        let e = betti_core::forms_generic::HolExpr::from_json_at(c, &at).map_err(|e| match e {
            betti_core::forms_generic::FormsError::Parse { pointer, message } => {
                CliError::validation(pointer, message)
            }
            other => CliError::validation(at.clone(), other.to_string()),
        })?;
        components.push(e);
    }
    let map = match obj.get("weights") {
        Some(w) => {
            let w: Vec<f64> = typed(w, &format!("{pointer}/weights"))?;
            ProductMap::with_weights(components, w)
        }
        None => ProductMap::new(components),
    };
    map.map_err(|e| CliError::validation(pointer, e.to_string()))
}

fn brody(v: &Value) -> Result<BrodyConfig, CliError> {
    let base = "/brody";
    let obj = v
        .as_object()
        .ok_or_else(|| CliError::validation(base, "expected an object"))?;
    let disc: Disc = field(obj, "disc", base)?
        .ok_or_else(|| CliError::validation(format!("{base}/disc"), "missing disc"))?;
    let ns: Vec<i64> = field(obj, "ns", base)?.unwrap_or_else(|| vec![4, 8, 16, 32]);
    if ns.is_empty() || ns.iter().any(|n| *n < 1) {
        return Err(CliError::validation(
            format!("{base}/ns"),
            "indices must be positive and nonempty",
        ));
    }
    let positive = |key: &str, default: f64| -> Result<f64, CliError> {
        let x: f64 = field(obj, key, base)?.unwrap_or(default);
        if x > 0.0 && x.is_finite() {
            Ok(x)
        } else {
            Err(CliError::validation(
                format!("{base}/{key}"),
                "must be positive",
            ))
        }
    };
    let grid_n: usize = field(obj, "grid_n", base)?.unwrap_or(33);
    if grid_n < 2 {
        return Err(CliError::validation(
            format!("{base}/grid_n"),
            "must be at least 2",
        ));
    }
    Ok(BrodyConfig {
        disc,
        target_c: positive("target_c", 1.0)?,
        probe_radius: positive("probe_radius", 1.0)?,
        tol: positive("tol", 1e-2)?,
        grid_n,
        zoom: field(obj, "zoom", base)?.unwrap_or_default(),
        ns,
    })
}

impl JobConfig {
    pub fn from_value(raw: Value) -> Result<JobConfig, CliError> {
        let obj = raw
            .as_object()
            .ok_or_else(|| CliError::validation("", "config must be a JSON object"))?;
        for k in obj.keys() {
            if !KNOWN.contains(&k.as_str()) {
                return Err(CliError::validation(format!("/{k}"), "unknown field"));
            }
        }
        let surface: Option<EllipticSurface> = field(obj, "surface", "")?;
        let mut sections = Vec::new();
        if let Some(v) = obj.get("sections") {
            let arr = v
                .as_array()
                .ok_or_else(|| CliError::validation("/sections", "expected an array"))?;
            for (i, s) in arr.iter().enumerate() {
                let at = format!("/sections/{i}");
                let sec: Section = typed(s, &at)?;
                match &surface {
                    Some(surf) if !surf.contains(&sec) => {
                        return Err(CliError::validation(
                            at,
                            "section does not lie on the surface",
                        ));
                    }
                    None => {
                        return Err(CliError::validation("/surface", "sections need a surface"))
                    }
                    _ => {}
                }
                sections.push(sec);
            }
        }
        let mut discs = Vec::new();
        if let Some(v) = obj.get("discs") {
            let arr = v
                .as_array()
                .ok_or_else(|| CliError::validation("/discs", "expected an array"))?;
            for (i, d) in arr.iter().enumerate() {
                let at = format!("/discs/{i}");
                let disc: Disc = typed(d, &at)?;
                if let Some(surf) = &surface {
                    disc.check_against(surf)
                        .map_err(|e| CliError::validation(at.clone(), e.to_string()))?;
                }
                discs.push(disc);
            }
        }
        let quadrature: QuadOptions = field(obj, "quadrature", "")?.unwrap_or_default();
        if !(quadrature.tol > 0.0) {
            return Err(CliError::validation("/quadrature/tol", "must be positive"));
        }
        if quadrature.max_levels < 2 {
            return Err(CliError::validation(
                "/quadrature/max_levels",
                "must be at least 2",
            ));
        }
        if quadrature.initial_n < 8 {
            return Err(CliError::validation(
                "/quadrature/initial_n",
                "must be at least 8",
            ));
        }
        let tate_iters: u32 = field(obj, "tate_iters", "")?.unwrap_or(6);
        if tate_iters > 10 {
            return Err(CliError::validation(
                "/tate_iters",
                "at most 10 doubling steps",
            ));
        }
        let m_max: i64 = field(obj, "m_max", "")?.unwrap_or(3);
        if m_max < 1 {
            return Err(CliError::validation("/m_max", "must be at least 1"));
        }
        let outputs = match obj.get("outputs") {
            Some(Value::Object(o)) => Outputs {
                csv: field(o, "csv", "/outputs")?,
                svg: field(o, "svg", "/outputs")?,
            },
            Some(_) => return Err(CliError::validation("/outputs", "expected an object")),
            None => Outputs::default(),
        };
        Ok(JobConfig {
            name: field(obj, "name", "")?,
            surface,
            sections,
            discs,
            quadrature,
            tate_iters,
            full: field(obj, "full", "")?.unwrap_or_default(),
            m_max,
            map: obj.get("map").map(|v| product_map(v, "/map")).transpose()?,
            family: obj
                .get("family")
                .map(|v| product_map(v, "/family"))
                .transpose()?,
            brody: obj.get("brody").map(brody).transpose()?,
            outputs,
            raw,
        })
    }

    pub fn load(path: &Path) -> Result<JobConfig, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        JobConfig::from_text(&text)
    }

    pub fn from_text(text: &str) -> Result<JobConfig, CliError> {
        let raw: Value =
            serde_json::from_str(text).map_err(|e| CliError::validation("", e.to_string()))?;
        JobConfig::from_value(raw)
    }

    pub fn surface(&self) -> Result<&EllipticSurface, CliError> {
        self.surface
            .as_ref()
            .ok_or_else(|| CliError::validation("/surface", "missing field"))
    }

    pub fn section(&self, i: usize) -> Result<&Section, CliError> {
        if self.sections.is_empty() {
            return Err(CliError::validation(
                "/sections",
                "missing field: at least one section required",
            ));
        }
        self.sections.get(i).ok_or_else(|| {
            CliError::validation(format!("/sections/{i}"), "no section with this index")
        })
    }

    pub fn disc(&self, i: usize) -> Result<Disc, CliError> {
        if self.discs.is_empty() {
            return Err(CliError::validation(
                "/discs",
                "missing field: at least one disc required",
            ));
        }
        self.discs
            .get(i)
            .copied()
            .ok_or_else(|| CliError::validation(format!("/discs/{i}"), "no disc with this index"))
    }
}
