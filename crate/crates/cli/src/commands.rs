use std::f64::consts::PI;
use std::path::Path;

use betti_core::betti_heights::{
    betti_density, full_height_with, gram, nondeg_ratio, partial_height, partial_heights,
    BUNDLE_DEGREE,
};
use betti_core::brody::{
    brody_reparametrize, interior_ratio, limit_probe, zoom_sequence, BrodyError,
};
use betti_core::forms_generic::{counterexample_sweep, example_family, sweep_csv, Schedule};
use betti_core::periods::{
    betti_path, elliptic_log, fiber_periods, lattice_continue, lattice_coords,
};
use betti_core::{Disc, EllipticSurface, Precision, Section};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use crate::config::{BrodyConfig, JobConfig};
use crate::error::CliError;

pub type Outcome = Result<Value, CliError>;

fn num<E: std::fmt::Debug + std::fmt::Display>(e: E) -> CliError {
    CliError::numerical(e)
}

fn write_artifact(path: &Path, text: &str) -> Result<(), CliError> {
    std::fs::write(path, text).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

pub fn height(cfg: &JobConfig, section: usize) -> Outcome {
    let s = cfg.surface()?;
    let p = cfg.section(section)?;
    let t = s.tate_height(p, cfg.tate_iters).map_err(num)?;
    Ok(json!({
        "section": section,
        "naive": s.naive_height(p),
        "tate": t.value,
        "err": t.error,
        "estimates": t.estimates,
        "degrees": t.degrees,
        "quasi_constant": t.quasi_constant,
    }))
}

pub fn partial(
    cfg: &JobConfig,
    section: usize,
    disc: usize,
    csv: Option<&Path>,
    svg: Option<&Path>,
) -> Outcome {
    let s = cfg.surface()?;
    let p = cfg.section(section)?;
    let d = cfg.disc(disc)?;
    let r = partial_height(s, p, d, &cfg.quadrature).map_err(num)?;
    if csv.is_some() || svg.is_some() {
        let n = r.levels.last().map_or(cfg.quadrature.initial_n, |l| l.n);
        let field = lattice_continue(s, d, n).map_err(num)?;
        let path = betti_path(s, p, &field).map_err(num)?;
        let grid = betti_density(&field, &path, BUNDLE_DEGREE).map_err(num)?;
        if let Some(c) = csv {
            write_artifact(c, &grid.to_csv())?;
        }
        if let Some(v) = svg {
            write_artifact(v, &grid.to_svg())?;
        }
    }
    Ok(
        json!({"section": section, "disc": disc, "value": r.value, "err": r.error, "levels": r.levels}),
    )
}

pub fn full(cfg: &JobConfig, section: usize) -> Outcome {
    let s = cfg.surface()?;
    let p = cfg.section(section)?;
    let f = full_height_with(s, p, &cfg.full).map_err(num)?;
    let t = s.tate_height(p, cfg.tate_iters).map_err(num)?;
    let difference = (f.value - t.value).abs();
    let bound = (1e-2 * t.value).max(f.error + t.error);
    Ok(json!({
        "section": section,
        "full": f.value,
        "full_err": f.error,
        "tate": t.value,
        "tate_err": t.error,
        "difference": difference,
        "bound": bound,
        "identity_holds": difference <= bound,
    }))
}

pub fn gram_cmd(cfg: &JobConfig, disc: usize) -> Outcome {
    let s = cfg.surface()?;
    cfg.section(0)?;
    let g = gram(s, &cfg.sections, cfg.disc(disc)?, &cfg.quadrature).map_err(num)?;
    Ok(json!({"disc": disc, "gram": g}))
}

pub fn nondeg(cfg: &JobConfig, section: usize, disc: usize, m_max: Option<i64>) -> Outcome {
    let s = cfg.surface()?;
    let p = cfg.section(section)?;
    let m_max = m_max.unwrap_or(cfg.m_max);
    if m_max < 1 {
        return Err(CliError::Usage("--m-max must be at least 1".into()));
    }
    let rows = nondeg_ratio(s, p, cfg.disc(disc)?, m_max, &cfg.quadrature).map_err(num)?;
    let ratios: Vec<f64> = rows.iter().map(|r| r.ratio).collect();
    let lo = ratios.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = ratios.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(json!({"section": section, "disc": disc, "rows": rows, "min_ratio": lo, "max_ratio": hi}))
}

pub fn example23(n_max: i64, r: f64, schedule: Schedule, csv: Option<&Path>) -> Outcome {
    let rows = counterexample_sweep(n_max, r, schedule).map_err(|e| match e {
        betti_core::forms_generic::FormsError::InvalidOptions(m) => CliError::Usage(m),
        other => num(other),
    })?;
    if let Some(c) = csv {
        write_artifact(c, &sweep_csv(&rows))?;
    }
    Ok(json!({"r": r, "schedule": schedule, "rows": rows, "csv": sweep_csv(&rows)}))
}

fn default_brody() -> BrodyConfig {
    BrodyConfig {
        disc: Disc::new(Default::default(), 1.0).expect("unit disc"),
        ns: vec![4, 8, 16, 32],
        target_c: 1.0,
        probe_radius: 1.0,
        grid_n: 33,
        tol: 1e-2,
        zoom: Default::default(),
    }
}

pub fn brody(cfg: Option<&JobConfig>, csv: Option<&Path>) -> Outcome {
    let family = match cfg.and_then(|c| c.family.clone()) {
        Some(f) => f,
        None if cfg.is_some_and(|c| c.brody.is_some()) => {
            return Err(CliError::validation("/family", "missing field"));
        }
        None => example_family(Schedule::Unit),
    };
    let bc = cfg
        .and_then(|c| c.brody.clone())
        .unwrap_or_else(default_brody);
    let zoom = match zoom_sequence(&family, bc.disc, &bc.ns, &bc.zoom) {
        Ok(z) => z,
        Err(BrodyError::NormBounded {
            max_norm,
            threshold,
        }) => {
            return Ok(json!({"norm_bounded": true, "max_norm": max_norm, "threshold": threshold}));
        }
        Err(e) => return Err(num(e)),
    };
    let mut entries = Vec::new();
    let mut psis = Vec::new();
    for e in &zoom.entries {
        let psi = brody_reparametrize(&e.map, bc.target_c).map_err(num)?;
        let at0 = psi.norm(Default::default()).map_err(num)?;
        let ratio = interior_ratio(&psi, bc.grid_n).map_err(num)?;
        entries.push(json!({
            "n": e.n,
            "base_point": [e.base_point.re, e.base_point.im],
            "scale": e.scale,
            "norm": e.norm,
            "radius": psi.radius,
            "norm_at_0": at0,
            "interior_ratio": ratio / bc.target_c,
        }));
        psis.push(psi);
    }
    let probe = limit_probe(&psis, bc.probe_radius, bc.grid_n, bc.tol).map_err(num)?;
    if let Some(c) = csv {
        write_artifact(c, &probe.samples_csv())?;
    }
    let last_scale = zoom.entries.last().map_or(0.0, |e| e.scale);
    Ok(json!({
        "norm_bounded": false,
        "zoom_valid": zoom.is_valid(),
        "entries": entries,
        "probe": {
            "cauchy": probe.cauchy,
            "distances": probe.distances,
            "verticality": probe.verticality,
            "last_scale": last_scale,
        },
    }))
}

struct Checks(Vec<Value>);

impl Checks {
    fn push(&mut self, name: &str, passed: bool, detail: Value) {
        self.0
            .push(json!({"name": name, "passed": passed, "detail": detail}));
    }
}

fn torsion_order(s: &EllipticSurface, p: &Section) -> Option<i64> {
    (1..=12).find(|&k| s.section_mul(k, p).is_zero())
}

/// Largest distance of `k β` to `Z^2` at a few fibers of `disc`.
fn half_lattice_defect(
    s: &EllipticSurface,
    p: &Section,
    k: i64,
    disc: Disc,
) -> Result<f64, CliError> {
    let (x, y) = match (p.x(), p.y()) {
        (Some(x), Some(y)) => (x, y),
        _ => return Ok(0.0),
    };
    let mut worst: f64 = 0.0;
    for j in 0..5 {
        let t = disc.center() + num_offset(disc.radius() * 0.5, j);
        let lat = fiber_periods(s, t).map_err(num)?;
        let pt = (
            x.eval(t, Precision::working()).map_err(num)?,
            y.eval(t, Precision::working()).map_err(num)?,
        );
        let z = elliptic_log(s, t, pt, &lat).map_err(num)?;
        for c in lattice_coords(z, lat.omega1, lat.omega2) {
            let v = k as f64 * c;
            worst = worst.max((v - v.round()).abs());
        }
    }
    Ok(worst)
}

fn num_offset(r: f64, j: usize) -> Complex64 {
    if j == 0 {
        Default::default()
    } else {
        Complex64::from_polar(r, j as f64 * PI / 2.0)
    }
}

pub fn verify(cfg: &JobConfig, seed: u64) -> Outcome {
    let mut checks = Checks(Vec::new());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    if let Some(s) = &cfg.surface {
        let secs = &cfg.sections;
        checks.push(
            "sections_on_surface",
            secs.iter().all(|p| s.contains(p)),
            json!(secs.len()),
        );
        let mut fails = 0;
        let trials = 20;
        for p in secs {
            for _ in 0..trials {
                let (a, b): (i64, i64) = (rng.gen_range(-4..=4), rng.gen_range(-4..=4));
                let lhs = s.section_add(&s.section_mul(a, p), &s.section_mul(b, p));
                if lhs != s.section_mul(a + b, p) {
                    fails += 1;
                }
                if !s.section_add(p, &s.section_neg(p)).is_zero() {
                    fails += 1;
                }
            }
        }
        checks.push(
            "group_law",
            fails == 0,
            json!({"trials": trials * secs.len(), "failures": fails}),
        );
        for (i, p) in secs.iter().enumerate() {
            let t = s.tate_height(p, cfg.tate_iters).map_err(num)?;
            let n = t.estimates.len() - 1;
            if let Some(k) = torsion_order(s, p) {
                let zero_from_1 = t.estimates[1..].iter().all(|e| *e == 0.0);
                checks.push(
                    &format!("tate_torsion_{i}"),
                    zero_from_1,
                    json!({"order": k, "estimates": t.estimates}),
                );
                if let Some(d) = cfg.discs.first() {
                    let defect = half_lattice_defect(s, p, k, *d)?;
                    checks.push(
                        &format!("torsion_lattice_{i}"),
                        defect <= 1e-8,
                        json!({"order": k, "defect": defect}),
                    );
                }
                continue;
            }
            let diff = (t.estimates[n] - t.estimates[n - 1]).abs();
            let bound = t.quasi_constant as f64 / 4f64.powi(n as i32 - 1);
            checks.push(
                &format!("tate_convergence_{i}"),
                diff <= bound,
                json!({"diff": diff, "bound": bound}),
            );
            if let Some(d) = cfg.discs.first() {
                let field = lattice_continue(s, *d, cfg.quadrature.initial_n).map_err(num)?;
                let g = betti_density(
                    &field,
                    &betti_path(s, p, &field).map_err(num)?,
                    BUNDLE_DEGREE,
                )
                .map_err(num)?;
                checks.push(
                    &format!("density_sign_{i}"),
                    g.min() >= -1e-9 * g.max(),
                    json!({"min": g.min(), "max": g.max()}),
                );
                let two = s.section_mul(2, p);
                let r = partial_heights(s, &[p.clone(), two], *d, &cfg.quadrature).map_err(num)?;
                let gap = (r[1].value - 4.0 * r[0].value).abs();
                let bound = 16.0 * (r[0].error + r[1].error);
                checks.push(
                    &format!("quadraticity_{i}"),
                    gap <= bound,
                    json!({"gap": gap, "bound": bound}),
                );
            }
        }
    }
    if cfg.family.is_some() {
        let out = brody(Some(cfg), None)?;
        let passed = out["norm_bounded"] == json!(true)
            || (out["zoom_valid"] == json!(true)
                && out["entries"].as_array().is_some_and(|es| {
                    es.iter().all(|e| {
                        let at0 = e["norm_at_0"].as_f64().unwrap_or(f64::NAN);
                        let ratio = e["interior_ratio"].as_f64().unwrap_or(f64::NAN);
                        let c = cfg.brody.as_ref().map_or(1.0, |b| b.target_c);
                        (at0 - c).abs() <= 1e-3 * c && ratio <= 1.05
                    })
                }));
        checks.push("brody", passed, out);
    }
    if checks.0.is_empty() {
        return Err(CliError::validation(
            "",
            "nothing to verify: need a surface or a family",
        ));
    }
    let all = checks.0.iter().all(|c| c["passed"] == json!(true));
    Ok(json!({"name": cfg.name, "passed": all, "checks": checks.0}))
}
