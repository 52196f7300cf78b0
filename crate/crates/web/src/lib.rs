//! Browser demo over the doubling and middle-thirds systems.
//!
//! The plain functions are what the tests exercise; the `#[wasm_bindgen]`
//! wrappers just flatten results into `Vec<f64>` and turn errors into strings.

use towb::harmonic::{normalize_weight, solve_harmonic};
use towb::sigspace::hutchinson_iterate;
use towb::{
    CylinderSpec, HarmonicOptions, IfsSystem, Measure, PathMeasure, TransferOperator, TrigPoly,
    WeightExpr,
};
use wasm_bindgen::prelude::*;

const GRID: usize = 512;

#[derive(Debug, Clone, PartialEq)]
pub struct Harmonic {
    pub rho: f64,
    pub h: Vec<f64>,
}

fn doubling_op(constant: f64, cos: &[f64], sin: &[f64], n: usize) -> towb::Result<TransferOperator> {
    let w = WeightExpr::trig(TrigPoly::new(constant, cos.to_vec(), sin.to_vec()));
    TransferOperator::new(IfsSystem::doubling(w)?, n)
}

/// Leading eigenpair of `R` for the doubling map with a trig weight, `h`
/// normalised against Lebesgue measure.
pub fn harmonic(constant: f64, cos: &[f64], sin: &[f64], n: usize) -> towb::Result<Harmonic> {
    let op = doubling_op(constant, cos, sin, n)?;
    let sol = solve_harmonic(&op, &Measure::lebesgue(n)?, &HarmonicOptions::default())?
        .require_converged()?;
    Ok(Harmonic {
        rho: sol.rho,
        h: sol.h.into_values(),
    })
}

/// Cell masses after `steps` Hutchinson steps from Lebesgue measure.
/// `cantor` picks the middle-thirds system, otherwise doubling.
pub fn hutchinson_histogram(cantor: bool, steps: usize, bins: usize) -> towb::Result<Vec<f64>> {
    let w = WeightExpr::constant(1.0);
    let system = if cantor { IfsSystem::cantor(w)? } else { IfsSystem::doubling(w)? };
    let out = hutchinson_iterate(&system, &Measure::lebesgue(bins)?, steps)?;
    Ok(out.binned().cell_masses())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cylinder {
    pub exact: f64,
    pub empirical: f64,
    pub std_error: f64,
}

/// Exact conditional cylinder probability against a Monte Carlo estimate.
/// The weight is rescaled so that `rho = 1` first.
pub fn cylinder(
    constant: f64,
    cos: &[f64],
    sin: &[f64],
    x: f64,
    sets: &str,
    paths: usize,
    seed: u64,
) -> towb::Result<Cylinder> {
    let spec: CylinderSpec = sets.parse()?;
    let lambda = Measure::lebesgue(GRID)?;
    let opts = HarmonicOptions::default();
    let raw = doubling_op(constant, cos, sin, GRID)?;
    let op = TransferOperator::new(normalize_weight(&raw, &lambda, &opts)?, GRID)?;
    let h = solve_harmonic(&op, &lambda, &opts)?.require_converged()?.h;
    let pm = PathMeasure::new(op, h, lambda)?;
    let sampled = pm.sample_paths(x, spec.depth(), paths, seed)?;
    let c = pm.compare_cylinder(x, &spec, &sampled)?;
    Ok(Cylinder {
        exact: c.exact,
        empirical: c.empirical,
        std_error: c.std_error,
    })
}

fn js<T>(r: towb::Result<T>) -> Result<T, JsValue> {
    r.map_err(|e| JsValue::from_str(&e.to_string()))
}

/// Returns `[rho, h_0, .., h_{n-1}]`.
#[wasm_bindgen(js_name = harmonic)]
pub fn harmonic_js(constant: f64, cos: Vec<f64>, sin: Vec<f64>, n: usize) -> Result<Vec<f64>, JsValue> {
    let s = js(harmonic(constant, &cos, &sin, n))?;
    let mut out = Vec::with_capacity(s.h.len() + 1);
    out.push(s.rho);
    out.extend(s.h);
    Ok(out)
}

#[wasm_bindgen(js_name = hutchinsonHistogram)]
pub fn hutchinson_histogram_js(cantor: bool, steps: usize, bins: usize) -> Result<Vec<f64>, JsValue> {
    js(hutchinson_histogram(cantor, steps, bins))
}

/// Returns `[exact, empirical, std_error]`.
#[wasm_bindgen(js_name = cylinder)]
#[allow(clippy::too_many_arguments)]
pub fn cylinder_js(
    constant: f64,
    cos: Vec<f64>,
    sin: Vec<f64>,
    x: f64,
    sets: &str,
    paths: usize,
    seed: u64,
) -> Result<Vec<f64>, JsValue> {
    let c = js(cylinder(constant, &cos, &sin, x, sets, paths, seed))?;
    Ok(vec![c.exact, c.empirical, c.std_error])
}
