//! WebAssembly bindings for the static demo in `www/`.
//!
//! Every operation takes a two-dimensional mixture specification in the
//! JSON format of the command-line tool and returns plain arrays or JSON
//! strings, so the page needs no bundler. The functions in [`demo`] carry
//! the logic and are tested natively; the exported wrappers only convert
//! errors.

use wasm_bindgen::prelude::*;

pub mod demo;

fn js(e: String) -> JsError {
    JsError::new(&e)
}

/// Mixture density on an `nx × ny` grid, row-major with `y` rows.
#[wasm_bindgen]
pub fn density_grid(spec: &str, bounds: &[f64], nx: usize, ny: usize) -> Result<Vec<f64>, JsError> {
    demo::density_grid(spec, &demo::Bounds::from_slice(bounds).map_err(js)?, nx, ny).map_err(js)
}

/// Multi-indices of the order-`p` basis as a JSON array of strings.
#[wasm_bindgen]
pub fn basis_labels(spec: &str, p: usize) -> Result<String, JsError> {
    demo::basis_labels(spec, p).map_err(js)
}

/// Basis function `index` of order `p` on the grid.
#[wasm_bindgen]
pub fn basis_grid(
    spec: &str,
    p: usize,
    index: usize,
    bounds: &[f64],
    nx: usize,
    ny: usize,
) -> Result<Vec<f64>, JsError> {
    demo::basis_grid(spec, p, index, &demo::Bounds::from_slice(bounds).map_err(js)?, nx, ny).map_err(js)
}

/// Adaptive fit of the demo response; returns a JSON report.
#[wasm_bindgen]
pub fn fit_demo(spec: &str, p: usize, strategy: &str, budget: usize, seed: u32) -> Result<String, JsError> {
    demo::fit_demo(spec, p, strategy, budget, u64::from(seed)).map_err(js)
}
