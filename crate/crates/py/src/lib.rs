//! Python bindings for `fragscan`.
//!
//! Images cross the boundary as lists of rows; errors surface as `ValueError`.

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

use fragscan::config::PipelineConfig;
use fragscan::graindist::{self, DistributionMode};
use fragscan::raster::{self, ClassMask, GrayImage, Grid};
use fragscan::synth::{self, RandomSceneParams, SyntheticSceneSpec};
use fragscan::{kernels, pipeline, segeval, shape};

fn err(e: fragscan::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn flatten<T: Copy>(rows: &[Vec<T>]) -> PyResult<(usize, usize, Vec<T>)> {
    let h = rows.len();
    let w = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != w) {
        return Err(PyValueError::new_err("rows must all have the same length"));
    }
    Ok((w, h, rows.concat()))
}

fn to_rows<T: Copy>(w: usize, data: &[T]) -> Vec<Vec<T>> {
    data.chunks(w.max(1)).map(<[T]>::to_vec).collect()
}

fn gray(rows: &[Vec<u8>]) -> PyResult<GrayImage> {
    let (w, h, v) = flatten(rows)?;
    Grid::new(w, h, v).map_err(err)
}

fn class_mask(rows: &[Vec<u8>]) -> PyResult<ClassMask> {
    let (w, h, v) = flatten(rows)?;
    ClassMask::from_raw(w, h, &v).map_err(err)
}

fn mask_rows(m: &ClassMask) -> Vec<Vec<u8>> {
    to_rows(m.width(), &m.to_raw())
}

/// One measured fragment (lengths in cm).
#[pyclass(name = "Fragment", frozen, from_py_object)]
#[derive(Clone)]
struct PyFragment {
    #[pyo3(get)]
    id: u32,
    #[pyo3(get)]
    pixel_area: u64,
    #[pyo3(get)]
    centroid: (f64, f64),
    #[pyo3(get)]
    a: f64,
    #[pyo3(get)]
    b: f64,
    #[pyo3(get)]
    orientation: f64,
    #[pyo3(get)]
    d: f64,
    #[pyo3(get)]
    volume: f64,
    #[pyo3(get)]
    touches_border: bool,
}

impl From<&shape::Fragment> for PyFragment {
    fn from(f: &shape::Fragment) -> Self {
        Self {
            id: f.id,
            pixel_area: f.pixel_area,
            centroid: f.centroid,
            a: f.a,
            b: f.b,
            orientation: f.orientation,
            d: f.d,
            volume: f.volume,
            touches_border: f.touches_border,
        }
    }
}

impl From<&PyFragment> for shape::Fragment {
    fn from(f: &PyFragment) -> Self {
        Self {
            id: f.id,
            pixel_area: f.pixel_area,
            centroid: f.centroid,
            a: f.a,
            b: f.b,
            orientation: f.orientation,
            d: f.d,
            volume: f.volume,
            touches_border: f.touches_border,
        }
    }
}

#[pymethods]
impl PyFragment {
    #[new]
    #[pyo3(signature = (d, volume, a=None, b=None))]
    fn new(d: f64, volume: f64, a: Option<f64>, b: Option<f64>) -> Self {
        Self {
            id: 0,
            pixel_area: 0,
            centroid: (0.0, 0.0),
            a: a.unwrap_or(d / 2.0),
            b: b.unwrap_or(d / 2.0),
            orientation: 0.0,
            d,
            volume,
            touches_border: false,
        }
    }

    fn __repr__(&self) -> String {
        format!(
            "Fragment(id={}, a={:.4}, b={:.4}, d={:.4}, volume={:.4})",
            self.id, self.a, self.b, self.d, self.volume
        )
    }
}

fn native(frags: &[PyFragment]) -> Vec<shape::Fragment> {
    frags.iter().map(Into::into).collect()
}

#[pyfunction]
fn rescale_bilinear(image: Vec<Vec<u8>>, width: usize, height: usize) -> PyResult<Vec<Vec<u8>>> {
    let out = raster::rescale_bilinear(&gray(&image)?, width, height).map_err(err)?;
    Ok(to_rows(out.width(), out.as_slice()))
}

/// Tile origins `(x, y)` for an image of the given size.
#[pyfunction]
#[pyo3(signature = (width, height, window=512, stride=256))]
fn plan_tiles(width: usize, height: usize, window: usize, stride: usize) -> PyResult<Vec<(usize, usize)>> {
    Ok(raster::plan_tiles(width, height, window, stride).map_err(err)?.tile_origins)
}

#[pyfunction]
#[pyo3(signature = (mask, se_half=4))]
fn morphological_open(mask: Vec<Vec<u8>>, se_half: usize) -> PyResult<Vec<Vec<u8>>> {
    Ok(mask_rows(&raster::morphological_open(&class_mask(&mask)?, se_half)))
}

/// Opening, seed expansion, measurement and fine removal. Returns the
/// instance-id rows and the fragments.
#[pyfunction]
#[pyo3(signature = (mask, cm_per_pixel=1.0, max_radius=10, min_diameter_px=10.0, se_half=4))]
fn postprocess(
    mask: Vec<Vec<u8>>,
    cm_per_pixel: f64,
    max_radius: u32,
    min_diameter_px: f64,
    se_half: usize,
) -> PyResult<(Vec<Vec<u32>>, Vec<PyFragment>)> {
    let cfg = PipelineConfig {
        cm_per_pixel,
        max_radius,
        min_diameter_px,
        se_half,
        ..Default::default()
    };
    let out = pipeline::postprocess(&class_mask(&mask)?, &cfg).map_err(err)?;
    Ok((
        to_rows(out.instances.width(), out.instances.ids()),
        out.fragments.iter().map(Into::into).collect(),
    ))
}

/// `(a, b, orientation, (cx, cy))` in pixels.
#[pyfunction]
fn fit_ellipse(pixels: Vec<(usize, usize)>) -> PyResult<(f64, f64, f64, (f64, f64))> {
    if pixels.is_empty() {
        return Err(PyValueError::new_err("no pixels"));
    }
    let e = shape::fit_ellipse(&pixels);
    Ok((e.a, e.b, e.orientation, e.centroid))
}

#[pyfunction]
fn equivalent_diameter(a: f64, b: f64) -> PyResult<f64> {
    shape::equivalent_diameter(a, b).map_err(err)
}

#[pyfunction]
fn ellipsoid_volume(a: f64, b: f64, d: f64) -> PyResult<f64> {
    shape::ellipsoid_volume(a, b, d).map_err(err)
}

/// `(bin_edges, bin_shares, cumulative)` for mode "count" or "volume".
#[pyfunction]
#[pyo3(signature = (fragments, mode="volume", bin_width=None))]
fn psd(
    fragments: Vec<PyFragment>,
    mode: &str,
    bin_width: Option<f64>,
) -> PyResult<(Vec<f64>, Vec<f64>, Vec<(f64, f64)>)> {
    let mode = match mode {
        "count" => DistributionMode::Count,
        "volume" => DistributionMode::Volume,
        other => return Err(PyValueError::new_err(format!("unknown mode {other:?}"))),
    };
    let dist = graindist::psd(&native(&fragments), mode, bin_width.unwrap_or(mode.default_bin_width()))
        .map_err(err)?;
    Ok((dist.bin_edges, dist.bin_shares, dist.cumulative))
}

/// `(d10, d50, d90)` of the volume distribution.
#[pyfunction]
fn characteristic_diameters(fragments: Vec<PyFragment>) -> PyResult<(f64, f64, f64)> {
    let (_, cd) = graindist::pool_overall(&native(&fragments), graindist::DEFAULT_VOLUME_BIN_CM).map_err(err)?;
    Ok((cd.d10, cd.d50, cd.d90))
}

/// `(mean, low, high)` with a two-sided Student-t interval.
#[pyfunction]
#[pyo3(signature = (values, level=0.95))]
fn mean_ci(values: Vec<f64>, level: f64) -> PyResult<(f64, f64, f64)> {
    let (m, ci) = graindist::mean_ci(&values, level).map_err(err)?;
    Ok((m, ci.low, ci.high))
}

/// `(slope, intercept, rms_residual)`.
#[pyfunction]
fn fit_line(points: Vec<(f64, f64)>) -> PyResult<(f64, f64, f64)> {
    let f = graindist::fit_line(&points).map_err(err)?;
    Ok((f.slope, f.intercept, f.rms_residual))
}

/// Fit slopes of d10, d50 and d90 ratios for the bundled section table.
#[pyfunction]
fn reference_slopes() -> PyResult<(f64, f64, f64)> {
    let seg = pipeline::ReferenceData::bundled().segregation().map_err(err)?;
    Ok((seg.fits[0].slope, seg.fits[1].slope, seg.fits[2].slope))
}

/// Metrics report as JSON text.
#[pyfunction]
fn evaluate(pred: Vec<Vec<u8>>, truth: Vec<Vec<u8>>) -> PyResult<String> {
    let cm = segeval::confusion(&class_mask(&pred)?, &class_mask(&truth)?).map_err(err)?;
    fragscan::io::to_json_fixed(&segeval::metrics(&cm)).map_err(err)
}

/// Random synthetic scene: `(mask rows, ground-truth fragments)`.
#[pyfunction]
#[pyo3(signature = (width=512, height=512, count=10, seed=0))]
fn synthetic_scene(width: usize, height: usize, count: usize, seed: u64) -> PyResult<(Vec<Vec<u8>>, Vec<PyFragment>)> {
    let p = RandomSceneParams {
        width,
        height,
        count,
        ..Default::default()
    };
    let spec = SyntheticSceneSpec::random(&p, seed).map_err(err)?;
    let (mask, truth) = synth::generate_synthetic_scene(&spec).map_err(err)?;
    Ok((mask_rows(&mask), truth.iter().map(Into::into).collect()))
}

/// `[(check, passed, max_abs_error)]` from the operator self-test.
#[pyfunction]
#[pyo3(signature = (seed=7, cases=50))]
fn kernels_selftest(seed: u64, cases: usize) -> Vec<(String, bool, f64)> {
    kernels::run_selftest(seed, cases)
        .into_iter()
        .map(|r| (r.check, r.pass, r.max_abs_error))
        .collect()
}

#[pymodule]
fn fragscan_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyFragment>()?;
    m.add_function(wrap_pyfunction!(rescale_bilinear, m)?)?;
    m.add_function(wrap_pyfunction!(plan_tiles, m)?)?;
    m.add_function(wrap_pyfunction!(morphological_open, m)?)?;
    m.add_function(wrap_pyfunction!(postprocess, m)?)?;
    m.add_function(wrap_pyfunction!(fit_ellipse, m)?)?;
    m.add_function(wrap_pyfunction!(equivalent_diameter, m)?)?;
    m.add_function(wrap_pyfunction!(ellipsoid_volume, m)?)?;
    m.add_function(wrap_pyfunction!(psd, m)?)?;
    m.add_function(wrap_pyfunction!(characteristic_diameters, m)?)?;
    m.add_function(wrap_pyfunction!(mean_ci, m)?)?;
    m.add_function(wrap_pyfunction!(fit_line, m)?)?;
    m.add_function(wrap_pyfunction!(reference_slopes, m)?)?;
    m.add_function(wrap_pyfunction!(evaluate, m)?)?;
    m.add_function(wrap_pyfunction!(synthetic_scene, m)?)?;
    m.add_function(wrap_pyfunction!(kernels_selftest, m)?)?;
    Ok(())
}
