//! C interface to `dumbbell-spectra`.
//!
//! Objects cross the boundary as opaque handles returned through out
//! pointers and released with the matching `db_*_free`. Every
//! fallible call returns a [`DbStatus`]; on failure the message is available
//! from [`db_last_error`] on the same thread.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use dumbbell_spectra::asymptotics::{Target, CLUSTER_TOL, SYMMETRY_GAP};
use dumbbell_spectra::cli::{self, CliError, RunConfig};
use dumbbell_spectra::eigen::{classify_symmetry, smallest_eigenpairs_with, EigenOptions, Parity};
use dumbbell_spectra::fem::{assemble_mass, assemble_stiffness};
use dumbbell_spectra::mesh::{generate, TriMesh};
use dumbbell_spectra::nodal::{count_nodal_domains, eigen_index, DEFAULT_THRESHOLD};
use dumbbell_spectra::sturm::BranchOrder;

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DbStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    InvalidUtf8 = 3,
    Config = 4,
    Numeric = 5,
    TheoremViolation = 6,
    Panic = 7,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DbParity {
    Unknown = 0,
    Even = 1,
    Odd = 2,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DbOrder {
    EvenBelowOdd = 0,
    OddBelowEven = 1,
}

/// Limiting data for the configured target mode.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DbPrediction {
    pub mu: f64,
    pub index_in_bulk: usize,
    pub bulk_nodal_count: usize,
    pub k: usize,
    pub even_index: usize,
    pub odd_index: usize,
    pub even_count_bound: usize,
    pub odd_count_bound: usize,
    pub order: DbOrder,
    pub theta_even: f64,
    pub theta_odd: f64,
}

/// Parsed run configuration.
pub struct DbConfig {
    inner: RunConfig,
}

/// Dumbbell mesh at the configuration's epsilon.
pub struct DbMesh {
    inner: TriMesh,
}

/// Computed eigenpairs with parity labels, indices and nodal counts.
pub struct DbSpectrum {
    lambdas: Vec<f64>,
    parities: Vec<DbParity>,
    indices: Vec<usize>,
    counts: Vec<usize>,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).ok());
}

fn clear_error() {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
}

struct Failure(DbStatus, String);

impl From<CliError> for Failure {
    fn from(e: CliError) -> Self {
        let status = match &e {
            CliError::Config(_) => DbStatus::Config,
            CliError::Theorem(_) => DbStatus::TheoremViolation,
            CliError::Numeric(_) | CliError::Io(_) => DbStatus::Numeric,
        };
        Failure(status, e.to_string())
    }
}

fn numeric(e: impl std::fmt::Display) -> Failure {
    Failure(DbStatus::Numeric, e.to_string())
}

/// Runs `f`, converting failures and panics into a status and message.
fn guard(f: impl FnOnce() -> Result<(), Failure>) -> DbStatus {
    clear_error();
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => DbStatus::Ok,
        Ok(Err(Failure(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            DbStatus::Panic
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, name: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(Failure(DbStatus::NullPointer, format!("{name} is null")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Failure(DbStatus::InvalidUtf8, format!("{name} is not UTF-8")))
}

unsafe fn ref_arg<'a, T>(p: *const T, name: &str) -> Result<&'a T, Failure> {
    p.as_ref()
        .ok_or_else(|| Failure(DbStatus::NullPointer, format!("{name} is null")))
}

fn out_arg<T>(p: *mut T, name: &str) -> Result<(), Failure> {
    if p.is_null() {
        Err(Failure(DbStatus::NullPointer, format!("{name} is null")))
    } else {
        Ok(())
    }
}

/// Message of the last failed call on this thread, or null. The pointer is
/// valid until the next call into this library on the same thread.
#[no_mangle]
pub extern "C" fn db_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn db_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Parses a JSON run configuration.
///
/// # Safety
/// `json` must be a valid NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn db_config_from_json(json: *const c_char, out: *mut *mut DbConfig) -> DbStatus {
    guard(|| {
        out_arg(out, "out")?;
        let text = str_arg(json, "json")?;
        let inner = RunConfig::from_json(text).map_err(|e| Failure(DbStatus::Config, e.to_string()))?;
        *out = Box::into_raw(Box::new(DbConfig { inner }));
        Ok(())
    })
}

/// The configuration of the worked examples (first example targeted).
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn db_config_example(out: *mut *mut DbConfig) -> DbStatus {
    guard(|| {
        out_arg(out, "out")?;
        *out = Box::into_raw(Box::new(DbConfig {
            inner: cli::config::example_config(),
        }));
        Ok(())
    })
}

/// Sets the target to bulk mode `(j, n)`.
///
/// # Safety
/// `cfg` must be a handle from this library.
#[no_mangle]
pub unsafe extern "C" fn db_config_set_target_mode(cfg: *mut DbConfig, j: usize, n: usize) -> DbStatus {
    guard(|| {
        let cfg = cfg
            .as_mut()
            .ok_or_else(|| Failure(DbStatus::NullPointer, "cfg is null".into()))?;
        cfg.inner.target.mode = Some((j, n));
        cfg.inner.target.mu = None;
        Ok(())
    })
}

/// Sets `geometry.epsilon`.
///
/// # Safety
/// `cfg` must be a handle from this library.
#[no_mangle]
pub unsafe extern "C" fn db_config_set_epsilon(cfg: *mut DbConfig, epsilon: f64) -> DbStatus {
    guard(|| {
        let cfg = cfg
            .as_mut()
            .ok_or_else(|| Failure(DbStatus::NullPointer, "cfg is null".into()))?;
        let old = cfg.inner.geometry.epsilon;
        cfg.inner.geometry.epsilon = epsilon;
        if let Err(e) = cfg.inner.validate() {
            cfg.inner.geometry.epsilon = old;
            return Err(Failure(DbStatus::InvalidArgument, e.to_string()));
        }
        Ok(())
    })
}

/// # Safety
/// `cfg` must be null or a handle from this library, freed at most once.
#[no_mangle]
pub unsafe extern "C" fn db_config_free(cfg: *mut DbConfig) {
    if !cfg.is_null() {
        drop(Box::from_raw(cfg));
    }
}

/// Meshes the dumbbell at the configured epsilon.
///
/// # Safety
/// `cfg` must be a handle from this library and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn db_mesh_generate(cfg: *const DbConfig, out: *mut *mut DbMesh) -> DbStatus {
    guard(|| {
        out_arg(out, "out")?;
        let c = &ref_arg(cfg, "cfg")?.inner;
        let inner = generate(&c.geometry, c.mesh.h_bulk, c.mesh.neck_layers).map_err(numeric)?;
        *out = Box::into_raw(Box::new(DbMesh { inner }));
        Ok(())
    })
}

/// # Safety
/// `mesh` must be a handle from this library.
#[no_mangle]
pub unsafe extern "C" fn db_mesh_vertex_count(mesh: *const DbMesh) -> usize {
    mesh.as_ref().map_or(0, |m| m.inner.vertex_count())
}

/// # Safety
/// `mesh` must be a handle from this library.
#[no_mangle]
pub unsafe extern "C" fn db_mesh_triangle_count(mesh: *const DbMesh) -> usize {
    mesh.as_ref().map_or(0, |m| m.inner.triangle_count())
}

/// Copies the vertex coordinates as interleaved `x, y` into `xy`, which
/// must hold `2 * db_mesh_vertex_count(mesh)` values.
///
/// # Safety
/// `mesh` must be a handle from this library and `xy` writable for `len` values.
#[no_mangle]
pub unsafe extern "C" fn db_mesh_vertices(mesh: *const DbMesh, xy: *mut f64, len: usize) -> DbStatus {
    guard(|| {
        let m = &ref_arg(mesh, "mesh")?.inner;
        out_arg(xy, "xy")?;
        if len < 2 * m.vertex_count() {
            return Err(Failure(
                DbStatus::InvalidArgument,
                format!("buffer holds {len} values, need {}", 2 * m.vertex_count()),
            ));
        }
        let dst = std::slice::from_raw_parts_mut(xy, len);
        for (i, p) in m.vertices.iter().enumerate() {
            dst[2 * i] = p[0];
            dst[2 * i + 1] = p[1];
        }
        Ok(())
    })
}

/// # Safety
/// `mesh` must be null or a handle from this library, freed at most once.
#[no_mangle]
pub unsafe extern "C" fn db_mesh_free(mesh: *mut DbMesh) {
    if !mesh.is_null() {
        drop(Box::from_raw(mesh));
    }
}

/// Smallest `solver.k_eigs` eigenpairs on `mesh`, with parity labels and
/// nodal counts.
///
/// # Safety
/// `cfg` and `mesh` must be handles from this library and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn db_solve(cfg: *const DbConfig, mesh: *const DbMesh, out: *mut *mut DbSpectrum) -> DbStatus {
    guard(|| {
        out_arg(out, "out")?;
        let c = &ref_arg(cfg, "cfg")?.inner;
        let m = &ref_arg(mesh, "mesh")?.inner;
        let kmat = assemble_stiffness(m);
        let mmat = assemble_mass(m);
        let opts = EigenOptions {
            max_basis: c.solver.max_krylov,
            seed: c.solver.seed,
            ..EigenOptions::default()
        };
        let count = c.solver.k_eigs.min(m.vertex_count());
        let mut pairs = smallest_eigenpairs_with(&kmat, &mmat, count, c.solver.tol, &opts).map_err(numeric)?;
        if let Some(mirror) = &m.mirror {
            classify_symmetry(&mut pairs, &mmat, &mirror.perm, SYMMETRY_GAP);
        }
        let lambdas: Vec<f64> = pairs.iter().map(|p| p.lambda).collect();
        let mut counts = Vec::with_capacity(pairs.len());
        for p in &pairs {
            counts.push(
                count_nodal_domains(&p.field(m), DEFAULT_THRESHOLD)
                    .map_err(numeric)?
                    .count,
            );
        }
        let spectrum = DbSpectrum {
            indices: (1..=lambdas.len())
                .map(|j| eigen_index(&lambdas, j, CLUSTER_TOL))
                .collect(),
            parities: pairs
                .iter()
                .map(|p| match p.parity {
                    Some(Parity::Even) => DbParity::Even,
                    Some(Parity::Odd) => DbParity::Odd,
                    None => DbParity::Unknown,
                })
                .collect(),
            lambdas,
            counts,
        };
        *out = Box::into_raw(Box::new(spectrum));
        Ok(())
    })
}

/// # Safety
/// `s` must be a handle from this library.
#[no_mangle]
pub unsafe extern "C" fn db_spectrum_len(s: *const DbSpectrum) -> usize {
    s.as_ref().map_or(0, |s| s.lambdas.len())
}

/// Eigenvalue, parity, eigenvalue index and nodal count of pair `i`
/// (0-based). Any output pointer may be null.
///
/// # Safety
/// `s` must be a handle from this library; non-null outputs must be writable.
#[no_mangle]
pub unsafe extern "C" fn db_spectrum_get(
    s: *const DbSpectrum,
    i: usize,
    lambda: *mut f64,
    parity: *mut DbParity,
    index: *mut usize,
    nodal_count: *mut usize,
) -> DbStatus {
    guard(|| {
        let s = ref_arg(s, "spectrum")?;
        if i >= s.lambdas.len() {
            return Err(Failure(
                DbStatus::InvalidArgument,
                format!("pair {i} out of range (len {})", s.lambdas.len()),
            ));
        }
        if let Some(p) = lambda.as_mut() {
            *p = s.lambdas[i];
        }
        if let Some(p) = parity.as_mut() {
            *p = s.parities[i];
        }
        if let Some(p) = index.as_mut() {
            *p = s.indices[i];
        }
        if let Some(p) = nodal_count.as_mut() {
            *p = s.counts[i];
        }
        Ok(())
    })
}

/// # Safety
/// `s` must be null or a handle from this library, freed at most once.
#[no_mangle]
pub unsafe extern "C" fn db_spectrum_free(s: *mut DbSpectrum) {
    if !s.is_null() {
        drop(Box::from_raw(s));
    }
}

/// Limiting branch indices, nodal bounds and neck corrections for the
/// configured target.
///
/// # Safety
/// `cfg` must be a handle from this library and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn db_predict(cfg: *const DbConfig, out: *mut DbPrediction) -> DbStatus {
    guard(|| {
        out_arg(out, "out")?;
        let c = &ref_arg(cfg, "cfg")?.inner;
        let (j, n) = c
            .target
            .mode
            .ok_or_else(|| Failure(DbStatus::Config, "config error at /target: a mode is required".into()))?;
        let target = Target::new(&c.geometry, j, n, c.sl.nodes).map_err(|e| Failure::from(CliError::from(e)))?;
        let order = target.order().map_err(numeric)?;
        let bounds = target.nodal;
        *out = DbPrediction {
            mu: target.mu(),
            index_in_bulk: target.bulk_index(),
            bulk_nodal_count: target.mode.nodal_count,
            k: target.prediction.k,
            even_index: target.prediction.indices.even,
            odd_index: target.prediction.indices.odd,
            even_count_bound: bounds.even_bound,
            odd_count_bound: bounds.odd_bound,
            order: match order {
                BranchOrder::EvenBelowOdd => DbOrder::EvenBelowOdd,
                BranchOrder::OddBelowEven => DbOrder::OddBelowEven,
            },
            theta_even: target.analysis.theta_even,
            theta_odd: target.analysis.theta_odd,
        };
        Ok(())
    })
}

/// Runs a CLI command (`"mesh"`, `"solve"`, `"sl"`, `"predict"`, `"sweep"`,
/// `"verify"` or `"nodal"`), writing its artifacts under `output.dir`.
/// `exit_code` receives the code the command-line tool would return.
///
/// # Safety
/// `cfg` must be a handle from this library, `command` a NUL-terminated
/// string and `exit_code` null or writable.
#[no_mangle]
pub unsafe extern "C" fn db_run_command(cfg: *const DbConfig, command: *const c_char, exit_code: *mut i32) -> DbStatus {
    guard(|| {
        let c = &ref_arg(cfg, "cfg")?.inner;
        let command = str_arg(command, "command")?;
        let result = cli::execute(command, c);
        if let Some(code) = exit_code.as_mut() {
            *code = match &result {
                Ok(o) => o.exit_code,
                Err(e) => e.exit_code(),
            };
        }
        result.map(|_| ()).map_err(Failure::from)
    })
}
