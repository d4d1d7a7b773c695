//! C ABI over the torus solver.
//!
//! Handles are opaque and owned by the caller once returned; release them with
//! the matching `*_free`. Every function returns a [`BhStatus`]; on failure
//! [`bh_last_error_message`] describes the error on the calling thread.

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use torus_biharmonic::angle::{AngleField, HomotopyClass};
use torus_biharmonic::conformal::ConformalStructure;
use torus_biharmonic::functionals::bienergy;
use torus_biharmonic::io::angle_from_total;
use torus_biharmonic::solver::{solve_homotopy_class, SolveOptions, SolveReport};
use torus_biharmonic::torus::{LatticeSpec, ScalarField};
use torus_biharmonic::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BhStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    LatticeMismatch = 3,
    NotConverged = 4,
    Incompatible = 5,
    Panic = 6,
}

/// A conformal factor on a lattice, with its curvature.
pub struct BhStructure {
    inner: ConformalStructure,
}

/// A solved angle and its report.
pub struct BhSolution {
    angle: AngleField,
    report: SolveReport,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct BhReport {
    pub class_m: i64,
    pub class_n: i64,
    pub iterations: usize,
    pub final_relative_residual: f64,
    pub el_residual_maxnorm: f64,
    pub converged: bool,
    pub bienergy: f64,
    pub vertical_bienergy: f64,
    pub horizontal_part: f64,
    pub area: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn status_of(e: &Error) -> BhStatus {
    match e {
        Error::LatticeMismatch => BhStatus::LatticeMismatch,
        Error::NotConverged { .. } => BhStatus::NotConverged,
        Error::Incompatible(_) => BhStatus::Incompatible,
        _ => BhStatus::InvalidArgument,
    }
}

/// Runs `f`, recording errors and converting panics.
fn guard(f: impl FnOnce() -> Result<(), (BhStatus, String)>) -> BhStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            BhStatus::Ok
        }
        Ok(Err((status, msg))) => {
            set_error(&msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            BhStatus::Panic
        }
    }
}

fn lift<T>(r: torus_biharmonic::Result<T>) -> Result<T, (BhStatus, String)> {
    r.map_err(|e| (status_of(&e), e.to_string()))
}

fn null(what: &str) -> (BhStatus, String) {
    (BhStatus::NullPointer, format!("{what} is null"))
}

/// # Safety
/// `ptr` must be null or point to `len` readable doubles.
unsafe fn slice<'a>(ptr: *const f64, len: usize, what: &str) -> Result<&'a [f64], (BhStatus, String)> {
    if ptr.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(ptr, len))
}

fn check_len(got: usize, want: usize, what: &str) -> Result<(), (BhStatus, String)> {
    if got != want {
        return Err((BhStatus::LatticeMismatch, format!("{what} holds {got} values, the grid has {want}")));
    }
    Ok(())
}

/// Builds a structure from lattice generators `d1`, `d2` (two doubles each),
/// grid counts and `n1*n2` samples of `u` in row-major order (`t` fastest).
/// `u` may be null for the flat metric.
///
/// # Safety
/// `d1`, `d2` must point to two doubles, `u` to `n1*n2` doubles or be null,
/// and `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn bh_structure_new(
    d1: *const f64,
    d2: *const f64,
    n1: usize,
    n2: usize,
    u: *const f64,
    out: *mut *mut BhStructure,
) -> BhStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = ptr::null_mut();
        let d1 = slice(d1, 2, "d1")?;
        let d2 = slice(d2, 2, "d2")?;
        let lattice = lift(LatticeSpec::new([d1[0], d1[1]], [d2[0], d2[1]], n1, n2))?;
        let u = if u.is_null() {
            ScalarField::zeros(lattice)
        } else {
            lift(ScalarField::new(lattice, slice(u, lattice.len(), "u")?.to_vec()))?
        };
        let inner = lift(ConformalStructure::new(u))?;
        *out = Box::into_raw(Box::new(BhStructure { inner }));
        Ok(())
    })
}

/// # Safety
/// `s` must be null or a handle from [`bh_structure_new`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn bh_structure_free(s: *mut BhStructure) {
    if !s.is_null() {
        drop(Box::from_raw(s));
    }
}

/// Copies the Gaussian curvature samples into `out` (`len` must be `n1*n2`).
///
/// # Safety
/// `s` must be a live handle and `out` must hold `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn bh_structure_curvature(s: *const BhStructure, out: *mut f64, len: usize) -> BhStatus {
    guard(|| {
        let s = s.as_ref().ok_or_else(|| null("structure"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let k = s.inner.kg().samples();
        check_len(len, k.len(), "out")?;
        std::slice::from_raw_parts_mut(out, len).copy_from_slice(k);
        Ok(())
    })
}

/// Solves for the critical angle in class `(m, n)`. `max_iterations == 0`
/// selects the default cap.
///
/// # Safety
/// `s` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn bh_solve(
    s: *const BhStructure,
    m: i64,
    n: i64,
    tolerance: f64,
    max_iterations: usize,
    out: *mut *mut BhSolution,
) -> BhStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = ptr::null_mut();
        let s = s.as_ref().ok_or_else(|| null("structure"))?;
        let opts = SolveOptions {
            tolerance,
            max_iterations: (max_iterations > 0).then_some(max_iterations),
            ..SolveOptions::default()
        };
        let (angle, report) = lift(solve_homotopy_class(&s.inner, HomotopyClass::new(m, n), &opts))?;
        *out = Box::into_raw(Box::new(BhSolution { angle, report }));
        Ok(())
    })
}

/// # Safety
/// `sol` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn bh_solution_report(sol: *const BhSolution, out: *mut BhReport) -> BhStatus {
    guard(|| {
        let sol = sol.as_ref().ok_or_else(|| null("solution"))?;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        let r = &sol.report;
        *out = BhReport {
            class_m: r.class.m,
            class_n: r.class.n,
            iterations: r.iterations,
            final_relative_residual: r.final_relative_residual,
            el_residual_maxnorm: r.el_residual_maxnorm,
            converged: r.converged,
            bienergy: r.energy.bienergy,
            vertical_bienergy: r.energy.vertical_bienergy,
            horizontal_part: r.energy.horizontal_part,
            area: r.energy.area,
        };
        Ok(())
    })
}

/// Copies the total angle (linear part plus periodic part) into `out`.
///
/// # Safety
/// `sol` must be a live handle and `out` must hold `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn bh_solution_angle(sol: *const BhSolution, out: *mut f64, len: usize) -> BhStatus {
    guard(|| {
        let sol = sol.as_ref().ok_or_else(|| null("solution"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let total = sol.angle.total();
        check_len(len, total.samples().len(), "out")?;
        std::slice::from_raw_parts_mut(out, len).copy_from_slice(total.samples());
        Ok(())
    })
}

/// # Safety
/// `sol` must be null or a handle from [`bh_solve`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn bh_solution_free(sol: *mut BhSolution) {
    if !sol.is_null() {
        drop(Box::from_raw(sol));
    }
}

/// Bienergy of the unit field with total angle `theta` (`n1*n2` samples);
/// the homotopy class is read off the samples.
///
/// # Safety
/// `s` must be a live handle, `theta` must hold `len` doubles and `out` must
/// be writable.
#[no_mangle]
pub unsafe extern "C" fn bh_bienergy(s: *const BhStructure, theta: *const f64, len: usize, out: *mut f64) -> BhStatus {
    guard(|| {
        let s = s.as_ref().ok_or_else(|| null("structure"))?;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        let lattice = *s.inner.lattice();
        check_len(len, lattice.len(), "theta")?;
        let angle = lift(angle_from_total(lattice, slice(theta, len, "theta")?))?;
        *out = lift(bienergy(&s.inner, &angle))?.bienergy;
        Ok(())
    })
}

/// Message for the last failed call on this thread, empty after a success.
/// The pointer stays valid until the next call on the same thread.
#[no_mangle]
pub extern "C" fn bh_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

#[no_mangle]
pub extern "C" fn bh_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}
