//! Minimal C ABI over the Clarabel interior-point solver.
//!
//! Only the pieces needed by the C++ adapter are exposed: zero, nonnegative
//! and PSD-triangle cones, a linear objective (P = 0), and the tolerance knobs.

use clarabel::algebra::CscMatrix;
use clarabel::solver::*;
use std::panic;
use std::slice;

pub const CONE_ZERO: i32 = 0;
pub const CONE_NONNEG: i32 = 1;
pub const CONE_PSD: i32 = 2;

#[repr(C)]
pub struct ClarabelCapiSettings {
    pub max_iter: u32,
    pub verbose: i32,
    pub tol_gap_abs: f64,
    pub tol_gap_rel: f64,
    pub tol_feas: f64,
    pub tol_ktratio: f64,
    pub max_threads: u32,
}

#[repr(C)]
pub struct ClarabelCapiInfo {
    pub status: i32,
    pub iterations: u32,
    pub primal_obj: f64,
    pub dual_obj: f64,
    pub r_prim: f64,
    pub r_dual: f64,
    pub solve_time: f64,
}

fn status_code(s: SolverStatus) -> i32 {
    match s {
        SolverStatus::Unsolved => 0,
        SolverStatus::Solved => 1,
        SolverStatus::PrimalInfeasible => 2,
        SolverStatus::DualInfeasible => 3,
        SolverStatus::AlmostSolved => 4,
        SolverStatus::AlmostPrimalInfeasible => 5,
        SolverStatus::AlmostDualInfeasible => 6,
        SolverStatus::MaxIterations => 7,
        SolverStatus::MaxTime => 8,
        SolverStatus::NumericalError => 9,
        SolverStatus::InsufficientProgress => 10,
        SolverStatus::CallbackTerminated => 11,
    }
}

/// Solves  min c'x  s.t.  Ax + s = b, s in K.
///
/// A is given in CSC form (m x n). `x` (n), `z` (m) and `s` (m) receive the
/// primal point, the dual multiplier and the slack. Returns 0 when the solver
/// ran (the outcome is in `info.status`), -1 on invalid input or a panic.
///
/// # Safety
/// All pointers must reference arrays of the documented lengths.
#[no_mangle]
pub unsafe extern "C" fn clarabel_capi_solve(
    n: usize,
    m: usize,
    a_colptr: *const usize,
    a_rowval: *const usize,
    a_nzval: *const f64,
    b: *const f64,
    c: *const f64,
    ncones: usize,
    cone_kind: *const i32,
    cone_dim: *const usize,
    settings: *const ClarabelCapiSettings,
    x: *mut f64,
    z: *mut f64,
    s: *mut f64,
    info: *mut ClarabelCapiInfo,
) -> i32 {
    let result = panic::catch_unwind(|| {
        let colptr = slice::from_raw_parts(a_colptr, n + 1).to_vec();
        let nnz = colptr[n];
        let rowval = slice::from_raw_parts(a_rowval, nnz).to_vec();
        let nzval = slice::from_raw_parts(a_nzval, nnz).to_vec();
        let a = CscMatrix::new(m, n, colptr, rowval, nzval);
        let p = CscMatrix::<f64>::zeros((n, n));
        let bv = slice::from_raw_parts(b, m);
        let cv = slice::from_raw_parts(c, n);
        let kinds = slice::from_raw_parts(cone_kind, ncones);
        let dims = slice::from_raw_parts(cone_dim, ncones);
        let mut cones = Vec::with_capacity(ncones);
        for (k, d) in kinds.iter().zip(dims.iter()) {
            match *k {
                CONE_ZERO => cones.push(SupportedConeT::ZeroConeT(*d)),
                CONE_NONNEG => cones.push(SupportedConeT::NonnegativeConeT(*d)),
                CONE_PSD => cones.push(SupportedConeT::PSDTriangleConeT(*d)),
                _ => return None,
            }
        }
        let cfg = &*settings;
        let mut st = DefaultSettings::<f64>::default();
        st.max_iter = cfg.max_iter;
        st.verbose = cfg.verbose != 0;
        st.tol_gap_abs = cfg.tol_gap_abs;
        st.tol_gap_rel = cfg.tol_gap_rel;
        st.tol_feas = cfg.tol_feas;
        st.tol_ktratio = cfg.tol_ktratio;
        st.max_threads = cfg.max_threads;
        st.chordal_decomposition_enable = false;
        st.presolve_enable = false;
        st.input_sparse_dropzeros = false;
        let mut solver = match DefaultSolver::new(&p, cv, &a, bv, &cones, st) {
            Ok(sv) => sv,
            Err(_) => return None,
        };
        solver.solve();
        let sol = &solver.solution;
        slice::from_raw_parts_mut(x, n).copy_from_slice(&sol.x);
        slice::from_raw_parts_mut(z, m).copy_from_slice(&sol.z);
        slice::from_raw_parts_mut(s, m).copy_from_slice(&sol.s);
        Some(ClarabelCapiInfo {
            status: status_code(sol.status),
            iterations: sol.iterations,
            primal_obj: sol.obj_val,
            dual_obj: sol.obj_val_dual,
            r_prim: sol.r_prim,
            r_dual: sol.r_dual,
            solve_time: sol.solve_time,
        })
    });
    match result {
        Ok(Some(inf)) => {
            *info = inf;
            0
        }
        _ => -1,
    }
}
