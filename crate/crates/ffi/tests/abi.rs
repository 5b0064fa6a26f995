use std::ffi::{CStr, CString};
use std::ptr;

use dfl_ffi::*;

fn last_error() -> String {
    unsafe { CStr::from_ptr(dfl_last_error_message()) }
        .to_string_lossy()
        .into_owned()
}

fn scenario(json: &str) -> *mut DflScenario {
    let json = CString::new(json).unwrap();
    let mut s = ptr::null_mut();
    assert_eq!(
        unsafe { dfl_scenario_from_json(json.as_ptr(), &mut s) },
        DflStatus::Ok
    );
    assert!(!s.is_null());
    s
}

#[test]
fn version_is_package_version() {
    let v = unsafe { CStr::from_ptr(dfl_version()) }.to_str().unwrap();
    assert_eq!(v, env!("CARGO_PKG_VERSION"));
}

#[test]
fn solve_round_trip_matches_core() {
    let s = scenario(r#"{"num_cars": 8, "num_rsus": 3, "seed": 4}"#);
    let mut dims = (0usize, 0usize, 0usize);
    unsafe {
        assert_eq!(
            dfl_scenario_dims(s, &mut dims.0, &mut dims.1, &mut dims.2),
            DflStatus::Ok
        );
    }
    assert_eq!(dims, (8, 3, 8));

    let mut sol = ptr::null_mut();
    assert_eq!(
        unsafe { dfl_solve(s, ptr::null(), &mut sol) },
        DflStatus::Ok
    );
    let (mut per, mut lat, mut total) = (0.0, 0.0, 0.0);
    unsafe { dfl_solution_cost(sol, &mut per, &mut lat, &mut total) };
    assert_eq!(total, 0.5 * per + 0.5 * lat);

    // same numbers straight from the core crate
    let cfg = dfl_core::ScenarioConfig {
        num_cars: 8,
        num_rsus: 3,
        seed: 4,
        ..Default::default()
    };
    let core = dfl_core::generate_scenario(&cfg).unwrap();
    let (alloc, cost, _) = dfl_core::solve(&core, &Default::default(), None).unwrap();
    assert_eq!(total, cost.total);

    let mut rsu = vec![0i64; 8];
    let mut rb = vec![0i64; 8];
    let mut power = vec![0.0; 8];
    unsafe {
        assert_eq!(
            dfl_solution_allocation(
                sol,
                rsu.as_mut_ptr(),
                rb.as_mut_ptr(),
                power.as_mut_ptr(),
                8
            ),
            DflStatus::Ok
        );
    }
    for n in 0..8 {
        assert_eq!(rsu[n], alloc.rsu_of(n).unwrap() as i64);
        assert_eq!(rb[n], alloc.rb_of(n).unwrap() as i64);
        assert_eq!(power[n], alloc.power[n]);
    }

    let mut again = 0.0;
    unsafe {
        assert_eq!(
            dfl_global_cost(
                s,
                rsu.as_ptr(),
                rb.as_ptr(),
                power.as_ptr(),
                8,
                0.5,
                &mut again
            ),
            DflStatus::Ok
        );
    }
    assert_eq!(again, total);

    let (mut used, mut converged) = (0usize, false);
    unsafe { dfl_solution_convergence(sol, &mut used, &mut converged) };
    let mut len = 0usize;
    let status = unsafe { dfl_solution_objective(sol, ptr::null_mut(), &mut len) };
    assert_eq!(status, DflStatus::InvalidArgument);
    assert_eq!(len, used + 1);
    let mut costs = vec![0.0; len];
    unsafe {
        assert_eq!(
            dfl_solution_objective(sol, costs.as_mut_ptr(), &mut len),
            DflStatus::Ok
        )
    };
    assert_eq!(*costs.last().unwrap(), total);
    assert!(costs.windows(2).all(|w| w[1] <= w[0]));

    unsafe {
        dfl_solution_free(sol);
        dfl_scenario_free(s);
    }
}

#[test]
fn baselines_by_name() {
    let s = scenario("{}");
    for name in [
        "baseline_a",
        "baseline_p",
        "baseline_r",
        "equal_power",
        "random",
    ] {
        let kind = CString::new(name).unwrap();
        let mut sol = ptr::null_mut();
        assert_eq!(
            unsafe { dfl_run_baseline(s, kind.as_ptr(), ptr::null(), 3, &mut sol) },
            DflStatus::Ok
        );
        let mut total = f64::NAN;
        unsafe { dfl_solution_cost(sol, ptr::null_mut(), ptr::null_mut(), &mut total) };
        assert!(total > 0.0);
        unsafe { dfl_solution_free(sol) };
    }
    let bad = CString::new("baseline_z").unwrap();
    let mut sol = ptr::null_mut();
    assert_eq!(
        unsafe { dfl_run_baseline(s, bad.as_ptr(), ptr::null(), 3, &mut sol) },
        DflStatus::InvalidArgument
    );
    assert!(sol.is_null());
    assert!(last_error().contains("baseline_z"));
    unsafe { dfl_scenario_free(s) };
}

#[test]
fn error_codes() {
    let mut s = ptr::null_mut();
    let typo = CString::new(r#"{"num_car": 3}"#).unwrap();
    assert_eq!(
        unsafe { dfl_scenario_from_json(typo.as_ptr(), &mut s) },
        DflStatus::Validation
    );
    assert!(last_error().contains("num_car"));
    let invalid = CString::new(r#"{"num_cars": 10, "num_rbs": 5}"#).unwrap();
    assert_eq!(
        unsafe { dfl_scenario_from_json(invalid.as_ptr(), &mut s) },
        DflStatus::Validation
    );
    assert!(s.is_null());
    assert_eq!(
        unsafe { dfl_scenario_from_json(ptr::null(), ptr::null_mut()) },
        DflStatus::NullPointer
    );

    let s = scenario(r#"{"num_cars": 2, "num_rsus": 2}"#);
    let mut sol = ptr::null_mut();
    let cfg = CString::new(r#"{"mu": -1}"#).unwrap();
    assert_eq!(
        unsafe { dfl_solve(s, cfg.as_ptr(), &mut sol) },
        DflStatus::Validation
    );
    assert_eq!(
        unsafe { dfl_solve(ptr::null(), ptr::null(), &mut sol) },
        DflStatus::NullPointer
    );

    let (rsu, rb, power) = ([0i64, 5], [0i64, 1], [0.1, 0.1]);
    let mut total = 0.0;
    let status = unsafe {
        dfl_global_cost(
            s,
            rsu.as_ptr(),
            rb.as_ptr(),
            power.as_ptr(),
            2,
            0.5,
            &mut total,
        )
    };
    assert_eq!(status, DflStatus::InvalidArgument);
    let status = unsafe {
        dfl_global_cost(
            s,
            rsu.as_ptr(),
            rb.as_ptr(),
            power.as_ptr(),
            2,
            1.5,
            &mut total,
        )
    };
    assert_eq!(status, DflStatus::Validation);
    // unassigned cars cost nothing
    let none = [-1i64, -1];
    let status = unsafe {
        dfl_global_cost(
            s,
            none.as_ptr(),
            none.as_ptr(),
            power.as_ptr(),
            2,
            0.5,
            &mut total,
        )
    };
    assert_eq!(status, DflStatus::Ok);
    assert_eq!(total, 0.0);
    unsafe {
        dfl_scenario_free(s);
        dfl_scenario_free(ptr::null_mut());
        dfl_solution_free(ptr::null_mut());
    }
}
