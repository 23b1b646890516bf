use std::ffi::CStr;
use std::ptr;

use sparse_recover_ffi::*;

fn last_error() -> String {
    let mut buf = vec![0 as std::ffi::c_char; 256];
    unsafe { sr_last_error(buf.as_mut_ptr(), buf.len()) };
    unsafe { CStr::from_ptr(buf.as_ptr()) }
        .to_string_lossy()
        .into_owned()
}

#[test]
fn noiseless_generate_and_select_round_trip() {
    let (n, p) = (400, 50);
    let mut beta = vec![0.0; p];
    let mut handle = ptr::null_mut();
    let st = unsafe { sr_dataset_generate(n, p, 3, 1.0, 0.0, 5, beta.as_mut_ptr(), &mut handle) };
    assert_eq!(st, SrStatus::Ok);
    assert_eq!(unsafe { sr_dataset_n(handle) }, n);
    assert_eq!(unsafe { sr_dataset_p(handle) }, p);

    let truth: Vec<u8> = beta.iter().map(|b| u8::from(*b != 0.0)).collect();
    let mut support = vec![9u8; p];
    let st = unsafe {
        sr_select(
            handle,
            SrRegime::KnownA,
            1.0,
            0.0,
            0,
            1.0,
            n / 2,
            support.as_mut_ptr(),
            ptr::null_mut(),
        )
    };
    assert_eq!(st, SrStatus::Ok, "{}", last_error());
    assert_eq!(support, truth);

    let mut sigma_hat = -1.0;
    let st = unsafe {
        sr_select(
            handle,
            SrRegime::FullyAdaptive,
            0.0,
            0.0,
            0,
            1.0,
            n / 2,
            support.as_mut_ptr(),
            &mut sigma_hat,
        )
    };
    assert_eq!(st, SrStatus::Ok);
    assert!(sigma_hat >= 0.0);
    unsafe { sr_dataset_free(handle) };
}

#[test]
fn dataset_from_raw_buffers() {
    let x = [1.0, 0.0, 0.0, 1.0, 1.0, 1.0];
    let y = [1.0, 2.0, 3.0];
    let mut handle = ptr::null_mut();
    assert_eq!(
        unsafe { sr_dataset_new(x.as_ptr(), y.as_ptr(), 3, 2, &mut handle) },
        SrStatus::Ok
    );
    assert_eq!(unsafe { sr_dataset_p(handle) }, 2);
    unsafe { sr_dataset_free(handle) };

    // column 0 vanishes on the second subsample; that is caught at selection time
    let x = [1.0, 1.0, 2.0, 0.0, 0.0, 1.0, 0.0, 1.0];
    let y = [1.0, 2.0, 3.0, 4.0];
    assert_eq!(
        unsafe { sr_dataset_new(x.as_ptr(), y.as_ptr(), 4, 2, &mut handle) },
        SrStatus::Ok
    );
    let mut support = [0u8; 2];
    let st = unsafe {
        sr_select(
            handle,
            SrRegime::KnownA,
            1.0,
            0.0,
            0,
            1.0,
            2,
            support.as_mut_ptr(),
            ptr::null_mut(),
        )
    };
    assert_eq!(st, SrStatus::ZeroColumn);
    assert!(last_error().contains("column 0"));
    unsafe { sr_dataset_free(handle) };
}

#[test]
fn errors_map_to_codes_and_messages() {
    let mut handle = ptr::null_mut();
    assert_eq!(
        unsafe { sr_dataset_new(ptr::null(), ptr::null(), 2, 2, &mut handle) },
        SrStatus::NullPointer
    );
    assert!(last_error().contains("null pointer"));

    let mut support = [0u8; 4];
    assert_eq!(
        unsafe {
            sr_select(
                ptr::null(),
                SrRegime::KnownA,
                1.0,
                1.0,
                1,
                1.0,
                1,
                support.as_mut_ptr(),
                ptr::null_mut(),
            )
        },
        SrStatus::NullPointer
    );

    let st = unsafe { sr_dataset_generate(100, 10, 3, 1.0, 1.0, 0, ptr::null_mut(), &mut handle) };
    assert_eq!(st, SrStatus::Ok);
    let mut support = [0u8; 10];
    let st = unsafe {
        sr_select(
            handle,
            SrRegime::KnownAll,
            1.0,
            1.0,
            6,
            1.0,
            50,
            support.as_mut_ptr(),
            ptr::null_mut(),
        )
    };
    assert_eq!(st, SrStatus::RegimeViolation);
    assert!(!last_error().is_empty());
    let st = unsafe {
        sr_select(
            handle,
            SrRegime::KnownA,
            1.0,
            1.0,
            3,
            1.0,
            100,
            support.as_mut_ptr(),
            ptr::null_mut(),
        )
    };
    assert_eq!(st, SrStatus::InvalidParameter);
    unsafe { sr_dataset_free(handle) };
    unsafe { sr_dataset_free(ptr::null_mut()) };
}

#[test]
fn prox_matches_scalar_soft_threshold() {
    let v = [3.0, -0.5];
    let lambda = [1.0, 0.2];
    let mut out = [0.0; 2];
    let st = unsafe { sr_prox_sorted_l1(v.as_ptr(), lambda.as_ptr(), 2, 1.0, out.as_mut_ptr()) };
    assert_eq!(st, SrStatus::Ok);
    assert_eq!(out, [2.0, -0.3]);
    let bad = [0.1, 1.0];
    let st = unsafe { sr_prox_sorted_l1(v.as_ptr(), bad.as_ptr(), 2, 1.0, out.as_mut_ptr()) };
    assert_eq!(st, SrStatus::InvalidParameter);
}

#[test]
fn psi_values_and_domain() {
    let (mut psi, mut psi_plus, mut se) = (0.0, 0.0, 0.0);
    assert_eq!(
        unsafe { sr_psi(20, 40, 4, 1.0, 1.0, 500, 1, 0, &mut psi, &mut se) },
        SrStatus::Ok
    );
    assert_eq!(
        unsafe {
            sr_psi(
                20,
                40,
                4,
                1.0,
                1.0,
                500,
                1,
                1,
                &mut psi_plus,
                ptr::null_mut(),
            )
        },
        SrStatus::Ok
    );
    assert!(se > 0.0);
    assert!(psi <= psi_plus + 1e-12);
    assert_eq!(
        unsafe { sr_psi(20, 8, 4, 1.0, 1.0, 10, 1, 0, &mut psi, &mut se) },
        SrStatus::RegimeViolation
    );
    assert_eq!(
        unsafe { sr_psi(20, 40, 4, 1.0, 1.0, 1, 1, 0, &mut psi, &mut se) },
        SrStatus::Ok
    );
    assert!(se.is_nan());
}

#[test]
fn mom_select_noiseless() {
    let (n, p) = (800, 40);
    let mut beta = vec![0.0; p];
    let mut handle = ptr::null_mut();
    assert_eq!(
        unsafe { sr_dataset_generate(n, p, 3, 2.0, 0.0, 11, beta.as_mut_ptr(), &mut handle) },
        SrStatus::Ok
    );
    let mut support = vec![0u8; p];
    let st = unsafe { sr_mom_select(handle, 0.1, 8, n / 2, support.as_mut_ptr()) };
    assert_eq!(st, SrStatus::Ok, "{}", last_error());
    let truth: Vec<u8> = beta.iter().map(|b| u8::from(*b != 0.0)).collect();
    assert_eq!(support, truth);
    unsafe { sr_dataset_free(handle) };
}

#[test]
fn header_declares_every_export() {
    let header = std::fs::read_to_string(concat!(
        env!("CARGO_MANIFEST_DIR"),
        "/include/sparse_recover.h"
    ))
    .unwrap();
    for name in [
        "sr_last_error",
        "sr_version",
        "sr_dataset_new",
        "sr_dataset_generate",
        "sr_dataset_free",
        "sr_select",
        "sr_mom_select",
        "sr_prox_sorted_l1",
        "sr_psi",
        "SR_STATUS_REGIME_VIOLATION",
        "typedef struct SrDataset SrDataset",
    ] {
        assert!(header.contains(name), "{name} missing from header");
    }
    let version = unsafe { CStr::from_ptr(sr_version()) }.to_str().unwrap();
    assert_eq!(version, env!("CARGO_PKG_VERSION"));
}
