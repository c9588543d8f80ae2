use std::ffi::CStr;
use std::ptr;

use fda_ffi::*;

fn last_error() -> String {
    let p = fda_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

fn basis(order: usize, p: usize) -> *mut FdaBasis {
    let mut b = ptr::null_mut();
    assert_eq!(unsafe { fda_basis_new(order, p, &mut b) }, FdaStatus::Ok);
    b
}

/// Curves `row_i(t)` with coefficients from a small deterministic recipe.
fn dataset(b: *const FdaBasis, n: usize, shift: f64) -> *mut FdaDataset {
    let p = unsafe { fda_basis_num_basis(b) };
    let coeffs: Vec<f64> = (0..n * p)
        .map(|k| (k as f64 * 0.7 + shift).sin() + 0.1 * (k / p) as f64)
        .collect();
    let mut d = ptr::null_mut();
    assert_eq!(unsafe { fda_dataset_new(b, coeffs.as_ptr(), n, &mut d) }, FdaStatus::Ok);
    d
}

#[test]
fn basis_evaluation_and_errors() {
    let b = basis(4, 20);
    let mut values = vec![0.0; 20];
    assert_eq!(unsafe { fda_basis_eval(b, 0.3, values.as_mut_ptr(), 20) }, FdaStatus::Ok);
    assert!((values.iter().sum::<f64>() - 1.0).abs() < 1e-12);

    assert_eq!(unsafe { fda_basis_eval(b, 0.3, values.as_mut_ptr(), 3) }, FdaStatus::BufferTooSmall);
    assert!(last_error().contains("20"));
    assert_eq!(unsafe { fda_basis_eval(b, 1.5, values.as_mut_ptr(), 20) }, FdaStatus::Domain);
    assert_eq!(unsafe { fda_basis_eval(ptr::null(), 0.3, values.as_mut_ptr(), 20) }, FdaStatus::NullPointer);

    let mut gram = vec![0.0; 400];
    assert_eq!(unsafe { fda_basis_gram(b, gram.as_mut_ptr(), 400) }, FdaStatus::Ok);
    assert!((gram.iter().sum::<f64>() - 1.0).abs() < 1e-12);

    let mut bad = ptr::null_mut();
    assert_eq!(unsafe { fda_basis_new(4, 2, &mut bad) }, FdaStatus::InvalidArgument);
    assert!(bad.is_null());
    unsafe { fda_basis_free(b) };
    unsafe { fda_basis_free(ptr::null_mut()) };
}

#[test]
fn fit_recovers_constant() {
    let b = basis(4, 8);
    let ts: Vec<f64> = (0..50).map(|k| k as f64 / 49.0).collect();
    let ys = vec![5.0; 50];
    let mut coeffs = vec![0.0; 8];
    let mut mse = -1.0;
    let status = unsafe { fda_basis_fit(b, ts.as_ptr(), ys.as_ptr(), 50, coeffs.as_mut_ptr(), 8, &mut mse) };
    assert_eq!(status, FdaStatus::Ok);
    assert!(coeffs.iter().all(|c| (c - 5.0).abs() < 1e-10));
    assert!(mse < 1e-20);

    let status = unsafe { fda_basis_fit(b, ts.as_ptr(), ys.as_ptr(), 5, coeffs.as_mut_ptr(), 8, ptr::null_mut()) };
    assert_eq!(status, FdaStatus::Singular);
    unsafe { fda_basis_free(b) };
}

#[test]
fn fpca_through_handles() {
    let b = basis(4, 10);
    let d = dataset(b, 6, 0.0);
    assert_eq!(unsafe { fda_dataset_len(d) }, 6);
    let mut model = ptr::null_mut();
    assert_eq!(unsafe { fda_fpca_fit(d, 0, &mut model) }, FdaStatus::Ok);
    let r = unsafe { fda_fpca_num_components(model) };
    assert!((1..=5).contains(&r));

    let mut eig = vec![0.0; r];
    let mut share = vec![0.0; r];
    let mut scores = vec![0.0; 6 * r];
    let mut harmonics = vec![0.0; r * 10];
    unsafe {
        assert_eq!(fda_fpca_eigenvalues(model, eig.as_mut_ptr(), r), FdaStatus::Ok);
        assert_eq!(fda_fpca_explained_variance(model, share.as_mut_ptr(), r), FdaStatus::Ok);
        assert_eq!(fda_fpca_scores(model, scores.as_mut_ptr(), 6 * r), FdaStatus::Ok);
        assert_eq!(fda_fpca_harmonics(model, harmonics.as_mut_ptr(), r * 10), FdaStatus::Ok);
    }
    assert!(eig.windows(2).all(|w| w[0] >= w[1]));
    assert!((share.iter().sum::<f64>() - 1.0).abs() < 1e-9);
    // score variance equals the eigenvalue
    let var0 = (0..6).map(|i| scores[i * r].powi(2)).sum::<f64>() / 5.0;
    assert!((var0 - eig[0]).abs() < 1e-9 * eig[0]);

    let mut too_many = ptr::null_mut();
    assert_eq!(unsafe { fda_fpca_fit(d, 9, &mut too_many) }, FdaStatus::InvalidArgument);
    unsafe {
        fda_fpca_free(model);
        fda_dataset_free(d);
        fda_basis_free(b);
    }
}

#[test]
fn regression_fit_predict_and_json() {
    let b = basis(4, 9);
    let y = dataset(b, 12, 0.3);
    let xs = [dataset(b, 12, 1.1) as *const FdaDataset, dataset(b, 12, 2.9) as *const FdaDataset];
    let mut model = ptr::null_mut();
    assert_eq!(unsafe { fda_mfflr_fit(y, xs.as_ptr(), 2, 1, 1, &mut model) }, FdaStatus::Ok);

    let (mut rows, mut cols) = (0, 0);
    assert_eq!(unsafe { fda_mfflr_shape(model, &mut rows, &mut cols) }, FdaStatus::Ok);
    assert_eq!((rows, cols), (1, 3));
    let mut coeffs = vec![0.0; 3];
    let mut se = vec![0.0; 3];
    unsafe {
        assert_eq!(fda_mfflr_coefficients(model, coeffs.as_mut_ptr(), 3), FdaStatus::Ok);
        assert_eq!(fda_mfflr_std_errors(model, se.as_mut_ptr(), 3), FdaStatus::Ok);
    }
    // centred scores make the intercept vanish
    assert!(coeffs[0].abs() < 1e-10);
    assert!(se.iter().all(|s| *s >= 0.0));

    let mut predicted = ptr::null_mut();
    assert_eq!(unsafe { fda_mfflr_predict(model, xs.as_ptr(), 2, &mut predicted) }, FdaStatus::Ok);
    assert_eq!(unsafe { fda_dataset_len(predicted) }, 12);
    let ts = [0.0, 0.5, 1.0];
    let mut values = vec![0.0; 36];
    assert_eq!(unsafe { fda_dataset_eval(predicted, ts.as_ptr(), 3, values.as_mut_ptr(), 36) }, FdaStatus::Ok);

    let mut needed = 0;
    assert_eq!(
        unsafe { fda_mfflr_to_json(model, ptr::null_mut(), 0, &mut needed) },
        FdaStatus::BufferTooSmall
    );
    let mut buf = vec![0 as std::ffi::c_char; needed];
    assert_eq!(unsafe { fda_mfflr_to_json(model, buf.as_mut_ptr(), needed, ptr::null_mut()) }, FdaStatus::Ok);
    let json = unsafe { CStr::from_ptr(buf.as_ptr()) }.to_str().unwrap();
    let parsed: serde_json::Value = serde_json::from_str(json).unwrap();
    assert_eq!(parsed["coeffs"][0].as_array().unwrap().len(), 3);

    // a predictor list with a NULL entry
    let broken = [xs[0], ptr::null()];
    let mut none = ptr::null_mut();
    assert_eq!(unsafe { fda_mfflr_predict(model, broken.as_ptr(), 2, &mut none) }, FdaStatus::NullPointer);
    assert!(last_error().contains("NULL"));

    unsafe {
        fda_dataset_free(predicted);
        fda_mfflr_free(model);
        fda_dataset_free(y);
        for x in xs {
            fda_dataset_free(x as *mut FdaDataset);
        }
        fda_basis_free(b);
    }
}

#[test]
fn dataset_from_cli_json() {
    let json = r#"{"variable":"deaths","basis":{"order":2,"num_basis":3,"interior_knots":[0.5]},"labels":["a","b"],"coefficients":[[1,2,3],[0,0,1]]}"#;
    let c = std::ffi::CString::new(json).unwrap();
    let mut d = ptr::null_mut();
    assert_eq!(unsafe { fda_dataset_from_json(c.as_ptr(), &mut d) }, FdaStatus::Ok);
    let mut coeffs = vec![0.0; 6];
    assert_eq!(unsafe { fda_dataset_coefficients(d, coeffs.as_mut_ptr(), 6) }, FdaStatus::Ok);
    assert_eq!(coeffs, vec![1.0, 2.0, 3.0, 0.0, 0.0, 1.0]);
    unsafe { fda_dataset_free(d) };

    let bad = std::ffi::CString::new("{").unwrap();
    assert_eq!(unsafe { fda_dataset_from_json(bad.as_ptr(), &mut d) }, FdaStatus::Parse);
}
