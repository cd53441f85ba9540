use std::ffi::{CStr, CString};
use std::path::Path;
use std::process::Command;
use std::ptr;

use funkan_ffi::*;

fn last_error() -> String {
    let p = funkan_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

#[test]
fn model_lifecycle_and_forward() {
    let spec = CString::new(r#"{"arch":"enhance"}"#).unwrap();
    let mut m: *mut FunkanModel = ptr::null_mut();
    assert_eq!(unsafe { funkan_model_new(spec.as_ptr(), 3, &mut m) }, FunkanStatus::Ok);
    assert!(!m.is_null());
    assert!(funkan_last_error().is_null());

    let mut params = 0usize;
    assert_eq!(unsafe { funkan_model_param_count(m, &mut params) }, FunkanStatus::Ok);
    assert_eq!(params, 152_545);
    let mut flops = 0u64;
    assert_eq!(unsafe { funkan_model_flops(m, 1, 16, 16, &mut flops) }, FunkanStatus::Ok);
    assert!(flops > 0);

    let x = vec![0.25f32; 2 * 16 * 16];
    let mut written = 0usize;
    let mut small = vec![0f32; 4];
    let s = unsafe { funkan_model_forward(m, x.as_ptr(), 2, 1, 16, 16, small.as_mut_ptr(), small.len(), &mut written) };
    assert_eq!(s, FunkanStatus::BufferTooSmall);
    assert_eq!(written, 2 * 16 * 16);
    let mut y = vec![f32::NAN; written];
    let s = unsafe { funkan_model_forward(m, x.as_ptr(), 2, 1, 16, 16, y.as_mut_ptr(), y.len(), &mut written) };
    assert_eq!(s, FunkanStatus::Ok);
    assert!(y.iter().all(|v| v.is_finite()));
    // identical batch entries give identical outputs
    assert_eq!(y[..256], y[256..]);

    unsafe { funkan_model_free(m) };
    unsafe { funkan_model_free(ptr::null_mut()) };
}

#[test]
fn named_specs_and_config_errors() {
    let mut m: *mut FunkanModel = ptr::null_mut();
    let name = CString::new("ufunkan").unwrap();
    assert_eq!(unsafe { funkan_model_new(name.as_ptr(), 0, &mut m) }, FunkanStatus::Ok);
    unsafe { funkan_model_free(m) };

    let bad = CString::new("resnet").unwrap();
    let mut m: *mut FunkanModel = ptr::null_mut();
    assert_eq!(unsafe { funkan_model_new(bad.as_ptr(), 0, &mut m) }, FunkanStatus::Config);
    assert!(m.is_null());
    assert!(last_error().contains("resnet"));

    assert_eq!(unsafe { funkan_model_new(ptr::null(), 0, &mut m) }, FunkanStatus::NullPointer);
    let missing = CString::new("/nonexistent/best.json").unwrap();
    assert_eq!(unsafe { funkan_model_load(missing.as_ptr(), &mut m) }, FunkanStatus::Io);
}

#[test]
fn forward_rejects_incompatible_input() {
    let name = CString::new("ufunkan").unwrap();
    let mut m: *mut FunkanModel = ptr::null_mut();
    assert_eq!(unsafe { funkan_model_new(name.as_ptr(), 0, &mut m) }, FunkanStatus::Ok);
    // not a multiple of the encoder's total stride
    let x = vec![0f32; 20 * 20];
    let mut y = vec![0f32; 20 * 20];
    let mut written = 0;
    let s = unsafe { funkan_model_forward(m, x.as_ptr(), 1, 1, 20, 20, y.as_mut_ptr(), y.len(), &mut written) };
    assert_ne!(s, FunkanStatus::Ok);
    assert!(!last_error().is_empty());
    unsafe { funkan_model_free(m) };
}

#[test]
fn image_utilities_match_the_library() {
    let h = 9;
    let w = 11;
    let img: Vec<f64> = (0..h * w).map(|i| ((i * 7) % 13) as f64 / 13.0).collect();
    let reference = funkan::Image::new(h, w, img.clone()).unwrap();

    let mut tv = 0.0;
    assert_eq!(unsafe { funkan_total_variation(img.as_ptr(), h, w, &mut tv) }, FunkanStatus::Ok);
    assert_eq!(tv, funkan::metrics::total_variation(&reference));

    let mut p = 0.0;
    assert_eq!(unsafe { funkan_psnr(img.as_ptr(), img.as_ptr(), h, w, 1.0, &mut p) }, FunkanStatus::Ok);
    assert!(p.is_infinite());

    let mut cropped = vec![0.0; 5 * 7];
    assert_eq!(
        unsafe { funkan_kspace_crop(img.as_ptr(), h, w, 5, 7, cropped.as_mut_ptr()) },
        FunkanStatus::Ok
    );
    assert_eq!(cropped, funkan::gibbs::kspace_crop(&reference, 5, 7).unwrap().data);
    let mut too_big = vec![0.0; 4];
    assert_eq!(
        unsafe { funkan_kspace_crop(img.as_ptr(), h, w, 12, 12, too_big.as_mut_ptr()) },
        FunkanStatus::InvalidArgument
    );

    let mut dering = vec![0.0; h * w];
    assert_eq!(
        unsafe { funkan_kellner_dering(img.as_ptr(), h, w, 0, 0, 0, dering.as_mut_ptr()) },
        FunkanStatus::Ok
    );
    let expected = funkan::metrics::kellner_dering(&reference, Default::default()).unwrap();
    assert_eq!(dering, expected.data);

    let logits: Vec<f64> = img.iter().map(|v| v - 0.5).collect();
    let mask: Vec<f64> = img.iter().map(|&v| if v > 0.5 { 1.0 } else { 0.0 }).collect();
    let mut iou = 0.0;
    assert_eq!(
        unsafe { funkan_iou(logits.as_ptr(), mask.as_ptr(), h, w, 0.5, &mut iou) },
        FunkanStatus::Ok
    );
    assert_eq!(iou, 1.0);

    let mut nan = img.clone();
    nan[3] = f64::NAN;
    assert_eq!(
        unsafe { funkan_kellner_dering(nan.as_ptr(), h, w, 0, 0, 0, dering.as_mut_ptr()) },
        FunkanStatus::NonFinite
    );
}

#[test]
fn hermite_values() {
    let mut v = 0.0;
    assert_eq!(unsafe { funkan_hermite(0, 0.0, &mut v) }, FunkanStatus::Ok);
    assert!((v - std::f64::consts::PI.powf(-0.25)).abs() < 1e-15);
    assert_eq!(unsafe { funkan_hermite(1, 0.0, &mut v) }, FunkanStatus::Ok);
    assert_eq!(v, 0.0);
    assert_eq!(unsafe { funkan_hermite(0, 0.0, ptr::null_mut()) }, FunkanStatus::NullPointer);
}

#[test]
fn version_matches_crate() {
    let v = unsafe { CStr::from_ptr(funkan_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

#[test]
fn header_compiles_as_c_and_cpp() {
    let header = Path::new(env!("CARGO_MANIFEST_DIR")).join("include/funkan.h");
    assert!(header.is_file(), "header missing at {}", header.display());
    for (compiler, lang) in [("cc", "c"), ("c++", "c++")] {
        let Ok(out) = Command::new(compiler)
            .args(["-fsyntax-only", "-Wall", "-Werror", "-x", lang])
            .arg(&header)
            .output()
        else {
            eprintln!("{compiler} not available; skipping");
            continue;
        };
        assert!(out.status.success(), "{compiler}: {}", String::from_utf8_lossy(&out.stderr));
    }
}
