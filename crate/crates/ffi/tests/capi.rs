use std::ffi::{CStr, CString};
use std::path::PathBuf;
use std::process::Command;
use std::ptr;

use univfb_ffi::*;

fn last_error() -> String {
    let p = ufb_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

fn noise(spec: &str, q: u32, n: usize, seed: u64) -> *mut UfbNoise {
    let spec = CString::new(spec).unwrap();
    let mut out = ptr::null_mut();
    assert_eq!(
        unsafe { ufb_noise_generate(spec.as_ptr(), q, n, seed, &mut out) },
        UfbStatus::Ok
    );
    out
}

#[test]
fn noise_handle_round_trip() {
    let z = noise("periodic:pattern=0/1/2", 3, 7, 0);
    unsafe {
        assert_eq!(ufb_noise_len(z), 7);
        assert_eq!(ufb_noise_q(z), 3);
        let mut buf = [9u8; 7];
        assert_eq!(ufb_noise_copy(z, buf.as_mut_ptr(), 7), UfbStatus::Ok);
        assert_eq!(buf, [0, 1, 2, 0, 1, 2, 0]);
        assert_eq!(
            ufb_noise_copy(z, buf.as_mut_ptr(), 3),
            UfbStatus::InvalidArgument
        );

        let dir = tempfile::tempdir().unwrap();
        let path = CString::new(dir.path().join("z.modz").to_str().unwrap()).unwrap();
        assert_eq!(ufb_noise_write(z, path.as_ptr()), UfbStatus::Ok);
        let mut back = ptr::null_mut();
        assert_eq!(ufb_noise_read(path.as_ptr(), &mut back), UfbStatus::Ok);
        let mut buf2 = [0u8; 7];
        assert_eq!(ufb_noise_copy(back, buf2.as_mut_ptr(), 7), UfbStatus::Ok);
        assert_eq!(buf, buf2);
        ufb_noise_free(back);
        ufb_noise_free(z);
        ufb_noise_free(ptr::null_mut());
    }
}

#[test]
fn error_codes_and_messages() {
    unsafe {
        let mut out = ptr::null_mut();
        let spec = CString::new("bern:p=1.5").unwrap();
        assert_eq!(
            ufb_noise_generate(spec.as_ptr(), 2, 10, 0, &mut out),
            UfbStatus::InvalidArgument
        );
        assert!(out.is_null());
        assert!(!last_error().is_empty());

        assert_eq!(
            ufb_noise_generate(ptr::null(), 2, 10, 0, &mut out),
            UfbStatus::NullPointer
        );
        assert!(last_error().contains("spec"));

        let data = [0u8, 1, 4];
        assert_eq!(
            ufb_noise_from_symbols(3, data.as_ptr(), 3, &mut out),
            UfbStatus::InvalidArgument
        );

        let missing = CString::new("/nonexistent/z.modz").unwrap();
        assert_eq!(ufb_noise_read(missing.as_ptr(), &mut out), UfbStatus::Io);

        let mut h = 0.0;
        assert_eq!(ufb_binary_entropy(-0.1, &mut h), UfbStatus::InvalidArgument);
        assert_eq!(
            ufb_binary_entropy(0.5, ptr::null_mut()),
            UfbStatus::NullPointer
        );
    }
}

#[test]
fn sequential_coders_match_library() {
    let a = univfb::Alphabet::new(2).unwrap();
    let z = univfb::NoiseSpec::bernoulli(a, 0.1)
        .generate(a, 500, 3)
        .unwrap();
    unsafe {
        let mut lz = ptr::null_mut();
        let mut kt = ptr::null_mut();
        assert_eq!(ufb_lz78_new(2, &mut lz), UfbStatus::Ok);
        assert_eq!(ufb_kt_new(2, 3, &mut kt), UfbStatus::Ok);
        for &s in z.as_slice() {
            assert_eq!(ufb_lz78_feed(lz, s), UfbStatus::Ok);
            assert_eq!(ufb_kt_feed(kt, s), UfbStatus::Ok);
        }
        assert_eq!(ufb_lz78_feed(lz, 2), UfbStatus::InvalidArgument);
        let (mut l_s, mut l_t) = (0, 0);
        assert_eq!(ufb_lz78_lengths(lz, &mut l_s, &mut l_t), UfbStatus::Ok);
        assert_eq!((l_s, l_t), univfb::srccode::lz78_lengths(a, z.as_slice()));
        let mut bits = 0.0;
        assert_eq!(ufb_kt_code_length(kt, &mut bits), UfbStatus::Ok);
        assert!(bits > 0.0 && bits < 500.0);
        ufb_lz78_free(lz);
        ufb_kt_free(kt);
    }
}

#[test]
fn session_summary_matches_library() {
    use univfb::scheme::{message_stream, run_session, SchemeConfig};
    use univfb::srccode::Metric;

    let z = noise("bern:p=0.05", 2, 4096, 11);
    let cfg = UfbSessionConfig {
        n: 4096,
        q: 2,
        k_bits: 8,
        epsilon: 0.05,
        seed: 11,
        metric: UfbMetric::Lz78,
        kt_k_max: 0,
    };
    let mut sum = UfbSessionSummary::default();
    assert_eq!(unsafe { ufb_session_run(&cfg, z, &mut sum) }, UfbStatus::Ok);

    let a = univfb::Alphabet::binary();
    let lib_cfg = SchemeConfig::new(4096, a, 8, 0.05, 11, Metric::Lz78);
    let zs = univfb::NoiseSpec::parse("bern:p=0.05", a)
        .unwrap()
        .generate(a, 4096, 11)
        .unwrap();
    let log = run_session(&lib_cfg, &zs, message_stream(11, 8)).unwrap();
    assert_eq!(sum.blocks, log.decoded_blocks);
    assert_eq!(sum.r_act, log.r_act);
    assert_eq!(sum.error, log.error);
    assert!(!sum.floor_violated);

    let short = UfbSessionConfig { n: 100, ..cfg };
    assert_eq!(
        unsafe { ufb_session_run(&short, z, &mut sum) },
        UfbStatus::InvalidArgument
    );
    unsafe { ufb_noise_free(z) };
}

#[test]
fn bounds_agree_with_library() {
    let mut v = 0.0;
    unsafe {
        assert_eq!(ufb_delta_plus(1e5, 4, 2, &mut v), UfbStatus::Ok);
        assert_eq!(v, univfb::bounds::delta_plus(1e5, 4, 2).unwrap());
        assert_eq!(ufb_delta_minus(1e5, 4, 2, &mut v), UfbStatus::Ok);
        assert_eq!(v, univfb::bounds::delta_minus(1e5, 4, 2).unwrap());
        let mut s = UfbNStar::default();
        assert_eq!(ufb_n_star_bounds(4, 0.05, 2, &mut s), UfbStatus::Ok);
        assert!(s.lower <= s.upper);
    }
    assert_eq!(ufb_effective_rate(0.5, 0.0, 10), 0.5);
}

fn target_dir() -> PathBuf {
    // target/<profile>/deps/<test binary>
    std::env::current_exe()
        .unwrap()
        .parent()
        .unwrap()
        .parent()
        .unwrap()
        .to_path_buf()
}

#[test]
fn c_program_links_against_staticlib() {
    let manifest = PathBuf::from(env!("CARGO_MANIFEST_DIR"));
    let lib = target_dir().join("libunivfb_ffi.a");
    assert!(lib.exists(), "{} missing", lib.display());
    let dir = tempfile::tempdir().unwrap();
    let exe = dir.path().join("smoke");
    let cc = Command::new("cc")
        .arg("-std=c99")
        .arg("-Wall")
        .arg("-Werror")
        .arg("-I")
        .arg(manifest.join("include"))
        .arg(manifest.join("tests/c/smoke.c"))
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&exe)
        .output()
        .unwrap();
    assert!(
        cc.status.success(),
        "{}",
        String::from_utf8_lossy(&cc.stderr)
    );
    let run = Command::new(&exe).output().unwrap();
    assert!(
        run.status.success(),
        "{}",
        String::from_utf8_lossy(&run.stderr)
    );
    assert!(String::from_utf8_lossy(&run.stdout).starts_with("blocks="));
}
