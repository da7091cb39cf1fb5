// Own test binary: the limit is read from the process environment.
use std::ptr;

use karlin_ffi::*;

#[test]
fn simulation_above_limit_is_a_resource_error() {
    std::env::set_var("KARLIN_MAX_N", "100");
    unsafe {
        let mut m = ptr::null_mut();
        assert_eq!(karlin_model_new(1.0, 2.0, 0.5, &mut m), KarlinStatus::Ok);
        let mut p = ptr::null_mut();
        assert_eq!(karlin_simulate(m, 1000, 1, &mut p), KarlinStatus::Resource);
        assert!(p.is_null());
        assert_eq!(karlin_simulate(m, 100, 1, &mut p), KarlinStatus::Ok);
        karlin_path_free(p);
        karlin_model_free(m);
    }
}
