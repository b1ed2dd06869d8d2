#![allow(dead_code)]

use boostbif_core::{ControlScheme, ConverterParams};

pub fn ex1() -> ConverterParams {
    ConverterParams::new(3.0, 1e-6, 100e-6, 2.0, 0.1, 0.0, 1.0, 600e3, ControlScheme::Pvmc { k_p: 2.0 }).unwrap()
}

pub fn ex2() -> ConverterParams {
    ConverterParams::new(
        10.0,
        46.6e-6,
        3e-3,
        23.0,
        0.6,
        0.018,
        2.0,
        300e3,
        ControlScheme::VmcType3 { k_c: 35.59, z1: 556.0, z2: 549.0, p1: 25510.0, p2: 19495.0 },
    )
    .unwrap()
}

pub fn ex3() -> ConverterParams {
    ConverterParams { v_h: 0.0, ..ex1() }.with_scheme(ControlScheme::CmcClosedLoop { k_p: 2.0 })
}

/// Adaptive Dormand-Prince 5(4) integration of `x' = A x + b` over `[0, t]`.
pub fn rk45(a: &nalgebra::DMatrix<f64>, b: &nalgebra::DVector<f64>, x0: &nalgebra::DVector<f64>, t: f64, rtol: f64) -> nalgebra::DVector<f64> {
    use nalgebra::DVector;
    const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
    const A: [[f64; 6]; 7] = [
        [0.0; 6],
        [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
        [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
        [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
        [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
        [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
        [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
    ];
    const B5: [f64; 7] = [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0, 0.0];
    const B4: [f64; 7] =
        [5179.0 / 57600.0, 0.0, 7571.0 / 16695.0, 393.0 / 640.0, -92097.0 / 339200.0, 187.0 / 2100.0, 1.0 / 40.0];
    let _ = C;
    let f = |x: &DVector<f64>| a * x + b;
    let mut x = x0.clone();
    let mut tt = 0.0;
    let mut h = t / 1000.0;
    while tt < t {
        if tt + h > t {
            h = t - tt;
        }
        let mut k: Vec<DVector<f64>> = Vec::with_capacity(7);
        #[allow(clippy::needless_range_loop)]
        for i in 0..7 {
            let mut xi = x.clone();
            for j in 0..i {
                xi += &k[j] * (h * A[i][j]);
            }
            k.push(f(&xi));
        }
        let mut x5 = x.clone();
        let mut x4 = x.clone();
        for i in 0..7 {
            x5 += &k[i] * (h * B5[i]);
            x4 += &k[i] * (h * B4[i]);
        }
        let scale = x.abs().max().max(x5.abs().max()).max(1e-12);
        let err = (&x5 - &x4).abs().max() / (rtol * scale);
        if err <= 1.0 {
            tt += h;
            x = x5;
        }
        h *= (0.9 * err.max(1e-10).powf(-0.2)).clamp(0.2, 5.0);
    }
    x
}
