//! Modified Bessel functions of the first kind, evaluated in log space.
//!
//! `log I_nu(x)` switches between three representations:
//!
//! * the ascending power series, summed with a running log-sum-exp, for
//!   `x <= 200` and moderate order,
//! * Hankel's large-argument expansion for small orders (it terminates for
//!   half-integer orders, i.e. odd ambient dimensions),
//! * Debye's uniform expansion in the order for everything else.
//!
//! None of the paths exponentiate `x`, so concentrations of 10^4 and beyond
//! are fine in any dimension.

use std::f64::consts::PI;

use statrs::function::gamma::ln_gamma;

const SERIES_MAX_ARG: f64 = 200.0;
const SERIES_MAX_ORDER: f64 = 30.0;
const HANKEL_MAX_ORDER: f64 = 10.0;

/// `log I_nu(x)` for `nu >= 0`, `x >= 0`.
pub fn log_bessel_i(nu: f64, x: f64) -> f64 {
    debug_assert!(nu >= 0.0 && x >= 0.0);
    if x == 0.0 {
        return if nu == 0.0 { 0.0 } else { f64::NEG_INFINITY };
    }
    if nu < SERIES_MAX_ORDER && x <= SERIES_MAX_ARG {
        log_series(nu, x)
    } else if nu < HANKEL_MAX_ORDER {
        log_hankel(nu, x)
    } else {
        log_debye(nu, x)
    }
}

fn log_series(nu: f64, x: f64) -> f64 {
    let lx = (0.5 * x).ln();
    let mut term = nu * lx - ln_gamma(nu + 1.0);
    // Running log-sum-exp: total = anchor + ln(acc).
    let mut anchor = term;
    let mut acc = 1.0;
    let mut k: f64 = 0.0;
    loop {
        term += 2.0 * lx - (k + 1.0).ln() - (k + nu + 1.0).ln();
        k += 1.0;
        if term > anchor {
            acc = acc * (anchor - term).exp() + 1.0;
            anchor = term;
        } else {
            acc += (term - anchor).exp();
        }
        // Terms decrease monotonically once k exceeds x/2.
        if k > 0.5 * x && term < anchor - 40.0 {
            break;
        }
    }
    anchor + acc.ln()
}

fn log_hankel(nu: f64, x: f64) -> f64 {
    let mu = 4.0 * nu * nu;
    let mut sum = 1.0;
    let mut term: f64 = 1.0;
    for k in 1..200 {
        let odd = (2 * k - 1) as f64;
        let next = -term * (mu - odd * odd) / (k as f64 * 8.0 * x);
        if next.abs() < 1e-17 || next.abs() > term.abs() {
            break;
        }
        term = next;
        sum += term;
    }
    x - 0.5 * (2.0 * PI * x).ln() + sum.ln()
}

// Debye polynomials u_k(p), ascending coefficients of p, k = 0..=6.
const DEBYE_U: [&[f64]; 7] = [
    &[1.0],
    &[0.0, 3.0 / 24.0, 0.0, -5.0 / 24.0],
    &[0.0, 0.0, 81.0 / 1152.0, 0.0, -462.0 / 1152.0, 0.0, 385.0 / 1152.0],
    &[
        0.0,
        0.0,
        0.0,
        30375.0 / 414720.0,
        0.0,
        -369603.0 / 414720.0,
        0.0,
        765765.0 / 414720.0,
        0.0,
        -425425.0 / 414720.0,
    ],
    &[
        0.0,
        0.0,
        0.0,
        0.0,
        4465125.0 / 39813120.0,
        0.0,
        -94121676.0 / 39813120.0,
        0.0,
        349922430.0 / 39813120.0,
        0.0,
        -446185740.0 / 39813120.0,
        0.0,
        185910725.0 / 39813120.0,
    ],
    &[
        0.0,
        0.0,
        0.0,
        0.0,
        0.0,
        1519035525.0 / 6688604160.0,
        0.0,
        -49286948607.0 / 6688604160.0,
        0.0,
        284499769554.0 / 6688604160.0,
        0.0,
        -614135872350.0 / 6688604160.0,
        0.0,
        566098157625.0 / 6688604160.0,
        0.0,
        -188699385875.0 / 6688604160.0,
    ],
    &[
        0.0,
        0.0,
        0.0,
        0.0,
        0.0,
        0.0,
        2757049477875.0 / 4815794995200.0,
        0.0,
        -127577298354750.0 / 4815794995200.0,
        0.0,
        1050760774457901.0 / 4815794995200.0,
        0.0,
        -3369032068261860.0 / 4815794995200.0,
        0.0,
        5104696716244125.0 / 4815794995200.0,
        0.0,
        -3685299006138750.0 / 4815794995200.0,
        0.0,
        1023694168371875.0 / 4815794995200.0,
    ],
];

fn log_debye(nu: f64, x: f64) -> f64 {
    let z = x / nu;
    let r = z.hypot(1.0);
    let p = 1.0 / r;
    let eta = r + (z / (1.0 + r)).ln();
    let mut sum = 0.0;
    let mut nu_pow = 1.0;
    for coeffs in DEBYE_U {
        let u = coeffs.iter().rev().fold(0.0, |acc, c| acc * p + c);
        sum += u / nu_pow;
        nu_pow *= nu;
    }
    nu * eta - 0.5 * (2.0 * PI * nu).ln() - 0.5 * r.ln() + sum.ln()
}
