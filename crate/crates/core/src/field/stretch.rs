//! Evaluation of the trigonometric interpolant at the stretched nodes
//! `lambda * x_j` by a chirp-z (Bluestein) convolution, one axis at a time.

use std::f64::consts::PI;

use num_complex::Complex64;
use rustfft::FftPlanner;

use super::fft::AxisFft;

/// `exp(i pi a b)` with the product reduced modulo 2 in double-double
/// arithmetic, so large phases keep full relative accuracy.
pub(crate) fn cis_pi_product(a: f64, b: f64) -> Complex64 {
    let hi = a * b;
    let lo = a.mul_add(b, -hi);
    let reduced = hi - 2.0 * (0.5 * hi).round();
    let theta = PI * (reduced + lo);
    Complex64::new(theta.cos(), theta.sin())
}

/// Replaces every line along `axis` by samples of its periodic interpolant
/// at `lambda * x_j`, `x_j = -L + j dx`. No amplitude factor is applied.
pub(crate) fn stretch_axis(axis_fft: &AxisFft, m: usize, dim: usize, data: &mut [Complex64], axis: usize, lambda: f64) {
    let h = (m / 2) as i64;
    let p = 2 * m;
    let mut planner = FftPlanner::<f64>::new();
    let fwd = planner.plan_fft_forward(p);
    let inv = planner.plan_fft_inverse(p);
    let mut scratch = vec![Complex64::new(0.0, 0.0); fwd.get_inplace_scratch_len().max(inv.get_inplace_scratch_len())];

    // kernel k(d) = exp(-i pi lambda (d + h)^2 / M) for d in [-M, M-1], stored circularly
    let mut kernel = vec![Complex64::new(0.0, 0.0); p];
    let mf = m as f64;
    for d in -(m as i64)..(m as i64) {
        let s = (d + h) as f64;
        let idx = d.rem_euclid(p as i64) as usize;
        kernel[idx] = cis_pi_product(-lambda, s * s / mf);
    }
    fwd.process_with_scratch(&mut kernel, &mut scratch);

    // per-mode prefactor a_n / c_n: exp(i pi n (1 - lambda)) exp(i pi lambda n^2 / M) / M
    let one_minus = 1.0 - lambda;
    let pre: Vec<Complex64> = (0..=m)
        .map(|mm| {
            let n = mm as i64 - h;
            let nf = n as f64;
            cis_pi_product(nf, one_minus) * cis_pi_product(lambda, nf * nf / mf) / mf
        })
        .collect();
    let post: Vec<Complex64> = (0..m)
        .map(|j| {
            let jf = j as f64;
            cis_pi_product(lambda, jf * jf / mf)
        })
        .collect();

    axis_fft.forward_axis(data, axis);

    let stride = m.pow((dim - 1 - axis) as u32);
    let block = m * stride;
    let mut work = vec![Complex64::new(0.0, 0.0); p];
    for outer in (0..data.len()).step_by(block) {
        for inner in 0..stride {
            let base = outer + inner;
            work.iter_mut().for_each(|v| *v = Complex64::new(0.0, 0.0));
            for (mm, pf) in pre.iter().enumerate() {
                let n = mm as i64 - h;
                let c = if n == -h || n == h {
                    0.5 * data[base + (h as usize) * stride]
                } else {
                    data[base + (n.rem_euclid(m as i64) as usize) * stride]
                };
                work[mm] = c * pf;
            }
            fwd.process_with_scratch(&mut work, &mut scratch);
            for (w, k) in work.iter_mut().zip(kernel.iter()) {
                *w *= k;
            }
            inv.process_with_scratch(&mut work, &mut scratch);
            let norm = 1.0 / p as f64;
            for (j, q) in post.iter().enumerate() {
                data[base + j * stride] = work[j] * q * norm;
            }
        }
    }
}
