//! Adaptive Gauss–Kronrod quadrature for vector-valued integrands.

use crate::error::{Error, Result};

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

struct Panel {
    a: f64,
    b: f64,
    value: Vec<f64>,
    error: f64,
}

fn kronrod<F: FnMut(f64, &mut [f64])>(f: &mut F, a: f64, b: f64, dim: usize, buf: &mut [f64]) -> Panel {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let mut k = vec![0.0; dim];
    let mut g = vec![0.0; dim];
    f(c, buf);
    for d in 0..dim {
        k[d] += WGK[7] * buf[d];
        g[d] += WG[3] * buf[d];
    }
    for i in 0..7 {
        let dx = h * XGK[i];
        for x in [c - dx, c + dx] {
            f(x, buf);
            for d in 0..dim {
                k[d] += WGK[i] * buf[d];
                if i % 2 == 1 {
                    g[d] += WG[i / 2] * buf[d];
                }
            }
        }
    }
    let mut error: f64 = 0.0;
    for d in 0..dim {
        k[d] *= h;
        g[d] *= h;
        error = error.max((k[d] - g[d]).abs());
    }
    Panel { a, b, value: k, error }
}

/// Integrate the `dim`-vector valued `f` over `[a, b]`, splitting the
/// initial range at `breaks`. Refines the panel with the largest error until
/// the summed error is below `abs_tol + rel_tol * max|I|`.
pub fn integrate<F>(mut f: F, dim: usize, a: f64, b: f64, breaks: &[f64], abs_tol: f64, rel_tol: f64, max_panels: usize) -> Result<(Vec<f64>, f64)>
where
    F: FnMut(f64, &mut [f64]),
{
    let mut edges = vec![a];
    edges.extend(breaks.iter().copied().filter(|&x| x > a && x < b));
    edges.push(b);
    edges.sort_by(f64::total_cmp);
    let mut buf = vec![0.0; dim];
    let mut panels: Vec<Panel> = edges.windows(2).map(|w| kronrod(&mut f, w[0], w[1], dim, &mut buf)).collect();
    loop {
        let mut total = vec![0.0; dim];
        let mut err = 0.0;
        let mut magnitude = 0.0f64;
        let mut worst = 0;
        for (i, p) in panels.iter().enumerate() {
            for d in 0..dim {
                total[d] += p.value[d];
            }
            err += p.error;
            magnitude += p.value.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            if p.error > panels[worst].error {
                worst = i;
            }
        }
        let scale = total.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        // below this the estimate is dominated by rounding
        let floor = 50.0 * f64::EPSILON * magnitude;
        if err <= (abs_tol + rel_tol * scale).max(floor) {
            return Ok((total, err));
        }
        if panels.len() >= max_panels {
            return Err(Error::Tolerance(err));
        }
        let p = panels.swap_remove(worst);
        let mid = 0.5 * (p.a + p.b);
        panels.push(kronrod(&mut f, p.a, mid, dim, &mut buf));
        panels.push(kronrod(&mut f, mid, p.b, dim, &mut buf));
    }
}

/// Scalar convenience wrapper around [`integrate`].
pub fn integrate_scalar<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, rel_tol: f64) -> Result<f64> {
    let (v, _) = integrate(|x, out| out[0] = f(x), 1, a, b, &[], 0.0, rel_tol, 4000)?;
    Ok(v[0])
}
