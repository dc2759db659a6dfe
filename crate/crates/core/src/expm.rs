//! Matrix exponential by scaling and squaring with diagonal Padé
//! approximants of degree 3, 5, 7, 9 or 13 (Higham 2005).

use crate::error::{Error, Result};
use crate::linalg::{matmul, CMat, C64};

const THETA: [(usize, f64); 5] = [
    (3, 1.495_585_217_958_292e-2),
    (5, 2.539_398_330_063_230e-1),
    (7, 9.504_178_996_162_932e-1),
    (9, 2.097_847_961_257_068e0),
    (13, 5.371_920_351_148_152e0),
];

const B3: [f64; 4] = [120.0, 60.0, 12.0, 1.0];
const B5: [f64; 6] = [30240.0, 15120.0, 3360.0, 420.0, 30.0, 1.0];
const B7: [f64; 8] = [
    17297280.0, 8648640.0, 1995840.0, 277200.0, 25200.0, 1512.0, 56.0, 1.0,
];
const B9: [f64; 10] = [
    17643225600.0,
    8821612800.0,
    2075673600.0,
    302702400.0,
    30270240.0,
    2162160.0,
    110880.0,
    3960.0,
    90.0,
    1.0,
];
const B13: [f64; 14] = [
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
];

fn norm1(a: &CMat) -> f64 {
    a.column_iter()
        .map(|c| c.iter().map(|z| z.norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

fn scaled_identity(n: usize, c: f64) -> CMat {
    CMat::from_diagonal_element(n, n, C64::new(c, 0.0))
}

/// Odd/even parts (U, V) of the degree-m Padé approximant for m ≤ 9.
fn pade_low(a: &CMat, b: &[f64]) -> (CMat, CMat) {
    let n = a.nrows();
    let a2 = matmul(a, a);
    let mut powers = vec![scaled_identity(n, 1.0), a2.clone()];
    let m = b.len() - 1;
    while powers.len() <= m / 2 {
        let next = matmul(powers.last().unwrap(), &a2);
        powers.push(next);
    }
    let mut u = CMat::zeros(n, n);
    let mut v = CMat::zeros(n, n);
    for (j, p) in powers.iter().enumerate() {
        if 2 * j + 1 <= m {
            u += p * C64::new(b[2 * j + 1], 0.0);
        }
        v += p * C64::new(b[2 * j], 0.0);
    }
    (matmul(a, &u), v)
}

fn pade13(a: &CMat) -> (CMat, CMat) {
    let n = a.nrows();
    let b = &B13;
    let c = |x: f64| C64::new(x, 0.0);
    let a2 = matmul(a, a);
    let a4 = matmul(&a2, &a2);
    let a6 = matmul(&a4, &a2);
    let ident = scaled_identity(n, 1.0);

    let inner_u = &a6 * c(b[13]) + &a4 * c(b[11]) + &a2 * c(b[9]);
    let u = matmul(&a6, &inner_u)
        + &a6 * c(b[7])
        + &a4 * c(b[5])
        + &a2 * c(b[3])
        + &ident * c(b[1]);
    let u = matmul(a, &u);

    let inner_v = &a6 * c(b[12]) + &a4 * c(b[10]) + &a2 * c(b[8]);
    let v = matmul(&a6, &inner_v)
        + &a6 * c(b[6])
        + &a4 * c(b[4])
        + &a2 * c(b[2])
        + &ident * c(b[0]);
    (u, v)
}

/// exp(A) for a square complex matrix.
///
/// Fails when the input is not finite or the Padé denominator is singular;
/// the error message carries the 1-norm and the number of squarings.
pub fn expm(a: &CMat) -> Result<CMat> {
    let n = a.nrows();
    if n != a.ncols() {
        return Err(Error::Dimension(format!("expm of a {}x{} matrix", n, a.ncols())));
    }
    if n == 0 {
        return Ok(CMat::zeros(0, 0));
    }
    let nrm = norm1(a);
    if !nrm.is_finite() {
        return Err(Error::Expm(format!("non-finite input (1-norm = {nrm})")));
    }

    let mut squarings = 0u32;
    let (u, v) = match THETA.iter().find(|(_, th)| nrm <= *th) {
        Some((3, _)) => pade_low(a, &B3),
        Some((5, _)) => pade_low(a, &B5),
        Some((7, _)) => pade_low(a, &B7),
        Some((9, _)) => pade_low(a, &B9),
        _ => {
            let theta13 = THETA[4].1;
            if nrm > theta13 {
                squarings = (nrm / theta13).log2().ceil().max(0.0) as u32;
            }
            let scaled = a * C64::new(0.5f64.powi(squarings as i32), 0.0);
            pade13(&scaled)
        }
    };

    let p = &v + &u;
    let q = &v - &u;
    let lu = q.lu();
    let mut r = lu.solve(&p).ok_or_else(|| {
        Error::Expm(format!(
            "singular Padé denominator (1-norm = {nrm:.3e}, squarings = {squarings})"
        ))
    })?;
    for _ in 0..squarings {
        r = matmul(&r, &r);
    }
    if r.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::Expm(format!(
            "overflow while squaring (1-norm = {nrm:.3e}, squarings = {squarings})"
        )));
    }
    Ok(r)
}
