use crate::model::{SH_C0, SH_COEFFS};

const C1: f64 = 0.488_602_511_902_919_9;
const C2: [f64; 5] = [
    1.092_548_430_592_079_2,
    -1.092_548_430_592_079_2,
    0.315_391_565_252_520_05,
    -1.092_548_430_592_079_2,
    0.546_274_215_296_039_6,
];
const C3: [f64; 7] = [
    -0.590_043_589_926_643_5,
    2.890_611_442_640_554,
    -0.457_045_799_464_465_8,
    0.373_176_332_590_115_4,
    -0.457_045_799_464_465_8,
    1.445_305_721_320_277,
    -0.590_043_589_926_643_5,
];

/// Evaluates view-dependent color up to `degree` (0..=3) for a unit view
/// direction, offset by 0.5 and clamped to `[0, 1]`.
pub fn eval_sh(degree: u8, sh: &[[f32; 3]; SH_COEFFS], dir: [f64; 3]) -> [f64; 3] {
    let c = |k: usize, ch: usize| f64::from(sh[k][ch]);
    let [x, y, z] = dir;
    let mut out = [0.0; 3];
    for (ch, o) in out.iter_mut().enumerate() {
        let mut r = SH_C0 * c(0, ch);
        if degree > 0 {
            r += -C1 * y * c(1, ch) + C1 * z * c(2, ch) - C1 * x * c(3, ch);
            if degree > 1 {
                let (xx, yy, zz) = (x * x, y * y, z * z);
                let (xy, yz, xz) = (x * y, y * z, x * z);
                r += C2[0] * xy * c(4, ch)
                    + C2[1] * yz * c(5, ch)
                    + C2[2] * (2.0 * zz - xx - yy) * c(6, ch)
                    + C2[3] * xz * c(7, ch)
                    + C2[4] * (xx - yy) * c(8, ch);
                if degree > 2 {
                    r += C3[0] * y * (3.0 * xx - yy) * c(9, ch)
                        + C3[1] * xy * z * c(10, ch)
                        + C3[2] * y * (4.0 * zz - xx - yy) * c(11, ch)
                        + C3[3] * z * (2.0 * zz - 3.0 * xx - 3.0 * yy) * c(12, ch)
                        + C3[4] * x * (4.0 * zz - xx - yy) * c(13, ch)
                        + C3[5] * z * (xx - yy) * c(14, ch)
                        + C3[6] * x * (xx - 3.0 * yy) * c(15, ch);
                }
            }
        }
        *o = (r + 0.5).clamp(0.0, 1.0);
    }
    out
}
