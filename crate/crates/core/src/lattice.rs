//! Lattice shell bookkeeping and the regular part of the periodic Green function.

use std::f64::consts::PI;
use std::sync::OnceLock;

use crate::model::TWO_PI;

/// r₃(m): number of n ∈ ℤ³ with |n|² = m, for every m ≤ `max_n2`.
pub fn shell_counts(max_n2: u64) -> Vec<u64> {
    let m = max_n2 as usize;
    let mut r2 = vec![0u64; m + 1];
    let b = (max_n2 as f64).sqrt().floor() as i64 + 1;
    for x in -b..=b {
        for y in -b..=b {
            let s = (x * x + y * y) as usize;
            if s <= m {
                r2[s] += 1;
            }
        }
    }
    let mut r3 = vec![0u64; m + 1];
    for (s, out) in r3.iter_mut().enumerate() {
        let mut z = -b;
        while z <= b {
            let z2 = (z * z) as usize;
            if z2 <= s {
                *out += r2[s - z2];
            }
            z += 1;
        }
    }
    r3
}

/// Σ over n ≠ 0 with |n|² ≤ max_n2 of g(|n|²), grouped by shells.
pub fn shell_sum<F: Fn(u64) -> f64>(max_n2: u64, g: F) -> f64 {
    let counts = shell_counts(max_n2);
    let mut acc = 0.0;
    for (m, &c) in counts.iter().enumerate().skip(1) {
        if c > 0 {
            acc += c as f64 * g(m as u64);
        }
    }
    acc
}

/// Converts a radius in momentum units to the largest |n|² inside it.
pub fn max_n2_for_radius(p_radius: f64) -> u64 {
    let r = p_radius / TWO_PI;
    (r * r * (1.0 + 1e-12)).floor() as u64
}

/// C₀ = lim_{x→0} [G(x) − 1/(4π|x|)] for G(x) = Σ_{p∈Λ*₊} e^{ip·x}/p²,
/// evaluated by Ewald summation.
pub fn green_constant() -> f64 {
    static C0: OnceLock<f64> = OnceLock::new();
    *C0.get_or_init(|| {
        let alpha: f64 = 2.0;
        let b = 7i64;
        let mut recip = 0.0;
        let mut real = 0.0;
        for x in -b..=b {
            for y in -b..=b {
                for z in -b..=b {
                    if x == 0 && y == 0 && z == 0 {
                        continue;
                    }
                    let n2 = (x * x + y * y + z * z) as f64;
                    let p2 = TWO_PI * TWO_PI * n2;
                    recip += (-p2 / (4.0 * alpha * alpha)).exp() / p2;
                    let r = n2.sqrt();
                    real += libm::erfc(alpha * r) / (4.0 * PI * r);
                }
            }
        }
        recip + real - alpha / (2.0 * PI.powf(1.5)) - 1.0 / (4.0 * alpha * alpha)
    })
}
