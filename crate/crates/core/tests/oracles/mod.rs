//! Reference computations that share no code with the library: adaptive
//! Gauss-Kronrod quadrature of the adiabatic phase and a fixed-step RK4
//! propagator on plain complex arrays.
#![allow(dead_code)]
// Kronrod nodes and weights as tabulated
#![allow(clippy::excessive_precision)]

use num_complex::Complex64;

const XGK: [f64; 8] = [
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.0,
];
const WGK: [f64; 8] = [
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
];
// Gauss weights for XGK[1], XGK[3], XGK[5], XGK[7]
const WG: [f64; 4] = [
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
];

fn kronrod15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut k = WGK[7] * fc;
    let mut g = WG[3] * fc;
    for i in 0..7 {
        let (f1, f2) = (f(c - h * XGK[i]), f(c + h * XGK[i]));
        k += WGK[i] * (f1 + f2);
        if i % 2 == 1 {
            g += WG[i / 2] * (f1 + f2);
        }
    }
    (k * h, ((k - g) * h).abs())
}

/// Adaptive G7-K15 quadrature with bisection.
pub fn integrate<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, rel_tol: f64) -> f64 {
    fn rec<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, rel_tol: f64, depth: u32) -> f64 {
        let (k, err) = kronrod15(f, a, b);
        if err <= rel_tol * k.abs() || depth == 0 {
            return k;
        }
        let m = 0.5 * (a + b);
        rec(f, a, m, rel_tol, depth - 1) + rec(f, m, b, rel_tol, depth - 1)
    }
    rec(f, a, b, rel_tol, 40)
}

/// Triangle drive: Φ_i + k t up to τ/2, then back down.
pub fn drive(phi_i: f64, phi_f: f64, tau: f64, t: f64) -> f64 {
    let k = 2.0 * (phi_f - phi_i) / tau;
    if t <= 0.5 * tau {
        phi_i + k * t
    } else {
        phi_i + k * (tau - t)
    }
}

/// Phase ∫(ν1 − ν0) dt between the two passages of the crossing at δΦ = 0,
/// with ν1 − ν0 = 2√((lδΦ)² + Δ²).
pub fn phase_by_quadrature(slope: f64, gap: f64, phi_i: f64, phi_f: f64, tau: f64) -> f64 {
    let k = 2.0 * (phi_f - phi_i) / tau;
    let t1 = -phi_i / k;
    let t2 = tau - t1;
    let f = |t: f64| {
        let w = slope * drive(phi_i, phi_f, tau, t);
        2.0 * (w * w + gap * gap).sqrt()
    };
    let mid = 0.5 * tau;
    integrate(&f, t1, mid, 1e-14) + integrate(&f, mid, t2, 1e-14)
}

/// Crossing positions of the branches coupled to level 0.
pub const CROSSINGS: [f64; 2] = [0.0, 8.0];

/// Reduced Hamiltonian with one (two-level) or two (three-level) gaps.
pub fn hamiltonian(slope: f64, gaps: &[f64], detuning: f64) -> Vec<Vec<f64>> {
    let n = gaps.len() + 1;
    let mut h = vec![vec![0.0; n]; n];
    h[0][0] = -slope * detuning;
    for (j, &g) in gaps.iter().enumerate() {
        let x = CROSSINGS[j];
        h[j + 1][j + 1] = slope * (detuning - x) - slope * x;
        h[0][j + 1] = g;
        h[j + 1][0] = g;
    }
    h
}

type Rho = Vec<Vec<Complex64>>;

fn commutator_rhs(h: &[Vec<f64>], rho: &Rho) -> Rho {
    let n = h.len();
    let mut out = vec![vec![Complex64::new(0.0, 0.0); n]; n];
    for i in 0..n {
        for j in 0..n {
            let mut acc = Complex64::new(0.0, 0.0);
            for m in 0..n {
                acc += rho[m][j] * h[i][m] - rho[i][m] * h[m][j];
            }
            // -i [H, ρ]
            out[i][j] = Complex64::new(acc.im, -acc.re);
        }
    }
    out
}

fn axpy(base: &Rho, h: f64, k: &Rho) -> Rho {
    base.iter()
        .zip(k)
        .map(|(r, kr)| r.iter().zip(kr).map(|(a, b)| a + b * h).collect())
        .collect()
}

/// Fixed-step classical RK4 over one pulse, split at τ/2. Starts in
/// level 0 and returns the final density matrix.
pub fn rk4_final_state(
    slope: f64,
    gaps: &[f64],
    phi_i: f64,
    phi_f: f64,
    tau: f64,
    step: f64,
) -> Rho {
    let n = gaps.len() + 1;
    let mut rho = vec![vec![Complex64::new(0.0, 0.0); n]; n];
    rho[0][0] = Complex64::new(1.0, 0.0);
    let ham = |t: f64| hamiltonian(slope, gaps, drive(phi_i, phi_f, tau, t));
    for (a, b) in [(0.0, 0.5 * tau), (0.5 * tau, tau)] {
        let steps = ((b - a) / step - 1e-9).ceil().max(1.0) as usize;
        let h = (b - a) / steps as f64;
        for s in 0..steps {
            let t = a + s as f64 * h;
            // the drive is evaluated inside the segment so the apex is never crossed
            let k1 = commutator_rhs(&ham(t), &rho);
            let hm = ham(t + 0.5 * h);
            let k2 = commutator_rhs(&hm, &axpy(&rho, 0.5 * h, &k1));
            let k3 = commutator_rhs(&hm, &axpy(&rho, 0.5 * h, &k2));
            let k4 = commutator_rhs(&ham(t + h), &axpy(&rho, h, &k3));
            for i in 0..n {
                for j in 0..n {
                    rho[i][j] += (k1[i][j] + (k2[i][j] + k3[i][j]) * 2.0 + k4[i][j]) * (h / 6.0);
                }
            }
        }
    }
    rho
}
