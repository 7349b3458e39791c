//! Test-only oracles, independent of the library's solver and aggregation code.

#![allow(dead_code)]

/// Exact Euclidean projection onto `{a : 0 ≤ a ≤ c, Σ sₜ aₜ = 0}` with `sₜ ∈ {±1}`.
///
/// `a(μ) = clip(v − μ s, 0, c)` and `h(μ) = Σ sₜ aₜ(μ)` is piecewise linear and
/// non-increasing, so the root is found between sorted breakpoints.
pub fn project(v: &[f64], s: &[f64], c: f64) -> Vec<f64> {
    let at = |mu: f64| -> Vec<f64> {
        v.iter()
            .zip(s)
            .map(|(&vi, &si)| (vi - mu * si).clamp(0.0, c))
            .collect()
    };
    let h = |mu: f64| -> f64 { at(mu).iter().zip(s).map(|(a, si)| a * si).sum() };
    let mut bps: Vec<f64> = v
        .iter()
        .zip(s)
        .flat_map(|(&vi, &si)| [vi * si, (vi - c) * si])
        .collect();
    bps.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let lo = bps[0] - 1.0;
    let hi = bps[bps.len() - 1] + 1.0;
    let mut pts = vec![lo];
    pts.extend(bps);
    pts.push(hi);
    let mut prev = (pts[0], h(pts[0]));
    if prev.1 <= 0.0 {
        return at(prev.0);
    }
    for &mu in &pts[1..] {
        let cur = (mu, h(mu));
        if cur.1 <= 0.0 {
            let mu_star = if (prev.1 - cur.1).abs() < 1e-300 {
                cur.0
            } else {
                prev.0 + (cur.0 - prev.0) * prev.1 / (prev.1 - cur.1)
            };
            return at(mu_star);
        }
        prev = cur;
    }
    at(hi)
}

/// Projected-gradient (FISTA with restart) solution of the 2n-variable ε-SVR dual.
/// Stops once the objective has improved by less than 1e-15 (relative) for
/// 100 consecutive steps.
/// Returns `(coeffs αᵢ − α′ᵢ, dual objective)`.
pub fn svr_dual_oracle(k: &[Vec<f64>], y: &[f64], c: f64, eps: f64, max_iter: usize) -> (Vec<f64>, f64) {
    let n = y.len();
    let l = 2 * n;
    let s: Vec<f64> = (0..l).map(|t| if t < n { 1.0 } else { -1.0 }).collect();
    let p: Vec<f64> = (0..l).map(|t| if t < n { eps - y[t] } else { eps + y[t - n] }).collect();
    let q: Vec<Vec<f64>> = (0..l)
        .map(|t| (0..l).map(|u| s[t] * s[u] * k[t % n][u % n]).collect())
        .collect();
    let qa = |a: &[f64]| -> Vec<f64> { q.iter().map(|row| row.iter().zip(a).map(|(x, y)| x * y).sum()).collect() };
    let obj = |a: &[f64]| -> f64 {
        let qa = qa(a);
        a.iter().zip(&qa).zip(&p).map(|((ai, qi), pi)| ai * (0.5 * qi + pi)).sum()
    };
    // Lipschitz constant: Gershgorin bound on Q.
    let lip = q
        .iter()
        .map(|row| row.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0f64, f64::max)
        .max(1e-12);

    let mut x = vec![0.0; l];
    let mut z = x.clone();
    let mut t = 1.0f64;
    let mut fx = obj(&x);
    let mut still = 0;
    for _ in 0..max_iter {
        let g: Vec<f64> = qa(&z).iter().zip(&p).map(|(a, b)| a + b).collect();
        let step: Vec<f64> = z.iter().zip(&g).map(|(zi, gi)| zi - gi / lip).collect();
        let xn = project(&step, &s, c);
        let fxn = obj(&xn);
        if fxn > fx {
            if t == 1.0 {
                // A plain projected step from x no longer descends.
                break;
            }
            z = x.clone();
            t = 1.0;
            continue;
        }
        let tn = (1.0 + (1.0 + 4.0 * t * t).sqrt()) / 2.0;
        let beta = (t - 1.0) / tn;
        let gain = fx - fxn;
        z = xn.iter().zip(&x).map(|(a, b)| a + beta * (a - b)).collect();
        x = xn;
        fx = fxn;
        t = tn;
        if gain <= 1e-15 * fx.abs().max(1.0) {
            still += 1;
            if still > 100 {
                break;
            }
        } else {
            still = 0;
        }
    }
    let coeffs = (0..n).map(|i| x[i] - x[i + n]).collect();
    (coeffs, -fx)
}

/// Kernel values computed straight from the textbook formulas.
pub fn kernel_value(family: &str, gamma: f64, degree: i32, a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let d2: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum();
    match family {
        "linear" => gamma * dot,
        "polynomial" => (gamma * dot).powi(degree),
        "gaussian" => (-gamma * d2).exp(),
        "laplacian" => (-gamma * d2.sqrt()).exp(),
        _ => panic!("unknown kernel {family}"),
    }
}

/// Softmax of `−β v`, computed in long form.
pub fn softmax_neg(v: &[f64], beta: f64) -> Vec<f64> {
    let m = v.iter().cloned().fold(f64::INFINITY, f64::min);
    let e: Vec<f64> = v.iter().map(|x| (-beta * (x - m)).exp()).collect();
    let z: f64 = e.iter().sum();
    e.iter().map(|x| x / z).collect()
}

pub fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let cov: f64 = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let va: f64 = a.iter().map(|x| (x - ma).powi(2)).sum();
    let vb: f64 = b.iter().map(|y| (y - mb).powi(2)).sum();
    cov / (va.sqrt() * vb.sqrt())
}
