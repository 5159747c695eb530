//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any fails. Run with `cargo test -p padicwalk-cli --test acceptance`.

use std::path::Path;
use std::process::{Command, ExitCode};
use std::time::Instant;

use padicwalk_core::fpt::{self, g_density, laplace_g, laplace_g_zero, volterra_solve, FptGrid};
use padicwalk_core::heatkernel::EvolvedBall;
use padicwalk_core::padic::{PadicScalar, DEFAULT_PRECISION};
use padicwalk_core::symbol::{aw_oracle, aw_unshifted_variant};
use padicwalk_core::walker::{sample_increment, IncrementLaw};
use padicwalk_core::{
    HeatKernelModel, Landscape, RadialStepFunction, Radius, RecurrenceTag, ReturnEstimate, Space, Start, SymbolTable,
    WalkConfig, WalkMode, Walker,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn verdict(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn core<T>(r: padicwalk_core::Result<T>) -> Result<T, String> {
    r.map_err(|e| e.to_string())
}

fn power_law(p: u32, n: u32, alpha: f64) -> Result<Landscape, String> {
    core(Landscape::power_law(core(Space::new(p, n))?, 1.0, alpha))
}

/// Mean of `chi(p^{-d} y_1)` over the unit sphere of Z_p^n, by enumerating
/// `y_1` modulo `p^d`; each residue is weighted by the number of completions
/// `(y_2, ..)` modulo `p^d` that keep the tuple on the sphere.
fn sphere_character_mean(p: u32, n: u32, d: u32) -> f64 {
    let modulus = (p as i64).pow(d);
    let rest = (modulus as f64).powi(n as i32 - 1);
    let rest_nonunit = ((modulus / p as i64) as f64).powi(n as i32 - 1);
    let (mut sum, mut count) = (0.0, 0.0);
    for y1 in 0..modulus {
        let weight = if y1 % p as i64 != 0 { rest } else { rest - rest_nonunit };
        if weight == 0.0 {
            continue;
        }
        let x = PadicScalar::from_integer(p, DEFAULT_PRECISION, y1).unwrap().scale(-(d as i32));
        sum += weight * x.character().re;
        count += weight;
    }
    sum / count
}

/// `A_w(p^{-g}) = sum_m vol(S_m) (1 - mean_{S_m} chi) / w(p^m)` with the
/// sphere means from enumeration.
fn symbol_from_characters(l: &Landscape, g: i32, means: &[(i32, f64)]) -> f64 {
    let s = l.space();
    let mean = |d: i32| means.iter().find(|&&(k, _)| k == d).map_or(0.0, |&(_, v)| v);
    let mut sum = 0.0;
    for m in g - 3..g + 4000 {
        // y on S_m paired with xi of norm p^{-g} gives chi(p^{g-m} unit)
        let weight = 1.0 - if m - g <= 0 { 1.0 } else { mean(g - m) };
        let term = weight * (s.ln_shell_volume(m) - l.ln_w(m)).exp();
        sum += term;
        if m > g + 2 && !(term > 1e-19 * sum) {
            break;
        }
    }
    sum
}

fn c1_symbol() -> Outcome {
    let mut worst_lib = 0.0f64;
    let mut worst_enum = 0.0f64;
    let mut cases = 0;
    for p in [3u32, 5, 7] {
        for n in 1..=3u32 {
            let nf = n as f64;
            // means of chi over spheres S_m with m - g = 1, 2, 3 (k = g - m)
            let means: Vec<(i32, f64)> = (1..=3).map(|d| (-d, sphere_character_mean(p, n, d as u32))).collect();
            let mut landscapes = Vec::new();
            for a in [nf + 0.5, 2.0 * nf, 2.0 * nf + 1.0] {
                landscapes.push(power_law(p, n, a)?);
                landscapes.push(power_law(p, n, a - nf)?);
            }
            landscapes.push(core(Landscape::exponential(core(Space::new(p, n))?, 1.0, 1.0, 1.0))?);
            for l in &landscapes {
                let t = core(SymbolTable::new(l, -10, 10))?;
                for g in -10..=10 {
                    let v = core(t.aw(g))?;
                    let o = core(aw_oracle(l, g, 400))?;
                    let e = symbol_from_characters(l, g, &means);
                    worst_lib = worst_lib.max((v - o).abs() / o.abs().max(1.0));
                    worst_enum = worst_enum.max((v - e).abs() / e.abs().max(1.0));
                    cases += 1;
                }
            }
        }
    }
    let t = core(SymbolTable::new(&power_law(3, 1, 2.0)?, -10, 10))?;
    let mut golden = 0.0f64;
    for g in -10..=10 {
        let want = 13.0 / 108.0 * 3f64.powi(-2 * g);
        golden = golden.max((core(t.aw(g))? - want).abs() / want);
    }
    verdict(
        worst_lib <= 1e-10 && worst_enum <= 1e-10 && golden <= 1e-12,
        format!("{cases} cases; max err vs shell oracle {worst_lib:.2e}, vs character enumeration {worst_enum:.2e}; golden 13/108 rel err {golden:.2e}"),
    )
}

fn c2_discrepancy() -> Outcome {
    let t = core(SymbolTable::new(&power_law(3, 1, 2.0)?, -10, 10))?;
    let a = core(t.aw(0))?;
    let variant = core(aw_unshifted_variant(&t, 0))?;
    let ok = (a - 13.0 / 108.0).abs() < 1e-14 && (variant - 5.0 / 108.0).abs() < 1e-14;
    verdict(ok, format!("A_w(1) = {a:.15} (13/108 = {:.15}); unshifted variant = {variant:.15} (5/108)", 13.0 / 108.0))
}

fn c3_kernel_axioms() -> Outcome {
    let mut detail = Vec::new();
    let mut ok = true;
    for (p, n, a) in [(3u32, 1u32, 2.0), (5, 2, 0.7)] {
        let m = core(HeatKernelModel::new(&power_law(p, n, a)?, 1.0))?;
        let mut min_z = f64::INFINITY;
        let mut mass_err = 0.0f64;
        for t in [1e-3, 0.1, 1.0, 10.0, 100.0] {
            for b in -6..=12 {
                min_z = min_z.min(core(m.z_density(Radius::Level(b), t))?);
            }
            min_z = min_z.min(core(m.z_density(Radius::Origin, t))?);
            mass_err = mass_err.max((core(m.mass(t))?.sum - 1.0).abs());
        }
        let mut semi = 0.0f64;
        for t in [0.1, 1.0, 10.0] {
            for t2 in [0.1, 1.0, 10.0] {
                for ball in [-1, 0, 2] {
                    let f = EvolvedBall { model: &m, ball, t };
                    for x in [Radius::Origin, Radius::Level(-2), Radius::Level(0), Radius::Level(1), Radius::Level(3), Radius::Level(6)] {
                        let lhs = core(m.evolve_radial(&f, x, t2))?;
                        let rhs = core(m.evolve_ball(ball, x, t + t2))?;
                        semi = semi.max((lhs - rhs).abs());
                    }
                }
            }
        }
        let u = core(RadialStepFunction::new(vec![(-1, 2.0), (1, -0.5), (3, 0.25)]))?;
        let mut delta = 0.0f64;
        for x in [Radius::Origin, Radius::Level(-3), Radius::Level(-1), Radius::Level(0), Radius::Level(2), Radius::Level(3), Radius::Level(4), Radius::Level(8)] {
            for ball in [-2, 0, 3] {
                let want = if x.is_within(ball) { 1.0 } else { 0.0 };
                delta = delta.max((core(m.evolve_ball(ball, x, 1e-8))? - want).abs());
            }
            let want = match x {
                Radius::Origin => 2.0,
                Radius::Level(l) => padicwalk_core::RadialFunction::value(&u, l),
            };
            delta = delta.max((core(m.evolve_step(&u, x, 1e-8))? - want).abs());
        }
        ok &= min_z >= 0.0 && mass_err <= 1e-8 && semi <= 1e-9 && delta <= 1e-6;
        detail.push(format!("p={p} n={n}: min Z {min_z:.2e}, mass err {mass_err:.1e}, semigroup err {semi:.1e}, delta-limit err {delta:.1e}"));
    }
    verdict(ok, detail.join("; "))
}

fn c4_decay_bound() -> Outcome {
    let mut detail = Vec::new();
    let mut ok = true;
    for (p, n, a) in [(3u32, 1u32, 2.0), (3, 1, 0.5), (5, 2, 1.0)] {
        let l = power_law(p, n, a)?;
        let m = core(HeatKernelModel::with_auto_kappa(&l))?;
        let a1 = l.certificate().alpha1;
        let s = l.space();
        let mut fitted = 0.0f64;
        for beta in 1..=20 {
            for i in 0..=40 {
                let t = 1e-3 * 10f64.powf(i as f64 / 10.0);
                let z = core(m.z_density(Radius::Level(beta), t))?;
                fitted = fitted.max(z * (beta as f64 * a1 * s.ln_p()).exp() / t);
            }
        }
        let bound = m.decay_constant();
        // the supremum is approached as t -> 0 and equals kappa/C0 up to rounding
        ok &= fitted.is_finite() && fitted <= bound * (1.0 + 1e-12);
        detail.push(format!("p={p} n={n} a1={a1}: fitted sup {fitted:.4e} <= kappa/C0 = {bound:.4e}"));
    }
    verdict(ok, detail.join("; "))
}

fn c5_master_equation() -> Outcome {
    let l = power_law(3, 1, 2.0)?;
    let m = core(HeatKernelModel::with_tolerance(&l, 1.0, 1e-14))?;
    let radii = [Radius::Origin, Radius::Level(-2), Radius::Level(1), Radius::Level(2), Radius::Level(4)];
    let mut residual = 0.0f64;
    for &r in &radii {
        for t in [1e-3, 0.01, 0.1, 1.0, 10.0] {
            residual = residual.max(core(m.master_residual(r, t))?.abs());
        }
    }
    let times = [0.05f64, 0.2, 1.0, 3.0, 10.0];
    let mut fd_err = [0.0f64; 2];
    for &r in &radii {
        for order in 1..=2u32 {
            let mut scale = 0.0f64;
            let mut diffs = Vec::new();
            for &t in &times {
                let h = (t / 4.0).min(0.02);
                let f = |k: f64| m.phi(r, t + k * h);
                let (fm2, fm1, fp1, fp2, f0) = (core(f(-2.0))?, core(f(-1.0))?, core(f(1.0))?, core(f(2.0))?, core(f(0.0))?);
                let fd = if order == 1 {
                    (fm2 - 8.0 * fm1 + 8.0 * fp1 - fp2) / (12.0 * h)
                } else {
                    (-fm2 + 16.0 * fm1 - 30.0 * f0 + 16.0 * fp1 - fp2) / (12.0 * h * h)
                };
                let d = core(m.time_derivative(order, r, t))?;
                scale = scale.max(d.abs());
                diffs.push((fd - d).abs());
            }
            let e = diffs.iter().fold(0.0f64, |a, &b| a.max(b)) / scale;
            fd_err[order as usize - 1] = fd_err[order as usize - 1].max(e);
        }
    }
    verdict(
        residual <= 1e-8 && fd_err[0] <= 1e-5 && fd_err[1] <= 1e-5,
        format!("max |d phi/dt - W phi| = {residual:.2e}; finite-difference rel err m=1 {:.2e}, m=2 {:.2e}", fd_err[0], fd_err[1]),
    )
}

/// Kolmogorov distance between sorted sample levels (origin as `None`) and
/// `cdf` on `lo..=hi`.
fn kolmogorov(levels: &mut [Option<i32>], lo: i32, hi: i32, cdf: impl Fn(i32) -> Result<f64, String>) -> Result<f64, String> {
    levels.sort_unstable();
    let n = levels.len() as f64;
    let mut d = 0.0f64;
    for k in lo..=hi {
        let emp = levels.partition_point(|&v| v.is_none_or(|v| v <= k)) as f64 / n;
        d = d.max((emp - cdf(k)?).abs());
    }
    Ok(d)
}

fn c6_monte_carlo() -> Outcome {
    let l = power_law(3, 1, 1.0)?;
    let m = core(HeatKernelModel::with_auto_kappa(&l))?;
    let n = 100_000;
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut detail = Vec::new();
    let mut ok = true;

    let mut ks = Vec::new();
    for dt in [0.01, 1.0, 100.0] {
        let law = core(IncrementLaw::new(&m, dt))?;
        let mut levels: Vec<Option<i32>> = (0..n).map(|_| sample_increment(&m, &law, 48, &mut rng).level()).collect();
        let (lo, hi) = law.levels();
        ks.push(kolmogorov(&mut levels, lo - 2, hi + 2, |k| core(m.radius_cdf(k, dt)))?);
    }
    ok &= ks.iter().all(|&d| d <= 2e-2);
    detail.push(format!("increment KS {:.1e}/{:.1e}/{:.1e}", ks[0], ks[1], ks[2]));

    // position law after k steps from the origin, read off the traces
    let dt = 0.05;
    for mode in [WalkMode::NormsOnly, WalkMode::Full] {
        let paths = if mode == WalkMode::Full { 20_000 } else { n };
        let mut cfg = core(WalkConfig::new(m.clone(), dt, 100.0 * dt, paths, 99))?;
        cfg.start = Start::Origin;
        cfg.mode = mode;
        cfg.trace = true;
        let records = core(core(Walker::new(cfg))?.run())?;
        let mut worst = 0.0f64;
        for k in [1usize, 10, 100] {
            let mut levels: Vec<Option<i32>> = records
                .iter()
                .map(|r| {
                    let tr = r.trace.as_ref().expect("traced");
                    match tr[tr.partition_point(|&(s, _)| s <= k) - 1].1 {
                        Radius::Origin => None,
                        Radius::Level(l) => Some(l),
                    }
                })
                .collect();
            worst = worst.max(kolmogorov(&mut levels, -15, 15, |j| core(m.radius_cdf(j, k as f64 * dt)))?);
        }
        ok &= worst <= 2e-2;
        detail.push(format!("{mode:?} walker radius KS {worst:.1e}"));
    }

    // occupancy of Z_p^n against S(t)
    for mode in [WalkMode::NormsOnly, WalkMode::Full] {
        let paths = if mode == WalkMode::Full { 20_000 } else { n };
        let mut cfg = core(WalkConfig::new(m.clone(), 0.1, 20.0, paths, 5))?;
        cfg.mode = mode;
        cfg.observe = vec![1, 10, 50, 200];
        let records = core(core(Walker::new(cfg))?.run())?;
        let mut z_max = 0.0f64;
        for (i, &k) in [1usize, 10, 50, 200].iter().enumerate() {
            let s = core(m.survival_s(k as f64 * 0.1))?;
            let frac = records.iter().filter(|r| r.occupancy[i]).count() as f64 / paths as f64;
            let sigma = (s * (1.0 - s) / paths as f64).sqrt();
            z_max = z_max.max((frac - s).abs() / sigma);
        }
        ok &= z_max <= 3.0;
        detail.push(format!("{mode:?} occupancy vs S(t) max {z_max:.2} sigma"));
    }
    verdict(ok, detail.join("; "))
}

fn volterra_mass(m: &HeatKernelModel, h: f64, horizon: f64) -> Result<f64, String> {
    let steps = (horizon / h).round() as usize;
    Ok(core(volterra_solve(core(FptGrid::sample(m, h, steps))?))?.total_mass())
}

fn c7_fpt() -> Outcome {
    let mut detail = Vec::new();
    let mut ok = true;

    // transient: w ~ r^{1.5}
    let m = core(HeatKernelModel::with_auto_kappa(&power_law(3, 1, 0.5)?))?;
    let cfg = core(WalkConfig::new(m.clone(), 0.01, 100.0, 100_000, 7))?;
    let mc = core(ReturnEstimate::from_records(&core(core(Walker::new(cfg))?.run())?))?.estimate;
    let vol = volterra_mass(&m, 0.01, 100.0)?;
    let g0 = core(laplace_g_zero(&m))?.value().ok_or("G(0) not certified for the transient case")?;
    let laplace = 1.0 - 1.0 / (1.0 + g0);
    let spread = (mc - vol).abs().max((mc - laplace).abs()).max((vol - laplace).abs());
    ok &= spread <= 3e-2;
    detail.push(format!("transient: MC {mc:.4}, Volterra {vol:.4}, G0/(1+G0) {laplace:.4}, spread {spread:.1e}"));

    // recurrent: w ~ r^{2.5}
    let m = core(HeatKernelModel::with_auto_kappa(&power_law(3, 1, 1.5)?))?;
    let dt = 0.01;
    let cfg = core(WalkConfig::new(m.clone(), dt, 1000.0, 100_000, 8))?;
    let records = core(core(Walker::new(cfg))?.run())?;
    let censored: Vec<f64> = [10.0, 100.0, 1000.0]
        .iter()
        .map(|&t| {
            let k = (t / dt).round() as usize;
            records.iter().filter(|r| r.return_step.is_none_or(|s| s > k)).count() as f64 / records.len() as f64
        })
        .collect();
    let vol = volterra_mass(&m, 0.1, 1000.0)?;
    ok &= censored[0] > censored[1] && censored[1] > censored[2] && vol > 0.9;
    detail.push(format!(
        "recurrent: censored {:.3}/{:.3}/{:.3} at T=10/100/1000, Volterra int_0^1000 f = {vol:.4}",
        censored[0], censored[1], censored[2]
    ));

    let cases = [
        (3u32, 1u32, 0.5, RecurrenceTag::Transient),
        (3, 1, 0.9, RecurrenceTag::Transient),
        (3, 1, 1.0, RecurrenceTag::Recurrent),
        (3, 1, 1.5, RecurrenceTag::Recurrent),
        (5, 2, 1.0, RecurrenceTag::Transient),
        (5, 2, 2.0, RecurrenceTag::Recurrent),
        (7, 3, 2.5, RecurrenceTag::Transient),
        (7, 3, 3.0, RecurrenceTag::Recurrent),
    ];
    let mut wrong = Vec::new();
    for (p, n, a, want) in cases {
        let c = core(fpt::classify_recurrence(&core(HeatKernelModel::with_auto_kappa(&power_law(p, n, a)?))?))?;
        let prob_ok = match want {
            RecurrenceTag::Recurrent => c.return_probability == Some(1.0),
            _ => c.return_probability.is_some_and(|q| q > 0.0 && q < 1.0),
        };
        if c.tag != want || !prob_ok {
            wrong.push(format!("p={p} n={n} a1={}: {:?}", a + n as f64, c.tag));
        }
    }
    let e = core(Landscape::exponential(core(Space::new(3, 1))?, 1.0, 2.0, 0.5))?;
    let c = core(fpt::classify_recurrence(&core(HeatKernelModel::with_auto_kappa(&e))?))?;
    if c.tag != RecurrenceTag::Undetermined {
        wrong.push(format!("exponential: {:?}", c.tag));
    }
    ok &= wrong.is_empty();
    detail.push(if wrong.is_empty() { format!("classifier {} cases match", cases.len() + 1) } else { format!("classifier wrong: {}", wrong.join(", ")) });
    verdict(ok, detail.join("; "))
}

fn c8_volterra_order() -> Outcome {
    let c = 1.3;
    let horizon = 5.0;
    let mut errors = Vec::new();
    for k in 0..5 {
        let h = 0.1 / 2f64.powi(k);
        let steps = (horizon / h).round() as usize;
        let grid = core(volterra_solve(core(FptGrid::from_g(h, vec![c; steps + 1]))?))?;
        let e = grid.t.iter().zip(&grid.f).map(|(t, f)| (f - c * (-c * t).exp()).abs()).fold(0.0f64, f64::max);
        errors.push(e);
    }
    let orders: Vec<f64> = errors.windows(2).map(|w| (w[0] / w[1]).log2()).collect();
    let min = orders.iter().cloned().fold(f64::INFINITY, f64::min);
    verdict(min >= 1.9, format!("max errors {:?}; observed orders {orders:.3?}", errors.iter().map(|e| format!("{e:.2e}")).collect::<Vec<_>>()))
}

/// `int_0^T e^{-st} g(t) dt`, composite Simpson on decades of `t`.
fn numerical_laplace(m: &HeatKernelModel, s: f64, horizon: f64) -> Result<f64, String> {
    let mut edges = vec![0.0, 1e-6];
    while *edges.last().unwrap() < horizon {
        edges.push((edges.last().unwrap() * 10.0).min(horizon));
    }
    let k = 600;
    let mut total = 0.0;
    for w in edges.windows(2) {
        let h = (w[1] - w[0]) / k as f64;
        let mut acc = 0.0;
        for i in 0..=k {
            let t = w[0] + i as f64 * h;
            let c = if i == 0 || i == k { 1.0 } else if i % 2 == 1 { 4.0 } else { 2.0 };
            acc += c * (-s * t).exp() * core(g_density(m, t))?;
        }
        total += acc * h / 3.0;
    }
    Ok(total)
}

fn c9_laplace() -> Outcome {
    let mut worst = 0.0f64;
    for a in [0.5, 1.5] {
        let m = core(HeatKernelModel::with_auto_kappa(&power_law(3, 1, a)?))?;
        let sup_g = (1..=200).map(|i| g_density(&m, i as f64 * 0.05).unwrap_or(0.0)).fold(0.0f64, f64::max);
        for s in [0.5, 1.0, 2.0, 5.0, 10.0] {
            let horizon = (sup_g / (s * 1e-4)).ln().max(1.0) / s + 20.0 / s;
            let q = numerical_laplace(&m, s, horizon)?;
            let g = core(laplace_g(&m, s))?;
            worst = worst.max((g - q).abs() / q);
        }
    }
    verdict(worst <= 2e-2, format!("max relative error {worst:.2e} over s in {{0.5, 1, 2, 5, 10}}"))
}

fn run_bin(cmd: &str, config: &Path, out: &Path, workers: usize) -> Result<(), String> {
    let status = Command::new(env!("CARGO_BIN_EXE_padicwalk"))
        .args([cmd, "--config"])
        .arg(config)
        .args(["--workers", &workers.to_string(), "--seed", "314", "--out"])
        .arg(out)
        .env_remove("PADICWALK_SEED")
        .output()
        .map_err(|e| e.to_string())?;
    if !status.status.success() {
        return Err(format!("{cmd} exited with {}: {}", status.status, String::from_utf8_lossy(&status.stderr)));
    }
    Ok(())
}

fn snapshot(dir: &Path) -> Result<Vec<(String, Vec<u8>)>, String> {
    let mut files: Vec<(String, Vec<u8>)> = std::fs::read_dir(dir)
        .map_err(|e| e.to_string())?
        .map(|e| {
            let e = e.map_err(|e| e.to_string())?;
            Ok((e.file_name().to_string_lossy().into_owned(), std::fs::read(e.path()).map_err(|e| e.to_string())?))
        })
        .collect::<Result<_, String>>()?;
    files.sort();
    Ok(files)
}

fn c10_determinism() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let config = dir.path().join("config.json");
    let cfg = serde_json::json!({
        "landscape": {"kind": "power_law", "parameters": {"c": 1.0, "alpha": 0.5}, "p": 3, "n": 1},
        "kappa": "auto",
        "walk": {"dt": 0.01, "horizon": 20.0, "paths": 50000, "mode": "norms_only", "start": "uniform"},
    });
    std::fs::write(&config, cfg.to_string()).map_err(|e| e.to_string())?;
    let mut checked = 0;
    for cmd in ["verify", "walk"] {
        let mut reference = None;
        for (i, workers) in [1usize, 4, 16, 4].into_iter().enumerate() {
            let out = dir.path().join(format!("{cmd}-{i}"));
            run_bin(cmd, &config, &out, workers)?;
            let snap = snapshot(&out)?;
            match &reference {
                None => reference = Some(snap),
                Some(r) if *r != snap => return Err(format!("{cmd}: output differs at {workers} workers (run {i})")),
                Some(_) => checked += 1,
            }
        }
    }
    verdict(true, format!("verify and walk outputs byte-identical across 1/4/16 workers and a rerun ({checked} comparisons)"))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 10] = [
        ("symbol oracle equivalence", c1_symbol),
        ("symbol discrepancy resolution", c2_discrepancy),
        ("heat kernel axioms", c3_kernel_axioms),
        ("heat kernel decay bound", c4_decay_bound),
        ("master equation and time derivatives", c5_master_equation),
        ("Monte Carlo law match", c6_monte_carlo),
        ("first-passage consistency", c7_fpt),
        ("Volterra solver order", c8_volterra_order),
        ("Laplace cross-check", c9_laplace),
        ("determinism", c10_determinism),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let id = (i + 1).to_string();
        if !filter.is_empty() && !filter.contains(&id) {
            continue;
        }
        let start = Instant::now();
        let r = f();
        let secs = start.elapsed().as_secs_f64();
        match r {
            Ok(d) => println!("PASS {id:>2} {name} ({secs:.1} s): {d}"),
            Err(d) => {
                failed += 1;
                println!("FAIL {id:>2} {name} ({secs:.1} s): {d}");
            }
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
