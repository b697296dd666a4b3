//! Acceptance checks. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any fails.

mod common;

use std::cell::Cell;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::Instant;

use rayon::prelude::*;

use hord_core::dycors::{
    default_phi0, default_t_fail, perturbation_probability, score_candidates, select_next,
    SIGMA2_FLOOR,
};
use hord_core::evaluators::builtin::lookup;
use hord_core::stats::mid_ranks;
use hord_core::{
    evaluations_to_target, fit, rank_sum_test, resume, run, run_with, EvalError, EvaluatorSpec,
    FitInput, Objective, PointExternal, PointInternal, RngState, RunConfig, SearchMethod,
    SearchState, Termination,
};

type Outcome = Result<String, String>;
type Criterion = (&'static str, Option<f64>, fn() -> Outcome);

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}

/// Uniform points in the unit cube, pairwise at least `sep` apart.
fn separated_points(n: usize, dim: usize, sep: f64, rng: &mut RngState) -> Vec<Vec<f64>> {
    let mut pts: Vec<Vec<f64>> = Vec::with_capacity(n);
    while pts.len() < n {
        let p: Vec<f64> = (0..dim).map(|_| rng.uniform()).collect();
        if pts.iter().all(|q| dist(q, &p) >= sep) {
            pts.push(p);
        }
    }
    pts
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// Dense Gaussian elimination with partial pivoting.
fn gauss_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
            .unwrap();
        a.swap(col, piv);
        b.swap(col, piv);
        for row in col + 1..n {
            let factor = a[row][col] / a[col][col];
            if factor != 0.0 {
                let pivot = a[col].clone();
                for (dst, src) in a[row][col..].iter_mut().zip(&pivot[col..]) {
                    *dst -= factor * src;
                }
                b[row] -= factor * b[col];
            }
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let s: f64 = (row + 1..n).map(|k| a[row][k] * x[k]).sum();
        x[row] = (b[row] - s) / a[row][row];
    }
    x
}

/// Interpolant from the augmented cubic-kernel system, solved directly.
fn oracle_interpolant(pts: &[Vec<f64>], f: &[f64]) -> impl Fn(&[f64]) -> f64 {
    let n = pts.len();
    let dim = pts[0].len();
    let size = n + dim + 1;
    let mut a = vec![vec![0.0; size]; size];
    for i in 0..n {
        for j in 0..n {
            a[i][j] = dist(&pts[i], &pts[j]).powi(3);
        }
        for k in 0..dim {
            a[i][n + k] = pts[i][k];
            a[n + k][i] = pts[i][k];
        }
        a[i][n + dim] = 1.0;
        a[n + dim][i] = 1.0;
    }
    let mut rhs = f.to_vec();
    rhs.resize(size, 0.0);
    let sol = gauss_solve(a, rhs);
    let nodes = pts.to_vec();
    move |x: &[f64]| {
        let mut s: f64 = nodes
            .iter()
            .zip(&sol)
            .map(|(p, l)| l * dist(p, x).powi(3))
            .sum();
        for k in 0..dim {
            s += sol[n + k] * x[k];
        }
        s + sol[n + dim]
    }
}

/// Random objective: a constant plus five plane waves with random
/// amplitude, direction, frequency and phase.
fn random_smooth(dim: usize, rng: &mut RngState) -> impl Fn(&[f64]) -> f64 {
    let c0 = 10.0 * rng.uniform() - 5.0;
    let waves: Vec<(f64, Vec<f64>, f64)> = (0..5)
        .map(|_| {
            let amp = 10.0 * rng.uniform() - 5.0;
            let freq = (0..dim).map(|_| 4.0 * rng.uniform() - 2.0).collect();
            (amp, freq, std::f64::consts::TAU * rng.uniform())
        })
        .collect();
    move |x: &[f64]| {
        c0 + waves
            .iter()
            .map(|(a, w, b)| {
                let t: f64 = w.iter().zip(x).map(|(p, q)| p * q).sum();
                a * (std::f64::consts::TAU * t + b).sin()
            })
            .sum::<f64>()
    }
}

const DIMS: [usize; 5] = [1, 2, 6, 15, 19];

fn surrogate_exactness() -> Outcome {
    let mut rng = RngState::new(1001);
    let (mut worst_res, mut worst_orth, mut worst_oracle) = (0.0f64, 0.0f64, 0.0f64);
    for &dim in &DIMS {
        for _ in 0..50 {
            let n = dim + 1 + rng.index(200 - dim);
            let pts = separated_points(n, dim, 1e-3, &mut rng);
            let g = random_smooth(dim, &mut rng);
            let f: Vec<f64> = pts.iter().map(|p| g(p)).collect();
            let scale = 1.0 + f.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            let model = fit(FitInput::new(pts.clone(), f.clone())).map_err(|e| e.to_string())?;
            for (p, &fi) in pts.iter().zip(&f) {
                worst_res = worst_res.max((model.predict(p) - fi).abs() / (1.0 + fi.abs()));
            }
            let l1: f64 = model.lambda().iter().map(|l| l.abs()).sum();
            let orth = model
                .orthogonality_residual()
                .iter()
                .fold(0.0f64, |m, r| m.max(r.abs()));
            worst_orth = worst_orth.max(orth / l1.max(1.0));
            let oracle = oracle_interpolant(&pts, &f);
            for _ in 0..10 {
                let x: Vec<f64> = (0..dim).map(|_| rng.uniform()).collect();
                worst_oracle = worst_oracle.max((model.predict(&x) - oracle(&x)).abs() / scale);
            }
        }
    }
    ensure(worst_res <= 1e-8, || {
        format!("node residual ratio {worst_res:.2e}")
    })?;
    ensure(worst_orth <= 1e-8, || {
        format!("orthogonality ratio {worst_orth:.2e}")
    })?;
    ensure(worst_oracle <= 1e-6, || {
        format!("oracle mismatch {worst_oracle:.2e}")
    })?;
    Ok(format!(
        "250 fits; residual {worst_res:.1e}, orthogonality {worst_orth:.1e}, vs elimination oracle {worst_oracle:.1e}"
    ))
}

fn linear_reproduction() -> Outcome {
    let mut rng = RngState::new(1002);
    let mut worst = 0.0f64;
    for &dim in &DIMS {
        for _ in 0..10 {
            let n = dim + 1 + rng.index(200 - dim);
            let pts = separated_points(n, dim, 1e-3, &mut rng);
            let c: Vec<f64> = (0..dim).map(|_| 10.0 * rng.uniform() - 5.0).collect();
            let d = 10.0 * rng.uniform() - 5.0;
            let lin = |x: &[f64]| c.iter().zip(x).map(|(a, b)| a * b).sum::<f64>() + d;
            let f: Vec<f64> = pts.iter().map(|p| lin(p)).collect();
            let model = fit(FitInput::new(pts, f)).map_err(|e| e.to_string())?;
            for _ in 0..1000 {
                let x: Vec<f64> = (0..dim).map(|_| rng.uniform()).collect();
                worst = worst.max((model.predict(&x) - lin(&x)).abs());
            }
        }
    }
    ensure(worst <= 1e-6, || format!("max error {worst:.2e}"))?;
    Ok(format!("50 fits x 1000 queries; max error {worst:.1e}"))
}

fn schedule_identities() -> Outcome {
    let mut rng = RngState::new(1003);
    for _ in 0..100 {
        let dim = 1 + rng.index(100);
        let n0 = dim + 1 + rng.index(2 * (dim + 1));
        let n_max = n0 + 2 + rng.index(500);
        let phi0 = default_phi0(dim);
        let at = |n| perturbation_probability(phi0, n, n0, n_max).unwrap();
        ensure((at(n0) - phi0).abs() <= 1e-12, || {
            format!("phi(n0) != phi0 for {dim},{n0},{n_max}")
        })?;
        ensure(at(n_max - 1).abs() <= 1e-12, || {
            format!("phi(N-1) != 0 for {dim},{n0},{n_max}")
        })?;
        let curve: Vec<f64> = (n0..n_max).map(at).collect();
        ensure(curve.windows(2).all(|w| w[1] <= w[0]), || {
            format!("not monotone for {dim},{n0},{n_max}")
        })?;
    }
    for dim in 1..=10_000 {
        ensure(dim as f64 * default_phi0(dim) <= 20.0 + 1e-12, || {
            format!("D phi0 > 20 at D = {dim}")
        })?;
    }
    Ok("100 triples; endpoints exact, monotone; D*phi0 <= 20 for D <= 10000".into())
}

struct OracleScore {
    v_ev: Vec<f64>,
    v_dm: Vec<f64>,
    w: Vec<f64>,
}

fn oracle_scores(cands: &[Vec<f64>], s: &[f64], evaluated: &[Vec<f64>], w: f64) -> OracleScore {
    let delta: Vec<f64> = cands
        .iter()
        .map(|t| {
            let mut best = f64::INFINITY;
            for x in evaluated {
                let d = dist(t, x);
                if d < best {
                    best = d;
                }
            }
            best
        })
        .collect();
    let s_max = s.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let s_min = s.iter().cloned().fold(f64::INFINITY, f64::min);
    let d_max = delta.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let d_min = delta.iter().cloned().fold(f64::INFINITY, f64::min);
    let mut out = OracleScore {
        v_ev: vec![],
        v_dm: vec![],
        w: vec![],
    };
    for i in 0..cands.len() {
        let ev = if s_max == s_min {
            1.0
        } else {
            (s[i] - s_min) / (s_max - s_min)
        };
        let dm = if d_max == d_min {
            1.0
        } else {
            (d_max - delta[i]) / (d_max - d_min)
        };
        out.v_ev.push(ev);
        out.v_dm.push(dm);
        out.w.push(w * ev + (1.0 - w) * dm);
    }
    out
}

fn acquisition_correctness() -> Outcome {
    let mut rng = RngState::new(1004);
    let (mut worst, mut flat_s, mut flat_d, mut ties) = (0.0f64, 0, 0, 0);
    for case in 0..1000 {
        let dim = 1 + rng.index(6);
        let m = 1 + rng.index(40);
        let evaluated: Vec<Vec<f64>> = (0..1 + rng.index(20))
            .map(|_| (0..dim).map(|_| rng.uniform()).collect())
            .collect();
        let cands: Vec<Vec<f64>> = if case % 5 == 0 {
            // all candidates equidistant from the evaluated set
            let p: Vec<f64> = (0..dim).map(|_| rng.uniform()).collect();
            vec![p; m]
        } else {
            (0..m)
                .map(|_| (0..dim).map(|_| rng.uniform()).collect())
                .collect()
        };
        let s: Vec<f64> = match case % 4 {
            0 => vec![3.5; m],
            1 => (0..m).map(|_| rng.index(3) as f64).collect(),
            _ => (0..m).map(|_| 10.0 * rng.uniform() - 5.0).collect(),
        };
        let w = match case % 3 {
            0 => [0.3, 0.5, 0.8, 0.95][rng.index(4)],
            1 => [0.0, 1.0][rng.index(2)],
            _ => rng.uniform(),
        };
        let expected = oracle_scores(&cands, &s, &evaluated, w);
        let pts: Vec<PointInternal> = cands.iter().cloned().map(PointInternal).collect();
        let ev_refs: Vec<PointInternal> = evaluated.iter().cloned().map(PointInternal).collect();
        let ev_refs: Vec<&PointInternal> = ev_refs.iter().collect();
        let got = score_candidates(pts, &s, &ev_refs, w).map_err(|e| e.to_string())?;
        for (i, c) in got.iter().enumerate() {
            worst = worst
                .max((c.v_ev - expected.v_ev[i]).abs())
                .max((c.v_dm - expected.v_dm[i]).abs())
                .max((c.score - expected.w[i]).abs());
        }
        if expected.v_ev.iter().all(|&v| v == 1.0) && m > 0 && s.iter().all(|&x| x == s[0]) {
            flat_s += 1;
        }
        if expected.v_dm.iter().all(|&v| v == 1.0) {
            flat_d += 1;
        }
        let min = expected.w.iter().cloned().fold(f64::INFINITY, f64::min);
        let want = expected.w.iter().position(|&x| x == min).unwrap();
        if expected.w.iter().filter(|&&x| x == min).count() > 1 {
            ties += 1;
        }
        let pick = select_next(&got).map_err(|e| e.to_string())?;
        ensure(pick == want, || {
            format!("case {case}: picked {pick}, argmin is {want}")
        })?;
    }
    ensure(worst <= 1e-12, || format!("max deviation {worst:.2e}"))?;
    ensure(flat_s > 0 && flat_d > 0 && ties > 0, || {
        "degenerate branches not exercised".into()
    })?;
    Ok(format!(
        "1000 sets; max deviation {worst:.1e}; {flat_s} flat-value, {flat_d} flat-distance, {ties} tied sets"
    ))
}

/// Recomputes the variance from the full outcome history: a streak is the
/// run of equal outcomes since the last completed streak.
struct ReferenceAutomaton {
    t_fail: usize,
    sigma2: f64,
    cap: f64,
    history: Vec<Option<bool>>,
}

impl ReferenceAutomaton {
    fn step(&mut self, improved: bool) -> (bool, bool) {
        self.history.push(Some(improved));
        let run = self
            .history
            .iter()
            .rev()
            .take_while(|&&h| h == Some(improved))
            .count();
        let (mut halved, mut doubled) = (false, false);
        if improved && run == 3 {
            self.sigma2 = (2.0 * self.sigma2).min(self.cap);
            doubled = true;
        } else if !improved && run == self.t_fail {
            self.sigma2 = (self.sigma2 / 2.0).max(SIGMA2_FLOOR);
            halved = true;
        }
        if halved || doubled {
            self.history.push(None);
        }
        (halved, doubled)
    }

    fn streaks(&self) -> (usize, usize) {
        let run = |v| {
            self.history
                .iter()
                .rev()
                .take_while(|&&h| h == Some(v))
                .count()
        };
        (run(false), run(true))
    }
}

fn variance_state_machine() -> Outcome {
    let mut rng = RngState::new(1005);
    let (mut halvings, mut doublings, mut steps) = (0usize, 0usize, 0usize);
    for seq in 0..100_000 {
        let dim = 1 + rng.index(30);
        let mut state = SearchState::new(dim, dim + 1, 1000);
        let mut reference = ReferenceAutomaton {
            t_fail: default_t_fail(dim),
            sigma2: state.sigma2,
            cap: state.sigma2_cap,
            history: vec![],
        };
        let p = rng.uniform();
        for _ in 0..1 + rng.index(60) {
            let improved = rng.bernoulli(p);
            let before = state.sigma2;
            state.adjust_variance(improved);
            let (h, d) = reference.step(improved);
            halvings += usize::from(h);
            doublings += usize::from(d);
            steps += 1;
            ensure(state.sigma2 == reference.sigma2, || {
                format!(
                    "sequence {seq}: sigma2 {} vs reference {} (from {before})",
                    state.sigma2, reference.sigma2
                )
            })?;
            ensure(
                (state.fail_streak, state.success_streak) == reference.streaks(),
                || format!("sequence {seq}: streak counters diverge"),
            )?;
            ensure((SIGMA2_FLOOR..=0.2).contains(&state.sigma2), || {
                format!("sequence {seq}: sigma2 {} out of range", state.sigma2)
            })?;
        }
    }
    Ok(format!(
        "1e5 sequences, {steps} steps; {halvings} halvings, {doublings} doublings match"
    ))
}

fn builtin_config(
    name: &str,
    dim: usize,
    integers: usize,
    max_evals: usize,
    seed: u64,
) -> RunConfig {
    let mut cfg = RunConfig::new(
        lookup(name).unwrap().domain(dim, integers),
        EvaluatorSpec::builtin(name),
    );
    cfg.max_evals = max_evals;
    cfg.seed = seed;
    cfg
}

fn determinism_and_resume() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let path = |name: &str| dir.path().join(name);
    let read = |name: &str| std::fs::read(path(name)).map_err(|e| e.to_string());

    let mut cfg = builtin_config("rastrigin", 10, 0, 120, 42);
    cfg.trace_path = Some(path("a.jsonl"));
    run(&cfg).map_err(|e| e.to_string())?;
    cfg.trace_path = Some(path("b.jsonl"));
    let full = run(&cfg).map_err(|e| e.to_string())?;
    ensure(read("a.jsonl")? == read("b.jsonl")?, || {
        "repeated runs differ".into()
    })?;

    let mut short = cfg.clone();
    short.max_evals = 60;
    short.trace_path = Some(path("short.jsonl"));
    let half = run(&short).map_err(|e| e.to_string())?;
    let mut partial = half.clone();
    partial.config.trace_path = Some(path("resumed.jsonl"));
    let resumed = resume(&partial, 60).map_err(|e| e.to_string())?;
    ensure(read("resumed.jsonl")? == read("a.jsonl")?, || {
        "resumed trace file differs".into()
    })?;
    ensure(resumed.trace.to_jsonl() == full.trace.to_jsonl(), || {
        "resumed trace differs".into()
    })?;
    Ok(format!(
        "10-D rastrigin; {} byte traces identical",
        read("a.jsonl")?.len()
    ))
}

fn final_bests(
    name: &str,
    dim: usize,
    integers: usize,
    n: usize,
    method: SearchMethod,
) -> Result<Vec<f64>, String> {
    (0..10u64)
        .into_par_iter()
        .map(|seed| {
            let mut cfg = builtin_config(name, dim, integers, n, seed);
            cfg.method = method;
            let res = run(&cfg).map_err(|e| e.to_string())?;
            if res.termination != Termination::BudgetExhausted {
                return Err(format!("seed {seed} ended with {:?}", res.termination));
            }
            Ok(res.f_best.unwrap())
        })
        .collect()
}

fn continuous_performance() -> Outcome {
    let hord = final_bests("rastrigin", 10, 0, 200, SearchMethod::Hord)?;
    let random = final_bests("rastrigin", 10, 0, 200, SearchMethod::Random)?;
    let (mh, mr) = (median(hord.clone()), median(random.clone()));
    let p = rank_sum_test(&hord, &random).map_err(|e| e.to_string())?;
    let detail = format!("median HORD {mh:.2} vs random {mr:.2}, p = {p:.2e}");
    ensure(mh < mr && p < 0.05, || detail.clone())?;
    Ok(detail)
}

fn mixed_integer_performance() -> Outcome {
    let hord = final_bests("mixed-sphere", 6, 2, 100, SearchMethod::Hord)?;
    let hits = hord.iter().filter(|&&f| f <= 1e-2).count();
    let detail = format!("{hits}/10 trials reach 1e-2 (median {:.1e})", median(hord));
    ensure(hits >= 8, || detail.clone())?;
    Ok(detail)
}

fn high_dimension_ablation() -> Outcome {
    let hord = final_bests("rastrigin", 19, 0, 200, SearchMethod::Hord)?;
    let uniform = final_bests("rastrigin", 19, 0, 200, SearchMethod::RbfUniform)?;
    let (mh, mu) = (median(hord), median(uniform));
    let detail = format!("median HORD {mh:.2} vs uniform candidates {mu:.2}");
    ensure(mh <= mu, || detail.clone())?;
    Ok(detail)
}

fn isp_semantics() -> Outcome {
    let func = lookup("pseudo-dnn").unwrap();
    let (opt, f_opt) = func.optimum(6, 0);
    let domain = func.domain(6, 0);
    let target = f_opt + 0.1;
    // continuous coordinates shifted so the normalized distance is 0.05
    let shift = 0.05 / 2.0;
    let isp: PointExternal = domain
        .variables()
        .iter()
        .zip(&opt)
        .map(|(v, &x)| {
            let x = if v.is_integer() {
                x
            } else {
                x + shift * v.width()
            };
            (v.name.clone(), x)
        })
        .collect();
    let gap = dist(
        domain.normalize(&isp).map_err(|e| e.to_string())?.coords(),
        domain
            .normalize(
                &domain
                    .variables()
                    .iter()
                    .zip(&opt)
                    .map(|(v, &x)| (v.name.clone(), x))
                    .collect(),
            )
            .map_err(|e| e.to_string())?
            .coords(),
    );
    ensure(gap <= 0.05 + 1e-12, || {
        format!("isp is {gap} from the optimum")
    })?;
    let budget = 60;
    let mut wins = 0;
    let mut pairs = Vec::new();
    for seed in 0..10 {
        let mut plain = builtin_config("pseudo-dnn", 6, 0, budget, seed);
        let a = run(&plain).map_err(|e| e.to_string())?;
        plain.isp = Some(isp.clone());
        let b = run(&plain).map_err(|e| e.to_string())?;
        let ett = |t| evaluations_to_target(t, target).unwrap_or(budget + 1);
        let (without, with) = (ett(&a.trace), ett(&b.trace));
        wins += usize::from(with <= without);
        pairs.push(format!("{with}/{without}"));
    }
    let detail = format!(
        "ISP no slower in {wins}/10 paired trials (with/without: {})",
        pairs.join(" ")
    );
    ensure(wins >= 8, || detail.clone())?;
    Ok(detail)
}

fn rank_sum_oracle() -> Outcome {
    let p = rank_sum_test(&[1.0, 2.0, 3.0], &[4.0, 5.0, 6.0]).map_err(|e| e.to_string())?;
    ensure((p - 0.1).abs() <= 1e-15, || {
        format!("{{1,2,3}} vs {{4,5,6}} gives {p}")
    })?;
    let mut rng = RngState::new(1011);
    let mut checked = 0;
    let mut worst = 0.0f64;
    for na in 2..=8 {
        for nb in 2..=(10 - na) {
            for rep in 0..20 {
                // small integer ranges force ties in most samples
                let range = if rep % 2 == 0 { 4 } else { 1000 };
                let a: Vec<f64> = (0..na).map(|_| rng.index(range) as f64).collect();
                let b: Vec<f64> = (0..nb).map(|_| rng.index(range) as f64).collect();
                let got = rank_sum_test(&a, &b).map_err(|e| e.to_string())?;
                let want = enumerated_p(&a, &b);
                worst = worst.max((got - want).abs());
                checked += 1;
            }
        }
    }
    ensure(worst <= 1e-12, || format!("max deviation {worst:.2e}"))?;
    Ok(format!(
        "p({{1,2,3}},{{4,5,6}}) = {p}; {checked} samples match enumeration ({worst:.1e})"
    ))
}

/// Two-sided p-value by visiting every relabelling of the pooled sample.
fn enumerated_p(a: &[f64], b: &[f64]) -> f64 {
    let pooled: Vec<f64> = a.iter().chain(b).copied().collect();
    if pooled.iter().all(|&v| v == pooled[0]) {
        return 1.0;
    }
    let ranks = mid_ranks(&pooled);
    let n = pooled.len();
    let mean = a.len() as f64 * (n as f64 + 1.0) / 2.0;
    let observed: f64 = ranks[..a.len()].iter().sum();
    let dev = (observed - mean).abs();
    let (mut total, mut extreme) = (0u64, 0u64);
    for mask in 0u32..(1 << n) {
        if mask.count_ones() as usize != a.len() {
            continue;
        }
        total += 1;
        let s: f64 = (0..n)
            .filter(|i| mask >> i & 1 == 1)
            .map(|i| ranks[i])
            .sum();
        if (s - mean).abs() >= dev - 1e-9 {
            extreme += 1;
        }
    }
    extreme as f64 / total as f64
}

fn external_protocol() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let domain = common::square();

    let script = common::write_stub(dir.path(), "sum", common::SUM);
    let mut cfg = RunConfig::new(domain.clone(), common::stub_spec(&script, &[], 10.0));
    cfg.max_evals = 50;
    let mut inner = cfg
        .evaluator
        .instantiate(&domain)
        .map_err(|e| e.to_string())?;
    let (calls, errors) = (Cell::new(0), Cell::new(0));
    let mut counting = |p: &PointExternal| {
        calls.set(calls.get() + 1);
        let r = inner.evaluate(p);
        errors.set(errors.get() + usize::from(r.is_err()));
        r
    };
    let res = run_with(&cfg, &mut counting).map_err(|e| e.to_string())?;
    ensure(
        res.termination == Termination::BudgetExhausted && res.trace.len() == 50,
        || {
            format!(
                "stub run ended with {:?} after {}",
                res.termination,
                res.trace.len()
            )
        },
    )?;
    ensure(errors.get() == 0 && calls.get() == 50, || {
        format!("{} errors in {} calls", errors.get(), calls.get())
    })?;

    let flaky = common::write_stub(dir.path(), "flaky", common::ERROR_ONCE);
    let log = dir.path().join("ids.log");
    let mut cfg = RunConfig::new(domain.clone(), common::stub_spec(&flaky, &[&log], 10.0));
    cfg.max_evals = 20;
    let res = run(&cfg).map_err(|e| e.to_string())?;
    let requests = std::fs::read_to_string(&log)
        .map_err(|e| e.to_string())?
        .lines()
        .count();
    ensure(
        res.termination == Termination::BudgetExhausted && requests == 21,
        || {
            format!(
                "error-once stub: {:?}, {requests} requests for 20 evaluations",
                res.termination
            )
        },
    )?;

    let hang = common::write_stub(dir.path(), "hang", common::HANG);
    let mut ev = hord_core::evaluators::ExternalEvaluator::new(
        "python3".into(),
        vec![hang.display().to_string()],
        0.5,
        domain,
    );
    let start = Instant::now();
    let r = ev.evaluate(&[("a", 0.0), ("b", 0.0)].into_iter().collect());
    let waited = start.elapsed().as_secs_f64();
    ensure(matches!(r, Err(EvalError::Timeout(_))), || {
        format!("hanging stub gave {r:?}")
    })?;
    Ok(format!("50 evaluations, 0 errors; error-once stub made 21 requests for 20; hang timed out after {waited:.2}s"))
}

fn main() {
    let criteria: Vec<Criterion> = vec![
        ("surrogate exactness", Some(30.0), surrogate_exactness),
        ("linear reproduction", Some(10.0), linear_reproduction),
        ("schedule identities", None, schedule_identities),
        ("acquisition correctness", None, acquisition_correctness),
        ("variance state machine", None, variance_state_machine),
        ("determinism and resume", Some(60.0), determinism_and_resume),
        (
            "continuous performance",
            Some(120.0),
            continuous_performance,
        ),
        (
            "mixed-integer performance",
            Some(60.0),
            mixed_integer_performance,
        ),
        (
            "high-dimension ablation",
            Some(300.0),
            high_dimension_ablation,
        ),
        ("initial starting point", None, isp_semantics),
        ("rank-sum oracle", None, rank_sum_oracle),
        ("external evaluator protocol", None, external_protocol),
    ];
    let mut failed = 0;
    for (i, (name, limit, check)) in criteria.into_iter().enumerate() {
        let start = Instant::now();
        let outcome =
            catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|_| Err("panicked".into()));
        let secs = start.elapsed().as_secs_f64();
        let outcome = match (outcome, limit) {
            (Ok(_), Some(l)) if secs > l => Err(format!("took {secs:.1}s, limit {l}s")),
            (o, _) => o,
        };
        match outcome {
            Ok(detail) => println!("criterion {:>2} {name}: PASS ({detail}; {secs:.1}s)", i + 1),
            Err(why) => {
                failed += 1;
                println!("criterion {:>2} {name}: FAIL ({why}; {secs:.1}s)", i + 1);
            }
        }
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
    println!("all 12 acceptance criteria passed");
}
