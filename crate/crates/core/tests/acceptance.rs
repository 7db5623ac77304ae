//! End-to-end acceptance run without the test harness, so the PASS/FAIL
//! line of every criterion is always printed. Exits nonzero if any fails.

use std::f64::consts::PI;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use dumbbell_spectra::analytic::{self, branch_indices, closed_form_theta, courant_sharp_census, rect_spectrum};
use dumbbell_spectra::asymptotics::{track_branches, verdict, Target, TrackOptions, VerdictReport};
use dumbbell_spectra::cli::{self, config::example_config};
use dumbbell_spectra::eigen::{classify_symmetry, smallest_eigenpairs, Parity};
use dumbbell_spectra::fem::{assemble_mass, assemble_stiffness};
use dumbbell_spectra::geometry::{BulkDomain, DumbbellSpec, NeckProfile};
use dumbbell_spectra::mesh::{generate, refine_uniform, TriMesh};
use dumbbell_spectra::nodal::count_nodal_domains;
use dumbbell_spectra::sturm::{analyze, branch_order, expected_zero_counts, SLGrid};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn example_spec(epsilon: f64) -> DumbbellSpec {
    DumbbellSpec::new(
        BulkDomain::rectangle_mid(analytic::example_width(), 1.0, 0.25),
        NeckProfile::constant(1.0, 2.0),
        epsilon,
    )
}

fn flat(length: f64) -> SLGrid {
    SLGrid::from_fn(length, 4096, |_| 1.0).unwrap()
}

fn criterion_1() -> Outcome {
    let mut worst_tau = 0.0f64;
    let mut worst_theta = 0.0f64;
    for length in [1.0, 2.0] {
        let grid = flat(length);
        let taus = grid.dirichlet_spectrum(10).unwrap();
        for (i, t) in taus.iter().enumerate() {
            let exact = ((i + 1) as f64 * PI / length).powi(2);
            worst_tau = worst_tau.max((t - exact).abs() / exact);
        }
    }
    // 20 admissible values spread over the first ten neck eigenvalues
    let grid = flat(2.0);
    let taus = grid.dirichlet_spectrum(12).unwrap();
    let a = 0.7;
    let mut tested = 0;
    let step = (taus[9] - 0.5) / 20.0;
    for i in 0..40 {
        if tested == 20 {
            break;
        }
        let mu = 0.5 + (i as f64 + 0.5) * step;
        if grid.check_resonance(mu, 1e-3).is_err() {
            continue;
        }
        let an = analyze(&grid, mu, a, 12).unwrap();
        for (parity, got) in [(Parity::Even, an.theta_even), (Parity::Odd, an.theta_odd)] {
            let exact = closed_form_theta(mu, 2.0, a, parity).unwrap();
            worst_theta = worst_theta.max((got - exact).abs() / exact.abs().max(1e-300));
        }
        tested += 1;
    }
    outcome(
        worst_tau <= 1e-5 && worst_theta <= 1e-6 && tested == 20,
        format!("max tau rel err {worst_tau:.2e}, max Theta rel err {worst_theta:.2e} over {tested} mu"),
    )
}

fn criterion_2() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let grid = SLGrid::from_fn(2.0, 2048, |_| 1.0).unwrap();
    let taus = grid.dirichlet_spectrum(10).unwrap();
    let mut failures = Vec::new();
    let mut done = 0;
    while done < 200 {
        let mu = rng.gen_range(0.0..taus[9]);
        if mu <= 0.0 || grid.check_resonance(mu, 1e-4).is_err() {
            continue;
        }
        done += 1;
        match analyze(&grid, mu, 1.0, 10) {
            Ok(an) if (an.n_even, an.n_odd) == expected_zero_counts(an.k) && branch_order(&an).is_ok() => {}
            other => failures.push(format!("mu {mu}: {:?}", other.map(|a| (a.k, a.n_even, a.n_odd)))),
        }
    }
    let mut done_g = 0;
    while done_g < 50 {
        let pieces = rng.gen_range(2..5);
        let half: Vec<f64> = (0..pieces).map(|_| rng.gen_range(0.2..1.0)).collect();
        let mut samples = half.clone();
        samples.extend(half.iter().rev().skip(1));
        let length = rng.gen_range(0.5..3.0);
        let g = SLGrid::new(&NeckProfile::piecewise_linear(samples, length), 2048).unwrap();
        let t = g.dirichlet_spectrum(8).unwrap();
        let mu = rng.gen_range(0.0..t[7]);
        if mu <= 0.0 || g.check_resonance(mu, 1e-4).is_err() {
            continue;
        }
        done_g += 1;
        let a = if rng.gen_bool(0.5) { 1.0 } else { -0.5 };
        match analyze(&g, mu, a, 8) {
            Ok(an)
                if (an.n_even, an.n_odd) == expected_zero_counts(an.k)
                    && (an.n_even > an.n_odd) == (an.theta_even > an.theta_odd)
                    && branch_order(&an).is_ok() => {}
            other => failures.push(format!("g case mu {mu}: {:?}", other.map(|a| (a.k, a.n_even, a.n_odd)))),
        }
    }
    let detail = if failures.is_empty() {
        "200 flat-neck mu and 50 piecewise-linear profiles agree".to_string()
    } else {
        failures.join("; ")
    };
    outcome(failures.is_empty(), detail)
}

fn criterion_3() -> Outcome {
    let m = analytic::example_width();
    let exact: Vec<f64> = rect_spectrum(m, 1.0, 10).iter().map(|x| x.lambda).collect();
    let base = TriMesh::from_polygon(&[[0.0, 0.0], [m, 0.0], [m, 1.0], [0.0, 1.0]], 0.04).unwrap();
    let mid = refine_uniform(&base);
    let fine = refine_uniform(&mid);
    let errs = |mesh: &TriMesh| -> Vec<f64> {
        let pairs = smallest_eigenpairs(&assemble_stiffness(mesh), &assemble_mass(mesh), 10, 1e-6).unwrap();
        pairs.iter().zip(&exact).map(|(p, e)| p.lambda - e).collect()
    };
    let (e0, e1, e2) = (errs(&base), errs(&mid), errs(&fine));
    let mut worst_rel = 0.0f64;
    let (mut rmin, mut rmax) = (f64::INFINITY, 0.0f64);
    for i in 1..10 {
        worst_rel = worst_rel.max(e1[i].abs() / exact[i]);
        for r in [e0[i] / e1[i], e1[i] / e2[i]] {
            rmin = rmin.min(r);
            rmax = rmax.max(r);
        }
    }
    outcome(
        worst_rel <= 5e-3 && rmin >= 3.2 && rmax <= 4.8,
        format!(
            "h {:.3}: max rel err {worst_rel:.2e}; refinement ratios in [{rmin:.2}, {rmax:.2}]",
            mid.max_edge_length()
        ),
    )
}

fn single_epsilon(j: usize, n: usize) -> (Target, Result<VerdictReport, String>) {
    let spec = example_spec(0.05);
    let target = Target::new(&spec, j, n, 4096).unwrap();
    let report = track_branches(&spec, &target, &[0.05], &TrackOptions::default())
        .map_err(|e| e.to_string())
        .and_then(|t| verdict(&target, t).map_err(|e| e.to_string()));
    (target, report)
}

fn criterion_4() -> Outcome {
    let (target, report) = single_epsilon(2, 0);
    let r = match report {
        Ok(r) => r,
        Err(e) => return outcome(false, e),
    };
    let rec = &r.trace.records[0];
    let d = &r.deficiencies[0];
    let pass = target.analysis.k == 1
        && (rec.index_odd, rec.index_even) == (6, 7)
        && (rec.count_odd, rec.count_even) == (6, 7)
        && d.stable
        && d.even.deficiency == 0
        && d.odd.deficiency == 0
        && r.courant_sharp;
    outcome(
        pass,
        format!(
            "k {}; odd branch #{} ({} domains), even branch #{} ({} domains); Courant sharp pair: {}",
            target.analysis.k, rec.index_odd, rec.count_odd, rec.index_even, rec.count_even, r.courant_sharp
        ),
    )
}

fn criterion_5() -> Outcome {
    let (target, report) = single_epsilon(1, 2);
    let r = match report {
        Ok(r) => r,
        Err(e) => return outcome(false, e),
    };
    let rec = &r.trace.records[0];
    let d = &r.deficiencies[0];
    let formula = branch_indices(target.bulk_index(), target.analysis.k);
    let pass = target.analysis.k == 4
        && d.stable
        && rec.count_even <= 15
        && rec.count_odd <= 16
        && d.even.deficiency >= 16
        && d.odd.deficiency >= 16
        && rec.index_even == formula.even
        && rec.index_odd == formula.odd;
    outcome(
        pass,
        format!(
            "bulk index {}; branches #{}/#{} (formula {}/{}); counts {}/{}; deficiencies {}/{}; \
             reference position {} deficiency {} (not asserted)",
            target.bulk_index(),
            rec.index_even,
            rec.index_odd,
            formula.even,
            formula.odd,
            rec.count_even,
            rec.count_odd,
            d.even.deficiency,
            d.odd.deficiency,
            analytic::REFERENCE_SECOND_POSITION,
            analytic::REFERENCE_SECOND_DEFICIENCY
        ),
    )
}

const SWEEP: [f64; 4] = [0.08, 0.04, 0.02, 0.01];

fn sweep(j: usize, n: usize) -> Result<VerdictReport, String> {
    let spec = example_spec(0.05);
    let target = Target::new(&spec, j, n, 4096).map_err(|e| e.to_string())?;
    let trace = track_branches(&spec, &target, &SWEEP, &TrackOptions::default()).map_err(|e| e.to_string())?;
    verdict(&target, trace).map_err(|e| e.to_string())
}

fn criterion_6(sweeps: &[(&str, &Result<VerdictReport, String>)]) -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for (name, r) in sweeps {
        let r = match r {
            Ok(r) => r,
            Err(e) => return outcome(false, format!("{name}: {e}")),
        };
        let s = r.slopes.expect("four-point sweep has slopes");
        let ok = s.rel_dev_even_two_term <= 0.15 && s.rel_dev_odd_two_term <= 0.15 && r.ordering_matches;
        pass &= ok;
        parts.push(format!(
            "{name}: even {:.4} / odd {:.4} vs Theta {:.4} / {:.4} (dev {:.1}% / {:.1}%; secant fit {:.4} / {:.4}, dev {:.1}% / {:.1}%), ordering {}",
            s.even_two_term.slope,
            s.odd_two_term.slope,
            s.target_even,
            s.target_odd,
            100.0 * s.rel_dev_even_two_term,
            100.0 * s.rel_dev_odd_two_term,
            s.even.slope,
            s.odd.slope,
            100.0 * s.rel_dev_even,
            100.0 * s.rel_dev_odd,
            r.ordering_matches
        ));
    }
    outcome(pass, parts.join("; "))
}

fn criterion_7(sweeps: &[(&str, &Result<VerdictReport, String>)]) -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for (name, r) in sweeps {
        let r = match r {
            Ok(r) => r,
            Err(e) => return outcome(false, format!("{name}: {e}")),
        };
        let er = r.error_ratios.as_ref().expect("sweep has ratios");
        pass &= er.consistent;
        let fmt = |v: &[f64]| v.iter().map(|x| format!("{x:.3e}")).collect::<Vec<_>>().join(" ");
        parts.push(format!(
            "{name}: bulk even [{}] odd [{}], neck even [{}] odd [{}]",
            fmt(&er.bulk_even),
            fmt(&er.bulk_odd),
            fmt(&er.neck_even),
            fmt(&er.neck_odd)
        ));
    }
    outcome(pass, parts.join("; "))
}

fn criterion_8() -> Outcome {
    let census = courant_sharp_census(1.01, 1.0, 15);
    outcome(
        census == vec![1, 2, 4, 9],
        format!("Courant sharp among first 15: {census:?}"),
    )
}

fn criterion_9(sweeps: &[(&str, &Result<VerdictReport, String>)]) -> Outcome {
    let mut problems = Vec::new();
    for (name, r) in sweeps {
        match r {
            Ok(r) if r.courant_bound_holds => {}
            Ok(_) => problems.push(format!("{name}: count exceeds index")),
            Err(e) => problems.push(format!("{name}: {e}")),
        }
    }

    let mesh = generate(&example_spec(0.05), 0.05, 4).unwrap();
    problems.extend(mesh.check_invariants());
    let mirror = mesh.mirror.as_ref().expect("dumbbell mesh has a mirror");
    for (i, &j) in mirror.perm.iter().enumerate() {
        let (p, q) = (mesh.vertices[i], mesh.vertices[j]);
        if mirror.perm[j] != i || (q[0] - (mirror.length - p[0])).abs() > 1e-12 || q[1] != p[1] {
            problems.push(format!("mirror broken at vertex {i}"));
            break;
        }
    }

    let k = assemble_stiffness(&mesh);
    let m = assemble_mass(&mesh);
    let k1 = k.mul_vec(&vec![1.0; mesh.vertex_count()]);
    let k1_max = k1.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    if k1_max > 1e-10 * k.norm_inf() {
        problems.push(format!("|K 1| = {k1_max:e}"));
    }

    let mut pairs = smallest_eigenpairs(&k, &m, 12, 1e-6).unwrap();
    classify_symmetry(&mut pairs, &m, &mirror.perm, 1e-6);
    let mut ortho = 0.0f64;
    for (a, p) in pairs.iter().enumerate() {
        for (b, q) in pairs.iter().enumerate() {
            let target = if a == b { 1.0 } else { 0.0 };
            ortho = ortho.max((m.inner(&p.vector, &q.vector) - target).abs());
        }
    }
    if ortho > 1e-8 {
        problems.push(format!("M-orthonormality defect {ortho:e}"));
    }

    for (j, p) in pairs.iter().enumerate() {
        let field = p.field(&mesh);
        let counts: Vec<usize> = [1e-9, 1e-7, 1e-5]
            .iter()
            .map(|&t| count_nodal_domains(&field, t).unwrap().count)
            .collect();
        if counts.windows(2).any(|w| w[0] != w[1]) {
            problems.push(format!("pair {} counts vary with threshold: {counts:?}", j + 1));
        }
        if counts[0] > j + 1 {
            problems.push(format!("pair {} has {} domains", j + 1, counts[0]));
        }
    }

    let dir = tempfile::tempdir().unwrap();
    let mut cfg = example_config();
    cfg.output.dir = dir.path().join("a");
    let cold = cli::execute("solve", &cfg).unwrap();
    let cold_bytes = std::fs::read(&cold.files[0]).unwrap();
    let warm = cli::execute("solve", &cfg).unwrap();
    let warm_bytes = std::fs::read(&warm.files[0]).unwrap();
    if cold_bytes != warm_bytes || !warm.cache_hit && std::env::var_os("DBSPEC_CACHE_DIR").is_none() {
        problems.push("cache hit differs from cold run".into());
    }

    let detail = if problems.is_empty() {
        format!("Courant bound, mesh and mirror, |K 1| {k1_max:.1e}, orthonormality {ortho:.1e}, thresholds, cache")
    } else {
        problems.join("; ")
    };
    outcome(problems.is_empty(), detail)
}

fn report(n: usize, o: &Outcome, t: Duration, failed: &mut Vec<usize>) {
    let status = if o.pass { "PASS" } else { "FAIL" };
    println!("criterion {n}: {status} [{:.1} s] {}", t.as_secs_f64(), o.detail);
    if !o.pass {
        failed.push(n);
    }
}

fn timed<T>(f: impl FnOnce() -> T) -> (T, Duration) {
    let start = Instant::now();
    let v = f();
    (v, start.elapsed())
}

fn main() {
    let mut failed = Vec::new();
    let (o, t) = timed(criterion_1);
    report(1, &o, t, &mut failed);
    let (o, t) = timed(criterion_2);
    report(2, &o, t, &mut failed);
    let (o, t) = timed(criterion_3);
    report(3, &o, t, &mut failed);
    let (o, t) = timed(criterion_4);
    report(4, &o, t, &mut failed);
    let (o, t) = timed(criterion_5);
    report(5, &o, t, &mut failed);

    let ((zero, first), t_sweeps) = timed(|| (sweep(0, 0), sweep(2, 0)));
    let sweeps = [("mu = 0", &zero), ("mu1", &first)];
    let (o, t) = timed(|| criterion_6(&sweeps));
    report(6, &o, t + t_sweeps, &mut failed);
    let (o, t) = timed(|| criterion_7(&sweeps));
    report(7, &o, t, &mut failed);
    let (o, t) = timed(criterion_8);
    report(8, &o, t, &mut failed);
    let (o, t) = timed(|| criterion_9(&sweeps));
    report(9, &o, t, &mut failed);

    if failed.is_empty() {
        println!("acceptance: all 9 criteria pass");
    } else {
        println!("acceptance: failed criteria {failed:?}");
        std::process::exit(1);
    }
}
