//! Acceptance criteria. Each criterion prints one PASS/FAIL line; the
//! process exits non-zero if any criterion fails.

mod common;

use std::collections::BTreeMap;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::Instant;

use num_traits::{One, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use certeval_core::boundary::{extract_predicted_boundary, extract_reference_boundary};
use certeval_core::eval::{run_eval, EvalOptions, EvalRun, ImageInput};
use certeval_core::field::{gvf, gvf_energy, score_directional, BdNormalization, GvfSolver};
use certeval_core::label::tile_composition;
use certeval_core::matching::{dc, fd, fdc, match_boundaries};
use certeval_core::synth::{gen_synthetic, write_pair, Corruption, Geometry, SynthSpec};
use certeval_core::{
    BoundaryMap, BoundaryPixel, CertaintyScheme, ClassMap, ConfusionMatrix, EcrMode, ExpertMap,
    ExpertPixel, Grade, Grid, GvfConfig, NormalizedConfusion, Rational, Tile, Tiling, Variant,
};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn random_expert(rng: &mut ChaCha8Rng, n: usize, classes: u16) -> ExpertMap {
    ExpertMap::from_fn(n, n, classes as usize, |_, _| {
        let grade = Grade::ALL[rng.gen_range(0..3)];
        ExpertPixel::new(rng.gen_range(0..=classes), grade)
    })
    .unwrap()
}

fn random_pred(rng: &mut ChaCha8Rng, n: usize, classes: u16) -> ClassMap {
    ClassMap::from_fn(n, n, classes as usize, |_, _| {
        if rng.gen_bool(0.1) {
            None
        } else {
            Some(rng.gen_range(1..=classes))
        }
    })
    .unwrap()
}

/// Per-pixel oracle: every pixel of every 4x4 tile adds W(p)/16 at
/// (its class, the tile's center prediction).
fn oracle_matrix(
    pairs: &[(ClassMap, Vec<ExpertMap>)],
    scheme: &CertaintyScheme,
) -> BTreeMap<(u16, u16), Rational> {
    let mut cm = BTreeMap::new();
    for (pred, experts) in pairs {
        for expert in experts {
            for tr in (0..16).step_by(4) {
                for tc in (0..16).step_by(4) {
                    let Some(p) = pred.get(tr + 2, tc + 2) else { continue };
                    for r in tr..tr + 4 {
                        for c in tc..tc + 4 {
                            let px = expert.get(r, c);
                            *cm.entry((px.class, p)).or_insert_with(Rational::zero) +=
                                scheme.weight(px.grade) / Rational::from_integer(16);
                        }
                    }
                }
            }
        }
    }
    cm
}

fn confusion_exactness() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let tiling = Tiling::non_overlapping(4).unwrap();
    for corpus in 0..50 {
        let classes: u16 = rng.gen_range(1..=4);
        let scheme = if corpus % 5 == 0 {
            CertaintyScheme::unweighted()
        } else {
            CertaintyScheme::default()
        };
        let images = rng.gen_range(1..=3);
        let pairs: Vec<(ClassMap, Vec<ExpertMap>)> = (0..images)
            .map(|_| {
                let pred = random_pred(&mut rng, 16, classes);
                let experts = (0..rng.gen_range(1..=3))
                    .map(|_| random_expert(&mut rng, 16, classes))
                    .collect();
                (pred, experts)
            })
            .collect();
        let mut per_pair = Vec::new();
        for (pred, experts) in &pairs {
            for expert in experts {
                let mut cm = ConfusionMatrix::new(classes as usize);
                cm.accumulate_image(expert, pred, &tiling, &scheme).unwrap();
                per_pair.push(cm);
            }
        }
        let merged = ConfusionMatrix::merge(&per_pair).unwrap();
        let oracle = oracle_matrix(&pairs, &scheme);
        for truth in 0..=classes {
            for p in 1..=classes {
                let expected = oracle.get(&(truth, p)).copied().unwrap_or_else(Rational::zero);
                ensure(merged.get(truth, p) == expected, || {
                    format!("corpus {corpus}: cm[{truth}][{p}] = {} != {expected}", merged.get(truth, p))
                })?;
            }
        }
    }
    let elapsed = start.elapsed().as_secs_f64();
    ensure(elapsed < 10.0, || format!("took {elapsed:.2} s (limit 10 s)"))?;
    Ok(format!("50 corpora exact, {elapsed:.2} s"))
}

fn worked_examples() -> Outcome {
    let scheme = CertaintyScheme::unweighted();
    let patchwork = ExpertMap::from_fn(16, 16, 3, |r, c| {
        ExpertPixel::new(if r * 16 + c < 156 { 1 } else { 3 }, Grade::Sure)
    })
    .unwrap();
    let tile = Tile { row: 0, col: 0, size: 16 };
    let mut cm = ConfusionMatrix::new(3);
    cm.accumulate_tile(&tile_composition(&patchwork, tile, &scheme), 1).unwrap();
    ensure(cm.get(1, 1) == Rational::new(156, 256), || "cm11 != 156/256".into())?;
    ensure(cm.get(3, 1) == Rational::new(100, 256), || "cm31 != 100/256".into())?;
    ensure(cm.column_sums()[0] == Rational::one(), || "column sum not integer".into())?;

    let moderate =
        ExpertMap::from_fn(16, 16, 3, |_, _| ExpertPixel::new(1, Grade::ModeratelySure)).unwrap();
    let composition = tile_composition(&moderate, tile, &CertaintyScheme::default());
    let mut cm = ConfusionMatrix::new(3);
    cm.accumulate_tile(&composition, 1).unwrap();
    ensure(cm.get(1, 1) == Rational::new(1, 2), || "cm11 != 1/2".into())?;
    let mut cm = ConfusionMatrix::new(3);
    cm.accumulate_tile(&composition, 2).unwrap();
    ensure(cm.get(1, 2) == Rational::new(1, 2), || "cm12 != 1/2".into())?;

    const TABLE: [&str; 8] = [
        "xxx_oooo", "xxx_oooo", "xxx_oooo", "________",
        "ooo_xxxx", "ooo_xxxx", "ooo_xxxx", "ooo_xxxx",
    ];
    // `_` is an underlined pixel; its class follows from the tile layout.
    let pred = ClassMap::from_fn(8, 8, 2, |r, c| Some(if (r < 4) == (c < 4) { 1 } else { 2 })).unwrap();
    for (r, line) in TABLE.iter().enumerate() {
        for (c, ch) in line.chars().enumerate() {
            if ch != '_' {
                let class = if ch == 'x' { 1 } else { 2 };
                ensure(pred.get(r, c) == Some(class), || format!("layout mismatch at ({r}, {c})"))?;
            }
        }
    }
    let found = extract_predicted_boundary(&pred);
    for (r, line) in TABLE.iter().enumerate() {
        for (c, ch) in line.chars().enumerate() {
            ensure(found.contains(r, c) == (ch == '_'), || {
                format!("boundary mismatch at ({r}, {c})")
            })?;
        }
    }
    Ok("+156/256, +100/256, +1/2 and the 8x8 underline pattern reproduced".into())
}

fn rate_identities() -> Outcome {
    let identity = NormalizedConfusion::from_rows(
        (0..4)
            .map(|i| (0..4).map(|j| Rational::from_integer((i == j) as i128)).collect())
            .collect(),
    )
    .unwrap();
    ensure(identity.gcr().iter().all(|x| x.is_one()), || "identity GCR".into())?;
    ensure(
        identity.ecr(EcrMode::ModeledOnly).unwrap().iter().all(|x| x.is_zero()),
        || "identity ECR".into(),
    )?;
    let r = |p, q| Rational::new(p, q);
    let two = NormalizedConfusion::from_rows(vec![vec![r(8, 10), r(2, 10)], vec![r(4, 10), r(6, 10)]])
        .unwrap();
    let f = |v: Vec<Rational>| v.iter().map(certeval_core::rational::to_f64).collect::<Vec<_>>();
    let gcr = f(two.gcr());
    let ecr = f(two.ecr(EcrMode::ModeledOnly).unwrap());
    for (got, want) in gcr.iter().zip([0.8, 0.6]).chain(ecr.iter().zip([0.3, 0.3])) {
        ensure((got - want).abs() <= 1e-12, || format!("{got} vs {want}"))?;
    }
    Ok(format!("GCR {gcr:?}, ECR {ecr:?}"))
}

fn matching_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let mut ties = 0usize;
    for case in 0..200 {
        let w = rng.gen_range(1..=64);
        let h = rng.gen_range(1..=64);
        let density = rng.gen_range(0.005..0.15);
        let found = common::random_boundary(&mut rng, w, h, density);
        let reference = common::random_boundary(&mut rng, w, h, density);
        let table = match_boundaries(&found, &reference).unwrap();
        let mut counts = vec![0usize; reference.len()];
        for (m, f) in table.found().iter().zip(found.pixels()) {
            let (e, d2) = common::brute_nearest((f.row, f.col), &reference);
            let tied = reference.pixels().iter().filter(|p| {
                let dr = p.row.abs_diff(f.row) as u64;
                let dc = p.col.abs_diff(f.col) as u64;
                dr * dr + dc * dc == d2
            });
            if tied.count() > 1 {
                ties += 1;
            }
            ensure(m.reference == e, || format!("case {case}: nearest {} vs {e}", m.reference))?;
            ensure(m.distance == (d2 as f64).sqrt(), || format!("case {case}: distance"))?;
            ensure(m.weight == reference.pixels()[e].weight, || format!("case {case}: weight"))?;
            counts[e] += 1;
        }
        ensure(table.reference_counts() == counts.as_slice(), || format!("case {case}: n_ef"))?;
    }
    Ok(format!("200 random pairs exact, {ties} tie-broken assignments"))
}

fn measure_conventions() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for case in 0..200 {
        let n = rng.gen_range(2..=48);
        let found = common::random_boundary(&mut rng, n, n, 0.05);
        let reference = common::random_boundary(&mut rng, n, n, 0.05);
        let v = fd(&match_boundaries(&found, &reference).unwrap());
        ensure((0.0..=1.0).contains(&v), || format!("case {case}: FD = {v}"))?;
        let uniform = BoundaryMap::from_coords(n, n, found.coords()).unwrap();
        let same = fd(&match_boundaries(&uniform, &uniform).unwrap());
        ensure(same == 0.0, || format!("case {case}: FD(found = ref) = {same}"))?;
    }
    let single = |w| BoundaryMap::from_pixels(6, 1, vec![BoundaryPixel { row: 0, col: 4, weight: w }]).unwrap();
    let pair = fd(&match_boundaries(&BoundaryMap::from_coords(6, 1, [(0, 1)]).unwrap(), &single(2.0 / 3.0)).unwrap());
    let expected_pair = 1.0 - (-1.5f64).exp();
    ensure((pair - expected_pair).abs() <= 1e-9, || format!("single pair FD {pair} vs {expected_pair}"))?;

    let two = BoundaryMap::from_coords(4, 1, [(0, 0), (0, 3)]).unwrap();
    let reference = BoundaryMap::from_coords(4, 1, [(0, 0)]).unwrap();
    let two_fd = fd(&match_boundaries(&two, &reference).unwrap());
    let expected_two = 1.0 - (-0.5f64).exp();
    ensure((two_fd - expected_two).abs() <= 1e-9, || {
        format!(
            "two-pixel FD = {two_fd:.10}, expected 1 - e^-1/2 = {expected_two:.10}; \
             the formula gives sum = max here, i.e. 1 - e^-1 = {:.10}",
            1.0 - (-1.0f64).exp()
        )
    })?;
    Ok("FD in [0,1] on 200 instances; identity 0; closed forms match".into())
}

fn perturbation_monotonicity() -> Outcome {
    let per_pixel = |t: usize| {
        let pair = gen_synthetic(&SynthSpec::new(Geometry::StraightEdge, 32, Corruption::Shift(t))).unwrap();
        let found = extract_predicted_boundary(&pair.pred);
        let reference = extract_reference_boundary(&pair.expert, &CertaintyScheme::default());
        let table = match_boundaries(&found, &reference).unwrap();
        let dcs: Vec<f64> = table.found().iter().map(|m| dc(m.distance, m.weight)).collect();
        let fdcs: Vec<f64> = table.found().iter().map(|m| fdc(m.distance, m.weight)).collect();
        (dcs, fdcs)
    };
    let mut previous = per_pixel(0);
    for t in 1..=10 {
        let current = per_pixel(t);
        ensure(current.0.len() == previous.0.len(), || format!("cardinality changed at t = {t}"))?;
        for i in 0..current.0.len() {
            ensure(current.0[i] <= previous.0[i], || format!("DC increased at t = {t}, pixel {i}"))?;
            ensure(current.1[i] >= previous.1[i], || format!("FDC decreased at t = {t}, pixel {i}"))?;
        }
        previous = current;
    }

    let directional = |corruption| {
        let pair = gen_synthetic(&SynthSpec::new(Geometry::StraightEdge, 32, corruption)).unwrap();
        let found = extract_predicted_boundary(&pair.pred);
        let reference = extract_reference_boundary(&pair.expert, &CertaintyScheme::default());
        let s = score_directional(&found, &reference, 1.0 / 6.0, GvfConfig::default(), BdNormalization::Field).unwrap();
        (found.len(), s.wdc)
    };
    let (n_parallel, parallel) = directional(Corruption::Shift(1));
    let (n_cross, cross) = directional(Corruption::OrthogonalCross);
    ensure(n_parallel == n_cross, || format!("cardinalities {n_parallel} vs {n_cross}"))?;
    ensure(parallel > cross, || format!("directional WDC parallel {parallel} <= orthogonal {cross}"))?;
    Ok(format!("t = 0..10 monotone; directional WDC parallel {parallel:.4} > orthogonal {cross:.4}"))
}

/// Maximal `||f - g|| / ||g||` over the maximal-weight pixels of a
/// one-pixel vertical line of weight 1.
pub const EDGE_RATIO_THRESHOLD: f64 = 0.15;

fn gvf_numerics() -> Outcome {
    let cfg = GvfConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(16);
    for case in 0..20 {
        let img = common::random_boundary_image(&mut rng, 16);
        let mut solver = GvfSolver::new(&img, cfg).unwrap();
        let g = solver.gradient().clone();
        let mut energy = gvf_energy(solver.field(), &g, cfg.mu).unwrap();
        for it in 0..cfg.max_iterations {
            let update = solver.step().unwrap();
            let next = gvf_energy(solver.field(), &g, cfg.mu).unwrap();
            ensure(next <= energy * (1.0 + 1e-12), || {
                format!("case {case}: energy rose {energy} -> {next} at iteration {}", it + 1)
            })?;
            energy = next;
            if update < cfg.tolerance {
                break;
            }
        }
    }

    let zero = gvf(&Grid::zeros(16, 16), cfg).unwrap();
    ensure(zero.field.u().iter().chain(zero.field.v()).all(|&x| x == 0.0), || "zero image moved".into())?;

    let line = Grid::from_fn(32, 32, |_, c| if c == 16 { 1.0 } else { 0.0 });
    let sol = gvf(&line, cfg).unwrap();
    let mut ratio = 0.0f64;
    for r in 0..32 {
        let (fu, fv) = sol.field.at(r, 16);
        let (gu, gv) = sol.gradient.at(r, 16);
        ratio = ratio.max((fu - gu).hypot(fv - gv) / gu.hypot(gv));
    }
    ensure(ratio <= EDGE_RATIO_THRESHOLD, || format!("edge ratio {ratio:.4} > {EDGE_RATIO_THRESHOLD}"))?;

    let mut rng = ChaCha8Rng::seed_from_u64(512);
    let big = Grid::from_fn(512, 512, |r, c| {
        if c == 200 || r == 300 || rng.gen_bool(0.002) {
            1.0
        } else {
            0.0
        }
    });
    let start = Instant::now();
    let big_sol = gvf(&big, cfg).unwrap();
    let elapsed = start.elapsed().as_secs_f64();
    ensure(big_sol.field.is_finite(), || "512x512 field not finite".into())?;
    ensure(elapsed < 30.0, || format!("512x512 solve took {elapsed:.1} s"))?;
    Ok(format!(
        "energy monotone on 20 images; zero fixed; edge ratio {ratio:.4} <= {EDGE_RATIO_THRESHOLD}; \
         512x512 in {elapsed:.2} s ({} iterations)",
        big_sol.iterations
    ))
}

fn end_to_end_determinism() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let specs = [
        ("a", SynthSpec::new(Geometry::StraightEdge, 32, Corruption::Shift(2))),
        ("b", SynthSpec { seed: 9, ..SynthSpec::new(Geometry::TwoRegion, 32, Corruption::Spurious(3)) }),
        ("c", SynthSpec::new(Geometry::Checkerboard { cell: 8 }, 32, Corruption::Shift(1))),
    ];
    let mut images = Vec::new();
    for (name, spec) in specs {
        let (expert, pred) = write_pair(&gen_synthetic(&spec).unwrap(), &dir.path().join(name)).unwrap();
        let mut experts = vec![expert];
        let second = SynthSpec { grade: Grade::NotSure, boundary_grade: Grade::ModeratelySure, ..spec };
        let (second_expert, _) =
            write_pair(&gen_synthetic(&second).unwrap(), &dir.path().join(format!("{name}2"))).unwrap();
        experts.push(second_expert);
        images.push(ImageInput { pred, experts });
    }
    let options = EvalOptions {
        tiling: Tiling::new(8, 4, (0, 0)).unwrap(),
        variants: vec![Variant::Plain, Variant::Nef, Variant::Gvf],
        ..EvalOptions::default()
    };
    let run = |images: Vec<ImageInput>| {
        run_eval(&EvalRun { images, options: options.clone() }).unwrap().to_json()
    };
    let first = run(images.clone());
    ensure(first == run(images.clone()), || "two runs differ".into())?;
    let mut permuted: Vec<ImageInput> = images.iter().rev().cloned().collect();
    for img in &mut permuted {
        img.experts.reverse();
    }
    permuted.swap(0, 1);
    ensure(first == run(permuted), || "permuted input order changes the report".into())?;
    Ok(format!("{} bytes identical across runs and permutations", first.len()))
}

fn main() {
    let criteria: [Criterion; 8] = [
        ("confusion exactness", confusion_exactness),
        ("worked examples", worked_examples),
        ("rate identities", rate_identities),
        ("matching oracle", matching_oracle),
        ("measure conventions and ranges", measure_conventions),
        ("perturbation monotonicity", perturbation_monotonicity),
        ("GVF numerics", gvf_numerics),
        ("end-to-end determinism", end_to_end_determinism),
    ];
    let mut failed = 0;
    for (name, check) in criteria {
        let outcome = catch_unwind(AssertUnwindSafe(check))
            .unwrap_or_else(|_| Err("panicked".to_string()));
        match outcome {
            Ok(detail) => println!("[PASS] {name}: {detail}"),
            Err(detail) => {
                failed += 1;
                println!("[FAIL] {name}: {detail}");
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
