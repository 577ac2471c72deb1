//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

mod common;

use std::collections::{BTreeMap, HashSet};
use std::fs;
use std::panic::{self, AssertUnwindSafe};
use std::path::Path;
use std::time::{Duration, Instant};

use common::{dgt_ok, manifest_outputs, tree};
use dgt_core::beams::{
    adjusted_rand_index, kmeans_label_beams, reduce_beams, BeamSelect, DEFAULT_MAX_ITERS,
};
use dgt_core::density::{
    compute_ratios, translate_scan, DensityProfile, Direction, NoiseConfig, Normalization,
    TranslateMode,
};
use dgt_core::io::{load_profile, write_probability_field};
use dgt_core::lasermix::{
    default_partition, generate_pseudo_labels, laser_mix, verify_mix, Provenance, PseudoLabels,
};
use dgt_core::numerics::{
    alignment_weights, compute_prototypes, cross_entropy_loss, ema_update, lsgan_adv_loss,
    reweighted_adv_loss, sac_consistency_loss, self_information_map, AdvForm, AlignmentWeights,
    ClassLayout, DiscriminatorField, EmaState, FeatureField, ProbabilityField,
};
use dgt_core::rng::{self, StreamRng};
use dgt_core::synth::{
    generate_synthetic_scan, generate_synthetic_scan_with_beams, uniform_inclinations,
    SyntheticSceneSpec,
};
use dgt_core::{Point, RadialPartition, Scan, SensorSpec};
use rand::Rng;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        let ok: bool = $cond;
        if !ok {
            return Err(format!($($fmt)+));
        }
    };
}

fn within(elapsed: Duration, limit_s: f64) -> Result<(), String> {
    if elapsed.as_secs_f64() < limit_s {
        Ok(())
    } else {
        Err(format!(
            "took {:.2} s, limit {limit_s} s",
            elapsed.as_secs_f64()
        ))
    }
}

fn main() {
    let criteria: [Criterion; 9] = [
        ("identity law", identity_law),
        ("density matching", density_matching),
        ("random_global locality violation", random_global_ablation),
        ("beam pipeline", beam_pipeline),
        ("LaserMix conservation", lasermix_conservation),
        ("numerics oracles", numerics_oracles),
        ("pseudo-label boundary", pseudo_label_boundary),
        ("determinism and parallel equality", determinism),
        ("throughput", throughput),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let result = panic::catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        let secs = start.elapsed().as_secs_f64();
        match result {
            Ok(detail) => println!("criterion {} PASS {name} ({secs:.2} s): {detail}", i + 1),
            Err(why) => {
                failed += 1;
                println!("criterion {} FAIL {name} ({secs:.2} s): {why}", i + 1);
            }
        }
    }
    println!(
        "acceptance: {} passed, {failed} failed",
        criteria.len() - failed
    );
    if failed > 0 {
        std::process::exit(1);
    }
}

fn identity_law() -> Outcome {
    let start = Instant::now();
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let dir = tmp.path();
    dgt_ok(
        dir,
        &[
            "gen", "--preset", "dense64", "--count", "100", "--seed", "11", "--out", "ds",
        ],
    );
    dgt_ok(dir, &["profile", "--input", "ds", "--out", "ds.profile"]);
    let p = load_profile(dir.join("ds.profile")).map_err(|e| e.to_string())?;
    for norm in [Normalization::PerScanMean, Normalization::Totals] {
        for direction in [Direction::SourceToTarget, Direction::TargetToSource] {
            let r = compute_ratios(&p, &p, direction, norm).map_err(|e| e.to_string())?;
            ensure!(
                r.values().iter().all(|&v| v == 1.0),
                "R != 1 for {norm:?} {direction:?}"
            );
        }
    }
    dgt_ok(
        dir,
        &[
            "translate",
            "--input",
            "ds",
            "--source-profile",
            "ds.profile",
            "--target-profile",
            "ds.profile",
            "--noise",
            "off",
            "--out",
            "tr",
        ],
    );
    for sub in ["scans", "labels"] {
        let (a, b) = (
            tree(&dir.join("ds").join(sub)),
            tree(&dir.join("tr").join(sub)),
        );
        ensure!(
            a.len() == 100,
            "expected 100 files in ds/{sub}, found {}",
            a.len()
        );
        ensure!(a == b, "{sub} differ after identity translation");
    }
    for (name, bytes) in tree(&dir.join("tr").join("maps")) {
        let identity = bytes
            .chunks_exact(4)
            .enumerate()
            .all(|(i, c)| u32::from_le_bytes([c[0], c[1], c[2], c[3]]) as usize == i);
        ensure!(identity, "{} is not the identity map", name.display());
    }
    within(start.elapsed(), 10.0)?;
    Ok("R == 1 exactly; 100 translated scans and label files byte-identical".into())
}

fn dropout_spec(seed: u64, rates: [f64; 10]) -> SyntheticSceneSpec {
    SyntheticSceneSpec {
        dropout_rate_by_area: rates.to_vec(),
        ..SyntheticSceneSpec::dense64(seed)
    }
}

fn density_matching() -> Outcome {
    let start = Instant::now();
    // source thinned near the sensor, target thinned farther out
    let src_spec = dropout_spec(21, [0.3, 0.3, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
    let tgt_spec = dropout_spec(22, [0.0, 0.0, 0.2, 0.3, 0.4, 0.5, 0.5, 0.5, 0.5, 0.5]);
    let part = RadialPartition::default();
    let n = 200u64;
    let sources: Vec<Scan> = (0..n)
        .map(|s| generate_synthetic_scan(&src_spec, s).unwrap())
        .collect();
    let mut ps = DensityProfile::new(part, "src");
    let mut pt = DensityProfile::new(part, "tgt");
    for (s, scan) in sources.iter().enumerate() {
        ps.accumulate(scan);
        pt.accumulate(&generate_synthetic_scan(&tgt_spec, s as u64).unwrap());
    }
    let r = compute_ratios(
        &ps,
        &pt,
        Direction::SourceToTarget,
        Normalization::PerScanMean,
    )
    .map_err(|e| e.to_string())?;
    let untouched: Vec<bool> = r.values().iter().map(|&v| v == 1.0).collect();
    ensure!(untouched.iter().any(|&u| u), "no area has r = 1");

    let mut after = DensityProfile::new(part, "src->tgt");
    let mut protected = 0u64;
    for (s, scan) in sources.iter().enumerate() {
        let out = translate_scan(
            scan,
            &part,
            &r,
            &NoiseConfig::off(),
            TranslateMode::Density,
            s as u64,
        )
        .map_err(|e| e.to_string())?;
        after.accumulate(&out.scan);
        let mut kept_at = vec![usize::MAX; scan.len()];
        for (k, &i) in out.kept_index_map.iter().enumerate() {
            kept_at[i] = k;
        }
        for (i, p) in scan.points().iter().enumerate() {
            if untouched[part.area_index(p)] {
                protected += 1;
                let k = kept_at[i];
                ensure!(
                    k != usize::MAX,
                    "scan {s}: point {i} in an r = 1 area was removed"
                );
                ensure!(
                    out.scan.points()[k].bit_eq(p),
                    "scan {s}: point {i} in an r = 1 area changed"
                );
                ensure!(
                    out.scan.labels().unwrap()[k] == scan.labels().unwrap()[i],
                    "scan {s}: label of point {i} changed"
                );
            }
        }
    }
    let mut checked = 0;
    let mut worst = 0.0f64;
    for i in 0..part.m() {
        if ps.totals()[i] < 10_000 {
            continue;
        }
        checked += 1;
        let expected = r.values()[i] * ps.totals()[i] as f64;
        let got = after.totals()[i] as f64;
        let rel = (got - expected).abs() / expected;
        worst = worst.max(rel);
        ensure!(
            rel <= 0.02,
            "area {i}: {got} points, expected {expected:.1} ({:.3}% off)",
            rel * 100.0
        );
    }
    ensure!(checked > 0, "no area reached 10^4 points");
    within(start.elapsed(), 60.0)?;
    Ok(format!(
        "{checked} areas with >= 1e4 points, worst deviation {:.4}%; {protected} points in r = 1 areas bit-identical",
        worst * 100.0
    ))
}

/// Removed input points lying in areas with ratio 1, recomputed from the
/// written index maps.
fn removed_in_unit_areas(
    dir: &Path,
    input: &str,
    output: &str,
    r: &[f64],
    part: &RadialPartition,
) -> (u64, u64) {
    let mut removed = 0;
    let mut violations = 0;
    for (name, bytes) in tree(&dir.join(input).join("scans")) {
        let scan = dgt_core::io::decode_scan(&bytes).unwrap();
        let stem = name.file_stem().unwrap().to_str().unwrap().to_string();
        let map = fs::read(dir.join(output).join("maps").join(format!("{stem}.idx"))).unwrap();
        let kept: HashSet<u32> = map
            .chunks_exact(4)
            .map(|c| u32::from_le_bytes([c[0], c[1], c[2], c[3]]))
            .collect();
        for (i, p) in scan.iter().enumerate() {
            if !kept.contains(&(i as u32)) {
                removed += 1;
                if r[part.area_index(p)] >= 1.0 {
                    violations += 1;
                }
            }
        }
    }
    (removed, violations)
}

fn random_global_ablation() -> Outcome {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let dir = tmp.path();
    dgt_ok(
        dir,
        &[
            "gen", "--preset", "dense64", "--count", "10", "--seed", "31", "--out", "a",
        ],
    );
    dgt_ok(
        dir,
        &[
            "gen", "--preset", "sparse40", "--count", "10", "--seed", "32", "--out", "b",
        ],
    );
    dgt_ok(dir, &["profile", "--input", "a", "--out", "a.profile"]);
    dgt_ok(dir, &["profile", "--input", "b", "--out", "b.profile"]);
    let common = [
        "translate",
        "--input",
        "a",
        "--source-profile",
        "a.profile",
        "--target-profile",
        "b.profile",
        "--noise",
        "off",
    ];
    let mut density = common.to_vec();
    density.extend(["--out", "dens"]);
    let mut random = common.to_vec();
    random.extend(["--mode", "random_global", "--out", "rand"]);
    dgt_ok(dir, &density);
    dgt_ok(dir, &random);

    let (od, or) = (
        manifest_outputs(&dir.join("dens/manifest.json")),
        manifest_outputs(&dir.join("rand/manifest.json")),
    );
    ensure!(
        od["points_out"] == or["points_out"],
        "totals differ: {} vs {}",
        od["points_out"],
        or["points_out"]
    );
    ensure!(
        od["locality_violations"] == 0,
        "density mode flagged {}",
        od["locality_violations"]
    );
    let flagged = or["locality_violations"].as_u64().unwrap_or(0);
    ensure!(
        flagged >= 1,
        "checker flagged no out-of-area discard for random_global"
    );

    let pa = load_profile(dir.join("a.profile")).unwrap();
    let pb = load_profile(dir.join("b.profile")).unwrap();
    let r = compute_ratios(
        &pa,
        &pb,
        Direction::SourceToTarget,
        Normalization::PerScanMean,
    )
    .unwrap();
    let (rd, vd) = removed_in_unit_areas(dir, "a", "dens", r.values(), pa.partition());
    let (rr, vr) = removed_in_unit_areas(dir, "a", "rand", r.values(), pa.partition());
    ensure!(rd == rr, "removed {rd} vs {rr}");
    ensure!(
        vd == 0 && vr == flagged,
        "independent recount: density {vd}, random {vr}, checker {flagged}"
    );
    Ok(format!(
        "both modes removed {rd} points; checker flagged 0 vs {flagged} out-of-area discards"
    ))
}

fn clean64(seed: u64) -> SyntheticSceneSpec {
    SyntheticSceneSpec {
        dropout_rate_by_area: vec![0.0; 10],
        ground_tilt: 0.0,
        azimuth_jitter: 0.0,
        ..SyntheticSceneSpec::dense64(seed)
    }
}

fn beam_pipeline() -> Outcome {
    let start = Instant::now();
    let spec = clean64(41);
    let mut perfect = 0;
    let mut recovered40 = 0;
    for s in 0..50 {
        let (scan, gt) = generate_synthetic_scan_with_beams(&spec, s).map_err(|e| e.to_string())?;
        let model = kmeans_label_beams(&scan, 64, DEFAULT_MAX_ITERS).map_err(|e| e.to_string())?;
        if adjusted_rand_index(model.assignments(), &gt) == 1.0 {
            perfect += 1;
        }
        let (reduced, map) =
            reduce_beams(&scan, 64, 40, BeamSelect::Even, s).map_err(|e| e.to_string())?;
        let gt40: Vec<u16> = map.iter().map(|&i| gt[i]).collect();
        let distinct: HashSet<u16> = gt40.iter().copied().collect();
        let again =
            kmeans_label_beams(&reduced, 40, DEFAULT_MAX_ITERS).map_err(|e| e.to_string())?;
        if distinct.len() == 40
            && again.beam_sizes().iter().all(|&c| c > 0)
            && adjusted_rand_index(again.assignments(), &gt40) == 1.0
        {
            recovered40 += 1;
        }
    }
    ensure!(perfect == 50, "ARI 1.0 on {perfect}/50 scans");
    ensure!(
        recovered40 == 50,
        "64 -> 40 gave 40 recoverable beams on {recovered40}/50 scans"
    );
    within(start.elapsed(), 30.0)?;
    Ok("ARI 1.0 on 50/50 scans; 64 -> 40 left exactly 40 recoverable beams on 50/50".into())
}

fn random_scan(rng: &mut StreamRng, max_points: usize) -> Scan {
    let n = rng.random_range(0..=max_points);
    let points: Vec<Point> = (0..n)
        .map(|_| {
            let r = rng.random_range(1.0..80.0f32);
            let az = rng.random_range(0.0..std::f32::consts::TAU);
            let incl = rng.random_range(-0.45..0.15f32);
            Point::with_intensity(
                r * incl.cos() * az.cos(),
                r * incl.cos() * az.sin(),
                r * incl.sin(),
                rng.random_range(0.0..1.0),
            )
        })
        .collect();
    let labels = (0..n).map(|_| rng.random_range(0..20u16)).collect();
    Scan::new(points, SensorSpec::default())
        .unwrap()
        .with_labels(labels)
        .unwrap()
}

type Key = (u32, u32, u32, u32, u16);

fn keys(scan: &Scan) -> Vec<Key> {
    scan.points()
        .iter()
        .zip(scan.labels().unwrap())
        .map(|(p, &l)| {
            (
                p.x.to_bits(),
                p.y.to_bits(),
                p.z.to_bits(),
                p.intensity.to_bits(),
                l,
            )
        })
        .collect()
}

fn lasermix_conservation() -> Outcome {
    let start = Instant::now();
    let mut rng = rng::stream(51, 0);
    let mut checked_points = 0usize;
    for pair in 0..100 {
        let s = random_scan(&mut rng, 1500);
        let mut t = random_scan(&mut rng, 1500);
        if s.is_empty() && t.is_empty() {
            t = random_scan(&mut rng, 1500);
        }
        if s.is_empty() && t.is_empty() {
            continue;
        }
        for n in [2usize, 4, 6] {
            let part = default_partition(&s, &t, n).map_err(|e| e.to_string())?;
            let mix = laser_mix(&s, &t, &part).map_err(|e| e.to_string())?;
            let mut input: Vec<Key> = keys(&s);
            input.extend(keys(&t));
            let mut output: Vec<Key> = keys(&mix.mix1);
            output.extend(keys(&mix.mix2));
            input.sort_unstable();
            output.sort_unstable();
            ensure!(
                input == output,
                "pair {pair}, n={n}: mix1 + mix2 is not the input multiset"
            );
            // parity, recomputed from scratch
            let width = (part.phi_max() - part.phi_min()) / n as f64;
            let area = |p: &Point| {
                let phi = (p.z as f64).atan2((p.x as f64).hypot(p.y as f64));
                (((phi - part.phi_min()) / width).floor().max(0.0) as usize).min(n - 1)
            };
            for (mixed, prov, first_even) in [
                (&mix.mix1, &mix.provenance1, Provenance::Source),
                (&mix.mix2, &mix.provenance2, Provenance::Target),
            ] {
                for (p, &from) in mixed.points().iter().zip(prov) {
                    let even = area(p) % 2 == 0;
                    let want = if even == (first_even == Provenance::Source) {
                        Provenance::Source
                    } else {
                        Provenance::Target
                    };
                    ensure!(from == want, "pair {pair}, n={n}: parity broken");
                }
            }
            let problems = verify_mix(&s, &t, &part, &mix);
            ensure!(
                problems.is_empty(),
                "pair {pair}, n={n}: verifier: {}",
                problems.join("; ")
            );
            checked_points += input.len();
        }
    }
    within(start.elapsed(), 30.0)?;
    Ok(format!("100 pairs x n in {{2, 4, 6}}: multisets equal and parity holds for {checked_points} points"))
}

fn random_probs(rng: &mut StreamRng, rows: usize, cols: usize) -> Vec<Vec<f64>> {
    (0..rows)
        .map(|_| {
            let raw: Vec<f64> = (0..cols)
                .map(|_| {
                    if rng.random_bool(0.1) {
                        0.0
                    } else {
                        rng.random_range(1e-6..1.0)
                    }
                })
                .collect();
            let sum: f64 = raw.iter().sum();
            if sum == 0.0 {
                let mut r = vec![0.0; cols];
                r[0] = 1.0;
                r
            } else {
                raw.iter().map(|v| v / sum).collect()
            }
        })
        .collect()
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * (1.0 + b.abs())
}

fn numerics_oracles() -> Outcome {
    const TOL: f64 = 1e-9;
    let start = Instant::now();
    let mut rng = rng::stream(61, 0);
    for case in 0..1000 {
        let k = rng.random_range(2..7usize);
        let rows = rng.random_range(k..k + 20);
        let dim = rng.random_range(1..6usize);
        let cols = k + 1;
        let p_rows = random_probs(&mut rng, rows, cols);
        let probs = ProbabilityField::from_rows(&p_rows, ClassLayout::WithUnlabeled)
            .map_err(|e| e.to_string())?;

        // cross-entropy, class 0 ignored
        let mut labels: Vec<u16> = (0..rows).map(|_| rng.random_range(0..=k as u16)).collect();
        labels[0] = 1;
        let mut sum = 0.0;
        let mut cnt = 0.0;
        for (row, &y) in p_rows.iter().zip(&labels) {
            if y != 0 {
                sum -= f64::ln(f64::max(row[y as usize], 1e-12));
                cnt += 1.0;
            }
        }
        let got = cross_entropy_loss(&probs, &labels, 0).map_err(|e| e.to_string())?;
        ensure!(
            close(got, sum / cnt, TOL),
            "case {case}: cross-entropy {got} vs {}",
            sum / cnt
        );

        // self-information
        let map = self_information_map(&probs);
        for (i, row) in p_rows.iter().enumerate() {
            for (j, &p) in row.iter().enumerate() {
                let want = if p == 0.0 { 0.0 } else { -p * p.ln() };
                ensure!(
                    close(map[i * cols + j], want, TOL),
                    "case {case}: self-information at ({i}, {j})"
                );
            }
        }

        // KL consistency against a teacher over a larger scan
        let teacher_rows = random_probs(&mut rng, rows + 5, cols);
        let teacher =
            ProbabilityField::from_rows(&teacher_rows, ClassLayout::WithUnlabeled).unwrap();
        let mut kept: Vec<usize> = (0..rows + 5).collect();
        for _ in 0..5 {
            kept.remove(rng.random_range(0..kept.len()));
        }
        let mut kl_sum = 0.0;
        for (i, &j) in kept.iter().enumerate() {
            let mut row_kl = 0.0;
            for c in 0..cols {
                let p = p_rows[i][c].max(1e-12);
                let q = teacher_rows[j][c].max(1e-12);
                row_kl += p * (p.ln() - q.ln());
            }
            kl_sum += row_kl.max(0.0);
        }
        let want = kl_sum / kept.len() as f64;
        let got = sac_consistency_loss(&probs, &teacher, &kept).map_err(|e| e.to_string())?;
        ensure!(
            close(got, want, TOL),
            "case {case}: consistency {got} vs {want}"
        );

        // prototypes from source features; every class present
        let n_src = rng.random_range(k..k + 25);
        let feats: Vec<Vec<f64>> = (0..n_src)
            .map(|_| (0..dim).map(|_| rng.random_range(-2.0..2.0)).collect())
            .collect();
        let src_labels: Vec<u16> = (0..n_src)
            .map(|i| {
                if i < k {
                    i as u16 + 1
                } else {
                    rng.random_range(0..=k as u16)
                }
            })
            .collect();
        let ff = FeatureField::from_rows(&feats).unwrap();
        let protos = compute_prototypes(&ff, &src_labels, k).map_err(|e| e.to_string())?;
        let mut want_protos = vec![vec![0.0; dim]; k + 1];
        #[allow(clippy::needless_range_loop)]
        for class in 1..=k {
            let members: Vec<&Vec<f64>> = feats
                .iter()
                .zip(&src_labels)
                .filter(|(_, &l)| l as usize == class)
                .map(|(f, _)| f)
                .collect();
            for d in 0..dim {
                want_protos[class][d] =
                    members.iter().map(|f| f[d]).sum::<f64>() / members.len() as f64;
            }
            let got = protos
                .prototype(class as u16)
                .ok_or(format!("case {case}: class {class} missing"))?;
            for d in 0..dim {
                ensure!(
                    close(got[d], want_protos[class][d], TOL),
                    "case {case}: prototype {class}[{d}]"
                );
            }
        }

        // alignment weights on target features
        let tfeats: Vec<Vec<f64>> = (0..rows)
            .map(|_| (0..dim).map(|_| rng.random_range(-2.0..2.0)).collect())
            .collect();
        let pseudo_classes: Vec<u16> = (0..rows).map(|_| rng.random_range(0..=k as u16)).collect();
        let pseudo = PseudoLabels::from_classes(pseudo_classes.clone());
        let weights =
            alignment_weights(&FeatureField::from_rows(&tfeats).unwrap(), &pseudo, &protos)
                .map_err(|e| e.to_string())?;
        let mut want_w = Vec::with_capacity(rows);
        for (f, &c) in tfeats.iter().zip(&pseudo_classes) {
            if c == 0 {
                want_w.push(1.0);
                continue;
            }
            let proto = &want_protos[c as usize];
            let (mut dot, mut nf, mut np) = (0.0, 0.0, 0.0);
            for d in 0..dim {
                dot += f[d] * proto[d];
                nf += f[d] * f[d];
                np += proto[d] * proto[d];
            }
            want_w.push(if nf == 0.0 || np == 0.0 {
                1.0
            } else {
                1.0 - (dot / (nf.sqrt() * np.sqrt())).clamp(-1.0, 1.0)
            });
        }
        for (i, (&g, &w)) in weights.values().iter().zip(&want_w).enumerate() {
            ensure!(close(g, w, TOL), "case {case}: weight {i}: {g} vs {w}");
        }

        // class-aggregated reweighted adversarial loss, both forms
        let d: Vec<f64> = (0..rows).map(|_| rng.random_range(0.0..1.0)).collect();
        let dfield = DiscriminatorField::new(d.clone()).unwrap();
        for form in [AdvForm::Standard, AdvForm::PaperLiteral] {
            let mut total = 0.0;
            for class in 0..=k as u16 {
                let idx: Vec<usize> = (0..rows).filter(|&i| pseudo_classes[i] == class).collect();
                if idx.is_empty() {
                    continue;
                }
                let s: f64 = idx
                    .iter()
                    .map(|&i| {
                        want_w[i]
                            * if form == AdvForm::Standard {
                                d[i] * d[i]
                            } else {
                                d[i].abs()
                            }
                    })
                    .sum();
                total += s / idx.len() as f64;
            }
            let want = if form == AdvForm::Standard {
                total
            } else {
                -total
            };
            let got =
                reweighted_adv_loss(&dfield, &weights, &pseudo, form).map_err(|e| e.to_string())?;
            ensure!(
                close(got, want, TOL),
                "case {case}: reweighted {form:?} {got} vs {want}"
            );

            let one = PseudoLabels::from_classes(vec![1; rows]);
            let plain = lsgan_adv_loss(&dfield, form).unwrap();
            let rw =
                reweighted_adv_loss(&dfield, &AlignmentWeights::ones(rows), &one, form).unwrap();
            ensure!(
                rw == plain,
                "case {case}: M = 1, one class: {rw} != {plain}"
            );
        }
    }

    // EMA closed form
    for case in 0..200 {
        let n = rng.random_range(1..8usize);
        let theta0: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let w: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let k = rng.random_range(1..60u32);
        let mut state = EmaState::with_defaults(theta0.clone());
        for iter in 1..=(k as u64 * state.interval()) {
            state = ema_update(state, &w, iter).map_err(|e| e.to_string())?;
        }
        let ak = state.alpha().powi(k as i32);
        for i in 0..n {
            let want = ak * theta0[i] + (1.0 - ak) * w[i];
            ensure!(
                (state.teacher()[i] - want).abs() <= 1e-12,
                "EMA case {case}: {} vs {want}",
                state.teacher()[i]
            );
        }
    }
    within(start.elapsed(), 10.0)?;
    Ok("1000 random instances match brute force to 1e-9; M = 1 single-class loss exact; EMA to 1e-12".into())
}

fn pseudo_label_boundary() -> Outcome {
    let at = ProbabilityField::from_rows(
        &[vec![0.0, 0.9, 0.1], vec![0.0, 0.1, 0.9]],
        ClassLayout::WithUnlabeled,
    )
    .unwrap();
    let labels = generate_pseudo_labels(&at, 0.9).map_err(|e| e.to_string())?;
    ensure!(
        labels.classes() == [0, 0],
        "max(p) = 0.9 accepted: {:?}",
        labels.classes()
    );
    let above = 0.9f64.next_up();
    let just =
        ProbabilityField::from_rows(&[vec![0.0, above, 1.0 - above]], ClassLayout::WithUnlabeled)
            .unwrap();
    let labels = generate_pseudo_labels(&just, 0.9).map_err(|e| e.to_string())?;
    ensure!(labels.classes() == [1], "max(p) just above 0.9 rejected");
    let semantic =
        ProbabilityField::from_rows(&[vec![0.95, 0.05]], ClassLayout::SemanticOnly).unwrap();
    ensure!(
        generate_pseudo_labels(&semantic, 0.9).unwrap().classes() == [1],
        "(0.95, 0.05) should give class 1"
    );

    let mut rng = rng::stream(71, 0);
    for case in 0..1000 {
        let rows = rng.random_range(1..40);
        let cols = rng.random_range(3..8);
        let field = ProbabilityField::from_rows(
            &random_probs(&mut rng, rows, cols),
            ClassLayout::WithUnlabeled,
        )
        .unwrap();
        let mut th = [rng.random_range(0.0..1.0), rng.random_range(0.0..1.0)];
        th.sort_by(f64::total_cmp);
        let lo = generate_pseudo_labels(&field, th[0]).unwrap();
        let hi = generate_pseudo_labels(&field, th[1]).unwrap();
        for (i, (&a, &b)) in lo.classes().iter().zip(hi.classes()).enumerate() {
            ensure!(
                b == 0 || a == b,
                "case {case}, row {i}: accepted at {} but not at {}",
                th[1],
                th[0]
            );
        }
        ensure!(
            hi.accepted() <= lo.accepted(),
            "case {case}: accepted count grew with the threshold"
        );
    }
    Ok("max(p) = 0.9 rejected, next float above accepted; monotone over 1000 random fields".into())
}

fn replay_same_place(dir: &Path, manifest: &str, outputs: &[&str]) -> Result<(), String> {
    let snapshot = |dir: &Path| -> BTreeMap<String, BTreeMap<std::path::PathBuf, Vec<u8>>> {
        outputs
            .iter()
            .map(|o| {
                let p = dir.join(o);
                let t = if p.is_dir() {
                    tree(&p)
                } else {
                    BTreeMap::from([(p.clone(), fs::read(&p).unwrap_or_default())])
                };
                (o.to_string(), t)
            })
            .collect()
    };
    let before = snapshot(dir);
    ensure!(
        before.values().all(|t| !t.is_empty()),
        "{manifest}: nothing to compare"
    );
    dgt_ok(dir, &["replay", manifest]);
    let after = snapshot(dir);
    ensure!(before == after, "replay of {manifest} changed its outputs");
    Ok(())
}

fn determinism() -> Outcome {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let dir = tmp.path();
    dgt_ok(
        dir,
        &[
            "gen", "--preset", "dense64", "--count", "12", "--seed", "81", "--out", "a",
        ],
    );
    dgt_ok(
        dir,
        &[
            "gen", "--preset", "sparse40", "--count", "9", "--seed", "82", "--out", "b",
        ],
    );
    dgt_ok(
        dir,
        &[
            "--threads",
            "1",
            "profile",
            "--input",
            "a",
            "--out",
            "a1.profile",
        ],
    );
    dgt_ok(
        dir,
        &[
            "--threads",
            "8",
            "profile",
            "--input",
            "a",
            "--out",
            "a8.profile",
        ],
    );
    dgt_ok(dir, &["profile", "--input", "b", "--out", "b.profile"]);
    let (p1, p8) = (
        fs::read(dir.join("a1.profile")).unwrap(),
        fs::read(dir.join("a8.profile")).unwrap(),
    );
    ensure!(p1 == p8, "1-thread and 8-thread profiles differ");
    dgt_ok(
        dir,
        &[
            "translate",
            "--input",
            "a",
            "--source-profile",
            "a1.profile",
            "--target-profile",
            "b.profile",
            "--target-beams",
            "40",
            "--seed",
            "5",
            "--out",
            "t",
        ],
    );
    dgt_ok(
        dir,
        &[
            "mix", "--source", "a", "--target", "b", "--both", "--verify", "--seed", "3", "--out",
            "m",
        ],
    );

    fs::create_dir_all(dir.join("probs")).unwrap();
    let mut rng = rng::stream(83, 0);
    for i in 0..4 {
        let field =
            ProbabilityField::from_rows(&random_probs(&mut rng, 50, 5), ClassLayout::WithUnlabeled)
                .unwrap();
        write_probability_field(&field, dir.join(format!("probs/{i:06}.prob"))).unwrap();
    }
    dgt_ok(dir, &["pseudolabel", "--probs", "probs", "--out", "pl"]);
    dgt_ok(
        dir,
        &[
            "report",
            "--profile",
            "a1.profile",
            "--profile",
            "b.profile",
            "--out",
            "r.csv",
        ],
    );

    let runs: [(&str, &[&str]); 8] = [
        ("a/manifest.json", &["a"]),
        ("b/manifest.json", &["b"]),
        (
            "a1.profile.manifest.json",
            &["a1.profile", "a1.profile.manifest.json"],
        ),
        (
            "a8.profile.manifest.json",
            &["a8.profile", "a8.profile.manifest.json"],
        ),
        ("t/manifest.json", &["t"]),
        ("m/manifest.json", &["m"]),
        ("pl/manifest.json", &["pl"]),
        ("r.csv.manifest.json", &["r.csv", "r.csv.manifest.json"]),
    ];
    for (manifest, outputs) in runs {
        replay_same_place(dir, manifest, outputs)?;
    }
    // a replay into a fresh directory reproduces every data file
    dgt_ok(dir, &["replay", "t/manifest.json", "--out", "t2"]);
    let (t, t2) = (tree(&dir.join("t")), tree(&dir.join("t2")));
    let data = |m: &BTreeMap<std::path::PathBuf, Vec<u8>>| {
        m.iter()
            .filter(|(k, _)| !k.ends_with("manifest.json"))
            .map(|(k, v)| (k.clone(), v.clone()))
            .collect::<Vec<_>>()
    };
    ensure!(data(&t) == data(&t2), "replay into a new directory differs");
    Ok("gen, profile, translate, mix, pseudolabel and report replay byte-identically; 1 vs 8 thread profiles equal".into())
}

fn throughput() -> Outcome {
    let part = RadialPartition::default();
    let mut pa = DensityProfile::new(part, "dense64");
    let mut pb = DensityProfile::new(part, "sparse40");
    for s in 0..8 {
        pa.accumulate(&generate_synthetic_scan(&SyntheticSceneSpec::dense64(91), s).unwrap());
        pb.accumulate(&generate_synthetic_scan(&SyntheticSceneSpec::sparse40(92), s).unwrap());
    }
    let r = compute_ratios(
        &pa,
        &pb,
        Direction::SourceToTarget,
        Normalization::PerScanMean,
    )
    .unwrap();
    let spec = SyntheticSceneSpec {
        object_count: 12,
        ..SyntheticSceneSpec::plain(uniform_inclinations(64, -24.8, -1.5), 1875, 93)
    };
    let scan = generate_synthetic_scan(&spec, 0).unwrap();
    ensure!(scan.len() == 120_000, "scan has {} points", scan.len());
    let noise = NoiseConfig::default();
    let mut times = Vec::new();
    let mut removed = 0;
    for i in 0..15 {
        let t = Instant::now();
        let out = translate_scan(&scan, &part, &r, &noise, TranslateMode::Density, i).unwrap();
        let dt = t.elapsed();
        removed = scan.len() - out.scan.len();
        if i >= 3 {
            times.push(dt);
        }
    }
    times.sort();
    let median = times[times.len() / 2];
    ensure!(
        median < Duration::from_millis(50),
        "median {:.1} ms",
        median.as_secs_f64() * 1e3
    );
    Ok(format!(
        "120000 points (plan + discard {removed} + noise): median {:.1} ms, worst {:.1} ms",
        median.as_secs_f64() * 1e3,
        times.last().unwrap().as_secs_f64() * 1e3
    ))
}
