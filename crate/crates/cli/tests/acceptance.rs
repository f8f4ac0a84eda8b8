//! End-to-end acceptance checks. Each criterion prints one PASS/FAIL line;
//! the process exits non-zero if any criterion fails.
//!
//! Toronto benchmark files are looked up in `$EXAMTT_TORONTO_DIR`, falling
//! back to `data/toronto` at the workspace root.

use std::collections::HashMap;
use std::fs;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use deluge_core::acceptance::{AcceptanceParams, Variant};
use deluge_core::batch::Manifest;
use deluge_core::driver::{run_hh, IterationRecord, RunConfig, RunResult};
use deluge_core::instance::{generate_instance, GeneratorParams, ProblemInstance};
use deluge_core::neighborhood::{LowLevelHeuristic, HEURISTIC_COUNT};
use deluge_core::solution::{construct_initial_le, evaluate_cost, BalanceCap};
use deluge_core::suite::{toronto_manifest, write_generated_suite};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn exe() -> &'static str {
    env!("CARGO_BIN_EXE_examtt")
}

fn toronto_dir() -> PathBuf {
    std::env::var_os("EXAMTT_TORONTO_DIR")
        .map(PathBuf::from)
        .unwrap_or_else(|| Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data/toronto"))
}

fn weight(d: usize) -> u64 {
    match d {
        1 => 16,
        2 => 8,
        3 => 4,
        4 => 2,
        5 => 1,
        _ => 0,
    }
}

/// Pair-sum penalty over unordered exam pairs, from the raw registrations.
fn brute_penalty(students: &[Vec<usize>], n: usize, assignment: &[usize]) -> u64 {
    let mut total = 0;
    for i in 0..n {
        for j in i + 1..n {
            let common = students.iter().filter(|s| s.contains(&i) && s.contains(&j)).count() as u64;
            total += common * weight(assignment[i].abs_diff(assignment[j]));
        }
    }
    total
}

/// The same penalty summed student by student over their exam pairs.
fn student_penalty(students: &[Vec<usize>], assignment: &[usize]) -> u64 {
    students
        .iter()
        .map(|s| {
            s.iter()
                .enumerate()
                .flat_map(|(a, &x)| {
                    s[a + 1..]
                        .iter()
                        .map(move |&y| weight(assignment[x].abs_diff(assignment[y])))
                })
                .sum::<u64>()
        })
        .sum()
}

fn brute_feasible(students: &[Vec<usize>], assignment: &[usize]) -> bool {
    students.iter().all(|s| {
        s.iter()
            .enumerate()
            .all(|(a, &x)| s[a + 1..].iter().all(|&y| assignment[x] != assignment[y]))
    })
}

/// All `k^n` assignments in lexicographic order.
fn enumerate(n: usize, k: usize) -> impl Iterator<Item = Vec<usize>> {
    let total = k.pow(n as u32);
    (0..total).map(move |mut code| {
        (0..n)
            .map(|_| {
                let s = code % k;
                code /= k;
                s
            })
            .collect()
    })
}

fn random_students(rng: &mut ChaCha8Rng, n: usize, m: usize, max_per: usize) -> Vec<Vec<usize>> {
    (0..m)
        .map(|_| {
            let count = rng.random_range(1..=max_per.min(n));
            let mut exams = rand::seq::index::sample(rng, n, count).into_vec();
            exams.sort_unstable();
            exams
        })
        .collect()
}

fn mid_instance(seed: u64) -> ProblemInstance {
    generate_instance(
        format!("mid{seed}"),
        &GeneratorParams {
            num_exams: 80,
            num_students: 600,
            exams_per_student: 1..=4,
            num_timeslots: 24,
            seed,
        },
    )
    .unwrap()
}

fn run(
    inst: &ProblemInstance,
    variant: Variant,
    seed: u64,
    iterations: usize,
    acceptance: AcceptanceParams,
) -> RunResult {
    run_hh(
        inst,
        &RunConfig {
            variant,
            seed,
            max_iterations: iterations,
            acceptance,
            ..RunConfig::default()
        },
    )
    .unwrap()
}

/// Incumbent cost before each iteration: the initial cost, then each
/// record's current cost.
fn incumbents_before(result: &RunResult) -> Vec<f64> {
    std::iter::once(result.initial_cost.value())
        .chain(result.trace.iter().map(|r| r.current_cost))
        .take(result.trace.len())
        .collect()
}

fn criterion_1() -> Outcome {
    let dir = toronto_dir();
    let (entries, missing) = toronto_manifest(&dir);
    let mut slowest = Duration::ZERO;
    let mut runs = 0;
    for entry in &entries {
        let (inst, _) = entry.load().map_err(|e| format!("{}: {e}", entry.name))?;
        for variant in Variant::ALL {
            for seed in 1..=3 {
                let started = Instant::now();
                let result = run_hh(
                    &inst,
                    &RunConfig {
                        variant,
                        seed,
                        ..RunConfig::default()
                    },
                )
                .map_err(|e| format!("{} {variant}: {e}", entry.name))?;
                slowest = slowest.max(started.elapsed());
                runs += 1;
                let report = result.best.check_feasibility(&inst);
                ensure(
                    report.hc1_violations == 0 && report.hc3_ok && report.hc4_unassigned == 0,
                    || format!("{} {variant} seed {seed}: {report}", entry.name),
                )?;
            }
        }
    }
    ensure(missing.is_empty(), || {
        format!(
            "Toronto files not found in {} for: {} ({} runs on the instances present)",
            dir.display(),
            missing.join(", "),
            runs
        )
    })?;
    ensure(slowest < Duration::from_secs(5), || {
        format!("slowest run took {slowest:?}")
    })?;
    Ok(format!("{runs} runs feasible, slowest {slowest:.2?}"))
}

fn criterion_2() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut checked = 0u64;
    for case in 0..100 {
        let n = rng.random_range(1..=8);
        let k = rng.random_range(1..=4);
        let m = rng.random_range(1..=12);
        let students = random_students(&mut rng, n, m, 4);
        let inst = ProblemInstance::new(format!("c{case}"), n, k, students.clone()).unwrap();
        let mut optimum: Option<u64> = None;
        for assignment in enumerate(n, k) {
            let as_options: Vec<Option<usize>> = assignment.iter().map(|&s| Some(s)).collect();
            let cost = evaluate_cost(&inst, &as_options).map_err(|e| e.to_string())?;
            let expected = brute_penalty(&students, n, &assignment);
            ensure(cost.penalty == expected && cost.students == m, || {
                format!("case {case}: {assignment:?} gave {} expected {expected}", cost.penalty)
            })?;
            if brute_feasible(&students, &assignment) {
                optimum = Some(optimum.map_or(expected, |o| o.min(expected)));
            }
            checked += 1;
        }
        if let (Some(opt), Ok(_)) = (optimum, construct_initial_le(&inst, BalanceCap::Auto)) {
            let result = run(&inst, Variant::Gd, case, 200, AcceptanceParams::default());
            ensure(result.best_cost.penalty >= opt, || {
                format!("case {case}: solver beat the enumerated optimum")
            })?;
        }
    }
    Ok(format!("{checked} assignments over 100 instances agree exactly"))
}

fn criterion_3() -> Outcome {
    let params = GeneratorParams {
        num_exams: 50,
        num_students: 400,
        exams_per_student: 1..=5,
        num_timeslots: 18,
        seed: 3,
    };
    let inst = generate_instance("delta50", &params).unwrap();
    let students = inst.student_exams().to_vec();
    let mut tt = construct_initial_le(&inst, BalanceCap::Auto).map_err(|e| e.to_string())?;
    let mut rng = ChaCha8Rng::seed_from_u64(33);
    let mut moved = 0usize;
    for i in 0..10_000 {
        let h = LowLevelHeuristic::ALL[rng.random_range(0..HEURISTIC_COUNT)];
        let mv = h.propose(&tt, &inst, &mut rng);
        moved += mv.changes.len();
        tt.apply(&inst, &mv.changes).map_err(|e| e.to_string())?;
        let full = student_penalty(&students, tt.assignment());
        ensure(tt.penalty() == full, || {
            format!("move {i}: incremental {} vs recompute {full}", tt.penalty())
        })?;
    }
    Ok(format!("10000 moves ({moved} exam relocations), exact agreement"))
}

fn criterion_4() -> Outcome {
    // three groups {0,1}, {2,3}, {4,5}; every cross-group pair conflicts
    // except 1-3, so a few colourings beyond group permutations exist
    let students = vec![
        vec![0, 2],
        vec![0, 2, 4],
        vec![0, 3],
        vec![0, 5],
        vec![0, 4],
        vec![1, 2, 5],
        vec![1, 4],
        vec![1, 5],
        vec![2, 4],
        vec![2, 5],
        vec![3, 4],
        vec![3, 5],
        vec![3, 5],
        vec![0, 2],
        vec![1, 4, 2],
    ];
    let inst = ProblemInstance::new("dense6", 6, 3, students.clone()).unwrap();
    let optimum = enumerate(6, 3)
        .filter(|a| brute_feasible(&students, a))
        .map(|a| brute_penalty(&students, 6, &a))
        .min()
        .ok_or("no feasible assignment")?;
    let started = Instant::now();
    let mut hits = 0;
    for seed in 0..20 {
        let result = run(&inst, Variant::Gd, seed, 5000, AcceptanceParams::default());
        ensure(result.best.check_feasibility(&inst).feasible, || {
            format!("seed {seed} infeasible")
        })?;
        if result.best_cost.penalty == optimum {
            hits += 1;
        }
    }
    let elapsed = started.elapsed();
    ensure(hits >= 19, || format!("{hits}/20 seeds reached the optimum {optimum}"))?;
    ensure(elapsed < Duration::from_secs(2), || format!("took {elapsed:?}"))?;
    Ok(format!(
        "{hits}/20 seeds reach optimum penalty {optimum}, {elapsed:.2?}"
    ))
}

fn criterion_5() -> Outcome {
    let inst = mid_instance(5);
    let flex = AcceptanceParams {
        kf: 1.0,
        ..AcceptanceParams::default()
    };
    let mut total = 0;
    let mut accepted = 0;
    let mut worse_accepted = 0;
    for seed in 0..3 {
        let gd = run(&inst, Variant::Gd, seed, 10_000, flex);
        let fd = run(&inst, Variant::Fd, seed, 10_000, flex);
        for (a, b) in gd.trace.iter().zip(&fd.trace) {
            ensure(
                a.accepted == b.accepted
                    && a.heuristic == b.heuristic
                    && a.candidate_cost.to_bits() == b.candidate_cost.to_bits()
                    && a.boundary.to_bits() == b.boundary.to_bits(),
                || format!("seed {seed}: traces diverge at iteration {}", a.iteration),
            )?;
        }
        let before = incumbents_before(&gd);
        worse_accepted += gd
            .trace
            .iter()
            .zip(&before)
            .filter(|(r, &c)| r.accepted && r.candidate_cost > c)
            .count();
        total += gd.trace.len();
        accepted += gd.trace.iter().filter(|r| r.accepted).count();
    }
    Ok(format!(
        "{total} iterations identical ({accepted} accepted, {worse_accepted} of them worsening)"
    ))
}

fn criterion_6() -> Outcome {
    let inst = mid_instance(6);
    let hill = AcceptanceParams {
        kf: 0.0,
        ..AcceptanceParams::default()
    };
    let mut worse_proposed = 0;
    for seed in 0..3 {
        let fd = run(&inst, Variant::Fd, seed, 10_000, hill);
        let before = incumbents_before(&fd);
        for (r, &cur) in fd.trace.iter().zip(&before) {
            ensure(!(r.accepted && r.candidate_cost > cur), || {
                format!("seed {seed}: worsening move accepted at iteration {}", r.iteration)
            })?;
            if r.candidate_cost > cur {
                worse_proposed += 1;
            }
        }
    }
    Ok(format!(
        "0 of {worse_proposed} worsening proposals accepted over 30000 iterations"
    ))
}

fn criterion_7() -> Outcome {
    let mut reheats = 0;
    for seed in 0..4 {
        let inst = mid_instance(70 + seed);
        let iterations = 2000;
        let result = run(&inst, Variant::Egd, seed, iterations, AcceptanceParams::default());
        let wait = (0.25 * iterations as f64).ceil() as usize;
        let mut counter = 0;
        let mut best = result.initial_cost.value();
        let mut level = result.initial_boundary;
        for r in &result.trace {
            if r.candidate_cost < best {
                counter = 0;
            } else {
                counter += 1;
            }
            let due = counter >= wait;
            ensure(r.reheated == due, || {
                format!(
                    "seed {seed}: reheat flag {} at iteration {} with counter {counter}",
                    r.reheated, r.iteration
                )
            })?;
            if due {
                counter = 0;
                reheats += 1;
                ensure(r.boundary > level, || {
                    format!("seed {seed}: level fell at reheat {}", r.iteration)
                })?;
            } else {
                ensure(r.boundary <= level, || {
                    format!("seed {seed}: level rose at iteration {}", r.iteration)
                })?;
            }
            level = r.boundary;
            best = r.best_cost;
        }
    }
    ensure(reheats > 0, || "no reheat occurred".into())?;
    Ok(format!(
        "{reheats} reheats, each exactly at the wait, levels monotone between them"
    ))
}

fn criterion_8() -> Outcome {
    let params = AcceptanceParams::default();
    let (lo, hi) = ((-1.5e-4f64).exp(), (-0.5e-4f64).exp());
    let mut steps = 0;
    let mut worst = 0.0f64;
    for seed in 0..3 {
        let inst = mid_instance(80 + seed);
        let result = run(&inst, Variant::Nlgd, seed, 3000, params);
        let mut level = result.initial_boundary;
        for r in &result.trace {
            match (r.accepted, r.draw) {
                (true, Some(u)) => {
                    ensure((params.b_min..=params.b_max).contains(&u), || {
                        format!("draw {u} out of range")
                    })?;
                    let expected = level * (-params.delta * u).exp() + params.beta;
                    let rel = ((r.boundary - expected) / expected).abs();
                    worst = worst.max(rel);
                    ensure(rel <= 1e-12, || {
                        format!("iteration {}: relative error {rel:e}", r.iteration)
                    })?;
                    let factor = r.boundary / level;
                    ensure((lo..=hi).contains(&factor), || {
                        format!("factor {factor} outside bounds")
                    })?;
                    steps += 1;
                }
                (false, None) => {
                    ensure(r.boundary == level, || {
                        format!("level moved on rejection at {}", r.iteration)
                    })?;
                }
                _ => return Err(format!("iteration {}: draw logged inconsistently", r.iteration)),
            }
            level = r.boundary;
        }
    }
    ensure(steps > 0, || "no accepted steps".into())?;
    Ok(format!("{steps} level updates, worst relative error {worst:e}"))
}

fn is_argmax(r: &IterationRecord) -> bool {
    let max = r.utilities.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    r.utilities[r.heuristic.0] == max
}

fn criterion_9() -> Outcome {
    let mut records = 0;
    let mut used = [0usize; HEURISTIC_COUNT];
    for variant in Variant::ALL {
        for seed in 0..3 {
            let inst = mid_instance(90 + seed);
            let result = run(&inst, variant, seed, 2000, AcceptanceParams::default());
            for r in &result.trace {
                ensure(r.utilities.iter().all(|u| (0.0..=40.0).contains(u)), || {
                    format!("{variant} seed {seed}: utilities {:?}", r.utilities)
                })?;
                ensure(is_argmax(r), || {
                    format!("{variant} seed {seed}: non-argmax choice at {}", r.iteration)
                })?;
                used[r.heuristic.0] += 1;
                records += 1;
            }
        }
    }
    Ok(format!(
        "{records} logged iterations within [0, 40] and argmax; selections per heuristic {used:?}"
    ))
}

fn read_csv(path: &Path) -> Result<(Vec<String>, Vec<Vec<String>>), String> {
    let text = fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    let mut lines = text.lines();
    let header = lines.next().unwrap_or("").split(',').map(String::from).collect();
    let rows = lines.map(|l| l.split(',').map(String::from).collect()).collect();
    Ok((header, rows))
}

fn run_batch_cli(manifest: &Path, out: &Path) -> Result<Duration, String> {
    let started = Instant::now();
    let status = Command::new(exe())
        .args([
            "batch",
            "--quiet",
            "--replicates",
            "10",
            "--iterations",
            "1000",
            "--variants",
            "egd,fd,nlgd",
        ])
        .arg("--manifest")
        .arg(manifest)
        .arg("--out-dir")
        .arg(out)
        .stdout(std::process::Stdio::null())
        .status()
        .map_err(|e| e.to_string())?;
    ensure(status.success(), || format!("batch exited with {status}"))?;
    Ok(started.elapsed())
}

/// Checks the batch outputs for `instances` and returns the row count.
fn check_batch_outputs(out: &Path, instances: usize) -> Result<usize, String> {
    let (header, rows) = read_csv(&out.join("raw.csv"))?;
    ensure(rows.len() == instances * 30, || {
        format!("{} raw rows, expected {}", rows.len(), instances * 30)
    })?;
    let col = |name: &str| {
        header
            .iter()
            .position(|h| h == name)
            .ok_or(format!("raw.csv lacks {name}"))
    };
    let (ci, cv, cb) = (col("instance")?, col("variant")?, col("best_cost")?);
    let mut raw_min: HashMap<(String, String), f64> = HashMap::new();
    for r in &rows {
        let cost: f64 = r[cb].parse().map_err(|_| "bad best_cost".to_string())?;
        let e = raw_min.entry((r[ci].clone(), r[cv].clone())).or_insert(f64::INFINITY);
        *e = e.min(cost);
    }
    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("summary.json")).map_err(|e| e.to_string())?)
            .map_err(|e| e.to_string())?;
    let cells = summary["cells"].as_array().ok_or("summary has no cells")?;
    ensure(cells.len() == instances * 3, || {
        format!("{} summary cells", cells.len())
    })?;
    for c in cells {
        let key = (
            c["instance"].as_str().unwrap_or_default().to_string(),
            c["variant"].as_str().unwrap_or_default().to_string(),
        );
        let lowest = c["lowest_best_cost"].as_f64().ok_or("cell without lowest")?;
        ensure(raw_min.get(&key) == Some(&lowest), || {
            format!("cell {key:?} lowest {lowest} disagrees with raw rows")
        })?;
        ensure(c["runs"].as_u64() == Some(10), || {
            format!("cell {key:?} does not hold 10 runs")
        })?;
    }
    for table in ["lowest_best_cost.csv", "average_best_cost.csv"] {
        let (header, rows) = read_csv(&out.join(table))?;
        ensure(header == ["instance", "RL-EGD", "RL-FD", "RL-NLGD", "lowest"], || {
            format!("{table} header {header:?}")
        })?;
        ensure(rows.len() == instances, || format!("{table} has {} rows", rows.len()))?;
    }
    Ok(rows.len())
}

fn criterion_10() -> Outcome {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let manifest = write_generated_suite(&tmp.path().join("suite")).map_err(|e| e.to_string())?;
    let out = tmp.path().join("generated");
    let elapsed = run_batch_cli(&manifest, &out)?;
    let rows = check_batch_outputs(&out, 18)?;
    let generated = format!("generated suite: 18 instances, {rows} runs in {elapsed:.1?}");

    let dir = toronto_dir();
    let (entries, missing) = toronto_manifest(&dir);
    ensure(missing.is_empty(), || {
        format!(
            "{generated}; Toronto batch not run, files not found in {} for: {}",
            dir.display(),
            missing.join(", ")
        )
    })?;
    let toronto_manifest_path = tmp.path().join("toronto.txt");
    fs::write(&toronto_manifest_path, Manifest { entries }.render()).map_err(|e| e.to_string())?;
    let out = tmp.path().join("toronto");
    let elapsed = run_batch_cli(&toronto_manifest_path, &out)?;
    check_batch_outputs(&out, 13)?;
    ensure(elapsed < Duration::from_secs(30 * 60), || {
        format!("Toronto batch took {elapsed:?}")
    })?;
    Ok(format!("{generated}; Toronto: 13 instances, 390 runs in {elapsed:.1?}"))
}

fn criterion_11() -> Outcome {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let inst = mid_instance(11);
    let (crs, stu) = inst.to_toronto();
    fs::write(tmp.path().join("d.crs"), crs).map_err(|e| e.to_string())?;
    fs::write(tmp.path().join("d.stu"), stu).map_err(|e| e.to_string())?;
    for variant in Variant::ALL {
        let mut logs = Vec::new();
        for rep in 0..2 {
            let out = tmp.path().join(format!("{variant}-{rep}"));
            let status = Command::new(exe())
                .current_dir(tmp.path())
                .args([
                    "solve",
                    "--crs",
                    "d.crs",
                    "--stu",
                    "d.stu",
                    "-k",
                    "24",
                    "--seed",
                    "17",
                    "--iterations",
                    "3000",
                ])
                .args(["--variant", variant.as_str()])
                .arg("--out-dir")
                .arg(&out)
                .stdout(std::process::Stdio::null())
                .status()
                .map_err(|e| e.to_string())?;
            ensure(status.success(), || format!("solve exited with {status}"))?;
            let log = fs::read(out.join(format!("d.{}.log.csv", variant.as_str()))).map_err(|e| e.to_string())?;
            let sol = fs::read(out.join(format!("d.{}.sol", variant.as_str()))).map_err(|e| e.to_string())?;
            logs.push((log, sol));
        }
        ensure(logs[0] == logs[1], || format!("{variant}: repeated runs differ"))?;
    }
    Ok("run logs and solutions byte-identical for all four variants".into())
}

fn main() {
    let criteria: [Criterion; 11] = [
        ("feasibility on the Toronto benchmark", criterion_1),
        ("cost evaluator against exhaustive pair sums", criterion_2),
        ("incremental cost over 10^4 moves", criterion_3),
        ("small-instance optimality", criterion_4),
        ("flex deluge with k_f = 1 matches great deluge", criterion_5),
        ("flex deluge with k_f = 0 never accepts worse", criterion_6),
        ("extended deluge reheat protocol", criterion_7),
        ("non-linear deluge level law", criterion_8),
        ("utility bounds and argmax selection", criterion_9),
        ("batch protocol replication", criterion_10),
        ("determinism of run logs", criterion_11),
    ];
    let filter = std::env::args().skip(1).find(|a| !a.starts_with('-'));
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let label = format!("criterion {:>2}", i + 1);
        if let Some(f) = &filter {
            if !label.contains(f.as_str()) && !name.contains(f.as_str()) {
                continue;
            }
        }
        let started = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            Err(p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into()))
        });
        let secs = started.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS {label} {name} ({secs:.1}s): {detail}"),
            Err(detail) => {
                failed += 1;
                println!("FAIL {label} {name} ({secs:.1}s): {detail}");
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
