//! Named benchmark sets: the Toronto (Carter) catalog with its standard
//! timeslot counts, and a reproducible set of 18 generated instances split
//! into nine small and nine large problems.

use std::path::{Path, PathBuf};

use crate::batch::{Manifest, ManifestEntry};
use crate::instance::{generate_instance, GeneratorParams, InstanceError, ProblemInstance};

/// `(name, timeslots, long file stem)` for the 13 Toronto instances. Both
/// the short and the long stems are found on disk in circulating copies.
pub const TORONTO: [(&str, usize, &str); 13] = [
    ("car91", 35, "car-s-91"),
    ("car92", 32, "car-f-92"),
    ("ear83", 24, "ear-f-83"),
    ("hec92", 18, "hec-s-92"),
    ("kfu93", 20, "kfu-s-93"),
    ("lse91", 18, "lse-f-91"),
    ("pur93", 42, "pur-s-93"),
    ("rye92", 23, "rye-s-93"),
    ("sta83", 13, "sta-f-83"),
    ("tre92", 23, "tre-s-92"),
    ("uta92", 35, "uta-s-92"),
    ("ute92", 10, "ute-s-92"),
    ("yor83", 21, "yor-f-83"),
];

/// Manifest for the Toronto files in `dir`, found as `<name>.crs`/`.stu`
/// or under the long stem. Missing instances are skipped; the returned list
/// names them.
pub fn toronto_manifest(dir: &Path) -> (Vec<ManifestEntry>, Vec<String>) {
    let mut found = Vec::new();
    let mut missing = Vec::new();
    for (name, k, long) in TORONTO {
        let pair = [name, long].into_iter().find_map(|stem| {
            let crs = dir.join(format!("{stem}.crs"));
            let stu = dir.join(format!("{stem}.stu"));
            (crs.is_file() && stu.is_file()).then_some((crs, stu))
        });
        match pair {
            Some((crs, stu)) => found.push(ManifestEntry {
                name: name.to_string(),
                crs,
                stu,
                num_timeslots: k,
                slot_capacity: None,
            }),
            None => missing.push(name.to_string()),
        }
    }
    (found, missing)
}

/// Parameters of the generated suite. Small problems have 15 to 55 exams,
/// large ones 100 to 500.
pub fn generated_suite() -> Vec<(String, GeneratorParams)> {
    let mut out = Vec::with_capacity(18);
    for (i, n) in (15..=55).step_by(5).enumerate() {
        out.push((
            format!("sp{n}"),
            GeneratorParams {
                num_exams: n,
                num_students: n * 8,
                exams_per_student: 1..=4,
                num_timeslots: n / 2 + 5,
                seed: 1000 + i as u64,
            },
        ));
    }
    for (i, n) in (100..=500).step_by(50).enumerate() {
        out.push((
            format!("lp{n}"),
            GeneratorParams {
                num_exams: n,
                num_students: n * 10,
                exams_per_student: 2..=5,
                num_timeslots: n / 5 + 20,
                seed: 2000 + i as u64,
            },
        ));
    }
    out
}

pub fn generate_suite() -> Result<Vec<ProblemInstance>, InstanceError> {
    generated_suite()
        .into_iter()
        .map(|(name, params)| generate_instance(name, &params))
        .collect()
}

/// Writes every generated instance to `dir` plus a `manifest.txt` listing
/// them with relative paths.
pub fn write_generated_suite(dir: &Path) -> std::io::Result<PathBuf> {
    std::fs::create_dir_all(dir)?;
    let mut entries = Vec::new();
    for (name, params) in generated_suite() {
        let inst = generate_instance(name.clone(), &params)
            .map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidInput, e.to_string()))?;
        let (crs, stu) = inst.to_toronto();
        std::fs::write(dir.join(format!("{name}.crs")), crs)?;
        std::fs::write(dir.join(format!("{name}.stu")), stu)?;
        entries.push(ManifestEntry {
            name: name.clone(),
            crs: PathBuf::from(format!("{name}.crs")),
            stu: PathBuf::from(format!("{name}.stu")),
            num_timeslots: params.num_timeslots,
            slot_capacity: None,
        });
    }
    let path = dir.join("manifest.txt");
    std::fs::write(&path, Manifest { entries }.render())?;
    Ok(path)
}
