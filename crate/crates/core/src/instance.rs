//! Problem instances: exams, students, the conflict matrix, Toronto-format
//! ingestion and a seeded random instance generator.
//!
//! Exams are identified internally by dense 0-based indices. The Toronto
//! files use 1-based, zero-padded ids (`0001`, `0002`, ...); the mapping is
//! `index = id - 1`.

use std::fmt;
use std::fmt::Write as _;
use std::ops::RangeInclusive;

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

/// Which input file a parse error refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SourceFile {
    Crs,
    Stu,
}

impl fmt::Display for SourceFile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SourceFile::Crs => f.write_str(".crs"),
            SourceFile::Stu => f.write_str(".stu"),
        }
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum InstanceError {
    #[error("{file} line {line}: malformed entry {content:?}")]
    Malformed {
        file: SourceFile,
        line: usize,
        content: String,
    },
    #[error("{file} line {line}: exam id {id} outside 1..={num_exams}")]
    ExamOutOfRange {
        file: SourceFile,
        line: usize,
        id: u64,
        num_exams: usize,
    },
    #[error(".crs line {line}: exam id {id} listed twice")]
    DuplicateExamId { line: usize, id: u64 },
    #[error("instance has no exams")]
    NoExams,
    #[error("instance has no students")]
    NoStudents,
    #[error("number of timeslots must be at least 1")]
    NoTimeslots,
    #[error("student {student} lists exam index {exam}, but there are only {num_exams} exams")]
    StudentExamOutOfRange {
        student: usize,
        exam: usize,
        num_exams: usize,
    },
    #[error("student {student} lists exam index {exam} twice")]
    DuplicateRegistration { student: usize, exam: usize },
    #[error("invalid generator parameters: {0}")]
    InvalidGenerator(String),
}

/// Non-fatal findings reported while reading Toronto files.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ParseWarning {
    EmptyStudentLine { line: usize },
    DuplicateRegistration { line: usize, id: u64 },
    EnrollmentMismatch { exam_id: u64, declared: u64, actual: u32 },
}

impl fmt::Display for ParseWarning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ParseWarning::EmptyStudentLine { line } => {
                write!(f, ".stu line {line}: empty student line skipped")
            }
            ParseWarning::DuplicateRegistration { line, id } => {
                write!(f, ".stu line {line}: exam {id:04} listed twice, counted once")
            }
            ParseWarning::EnrollmentMismatch {
                exam_id,
                declared,
                actual,
            } => write!(
                f,
                "exam {exam_id:04}: .crs declares {declared} students, .stu has {actual}; using {actual}"
            ),
        }
    }
}

/// Symmetric co-enrollment counts. `get(i, j)` is the number of students
/// sitting both exams; the diagonal holds the enrollment of each exam.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConflictMatrix {
    dim: usize,
    entries: Vec<u32>,
    // Off-diagonal non-zero entries per row, sorted by column.
    neighbors: Vec<Vec<(usize, u32)>>,
}

impl ConflictMatrix {
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> u32 {
        self.entries[i * self.dim + j]
    }

    /// Exams sharing at least one student with `exam`, with the shared count.
    #[inline]
    pub fn neighbors(&self, exam: usize) -> &[(usize, u32)] {
        &self.neighbors[exam]
    }

    pub fn degree(&self, exam: usize) -> usize {
        self.neighbors[exam].len()
    }

    /// Number of unordered exam pairs `{i, j}`, `i != j`, with `c_ij > 0`.
    pub fn conflicting_pairs(&self) -> usize {
        self.neighbors.iter().map(Vec::len).sum::<usize>() / 2
    }

    fn from_dense(dim: usize, entries: Vec<u32>) -> Self {
        let neighbors = (0..dim)
            .map(|i| {
                (0..dim)
                    .filter(|&j| j != i)
                    .filter_map(|j| {
                        let c = entries[i * dim + j];
                        (c > 0).then_some((j, c))
                    })
                    .collect()
            })
            .collect();
        Self {
            dim,
            entries,
            neighbors,
        }
    }
}

/// Builds the conflict matrix from per-student exam lists.
///
/// Every index must be `< n`; duplicates within one student's list are not
/// expected (instances reject them before calling this).
pub fn build_conflict_matrix(student_exams: &[Vec<usize>], n: usize) -> ConflictMatrix {
    let mut entries = vec![0u32; n * n];
    for exams in student_exams {
        for (a, &i) in exams.iter().enumerate() {
            entries[i * n + i] += 1;
            for &j in &exams[a + 1..] {
                entries[i * n + j] += 1;
                entries[j * n + i] += 1;
            }
        }
    }
    ConflictMatrix::from_dense(n, entries)
}

/// An uncapacitated (or per-slot seat capped) exam timetabling instance.
#[derive(Debug, Clone, PartialEq)]
pub struct ProblemInstance {
    name: String,
    num_timeslots: usize,
    enrollments: Vec<u32>,
    student_exams: Vec<Vec<usize>>,
    conflicts: ConflictMatrix,
    slot_capacity: Option<u64>,
}

impl ProblemInstance {
    /// Validates the registrations and builds the conflict matrix.
    ///
    /// Students with no exams are allowed; they count towards the number of
    /// students (the divisor of the cost) but add no conflicts.
    pub fn new(
        name: impl Into<String>,
        num_exams: usize,
        num_timeslots: usize,
        student_exams: Vec<Vec<usize>>,
    ) -> Result<Self, InstanceError> {
        if num_exams == 0 {
            return Err(InstanceError::NoExams);
        }
        if student_exams.is_empty() {
            return Err(InstanceError::NoStudents);
        }
        if num_timeslots == 0 {
            return Err(InstanceError::NoTimeslots);
        }
        let mut seen = vec![usize::MAX; num_exams];
        for (student, exams) in student_exams.iter().enumerate() {
            for &exam in exams {
                if exam >= num_exams {
                    return Err(InstanceError::StudentExamOutOfRange {
                        student,
                        exam,
                        num_exams,
                    });
                }
                if seen[exam] == student {
                    return Err(InstanceError::DuplicateRegistration { student, exam });
                }
                seen[exam] = student;
            }
        }
        let conflicts = build_conflict_matrix(&student_exams, num_exams);
        let enrollments = (0..num_exams).map(|i| conflicts.get(i, i)).collect();
        Ok(Self {
            name: name.into(),
            num_timeslots,
            enrollments,
            student_exams,
            conflicts,
            slot_capacity: None,
        })
    }

    /// Caps the summed enrollment of any single timeslot.
    pub fn with_slot_capacity(mut self, capacity: Option<u64>) -> Self {
        self.slot_capacity = capacity;
        self
    }

    pub fn with_timeslots(mut self, num_timeslots: usize) -> Result<Self, InstanceError> {
        if num_timeslots == 0 {
            return Err(InstanceError::NoTimeslots);
        }
        self.num_timeslots = num_timeslots;
        Ok(self)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn num_exams(&self) -> usize {
        self.enrollments.len()
    }

    pub fn num_students(&self) -> usize {
        self.student_exams.len()
    }

    pub fn num_timeslots(&self) -> usize {
        self.num_timeslots
    }

    pub fn enrollment(&self, exam: usize) -> u32 {
        self.enrollments[exam]
    }

    pub fn enrollments(&self) -> &[u32] {
        &self.enrollments
    }

    pub fn student_exams(&self) -> &[Vec<usize>] {
        &self.student_exams
    }

    pub fn conflicts(&self) -> &ConflictMatrix {
        &self.conflicts
    }

    pub fn slot_capacity(&self) -> Option<u64> {
        self.slot_capacity
    }

    pub fn total_registrations(&self) -> usize {
        self.student_exams.iter().map(Vec::len).sum()
    }

    /// Renders the instance as Toronto `.crs` and `.stu` text.
    pub fn to_toronto(&self) -> (String, String) {
        let mut crs = String::new();
        for (i, e) in self.enrollments.iter().enumerate() {
            let _ = writeln!(crs, "{:04} {}", i + 1, e);
        }
        let mut stu = String::new();
        for exams in &self.student_exams {
            let line = exams
                .iter()
                .map(|&e| format!("{:04}", e + 1))
                .collect::<Vec<_>>()
                .join(" ");
            stu.push_str(&line);
            stu.push('\n');
        }
        (crs, stu)
    }
}

/// Instance plus the warnings collected while reading it.
#[derive(Debug, Clone)]
pub struct ParsedInstance {
    pub instance: ProblemInstance,
    pub warnings: Vec<ParseWarning>,
}

fn parse_id(token: &str, file: SourceFile, line: usize, raw: &str) -> Result<u64, InstanceError> {
    token.parse::<u64>().map_err(|_| InstanceError::Malformed {
        file,
        line,
        content: raw.trim().to_string(),
    })
}

/// Reads a Toronto `.crs`/`.stu` pair.
///
/// The enrollment column of the `.crs` file is informational; actual
/// enrollments are counted from the `.stu` file and a mismatch only produces
/// a warning.
pub fn parse_toronto(
    name: impl Into<String>,
    crs_text: &str,
    stu_text: &str,
    num_timeslots: usize,
) -> Result<ParsedInstance, InstanceError> {
    let mut warnings = Vec::new();

    let mut declared: Vec<(usize, u64, u64)> = Vec::new();
    for (idx, raw) in crs_text.lines().enumerate() {
        let line = idx + 1;
        let mut tokens = raw.split_whitespace();
        let Some(id_tok) = tokens.next() else {
            continue;
        };
        let id = parse_id(id_tok, SourceFile::Crs, line, raw)?;
        let enrollment = match (tokens.next(), tokens.next()) {
            (Some(e), None) => parse_id(e, SourceFile::Crs, line, raw)?,
            _ => {
                return Err(InstanceError::Malformed {
                    file: SourceFile::Crs,
                    line,
                    content: raw.trim().to_string(),
                })
            }
        };
        declared.push((line, id, enrollment));
    }
    let num_exams = declared.len();
    if num_exams == 0 {
        return Err(InstanceError::NoExams);
    }

    let mut declared_enrollment = vec![None; num_exams];
    for &(line, id, enrollment) in &declared {
        if id == 0 || id as usize > num_exams {
            return Err(InstanceError::ExamOutOfRange {
                file: SourceFile::Crs,
                line,
                id,
                num_exams,
            });
        }
        let slot = &mut declared_enrollment[id as usize - 1];
        if slot.is_some() {
            return Err(InstanceError::DuplicateExamId { line, id });
        }
        *slot = Some(enrollment);
    }

    let mut students = Vec::new();
    for (idx, raw) in stu_text.lines().enumerate() {
        let line = idx + 1;
        let mut exams: Vec<usize> = Vec::new();
        for token in raw.split_whitespace() {
            let id = parse_id(token, SourceFile::Stu, line, raw)?;
            if id == 0 || id as usize > num_exams {
                return Err(InstanceError::ExamOutOfRange {
                    file: SourceFile::Stu,
                    line,
                    id,
                    num_exams,
                });
            }
            let exam = id as usize - 1;
            if exams.contains(&exam) {
                warnings.push(ParseWarning::DuplicateRegistration { line, id });
            } else {
                exams.push(exam);
            }
        }
        if exams.is_empty() {
            warnings.push(ParseWarning::EmptyStudentLine { line });
        } else {
            students.push(exams);
        }
    }

    let instance = ProblemInstance::new(name, num_exams, num_timeslots, students)?;
    for (i, declared) in declared_enrollment.iter().enumerate() {
        let declared = declared.expect("every exam id 1..=n seen exactly once");
        let actual = instance.enrollment(i);
        if declared != u64::from(actual) {
            warnings.push(ParseWarning::EnrollmentMismatch {
                exam_id: i as u64 + 1,
                declared,
                actual,
            });
        }
    }
    Ok(ParsedInstance { instance, warnings })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct GeneratorParams {
    pub num_exams: usize,
    pub num_students: usize,
    pub exams_per_student: RangeInclusive<usize>,
    pub num_timeslots: usize,
    pub seed: u64,
}

impl GeneratorParams {
    pub fn validate(&self) -> Result<(), InstanceError> {
        let (lo, hi) = (*self.exams_per_student.start(), *self.exams_per_student.end());
        let bad = |msg: String| Err(InstanceError::InvalidGenerator(msg));
        if self.num_exams == 0 || self.num_students == 0 || self.num_timeslots == 0 {
            return bad("exam, student and timeslot counts must all be at least 1".into());
        }
        if lo == 0 {
            return bad("every student must take at least one exam".into());
        }
        if lo > hi {
            return bad(format!("exams per student range {lo}..={hi} is empty"));
        }
        if hi > self.num_exams {
            return bad(format!(
                "students cannot take {hi} distinct exams out of {}",
                self.num_exams
            ));
        }
        Ok(())
    }
}

/// Draws a random instance: each student takes a uniform number of exams
/// from `exams_per_student`, chosen uniformly without replacement.
pub fn generate_instance(name: impl Into<String>, params: &GeneratorParams) -> Result<ProblemInstance, InstanceError> {
    params.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let students = (0..params.num_students)
        .map(|_| {
            let count = rng.random_range(params.exams_per_student.clone());
            let mut exams = index::sample(&mut rng, params.num_exams, count).into_vec();
            exams.sort_unstable();
            exams
        })
        .collect();
    ProblemInstance::new(name, params.num_exams, params.num_timeslots, students)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InstanceStats {
    pub name: String,
    pub num_exams: usize,
    pub num_students: usize,
    pub num_timeslots: usize,
    pub registrations: usize,
    pub conflict_density: f64,
}

pub fn instance_stats(inst: &ProblemInstance) -> InstanceStats {
    let n = inst.num_exams();
    let pairs = n * n.saturating_sub(1) / 2;
    let conflict_density = if pairs == 0 {
        0.0
    } else {
        inst.conflicts().conflicting_pairs() as f64 / pairs as f64
    };
    InstanceStats {
        name: inst.name().to_string(),
        num_exams: n,
        num_students: inst.num_students(),
        num_timeslots: inst.num_timeslots(),
        registrations: inst.total_registrations(),
        conflict_density,
    }
}
