//! Branch and solution serialization: a plot-ready CSV per branch and a
//! JSON snapshot per solution field. Writes go through a temp file and an
//! atomic rename.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::continuation::{Branch, BranchPoint};
use crate::diagnostics::DiagnosticsRecord;
use crate::error::{Error, Result};
use crate::grid::{SolutionField, StripGrid};

pub const BRANCH_HEADER: &str =
    "s,lambda,amplitude,width_half,e_min,H_max_dev,residual,newton_iters,nodal_ok,termination";

/// Seed provenance stored with every snapshot. `local_theory_amplitude`
/// is `seed_alpha / sqrt(2)`, the commonly quoted leading-order constant,
/// recorded so runs can be compared against either normalization.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunMetadata {
    pub seed_epsilon: f64,
    pub seed_alpha: f64,
    pub local_theory_amplitude: f64,
    pub termination: Option<String>,
}

/// On-disk form of one solution snapshot.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolutionDocument {
    pub grid: StripGrid,
    pub lambda: f64,
    /// Row-major nodal values (an x-column is contiguous).
    pub u: Vec<f64>,
    pub diagnostics: DiagnosticsRecord,
    pub metadata: RunMetadata,
}

impl SolutionDocument {
    pub fn field(&self) -> SolutionField {
        SolutionField {
            grid: self.grid.clone(),
            u: self.u.clone(),
            lambda: self.lambda,
        }
    }
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let file_name = path
        .file_name()
        .ok_or_else(|| Error::Format {
            path: path.to_path_buf(),
            message: "path has no file name".into(),
        })?
        .to_string_lossy()
        .to_string();
    let tmp = path.with_file_name(format!("{file_name}.tmp"));
    fs::write(&tmp, bytes).map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))?;
    Ok(())
}

/// Writes the branch CSV: one row per accepted point, 17 significant
/// digits, termination reason on the final row.
pub fn write_branch(branch: &Branch, path: &Path) -> Result<()> {
    let mut out = String::with_capacity(128 * (branch.points.len() + 1));
    out.push_str(BRANCH_HEADER);
    out.push('\n');
    let last = branch.points.len().saturating_sub(1);
    for (k, point) in branch.points.iter().enumerate() {
        let d = &point.diagnostics;
        let termination = if k == last {
            branch.termination.as_str()
        } else {
            ""
        };
        out.push_str(&format!(
            "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{},{},{}\n",
            point.s,
            point.field.lambda,
            d.amplitude,
            d.width_half,
            d.e_min,
            d.h_max_dev,
            d.residual_norm,
            point.newton_iterations,
            d.nodal.all(),
            termination,
        ));
    }
    write_atomic(path, out.as_bytes())
}

/// Writes a header-only CSV for a branch with no points.
pub fn write_empty_branch(path: &Path) -> Result<()> {
    write_atomic(path, format!("{BRANCH_HEADER}\n").as_bytes())
}

/// Snapshots one solution field with its diagnostics.
pub fn write_solution(
    field: &SolutionField,
    diagnostics: &DiagnosticsRecord,
    metadata: &RunMetadata,
    path: &Path,
) -> Result<()> {
    let doc = SolutionDocument {
        grid: field.grid.clone(),
        lambda: field.lambda,
        u: field.u.clone(),
        diagnostics: diagnostics.clone(),
        metadata: metadata.clone(),
    };
    let mut bytes = serde_json::to_vec_pretty(&doc).map_err(|e| Error::Format {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    bytes.push(b'\n');
    write_atomic(path, &bytes)
}

pub fn write_branch_point(
    point: &BranchPoint,
    metadata: &RunMetadata,
    path: &Path,
) -> Result<()> {
    write_solution(&point.field, &point.diagnostics, metadata, path)
}

pub fn read_solution(path: &Path) -> Result<SolutionDocument> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let doc: SolutionDocument = serde_json::from_str(&text).map_err(|e| Error::Format {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    if doc.u.len() != doc.grid.num_nodes() {
        return Err(Error::Format {
            path: path.to_path_buf(),
            message: format!(
                "{} values for a {} node grid",
                doc.u.len(),
                doc.grid.num_nodes()
            ),
        });
    }
    Ok(doc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constitutive::{BodyForce, ConstitutiveModel, ModelKind};
    use crate::continuation::TerminationReason;
    use crate::diagnostics::compute_diagnostics;
    use crate::grid::build_grid;
    use crate::reduced_ode::{homoclinic_seed, SeedParameters};

    fn snapshot() -> (SolutionField, DiagnosticsRecord, RunMetadata) {
        let model =
            ConstitutiveModel::new(vec![1.0, -0.3, 0.2], ModelKind::ModelI, 10.0).unwrap();
        let force = BodyForce::cubic(-0.1).unwrap();
        let grid = build_grid(30.0, 60, 16).unwrap();
        let seed = SeedParameters::for_model(&model, &force, 0.15).unwrap();
        let field = homoclinic_seed(&seed, &grid);
        let diag = compute_diagnostics(&field, &model, &force, 0.5, None).unwrap();
        let meta = RunMetadata {
            seed_epsilon: seed.epsilon,
            seed_alpha: seed.alpha,
            local_theory_amplitude: seed.alpha / 2.0_f64.sqrt(),
            termination: None,
        };
        (field, diag, meta)
    }

    #[test]
    fn solution_roundtrip_is_bit_identical() {
        let dir = std::env::temp_dir().join("antiplane_io_test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("solution.json");
        let (field, diag, meta) = snapshot();
        write_solution(&field, &diag, &meta, &path).unwrap();
        let doc = read_solution(&path).unwrap();
        assert_eq!(doc.u.len(), field.u.len());
        for (a, b) in doc.u.iter().zip(&field.u) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
        assert_eq!(doc.lambda.to_bits(), field.lambda.to_bits());
        std::fs::remove_file(&path).unwrap();
    }

    #[test]
    fn empty_branch_writes_header_only() {
        let dir = std::env::temp_dir().join("antiplane_io_test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("empty.csv");
        write_empty_branch(&path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text, format!("{BRANCH_HEADER}\n"));
        std::fs::remove_file(&path).unwrap();
    }

    #[test]
    fn branch_rows_increase_in_s_and_mark_termination() {
        let (field, diag, _) = snapshot();
        let mk = |s: f64| BranchPoint {
            field: field.clone(),
            s,
            diagnostics: diag.clone(),
            newton_iterations: 3,
        };
        let branch = Branch {
            points: vec![mk(0.0), mk(0.05), mk(0.12)],
            termination: TerminationReason::WidthStop,
            nodal_rejections: vec![],
            extensions: 0,
        };
        let dir = std::env::temp_dir().join("antiplane_io_test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("branch.csv");
        write_branch(&branch, &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], BRANCH_HEADER);
        assert_eq!(lines.len(), 4);
        let mut prev = f64::NEG_INFINITY;
        for (k, line) in lines[1..].iter().enumerate() {
            let fields: Vec<&str> = line.split(',').collect();
            assert_eq!(fields.len(), 10);
            let s: f64 = fields[0].parse().unwrap();
            assert!(s > prev);
            prev = s;
            let termination = fields[9];
            if k == 2 {
                assert_eq!(termination, "width_stop");
            } else {
                assert_eq!(termination, "");
            }
        }
        // 17 significant digits round-trip the stored values exactly
        let s_back: f64 = lines[2].split(',').next().unwrap().parse().unwrap();
        assert_eq!(s_back.to_bits(), 0.05_f64.to_bits());
        std::fs::remove_file(&path).unwrap();
    }
}
