// SPDX-License-Identifier: Apache-2.0

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use super::{EmbeddingReport, EvalError};

/// Rows of an exported CSV: name → (type, vector).
pub type CsvVectors = BTreeMap<String, (String, Vec<f64>)>;

fn to_csv(rows: &CsvVectors) -> Result<Vec<u8>, EvalError> {
    let d = rows.values().next().map_or(0, |r| r.1.len());
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["name".to_string(), "type".to_string()];
    header.extend((0..d).map(|i| format!("v{i}")));
    w.write_record(&header).map_err(|e| EvalError::Csv(e.to_string()))?;
    for (name, (ty, v)) in rows {
        let mut rec = vec![name.clone(), ty.clone()];
        // Display prints the shortest string that round-trips
        rec.extend(v.iter().map(|x| x.to_string()));
        w.write_record(&rec).map_err(|e| EvalError::Csv(e.to_string()))?;
    }
    w.into_inner().map_err(|e| EvalError::Csv(e.to_string()))
}

/// One CSV per family: cells, types, and arcs per property.
pub fn export_vectors(report: &EmbeddingReport, dir: &Path) -> Result<Vec<PathBuf>, EvalError> {
    let io = |p: &Path| {
        let context = p.display().to_string();
        move |source| EvalError::Io { context, source }
    };
    std::fs::create_dir_all(dir).map_err(io(dir))?;
    let mut families: Vec<(String, CsvVectors)> = Vec::new();
    let ty = |c: &str| report.cell_types.get(c).cloned().unwrap_or_default();
    families.push((
        "functional_cells".into(),
        report.cell_vectors.iter().map(|(c, v)| (c.clone(), (ty(c), v.clone()))).collect(),
    ));
    families.push((
        "functional_types".into(),
        report.type_vectors.iter().map(|(t, v)| (t.clone(), (t.clone(), v.clone()))).collect(),
    ));
    let mut arcs: BTreeMap<String, CsvVectors> = BTreeMap::new();
    for e in &report.arc_vectors {
        let name = format!("{}/{}/{}", e.arc.cell, e.arc.output_pin, e.arc.related_pin);
        arcs.entry(format!("electrical_{}", e.property.name()))
            .or_default()
            .insert(name, (ty(&e.arc.cell), e.vector.clone()));
    }
    families.extend(arcs);
    let mut written = Vec::new();
    for (family, rows) in families {
        let path = dir.join(format!("{family}.csv"));
        crate::write_atomic(&path, &to_csv(&rows)?).map_err(io(&path))?;
        written.push(path);
    }
    Ok(written)
}

pub fn read_vectors_csv(path: &Path) -> Result<CsvVectors, EvalError> {
    let mut r = csv::Reader::from_path(path).map_err(|e| EvalError::Csv(format!("{}: {e}", path.display())))?;
    let mut out = BTreeMap::new();
    for rec in r.records() {
        let rec = rec.map_err(|e| EvalError::Csv(format!("{}: {e}", path.display())))?;
        let name = rec.get(0).unwrap_or_default().to_string();
        let ty = rec.get(1).unwrap_or_default().to_string();
        let v = rec
            .iter()
            .skip(2)
            .map(|s| s.parse::<f64>().map_err(|e| EvalError::Csv(format!("{}: {name}: {e}", path.display()))))
            .collect::<Result<Vec<_>, _>>()?;
        out.insert(name, (ty, v));
    }
    Ok(out)
}
