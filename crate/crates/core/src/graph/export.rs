use super::{Graph, GraphError, SpectralDecomposition};
use std::io::Write;

fn export_err(e: impl std::fmt::Display) -> GraphError {
    GraphError::Export(e.to_string())
}

/// Columns `i,j,weight`; each undirected edge once with `i < j`.
pub fn write_weights_csv<W: Write>(graph: &Graph, out: W) -> Result<(), GraphError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["i", "j", "weight"]).map_err(export_err)?;
    for (i, j, weight) in graph.edges() {
        w.serialize((i, j, weight)).map_err(export_err)?;
    }
    w.flush().map_err(export_err)
}

/// Columns `index,eigenvalue`.
pub fn write_eigenvalues_csv<W: Write>(
    spec: &SpectralDecomposition,
    out: W,
) -> Result<(), GraphError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["index", "eigenvalue"])
        .map_err(export_err)?;
    for (i, l) in spec.eigenvalues().iter().enumerate() {
        w.serialize((i, l)).map_err(export_err)?;
    }
    w.flush().map_err(export_err)
}

/// Wide matrix: `node,phi_0,…,phi_{K−1}`, one row per node.
pub fn write_eigenvectors_csv<W: Write>(
    spec: &SpectralDecomposition,
    out: W,
) -> Result<(), GraphError> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["node".to_string()];
    header.extend((0..spec.count()).map(|i| format!("phi_{i}")));
    w.write_record(&header).map_err(export_err)?;
    for node in 0..spec.n() {
        let mut row = vec![node.to_string()];
        row.extend((0..spec.count()).map(|i| spec.eigenvector(i)[node].to_string()));
        w.write_record(&row).map_err(export_err)?;
    }
    w.flush().map_err(export_err)
}
