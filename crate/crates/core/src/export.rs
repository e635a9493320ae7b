//! Field and history exporters: legacy ASCII VTK unstructured grids for the
//! per-element fields and a CSV log of the iteration history.
//!
//! All numbers are written with nine significant digits in scientific
//! notation, so identical states produce byte-identical files.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::energy::HField;
use crate::error::Result;
use crate::material::OrthotropicProps;
use crate::mesh::Mesh;
use crate::optimizer::IterationRecord;

/// Nine significant digits, locale-independent.
fn fmt(v: f64) -> String {
    format!("{v:.8e}")
}

/// Write the mesh and per-element fields as a legacy VTK 3.0 ASCII
/// unstructured grid. Cell data: the six moduli in MPa, the elastic energy
/// density in µJ/mm³ (`energy_density` is given in N·mm/mm³ and scaled by
/// 1000 on the way out) and the six H slots.
pub fn export_vtk(
    mesh: &Mesh,
    props: &[OrthotropicProps],
    h: &HField,
    energy_density: &[f64],
    path: &Path,
) -> Result<()> {
    let file = File::create(path)?;
    let mut w = BufWriter::new(file);

    writeln!(w, "# vtk DataFile Version 3.0")?;
    writeln!(w, "stiffopt element fields")?;
    writeln!(w, "ASCII")?;
    writeln!(w, "DATASET UNSTRUCTURED_GRID")?;

    writeln!(w, "POINTS {} double", mesh.n_nodes())?;
    for p in &mesh.nodes {
        writeln!(w, "{} {} {}", fmt(p.x), fmt(p.y), fmt(p.z))?;
    }

    let n_e = mesh.n_elements();
    writeln!(w, "CELLS {} {}", n_e, 5 * n_e)?;
    for tet in &mesh.elements {
        writeln!(w, "4 {} {} {} {}", tet[0], tet[1], tet[2], tet[3])?;
    }
    writeln!(w, "CELL_TYPES {n_e}")?;
    for _ in 0..n_e {
        // VTK_TETRA
        writeln!(w, "10")?;
    }

    writeln!(w, "CELL_DATA {n_e}")?;
    let modulus_fields: [(&str, Box<dyn Fn(usize) -> f64>); 6] = [
        ("E1", Box::new(|e| props[e].e[0])),
        ("E2", Box::new(|e| props[e].e[1])),
        ("E3", Box::new(|e| props[e].e[2])),
        ("G12", Box::new(|e| props[e].g[0])),
        ("G13", Box::new(|e| props[e].g[1])),
        ("G23", Box::new(|e| props[e].g[2])),
    ];
    for (name, field) in &modulus_fields {
        write_scalars(&mut w, name, n_e, field)?;
    }
    write_scalars(&mut w, "energy_density", n_e, &|e| {
        1e3 * energy_density[e]
    })?;
    let h_fields: [(&str, Box<dyn Fn(usize) -> f64>); 6] = [
        ("H1", Box::new(|e| h.vol[e][0])),
        ("H2", Box::new(|e| h.vol[e][1])),
        ("H3", Box::new(|e| h.vol[e][2])),
        ("H12", Box::new(|e| h.dev[e][0])),
        ("H13", Box::new(|e| h.dev[e][1])),
        ("H23", Box::new(|e| h.dev[e][2])),
    ];
    for (name, field) in &h_fields {
        write_scalars(&mut w, name, n_e, field)?;
    }

    w.flush()?;
    Ok(())
}

fn write_scalars(
    w: &mut impl Write,
    name: &str,
    n: usize,
    value: &dyn Fn(usize) -> f64,
) -> Result<()> {
    writeln!(w, "SCALARS {name} double 1")?;
    writeln!(w, "LOOKUP_TABLE default")?;
    for e in 0..n {
        writeln!(w, "{}", fmt(value(e)))?;
    }
    Ok(())
}

/// Write the iteration history as CSV with one row per iteration.
pub fn export_history(history: &[IterationRecord], path: &Path) -> Result<()> {
    let file = File::create(path)?;
    let mut w = BufWriter::new(file);
    writeln!(
        w,
        "iter,W_total,compliance,sH1,sH2,sH3,sH12,sH13,sH23,frozen_count,repairs"
    )?;
    for r in history {
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{},{},{}",
            r.iter,
            fmt(r.w_total),
            fmt(r.compliance),
            fmt(r.s_h[0]),
            fmt(r.s_h[1]),
            fmt(r.s_h[2]),
            fmt(r.s_h[3]),
            fmt(r.s_h[4]),
            fmt(r.s_h[5]),
            r.frozen_count,
            r.repairs
        )?;
    }
    w.flush()?;
    Ok(())
}
