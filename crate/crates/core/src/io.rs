//! Field CSV files.
//!
//! The first line echoes the geometry, e.g.
//! `# annulus r_inner=1 r_outer=2 nr=64 ntheta=128` or
//! `# torus lx=1 ly=1 nx=64 ny=64 stencil=spectral`, followed by the column
//! header `r,theta,value` (annulus) or `x,y,value` (torus) and one row per
//! node in flat index order. Values carry 17 significant digits, so a save and
//! load round trip is exact.

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{config, Error, Result};
use crate::grid::{AnnulusGrid, Field, GridSpec, TorusGrid, TorusStencil};

/// The geometry comment line for a grid (without trailing newline).
pub fn geometry_line(grid: &GridSpec) -> String {
    match grid {
        GridSpec::Annulus(g) => format!(
            "# annulus r_inner={} r_outer={} nr={} ntheta={}",
            g.r_inner(),
            g.r_outer(),
            g.n_r(),
            g.n_theta()
        ),
        GridSpec::Torus(g) => format!(
            "# torus lx={} ly={} nx={} ny={} stencil={}",
            g.l_x(),
            g.l_y(),
            g.n_x(),
            g.n_y(),
            match g.stencil() {
                TorusStencil::Spectral => "spectral",
                TorusStencil::FivePoint => "five-point",
            }
        ),
    }
}

/// Parse a geometry comment line into a grid.
pub fn parse_geometry(line: &str) -> Result<GridSpec> {
    let bad = |message: String| Error::Parse { line: 1, message };
    let rest = line.strip_prefix('#').ok_or_else(|| bad("missing geometry comment".into()))?;
    let mut words = rest.split_whitespace();
    let kind = words.next().ok_or_else(|| bad("empty geometry comment".into()))?;
    let mut kv = std::collections::BTreeMap::new();
    for w in words {
        let (k, v) = w.split_once('=').ok_or_else(|| bad(format!("expected key=value, got `{w}`")))?;
        kv.insert(k, v);
    }
    let num = |k: &str| -> Result<f64> {
        kv.get(k)
            .ok_or_else(|| bad(format!("missing `{k}`")))?
            .parse::<f64>()
            .map_err(|e| bad(format!("`{k}`: {e}")))
    };
    let count = |k: &str| -> Result<usize> {
        kv.get(k)
            .ok_or_else(|| bad(format!("missing `{k}`")))?
            .parse::<usize>()
            .map_err(|e| bad(format!("`{k}`: {e}")))
    };
    match kind {
        "annulus" => Ok(AnnulusGrid::new(num("r_inner")?, num("r_outer")?, count("nr")?, count("ntheta")?)?.into()),
        "torus" => {
            let stencil = match kv.get("stencil").copied().unwrap_or("spectral") {
                "spectral" => TorusStencil::Spectral,
                "five-point" => TorusStencil::FivePoint,
                s => return Err(bad(format!("unknown stencil `{s}`"))),
            };
            Ok(TorusGrid::with_stencil(num("lx")?, num("ly")?, count("nx")?, count("ny")?, stencil)?.into())
        }
        other => Err(bad(format!("unknown domain `{other}`"))),
    }
}

fn same_geometry(a: &GridSpec, b: &GridSpec) -> bool {
    geometry_line(a) == geometry_line(b)
}

/// Write a field with its geometry header.
pub fn write_field(grid: &GridSpec, u: &Field, mut w: impl Write) -> Result<()> {
    grid.check(u)?;
    writeln!(w, "{}", geometry_line(grid))?;
    writeln!(w, "{}", if grid.as_annulus().is_some() { "r,theta,value" } else { "x,y,value" })?;
    for (idx, v) in u.iter().enumerate() {
        let (a, b) = match grid {
            GridSpec::Annulus(g) => g.polar(idx),
            GridSpec::Torus(g) => g.coords(idx),
        };
        writeln!(w, "{a:.16e},{b:.16e},{v:.16e}")?;
    }
    Ok(())
}

pub fn save_field(grid: &GridSpec, u: &Field, path: impl AsRef<Path>) -> Result<()> {
    let mut buf = Vec::new();
    write_field(grid, u, &mut buf)?;
    fs::write(path, buf)?;
    Ok(())
}

/// Parse a field file, returning the grid from its header and the values.
pub fn read_field(text: &str) -> Result<(GridSpec, Field)> {
    let mut lines = text.lines();
    let grid = parse_geometry(lines.next().ok_or(Error::Parse { line: 1, message: "empty file".into() })?)?;
    let header = lines.next().ok_or(Error::Parse { line: 2, message: "missing column header".into() })?;
    let want = if grid.as_annulus().is_some() { "r,theta,value" } else { "x,y,value" };
    if header.trim() != want {
        return Err(Error::Parse { line: 2, message: format!("expected `{want}`, got `{header}`") });
    }
    let n = grid.node_count();
    let mut values = Vec::with_capacity(n);
    for (k, line) in lines.enumerate() {
        let lineno = k + 3;
        if line.trim().is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split(',').collect();
        if cols.len() != 3 {
            return Err(Error::Parse { line: lineno, message: format!("expected 3 columns, got {}", cols.len()) });
        }
        let v = cols[2]
            .trim()
            .parse::<f64>()
            .map_err(|e| Error::Parse { line: lineno, message: format!("bad value `{}`: {e}", cols[2]) })?;
        values.push(v);
    }
    if values.len() != n {
        return Err(Error::Parse {
            line: values.len() + 3,
            message: format!("expected {n} rows, found {} (truncated file?)", values.len()),
        });
    }
    Ok((grid, Field::from_vec(values)))
}

/// Load a field and check that its header matches `grid`.
pub fn load_field(grid: &GridSpec, path: impl AsRef<Path>) -> Result<Field> {
    let (g, u) = load_field_any(path)?;
    if !same_geometry(&g, grid) {
        return config(format!(
            "field geometry `{}` does not match the requested `{}`",
            geometry_line(&g),
            geometry_line(grid)
        ));
    }
    Ok(u)
}

/// Load a field together with the grid described by its header.
pub fn load_field_any(path: impl AsRef<Path>) -> Result<(GridSpec, Field)> {
    read_field(&fs::read_to_string(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::build_annulus_grid;

    #[test]
    fn round_trip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        for grid in [
            build_annulus_grid(1.0, 2.0, 16, 32).unwrap(),
            TorusGrid::with_stencil(1.5, 1.0, 16, 8, TorusStencil::FivePoint).unwrap().into(),
        ] {
            let u = crate::grid::random_field(&grid, 3, 1.7).map(|v| v * std::f64::consts::PI);
            let path = dir.path().join("u.csv");
            save_field(&grid, &u, &path).unwrap();
            let back = load_field(&grid, &path).unwrap();
            assert_eq!(u.sub(&back).max_abs(), 0.0);
        }
    }

    #[test]
    fn truncation_and_mismatch() {
        let grid = build_annulus_grid(1.0, 2.0, 8, 8).unwrap();
        let mut buf = Vec::new();
        write_field(&grid, &grid.zeros(), &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let cut: String = text.lines().take(10).map(|l| format!("{l}\n")).collect();
        match read_field(&cut) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 11),
            other => panic!("{other:?}"),
        }
        let garbled = text.replacen("0.0000000000000000e0\n", "zz\n", 1);
        assert!(matches!(read_field(&garbled), Err(Error::Parse { line: 3, .. })));
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("u.csv");
        save_field(&grid, &grid.zeros(), &path).unwrap();
        let other = build_annulus_grid(1.0, 2.0, 8, 16).unwrap();
        assert!(matches!(load_field(&other, &path), Err(Error::Config(_))));
    }
}
