//! Binary node-data container: magic, axis counts, spacings, then
//! row-major f64 payload (node-major, component-minor). Byte order is
//! little-endian on every platform so artifacts compare bit-identically.

use std::io::{Read, Write};
use std::path::Path;

use crate::error::{CclError, Result};
use crate::geom::grid::{Grid, ScalarField, SymTensorField};
use crate::linalg::packed_len;
use crate::scalar::{lower, Scalar};

pub const GRID_MAGIC: &[u8; 8] = b"CCLGRID1";

#[derive(Clone, Debug)]
pub struct GridData {
    pub dims: Vec<usize>,
    pub spacings: Vec<f64>,
    pub components: usize,
    pub data: Vec<f64>,
}

pub fn write_grid_data(path: &Path, gd: &GridData) -> Result<()> {
    let total: usize = gd.dims.iter().product();
    if gd.data.len() != total * gd.components {
        return Err(CclError::InvalidField(format!(
            "payload length {} != {} nodes x {} components",
            gd.data.len(),
            total,
            gd.components
        )));
    }
    let mut buf = Vec::with_capacity(32 + gd.data.len() * 8);
    buf.extend_from_slice(GRID_MAGIC);
    buf.extend_from_slice(&(gd.dims.len() as u32).to_le_bytes());
    buf.extend_from_slice(&(gd.components as u32).to_le_bytes());
    for &d in &gd.dims {
        buf.extend_from_slice(&(d as u64).to_le_bytes());
    }
    for &h in &gd.spacings {
        buf.extend_from_slice(&h.to_le_bytes());
    }
    for &v in &gd.data {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    let mut f = std::fs::File::create(path)?;
    f.write_all(&buf)?;
    Ok(())
}

pub fn read_grid_data(path: &Path) -> Result<GridData> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)?.read_to_end(&mut bytes)?;
    let fail = |msg: &str| CclError::InvalidField(format!("{}: {msg}", path.display()));
    if bytes.len() < 16 || &bytes[..8] != GRID_MAGIC {
        return Err(fail("not a grid-data file"));
    }
    let ndims = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
    let components = u32::from_le_bytes(bytes[12..16].try_into().unwrap()) as usize;
    if ndims == 0 || ndims > 16 || components == 0 {
        return Err(fail("implausible header"));
    }
    let header = 16 + ndims * 8 + ndims * 8;
    if bytes.len() < header {
        return Err(fail("truncated header"));
    }
    let mut dims = Vec::with_capacity(ndims);
    for i in 0..ndims {
        let off = 16 + i * 8;
        dims.push(u64::from_le_bytes(bytes[off..off + 8].try_into().unwrap()) as usize);
    }
    let mut spacings = Vec::with_capacity(ndims);
    for i in 0..ndims {
        let off = 16 + ndims * 8 + i * 8;
        spacings.push(f64::from_le_bytes(bytes[off..off + 8].try_into().unwrap()));
    }
    let total: usize = dims.iter().product();
    let want = total.checked_mul(components).ok_or_else(|| fail("dims overflow"))?;
    if bytes.len() != header + want * 8 {
        return Err(fail("payload size mismatch"));
    }
    let mut data = Vec::with_capacity(want);
    for i in 0..want {
        let off = header + i * 8;
        data.push(f64::from_le_bytes(bytes[off..off + 8].try_into().unwrap()));
    }
    Ok(GridData { dims, spacings, components, data })
}

/// Loaded node data must agree with the target grid in rank, per-axis node
/// count and spacing, and component count.
pub fn check_grid_shape(gd: &GridData, grid: &Grid, components: usize) -> Result<()> {
    let fail = |msg: String| Err(CclError::InvalidField(msg));
    if gd.dims.len() != grid.dim() {
        return fail(format!("rank {} != grid rank {}", gd.dims.len(), grid.dim()));
    }
    for a in 0..grid.dim() {
        if gd.dims[a] != grid.axis(a).nodes {
            return fail(format!("axis {a}: {} nodes != {}", gd.dims[a], grid.axis(a).nodes));
        }
        if (gd.spacings[a] - grid.spacing(a)).abs() > 1e-12 * (1.0 + grid.spacing(a).abs()) {
            return fail(format!("axis {a}: spacing {} != {}", gd.spacings[a], grid.spacing(a)));
        }
    }
    if gd.components != components {
        return fail(format!("{} components != {components}", gd.components));
    }
    Ok(())
}

pub fn write_scalar_field<F: Scalar>(path: &Path, field: &ScalarField<F>) -> Result<()> {
    let grid = field.grid();
    let gd = GridData {
        dims: (0..grid.dim()).map(|a| grid.axis(a).nodes).collect(),
        spacings: (0..grid.dim()).map(|a| grid.spacing(a)).collect(),
        components: 1,
        data: field.as_slice().iter().map(|&v| lower(v)).collect(),
    };
    write_grid_data(path, &gd)
}

pub fn read_scalar_field<F: Scalar>(path: &Path, grid: &Grid) -> Result<ScalarField<F>> {
    let gd = read_grid_data(path)?;
    check_grid_shape(&gd, grid, 1)?;
    ScalarField::from_data(grid.clone(), gd.data.iter().map(|&v| crate::scalar::c(v)).collect())
}

pub fn write_sym_tensor_field<F: Scalar>(path: &Path, field: &SymTensorField<F>) -> Result<()> {
    let grid = field.grid();
    let gd = GridData {
        dims: (0..grid.dim()).map(|a| grid.axis(a).nodes).collect(),
        spacings: (0..grid.dim()).map(|a| grid.spacing(a)).collect(),
        components: packed_len(field.dim()),
        data: field.as_slice().iter().map(|&v| lower(v)).collect(),
    };
    write_grid_data(path, &gd)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::grid::Grid;

    #[test]
    fn scalar_round_trip_is_bit_exact() {
        let grid = Grid::torus(2, 5).unwrap();
        let field: ScalarField<f64> =
            ScalarField::from_fn(grid.clone(), |x| (x[0].sin() + 0.3 * x[1].cos()) * 1.0e-7);
        let dir = std::env::temp_dir().join(format!("ccl-io-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("field.bin");
        write_scalar_field(&path, &field).unwrap();
        let back: ScalarField<f64> = read_scalar_field(&path, &grid).unwrap();
        assert_eq!(back.as_slice(), field.as_slice());
        std::fs::remove_dir_all(&dir).unwrap();
    }

    #[test]
    fn shape_mismatch_is_refused() {
        let grid = Grid::torus(2, 5).unwrap();
        let other = Grid::torus(2, 6).unwrap();
        let field: ScalarField<f64> = ScalarField::zeros(grid.clone());
        let dir = std::env::temp_dir().join(format!("ccl-io2-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("field.bin");
        write_scalar_field(&path, &field).unwrap();
        assert!(read_scalar_field::<f64>(&path, &other).is_err());
        let garbage = dir.join("bad.bin");
        std::fs::write(&garbage, b"not a grid").unwrap();
        assert!(read_grid_data(&garbage).is_err());
        std::fs::remove_dir_all(&dir).unwrap();
    }
}
