//! On-disk format for trained bases: a small text manifest followed by
//! raw little-endian f64 column-major payloads for the basis and each
//! reduced affine operator.  Round-trips are bit exact.

use std::io::{Read, Write};
use std::path::Path;

use super::basis::ReducedBasis;
use crate::discretization::DiscreteOperators;
use crate::linalg::DenseMatrix;
use crate::{Error, Result};

const MAGIC: &[u8; 6] = b"ROMB1\0";

/// FNV-1a over the discretization fingerprint: mesh, order, quadrature
/// and affine term count.  Guards basis files against being loaded onto
/// a different discretization.
pub fn discretization_hash(ops: &DiscreteOperators) -> u64 {
    let mut h: u64 = 0xcbf29ce484222325;
    let mut eat = |bytes: &[u8]| {
        for &b in bytes {
            h ^= b as u64;
            h = h.wrapping_mul(0x100000001b3);
        }
    };
    for v in [
        ops.mesh.x_min,
        ops.mesh.x_max,
        ops.mesh.y_min,
        ops.mesh.y_max,
    ] {
        eat(&v.to_bits().to_le_bytes());
    }
    for v in [
        ops.mesh.nx as u64,
        ops.mesh.ny as u64,
        ops.basis.order as u64,
        ops.quad.n_theta as u64,
        ops.quad.n_z as u64,
        ops.affine_terms().len() as u64,
    ] {
        eat(&v.to_le_bytes());
    }
    h
}

pub fn save_basis(basis: &ReducedBasis, path: &Path) -> Result<()> {
    let mut manifest = String::new();
    manifest.push_str(&format!("disc_hash = {}\n", basis.disc_hash));
    manifest.push_str(&format!("n_dirs = {}\n", basis.n_dirs));
    manifest.push_str(&format!("n_dof = {}\n", basis.n_dof));
    manifest.push_str(&format!("r = {}\n", basis.r()));
    manifest.push_str(&format!("window = {}\n", basis.window));
    manifest.push_str(&format!("eps_rom = {}\n", basis.eps_rom));
    manifest.push_str(&format!("n_terms = {}\n", basis.projected.len()));
    let samples: Vec<String> = basis
        .samples
        .iter()
        .map(|mu| mu.iter().map(|v| format!("{v}")).collect::<Vec<_>>().join(","))
        .collect();
    manifest.push_str(&format!("samples = {}\n", samples.join(";")));

    let mut file = std::fs::File::create(path)?;
    file.write_all(MAGIC)?;
    file.write_all(&(manifest.len() as u64).to_le_bytes())?;
    file.write_all(manifest.as_bytes())?;
    for col in &basis.columns {
        for v in col {
            file.write_all(&v.to_le_bytes())?;
        }
    }
    for mat in &basis.projected {
        // column-major
        for j in 0..mat.cols {
            for i in 0..mat.rows {
                file.write_all(&mat[(i, j)].to_le_bytes())?;
            }
        }
    }
    Ok(())
}

pub fn load_basis(path: &Path, ops: &DiscreteOperators) -> Result<ReducedBasis> {
    let mut file = std::fs::File::open(path)?;
    let mut magic = [0u8; 6];
    file.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::Format(format!(
            "bad magic bytes {magic:?} in {}: not a basis file",
            path.display()
        )));
    }
    let mut len_bytes = [0u8; 8];
    file.read_exact(&mut len_bytes)?;
    let manifest_len = u64::from_le_bytes(len_bytes) as usize;
    let mut manifest_bytes = vec![0u8; manifest_len];
    file.read_exact(&mut manifest_bytes)?;
    let manifest = String::from_utf8(manifest_bytes)
        .map_err(|e| Error::Format(format!("manifest is not valid UTF-8: {e}")))?;

    let mut disc_hash = None;
    let mut n_dirs = None;
    let mut n_dof = None;
    let mut r = None;
    let mut window = None;
    let mut eps_rom = None;
    let mut n_terms = None;
    let mut samples: Vec<Vec<f64>> = Vec::new();
    for line in manifest.lines() {
        let Some((key, value)) = line.split_once(" = ") else { continue };
        match key {
            "disc_hash" => disc_hash = value.parse::<u64>().ok(),
            "n_dirs" => n_dirs = value.parse::<usize>().ok(),
            "n_dof" => n_dof = value.parse::<usize>().ok(),
            "r" => r = value.parse::<usize>().ok(),
            "window" => window = value.parse::<usize>().ok(),
            "eps_rom" => eps_rom = value.parse::<f64>().ok(),
            "n_terms" => n_terms = value.parse::<usize>().ok(),
            "samples" => {
                if !value.is_empty() {
                    for s in value.split(';') {
                        let mu: std::result::Result<Vec<f64>, _> =
                            s.split(',').map(|v| v.parse::<f64>()).collect();
                        samples.push(mu.map_err(|e| {
                            Error::Format(format!("unparsable sample '{s}': {e}"))
                        })?);
                    }
                }
            }
            _ => {}
        }
    }
    let missing = |what: &str| Error::Format(format!("manifest is missing '{what}'"));
    let disc_hash = disc_hash.ok_or_else(|| missing("disc_hash"))?;
    let n_dirs = n_dirs.ok_or_else(|| missing("n_dirs"))?;
    let n_dof = n_dof.ok_or_else(|| missing("n_dof"))?;
    let r = r.ok_or_else(|| missing("r"))?;
    let window = window.ok_or_else(|| missing("window"))?;
    let eps_rom = eps_rom.ok_or_else(|| missing("eps_rom"))?;
    let n_terms = n_terms.ok_or_else(|| missing("n_terms"))?;

    let expected_hash = discretization_hash(ops);
    if disc_hash != expected_hash || n_dirs != ops.n_dirs() || n_dof != ops.n_dof() {
        return Err(Error::Format(format!(
            "basis file was trained on a different discretization: file has \
             (hash {disc_hash}, {n_dirs} dirs, {n_dof} dofs), current is \
             (hash {expected_hash}, {} dirs, {} dofs)",
            ops.n_dirs(),
            ops.n_dof()
        )));
    }
    if n_terms != ops.affine_terms().len() {
        return Err(Error::Format(format!(
            "basis file carries {n_terms} reduced operators, discretization has {}",
            ops.affine_terms().len()
        )));
    }

    let mut read_f64 = |file: &mut std::fs::File| -> Result<f64> {
        let mut b = [0u8; 8];
        file.read_exact(&mut b)?;
        Ok(f64::from_le_bytes(b))
    };
    let mut columns = Vec::with_capacity(r);
    for _ in 0..r {
        let mut col = Vec::with_capacity(n_dirs * n_dof);
        for _ in 0..n_dirs * n_dof {
            col.push(read_f64(&mut file)?);
        }
        columns.push(col);
    }
    let mut projected = Vec::with_capacity(n_terms);
    for _ in 0..n_terms {
        let mut mat = DenseMatrix::zeros(r, r);
        for j in 0..r {
            for i in 0..r {
                mat[(i, j)] = read_f64(&mut file)?;
            }
        }
        projected.push(mat);
    }

    let mut basis = ReducedBasis {
        n_dirs,
        n_dof,
        columns,
        window,
        eps_rom,
        projected,
        sum_blocks: Vec::new(),
        weighted_sum_blocks: Vec::new(),
        samples,
        disc_hash,
    };
    // integration matrices are derived data; rebuild deterministically
    for col in 0..basis.r() {
        let mut plain = vec![0.0; n_dof];
        let mut weighted = vec![0.0; n_dof];
        for j in 0..n_dirs {
            let w = ops.quad.weights[j];
            let block = &basis.columns[col][j * n_dof..(j + 1) * n_dof];
            for (i, v) in block.iter().enumerate() {
                plain[i] += v;
                weighted[i] += w * v;
            }
        }
        basis.sum_blocks.push(plain);
        basis.weighted_sum_blocks.push(weighted);
    }
    Ok(basis)
}
