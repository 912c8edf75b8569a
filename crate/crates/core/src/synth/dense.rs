//! Dense matrices of the blur operators, built column by column from basis
//! images. Only meant for tiny problems used as test oracles.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::model::{LayerOperator, MaskOperator};
use crate::scene::{BlurModelKind, Scene};

pub const DENSE_PIXEL_LIMIT: usize = 4096;

fn check_size(scene: &Scene) -> Result<usize> {
    let n = scene.width() * scene.height();
    if n > DENSE_PIXEL_LIMIT {
        return Err(Error::TooLarge {
            n,
            limit: DENSE_PIXEL_LIMIT,
        });
    }
    Ok(n)
}

/// `[K_L0 | K_L1]` for one frame, single channel: `n x 2n`.
pub fn dense_operator(scene: &Scene, frame: usize, kind: BlurModelKind) -> Result<DMatrix<f64>> {
    let n = check_size(scene)?;
    scene.check_frame(frame)?;
    let op = LayerOperator::with_channels(scene, &[frame], kind, 1)?;
    let mut mat = DMatrix::zeros(n, 2 * n);
    let mut basis = vec![0.0; 2 * n];
    let mut col = vec![0.0; n];
    for j in 0..2 * n {
        basis[j] = 1.0;
        op.apply(&basis, &mut col);
        basis[j] = 0.0;
        mat.set_column(j, &nalgebra::DVector::from_column_slice(&col));
    }
    Ok(mat)
}

/// `K_A` for one frame: `(n · channels) x n`.
pub fn dense_mask_operator(scene: &Scene, frame: usize, kind: BlurModelKind) -> Result<DMatrix<f64>> {
    let n = check_size(scene)?;
    scene.check_frame(frame)?;
    let op = MaskOperator::new(scene, &[frame], kind)?;
    let rows = op.output_len();
    let mut mat = DMatrix::zeros(rows, n);
    let mut basis = vec![0.0; n];
    let mut col = vec![0.0; rows];
    for j in 0..n {
        basis[j] = 1.0;
        op.apply(&basis, &mut col);
        basis[j] = 0.0;
        mat.set_column(j, &nalgebra::DVector::from_column_slice(&col));
    }
    Ok(mat)
}
