//! TSR3 files.

use std::path::Path;

use tsvd_core::{tsr3, Tensor3};

use crate::error::{Error, Result};

pub fn write_tensor(path: &Path, t: &Tensor3) -> Result<()> {
    let bytes = tsr3::encode(t).map_err(|source| Error::Tensor { path: path.into(), source })?;
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn read_tensor(path: &Path) -> Result<Tensor3> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    tsr3::decode(&bytes).map_err(|source| Error::Tensor { path: path.into(), source })
}
