use pyo3::prelude::*;

#[pymodule]
fn ladderkit_py(_m: &Bound<'_, PyModule>) -> PyResult<()> {
    Ok(())
}
