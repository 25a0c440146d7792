use pyo3::prelude::*;

#[pymodule]
fn fman(_m: &Bound<'_, PyModule>) -> PyResult<()> {
    Ok(())
}
