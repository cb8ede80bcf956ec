use pyo3::prelude::*;

#[pymodule]
fn terragait_py(_m: &Bound<'_, PyModule>) -> PyResult<()> {
    Ok(())
}
