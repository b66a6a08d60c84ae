use std::ffi::CString;

use pyo3::prelude::*;
use pyedgecap::pyedgecap;
use pyo3::types::PyDict;

#[test]
fn smoke_script_runs_against_embedded_module() {
    pyo3::append_to_inittab!(pyedgecap);
    let script = CString::new(include_str!("../python/smoke_test.py")).unwrap();
    Python::attach(|py| {
        let globals = PyDict::new(py);
        globals.set_item("__name__", "__main__").unwrap();
        py.run(&script, Some(&globals), None).unwrap_or_else(|e| {
            e.display(py);
            panic!("smoke script failed");
        });
    });
}
