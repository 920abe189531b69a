use std::ffi::CString;
use std::sync::Once;

use navkit_py::navkit_py;
use pyo3::prelude::*;
use pyo3::types::PyDict;

static INIT: Once = Once::new();

fn with_module<R>(f: impl FnOnce(Python<'_>, &Bound<'_, PyDict>) -> R) -> R {
    INIT.call_once(|| {
        pyo3::append_to_inittab!(navkit_py);
        Python::initialize();
    });
    Python::attach(|py| {
        let globals = PyDict::new(py);
        globals
            .set_item("nk", py.import("navkit_py").unwrap())
            .unwrap();
        f(py, &globals)
    })
}

fn eval<'py>(py: Python<'py>, globals: &Bound<'py, PyDict>, expr: &str) -> Bound<'py, PyAny> {
    let code = CString::new(expr).unwrap();
    py.eval(&code, Some(globals), None)
        .unwrap_or_else(|e| panic!("{expr}: {e}"))
}

fn run(py: Python<'_>, globals: &Bound<'_, PyDict>, src: &str) {
    let code = CString::new(src).unwrap();
    py.run(&code, Some(globals), None)
        .unwrap_or_else(|e| panic!("{e}"));
}

#[test]
fn map_matches_the_core_generator() {
    with_module(|py, g| {
        run(py, g, "grid = nk.generate_map(seed=7, density=0.1)");
        let shape: (usize, usize) = eval(py, g, "(grid.width, grid.height)").extract().unwrap();
        assert_eq!(shape, (200, 200));
        let core = navkit::grid::generate_map(&navkit::MapSpec {
            seed: 7,
            ..Default::default()
        })
        .unwrap();
        let occ: Vec<Vec<bool>> = eval(py, g, "grid.occupancy()").extract().unwrap();
        let flat: Vec<bool> = occ.concat();
        assert_eq!(flat, core.cells());
        assert!(eval(py, g, "repr(grid)")
            .extract::<String>()
            .unwrap()
            .starts_with("Grid(200x200"));
    });
}

#[test]
fn fields_have_grid_shape_and_sign() {
    with_module(|py, g| {
        run(
            py,
            g,
            "grid = nk.generate_map(seed=3, density=0.15)\n\
             sdf = nk.signed_distance(grid)\n\
             fmm = nk.goal_distance(grid, (5.0, 5.0))\n\
             occ = grid.occupancy()\n\
             bad_sign = sum((d < 0) != o for r, ro in zip(sdf, occ) for d, o in zip(r, ro))",
        );
        assert_eq!(
            eval(py, g, "len(sdf), len(sdf[0])")
                .extract::<(usize, usize)>()
                .unwrap(),
            (200, 200)
        );
        assert_eq!(eval(py, g, "bad_sign").extract::<usize>().unwrap(), 0);
        assert!(eval(
            py,
            g,
            "all(f == float('inf') for r, ro in zip(fmm, occ) for f, o in zip(r, ro) if o)"
        )
        .extract::<bool>()
        .unwrap());
    });
}

#[test]
fn plan_and_episode_on_an_open_map() {
    with_module(|py, g| {
        run(
            py,
            g,
            "grid = nk.generate_map(seed=0, density=0.0)\n\
             plan = nk.plan_waypoint(grid, (1.0, 5.0, 0.0), (9.0, 5.0))\n\
             ep = nk.run_episode(grid, (1.0, 5.0, 0.0), (9.0, 5.0))",
        );
        let (x, _, _): (f64, f64, f64) = eval(py, g, "plan['waypoint']").extract().unwrap();
        assert!(x > 0.0);
        assert!(
            eval(py, g, "len(plan['controls']) + 1 == len(plan['states'])")
                .extract::<bool>()
                .unwrap()
        );
        assert_eq!(
            eval(py, g, "ep['outcome']").extract::<String>().unwrap(),
            "success"
        );
        let t: f64 = eval(py, g, "ep['time_to_goal']").extract().unwrap();
        assert!(t > 7.7 / 0.6 && t < 25.0, "{t}");
    });
}

#[test]
fn bad_arguments_raise_value_error() {
    with_module(|py, g| {
        run(py, g, "grid = nk.generate_map(seed=0, density=0.0)");
        for src in [
            "nk.generate_map(density=1.5)",
            "nk.generate_map(style='maze')",
            "nk.run_episode(grid, (1.0, 5.0, 0.0), (9.0, 5.0), agent='teleport')",
            "nk.run_episode(grid, (1.0, 5.0, 0.0), (9.0, 5.0), config='[expert]\\nlamda1 = 0.2')",
        ] {
            let err = py
                .eval(&CString::new(src).unwrap(), Some(g), None)
                .unwrap_err();
            assert!(
                err.is_instance_of::<pyo3::exceptions::PyValueError>(py),
                "{src}: {err}"
            );
        }
        let err = py
            .eval(c"nk.Grid.load('/nonexistent/map.grid')", Some(g), None)
            .unwrap_err();
        assert!(err.is_instance_of::<pyo3::exceptions::PyIOError>(py));
    });
}
