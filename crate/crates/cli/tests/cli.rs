use std::path::Path;
use std::process::{Command, Output};

use brinkman_vem::mesh::io;
use brinkman_vem_cli::{run_convergence, CliError, RunConfig};

fn bin(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_brinkman-vem")).args(args).output().expect("spawn binary")
}

fn path_arg(p: &Path) -> &str {
    p.to_str().unwrap()
}

const SMALL_CHANNEL: &str = r#"
k = 2
nu = 0.1
source = ["0", "0"]

[mesh]
family = "quad"
cells = 64

[[boundary]]
tag = "inlet"
where = "x = 0"
type = "dirichlet"
g = ["4*y*(1 - y)", "0"]

[[boundary]]
tag = "outlet"
where = "x = 1"
type = "outflow"

[[boundary]]
tag = "wall"
where = "all"
type = "dirichlet"
g = ["0", "0"]
"#;

const MANUFACTURED: &str = r#"
k = 2
nu = 1.0

[mesh]
family = "quad"
cells = 16

[exact]
builtin = "stream-function"

[[boundary]]
tag = "bottom"
where = "y = 0"
type = "slip"
normal = [0.0, -1.0]

[[boundary]]
tag = "top"
where = "y = 1"
type = "slip"
normal = [0.0, 1.0]

[[boundary]]
tag = "sides"
where = "all"
type = "dirichlet"
"#;

fn write_config(dir: &Path, text: &str) -> std::path::PathBuf {
    let path = dir.join("run.toml");
    std::fs::write(&path, text).unwrap();
    path
}

#[test]
fn mesh_command_writes_requested_voronoi_cells() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("v.json");
    let o = bin(&["mesh", "--family", "voronoi", "--n", "1024", "--seed", "42", "-o", path_arg(&out)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let mesh = io::read(&out).unwrap();
    assert_eq!(mesh.num_cells(), 1024);
    assert!((mesh.total_area() - 1.0).abs() < 1e-12);
}

#[test]
fn mesh_command_quad_grid() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("q.json");
    assert!(bin(&["mesh", "--family", "quad", "--n", "100", "-o", path_arg(&out)]).status.success());
    let mesh = io::read(&out).unwrap();
    assert_eq!((mesh.num_cells(), mesh.num_vertices()), (100, 121));
}

#[test]
fn untileable_cell_count_is_a_configuration_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("q.json");
    let o = bin(&["mesh", "--family", "quad", "--n", "7", "-o", path_arg(&out)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(!out.exists());
}

#[test]
fn bad_configurations_exit_with_code_two() {
    let dir = tempfile::tempdir().unwrap();
    let cases = [
        SMALL_CHANNEL.replace("tag = \"wall\"", "tag = \"inlet\""),
        SMALL_CHANNEL.replace("nu = 0.1", "nu = 2.0"),
        SMALL_CHANNEL.replace("where = \"all\"", "where = \"y = 0\""),
        SMALL_CHANNEL.replace("type = \"outflow\"", "type = \"outflow\"\ng = [\"0\", \"0\"]"),
        SMALL_CHANNEL.replace("4*y*(1 - y)", "4*y*(1 - "),
        SMALL_CHANNEL.replace("k = 2", "k = 1"),
    ];
    for text in &cases {
        let config = write_config(dir.path(), text);
        let o = bin(&["solve", path_arg(&config)]);
        assert_eq!(o.status.code(), Some(2), "{}", String::from_utf8_lossy(&o.stderr));
        assert!(String::from_utf8_lossy(&o.stderr).starts_with("error:"));
    }
    assert_eq!(bin(&["solve", path_arg(&dir.path().join("missing.toml"))]).status.code(), Some(2));
}

#[test]
fn non_finite_data_is_a_numerical_failure() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), &SMALL_CHANNEL.replace("source = [\"0\", \"0\"]", "source = [\"sqrt(x - 2)\", \"0\"]"));
    let o = bin(&["solve", path_arg(&config)]);
    assert_eq!(o.status.code(), Some(3), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn solve_writes_vtk_and_dof_table() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), SMALL_CHANNEL);
    let (vtk, csv) = (dir.path().join("out.vtk"), dir.path().join("out.csv"));
    let o = bin(&["solve", path_arg(&config), "--vtk", path_arg(&vtk), "--csv", path_arg(&csv)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let report = String::from_utf8(o.stdout).unwrap();
    assert!(report.contains("cells            64"));
    assert!(report.contains("misfit inlet"));
    assert!(!report.contains("misfit outlet"));
    let vtk = std::fs::read_to_string(vtk).unwrap();
    assert!(vtk.starts_with("# vtk DataFile Version 4.2"));
    assert!(vtk.contains("CELL_DATA 64") && vtk.contains("VECTORS velocity double"));
    let mut reader = csv::Reader::from_path(csv).unwrap();
    assert_eq!(reader.headers().unwrap(), vec!["kind", "index", "value"]);
    let kinds: Vec<String> = reader.records().map(|r| r.unwrap()[0].to_string()).collect();
    assert!(kinds.iter().any(|k| k == "velocity") && kinds.iter().any(|k| k == "pressure"));
    assert_eq!(kinds.last().map(String::as_str), Some("multiplier"));
}

#[test]
fn unwritable_output_exits_with_code_one() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), SMALL_CHANNEL);
    let vtk = dir.path().join("no/such/dir/out.vtk");
    assert_eq!(bin(&["solve", path_arg(&config), "--vtk", path_arg(&vtk)]).status.code(), Some(1));
}

#[test]
fn convergence_table_layout() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), MANUFACTURED);
    let out = dir.path().join("conv.csv");
    let o = bin(&["convergence", path_arg(&config), "--levels", "3", "-o", path_arg(&out)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let mut reader = csv::Reader::from_path(&out).unwrap();
    assert_eq!(
        reader.headers().unwrap(),
        vec!["N", "h", "e_u", "r_u", "e_p", "r_p", "div_norm", "e_u_volume", "e_u_boundary"]
    );
    let rows: Vec<csv::StringRecord> = reader.records().map(Result::unwrap).collect();
    assert_eq!(rows.iter().map(|r| r[0].to_string()).collect::<Vec<_>>(), ["16", "64", "256"]);
    assert!(rows[0][3].is_empty() && rows[0][5].is_empty());
    let r_u: f64 = rows[2][3].parse().unwrap();
    assert!(r_u > 1.5, "{r_u}");
}

#[test]
fn viscosity_sweep_adds_a_column() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), MANUFACTURED);
    let o = bin(&["convergence", path_arg(&config), "--levels", "2", "--nu-sweep", "1e-3,1e-6"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = String::from_utf8(o.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert!(lines[0].starts_with("nu,N,h,"));
    assert_eq!(lines.len(), 5);
    assert!(lines[1].starts_with("1e-3,16,") && lines[4].starts_with("1e-6,64,"));
}

#[test]
fn convergence_output_is_deterministic() {
    let config = RunConfig::from_toml(&MANUFACTURED.replace("\"quad\"", "\"voronoi\""), ".").unwrap();
    let a = run_convergence(&config, Some(2), &[]).unwrap();
    let b = run_convergence(&config, Some(2), &[]).unwrap();
    assert_eq!(a, b);
}

#[test]
fn convergence_without_exact_solution_is_rejected() {
    let config = RunConfig::from_toml(SMALL_CHANNEL, ".").unwrap();
    assert!(matches!(run_convergence(&config, Some(2), &[]), Err(CliError::Config(_))));
}

#[test]
fn mesh_file_is_resolved_next_to_the_config() {
    let dir = tempfile::tempdir().unwrap();
    let mesh = dir.path().join("grid.json");
    assert!(bin(&["mesh", "--family", "nonconvex", "--n", "64", "-o", path_arg(&mesh)]).status.success());
    let text = SMALL_CHANNEL.replace("family = \"quad\"\ncells = 64", "file = \"grid.json\"");
    let config = RunConfig::from_toml(&text, dir.path()).unwrap();
    assert_eq!(config.build_mesh().unwrap().num_cells(), 64);
}
