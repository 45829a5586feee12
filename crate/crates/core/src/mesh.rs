//! Sampled surfaces and point clouds with a per-vertex regression field.

use std::fmt::Write as _;

use serde::Serialize;

#[derive(Debug, Clone, Serialize)]
pub struct Mesh {
    /// Ambient dimension.
    pub dim: usize,
    pub vertices: Vec<Vec<f64>>,
    /// Parameters `(t, u)` of each vertex.
    pub params: Vec<Vec<f64>>,
    /// Quad faces (zero-based); empty for point clouds.
    pub faces: Vec<[usize; 4]>,
    pub regression_gap: Vec<f64>,
    pub singular: Vec<bool>,
    pub diagnostics: Vec<String>,
}

/// Threshold on `|det(u S₁ - I)|` below which a vertex is flagged singular.
pub const SINGULAR_TOL: f64 = 1e-6;

fn coord_name(i: usize) -> String {
    match i {
        0 => "x".into(),
        1 => "y".into(),
        2 => "z".into(),
        3 => "w".into(),
        _ => format!("x{i}"),
    }
}

fn num(v: f64) -> String {
    if v.is_nan() {
        "nan".into()
    } else {
        format!("{v:.17e}")
    }
}

impl Mesh {
    /// Wavefront OBJ; the regression field is written as comment lines.
    pub fn to_obj(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "# vertices {} faces {}", self.vertices.len(), self.faces.len());
        for v in &self.vertices {
            let cs: Vec<String> = v.iter().map(|x| num(*x)).collect();
            let _ = writeln!(s, "v {}", cs.join(" "));
        }
        for (i, (g, sing)) in self.regression_gap.iter().zip(&self.singular).enumerate() {
            let _ = writeln!(s, "# regression_gap {} {} {}", i + 1, num(*g), *sing as u8);
        }
        for f in &self.faces {
            let _ = writeln!(s, "f {} {} {} {}", f[0] + 1, f[1] + 1, f[2] + 1, f[3] + 1);
        }
        s
    }

    /// ASCII PLY point cloud with `regression_gap` and `singular` properties.
    pub fn to_ply(&self) -> String {
        let mut s = String::new();
        s.push_str("ply\nformat ascii 1.0\n");
        let _ = writeln!(s, "element vertex {}", self.vertices.len());
        for i in 0..self.dim {
            let _ = writeln!(s, "property double {}", coord_name(i));
        }
        s.push_str("property double regression_gap\nproperty uchar singular\n");
        if !self.faces.is_empty() {
            let _ = writeln!(s, "element face {}", self.faces.len());
            s.push_str("property list uchar int vertex_indices\n");
        }
        s.push_str("end_header\n");
        for ((v, g), sing) in self.vertices.iter().zip(&self.regression_gap).zip(&self.singular) {
            let cs: Vec<String> = v.iter().map(|x| num(*x)).collect();
            let _ = writeln!(s, "{} {} {}", cs.join(" "), num(*g), *sing as u8);
        }
        for f in &self.faces {
            let _ = writeln!(s, "4 {} {} {} {}", f[0], f[1], f[2], f[3]);
        }
        s
    }

    /// One row per vertex: parameters, coordinates, gap, flag.
    pub fn to_csv(&self) -> String {
        let mut s = String::new();
        let np = self.params.first().map_or(0, |p| p.len());
        let mut header: Vec<String> = (0..np.saturating_sub(1)).map(|i| format!("t{}", i + 1)).collect();
        header.push("u".into());
        header.extend((0..self.dim).map(coord_name));
        header.push("regression_gap".into());
        header.push("singular".into());
        let _ = writeln!(s, "{}", header.join(","));
        for i in 0..self.vertices.len() {
            let mut row: Vec<String> = self.params[i].iter().map(|x| num(*x)).collect();
            row.extend(self.vertices[i].iter().map(|x| num(*x)));
            row.push(num(self.regression_gap[i]));
            row.push((self.singular[i] as u8).to_string());
            let _ = writeln!(s, "{}", row.join(","));
        }
        s
    }
}
