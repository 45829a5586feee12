//! Graph scenes: a hypersurface `z = f(t, y)` and a submanifold `y = g(t)`.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::expr::Expr;

/// Hypersurface `M = {z = f(t, y)}` of `R^{n+2}` together with `N = {y = g(t)} ⊂ M`.
#[derive(Debug, Clone)]
pub struct Scene {
    n: usize,
    names: Vec<String>,
    f: Expr,
    g: Expr,
    f_text: String,
    g_text: String,
    comments: Vec<String>,
    custom_names: bool,
    df: Vec<Expr>,
    ddf: Vec<Vec<Expr>>,
    dg: Vec<Expr>,
}

/// Default variable names: `t, y` for curves, `t1..tn, y` otherwise.
pub fn default_names(n: usize) -> Vec<String> {
    let mut v: Vec<String> = if n == 1 {
        vec!["t".into()]
    } else {
        (1..=n).map(|i| format!("t{i}")).collect()
    };
    v.push("y".into());
    v
}

pub fn build_scene(f_text: &str, g_text: &str, n: usize) -> Result<Scene> {
    Scene::new(f_text, g_text, n, None)
}

impl Scene {
    pub fn new(f_text: &str, g_text: &str, n: usize, names: Option<Vec<String>>) -> Result<Scene> {
        if n == 0 {
            return Err(Error::Dimension("n must be at least 1".into()));
        }
        let custom_names = names.is_some();
        let names = names.unwrap_or_else(|| default_names(n));
        if names.len() != n + 1 {
            return Err(Error::Dimension(format!(
                "expected {} variable names, got {}",
                n + 1,
                names.len()
            )));
        }
        for (i, a) in names.iter().enumerate() {
            if a.is_empty()
                || !a.chars().next().is_some_and(|c| c.is_ascii_alphabetic() || c == '_')
                || !a.chars().all(|c| c.is_ascii_alphanumeric() || c == '_')
            {
                return Err(Error::Dimension(format!("invalid variable name `{a}`")));
            }
            if names[..i].contains(a) {
                return Err(Error::Dimension(format!("duplicate variable name `{a}`")));
            }
        }
        let refs: Vec<&str> = names.iter().map(String::as_str).collect();
        let f = Expr::parse(f_text, &refs)?;
        let g_full = Expr::parse(g_text, &refs)?;
        if g_full.uses(n) {
            return Err(Error::Dimension(format!(
                "g must depend only on {}, but it references {}",
                refs[..n].join(", "),
                refs[n]
            )));
        }
        let g = Expr::parse(g_text, &refs[..n])?;
        let df: Vec<Expr> = (0..=n).map(|a| f.diff(a)).collect();
        let ddf: Vec<Vec<Expr>> = (0..=n)
            .map(|a| (0..=n).map(|b| df[a].diff(b)).collect())
            .collect();
        let dg: Vec<Expr> = (0..n).map(|i| g.diff(i)).collect();
        Ok(Scene {
            n,
            names,
            f,
            g,
            f_text: f_text.trim().to_string(),
            g_text: g_text.trim().to_string(),
            comments: Vec::new(),
            custom_names,
            df,
            ddf,
            dg,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Ambient dimension `n + 2`.
    pub fn ambient(&self) -> usize {
        self.n + 2
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn f(&self) -> &Expr {
        &self.f
    }

    pub fn g(&self) -> &Expr {
        &self.g
    }

    pub fn f_text(&self) -> &str {
        &self.f_text
    }

    pub fn g_text(&self) -> &str {
        &self.g_text
    }

    /// `∂f/∂w_a` with `w = (t, y)`.
    pub fn df(&self, a: usize) -> &Expr {
        &self.df[a]
    }

    pub fn ddf(&self, a: usize, b: usize) -> &Expr {
        &self.ddf[a][b]
    }

    pub fn dg(&self, i: usize) -> &Expr {
        &self.dg[i]
    }

    pub fn comments(&self) -> &[String] {
        &self.comments
    }

    pub fn with_comments(mut self, comments: Vec<String>) -> Scene {
        self.comments = comments;
        self
    }

    /// Point `φ(t) = (t, g(t), f(t, g(t)))`.
    pub fn immersion(&self, t: &[f64]) -> Result<Vec<f64>> {
        let y = self.g.eval_f64(t)?;
        let mut w = t.to_vec();
        w.push(y);
        let z = self.f.eval_f64(&w)?;
        w.push(z);
        Ok(w)
    }

    pub fn check_point(&self, t: &[f64]) -> Result<()> {
        if t.len() != self.n {
            return Err(Error::Dimension(format!(
                "point has {} coordinates, scene has n = {}",
                t.len(),
                self.n
            )));
        }
        if t.iter().any(|x| !x.is_finite()) {
            return Err(Error::Invalid("point coordinates must be finite".into()));
        }
        Ok(())
    }

    /// Parses the plain-text scene format.
    pub fn parse_file(text: &str) -> Result<Scene> {
        #[derive(PartialEq)]
        enum Section {
            None,
            Hyper,
            Sub,
        }
        let mut section = Section::None;
        let mut comments = Vec::new();
        let (mut n, mut f, mut g, mut vars) = (None, None, None, None);
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(c) = line.strip_prefix('#') {
                comments.push(c.trim().to_string());
                continue;
            }
            let bad = |message: String| Error::SceneFile {
                line: line_no,
                message,
            };
            if line.starts_with('[') {
                section = match line {
                    "[hypersurface]" => Section::Hyper,
                    "[submanifold]" => Section::Sub,
                    other => return Err(bad(format!("unknown section {other}"))),
                };
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(bad("expected `key = value`".into()));
            };
            let (key, value) = (key.trim(), value.trim());
            let slot = match (&section, key) {
                (Section::Hyper, "n") => &mut n,
                (Section::Hyper, "f") => &mut f,
                (Section::Hyper, "vars") => &mut vars,
                (Section::Sub, "g") => &mut g,
                (Section::None, _) => return Err(bad("key outside of any section".into())),
                (_, k) => return Err(bad(format!("unexpected key `{k}` in this section"))),
            };
            if slot.is_some() {
                return Err(bad(format!("duplicate key `{key}`")));
            }
            *slot = Some((value.to_string(), line_no));
        }
        let missing = |what: &str| Error::SceneFile {
            line: 0,
            message: format!("missing {what}"),
        };
        let (n_text, n_line) = n.ok_or_else(|| missing("`n` in [hypersurface]"))?;
        let n: usize = n_text.parse().map_err(|_| Error::SceneFile {
            line: n_line,
            message: format!("`n` must be a positive integer, got `{n_text}`"),
        })?;
        if n == 0 || n > 8 {
            return Err(Error::SceneFile {
                line: n_line,
                message: format!("`n` must be between 1 and 8, got {n}"),
            });
        }
        let (f, _) = f.ok_or_else(|| missing("`f` in [hypersurface]"))?;
        let (g, _) = g.ok_or_else(|| missing("`g` in [submanifold]"))?;
        let names = vars.map(|(v, _)| v.split(',').map(|s| s.trim().to_string()).collect());
        Ok(Scene::new(&f, &g, n, names)?.with_comments(comments))
    }

    /// Serializes to the scene format; parsing the result yields an equal scene.
    pub fn to_file(&self) -> String {
        let mut s = String::new();
        for c in &self.comments {
            let _ = writeln!(s, "# {c}");
        }
        s.push_str("[hypersurface]\n");
        let _ = writeln!(s, "n = {}", self.n);
        if self.custom_names {
            let _ = writeln!(s, "vars = {}", self.names.join(", "));
        }
        let _ = writeln!(s, "f = {}", self.f_text);
        s.push_str("\n[submanifold]\n");
        let _ = writeln!(s, "g = {}", self.g_text);
        s
    }
}

/// One entry of the bundled scene catalog.
#[derive(Debug, Clone, Copy)]
pub struct Bundled {
    pub name: &'static str,
    pub source: &'static str,
    /// Envelope parameter `u` of the distinguished point, when there is one.
    pub u: Option<f64>,
    /// Expected germ class at `(t = 0, u)`.
    pub class: Option<&'static str>,
}

pub const BUNDLED: &[Bundled] = &[
    Bundled { name: "a2", source: include_str!("../scenes/a2.scene"), u: Some(1.0), class: Some("A2") },
    Bundled { name: "a3", source: include_str!("../scenes/a3.scene"), u: Some(1.0), class: Some("A3") },
    Bundled { name: "a4", source: include_str!("../scenes/a4.scene"), u: Some(1.0), class: Some("A4") },
    Bundled { name: "a5", source: include_str!("../scenes/a5.scene"), u: Some(1.0), class: Some("A5") },
    Bundled { name: "d4", source: include_str!("../scenes/d4.scene"), u: Some(1.0), class: Some("D4") },
    Bundled { name: "d5", source: include_str!("../scenes/d5.scene"), u: Some(1.0), class: Some("D5") },
    Bundled { name: "e6", source: include_str!("../scenes/e6.scene"), u: Some(1.0), class: Some("E6") },
    Bundled { name: "e7", source: include_str!("../scenes/e7.scene"), u: Some(1.0), class: Some("E7") },
    Bundled { name: "e8", source: include_str!("../scenes/e8.scene"), u: Some(1.0), class: Some("E8") },
    Bundled { name: "monkey", source: include_str!("../scenes/monkey.scene"), u: None, class: None },
    Bundled { name: "nonflat", source: include_str!("../scenes/nonflat.scene"), u: None, class: None },
    Bundled { name: "hyperquadric", source: include_str!("../scenes/hyperquadric.scene"), u: None, class: None },
];

pub fn bundled(name: &str) -> Option<&'static Bundled> {
    BUNDLED.iter().find(|b| b.name == name)
}

pub fn load_bundled(name: &str) -> Result<Scene> {
    let b = bundled(name).ok_or_else(|| Error::Invalid(format!("no bundled scene `{name}`")))?;
    Scene::parse_file(b.source)
}
