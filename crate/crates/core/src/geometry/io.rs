//! Readers and writers for meshes and point clouds.
//!
//! Volume meshes: VTK legacy ASCII unstructured grids (linear tets only) and
//! a small native text format:
//!
//! ```text
//! tetmesh v1
//! <num_nodes> <num_tets>
//! x y z            (num_nodes lines)
//! i j k l          (num_tets lines, 0-based)
//! ```
//!
//! Point clouds: whitespace-separated `.xyz`, ASCII `.ply`, and `.csv` with a
//! header naming `x,y,z` (and optionally `label`).

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::{PointCloud, Vec3, VolumeMesh};
use crate::error::{Error, Result};

const VTK_TETRA: u32 = 10;
const NATIVE_MAGIC: &str = "tetmesh v1";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MeshFormat {
    Vtk,
    Native,
}

impl MeshFormat {
    /// `.vtk` selects VTK; anything else the native format.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(ext) if ext.eq_ignore_ascii_case("vtk") => MeshFormat::Vtk,
            _ => MeshFormat::Native,
        }
    }

    pub fn extension(self) -> &'static str {
        match self {
            MeshFormat::Vtk => "vtk",
            MeshFormat::Native => "tet",
        }
    }
}

fn read_to_string(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn write_string(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

/// Loads a volume mesh, detecting the format from the file contents.
pub fn load_volume_mesh(path: impl AsRef<Path>) -> Result<VolumeMesh> {
    let path = path.as_ref();
    let text = read_to_string(path)?;
    parse_volume_mesh(&text)
}

pub fn parse_volume_mesh(text: &str) -> Result<VolumeMesh> {
    let first = text.lines().find(|l| !l.trim().is_empty()).unwrap_or("");
    if first.trim() == NATIVE_MAGIC {
        parse_native(text)
    } else if first.trim_start().starts_with("# vtk DataFile") {
        parse_vtk(text)
    } else {
        Err(Error::parse(
            "mesh header",
            format!("unrecognized first line {first:?}"),
        ))
    }
}

pub fn save_volume_mesh(path: impl AsRef<Path>, mesh: &VolumeMesh, format: MeshFormat) -> Result<()> {
    let text = match format {
        MeshFormat::Vtk => format_vtk(mesh, None),
        MeshFormat::Native => format_native(mesh),
    };
    write_string(path.as_ref(), &text)
}

/// VTK output with an optional per-node displacement vector attached as
/// point data.
pub fn save_vtk_with_displacement(path: impl AsRef<Path>, mesh: &VolumeMesh, displacement: &[f64]) -> Result<()> {
    write_string(path.as_ref(), &format_vtk(mesh, Some(displacement)))
}

fn parse_f64(tok: &str, context: &str) -> Result<f64> {
    let v: f64 = tok
        .parse()
        .map_err(|_| Error::parse(context, format!("expected a number, found {tok:?}")))?;
    if !v.is_finite() {
        return Err(Error::parse(context, format!("non-finite value {tok:?}")));
    }
    Ok(v)
}

fn parse_usize(tok: &str, context: &str) -> Result<usize> {
    tok.parse()
        .map_err(|_| Error::parse(context, format!("expected a non-negative integer, found {tok:?}")))
}

fn parse_native(text: &str) -> Result<VolumeMesh> {
    let mut lines = text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'));
    lines.next(); // magic
    let header = lines
        .next()
        .ok_or_else(|| Error::parse("native mesh", "missing count line"))?;
    let counts: Vec<&str> = header.split_whitespace().collect();
    if counts.len() != 2 {
        return Err(Error::parse("native mesh", format!("bad count line {header:?}")));
    }
    let n = parse_usize(counts[0], "node count")?;
    let nt = parse_usize(counts[1], "tet count")?;

    let mut nodes = Vec::with_capacity(n);
    for i in 0..n {
        let line = lines
            .next()
            .ok_or_else(|| Error::parse("native mesh", format!("expected {n} nodes, found {i}")))?;
        let toks: Vec<&str> = line.split_whitespace().collect();
        if toks.len() != 3 {
            return Err(Error::parse(
                format!("node {i}"),
                format!("expected 3 coordinates in {line:?}"),
            ));
        }
        let ctx = format!("node {i}");
        nodes.push(Vec3::new(
            parse_f64(toks[0], &ctx)?,
            parse_f64(toks[1], &ctx)?,
            parse_f64(toks[2], &ctx)?,
        ));
    }
    let mut tets = Vec::with_capacity(nt);
    for t in 0..nt {
        let line = lines
            .next()
            .ok_or_else(|| Error::parse("native mesh", format!("expected {nt} tets, found {t}")))?;
        let toks: Vec<&str> = line.split_whitespace().collect();
        if toks.len() != 4 {
            return Err(Error::parse(
                format!("tet {t}"),
                format!("expected 4 indices in {line:?}"),
            ));
        }
        let ctx = format!("tet {t}");
        tets.push([
            parse_usize(toks[0], &ctx)?,
            parse_usize(toks[1], &ctx)?,
            parse_usize(toks[2], &ctx)?,
            parse_usize(toks[3], &ctx)?,
        ]);
    }
    if let Some(extra) = lines.next() {
        return Err(Error::parse("native mesh", format!("trailing content {extra:?}")));
    }
    VolumeMesh::new(nodes, tets)
}

fn format_native(mesh: &VolumeMesh) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{NATIVE_MAGIC}");
    let _ = writeln!(out, "{} {}", mesh.num_nodes(), mesh.tets().len());
    for p in mesh.nodes() {
        let _ = writeln!(out, "{:?} {:?} {:?}", p.x, p.y, p.z);
    }
    for t in mesh.tets() {
        let _ = writeln!(out, "{} {} {} {}", t[0], t[1], t[2], t[3]);
    }
    out
}

/// Token stream over a legacy VTK body, skipping the two free-form header
/// lines (version and title).
struct VtkTokens<'a> {
    toks: std::iter::Peekable<std::vec::IntoIter<&'a str>>,
}

impl<'a> VtkTokens<'a> {
    fn next(&mut self, what: &str) -> Result<&'a str> {
        self.toks
            .next()
            .ok_or_else(|| Error::parse("VTK", format!("unexpected end of file reading {what}")))
    }

    fn expect(&mut self, keyword: &str) -> Result<()> {
        let tok = self.next(keyword)?;
        if tok.eq_ignore_ascii_case(keyword) {
            Ok(())
        } else {
            Err(Error::parse("VTK", format!("expected {keyword}, found {tok:?}")))
        }
    }
}

fn parse_vtk(text: &str) -> Result<VolumeMesh> {
    let mut lines = text.lines();
    lines.next(); // "# vtk DataFile Version x.y"
    lines.next(); // title
    let body: Vec<&str> = lines.flat_map(str::split_whitespace).collect();
    let mut t = VtkTokens {
        toks: body.into_iter().peekable(),
    };

    let encoding = t.next("encoding")?;
    if !encoding.eq_ignore_ascii_case("ASCII") {
        return Err(Error::parse(
            "VTK",
            format!("only ASCII files are supported, found {encoding}"),
        ));
    }
    t.expect("DATASET")?;
    let kind = t.next("dataset type")?;
    if !kind.eq_ignore_ascii_case("UNSTRUCTURED_GRID") {
        return Err(Error::parse("VTK", format!("expected UNSTRUCTURED_GRID, found {kind}")));
    }

    let mut nodes: Option<Vec<Vec3>> = None;
    let mut cells: Option<Vec<Vec<usize>>> = None;
    let mut types: Option<Vec<u32>> = None;
    while let Some(section) = t.toks.next() {
        match section.to_ascii_uppercase().as_str() {
            "POINTS" => {
                let n = parse_usize(t.next("point count")?, "POINTS")?;
                let _dtype = t.next("point data type")?;
                let mut pts = Vec::with_capacity(n);
                for i in 0..n {
                    let ctx = format!("point {i}");
                    let x = parse_f64(t.next(&ctx)?, &ctx)?;
                    let y = parse_f64(t.next(&ctx)?, &ctx)?;
                    let z = parse_f64(t.next(&ctx)?, &ctx)?;
                    pts.push(Vec3::new(x, y, z));
                }
                nodes = Some(pts);
            }
            "CELLS" => {
                let nc = parse_usize(t.next("cell count")?, "CELLS")?;
                let _size = parse_usize(t.next("cell list size")?, "CELLS")?;
                let mut list = Vec::with_capacity(nc);
                for c in 0..nc {
                    let ctx = format!("cell {c}");
                    let k = parse_usize(t.next(&ctx)?, &ctx)?;
                    let mut ids = Vec::with_capacity(k);
                    for _ in 0..k {
                        ids.push(parse_usize(t.next(&ctx)?, &ctx)?);
                    }
                    list.push(ids);
                }
                cells = Some(list);
            }
            "CELL_TYPES" => {
                let nc = parse_usize(t.next("cell type count")?, "CELL_TYPES")?;
                let mut list = Vec::with_capacity(nc);
                for c in 0..nc {
                    let tok = t.next("cell type")?;
                    let ty: u32 = tok
                        .parse()
                        .map_err(|_| Error::parse(format!("cell type {c}"), format!("bad cell type {tok:?}")))?;
                    list.push(ty);
                }
                types = Some(list);
            }
            // Attribute sections follow the geometry; nothing in them is needed.
            "POINT_DATA" | "CELL_DATA" | "FIELD" | "METADATA" => break,
            other => {
                return Err(Error::parse("VTK", format!("unexpected section {other:?}")));
            }
        }
    }

    let nodes = nodes.ok_or_else(|| Error::parse("VTK", "missing POINTS section"))?;
    let cells = cells.ok_or_else(|| Error::parse("VTK", "missing CELLS section"))?;
    let types = types.ok_or_else(|| Error::parse("VTK", "missing CELL_TYPES section"))?;
    if types.len() != cells.len() {
        return Err(Error::parse(
            "VTK",
            format!("{} cells but {} cell types", cells.len(), types.len()),
        ));
    }
    let mut tets = Vec::with_capacity(cells.len());
    for (ids, &ty) in cells.iter().zip(&types) {
        if ty != VTK_TETRA {
            return Err(Error::UnsupportedCellType(ty));
        }
        if ids.len() != 4 {
            return Err(Error::parse("VTK", format!("tetra cell with {} ids", ids.len())));
        }
        tets.push([ids[0], ids[1], ids[2], ids[3]]);
    }
    VolumeMesh::new(nodes, tets)
}

fn format_vtk(mesh: &VolumeMesh, displacement: Option<&[f64]>) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "# vtk DataFile Version 3.0");
    let _ = writeln!(out, "elastic-register volume mesh");
    let _ = writeln!(out, "ASCII");
    let _ = writeln!(out, "DATASET UNSTRUCTURED_GRID");
    let _ = writeln!(out, "POINTS {} double", mesh.num_nodes());
    for p in mesh.nodes() {
        let _ = writeln!(out, "{:?} {:?} {:?}", p.x, p.y, p.z);
    }
    let nt = mesh.tets().len();
    let _ = writeln!(out, "CELLS {} {}", nt, 5 * nt);
    for t in mesh.tets() {
        let _ = writeln!(out, "4 {} {} {} {}", t[0], t[1], t[2], t[3]);
    }
    let _ = writeln!(out, "CELL_TYPES {nt}");
    for _ in 0..nt {
        let _ = writeln!(out, "{VTK_TETRA}");
    }
    if let Some(u) = displacement {
        let _ = writeln!(out, "POINT_DATA {}", mesh.num_nodes());
        let _ = writeln!(out, "VECTORS displacement double");
        for d in u.chunks_exact(3) {
            let _ = writeln!(out, "{:?} {:?} {:?}", d[0], d[1], d[2]);
        }
    }
    out
}

/// Loads `.xyz`, `.ply` (ASCII) or `.csv`; the extension picks the reader.
pub fn load_point_cloud(path: impl AsRef<Path>) -> Result<PointCloud> {
    let path = path.as_ref();
    let text = read_to_string(path)?;
    match path
        .extension()
        .and_then(|e| e.to_str())
        .map(str::to_ascii_lowercase)
        .as_deref()
    {
        Some("ply") => parse_ply(&text),
        Some("csv") => parse_csv_cloud(&text),
        _ => parse_xyz(&text),
    }
}

pub fn parse_xyz(text: &str) -> Result<PointCloud> {
    let mut pts = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let toks: Vec<&str> = line.split_whitespace().collect();
        let ctx = format!("xyz line {}", lineno + 1);
        if toks.len() < 3 {
            return Err(Error::parse(ctx, format!("expected 3 coordinates in {line:?}")));
        }
        pts.push(Vec3::new(
            parse_f64(toks[0], &ctx)?,
            parse_f64(toks[1], &ctx)?,
            parse_f64(toks[2], &ctx)?,
        ));
    }
    PointCloud::new(pts)
}

fn parse_ply(text: &str) -> Result<PointCloud> {
    let mut lines = text.lines();
    if lines.next().map(str::trim) != Some("ply") {
        return Err(Error::parse("PLY", "missing 'ply' magic"));
    }
    // (element name, count, property names)
    let mut elements: Vec<(String, usize, Vec<String>)> = Vec::new();
    let mut header_done = false;
    for line in lines.by_ref() {
        let toks: Vec<&str> = line.split_whitespace().collect();
        match toks.as_slice() {
            ["format", fmt, ..] if *fmt != "ascii" => {
                return Err(Error::parse("PLY", format!("only ascii PLY is supported, found {fmt}")));
            }
            ["element", name, count] => {
                elements.push((name.to_string(), parse_usize(count, "PLY element")?, Vec::new()));
            }
            ["property", "list", ..] => {
                if let Some(e) = elements.last_mut() {
                    e.2.push("<list>".into());
                }
            }
            ["property", _ty, name] => {
                if let Some(e) = elements.last_mut() {
                    e.2.push(name.to_string());
                }
            }
            ["end_header"] => {
                header_done = true;
                break;
            }
            _ => {}
        }
    }
    if !header_done {
        return Err(Error::parse("PLY", "missing end_header"));
    }
    let mut pts = Vec::new();
    for (name, count, props) in &elements {
        if name != "vertex" {
            // Elements before the vertex block would need skipping; vertex
            // is conventionally first and everything after it is ignored.
            if pts.is_empty() {
                for _ in 0..*count {
                    lines.next();
                }
                continue;
            }
            break;
        }
        let col = |axis: &str| {
            props
                .iter()
                .position(|p| p == axis)
                .ok_or_else(|| Error::parse("PLY", format!("vertex has no {axis} property")))
        };
        let (ix, iy, iz) = (col("x")?, col("y")?, col("z")?);
        for i in 0..*count {
            let line = lines
                .next()
                .ok_or_else(|| Error::parse("PLY", format!("expected {count} vertices, found {i}")))?;
            let toks: Vec<&str> = line.split_whitespace().collect();
            let ctx = format!("PLY vertex {i}");
            let get = |k: usize| {
                toks.get(k)
                    .ok_or_else(|| Error::parse(ctx.clone(), "too few columns"))
                    .and_then(|t| parse_f64(t, &ctx))
            };
            pts.push(Vec3::new(get(ix)?, get(iy)?, get(iz)?));
        }
    }
    PointCloud::new(pts)
}

fn parse_csv_cloud(text: &str) -> Result<PointCloud> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header = lines
        .next()
        .ok_or(Error::EmptyCloud)?
        .split(',')
        .map(|h| h.trim().to_ascii_lowercase())
        .collect::<Vec<_>>();
    let col = |name: &str| header.iter().position(|h| h == name);
    let (ix, iy, iz) = match (col("x"), col("y"), col("z")) {
        (Some(x), Some(y), Some(z)) => (x, y, z),
        _ => return Err(Error::parse("CSV header", "expected columns x, y, z")),
    };
    let ilabel = col("label");
    let mut pts = Vec::new();
    let mut labels = Vec::new();
    for (row, line) in lines.enumerate() {
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        let ctx = format!("CSV row {}", row + 1);
        let get = |k: usize| {
            fields
                .get(k)
                .ok_or_else(|| Error::parse(ctx.clone(), "too few columns"))
                .and_then(|t| parse_f64(t, &ctx))
        };
        pts.push(Vec3::new(get(ix)?, get(iy)?, get(iz)?));
        if let Some(il) = ilabel {
            labels.push(fields.get(il).copied().unwrap_or("").to_string());
        }
    }
    if ilabel.is_some() {
        PointCloud::with_labels(pts, labels)
    } else {
        PointCloud::new(pts)
    }
}

/// Writes `.xyz`, `.ply` or `.csv` by extension (`.xyz` otherwise).
pub fn save_point_cloud(path: impl AsRef<Path>, cloud: &PointCloud) -> Result<()> {
    let path = path.as_ref();
    let mut out = String::new();
    match path.extension().and_then(|e| e.to_str()) {
        Some("ply") => {
            let _ = writeln!(out, "ply\nformat ascii 1.0");
            let _ = writeln!(out, "element vertex {}", cloud.len());
            let _ = writeln!(out, "property double x\nproperty double y\nproperty double z");
            let _ = writeln!(out, "end_header");
            for p in cloud.points() {
                let _ = writeln!(out, "{:?} {:?} {:?}", p.x, p.y, p.z);
            }
        }
        Some("csv") => {
            let _ = writeln!(out, "x,y,z");
            for p in cloud.points() {
                let _ = writeln!(out, "{:?},{:?},{:?}", p.x, p.y, p.z);
            }
        }
        _ => {
            for p in cloud.points() {
                let _ = writeln!(out, "{:?} {:?} {:?}", p.x, p.y, p.z);
            }
        }
    }
    write_string(path, &out)
}

/// `node,ux,uy,uz` rows for a flat `3n` nodal vector.
pub fn format_nodal_csv(values: &[f64], columns: [&str; 3]) -> String {
    let mut out = format!("node,{},{},{}\n", columns[0], columns[1], columns[2]);
    for (i, v) in values.chunks_exact(3).enumerate() {
        let _ = writeln!(out, "{i},{:?},{:?},{:?}", v[0], v[1], v[2]);
    }
    out
}

/// Inverse of [`format_nodal_csv`].
pub fn parse_nodal_csv(text: &str) -> Result<Vec<f64>> {
    let mut out = Vec::new();
    for (row, line) in text.lines().skip(1).filter(|l| !l.trim().is_empty()).enumerate() {
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        let ctx = format!("nodal CSV row {}", row + 1);
        if fields.len() != 4 {
            return Err(Error::parse(ctx, "expected node,x,y,z"));
        }
        if parse_usize(fields[0], &ctx)? != row {
            return Err(Error::parse(ctx, "node ids must be 0..n in order"));
        }
        for f in &fields[1..] {
            out.push(parse_f64(f, &ctx)?);
        }
    }
    Ok(out)
}

/// Reads a list of node indices, one per line or comma-separated; a
/// non-numeric first line is treated as a header.
pub fn load_node_list(path: impl AsRef<Path>) -> Result<Vec<usize>> {
    let path = path.as_ref();
    let text = read_to_string(path)?;
    let mut out = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        for tok in line
            .split(|c: char| c == ',' || c.is_whitespace())
            .filter(|t| !t.is_empty())
        {
            match tok.parse::<usize>() {
                Ok(v) => out.push(v),
                Err(_) if lineno == 0 => break,
                Err(_) => {
                    return Err(Error::parse(
                        format!("{} line {}", path.display(), lineno + 1),
                        format!("bad node index {tok:?}"),
                    ))
                }
            }
        }
    }
    Ok(out)
}
