use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;
use std::time::Instant;

use meshsplat::bench::{self, BenchConfig};
use meshsplat::io::{load_scene, load_soup, save_scene, save_soup, sidecar_path, FlattenReport};
use meshsplat::meshio::{load_mesh, sample_surface, validate_edit_pair};
use meshsplat::model::{decode_soup, encode_soup};
use meshsplat::propagate::propagate_soup;
use meshsplat::render::{read_image, render as render_scene, write_image};
use meshsplat::surface_prior::{normal_loss, surface_opacity};
use meshsplat::{AnalyticSdf, CentroidIndex, Error, OpacityParams, Result};

use crate::{camera, BenchArgs, PropagateArgs, RenderArgs, SampleArgs, ValidateArgs};

pub struct Output {
    pub quiet: bool,
}

impl Output {
    fn line(&self, s: impl AsRef<str>) {
        if !self.quiet {
            println!("{}", s.as_ref());
        }
    }
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Error::io(path, e))
}

fn warn_flatness(out: &Output, report: &FlattenReport) {
    if let Some((index, ratio)) = report.poorly_flat.first() {
        out.line(format!(
            "warning: {} kernels are not flat (first: #{index}, scale ratio {ratio:.3})",
            report.poorly_flat.len()
        ));
    }
}

pub fn encode(out: &Output, scene: &Path, soup: &Path) -> Result<()> {
    let start = Instant::now();
    let (gaussians, report) = load_scene(scene)?;
    warn_flatness(out, &report);
    let triangles = encode_soup(&gaussians)?;
    save_soup(&triangles, soup)?;
    out.line(format!(
        "encoded N={} Gaussians in {:.3} s",
        triangles.len(),
        start.elapsed().as_secs_f64()
    ));
    Ok(())
}

pub fn decode(out: &Output, soup: &Path, scene: &Path) -> Result<()> {
    let start = Instant::now();
    let triangles = load_soup(soup)?;
    let gaussians = decode_soup(&triangles)?;
    save_scene(&gaussians, scene)?;
    out.line(format!(
        "decoded N={} Gaussians in {:.3} s",
        gaussians.len(),
        start.elapsed().as_secs_f64()
    ));
    Ok(())
}

pub fn propagate(out: &Output, args: &PropagateArgs) -> Result<()> {
    let soup = load_soup(&args.soup)?;
    let original = load_mesh(&args.original)?;
    let edited = load_mesh(&args.edited)?;

    let start = Instant::now();
    validate_edit_pair(&original, &edited)?;
    let index = CentroidIndex::build(&original)?;
    let (moved, report) = propagate_soup(&soup, &original, &edited, &index)?;
    let seconds = start.elapsed().as_secs_f64();

    if let Some(path) = &args.out {
        save_soup(&moved, path)?;
    }
    if let Some(path) = &args.scene {
        save_scene(&decode_soup(&moved)?, path)?;
    }
    if let Some(path) = &args.report {
        let mut w = create(path)?;
        report
            .write_table(&mut w)
            .and_then(|_| w.flush())
            .map_err(|e| Error::io(path, e))?;
    }
    if !out.quiet {
        print!("{}", report.summary());
    }
    out.line("Vertices\tFaces\tTime [s]");
    out.line(format!(
        "{}\t{}\t{seconds:.6}",
        original.vertex_count(),
        original.face_count()
    ));
    Ok(())
}

pub fn sample(out: &Output, args: &SampleArgs) -> Result<()> {
    let mesh = load_mesh(&args.mesh)?;
    let sdf = args.sdf.as_ref().map(AnalyticSdf::load).transpose()?;
    let params = OpacityParams::new(args.beta)?.normalized(args.normalize);
    let start = Instant::now();

    let is_scene = args
        .out
        .extension()
        .is_some_and(|e| e.eq_ignore_ascii_case("ply"));
    if is_scene {
        let spacing = (mesh.area() / args.n.max(1) as f64).sqrt();
        let mut gaussians = bench::surface_gaussians(&mesh, args.n, 0.5 * spacing, args.seed)?;
        if let Some(sdf) = &sdf {
            for g in &mut gaussians {
                g.appearance.opacity = surface_opacity(sdf, &g.center, &params).min(1.0);
            }
        }
        save_scene(&gaussians, &args.out)?;
    } else {
        let samples = sample_surface(&mesh, args.n, args.seed)?;
        let path = &args.out;
        let mut w = create(path)?;
        let mut write = || -> std::io::Result<()> {
            write!(w, "x\ty\tz\tnx\tny\tnz\tface")?;
            if sdf.is_some() {
                write!(w, "\tsdf\topacity\tnormal_loss")?;
            }
            writeln!(w)?;
            for s in &samples {
                let (p, n) = (s.point, s.normal);
                write!(
                    w,
                    "{}\t{}\t{}\t{}\t{}\t{}\t{}",
                    p.x, p.y, p.z, n.x, n.y, n.z, s.face_id
                )?;
                if let Some(sdf) = &sdf {
                    let d = sdf.eval(&p);
                    let loss = sdf
                        .gradient(&p)
                        .try_normalize(1e-12)
                        .and_then(|g| normal_loss(&n, &g).ok())
                        .unwrap_or(f64::NAN);
                    write!(w, "\t{d}\t{}\t{loss}", surface_opacity(sdf, &p, &params))?;
                }
                writeln!(w)?;
            }
            w.flush()
        };
        write().map_err(|e| Error::io(path, e))?;
    }
    out.line(format!(
        "sampled {} points in {:.3} s",
        args.n,
        start.elapsed().as_secs_f64()
    ));
    Ok(())
}

pub fn render(out: &Output, args: &RenderArgs) -> Result<()> {
    let (gaussians, report) = load_scene(&args.scene)?;
    warn_flatness(out, &report);
    let cam = camera::fit(
        &gaussians,
        args.forward,
        args.up,
        (args.width, args.height),
        args.position,
        args.view_width,
    )?;
    let start = Instant::now();
    let image = render_scene(&gaussians, &cam, args.background.into())?;
    write_image(&image, &args.out)?;
    out.line(format!(
        "rendered {} Gaussians to {}x{} in {:.3} s",
        gaussians.len(),
        image.width,
        image.height,
        start.elapsed().as_secs_f64()
    ));
    Ok(())
}

enum Kind {
    Scene,
    Soup,
    Mesh,
    Image,
    Sdf,
}

fn detect(path: &Path) -> Result<Kind> {
    let ext = path
        .extension()
        .and_then(|e| e.to_str())
        .map(str::to_ascii_lowercase)
        .unwrap_or_default();
    match ext.as_str() {
        "ppm" => return Ok(Kind::Image),
        "sdf" => return Ok(Kind::Sdf),
        _ => {}
    }
    if sidecar_path(path).exists() {
        return Ok(Kind::Soup);
    }
    if ext == "ply" {
        // Scenes are told apart from meshes by their appearance properties.
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let mut header = Vec::new();
        let mut reader = BufReader::new(file).take(64 * 1024);
        loop {
            let before = header.len();
            reader
                .read_until(b'\n', &mut header)
                .map_err(|e| Error::io(path, e))?;
            if header.len() == before || header[before..].starts_with(b"end_header") {
                break;
            }
        }
        if String::from_utf8_lossy(&header).contains(" f_dc_0") {
            return Ok(Kind::Scene);
        }
    }
    Ok(Kind::Mesh)
}

pub fn validate(out: &Output, args: &ValidateArgs) -> Result<()> {
    let path = &args.input;
    match detect(path)? {
        Kind::Scene => {
            let (gaussians, report) = load_scene(path)?;
            for (i, g) in gaussians.iter().enumerate() {
                g.check()
                    .map_err(|reason| Error::InvalidGaussian { index: i, reason })?;
            }
            out.line(format!("scene: {} Gaussians", gaussians.len()));
            out.line(format!("poorly flat kernels: {}", report.poorly_flat.len()));
        }
        Kind::Soup => {
            let soup = load_soup(path)?;
            decode_soup(&soup)?;
            out.line(format!("soup: {} triangles", soup.len()));
        }
        Kind::Mesh => {
            let mesh = load_mesh(path)?;
            let degenerate = mesh.iter_faces().filter(|f| f.is_degenerate()).count();
            out.line(format!(
                "mesh: {} vertices, {} faces",
                mesh.vertex_count(),
                mesh.face_count()
            ));
            out.line(format!("degenerate faces: {degenerate}"));
            out.line(format!("surface area: {}", mesh.area()));
            if let Some(original) = &args.against {
                validate_edit_pair(&load_mesh(original)?, &mesh)?;
                out.line("valid edit of the reference mesh");
            }
        }
        Kind::Image => {
            let image = read_image(path)?;
            out.line(format!("image: {}x{}", image.width, image.height));
        }
        Kind::Sdf => {
            let sdf = AnalyticSdf::load(path)?;
            out.line(format!("sdf: {sdf:?}"));
        }
    }
    Ok(())
}

pub fn bench(out: &Output, args: &BenchArgs) -> Result<()> {
    let config = BenchConfig {
        face_counts: args.faces.clone(),
        soup_size: args.soup_size,
        repeats: args.repeats,
        twist: args.twist,
        seed: args.seed,
    };
    out.line(format!("soup: {} triangles", config.soup_size));
    out.line("Vertices\tFaces\tTime [s]");
    bench::run(&config, |row| {
        out.line(format!(
            "{}\t{}\t{:.6}",
            row.vertices, row.faces, row.seconds
        ))
    })?;
    Ok(())
}
