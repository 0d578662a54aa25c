use meshsplat::render::OrthoCamera;
use meshsplat::{FlatGaussian, Result, Vec3};

const MARGIN: f64 = 1.1;

/// Camera looking along `forward` that frames every Gaussian with a small margin.
///
/// The view keeps the pixel aspect ratio. Explicit `position` and `view_width`
/// override the fitted values.
pub fn fit(
    gaussians: &[FlatGaussian],
    forward: Vec3,
    up: Vec3,
    pixels: (usize, usize),
    position: Option<Vec3>,
    view_width: Option<f64>,
) -> Result<OrthoCamera> {
    let probe = OrthoCamera::look_along(Vec3::zeros(), forward, up, (1.0, 1.0), pixels)?;
    let (right, up, back) = (probe.right(), probe.up(), -probe.forward());

    let mut lo = Vec3::repeat(f64::INFINITY);
    let mut hi = Vec3::repeat(f64::NEG_INFINITY);
    for g in gaussians {
        let reach = g.scales[0].max(g.scales[1]) * 3.0;
        let p = Vec3::new(right.dot(&g.center), up.dot(&g.center), back.dot(&g.center));
        lo = lo.inf(&(p - Vec3::repeat(reach)));
        hi = hi.sup(&(p + Vec3::repeat(reach)));
    }
    if gaussians.is_empty() {
        lo = Vec3::repeat(-1.0);
        hi = Vec3::repeat(1.0);
    }

    let aspect = pixels.1 as f64 / pixels.0.max(1) as f64;
    let extent = hi - lo;
    let fitted = (extent.x.max(extent.y / aspect) * MARGIN).max(1e-6);
    let vw = view_width.unwrap_or(fitted);
    let mid = (lo + hi) * 0.5;
    let fitted_position = right * mid.x + up * mid.y + back * (hi.z + 1.0);
    OrthoCamera::look_along(
        position.unwrap_or(fitted_position),
        forward,
        up,
        (vw, vw * aspect),
        pixels,
    )
}
