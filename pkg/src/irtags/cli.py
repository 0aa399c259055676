"""``irtags`` command line.

Exit codes: 0 on success, 1 when nothing was detected or a round trip did
not recover its payload, 2 for usage and I/O errors.
"""

from __future__ import annotations

import json
import logging
import sys
from pathlib import Path

import click

from . import __version__
from .errors import IRTagsError
from .irsim.optics import Band, IlluminationModel, MaterialOptics, dump_optics, read_optics_file
from .meshops import Material, Placement, TriangleMesh, frame_at, load_stl, save_stl
from .tagcodes import Family, TagSpec

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


class Abort(click.ClickException):
    exit_code = EXIT_USAGE

    def show(self, file=None):
        click.echo(f"error: {self.format_message()}", err=True)


def _vec(text: str) -> tuple[float, float, float]:
    try:
        parts = tuple(float(x) for x in text.split(","))
    except ValueError:
        parts = ()
    if len(parts) != 3:
        raise click.BadParameter(f"expected x,y,z, got {text!r}")
    return parts


def _tag(aruco: int | None, qr: str | None, qr_hex: str | None, version: int, ecc: str) -> TagSpec:
    given = [x is not None for x in (aruco, qr, qr_hex)]
    if sum(given) != 1:
        raise click.UsageError("give exactly one of --aruco, --qr or --qr-hex")
    if aruco is not None:
        return TagSpec.aruco(aruco)
    payload = qr.encode("utf-8") if qr is not None else bytes.fromhex(qr_hex)
    return TagSpec.qr(payload, version, ecc)


def tag_options(f):
    for opt in reversed([
        click.option("--aruco", type=int, help="ArUco DICT_4X4_50 marker id."),
        click.option("--qr", help="QR payload text (UTF-8)."),
        click.option("--qr-hex", help="QR payload as hex bytes."),
        click.option("--qr-version", type=click.IntRange(1, 3), default=1, show_default=True),
        click.option("--ecc", type=click.Choice(["L", "M"]), default="L", show_default=True),
    ]):
        f = opt(f)
    return f


def embed_options(f):
    for opt in reversed([
        click.option("--mode", type=click.Choice(["single", "multi"]), default="multi", show_default=True),
        click.option("--color", type=click.Choice(["white", "black", "blue"]), default=None,
                     help="Code filament color (multi mode; default white)."),
        click.option("--anchor", default=None, help="Tag center near the surface, x,y,z in mm (default: top face center)."),
        click.option("--up", "up_hint", default="0,1,0", show_default=True, help="Tag up direction hint."),
        click.option("--width", "tag_width", type=float, default=12.0, show_default=True, help="Tag width in mm."),
        click.option("--t-shell", type=float, default=None, help="Shell thickness override in mm."),
        click.option("--t-code", type=float, default=None, help="Code thickness override in mm."),
        click.option("--quiet-zone", type=int, default=1, show_default=True, help="Light border in modules."),
    ]):
        f = opt(f)
    return f


def imaging_options(f):
    for opt in reversed([
        click.option("--distance", type=float, default=None, help="Camera distance in mm (default: tag fills a third of the frame)."),
        click.option("--tilt", type=float, default=0.0, show_default=True, help="Oblique view angle in degrees."),
        click.option("--roll", type=float, default=0.0, show_default=True, help="In-plane rotation in degrees."),
        click.option("--intensity", type=float, default=4.0, show_default=True, help="Light level (lux equivalent)."),
        click.option("--ambient", type=float, default=4.0, show_default=True, help="Ambient floor in gray levels."),
        click.option("--band", type=click.Choice(["nir", "vis"]), default="nir", show_default=True),
        click.option("--psf", "psf_sigma", type=float, default=0.8, show_default=True, help="Blur sigma in pixels."),
        click.option("--noise", "noise_sigma", type=float, default=2.0, show_default=True, help="Noise sigma in gray levels."),
        click.option("--focal", "focal_px", type=float, default=400.0, show_default=True),
        click.option("--seed", type=int, default=0, show_default=True),
    ]):
        f = opt(f)
    return f


def optics_options(f):
    for opt in reversed([
        click.option("--optics", "optics_file", type=click.Path(dir_okay=False), default=None,
                     help="Optics file (default: the shipped calibration)."),
        click.option("--mu-nir", type=float, default=None, help="Override IR PLA infrared attenuation per mm."),
        click.option("--mu-vis", type=float, default=None, help="Override IR PLA visible attenuation per mm."),
    ]):
        f = opt(f)
    return f


def _optics(optics_file, mu_nir, mu_vis) -> MaterialOptics:
    try:
        optics = read_optics_file(optics_file)
    except (OSError, ValueError, KeyError) as exc:
        raise Abort(f"cannot read optics file {optics_file}: {exc}") from exc
    if mu_nir is not None:
        nir = dict(optics.mu_nir)
        nir[Material.IR_PLA] = mu_nir
        optics = MaterialOptics(nir, optics.mu_vis)
    if mu_vis is not None:
        optics = optics.with_mu_vis(Material.IR_PLA, mu_vis)
    return optics


def _read_mesh(path: str, material: Material = Material.IR_PLA) -> TriangleMesh:
    try:
        return load_stl(Path(path).read_bytes(), material)
    except OSError as exc:
        raise Abort(f"cannot read {path}: {exc.strerror or exc}") from exc
    except IRTagsError as exc:
        raise Abort(f"{path}: {exc}") from exc


def _top_center(mesh: TriangleMesh) -> tuple[float, float, float]:
    lo, hi = mesh.bounds()
    return float((lo[0] + hi[0]) / 2), float((lo[1] + hi[1]) / 2), float(hi[2])


def _params(mesh, tag, mode, color, anchor, up_hint, tag_width, t_shell, t_code, quiet_zone, allow_out=False):
    from .embedder import EmbedParams

    if mode == "single" and color is not None:
        raise click.UsageError("--color only applies to multi mode")
    if mode == "multi" and color is None:
        color = "white"
    anchor = _vec(anchor) if anchor else _top_center(mesh)
    placement = Placement(anchor, tag_width, _vec(up_hint))
    return EmbedParams(mode, placement, color, t_shell, t_code, quiet_zone, allow_out_of_window=allow_out)


def _camera(meshes, params, bits, distance, tilt, roll, psf_sigma, noise_sigma, focal_px):
    from .embedder import footprint
    from .irsim.camera import CameraModel
    from .irsim.scenes import FILL

    frame = frame_at(meshes[0], params.placement)
    _, full = footprint(bits, params)
    if distance is None:
        distance = focal_px * full / (FILL * 288)
    return CameraModel.facing(frame.origin, frame.normal, frame.up, distance, tilt, roll, focal_px=focal_px,
                              psf_sigma=psf_sigma, noise_sigma=noise_sigma)


@click.group(context_settings={"help_option_names": ["-h", "--help"]})
@click.version_option(__version__, prog_name="irtags")
@click.option("-v", "--verbose", is_flag=True, help="Log progress to stderr.")
def main(verbose: bool):
    """Embed, simulate and detect infrared-readable tags in 3D prints."""
    logging.basicConfig(level=logging.INFO if verbose else logging.ERROR, format="%(levelname)s %(name)s: %(message)s")


@main.command()
@click.argument("out", type=click.Path(dir_okay=False))
@click.option("--size", type=float, default=30.0, show_default=True, help="Plate side in mm.")
@click.option("--depth", type=float, default=4.0, show_default=True, help="Plate thickness in mm.")
@click.option("--ascii", "ascii_", is_flag=True)
def plate(out, size, depth, ascii_):
    """Write a flat test plate (top face at z = 0) as STL."""
    from .irsim.scenes import plate_for

    mesh = plate_for(size, depth, margin=0.0)
    try:
        Path(out).write_bytes(save_stl(mesh, ascii=ascii_))
    except OSError as exc:
        raise Abort(f"cannot write {out}: {exc.strerror or exc}") from exc
    click.echo(out)


@main.command()
@click.argument("stl_in", type=click.Path(dir_okay=False))
@tag_options
@embed_options
@click.option("--out", "prefix", required=True, help="Output prefix for STL and manifest files.")
@click.option("--ascii", "ascii_", is_flag=True, help="Write ASCII STL.")
def embed(stl_in, aruco, qr, qr_hex, qr_version, ecc, mode, color, anchor, up_hint, tag_width, t_shell, t_code,
          quiet_zone, prefix, ascii_):
    """Embed a tag under the surface of STL_IN."""
    from .embedder import embed as do_embed
    from .embedder import write_outputs

    tag = _tag(aruco, qr, qr_hex, qr_version, ecc)
    mesh = _read_mesh(stl_in)
    try:
        params = _params(mesh, tag, mode, color, anchor, up_hint, tag_width, t_shell, t_code, quiet_zone)
        meshes = do_embed(mesh, tag.encode(), params)
    except (IRTagsError, ValueError) as exc:
        raise Abort(str(exc)) from exc
    out_dir = Path(prefix).parent
    if not out_dir.is_dir():
        raise Abort(f"output directory {out_dir} does not exist")
    try:
        paths = write_outputs(prefix, meshes, tag, params, ascii=ascii_)
    except OSError as exc:
        raise Abort(f"cannot write outputs under {out_dir}: {exc.strerror or exc}") from exc
    for p in paths:
        click.echo(p)


@main.command()
@click.argument("meshes", nargs=-1, required=True)
@click.option("--out", required=True, type=click.Path(dir_okay=False), help="Output image (.png or .pgm).")
@click.option("--target", default=None, help="Point the camera looks at, x,y,z (default: top face center).")
@click.option("--normal", default="0,0,1", show_default=True, help="Direction from target to camera.")
@click.option("--up", "up_hint", default="0,1,0", show_default=True)
@click.option("--distance", type=float, default=100.0, show_default=True)
@click.option("--tilt", type=float, default=0.0, show_default=True)
@click.option("--roll", type=float, default=0.0, show_default=True)
@click.option("--intensity", type=float, default=4.0, show_default=True)
@click.option("--ambient", type=float, default=4.0, show_default=True)
@click.option("--band", type=click.Choice(["nir", "vis"]), default="nir", show_default=True)
@click.option("--psf", "psf_sigma", type=float, default=0.8, show_default=True)
@click.option("--noise", "noise_sigma", type=float, default=2.0, show_default=True)
@click.option("--focal", "focal_px", type=float, default=400.0, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@optics_options
def render(meshes, out, target, normal, up_hint, distance, tilt, roll, intensity, ambient, band, psf_sigma,
           noise_sigma, focal_px, seed, optics_file, mu_nir, mu_vis):
    """Render MESHES (each PATH or PATH:MATERIAL) as the camera sees them.

    Files ending in ``_code.stl`` default to regular PLA, everything else to IR PLA.
    """
    from .irsim.camera import CameraModel
    from .irsim.imageio import write_image
    from .irsim.render import render as do_render

    scene = []
    for spec in meshes:
        path, _, mat = spec.partition(":")
        if mat:
            try:
                material = Material(mat)
            except ValueError as exc:
                raise click.BadParameter(f"unknown material {mat!r}", param_hint="MESHES") from exc
        else:
            material = Material.REGULAR_PLA if path.endswith("_code.stl") else Material.IR_PLA
        scene.append((_read_mesh(path, material), material))
    optics = _optics(optics_file, mu_nir, mu_vis)
    target = _vec(target) if target else _top_center(scene[0][0])
    try:
        cam = CameraModel.facing(target, _vec(normal), _vec(up_hint), distance, tilt, roll, focal_px=focal_px,
                                 psf_sigma=psf_sigma, noise_sigma=noise_sigma)
        img = do_render(scene, optics, cam, IlluminationModel(Band(band), intensity, ambient), seed=seed)
    except (IRTagsError, ValueError) as exc:
        raise Abort(str(exc)) from exc
    try:
        write_image(out, img)
    except OSError as exc:
        raise Abort(f"cannot write {out}: {exc.strerror or exc}") from exc
    click.echo(out)


def _families(text: str | None):
    if not text:
        return None
    try:
        return tuple(Family(f.strip()) for f in text.split(",") if f.strip())
    except ValueError as exc:
        raise click.BadParameter(str(exc), param_hint="--families") from exc


@main.command()
@click.argument("image", type=click.Path(dir_okay=False))
@click.option("--combos", "combos_file", type=click.Path(dir_okay=False), default=None,
              help="Filter combo file (lines 'ksize,blockSize').")
@click.option("--families", default=None, help="Comma list from aruco,qr.")
def detect(image, combos_file, families):
    """Detect tags in IMAGE and print the results as JSON."""
    from .detect import detect_tags, load_combos
    from .irsim.imageio import ImageDecodeError, read_image

    try:
        img = read_image(image)
        combos = load_combos(combos_file)
    except OSError as exc:
        raise Abort(f"cannot read input: {exc.strerror or exc}") from exc
    except (ImageDecodeError, ValueError) as exc:
        raise Abort(str(exc)) from exc
    results = detect_tags(img, combos, _families(families))
    click.echo(json.dumps([r.to_json() for r in results], indent=2))
    sys.exit(EXIT_OK if results else EXIT_FAIL)


@main.command()
@click.argument("stl_in", type=click.Path(dir_okay=False), required=False)
@tag_options
@embed_options
@imaging_options
@optics_options
@click.option("--save-image", type=click.Path(dir_okay=False), default=None, help="Also write the rendered frame.")
def roundtrip(stl_in, aruco, qr, qr_hex, qr_version, ecc, mode, color, anchor, up_hint, tag_width, t_shell, t_code,
              quiet_zone, distance, tilt, roll, intensity, ambient, band, psf_sigma, noise_sigma, focal_px, seed,
              optics_file, mu_nir, mu_vis, save_image):
    """Embed, render and detect; PASS when the payload comes back.

    Without STL_IN a plate sized for the tag is used.
    """
    from .detect import detect_tags
    from .embedder import embed as do_embed
    from .embedder import footprint
    from .irsim.analysis import tag_matches
    from .irsim.imageio import write_image
    from .irsim.render import render as do_render
    from .irsim.scenes import BACKING_MM, plate_for

    tag = _tag(aruco, qr, qr_hex, qr_version, ecc)
    optics = _optics(optics_file, mu_nir, mu_vis)
    bits = tag.encode()
    try:
        if stl_in is None:
            probe = _params(plate_for(tag_width, 1.0), tag, mode, color, "0,0,0", up_hint, tag_width, t_shell, t_code,
                            quiet_zone, allow_out=True)
            _, full = footprint(bits, probe)
            mesh = plate_for(full, probe.t_shell + probe.t_code + BACKING_MM)
        else:
            mesh = _read_mesh(stl_in)
        params = _params(mesh, tag, mode, color, anchor, up_hint, tag_width, t_shell, t_code, quiet_zone, allow_out=True)
        meshes = do_embed(mesh, bits, params)
        cam = _camera(meshes, params, bits, distance, tilt, roll, psf_sigma, noise_sigma, focal_px)
        img = do_render(meshes, optics, cam, IlluminationModel(Band(band), intensity, ambient), seed=seed)
    except (IRTagsError, ValueError) as exc:
        raise Abort(str(exc)) from exc
    if save_image:
        try:
            write_image(save_image, img)
        except OSError as exc:
            raise Abort(f"cannot write {save_image}: {exc.strerror or exc}") from exc
    results = detect_tags(img)
    hit = next((r for r in results if tag_matches(r, tag)), None)
    expected = tag.describe()
    if hit is None:
        got = [r.to_json() for r in results]
        click.echo(f"FAIL expected {json.dumps(expected)} got {json.dumps(got)}")
        sys.exit(EXIT_FAIL)
    click.echo(f"PASS {json.dumps(hit.to_json())}")
    sys.exit(EXIT_OK)


@main.command()
@click.option("--var", "variable", required=True, type=click.Choice(["t_shell", "distance", "marker_width", "intensity"]))
@click.option("--range", "range_", required=True, help="start:stop:step (inclusive) or a comma list.")
@tag_options
@click.option("--mode", type=click.Choice(["single", "multi"]), default="multi", show_default=True)
@click.option("--color", type=click.Choice(["white", "black", "blue"]), default=None)
@click.option("--width", "marker_width", type=float, default=12.0, show_default=True)
@imaging_options
@optics_options
@click.option("--out", type=click.Path(dir_okay=False), default=None, help="CSV path (default stdout).")
@click.option("--jobs", type=click.IntRange(1), default=1, show_default=True, help="Parallel configurations.")
def sweep(variable, range_, aruco, qr, qr_hex, qr_version, ecc, mode, color, marker_width, distance, tilt, roll,
          intensity, ambient, band, psf_sigma, noise_sigma, focal_px, seed, optics_file, mu_nir, mu_vis, out, jobs):
    """Render and detect over a range of one variable; writes CSV."""
    from .irsim.analysis import parse_range, sweep as do_sweep, sweep_csv
    from .irsim.scenes import SceneTemplate

    if (aruco, qr, qr_hex) == (None, None, None):
        aruco = 7
    tag = _tag(aruco, qr, qr_hex, qr_version, ecc)
    if mode == "single" and color is not None:
        raise click.UsageError("--color only applies to multi mode")
    try:
        values = parse_range(range_)
    except ValueError as exc:
        raise click.BadParameter(str(exc), param_hint="--range") from exc
    if not values:
        raise click.BadParameter("range is empty", param_hint="--range")
    optics = _optics(optics_file, mu_nir, mu_vis)
    template = SceneTemplate(tag, mode=mode, code_color=color or ("white" if mode == "multi" else None),
                             marker_width=marker_width, distance=distance, intensity=intensity, ambient=ambient,
                             band=Band(band), focal_px=focal_px, tilt_deg=tilt, roll_deg=roll, psf_sigma=psf_sigma,
                             noise_sigma=noise_sigma, seed=seed)
    try:
        rows = do_sweep(template, variable, values, optics, jobs=jobs)
    except (IRTagsError, ValueError) as exc:
        raise Abort(str(exc)) from exc
    text = sweep_csv(rows)
    if out:
        try:
            Path(out).write_text(text)
        except OSError as exc:
            raise Abort(f"cannot write {out}: {exc.strerror or exc}") from exc
    else:
        click.echo(text, nl=False)


@main.command()
@click.option("--out", type=click.Path(dir_okay=False), default="optics.ini", show_default=True,
              help="Where to write the calibrated optics file.")
@click.option("--t-shell", type=float, default=1.32, show_default=True)
@click.option("--contrast", type=float, default=0.05, show_default=True)
@click.option("--bracket", default="0.05,20", show_default=True, help="lo,hi search interval for mu_vis.")
@optics_options
def calibrate(out, t_shell, contrast, bracket, optics_file, mu_nir, mu_vis):
    """Fit IR PLA visible attenuation to a target checkerboard contrast."""
    from .errors import NoBracket
    from .irsim.analysis import calibrate_mu_vis

    try:
        lo, hi = (float(x) for x in bracket.split(","))
    except ValueError as exc:
        raise click.BadParameter("expected lo,hi", param_hint="--bracket") from exc
    optics = _optics(optics_file, mu_nir, mu_vis)
    try:
        mu = calibrate_mu_vis(optics, (lo, hi), t_shell, contrast)
    except NoBracket as exc:
        raise Abort(str(exc)) from exc
    fitted = optics.with_mu_vis(Material.IR_PLA, mu)
    comment = f"mu_vis of ir_pla gives {contrast:g} visible contrast at {t_shell:g} mm"
    try:
        Path(out).write_text(dump_optics(fitted, comment))
    except OSError as exc:
        raise Abort(f"cannot write {out}: {exc.strerror or exc}") from exc
    click.echo(f"mu_vis {mu:.6f}")
    click.echo(out)


@main.command()
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", type=int, default=8000, show_default=True)
@click.option("--combos", "combos_file", type=click.Path(dir_okay=False), default=None)
def serve(host, port, combos_file):
    """Run the HTTP detection service."""
    import uvicorn

    from .service import create_app

    uvicorn.run(create_app(combos_file), host=host, port=port, log_level="info")


if __name__ == "__main__":
    main()
