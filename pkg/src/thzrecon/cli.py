"""Command-line front end: stage commands plus the end-to-end pipeline.

Option values resolve in order: built-in defaults, then a regime preset,
then a ``key=value`` config file, then explicit flags. Exit codes: 0 on
success, 2 for configuration errors, 3 for IO/format errors, 4 for
numerical failures.
"""

from __future__ import annotations

import argparse
import csv
import logging
import math
import sys
import time
from types import SimpleNamespace

import numpy as np

from . import analysis, baseline_wavelet, inpaint, phantom
from .blocks import BlockGeometry, block_means_cube, group
from .datacube import (
    Datacube,
    FormatError,
    NoiseSpec,
    add_gaussian_noise,
    read_cube,
    read_mask,
    snr_db,
    subsample,
    write_cube,
    write_mask,
    write_slice_pgm,
)
from .dictionary import TrainConfig, code_blocks, read_dictionary, train, write_dictionary
from .inpaint import InterpConfig, interpolate
from .reconstruct import ReconParams, fuse
from .sparse_mmv import SompConfig

log = logging.getLogger("thzrecon")


class ConfigError(Exception):
    """Invalid configuration value or key."""


PRESETS = {
    "tshape": dict(
        block_nx=8, block_ny=8, block_b=4, dict_k=256, subset_l=10,
        lam=0.5, beta=0.1, somp_max_atoms=4,
    ),
    "tablet": dict(
        block_nx=2, block_ny=2, block_b=128, dict_k=64, subset_l=10,
        lam=0.5, beta=0.2, somp_max_atoms=12,
    ),
}


def _as_bool(raw: str) -> bool:
    low = raw.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"expected a boolean, got {raw!r}")


CONVERTERS = {
    "kind": str, "nx": int, "ny": int, "nb": int,
    "surface_peak_index": int, "buried_depth_delay": int,
    "layer_thickness_delay": int, "peak_width": float,
    "amp_surface": float, "amp_front": float, "amp_back": float,
    "surface_tilt_x": float, "surface_tilt_y": float, "texture_amplitude": float,
    "shape": str, "components": int, "seed": int,
    "rate": float, "mode": str, "input_snr": float,
    "interp_method": str, "idw_power": float, "idw_neighbors": int,
    "block_nx": int, "block_ny": int, "block_b": int,
    "stride_x": int, "stride_y": int, "stride_t": int,
    "subset_l": int, "dict_k": int, "train_iters": int,
    "train_max_blocks": int, "somp_max_atoms": int, "somp_tol": float,
    "lam": float, "beta": float,
    "wavelet": str, "levels": int, "tau_mode": str, "tau": float,
    "depth_scale": float, "min_prominence": float, "min_separation": int,
    "refine": _as_bool, "band_lo": int, "band_hi": int,
    "preset": str, "timing": _as_bool,
}

PHANTOM_DEFAULTS = dict(
    kind="layered", nx=64, ny=64, nb=128,
    surface_peak_index=24, buried_depth_delay=60, layer_thickness_delay=24,
    peak_width=3.0, amp_surface=1.0, amp_front=0.6, amp_back=-0.45,
    surface_tilt_x=4.0, surface_tilt_y=2.5, texture_amplitude=0.05,
    shape="tee", components=2, seed=0,
)

SAMPLING_DEFAULTS = dict(rate=0.1, mode="spatial-shared", seed=0)

INTERP_DEFAULTS = dict(interp_method="bicubic-grid", idw_power=2.0, idw_neighbors=8)

GEOMETRY_DEFAULTS = dict(
    block_nx=8, block_ny=8, block_b=4, stride_x=1, stride_y=1, stride_t=1,
)

TRAIN_DEFAULTS = dict(
    dict_k=256, subset_l=10, train_iters=15, train_max_blocks=40000,
    somp_max_atoms=8, somp_tol=1e-3, seed=0,
)

RECON_DEFAULTS = dict(lam=0.5, beta=0.1)

WAVELET_DEFAULTS = dict(wavelet="sym4", levels=3, tau_mode="universal", tau=0.0)

STRUCTURE_DEFAULTS = dict(
    depth_scale=0.0032, min_prominence=0.2, min_separation=8, refine=True,
)

CCM_DEFAULTS = dict(band_lo=0, band_hi=0)

PIPELINE_DEFAULTS = dict(
    **SAMPLING_DEFAULTS, **INTERP_DEFAULTS, **GEOMETRY_DEFAULTS,
    **{k: v for k, v in TRAIN_DEFAULTS.items() if k != "seed"},
    **RECON_DEFAULTS, **WAVELET_DEFAULTS,
    input_snr=17.0, preset=None, timing=True,
)


def _load_config_file(path) -> dict[str, str]:
    values = {}
    try:
        fh = open(path, "r", encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    with fh:
        for ln_no, line in enumerate(fh, 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{ln_no}: expected key=value, got {line!r}")
            key, raw = line.split("=", 1)
            values[key.strip().replace("-", "_")] = raw.strip()
    return values


def _finalize(args: argparse.Namespace, defaults: dict) -> SimpleNamespace:
    """Layer defaults, preset, config file, then explicit flags."""
    merged = dict(defaults)
    file_vals = _load_config_file(args.config) if getattr(args, "config", None) else {}
    preset = getattr(args, "preset", None)
    if preset is None:
        preset = file_vals.get("preset", merged.get("preset"))
    if preset:
        if preset not in PRESETS:
            raise ConfigError(f"unknown preset {preset!r}, choose from {tuple(PRESETS)}")
        for key, val in PRESETS[preset].items():
            if key in merged:
                merged[key] = val
        if "preset" in merged:
            merged["preset"] = preset
    for key, raw in file_vals.items():
        if key == "preset":
            continue
        if key not in merged:
            raise ConfigError(f"unknown config key {key!r}")
        try:
            merged[key] = CONVERTERS[key](raw)
        except ValueError as exc:
            raise ConfigError(f"config key {key!r}: {exc}") from exc
    for key in merged:
        val = getattr(args, key, None)
        if val is not None:
            merged[key] = val
    return SimpleNamespace(**merged)


def _interp_config(o) -> InterpConfig:
    return InterpConfig(
        method=o.interp_method, idw_power=o.idw_power, idw_neighbors=o.idw_neighbors
    )


def _geometry(o, dims) -> BlockGeometry:
    return BlockGeometry(
        nx_b=o.block_nx, ny_b=o.block_ny, b=o.block_b, cube_dims=dims,
        stride_x=o.stride_x, stride_y=o.stride_y, stride_t=o.stride_t,
    )


def _train_config(o) -> TrainConfig:
    return TrainConfig(
        k=o.dict_k, iterations=o.train_iters, l=o.subset_l,
        somp=SompConfig(max_atoms=o.somp_max_atoms, residual_tol=o.somp_tol),
        seed=o.seed, max_train_blocks=o.train_max_blocks,
    )


def _wavelet_config(o) -> baseline_wavelet.WaveletConfig:
    return baseline_wavelet.WaveletConfig(
        wavelet=o.wavelet, levels=o.levels,
        threshold_mode=o.tau_mode, fixed_tau=o.tau,
    )


def _timed(name: str, fn, *a, **kw):
    t0 = time.perf_counter()
    out = fn(*a, **kw)
    dt = time.perf_counter() - t0
    log.info("[%s] %.2f s", name, dt)
    return out, dt


def _write_metrics(path, rows, timing: bool) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["method", "rate", "input_snr_db", "output_snr_db", "wall_seconds"])
        for method, rate, snr_in, snr_out, wall in rows:
            w.writerow([
                method, f"{rate:g}", f"{snr_in:.6g}", f"{snr_out:.6g}",
                f"{wall:.3f}" if timing else "0.000",
            ])
    log.info("metrics written to %s", path)


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def cmd_phantom(args) -> None:
    o = _finalize(args, PHANTOM_DEFAULTS)
    if o.kind == "layered":
        shapes = {
            "tee": phantom.t_shape_mask(o.nx, o.ny),
            "none": np.zeros((o.ny, o.nx), dtype=bool),
            "full": np.ones((o.ny, o.nx), dtype=bool),
        }
        if o.shape not in shapes:
            raise ConfigError(f"unknown shape {o.shape!r}, choose from {tuple(shapes)}")
        spec = phantom.LayeredPhantomSpec(
            nx=o.nx, ny=o.ny, nb=o.nb,
            surface_peak_index=o.surface_peak_index,
            buried_depth_delay=o.buried_depth_delay,
            layer_thickness_delay=o.layer_thickness_delay,
            peak_width=o.peak_width, shape=shapes[o.shape],
            amplitude_ratios=(o.amp_surface, o.amp_front, o.amp_back),
            surface_tilt=(o.surface_tilt_x, o.surface_tilt_y),
            texture_amplitude=o.texture_amplitude,
            seed=o.seed,
        )
        cube = phantom.generate_layered(spec)
    elif o.kind == "spectral":
        spec = phantom.SpectralPhantomSpec(
            nx=o.nx, ny=o.ny, nb=o.nb,
            component_spectra=phantom.component_signatures(o.nb, o.components, o.seed),
            region_map=None if o.components == 2 else _region_stripes(o),
            seed=o.seed,
        )
        cube = phantom.generate_spectral(spec)
    else:
        raise ConfigError(f"unknown phantom kind {o.kind!r}")
    write_cube(cube, args.out)
    log.info("phantom %s written to %s", cube.dims, args.out)


def _region_stripes(o) -> np.ndarray:
    cols = (np.arange(o.nx) * o.components) // o.nx
    return np.broadcast_to(cols, (o.ny, o.nx)).astype(np.int64).copy()


def cmd_subsample(args) -> None:
    o = _finalize(args, SAMPLING_DEFAULTS)
    cube = read_cube(args.input)
    out, mask = subsample(cube, o.rate, o.mode, o.seed)
    write_cube(out, args.out_cube)
    write_mask(mask, args.out_mask)
    log.info("kept %d/%d voxels (rate %.4f)", mask.n_observed, mask.observed.size, mask.rate)


def cmd_interp(args) -> None:
    o = _finalize(args, INTERP_DEFAULTS)
    cube = read_cube(args.input)
    mask = read_mask(args.mask)
    filled, _ = _timed("interp", interpolate, cube, mask, _interp_config(o))
    write_cube(filled, args.out)


def cmd_train(args) -> None:
    o = _finalize(args, {**GEOMETRY_DEFAULTS, **TRAIN_DEFAULTS, "preset": None})
    cube = read_cube(args.input)
    geometry = _geometry(o, cube.dims)
    (dic, _), _ = _timed("train", train, cube, geometry, _train_config(o))
    write_dictionary(dic, args.out_dict)
    log.info("dictionary %dx%d written to %s", dic.r, dic.k, args.out_dict)


def cmd_reconstruct(args) -> None:
    o = _finalize(
        args,
        {**GEOMETRY_DEFAULTS, **RECON_DEFAULTS, "subset_l": 10,
         "somp_max_atoms": 8, "somp_tol": 1e-3, "preset": None},
    )
    cube = read_cube(args.input)
    dic = read_dictionary(args.dict)
    geometry = _geometry(o, cube.dims)
    if dic.r != geometry.r:
        raise ConfigError(
            f"dictionary atom length {dic.r} does not match block volume {geometry.r}"
        )
    grouping = group(geometry.n_blocks, o.subset_l)
    scfg = SompConfig(max_atoms=o.somp_max_atoms, residual_tol=o.somp_tol)
    codes, _ = _timed("code", code_blocks, cube, dic, geometry, grouping, scfg)
    means = block_means_cube(cube, geometry)
    recon, _ = _timed(
        "fuse", fuse, cube, dic, codes, means, geometry, grouping,
        ReconParams(lam=o.lam, beta=o.beta),
    )
    write_cube(recon, args.out)


def cmd_wavelet(args) -> None:
    o = _finalize(args, WAVELET_DEFAULTS)
    cube = read_cube(args.input)
    out, _ = _timed("wavelet", baseline_wavelet.denoise_wavelet, cube, _wavelet_config(o))
    write_cube(out, args.out)


def cmd_metrics(args) -> None:
    o = _finalize(args, {**INTERP_DEFAULTS, **WAVELET_DEFAULTS, "rate": 0.0, "input_snr": math.nan})
    ref = read_cube(args.reference)
    incomplete = read_cube(args.incomplete)
    mask = read_mask(args.mask)
    rate = mask.rate if o.rate == 0.0 else o.rate
    interp_est, t_interp = _timed("interp", interpolate, incomplete, mask, _interp_config(o))
    wl_est, t_wl = _timed("wavelet", baseline_wavelet.denoise_wavelet, interp_est, _wavelet_config(o))
    snr_in = o.input_snr
    rows = [
        ("wavelet", rate, snr_in, snr_db(ref, wl_est), t_interp + t_wl),
        ("interp", rate, snr_in, snr_db(ref, interp_est), t_interp),
    ]
    if args.proposed:
        proposed = read_cube(args.proposed)
        rows.append(("proposed", rate, snr_in, snr_db(ref, proposed), math.nan))
    _write_metrics(args.out, rows, timing=True)


def cmd_structure(args) -> None:
    o = _finalize(args, STRUCTURE_DEFAULTS)
    cube = read_cube(args.input)
    cfg = analysis.PeakAnalysisConfig(
        depth_scale=o.depth_scale, min_prominence=o.min_prominence,
        min_separation=o.min_separation, refine=o.refine,
    )
    report, _ = _timed("structure", analysis.measure_structure, cube, cfg)
    if args.out_csv:
        with open(args.out_csv, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["y", "x", "valid", "depth_mm", "thickness_mm"])
            for yy in range(cube.ny):
                for xx in range(cube.nx):
                    w.writerow([
                        yy, xx, int(report.valid[yy, xx]),
                        f"{report.depth_mm[yy, xx]:.6g}",
                        f"{report.thickness_mm[yy, xx]:.6g}",
                    ])
    print(f"valid pixels: {report.n_valid}")
    print(f"depth (mm): {report.depth_mean:.4f}±{report.depth_std:.4f}")
    print(f"thickness (mm): {report.thickness_mean:.4f}±{report.thickness_std:.4f}")


def cmd_ccm(args) -> None:
    o = _finalize(args, CCM_DEFAULTS)
    cube = read_cube(args.input)
    try:
        ry, rx = (int(v) for v in args.ref_pixel.split(","))
    except ValueError as exc:
        raise ConfigError(f"--ref-pixel must be 'y,x', got {args.ref_pixel!r}") from exc
    band = (o.band_lo, o.band_hi) if o.band_hi > 0 else None
    if args.ref_cube:
        ref_cube = read_cube(args.ref_cube)
        spectra = np.abs(np.fft.rfft(ref_cube.data[:, ry, rx]))
        cmap = analysis.chemical_map(cube, spectra, band=band)
    else:
        cmap = analysis.chemical_map(cube, (ry, rx), band=band)
    if args.out_csv:
        np.savetxt(args.out_csv, cmap.values, delimiter=",")
    if args.out_pgm:
        vals = np.where(cmap.valid, cmap.values, 0.0)
        write_slice_pgm(Datacube(vals[None, :, :]), 0, args.out_pgm)
    finite = cmap.values[cmap.valid]
    print(f"ccm vs {cmap.reference_id}: mean {finite.mean():.4f}, min {finite.min():.4f}")


def cmd_pipeline(args) -> None:
    o = _finalize(args, PIPELINE_DEFAULTS)
    ref = read_cube(args.input)
    noisy = add_gaussian_noise(ref, NoiseSpec(o.input_snr, o.seed))
    incomplete, mask = subsample(noisy, o.rate, o.mode, o.seed + 1)
    snr_in = snr_db(ref, noisy)

    y, t_interp = _timed("interp", interpolate, incomplete, mask, _interp_config(o))
    wl_est, t_wl = _timed("wavelet", baseline_wavelet.denoise_wavelet, y, _wavelet_config(o))

    geometry = _geometry(o, ref.dims)
    grouping = group(geometry.n_blocks, o.subset_l)
    tcfg = TrainConfig(
        k=o.dict_k, iterations=o.train_iters, l=o.subset_l,
        somp=SompConfig(max_atoms=o.somp_max_atoms, residual_tol=o.somp_tol),
        seed=o.seed + 2, max_train_blocks=o.train_max_blocks,
    )
    (dic, codes), t_train = _timed("train", train, y, geometry, tcfg, grouping)
    means = block_means_cube(y, geometry)
    recon, t_fuse = _timed(
        "fuse", fuse, y, dic, codes, means, geometry, grouping,
        ReconParams(lam=o.lam, beta=o.beta),
    )
    write_cube(recon, args.out)

    if args.keep_intermediates:
        prefix = args.keep_intermediates
        write_cube(noisy, f"{prefix}.noisy.thzc")
        write_cube(incomplete, f"{prefix}.incomplete.thzc")
        write_mask(mask, f"{prefix}.mask.thzm")
        write_cube(y, f"{prefix}.interp.thzc")
        write_dictionary(dic, f"{prefix}.dict.thzd")

    if args.metrics_out:
        rows = [
            ("wavelet", o.rate, snr_in, snr_db(ref, wl_est), t_interp + t_wl),
            ("interp", o.rate, snr_in, snr_db(ref, y), t_interp),
            ("proposed", o.rate, snr_in, snr_db(ref, recon), t_interp + t_train + t_fuse),
        ]
        _write_metrics(args.metrics_out, rows, timing=o.timing)


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------

def _add_common(sp, *groups):
    sp.add_argument("--config", help="key=value config file; flags override it")
    sp.add_argument("--threads", type=int, help="cap BLAS thread count")
    if "preset" in groups:
        sp.add_argument("--preset", choices=tuple(PRESETS), help="parameter regime")
    if "sampling" in groups:
        sp.add_argument("--rate", type=float, help="observation rate in (0, 1]")
        sp.add_argument("--mode", choices=("spatial-shared", "voxelwise"))
        sp.add_argument("--seed", type=int)
    if "interp" in groups:
        sp.add_argument("--interp-method", dest="interp_method",
                        choices=inpaint.METHODS)
        sp.add_argument("--idw-power", dest="idw_power", type=float)
        sp.add_argument("--idw-neighbors", dest="idw_neighbors", type=int)
    if "geometry" in groups:
        sp.add_argument("--block-nx", dest="block_nx", type=int)
        sp.add_argument("--block-ny", dest="block_ny", type=int)
        sp.add_argument("--block-b", dest="block_b", type=int)
        sp.add_argument("--stride-x", dest="stride_x", type=int)
        sp.add_argument("--stride-y", dest="stride_y", type=int)
        sp.add_argument("--stride-t", dest="stride_t", type=int)
    if "train" in groups:
        sp.add_argument("--dict-k", dest="dict_k", type=int)
        sp.add_argument("--train-iters", dest="train_iters", type=int)
        sp.add_argument("--train-max-blocks", dest="train_max_blocks", type=int)
        sp.add_argument("--subset-l", dest="subset_l", type=int)
    if "somp" in groups:
        sp.add_argument("--somp-max-atoms", dest="somp_max_atoms", type=int)
        sp.add_argument("--somp-tol", dest="somp_tol", type=float)
    if "recon" in groups:
        sp.add_argument("--lambda", dest="lam", type=float)
        sp.add_argument("--beta", type=float)
    if "wavelet" in groups:
        sp.add_argument("--wavelet", choices=("sym4", "haar"))
        sp.add_argument("--levels", type=int)
        sp.add_argument("--tau-mode", dest="tau_mode", choices=("universal", "fixed"))
        sp.add_argument("--tau", type=float)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="thzrecon",
        description="Recover subsampled noisy 3D image cubes with a learned "
                    "spatio-temporal dictionary.",
    )
    sub = p.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("phantom", help="generate a synthetic test cube")
    sp.add_argument("--out", required=True)
    sp.add_argument("--kind", choices=("layered", "spectral"))
    sp.add_argument("--nx", type=int)
    sp.add_argument("--ny", type=int)
    sp.add_argument("--nb", type=int)
    sp.add_argument("--shape", choices=("tee", "none", "full"))
    sp.add_argument("--components", type=int)
    sp.add_argument("--seed", type=int)
    _add_common(sp)
    sp.set_defaults(func=cmd_phantom)

    sp = sub.add_parser("subsample", help="apply a random observation mask")
    sp.add_argument("--in", dest="input", required=True)
    sp.add_argument("--out-cube", dest="out_cube", required=True)
    sp.add_argument("--out-mask", dest="out_mask", required=True)
    _add_common(sp, "sampling")
    sp.set_defaults(func=cmd_subsample)

    sp = sub.add_parser("interp", help="fill unobserved voxels frame by frame")
    sp.add_argument("--in", dest="input", required=True)
    sp.add_argument("--mask", required=True)
    sp.add_argument("--out", required=True)
    _add_common(sp, "interp")
    sp.set_defaults(func=cmd_interp)

    sp = sub.add_parser("train", help="learn a block dictionary from a cube")
    sp.add_argument("--in", dest="input", required=True)
    sp.add_argument("--out-dict", dest="out_dict", required=True)
    sp.add_argument("--seed", type=int)
    _add_common(sp, "preset", "geometry", "train", "somp")
    sp.set_defaults(func=cmd_train)

    sp = sub.add_parser("reconstruct", help="code all blocks and fuse the estimate")
    sp.add_argument("--in", dest="input", required=True)
    sp.add_argument("--dict", required=True)
    sp.add_argument("--out", required=True)
    sp.add_argument("--subset-l", dest="subset_l", type=int)
    _add_common(sp, "preset", "geometry", "somp", "recon")
    sp.set_defaults(func=cmd_reconstruct)

    sp = sub.add_parser("wavelet", help="3D wavelet soft-threshold denoiser")
    sp.add_argument("--in", dest="input", required=True)
    sp.add_argument("--out", required=True)
    _add_common(sp, "wavelet")
    sp.set_defaults(func=cmd_wavelet)

    sp = sub.add_parser("metrics", help="three-way SNR table for one run")
    sp.add_argument("--reference", required=True)
    sp.add_argument("--incomplete", required=True)
    sp.add_argument("--mask", required=True)
    sp.add_argument("--proposed")
    sp.add_argument("--out", required=True)
    sp.add_argument("--rate", type=float)
    sp.add_argument("--input-snr", dest="input_snr", type=float)
    _add_common(sp, "interp", "wavelet")
    sp.set_defaults(func=cmd_metrics)

    sp = sub.add_parser("structure", help="per-pixel depth/thickness report")
    sp.add_argument("--in", dest="input", required=True)
    sp.add_argument("--out-csv", dest="out_csv")
    sp.add_argument("--depth-scale", dest="depth_scale", type=float)
    sp.add_argument("--min-prominence", dest="min_prominence", type=float)
    sp.add_argument("--min-separation", dest="min_separation", type=int)
    sp.add_argument("--refine", action=argparse.BooleanOptionalAction, default=None)
    _add_common(sp)
    sp.set_defaults(func=cmd_structure)

    sp = sub.add_parser("ccm", help="cosine spectral match map")
    sp.add_argument("--in", dest="input", required=True)
    sp.add_argument("--ref-pixel", dest="ref_pixel", required=True, help="'y,x'")
    sp.add_argument("--ref-cube", dest="ref_cube",
                    help="take the reference spectrum from this cube instead")
    sp.add_argument("--band-lo", dest="band_lo", type=int)
    sp.add_argument("--band-hi", dest="band_hi", type=int)
    sp.add_argument("--out-csv", dest="out_csv")
    sp.add_argument("--out-pgm", dest="out_pgm")
    _add_common(sp)
    sp.set_defaults(func=cmd_ccm)

    sp = sub.add_parser("pipeline", help="subsample, interpolate, train, reconstruct")
    sp.add_argument("--in", dest="input", required=True, help="clean reference cube")
    sp.add_argument("--out", required=True)
    sp.add_argument("--input-snr", dest="input_snr", type=float,
                    help="target input SNR in dB; inf bypasses noise")
    sp.add_argument("--metrics-out", dest="metrics_out")
    sp.add_argument("--keep-intermediates", dest="keep_intermediates",
                    metavar="PREFIX")
    sp.add_argument("--timing", action=argparse.BooleanOptionalAction, default=None,
                    help="--no-timing zeroes wall_seconds for reproducible files")
    _add_common(sp, "preset", "sampling", "interp", "geometry", "train", "somp",
                "recon", "wavelet")
    sp.set_defaults(func=cmd_pipeline)

    return p


def main(argv=None) -> int:
    logging.basicConfig(stream=sys.stderr, level=logging.INFO, format="%(message)s")
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "threads", None):
        try:
            import threadpoolctl

            threadpoolctl.threadpool_limits(args.threads)
        except ImportError:
            log.warning("threadpoolctl not installed; --threads ignored")
    try:
        args.func(args)
        return 0
    except ConfigError as exc:
        log.error("config error: %s", exc)
        return 2
    except (FormatError, OSError) as exc:
        log.error("io error: %s", exc)
        return 3
    except (np.linalg.LinAlgError, FloatingPointError) as exc:
        log.error("numerical failure: %s", exc)
        return 4
    except ValueError as exc:
        log.error("config error: %s", exc)
        return 2


def entry() -> None:
    sys.exit(main())
