"""Command-line front end.

Seven subcommands cover the file-to-file workflow: ``refine`` cleans
material masks with instance boundaries, ``project`` turns masks plus a
splat cloud into per-Gaussian labels, ``label-mesh`` moves those labels
onto a mesh, ``assign-pbr`` binds a material table, ``simulate`` runs the
LiDAR model, ``evaluate`` compares two clouds, and ``pipeline`` chains the
stages from a manifest. Exit codes: 0 success, 2 usage or file-format
problems, 3 data-invariant violations. Failures print a single-line JSON
error to stderr. Every stage writes a ``<output>.provenance.json`` with
input hashes, parameters, and the package version; records carry no
timestamps so reruns on identical inputs are byte-identical.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys

import numpy as np

from . import __version__
from .errors import DataError, FormatError, SchemaError
from .io.colmap import load_cameras
from .io.images import load_instances, load_mask, write_mask
from .io.mesh import load_mesh, write_labeled_mesh
from .io.ply import load_gaussian_ply
from .io.pointcloud import (read_point_cloud_any, write_point_cloud,
                            write_point_cloud_csv)
from .io.trajectory import load_trajectory
from .lidar import (DEFAULT_SCAN_PATTERN, NoiseModel, load_scan_pattern,
                    simulate_scan)
from .materials import (load_material_table, material_table_document,
                        parse_material_table)
from .meshlabel import assign_gaussians_to_triangles, fill_unlabeled, summarize_labels
from .metrics import DEFAULT_MATCH_RADIUS, match_points, psnr, reflectivity_error, ssim
from .project import DEFAULT_ALPHA_THRESHOLD, accumulate_votes, aggregate_labels
from .refine import refine_labels, remove_overlaps
from .types import UNKNOWN_CLASS


class _Parser(argparse.ArgumentParser):
    """Argparse that reports usage problems as JSON on stderr."""

    def error(self, message):
        _print_error(2, "usage", "UsageError", message)
        raise SystemExit(2)


def _print_error(code, kind, exception, message):
    doc = {"error": {"code": code, "type": kind,
                     "exception": exception, "message": message}}
    print(json.dumps(doc, sort_keys=True), file=sys.stderr)


def _sha256_file(path):
    digest = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()


def _sha256_path(path):
    """Hash a file, or a directory as the sorted list of (name, file hash)."""
    if os.path.isdir(path):
        digest = hashlib.sha256()
        for root, dirs, files in os.walk(path):
            dirs.sort()
            for name in sorted(files):
                rel = os.path.relpath(os.path.join(root, name), path)
                digest.update(rel.encode("utf-8"))
                digest.update(_sha256_file(os.path.join(root, name)).encode("ascii"))
        return digest.hexdigest()
    return _sha256_file(path)


def _write_provenance(output_path, stage, inputs, parameters):
    record = {
        "tool": f"matsplat {stage}",
        "version": __version__,
        "inputs": {name: {"path": str(path), "sha256": _sha256_path(path)}
                   for name, path in sorted(inputs.items()) if path is not None},
        "parameters": parameters,
        "output": os.path.basename(str(output_path)),
    }
    with open(f"{output_path}.provenance.json", "w", encoding="utf-8") as f:
        json.dump(record, f, indent=2, sort_keys=True)
        f.write("\n")


def _require_file(path, what):
    if not os.path.isfile(path):
        raise FileNotFoundError(f"{what} not found: {path}")
    return path


def _require_dir(path, what):
    if not os.path.isdir(path):
        raise FileNotFoundError(f"{what} not found: {path}")
    return path


def _json_float(value):
    if value is None:
        return None
    if value == float("inf"):
        return "inf"
    return value


# ---------------------------------------------------------------- stages


def run_refine(materials_path, instances_path, output_path):
    mask = load_mask(_require_file(materials_path, "material mask"))
    instances = load_instances(_require_file(instances_path, "instance image"))
    refined = refine_labels(mask, remove_overlaps(instances))
    write_mask(refined, output_path)
    _write_provenance(output_path, "refine",
                      {"materials": materials_path, "instances": instances_path},
                      {})
    return 0


def run_project(splats_path, cameras_dir, masks_dir, output_path,
                alpha_threshold=DEFAULT_ALPHA_THRESHOLD, threads=1, debug_dir=None):
    cloud = load_gaussian_ply(_require_file(splats_path, "splat cloud"))
    cameras = load_cameras(_require_dir(cameras_dir, "camera directory"))
    _require_dir(masks_dir, "mask directory")
    views = []
    for camera in cameras:
        mask_path = os.path.join(masks_dir, camera.name)
        views.append((camera, load_mask(_require_file(mask_path, "view mask"))))
    votes = accumulate_votes(cloud, views, alpha_threshold=alpha_threshold,
                             threads=threads)
    labels = aggregate_labels(votes)
    if debug_dir is not None:
        from .project import project_splats, rasterize_winners
        os.makedirs(debug_dir, exist_ok=True)
        for camera, _mask in views:
            winners = rasterize_winners(project_splats(cloud, camera),
                                        alpha_threshold)
            base = os.path.splitext(camera.name)[0]
            with open(os.path.join(debug_dir, f"{base}.winners.npy"), "wb") as f:
                np.save(f, winners)
    with open(output_path, "wb") as f:
        np.save(f, labels)
    _write_provenance(output_path, "project",
                      {"splats": splats_path, "cameras": cameras_dir,
                       "masks": masks_dir},
                      {"alpha_threshold": alpha_threshold, "n_views": len(views)})
    return 0


def _load_gaussian_labels(path, n_expected):
    with open(path, "rb") as f:
        labels = np.load(f)
    if labels.ndim != 1 or labels.dtype != np.uint8:
        raise DataError(f"gaussian labels '{path}' must be a 1-D uint8 array")
    if labels.shape[0] != n_expected:
        raise DataError(
            f"gaussian labels '{path}' hold {labels.shape[0]} entries for "
            f"{n_expected} splats")
    return labels


def run_label_mesh(splats_path, labels_path, mesh_path, output_path,
                   summary_path=None, knn_k=1, fill=True):
    cloud = load_gaussian_ply(_require_file(splats_path, "splat cloud"))
    labels = _load_gaussian_labels(_require_file(labels_path, "gaussian labels"),
                                   len(cloud))
    mesh = load_mesh(_require_file(mesh_path, "mesh"))
    voted = assign_gaussians_to_triangles(cloud.positions, labels, mesh, k=knn_k)
    result = voted
    n_filled = 0
    if fill:
        result = fill_unlabeled(voted)
        n_filled = int(np.count_nonzero(result.labels != voted.labels))
    write_labeled_mesh(result, output_path)
    summary = summarize_labels(result, n_filled=n_filled)
    if summary_path is not None:
        with open(summary_path, "w", encoding="utf-8") as f:
            json.dump(summary.to_document(), f, indent=2, sort_keys=True)
            f.write("\n")
    _write_provenance(output_path, "label-mesh",
                      {"splats": splats_path, "labels": labels_path,
                       "mesh": mesh_path},
                      {"knn_k": knn_k, "fill": fill})
    return 0


def run_assign_pbr(mesh_path, table_path, output_path):
    mesh = load_mesh(_require_file(mesh_path, "mesh"))
    table = load_material_table(_require_file(table_path, "material table"))
    from .materials import bind_materials
    bound = bind_materials(mesh, table)
    per_class = {}
    for class_id in sorted(np.unique(bound.material_ids).tolist()):
        per_class[str(int(class_id))] = int(
            np.count_nonzero(bound.material_ids == class_id))
    document = {
        "mesh": os.path.relpath(mesh_path, os.path.dirname(output_path) or "."),
        "material_table": material_table_document(table),
        "n_triangles": len(mesh),
        "per_class_triangles": per_class,
    }
    with open(output_path, "w", encoding="utf-8") as f:
        json.dump(document, f, indent=2, sort_keys=True)
        f.write("\n")
    _write_provenance(output_path, "assign-pbr",
                      {"mesh": mesh_path, "table": table_path}, {})
    return 0


def _load_bound_scene(path):
    with open(path, "r", encoding="utf-8") as f:
        try:
            document = json.load(f)
        except json.JSONDecodeError as exc:
            raise SchemaError(f"bound scene is not valid JSON: {exc}") from None
    if "mesh" not in document or "material_table" not in document:
        raise SchemaError("bound scene needs 'mesh' and 'material_table' fields")
    mesh_path = os.path.join(os.path.dirname(path) or ".", document["mesh"])
    mesh = load_mesh(_require_file(mesh_path, "bound mesh"))
    table = parse_material_table(document["material_table"])
    return mesh, table


def run_simulate(output_path, trajectory_path, scene_path=None, mesh_path=None,
                 table_path=None, pattern_path=None, emitter_power=1.0,
                 threads=1, seed=0, noise_range_sigma=0.0, noise_power_sigma=0.0):
    if scene_path is not None:
        mesh, table = _load_bound_scene(_require_file(scene_path, "bound scene"))
        inputs = {"scene": scene_path}
    else:
        if mesh_path is None or table_path is None:
            raise SchemaError("simulate needs either --scene or both --mesh and --table")
        mesh = load_mesh(_require_file(mesh_path, "mesh"))
        table = load_material_table(_require_file(table_path, "material table"))
        inputs = {"mesh": mesh_path, "table": table_path}
    trajectory = load_trajectory(_require_file(trajectory_path, "trajectory"))
    inputs["trajectory"] = trajectory_path
    pattern = DEFAULT_SCAN_PATTERN
    if pattern_path is not None:
        pattern = load_scan_pattern(_require_file(pattern_path, "scan pattern"))
        inputs["pattern"] = pattern_path
    noise = None
    if noise_range_sigma > 0.0 or noise_power_sigma > 0.0:
        noise = NoiseModel(range_sigma=noise_range_sigma,
                           power_sigma=noise_power_sigma, seed=seed)
    scan = simulate_scan(mesh, table, pattern, trajectory,
                         emitter_power=emitter_power, threads=threads, noise=noise)
    if str(output_path).lower().endswith(".csv"):
        write_point_cloud_csv(scan, output_path)
    else:
        write_point_cloud(scan, output_path)
    _write_provenance(output_path, "simulate", inputs,
                      {"emitter_power": emitter_power, "seed": seed,
                       "noise_range_sigma": noise_range_sigma,
                       "noise_power_sigma": noise_power_sigma,
                       "n_returns": len(scan)})
    return 0


def run_evaluate(sim_path, ref_path, output_path, match_radius=DEFAULT_MATCH_RADIUS,
                 per_point_path=None, image_a=None, image_b=None):
    sim = read_point_cloud_any(_require_file(sim_path, "simulated cloud"))
    ref = read_point_cloud_any(_require_file(ref_path, "reference cloud"))
    matches = match_points(sim.points, ref.points, radius=match_radius)
    sim_values = sim.reflectivity[matches.sim_index].astype(np.float64)
    ref_values = ref.reflectivity[matches.ref_index].astype(np.float64)
    mae, median = reflectivity_error(sim_values, ref_values)
    image_psnr = None
    image_ssim = None
    inputs = {"sim": sim_path, "ref": ref_path}
    if image_a is not None or image_b is not None:
        if image_a is None or image_b is None:
            raise SchemaError("image metrics need both --image-a and --image-b")
        from PIL import Image
        with Image.open(_require_file(image_a, "image")) as img:
            a = np.asarray(img.convert("L") if img.mode == "P" else img, dtype=np.uint8)
        with Image.open(_require_file(image_b, "image")) as img:
            b = np.asarray(img.convert("L") if img.mode == "P" else img, dtype=np.uint8)
        image_psnr = psnr(a, b)
        image_ssim = ssim(a, b)
        inputs["image_a"] = image_a
        inputs["image_b"] = image_b
    report = {
        "n_sim": matches.n_sim,
        "n_ref": matches.n_ref,
        "n_matched": len(matches),
        "n_unmatched": matches.n_unmatched,
        "match_fraction": matches.match_fraction,
        "match_radius": match_radius,
        "reflectivity_mae": mae,
        "reflectivity_median": median,
        "psnr": _json_float(image_psnr),
        "ssim": image_ssim,
    }
    with open(output_path, "w", encoding="utf-8") as f:
        json.dump(report, f, indent=2, sort_keys=True)
        f.write("\n")
    if per_point_path is not None:
        with open(per_point_path, "w", encoding="utf-8", newline="") as f:
            f.write("sim_index,ref_index,distance,sim_reflectivity,"
                    "ref_reflectivity,abs_error\n")
            for i in range(len(matches)):
                f.write(f"{matches.sim_index[i]},{matches.ref_index[i]},"
                        f"{float(matches.distance[i])!r},{sim_values[i]:.0f},"
                        f"{ref_values[i]:.0f},{abs(sim_values[i] - ref_values[i]):.0f}\n")
    _write_provenance(output_path, "evaluate", inputs,
                      {"match_radius": match_radius})
    return 0


_MANIFEST_KEYS = {"splats", "mesh", "cameras", "masks", "material_table",
                  "trajectory", "scan_pattern", "reference_cloud", "params"}
_PARAM_DEFAULTS = {
    "alpha_threshold": DEFAULT_ALPHA_THRESHOLD,
    "knn_k": 1,
    "fill": True,
    "match_radius": DEFAULT_MATCH_RADIUS,
    "emitter_power": 1.0,
}


def run_pipeline(manifest_path, output_dir, threads=1):
    manifest_path = _require_file(manifest_path, "manifest")
    with open(manifest_path, "r", encoding="utf-8") as f:
        try:
            manifest = json.load(f)
        except json.JSONDecodeError as exc:
            raise SchemaError(f"manifest is not valid JSON: {exc}") from None
    if not isinstance(manifest, dict):
        raise SchemaError("manifest must be a JSON object")
    unknown = set(manifest) - _MANIFEST_KEYS
    if unknown:
        raise SchemaError(f"manifest has unknown fields: {sorted(unknown)}")
    required = {"splats", "mesh", "cameras", "masks", "material_table", "trajectory"}
    missing = required - set(manifest)
    if missing:
        raise SchemaError(f"manifest missing fields: {sorted(missing)}")
    params = dict(_PARAM_DEFAULTS)
    overrides = manifest.get("params", {})
    if not isinstance(overrides, dict):
        raise SchemaError("manifest 'params' must be a JSON object")
    bad = set(overrides) - set(_PARAM_DEFAULTS)
    if bad:
        raise SchemaError(f"manifest params has unknown fields: {sorted(bad)}")
    params.update(overrides)

    base = os.path.dirname(os.path.abspath(manifest_path))

    def resolve(key):
        value = manifest.get(key)
        return None if value is None else os.path.join(base, value)

    os.makedirs(output_dir, exist_ok=True)
    labels_path = os.path.join(output_dir, "gaussian_labels.npy")
    mesh_out = os.path.join(output_dir, "labeled_mesh.ply")
    summary_out = os.path.join(output_dir, "label_summary.json")
    bound_out = os.path.join(output_dir, "bound_scene.json")
    scan_out = os.path.join(output_dir, "scan.bin")

    run_project(resolve("splats"), resolve("cameras"), resolve("masks"),
                labels_path, alpha_threshold=params["alpha_threshold"],
                threads=threads)
    run_label_mesh(resolve("splats"), labels_path, resolve("mesh"), mesh_out,
                   summary_path=summary_out, knn_k=params["knn_k"],
                   fill=params["fill"])
    run_assign_pbr(mesh_out, resolve("material_table"), bound_out)
    run_simulate(scan_out, resolve("trajectory"), scene_path=bound_out,
                 pattern_path=resolve("scan_pattern"),
                 emitter_power=params["emitter_power"], threads=threads)
    if manifest.get("reference_cloud"):
        run_evaluate(scan_out, resolve("reference_cloud"),
                     os.path.join(output_dir, "report.json"),
                     match_radius=params["match_radius"],
                     per_point_path=os.path.join(output_dir, "per_point_errors.csv"))
    return 0


# ------------------------------------------------------------- interface


def build_parser():
    parser = _Parser(prog="matsplat",
                     description="Material-aware splat labeling and LiDAR simulation.")
    parser.add_argument("--version", action="version", version=f"matsplat {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("refine", help="flatten material masks over instance segments")
    p.add_argument("--materials", required=True)
    p.add_argument("--instances", required=True)
    p.add_argument("--output", "-o", required=True)

    p = sub.add_parser("project", help="vote mask labels onto splats across views")
    p.add_argument("--splats", required=True)
    p.add_argument("--cameras", required=True, help="COLMAP text model directory")
    p.add_argument("--masks", required=True, help="directory of per-image masks")
    p.add_argument("--output", "-o", required=True, help="per-Gaussian labels (.npy)")
    p.add_argument("--alpha-threshold", type=float, default=DEFAULT_ALPHA_THRESHOLD)
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--debug-dir", default=None,
                   help="write per-view winner index maps here")

    p = sub.add_parser("label-mesh", help="transfer splat labels onto mesh triangles")
    p.add_argument("--splats", required=True)
    p.add_argument("--labels", required=True, help="per-Gaussian labels (.npy)")
    p.add_argument("--mesh", required=True)
    p.add_argument("--output", "-o", required=True)
    p.add_argument("--summary", default=None, help="write label statistics JSON here")
    p.add_argument("--knn-k", type=int, default=1)
    fill = p.add_mutually_exclusive_group()
    fill.add_argument("--fill", dest="fill", action="store_true", default=True)
    fill.add_argument("--no-fill", dest="fill", action="store_false")

    p = sub.add_parser("assign-pbr", help="bind a material table to a labeled mesh")
    p.add_argument("--mesh", required=True)
    p.add_argument("--table", required=True)
    p.add_argument("--output", "-o", required=True)

    p = sub.add_parser("simulate", help="simulate a LiDAR scan")
    p.add_argument("--scene", default=None, help="bound scene JSON from assign-pbr")
    p.add_argument("--mesh", default=None)
    p.add_argument("--table", default=None)
    p.add_argument("--trajectory", required=True)
    p.add_argument("--pattern", default=None, help="scan pattern JSON")
    p.add_argument("--output", "-o", required=True, help=".bin records or .csv")
    p.add_argument("--emitter-power", type=float, default=1.0)
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--noise-range-sigma", type=float, default=0.0)
    p.add_argument("--noise-power-sigma", type=float, default=0.0)

    p = sub.add_parser("evaluate", help="compare a simulated cloud to a reference")
    p.add_argument("--sim", required=True)
    p.add_argument("--ref", required=True)
    p.add_argument("--output", "-o", required=True, help="metrics report JSON")
    p.add_argument("--match-radius", type=float, default=DEFAULT_MATCH_RADIUS)
    p.add_argument("--per-point", default=None, help="per-pair error CSV")
    p.add_argument("--image-a", default=None)
    p.add_argument("--image-b", default=None)

    p = sub.add_parser("pipeline", help="run project through evaluate from a manifest")
    p.add_argument("--manifest", required=True)
    p.add_argument("--output-dir", "-o", required=True)
    p.add_argument("--threads", type=int, default=1)

    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "refine":
            return run_refine(args.materials, args.instances, args.output)
        if args.command == "project":
            return run_project(args.splats, args.cameras, args.masks, args.output,
                               alpha_threshold=args.alpha_threshold,
                               threads=args.threads, debug_dir=args.debug_dir)
        if args.command == "label-mesh":
            return run_label_mesh(args.splats, args.labels, args.mesh, args.output,
                                  summary_path=args.summary, knn_k=args.knn_k,
                                  fill=args.fill)
        if args.command == "assign-pbr":
            return run_assign_pbr(args.mesh, args.table, args.output)
        if args.command == "simulate":
            return run_simulate(args.output, args.trajectory, scene_path=args.scene,
                                mesh_path=args.mesh, table_path=args.table,
                                pattern_path=args.pattern,
                                emitter_power=args.emitter_power,
                                threads=args.threads, seed=args.seed,
                                noise_range_sigma=args.noise_range_sigma,
                                noise_power_sigma=args.noise_power_sigma)
        if args.command == "evaluate":
            return run_evaluate(args.sim, args.ref, args.output,
                                match_radius=args.match_radius,
                                per_point_path=args.per_point,
                                image_a=args.image_a, image_b=args.image_b)
        if args.command == "pipeline":
            return run_pipeline(args.manifest, args.output_dir, threads=args.threads)
        raise SchemaError(f"unknown command {args.command}")
    except (FormatError, FileNotFoundError, IsADirectoryError, NotADirectoryError) as exc:
        _print_error(2, "usage", type(exc).__name__, str(exc))
        return 2
    except DataError as exc:
        _print_error(3, "data", type(exc).__name__, str(exc))
        return 3


if __name__ == "__main__":
    sys.exit(main())
