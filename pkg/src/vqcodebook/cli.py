"""Command-line surface for codebook training, image coding, and comparisons.

Commands
--------
train    build a codebook from a PGM image or a plain-text vector file
encode   quantize a PGM into a VQIX index map
decode   reconstruct a PGM from a VQIX index map and its codebook
eval     PSNR between two PGMs
compare  run the algorithm comparison over images, emitting a CSV report
replay   re-execute a recorded manifest and verify byte-identical outputs

Exit codes: 0 success, 2 bad arguments, 3 I/O or parse failure, 4 algorithm
failure (e.g. unreachable target size), 5 digest mismatch.

Every file-producing command writes a JSON manifest sidecar
(``<output>.manifest.json``) carrying the full parameter set plus SHA-256
digests of all inputs and outputs; ``replay`` re-executes it and verifies the
outputs reproduce bit-for-bit.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import __version__
from .core import Codebook, TrainingSet
from .lbg import LBGConfig, init_random, lbg_refine
from .ap_engine import APConfig, NoExemplarsError, run_ap
from .pipeline import (
    PipelineConfig,
    SizeSearchError,
    adjust_codebook_size,
    run_iap_lbg,
    search_rs,
    search_uniform_scale,
)
from .similarity import (
    NetworkSupportPreference,
    UniformPreference,
    apply_preference,
    build_similarity,
    median_off_diagonal,
)
from .imageio import (
    BlockGeometry,
    DigestMismatchError,
    FormatError,
    Image,
    PGMParseError,
    codebook_digest,
    decode,
    encode,
    extract_blocks,
    psnr,
    read_codebook_file,
    read_index_file,
    read_pgm,
    write_codebook_file,
    write_index_file,
    write_pgm,
)

ALGOS = ("lbg", "ap", "iap", "iap-lbg")

CSV_COLUMNS = (
    "mode,image,algorithm,codebook_size,psnr_db,psnr_db_full,ap_iterations,"
    "ap_converged,lbg_iterations,rs,preference,seed,runs,lbg_mean_psnr_db"
)


class UsageError(ValueError):
    """Incomplete or contradictory options for the chosen command."""


# ---------------------------------------------------------------------------
# manifests


@dataclass
class RunManifest:
    """Everything needed to replay a run byte-identically."""

    command: str
    parameters: dict
    inputs: dict
    outputs: dict
    version: str = __version__

    def to_json(self) -> str:
        return json.dumps(
            {
                "tool": "vqcb",
                "version": self.version,
                "command": self.command,
                "parameters": self.parameters,
                "inputs": self.inputs,
                "outputs": self.outputs,
            },
            indent=2,
            sort_keys=True,
        )

    @classmethod
    def from_json(cls, text: str) -> "RunManifest":
        doc = json.loads(text)
        return cls(
            command=doc["command"],
            parameters=doc["parameters"],
            inputs=doc["inputs"],
            outputs=doc["outputs"],
            version=doc.get("version", "unknown"),
        )


def _sha256(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


class _Workspace:
    """Collects input digests and pending output bytes for one command run."""

    def __init__(self):
        self.inputs: dict[str, str] = {}
        self.outputs: dict[str, bytes] = {}

    def read(self, path: str) -> bytes:
        data = Path(path).read_bytes()
        self.inputs[path] = _sha256(data)
        return data

    def emit(self, path: str, data: bytes):
        self.outputs[path] = data

    def flush(self, command: str, parameters: dict, manifest_for: str | None):
        for path, data in self.outputs.items():
            p = Path(path)
            p.parent.mkdir(parents=True, exist_ok=True)
            p.write_bytes(data)
        if manifest_for is not None:
            manifest = RunManifest(
                command=command,
                parameters=parameters,
                inputs=self.inputs,
                outputs={path: _sha256(data) for path, data in self.outputs.items()},
            )
            Path(manifest_for + ".manifest.json").write_text(manifest.to_json() + "\n")


# ---------------------------------------------------------------------------
# input handling


def _parse_block(text: str) -> BlockGeometry:
    try:
        w, h = text.lower().split("x")
        return BlockGeometry(block_w=int(w), block_h=int(h))
    except (ValueError, TypeError):
        raise UsageError(f"--block expects WxH (e.g. 4x4), got {text!r}") from None


def _load_training_input(data: bytes, block: str) -> tuple[TrainingSet, Image | None, BlockGeometry | None]:
    """PGM bytes become block vectors; anything else parses as one vector per line."""
    if data[:2] in (b"P5", b"P2"):
        geom = _parse_block(block)
        img = read_pgm(data)
        return extract_blocks(img, geom), img, geom
    try:
        rows = [
            [float(tok) for tok in line.split()]
            for line in data.decode("utf-8").splitlines()
            if line.strip() and not line.lstrip().startswith("#")
        ]
    except (UnicodeDecodeError, ValueError) as exc:
        raise FormatError(f"input is neither PGM nor a numeric vector file: {exc}") from None
    if not rows:
        raise FormatError("vector file contains no vectors")
    widths = {len(r) for r in rows}
    if len(widths) != 1:
        raise FormatError(f"vector file rows have inconsistent dimensions {sorted(widths)}")
    return TrainingSet(vectors=np.asarray(rows)), None, None


def _fmt_db(value: float) -> str:
    return "inf" if math.isinf(value) else f"{value:.2f}"


def _fmt_full(value: float) -> str:
    return "inf" if math.isinf(value) else repr(float(value))


# ---------------------------------------------------------------------------
# codebook training shared by `train` and `compare`


@dataclass
class TrainOutcome:
    codebook: Codebook
    ap_iterations: int | None = None
    ap_converged: bool | None = None
    lbg_iterations: int | None = None
    rs: float | None = None
    preference: float | None = None
    energy_trace: list | None = None
    lbg_trace: list | None = None
    run_metrics: list | None = None  # per-restart PSNR (image) or distortion
    notes: str = ""


def _pipeline_config(params: dict, target_m: int, trace_energy: bool) -> PipelineConfig:
    return PipelineConfig(
        target_m=target_m,
        rs_initial=params["rs"] if params.get("rs") is not None else 0.1,
        rs_bounds=(params["rs_min"], params["rs_max"]),
        rs_search_max_steps=params["rs_search_max_steps"],
        ap=APConfig(
            damping=params["damping"],
            max_iterations=params["ap_max_iterations"],
            stable_window=params["stable_window"],
            trace_energy=trace_energy,
        ),
        lbg=LBGConfig(
            max_iterations=params["lbg_max_iterations"],
            threshold=params["threshold"],
            seed=params["seed"],
        ),
        size_policy=params["size_policy"],
    )


def _train_lbg(ts: TrainingSet, params: dict, img, geom) -> TrainOutcome:
    size = params["size"]
    if size is None:
        raise UsageError("--size is required for --algo lbg")
    cfg = LBGConfig(
        max_iterations=params["lbg_max_iterations"],
        threshold=params["threshold"],
        seed=params["seed"],
    )
    best = None
    metrics = []
    for run in range(params["runs"]):
        seed = params["seed"] + run
        result = lbg_refine(ts, init_random(ts, size, seed), cfg)
        d = result.distortion_trace[-1]
        if img is not None:
            reconstructed = decode(encode(img, result.codebook, geom), result.codebook)
            metrics.append(psnr(img, reconstructed))
        else:
            metrics.append(d)
        if best is None or d < best[0]:
            best = (d, seed, result)
    _, best_seed, result = best
    cb = Codebook(codewords=result.codebook.codewords, source=f"lbg(seed={best_seed})")
    return TrainOutcome(
        codebook=cb,
        lbg_iterations=result.iterations_run,
        lbg_trace=list(result.distortion_trace),
        run_metrics=metrics,
        notes=f"best seed {best_seed} of {params['runs']} runs",
    )


def _exemplar_codebook(ts: TrainingSet, ap_result, label: str) -> Codebook:
    return Codebook(codewords=ts.vectors[ap_result.exemplar_indices].copy(), source=label)


def _train_ap(ts: TrainingSet, params: dict, trace_energy: bool) -> TrainOutcome:
    size = params["size"]
    sim = build_similarity(ts)
    cfg = _pipeline_config(params, size or 1, trace_energy)
    if params.get("preference") is not None:
        value = params["preference"]
        result = run_ap(apply_preference(sim, UniformPreference(value)), cfg.ap)
    elif size is not None:
        scale, result = search_uniform_scale(sim, size, cfg)
        value = scale * median_off_diagonal(sim)
    else:
        raise UsageError("--algo ap needs --size or --preference")
    cb = _exemplar_codebook(ts, result, f"ap(preference={value:g})")
    if size is not None and cb.m != size and params["size_policy"] == "exact":
        cb = adjust_codebook_size(cb, size, ts)
    return TrainOutcome(
        codebook=cb,
        ap_iterations=result.iterations_run,
        ap_converged=result.converged,
        preference=value,
        energy_trace=result.energy_trace,
    )


def _train_iap(ts: TrainingSet, params: dict, trace_energy: bool) -> TrainOutcome:
    size = params["size"]
    sim = build_similarity(ts)
    cfg = _pipeline_config(params, size or 1, trace_energy)
    if size is None:
        if params.get("rs") is None:
            raise UsageError("--algo iap needs --size or --rs")
        rs = params["rs"]
        result = run_ap(apply_preference(sim, NetworkSupportPreference(rs)), cfg.ap)
    else:
        rs, result = search_rs(sim, size, cfg)
    cb = _exemplar_codebook(ts, result, f"iap(rs={rs:g})")
    if size is not None and cb.m != size and params["size_policy"] == "exact":
        cb = adjust_codebook_size(cb, size, ts)
    return TrainOutcome(
        codebook=cb,
        ap_iterations=result.iterations_run,
        ap_converged=result.converged,
        rs=rs,
        energy_trace=result.energy_trace,
    )


def _train_iap_lbg(ts: TrainingSet, params: dict, trace_energy: bool, image_scale: bool) -> TrainOutcome:
    size = params["size"]
    if size is None:
        raise UsageError("--size is required for --algo iap-lbg")
    cfg = _pipeline_config(params, size, trace_energy)
    result = run_iap_lbg(ts, cfg, image_scale=image_scale)
    return TrainOutcome(
        codebook=result.codebook,
        ap_iterations=result.iap_result.iterations_run,
        ap_converged=result.iap_result.converged,
        lbg_iterations=result.lbg_result.iterations_run,
        rs=result.rs_used,
        energy_trace=result.iap_result.energy_trace,
        lbg_trace=list(result.lbg_result.distortion_trace),
        notes=f"{result.exemplar_count_before_adjust} exemplars before size adjustment",
    )


def _train_codebook(
    ts: TrainingSet, params: dict, img=None, geom=None, trace_energy: bool = False
) -> TrainOutcome:
    algo = params["algo"]
    if algo == "lbg":
        return _train_lbg(ts, params, img, geom)
    if algo == "ap":
        return _train_ap(ts, params, trace_energy)
    if algo == "iap":
        return _train_iap(ts, params, trace_energy)
    if algo == "iap-lbg":
        return _train_iap_lbg(ts, params, trace_energy, img is not None)
    raise UsageError(f"unknown algorithm {algo!r}")


# ---------------------------------------------------------------------------
# commands


def _cmd_train(params: dict, ws: _Workspace) -> int:
    data = ws.read(params["input"])
    ts, img, geom = _load_training_input(data, params["block"])
    outcome = _train_codebook(ts, params, img=img, geom=geom)
    ws.emit(params["output"], write_codebook_file(outcome.codebook))

    print(f"trained {outcome.codebook.m}x{outcome.codebook.dim} codebook ({outcome.codebook.source})")
    if outcome.run_metrics is not None:
        fmt = _fmt_db if img is not None else _fmt_full
        kind = "PSNR dB" if img is not None else "distortion"
        best = max(outcome.run_metrics) if img is not None else min(outcome.run_metrics)
        mean = sum(outcome.run_metrics) / len(outcome.run_metrics)
        print(f"restarts: best {kind} {fmt(best)}, mean {kind} {fmt(mean)} over {len(outcome.run_metrics)} runs")
    if outcome.ap_iterations is not None:
        print(f"message passing: {outcome.ap_iterations} iterations, converged={outcome.ap_converged}")
    if outcome.notes:
        print(outcome.notes)
    return 0


def _infer_geometry(params: dict, cb: Codebook) -> BlockGeometry:
    if params.get("block"):
        geom = _parse_block(params["block"])
        if geom.dim != cb.dim:
            raise UsageError(f"--block {params['block']} gives dim {geom.dim}, codebook has {cb.dim}")
        return geom
    side = math.isqrt(cb.dim)
    if side * side != cb.dim:
        raise UsageError(f"codebook dim {cb.dim} is not square; pass --block WxH")
    return BlockGeometry(block_w=side, block_h=side)


def _cmd_encode(params: dict, ws: _Workspace) -> int:
    img = read_pgm(ws.read(params["input"]))
    cb = read_codebook_file(ws.read(params["codebook"]))
    geom = _infer_geometry(params, cb)
    index_map = encode(img, cb, geom)
    ws.emit(params["output"], write_index_file(index_map))
    print(f"encoded {img.width}x{img.height} into {index_map.indices.size} indices (M={cb.m})")
    return 0


def _cmd_decode(params: dict, ws: _Workspace) -> int:
    index_map = read_index_file(ws.read(params["input"]))
    cb = read_codebook_file(ws.read(params["codebook"]))
    actual = codebook_digest(cb)
    if actual != index_map.codebook_digest:
        raise DigestMismatchError(index_map.codebook_digest, actual)
    img = decode(index_map, cb)
    ws.emit(params["output"], write_pgm(img))
    print(f"decoded {img.width}x{img.height} image")
    return 0


def _cmd_eval(params: dict, ws: _Workspace) -> int:
    a = read_pgm(ws.read(params["input_a"]))
    b = read_pgm(ws.read(params["input_b"]))
    value = psnr(a, b)
    print(f"PSNR: {_fmt_db(value)} dB ({_fmt_full(value)})")
    return 0


def _reconstruction_psnr(img: Image, cb: Codebook, geom: BlockGeometry) -> float:
    return psnr(img, decode(encode(img, cb, geom), cb))


def _csv_row(
    mode, image, algo, cb=None, psnr_value=None, outcome=None, params=None
) -> str:
    def opt(v, fmt=str):
        return "" if v is None else fmt(v)

    o = outcome
    cells = [
        mode,
        image,
        algo,
        opt(cb.m if cb else None),
        opt(psnr_value, _fmt_db),
        opt(psnr_value, _fmt_full),
        opt(o.ap_iterations if o else None),
        opt(o.ap_converged if o else None, lambda b: str(bool(b)).lower()),
        opt(o.lbg_iterations if o else None),
        opt(o.rs if o else None, _fmt_full),
        opt(o.preference if o else None, _fmt_full),
        opt(params["seed"] if o and algo == "lbg" else None),
        opt(params["runs"] if o and algo == "lbg" else None),
        opt(
            (sum(o.run_metrics) / len(o.run_metrics)) if o and o.run_metrics else None,
            _fmt_db,
        ),
    ]
    return ",".join(str(c) for c in cells)


def _cmd_compare(params: dict, ws: _Workspace) -> int:
    geom = _parse_block(params["block"])
    algos = params["algos"]
    for algo in algos:
        if algo not in ALGOS:
            raise UsageError(f"unknown algorithm {algo!r}; choose from {', '.join(ALGOS)}")

    paths = list(params["images"])
    universal = params.get("universal")
    if universal and universal not in paths:
        paths.append(universal)

    loaded: dict[str, tuple[str, Image, TrainingSet]] = {}
    order = []
    for path in paths:
        img = read_pgm(ws.read(path))
        name = Path(path).stem
        loaded[path] = (name, img, extract_blocks(img, geom))
        order.append(path)

    trace_dir = params.get("trace")
    trained: dict[tuple[str, str], TrainOutcome] = {}

    def outcome_for(path: str, algo: str) -> TrainOutcome:
        key = (path, algo)
        if key not in trained:
            name, img, ts = loaded[path]
            outcome = _train_codebook(ts, {**params, "algo": algo}, img=img, geom=geom,
                                      trace_energy=trace_dir is not None)
            trained[key] = outcome
            if trace_dir is not None:
                if outcome.energy_trace is not None:
                    lines = ["iteration,net_similarity"] + [
                        f"{i + 1},{_fmt_full(v)}" for i, v in enumerate(outcome.energy_trace)
                    ]
                    ws.emit(str(Path(trace_dir) / f"{name}__{algo}__energy.csv"),
                            ("\n".join(lines) + "\n").encode())
                if outcome.lbg_trace is not None:
                    lines = ["iteration,distortion"] + [
                        f"{i + 1},{_fmt_full(v)}" for i, v in enumerate(outcome.lbg_trace)
                    ]
                    ws.emit(str(Path(trace_dir) / f"{name}__{algo}__distortion.csv"),
                            ("\n".join(lines) + "\n").encode())
        return trained[key]

    rows = [CSV_COLUMNS]
    within_paths = [p for p in order if p in params["images"]]

    for mode, cb_source in (("within", None), ("universal", universal)):
        if mode == "universal" and not universal:
            continue
        for algo in algos:
            psnrs = []
            for path in within_paths:
                name, img, _ = loaded[path]
                outcome = outcome_for(cb_source or path, algo)
                value = _reconstruction_psnr(img, outcome.codebook, geom)
                psnrs.append(value)
                rows.append(_csv_row(mode, name, algo, outcome.codebook, value, outcome, params))
            mean = sum(psnrs) / len(psnrs)
            rows.append(_csv_row(mode, "average", algo, None, mean, None, params))

    ws.emit(params["output"], ("\n".join(rows) + "\n").encode())
    print(f"compared {len(within_paths)} image(s) x {len(algos)} algorithm(s) -> {params['output']}")
    return 0


_COMMANDS = {
    "train": _cmd_train,
    "encode": _cmd_encode,
    "decode": _cmd_decode,
    "eval": _cmd_eval,
    "compare": _cmd_compare,
}

_NO_MANIFEST = {"eval"}


def _execute(command: str, params: dict) -> int:
    ws = _Workspace()
    code = _COMMANDS[command](params, ws)
    manifest_for = None if command in _NO_MANIFEST else params.get("output")
    ws.flush(command, params, manifest_for)
    return code


def _cmd_replay(args) -> int:
    manifest = RunManifest.from_json(Path(args.manifest).read_text())
    if manifest.version != __version__:
        print(f"warning: manifest from version {manifest.version}, tool is {__version__}",
              file=sys.stderr)
    for path, digest in manifest.inputs.items():
        actual = _sha256(Path(path).read_bytes())
        if actual != digest:
            raise DigestMismatchError(bytes.fromhex(digest), bytes.fromhex(actual))

    params = dict(manifest.parameters)
    ws = _Workspace()
    _COMMANDS[manifest.command](params, ws)

    out_dir = Path(args.out_dir) if args.out_dir else None
    failures = []
    for path, data in ws.outputs.items():
        target = str(out_dir / Path(path).name) if out_dir else path
        p = Path(target)
        p.parent.mkdir(parents=True, exist_ok=True)
        p.write_bytes(data)
        if _sha256(data) != manifest.outputs[path]:
            failures.append(path)
    if failures:
        print(f"replay MISMATCH for: {', '.join(failures)}", file=sys.stderr)
        return 4
    print(f"replay ok: {len(ws.outputs)} output(s) byte-identical")
    return 0


# ---------------------------------------------------------------------------
# argument parsing


def _add_algo_options(sp, with_algo_choice: bool):
    if with_algo_choice:
        sp.add_argument("--algo", choices=ALGOS, default="iap-lbg")
    sp.add_argument("--size", type=int, default=None, help="target codebook size")
    sp.add_argument("--block", default="4x4", help="block geometry WxH (default 4x4)")
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--runs", type=int, default=20, help="LBG random restarts (default 20)")
    sp.add_argument("--rs", type=float, default=None,
                    help="network-support ratio (fixed for iap, initial for searches)")
    sp.add_argument("--preference", type=float, default=None,
                    help="uniform self-similarity for ap (default: tuned, or the median)")
    sp.add_argument("--damping", type=float, default=0.5)
    sp.add_argument("--ap-max-iterations", type=int, default=1000)
    sp.add_argument("--stable-window", type=int, default=50)
    sp.add_argument("--lbg-max-iterations", type=int, default=50)
    sp.add_argument("--threshold", type=float, default=1e-8)
    sp.add_argument("--rs-search-max-steps", type=int, default=40)
    sp.add_argument("--rs-min", type=float, default=1e-4)
    sp.add_argument("--rs-max", type=float, default=16.0)
    sp.add_argument("--size-policy", choices=("exact", "nearest"), default="exact")


_ALGO_KEYS = (
    "size", "block", "seed", "runs", "rs", "preference", "damping",
    "ap_max_iterations", "stable_window", "lbg_max_iterations", "threshold",
    "rs_search_max_steps", "rs_min", "rs_max", "size_policy",
)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="vqcb", description="Vector-quantization codebook design and image coding toolkit"
    )
    parser.add_argument("--version", action="version", version=f"vqcb {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("train", help="train a codebook from an image or vector file")
    sp.add_argument("input", help="PGM image or whitespace-separated vector file")
    sp.add_argument("-o", "--output", required=True, help="output .vqcb path")
    _add_algo_options(sp, with_algo_choice=True)

    sp = sub.add_parser("encode", help="encode a PGM against a codebook")
    sp.add_argument("input", help="PGM image")
    sp.add_argument("--codebook", required=True)
    sp.add_argument("--block", default=None, help="block WxH (default: inferred)")
    sp.add_argument("-o", "--output", required=True, help="output .vqix path")

    sp = sub.add_parser("decode", help="decode a VQIX index map back to a PGM")
    sp.add_argument("input", help="VQIX index file")
    sp.add_argument("--codebook", required=True)
    sp.add_argument("-o", "--output", required=True, help="output .pgm path")

    sp = sub.add_parser("eval", help="PSNR between two PGM images")
    sp.add_argument("input_a")
    sp.add_argument("input_b")

    sp = sub.add_parser("compare", help="compare algorithms over images, emit CSV")
    sp.add_argument("images", nargs="+", help="PGM images")
    sp.add_argument("--algos", default="lbg,ap,iap,iap-lbg",
                    help="comma-separated subset of: " + ", ".join(ALGOS))
    sp.add_argument("-o", "--output", required=True, help="output CSV path")
    sp.add_argument("--universal", default=None,
                    help="also evaluate this image's codebooks on every image")
    sp.add_argument("--trace", default=None,
                    help="directory for per-iteration energy/distortion trace CSVs")
    _add_algo_options(sp, with_algo_choice=False)

    sp = sub.add_parser("replay", help="re-run a manifest and verify outputs")
    sp.add_argument("manifest")
    sp.add_argument("--out-dir", default=None, help="redirect outputs into this directory")

    return parser


def _params_from_args(args) -> dict:
    params = {k: getattr(args, k) for k in _ALGO_KEYS if hasattr(args, k)}
    if args.command == "train":
        params.update(input=args.input, output=args.output, algo=args.algo)
    elif args.command == "encode":
        params.update(input=args.input, codebook=args.codebook, output=args.output,
                      block=args.block)
    elif args.command == "decode":
        params.update(input=args.input, codebook=args.codebook, output=args.output)
    elif args.command == "eval":
        params.update(input_a=args.input_a, input_b=args.input_b)
    elif args.command == "compare":
        params.update(
            images=list(args.images),
            algos=[a.strip() for a in args.algos.split(",") if a.strip()],
            output=args.output,
            universal=args.universal,
            trace=args.trace,
        )
    return params


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "replay":
            return _cmd_replay(args)
        return _execute(args.command, _params_from_args(args))
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (PGMParseError, FormatError, OSError, json.JSONDecodeError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except DigestMismatchError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 5
    except (SizeSearchError, NoExemplarsError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
