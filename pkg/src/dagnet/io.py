"""Graph JSON files and binary model checkpoints.

Checkpoint layout (all integers little-endian)::

    b"DAGNETCK"                 8-byte magic
    uint32                      header length in bytes
    header                      UTF-8 JSON, sorted keys
    payload                     arrays back to back, in manifest order

The header carries ``format_version``, ``model_kind``, the model dimensions,
``activation``, ``seed``, a ``manifest`` of ``{name, dtype, shape, offset,
nbytes}`` records, ``payload_length`` and the CRC32 of the payload.
Weights and biases are stored as ``<f4``, masks as ``u1``.
"""
from __future__ import annotations

import json
import struct
import zlib
from pathlib import Path

import numpy as np

from .cells import CELL_TYPES, DeepCellDAN
from .errors import FormatError, TruncationError, UnsupportedModelError
from .graph import Dag, LayeredDag, compute_layering
from .models import MaskedDeepDAN, MaskedDeepFFN

__all__ = [
    "graph_to_dict",
    "graph_from_dict",
    "dumps_graph",
    "loads_graph",
    "save_graph",
    "load_graph",
    "model_to_bytes",
    "model_from_bytes",
    "save_model",
    "load_model",
    "MAGIC",
    "FORMAT_VERSION",
    "SUPPORTED_VERSIONS",
]

GRAPH_VERSION = 1
MAGIC = b"DAGNETCK"
FORMAT_VERSION = 1
SUPPORTED_VERSIONS = (1,)
_DTYPES = {"<f4": np.dtype("<f4"), "<f8": np.dtype("<f8"), "u1": np.dtype("u1")}


# -- graphs ------------------------------------------------------------------

def graph_to_dict(g: LayeredDag | Dag, include_layers: bool = True) -> dict:
    lg = g if isinstance(g, LayeredDag) or len(g) == 0 else compute_layering(g)
    out = {"version": GRAPH_VERSION, "directed": True,
           "nodes": list(lg.nodes), "edges": [list(e) for e in lg.edges]}
    if include_layers and isinstance(lg, LayeredDag):
        out["layers"] = {str(v): lg.layer_of[v] for v in lg.nodes}
    return out


def graph_from_dict(d: dict) -> LayeredDag | Dag:
    """Parse a graph document; returns a plain empty :class:`Dag` for an empty graph."""
    if not isinstance(d, dict):
        raise FormatError("graph document must be a JSON object")
    if d.get("version") != GRAPH_VERSION:
        raise FormatError(f"unsupported graph version {d.get('version')!r}; supported: [{GRAPH_VERSION}]")
    if d.get("directed") is not True:
        raise FormatError("graph must be directed")
    try:
        nodes = [int(v) for v in d["nodes"]]
        edges = [(int(u), int(v)) for u, v in d["edges"]]
    except (KeyError, TypeError, ValueError) as exc:
        raise FormatError(f"malformed graph document: {exc}") from exc
    if any(isinstance(v, bool) for v in d["nodes"]):
        raise FormatError("node ids must be integers")
    known = set(nodes)
    if any(u not in known or v not in known for u, v in edges):
        raise FormatError("edge endpoint not listed in nodes")
    dag = Dag.from_edges(edges, nodes=nodes)
    if not nodes:
        return Dag()
    lg = compute_layering(dag)
    if "layers" in d:
        try:
            given = {int(k): int(v) for k, v in d["layers"].items()}
        except (AttributeError, TypeError, ValueError) as exc:
            raise FormatError(f"malformed layers map: {exc}") from exc
        if given != dict(lg.layer_of):
            raise FormatError("stored layers disagree with the longest-path layering of the edges")
    return lg


def dumps_graph(g: LayeredDag | Dag) -> str:
    return json.dumps(graph_to_dict(g), separators=(",", ":"))


def loads_graph(text: str) -> LayeredDag | Dag:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise FormatError(f"invalid graph JSON: {exc}") from exc
    return graph_from_dict(doc)


def save_graph(g: LayeredDag | Dag, path) -> None:
    Path(path).write_text(dumps_graph(g) + "\n", encoding="utf-8")


def load_graph(path) -> LayeredDag | Dag:
    try:
        text = Path(path).read_bytes().decode("utf-8")
    except UnicodeDecodeError as exc:
        raise FormatError(f"{path}: not UTF-8") from exc
    return loads_graph(text)


# -- checkpoints ---------------------------------------------------------------

def _arrays(model) -> list[tuple[str, np.ndarray]]:
    out = []
    for name, p in model.named_parameters():
        dt = "<f8" if p.dtype == np.float64 else "<f4"
        out.append((name, p.data.astype(dt)))
    for layer in model.maskable_layers():
        out.append((f"{layer.name}.mask", layer.mask.astype("u1")))
    return out


def _header(model) -> dict:
    h = {"format_version": FORMAT_VERSION, "model_kind": model.kind, "seed": model.seed}
    if isinstance(model, MaskedDeepFFN):
        h["dims"] = {"input_size": model.input_size, "output_size": model.output_size,
                     "hidden_sizes": model.hidden_sizes}
    elif isinstance(model, MaskedDeepDAN):
        h["dims"] = {"input_size": model.input_size, "output_size": model.output_size,
                     "layer_sizes": model.layer_sizes}
        h["structure"] = graph_to_dict(model.structure)
    elif isinstance(model, DeepCellDAN):
        h["dims"] = {"num_classes": model.num_classes, "input_channel_size": model.input_channel_size}
        h["structure"] = graph_to_dict(model.structure)
        cells = {}
        for v, cell in model.cells.items():
            if CELL_TYPES.get(cell.kind) is not type(cell):
                raise UnsupportedModelError(f"cell {type(cell).__name__} at vertex {v} is not a registered cell type")
            cells[str(v)] = {"kind": cell.kind, "config": cell.config()}
        h["cells"] = cells
    else:
        raise UnsupportedModelError(f"cannot checkpoint {type(model).__name__}")
    h["activation"] = model.activation
    h["init_fanin"] = model.init_fanin
    return h


def model_to_bytes(model) -> bytes:
    header = _header(model)
    manifest, chunks, offset = [], [], 0
    for name, arr in _arrays(model):
        raw = np.ascontiguousarray(arr).tobytes()
        manifest.append({"name": name, "dtype": arr.dtype.str if arr.dtype.str != "|u1" else "u1",
                         "shape": list(arr.shape), "offset": offset, "nbytes": len(raw)})
        chunks.append(raw)
        offset += len(raw)
    payload = b"".join(chunks)
    header.update(manifest=manifest, payload_length=len(payload), crc32=zlib.crc32(payload))
    hbytes = json.dumps(header, sort_keys=True, separators=(",", ":")).encode("utf-8")
    return MAGIC + struct.pack("<I", len(hbytes)) + hbytes + payload


def _parse(buf: bytes) -> tuple[dict, bytes]:
    if len(buf) < len(MAGIC) + 4:
        if MAGIC.startswith(buf[: len(MAGIC)]) and buf:
            raise TruncationError("checkpoint truncated inside the preamble")
        raise FormatError("not a checkpoint: bad magic")
    if buf[: len(MAGIC)] != MAGIC:
        raise FormatError("not a checkpoint: bad magic")
    (hlen,) = struct.unpack("<I", buf[len(MAGIC): len(MAGIC) + 4])
    start = len(MAGIC) + 4
    if len(buf) < start + hlen:
        raise TruncationError(f"header declares {hlen} bytes, only {len(buf) - start} present")
    try:
        header = json.loads(buf[start: start + hlen].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise FormatError(f"corrupt checkpoint header: {exc}") from exc
    if not isinstance(header, dict):
        raise FormatError("corrupt checkpoint header")
    version = header.get("format_version")
    if version not in SUPPORTED_VERSIONS:
        raise FormatError(f"unsupported checkpoint format_version {version!r}; "
                          f"supported versions: {list(SUPPORTED_VERSIONS)}")
    payload = buf[start + hlen:]
    need = header.get("payload_length")
    if not isinstance(need, int):
        raise FormatError("header lacks payload_length")
    if len(payload) < need:
        raise TruncationError(f"payload declares {need} bytes, only {len(payload)} present")
    if len(payload) > need:
        raise FormatError(f"{len(payload) - need} trailing bytes after payload")
    if zlib.crc32(payload) != header.get("crc32"):
        raise FormatError("payload checksum mismatch")
    end = 0
    for rec in header.get("manifest", []):
        if rec["offset"] != end or rec["dtype"] not in _DTYPES:
            raise FormatError(f"bad manifest entry {rec.get('name')!r}")
        if rec["nbytes"] != int(np.prod(rec["shape"], dtype=np.int64)) * _DTYPES[rec["dtype"]].itemsize:
            raise FormatError(f"manifest size mismatch for {rec['name']!r}")
        end += rec["nbytes"]
    if end != need:
        raise FormatError("manifest does not cover the payload exactly")
    return header, payload


def _build(header: dict):
    kind, dims = header["model_kind"], header["dims"]
    dtype = np.float32
    for rec in header["manifest"]:
        if rec["dtype"] == "<f8":
            dtype = np.float64
    common = dict(seed=header["seed"], dtype=dtype)
    if kind == "ffn":
        return MaskedDeepFFN(dims["input_size"], dims["output_size"], dims["hidden_sizes"],
                             activation=header["activation"], init_fanin=header["init_fanin"], **common)
    if kind == "dan":
        structure = graph_from_dict(header["structure"])
        return MaskedDeepDAN(dims["input_size"], dims["output_size"], structure,
                             activation=header["activation"], init_fanin=header["init_fanin"], **common)
    if kind == "cell":
        structure = graph_from_dict(header["structure"])
        specs = header["cells"]
        calls = iter([v for layer in structure.layers for v in layer])  # DeepCellDAN build order

        def constructor(*_):
            spec = specs[str(next(calls))]
            return CELL_TYPES[spec["kind"]](**spec["config"], dtype=dtype)

        return DeepCellDAN(dims["num_classes"], dims["input_channel_size"], constructor, structure, **common)
    raise FormatError(f"unknown model_kind {kind!r}")


def model_from_bytes(buf: bytes):
    header, payload = _parse(buf)
    try:
        model = _build(header)
    except (KeyError, TypeError) as exc:
        raise FormatError(f"incomplete checkpoint header: {exc}") from exc
    params = dict(model.named_parameters())
    layers = {layer.name: layer for layer in model.maskable_layers()}
    seen = set()
    for rec in header["manifest"]:
        name = rec["name"]
        arr = np.frombuffer(payload, dtype=_DTYPES[rec["dtype"]], count=int(np.prod(rec["shape"], dtype=np.int64)),
                            offset=rec["offset"]).reshape(rec["shape"])
        if name.endswith(".mask") and name[:-5] in layers:
            layers[name[:-5]].set_mask(arr)
        elif name in params and params[name].shape == arr.shape:
            params[name].data[...] = arr
        else:
            raise FormatError(f"manifest entry {name!r} does not match the model")
        seen.add(name)
    expected = set(params) | {f"{n}.mask" for n in layers}
    if seen != expected:
        raise FormatError(f"checkpoint is missing arrays: {sorted(expected - seen)}")
    return model


def save_model(model, path) -> None:
    Path(path).write_bytes(model_to_bytes(model))


def load_model(path):
    return model_from_bytes(Path(path).read_bytes())
