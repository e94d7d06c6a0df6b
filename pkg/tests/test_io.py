import json
import struct
import zlib

import numpy as np
import pytest
from hypothesis import given, settings

from conftest import assert_same_model, dags, layered, random_model
from dagnet.cells import ReductionCell, build_cell_dan
from dagnet.errors import CycleError, FormatError, TruncationError, UnsupportedModelError
from dagnet.generators import generate_random_layered_dag
from dagnet.graph import Dag, LayeredDag
from dagnet.io import (MAGIC, dumps_graph, graph_from_dict, load_graph, load_model, loads_graph,
                       model_from_bytes, model_to_bytes, save_graph, save_model)
from dagnet.models import MaskedDeepFFN, build_dan


def split(buf):
    (hlen,) = struct.unpack("<I", buf[8:12])
    return json.loads(buf[12:12 + hlen]), buf[12 + hlen:]


def join(header, payload):
    h = json.dumps(header, sort_keys=True, separators=(",", ":")).encode()
    return MAGIC + struct.pack("<I", len(h)) + h + payload


class TestGraphJSON:
    def test_document_shape(self):
        doc = json.loads(dumps_graph(layered([(0, 1), (1, 2)])))
        assert doc == {"version": 1, "directed": True, "nodes": [0, 1, 2],
                       "edges": [[0, 1], [1, 2]], "layers": {"0": 0, "1": 1, "2": 2}}

    def test_layers_optional(self):
        lg = loads_graph('{"version":1,"directed":true,"nodes":[0,1,2],"edges":[[0,2],[1,2],[0,1]]}')
        assert isinstance(lg, LayeredDag)
        assert dict(lg.layer_of) == {0: 0, 1: 1, 2: 2}

    def test_empty(self):
        g = loads_graph(dumps_graph(Dag()))
        assert len(g) == 0

    @settings(max_examples=100, deadline=None)
    @given(dags(max_n=40))
    def test_round_trip(self, g):
        back = loads_graph(dumps_graph(g))
        assert back.nodes == g.nodes and back.edges == g.edges
        assert dumps_graph(back) == dumps_graph(g)

    def test_file_round_trip(self, tmp_path):
        lg = generate_random_layered_dag(30, 4, 0.3, seed=2)
        save_graph(lg, tmp_path / "g.json")
        back = load_graph(tmp_path / "g.json")
        assert back.edges == lg.edges and back.layers == lg.layers

    @pytest.mark.parametrize("text", [
        "not json",
        '{"version":2,"directed":true,"nodes":[],"edges":[]}',
        '{"version":1,"directed":false,"nodes":[],"edges":[]}',
        '{"version":1,"directed":true,"nodes":[0],"edges":[[0,1]]}',
        '{"version":1,"directed":true,"nodes":[0,1],"edges":[[0,1]],"layers":{"0":0,"1":5}}',
        '{"version":1,"directed":true,"nodes":[0,1]}',
        '[1,2]',
    ])
    def test_rejects(self, text):
        with pytest.raises(FormatError):
            loads_graph(text)

    def test_cycle_rejected(self):
        with pytest.raises(CycleError):
            graph_from_dict({"version": 1, "directed": True, "nodes": [0, 1], "edges": [[0, 1], [1, 0]]})


class TestCheckpoint:
    def test_ffn_round_trip(self, tmp_path):
        m = MaskedDeepFFN(2, 3, [4], seed=5)
        save_model(m, tmp_path / "m.ckpt")
        assert_same_model(m, load_model(tmp_path / "m.ckpt"))

    def test_randomized_round_trips(self):
        rng = np.random.default_rng(0)
        for _ in range(100):
            m = random_model(rng)
            buf = model_to_bytes(m)
            back = model_from_bytes(buf)
            assert_same_model(m, back)
            assert model_to_bytes(back) == buf

    def test_layout(self):
        buf = model_to_bytes(MaskedDeepFFN(2, 3, [4]))
        header, payload = split(buf)
        assert buf[:8] == b"DAGNETCK"
        assert header["format_version"] == 1 and header["model_kind"] == "ffn"
        assert header["crc32"] == zlib.crc32(payload)
        recs = {r["name"]: r for r in header["manifest"]}
        assert recs["hidden0.weight"]["dtype"] == "<f4" and recs["hidden0.mask"]["dtype"] == "u1"
        assert sum(r["nbytes"] for r in header["manifest"]) == len(payload) == header["payload_length"]
        w = np.frombuffer(payload, "<f4", count=8, offset=recs["hidden0.weight"]["offset"])
        assert w.size == 8

    def test_reduction_cells_round_trip(self):
        def ctor(is_input, is_output, in_degree, out_degree, layer, c):
            return ReductionCell(c if is_input else in_degree, 1)

        m = build_cell_dan(3, 2, ctor, layered([(0, 1)]), seed=4)
        assert_same_model(m, model_from_bytes(model_to_bytes(m)))

    def test_payload_byte_flip(self):
        buf = bytearray(model_to_bytes(MaskedDeepFFN(2, 3, [4])))
        buf[-3] ^= 0xFF
        with pytest.raises(FormatError, match="checksum"):
            model_from_bytes(bytes(buf))

    def test_unsupported_version(self):
        header, payload = split(model_to_bytes(MaskedDeepFFN(2, 3, [4])))
        header["format_version"] = 99
        with pytest.raises(FormatError, match=r"supported versions: \[1\]"):
            model_from_bytes(join(header, payload))

    def test_bad_magic(self):
        buf = model_to_bytes(MaskedDeepFFN(2, 3, [4]))
        with pytest.raises(FormatError, match="magic"):
            model_from_bytes(b"XXXXXXXX" + buf[8:])

    @pytest.mark.parametrize("cut", [4, 10, 30, -1, -20])
    def test_truncated(self, cut):
        buf = model_to_bytes(MaskedDeepFFN(2, 3, [4]))
        with pytest.raises(TruncationError):
            model_from_bytes(buf[:cut])

    def test_trailing_bytes(self):
        with pytest.raises(FormatError):
            model_from_bytes(model_to_bytes(MaskedDeepFFN(2, 3, [4])) + b"\0")

    def test_manifest_mismatch(self):
        header, payload = split(model_to_bytes(MaskedDeepFFN(2, 3, [4])))
        header["dims"]["hidden_sizes"] = [5]
        with pytest.raises(FormatError):
            model_from_bytes(join(header, payload))

    def test_unregistered_cell(self):
        class Custom(ReductionCell):
            kind = "custom"

        m = build_cell_dan(2, 1, lambda *a: Custom(1, 1), Dag(nodes=[0]))
        with pytest.raises(UnsupportedModelError):
            model_to_bytes(m)

    def test_deterministic_bytes(self):
        a = model_to_bytes(build_dan(3, 2, generate_random_layered_dag(15, 3, 0.4, seed=1), seed=3))
        b = model_to_bytes(build_dan(3, 2, generate_random_layered_dag(15, 3, 0.4, seed=1), seed=3))
        assert a == b
