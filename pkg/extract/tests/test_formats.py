import json
import struct

import numpy as np

from vidseg_extract.formats import write_feat, write_frame_proposals


class TestFeatWriter:
    def test_header_and_payload(self, tmp_path):
        rows = np.arange(12, dtype=np.float32).reshape(3, 4)
        path = tmp_path / "x.feat"
        write_feat(path, rows)
        data = path.read_bytes()
        assert data[:4] == b"FEAT"
        count, dim = struct.unpack_from("<II", data, 4)
        assert (count, dim) == (3, 4)
        back = np.frombuffer(data[12:], dtype="<f4").reshape(3, 4)
        assert np.array_equal(back, rows)

    def test_overwrite_is_atomic_result(self, tmp_path):
        path = tmp_path / "x.feat"
        write_feat(path, np.zeros((2, 3), dtype=np.float32))
        write_feat(path, np.ones((1, 3), dtype=np.float32))
        data = path.read_bytes()
        count, dim = struct.unpack_from("<II", data, 4)
        assert (count, dim) == (1, 3)
        assert not list(tmp_path.glob(".x.feat.*"))  # no temp leftovers


class TestProposalWriter:
    def test_layout_and_scores(self, tmp_path):
        maps = [np.full((4, 5), 0.8), np.zeros((4, 5))]
        out = write_frame_proposals(tmp_path / "proposals", 7, maps, [0.9, 0.1])
        assert out.name == "00007"
        manifest = json.loads((out / "manifest.json").read_text())
        assert manifest["frame"] == 7
        assert [e["score"] for e in manifest["proposals"]] == [0.9, 0.1]
        assert (out / "m_00.png").is_file() and (out / "m_01.png").is_file()

    def test_rewrite_replaces_directory(self, tmp_path):
        root = tmp_path / "proposals"
        write_frame_proposals(root, 0, [np.zeros((2, 2))] * 3, [0.3, 0.2, 0.1])
        write_frame_proposals(root, 0, [np.zeros((2, 2))], [0.5])
        manifest = json.loads((root / "00000" / "manifest.json").read_text())
        assert len(manifest["proposals"]) == 1
        assert not (root / "00000" / "m_01.png").exists()
