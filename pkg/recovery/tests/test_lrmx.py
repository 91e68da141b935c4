import tempfile
from pathlib import Path

import numpy as np
from django.test import SimpleTestCase
from numpy.testing import assert_array_equal

from recovery.exceptions import FormatError
from recovery.utils.lrmx import HEADER, encode_matrix, read_csv, read_lrmx, read_lrmx_stack, write_csv, write_lrmx, write_lrmx_stack


class LrmxTests(SimpleTestCase):
    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.addCleanup(self.tmp.cleanup)
        self.dir = Path(self.tmp.name)
        self.matrix = np.random.default_rng(2).standard_normal((4, 3))

    def test_single_record_is_bit_exact(self):
        write_lrmx(self.dir / "m.lrmx", self.matrix)
        assert_array_equal(read_lrmx(self.dir / "m.lrmx"), self.matrix)

    def test_header_layout(self):
        payload = encode_matrix(self.matrix)
        self.assertEqual(payload[:4], b"LRMX")
        self.assertEqual(HEADER.unpack_from(payload), (b"LRMX", 1, 4, 3))
        self.assertEqual(len(payload), HEADER.size + 12 * 8)

    def test_bad_magic(self):
        payload = bytearray(encode_matrix(self.matrix))
        payload[:4] = b"XXXX"
        (self.dir / "bad.lrmx").write_bytes(bytes(payload))
        with self.assertRaises(FormatError):
            read_lrmx(self.dir / "bad.lrmx")

    def test_truncated_body(self):
        (self.dir / "short.lrmx").write_bytes(encode_matrix(self.matrix)[:-8])
        with self.assertRaises(FormatError):
            read_lrmx(self.dir / "short.lrmx")

    def test_unsupported_version(self):
        payload = HEADER.pack(b"LRMX", 2, 1, 1) + np.zeros(1).tobytes()
        (self.dir / "v2.lrmx").write_bytes(payload)
        with self.assertRaises(FormatError):
            read_lrmx(self.dir / "v2.lrmx")

    def test_single_reader_rejects_stacks(self):
        write_lrmx_stack(self.dir / "s.lrmx", np.stack([self.matrix, self.matrix]))
        with self.assertRaises(FormatError):
            read_lrmx(self.dir / "s.lrmx")
        self.assertEqual(read_lrmx_stack(self.dir / "s.lrmx").shape, (2, 4, 3))

    def test_stack_with_mixed_shapes(self):
        (self.dir / "mixed.lrmx").write_bytes(encode_matrix(self.matrix) + encode_matrix(np.ones((2, 2))))
        with self.assertRaises(FormatError):
            read_lrmx_stack(self.dir / "mixed.lrmx")

    def test_csv_keeps_full_precision(self):
        write_csv(self.dir / "m.csv", self.matrix)
        assert_array_equal(read_csv(self.dir / "m.csv"), self.matrix)
        self.assertNotIn("#", (self.dir / "m.csv").read_text())
