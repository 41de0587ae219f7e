"""
Testes unitários para o módulo tensor_io.py (.vten, PPM e tipos densos)
"""

import struct
import sys
import tempfile
import unittest
from pathlib import Path

import numpy as np

# Adiciona src ao path
sys.path.insert(0, str(Path(__file__).parent.parent / "src"))

from errors import (
    BadHeader,
    BadMagic,
    DimMismatch,
    EmptyStack,
    IoError,
    ShapeMismatch,
    TruncatedPayload,
    UnsupportedDtype,
    UnsupportedMaxval,
    UnsupportedVersion,
)
from tensor_io import (
    FlowField2D,
    Frame,
    FrameVolume,
    VoxelFlowStack,
    quantize_to_bytes,
    read_flow,
    read_frame_ppm,
    read_map,
    read_tensor,
    read_volume,
    read_voxel_flows,
    write_flow,
    write_frame_ppm,
    write_map,
    write_tensor,
    write_volume,
    write_voxel_flows,
)


class _ComDiretorio(unittest.TestCase):
    def setUp(self):
        self._tmp = tempfile.TemporaryDirectory()
        self.dir = Path(self._tmp.name)

    def tearDown(self):
        self._tmp.cleanup()


class TestWriteTensor(_ComDiretorio):
    """Testes para write_tensor"""

    def test_layout_bit_exato(self):
        """Testa bytes exatos de um tensor de 1 elemento"""
        caminho = self.dir / "um.vten"
        write_tensor(np.array([1.0]), [1], caminho)
        raw = caminho.read_bytes()
        self.assertEqual(len(raw), 15)
        self.assertEqual(raw, b"VTEN\x01\x00\x01" + struct.pack("<I", 1) + struct.pack("<f", 1.0))

    def test_tamanho_do_arquivo(self):
        """Testa tamanho = 7 + 4·ndim + 4·N"""
        caminho = self.dir / "t.vten"
        write_tensor(np.zeros((2, 3, 4)), (2, 3, 4), caminho)
        self.assertEqual(caminho.stat().st_size, 7 + 4 * 3 + 4 * 24)

    def test_dims_vazio(self):
        """Testa rejeição de ndim = 0"""
        with self.assertRaises(DimMismatch):
            write_tensor(np.zeros(1), [], self.dir / "x.vten")

    def test_produto_diferente(self):
        """Testa rejeição de dims incompatíveis com o array"""
        with self.assertRaises(DimMismatch):
            write_tensor(np.zeros(6), [2, 2], self.dir / "x.vten")

    def test_diretorio_inexistente(self):
        """Testa IoError ao gravar em pasta inexistente"""
        with self.assertRaises(IoError):
            write_tensor(np.zeros(1), [1], self.dir / "nao" / "existe.vten")


class TestReadTensor(_ComDiretorio):
    """Testes para read_tensor"""

    def _gravar(self, raw: bytes) -> Path:
        caminho = self.dir / "r.vten"
        caminho.write_bytes(raw)
        return caminho

    def test_ida_e_volta(self):
        """Testa leitura do que foi gravado (float32)"""
        arr = np.arange(24, dtype=np.float64).reshape(2, 3, 4) / 7.0
        caminho = self.dir / "a.vten"
        write_tensor(arr, arr.shape, caminho)
        lido, dims = read_tensor(caminho)
        self.assertEqual(dims, (2, 3, 4))
        self.assertEqual(lido.dtype, np.float32)
        np.testing.assert_array_equal(lido, arr.astype(np.float32))

    def test_magic_invalido(self):
        """Testa BadMagic"""
        with self.assertRaises(BadMagic):
            read_tensor(self._gravar(b"XTEN\x01\x00\x01" + struct.pack("<I", 1) + b"\x00" * 4))

    def test_versao(self):
        """Testa UnsupportedVersion"""
        with self.assertRaises(UnsupportedVersion):
            read_tensor(self._gravar(b"VTEN\x02\x00\x01" + struct.pack("<I", 1) + b"\x00" * 4))

    def test_dtype(self):
        """Testa UnsupportedDtype"""
        with self.assertRaises(UnsupportedDtype):
            read_tensor(self._gravar(b"VTEN\x01\x01\x01" + struct.pack("<I", 1) + b"\x00" * 4))

    def test_payload_curto(self):
        """Testa TruncatedPayload com payload menor que o declarado"""
        with self.assertRaises(TruncatedPayload):
            read_tensor(self._gravar(b"VTEN\x01\x00\x01" + struct.pack("<I", 2) + b"\x00" * 4))

    def test_dims_curtas(self):
        """Testa TruncatedPayload com dimensões incompletas"""
        with self.assertRaises(TruncatedPayload):
            read_tensor(self._gravar(b"VTEN\x01\x00\x02" + struct.pack("<I", 1)))

    def test_bytes_excedentes(self):
        """Testa rejeição de bytes após o payload"""
        with self.assertRaises(DimMismatch):
            read_tensor(self._gravar(b"VTEN\x01\x00\x01" + struct.pack("<I", 1) + b"\x00" * 8))

    def test_arquivo_inexistente(self):
        """Testa IoError na leitura"""
        with self.assertRaises(IoError):
            read_tensor(self.dir / "nada.vten")


class TestAtalhosTipados(_ComDiretorio):
    """Testes para write/read de fluxos, voxel flows, mapas e volumes"""

    def test_fluxo(self):
        """Testa fluxo 2×H×W"""
        fluxo = FlowField2D(np.full((3, 4), 1.5), np.full((3, 4), -2.0))
        write_flow(fluxo, self.dir / "f.vten")
        lido = read_flow(self.dir / "f.vten")
        np.testing.assert_array_equal(lido.dx, fluxo.dx)
        np.testing.assert_array_equal(lido.dy, fluxo.dy)
        _, dims = read_tensor(self.dir / "f.vten")
        self.assertEqual(dims, (2, 3, 4))

    def test_voxel_flows_layout(self):
        """Testa layout (4M)×H×W na ordem gx, gy, gz, gw"""
        dados = np.arange(2 * 4 * 2 * 3, dtype=np.float64).reshape(2, 4, 2, 3)
        write_voxel_flows(VoxelFlowStack(dados), self.dir / "v.vten")
        bruto, dims = read_tensor(self.dir / "v.vten")
        self.assertEqual(dims, (8, 2, 3))
        np.testing.assert_array_equal(bruto[5], dados[1, 1])
        np.testing.assert_array_equal(read_voxel_flows(self.dir / "v.vten").data, dados)

    def test_mapa(self):
        """Testa mapa H×W gravado como 1×H×W"""
        mapa = np.eye(3)
        write_map(mapa, self.dir / "m.vten")
        _, dims = read_tensor(self.dir / "m.vten")
        self.assertEqual(dims, (1, 3, 3))
        np.testing.assert_array_equal(read_map(self.dir / "m.vten"), mapa)

    def test_volume(self):
        """Testa volume D×C×H×W com timestamps 0..D−1"""
        vol = FrameVolume(np.zeros((2, 3, 4, 5)), (10, 20))
        write_volume(vol, self.dir / "vol.vten")
        lido = read_volume(self.dir / "vol.vten")
        self.assertEqual(lido.data.shape, (2, 3, 4, 5))
        self.assertEqual(lido.timestamps, (0, 1))


class TestTipos(unittest.TestCase):
    """Testes para Frame, FrameVolume, FlowField2D e VoxelFlowStack"""

    def test_frame_canais(self):
        """Testa rejeição de C fora de {1, 3}"""
        with self.assertRaises(ShapeMismatch):
            Frame(np.zeros((2, 4, 4)))

    def test_frame_nao_finito(self):
        """Testa rejeição de NaN"""
        dados = np.zeros((1, 2, 2))
        dados[0, 0, 0] = np.nan
        with self.assertRaises(ShapeMismatch):
            Frame(dados)

    def test_volume_timestamps_crescentes(self):
        """Testa timestamps estritamente crescentes"""
        with self.assertRaises(ShapeMismatch):
            FrameVolume(np.zeros((2, 1, 2, 2)), (3, 3))

    def test_volume_vazio(self):
        """Testa from_frames sem quadros"""
        with self.assertRaises(EmptyStack):
            FrameVolume.from_frames([])

    def test_nearest_depth_empate(self):
        """Testa empate → quadro anterior"""
        vol = FrameVolume(np.zeros((2, 1, 2, 2)), (2, 4))
        self.assertEqual(vol.nearest_depth(3), 0)
        self.assertEqual(vol.nearest_depth(5), 1)
        self.assertEqual(vol.depth_of(4), 1)

    def test_pilha_vazia(self):
        """Testa M = 0"""
        with self.assertRaises(EmptyStack):
            VoxelFlowStack(np.zeros((0, 4, 2, 2)))

    def test_pilha_tensor(self):
        """Testa from_tensor com canais não múltiplos de 4"""
        with self.assertRaises(ShapeMismatch):
            VoxelFlowStack.from_tensor(np.zeros((6, 2, 2)))


class TestPPM(_ComDiretorio):
    """Testes para leitura e escrita PPM"""

    def test_quantizacao(self):
        """Testa round-half-up com saturação"""
        np.testing.assert_array_equal(
            quantize_to_bytes(np.array([-0.1, 0.0, 0.5, 1.0, 1.2])),
            np.array([0, 0, 128, 255, 255], dtype=np.uint8),
        )

    def test_ida_e_volta_exata(self):
        """Testa que quadros na grade de 255 níveis voltam idênticos"""
        rng = np.random.default_rng(0)
        dados = rng.integers(0, 256, size=(3, 5, 7)) / 255.0
        write_frame_ppm(Frame(dados), self.dir / "q.ppm")
        lido = read_frame_ppm(self.dir / "q.ppm")
        np.testing.assert_array_equal(lido.data, dados)

    def test_cabecalho_com_comentario(self):
        """Testa comentário no cabeçalho"""
        (self.dir / "c.ppm").write_bytes(b"P6\n# comentario\n1 1\n255\n" + bytes([255, 0, 51]))
        lido = read_frame_ppm(self.dir / "c.ppm")
        np.testing.assert_allclose(lido.data[:, 0, 0], [1.0, 0.0, 0.2])

    def test_p3_rejeitado(self):
        """Testa BadHeader para formato ASCII"""
        (self.dir / "a.ppm").write_bytes(b"P3\n1 1\n255\n0 0 0\n")
        with self.assertRaises(BadHeader):
            read_frame_ppm(self.dir / "a.ppm")

    def test_maxval(self):
        """Testa UnsupportedMaxval"""
        (self.dir / "m.ppm").write_bytes(b"P6\n1 1\n65535\n" + b"\x00" * 6)
        with self.assertRaises(UnsupportedMaxval):
            read_frame_ppm(self.dir / "m.ppm")

    def test_dados_curtos(self):
        """Testa BadHeader para pixels incompletos"""
        (self.dir / "d.ppm").write_bytes(b"P6\n2 2\n255\n" + b"\x00" * 5)
        with self.assertRaises(BadHeader):
            read_frame_ppm(self.dir / "d.ppm")

    def test_escrita_monocromatica(self):
        """Testa ShapeMismatch para quadro de 1 canal"""
        with self.assertRaises(ShapeMismatch):
            write_frame_ppm(Frame(np.zeros((1, 2, 2))), self.dir / "g.ppm")


if __name__ == "__main__":
    unittest.main()
