"""
Modelo de dados denso e formatos de arquivo bit-exatos.

Tipos:
- Frame: imagem planar (C, H, W) em ponto flutuante
- FrameVolume: D quadros de referência empilhados (o volume X_t)
- FlowField2D: deslocamento por pixel (dx, dy)
- VoxelFlowStack: M campos de 4 canais (g_x, g_y, g_z, g_w), layout M×4×H×W,
  serializado como tensor (4M)×H×W

Formatos:
- .vten: magic 'VTEN' | versão u8 | dtype u8 | ndim u8 | dims u32 LE | float32 LE
- PPM binário P6 com maxval 255
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence, Tuple, Union

import numpy as np

from config import PPM_CONFIG, TENSOR_FORMAT
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

PathLike = Union[str, Path]

_HEADER_FIXO = struct.Struct("<4sBBB")


def _como_float(arr, nome: str) -> np.ndarray:
    a = np.asarray(arr)
    if not np.issubdtype(a.dtype, np.floating):
        a = a.astype(np.float64)
    if not np.all(np.isfinite(a)):
        raise ShapeMismatch(f"{nome}: valores não finitos")
    return a


# =========================
# TIPOS
# =========================
@dataclass(frozen=True)
class Frame:
    """Quadro planar (C, H, W). C ∈ {1, 3}.

    Também carrega resíduos e gradientes, por isso a faixa [0, 1] não é
    imposta: apenas finitude e número de canais.
    """

    data: np.ndarray

    def __post_init__(self):
        a = _como_float(self.data, "Frame")
        if a.ndim != 3 or a.shape[0] not in (1, 3):
            raise ShapeMismatch(f"Frame exige forma (C, H, W) com C ∈ {{1, 3}}, recebeu {a.shape}")
        object.__setattr__(self, "data", a)

    @property
    def channels(self) -> int:
        return self.data.shape[0]

    @property
    def height(self) -> int:
        return self.data.shape[1]

    @property
    def width(self) -> int:
        return self.data.shape[2]

    @property
    def shape(self) -> Tuple[int, int, int]:
        return self.data.shape


@dataclass(frozen=True)
class FrameVolume:
    """Volume de referências (D, C, H, W) com timestamps estritamente crescentes."""

    data: np.ndarray
    timestamps: Tuple[int, ...]

    def __post_init__(self):
        a = _como_float(self.data, "FrameVolume")
        if a.ndim != 4 or a.shape[0] < 1 or a.shape[1] not in (1, 3):
            raise ShapeMismatch(f"FrameVolume exige forma (D≥1, C, H, W), recebeu {a.shape}")
        ts = tuple(int(t) for t in self.timestamps)
        if len(ts) != a.shape[0]:
            raise ShapeMismatch(f"{len(ts)} timestamps para profundidade {a.shape[0]}")
        if any(b <= a_ for a_, b in zip(ts, ts[1:])):
            raise ShapeMismatch(f"timestamps devem ser estritamente crescentes: {ts}")
        object.__setattr__(self, "data", a)
        object.__setattr__(self, "timestamps", ts)

    @classmethod
    def from_frames(cls, frames: Sequence[Frame], timestamps: Sequence[int] | None = None) -> "FrameVolume":
        if not frames:
            raise EmptyStack("FrameVolume exige ao menos um quadro")
        formas = {f.shape for f in frames}
        if len(formas) != 1:
            raise ShapeMismatch(f"quadros com formas distintas: {sorted(formas)}")
        if timestamps is None:
            timestamps = range(len(frames))
        return cls(np.stack([f.data for f in frames]), tuple(timestamps))

    @property
    def depth(self) -> int:
        return self.data.shape[0]

    @property
    def channels(self) -> int:
        return self.data.shape[1]

    @property
    def height(self) -> int:
        return self.data.shape[2]

    @property
    def width(self) -> int:
        return self.data.shape[3]

    def frame(self, depth: int) -> Frame:
        return Frame(self.data[depth])

    def depth_of(self, timestamp: int) -> int:
        return self.timestamps.index(int(timestamp))

    def nearest_depth(self, timestamp: float) -> int:
        """Fatia mais próxima de `timestamp` (empate → quadro anterior)."""
        dist = [abs(t - timestamp) for t in self.timestamps]
        return int(np.argmin(dist))


@dataclass(frozen=True)
class FlowField2D:
    """Fluxo 2D por pixel em pixels."""

    dx: np.ndarray
    dy: np.ndarray

    def __post_init__(self):
        dx = _como_float(self.dx, "FlowField2D.dx")
        dy = _como_float(self.dy, "FlowField2D.dy")
        if dx.ndim != 2 or dx.shape != dy.shape:
            raise ShapeMismatch(f"dx {dx.shape} e dy {dy.shape} devem ser mapas H×W iguais")
        object.__setattr__(self, "dx", dx)
        object.__setattr__(self, "dy", dy)

    @classmethod
    def zeros(cls, height: int, width: int) -> "FlowField2D":
        return cls(np.zeros((height, width)), np.zeros((height, width)))

    @classmethod
    def from_array(cls, arr) -> "FlowField2D":
        a = np.asarray(arr)
        if a.ndim != 3 or a.shape[0] != 2:
            raise ShapeMismatch(f"fluxo exige tensor 2×H×W, recebeu {a.shape}")
        return cls(a[0], a[1])

    def as_array(self) -> np.ndarray:
        return np.stack([self.dx, self.dy])

    @property
    def height(self) -> int:
        return self.dx.shape[0]

    @property
    def width(self) -> int:
        return self.dx.shape[1]


@dataclass(frozen=True)
class VoxelFlowStack:
    """M voxel flows, layout (M, 4, H, W) com canais (g_x, g_y, g_z, g_w).

    g_z é a coordenada absoluta de profundidade no volume; g_w é o logit
    não normalizado do peso.
    """

    data: np.ndarray

    def __post_init__(self):
        a = _como_float(self.data, "VoxelFlowStack")
        if a.ndim != 4 or a.shape[1] != 4:
            raise ShapeMismatch(f"VoxelFlowStack exige (M, 4, H, W), recebeu {a.shape}")
        if a.shape[0] == 0:
            raise EmptyStack("VoxelFlowStack com M = 0")
        object.__setattr__(self, "data", a)

    @classmethod
    def from_tensor(cls, arr) -> "VoxelFlowStack":
        """Converte tensor (4M, H, W) na ordem gx, gy, gz, gw por fluxo."""
        a = np.asarray(arr)
        if a.ndim != 3 or a.shape[0] % 4 != 0:
            raise ShapeMismatch(f"tensor de voxel flows exige (4M, H, W), recebeu {a.shape}")
        return cls(a.reshape(a.shape[0] // 4, 4, a.shape[1], a.shape[2]))

    @classmethod
    def from_fields(cls, gx, gy, gz, gw) -> "VoxelFlowStack":
        return cls(np.stack([np.asarray(gx), np.asarray(gy), np.asarray(gz), np.asarray(gw)], axis=1))

    def to_tensor(self) -> np.ndarray:
        m, _, h, w = self.data.shape
        return self.data.reshape(4 * m, h, w)

    @property
    def M(self) -> int:
        return self.data.shape[0]

    @property
    def height(self) -> int:
        return self.data.shape[2]

    @property
    def width(self) -> int:
        return self.data.shape[3]

    @property
    def gx(self) -> np.ndarray:
        return self.data[:, 0]

    @property
    def gy(self) -> np.ndarray:
        return self.data[:, 1]

    @property
    def gz(self) -> np.ndarray:
        return self.data[:, 2]

    @property
    def gw(self) -> np.ndarray:
        return self.data[:, 3]


# =========================
# .vten
# =========================
def write_tensor(array, dims: Sequence[int], path: PathLike) -> None:
    """
    Grava array no formato .vten (float32 little-endian, row-major).

    Args:
        array: valores (qualquer forma; é achatado em ordem row-major)
        dims: dimensões declaradas (ndim ≥ 1, produto = nº de elementos)
        path: arquivo de destino

    Raises:
        DimMismatch: dims vazio ou produto diferente do tamanho do array
        IoError: falha de escrita
    """
    dims = [int(d) for d in dims]
    valores = np.asarray(array).reshape(-1)
    if len(dims) == 0:
        raise DimMismatch("dims vazio: ndim deve ser ≥ 1")
    if any(d < 0 for d in dims) or len(dims) > 255:
        raise DimMismatch(f"dims inválido: {dims}")
    if int(np.prod(dims, dtype=np.int64)) != valores.size:
        raise DimMismatch(f"produto de {dims} ≠ {valores.size} elementos")

    header = _HEADER_FIXO.pack(
        TENSOR_FORMAT["magic"], TENSOR_FORMAT["version"], TENSOR_FORMAT["dtype_float32"], len(dims)
    ) + struct.pack(f"<{len(dims)}I", *dims)
    payload = valores.astype("<f4").tobytes()
    try:
        Path(path).write_bytes(header + payload)
    except OSError as e:
        raise IoError(f"não foi possível gravar {path}: {e}") from e


def read_tensor(path: PathLike) -> Tuple[np.ndarray, Tuple[int, ...]]:
    """
    Lê arquivo .vten.

    Returns:
        (array float32 com a forma declarada, dims)

    Raises:
        BadMagic, UnsupportedVersion, UnsupportedDtype, TruncatedPayload, IoError
    """
    try:
        raw = Path(path).read_bytes()
    except OSError as e:
        raise IoError(f"não foi possível ler {path}: {e}") from e

    if len(raw) < 4 or raw[:4] != TENSOR_FORMAT["magic"]:
        raise BadMagic(f"{path}: assinatura {raw[:4]!r} ≠ {TENSOR_FORMAT['magic']!r}")
    if len(raw) < _HEADER_FIXO.size:
        raise TruncatedPayload(f"{path}: cabeçalho incompleto")
    _, versao, dtype, ndim = _HEADER_FIXO.unpack_from(raw, 0)
    if versao != TENSOR_FORMAT["version"]:
        raise UnsupportedVersion(f"{path}: versão {versao} não suportada")
    if dtype != TENSOR_FORMAT["dtype_float32"]:
        raise UnsupportedDtype(f"{path}: dtype {dtype} não suportado")

    inicio = _HEADER_FIXO.size
    fim_header = inicio + 4 * ndim
    if len(raw) < fim_header:
        raise TruncatedPayload(f"{path}: dimensões incompletas")
    dims = struct.unpack_from(f"<{ndim}I", raw, inicio)
    n = int(np.prod(dims, dtype=np.int64))
    esperado = fim_header + 4 * n
    if len(raw) < esperado:
        raise TruncatedPayload(f"{path}: payload com {len(raw) - fim_header} bytes, esperado {4 * n}")
    if len(raw) > esperado:
        raise DimMismatch(f"{path}: {len(raw) - esperado} bytes excedentes após o payload")

    arr = np.frombuffer(raw, dtype="<f4", count=n, offset=fim_header).astype(np.float32)
    return arr.reshape(dims), tuple(dims)


# Atalhos tipados sobre .vten
def write_flow(flow: FlowField2D, path: PathLike) -> None:
    """Fluxo 2D como tensor 2×H×W (canais dx, dy)."""
    arr = flow.as_array()
    write_tensor(arr, arr.shape, path)


def read_flow(path: PathLike) -> FlowField2D:
    arr, _ = read_tensor(path)
    return FlowField2D.from_array(arr.astype(np.float64))


def write_voxel_flows(stack: VoxelFlowStack, path: PathLike) -> None:
    arr = stack.to_tensor()
    write_tensor(arr, arr.shape, path)


def read_voxel_flows(path: PathLike) -> VoxelFlowStack:
    arr, _ = read_tensor(path)
    return VoxelFlowStack.from_tensor(arr.astype(np.float64))


def write_map(mapa: np.ndarray, path: PathLike) -> None:
    """Mapa H×W (ou C×H×W) gravado como tensor C×H×W (máscaras: 1×H×W de 0/1)."""
    arr = np.asarray(mapa, dtype=np.float64)
    if arr.ndim == 2:
        arr = arr[None]
    write_tensor(arr, arr.shape, path)


def read_map(path: PathLike) -> np.ndarray:
    """Lê mapa 1×H×W (ou H×W) e devolve H×W."""
    arr, dims = read_tensor(path)
    if arr.ndim == 3 and dims[0] == 1:
        arr = arr[0]
    if arr.ndim != 2:
        raise ShapeMismatch(f"{path}: mapa exige 1×H×W, recebeu {dims}")
    return arr.astype(np.float64)


def read_volume(path: PathLike) -> FrameVolume:
    """Volume D×C×H×W (ou D×H×W para 1 canal) com timestamps 0..D−1."""
    arr, dims = read_tensor(path)
    if arr.ndim == 3:
        arr = arr[:, None]
    if arr.ndim != 4:
        raise ShapeMismatch(f"{path}: volume exige D×C×H×W, recebeu {dims}")
    return FrameVolume(arr.astype(np.float64), tuple(range(arr.shape[0])))


def write_volume(volume: FrameVolume, path: PathLike) -> None:
    write_tensor(volume.data, volume.data.shape, path)


# =========================
# PPM (P6, maxval 255)
# =========================
def _tokens_cabecalho(raw: bytes, n: int) -> Tuple[list, int]:
    """Extrai n tokens do cabeçalho PPM, ignorando comentários '#'."""
    tokens, pos = [], 0
    while len(tokens) < n:
        while pos < len(raw) and raw[pos:pos + 1].isspace():
            pos += 1
        if pos >= len(raw):
            raise BadHeader("cabeçalho PPM incompleto")
        if raw[pos:pos + 1] == b"#":
            while pos < len(raw) and raw[pos:pos + 1] not in (b"\n", b"\r"):
                pos += 1
            continue
        inicio = pos
        while pos < len(raw) and not raw[pos:pos + 1].isspace() and raw[pos:pos + 1] != b"#":
            pos += 1
        tokens.append(raw[inicio:pos])
    # exatamente um espaço em branco separa o cabeçalho dos dados
    return tokens, pos + 1


def read_frame_ppm(path: PathLike) -> Frame:
    """
    Lê PPM P6 (maxval 255) e mapeia bytes para [0, 1] por v/255.

    Raises:
        BadHeader: assinatura diferente de P6, campos inválidos ou dados curtos
        UnsupportedMaxval: maxval ≠ 255
        IoError: falha de leitura
    """
    try:
        raw = Path(path).read_bytes()
    except OSError as e:
        raise IoError(f"não foi possível ler {path}: {e}") from e

    if raw[:2] != PPM_CONFIG["magic"]:
        raise BadHeader(f"{path}: assinatura {raw[:2]!r}, apenas P6 é suportado")
    tokens, inicio = _tokens_cabecalho(raw[2:], 3)
    try:
        largura, altura, maxval = (int(t) for t in tokens)
    except ValueError as e:
        raise BadHeader(f"{path}: campos de cabeçalho inválidos {tokens}") from e
    if largura <= 0 or altura <= 0:
        raise BadHeader(f"{path}: dimensões inválidas {largura}×{altura}")
    if maxval != PPM_CONFIG["maxval"]:
        raise UnsupportedMaxval(f"{path}: maxval {maxval} não suportado")

    n = largura * altura * 3
    dados = raw[2 + inicio:2 + inicio + n]
    if len(dados) < n:
        raise BadHeader(f"{path}: dados de pixel incompletos ({len(dados)} de {n} bytes)")
    pix = np.frombuffer(dados, dtype=np.uint8).reshape(altura, largura, 3)
    return Frame(pix.transpose(2, 0, 1).astype(np.float64) / 255.0)


def quantize_to_bytes(data: np.ndarray) -> np.ndarray:
    """round-half-up(v × 255) saturado em [0, 255]."""
    return np.clip(np.floor(np.asarray(data, dtype=np.float64) * 255.0 + 0.5), 0, 255).astype(np.uint8)


def quantize_frame(frame: Frame) -> Frame:
    """Projeta o quadro na grade de 255 níveis (idempotente sob PPM)."""
    return Frame(quantize_to_bytes(frame.data).astype(np.float64) / 255.0)


def write_frame_ppm(frame: Frame, path: PathLike) -> None:
    """
    Grava quadro de 3 canais como PPM P6.

    Raises:
        ShapeMismatch: quadro sem 3 canais
        IoError: falha de escrita
    """
    if frame.channels != 3:
        raise ShapeMismatch(f"PPM exige 3 canais, quadro tem {frame.channels}")
    pix = quantize_to_bytes(frame.data).transpose(1, 2, 0)
    header = b"P6\n%d %d\n255\n" % (frame.width, frame.height)
    try:
        Path(path).write_bytes(header + np.ascontiguousarray(pix).tobytes())
    except OSError as e:
        raise IoError(f"não foi possível gravar {path}: {e}") from e
