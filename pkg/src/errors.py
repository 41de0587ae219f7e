"""
Exceções de domínio do VoxelMotion.

Todos os kernels levantam subclasses de VoxelMotionError; apenas a CLI
(main.py) captura e converte em mensagem de uma linha + código de saída.
"""


class VoxelMotionError(Exception):
    """Erro base do projeto."""


# ---------------------------------------------------------------------------
# tensor-io
# ---------------------------------------------------------------------------

class BadMagic(VoxelMotionError):
    """Arquivo .vten sem a assinatura 'VTEN'."""


class UnsupportedVersion(VoxelMotionError):
    """Versão de formato .vten desconhecida."""


class UnsupportedDtype(VoxelMotionError):
    """Código de dtype diferente de 0 (float32 little-endian)."""


class TruncatedPayload(VoxelMotionError):
    """Cabeçalho ou payload menor que o declarado."""


class DimMismatch(VoxelMotionError):
    """Dimensões declaradas não batem com o array."""


class IoError(VoxelMotionError, OSError):
    """Falha de leitura/escrita no sistema de arquivos."""


class BadHeader(VoxelMotionError):
    """Cabeçalho PPM inválido (apenas P6 é aceito)."""


class UnsupportedMaxval(VoxelMotionError):
    """PPM com maxval diferente de 255."""


# ---------------------------------------------------------------------------
# kernels
# ---------------------------------------------------------------------------

class EmptyStack(VoxelMotionError):
    """Pilha de voxel flows com M = 0."""


class ShapeMismatch(VoxelMotionError):
    """Formas incompatíveis entre volume, fluxos ou quadros."""


class DuplicateTimestamp(VoxelMotionError):
    """Timestamps repetidos na matriz temporal."""


class ZeroOffset(VoxelMotionError):
    """Timestamp de referência igual à origem t_j."""


class SingularSystem(VoxelMotionError):
    """Pivô abaixo da tolerância na eliminação com pivoteamento parcial."""


# ---------------------------------------------------------------------------
# planejamento / simulação
# ---------------------------------------------------------------------------

class InvalidConfig(VoxelMotionError):
    """Configuração fora dos limites aceitos."""


class MissingFrame(VoxelMotionError):
    """Quadro (ou fluxo) exigido pelo plano não está disponível."""


class InvalidPlan(VoxelMotionError):
    """Plano GOP com violações."""


class TooSmall(VoxelMotionError):
    """Quadro pequeno demais para ao menos uma escala do MS-SSIM."""


class EmptyInput(VoxelMotionError):
    """Lista vazia onde ao menos um elemento é exigido."""
