"""
Script de verificação do ambiente VoxelMotion.
Execute este script para validar a instalação antes de rodar simulações.
"""

import sys
import tempfile
from pathlib import Path

RAIZ = Path(__file__).resolve().parent


def check_python_version():
    """Verifica versão do Python."""
    version = sys.version_info
    if version < (3, 10):
        print(f"❌ Python {version.major}.{version.minor} detectado. Requer Python 3.10+")
        return False
    print(f"✓ Python {version.major}.{version.minor}.{version.micro}")
    return True


def check_dependencies():
    """Verifica se dependências essenciais estão instaladas."""
    required = {
        'numpy': 'Computação numérica',
        'scipy': 'Filtros e interpolação',
        'pandas': 'Relatórios e estudos',
        'pydantic': 'Configurações tipadas',
        'joblib': 'Execução paralela',
        'matplotlib': 'Figuras',
        'seaborn': 'Estilo das figuras',
        'dotenv': 'Variáveis de ambiente',
    }

    missing = []
    for module, desc in required.items():
        try:
            __import__(module)
            print(f"✓ {module:12} - {desc}")
        except ImportError:
            print(f"❌ {module:12} - {desc} (FALTANDO)")
            missing.append(module)

    return len(missing) == 0, missing


def check_src_structure():
    """Verifica estrutura de arquivos do src/."""
    src_dir = RAIZ / 'src'

    required_files = [
        'main.py',
        'tensor_io.py',
        'motion_compensation.py',
        'flow_prediction.py',
        'flow_reversal.py',
        'gop_planner.py',
        'codec_sim.py',
    ]

    if not src_dir.exists():
        print("❌ Diretório 'src/' não encontrado")
        return False

    all_ok = True
    for filename in required_files:
        if (src_dir / filename).exists():
            print(f"  ✓ {filename}")
        else:
            print(f"  ❌ {filename} (FALTANDO)")
            all_ok = False

    return all_ok


def test_roundtrip():
    """Grava e relê um volume .vten pequeno e aplica um warp identidade."""
    print("\n🧪 Testando I/O e warp...")

    src_path = str(RAIZ / 'src')
    if src_path not in sys.path:
        sys.path.insert(0, src_path)

    try:
        import numpy as np
        from motion_compensation import weighted_voxel_warp
        from tensor_io import FrameVolume, VoxelFlowStack, read_volume, write_volume

        volume = FrameVolume(np.linspace(0.0, 1.0, 2 * 3 * 4 * 4).reshape(2, 3, 4, 4), (0, 1))
        with tempfile.TemporaryDirectory() as tmp:
            write_volume(volume, Path(tmp) / 'v.vten')
            relido = read_volume(Path(tmp) / 'v.vten')
        fluxos = np.zeros((1, 4, 4, 4))
        saida = weighted_voxel_warp(relido, VoxelFlowStack(fluxos))
        assert np.allclose(saida.data, volume.data[0], atol=1e-6), "warp identidade divergiu"
        print("  ✓ .vten e warp identidade")
        return True

    except Exception as e:
        print(f"  ❌ Erro: {str(e)}")
        return False


def main():
    """Executa todas as verificações."""
    print("=" * 60)
    print("🔍 VERIFICAÇÃO DO AMBIENTE - VoxelMotion")
    print("=" * 60)

    checks = [
        ("Python Version", check_python_version),
        ("Dependências", lambda: check_dependencies()[0]),
        ("Estrutura src/", check_src_structure),
        ("I/O e warp", test_roundtrip),
    ]

    results = []
    for name, check_func in checks:
        print(f"\n📋 {name}")
        print("-" * 60)
        try:
            result = check_func()
        except Exception as e:
            print(f"❌ Erro inesperado: {e}")
            result = False
        results.append((name, result))

    print("\n" + "=" * 60)
    print("📊 RESUMO")
    print("=" * 60)
    for name, result in results:
        print(f"{'✓' if result else '❌'} {name}")

    ok = all(r for _, r in results)
    if ok:
        print("\n🎉 Ambiente pronto! Veja o README.md para os comandos da CLI.")
    else:
        print("\n⚠️  Corrija os itens acima e rode novamente: pip install -r requirements.txt")
    return 0 if ok else 1


if __name__ == "__main__":
    sys.exit(main())
