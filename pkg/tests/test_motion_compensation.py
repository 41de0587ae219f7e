"""
Testes unitários para o módulo motion_compensation.py
"""

import sys
import unittest
from pathlib import Path

import numpy as np

# Adiciona src e tests ao path
sys.path.insert(0, str(Path(__file__).parent.parent / "src"))
sys.path.insert(0, str(Path(__file__).parent))

from errors import EmptyStack, InvalidConfig, ShapeMismatch
from motion_compensation import (
    WarpConfig,
    backward_warp_bilinear,
    softmax_weights,
    trilinear_sample,
    weighted_voxel_warp,
    weighted_voxel_warp_backward,
)
from referencias import trilinear_escalar, warp_escalar
from tensor_io import FlowField2D, Frame, FrameVolume, VoxelFlowStack


def _volume(d=2, c=3, h=6, w=7, seed=0):
    rng = np.random.default_rng(seed)
    return FrameVolume(rng.random((d, c, h, w)), tuple(range(d)))


def _pilha(m, h, w, d, seed=1, amplitude=2.0):
    rng = np.random.default_rng(seed)
    dados = np.empty((m, 4, h, w))
    dados[:, :2] = rng.uniform(-amplitude, amplitude, (m, 2, h, w))
    dados[:, 2] = rng.uniform(0, d - 1, (m, h, w))
    dados[:, 3] = rng.normal(0, 1, (m, h, w))
    return VoxelFlowStack(dados)


class TestWarpConfig(unittest.TestCase):
    """Testes para WarpConfig"""

    def test_somente_clamp(self):
        """Testa rejeição de modos de borda diferentes de clamp"""
        with self.assertRaises(InvalidConfig):
            WarpConfig(boundary_mode="zeros")

    def test_n_jobs_positivo(self):
        """Testa n_jobs ≥ 1"""
        with self.assertRaises(InvalidConfig):
            WarpConfig(n_jobs=0)


class TestSoftmaxWeights(unittest.TestCase):
    """Testes para softmax_weights"""

    def test_soma_um(self):
        """Testa normalização por pixel"""
        w = softmax_weights(np.random.default_rng(0).normal(0, 5, (4, 3, 3)))
        np.testing.assert_allclose(w.sum(axis=0), 1.0, atol=1e-12)
        self.assertTrue(np.all(w >= 0))

    def test_estavel_com_logits_grandes(self):
        """Testa subtração do máximo (sem overflow)"""
        w = softmax_weights(np.array([[[1000.0]], [[1000.0]]]))
        np.testing.assert_allclose(w[:, 0, 0], [0.5, 0.5])

    def test_vazio(self):
        """Testa M = 0"""
        with self.assertRaises(EmptyStack):
            softmax_weights(np.zeros((0, 2, 2)))


class TestTrilinearSample(unittest.TestCase):
    """Testes para trilinear_sample"""

    def test_pontos_inteiros(self):
        """Testa amostragem exata nos nós da grade"""
        vol = _volume()
        self.assertEqual(trilinear_sample(vol, 3, 2, 1, channel=2), vol.data[1, 2, 2, 3])

    def test_confere_com_referencia(self):
        """Testa pontos aleatórios contra a implementação escalar"""
        vol = _volume()
        rng = np.random.default_rng(5)
        for _ in range(50):
            x, y, z = rng.uniform(-2, 9), rng.uniform(-2, 8), rng.uniform(-1, 2)
            c = int(rng.integers(0, 3))
            with self.subTest(x=x, y=y, z=z, c=c):
                self.assertAlmostEqual(trilinear_sample(vol, x, y, z, c), trilinear_escalar(vol.data, x, y, z, c), places=12)

    def test_clamp_fora_da_grade(self):
        """Testa clamp-to-edge fora do volume"""
        vol = _volume()
        self.assertAlmostEqual(trilinear_sample(vol, -5.0, 100.0, 9.0), vol.data[1, 0, 5, 0])

    def test_canal_invalido(self):
        """Testa canal fora da faixa"""
        with self.assertRaises(ShapeMismatch):
            trilinear_sample(_volume(), 0, 0, 0, channel=3)


class TestWeightedVoxelWarp(unittest.TestCase):
    """Testes para weighted_voxel_warp"""

    def test_identidade(self):
        """Testa M = 1 com fluxo nulo apontando para a fatia 1"""
        vol = _volume()
        dados = np.zeros((1, 4, 6, 7))
        dados[0, 2] = 1.0
        saida = weighted_voxel_warp(vol, VoxelFlowStack(dados))
        np.testing.assert_array_equal(saida.data, vol.data[1])

    def test_confere_com_referencia(self):
        """Testa contra o laço escalar com M = 3"""
        vol = _volume(h=5, w=6)
        pilha = _pilha(3, 5, 6, 2)
        saida = weighted_voxel_warp(vol, pilha)
        np.testing.assert_allclose(saida.data, warp_escalar(vol.data, pilha.data), atol=1e-12)

    def test_confere_com_referencia_aleatorio(self):
        """Testa 200 instâncias aleatórias contra o laço escalar e o envelope convexo"""
        rng = np.random.default_rng(2024)
        for caso in range(200):
            d, c = int(rng.integers(1, 4)), int(rng.choice([1, 3]))
            h, w, m = int(rng.integers(2, 9)), int(rng.integers(2, 9)), int(rng.integers(1, 26))
            vol = FrameVolume(rng.random((d, c, h, w)), tuple(range(d)))
            dados = np.empty((m, 4, h, w))
            dados[:, :2] = rng.uniform(-3, 3, (m, 2, h, w))
            dados[:, 2] = rng.uniform(-0.5, d - 0.5, (m, h, w))
            dados[:, 3] = rng.normal(0, 2, (m, h, w))
            with self.subTest(caso=caso, d=d, c=c, h=h, w=w, m=m):
                saida = weighted_voxel_warp(vol, VoxelFlowStack(dados)).data
                np.testing.assert_allclose(saida, warp_escalar(vol.data, dados), atol=1e-9)
                for canal in range(c):
                    self.assertGreaterEqual(saida[canal].min(), vol.data[:, canal].min() - 1e-12)
                    self.assertLessEqual(saida[canal].max(), vol.data[:, canal].max() + 1e-12)

    def test_logits_iguais_replicados(self):
        """Testa que replicar o mesmo fluxo não altera a predição"""
        vol = _volume()
        pilha = _pilha(1, 6, 7, 2)
        dobrada = VoxelFlowStack(np.concatenate([pilha.data, pilha.data]))
        np.testing.assert_allclose(
            weighted_voxel_warp(vol, dobrada).data, weighted_voxel_warp(vol, pilha).data, atol=1e-12,
        )

    def test_paralelo_identico(self):
        """Testa resultado bit a bit idêntico com faixas em paralelo"""
        vol = _volume(h=9)
        pilha = _pilha(2, 9, 7, 2)
        serial = weighted_voxel_warp(vol, pilha, WarpConfig(n_jobs=1))
        paralelo = weighted_voxel_warp(vol, pilha, WarpConfig(n_jobs=3))
        np.testing.assert_array_equal(serial.data, paralelo.data)

    def test_forma_incompativel(self):
        """Testa ShapeMismatch entre fluxos e volume"""
        with self.assertRaises(ShapeMismatch):
            weighted_voxel_warp(_volume(), _pilha(1, 5, 7, 2))

    def test_representabilidade(self):
        """Testa alvo que exige mistura de duas fatias: M = 2 exato, M = 1 não"""
        r, g, b, k = [1, 0, 0], [0, 1, 0], [0, 0, 1], [0, 0, 0]
        s0 = np.array([[r, g]], dtype=np.float64).transpose(2, 0, 1)
        s1 = np.array([[b, k]], dtype=np.float64).transpose(2, 0, 1)
        vol = FrameVolume(np.stack([s0, s1]), (0, 1))
        alvo = (0.7 * np.array(r) + 0.3 * np.array(k))[:, None, None] * np.ones((3, 1, 2))

        # M = 2: pesos 0.7/0.3 entre (x=0, z=0) e (x=1, z=1) no pixel 0; idem no pixel 1
        dados = np.zeros((2, 4, 1, 2))
        dados[0, 0] = [0.0, -1.0]
        dados[1, 0] = [1.0, 0.0]
        dados[1, 2] = 1.0
        dados[0, 3] = np.log(0.7)
        dados[1, 3] = np.log(0.3)
        saida = weighted_voxel_warp(vol, VoxelFlowStack(dados))
        np.testing.assert_allclose(saida.data, alvo, atol=1e-12)

        # M = 1: melhor aproximação na grade exaustiva ainda longe do alvo
        melhor = np.inf
        for gx in np.linspace(-1, 1, 21):
            for gz in np.linspace(0, 1, 11):
                dados1 = np.zeros((1, 4, 1, 2))
                dados1[0, 0], dados1[0, 2] = gx, gz
                erro = np.mean((weighted_voxel_warp(vol, VoxelFlowStack(dados1)).data - alvo) ** 2)
                melhor = min(melhor, erro)
        self.assertGreater(melhor, 1e-3)


class TestWeightedVoxelWarpBackward(unittest.TestCase):
    """Testes dos gradientes analíticos contra diferenças finitas"""

    def test_diferencas_finitas(self):
        """Testa ∂L/∂g em posições longe dos pontos de dobra"""
        h, w, d = 5, 6, 3
        vol = _volume(d=d, h=h, w=w)
        rng = np.random.default_rng(7)
        dados = np.empty((2, 4, h, w))
        # coordenadas k + U(0.1, 0.9) evitam as descontinuidades da derivada
        xx, yy = np.meshgrid(np.arange(w), np.arange(h))
        alvo_x = np.clip(xx + rng.integers(-1, 2, (2, h, w)), 0, w - 2) + rng.uniform(0.1, 0.9, (2, h, w))
        alvo_y = np.clip(yy + rng.integers(-1, 2, (2, h, w)), 0, h - 2) + rng.uniform(0.1, 0.9, (2, h, w))
        dados[:, 0], dados[:, 1] = alvo_x - xx, alvo_y - yy
        dados[:, 2] = rng.integers(0, d - 1, (2, h, w)) + rng.uniform(0.1, 0.9, (2, h, w))
        dados[:, 3] = rng.normal(0, 1, (2, h, w))
        grad_saida = rng.normal(0, 1, (3, h, w))

        def perda(arr):
            return float(np.sum(weighted_voxel_warp(vol, VoxelFlowStack(arr)).data * grad_saida))

        analitico = weighted_voxel_warp_backward(vol, VoxelFlowStack(dados), None, grad_saida).as_stack_array()
        passo = 1e-6
        for i in range(2):
            for canal in range(4):
                with self.subTest(fluxo=i, canal=canal):
                    mais, menos = dados.copy(), dados.copy()
                    mais[i, canal] += passo
                    menos[i, canal] -= passo
                    # perturbar um canal inteiro soma as derivadas pixel a pixel
                    numerico = (perda(mais) - perda(menos)) / (2 * passo)
                    self.assertTrue(np.isclose(analitico[i, canal].sum(), numerico, rtol=1e-4, atol=1e-7))

    def test_diferencas_finitas_por_entrada(self):
        """Testa cada entrada de ∂L/∂g em 50 instâncias aleatórias com passo 1e-4"""
        rng = np.random.default_rng(11)
        passo = 1e-4
        for caso in range(50):
            d, c = int(rng.integers(2, 4)), int(rng.choice([1, 3]))
            h, w, m = int(rng.integers(3, 7)), int(rng.integers(3, 7)), int(rng.integers(1, 4))
            vol = FrameVolume(rng.random((d, c, h, w)), tuple(range(d)))
            xx, yy = np.meshgrid(np.arange(w), np.arange(h))
            dados = np.empty((m, 4, h, w))
            alvo_x = np.clip(xx + rng.integers(-1, 2, (m, h, w)), 0, w - 2) + rng.uniform(0.1, 0.9, (m, h, w))
            alvo_y = np.clip(yy + rng.integers(-1, 2, (m, h, w)), 0, h - 2) + rng.uniform(0.1, 0.9, (m, h, w))
            dados[:, 0], dados[:, 1] = alvo_x - xx, alvo_y - yy
            dados[:, 2] = rng.integers(0, d - 1, (m, h, w)) + rng.uniform(0.1, 0.9, (m, h, w))
            dados[:, 3] = rng.normal(0, 1, (m, h, w))
            grad_saida = rng.normal(0, 1, (c, h, w))

            def perda_por_pixel(arr):
                return (weighted_voxel_warp(vol, VoxelFlowStack(arr)).data * grad_saida).sum(axis=0)

            analitico = weighted_voxel_warp_backward(vol, VoxelFlowStack(dados), None, grad_saida).as_stack_array()
            for i in range(m):
                for canal in range(4):
                    mais, menos = dados.copy(), dados.copy()
                    mais[i, canal] += passo
                    menos[i, canal] -= passo
                    # cada pixel de saída depende só dos fluxos do próprio pixel
                    numerico = (perda_por_pixel(mais) - perda_por_pixel(menos)) / (2 * passo)
                    with self.subTest(caso=caso, fluxo=i, canal=canal):
                        np.testing.assert_allclose(analitico[i, canal], numerico, rtol=1e-4, atol=1e-8)

    def test_fora_da_grade_sem_gradiente(self):
        """Testa derivada espacial nula onde o clamp satura"""
        vol = _volume()
        dados = np.zeros((1, 4, 6, 7))
        dados[0, 0] = -20.0
        grad = weighted_voxel_warp_backward(vol, VoxelFlowStack(dados), None, np.ones((3, 6, 7)))
        np.testing.assert_array_equal(grad.d_gx, 0.0)

    def test_logit_unico_sem_gradiente(self):
        """Testa ∂L/∂g_w = 0 com M = 1"""
        vol = _volume()
        grad = weighted_voxel_warp_backward(vol, _pilha(1, 6, 7, 2), None, np.ones((3, 6, 7)))
        np.testing.assert_allclose(grad.d_gw_logit, 0.0, atol=1e-12)


class TestBackwardWarpBilinear(unittest.TestCase):
    """Testes para backward_warp_bilinear"""

    def test_deslocamento_inteiro(self):
        """Testa deslocamento de 1 px na horizontal"""
        dados = np.arange(12, dtype=np.float64).reshape(1, 3, 4)
        saida = backward_warp_bilinear(Frame(dados), FlowField2D(np.ones((3, 4)), np.zeros((3, 4))))
        np.testing.assert_array_equal(saida.data[0, :, :3], dados[0, :, 1:])
        np.testing.assert_array_equal(saida.data[0, :, 3], dados[0, :, 3])

    def test_forma_incompativel(self):
        """Testa ShapeMismatch"""
        with self.assertRaises(ShapeMismatch):
            backward_warp_bilinear(Frame(np.zeros((1, 3, 4))), FlowField2D.zeros(4, 4))


if __name__ == "__main__":
    unittest.main()
