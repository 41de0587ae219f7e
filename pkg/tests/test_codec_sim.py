"""
Testes unitários para o módulo codec_sim.py
"""

import sys
import tempfile
import unittest
from pathlib import Path

import numpy as np

# Adiciona src ao path
sys.path.insert(0, str(Path(__file__).parent.parent / "src"))

from codec_sim import (
    FrameReport,
    RdConfig,
    SimConfig,
    diagnostics,
    format_report,
    rd_report,
    reports_to_frame,
    simulate_sequence,
    write_simulation,
)
from errors import EmptyInput, InvalidConfig, InvalidPlan, MissingFrame
from gop_planner import GopConfig, GopPlan, PlanEntry, plan_gop
from metrics import psnr
from synthetic import acceleration_sequence, static_sequence, translation_sequence
from tensor_io import VoxelFlowStack
from voxel_fit import FitConfig


class EstimadorVerdadeiro:
    """Devolve o fluxo verdadeiro de uma sequência sintética."""

    def __init__(self, seq):
        self.seq = seq

    def estimate(self, src, dst, src_index, dst_index):
        return self.seq.true_flow(src_index, dst_index)


def _sim(M=1, iters=3, **kw):
    return SimConfig(M=M, fit=FitConfig(iters=iters), block=4, radius=2, **kw)


class TestConfigs(unittest.TestCase):
    """Testes para RdConfig e SimConfig"""

    def test_alias_lambda(self):
        """Testa campo 'lambda' pelo alias"""
        self.assertEqual(RdConfig(**{"lambda": 10.0}).lambda_, 10.0)

    def test_metrica_normalizada(self):
        """Testa normalização de ms_ssim → MS-SSIM"""
        self.assertEqual(RdConfig(distortion_metric="ms_ssim").distortion_metric, "MS-SSIM")

    def test_metrica_invalida(self):
        """Testa InvalidConfig para métrica desconhecida"""
        with self.assertRaises(InvalidConfig):
            RdConfig(distortion_metric="SAD")

    def test_lambda_positivo(self):
        """Testa λ > 0"""
        with self.assertRaises(InvalidConfig):
            RdConfig(**{"lambda": 0.0})

    def test_fonte_de_fluxo(self):
        """Testa flow_source inválida e 'files' sem diretório"""
        with self.assertRaises(InvalidConfig):
            SimConfig(flow_source="raft")
        with self.assertRaises(InvalidConfig):
            SimConfig(flow_source="files").estimator()


class TestDiagnostics(unittest.TestCase):
    """Testes para diagnostics"""

    def test_centroide(self):
        """Testa média e desvio ponderados com logits iguais"""
        h, w = 2, 3
        gx = np.stack([np.full((h, w), 1.0), np.full((h, w), 3.0)])
        gz = np.stack([np.zeros((h, w)), np.full((h, w), 2.0)])
        pilha = VoxelFlowStack.from_fields(gx, np.zeros((2, h, w)), gz, np.zeros((2, h, w)))
        diag = diagnostics(pilha)
        np.testing.assert_allclose(diag.mean_temporal_flow, 1.0)
        np.testing.assert_allclose(diag.mean_spatial_flow[0], 2.0)
        np.testing.assert_allclose(diag.std_spatial_flow[0], 1.0)
        np.testing.assert_allclose(diag.std_spatial_flow[1], 0.0)
        np.testing.assert_array_equal(diag.nearest_reference, 1)
        self.assertEqual(diag.as_array().shape, (6, h, w))

    def test_limite_de_profundidade(self):
        """Testa g_z limitado a [0, D−1] quando D é informado"""
        pilha = VoxelFlowStack.from_fields(*(np.zeros((1, 2, 2)),) * 2, np.full((1, 2, 2), 5.0), np.zeros((1, 2, 2)))
        np.testing.assert_allclose(diagnostics(pilha, depth=3).mean_temporal_flow, 2.0)
        np.testing.assert_allclose(diagnostics(pilha).mean_temporal_flow, 5.0)


class TestRdReport(unittest.TestCase):
    """Testes para rd_report"""

    def test_media(self):
        """Testa (1/T) Σ (R + λ·d)"""
        relatorios = [FrameReport(1, rate_proxy=1.0, distortion=0.01), FrameReport(2, rate_proxy=3.0, distortion=0.03)]
        resumo = rd_report(relatorios, 100.0)
        self.assertEqual(resumo.frames, 2)
        self.assertAlmostEqual(resumo.mean_rate, 2.0)
        self.assertAlmostEqual(resumo.mean_distortion, 0.02)
        self.assertAlmostEqual(resumo.mean_cost, 4.0)

    def test_vazio(self):
        """Testa EmptyInput"""
        with self.assertRaises(EmptyInput):
            rd_report([], 1.0)

    def test_tabela(self):
        """Testa conversão para DataFrame"""
        df = reports_to_frame([FrameReport(0, is_intra=True), FrameReport(1, gfp_psnr=(30.0, 31.5))])
        self.assertEqual(len(df), 2)
        self.assertEqual(df.loc[1, "gfp_psnr"], "30.0;31.5")


class TestSimulateSequence(unittest.TestCase):
    """Testes para simulate_sequence"""

    @classmethod
    def setUpClass(cls):
        cls.seq = translation_sequence(length=3, size=24, velocity=(1, 0))
        cls.plano = plan_gop(GopConfig(mode="LDB", sequence_length=3, n_refs=2, warp_refs=2))
        cls.rd = RdConfig()
        cls.resultado = simulate_sequence(cls.seq.as_dict(), cls.plano, cls.rd, _sim(M=2))

    def test_relatorios_em_ordem_de_codificacao(self):
        """Testa um relatório por quadro, na ordem do plano"""
        self.assertEqual([r.display_index for r in self.resultado.reports], self.plano.coding_order)
        self.assertTrue(self.resultado.reports[0].is_intra)
        self.assertEqual(self.resultado.reports[0].rate_proxy, 0.0)

    def test_reconstrucao_limitada(self):
        """Testa |recon − original| ≤ passo/2 em malha fechada"""
        passo = self.rd.quant_step
        for t, recon in self.resultado.reconstructions.items():
            with self.subTest(quadro=t):
                self.assertLessEqual(np.abs(recon.data - self.seq.frames[t].data).max(), passo / 2 + 1e-12)

    def test_resumo_sobre_quadros_inter(self):
        """Testa agregação apenas dos quadros inter"""
        esperado = rd_report(self.resultado.inter_reports(), self.rd.lambda_)
        self.assertEqual(self.resultado.summary, esperado)
        self.assertEqual(self.resultado.summary.frames, 2)

    def test_saidas_por_quadro_inter(self):
        """Testa fluxos, predições e diagnósticos dos quadros inter"""
        self.assertEqual(sorted(self.resultado.flows), [1, 2])
        self.assertEqual(self.resultado.flows[2].M, 2)
        self.assertEqual(self.resultado.diagnostics[2].as_array().shape, (6, 24, 24))

    def test_predicao_nao_pior_que_copia(self):
        """Testa predição ≥ cópia do quadro anterior (iterado inicial incluso)"""
        relatorio = next(r for r in self.resultado.reports if r.display_index == 1)
        copia = psnr(self.seq.frames[0], self.seq.frames[1])
        self.assertGreaterEqual(relatorio.prediction_psnr, copia - 1e-9)

    def test_determinismo(self):
        """Testa relatório idêntico em duas execuções"""
        outro = simulate_sequence(self.seq.as_dict(), self.plano, self.rd, _sim(M=2))
        self.assertEqual(format_report(outro, self.rd), format_report(self.resultado, self.rd))

    def test_write_simulation(self):
        """Testa arquivos gravados"""
        with tempfile.TemporaryDirectory() as tmp:
            write_simulation(self.resultado, self.rd, tmp)
            nomes = {p.name for p in Path(tmp).iterdir()}
            texto = (Path(tmp) / "report.txt").read_text(encoding="utf-8")
        for nome in ("recon_000.ppm", "recon_002.ppm", "flows_001.vten", "diag_002.vten", "report.txt", "report.csv"):
            self.assertIn(nome, nomes)
        self.assertTrue(texto.splitlines()[-1].startswith("aggregate frames=2"))
        self.assertEqual(sum(1 for l in texto.splitlines() if l.startswith("frame ")), 3)


class TestSequenciaEstatica(unittest.TestCase):
    """Testa simulação de cena parada com busca de blocos"""

    def test_predicao_exata(self):
        """Testa PSNR de predição ≥ 50 dB e entropia residual nula"""
        seq = static_sequence(length=4, size=32)
        plano = plan_gop(GopConfig(mode="LDB", sequence_length=4, n_refs=3, warp_refs=2))
        resultado = simulate_sequence(seq.as_dict(), plano, RdConfig(), _sim(M=4))
        inter = resultado.inter_reports()
        self.assertEqual(len(inter), 3)
        for r in inter:
            with self.subTest(quadro=r.display_index):
                self.assertGreaterEqual(r.prediction_psnr, 50.0)
                self.assertAlmostEqual(r.residual_entropy_bits_per_pixel, 0.0, places=9)
                self.assertEqual(r.hole_fraction, 0.0)


class TestSimulateSequenceErros(unittest.TestCase):
    """Testes de erros de simulate_sequence"""

    def test_quadro_ausente(self):
        """Testa MissingFrame"""
        seq = translation_sequence(length=2, size=16)
        plano = plan_gop(GopConfig(mode="LDP", sequence_length=3))
        with self.assertRaises(MissingFrame):
            simulate_sequence(seq.as_dict(), plano, RdConfig(), _sim())

    def test_plano_invalido(self):
        """Testa InvalidPlan antes de qualquer processamento"""
        seq = translation_sequence(length=2, size=16)
        plano = GopPlan((PlanEntry(0, 0, True), PlanEntry(1, 1, False)))
        with self.assertRaises(InvalidPlan):
            simulate_sequence(seq.as_dict(), plano, RdConfig(), _sim())


class TestGFP(unittest.TestCase):
    """Testes da predição de fluxo dentro da simulação"""

    def test_gfp_melhora_movimento_acelerado(self):
        """Testa que o GFP (k = 2, fluxos verdadeiros) supera a inicialização nula"""
        seq = acceleration_sequence(length=4, size=24)
        plano = plan_gop(GopConfig(mode="LDB", sequence_length=4, n_refs=3, warp_refs=2))
        estimador = EstimadorVerdadeiro(seq)
        com = simulate_sequence(seq.as_dict(), plano, RdConfig(), _sim(), estimador)
        sem = simulate_sequence(seq.as_dict(), plano, RdConfig(), _sim(use_gfp=False), estimador)

        r_com = next(r for r in com.reports if r.display_index == 3)
        r_sem = next(r for r in sem.reports if r.display_index == 3)
        self.assertGreater(r_com.prediction_psnr, r_sem.prediction_psnr)
        self.assertEqual(len(r_com.gfp_psnr), 2)
        self.assertGreater(r_com.hole_fraction, 0.0)
        self.assertIn(3, com.holes)
        self.assertEqual(r_sem.gfp_psnr, ())

    def test_ms_ssim_como_distorcao(self):
        """Testa distorção 1 − MS-SSIM em [0, 1]"""
        seq = translation_sequence(length=2, size=24, velocity=(1, 0))
        plano = plan_gop(GopConfig(mode="LDP", sequence_length=2))
        res = simulate_sequence(seq.as_dict(), plano, RdConfig(distortion_metric="MS-SSIM"), _sim())
        d = res.inter_reports()[0].distortion
        self.assertGreaterEqual(d, -1e-12)
        self.assertLess(d, 1.0)


if __name__ == "__main__":
    unittest.main()
