import sys
import math
import logging
import argparse
from dataclasses import dataclass, field, asdict, fields
from typing import List, Optional, Sequence

import numpy as np

from CorepModels import decay_ratios, intertwining_residual, relation_residuals
from DerivedLp import run_lp_suite
from PodlesTriple import PodlesSubalgebraError, podles_chern_report, podles_generators, podles_summability
from QAlgebra import normal_form, random_poly, random_word
from QScalar import ConfigurationError, ConvergenceError, QContext, TruncationError
from ReportStore import ReportStore, memoize_to_db
from ReportWriter import FORMATS, ReportWriter, make_payload
from SUq2Triple import run_experiment, summability_scan, trace_r, transgression
from TwistedCyclic import run_cyclic_suite

# Configuração de logging
logging.basicConfig(filename='main.log', level=logging.INFO, format='%(asctime)s - %(levelname)s - %(message)s')

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_UNSTABLE = 3

COMMANDS = ("index", "pair", "local", "trace-r", "summability", "check", "podles-chern")
RELATION_TOL = 1e-10
INTERTWINING_TOL = 1e-12
TRANSGRESSION_TOL = 1e-6
INDEX_TOL = 1e-4
TRACE_R_TAIL_FACTOR = 2.0
TRACE_R_TOL = 1e-12
PODLES_COCYCLE_TOL = 1e-6


@dataclass
class RunConfig:
    """
    Everything a run depends on. Two equal configurations give byte-identical payloads.

    precision, svd_threshold and grid_points fall back to the QSU2_* environment
    defaults when left as None.
    """
    command: str
    q: float = 0.5
    cutoff: int = 40
    spins2: List[int] = field(default_factory=lambda: [0, 1, 2])
    precision: Optional[int] = None
    svd_threshold: Optional[float] = None
    grid_points: Optional[int] = None
    trials: int = 100
    seed: int = 0
    dim: int = 6
    pairs: int = 20
    family: Optional[str] = None
    suite: Optional[str] = None
    p: Optional[float] = None
    cutoffs: List[int] = field(default_factory=list)
    lipschitz: bool = False
    entries: List[str] = field(default_factory=lambda: ["A", "B", "B*"])
    fmt: str = "json"
    output: Optional[str] = None
    cache: bool = False

    def __post_init__(self):
        if self.command not in COMMANDS:
            raise ConfigurationError(f"unknown command {self.command!r}")
        if not (0.0 < self.q < 1.0):
            raise ConfigurationError(f"q must lie in (0,1), got {self.q}")
        if self.cutoff < 1:
            raise ConfigurationError(f"cutoff must be a positive integer, got {self.cutoff}")
        if any(l2 < 0 for l2 in self.spins2):
            raise ConfigurationError("spins must be nonnegative")
        if self.fmt not in FORMATS:
            raise ConfigurationError(f"unknown format {self.fmt!r}")
        if self.trials < 1 or self.pairs < 1:
            raise ConfigurationError("trials and pairs must be positive")
        if self.command == "summability" and self.p is None:
            raise ConfigurationError("summability needs --p")

    def context(self) -> QContext:
        options = {"q": self.q}
        if self.precision is not None:
            options["precision"] = self.precision
        if self.svd_threshold is not None:
            options["svd_threshold"] = self.svd_threshold
        if self.grid_points is not None:
            options["sup_grid"] = self.grid_points
        return QContext(**options)

    def inputs(self) -> dict:
        """Configuration fields that determine the payload (output plumbing excluded)."""
        data = asdict(self)
        for key in ("fmt", "output", "cache"):
            data.pop(key)
        ctx = self.context()
        data.update(precision=ctx.precision, svd_threshold=ctx.svd_threshold, grid_points=ctx.sup_grid)
        return data

    @classmethod
    def from_inputs(cls, inputs: dict) -> "RunConfig":
        known = {f.name for f in fields(cls)}
        return cls(**{k: v for k, v in inputs.items() if k in known})


def spin_to_l2(value: str) -> int:
    """Parses a half-integer spin such as '0.5' into its doubled integer form."""
    try:
        doubled = 2.0 * float(value)
    except ValueError:
        raise argparse.ArgumentTypeError(f"spin {value!r} is not a number")
    if doubled < 0 or not math.isclose(doubled, round(doubled), abs_tol=1e-12):
        raise argparse.ArgumentTypeError(f"spin {value!r} is not a nonnegative half-integer")
    return int(round(doubled))


class Main:
    def __init__(self, stream=None, store: Optional[ReportStore] = None, writer: Optional[ReportWriter] = None):
        """
        Inicializa a aplicação principal com o fluxo de saída, o cache opcional e o escritor de relatórios.
        """
        self.stream = stream if stream is not None else sys.stdout
        self.store = store
        self.writer = writer or ReportWriter()

    @staticmethod
    def construir_parser() -> argparse.ArgumentParser:
        common = argparse.ArgumentParser(add_help=False)
        common.add_argument("--q", type=float, default=0.5, help="Deformation parameter in (0,1)")
        common.add_argument("--cutoff", type=int, default=40, help="Basis cutoff L2 in doubled-spin units")
        common.add_argument("--spin", type=spin_to_l2, nargs="+", default=[0, 1, 2],
                            help="Half-integer spins of the corepresentation unitaries")
        common.add_argument("--precision", type=int, default=None, help="Working precision in bits")
        common.add_argument("--svd-threshold", type=float, default=None, help="Kernel threshold for singular values")
        common.add_argument("--grid-points", type=int, default=None, help="Grid size for endpoint suprema")
        common.add_argument("--trials", type=int, default=100)
        common.add_argument("--seed", type=int, default=0)
        common.add_argument("--format", dest="fmt", choices=FORMATS, default="json")
        common.add_argument("--output", default=None, help="Write the report here instead of stdout")
        common.add_argument("--cache", action="store_true", help="Memoize reports in databases/reports.db")

        parser = argparse.ArgumentParser(description="Modular index experiments on SU_q(2) and the Podleś sphere")
        sub = parser.add_subparsers(dest="command", required=True)
        sub.add_parser("index", parents=[common], help="Toeplitz index of corepresentation unitaries")
        sub.add_parser("pair", parents=[common], help="Chern pairing against the index")
        local = sub.add_parser("local", parents=[common], help="Local formula transgression residuals")
        local.add_argument("--pairs", type=int, default=20)
        sub.add_parser("trace-r", parents=[common], help="Tr(R) against its closed form")
        summ = sub.add_parser("summability", parents=[common], help="Level terms of the summability traces")
        summ.add_argument("family", choices=("suq2", "podles"))
        summ.add_argument("--p", type=float, required=True)
        summ.add_argument("--cutoffs", type=int, nargs="+", default=None)
        summ.add_argument("--lipschitz", action="store_true")
        check = sub.add_parser("check", parents=[common], help="Property suites")
        check.add_argument("suite", choices=("lp", "cyclic", "rep"))
        check.add_argument("--dim", type=int, default=6)
        chern = sub.add_parser("podles-chern", parents=[common], help="Even Chern cocycle on the Podleś sphere")
        chern.add_argument("--entries", nargs=3, default=["A", "B", "B*"], choices=sorted(podles_generators()))
        return parser

    def ler_configuracao(self, argv: Optional[Sequence[str]] = None) -> RunConfig:
        args = self.construir_parser().parse_args(argv)
        options = {k: v for k, v in vars(args).items() if v is not None}
        if "spin" in options:
            options["spins2"] = options.pop("spin")
        if options.get("command") == "summability" and "cutoffs" not in options:
            options["cutoffs"] = [args.cutoff]
        return RunConfig(**options)

    @memoize_to_db("reports")
    def calcular(self, inputs: dict) -> dict:
        """
        Executa o comando descrito por `inputs` e devolve o relatório.
        """
        config = RunConfig.from_inputs(inputs)
        ctx = config.context()
        handler = getattr(self, "comando_" + config.command.replace("-", "_"))
        return handler(config, ctx, inputs)

    def comando_index(self, config: RunConfig, ctx: QContext, inputs: dict) -> dict:
        reports = run_experiment(config.spins2, ctx, config.cutoff, pairing=False, tol=INDEX_TOL)
        errors = [r.abs_err for r in reports]
        return make_payload("index", inputs, reports,
                            closed_form=[r.index_expected for r in reports],
                            abs_err=max(errors) if errors else None,
                            stable=all(r.stable for r in reports))

    def comando_pair(self, config: RunConfig, ctx: QContext, inputs: dict) -> dict:
        reports = run_experiment(config.spins2, ctx, config.cutoff, pairing=True, tol=INDEX_TOL)
        values = [{"spin2": l2, "index_numeric": r.index_numeric, "index_closed": r.index_closed,
                   "cone_correction": r.cone_correction, "pairing": r.pairing,
                   "pairing_err": r.pairing_err, "stable": r.stable}
                  for l2, r in zip(config.spins2, reports)]
        errors = [r.pairing_err for r in reports]
        return make_payload("pair", inputs, values,
                            closed_form=[r.index_expected for r in reports],
                            abs_err=max(errors) if errors else None,
                            stable=all(r.stable for r in reports))

    def comando_local(self, config: RunConfig, ctx: QContext, inputs: dict) -> dict:
        rng = np.random.default_rng(config.seed)
        results = []
        for _ in range(config.pairs):
            x = normal_form(random_word(rng, 3))
            y = normal_form(random_word(rng, 3))
            results.append(transgression(x, y, ctx, config.cutoff))
        worst = max(r.residual for r in results)
        return make_payload("local", inputs, results, abs_err=worst, stable=worst <= TRANSGRESSION_TOL)

    def comando_trace_r(self, config: RunConfig, ctx: QContext, inputs: dict) -> dict:
        report = trace_r(ctx, config.cutoff)
        # the geometric tail bounds the truncation error from above
        stable = report.abs_err <= TRACE_R_TAIL_FACTOR * report.tail_estimate + TRACE_R_TOL
        return make_payload("trace-r", inputs, report, closed_form=report.closed_form,
                            abs_err=report.abs_err, tail_estimate=report.tail_estimate, stable=stable)

    def comando_summability(self, config: RunConfig, ctx: QContext, inputs: dict) -> dict:
        cutoffs = config.cutoffs or [config.cutoff]
        if config.family == "podles":
            report = podles_summability(config.p, ctx, cutoffs)
        else:
            report = summability_scan(config.p, ctx, cutoffs, lipschitz=config.lipschitz)
        stable = report.verdict != "undetermined" and report.settled
        if report.lipschitz_plateau:
            stable = stable and all(report.lipschitz_plateau.values())
        return make_payload("summability", inputs, report, tail_estimate=report.tail_estimate, stable=stable)

    def comando_check(self, config: RunConfig, ctx: QContext, inputs: dict) -> dict:
        if config.suite == "lp":
            results = run_lp_suite(config.dim, config.trials, config.seed, grid_points=ctx.sup_grid)
            values = {name: r.as_dict() for name, r in results.items()}
            passed = all(r.passed for r in results.values())
        elif config.suite == "cyclic":
            results = run_cyclic_suite(config.trials, config.seed)
            values = {name: r.as_dict() for name, r in results.items()}
            passed = all(r.passed for r in results.values())
        else:
            values, passed = self.verificar_representacoes(config, ctx)
        return make_payload("check", inputs, values, stable=passed)

    @staticmethod
    def verificar_representacoes(config: RunConfig, ctx: QContext):
        """
        Resíduos das relações de pi e rho, intertwining de pi e razões de decaimento de pi - rho.
        """
        L2 = config.cutoff
        relations = {kind: relation_residuals(kind, ctx, L2) for kind in ("pi", "rho")}
        rng = np.random.default_rng(config.seed)
        intertwining = {}
        for k in range(min(config.trials, 10)):
            x = random_poly(rng, 3, terms=2)
            for z in (1j, -1j, -2j, 0.3):
                intertwining[f"{k}:{z}"] = intertwining_residual(x, z, ctx, L2)
        decay = {g: decay_ratios(g, ctx, L2) for g in ("a", "c")}
        tested = [r for ratios in decay.values() for l2, r in ratios.items() if l2 >= 10 and r is not None]
        passed = (max(max(r.values()) for r in relations.values()) <= RELATION_TOL
                  and max(intertwining.values()) <= INTERTWINING_TOL
                  and all(r <= ctx.q + 0.1 for r in tested))
        values = {"relations": relations, "intertwining_max": max(intertwining.values()), "decay_ratios": decay}
        return values, passed

    def comando_podles_chern(self, config: RunConfig, ctx: QContext, inputs: dict) -> dict:
        report = podles_chern_report(config.entries, ctx, config.cutoff)
        stable = max(report.cyclic_residual, report.boundary_residual) <= PODLES_COCYCLE_TOL
        return make_payload("podles-chern", inputs, report, tail_estimate=report.tail_estimate, stable=stable)

    def emitir(self, payload: dict, config: RunConfig):
        self.writer.write(payload, config.fmt, config.output, self.stream)

    def iniciar(self, argv: Optional[Sequence[str]] = None) -> int:
        """
        Inicia o fluxo principal do programa e devolve o código de saída.
        """
        try:
            config = self.ler_configuracao(argv)
        except ConfigurationError as e:
            logging.error(f"Configuração inválida: {e}")
            print(f"error: {e}", file=sys.stderr)
            return EXIT_CONFIG
        if config.cache and self.store is None:
            self.store = ReportStore()

        try:
            inputs = config.inputs()
            payload = self.calcular(inputs)
        except (ConfigurationError, TruncationError, PodlesSubalgebraError) as e:
            logging.error(f"Configuração inválida para {config.command}: {e}")
            print(f"error: {e}", file=sys.stderr)
            return EXIT_CONFIG
        except ConvergenceError as e:
            logging.error(f"Falha de convergência em {config.command}: {e}")
            payload = make_payload(config.command, inputs, {"error": str(e), "diagnostic": e.payload}, stable=False)
            self.emitir(payload, config)
            return EXIT_UNSTABLE

        self.emitir(payload, config)
        if not payload["stable"]:
            logging.warning(f"Relatório instável para {config.command}")
            return EXIT_UNSTABLE
        logging.info(f"Comando {config.command} concluído")
        return EXIT_OK


if __name__ == "__main__":
    app = Main()
    sys.exit(app.iniciar())
