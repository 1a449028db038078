# homogenization/runners.py
"""
Orchestration of the management commands.

Each runner turns a validated run configuration into a report dictionary
and an exit code. Domain failures with a documented exit code are caught
here and recorded in the report; anything else propagates.
"""
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np

from .config import (
    CoercivityConfig,
    DecomposeConfig,
    EllipticityConfig,
    HomogenizeConfig,
    LaminateConfig,
    MicrostructureConfig,
    dump_config,
)
from .engine import cellsolver, coercivity, laminate_oracle, nulllag
from .engine.errors import (
    ConvergenceError,
    EigenConvergenceError,
    HomogenizationError,
    IllPosedLaminateError,
)
from .engine.microgeom import AdmissibilityReport, Microstructure, check_admissibility, from_descriptor
from .engine.tensor2d import Tensor4, isotropic, project_isotropic, rank_one_min
from .reports import envelope, write_corrector_dump

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_INDEFINITE = 2
EXIT_NOT_CONVERGED = 3
EXIT_ILL_POSED = 4

BLOCH_CSV_HEADER = ('k1', 'k2', 'lambda')
SWEEP_CSV_HEADER = ('theta', 'min_rank_one', 'argmin_angle_a', 'argmin_angle_b')


@dataclass
class CsvTable:
    path: Path
    header: Sequence[str]
    rows: List[List[Any]]


@dataclass
class RunOutcome:
    report: Dict[str, Any]
    exit_code: int = EXIT_OK
    message: str = ''
    tables: List[CsvTable] = field(default_factory=list)


class StrictModeError(ValueError):
    """Admissibility hypotheses fail and --strict was given."""

    def __init__(self, failures: List[str]):
        self.failures = failures
        super().__init__(f"admissibility check failed under --strict: {', '.join(failures)}")


def _error_body(exc: HomogenizationError) -> Dict[str, Any]:
    details = {
        key: getattr(exc, key)
        for key in ('curvature', 'iteration', 'iterations', 'residual', 'eigenvalue', 'phase')
        if hasattr(exc, key)
    }
    return {'type': exc.__class__.__name__, 'message': str(exc), **details}


def build_microstructure(cfg: MicrostructureConfig, base_dir: Optional[Path] = None) -> Microstructure:
    return from_descriptor(cfg.to_descriptor(), base_dir=base_dir)


def screen_admissibility(m: Microstructure, strict: bool) -> AdmissibilityReport:
    """Warn about failing hypotheses; raise StrictModeError under --strict."""
    report = check_admissibility(m)
    failures = report.failures()
    if failures:
        logger.warning(f"⚠️ Admissibility hypotheses fail: {', '.join(failures)}")
        if strict:
            raise StrictModeError(failures)
    else:
        logger.info("✅ Phase conditions and matrix connectivity hold")
    return report


def _csv_path(explicit: Optional[str], out: Optional[str]) -> Optional[Path]:
    if explicit:
        return Path(explicit)
    if out:
        return Path(out).with_suffix('.csv')
    return None


# ---------------------------------------------------------------------------
# homogenize
# ---------------------------------------------------------------------------

def run_homogenize(cfg: HomogenizeConfig, base_dir: Optional[Path] = None) -> RunOutcome:
    m = build_microstructure(cfg.microstructure, base_dir)
    admissibility = screen_admissibility(m, cfg.strict)
    opts = cellsolver.SolverOptions(
        tol=cfg.solver.tol,
        max_iter=cfg.solver.max_iter,
        reference=cfg.solver.reference.to_moduli() if cfg.solver.reference else None,
        workers=cfg.solver.workers,
    )
    body: Dict[str, Any] = {
        'microstructure': m.describe(),
        'admissibility': admissibility.to_json(),
    }
    try:
        solution = cellsolver.homogenize(m, opts)
        extrapolation = cellsolver.extrapolate(m, opts, coarse=solution) if cfg.extrapolate else None
    except ConvergenceError as e:
        logger.error(f"❌ Cell problem did not converge: {e}")
        body['error'] = _error_body(e)
        return RunOutcome(envelope('homogenize', dump_config(cfg), body), EXIT_NOT_CONVERGED, str(e))

    lstar = solution.lstar
    ellipticity = rank_one_min(lstar, grid_n=cfg.rank_one_grid)
    projection, residual = project_isotropic(lstar)
    voigt = cellsolver.voigt_bound(m)

    body['cell_solution'] = solution.to_json()
    body['ellipticity'] = ellipticity.to_json()
    body['isotropic_projection'] = {'moduli': projection.to_json(), 'residual': residual}
    body['corrector_gradient_energy'] = {
        name: cellsolver.energy_of(m, np.zeros((2, 2)), v)
        for name, v in zip(cellsolver.LOADING_NAMES, solution.correctors)
    }
    body['bounds'] = _bound_checks(m, lstar, voigt)
    body['homogenized_bounds'] = coercivity.homogenized_bounds(m, lstar).to_json()
    if extrapolation is not None:
        body['extrapolated'] = {
            **extrapolation.to_json(),
            'ellipticity': rank_one_min(extrapolation.lstar, grid_n=cfg.rank_one_grid).to_json(),
            'fine_diagnostics': extrapolation.fine.diagnostics,
        }

    if cfg.corrector_dump:
        prefix = Path(cfg.corrector_dump)
        for name, v in zip(cellsolver.LOADING_NAMES, solution.correctors):
            write_corrector_dump(prefix.with_name(f"{prefix.name}_{name}.bin"), v)

    report = envelope('homogenize', dump_config(cfg), body)
    if solution.indefiniteness_detected or (extrapolation is not None and extrapolation.fine.indefiniteness_detected):
        message = "discrete energy is not positive definite (non-positive curvature in CG)"
        logger.warning(f"⚠️ {message}")
        return RunOutcome(report, EXIT_INDEFINITE, message)
    logger.info(f"✅ Homogenized tensor is {ellipticity.classification.value} (min {ellipticity.min_value:.3e})")
    return RunOutcome(report, EXIT_OK)


def _bound_checks(m: Microstructure, lstar: Tensor4, voigt: Tensor4) -> Dict[str, Any]:
    tol = 1e-10 * max(voigt.norm, 1.0)
    energies = [float(to @ lstar.mandel @ to) for to in np.eye(3)]
    voigt_energies = [float(to @ voigt.mandel @ to) for to in np.eye(3)]
    checks: Dict[str, Any] = {
        'voigt': voigt.to_json(),
        'voigt_upper_bound_holds': all(e <= v + tol for e, v in zip(energies, voigt_energies)),
        'reuss': None,
        'reuss_lower_bound_holds': None,
    }
    if all(p.very_strongly_elliptic for p in m.present_phases()):
        reuss = cellsolver.reuss_bound(m)
        checks['reuss'] = reuss.to_json()
        checks['reuss_lower_bound_holds'] = all(
            float(to @ reuss.mandel @ to) <= e + tol for to, e in zip(np.eye(3), energies)
        )
    return checks


# ---------------------------------------------------------------------------
# coercivity
# ---------------------------------------------------------------------------

def run_coercivity(cfg: CoercivityConfig, base_dir: Optional[Path] = None) -> RunOutcome:
    m = build_microstructure(cfg.microstructure, base_dir)
    admissibility = screen_admissibility(m, cfg.strict)
    body: Dict[str, Any] = {
        'microstructure': m.describe(),
        'admissibility': admissibility.to_json(),
    }
    try:
        result = coercivity.coercivity_report(
            m,
            n=cfg.resolution,
            eig_tol=cfg.eig_tol,
            k_grid=cfg.k_grid,
            reduce_wedge=cfg.reduce_wedge,
            workers=cfg.workers,
            method=cfg.method,
        )
    except EigenConvergenceError as e:
        logger.error(f"❌ Eigensolver did not converge: {e}")
        body['error'] = _error_body(e)
        return RunOutcome(envelope('coercivity', dump_config(cfg), body), EXIT_NOT_CONVERGED, str(e))

    body['coercivity'] = result.to_json()
    if admissibility.admissible and result.lambda_per <= 0:
        logger.warning("⚠️ Λ_per ≤ 0 for an admissible microstructure; recorded as a counterexample candidate")
        body['counterexample_candidate'] = True

    tables = []
    csv_path = _csv_path(cfg.csv, cfg.out)
    if result.bloch_samples and csv_path is not None:
        tables.append(CsvTable(csv_path, BLOCH_CSV_HEADER, result.csv_rows()))
    logger.info(f"✅ Λ_per = {result.lambda_per:.6e} at n={result.resolution}")
    return RunOutcome(envelope('coercivity', dump_config(cfg), body), EXIT_OK, tables=tables)


# ---------------------------------------------------------------------------
# decompose
# ---------------------------------------------------------------------------

def identity_residual(decomposition: nulllag.DensityDecomposition, samples: int, seed: int) -> float:
    """Largest |G·LG + 4μ₁ det G − P − R| over random gradients, both phases."""
    if samples == 0:
        return 0.0
    rng = np.random.default_rng(seed)
    G = rng.standard_normal((2, 2, samples))
    worst = 0.0
    for index, phase in ((1, decomposition.phase1), (2, decomposition.phase2)):
        L = isotropic(phase)
        s = np.stack([G[0, 0], G[1, 1], (G[0, 1] + G[1, 0]) / np.sqrt(2.0)])
        lhs = np.einsum('ik,ij,jk->k', s, L.mandel, s) + 4.0 * decomposition.mu1 * nulllag.determinant(G)
        P, R = decomposition.split(index, G)
        scale = np.maximum(np.abs(lhs), 1.0)
        worst = max(worst, float(np.max(np.abs(lhs - P - R) / scale)))
    return worst


def run_decompose(cfg: DecomposeConfig, base_dir: Optional[Path] = None) -> RunOutcome:
    phase1, phase2 = cfg.phase1.to_moduli(), cfg.phase2.to_moduli()
    decomposition = nulllag.decompose(phase1, phase2)
    conditions = nulllag.phase_conditions_hold(phase1, phase2)
    if not conditions:
        logger.warning("⚠️ Phase conditions fail; α reported as not applicable")
        if cfg.strict:
            raise StrictModeError(['phase_conditions'])
    body = {
        'phase_conditions_hold': conditions,
        'decomposition': decomposition.to_json(),
        'identity_check': {
            'samples': cfg.identity_samples,
            'seed': cfg.seed,
            'max_relative_residual': identity_residual(decomposition, cfg.identity_samples, cfg.seed),
        },
    }
    return RunOutcome(envelope('decompose', dump_config(cfg), body), EXIT_OK)


# ---------------------------------------------------------------------------
# laminate
# ---------------------------------------------------------------------------

def run_laminate(cfg: LaminateConfig, base_dir: Optional[Path] = None) -> RunOutcome:
    phase1, phase2 = cfg.phase1.to_moduli(), cfg.phase2.to_moduli()
    routes: Tuple[str, ...] = laminate_oracle.ROUTES if cfg.route == 'both' else (cfg.route,)
    body: Dict[str, Any] = {}
    tables: List[CsvTable] = []
    try:
        spec = laminate_oracle.LaminateSpec(cfg.theta, tuple(cfg.normal), phase1, phase2)
        tensors = {route: laminate_oracle.laminate_homogenize(spec, route) for route in routes}
        lstar = tensors[routes[0]]
        body['laminate'] = spec.to_json()
        body['lstar'] = {route: t.to_json() for route, t in tensors.items()}
        if len(tensors) > 1:
            a, b = (t.mandel for t in tensors.values())
            body['route_discrepancy'] = float(np.linalg.norm(a - b) / max(np.linalg.norm(a), 1e-300))
        body['ellipticity'] = rank_one_min(lstar).to_json()

        if cfg.sweep is not None:
            samples = laminate_oracle.ellipticity_vs_fraction(
                cfg.sweep.values(), phase1, phase2, tuple(cfg.normal), routes[0], cfg.workers
            )
            body['sweep'] = [s.to_json(include_tensor=cfg.include_tensors) for s in samples]
            csv_path = _csv_path(cfg.csv, cfg.out)
            if csv_path is not None:
                tables.append(CsvTable(csv_path, SWEEP_CSV_HEADER, [s.csv_row() for s in samples]))
    except IllPosedLaminateError as e:
        logger.error(f"❌ Ill-posed laminate: {e}")
        body['error'] = _error_body(e)
        return RunOutcome(envelope('laminate', dump_config(cfg), body), EXIT_ILL_POSED, str(e))

    return RunOutcome(envelope('laminate', dump_config(cfg), body), EXIT_OK, tables=tables)


# ---------------------------------------------------------------------------
# ellipticity
# ---------------------------------------------------------------------------

def run_ellipticity(cfg: EllipticityConfig, base_dir: Optional[Path] = None) -> RunOutcome:
    if cfg.moduli is not None:
        L = isotropic(cfg.moduli.to_moduli())
    else:
        L = Tensor4(np.asarray(cfg.mandel, dtype=float))
    report = rank_one_min(L, grid_n=cfg.grid, refine_tol=cfg.refine_tol)
    projection, residual = project_isotropic(L)
    body = {
        'tensor': L.to_json(),
        'ellipticity': report.to_json(),
        'very_strongly_elliptic': bool(L.eigenvalues()[0] > 0),
        'isotropic_projection': {'moduli': projection.to_json(), 'residual': residual},
        'basis_energies': [float(x) for x in np.diag(L.mandel)],
    }
    return RunOutcome(envelope('ellipticity', dump_config(cfg), body), EXIT_OK)


RUNNERS = {
    'homogenize': run_homogenize,
    'coercivity': run_coercivity,
    'decompose': run_decompose,
    'laminate': run_laminate,
    'ellipticity': run_ellipticity,
}
