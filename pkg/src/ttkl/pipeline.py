"""End-to-end construction of the expansion from a geometry and cumulant kernels.

Steps, in order: pull the kernels back to the parametric cube, decompose
the covariance as a tensor train and test it, extract directional modes,
decompose and test the third cumulant, project and compress it, and test
the final expansion against both kernels.
"""

import copy
import logging
import time
from dataclasses import asdict, dataclass, field

import numpy as np

from . import nurbs
from .cumulant import assemble_final, gram_mode1, hosvd_truncate, identity_compression, project_third_cumulant
from .errors import ConfigError, NotConverged, StageFailed, TTKLError
from .kernels import make_kernel
from .klmodes import compute_modes
from .ttcross import CrossConfig, auxiliary_function, cross_decompose
from .validate import final_cumulant_error, global_relative_error

log = logging.getLogger(__name__)

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib


@dataclass
class PipelineConfig:
    """Everything a run needs; see docs/config.md for the file layout."""

    geometry: dict
    kernel2: dict
    kernel3: dict = None
    cross2: CrossConfig = field(default_factory=CrossConfig)
    cross3: CrossConfig = field(default_factory=lambda: CrossConfig(tol=1e-5))
    N: int = 1000
    N3: int = 1000
    test_seed: int = 0
    tol_g2: float = 1e-4
    tol_g3: float = 1e-3
    max_retries: int = 2
    tol3: float = 0.9999
    qr_method: str = "householder"
    energy_tol: float = None
    grid: int = 101
    oracle_order: int = None

    def __post_init__(self):
        for name in ("tol_g2", "tol_g3", "tol3"):
            v = getattr(self, name)
            if not 0.0 < v < 1.0:
                raise ConfigError(f"{name} must lie in (0, 1), got {v}")
        if self.N < 1 or self.N3 < 1:
            raise ConfigError("test sample counts must be positive")
        if self.max_retries < 0:
            raise ConfigError("max_retries must be >= 0")
        if self.qr_method not in ("householder", "cholesky"):
            raise ConfigError(f"unknown QR method {self.qr_method!r}")
        if self.energy_tol is not None and not 0.0 < self.energy_tol < 1.0:
            raise ConfigError("energy_tol must lie in (0, 1)")
        if self.grid < 2:
            raise ConfigError("grid needs at least two points")

    def build_geometry(self):
        return build_geometry(self.geometry)

    def with_seed(self, seed):
        """Copy with every random stream keyed by ``seed``."""
        out = copy.deepcopy(self)
        out.cross2.seed = int(seed)
        out.cross3.seed = int(seed)
        out.test_seed = int(seed)
        return out

    def echo(self):
        d = asdict(self)
        return {k: v for k, v in d.items() if v is not None}


def build_geometry(spec):
    spec = dict(spec)
    preset = spec.pop("preset", None)
    if preset is not None:
        if preset not in nurbs.PRESETS:
            raise ConfigError(f"unknown geometry preset {preset!r}; choose from {sorted(nurbs.PRESETS)}")
        try:
            return nurbs.PRESETS[preset](**spec)
        except TypeError as exc:
            raise ConfigError(f"bad parameters for preset {preset!r}: {exc}") from None
    try:
        return nurbs.NurbsGeometry.from_flat(spec["degrees"], spec["knots"], spec["control_points"], spec["weights"])
    except KeyError as exc:
        raise ConfigError(f"geometry needs 'preset' or key {exc}") from None


def _cross_config(section, default_tol):
    section = dict(section or {})
    known = {"tol", "maxswp", "m0", "mk", "seed"}
    unknown = set(section) - known
    if unknown:
        raise ConfigError(f"unknown cross settings {sorted(unknown)}")
    section.setdefault("tol", default_tol)
    try:
        return CrossConfig(**section)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def config_from_dict(d):
    """Build and validate a PipelineConfig from a parsed config tree."""
    d = dict(d)
    if "geometry" not in d or "kernel2" not in d:
        raise ConfigError("config needs [geometry] and [kernel2] sections")
    test = dict(d.get("test", {}))
    modes = dict(d.get("modes", {}))
    comp = dict(d.get("compression", {}))
    out = dict(d.get("output", {}))
    kwargs = dict(
        geometry=dict(d["geometry"]),
        kernel2=dict(d["kernel2"]),
        kernel3=dict(d["kernel3"]) if "kernel3" in d else None,
        cross2=_cross_config(d.get("cross2"), 1e-6),
        cross3=_cross_config(d.get("cross3"), 1e-5),
    )
    mapping = {
        "N": (test, "N"), "N3": (test, "N3"), "test_seed": (test, "seed"),
        "tol_g2": (test, "tol_g2"), "tol_g3": (test, "tol_g3"), "max_retries": (test, "max_retries"),
        "tol3": (comp, "tol3"), "qr_method": (modes, "qr"), "energy_tol": (modes, "energy_tol"),
        "grid": (out, "grid"), "oracle_order": (out, "oracle_order"),
    }
    for name, (section, key) in mapping.items():
        if key in section:
            kwargs[name] = section[key]
    cfg = PipelineConfig(**kwargs)
    # fail early on bad geometry or kernels
    cfg.build_geometry()
    make_kernel(cfg.kernel2, 2)
    if cfg.kernel3 is not None:
        make_kernel(cfg.kernel3, 3)
    return cfg


def load_config(path):
    try:
        with open(path, "rb") as fh:
            tree = tomllib.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"config {path} is not valid TOML: {exc}") from None
    return config_from_dict(tree)


@dataclass
class RunReport:
    stages: list = field(default_factory=list)
    ranks: dict = field(default_factory=dict)
    counts: dict = field(default_factory=dict)
    errors: list = field(default_factory=list)
    timings: dict = field(default_factory=dict)
    retries: list = field(default_factory=list)
    diagnostics: dict = field(default_factory=dict)
    config: dict = field(default_factory=dict)

    def error(self, metric):
        for e in self.errors:
            if e.metric == metric:
                return e.value
        return None

    def as_dict(self, timing=True):
        d = {
            "stages": list(self.stages),
            "ranks": {k: list(v) for k, v in self.ranks.items()},
            "counts": self.counts,
            "errors": [e.as_dict() for e in self.errors],
            "retries": self.retries,
            "diagnostics": self.diagnostics,
            "config": self.config,
        }
        if timing:
            d["timings"] = self.timings
        else:
            for e in d["errors"]:
                e.pop("elapsed")
        return d


class _Clock:
    def __init__(self, report):
        self.report = report

    def __call__(self, name):
        self.name = name
        return self

    def __enter__(self):
        self.start = time.perf_counter()
        self.report.stages.append(self.name)
        log.info("stage %s", self.name)

    def __exit__(self, *exc):
        self.report.timings[self.name] = self.report.timings.get(self.name, 0.0) + time.perf_counter() - self.start


def decompose_with_retries(G, a, cross, tol_g, N, test_seed, max_retries, label, report):
    """Cross-decompose and run the global random test; enlarge the search when it fails.

    A failed attempt (non-convergence or error above ``tol_g``) doubles the
    sample count per pivot search and tightens the tolerance tenfold.
    """
    cfg = copy.deepcopy(cross)
    for attempt in range(max_retries + 1):
        try:
            train, sets, diag = cross_decompose(G, a, cfg)
        except NotConverged as exc:
            train, diag, err = None, exc.diagnostics, None
        else:
            err = global_relative_error(G, train, a, N, test_seed, f"eps_g{label}")
            if err.value <= tol_g:
                return train, diag, err, cfg
        if attempt == max_retries:
            break
        reason = "not converged" if err is None else f"eps={err.value:.3e} > {tol_g:g}"
        report.retries.append({"stage": f"tt{label}", "attempt": attempt + 1, "reason": reason, "mk": cfg.mk * 2, "tol": cfg.tol / 10})
        log.warning("order-%s cross failed (%s); retrying", label, reason)
        cfg.mk *= 2
        cfg.tol /= 10
    raise StageFailed(f"tt{label}", {"errdm": np.asarray(diag.errdm).tolist(), "eps": None if err is None else err.value})


def run(config, order=3):
    """Execute the pipeline; returns ``(FinalExpansion, RunReport)``.

    ``order=2`` stops after the covariance stages even if a third-order
    kernel is configured.
    """
    report = RunReport(config=config.echo())
    clock = _Clock(report)
    t0 = time.perf_counter()
    try:
        with clock("transform"):
            geom = config.build_geometry()
            m = geom.dim_param
            cov = nurbs.pullback_kernel(geom, make_kernel(config.kernel2, 2))
            G2 = auxiliary_function(cov, m, 2)

        with clock("tt2"):
            train2, diag2, err2, used2 = decompose_with_retries(
                G2, 2 * m, config.cross2, config.tol_g2, config.N, config.test_seed, config.max_retries, "2", report
            )
        report.errors.append(err2)
        report.timings["tt2"] -= err2.elapsed
        report.timings["eps_g2"] = err2.elapsed
        report.ranks["order2"] = train2.ranks
        report.diagnostics["errdm_order2"] = np.asarray(diag2.errdm).tolist()
        report.diagnostics["evaluations_order2"] = int(diag2.evaluations)

        with clock("modes"):
            modes = compute_modes(train2, m, config.qr_method, config.energy_tol)
        report.counts["modes"] = list(modes.counts)

        lc = None
        use3 = order == 3 and config.kernel3 is not None
        if use3:
            cum3 = nurbs.pullback_kernel(geom, make_kernel(config.kernel3, 3))
            G3 = auxiliary_function(cum3, m, 3)
            with clock("tt3"):
                train3, diag3, err3, used3 = decompose_with_retries(
                    G3, 3 * m, config.cross3, config.tol_g3, config.N3, config.test_seed, config.max_retries, "3", report
                )
            report.errors.append(err3)
            report.timings["tt3"] -= err3.elapsed
            report.timings["eps_g3"] = err3.elapsed
            report.ranks["order3"] = train3.ranks
            report.diagnostics["errdm_order3"] = np.asarray(diag3.errdm).tolist()
            report.diagnostics["evaluations_order3"] = int(diag3.evaluations)
            with clock("cumulant"):
                lc = project_third_cumulant(train3, modes)
                compression = hosvd_truncate(gram_mode1(lc), modes.eigenvalues, config.tol3)
        else:
            compression = identity_compression(modes.eigenvalues)
        report.counts["latent"] = int(compression.U3.shape[0])
        report.counts["retained"] = int(compression.n)

        fe = assemble_final(geom, modes, compression, lc, {"ranks": {k: list(v) for k, v in report.ranks.items()}})
        with clock("final_test"):
            report.errors.append(final_cumulant_error(fe, 2, cov, config.N, config.test_seed))
            if use3:
                report.errors.append(final_cumulant_error(fe, 3, cum3, config.N, config.test_seed))
        fe.metadata["errors"] = {e.metric: e.value for e in report.errors}
    except StageFailed:
        raise
    except TTKLError as exc:
        stage = report.stages[-1] if report.stages else "setup"
        raise StageFailed(stage, {"error": type(exc).__name__, "message": str(exc)}, f"stage '{stage}' failed: {exc}") from exc
    report.timings["total"] = time.perf_counter() - t0
    return fe, report
