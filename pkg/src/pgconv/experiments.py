"""Configured experiment runs, CSV traces and empirical rate fits.

A config is a JSON object::

    {"family": "mdp" | "matrix_game" | "markov_game" | "lqr",
     "problem": {"file": ...} | {"preset": ...} | {"random": {...}} | {"data": {...}},
     "method": ..., "params": {...}, "iterations": 100, "seed": 0,
     "record_every": 1, "output": "trace.csv"}

Every CSV starts with ``#`` metadata lines followed by a header row.
"""
from __future__ import annotations

import copy
import hashlib
import io
import json
import math
import os
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__, kernels
from . import lqr as lqr_mod
from . import markov_game as mk
from . import matrix_game as mg
from . import pg_single_agent as pg
from . import tabular_mdp as tm
from .errors import ConfigError, DomainError

FAMILIES = ("mdp", "matrix_game", "markov_game", "lqr")
METHODS = {
    "mdp": pg.METHODS,
    "matrix_game": ("mwu", "reg_mwu", "omwu", "reg_omwu"),
    "markov_game": ("actor_critic",),
    "lqr": lqr_mod.KINDS,
}
OUTPUT_ENV = "PGCONV_OUTPUT_DIR"

BANDIT_REWARDS = (1.0, 0.9, 0.1)
RPS_START = (0.4, 0.4, 0.2)


@dataclass
class ExperimentConfig:
    family: str
    problem: dict
    method: str
    params: dict = field(default_factory=dict)
    iterations: int = 100
    seed: int = 0
    record_every: int = 1
    output: str | None = None

    @classmethod
    def from_dict(cls, d):
        if not isinstance(d, dict):
            raise ConfigError("config must be a JSON object")
        known = {"family", "problem", "method", "params", "iterations", "seed", "record_every", "output"}
        extra = set(d) - known
        if extra:
            raise ConfigError(f"unknown config keys: {sorted(extra)}")
        for key in ("family", "problem", "method"):
            if key not in d:
                raise ConfigError(f"config is missing {key!r}")
        cfg = cls(**copy.deepcopy(d))
        cfg.validate()
        return cfg

    @classmethod
    def load(cls, path):
        try:
            with open(path) as fh:
                d = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from None
        return cls.from_dict(d)

    def to_dict(self):
        return {"family": self.family, "problem": self.problem, "method": self.method,
                "params": self.params, "iterations": self.iterations, "seed": self.seed,
                "record_every": self.record_every, "output": self.output}

    def digest(self):
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:16]

    def validate(self):
        if self.family not in FAMILIES:
            raise ConfigError(f"family must be one of {FAMILIES}")
        if self.method not in METHODS[self.family]:
            raise ConfigError(f"method for {self.family} must be one of {METHODS[self.family]}")
        if not isinstance(self.problem, dict) or len(self.problem) != 1:
            raise ConfigError("problem must hold exactly one of file, preset, random, data")
        if not isinstance(self.params, dict):
            raise ConfigError("params must be an object")
        for key in ("iterations", "seed", "record_every"):
            v = getattr(self, key)
            if not isinstance(v, int) or isinstance(v, bool):
                raise ConfigError(f"{key} must be an integer")
        if self.iterations < 0 or self.record_every < 1 or self.seed < 0:
            raise ConfigError("iterations >= 0, record_every >= 1 and seed >= 0 are required")
        _validate_params(self)


def _param(cfg, name, default=None, required=False):
    if name in cfg.params:
        v = cfg.params[name]
        if isinstance(v, bool) or not isinstance(v, (int, float, str, list)):
            raise ConfigError(f"parameter {name!r} has an invalid type")
        return v
    if required:
        raise ConfigError(f"method {cfg.method} needs parameter {name!r}")
    return default


def _validate_params(cfg):
    fam, method = cfg.family, cfg.method
    try:
        if fam == "mdp":
            pg.PgConfig(method, float(_param(cfg, "learning_rate", required=True)),
                        tau=float(_param(cfg, "tau", 0.0)), omega=float(_param(cfg, "omega", 0.0)),
                        max_iters=cfg.iterations, record_every=cfg.record_every)
        elif fam == "matrix_game":
            eta = float(_param(cfg, "eta", required=True))
            tau = float(_param(cfg, "tau", 0.0))
            if eta <= 0 or tau < 0:
                raise ConfigError("eta > 0 and tau >= 0 are required")
            if method.startswith("reg_") != (tau > 0):
                raise ConfigError("tau > 0 is required exactly for the regularized methods")
            if method == "reg_mwu" and eta * tau >= 1:
                raise ConfigError("reg_mwu needs eta * tau < 1")
        elif fam == "markov_game":
            tau = float(_param(cfg, "tau", 0.1))
            if tau <= 0:
                raise ConfigError("actor_critic configs need tau > 0")
            if "eta" in cfg.params and float(cfg.params["eta"]) <= 0:
                raise ConfigError("eta must be positive")
            if float(_param(cfg, "c", 1.0 / 8.0)) <= 0:
                raise ConfigError("c must be positive")
        else:
            eta = _param(cfg, "learning_rate", "auto")
            if eta != "auto" and not float(eta) > 0:
                raise ConfigError("learning_rate must be positive or 'auto'")
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(str(exc)) from None


# ---------------------------------------------------------------------------
# problem construction


def _dims(spec, n, name):
    dims = spec.get("dims")
    if not isinstance(dims, list) or len(dims) != n or not all(isinstance(x, int) and x > 0 for x in dims):
        raise ConfigError(f"random {name} needs dims with {n} positive integers")
    return dims


def build_problem(cfg, rng):
    (kind, spec), = cfg.problem.items()
    fam = cfg.family
    try:
        if kind == "file":
            with open(spec) as fh:
                data = json.load(fh)
            return _from_data(fam, data)
        if kind == "data":
            return _from_data(fam, spec)
        if kind == "preset":
            return _named_problem(fam, spec)
        if kind == "random":
            if not isinstance(spec, dict):
                raise ConfigError("random problem spec must be an object")
            gamma = float(spec.get("gamma", 0.9))
            if fam == "mdp":
                S, A = _dims(spec, 2, "mdp")
                return tm.TabularMdp.random(rng, S, A, gamma)
            if fam == "matrix_game":
                m, n = _dims(spec, 2, "matrix game")
                return mg.MatrixGame.random(rng, m, n)
            if fam == "markov_game":
                S, m, n = _dims(spec, 3, "markov game")
                return mk.ZeroSumMarkovGame.random(rng, S, m, n, gamma)
            d, k = _dims(spec, 2, "lqr")
            return lqr_mod.LqrProblem.random(rng, d, k)
    except (OSError, json.JSONDecodeError, KeyError, TypeError) as exc:
        raise ConfigError(f"cannot load problem: {exc}") from None
    except (ValueError, DomainError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"invalid problem: {exc}") from None
    raise ConfigError(f"unknown problem source {kind!r}")


def _from_data(fam, data):
    cls = {"mdp": tm.TabularMdp, "matrix_game": mg.MatrixGame,
           "markov_game": mk.ZeroSumMarkovGame, "lqr": lqr_mod.LqrProblem}[fam]
    return cls.from_dict(data)


def _named_problem(fam, name):
    if fam == "mdp" and name == "bandit":
        return tm.TabularMdp.bandit(np.array(BANDIT_REWARDS))
    if fam == "matrix_game" and name == "rps":
        return mg.MatrixGame.rock_paper_scissors()
    if fam == "lqr" and name == "scalar":
        return lqr_mod.LqrProblem.scalar(1.0, 1.0, 1.0, 1.0)
    raise ConfigError(f"unknown problem preset {name!r} for family {fam}")


# ---------------------------------------------------------------------------
# runners; each returns (columns, rows)


def _run_mdp(cfg, mdp, rng):
    conf = pg.PgConfig(cfg.method, float(cfg.params["learning_rate"]), tau=float(cfg.params.get("tau", 0.0)),
                       omega=float(cfg.params.get("omega", 0.0)), max_iters=cfg.iterations,
                       record_every=cfg.record_every)
    tr = pg.run_single_agent(mdp, conf)
    return ["iter", "value_rho", "gap_rho", "gap_sup", "policy_tv"], tr.rows()


def _start_pair(cfg, m, n):
    mu = cfg.params.get("mu0")
    nu = cfg.params.get("nu0")
    mu = np.full(m, 1.0 / m) if mu is None else np.asarray(mu, dtype=np.float64)
    nu = np.full(n, 1.0 / n) if nu is None else np.asarray(nu, dtype=np.float64)
    try:
        return mg.StrategyPair(mu, nu)
    except ValueError as exc:
        raise ConfigError(f"invalid start strategies: {exc}") from None


def _run_matrix_game(cfg, game, rng):
    m, n = game.shape
    eta = float(cfg.params["eta"])
    tau = float(cfg.params.get("tau", 0.0))
    pair = _start_pair(cfg, m, n)
    if cfg.method in ("mwu", "reg_mwu"):
        mus, nus = mg.mwu_trajectory(game, pair, eta, cfg.iterations, tau)
    else:
        state = mg.OmwuState(pair.mu, pair.nu, pair.mu.copy(), pair.nu.copy(), eta, tau)
        mus, nus, _ = mg.omwu_trajectory(game, state, cfg.iterations)
    idx = _recorded(cfg)
    mus, nus = mus[idx], nus[idx]
    cols = ["iter"] + [f"mu_{i + 1}" for i in range(m)] + [f"nu_{j + 1}" for j in range(n)] + ["ne_gap"]
    data = [idx, *mus.T, *nus.T, mg.ne_gaps(game, mus, nus)]
    if tau > 0:
        cols.append("qre_gap")
        data.append(mg.qre_gaps(game, mus, nus, tau))
    return cols, list(zip(*data))


def _recorded(cfg):
    idx = list(range(0, cfg.iterations + 1, cfg.record_every))
    if idx[-1] != cfg.iterations:
        idx.append(cfg.iterations)
    return np.array(idx)


def _run_markov_game(cfg, game, rng):
    tau = float(cfg.params.get("tau", 0.1))
    eta = float(cfg.params["eta"]) if "eta" in cfg.params else \
        mk.default_policy_rate(game, float(cfg.params.get("c", 1.0 / 8.0)))
    reference = mk.soft_minimax_oracle(game, tau)
    _, _, tr, _ = mk.actor_critic_run(game, eta=eta, tau=tau, max_iters=cfg.iterations,
                                      record_every=cfg.record_every, reference=reference)
    S = game.n_states
    cols = ["iter", "qre_gap", "ne_gap"] + [f"V_{s}" for s in range(S)]
    return cols, list(zip(tr.iters, tr.qre_gap, tr.ne_gap, *tr.V.T))


def _run_lqr(cfg, prob, rng):
    c_star, _, K_star = lqr_mod.optimal_cost(prob)
    if "K0" in cfg.params:
        K0 = np.asarray(cfg.params["K0"], dtype=np.float64)
    else:
        K0 = lqr_mod.perturbed_stable_gain(prob, rng, K_star, float(cfg.params.get("perturbation", 0.5)))
    eta = cfg.params.get("learning_rate", "auto")
    if eta == "auto":
        eta = {"pg": lqr_mod.pg_default_rate, "npg": lqr_mod.npg_safe_rate}.get(
            cfg.method, lambda p, k: 1.0)(prob, K0)
    gain = lqr_mod.make_gain(prob, K0)
    rows = []
    for t in range(cfg.iterations + 1):
        ev = lqr_mod.evaluate_gain(prob, gain)
        if t % cfg.record_every == 0 or t == cfg.iterations:
            rows.append((t, ev.cost, ev.cost - c_star, gain.spectral_radius))
        if t < cfg.iterations:
            gain = lqr_mod.lqr_step(prob, gain, float(eta), cfg.method, ev)
    return ["iter", "cost", "gap", "spectral_radius"], rows


_RUNNERS = {"mdp": _run_mdp, "matrix_game": _run_matrix_game,
            "markov_game": _run_markov_game, "lqr": _run_lqr}


def _fmt(v):
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return repr(float(v))


def render_csv(cfg, columns, rows):
    buf = io.StringIO()
    buf.write(f"# pgconv {__version__}\n")
    buf.write(f"# seed={cfg.seed}\n")
    buf.write(f"# config_hash={cfg.digest()}\n")
    buf.write(f"# kernels={kernels.BACKEND}\n")
    buf.write("# config=" + json.dumps(cfg.to_dict(), sort_keys=True, separators=(",", ":")) + "\n")
    buf.write(",".join(columns) + "\n")
    for row in rows:
        buf.write(",".join(_fmt(v) for v in row) + "\n")
    return buf.getvalue()


def output_dir(explicit=None):
    return Path(explicit or os.environ.get(OUTPUT_ENV) or ".")


def run(cfg, out_dir=None, name=None):
    """Run one config and write its CSV; returns the output path."""
    rng = np.random.default_rng(cfg.seed)
    problem = build_problem(cfg, rng)
    columns, rows = _RUNNERS[cfg.family](cfg, problem, rng)
    d = output_dir(out_dir)
    d.mkdir(parents=True, exist_ok=True)
    path = d / (name or cfg.output or f"{cfg.family}-{cfg.method}-{cfg.digest()}.csv")
    path.write_text(render_csv(cfg, columns, rows))
    return path


# ---------------------------------------------------------------------------
# named presets; every constant is pinned here


def preset_configs(name):
    """Configs and output file names for a named preset."""
    if name == "fig1-bandit":
        base = {"family": "mdp", "problem": {"preset": "bandit"}, "iterations": 200, "seed": 0}
        return [
            (ExperimentConfig.from_dict({**base, "method": "entropy_pg",
                                         "params": {"learning_rate": 1.0, "tau": 0.1}}), "fig1-bandit-pg.csv"),
            (ExperimentConfig.from_dict({**base, "method": "entropy_npg",
                                         "params": {"learning_rate": 1.0, "tau": 0.1}}), "fig1-bandit-npg.csv"),
        ]
    if name == "fig2-rps":
        return [(ExperimentConfig.from_dict({
            "family": "matrix_game", "problem": {"preset": "rps"}, "method": "mwu",
            "params": {"eta": 0.1, "mu0": list(RPS_START), "nu0": list(RPS_START)},
            "iterations": 1000, "seed": 0}), "fig2-rps-mwu.csv")]
    raise ConfigError(f"unknown preset {name!r}; expected fig1-bandit or fig2-rps")


PRESETS = ("fig1-bandit", "fig2-rps")


def run_preset(name, out_dir=None):
    return [run(cfg, out_dir, fname) for cfg, fname in preset_configs(name)]


# ---------------------------------------------------------------------------
# rate fits


@dataclass(frozen=True)
class RateFit:
    t0: int
    t1: int
    slope: float
    factor: float
    r_squared: float

    def to_dict(self):
        return {"t0": self.t0, "t1": self.t1, "slope": self.slope, "factor": self.factor,
                "r_squared": self.r_squared}


def rate_fit(iters, errors, t0, t1):
    """Least-squares line through ``(t, log err)`` for ``t0 <= t <= t1``."""
    if not t0 < t1:
        raise DomainError("rate fit window needs t0 < t1")
    t = np.asarray(iters, dtype=np.float64)
    e = np.asarray(errors, dtype=np.float64)
    sel = (t >= t0) & (t <= t1)
    if np.count_nonzero(sel) < 2:
        raise DomainError("rate fit window holds fewer than two points")
    t, e = t[sel], e[sel]
    if np.any(~np.isfinite(e)) or np.any(e <= 0):
        raise DomainError("errors in the rate fit window must be strictly positive")
    y = np.log(e)
    tc = t - t.mean()
    slope = float(tc @ (y - y.mean()) / (tc @ tc))
    resid = y - y.mean() - slope * tc
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 if ss_tot == 0 else 1.0 - float(resid @ resid) / ss_tot
    return RateFit(int(t0), int(t1), slope, math.exp(slope), r2)


ERROR_COLUMNS = ("gap_sup", "qre_gap", "gap", "policy_tv", "gap_rho", "ne_gap")


def read_trace(path):
    """Header and float columns of a CSV trace (comment lines skipped)."""
    with open(path) as fh:
        lines = [ln.strip() for ln in fh if ln.strip() and not ln.startswith("#")]
    if not lines:
        raise DomainError(f"{path} holds no header row")
    header = lines[0].split(",")
    data = np.array([[float(x) for x in ln.split(",")] for ln in lines[1:]]).reshape(-1, len(header))
    return {h: data[:, i] for i, h in enumerate(header)}


def rate_fit_file(path, t0, t1, column=None):
    cols = read_trace(path)
    if column is None:
        column = next((c for c in ERROR_COLUMNS if c in cols), None)
        if column is None:
            raise DomainError("trace has no recognized error column; pass one explicitly")
    if column not in cols:
        raise DomainError(f"trace has no column {column!r}")
    return rate_fit(cols["iter"], cols[column], t0, t1)
