"""Variable-length transmission sessions: the encode/transmit/update loop
with the posterior-threshold stopping rule, per-step audits of the EJS and
drift guarantees, Monte Carlo aggregation, and the closed-form length
bounds used for reporting and hard assertions.
"""

import json
import math
from dataclasses import dataclass, field, fields

import numpy as np
from scipy.stats import beta as beta_dist

from .belief import (
    Belief,
    bayes_update,
    log_odds,
    map_decode,
    predictive_distribution,
    threshold_params,
    u_tilde,
    uniform_belief,
)
from .channel import sample_output
from .divergences import ejs_of_encoder
from .errors import AuditViolation, InfiniteC2, ParameterDomain
from .schemes import EncodingFunction, Scheme, make_scheme


# -- analytic bounds -----------------------------------------------------------

@dataclass(frozen=True)
class BoundSet:
    """Closed-form expected-length bounds for given per-step EJS floors.

    theorem1_bound is the non-asymptotic guarantee
    (log2 M + log2 log2(M/eps))/r_min + (log2(1/eps)+1)/e_min
    + 6*(4*C2)^2/(r_min*e_min); asymptotic_target drops the constants.
    reliability(rate) evaluates the error-exponent frontier
    e_min * (1 - rate/r_min).
    """

    theorem1_bound: float
    asymptotic_target: float
    r_min: float
    e_min: float

    def reliability(self, rate: float) -> float:
        return self.e_min * (1.0 - rate / self.r_min)


def analytic_bounds(num_messages: int, epsilon: float, consts,
                    r_min: float | None = None, e_min: float | None = None) -> BoundSet:
    """Evaluate the expected-length bounds at the given EJS floors.

    Defaults to r_min = C and e_min = C1.  Requires e_min >= r_min > 0 and
    M/epsilon > 2 so the double logarithm is positive.
    """
    r_min = consts.capacity if r_min is None else r_min
    e_min = consts.c1 if e_min is None else e_min
    if e_min is None or not e_min >= r_min > 0:
        raise ParameterDomain(f"need e_min >= r_min > 0, got {r_min}, {e_min}")
    if num_messages / epsilon <= 2.0:
        raise ParameterDomain("need M/epsilon > 2 for a positive double logarithm")
    log_m = math.log2(num_messages)
    log_eps = math.log2(1.0 / epsilon)
    c2 = consts.c2
    thm = ((log_m + math.log2(math.log2(num_messages / epsilon))) / r_min
           + (log_eps + 1.0) / e_min
           + 6.0 * (4.0 * c2) ** 2 / (r_min * e_min))
    target = log_m / r_min + log_eps / e_min
    return BoundSet(theorem1_bound=thm, asymptotic_target=target,
                    r_min=r_min, e_min=e_min)


def scheme_floors(scheme: Scheme, consts):
    """(r_min, e_min) the scheme promises: (C, C1) for exponent-optimal
    schemes, (C, C) otherwise."""
    if scheme.exponent_optimal:
        return consts.capacity, consts.c1
    return consts.capacity, consts.capacity


# -- session records -----------------------------------------------------------

@dataclass(frozen=True)
class StepRecord:
    rho: np.ndarray
    gamma: EncodingFunction
    y: int
    ejs: float
    ejs_stderr: float
    u_tilde: float
    randomized: bool


@dataclass(frozen=True)
class SessionTrace:
    steps: list
    final_rho: np.ndarray
    final_u_tilde: float
    stopping_time: int
    capped: bool
    decoded: int
    correct: bool
    true_message: int
    final_max_posterior: float
    scheme_id: str
    num_messages: int
    epsilon: float


@dataclass
class SessionConfig:
    """Parameters of one variable-length transmission experiment."""

    num_messages: int
    epsilon: float
    scheme: str
    seed: int
    max_steps: int | None = None
    true_message: int | None = None
    audit: bool = False
    ejs_samples: int = 4096

    def __post_init__(self):
        if self.num_messages < 2:
            raise ParameterDomain("need at least two messages")
        if not 0 < self.epsilon < 1:
            raise ParameterDomain("epsilon must lie in (0, 1)")
        if self.max_steps is not None and self.max_steps < 1:
            raise ParameterDomain("max_steps must be >= 1")
        if self.true_message is not None and not 0 <= self.true_message < self.num_messages:
            raise ParameterDomain("true_message outside the message set")


def _trial_streams(master_seed: int, trial: int):
    """Two independent per-trial generators (run stream, audit stream).

    Derivation from (master seed, trial index) keeps trials reproducible and
    order-independent; the audit stream is separate so enabling audits never
    changes the simulated trajectory.
    """
    ss = np.random.SeedSequence(entropy=master_seed, spawn_key=(trial,))
    run_ss, audit_ss = ss.spawn(2)
    return np.random.default_rng(run_ss), np.random.default_rng(audit_ss)


def default_max_steps(cfg: SessionConfig, consts, scheme: Scheme) -> int:
    r_min, e_min = scheme_floors(scheme, consts)
    bounds = analytic_bounds(cfg.num_messages, cfg.epsilon, consts, r_min, e_min)
    return int(math.ceil(10.0 * bounds.theorem1_bound))


def _run_trial(cfg: SessionConfig, ch, consts, scheme: Scheme, trial: int) -> SessionTrace:
    rng, audit_rng = _trial_streams(cfg.seed, trial)
    theta = cfg.true_message if cfg.true_message is not None \
        else int(rng.integers(cfg.num_messages))
    tp = threshold_params(cfg.num_messages, cfg.epsilon)
    cap = cfg.max_steps if cfg.max_steps is not None \
        else default_max_steps(cfg, consts, scheme)
    threshold = 1.0 - cfg.epsilon

    b = uniform_belief(cfg.num_messages)
    steps = []
    capped = False
    while True:
        if float(b.rho.max()) >= threshold:
            break
        if b.step >= cap:
            capped = True
            break
        enc = scheme.encode(b)
        randomized = not isinstance(enc, EncodingFunction)
        if randomized:
            gamma = enc.sample(rng)
        else:
            gamma = enc
        if randomized and getattr(enc, "matrix", None) is not None:
            if cfg.audit:
                ejs, stderr = ejs_of_encoder(b.rho, ch, enc,
                                             mc_samples=cfg.ejs_samples, rng=audit_rng)
            else:
                ejs, stderr = math.nan, math.nan
        else:
            ejs, stderr = ejs_of_encoder(b.rho, ch, enc)
        y = sample_output(ch, gamma.assignment[theta], rng)
        steps.append(StepRecord(rho=b.rho, gamma=gamma, y=y, ejs=ejs,
                                ejs_stderr=stderr, u_tilde=u_tilde(b, tp),
                                randomized=randomized))
        b = bayes_update(b, ch, gamma, y)

    decoded, mass = map_decode(b)
    return SessionTrace(steps=steps, final_rho=b.rho, final_u_tilde=u_tilde(b, tp),
                        stopping_time=b.step, capped=capped, decoded=decoded,
                        correct=decoded == theta, true_message=theta,
                        final_max_posterior=mass, scheme_id=scheme.scheme_id,
                        num_messages=cfg.num_messages, epsilon=cfg.epsilon)


def run_session(cfg: SessionConfig, ch, consts, scheme: Scheme | None = None) -> SessionTrace:
    """Run one full transmission: encode, transmit, feed back, update,
    stop at the first posterior >= 1 - epsilon, decode by MAP.

    Deterministic given cfg.seed; identical to trial 0 of monte_carlo.
    """
    if scheme is None:
        scheme = make_scheme(cfg.scheme, ch, consts)
    return _run_trial(cfg, ch, consts, scheme, trial=0)


# -- per-trace audit -------------------------------------------------------------

@dataclass
class CheckResult:
    checked: int = 0
    violations: int = 0
    first_violation: int | None = None

    def record(self, step: int, ok: bool):
        self.checked += 1
        if not ok:
            self.violations += 1
            if self.first_violation is None:
                self.first_violation = step

    @property
    def passed(self):
        return self.violations == 0


@dataclass
class AuditReport:
    """Per-step verdicts for one trace.

    a: EJS >= r_min; b: EJS >= rho_tilde * e_min in the confirmation regime;
    c: exact one-step drift identity at deterministic steps; d: bounded
    jumps of the shifted log-likelihood; e: bounded per-message log-odds
    jumps.  Exact values get 1e-9 slack, sampled values 3 standard errors.
    """

    checks: dict = field(default_factory=dict)
    in_scope: bool = True
    r_min: float = math.nan
    e_min: float = math.nan

    @property
    def passed(self):
        return all(c.passed for c in self.checks.values())

    def first_violation(self):
        hits = [(c.first_violation, name) for name, c in self.checks.items()
                if c.first_violation is not None]
        return min(hits) if hits else None


AUDIT_SLACK = 1e-9


def audit_trace(trace: SessionTrace, ch, consts, tp,
                r_min: float | None = None, e_min: float | None = None,
                in_scope: bool = True) -> AuditReport:
    """Audit a completed trace against the per-step guarantees."""
    if consts.c2 is None or math.isinf(consts.c2):
        raise InfiniteC2("audits need finite channel constants")
    r_min = consts.capacity if r_min is None else r_min
    e_min = consts.c1 if e_min is None else e_min
    report = AuditReport(checks={k: CheckResult() for k in "abcde"},
                         in_scope=in_scope, r_min=r_min, e_min=e_min)
    log_c2 = math.log2(consts.c2)

    u_seq = [s.u_tilde for s in trace.steps] + [trace.final_u_tilde]
    rho_seq = [s.rho for s in trace.steps] + [trace.final_rho]

    for t, s in enumerate(trace.steps):
        if not math.isnan(s.ejs):
            tol = AUDIT_SLACK if s.ejs_stderr == 0 else 3.0 * s.ejs_stderr
            report.checks["a"].record(t, s.ejs >= r_min - tol)
            if float(s.rho.max()) >= tp.rho_tilde:
                report.checks["b"].record(t, s.ejs >= tp.rho_tilde * e_min - tol)
        if not s.randomized and not math.isnan(s.ejs) and not math.isinf(s.ejs):
            b_t = Belief(s.rho, step=t)
            pred = predictive_distribution(b_t, ch, s.gamma)
            expected = math.fsum(
                pred[y] * u_tilde(bayes_update(b_t, ch, s.gamma, y), tp)
                for y in range(ch.num_outputs) if pred[y] > 0)
            report.checks["c"].record(
                t, abs(expected - (s.u_tilde + s.ejs)) <= AUDIT_SLACK)

    for t in range(len(trace.steps)):
        u0, u1 = u_seq[t], u_seq[t + 1]
        if max(u0, u1) >= 0 and math.isfinite(u0) and math.isfinite(u1):
            report.checks["d"].record(t, abs(u1 - u0) <= 4.0 * consts.c2 + AUDIT_SLACK)
        r0, r1 = rho_seq[t], rho_seq[t + 1]
        interior = (r0 > 0) & (r0 < 1) & (r1 > 0) & (r1 < 1)
        if interior.any():
            jumps = np.abs(log_odds(r1[interior]) - log_odds(r0[interior]))
            report.checks["e"].record(t, bool(np.all(jumps <= log_c2 + AUDIT_SLACK)))

    return report


# -- Monte Carlo -----------------------------------------------------------------

@dataclass
class MonteCarloReport:
    """Aggregate of independent seeded trials plus the analytic bounds."""

    n_trials: int
    mean_tau: float
    stderr_tau: float
    empirical_pe: float
    pe_upper_95: float
    theorem1_bound: float
    asymptotic_target: float
    audit_pass_rate: float | None
    capped_trials: int
    in_scope: bool
    scheme_id: str
    num_messages: int
    epsilon: float
    seed: int
    first_violation: tuple | None = None

    def to_dict(self):
        d = {f.name: getattr(self, f.name) for f in fields(self)}
        d["first_violation"] = list(self.first_violation) if self.first_violation else None
        return d


def binomial_upper_95(errors: int, n: int) -> float:
    """One-sided exact (Clopper-Pearson) 95% upper confidence limit."""
    if errors >= n:
        return 1.0
    return float(beta_dist.ppf(0.95, errors + 1, n - errors))


def monte_carlo(cfg: SessionConfig, ch, consts, n_trials: int,
                scheme: Scheme | None = None, strict: bool = True,
                keep_traces: bool = False) -> MonteCarloReport:
    """Aggregate n_trials independent sessions.

    Trials use per-index substreams of cfg.seed, so results are independent
    of execution order.  With cfg.audit set, each trace is audited; for
    in-scope scheme/channel pairs any violation (or a mean stopping time
    above the closed-form bound) raises AuditViolation unless strict=False.
    """
    if n_trials < 1:
        raise ParameterDomain("need at least one trial")
    if scheme is None:
        scheme = make_scheme(cfg.scheme, ch, consts)
    r_min, e_min = scheme_floors(scheme, consts)
    bounds = analytic_bounds(cfg.num_messages, cfg.epsilon, consts, r_min, e_min)
    tp = threshold_params(cfg.num_messages, cfg.epsilon)

    taus = np.empty(n_trials)
    errors = 0
    capped = 0
    audits_passed = 0
    first_violation = None
    traces = [] if keep_traces else None
    for trial in range(n_trials):
        trace = _run_trial(cfg, ch, consts, scheme, trial)
        taus[trial] = trace.stopping_time
        errors += not trace.correct
        capped += trace.capped
        if cfg.audit:
            report = audit_trace(trace, ch, consts, tp, r_min, e_min,
                                 in_scope=scheme.in_scope)
            audits_passed += report.passed
            if not report.passed and first_violation is None:
                step, check = report.first_violation()
                first_violation = (trial, check, step)
        if keep_traces:
            traces.append(trace)

    mean_tau = float(taus.mean())
    stderr_tau = float(taus.std(ddof=1) / math.sqrt(n_trials)) if n_trials > 1 else 0.0
    pe = errors / n_trials
    report = MonteCarloReport(
        n_trials=n_trials, mean_tau=mean_tau, stderr_tau=stderr_tau,
        empirical_pe=pe, pe_upper_95=binomial_upper_95(errors, n_trials),
        theorem1_bound=bounds.theorem1_bound,
        asymptotic_target=bounds.asymptotic_target,
        audit_pass_rate=(audits_passed / n_trials) if cfg.audit else None,
        capped_trials=capped, in_scope=scheme.in_scope, scheme_id=scheme.scheme_id,
        num_messages=cfg.num_messages, epsilon=cfg.epsilon, seed=cfg.seed,
        first_violation=first_violation)
    if keep_traces:
        report.traces = traces

    if strict and cfg.audit and scheme.in_scope:
        if report.audit_pass_rate < 1.0:
            raise AuditViolation(
                f"in-scope scheme {scheme.scheme_id!r} violated check "
                f"{first_violation[1]!r} at trial {first_violation[0]}, "
                f"step {first_violation[2]}")
        if mean_tau > bounds.theorem1_bound:
            raise AuditViolation(
                f"mean stopping time {mean_tau:.3f} exceeds the guaranteed "
                f"bound {bounds.theorem1_bound:.3f}")
    return report


# -- exports ---------------------------------------------------------------------

def trace_lines(trace: SessionTrace):
    """One line per step: step, gamma, y, max_posterior, ejs, u_tilde."""
    lines = ["step,gamma,y,max_posterior,ejs,u_tilde"]
    for t, s in enumerate(trace.steps):
        gamma = "".join(str(v) for v in s.gamma.assignment)
        lines.append(f"{t},{gamma},{s.y},{s.rho.max():.12g},{s.ejs:.12g},{s.u_tilde:.12g}")
    return lines


def write_trace(trace: SessionTrace, f):
    for line in trace_lines(trace):
        f.write(line + "\n")


def write_report(report: MonteCarloReport, f):
    json.dump(report.to_dict(), f, sort_keys=True)
    f.write("\n")
