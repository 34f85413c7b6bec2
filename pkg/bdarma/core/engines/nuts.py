"""No-U-Turn sampler with a diagonal metric and windowed warm-up adaptation.

The tree is built by recursive doubling with multinomial sampling along the
trajectory (biased progressive sampling at the top level, uniform inside
subtrees) and the generalized U-turn criterion, including the checks across
the two halves of every merged subtree. Warm-up tunes the step size by dual
averaging and the diagonal inverse metric from the sample variance over
doubling windows.
"""

import logging
from typing import Callable, List, NamedTuple, Optional, Tuple

import numpy as np

from bdarma.exceptions import BdarmaError, FitFailedError

logger = logging.getLogger(__name__)

LogDensity = Callable[[np.ndarray], Tuple[float, np.ndarray]]


def safe_density(target: LogDensity) -> LogDensity:
    """Wrap a log density so evaluation failures read as -inf."""

    def evaluate(q: np.ndarray) -> Tuple[float, np.ndarray]:
        try:
            value, grad = target(q)
        except (BdarmaError, FloatingPointError, ArithmeticError, np.linalg.LinAlgError):
            return -np.inf, np.zeros_like(q)
        if not np.isfinite(value) or not np.all(np.isfinite(grad)):
            return -np.inf, np.zeros_like(q)
        return float(value), grad

    return evaluate


def kinetic_energy(p: np.ndarray, inv_metric: np.ndarray) -> float:
    return 0.5 * float(np.dot(p, inv_metric * p))


def leapfrog(
    q: np.ndarray,
    p: np.ndarray,
    grad: np.ndarray,
    step_size: float,
    inv_metric: np.ndarray,
    target: LogDensity,
) -> Tuple[np.ndarray, np.ndarray, float, np.ndarray]:
    """One velocity-Verlet step. Returns (q, p, log density, gradient)."""
    p_half = p + 0.5 * step_size * grad
    q_new = q + step_size * inv_metric * p_half
    lp_new, grad_new = target(q_new)
    p_new = p_half + 0.5 * step_size * grad_new
    return q_new, p_new, lp_new, grad_new


class Transition(NamedTuple):
    q: np.ndarray
    log_density: float
    grad: np.ndarray
    accept_stat: float
    n_leapfrog: int
    depth: int
    divergent: bool
    energy: float


class NutsState:
    """A (sub)trajectory: both end points, the running sample and the statistics."""

    def __init__(self, q, p, lp, grad, log_weight, accept, n_steps, divergent):
        self.q_minus = self.q_plus = q
        self.p_minus = self.p_plus = p
        self.grad_minus = self.grad_plus = grad
        self.lp_minus = self.lp_plus = lp
        self.rho = p.copy()
        self.sample, self.sample_lp, self.sample_grad = q, lp, grad
        self.log_weight = log_weight
        self.accept_sum = accept
        self.n_steps = n_steps
        self.divergent = divergent
        self.keep_going = not divergent

    def end(self, direction: int):
        if direction < 0:
            return self.q_minus, self.p_minus, self.lp_minus, self.grad_minus
        return self.q_plus, self.p_plus, self.lp_plus, self.grad_plus

    def merge(
        self,
        other: "NutsState",
        direction: int,
        root: bool,
        rng: np.random.Generator,
        inv_metric: np.ndarray,
    ) -> None:
        """Absorb ``other``, which extends this trajectory in ``direction``."""
        left, right = (other, self) if direction < 0 else (self, other)
        left_rho, right_rho = left.rho, right.rho
        left_p_minus, left_p_plus = left.p_minus, left.p_plus
        right_p_minus, right_p_plus = right.p_minus, right.p_plus

        if direction < 0:
            self.q_minus, self.p_minus = other.q_minus, other.p_minus
            self.lp_minus, self.grad_minus = other.lp_minus, other.grad_minus
        else:
            self.q_plus, self.p_plus = other.q_plus, other.p_plus
            self.lp_plus, self.grad_plus = other.lp_plus, other.grad_plus

        self.accept_sum += other.accept_sum
        self.n_steps += other.n_steps
        self.divergent |= other.divergent
        self.keep_going = self.keep_going and other.keep_going
        if not self.keep_going:
            return

        if root:
            if np.log(rng.uniform()) < other.log_weight - self.log_weight:
                self._take_sample(other)
            self.log_weight = np.logaddexp(self.log_weight, other.log_weight)
        else:
            self.log_weight = np.logaddexp(self.log_weight, other.log_weight)
            if np.log(rng.uniform()) < other.log_weight - self.log_weight:
                self._take_sample(other)

        self.rho = left_rho + right_rho

        def no_uturn(rho, p_a, p_b) -> bool:
            return np.dot(rho, inv_metric * p_a) > 0 and np.dot(rho, inv_metric * p_b) > 0

        self.keep_going = (
            no_uturn(self.rho, self.p_minus, self.p_plus)
            and no_uturn(left_rho + right_p_minus, left_p_minus, right_p_minus)
            and no_uturn(right_rho + left_p_plus, left_p_plus, right_p_plus)
        )

    def _take_sample(self, other: "NutsState") -> None:
        self.sample = other.sample
        self.sample_lp = other.sample_lp
        self.sample_grad = other.sample_grad


class NutsKernel:
    """One NUTS transition per call for a fixed step size and metric."""

    def __init__(
        self,
        target: LogDensity,
        rng: np.random.Generator,
        max_tree_depth: int = 10,
        max_delta_energy: float = 1000.0,
    ):
        self.target = target
        self.rng = rng
        self.max_tree_depth = max_tree_depth
        self.max_delta_energy = max_delta_energy

    def transition(
        self, q: np.ndarray, lp: float, grad: np.ndarray, step_size: float, inv_metric: np.ndarray
    ) -> Transition:
        p = self.rng.normal(size=q.shape) / np.sqrt(inv_metric)
        h0 = lp - kinetic_energy(p, inv_metric)
        state = NutsState(q, p, lp, grad, 0.0, 0.0, 0, False)

        depth = 0
        while depth < self.max_tree_depth:
            direction = -1 if self.rng.uniform() < 0.5 else 1
            subtree = self._build(state, direction, depth, step_size, inv_metric, h0)
            state.merge(subtree, direction, True, self.rng, inv_metric)
            depth += 1
            if not state.keep_going:
                break

        accept = state.accept_sum / max(state.n_steps, 1)
        return Transition(
            q=state.sample,
            log_density=state.sample_lp,
            grad=state.sample_grad,
            accept_stat=float(accept),
            n_leapfrog=state.n_steps,
            depth=depth,
            divergent=bool(state.divergent),
            energy=-h0,
        )

    def _build(
        self,
        state: NutsState,
        direction: int,
        depth: int,
        step_size: float,
        inv_metric: np.ndarray,
        h0: float,
    ) -> NutsState:
        if depth == 0:
            q, p, _, grad = state.end(direction)
            q_new, p_new, lp_new, grad_new = leapfrog(
                q, p, grad, direction * step_size, inv_metric, self.target
            )
            h = lp_new - kinetic_energy(p_new, inv_metric)
            delta = h - h0 if np.isfinite(h) else -np.inf
            divergent = bool(-delta > self.max_delta_energy)
            accept = float(min(1.0, np.exp(delta))) if np.isfinite(delta) else 0.0
            return NutsState(q_new, p_new, lp_new, grad_new, delta, accept, 1, divergent)

        subtree = self._build(state, direction, depth - 1, step_size, inv_metric, h0)
        if subtree.keep_going:
            outer = self._build(subtree, direction, depth - 1, step_size, inv_metric, h0)
            subtree.merge(outer, direction, False, self.rng, inv_metric)
        return subtree


# ---------------------------------------------------------------------------
# Adaptation
# ---------------------------------------------------------------------------


class DualAveraging:
    """Step-size adaptation towards a target mean acceptance statistic."""

    def __init__(
        self,
        target_accept: float = 0.8,
        gamma: float = 0.05,
        t0: float = 10.0,
        kappa: float = 0.75,
    ):
        self.target_accept = target_accept
        self.gamma = gamma
        self.t0 = t0
        self.kappa = kappa
        self.restart(1.0)

    def restart(self, step_size: float) -> None:
        self.mu = np.log(10.0 * step_size)
        self.counter = 0
        self.error_sum = 0.0
        self.log_step_bar = 0.0

    def update(self, accept_stat: float) -> float:
        self.counter += 1
        weight = 1.0 / (self.counter + self.t0)
        error = self.target_accept - accept_stat
        self.error_sum = (1.0 - weight) * self.error_sum + weight * error
        log_step = self.mu - np.sqrt(self.counter) / self.gamma * self.error_sum
        decay = self.counter ** (-self.kappa)
        self.log_step_bar = decay * log_step + (1.0 - decay) * self.log_step_bar
        return float(np.exp(log_step))

    def final_step_size(self) -> float:
        return float(np.exp(self.log_step_bar))


class WelfordVariance:
    """Running per-coordinate variance."""

    def __init__(self, dim: int):
        self.dim = dim
        self.reset()

    def reset(self) -> None:
        self.count = 0
        self.mean = np.zeros(self.dim)
        self.m2 = np.zeros(self.dim)

    def add(self, x: np.ndarray) -> None:
        self.count += 1
        delta = x - self.mean
        self.mean += delta / self.count
        self.m2 += delta * (x - self.mean)

    def regularized_variance(self) -> np.ndarray:
        """(n / (n + 5)) var + 1e-3 * 5 / (n + 5), shrinking small windows towards 1e-3."""
        n = self.count
        var = self.m2 / max(n - 1, 1)
        return (n / (n + 5.0)) * var + 1e-3 * (5.0 / (n + 5.0))


def adaptation_windows(
    n_warmup: int, init_fraction: float = 0.15, term_fraction: float = 0.10, base_window: int = 25
) -> Tuple[int, int, List[int]]:
    """Metric adaptation schedule.

    Returns:
        (first slow iteration, end of the slow phase, window end iterations);
        ends are exclusive 0-based iteration indices
    """
    init_buffer = int(np.floor(init_fraction * n_warmup))
    term_buffer = int(np.floor(term_fraction * n_warmup))
    slow_end = n_warmup - term_buffer
    if slow_end - init_buffer < 1:
        return init_buffer, init_buffer, []
    ends: List[int] = []
    start, size = init_buffer, min(base_window, slow_end - init_buffer)
    while start < slow_end:
        end = start + size
        if end + 2 * size > slow_end:
            end = slow_end
        ends.append(end)
        start, size = end, 2 * size
    return init_buffer, slow_end, ends


def find_reasonable_step_size(
    q: np.ndarray,
    lp: float,
    grad: np.ndarray,
    inv_metric: np.ndarray,
    target: LogDensity,
    rng: np.random.Generator,
    step_size: float = 1.0,
) -> float:
    """Double or halve the step until one leapfrog step crosses acceptance 1/2."""
    p = rng.normal(size=q.shape) / np.sqrt(inv_metric)
    h0 = lp - kinetic_energy(p, inv_metric)

    def log_accept(eps: float) -> float:
        _, p_new, lp_new, _ = leapfrog(q, p, grad, eps, inv_metric, target)
        h = lp_new - kinetic_energy(p_new, inv_metric)
        return h - h0 if np.isfinite(h) else -np.inf

    delta = log_accept(step_size)
    direction = 1 if delta > np.log(0.5) else -1
    for _ in range(100):
        if direction == 1 and not delta > np.log(0.5):
            break
        if direction == -1 and not delta < np.log(0.5):
            break
        step_size *= 2.0**direction
        delta = log_accept(step_size)
    return float(step_size)


# ---------------------------------------------------------------------------
# Chain driver
# ---------------------------------------------------------------------------


class ChainResult(NamedTuple):
    samples: np.ndarray  # (n_samples, dim)
    log_density: np.ndarray
    accept_stat: np.ndarray
    divergent: np.ndarray
    n_leapfrog: np.ndarray
    tree_depth: np.ndarray
    energy: np.ndarray
    step_size: float
    inv_metric: np.ndarray


def initial_point(
    target: LogDensity,
    dim: int,
    rng: np.random.Generator,
    init_range: float = 1.0,
    max_attempts: int = 100,
) -> Tuple[np.ndarray, float, np.ndarray]:
    """Uniform draw in [-init_range, init_range]^dim with a finite log density."""
    for _ in range(max_attempts):
        q = rng.uniform(-init_range, init_range, size=dim)
        lp, grad = target(q)
        if np.isfinite(lp):
            return q, lp, grad
    raise FitFailedError(
        f"no finite log density in {max_attempts} initial draws", reasons=["non_finite_objective"]
    )


def run_chain(
    target: LogDensity,
    dim: int,
    rng: np.random.Generator,
    n_warmup: int = 1000,
    n_samples: int = 1000,
    target_accept: float = 0.8,
    max_tree_depth: int = 10,
    init_range: float = 1.0,
    chain_id: int = 0,
    initial: Optional[np.ndarray] = None,
) -> ChainResult:
    """Adapt and then sample one chain on an unconstrained space."""
    density = safe_density(target)
    if initial is None:
        q, lp, grad = initial_point(density, dim, rng, init_range)
    else:
        q = np.asarray(initial, dtype=float)
        lp, grad = density(q)
        if not np.isfinite(lp):
            raise FitFailedError(
                "initial point has a non-finite log density", reasons=["non_finite_objective"]
            )

    inv_metric = np.ones(dim)
    kernel = NutsKernel(density, rng, max_tree_depth=max_tree_depth)
    step_size = find_reasonable_step_size(q, lp, grad, inv_metric, density, rng)
    adapter = DualAveraging(target_accept)
    adapter.restart(step_size)
    slow_start, slow_end, window_ends = adaptation_windows(n_warmup)
    variance = WelfordVariance(dim)

    samples = np.empty((n_samples, dim))
    stats = {key: np.empty(n_samples) for key in ("lp", "accept", "leapfrog", "depth", "energy")}
    divergent = np.zeros(n_samples, dtype=bool)
    warmup_divergences = 0

    for i in range(n_warmup + n_samples):
        tr = kernel.transition(q, lp, grad, step_size, inv_metric)
        q, lp, grad = tr.q, tr.log_density, tr.grad
        if i < n_warmup:
            warmup_divergences += int(tr.divergent)
            step_size = adapter.update(tr.accept_stat)
            if slow_start <= i < slow_end:
                variance.add(q)
            if window_ends and i + 1 in window_ends:
                inv_metric = variance.regularized_variance()
                variance.reset()
                step_size = find_reasonable_step_size(
                    q, lp, grad, inv_metric, density, rng, step_size
                )
                adapter.restart(step_size)
            if i == n_warmup - 1:
                step_size = adapter.final_step_size()
                logger.debug(
                    f"chain {chain_id}: warm-up done, step size {step_size:.4g}, "
                    f"{warmup_divergences} warm-up divergences"
                )
            continue
        k = i - n_warmup
        samples[k] = q
        stats["lp"][k] = lp
        stats["accept"][k] = tr.accept_stat
        stats["leapfrog"][k] = tr.n_leapfrog
        stats["depth"][k] = tr.depth
        stats["energy"][k] = tr.energy
        divergent[k] = tr.divergent

    return ChainResult(
        samples=samples,
        log_density=stats["lp"],
        accept_stat=stats["accept"],
        divergent=divergent,
        n_leapfrog=stats["leapfrog"].astype(int),
        tree_depth=stats["depth"].astype(int),
        energy=stats["energy"],
        step_size=float(step_size),
        inv_metric=inv_metric,
    )
