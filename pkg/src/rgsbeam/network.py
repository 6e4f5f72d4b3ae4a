"""Network data model: instances, scenario configs, and power bookkeeping.

A network instance describes L remote radio heads (RRHs) jointly serving
K single-antenna mobile users partitioned into M multicast groups over a
shared pool of N = sum(N_l) antennas.  Channel knowledge is imperfect:
the true aggregate channel of user k lies in an ellipsoid
``{h_hat_k + e : e^H Theta_k e <= 1}`` around the estimate.
"""

from __future__ import annotations

import sys
from dataclasses import dataclass, field

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

__all__ = [
    "ScenarioSpec",
    "NetworkInstance",
    "BeamformingSolution",
    "load_scenario",
    "scenario_from_dict",
    "generate_instance",
    "restrict_to_active",
    "network_power",
]

#: Noise power (watts) assumed at every user terminal.
NOISE_POWER_WATTS = 1.0

#: Per-RRH transmit budget (watts) used when a scenario does not set one.
DEFAULT_P_MAX_WATTS = 10.0


def _per_rrh(value, count, name):
    """Broadcast a scalar or validate a per-RRH list; returns ndarray."""
    arr = np.atleast_1d(np.asarray(value, dtype=float))
    if arr.size == 1:
        arr = np.full(count, arr[0])
    if arr.shape != (count,):
        raise ValueError(f"{name}: expected scalar or {count} values, got {arr.shape}")
    return arr


@dataclass(frozen=True)
class ScenarioSpec:
    """Experiment configuration, typically loaded from a TOML file.

    ``sinr_db_list`` is the sweep of target SINRs; every user in a given
    run shares the same target.  ``group_sizes`` has one entry per
    multicast group.
    """

    rrh_count: int
    antennas_per_rrh: tuple
    group_sizes: tuple
    error_radius: float
    sinr_db_list: tuple
    fronthaul_power_watts: tuple
    eta: tuple
    p_max_watts: tuple
    trials: int
    seed: int

    @property
    def total_antennas(self):
        return int(sum(self.antennas_per_rrh))

    @property
    def user_count(self):
        return int(sum(self.group_sizes))

    def validate(self):
        if self.rrh_count < 1:
            raise ValueError("rrh_count must be positive")
        if any(n < 1 for n in self.antennas_per_rrh):
            raise ValueError("antennas_per_rrh entries must be positive")
        if not self.group_sizes or any(g < 1 for g in self.group_sizes):
            raise ValueError("group_sizes must be nonempty positive integers")
        if not self.error_radius > 0:
            raise ValueError("error_radius must be positive")
        if not self.sinr_db_list:
            raise ValueError("sinr_db_list must be nonempty")
        if any(e <= 0 or e > 1 for e in self.eta):
            raise ValueError("eta entries must lie in (0, 1]")
        if any(p < 0 for p in self.fronthaul_power_watts):
            raise ValueError("fronthaul_power_watts entries must be nonnegative")
        if any(p <= 0 for p in self.p_max_watts):
            raise ValueError("p_max_watts entries must be positive")
        if self.trials < 1:
            raise ValueError("trials must be positive")
        return self


def scenario_from_dict(raw):
    """Build a validated ScenarioSpec from a plain mapping."""
    try:
        rrh_count = int(raw["rrh_count"])
        spec = ScenarioSpec(
            rrh_count=rrh_count,
            antennas_per_rrh=tuple(
                int(n) for n in _per_rrh(raw["antennas_per_rrh"], rrh_count,
                                         "antennas_per_rrh")
            ),
            group_sizes=tuple(int(g) for g in raw["group_sizes"]),
            error_radius=float(raw["error_radius"]),
            sinr_db_list=tuple(float(s) for s in raw["sinr_db_list"]),
            fronthaul_power_watts=tuple(
                _per_rrh(raw["fronthaul_power_watts"], rrh_count,
                         "fronthaul_power_watts")
            ),
            eta=tuple(_per_rrh(raw["eta"], rrh_count, "eta")),
            p_max_watts=tuple(
                _per_rrh(raw.get("p_max_watts", DEFAULT_P_MAX_WATTS), rrh_count,
                         "p_max_watts")
            ),
            trials=int(raw["trials"]),
            seed=int(raw["seed"]),
        )
    except KeyError as exc:
        raise ValueError(f"scenario config missing key {exc.args[0]!r}") from None
    return spec.validate()


def load_scenario(path):
    """Read a ScenarioSpec from a TOML file."""
    with open(path, "rb") as fh:
        return scenario_from_dict(tomllib.load(fh))


@dataclass(frozen=True)
class NetworkInstance:
    """One realization of the network: geometry, channels, targets, budgets.

    Channel estimates ``h_hat[k]`` are aggregate N-vectors; ``theta[k]``
    is the (PSD) shape matrix of user k's uncertainty ellipsoid
    ``e^H theta e <= 1``.  ``gamma`` holds linear-scale SINR targets.
    """

    L: int
    antennas: tuple  # N_l per RRH
    K: int
    M: int
    groups: tuple  # tuple of tuples of user indices (0-based)
    h_hat: np.ndarray  # (K, N) complex
    theta: tuple  # per-user (N, N) Hermitian PSD
    sigma2: np.ndarray  # (K,)
    gamma: np.ndarray  # (K,) linear scale
    p_max: np.ndarray  # (L,)
    p_fronthaul: np.ndarray  # (L,)
    eta: np.ndarray  # (L,)

    @property
    def N(self):
        return int(sum(self.antennas))

    @property
    def antenna_offsets(self):
        """Start index of each RRH's antenna rows within aggregate vectors."""
        return tuple(np.concatenate([[0], np.cumsum(self.antennas)[:-1]]).astype(int))

    def antenna_slice(self, l):
        start = self.antenna_offsets[l]
        return slice(start, start + self.antennas[l])

    def group_of(self, k):
        for m, members in enumerate(self.groups):
            if k in members:
                return m
        raise ValueError(f"user {k} not in any group")

    def validate(self):
        seen = set()
        for members in self.groups:
            for k in members:
                if k in seen:
                    raise ValueError(f"user {k} appears in multiple groups")
                seen.add(k)
        if seen != set(range(self.K)):
            raise ValueError("groups must partition the user set")
        if len(self.groups) != self.M:
            raise ValueError("group count mismatch")
        if self.h_hat.shape != (self.K, self.N):
            raise ValueError("h_hat shape mismatch")
        for k, th in enumerate(self.theta):
            if th.shape != (self.N, self.N):
                raise ValueError(f"theta[{k}] shape mismatch")
            if np.min(np.linalg.eigvalsh(0.5 * (th + th.conj().T))) < -1e-9:
                raise ValueError(f"theta[{k}] is not PSD")
        if np.any(self.sigma2 <= 0) or np.any(self.gamma <= 0):
            raise ValueError("sigma2 and gamma must be positive")
        if np.any(self.p_max <= 0) or np.any(self.p_fronthaul < 0):
            raise ValueError("invalid power parameters")
        if np.any(self.eta <= 0) or np.any(self.eta > 1):
            raise ValueError("eta must lie in (0, 1]")
        return self


def generate_instance(spec, seed, sinr_db=None):
    """Draw one random instance under ``spec``.

    Channel estimate entries are i.i.d. standard complex normal
    (unit-variance Rayleigh fading); the uncertainty shape is spherical,
    ``Theta_k = I_N / error_radius**2``.  The draw depends only on
    ``seed``, so instances at different SINR points share channels.

    Parameters
    ----------
    spec : ScenarioSpec
    seed : int
        Seed for the channel draw.
    sinr_db : float, optional
        Target SINR applied to every user; defaults to the first entry
        of ``spec.sinr_db_list``.
    """
    spec.validate()
    if sinr_db is None:
        sinr_db = spec.sinr_db_list[0]
    rng = np.random.default_rng(seed)
    n = spec.total_antennas
    k_total = spec.user_count
    h = (rng.standard_normal((k_total, n)) + 1j * rng.standard_normal((k_total, n)))
    h /= np.sqrt(2.0)
    theta = np.eye(n) / spec.error_radius**2
    theta.flags.writeable = False
    groups = []
    next_user = 0
    for size in spec.group_sizes:
        groups.append(tuple(range(next_user, next_user + size)))
        next_user += size
    gamma = 10.0 ** (float(sinr_db) / 10.0)
    return NetworkInstance(
        L=spec.rrh_count,
        antennas=tuple(spec.antennas_per_rrh),
        K=k_total,
        M=len(spec.group_sizes),
        groups=tuple(groups),
        h_hat=h,
        theta=tuple(theta for _ in range(k_total)),
        sigma2=np.full(k_total, NOISE_POWER_WATTS),
        gamma=np.full(k_total, gamma),
        p_max=np.asarray(spec.p_max_watts, dtype=float),
        p_fronthaul=np.asarray(spec.fronthaul_power_watts, dtype=float),
        eta=np.asarray(spec.eta, dtype=float),
    ).validate()


@dataclass
class BeamformingSolution:
    """Final beamformers plus the RRH on/off decision.

    ``beamformers`` stacks the per-group aggregate vectors v_m row-wise
    (shape M x N); per-RRH pieces are exposed as views.  ``active_set``
    and ``inactive_set`` partition the RRH indices; inactive RRHs must
    carry exactly zero power even though their rows are still present.
    """

    beamformers: np.ndarray  # (M, N) complex
    active_set: frozenset
    inactive_set: frozenset
    network_power: float
    per_user_margin: np.ndarray  # (K,) worst-case QoS slack

    def v_lm(self, inst, l, m):
        """Beamformer of group m on RRH l's antennas (view)."""
        return self.beamformers[m, inst.antenna_slice(l)]

    def v_tilde(self, inst, l):
        """All of RRH l's coefficients, groups concatenated."""
        return np.concatenate(
            [self.beamformers[m, inst.antenna_slice(l)] for m in range(len(self.beamformers))]
        )

    def rrh_power(self, inst, l):
        """Transmit power Σ_m ‖v_lm‖² radiated by RRH l (watts)."""
        sl = inst.antenna_slice(l)
        return float(np.sum(np.abs(self.beamformers[:, sl]) ** 2))

    def validate(self, inst):
        if self.active_set | self.inactive_set != frozenset(range(inst.L)):
            raise ValueError("active/inactive sets must partition the RRHs")
        if self.active_set & self.inactive_set:
            raise ValueError("active/inactive sets overlap")
        for l in self.inactive_set:
            if self.rrh_power(inst, l) != 0.0:
                raise ValueError(f"inactive RRH {l} has nonzero power")
        for l in self.active_set:
            if self.rrh_power(inst, l) > inst.p_max[l] + 1e-9:
                raise ValueError(f"RRH {l} exceeds its transmit budget")
        return self


def restrict_to_active(inst, active):
    """Project an instance onto a subset of RRHs.

    Inactive RRHs carry zero beamforming weight, so the QoS constraints
    only see the active antenna coordinates; the channel error on those
    coordinates ranges over the projection of the full ellipsoid, whose
    shape matrix is the Schur complement of the inactive block of Theta.
    RRH indices are renumbered to 0..len(active)-1 in sorted order.
    """
    active = sorted(active)
    if not active:
        raise ValueError("active set must be nonempty")
    cols = np.concatenate([np.arange(inst.N)[inst.antenna_slice(l)] for l in active])
    inactive_cols = np.setdiff1d(np.arange(inst.N), cols)
    thetas = []
    for th in inst.theta:
        th = np.asarray(th)
        taa = th[np.ix_(cols, cols)]
        if inactive_cols.size:
            tai = th[np.ix_(cols, inactive_cols)]
            tii = th[np.ix_(inactive_cols, inactive_cols)]
            taa = taa - tai @ np.linalg.solve(tii, tai.conj().T)
        thetas.append(0.5 * (taa + taa.conj().T))
    return NetworkInstance(
        L=len(active),
        antennas=tuple(inst.antennas[l] for l in active),
        K=inst.K,
        M=inst.M,
        groups=inst.groups,
        h_hat=inst.h_hat[:, cols],
        theta=tuple(thetas),
        sigma2=inst.sigma2,
        gamma=inst.gamma,
        p_max=inst.p_max[active],
        p_fronthaul=inst.p_fronthaul[active],
        eta=inst.eta[active],
    )


def network_power(inst, sol):
    """Total network power consumption (watts) of a solution.

    Sums each active RRH's fronthaul power and its transmit power scaled
    by the amplifier drain inefficiency 1/eta_l; inactive RRHs cost
    nothing.
    """
    total = 0.0
    for l in sorted(sol.active_set):
        total += inst.p_fronthaul[l] + sol.rrh_power(inst, l) / inst.eta[l]
    return float(total)
