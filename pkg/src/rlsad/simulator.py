"""Synthetic telemetry with known ARX channel dynamics and injected faults.

Each simulated channel ``name`` produces two columns, ``{name}_cmd`` (the
excitation / commanded signal) and ``{name}_meas`` (the plant output).
Faults act on the signal level only.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Mapping, Optional, Sequence

import numpy as np

from rlsad.arx_rls import ArxOrder
from rlsad.errors import ConfigError

__all__ = [
    "ChannelDynamics",
    "Excitation",
    "FaultKind",
    "FaultSpec",
    "GroundTruth",
    "Scenario",
    "Simulation",
    "random_stable_dynamics",
    "scenario_suite",
    "simulate",
]

MAX_POLE_RADIUS = 0.95


@dataclass(frozen=True)
class Excitation:
    """Input-signal recipe.

    ``kind`` is one of ``"white"``, ``"sines"`` or ``"steps"``. The steps
    profile holds a random level for ``step_period_s`` seconds and adds
    first-order filtered noise on top.
    """

    kind: str = "steps"
    amplitude: float = 0.3
    step_period_s: float = 2.0
    noise_level: float = 0.1
    noise_pole: float = 0.5
    frequencies_hz: tuple = (0.13, 0.37, 0.71, 1.9)

    def __post_init__(self):
        if self.kind not in ("white", "sines", "steps"):
            raise ConfigError(f"unknown excitation kind {self.kind!r}")
        if not 0.0 <= self.noise_pole < 1.0:
            raise ConfigError("noise_pole must lie in [0, 1)")

    def generate(self, n: int, rate_hz: float, rng: np.random.Generator) -> np.ndarray:
        if self.kind == "white":
            return self.amplitude * rng.standard_normal(n)
        t = np.arange(n) / rate_hz
        if self.kind == "sines":
            phases = rng.uniform(0.0, 2 * np.pi, len(self.frequencies_hz))
            out = np.zeros(n)
            for f, ph in zip(self.frequencies_hz, phases):
                out += np.sin(2 * np.pi * f * t + ph)
            return self.amplitude * out / math.sqrt(len(self.frequencies_hz) / 2)

        hold = max(1, int(round(self.step_period_s * rate_hz)))
        levels = rng.uniform(-self.amplitude, self.amplitude, n // hold + 1)
        steps = np.repeat(levels, hold)[:n]
        white = rng.standard_normal(n)
        colored = np.empty(n)
        acc = 0.0
        gain = math.sqrt(1.0 - self.noise_pole**2)
        for k in range(n):
            acc = self.noise_pole * acc + gain * white[k]
            colored[k] = acc
        return steps + self.noise_level * colored


@dataclass(frozen=True)
class ChannelDynamics:
    """Ground-truth monic ARX plant.

    ``a`` holds a1..a_na of ``1 + a1 q^-1 + ...`` and ``b`` holds b0..b_nb.
    """

    a: tuple
    b: tuple
    noise_sigma: float = 0.0
    excitation: Excitation = field(default_factory=Excitation)
    rate_hz: float = 25.0

    def __post_init__(self):
        object.__setattr__(self, "a", tuple(float(x) for x in self.a))
        object.__setattr__(self, "b", tuple(float(x) for x in self.b))
        if not self.b:
            raise ConfigError("b needs at least the b0 coefficient")
        if self.noise_sigma < 0 or not math.isfinite(self.noise_sigma):
            raise ConfigError("noise_sigma must be finite and >= 0")
        if self.rate_hz <= 0:
            raise ConfigError("rate_hz must be positive")
        radius = self.pole_radius
        if radius >= MAX_POLE_RADIUS:
            raise ConfigError(
                f"unstable or marginal dynamics: max pole radius {radius:.4f} >= {MAX_POLE_RADIUS}"
            )

    @property
    def order(self) -> ArxOrder:
        return ArxOrder(na=len(self.a), nb=len(self.b) - 1)

    @property
    def pole_radius(self) -> float:
        if not self.a:
            return 0.0
        return float(np.max(np.abs(np.roots((1.0,) + self.a))))

    @property
    def theta(self) -> np.ndarray:
        """Coefficient vector in regressor order: [-a1..-a_na, b0..b_nb]."""
        return np.concatenate([-np.asarray(self.a), np.asarray(self.b)])

    @property
    def dc_gain(self) -> float:
        return sum(self.b) / (1.0 + sum(self.a))


class FaultKind(str, enum.Enum):
    STUCK = "StuckAtConstant"
    GAIN = "GainChange"
    DRIFT = "OutputDrift"
    POWER_CUT = "PowerCut"


@dataclass(frozen=True)
class FaultSpec:
    """A single abrupt fault.

    ``value`` means: stuck level (None freezes the last healthy output),
    gain factor on b, drift slope in output units per second, or the floor
    a power cut decays toward. ``targets`` names the affected channels;
    empty means every channel.
    """

    kind: FaultKind
    onset_s: float
    value: Optional[float] = None
    targets: tuple = ()
    time_constant_s: float = 2.0

    def __post_init__(self):
        object.__setattr__(self, "kind", FaultKind(self.kind))
        object.__setattr__(self, "targets", tuple(self.targets))
        if not self.onset_s > 0:
            raise ConfigError("fault onset must be > 0 s")
        if self.kind in (FaultKind.GAIN, FaultKind.DRIFT) and self.value is None:
            raise ConfigError(f"{self.kind.value} needs a value")
        if self.kind is FaultKind.POWER_CUT and self.time_constant_s <= 0:
            raise ConfigError("time_constant_s must be positive")

    def to_dict(self) -> dict:
        return {
            "kind": self.kind.value,
            "onset_s": self.onset_s,
            "value": self.value,
            "targets": list(self.targets),
            "time_constant_s": self.time_constant_s,
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "FaultSpec":
        return cls(
            kind=FaultKind(d["kind"]),
            onset_s=float(d["onset_s"]),
            value=None if d.get("value") is None else float(d["value"]),
            targets=tuple(d.get("targets", ())),
            time_constant_s=float(d.get("time_constant_s", 2.0)),
        )


@dataclass(frozen=True)
class GroundTruth:
    """What the evaluation needs to know about one recorded run."""

    scenario: str
    category: str
    duration_s: float
    fault: Optional[FaultSpec] = None
    onset_sample: Optional[int] = None

    @property
    def onset_s(self) -> Optional[float]:
        return None if self.fault is None else self.fault.onset_s

    def to_dict(self) -> dict:
        return {
            "scenario": self.scenario,
            "category": self.category,
            "duration_s": self.duration_s,
            "fault": None if self.fault is None else self.fault.to_dict(),
            "onset_sample": self.onset_sample,
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "GroundTruth":
        fault = d.get("fault")
        return cls(
            scenario=d["scenario"],
            category=d.get("category", "Unknown"),
            duration_s=float(d.get("duration_s", math.nan)),
            fault=None if fault is None else FaultSpec.from_dict(fault),
            onset_sample=d.get("onset_sample"),
        )


@dataclass
class Simulation:
    """Column arrays (``t`` plus two per channel) and the ground truth."""

    columns: dict
    truth: GroundTruth

    @property
    def n_samples(self) -> int:
        return len(self.columns["t"])

    def frames(self):
        from rlsad.telemetry_io import TelemetryFrame

        names = [c for c in self.columns if c != "t"]
        t = self.columns["t"]
        for k in range(len(t)):
            yield TelemetryFrame(float(t[k]), {c: float(self.columns[c][k]) for c in names})


def _onset_sample(onset_s: float, rate_hz: float) -> int:
    return int(math.ceil(onset_s * rate_hz - 1e-9))


def _simulate_channel(dyn: ChannelDynamics, u: np.ndarray, noise: np.ndarray,
                      fault: Optional[FaultSpec], k0: Optional[int]) -> np.ndarray:
    n = len(u)
    na, nb = len(dyn.a), len(dyn.b) - 1
    a = np.asarray(dyn.a)
    b = np.asarray(dyn.b)
    plant = np.zeros(n)
    meas = np.zeros(n)
    dt = 1.0 / dyn.rate_hz
    kind = None if fault is None else fault.kind
    stuck_level = None
    decay = None if kind is not FaultKind.POWER_CUT else math.exp(-dt / fault.time_constant_s)

    for k in range(n):
        faulty = kind is not None and k >= k0
        past_y = sum(a[i] * plant[k - 1 - i] for i in range(na) if k - 1 - i >= 0)
        b_scale = fault.value if faulty and kind is FaultKind.GAIN else 1.0
        drive = sum(b[j] * u[k - j] for j in range(nb + 1) if k - j >= 0)
        nominal = -past_y + b_scale * drive + noise[k]

        if not faulty:
            plant[k] = nominal
            meas[k] = nominal
        elif kind is FaultKind.STUCK:
            if stuck_level is None:
                if fault.value is not None:
                    stuck_level = fault.value
                else:
                    stuck_level = meas[k - 1] if k > 0 else 0.0
            plant[k] = nominal
            meas[k] = stuck_level
        elif kind is FaultKind.GAIN:
            plant[k] = nominal
            meas[k] = nominal
        elif kind is FaultKind.DRIFT:
            plant[k] = nominal
            meas[k] = nominal + fault.value * (k - k0) * dt
        else:
            floor = 0.0 if fault.value is None else fault.value
            prev = meas[k - 1] if k > 0 else 0.0
            plant[k] = floor + (prev - floor) * decay + noise[k]
            meas[k] = plant[k]
    return meas


def simulate(channels, fault: Optional[FaultSpec] = None, duration_s: float = 60.0,
             seed: int = 0, scenario: str = "sim", category: str = "Unspecified") -> Simulation:
    """Run every channel for ``duration_s`` seconds.

    ``channels`` is a mapping name -> :class:`ChannelDynamics` (a bare
    ChannelDynamics is treated as a single channel called ``ch``).
    """
    if isinstance(channels, ChannelDynamics):
        channels = {"ch": channels}
    if not channels:
        raise ConfigError("need at least one channel")
    rates = {dyn.rate_hz for dyn in channels.values()}
    if len(rates) != 1:
        raise ConfigError(f"all channels must share one sample rate, got {sorted(rates)}")
    rate = rates.pop()
    if duration_s <= 0:
        raise ConfigError("duration must be positive")

    k0 = None
    if fault is not None:
        if duration_s < fault.onset_s + 10.0:
            raise ConfigError(
                f"duration {duration_s} s must cover onset {fault.onset_s} s plus 10 s"
            )
        unknown = set(fault.targets) - set(channels)
        if unknown:
            raise ConfigError(f"fault targets unknown channels {sorted(unknown)}")
        k0 = _onset_sample(fault.onset_s, rate)

    n = int(round(duration_s * rate))
    root = np.random.SeedSequence(seed)
    child_seeds = root.spawn(len(channels))
    columns = {"t": np.arange(n) / rate}
    for (name, dyn), ss in zip(channels.items(), child_seeds):
        rng = np.random.default_rng(ss)
        u = dyn.excitation.generate(n, rate, rng)
        noise = dyn.noise_sigma * rng.standard_normal(n)
        hit = fault is not None and (not fault.targets or name in fault.targets)
        meas = _simulate_channel(dyn, u, noise, fault if hit else None, k0)
        columns[f"{name}_cmd"] = u
        columns[f"{name}_meas"] = meas

    truth = GroundTruth(scenario=scenario, category=category, duration_s=float(duration_s),
                        fault=fault, onset_sample=k0)
    return Simulation(columns=columns, truth=truth)


def random_stable_dynamics(rng: np.random.Generator, na: int, nb: int, noise_sigma: float,
                           excitation: Excitation = Excitation(kind="white", amplitude=1.0),
                           max_radius: float = 0.9, rate_hz: float = 25.0) -> ChannelDynamics:
    """Draw a stable ARX plant with every coefficient in [-1, 1].

    Poles are drawn inside ``max_radius`` (conjugate pairs plus a real one
    for odd ``na``); draws whose polynomial leaves [-1, 1] are rejected.
    """
    for _ in range(10_000):
        poles = []
        while len(poles) < na:
            r = max_radius * math.sqrt(rng.uniform()) ** (1.0 + na / 4.0)
            if na - len(poles) >= 2 and rng.uniform() < 0.7:
                ang = rng.uniform(0.0, np.pi)
                poles += [r * np.exp(1j * ang), r * np.exp(-1j * ang)]
            else:
                poles.append(r * rng.choice([-1.0, 1.0]))
        a = np.real(np.poly(poles))[1:] if na else np.zeros(0)
        if np.all(np.abs(a) <= 1.0):
            b = rng.uniform(-1.0, 1.0, nb + 1)
            return ChannelDynamics(tuple(a), tuple(b), noise_sigma, excitation, rate_hz)
    raise RuntimeError("could not draw a stable system with bounded coefficients")


# Two attitude-like channels tracking their command with unit DC gain.
ROLL = ChannelDynamics(a=(-1.2, 0.36), b=(0.1, 0.06), noise_sigma=0.002)
PITCH = ChannelDynamics(a=(-1.2, 0.35), b=(0.08, 0.07), noise_sigma=0.002,
                        excitation=Excitation(amplitude=0.2, step_period_s=3.0))
DEFAULT_CHANNELS = {"roll": ROLL, "pitch": PITCH}


@dataclass(frozen=True)
class Scenario:
    name: str
    category: str
    fault: Optional[FaultSpec]
    duration_s: float
    seed: int

    def run(self, channels: Mapping[str, ChannelDynamics] = DEFAULT_CHANNELS) -> Simulation:
        return simulate(channels, self.fault, self.duration_s, self.seed,
                        scenario=self.name, category=self.category)


# (name, category, kind, value, targets) -- signal-level analogs of the
# failure classes flown in the reference experiments.
_SUITE_FAULTS: Sequence[tuple] = (
    ("engine_cut", "Engine", FaultKind.POWER_CUT, 0.0, ("roll", "pitch")),
    ("engine_partial", "Engine", FaultKind.GAIN, 0.4, ("roll", "pitch")),
    ("rudder_left", "Rudder", FaultKind.STUCK, 0.25, ("roll",)),
    ("rudder_right", "Rudder", FaultKind.STUCK, -0.25, ("roll",)),
    ("elevator_zero", "Elevator", FaultKind.STUCK, 0.0, ("pitch",)),
    ("aileron_both_zero", "Aileron", FaultKind.STUCK, 0.0, ("roll",)),
    ("aileron_left_gain", "Aileron", FaultKind.GAIN, 0.5, ("roll",)),
    ("aileron_trim_drift", "Aileron", FaultKind.DRIFT, 0.5, ("roll",)),
    ("rudder_aileron_zero", "Rudder/Aileron", FaultKind.STUCK, 0.0, ("roll", "pitch")),
)


def scenario_suite(seed: int = 0, n_no_fault: int = 5, post_fault_s: float = 25.0) -> list:
    """Deterministic list of :class:`Scenario` covering every failure category.

    Onsets are drawn in [30, 50) s so that the detectors are armed first.
    """
    rng = np.random.default_rng(np.random.SeedSequence([seed, 0x5EED]))
    scenarios = []
    for name, category, kind, value, targets in _SUITE_FAULTS:
        onset = float(np.round(rng.uniform(30.0, 50.0), 2))
        fault = FaultSpec(kind, onset, value, targets)
        scenarios.append(Scenario(name, category, fault, onset + post_fault_s,
                                  int(rng.integers(2**31))))
    for i in range(n_no_fault):
        duration = float(np.round(rng.uniform(50.0, 70.0), 2))
        scenarios.append(Scenario(f"no_failure_{i + 1}", "No Failure", None, duration,
                                  int(rng.integers(2**31))))
    return scenarios
