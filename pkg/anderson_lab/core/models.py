"""Result records shared by the analysis modules and the experiment runner."""

from dataclasses import asdict, dataclass, field


@dataclass
class SolverReport:
    """Certificate of a self-energy fixed-point solve."""

    variant: str  # "overlapping" | "nonoverlapping" | "dipole"
    iterations: int
    residual: float  # last step size, bounds ||sigma - T(sigma)||
    norm: float  # norm of the returned self energy in the variant's norm
    bound: float  # proven upper bound the norm was checked against
    contraction_factor: float  # proven factor the ratios are compared to
    tolerance: float
    ratios: list[float] = field(default_factory=list)

    @property
    def bound_slack(self) -> float:
        return self.bound - self.norm

    @property
    def max_ratio(self) -> float:
        return max(self.ratios) if self.ratios else 0.0

    def to_dict(self) -> dict:
        d = asdict(self)
        d["bound_slack"] = self.bound_slack
        d["max_ratio"] = self.max_ratio
        return d

    def to_csv_row(self) -> list:
        return [
            self.variant,
            self.iterations,
            self.residual,
            self.norm,
            self.bound,
            self.bound_slack,
            self.max_ratio,
            self.contraction_factor,
        ]

    @staticmethod
    def csv_header() -> list:
        return [
            "variant",
            "iterations",
            "residual",
            "norm",
            "bound",
            "bound_slack",
            "max_ratio",
            "contraction_factor",
        ]


@dataclass
class DecayFit:
    """Least-squares fit log(value) = log(prefactor) - rate * r."""

    rate: float
    prefactor: float
    residual: float  # RMS of log residuals
    r_min: float
    r_max: float
    points: int
    rate_stderr: float = 0.0

    @property
    def significance(self) -> float:
        if self.rate_stderr == 0.0:
            return float("inf") if self.rate > 0 else 0.0
        return self.rate / self.rate_stderr

    def to_dict(self) -> dict:
        d = asdict(self)
        d["significance"] = self.significance
        return d


@dataclass
class WegnerRow:
    width: float
    lower: float
    upper: float
    distance_to_band: float
    estimate: float
    stderr: float
    shape_ratio: float

    def to_csv_row(self) -> list:
        return [
            self.width,
            self.lower,
            self.upper,
            self.distance_to_band,
            self.estimate,
            self.stderr,
            self.shape_ratio,
        ]

    @staticmethod
    def csv_header() -> list:
        return ["width", "lower", "upper", "distance_to_band", "estimate", "stderr", "shape_ratio"]


@dataclass
class LocalizationRow:
    radius: int
    samples: int
    skipped: int
    median: float
    q25: float
    q75: float
    median_stderr: float

    @property
    def skip_rate(self) -> float:
        total = self.samples + self.skipped
        return self.skipped / total if total else 0.0

    def to_csv_row(self) -> list:
        return [
            self.radius,
            self.samples,
            self.skipped,
            self.skip_rate,
            self.median,
            self.q25,
            self.q75,
            self.median_stderr,
        ]

    @staticmethod
    def csv_header() -> list:
        return ["L", "samples", "skipped", "skip_rate", "median", "q25", "q75", "median_stderr"]


@dataclass
class DipoleRow:
    energy: float
    sigma_a_real: float
    sigma_a_imag: float
    sigma_b_real: float
    sigma_b_imag: float
    a_bound_ok: bool
    b_bound_ok: bool
    residual: float

    def to_csv_row(self) -> list:
        return [
            self.energy,
            self.sigma_a_real,
            self.sigma_a_imag,
            self.sigma_b_real,
            self.sigma_b_imag,
            int(self.a_bound_ok),
            int(self.b_bound_ok),
            self.residual,
        ]

    @staticmethod
    def csv_header() -> list:
        return ["E", "A_re", "A_im", "B_re", "B_im", "A_bound_ok", "B_bound_ok", "residual"]
