"""Model coefficients of the Nwogu-type system.

    eta_t + u_x + eps (eta u)_x + eps a u_xxx - eps b eta_xxt = 0
    u_t + eta_x + eps u u_x - eps d u_xxt = 0
"""

from __future__ import annotations

from dataclasses import asdict, dataclass

from .errors import InvalidParameterError


@dataclass(frozen=True)
class SystemParams:
    a: float
    b: float
    d: float
    epsilon: float = 1.0
    theta_sq: float | None = None

    def __post_init__(self):
        if self.a > 0:
            raise InvalidParameterError(f"need a <= 0, got {self.a}")
        if self.b < 0:
            raise InvalidParameterError(f"need b >= 0, got {self.b}")
        if self.d <= 0:
            raise InvalidParameterError(f"need d > 0, got {self.d}")
        if not 0 < self.epsilon <= 1:
            raise InvalidParameterError(f"need 0 < epsilon <= 1, got {self.epsilon}")

    @classmethod
    def from_theta(cls, theta_sq: float, epsilon: float = 1.0) -> "SystemParams":
        """Regularized Nwogu coefficients: a = theta^2 - 2/3, b = d = (1 - theta^2)/2."""
        b = (1.0 - theta_sq) / 2.0
        return cls(theta_sq - 2.0 / 3.0, b, b, epsilon, theta_sq)

    @property
    def alpha(self) -> float:
        return -self.a * self.epsilon

    @property
    def beta(self) -> float:
        return self.b * self.epsilon

    @property
    def delta(self) -> float:
        return self.d * self.epsilon

    @property
    def kind(self) -> str:
        if self.a == 0:
            return "bbm-bbm"
        return "nwogu-regularized" if self.b > 0 else "nwogu"

    def to_dict(self) -> dict:
        return asdict(self)


def regularized_nwogu() -> SystemParams:
    return SystemParams.from_theta(0.25)


def original_nwogu(theta_sq: float = 0.25) -> SystemParams:
    """Classical Nwogu system: a = (theta^2 - 1/3)/2, b = 0, d = (1 - theta^2)/2."""
    return SystemParams(0.5 * (theta_sq - 1.0 / 3.0), 0.0, 0.5 * (1.0 - theta_sq))


def bbm_bbm() -> SystemParams:
    return SystemParams(0.0, 1.0 / 6.0, 1.0 / 6.0)


SYSTEMS = {
    "nwogu-regularized": regularized_nwogu,
    "nwogu": original_nwogu,
    "bbm-bbm": bbm_bbm,
}
