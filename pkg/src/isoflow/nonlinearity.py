"""C^1 nonlinearities phi(x, y) used by the sigma_k problems and checks.

Every handle has the form phi = c * x^a * y^b * exp(s y^2 / 2), which covers
the two presets:

  power:    phi = x^a y^b          (c=1, s=0)
  gaussian: phi = c x exp(y^2/2)   (a=1, b=0, s=1)

Here x stands for the support function h and y for |X| = |Dh|.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = ["PhiSpec", "power_phi", "gaussian_phi"]


@dataclass(frozen=True)
class PhiSpec:
    c: float = 1.0
    a: float = 0.0
    b: float = 0.0
    s: float = 0.0

    def value(self, x, y):
        out = self.c * x**self.a
        if self.b:
            out = out * y**self.b
        if self.s:
            out = out * np.exp(0.5 * self.s * y**2)
        if not np.all(np.isfinite(out)):
            raise ValueError("phi produced non-finite values")
        return out

    def log_value(self, x, y):
        out = np.log(self.c) + self.a * np.log(x)
        if self.b:
            out = out + self.b * np.log(y)
        if self.s:
            out = out + 0.5 * self.s * y**2
        return out

    def d1(self, x, y):
        """d phi / dx."""
        return self.a / x * self.value(x, y)

    def d2(self, x, y):
        """d phi / dy."""
        return (self.b / y + self.s * y) * self.value(x, y)

    def times_x_power(self, p: float) -> "PhiSpec":
        """phi(x, y) * x^p, used to restate sigma_n problems as K-problems."""
        return PhiSpec(c=self.c, a=self.a + p, b=self.b, s=self.s)

    def describe(self) -> str:
        if self.s == 0:
            return f"power,a={self.a:g},b={self.b:g}" + (
                f",c={self.c:g}" if self.c != 1.0 else ""
            )
        return f"gaussian,c={self.c:g}" + (
            f",a={self.a:g},b={self.b:g}" if (self.a, self.b) != (1.0, 0.0) else ""
        )


def power_phi(a: float, b: float) -> PhiSpec:
    return PhiSpec(a=a, b=b)


def gaussian_phi(c: float) -> PhiSpec:
    if c <= 0:
        raise ValueError("gaussian phi needs c > 0")
    return PhiSpec(c=c, a=1.0, s=1.0)
