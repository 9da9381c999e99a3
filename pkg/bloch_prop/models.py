"""Propagator and transfer-profile value types, basis order (s, e)"""
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class Propagator:
    u_ss: complex
    u_se: complex
    u_es: complex
    u_ee: complex

    @classmethod
    def from_matrix(cls, matrix) -> 'Propagator':
        m = np.asarray(matrix, dtype=complex)
        return cls(u_ss=complex(m[0, 0]), u_se=complex(m[0, 1]), u_es=complex(m[1, 0]), u_ee=complex(m[1, 1]))

    @property
    def matrix(self) -> np.ndarray:
        return np.array([[self.u_ss, self.u_se], [self.u_es, self.u_ee]], dtype=complex)

    def unitarity_error(self) -> float:
        """max |U^dagger U - I| elementwise"""
        m = self.matrix
        return float(np.max(np.abs(m.conj().T @ m - np.eye(2))))

    def transfer_probability(self) -> float:
        """|<s|U|e>|^2"""
        return abs(self.u_se) ** 2


@dataclass(frozen=True, eq=False)
class TransferProfile:
    """
    Per-detuning transfer amplitudes of a control pulse pair.

    t1 = (U1)_se, t2 = (U2)_es, t_double = t2 * t1. window1/window2 are the
    gate lengths over which U1, U2 were evaluated.
    """

    detunings: np.ndarray
    t1: np.ndarray
    t2: np.ndarray
    t_double: np.ndarray
    window1: float
    window2: float
    decimated: bool = False

    @property
    def double_window(self) -> float:
        return 0.5 * (self.window1 + self.window2)
