import numpy as np
import pytest


@pytest.fixture
def rng():
    return np.random.default_rng(20260809)


def random_hermitian(rng, n):
    z = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    return (z + z.conj().T) / 2.0


def random_skew_hermitian(rng, n):
    return -1j * random_hermitian(rng, n)


def random_state(rng, n):
    psi = rng.normal(size=n) + 1j * rng.normal(size=n)
    return psi / np.linalg.norm(psi)


def random_unitary(rng, n):
    z = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    q, r = np.linalg.qr(z)
    return q * (np.diagonal(r) / np.abs(np.diagonal(r)))


def taylor_expm(a, terms=50):
    """Scaled-and-squared truncated series; independent oracle for expm_skew."""
    a = np.asarray(a, dtype=complex)
    norm = np.linalg.norm(a, 2)
    k = 0 if norm <= 0.25 else int(np.ceil(np.log2(norm / 0.25)))
    scaled = a / (2.0**k)
    x = np.eye(a.shape[0], dtype=complex)
    term = np.eye(a.shape[0], dtype=complex)
    for j in range(1, terms + 1):
        term = term @ scaled / j
        x = x + term
    for _ in range(k):
        x = x @ x
    return x


def trig_matrix_field(rng, n, harmonics=2, scale=0.25):
    """Random smooth Hermitian-valued field: H0 + sum Hk sin/cos(k pi tau)."""
    mats = [scale * random_hermitian(rng, n) for _ in range(2 * harmonics + 1)]

    def h(taus):
        taus = np.asarray(taus, dtype=float)
        out = np.broadcast_to(mats[0], taus.shape + (n, n)).copy()
        for k in range(1, harmonics + 1):
            out = out + mats[2 * k - 1] * np.sin(k * np.pi * taus)[..., None, None]
            out = out + mats[2 * k] * np.cos(k * np.pi * taus)[..., None, None]
        return out

    bound = float(sum(np.linalg.norm(m, 2) for m in mats))
    return h, bound
