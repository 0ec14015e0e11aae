"""Adaptive self-interference cancellation stages.

Both cancellers are regression-shaped and follow the estimator protocol:
``fit(reference, received)`` adapts the coefficients, ``predict(reference)``
reconstructs the interference, and ``cancel(reference, received)`` returns
the residual.  A fitted canceller is frozen state; cancellation on it is a
pure function.

The RF stage is a baseband-equivalent tapped-delay subtractor with complex
weights driven by block-correlation gradient updates.  The digital stage
is a nonlinear memory polynomial with odd-order basis functions
``|x|^(p-1) x`` and a self-orthogonalizing update preconditioned by the
inverse basis correlation matrix.
"""

import numpy as np
from sklearn.base import BaseEstimator

from .validation import as_complex_signal, check_aligned

# abort adaptation when block residual power grows this much over 10 blocks
GUARD_WINDOW = 10
GUARD_GROWTH_DB = 20.0


class DivergenceError(RuntimeError):
    """Adaptation residual power is growing instead of shrinking."""


def _shifted(x, k):
    """x delayed by k samples (k < 0 advances), zero-filled at the edge."""
    if k == 0:
        return x
    out = np.zeros_like(x)
    if k > 0:
        out[k:] = x[:-k]
    else:
        out[:k] = x[-k:]
    return out


def _check_guard(history):
    if len(history) > GUARD_WINDOW:
        growth = history[-1] / max(history[-1 - GUARD_WINDOW], 1e-300)
        if growth > 10.0 ** (GUARD_GROWTH_DB / 10.0):
            raise DivergenceError(
                f"residual power grew by {10 * np.log10(growth):.1f} dB over "
                f"{GUARD_WINDOW} blocks; reduce the step size"
            )


# ---------------------------------------------------------------------------
# memory-polynomial machinery


def polynomial_orders(order):
    if order < 1 or order % 2 == 0:
        raise ValueError("nonlinearity order must be odd and >= 1")
    return list(range(1, order + 1, 2))


def basis_terms(order, pre_taps, post_taps):
    """(order, lag) pairs defining the basis columns, in storage order."""
    if pre_taps < 0 or post_taps < 0:
        raise ValueError("tap counts must be >= 0")
    return [
        (p, k)
        for p in polynomial_orders(order)
        for k in range(-pre_taps, post_taps + 1)
    ]


def memory_polynomial_basis(x, order, pre_taps, post_taps):
    """Materialized basis matrix, one column per (order, lag) term.

    Memory scales as len(x) * n_terms; use the chunked helpers for long
    signals.
    """
    x = as_complex_signal(x)
    terms = basis_terms(order, pre_taps, post_taps)
    out = np.empty((len(x), len(terms)), dtype=np.complex128)
    powers = {p: np.abs(x) ** (p - 1) * x for p in polynomial_orders(order)}
    for j, (p, k) in enumerate(terms):
        out[:, j] = _shifted(powers[p], k)
    return out


def _basis_blocks(x, order, pre_taps, post_taps, block_len):
    powers = {p: np.abs(x) ** (p - 1) * x for p in polynomial_orders(order)}
    terms = basis_terms(order, pre_taps, post_taps)
    for start in range(0, len(x), block_len):
        stop = min(start + block_len, len(x))
        block = np.empty((stop - start, len(terms)), dtype=np.complex128)
        for j, (p, k) in enumerate(terms):
            lo, hi = start - k, stop - k
            seg = np.zeros(stop - start, dtype=np.complex128)
            src_lo, src_hi = max(lo, 0), min(hi, len(x))
            if src_lo < src_hi:
                seg[src_lo - lo: src_hi - lo] = powers[p][src_lo:src_hi]
            block[:, j] = seg
        yield start, stop, block


def mp_predict(x, coef, order, pre_taps, post_taps):
    """Evaluate the memory polynomial without materializing the basis."""
    x = as_complex_signal(x)
    terms = basis_terms(order, pre_taps, post_taps)
    if len(coef) != len(terms):
        raise ValueError(f"coefficient vector length {len(coef)}, expected {len(terms)}")
    powers = {p: np.abs(x) ** (p - 1) * x for p in polynomial_orders(order)}
    out = np.zeros_like(x)
    for c, (p, k) in zip(coef, terms):
        if c != 0:
            out += c * _shifted(powers[p], k)
    return out


def estimate_basis_correlation(x, order, pre_taps, post_taps, ridge=0.0,
                               block_len=16384):
    """Sample correlation matrix of the basis vectors, plus ridge * I.

    Needs at least 10 samples per coefficient; Hermitian-symmetrized so the
    preconditioned update stays a descent direction.
    """
    x = as_complex_signal(x)
    n_terms = len(basis_terms(order, pre_taps, post_taps))
    if len(x) < 10 * n_terms:
        raise ValueError(
            f"{len(x)} samples are too few to estimate a {n_terms}-term "
            "correlation matrix (need 10x the coefficient count)"
        )
    acc = np.zeros((n_terms, n_terms), dtype=np.complex128)
    for _, _, block in _basis_blocks(x, order, pre_taps, post_taps, block_len):
        acc += block.conj().T @ block
    corr = acc / len(x)
    corr = 0.5 * (corr + corr.conj().T)
    if ridge:
        corr = corr + ridge * np.eye(n_terms)
    return corr


def memory_polynomial_ls(x, y, order, pre_taps, post_taps, ridge=0.0):
    """Block least-squares coefficient solve (the adaptive loop's oracle).

    Columns are RMS-scaled before solving; small problems go through an
    SVD solve, long signals through accumulated normal equations.  Raise
    ``ridge`` if the basis is rank deficient.
    """
    x = as_complex_signal(x, "reference")
    y = as_complex_signal(y, "received")
    check_aligned(x, y)
    n_terms = len(basis_terms(order, pre_taps, post_taps))
    if len(x) * n_terms <= 6_000_000:
        basis = memory_polynomial_basis(x, order, pre_taps, post_taps)
        scale = np.sqrt(np.mean(np.abs(basis) ** 2, axis=0))
        scale[scale == 0] = 1.0
        basis /= scale
        if ridge:
            basis = np.vstack([basis, np.sqrt(ridge * len(x)) * np.eye(n_terms)])
            y = np.concatenate([y, np.zeros(n_terms)])
        coef, *_ = np.linalg.lstsq(basis, y, rcond=None)
        return coef / scale
    gram = np.zeros((n_terms, n_terms), dtype=np.complex128)
    cross = np.zeros(n_terms, dtype=np.complex128)
    for start, stop, block in _basis_blocks(x, order, pre_taps, post_taps, 16384):
        gram += block.conj().T @ block
        cross += block.conj().T @ y[start:stop]
    scale = np.sqrt(np.real(np.diag(gram)) / len(x))
    scale[scale == 0] = 1.0
    gram /= np.outer(scale, scale)
    cross /= scale
    gram += (ridge * len(x) + 1e-12 * np.trace(gram).real / n_terms) * np.eye(n_terms)
    return np.linalg.solve(gram, cross) / scale


# ---------------------------------------------------------------------------
# RF canceller


class RfCanceller(BaseEstimator):
    """Multi-tap RF canceller with block-gradient weight adaptation.

    Parameters
    ----------
    sample_rate_hz: float
        Rate of the (oversampled) streams; tap delays quantize to it.
    tap_delays_s: tuple of float
        Fixed tap delays, strictly increasing after quantization.
    step_size: float
        Gradient step applied to each block correlation.
    block_len: int
        Samples integrated per weight update.
    n_passes: int
        Adaptation passes over the training streams.
    """

    def __init__(self, sample_rate_hz, tap_delays_s=(0.0, 4.17e-9, 10e-9),
                 step_size=None, block_len=4096, n_passes=1):
        self.sample_rate_hz = sample_rate_hz
        self.tap_delays_s = tap_delays_s
        self.step_size = step_size
        self.block_len = block_len
        self.n_passes = n_passes

    def _delays(self):
        d = [int(round(t * self.sample_rate_hz)) for t in self.tap_delays_s]
        if sorted(set(d)) != d:
            raise ValueError(
                f"tap delays quantize to non-increasing sample counts {d}; "
                "raise the sample rate or spread the delays"
            )
        return d

    def fit(self, x_ref, y):
        """Adapt the tap weights on aligned PA-output / receiver streams."""
        x_ref = as_complex_signal(x_ref, "reference")
        y = as_complex_signal(y, "received")
        check_aligned(x_ref, y)
        delays = self._delays()
        if max(delays) >= len(x_ref):
            raise ValueError("tap delay exceeds the training buffer")
        taps = np.stack([_shifted(x_ref, d) for d in delays])
        mu = self.step_size
        if mu is None:
            # comfortably inside the stability limit of the block update
            power = float(np.mean(np.abs(x_ref) ** 2))
            mu = 1.2 / (self.block_len * power * len(delays)) if power > 0 else 0.0
        weights = np.zeros(len(delays), dtype=np.complex128)
        history = []
        n = len(x_ref)
        for _ in range(self.n_passes):
            for start in range(0, n - self.block_len + 1, self.block_len):
                sl = slice(start, start + self.block_len)
                block = taps[:, sl]
                residual = y[sl] - weights @ block
                history.append(float(np.mean(np.abs(residual) ** 2)))
                _check_guard(history)
                weights = weights + mu * (block.conj() @ residual)
        self.weights_ = weights
        self.delays_samples_ = delays
        self.history_ = np.asarray(history)
        return self

    def predict(self, x_ref):
        """Reconstruct the coupled interference from the reference stream."""
        self._check_fitted()
        x_ref = as_complex_signal(x_ref, "reference")
        out = np.zeros_like(x_ref)
        for w, d in zip(self.weights_, self.delays_samples_):
            out += w * _shifted(x_ref, d)
        return out

    def cancel(self, x_ref, y):
        """Residual after subtracting the reconstructed interference."""
        y = as_complex_signal(y, "received")
        check_aligned(x_ref, y)
        return y - self.predict(x_ref)

    def _check_fitted(self):
        if not hasattr(self, "weights_"):
            raise RuntimeError("canceller is not fitted; call fit() first")


# ---------------------------------------------------------------------------
# digital canceller


class MemoryPolynomialCanceller(BaseEstimator):
    """Nonlinear digital canceller with self-orthogonalizing learning.

    The update preconditions the block (or per-sample) gradient with the
    inverse basis correlation matrix, so all coefficient modes converge at
    the same geometric rate despite the strong correlation between
    polynomial orders.  ``solver="ls"`` bypasses adaptation with the block
    least-squares solution.

    Parameters
    ----------
    order: int
        Highest (odd) nonlinearity order P.
    pre_taps, post_taps: int
        Acausal and causal memory taps per order.  The postcursor count
        bounds the delay the canceller can track: echoes arriving later
        than ``post_taps`` samples are untouched, which is what preserves
        targets beyond the minimum detectable range.
    step_size: float
        Preconditioned step in (0, 1]; the block mode contracts the
        coefficient error by (1 - step_size) per pass.
    ridge: float
        Diagonal loading of the correlation matrix, relative to the mean
        reference power.
    mode: str
        ``"block"`` (update averaged over the training block, once per
        pass) or ``"sample"`` (per-sample stochastic update).
    block_len: int
        Chunk size for the streamed basis computation (memory control),
        and the reporting interval of the sample mode.
    preconditioner: str
        ``"correlation"`` for the self-orthogonalizing update or
        ``"identity"`` for a plain gradient (LMS) update, scaled by the
        largest correlation eigenvalue so the same step size stays stable.
    """

    def __init__(self, order=11, pre_taps=5, post_taps=5, step_size=0.5,
                 ridge=1e-10, mode="block", n_passes=25, block_len=16384,
                 solver="lms", preconditioner="correlation"):
        self.order = order
        self.pre_taps = pre_taps
        self.post_taps = post_taps
        self.step_size = step_size
        self.ridge = ridge
        self.mode = mode
        self.n_passes = n_passes
        self.block_len = block_len
        self.solver = solver
        self.preconditioner = preconditioner

    def fit(self, x, y):
        """Adapt on aligned transmit-reference / receiver streams."""
        x = as_complex_signal(x, "reference")
        y = as_complex_signal(y, "received")
        check_aligned(x, y)
        if self.solver == "ls":
            self.coef_ = memory_polynomial_ls(
                x, y, self.order, self.pre_taps, self.post_taps, ridge=self.ridge
            )
            self.history_ = np.asarray([])
            return self
        if self.solver != "lms":
            raise ValueError(f"unknown solver {self.solver!r}")
        corr = estimate_basis_correlation(
            x, self.order, self.pre_taps, self.post_taps, ridge=self._ridge_abs(x)
        )
        if self.preconditioner == "identity":
            corr = float(np.linalg.eigvalsh(corr)[-1]) * np.eye(corr.shape[0])
        elif self.preconditioner != "correlation":
            raise ValueError(f"unknown preconditioner {self.preconditioner!r}")
        self.corr_ = corr
        if self.mode == "block":
            self._fit_block(x, y, corr)
        elif self.mode == "sample":
            self._fit_sample(x, y, corr)
        else:
            raise ValueError(f"unknown mode {self.mode!r}")
        return self

    def _ridge_abs(self, x):
        return self.ridge * float(np.mean(np.abs(x) ** 2))

    def _fit_block(self, x, y, corr):
        # one update per pass, averaged over the whole training block: with
        # the correlation matrix estimated on the same samples the
        # coefficient error contracts by exactly (1 - step_size) per pass.
        # Sub-block updates are unstable here: the high-order basis samples
        # are heavy-tailed, so short-block correlations fluctuate far from
        # the precomputed matrix.
        n_terms = corr.shape[0]
        coef = np.zeros(n_terms, dtype=np.complex128)
        history = []
        for _ in range(self.n_passes):
            grad = np.zeros(n_terms, dtype=np.complex128)
            power = 0.0
            for start, stop, block in _basis_blocks(
                x, self.order, self.pre_taps, self.post_taps, self.block_len
            ):
                residual = y[start:stop] - block @ coef
                power += float(np.sum(np.abs(residual) ** 2))
                grad += block.conj().T @ residual
            history.append(power / len(x))
            _check_guard(history)
            coef = coef + self.step_size * np.linalg.solve(corr, grad / len(x))
        self.coef_ = coef
        self.history_ = np.asarray(history)

    def _fit_sample(self, x, y, corr):
        basis = memory_polynomial_basis(x, self.order, self.pre_taps, self.post_taps)
        inv = np.linalg.inv(corr)
        coef = np.zeros(basis.shape[1], dtype=np.complex128)
        history = []
        for _ in range(self.n_passes):
            power_acc = 0.0
            for n in range(len(x)):
                u = basis[n]
                residual = y[n] - u @ coef
                coef = coef + self.step_size * (inv @ u.conj()) * residual
                power_acc += abs(residual) ** 2
                if (n + 1) % self.block_len == 0:
                    history.append(power_acc / self.block_len)
                    power_acc = 0.0
                    _check_guard(history)
        self.coef_ = coef
        self.history_ = np.asarray(history)

    def predict(self, x):
        """Reconstruct the interference from the transmit reference."""
        self._check_fitted()
        return mp_predict(x, self.coef_, self.order, self.pre_taps, self.post_taps)

    def cancel(self, x, y):
        """Residual after digital cancellation."""
        y = as_complex_signal(y, "received")
        check_aligned(x, y)
        return y - self.predict(x)

    def _check_fitted(self):
        if not hasattr(self, "coef_"):
            raise RuntimeError("canceller is not fitted; call fit() first")


# ---------------------------------------------------------------------------
# state persistence (text key-value, complex values as "re,im")


def _format_complex(z):
    return f"{float(z.real)!r},{float(z.imag)!r}"


def _parse_complex(text):
    re_part, im_part = text.split(",")
    return complex(float(re_part), float(im_part))


def save_canceller_state(path, canceller):
    """Write a fitted canceller to a text key-value file."""
    lines = []
    if isinstance(canceller, RfCanceller):
        canceller._check_fitted()
        lines.append("kind=rf")
        lines.append(f"sample_rate_hz={float(canceller.sample_rate_hz)!r}")
        lines.append(
            "tap_delays_s=" + ";".join(repr(float(t)) for t in canceller.tap_delays_s)
        )
        for i, w in enumerate(canceller.weights_):
            lines.append(f"w{i}={_format_complex(w)}")
    elif isinstance(canceller, MemoryPolynomialCanceller):
        canceller._check_fitted()
        lines.append("kind=digital")
        lines.append(f"order={canceller.order}")
        lines.append(f"pre_taps={canceller.pre_taps}")
        lines.append(f"post_taps={canceller.post_taps}")
        for i, h in enumerate(canceller.coef_):
            lines.append(f"h{i}={_format_complex(h)}")
    else:
        raise TypeError(f"cannot persist {type(canceller).__name__}")
    with open(path, "w", encoding="ascii") as fh:
        fh.write("\n".join(lines) + "\n")


def load_canceller_state(path):
    """Restore a canceller saved by save_canceller_state."""
    fields = {}
    with open(path, "r", encoding="ascii") as fh:
        for line in fh:
            line = line.strip()
            if line:
                key, value = line.split("=", 1)
                fields[key] = value
    kind = fields.pop("kind", None)
    if kind == "rf":
        est = RfCanceller(
            sample_rate_hz=float(fields["sample_rate_hz"]),
            tap_delays_s=tuple(float(t) for t in fields["tap_delays_s"].split(";")),
        )
        n = len(est.tap_delays_s)
        est.weights_ = np.array([_parse_complex(fields[f"w{i}"]) for i in range(n)])
        est.delays_samples_ = est._delays()
        est.history_ = np.asarray([])
        return est
    if kind == "digital":
        est = MemoryPolynomialCanceller(
            order=int(fields["order"]),
            pre_taps=int(fields["pre_taps"]),
            post_taps=int(fields["post_taps"]),
        )
        n = len(basis_terms(est.order, est.pre_taps, est.post_taps))
        est.coef_ = np.array([_parse_complex(fields[f"h{i}"]) for i in range(n)])
        est.history_ = np.asarray([])
        return est
    raise ValueError(f"unrecognized canceller state file {path}")
