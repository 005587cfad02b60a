"""Seeded generators and independent oracles shared across test modules."""

import numpy as np

import interfsim as m


def random_state(rng, dim):
    vec = rng.normal(size=dim) + 1j * rng.normal(size=dim)
    return m.ProbabilityState(vec / np.sqrt(np.vdot(vec, vec).real))


def random_unitary2(rng):
    z = rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2))
    q, r = np.linalg.qr(z)
    return q * (np.diag(r) / np.abs(np.diag(r)))


def random_device(rng, n_modes, phase_canonical=False):
    modes = tuple(int(x) for x in rng.choice(n_modes, size=2, replace=False))
    kind = int(rng.integers(5))
    if kind == 0:
        return m.cross(modes)
    if kind == 1:
        return m.reflector(modes)
    if kind == 2:
        return m.beam_splitter(float(rng.uniform()), modes)
    if kind == 3:
        phi = float(rng.uniform(0.0, 2.0 * np.pi))
        if phase_canonical:
            mode = modes[1]
            modes = (0 if mode != 0 else 1, mode)
        return m.phase(phi, modes)
    return m.custom(random_unitary2(rng), modes)


def random_device_apparatus(rng, max_modes=4, max_stages=6):
    """Detector-free apparatus with a basis-state source (path-sum oracle)."""
    n = int(rng.integers(2, max_modes + 1))
    stages = tuple(
        random_device(rng, n) for _ in range(int(rng.integers(1, max_stages + 1)))
    )
    return m.Apparatus(n, m.basis_state(n, int(rng.integers(n))), stages)


def _random_bank(rng, n_modes, label_start, single_mode=False):
    count = int(rng.integers(1, n_modes + 1))
    modes = [int(x) for x in rng.choice(n_modes, size=count, replace=False)]
    detectors = []
    index = label_start
    i = 0
    while i < len(modes):
        take = 1 if single_mode else int(rng.integers(1, len(modes) - i + 1))
        detectors.append(m.Detector(f"K{index}", frozenset(modes[i : i + take])))
        index += 1
        i += take
    return m.DetectorBank(tuple(detectors)), index


def random_apparatus(rng, max_modes=4, max_stages=8):
    """Apparatus mixing unitary devices and detector banks."""
    n = int(rng.integers(2, max_modes + 1))
    stages = []
    label = 0
    for _ in range(int(rng.integers(1, max_stages + 1))):
        if rng.uniform() < 0.35:
            bank, label = _random_bank(rng, n, label)
            stages.append(bank)
        else:
            stages.append(random_device(rng, n))
    if rng.uniform() < 0.5:
        source = m.basis_state(n, int(rng.integers(n)))
    else:
        source = random_state(rng, n)
    return m.Apparatus(n, source, tuple(stages))


def random_doc(rng, max_modes=4, max_stages=8):
    """DSL-expressible document: single-mode detectors, canonical phase modes."""
    n = int(rng.integers(2, max_modes + 1))
    stages = []
    label = 0
    for _ in range(int(rng.integers(0, max_stages + 1))):
        if rng.uniform() < 0.3:
            bank, label = _random_bank(rng, n, label, single_mode=True)
            stages.append(bank)
        else:
            stages.append(random_device(rng, n, phase_canonical=True))
    if rng.uniform() < 0.5:
        source = m.basis_state(n, int(rng.integers(n)))
    else:
        source = random_state(rng, n)
    name = f"doc_{int(rng.integers(1_000_000))}"
    return m.ExperimentDoc(name, m.Apparatus(n, source, tuple(stages)))


def renormalized_distribution(apparatus):
    """Independent evaluator: renormalize after every detection and multiply
    the branch probabilities along the surviving path.  Unitary stages only."""
    n = apparatus.n_modes
    out: dict[str, float] = {}
    psi = apparatus.source.amplitudes.copy()
    prob = 1.0
    for stage in apparatus.stages:
        if isinstance(stage, m.DeviceOp):
            psi = m.embed(stage, n) @ psi
            continue
        for det in stage.detectors:
            p = float(np.sum(np.abs(psi[sorted(det.modes)]) ** 2))
            out[det.label] = out.get(det.label, 0.0) + prob * p
        psi = psi.copy()
        psi[sorted(stage.covered_modes)] = 0.0
        remaining = float(np.vdot(psi, psi).real)
        if remaining <= 1e-15:
            prob = 0.0
            break
        psi = psi / np.sqrt(remaining)
        prob *= remaining
    if prob > 0.0:
        out[m.UNDETECTED] = out.get(m.UNDETECTED, 0.0) + prob
    return out
