"""File formats: stellar-state JSON, Fock CSV, trajectory CSV, outcome CSV.

All numeric output is printed with 17 significant digits so runs are
byte-reproducible.
"""

from __future__ import annotations

import json

import numpy as np

from .states import FockArray, GaussPart, PolyPart, StellarState


def fmt(x):
    """17-significant-digit decimal form of a float."""
    return f"{float(x):.17g}"


def _pair(z):
    z = complex(z)
    return [z.real, z.imag]


def state_to_dict(state):
    m = state.modes
    poly = [
        {"index": list(idx), "re": c.real, "im": c.imag}
        for idx, c in sorted(state.poly.coeffs.items())
    ]
    A = [_pair(state.gauss.A[i, j]) for i in range(m) for j in range(m)]
    B = [_pair(b) for b in state.gauss.B]
    return {
        "modes": m,
        "poly": poly,
        "gauss": {"A": A, "B": B, "C": _pair(state.gauss.C)},
    }


def state_from_dict(doc):
    try:
        m = int(doc["modes"])
        coeffs = {
            tuple(int(k) for k in entry["index"]): complex(entry["re"], entry["im"])
            for entry in doc["poly"]
        }
        g = doc["gauss"]
        A = np.array(
            [complex(re, im) for re, im in g["A"]], dtype=complex
        ).reshape(m, m)
        B = np.array([complex(re, im) for re, im in g["B"]], dtype=complex)
        C = complex(g["C"][0], g["C"][1])
    except (KeyError, TypeError, ValueError) as exc:
        raise ValueError(f"malformed stellar-state document: {exc}") from exc
    return StellarState.make(m, PolyPart.make(coeffs, modes=m), GaussPart.make(A, B, C))


def save_state(state, path):
    with open(path, "w") as fh:
        json.dump(state_to_dict(state), fh, indent=1)
        fh.write("\n")


def load_state(path):
    with open(path) as fh:
        return state_from_dict(json.load(fh))


def fock_array_csv(arr):
    """One row per multi-index: n_1, ..., n_m, re, im."""
    header = ",".join([f"n{k + 1}" for k in range(arr.modes)] + ["re", "im"])
    lines = [header]
    for idx in sorted(arr.amplitudes):
        amp = complex(arr.amplitudes[idx])
        lines.append(
            ",".join([str(k) for k in idx] + [fmt(amp.real), fmt(amp.imag)])
        )
    return "\n".join(lines) + "\n"


def trajectory_csv(traj):
    """Columns t, Re/Im of each zero, then Re/Im of a, b, c."""
    n = traj.n_zeros
    header = ["t"]
    for k in range(n):
        header += [f"re_lambda{k + 1}", f"im_lambda{k + 1}"]
    header += ["re_a", "im_a", "re_b", "im_b", "re_c", "im_c"]
    lines = [",".join(header)]
    for i, t in enumerate(traj.times):
        row = [fmt(t)]
        for k in range(n):
            z = traj.zeros[k, i]
            row += [fmt(z.real), fmt(z.imag)]
        for v in traj.gauss_path[i]:
            row += [fmt(v.real), fmt(v.imag)]
        lines.append(",".join(row))
    return "\n".join(lines) + "\n"


def cm_trajectory_csv(times, positions):
    """Columns t, Re/Im of each particle position."""
    n = positions.shape[0]
    header = ["t"]
    for k in range(n):
        header += [f"re_q{k + 1}", f"im_q{k + 1}"]
    lines = [",".join(header)]
    for i, t in enumerate(times):
        row = [fmt(t)]
        for k in range(n):
            row += [fmt(positions[k, i].real), fmt(positions[k, i].imag)]
        lines.append(",".join(row))
    return "\n".join(lines) + "\n"


def outcomes_csv(rows):
    """Outcome records: shot, name, mode, kind, re, im (integers carry im=0)."""
    lines = ["shot,name,mode,kind,re,im"]
    for shot, records in rows:
        for name, kind, modes, values in records:
            for mode, value in zip(modes, values):
                if kind == "discrete":
                    lines.append(f"{shot},{name},{mode},d,{int(value)},0")
                else:
                    z = complex(value)
                    lines.append(
                        f"{shot},{name},{mode},c,{fmt(z.real)},{fmt(z.imag)}"
                    )
    return "\n".join(lines) + "\n"


def fock_array_from_csv(text):
    lines = [ln for ln in text.strip().splitlines() if ln]
    header = lines[0].split(",")
    m = len(header) - 2
    amps = {}
    for ln in lines[1:]:
        parts = ln.split(",")
        idx = tuple(int(v) for v in parts[:m])
        amps[idx] = complex(float(parts[m]), float(parts[m + 1]))
    captured = sum(abs(a) ** 2 for a in amps.values())
    cutoff = max((sum(i) for i in amps), default=0)
    return FockArray(m, cutoff, amps, captured, 0.0)
