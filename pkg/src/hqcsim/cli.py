"""Command-line interface.

Subcommands: run, sample, prob, rank, schmidt, decompose, cm-trace, evolve,
table3. Output is deterministic for a fixed seed (the HQC_SEED environment
variable supplies the default); numeric values are printed with 17
significant digits. Exit codes: 0 success, 1 validation error, 2
numeric-tolerance failure.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from . import calogero as cm
from . import circuits as circ
from . import dynamics as dy
from . import io as hio
from . import multimode as mm
from . import sampling as sp
from . import states as st

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_TOLERANCE = 2


class ToleranceFailure(RuntimeError):
    pass


def _default_seed():
    env = os.environ.get("HQC_SEED")
    return int(env) if env else 0


def _write(text, out_path):
    if out_path:
        with open(out_path, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _json_dump(doc):
    return json.dumps(_round_floats(doc), indent=1, sort_keys=True) + "\n"


def _round_floats(node):
    if isinstance(node, float):
        return float(hio.fmt(node))
    if isinstance(node, dict):
        return {k: _round_floats(v) for k, v in node.items()}
    if isinstance(node, (list, tuple)):
        return [_round_floats(v) for v in node]
    return node


def _load_circuit(path):
    with open(path) as fh:
        return circ.parse_circuit(fh.read())


def cmd_run(args):
    spec = _load_circuit(args.circuit)
    cfg = sp.SamplerConfig(seed=args.seed, shots=args.shots, cutoff=args.cutoff)
    result = circ.run_circuit(
        spec, cfg, workers=args.workers, final_summary=args.final_summary
    )
    if args.format == "csv":
        _write(result.outcomes_csv(), args.out)
    else:
        _write(_json_dump(result.to_dict()), args.out)
    return EXIT_OK


def cmd_sample(args):
    state = hio.load_state(args.state)
    state = st.normalized(state)
    modes = _parse_modes(args.modes, state.modes)
    cfg = sp.SamplerConfig(seed=args.seed, shots=args.shots, cutoff=args.cutoff)
    rows = []
    if args.kind == "discrete":
        outs = sp.sample_discrete(state, modes, cfg)
        for shot, o in enumerate(outs):
            rows.append((shot, [("m0", "discrete", tuple(modes), o.ns)]))
    else:
        outs = sp.sample_continuous(state, modes, cfg)
        for shot, o in enumerate(outs):
            rows.append((shot, [("m0", "continuous", tuple(modes), o.alphas)]))
    if args.format == "csv":
        _write(hio.outcomes_csv(rows), args.out)
    else:
        doc = circ.RunResult(args.seed, args.shots, tuple(rows)).to_dict()
        _write(_json_dump(doc), args.out)
    return EXIT_OK


def cmd_prob(args):
    spec = _load_circuit(args.circuit)
    state = circ.final_state(spec)
    state = st.normalized(state)
    outcome = tuple(int(v) for v in args.outcome.split(","))
    if len(outcome) != state.modes:
        raise circ.CircuitError("outcome length must equal the mode count")
    probs = sp.fock_probabilities(state, args.cutoff)
    captured = sum(probs.values())
    if captured < 1.0 - 1e-6:
        raise ToleranceFailure(
            f"cutoff {args.cutoff} captures only {captured:.9f} of the distribution"
        )
    doc = {
        "outcome": list(outcome),
        "probability": probs.get(outcome, 0.0),
        "captured": captured,
    }
    _write(_json_dump(doc), args.out)
    return EXIT_OK


def cmd_rank(args):
    state = hio.load_state(args.state)
    doc = {
        "modes": state.modes,
        "stellar_rank": st.stellar_rank(state),
        "norm_squared": st.norm_squared(state),
    }
    _write(_json_dump(doc), args.out)
    return EXIT_OK


def _parse_partition(text, modes):
    left, right = text.split("|")
    I = tuple(int(v) for v in left.split(",") if v != "")
    J = tuple(int(v) for v in right.split(",") if v != "")
    return I, J


def cmd_schmidt(args):
    state = hio.load_state(args.state)
    part = _parse_partition(args.partition, state.modes)
    form = mm.schmidt_form(state, part)
    doc = {
        "partition": [list(form.partition[0]), list(form.partition[1])],
        "schmidt_rank": form.rank,
        "coefficients": [float(c) for c in form.coefficients],
        "cross_terms": [
            {"i": i, "j": j, "re": v.real, "im": v.imag}
            for (i, j), v in sorted(form.cross_terms.items())
        ],
        "separable": bool(form.separable),
    }
    _write(_json_dump(doc), args.out)
    return EXIT_OK


def cmd_decompose(args):
    state = hio.load_state(args.state)
    poly, spec = mm.decompose_normal(state)
    gates = []
    for gate in spec.gate_list:
        if hasattr(gate, "U"):
            gates.append(
                {
                    "type": "passive",
                    "matrix": [
                        [[gate.U[i, j].real, gate.U[i, j].imag] for j in range(state.modes)]
                        for i in range(state.modes)
                    ],
                }
            )
        elif hasattr(gate, "beta"):
            gates.append(
                {"type": "displace", "vector": [[b.real, b.imag] for b in gate.beta]}
            )
        else:
            gates.append(
                {"type": "squeeze", "mode": gate.mode, "xi": [gate.xi.real, gate.xi.imag]}
            )
    doc = {
        "poly": [
            {"index": list(i), "re": c.real, "im": c.imag}
            for i, c in sorted(poly.coeffs.items())
        ],
        "gaussian_program": gates,
    }
    _write(_json_dump(doc), args.out)
    return EXIT_OK


def cmd_cm_trace(args):
    with open(args.system) as fh:
        doc = json.load(fh)
    q0 = [complex(re, im) for re, im in doc["q0"]]
    p0 = [complex(re, im) for re, im in doc["p0"]]
    g = complex(*doc["g"]) if isinstance(doc["g"], list) else complex(doc["g"])
    om = complex(*doc.get("omega", [0, 0])) if isinstance(doc.get("omega"), list) else complex(doc.get("omega", 0))
    system = cm.CMSystem.make(q0, p0, g, om)
    times = np.linspace(args.t0, args.t1, args.steps)
    path = cm.cm_solve_path(system, times)
    _write(hio.cm_trajectory_csv(times, path), args.out)
    return EXIT_OK


def cmd_evolve(args):
    state = hio.load_state(args.state)
    if state.modes != 1:
        raise circ.CircuitError("evolve acts on single-mode states")
    drive = complex(args.re, args.im)
    if args.trajectory:
        times = np.linspace(0.0, args.t, args.steps)
        if args.route == "ode":
            ham = {
                "D": dy.GaussianHamiltonian1M.displacement,
                "R": lambda d: dy.GaussianHamiltonian1M.phase_shift(d.real),
                "S": dy.GaussianHamiltonian1M.squeezing,
                "P": lambda d: dy.GaussianHamiltonian1M.shearing(d.real),
            }[args.gate](drive)
            traj = dy.ode_evolve(state, ham, args.t, dt=args.t / (args.steps - 1))
        else:
            traj = dy.closed_form_trajectory(state, args.gate, _drive_of(args.gate, drive), times)
        _write(hio.trajectory_csv(traj), args.out)
        return EXIT_OK
    evolv = {
        "D": dy.evolve_displacement,
        "R": dy.evolve_phaseshift,
        "S": dy.evolve_squeezing,
        "P": dy.evolve_shearing,
    }[args.gate]
    out = evolv(state, _drive_of(args.gate, drive), args.t)
    _write(_json_dump(hio.state_to_dict(out)), args.out)
    return EXIT_OK


def _drive_of(gate, drive):
    return drive.real if gate in ("R", "P") else drive


def cmd_table3(args):
    rows = (
        [args.architecture] if args.architecture else list(circ.TABLE3_ARCHITECTURES)
    )
    reports = [
        circ.table3_demo(row, m=args.modes, photons=args.photons, seed=args.seed)
        for row in rows
    ]
    worst = max(r["max_abs_diff"] for r in reports)
    doc = {"rows": reports, "worst_abs_diff": worst}
    _write(_json_dump(doc), args.out)
    if worst > 1e-10:
        raise ToleranceFailure(f"dual-route disagreement {worst:.3e} above 1e-10")
    return EXIT_OK


def _parse_modes(text, modes):
    if not text:
        return list(range(modes))
    return [int(v) for v in text.split(",")]


def _add_common(parser, suppress=False):
    # Subparsers register the same flags with SUPPRESS defaults so the flags
    # work both before and after the subcommand.
    s = argparse.SUPPRESS
    parser.add_argument(
        "--seed", type=int, default=s if suppress else None,
        help="RNG seed (default HQC_SEED or 0)",
    )
    parser.add_argument("--shots", type=int, default=s if suppress else 1000)
    parser.add_argument("--cutoff", type=int, default=s if suppress else 30)
    parser.add_argument(
        "--out", default=s if suppress else None, help="output path (default stdout)"
    )
    parser.add_argument(
        "--format", choices=["json", "csv"], default=s if suppress else "json"
    )


def build_parser():
    parser = argparse.ArgumentParser(
        prog="hqcsim",
        description="Holomorphic-representation bosonic circuit simulator",
    )
    _add_common(parser)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="execute a circuit document")
    _add_common(p, suppress=True)
    p.add_argument("circuit")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--final-summary", action="store_true")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("sample", help="sample measurements of a stored state")
    _add_common(p, suppress=True)
    p.add_argument("state")
    p.add_argument("--kind", choices=["continuous", "discrete"], default="discrete")
    p.add_argument("--modes", default="", help="comma-separated mode list")
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("prob", help="probability of a discrete outcome of a circuit")
    _add_common(p, suppress=True)
    p.add_argument("circuit")
    p.add_argument("--outcome", required=True, help="comma-separated photon counts")
    p.set_defaults(func=cmd_prob)

    p = sub.add_parser("rank", help="stellar rank of a stored state")
    _add_common(p, suppress=True)
    p.add_argument("state")
    p.set_defaults(func=cmd_rank)

    p = sub.add_parser("schmidt", help="Schmidt/separability report")
    _add_common(p, suppress=True)
    p.add_argument("state")
    p.add_argument("--partition", required=True, help="e.g. 0,1|2")
    p.set_defaults(func=cmd_schmidt)

    p = sub.add_parser("decompose", help="normal form P, U S D program")
    _add_common(p, suppress=True)
    p.add_argument("state")
    p.set_defaults(func=cmd_decompose)

    p = sub.add_parser("cm-trace", help="Calogero-Moser trajectory CSV")
    _add_common(p, suppress=True)
    p.add_argument("system", help="JSON with q0, p0, g, omega")
    p.add_argument("--t0", type=float, default=0.0)
    p.add_argument("--t1", type=float, default=1.0)
    p.add_argument("--steps", type=int, default=201)
    p.set_defaults(func=cmd_cm_trace)

    p = sub.add_parser("evolve", help="single-mode Gaussian gate evolution")
    _add_common(p, suppress=True)
    p.add_argument("state")
    p.add_argument("--gate", choices=["D", "R", "S", "P"], required=True)
    p.add_argument("--re", type=float, default=0.0, help="drive real part")
    p.add_argument("--im", type=float, default=0.0, help="drive imag part")
    p.add_argument("--t", type=float, default=1.0)
    p.add_argument("--trajectory", action="store_true")
    p.add_argument("--route", choices=["closed", "ode"], default="closed")
    p.add_argument("--steps", type=int, default=201)
    p.set_defaults(func=cmd_evolve)

    p = sub.add_parser("table3", help="architecture dual-route checks")
    _add_common(p, suppress=True)
    p.add_argument("--architecture", choices=list(circ.TABLE3_ARCHITECTURES))
    p.add_argument("--modes", type=int, default=3)
    p.add_argument("--photons", type=int, default=2)
    p.set_defaults(func=cmd_table3)

    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.seed is None:
        args.seed = _default_seed()
    try:
        return args.func(args)
    except ToleranceFailure as exc:
        print(f"tolerance failure: {exc}", file=sys.stderr)
        return EXIT_TOLERANCE
    except (ValueError, OSError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
