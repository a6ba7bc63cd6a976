"""Circuit parsing, preparation builders, adaptive execution, architectures."""

import json

import numpy as np
import pytest

from hqcsim import circuits as circ
from hqcsim import io as hio
from hqcsim import states as st
from hqcsim.sampling import SamplerConfig


def make_doc(modes, prep, entries):
    return {"schema": "hqc-circuit/1", "modes": modes, "prep": prep, "circuit": entries}


HOM_DOC = make_doc(
    2,
    {"kind": "fock_pattern", "pattern": [1, 1]},
    [
        {"type": "beamsplitter", "modes": [0, 1]},
        {"measure": "discrete", "modes": [0, 1], "name": "out"},
    ],
)


class TestParse:
    def test_minimal(self):
        doc = make_doc(1, {"kind": "vacuum"}, [{"measure": "discrete", "modes": [0]}])
        spec = circ.parse_circuit(json.dumps(doc))
        assert spec.modes == 1
        assert len(spec.measurements) == 1

    def test_boson_sampling_spec(self):
        doc = make_doc(
            3,
            {"kind": "fock_pattern", "pattern": [1, 1, 0]},
            [
                {
                    "type": "passive",
                    "matrix": [[[1, 0], [0, 0], [0, 0]],
                               [[0, 0], [1, 0], [0, 0]],
                               [[0, 0], [0, 0], [1, 0]]],
                },
                {"measure": "discrete", "modes": [0, 1, 2], "name": "out"},
            ],
        )
        spec = circ.parse_circuit(json.dumps(doc))
        assert len(spec.gates) == 1

    def test_forward_reference_rejected(self):
        doc = make_doc(
            2,
            {"kind": "vacuum"},
            [
                {"type": "displace", "mode": 0,
                 "amount": {"terms": [{"ref": "later", "coeff": [1, 0]}]}},
                {"measure": "continuous", "modes": [1], "name": "later"},
            ],
        )
        with pytest.raises(circ.CircuitError, match="precede"):
            circ.parse_circuit(json.dumps(doc))

    def test_double_measurement_rejected(self):
        doc = make_doc(
            1,
            {"kind": "vacuum"},
            [
                {"measure": "discrete", "modes": [0], "name": "a"},
                {"measure": "discrete", "modes": [0], "name": "b"},
            ],
        )
        with pytest.raises(circ.CircuitError, match="twice"):
            circ.parse_circuit(json.dumps(doc))

    def test_mode_out_of_range(self):
        doc = make_doc(1, {"kind": "vacuum"}, [{"type": "phase", "mode": 3, "phi": 1.0}])
        with pytest.raises(circ.CircuitError, match="range"):
            circ.parse_circuit(json.dumps(doc))

    def test_bad_schema(self):
        with pytest.raises(circ.CircuitError, match="schema"):
            circ.parse_circuit(json.dumps({"schema": "nope", "modes": 1, "circuit": []}))

    def test_round_trip(self):
        spec = circ.parse_circuit(json.dumps(HOM_DOC))
        doc = circ.circuit_to_dict(spec)
        spec2 = circ.parse_circuit(json.dumps(doc))
        assert circ.circuit_to_dict(spec2) == doc


class TestPrepare:
    def test_vacuum(self):
        s = circ.prepare_input({"kind": "vacuum"}, 2)
        assert st.stellar_rank(s) == 0

    def test_photon_added_squeezed(self):
        builder = {
            "kind": "photon_added",
            "base": {"kind": "gaussian", "gates": [
                {"type": "squeeze", "mode": 0, "xi": [0.4, 0]}]},
            "ops": [{"create": 0}],
        }
        s = circ.prepare_input(builder, 1)
        assert st.stellar_rank(s) == 1
        assert st.norm_squared(s) == pytest.approx(1.0, abs=1e-9)

    def test_photon_added_rank_counts(self):
        builder = {"kind": "photon_added", "ops": [{"create": 0}, {"create": 1}]}
        s = circ.prepare_input(builder, 2)
        assert st.stellar_rank(s) == 2

    def test_finite_superposition_from_file(self, tmp_path):
        # a grid-state approximant: finite Fock superposition loaded from disk
        amps = {(0,): 0.8, (4,): 0.5, (8,): 0.33}
        approx = st.normalized(st.from_fock_superposition(amps, 1))
        path = tmp_path / "gkp_approx.json"
        hio.save_state(approx, path)
        s = circ.prepare_input({"kind": "state_file", "path": str(path)}, 1)
        assert st.stellar_rank(s) == 8

    def test_inadmissible_gaussian_rejected(self):
        builder = {"kind": "state", "state": {
            "modes": 1, "poly": [{"index": [0], "re": 1, "im": 0}],
            "gauss": {"A": [[1.5, 0]], "B": [[0, 0]], "C": [0, 0]}}}
        with pytest.raises(st.AdmissibilityError):
            circ.prepare_input(builder, 1)


class TestRun:
    def test_vacuum_all_zero(self):
        doc = make_doc(2, {"kind": "vacuum"},
                       [{"measure": "discrete", "modes": [0, 1], "name": "n"}])
        spec = circ.parse_circuit(json.dumps(doc))
        res = circ.run_circuit(spec, SamplerConfig(seed=0, shots=20, cutoff=6))
        assert all(rec[0][3] == (0, 0) for _, rec in res.rows)

    def test_hom_no_coincidences(self):
        spec = circ.parse_circuit(json.dumps(HOM_DOC))
        res = circ.run_circuit(spec, SamplerConfig(seed=3, shots=500, cutoff=8))
        outcomes = [rec[0][3] for _, rec in res.rows]
        assert all(o in ((2, 0), (0, 2)) for o in outcomes)

    def test_worker_invariance(self):
        spec = circ.parse_circuit(json.dumps(HOM_DOC))
        cfg = SamplerConfig(seed=5, shots=300, cutoff=8)
        r1 = circ.run_circuit(spec, cfg, workers=1)
        r4 = circ.run_circuit(spec, cfg, workers=4)
        assert r1.rows == r4.rows
        assert r1.outcomes_csv() == r4.outcomes_csv()

    def test_adaptive_displacement_tracking(self):
        doc = make_doc(
            2,
            {"kind": "vacuum"},
            [
                {"measure": "continuous", "modes": [0], "name": "a"},
                {"type": "displace", "mode": 1,
                 "amount": {"base": [0, 0],
                            "terms": [{"ref": "a", "index": 0, "coeff": [1, 0]}]}},
                {"measure": "continuous", "modes": [1], "name": "b"},
            ],
        )
        spec = circ.parse_circuit(json.dumps(doc))
        res = circ.run_circuit(spec, SamplerConfig(seed=11, shots=4000))
        a = np.array([rec[0][3][0] for _, rec in res.rows])
        b = np.array([rec[1][3][0] for _, rec in res.rows])
        da = a - a.mean()
        slope = np.real(np.vdot(da, b - b.mean())) / np.real(np.vdot(da, da))
        assert slope == pytest.approx(1.0, abs=0.05)

    def test_adaptive_discrete_reference(self):
        # phase conditioned on a photon count parity: runs and is reproducible
        doc = make_doc(
            2,
            {"kind": "fock_pattern", "pattern": [1, 0]},
            [
                {"type": "beamsplitter", "modes": [0, 1]},
                {"measure": "discrete", "modes": [0], "name": "n"},
                {"type": "phase", "mode": 1,
                 "phi": {"terms": [{"ref": "n", "coeff": [3.14159, 0]}]}},
                {"measure": "discrete", "modes": [1], "name": "m"},
            ],
        )
        spec = circ.parse_circuit(json.dumps(doc))
        cfg = SamplerConfig(seed=2, shots=400, cutoff=6)
        r1 = circ.run_circuit(spec, cfg)
        r2 = circ.run_circuit(spec, cfg, workers=3)
        assert r1.rows == r2.rows
        # single photon: the two counters always sum to 1
        for _, rec in r1.rows:
            assert rec[0][3][0] + rec[1][3][0] == 1

    def test_final_summary(self):
        doc = make_doc(2, {"kind": "fock_pattern", "pattern": [1, 1]},
                       [{"measure": "discrete", "modes": [0], "name": "n"}])
        spec = circ.parse_circuit(json.dumps(doc))
        res = circ.run_circuit(spec, SamplerConfig(seed=1, shots=5, cutoff=8),
                               final_summary=True)
        for shot, rank, norm in res.summaries:
            assert rank in (0, 1, 2)
            assert norm == pytest.approx(1.0, abs=1e-9)

    def test_rank_bookkeeping_rank_preserving(self):
        # gates keep the rank, the continuous measurement cannot raise it
        doc = make_doc(
            2,
            {"kind": "fock_pattern", "pattern": [1, 1]},
            [
                {"type": "beamsplitter", "modes": [0, 1]},
                {"type": "squeeze", "mode": 0, "xi": [0.3, 0.1]},
                {"measure": "continuous", "modes": [0], "name": "a"},
            ],
        )
        spec = circ.parse_circuit(json.dumps(doc))
        res = circ.run_circuit(spec, SamplerConfig(seed=4, shots=10),
                               final_summary=True)
        for shot, rank, norm in res.summaries:
            assert rank <= 2
            assert norm == pytest.approx(1.0, abs=1e-9)


class TestTable3:
    @pytest.mark.parametrize("row", circ.TABLE3_ARCHITECTURES)
    def test_dual_route_agreement(self, row):
        rep = circ.table3_demo(row, m=3, photons=2)
        assert rep["max_abs_diff"] <= 1e-10

    def test_size_guard(self):
        with pytest.raises(ValueError, match="desk-scale"):
            circ.table3_demo("fock-dv", m=6, photons=2)
