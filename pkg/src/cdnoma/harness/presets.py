"""Named experiment presets reproducing the evaluation setups at desk scale.

Desk-scale runs use fewer drops and trials and cap the ``K`` sweep at 64;
``--full-scale`` restores the larger settings listed in ``full_scale``.
Budgets are wall-clock seconds on a single laptop core.
"""

from __future__ import annotations

from .experiment import ExperimentSpec

BASE_NETWORK = {"L": 4, "M": 64, "tau_c": 200, "tau_p": "K",
                "p_ul_dbm": 20.0, "rho_dl_dbm": 20.0,
                "sigma2_ul_dbm": -94.0, "sigma2_dl_dbm": -94.0, "cell_side": 250.0}

CLUSTERS = {"drop": "circle-clusters", "clusters": 4, "cluster_radius": 20.0}
SECTOR = {"drop": "sector", "half_angle": 15.0, "radius": 100.0}

MMIMO = {"name": "mMIMO"}


def _net(**kw):
    d = dict(BASE_NETWORK)
    d.update(kw)
    return d


def _nomas(N):
    return [MMIMO,
            {"name": "NOMA-random", "N": N, "kind": "orthogonal", "assign": "random"},
            {"name": "NOMA-grouped", "N": N, "kind": "orthogonal", "assign": "grouped"}]


_PRESETS = [
    ExperimentSpec(
        scenario_id="fig1-case-study",
        kind="case-study",
        description="Two UEs, LoS ULA, perfect CSI, closed-form SE of UE 1 vs the angle of "
                    "UE 2 (phi1 = 30 deg); M = 64, N = 2 orthogonal, SNR = 0 dB.",
        network=_net(L=1, K=2, tau_p=2, p_ul=0.1, sigma2_ul=0.1,
                     p_ul_dbm=None, sigma2_ul_dbm=None),
        model="los",
        sweep_param="angle",
        sweep_values=[float(a) for a in range(-90, 91)],
        arms=[{"name": "mMIMO", "N": 1}, {"name": "NOMA", "N": 2, "assign": "grouped"}],
        budget_s=5,
    ),
    ExperimentSpec(
        scenario_id="fig3-two-ue",
        description="One cell, two UEs at 100 m, 3D one-ring, MMSE estimation; UL SE vs "
                    "the azimuth of UE 2 (UE 1 at 30 deg). No shadowing.",
        network=_net(L=1, K=2),
        scenario={"drop": "uniform-cell", "radius": 100.0, "shadowing": False},
        sweep_param="angle",
        sweep_values=[float(a) for a in range(-60, 61, 10)],
        arms=[MMIMO, {"name": "NOMA", "N": 2, "kind": "orthogonal", "assign": "grouped"}],
        trials=200, drops=3, budget_s=60,
        full_scale={"sweep_values": [float(a) for a in range(-90, 91, 2)], "trials": 1000},
    ),
    ExperimentSpec(
        scenario_id="fig4-sector-N",
        description="K = 16 UEs uniform in a 30 deg sector of 100 m radius; UL sum SE vs "
                    "signature length N (G = K / N groups, p = 6).",
        network=_net(K=16),
        scenario=SECTOR,
        sweep_param="N",
        sweep_values=[1, 2, 4, 8, 16],
        arms=[MMIMO,
              {"name": "NOMA-random", "N": "sweep", "kind": "orthogonal", "assign": "random"},
              {"name": "NOMA-grouped", "N": "sweep", "kind": "orthogonal", "assign": "grouped"}],
        trials=100, drops=5, budget_s=120,
        full_scale={"trials": 500, "drops": 50},
    ),
    ExperimentSpec(
        scenario_id="fig4-sector-M",
        description="K = 16 UEs in a 30 deg sector; UL sum SE vs the number of BS antennas "
                    "(square planar arrays), N = 4.",
        network=_net(K=16),
        scenario=SECTOR,
        sweep_param="M",
        sweep_values=[16, 36, 64],
        arms=_nomas(4),
        trials=100, drops=5, budget_s=120,
        full_scale={"sweep_values": [16, 36, 64, 100, 144], "trials": 500, "drops": 50},
    ),
    ExperimentSpec(
        scenario_id="fig5-grouping",
        kind="grouping",
        description="Offline k-means grouping of 1000 UE positions in a 120 deg sector of "
                    "125 m radius; G = 8 groups, p = 6, 8x8 planar array.",
        network=_net(L=1, K=1000, tau_p=1),
        scenario={"drop": "sector", "half_angle": 60.0, "radius": 125.0,
                  "center_azimuth": 0.0},
        groups=8, p_dim=6, drops=1, budget_s=30,
    ),
    ExperimentSpec(
        scenario_id="fig6-clusters",
        description="Four circle clusters of radius 20 m per cell, N = K / 4 orthogonal "
                    "codes; UL and DL sum SE vs K.",
        network=_net(),
        scenario=CLUSTERS,
        sweep_param="K",
        sweep_values=[16, 32, 64],
        arms=_nomas("K/4"),
        links=["UL", "DL"],
        trials=200, drops=10, budget_s=420,
        full_scale={"sweep_values": [16, 32, 48, 64, 96, 128], "trials": 500, "drops": 50},
    ),
    ExperimentSpec(
        scenario_id="fig7-signatures",
        description="Cluster setup with N = 4: orthogonal (grouped), random +-1 and sparse "
                    "signatures; UL sum SE vs K.",
        network=_net(),
        scenario=CLUSTERS,
        sweep_param="K",
        sweep_values=[16, 32],
        arms=[MMIMO,
              {"name": "NOMA-orthogonal", "N": 4, "kind": "orthogonal", "assign": "grouped"},
              {"name": "NOMA-random", "N": 4, "kind": "random", "assign": "distinct"},
              {"name": "NOMA-sparse", "N": 4, "kind": "sparse", "assign": "distinct"}],
        trials=100, drops=5, budget_s=300,
        full_scale={"sweep_values": [16, 32, 64, 128], "trials": 500, "drops": 50},
    ),
    ExperimentSpec(
        scenario_id="fig8-pilots",
        description="K = 32 in four clusters, N = 8 orthogonal codes; UL sum SE vs the "
                    "number of orthogonal pilots (reused round-robin), tau_u fixed at 84.",
        network=_net(K=32, tau_u=84),
        scenario=CLUSTERS,
        sweep_param="tau_p",
        sweep_values=[1, 2, 4, 8, 16, 32],
        arms=[MMIMO, {"name": "NOMA-grouped", "N": 8, "kind": "orthogonal", "assign": "grouped"}],
        tau_rule="fixed-ul",
        trials=100, drops=10, budget_s=300,
        full_scale={"trials": 500, "drops": 50},
    ),
]


def _clean(spec):
    # drop None-valued dBm keys used to switch a field to watts
    spec.network = {k: v for k, v in spec.network.items() if v is not None}
    return spec


PRESETS = {s.scenario_id: _clean(s) for s in _PRESETS}


def preset_catalog() -> list[ExperimentSpec]:
    return list(PRESETS.values())


def get_preset(name: str) -> ExperimentSpec:
    try:
        return ExperimentSpec.from_dict(PRESETS[name].to_dict())
    except KeyError:
        raise KeyError(f"unknown preset {name!r}; available: {', '.join(PRESETS)}") from None
