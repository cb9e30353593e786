"""
Desk-scale synthetic calibration data for the generic-switch case study.

Raw viral loads (ARNVIH) and creatinine clearances (CGFF) are drawn first and
discretized into ARN and CREA. Histories follow a known semester process so
that calibrated execution models can be checked against it.
"""

import logging

import numpy as np
import pandas as pd

from config.settings import MONTHS_PER_PERIOD
from data.discretizers import ARN_DISCRETIZER, CREA_DISCRETIZER, discretize_many
from data.models.dataset import MixedDataset
from data.models.scenario import TreatmentEntry, baseline_schema, ir_from_crea
from utils.seeding import make_rng

logger = logging.getLogger(__name__)

_DRUGS = ["ABC", "3TC", "AZT", "TDF", "FTC", "EFV", "NVP", "LPV", "ATV", "DRV", "RAL", "ETR"]

# Semester transition rows of the reference process
_ARN_ROWS = {0: [0.90, 0.08, 0.02], 1: [0.50, 0.40, 0.10], 2: [0.30, 0.30, 0.40]}
_CREA_ROWS = {1: [0.93, 0.06, 0.01], 2: [0.08, 0.88, 0.04], 3: [0.01, 0.10, 0.89]}
_CHAIN_ROWS = {
    "HEART": [[0.99, 0.01], [0.05, 0.95]],
    "DIAB": [[0.99, 0.01], [0.03, 0.97]],
    "VIHS": [[0.98, 0.02], [0.02, 0.98]],
}


def make_treatment_catalog(n_treatments: int = 10, seed: int = 0) -> list[TreatmentEntry]:
    """
    Treatments T01, T02, ... with tariffs per semester and branded marketing
    dates between 2003 and 2010; about two thirds have a generic.
    """
    rng = make_rng(seed)
    entries = []
    for k in range(n_treatments):
        drugs = rng.choice(_DRUGS, size=3, replace=False)
        entries.append(
            TreatmentEntry(
                treatment_id=f"T{k + 1:02d}",
                NAMET="+".join(sorted(str(d) for d in drugs)),
                MEDCOSTB=float(np.round(rng.uniform(2500.0, 6000.0), 2)),
                AMMT=float(2003.0 + np.round(rng.uniform(0.0, 7.0) * 2.0) / 2.0),
                has_generic=bool(k % 3 != 2),
            )
        )
    return entries


def make_hiv_baseline(
    n: int, treatment_ids: list[str], seed: int = 0, invert_ir_rule: bool = False
) -> MixedDataset:
    """Baseline cohort at the start date, every patient alive."""
    rng = make_rng(seed)
    age_years = np.clip(rng.normal(45.0, 10.0, n), 18.0, 85.0)
    vihd = np.round(12.0 * np.minimum(rng.gamma(3.0, 4.0, n), age_years - 15.0), 0)
    treatd = np.round(rng.uniform(0.0, 1.0, n) * np.minimum(vihd, 120.0), 0)

    arnvih = np.exp(rng.normal(3.0, 2.5, n))
    cgff = rng.normal(95.0, 25.0, n)
    arn = discretize_many(arnvih, ARN_DISCRETIZER)
    crea = discretize_many(cgff, CREA_DISCRETIZER)

    weights = np.linspace(2.0, 1.0, len(treatment_ids))
    frame = pd.DataFrame(
        {
            "SEX": (rng.random(n) < 0.7).astype(int).astype(str),
            "AGE": np.round(12.0 * age_years, 0),
            "BC": (rng.random(n) < 0.1).astype(int).astype(str),
            "CONTA": (rng.random(n) < 0.4).astype(int).astype(str),
            "VIHS": (rng.random(n) < 0.25).astype(int).astype(str),
            "VIHD": vihd,
            "TREATD": treatd,
            "ARN": arn,
            "HEART": (rng.random(n) < 0.05).astype(int).astype(str),
            "DIAB": (rng.random(n) < 0.06).astype(int).astype(str),
            "IR": ir_from_crea(crea.astype(int), invert_ir_rule).astype(str),
            "CREA": crea,
            "DEATH": np.full(n, "1"),
            "TREAT": rng.choice(treatment_ids, size=n, p=weights / weights.sum()),
        }
    )
    return MixedDataset(baseline_schema(list(treatment_ids)), frame)


def _draw(rows: np.ndarray, u: np.ndarray) -> np.ndarray:
    cum = np.cumsum(rows, axis=1)
    cum[:, -1] = 1.0
    return np.minimum((u[:, None] >= cum).sum(axis=1), rows.shape[1] - 1)


def _tilt(base: dict[int, list[float]], current: np.ndarray, shift: np.ndarray) -> np.ndarray:
    """Rows of ``base`` with odds of higher states scaled by exp(shift * rank)."""
    rows = np.array([base[int(c)] for c in current]) * np.exp(shift[:, None] * np.arange(3))
    return rows / rows.sum(axis=1, keepdims=True)


def make_hiv_histories(
    n_patients: int,
    n_periods: int,
    treatment_ids: list[str],
    seed: int = 0,
) -> pd.DataFrame:
    """
    Semester histories, one row per patient and period (PERIOD 0, 1, ...).

    A patient who dies keeps a last row with DEATH = 0 and no row afterwards.
    """
    rng = make_rng(seed)
    base = make_hiv_baseline(n_patients, treatment_ids, seed=int(rng.integers(2**31)))
    state = {
        name: base.frame[name].astype(str).astype(float).to_numpy()
        for name in base.names
        if name != "TREAT"
    }
    treat = base.frame["TREAT"].astype(str).to_numpy(dtype=object)
    ids = np.asarray(treatment_ids, dtype=object)

    records = []
    active = np.ones(n_patients, dtype=bool)
    for period in range(n_periods):
        rows = np.flatnonzero(active)
        snapshot = pd.DataFrame({k: v[rows] for k, v in state.items()})
        snapshot.insert(0, "PERIOD", period)
        snapshot.insert(0, "PATIENT", rows)
        snapshot["TREAT"] = treat[rows]
        records.append(snapshot)
        active &= state["DEATH"] == 1
        rows = np.flatnonzero(active)
        if rows.size == 0 or period == n_periods - 1:
            break

        now = {k: v[rows].copy() for k, v in state.items()}
        m = rows.size
        for name, matrix in _CHAIN_ROWS.items():
            state[name][rows] = _draw(np.asarray(matrix)[now[name].astype(int)], rng.random(m))

        arn_shift = 0.6 * now["VIHS"] - 0.004 * now["TREATD"]
        arn_next = _draw(_tilt(_ARN_ROWS, now["ARN"], arn_shift), rng.random(m))
        age_years = now["AGE"] / 12.0
        crea_shift = 0.03 * (age_years - 45.0) + 0.3 * now["HEART"] + 0.2 * (arn_next == 2)
        crea_next = _draw(_tilt(_CREA_ROWS, now["CREA"], crea_shift), rng.random(m)) + 1
        state["ARN"][rows] = arn_next
        state["CREA"][rows] = crea_next
        state["IR"][rows] = ir_from_crea(crea_next)

        death = 0.005 + 0.01 * now["VIHS"] + 0.01 * (arn_next == 2)
        state["DEATH"][rows] = np.where(rng.random(m) < death, 0.0, 1.0)

        p_switch = np.where(now["TREATD"] + MONTHS_PER_PERIOD < 12, 0.10, 0.04)
        p_switch = p_switch + 0.06 * (arn_next == 2)
        switched = rng.random(m) < p_switch
        for i in np.flatnonzero(switched):
            others = ids[ids != treat[rows[i]]]
            treat[rows[i]] = others[rng.integers(others.size)]
        state["TREATD"][rows] = np.where(switched, 0.0, now["TREATD"] + MONTHS_PER_PERIOD)
        state["AGE"][rows] = now["AGE"] + MONTHS_PER_PERIOD
        state["VIHD"][rows] = now["VIHD"] + MONTHS_PER_PERIOD

    histories = pd.concat(records, ignore_index=True)
    for name in ["SEX", "BC", "CONTA", "VIHS", "ARN", "HEART", "DIAB", "IR", "CREA", "DEATH"]:
        histories[name] = histories[name].astype(np.int64)
    logger.info(f"✅ Generated {len(histories)} history rows for {n_patients} patients")
    return histories
