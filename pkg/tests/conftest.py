import pytest

from bladeqc import InspectionStore
from bladeqc.workflow import Arm

from fixtures_qc import build_conversion_job, build_productivity_job, find_job_id

CONVERSION_FIXTURE_ROWS = [(183, 178), (192, 184), (124, 124), (192, 184), (192, 184)]
CONVERSION_FIXTURE_SALT = "conv-fixture"

PRODUCTIVITY_FIXTURE_SALT = "prod-fixture"
# productivity fixture: totals divide exactly to the pinned dashboard targets
# control: 125 jobs, 1 picture each, 12720 ms QC1 / 5400 ms QC2, 1 miss total
# treatment: 1250 jobs, 12300 ms QC1 / 5160 ms QC2, 9 misses total
PRODUCTIVITY_FIXTURE_CONTROL = {"jobs": 125, "qc1_ms": 12720, "qc2_ms": 5400, "missed": 1}
PRODUCTIVITY_FIXTURE_TREATMENT = {"jobs": 1250, "qc1_ms": 12300, "qc2_ms": 5160, "missed": 9}


def build_conversion_fixture_store(data_dir=None) -> tuple[InspectionStore, list[str]]:
    store = InspectionStore(data_dir=data_dir, salt=CONVERSION_FIXTURE_SALT, clock=lambda: 0)
    job_ids = []
    for row, (n_annotations, n_from_clues) in enumerate(CONVERSION_FIXTURE_ROWS):
        job_id = find_job_id(f"t1r{row}", Arm.TREATMENT, CONVERSION_FIXTURE_SALT)
        build_conversion_job(store, job_id, n_annotations, n_from_clues)
        job_ids.append(job_id)
    return store, job_ids


def build_productivity_fixture_store(data_dir=None) -> InspectionStore:
    store = InspectionStore(data_dir=data_dir, salt=PRODUCTIVITY_FIXTURE_SALT, clock=lambda: 0)
    control = PRODUCTIVITY_FIXTURE_CONTROL
    for k in range(control["jobs"]):
        job_id = find_job_id(f"t2c{k:03d}", Arm.CONTROL, PRODUCTIVITY_FIXTURE_SALT)
        build_productivity_job(
            store, job_id, 1, control["qc1_ms"], control["qc2_ms"],
            n_missed=1 if k < control["missed"] else 0,
        )
    treatment = PRODUCTIVITY_FIXTURE_TREATMENT
    for k in range(treatment["jobs"]):
        job_id = find_job_id(f"t2t{k:04d}", Arm.TREATMENT, PRODUCTIVITY_FIXTURE_SALT)
        build_productivity_job(
            store, job_id, 1, treatment["qc1_ms"], treatment["qc2_ms"],
            n_missed=1 if k < treatment["missed"] else 0,
        )
    return store


@pytest.fixture(scope="session")
def conversion_fixture_store():
    return build_conversion_fixture_store()


@pytest.fixture(scope="session")
def productivity_fixture_store():
    return build_productivity_fixture_store()
