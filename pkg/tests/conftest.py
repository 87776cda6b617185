import json
import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from tutorhub.agents import AgentDraft, AgentRegistry
from tutorhub.curriculum import CurriculumService, GradeLevel
from tutorhub.identity import IdentityService, Role

DATA_DIR = Path(__file__).parent / "data"


class FakeClock:
    """Deterministic injectable time source."""

    def __init__(self, start: float = 1_700_000_000.0):
        self.now = start

    def __call__(self) -> float:
        return self.now

    def advance(self, seconds: float) -> None:
        self.now += seconds


@pytest.fixture(scope="session")
def fixture_document() -> str:
    return (DATA_DIR / "curriculum_fixture.json").read_text(encoding="utf-8")


@pytest.fixture(scope="session")
def fixture_records(fixture_document) -> list[dict]:
    return json.loads(fixture_document)


@pytest.fixture()
def corpus(fixture_document) -> CurriculumService:
    service = CurriculumService()
    summary = service.ingest(fixture_document)
    assert summary.item_count == 50 and summary.rejected_count == 0
    return service


@pytest.fixture(scope="session")
def fixture_records_with_ids(fixture_document) -> list[dict]:
    """The fixture records as the corpus stores them (generated ids filled in)."""
    service = CurriculumService()
    service.ingest(fixture_document)
    return [item.to_record() for item in service.index.items()]


@pytest.fixture()
def clock() -> FakeClock:
    return FakeClock()


@pytest.fixture()
def identity(clock) -> IdentityService:
    # low scrypt cost keeps the suite fast; production keeps the defaults
    return IdentityService(clock=clock, scrypt_n=2**11)


@pytest.fixture()
def teacher(identity):
    return identity.register("ama.teacher", "s3cret-ama", Role.TEACHER)


@pytest.fixture()
def student(identity):
    return identity.register("kofi.student", "s3cret-kofi", Role.STUDENT_TEACHER)


@pytest.fixture()
def admin(identity):
    return identity.bootstrap_admin("root.admin", "s3cret-root")


@pytest.fixture()
def registry(corpus, clock) -> AgentRegistry:
    return AgentRegistry(lambda: corpus.index, clock=clock)


@pytest.fixture()
def art_agent(registry, teacher):
    """A warm, reflective JHS art-education assistant."""
    return registry.create_agent(
        teacher,
        AgentDraft(
            display_name="Mr. Mensah",
            subject="Art Education",
            grade_level=GradeLevel.JHS,
            tone_descriptor="warm, reflective, rich in cultural references",
        ),
    )
