from __future__ import annotations

from dataclasses import dataclass
from datetime import datetime

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from aaisynth.domain import AgentRecord, EmbeddingDataset, InterviewTranscript
from aaisynth.embedding import embed_transcripts, split_by_domain
from aaisynth.gateway import Gateway
from aaisynth.interview import InterviewProtocol, run_interview
from aaisynth.mock import MockChatProvider, MockEmbedder, mock_human_transcripts
from aaisynth.personas import CohortSpec, build_cohort

settings.register_profile("repo", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("repo")

REFERENCE = datetime(2024, 6, 1, 12, 0, 0)
MEMORY_TAG = "mini"
ANSWER_TAG = "big"
MODEL_TAG = "gpt-4"


def mock_gateway(seed: int = 0) -> Gateway:
    return Gateway(
        lambda tag: MockChatProvider(seed),
        {MEMORY_TAG: MockEmbedder(384, seed), ANSWER_TAG: MockEmbedder(1536, seed)},
        sleep=lambda s: None,
    )


LEONARD = {
    "name": "Leonard Fitzgerald",
    "age": 45,
    "race": "Caucasian",
    "gender": "Male",
    "dob": "1976-03-14",
    "birthplace": "Place 567",
    "current_job": "Architect",
    "places_lived": "Place 567, Place 233, Place 899",
    "children": "2 sons, 1 daughter",
    "siblings": "1 brother, 2 sisters",
    "fathers_jobs": "Construction worker, Carpenter",
    "mothers_jobs": "Nurse, School teacher",
    "father_adjectives": "Hardworking, Strict, Impatient",
    "mother_adjectives": "Compassionate, Understanding, Overprotective",
}


@pytest.fixture
def leonard() -> dict:
    return dict(LEONARD)


@pytest.fixture
def gateway() -> Gateway:
    return mock_gateway()


@dataclass
class MockRun:
    agents: list[AgentRecord]
    transcripts: list[InterviewTranscript]
    human: list[InterviewTranscript]
    synthetic: EmbeddingDataset
    labeled: EmbeddingDataset
    unlabeled: EmbeddingDataset


@pytest.fixture(scope="session")
def mock_run() -> MockRun:
    """The 60-agent mock cohort, interviewed by one model, embedded with the human mock corpus."""
    gw = mock_gateway(0)
    agents = build_cohort(gw, CohortSpec(reference_timestamp=REFERENCE))
    protocol = InterviewProtocol.default()
    transcripts = [
        run_interview(a, protocol, gw, model_tag=MODEL_TAG, memory_embedder=gw.embedder(MEMORY_TAG)) for a in agents
    ]
    human = mock_human_transcripts(0)
    parts = split_by_domain(embed_transcripts(transcripts + human, gw.embedder(ANSWER_TAG)))
    return MockRun(
        agents,
        transcripts,
        human,
        parts[f"synthetic:{MODEL_TAG}"],
        parts["human_labeled"],
        parts["human_unlabeled"],
    )


def blobs(n: int = 150, dim: int = 10, seed: int = 0, spread: float = 0.5) -> tuple[np.ndarray, np.ndarray]:
    """Three well-separated Gaussian clusters, ``n`` points in total."""
    rng = np.random.default_rng(seed)
    centers = np.zeros((3, dim))
    centers[0, 0], centers[1, 1], centers[2, 2] = 4.0, 4.0, 4.0
    y = np.arange(n) % 3
    return centers[y] + spread * rng.standard_normal((n, dim)), y
