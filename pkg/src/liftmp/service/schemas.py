"""Pydantic request/response models for the HTTP API.

All instance payloads travel as text in the package's file formats
(edge list for graphs, DIMACS for CNF), so the service stays free of
local-path coupling and any client can drive it.  Wall-clock fields are
null unless timing is requested, keeping default reports byte-stable
across runs with equal seeds.
"""

from __future__ import annotations

from typing import Literal, Optional

from pydantic import BaseModel, Field

ProblemKind = Literal["maxcut", "vertexcover", "max3sat"]
GenModel = Literal["er", "ba", "ws", "hk", "3sat"]
Method = Literal["pgd", "model", "greedy", "brute"]


class GenRequest(BaseModel):
    model: GenModel
    count: int = Field(default=1, ge=1, le=10000)
    seed: int = 0
    n: Optional[int] = None
    p: Optional[float] = None
    m: Optional[int] = None
    k: Optional[int] = None
    num_vars: Optional[int] = None
    num_clauses: Optional[int] = None


class GeneratedInstance(BaseModel):
    name: str
    format: Literal["edgelist", "dimacs"]
    text: str


class GenResponse(BaseModel):
    instances: list[GeneratedInstance]


class EmbeddingsPayload(BaseModel):
    rows: int
    rank: int
    data: list[float]


class SolverOptions(BaseModel):
    rank: int = Field(default=16, ge=1)
    iters: int = Field(default=2000, ge=0)
    rho: Optional[float] = None
    eta: Optional[float] = None  # None -> backtracking line search
    perturb: bool = False
    stop_tol: float = 1e-6


class RunRecord(BaseModel):
    instance: str
    method: str
    objective: float
    feasible: bool
    violation: float
    wall_ms: Optional[float] = None
    seed: int


class Aggregate(BaseModel):
    objective_mean: float
    objective_std: float
    count: int


class RunReport(BaseModel):
    records: list[RunRecord]
    aggregate: dict[str, Aggregate]  # keyed by method
    config: dict


class SolveRequest(BaseModel):
    problem: ProblemKind
    instance_text: str
    instance_name: str = "instance"
    solver: SolverOptions = SolverOptions()
    hyperplanes: int = Field(default=1000, ge=1)
    seed: int = 0
    local_search: bool = True
    model_checkpoint: Optional[dict] = None
    include_embeddings: bool = False
    timing: bool = False


class SolveDiagnostics(BaseModel):
    iterations: int
    final_loss: float
    violation: float
    stopped_on_tol: bool
    rounding_best: float
    rounding_mean: float
    rounding_min: float
    rounding_max: float


class SolveResponse(BaseModel):
    report: RunReport
    diagnostics: SolveDiagnostics
    assignment: list[float]
    embeddings: Optional[EmbeddingsPayload] = None


class CertifyRequest(BaseModel):
    instance_text: str
    instance_name: str = "instance"
    embeddings: Optional[EmbeddingsPayload] = None
    solve_first: bool = False
    solver: SolverOptions = SolverOptions()
    hyperplanes: int = Field(default=1000, ge=1)
    seed: int = 0
    include_duals: bool = False
    timing: bool = False


class CertificatePayload(BaseModel):
    bound: float
    lambda_min: float
    n: int
    edges: int
    wall_ms: Optional[float] = None
    experimental: bool = False
    dual_vars: Optional[list[float]] = None


class CertifyResponse(BaseModel):
    certificate: CertificatePayload
    best_cut: Optional[float] = None
    gap: Optional[float] = None


class DistributionSpec(BaseModel):
    model: GenModel
    n_min: int = 0
    n_max: int = 0
    p: float = 0.0
    m: int = 0
    k: int = 0
    num_vars: int = 0
    clauses_min: int = 0
    clauses_max: int = 0


class TrainRequest(BaseModel):
    problem: ProblemKind
    distribution: DistributionSpec
    steps: int = Field(ge=0)
    learning_rate: float = 0.001
    batch_size: int = Field(default=16, ge=1)
    val_frequency: int = Field(default=100, ge=1)
    val_size: int = Field(default=32, ge=1)
    val_hyperplanes: int = Field(default=100, ge=1)
    rho: Optional[float] = None
    rank: int = Field(default=16, ge=1)
    layers: int = Field(default=8, ge=1)
    init_noise: float = 0.01
    seed: int = 0
    include_history: bool = True


class TrainResponse(BaseModel):
    checkpoint: dict
    best_val_score: float
    history: list[dict] = []


class NamedInstance(BaseModel):
    name: str
    text: str


class BenchRequest(BaseModel):
    problem: ProblemKind
    instances: list[NamedInstance]
    methods: list[Method]
    solver: SolverOptions = SolverOptions()
    hyperplanes: int = Field(default=1000, ge=1)
    seed: int = 0
    local_search: bool = True
    model_checkpoint: Optional[dict] = None
    jobs: int = Field(default=1, ge=1)
    timing: bool = False


class BenchResponse(BaseModel):
    report: RunReport
    table: str
    ratios_to_brute: Optional[dict[str, float]] = None


class ErrorBody(BaseModel):
    error: str
    kind: str
