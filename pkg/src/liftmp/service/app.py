"""FastAPI service wrapping the core package.

The service is stateless: every request carries its instance text, its
seed, and all options, and every response is a pure function of the
request, so identical requests produce identical reports.  The CLI is a
thin client of this API; it can mount the app in-process or talk to a
running server.
"""

from __future__ import annotations

import time
from concurrent.futures import ThreadPoolExecutor

import numpy as np
from fastapi import FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse

from .. import __version__
from ..certify import maxcut_certificate
from ..embeddings import embeddings_from_dict, embeddings_to_dict, init_uniform_sphere
from ..errors import (CertifyError, CheckpointError, InvalidInstanceError,
                      LiftmpError, NumericError, ParseError, ShapeError,
                      TooLargeError, TrainError)
from ..instances import (gen_ba, gen_er, gen_hk, gen_random_3sat, gen_ws,
                         parse_dimacs_cnf, parse_edge_list, serialize_dimacs,
                         serialize_edge_list)
from ..model import (InstanceDistribution, Model, TrainConfig, forward,
                     model_from_dict, model_init, model_to_dict, train)
from ..problems import MaxCutProblem, make_problem
from ..rng import Rng
from ..rounding import (best_of_rounds, brute_force, greedy_maxcut, greedy_vc,
                        local_search_cut)
from ..solver import PERTURBED_DEFAULTS, SolverConfig, solve
from . import schemas as S

USAGE_ERRORS = (InvalidInstanceError, ParseError, CheckpointError,
                TooLargeError, ShapeError)
RUNTIME_ERRORS = (NumericError, CertifyError, TrainError)


def _parse_instance(kind: str, text: str):
    if kind == "max3sat":
        return parse_dimacs_cnf(text)
    return parse_edge_list(text)


def _solver_config(opts: S.SolverOptions, seed: int) -> SolverConfig:
    noise = PERTURBED_DEFAULTS if opts.perturb else {}
    return SolverConfig(
        max_iters=opts.iters,
        step="backtracking" if opts.eta is None else opts.eta,
        stop_tol=opts.stop_tol,
        seed=seed,
        **noise,
    )


def _embed_and_round(problem, opts: S.SolverOptions, rng: Rng, k: int,
                     model: Model | None, local_search: bool):
    """Shared solve -> round -> post-process pipeline."""
    rank = model.rank if model is not None else opts.rank
    V0 = init_uniform_sphere(problem.num_rows, rank, rng.split("init"))
    if model is not None:
        V = forward(model, problem, V0)
        iterations = model.layers
        stopped = False
    else:
        res = solve(problem, V0, _solver_config(opts, rng.split("solver").seed))
        V = res.embeddings
        iterations = res.iterations
        stopped = res.stopped_on_tol
    rounding = best_of_rounds(problem, V, k, rng.split("hyperplanes"))
    x = np.asarray(rounding.best_assignment)
    if problem.kind == "maxcut" and local_search:
        x = local_search_cut(problem.graph, x)
    rep = problem.evaluate(x)
    diag = S.SolveDiagnostics(
        iterations=iterations,
        final_loss=problem.loss(V),
        violation=problem.violation(V),
        stopped_on_tol=stopped,
        rounding_best=rounding.best_objective,
        rounding_mean=rounding.objective_mean,
        rounding_min=rounding.objective_min,
        rounding_max=rounding.objective_max,
    )
    return V, x, rep, diag


def _aggregate(records):
    out = {}
    by_method = {}
    for r in records:
        by_method.setdefault(r.method, []).append(r.objective)
    for method, vals in by_method.items():
        arr = np.asarray(vals)
        out[method] = S.Aggregate(objective_mean=float(arr.mean()),
                                  objective_std=float(arr.std()),
                                  count=len(vals))
    return out


def _load_model_checkpoint(payload: dict | None) -> Model | None:
    if payload is None:
        return None
    return model_from_dict(payload)


def _bench_methods_for_instance(req: S.BenchRequest, named: S.NamedInstance,
                                index: int, model: Model | None):
    instance = _parse_instance(req.problem, named.text)
    problem = make_problem(req.problem, instance, req.solver.rho)
    irng = Rng(req.seed).split(("instance", index))
    records = []
    for method in req.methods:
        t0 = time.perf_counter()
        violation = 0.0
        if method in ("pgd", "model"):
            mdl = model if method == "model" else None
            if method == "model" and mdl is None:
                raise InvalidInstanceError(
                    "bench method 'model' needs a model checkpoint")
            V, x, rep, diag = _embed_and_round(
                problem, req.solver, irng.split(method), req.hyperplanes,
                mdl, req.local_search)
            value, feasible, violation = rep.value, rep.feasible, diag.violation
        elif method == "greedy":
            if problem.kind == "maxcut":
                x = greedy_maxcut(problem.graph, irng.split("greedy"))
            elif problem.kind == "vertexcover":
                x = greedy_vc(problem.graph)
            else:
                raise InvalidInstanceError(
                    "greedy baseline applies to maxcut and vertexcover only")
            rep = problem.evaluate(x)
            value, feasible = rep.value, rep.feasible
        else:  # brute
            _, value = brute_force(problem)
            feasible = True
        records.append(S.RunRecord(
            instance=named.name, method=method, objective=float(value),
            feasible=bool(feasible), violation=float(violation),
            wall_ms=(time.perf_counter() - t0) * 1e3 if req.timing else None,
            seed=irng.seed))
    return records


def _render_table(records, methods, instances):
    value = {(r.instance, r.method): r.objective for r in records}
    headers = ["instance"] + list(methods)
    rows = []
    for name in instances:
        rows.append([name] + [f"{value[(name, m)]:.3f}" for m in methods])
    means = []
    for m in methods:
        vals = [value[(name, m)] for name in instances]
        means.append(f"{np.mean(vals):.3f}")
    rows.append(["mean"] + means)
    widths = [max(len(str(row[i])) for row in [headers] + rows)
              for i in range(len(headers))]
    lines = ["  ".join(str(c).ljust(w) for c, w in zip(row, widths)).rstrip()
             for row in [headers] + rows]
    return "\n".join(lines) + "\n"


def create_app() -> FastAPI:
    app = FastAPI(title="liftmp", version=__version__,
                  description="Low-rank relaxation solver service")

    @app.exception_handler(RequestValidationError)
    async def _validation_handler(request: Request, exc):
        return JSONResponse(status_code=400, content={
            "error": str(exc), "kind": "validation"})

    @app.exception_handler(LiftmpError)
    async def _liftmp_handler(request: Request, exc):
        status = 400 if isinstance(exc, USAGE_ERRORS) else 422
        return JSONResponse(status_code=status, content={
            "error": str(exc), "kind": type(exc).__name__})

    @app.get("/health")
    def health():
        return {"status": "ok", "version": __version__}

    @app.post("/gen", response_model=S.GenResponse)
    def gen(req: S.GenRequest) -> S.GenResponse:
        out = []
        for i in range(req.count):
            rng = Rng(req.seed).split(("gen", i))
            name = f"{req.model}-{req.seed}-{i:04d}"
            if req.model == "3sat":
                if req.num_vars is None or req.num_clauses is None:
                    raise InvalidInstanceError(
                        "3sat needs num_vars and num_clauses")
                text = serialize_dimacs(
                    gen_random_3sat(req.num_vars, req.num_clauses, rng))
                fmt = "dimacs"
            else:
                if req.n is None:
                    raise InvalidInstanceError("graph models need n")
                if req.model == "er":
                    g = gen_er(req.n, 0.15 if req.p is None else req.p, rng)
                elif req.model == "ba":
                    g = gen_ba(req.n, 4 if req.m is None else req.m, rng)
                elif req.model == "ws":
                    g = gen_ws(req.n, 4 if req.k is None else req.k,
                               0.25 if req.p is None else req.p, rng)
                else:
                    g = gen_hk(req.n, 4 if req.m is None else req.m,
                               0.25 if req.p is None else req.p, rng)
                text = serialize_edge_list(g)
                fmt = "edgelist"
            out.append(S.GeneratedInstance(name=name, format=fmt, text=text))
        return S.GenResponse(instances=out)

    @app.post("/solve", response_model=S.SolveResponse,
              response_model_exclude_none=True)
    def solve_endpoint(req: S.SolveRequest) -> S.SolveResponse:
        t0 = time.perf_counter()
        instance = _parse_instance(req.problem, req.instance_text)
        problem = make_problem(req.problem, instance, req.solver.rho)
        model = _load_model_checkpoint(req.model_checkpoint)
        rng = Rng(req.seed)
        V, x, rep, diag = _embed_and_round(
            problem, req.solver, rng, req.hyperplanes, model, req.local_search)
        record = S.RunRecord(
            instance=req.instance_name,
            method="model" if model is not None else "pgd",
            objective=rep.value, feasible=rep.feasible,
            violation=diag.violation,
            wall_ms=(time.perf_counter() - t0) * 1e3 if req.timing else None,
            seed=req.seed)
        report = S.RunReport(
            records=[record], aggregate=_aggregate([record]),
            config=req.model_dump(exclude={"instance_text",
                                           "model_checkpoint"}))
        return S.SolveResponse(
            report=report, diagnostics=diag,
            assignment=[float(v) for v in x],
            embeddings=(S.EmbeddingsPayload(**embeddings_to_dict(V))
                        if req.include_embeddings else None))

    @app.post("/certify", response_model=S.CertifyResponse,
              response_model_exclude_none=True)
    def certify_endpoint(req: S.CertifyRequest) -> S.CertifyResponse:
        graph = parse_edge_list(req.instance_text)
        problem = MaxCutProblem(graph)
        best_cut = None
        if req.solve_first:
            rng = Rng(req.seed)
            V, x, rep, diag = _embed_and_round(
                problem, req.solver, rng, req.hyperplanes, None, True)
            best_cut = rep.value
        elif req.embeddings is not None:
            V = embeddings_from_dict(req.embeddings.model_dump())
            if V.shape[0] != graph.num_nodes:
                raise ShapeError(
                    f"graph has {graph.num_nodes} nodes but embeddings have "
                    f"{V.shape[0]} rows")
        else:
            raise InvalidInstanceError(
                "certify needs embeddings or solve_first=true")
        cert = maxcut_certificate(graph, V)
        payload = S.CertificatePayload(
            bound=cert.bound, lambda_min=cert.lambda_min, n=cert.n,
            edges=cert.edges,
            wall_ms=cert.wall_ms if req.timing else None,
            experimental=cert.experimental,
            dual_vars=list(cert.dual_vars) if req.include_duals else None)
        gap = None
        if best_cut is not None and best_cut > 0:
            gap = (cert.bound - best_cut) / best_cut
        return S.CertifyResponse(certificate=payload, best_cut=best_cut,
                                 gap=gap)

    @app.post("/train", response_model=S.TrainResponse)
    def train_endpoint(req: S.TrainRequest) -> S.TrainResponse:
        dist = InstanceDistribution(**req.distribution.model_dump())
        model = model_init(req.rank, req.layers, req.seed,
                           problem_kind=req.problem,
                           noise_scale=req.init_noise)
        config = TrainConfig(
            distribution=dist, steps=req.steps,
            learning_rate=req.learning_rate, batch_size=req.batch_size,
            val_frequency=req.val_frequency, val_size=req.val_size,
            val_hyperplanes=req.val_hyperplanes, rho=req.rho, seed=req.seed)
        best, history = train(model, config)
        return S.TrainResponse(
            checkpoint=model_to_dict(best),
            best_val_score=float(best.metadata.get("best_val_score")),
            history=history if req.include_history else [])

    @app.post("/bench", response_model=S.BenchResponse,
              response_model_exclude_none=True)
    def bench_endpoint(req: S.BenchRequest) -> S.BenchResponse:
        if not req.instances:
            raise InvalidInstanceError("no instances to benchmark")
        if not req.methods:
            raise InvalidInstanceError("no methods requested")
        model = _load_model_checkpoint(req.model_checkpoint)

        def run_one(i):
            return _bench_methods_for_instance(req, req.instances[i], i, model)

        if req.jobs > 1:
            with ThreadPoolExecutor(max_workers=req.jobs) as pool:
                per_instance = list(pool.map(run_one, range(len(req.instances))))
        else:
            per_instance = [run_one(i) for i in range(len(req.instances))]
        records = [r for group in per_instance for r in group]
        names = [ni.name for ni in req.instances]
        table = _render_table(records, req.methods, names)
        ratios = None
        if "brute" in req.methods:
            value = {(r.instance, r.method): r.objective for r in records}
            ratios = {}
            for m in req.methods:
                if m == "brute":
                    continue
                rs = [value[(n, m)] / value[(n, "brute")]
                      for n in names if value[(n, "brute")] != 0]
                if rs:
                    ratios[m] = float(np.mean(rs))
        report = S.RunReport(
            records=records, aggregate=_aggregate(records),
            config=req.model_dump(exclude={"instances", "model_checkpoint"}))
        return S.BenchResponse(report=report, table=table,
                               ratios_to_brute=ratios)

    return app
