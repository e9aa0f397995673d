"""Command-line front end: a thin client of the HTTP service.

Every subcommand translates flags and local files into one API request,
sends it (to an in-process app by default, or to ``--server URL``), and
renders the JSON response.  All logic lives behind the API, so results
are identical whether the service runs locally or remotely.

Exit codes: 0 success, 1 runtime/numeric failure, 2 usage/parse failure.
"""

from __future__ import annotations

import argparse
import asyncio
import json
import sys
from pathlib import Path

import httpx

EXIT_OK = 0
EXIT_RUNTIME = 1
EXIT_USAGE = 2


class ServiceClient:
    """Synchronous facade over the async HTTP client."""

    def __init__(self, server: str | None):
        self.server = server

    def post(self, path: str, payload: dict) -> dict:
        return asyncio.run(self._post(path, payload))

    async def _post(self, path: str, payload: dict) -> dict:
        if self.server:
            transport = None
            base = self.server.rstrip("/")
        else:
            from .service.app import create_app

            transport = httpx.ASGITransport(app=create_app())
            base = "http://liftmp.internal"
        async with httpx.AsyncClient(transport=transport, base_url=base,
                                     timeout=None) as client:
            resp = await client.post(path, json=payload)
        if resp.status_code >= 400:
            try:
                body = resp.json()
                message = body.get("error", resp.text)
            except ValueError:
                message = resp.text
            raise ServiceError(message, usage=resp.status_code < 422)
        return resp.json()


class ServiceError(Exception):
    def __init__(self, message, usage: bool):
        super().__init__(message)
        self.usage = usage

    @property
    def exit_code(self) -> int:
        return EXIT_USAGE if self.usage else EXIT_RUNTIME


def _read_text(path: str) -> str:
    try:
        return Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ServiceError(f"cannot read {path}: {exc}", usage=True) from None


def _read_json(path: str) -> dict:
    try:
        return json.loads(_read_text(path))
    except json.JSONDecodeError as exc:
        raise ServiceError(f"bad JSON in {path}: {exc}", usage=True) from None


def _print_json(obj) -> None:
    print(json.dumps(obj, indent=2))


def _solver_options(args) -> dict:
    opts = {"rank": args.rank, "iters": args.iters, "stop_tol": args.stop_tol}
    if getattr(args, "rho", None) is not None:
        opts["rho"] = args.rho
    if getattr(args, "eta", None) is not None:
        opts["eta"] = args.eta
    if getattr(args, "perturb", False):
        opts["perturb"] = True
    return opts


def _add_solver_flags(p, iters_default=2000):
    p.add_argument("--rank", type=int, default=16)
    p.add_argument("--iters", type=int, default=iters_default)
    p.add_argument("--rho", type=float, default=None,
                   help="penalty weight (problem default if omitted)")
    p.add_argument("--eta", type=float, default=None,
                   help="fixed step size instead of backtracking")
    p.add_argument("--perturb", action="store_true",
                   help="enable stall-triggered Gaussian perturbation")
    p.add_argument("--stop-tol", type=float, default=1e-6, dest="stop_tol")


def cmd_gen(args, client: ServiceClient) -> int:
    payload = {"model": args.model, "count": args.count, "seed": args.seed}
    if args.model == "3sat":
        payload["num_vars"] = args.vars
        payload["num_clauses"] = args.clauses
    else:
        payload["n"] = args.n
        for key in ("p", "m", "k"):
            val = getattr(args, key, None)
            if val is not None:
                payload[key] = val
    resp = client.post("/gen", payload)
    outdir = Path(args.out)
    outdir.mkdir(parents=True, exist_ok=True)
    names = []
    for item in resp["instances"]:
        suffix = ".cnf" if item["format"] == "dimacs" else ".txt"
        path = outdir / (item["name"] + suffix)
        path.write_text(item["text"], encoding="utf-8")
        names.append(str(path))
    _print_json({"written": names})
    return EXIT_OK


def cmd_solve(args, client: ServiceClient) -> int:
    payload = {
        "problem": args.problem,
        "instance_text": _read_text(args.instance),
        "instance_name": Path(args.instance).stem,
        "solver": _solver_options(args),
        "hyperplanes": args.hyperplanes,
        "seed": args.seed,
        "local_search": not args.no_local_search,
        "timing": args.timing,
        "include_embeddings": args.save_embeddings is not None,
    }
    if args.model is not None:
        payload["model_checkpoint"] = _read_json(args.model)
    resp = client.post("/solve", payload)
    if args.save_embeddings is not None:
        Path(args.save_embeddings).write_text(
            json.dumps(resp.pop("embeddings")), encoding="utf-8")
    _print_json(resp)
    return EXIT_OK


def cmd_certify(args, client: ServiceClient) -> int:
    payload = {
        "instance_text": _read_text(args.instance),
        "instance_name": Path(args.instance).stem,
        "solve_first": args.solve_first,
        "solver": _solver_options(args),
        "hyperplanes": args.hyperplanes,
        "seed": args.seed,
        "include_duals": args.duals,
        "timing": args.timing,
    }
    if args.embeddings is not None:
        payload["embeddings"] = _read_json(args.embeddings)
    elif not args.solve_first:
        raise ServiceError("certify needs --embeddings or --solve-first",
                           usage=True)
    resp = client.post("/certify", payload)
    _print_json(resp)
    return EXIT_OK


def cmd_train(args, client: ServiceClient) -> int:
    dist = _distribution_from_args(args)
    payload = {
        "problem": args.problem,
        "distribution": dist,
        "steps": args.steps,
        "learning_rate": args.lr,
        "batch_size": args.batch,
        "val_frequency": args.val_freq,
        "val_size": args.val_size,
        "val_hyperplanes": args.val_hyperplanes,
        "rank": args.rank,
        "layers": args.layers,
        "init_noise": args.init_noise,
        "seed": args.seed,
        "include_history": True,
    }
    if args.rho is not None:
        payload["rho"] = args.rho
    resp = client.post("/train", payload)
    Path(args.out).write_text(json.dumps(resp["checkpoint"]) + "\n",
                              encoding="utf-8")
    if args.history:
        lines = "\n".join(json.dumps(h) for h in resp["history"])
        Path(args.history).write_text(lines + "\n", encoding="utf-8")
    _print_json({"checkpoint": args.out,
                 "best_val_score": resp["best_val_score"],
                 "steps": args.steps})
    return EXIT_OK


def cmd_bench(args, client: ServiceClient) -> int:
    directory = Path(args.instances)
    if not directory.is_dir():
        raise ServiceError(f"{args.instances} is not a directory", usage=True)
    suffix = ".cnf" if args.problem == "max3sat" else ".txt"
    files = sorted(directory.glob(f"*{suffix}"))
    if not files:
        raise ServiceError(f"no *{suffix} instances in {args.instances}",
                           usage=True)
    payload = {
        "problem": args.problem,
        "instances": [{"name": f.stem, "text": f.read_text(encoding="utf-8")}
                      for f in files],
        "methods": args.methods.split(","),
        "solver": _solver_options(args),
        "hyperplanes": args.hyperplanes,
        "seed": args.seed,
        "local_search": not args.no_local_search,
        "jobs": args.jobs,
        "timing": args.timing,
    }
    if args.model is not None:
        payload["model_checkpoint"] = _read_json(args.model)
    resp = client.post("/bench", payload)
    table = resp.pop("table")
    _print_json(resp)
    print(table, file=sys.stderr, end="")
    return EXIT_OK


def cmd_serve(args, client: ServiceClient) -> int:
    import uvicorn

    from .service.app import create_app

    uvicorn.run(create_app(), host=args.host, port=args.port,
                log_level="info")
    return EXIT_OK


def _distribution_from_args(args) -> dict:
    chosen = [name for name in ("er", "ba", "ws", "hk", "sat")
              if getattr(args, name, None) is not None]
    if len(chosen) != 1:
        raise ServiceError(
            "exactly one distribution flag (--er/--ba/--ws/--hk/--sat) "
            "is required", usage=True)
    name = chosen[0]
    vals = getattr(args, name)
    if name == "er":
        return {"model": "er", "n_min": int(vals[0]), "n_max": int(vals[1]),
                "p": float(vals[2])}
    if name == "ba":
        return {"model": "ba", "n_min": int(vals[0]), "n_max": int(vals[1]),
                "m": int(vals[2])}
    if name == "ws":
        return {"model": "ws", "n_min": int(vals[0]), "n_max": int(vals[1]),
                "k": int(vals[2]), "p": float(vals[3])}
    if name == "hk":
        return {"model": "hk", "n_min": int(vals[0]), "n_max": int(vals[1]),
                "m": int(vals[2]), "p": float(vals[3])}
    return {"model": "3sat", "num_vars": int(vals[0]),
            "clauses_min": int(vals[1]), "clauses_max": int(vals[2])}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="liftmp",
        description="Relaxation solver for max-cut, vertex cover, max-3-sat")
    parser.add_argument("--server", default=None,
                        help="URL of a running service (default: in-process)")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="generate instance files")
    p.add_argument("model", choices=["er", "ba", "ws", "hk", "3sat"])
    p.add_argument("--n", type=int, help="node count (graph models)")
    p.add_argument("--p", type=float, default=None)
    p.add_argument("--m", type=int, default=None)
    p.add_argument("--k", type=int, default=None)
    p.add_argument("--vars", type=int, default=None)
    p.add_argument("--clauses", type=int, default=None)
    p.add_argument("--count", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("-o", "--out", required=True)
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("solve", help="solve one instance and round")
    p.add_argument("problem", choices=["maxcut", "vertexcover", "max3sat"])
    p.add_argument("instance", help="edge-list or DIMACS file")
    _add_solver_flags(p)
    p.add_argument("--hyperplanes", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--model", default=None, help="model checkpoint file")
    p.add_argument("--no-local-search", action="store_true")
    p.add_argument("--save-embeddings", default=None, metavar="PATH")
    p.add_argument("--timing", action="store_true")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("certify", help="max-cut upper bound from embeddings")
    p.add_argument("instance", help="edge-list file")
    p.add_argument("--embeddings", default=None,
                   help="embedding checkpoint file")
    p.add_argument("--solve-first", action="store_true")
    _add_solver_flags(p)
    p.add_argument("--hyperplanes", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--duals", action="store_true")
    p.add_argument("--timing", action="store_true")
    p.set_defaults(func=cmd_certify)

    p = sub.add_parser("train", help="train layer matrices on a distribution")
    p.add_argument("problem", choices=["maxcut", "vertexcover", "max3sat"])
    p.add_argument("--er", nargs=3, metavar=("NMIN", "NMAX", "P"))
    p.add_argument("--ba", nargs=3, metavar=("NMIN", "NMAX", "M"))
    p.add_argument("--ws", nargs=4, metavar=("NMIN", "NMAX", "K", "P"))
    p.add_argument("--hk", nargs=4, metavar=("NMIN", "NMAX", "M", "P"))
    p.add_argument("--sat", nargs=3, metavar=("VARS", "CMIN", "CMAX"))
    p.add_argument("--steps", type=int, required=True)
    p.add_argument("--lr", type=float, default=0.001)
    p.add_argument("--batch", type=int, default=16)
    p.add_argument("--val-freq", type=int, default=100, dest="val_freq")
    p.add_argument("--val-size", type=int, default=32, dest="val_size")
    p.add_argument("--val-hyperplanes", type=int, default=100,
                   dest="val_hyperplanes")
    p.add_argument("--rho", type=float, default=None)
    p.add_argument("--rank", type=int, default=16)
    p.add_argument("--layers", type=int, default=8)
    p.add_argument("--init-noise", type=float, default=0.01,
                   dest="init_noise")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="checkpoint output path")
    p.add_argument("--history", default=None, help="history JSONL path")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("bench", help="compare methods over an instance dir")
    p.add_argument("problem", choices=["maxcut", "vertexcover", "max3sat"])
    p.add_argument("instances", help="directory of instance files")
    p.add_argument("--methods", default="pgd,greedy",
                   help="comma list from pgd,model,greedy,brute")
    _add_solver_flags(p)
    p.add_argument("--hyperplanes", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--model", default=None)
    p.add_argument("--no-local-search", action="store_true")
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--timing", action="store_true")
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("serve", help="run the HTTP service")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8714)
    p.set_defaults(func=cmd_serve)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    client = ServiceClient(args.server)
    try:
        return args.func(args, client)
    except ServiceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except httpx.HTTPError as exc:
        print(f"error: cannot reach service: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
