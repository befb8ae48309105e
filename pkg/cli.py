"""
Gurarii Toolkit - Command Line Front End

Every operation as a subcommand with exact text I/O. Negative mathematical
results (gap certificates, refutations) are payload and exit 0; exit codes
2, 3 and 4 report invalid input, exhausted precision and violated
hypotheses; 1 is an internal error.
"""

import argparse
import json
import sys
from dataclasses import replace
from typing import Any, List, Optional, Tuple

from rich.console import Console
from rich.table import Table
from rich.text import Text

from codec import ExactCodec, certificate_to_json, dumps, to_plain
from config import DEFAULT_CONFIG
from errors import ExitCode, GurariiError, InvalidInput, NoGap
from gurarii import (
    Ambient, CosetRegistry, check_perturbation, classify, disposition_extend,
    embed_into_Eu, epsilon_isometry, isometric_eq, maximal_orthogonal_split,
    nonexistence_certificate, patch_isometry, shrinking_balls,
)
from logging_system import LogAction, get_logger, reset_logger
from magnitude import ONE
from space import (
    LinearMap, Subspace, Vector, WeightedSpace, certify_isometry, distance,
    extend_base, norm, operator_norm_attained, orthogonalize, t_defect,
)
from verify import SUITE_NAMES, SuiteContext, SuiteRunner


# (kind, body, predicate holds, one-line detail)
Outcome = Tuple[str, Any, bool, str]


class CommandContext:
    """Parsed flags plus the codec that loads the input files"""

    def __init__(self, args: argparse.Namespace):
        self.args = args
        self.codec = ExactCodec()
        self.overrides = {
            "backend": args.backend,
            "prime": args.prime,
            "tail_order": args.tail_order,
        }
        self._spaces = {}

    @property
    def field(self):
        """Field of the first space loaded, for certificates and the ledger"""
        return next(iter(self._spaces.values())).field if self._spaces else None

    def _path(self, flag: str) -> str:
        path = getattr(self.args, flag.replace("-", "_"), None)
        if path is None:
            raise InvalidInput(f"--{flag} is required for {self.args.command}")
        return path

    def space(self, flag: str = "space") -> WeightedSpace:
        if flag not in self._spaces:
            obj = self.codec.load_json_file(self._path(flag))
            self._spaces[flag] = self.codec.load_space(obj, self.overrides)
        return self._spaces[flag]

    def vectors(self, space: WeightedSpace, flag: str = "vectors") -> List[Vector]:
        return self.codec.load_vectors(space, self.codec.load_json_file(self._path(flag)))

    def subspace(self, space: WeightedSpace, flag: str = "subspace") -> Subspace:
        """The --subspace span, or the whole space when the flag is absent"""
        if getattr(self.args, flag, None) is None:
            return space.as_subspace()
        return self.codec.load_subspace(space, self.codec.load_json_file(self._path(flag)))

    def linear_map(self, domain: WeightedSpace, codomain: WeightedSpace, flag: str = "map") -> LinearMap:
        return self.codec.load_map(domain, codomain, self.codec.load_json_file(self._path(flag)))

    def registry(self, space: WeightedSpace) -> CosetRegistry:
        return CosetRegistry(space.field.value_group, self.args.r_value)


# ==================== Subcommands ====================

def cmd_norm(ctx: CommandContext) -> Outcome:
    space = ctx.space()
    rows = [{"vector": v, "norm": norm(v)} for v in ctx.vectors(space)]
    return "Norms", {"norms": rows}, True, f"{len(rows)} vectors"


def cmd_orth(ctx: CommandContext) -> Outcome:
    echelon = orthogonalize(ctx.vectors(ctx.space()))
    certificate = t_defect(echelon.base) if echelon.base else None
    holds = certificate is None or certificate.is_orthogonal
    body = {"echelon": echelon, "defect": certificate.level if certificate else ONE}
    return "EchelonForm", body, holds, f"{len(echelon.base)} base vectors"


def cmd_dist(ctx: CommandContext) -> Outcome:
    space = ctx.space()
    D = ctx.subspace(space)
    rows = []
    for v in ctx.vectors(space):
        value, witness = distance(v, D)
        rows.append({"vector": v, "distance": value, "witness": witness})
    return "Distances", {"subspace_dim": D.dim, "distances": rows}, True, f"dim D = {D.dim}"


def cmd_defect(ctx: CommandContext) -> Outcome:
    certificate = t_defect(ctx.vectors(ctx.space()))
    return "OrthoCertificate", certificate, certificate.is_orthogonal, f"t* = {certificate.level}"


def cmd_extend_base(ctx: CommandContext) -> Outcome:
    space = ctx.space()
    t = ctx.args.t_value or ONE
    E = ctx.subspace(space) if ctx.args.subspace else space
    result = extend_base(ctx.vectors(space), E, t)
    return "ExtendedBase", result, True, f"{len(result.vectors)} vectors at level {result.certificate.level}"


def cmd_opnorm(ctx: CommandContext) -> Outcome:
    L = ctx.linear_map(ctx.space(), ctx.space("space2"))
    value, witness = operator_norm_attained(L)
    return "OperatorNorm", {"norm": value, "witness": witness}, True, f"||L|| = {value}"


def cmd_certify_isometry(ctx: CommandContext) -> Outcome:
    certificate = certify_isometry(ctx.linear_map(ctx.space(), ctx.space("space2")))
    return "IsometryCertificate", certificate, certificate.holds, certificate.reason or "isometry"


def cmd_eps_iso(ctx: CommandContext) -> Outcome:
    stage = ctx.space()
    i = ctx.linear_map(stage, ctx.space("space2"))
    X = ctx.subspace(stage) if ctx.args.subspace else i.domain
    A = Ambient(stage, ctx.registry(stage))
    report = epsilon_isometry(A, X, i, ctx.args.eps_value, samples=ctx.args.samples, seed=ctx.args.seed)
    holds = report.bounds_hold and report.retraction_holds
    return "EpsIsometryReport", report, holds, f"eps {report.epsilon}, t {report.t}"


def cmd_certify_gap(ctx: CommandContext) -> Outcome:
    if ctx.args.s_value is None:
        raise InvalidInput("--s is required for certify-gap")
    E = ctx.space()
    try:
        certificate = nonexistence_certificate(E, ctx.args.s_value, ctx.args.eps_value)
    except NoGap as e:
        body = {"gap": None, "blocking_value": e.witness, "reason": str(e)}
        return "NoGap", body, False, str(e)
    return "GapCertificate", certificate, certificate.recheck(), f"gap ({certificate.gap[0]}, {certificate.gap[1]})"


def cmd_patch(ctx: CommandContext) -> Outcome:
    Y, G = ctx.space(), ctx.space("space2")
    result = patch_isometry(ctx.linear_map(Y, G), ctx.linear_map(Y, G, "map2"))
    holds = result.certificate.holds and result.restriction_holds
    return "PatchResult", result, holds, f"||j - f|X|| = {result.t}"


def cmd_split(ctx: CommandContext) -> Outcome:
    space = ctx.space()
    Y = ctx.subspace(space)
    X = Subspace(space, ctx.vectors(space))
    result = maximal_orthogonal_split(Y, X)
    return "SplitResult", result, result.verdict.orthogonal, f"m_X = {result.m_x}, dim Y = {len(result.u)}"


def cmd_perturb_check(ctx: CommandContext) -> Outcome:
    space = ctx.space()
    t = ctx.args.t_value or ONE
    verdict = check_perturbation(ctx.vectors(space), ctx.vectors(space, "vectors2"), t)
    detail = "certified" if verdict.certified else f"hypothesis fails at {verdict.hypothesis_failed}"
    return "PerturbationVerdict", verdict, verdict.certified, detail


def cmd_embed_eu(ctx: CommandContext) -> Outcome:
    space = ctx.space()
    E = ctx.subspace(space)
    A = Ambient(WeightedSpace(space.field, ()), ctx.registry(space))
    result = embed_into_Eu(E, A.registry, A)
    return "EmbeddingResult", result, result.certificate.holds, f"indices {list(result.indices)}"


def cmd_extend(ctx: CommandContext) -> Outcome:
    stage = ctx.space()
    j = ctx.linear_map(stage, ctx.space("space2"))
    X = ctx.subspace(stage) if ctx.args.subspace else j.domain
    zs = ctx.vectors(stage, "vectors2") if ctx.args.vectors2 else None
    A = Ambient(stage, ctx.registry(stage))
    result = disposition_extend(A, X, j, mode=ctx.args.mode, zs=zs, t=ctx.args.t_value)
    holds = result.certificate.holds and result.retraction_holds
    return "DispositionResult", result, holds, f"{result.mode}: stage dim {result.stage.dim}"


def cmd_classify(ctx: CommandContext) -> Outcome:
    space = ctx.space()
    E = ctx.subspace(space)
    if ctx.args.space2 is None:
        fingerprint = classify(E)
        return "Fingerprint", fingerprint, True, str(fingerprint)
    comparison = isometric_eq(E, ctx.space("space2"))
    detail = "isometric" if comparison.isometric else f"obstruction {comparison.obstruction}"
    return "IsometryComparison", comparison, comparison.isometric, detail


def cmd_demo(ctx: CommandContext) -> Outcome:
    f = None
    if ctx.args.prime is not None:
        f = ctx.codec.load_field({}, ctx.overrides)
    report = shrinking_balls(ctx.args.n, f=f)
    body = {**to_plain(report), "all_passed": report.all_passed}
    return "BallsReport", body, report.all_passed, f"N = {ctx.args.n}"


def cmd_verify(ctx: CommandContext) -> Outcome:
    args = ctx.args
    logger = get_logger()
    if not args.json:
        logger.print_banner()
    runner = SuiteRunner(workers=args.workers, quiet=args.json, ctx=SuiteContext(eps_samples=args.samples))
    report = runner.run_suite(args.suite, args.seed, args.cases)
    with open(args.report, "w") as f:
        json.dump(report, f, indent=2)
    logger.log_info(f"report written to {args.report}")
    if report["failed"]:
        logger.log_warning(f"{report['failed']} cases failed; see the failures in {args.report}")
    if not args.json:
        runner.print_summary()
        errors = report["errors"]
        logger.print_stats(report["passed"], report["failed"] - errors, errors)
    return "VerifyReport", report, report["failed"] == 0, f"{report['passed']} passed, {report['failed']} failed"


COMMANDS = {
    "norm": (cmd_norm, "Weighted sup-norms of vectors"),
    "orth": (cmd_orth, "Triangular echelon orthogonalization"),
    "dist": (cmd_dist, "Distance of vectors to a subspace, with an attaining point"),
    "defect": (cmd_defect, "Exact orthogonality defect t* of a list of vectors"),
    "extend-base": (cmd_extend_base, "Extend a sqrt(t)-orthogonal list to a t-orthogonal base"),
    "opnorm": (cmd_opnorm, "Operator norm of a linear map"),
    "certify-isometry": (cmd_certify_isometry, "Certify or refute that a map is an isometry"),
    "eps-iso": (cmd_eps_iso, "Synthesize an epsilon-isometry inverting i on X"),
    "certify-gap": (cmd_certify_gap, "Value-set gap certificate against epsilon-isometries"),
    "patch": (cmd_patch, "Patch an isometry f onto j over X"),
    "split": (cmd_split, "Orthogonal base of Y whose head spans X"),
    "perturb-check": (cmd_perturb_check, "Check that a small perturbation keeps t-orthogonality"),
    "embed-eu": (cmd_embed_eu, "Embed a space into the coset-indexed universal stage"),
    "extend": (cmd_extend, "Extend the ambient stage so an embedding j comes back isometrically"),
    "classify": (cmd_classify, "Coset fingerprint; with --space2 decide isometry"),
    "demo": (cmd_demo, "Demonstrations (shrinking-balls)"),
    "verify": (cmd_verify, "Run property suites"),
}


# ==================== Argument handling ====================

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--prime", type=int, help="Residue prime p (overrides the space files)")
    common.add_argument("--backend", choices=["padic", "hahn"], help="Field backend")
    common.add_argument("--tail-order", help="Hahn relative truncation order (rational)")
    common.add_argument("--epsilon", default=str(DEFAULT_CONFIG.construction.default_epsilon),
                        help="Epsilon in (0, 1) as a rational")
    common.add_argument("--t", help="Orthogonality level t in (0, 1] as a magnitude")
    common.add_argument("--r", help="Registry bound r in (0, 1) as a magnitude")
    common.add_argument("--s", help="s1 of certify-gap as a magnitude")
    common.add_argument("--seed", type=int, default=0, help="Master seed")
    common.add_argument("--cases", type=int, default=10, help="Cases per suite")
    common.add_argument("--samples", type=int, default=DEFAULT_CONFIG.construction.eps_samples,
                        help="Random vectors checked by eps-iso")
    common.add_argument("--workers", type=int, default=DEFAULT_CONFIG.verify.workers,
                        help="Parallel suite workers")
    common.add_argument("--json", action="store_true", help="Print the certificate as JSON")
    common.add_argument("--ledger", metavar="PATH", help="Append certificates to a ledger (CSV, or JSON lines for .jsonl)")
    common.add_argument("--verbose", action="store_true", help="Show codec statistics")
    common.add_argument("--space", metavar="FILE", help="Space file")
    common.add_argument("--space2", metavar="FILE", help="Second space file (codomain / comparison)")
    common.add_argument("--target", metavar="FILE", help="Target space file (alias of --space2)")
    common.add_argument("--subspace", metavar="FILE", help="Subspace file {\"span\": [...]}")
    common.add_argument("--vectors", metavar="FILE", help="Vectors file")
    common.add_argument("--vectors2", metavar="FILE", help="Second vectors file")
    common.add_argument("--map", metavar="FILE", help="Map file {\"base\": [...], \"images\": [...]}")
    common.add_argument("--map2", metavar="FILE", help="Second map file")
    common.add_argument("--mode", choices=["direct", "approx-then-patch"], default="direct",
                        help="disposition_extend mode")
    common.add_argument("--suite", default="all", help="Suite name for verify")
    common.add_argument("--report", default="report.json", help="Report path for verify")

    parser = argparse.ArgumentParser(description="Exact ultrametric linear algebra and certified constructions")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, (_, help_text) in COMMANDS.items():
        p = sub.add_parser(name, parents=[common], help=help_text)
        if name == "demo":
            p.add_argument("demo_name", choices=["shrinking-balls"])
            p.add_argument("--n", type=int, default=50, help="Number of balls")
    return parser


def validate(args: argparse.Namespace, codec: ExactCodec):
    """Parse and range-check every flag before any computation"""
    if args.target and not args.space2:
        args.space2 = args.target

    args.eps_value = codec.load_rational(args.epsilon)
    if not 0 < args.eps_value < 1:
        raise InvalidInput(f"--epsilon must lie in (0, 1), got {args.eps_value}")

    args.t_value = codec.load_magnitude(args.t) if args.t else None
    if args.t_value is not None and (args.t_value.zero or args.t_value > ONE):
        raise InvalidInput(f"--t must lie in (0, 1], got {args.t_value}")

    args.r_value = codec.load_magnitude(args.r) if args.r else None
    if args.r_value is not None and (args.r_value.zero or args.r_value >= ONE):
        raise InvalidInput(f"--r must lie in (0, 1), got {args.r_value}")

    args.s_value = codec.load_magnitude(args.s) if args.s else None
    if args.s_value is not None and args.s_value.zero:
        raise InvalidInput("--s must be positive")

    if args.tail_order is not None:
        codec.load_rational(args.tail_order)
    for name in ("cases", "workers"):
        if getattr(args, name) < 1:
            raise InvalidInput(f"--{name} must be positive")
    if args.samples < 0:
        raise InvalidInput("--samples must be non-negative")
    if args.command == "demo" and args.n < 2:
        raise InvalidInput("--n must be at least 2")
    if args.command == "verify" and args.suite != "all" and args.suite not in SUITE_NAMES:
        raise InvalidInput(f"unknown suite {args.suite!r}")


def render(console: Console, payload: dict):
    """Human-readable certificate table"""
    table = Table(title=payload.get("kind", "Result"), show_header=False)
    table.add_column("Field", style="cyan")
    table.add_column("Value")
    for key, value in payload.items():
        if key in ("kind", "tool_version"):
            continue
        shown = value if isinstance(value, str) else json.dumps(value)
        table.add_row(key, Text(shown))
    console.print(table)


def _report_error(args: argparse.Namespace, name: str, message: str, witness: Any,
                  exit_code: ExitCode) -> int:
    get_logger().log_error(f"{name}: {message}")
    if args.json:
        print(dumps({"error": name, "message": message, "witness": to_plain(witness),
                     "exit_code": int(exit_code)}))
    return int(exit_code)


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    console = Console()

    reset_logger()
    logger = get_logger(replace(
        DEFAULT_CONFIG.logging,
        ledger_file=args.ledger,
        console_output=not args.json,
    ))

    ctx = CommandContext(args)
    handler, _ = COMMANDS[args.command]
    field = None
    try:
        validate(args, ctx.codec)
        kind, body, holds, detail = handler(ctx)
        field = ctx.field
    except GurariiError as e:
        return _report_error(args, type(e).__name__, str(e), e.witness, e.exit_code)
    except Exception as e:
        logger.logger.exception("internal error in %s", args.command)
        return _report_error(args, type(e).__name__, str(e), None, ExitCode.INTERNAL_ERROR)
    finally:
        if args.verbose:
            logger.print_codec_stats(ctx.codec.get_stats())

    payload = certificate_to_json(body, field)
    payload["kind"] = kind
    logger.log_certificate(args.command, field, LogAction.CERTIFIED if holds else LogAction.REFUTED, detail)
    if args.json:
        print(dumps(payload))
    else:
        render(console, payload)
    return int(ExitCode.OK)


if __name__ == "__main__":
    sys.exit(main())
