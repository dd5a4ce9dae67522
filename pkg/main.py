"""
CAC Lab - Main Orchestrator
Runs the named self-play collapse experiments, checks them against their
expected results and writes episode logs, summaries and traces.
"""
import sys
from typing import Dict, List, Optional, Sequence

from config import Config
from modules.errors import LabError
from modules.experiments import REGISTRY, parse_overrides
from modules import harness


class CACLab:
    """Main orchestrator for the CAC Lab."""

    def __init__(self, out_dir: Optional[str] = None, fmt: str = Config.DEFAULT_FORMAT,
                 progress: bool = Config.VERBOSE, long_run: bool = Config.LONG_RUN):
        self.out_dir = out_dir or Config.OUTPUT_DIR
        self.fmt = fmt
        self.progress = progress
        self.long_run = long_run

    def list_experiments(self) -> List[str]:
        print("\n📋 Registered experiments:")
        for definition in REGISTRY.values():
            flag = "  [long run]" if definition.long_run else ""
            print(f"   {definition.id:<26} {definition.title}{flag}")
        return list(REGISTRY)

    def run(self, experiment_id: str, overrides: Dict, diagnostics: bool = False) -> bool:
        """
        Run one experiment and write its outputs.

        Args:
            experiment_id: Registry id
            overrides: Parsed key=value overrides
            diagnostics: Record entropy, q-gap and exploitability snapshots

        Returns:
            True when every expectation passed
        """
        print("\n" + "=" * 60)
        print(f"🚀 CAC Lab run: {experiment_id}")
        print("=" * 60)
        outcome = harness.run(experiment_id, overrides, self.out_dir, fmt=self.fmt,
                              diagnostics=diagnostics, progress=self.progress, long_run=self.long_run)
        print(f"\n📂 Outputs: {outcome.store.root}")
        print(f"{'✅ PASS' if outcome.passed else '❌ FAIL'} {experiment_id}")
        return outcome.passed

    def verify(self, experiment_ids: Sequence[str], overrides: Dict) -> bool:
        print("\n" + "=" * 60)
        print("🔍 CAC Lab verify")
        print("=" * 60)
        verdicts = harness.verify(experiment_ids or None, overrides, self.out_dir, fmt=self.fmt,
                                  progress=self.progress, long_run=self.long_run)
        failed = [name for name, ok in verdicts.items() if not ok]
        print(f"\n📊 {len(verdicts) - len(failed)}/{len(verdicts)} experiments passed")
        for name in failed:
            print(f"   ❌ {name}")
        return not failed

    def trace(self, experiment_id: str, metric: str, overrides: Dict, window: int = Config.TRACE_WINDOW,
              condition: Optional[str] = None) -> str:
        """Run an experiment with diagnostics on and write one windowed trace."""
        print("\n" + "=" * 60)
        print(f"📈 CAC Lab trace: {experiment_id} / {metric}")
        print("=" * 60)
        outcome = harness.run(experiment_id, overrides, self.out_dir, fmt=self.fmt, diagnostics=True,
                              progress=self.progress, long_run=self.long_run)
        rows = harness.emit_trace(outcome.result, metric, window, condition, outcome.store)
        path = outcome.store.written[-1]
        print(f"\n✅ {len(rows)} trace rows written to {path}")
        return path

    def reach_sweep(self, epsilons: Sequence[float], overrides: Dict) -> None:
        print("\n" + "=" * 60)
        print("📐 Reach sensitivity sweep (Kuhn, root-only removal)")
        print("=" * 60)
        rows = harness.reach_sensitivity_sweep(epsilons, overrides, progress=self.progress)
        print(f"\n   {'epsilon':>8} {'reach(pb)':>10} {'QL post':>9}")
        for row in rows:
            print(f"   {row['epsilon']:>8.2f} {row['reach_pb']:>10.3f} {row['ql_post']:>+9.3f}")


def main():
    """Main entry point."""
    import argparse

    parser = argparse.ArgumentParser(description="CAC Lab - self-play collapse under action-space perturbations")
    parser.add_argument("--out", help=f"Output directory (default ${{CAC_LAB_OUTPUT_DIR}} or {Config.OUTPUT_DIR})")
    parser.add_argument("--format", choices=("csv", "json"), default=Config.DEFAULT_FORMAT, help="Episode log format")
    parser.add_argument("--long-run", action="store_true", default=Config.LONG_RUN, help="Allow long-run experiments")
    parser.add_argument("--quiet", action="store_true", help="Disable progress bars")
    sub = parser.add_subparsers(dest="command", required=True)

    sub.add_parser("list", help="List registered experiments")

    def add_run_options(p, positional=True):
        if positional:
            p.add_argument("overrides", nargs="*", metavar="key=value", help="Protocol overrides")
        p.add_argument("--seeds", type=int, help="Number of seeds")
        p.add_argument("--episodes", type=int, help="Episodes per seed")
        # also accepted after the subcommand; SUPPRESS keeps the top-level value when absent
        p.add_argument("--out", default=argparse.SUPPRESS, help="Output directory")
        p.add_argument("--format", choices=("csv", "json"), default=argparse.SUPPRESS, help="Episode log format")
        p.add_argument("--long-run", action="store_true", default=argparse.SUPPRESS, help="Allow long-run experiments")
        p.add_argument("--quiet", action="store_true", default=argparse.SUPPRESS, help="Disable progress bars")

    run_parser = sub.add_parser("run", help="Run one experiment")
    run_parser.add_argument("experiment")
    run_parser.add_argument("--diagnostics", action="store_true", help="Record entropy, q-gap and exploitability")
    add_run_options(run_parser)

    verify_parser = sub.add_parser("verify", help="Run experiments and check their expectations")
    verify_parser.add_argument("targets", nargs="*", metavar="ID|key=value",
                               help="Experiment ids (default: all) and protocol overrides")
    add_run_options(verify_parser, positional=False)

    trace_parser = sub.add_parser("trace", help="Write a windowed trace of one experiment")
    trace_parser.add_argument("experiment")
    trace_parser.add_argument("--metric", required=True, choices=harness.TRACE_METRICS)
    trace_parser.add_argument("--window", type=int, default=Config.TRACE_WINDOW)
    trace_parser.add_argument("--condition", help="Condition to trace (default: the first)")
    add_run_options(trace_parser)

    sweep_parser = sub.add_parser("reach-sweep", help="Reach of the retained point per exploration rate")
    sweep_parser.add_argument("--eps", type=float, nargs="+", default=list(harness.REACH_EPSILONS))
    add_run_options(sweep_parser)

    args = parser.parse_args()

    # Validate configuration
    validation = Config.validate()
    if not validation["valid"]:
        print("❌ Configuration errors:")
        for issue in validation["issues"]:
            print(f"   - {issue}")
        sys.exit(2)

    lab = CACLab(out_dir=args.out, fmt=args.format, progress=Config.VERBOSE and not args.quiet,
                 long_run=args.long_run)
    try:
        if args.command == "list":
            lab.list_experiments()
            return

        ids = [t for t in getattr(args, "targets", []) if "=" not in t]
        pairs = [t for t in getattr(args, "targets", []) if "=" in t] or getattr(args, "overrides", [])
        overrides = parse_overrides(pairs)
        if args.seeds is not None:
            overrides["seeds"] = args.seeds
        if args.episodes is not None:
            overrides["episodes"] = args.episodes

        if args.command == "run":
            ok = lab.run(args.experiment, overrides, diagnostics=args.diagnostics)
        elif args.command == "verify":
            ok = lab.verify(ids, overrides)
        elif args.command == "trace":
            lab.trace(args.experiment, args.metric, overrides, args.window, args.condition)
            ok = True
        else:
            lab.reach_sweep(args.eps, overrides)
            ok = True
        sys.exit(0 if ok else 1)

    except LabError as e:
        print(f"\n❌ Error: {e}")
        sys.exit(2)
    except KeyboardInterrupt:
        print("\n\n👋 CAC Lab stopped by user")
        sys.exit(130)
    except Exception as e:
        print(f"\n❌ Error: {e}")
        import traceback
        traceback.print_exc()
        sys.exit(1)


if __name__ == "__main__":
    main()
