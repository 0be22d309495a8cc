"""Figure rendering for CLI reports: one PNG per job, written next to the
delimited output when requested."""

from __future__ import annotations

from pathlib import Path


def _pyplot():
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt
    return plt


def render_figures(command: str, result: dict, outdir, unit: str = "nats") -> list[str]:
    plt = _pyplot()
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    fig, ax = plt.subplots(figsize=(6.0, 4.0))

    if command == "reduce":
        caps = [c["capacity"] for c in result["children"]]
        labels = [f"corner {i}\nrank {c['cornerRank']}" for i, c in enumerate(result["children"])]
        ax.bar(range(len(caps)), caps, color="#4878a8")
        ax.axhline(result["value"], color="#a84848", linestyle="--",
                   label=f"combined = {result['value']:.6g}")
        ax.set_xticks(range(len(caps)), labels)
        ax.set_ylabel(f"corner capacity ({unit})")
        ax.legend()
        ax.set_title("corner capacities and their log-sum-exp combination")
    elif command == "decompose":
        spectrum = sorted(result["gramSpectrum"])
        ax.plot(spectrum, marker="o", linestyle="", color="#4878a8")
        ax.set_xlabel("index")
        ax.set_ylabel("gram form eigenvalue")
        ax.set_title(f"definite dimension {result['definiteDim']}"
                     f"{' (ergodic)' if result['ergodic'] else ''}")
    elif command == "capacity":
        names = ["lowerBound", "value", "upperBound"]
        ax.bar(names, [result[k] for k in names], color=["#78a848", "#4878a8", "#a87848"])
        ax.set_ylabel(unit)
        ax.set_title(f"capacity via {result['method']}")
    elif command == "verify-lemma1":
        ax.hist(result["slacks"], bins=40, color="#4878a8")
        ax.set_xlabel(f"slack ({unit})")
        ax.set_ylabel("count")
        ax.set_title(f"entropy bound slack over {result['samples']} samples "
                     f"(min {result['minSlack']:.3e})")
    elif command == "restriction":
        names = ["full", "restricted"]
        ax.bar(names, [result[n]["value"] for n in names], color=["#4878a8", "#78a848"])
        ax.set_ylabel(f"capacity ({unit})")
        ax.set_title(f"restriction gap = {result['gap']:.3e}")
    elif command in ("additivity", "tensor-id"):
        if command == "additivity":
            pairs = [("factor A", result["factorA"]["value"]),
                     ("factor B", result["factorB"]["value"]),
                     ("sum", result["sum"]),
                     ("tensor", result["tensor"]["value"])]
        else:
            pairs = [("factor", result["factor"]["value"]),
                     ("expected", result["expected"]),
                     ("tensor", result["tensor"]["value"])]
        ax.bar([p[0] for p in pairs], [p[1] for p in pairs], color="#4878a8")
        ax.set_ylabel(f"capacity ({unit})")
        ax.set_title("tensor capacity versus the additive prediction")
    else:
        plt.close(fig)
        return []

    fig.tight_layout()
    path = outdir / f"{command.replace('-', '_')}.png"
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return [str(path)]
