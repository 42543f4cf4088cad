import runpy
from pathlib import Path

BENCH = Path(__file__).resolve().parents[1] / "benchmarks" / "bench_kernels.py"


def test_benchmark_runs(capsys):
    runpy.run_path(str(BENCH))["main"](["--repeat", "1"])
    out = capsys.readouterr().out
    assert "count_correct" in out and "disagree" not in out
