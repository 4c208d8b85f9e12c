import pytest

from spikesound.harness import RunConfig, SyntheticSpec, run_bench


def small_run_config(out_dir, seed=777) -> RunConfig:
    """20 half-second clips: fast enough for per-test pipeline runs."""
    return RunConfig(
        dataset="synthetic",
        synthetic=SyntheticSpec(n_clips=20, duration_s=0.5),
        output_dir=str(out_dir),
        seed=seed,
    )


@pytest.fixture(scope="session")
def small_bench(tmp_path_factory):
    """One shared bench run over the small synthetic corpus."""
    out_dir = tmp_path_factory.mktemp("bench_small")
    cfg = small_run_config(out_dir)
    result = run_bench(cfg)
    return cfg, result
