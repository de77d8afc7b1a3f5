import pytest

from gestrec import _dp
from gestrec.data import Dataset, PoseSequence


@pytest.fixture(scope="session", autouse=True)
def compiled_kernels():
    """Compile every numba kernel up front so timed tests measure runtime only."""
    _dp.warmup()


def random_pose_sequence(rng, t, k=6, label="g", subject="s", seq_id=None):
    return PoseSequence(
        seq_id=seq_id or f"{label}-{subject}-{rng.integers(1 << 30)}",
        label=label,
        subject=subject,
        frames=rng.normal(size=(t, k)),
        n_joints=k // 3,
    )


def tiny_dataset(rng, n_classes=3, n_subjects=2, reps=1, t_range=(4, 9), k=6):
    seqs = []
    for c in range(n_classes):
        for s in range(n_subjects):
            for r in range(reps):
                t = int(rng.integers(*t_range))
                seqs.append(
                    random_pose_sequence(
                        rng, t, k=k, label=f"g{c}", subject=f"s{s}",
                        seq_id=f"g{c}-s{s}-r{r}",
                    )
                )
    return Dataset.from_sequences(seqs)
