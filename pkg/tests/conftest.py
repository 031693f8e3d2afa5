import numpy as np
import pytest

from fairprobe import ModelConfig, split_train_test, train
from fairprobe.data import Schema, from_arrays
from fairprobe.demo import generate_demo_dataset

LR_CONFIG = ModelConfig(
    kind="logistic", epochs=40, learning_rate=0.05, l2=1e-4, seed=11
)


@pytest.fixture(scope="session")
def demo_dataset():
    return generate_demo_dataset()


@pytest.fixture(scope="session")
def demo_split(demo_dataset):
    return split_train_test(demo_dataset, 0.7, seed=11)


@pytest.fixture(scope="session")
def demo_lr(demo_split):
    train_data, _ = demo_split
    return train(train_data, LR_CONFIG)


def make_sem_dataset(seed: int, n: int = 5000):
    """Five-variable linear SEM with uniform noise, rounded to integers.

    True directed edges: x0->x1 (2.0), x1->x2 (-1.5), x0->x3 (1.2),
    x2->x3 (0.8); x4 is independent. The binary label derives from x3 and x4.
    """
    rng = np.random.default_rng(seed)
    x0 = np.rint(rng.uniform(0, 12, n))
    x1 = np.rint(2.0 * x0 + rng.uniform(-4, 4, n))
    x2 = np.rint(-1.5 * x1 + rng.uniform(-6, 6, n))
    x3 = np.rint(1.2 * x0 + 0.8 * x2 + rng.uniform(-5, 5, n))
    x4 = np.rint(rng.uniform(-8, 8, n))
    rows = np.column_stack([x0, x1, x2, x3, x4]).astype(int)
    score = x3 + 2.0 * x4
    labels = (score > np.median(score)).astype(int)
    schema = Schema(
        feature_names=tuple(f"x{i}" for i in range(5)),
        sensitive_features=("x0",),
        label_name="y",
        declared_kinds={f"x{i}": "integer" for i in range(5)},
    )
    return from_arrays(rows, labels, schema)


SEM_TRUE_EDGES = {
    ("x0", "x1"): 2.0,
    ("x1", "x2"): -1.5,
    ("x0", "x3"): 1.2,
    ("x2", "x3"): 0.8,
}


def make_effect_fixture():
    """Three-node discrete fixture with a hand-built graph.

    x0 -> x1 with coefficient 1.0, x0 -> y 0.25, x1 -> y 0.45; both features
    binary. The expected interventional effect was computed by the exhaustive
    enumeration oracle in test_causal and frozen there.
    """
    from fairprobe.causal import CausalGraph

    rng = np.random.default_rng(42)
    n = 400
    x0 = rng.integers(0, 2, n)
    x1 = (rng.random(n) < 0.3 + 0.4 * x0).astype(int)
    y = ((0.25 * x0 + 0.45 * x1 + rng.uniform(-0.35, 0.35, n)) >= 0.5).astype(int)
    schema = Schema(
        feature_names=("x0", "x1"),
        sensitive_features=("x0",),
        label_name="y",
        declared_kinds={"x0": "integer", "x1": "integer"},
    )
    dataset = from_arrays(np.column_stack([x0, x1]), y, schema)
    B = np.zeros((3, 3))
    B[1, 0] = 1.0
    B[2, 0] = 0.25
    B[2, 1] = 0.45
    graph = CausalGraph(
        nodes=("x0", "x1", "y"),
        weights=B,
        topo_order=(0, 1, 2),
        edge_threshold=0.05,
        label="y",
    )
    return graph, dataset


def make_hypercube_fixture():
    """Four binary features over the full 16-point space with a fixed
    logistic model; sensitive feature at index 0."""
    from itertools import product

    from fairprobe.models import ModelUnderTest

    schema = Schema(
        feature_names=("s", "f1", "f2", "f3"),
        sensitive_features=("s",),
        label_name="y",
        declared_kinds={name: "integer" for name in ("s", "f1", "f2", "f3")},
    )
    points = np.array(list(product((0, 1), repeat=4)), dtype=int)
    model = ModelUnderTest(
        config=ModelConfig(kind="logistic"),
        input_width=4,
        weights=[np.array([[2.0], [1.5], [-1.2], [0.4]])],
        biases=[np.array([-1.0])],
    )
    labels, _ = model.predict_batch(points.astype(float))
    dataset = from_arrays(points, labels, schema)
    return model, dataset
