import numpy as np
import pytest

from sublex import (CredalKernel, CredalModel, RandomVariable, StepTemplate,
                    build_iid_model, build_product_space)

M3_TEMPLATE = StepTemplate((-1.0, 0.0, 1.0), ((0.25, 0.5, 0.25), (0.5, 0.0, 0.5)))
M4_TEMPLATE = StepTemplate((1.0, -1.0), ((0.4, 0.6), (0.6, 0.4)))


@pytest.fixture
def m1():
    """One step, outcomes (1, 0), upper head probability 0.6."""
    space = build_product_space(1, 2, [1.0, 0.0])
    model = CredalModel(space, CredalKernel.uniform(space, [[0.3, 0.7], [0.6, 0.4]]))
    return model, RandomVariable(space, space.step_outcomes(1))


@pytest.fixture
def m2():
    """Two steps of m1's kernels; the head count has upper mean 1.2."""
    space = build_product_space(2, 2, [1.0, 0.0])
    model = CredalModel(space, CredalKernel.uniform(space, [[0.3, 0.7], [0.6, 0.4]]))
    nh = RandomVariable(space, space.step_outcomes(1) + space.step_outcomes(2))
    return model, nh


@pytest.fixture
def m3():
    model, steps = build_iid_model(M3_TEMPLATE, 2)
    return model, steps


@pytest.fixture
def m4():
    model, steps = build_iid_model(M4_TEMPLATE, 2)
    return model, steps


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)
