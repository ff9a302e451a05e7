import numpy as np
import pytest

from gel.dynamics import (
    ModelSpec,
    normalize_variant,
    run_trajectory,
    spectral_filter_step,
    step_model,
)
from gel.energy import WeightSet, dirichlet_energy, parametric_energy
from gel.errors import ConfigurationError, NumericError, ValidationError
from gel.graphs import (
    complete_bipartite,
    cycle,
    erdos_renyi,
    normalized_adjacency,
    normalized_laplacian,
    path,
)


def gf(wmat, **kw):
    return ModelSpec("gradient_flow", weights=WeightSet(W=wmat), **kw)


# --- variant names and spec validation --------------------------------------

@pytest.mark.parametrize(
    "raw, canonical",
    [
        ("GradientFlow", "gradient_flow"),
        ("gradient_flow", "gradient_flow"),
        ("NoResidual", "no_residual"),
        ("Heat", "heat"),
        ("GRAFF", "graff"),
        ("CGNN", "cgnn"),
        ("GRANDLinear", "grand_linear"),
        ("PDEGCND", "pde_gcn_d"),
        ("LabelPropagation", "label_propagation"),
    ],
)
def test_variant_aliases(raw, canonical):
    assert normalize_variant(raw) == canonical


def test_unknown_variant_rejected():
    with pytest.raises(ConfigurationError):
        normalize_variant("spectral_banana")


def test_weight_variant_needs_weights():
    with pytest.raises(ConfigurationError):
        ModelSpec("gradient_flow")


def test_linear_variant_rejects_activation():
    with pytest.raises(ConfigurationError):
        gf(np.eye(2), sigma="relu")


def test_nonpositive_tau_rejected():
    with pytest.raises(ValidationError):
        gf(np.eye(1), tau=0.0)


def test_diag_nonlinear_rejects_positive_channel_weight():
    ws = WeightSet(W=np.zeros((2, 2)), omega_diag=np.array([-1.0, 0.5]))
    with pytest.raises(ValidationError):
        ModelSpec("diag_nonlinear", weights=ws, sigma="relu")


def test_cgnn_needs_omega_tilde():
    with pytest.raises(ConfigurationError):
        ModelSpec("cgnn")


def test_pde_needs_psd_ktk():
    with pytest.raises(ValidationError):
        ModelSpec("pde_gcn_d", KtK=np.array([[-1.0]]))


# --- single-step oracles ----------------------------------------------------

def test_heat_step_oracle():
    # K_2, f = (1, 0), tau = 0.5: Delta f = (1, -1), so f - 0.5*Delta f = (.5, .5)
    out = step_model(ModelSpec("heat", tau=0.5), path(2), np.array([1.0, 0.0]))
    assert np.allclose(out.ravel(), [0.5, 0.5])


def test_gradient_flow_step_oracle():
    # K_2, W = [[-1]], Omega = 0, tau = 0.5, f = (1, 0):
    # f + 0.5 * A_bar f W = (1, 0) - 0.5*(0, 1) = (1, -0.5)
    out = step_model(gf(np.array([[-1.0]]), tau=0.5), path(2), np.array([1.0, 0.0]))
    assert np.allclose(out.ravel(), [1.0, -0.5])


def test_no_residual_replaces_state():
    g = path(2)
    out = step_model(
        ModelSpec("no_residual", weights=WeightSet(W=np.array([[2.0]])), tau=0.5),
        g,
        np.array([1.0, 0.0]),
    )
    # tau * A_bar f W = 0.5 * (0, 1) * 2 = (0, 1): the identity term is gone
    assert np.allclose(out.ravel(), [0.0, 1.0])


def test_special_case_equivalences():
    # heat == gradient flow with W = I, Omega = I == label propagation mu = 0
    rng = np.random.default_rng(8)
    g = erdos_renyi(7, 0.5, 13)
    F = rng.normal(size=(g.n, 2))
    heat = step_model(ModelSpec("heat", tau=0.3), g, F)
    flow = step_model(
        ModelSpec(
            "gradient_flow",
            weights=WeightSet(W=np.eye(2), Omega=np.eye(2)),
            tau=0.3,
        ),
        g,
        F,
    )
    lp = step_model(ModelSpec("label_propagation", tau=0.3, mu=0.0), g, F, F0=F)
    assert np.abs(heat - flow).max() < 1e-12
    assert np.abs(heat - lp).max() < 1e-12


def test_graff_step_matches_formula():
    rng = np.random.default_rng(14)
    g = cycle(5)
    w = rng.normal(size=(2, 2))
    ws = WeightSet(W=w + w.T, omega_diag=np.array([0.3, -0.2]), beta=0.7)
    F = rng.normal(size=(5, 2))
    F0 = rng.normal(size=(5, 2))
    out = step_model(ModelSpec("graff", weights=ws, tau=0.1), g, F, F0=F0)
    expected = F + 0.1 * (
        -F @ np.diag(ws.omega_diag) + normalized_adjacency(g) @ F @ ws.W - 0.7 * F0
    )
    assert np.abs(out - expected).max() < 1e-12


def test_harmonic_step_matches_formula():
    rng = np.random.default_rng(15)
    g = path(4)
    w = rng.normal(size=(2, 2))
    ws = WeightSet(W=w + w.T)
    F = rng.normal(size=(4, 2))
    out = step_model(ModelSpec("harmonic", weights=ws, tau=0.2), g, F)
    expected = F - 0.2 * normalized_laplacian(g) @ F @ (ws.W @ ws.W)
    assert np.abs(out - expected).max() < 1e-12


def test_step_rejects_channel_mismatch():
    with pytest.raises(ValidationError):
        step_model(gf(np.eye(2)), path(2), np.array([1.0, 0.0]))


# --- trajectories -----------------------------------------------------------

def test_trajectory_shapes_and_time_axis():
    g = cycle(5)
    traj = run_trajectory(gf(np.array([[-1.0]]), tau=0.25), g, np.ones(5), 10)
    assert traj.steps.tolist() == list(range(11))
    assert np.allclose(traj.times, 0.25 * np.arange(11))
    assert traj.directions.shape == (11, 5, 1)
    norms = np.linalg.norm(traj.directions.reshape(11, -1), axis=1)
    assert np.abs(norms - 1.0).max() < 1e-12


def test_trajectory_renormalized_matches_raw_iteration():
    rng = np.random.default_rng(5)
    g = erdos_renyi(8, 0.4, 21)
    spec = gf(np.array([[1.2, 0.3], [0.3, -0.8]]), tau=0.5)
    F = rng.normal(size=(g.n, 2))
    traj = run_trajectory(spec, g, F, 12)
    raw = F.copy()
    for _ in range(12):
        raw = step_model(spec, g, raw)
    recon = traj.final.direction * np.exp(traj.final.log_scale)
    assert np.abs(recon - raw).max() < 1e-9 * max(1.0, np.abs(raw).max())


def test_trajectory_energy_column_is_parametric_energy_of_direction():
    rng = np.random.default_rng(6)
    g = cycle(6)
    ws = WeightSet(W=np.array([[0.5]]), Omega=np.array([[0.2]]))
    spec = ModelSpec("gradient_flow", weights=ws, tau=0.3)
    F = rng.normal(size=(g.n, 1))
    traj = run_trajectory(spec, g, F, 5)
    for k in [0, 3, 5]:
        expected = parametric_energy(g, traj.directions[k], ws)
        assert traj.energy[k] == pytest.approx(expected, abs=1e-12)


def test_label_propagation_converges_to_clamped_solution():
    # fixed point of Y' = Y - tau*(Delta Y + mu (Y - Y0)) solves
    # (Delta + mu I) Y = mu Y0
    rng = np.random.default_rng(9)
    g = erdos_renyi(8, 0.5, 3)
    y0 = rng.normal(size=(g.n, 1))
    spec = ModelSpec("label_propagation", tau=0.3, mu=1.0)
    traj = run_trajectory(spec, g, y0, 400)
    solved = np.linalg.solve(normalized_laplacian(g) + np.eye(g.n), y0)
    final = traj.final.direction * np.exp(traj.final.log_scale)
    assert np.abs(final - solved).max() < 1e-8


def test_grand_linear_conserves_means_on_regular_graph():
    rng = np.random.default_rng(10)
    g = cycle(6)
    F = rng.normal(size=(6, 2))
    # slowest mode of the self-loop walk on C6 contracts by 1 - tau/3 per step
    traj = run_trajectory(ModelSpec("grand_linear", tau=0.1), g, F, 900)
    final = traj.final.direction * np.exp(traj.final.log_scale)
    assert np.abs(final.mean(axis=0) - F.mean(axis=0)).max() < 1e-10
    # and the state itself flattens onto those means
    assert np.abs(final - F.mean(axis=0)).max() < 1e-8


def test_nonlinear_flow_decreases_energy():
    rng = np.random.default_rng(12)
    g = erdos_renyi(7, 0.5, 19)
    w = rng.normal(size=(2, 2))
    ws = WeightSet(W=w + w.T, Omega=np.eye(2))
    spec = ModelSpec("gradient_flow_nonlinear", weights=ws, tau=1e-3, sigma="relu")
    F = rng.normal(size=(g.n, 2))
    values = [parametric_energy(g, F, ws)]
    for _ in range(50):
        F = step_model(spec, g, F)
        values.append(parametric_energy(g, F, ws))
    diffs = np.diff(values)
    assert diffs.max() <= 1e-9 * max(1.0, float(np.abs(values[0])))


def test_overflow_names_step_and_suggests_remedy():
    g = cycle(5)
    ws = WeightSet(W=np.array([[-9.0]]), Wtilde=np.array([[1.0]]))
    spec = ModelSpec("gradient_flow", weights=ws, tau=5.0)
    with pytest.raises(NumericError, match="step"):
        run_trajectory(spec, g, np.ones(5), 4000)


def test_zero_init_rejected():
    with pytest.raises(ValidationError):
        run_trajectory(ModelSpec("heat"), cycle(4), np.zeros(4), 3)


# --- spectral filter --------------------------------------------------------

def test_spectral_filter_matches_dense_step():
    rng = np.random.default_rng(18)
    for _ in range(5):
        g = erdos_renyi(int(rng.integers(4, 10)), 0.5, int(rng.integers(100)))
        d = int(rng.integers(1, 4))
        w = rng.normal(size=(d, d))
        wmat = w + w.T
        F = rng.normal(size=(g.n, d))
        filtered = spectral_filter_step(g, wmat, 0.5, F)
        dense = F + 0.5 * normalized_adjacency(g) @ F @ wmat
        assert np.abs(filtered - dense).max() < 1e-12
