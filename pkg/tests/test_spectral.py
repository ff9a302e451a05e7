import numpy as np
import pytest

from gel.dynamics import ModelSpec, run_trajectory
from gel.energy import WeightSet
from gel.errors import (
    DegenerateInputError,
    HypothesisError,
    RegimeError,
    ValidationError,
)
from gel.graphs import (
    Graph,
    complete_bipartite,
    cycle,
    erdos_renyi,
    laplacian_spectrum,
    path,
)
from gel.spectral import (
    asymptotic_profile,
    classify_regime,
    closed_form_features,
    convergence_rates,
)


def sym(rng, spectrum):
    vals = np.asarray(spectrum, dtype=float)
    q, _ = np.linalg.qr(rng.normal(size=(vals.size, vals.size)))
    return (q * vals) @ q.T


# --- closed form ------------------------------------------------------------

def test_closed_form_k2_oracle():
    # K_2, W = [[-1]], tau = 0.5, f0 = (1, 0); modes (lam, factor):
    # lam=0 -> 0.5 per step, lam=2 -> 1.5 per step.  After m=2:
    # F = 0.25 * c0 * phi0 + 2.25 * c1 * phi1 with c0 = c1 = 1/sqrt(2)
    state = closed_form_features(
        path(2), np.array([[-1.0]]), 0.5, 2, np.array([1.0, 0.0])
    )
    feats = state.direction * np.exp(state.log_scale)
    phi0 = np.array([1.0, 1.0]) / np.sqrt(2.0)
    phi1 = np.array([1.0, -1.0]) / np.sqrt(2.0)
    expected = (0.25 / np.sqrt(2.0)) * phi0 + (2.25 / np.sqrt(2.0)) * phi1
    assert np.abs(feats.ravel() - expected).max() < 1e-12


def test_closed_form_zero_steps_is_identity():
    rng = np.random.default_rng(1)
    g = cycle(5)
    F0 = rng.normal(size=(5, 2))
    state = closed_form_features(g, sym(rng, [1.0, -0.5]), 0.5, 0, F0)
    feats = state.direction * np.exp(state.log_scale)
    assert np.abs(feats - F0).max() < 1e-12


def test_closed_form_log_scale_overflow_safe():
    # 50 steps of growth 1.5 on K_2 from the pure high-frequency mode:
    # log_scale carries 50*ln(1.5) + ln|c|, direction stays unit
    g = path(2)
    F0 = np.array([1.0, -1.0])
    state = closed_form_features(g, np.array([[-1.0]]), 0.5, 50, F0)
    expected = 50.0 * np.log(1.5) + np.log(np.sqrt(2.0))
    assert state.log_scale == pytest.approx(expected, abs=1e-9)
    assert np.linalg.norm(state.direction) == pytest.approx(1.0, abs=1e-12)


@pytest.mark.parametrize("tau", [0.25, 0.5, 1.0])
def test_closed_form_matches_trajectory(tau):
    rng = np.random.default_rng(int(tau * 8))
    g = erdos_renyi(9, 0.4, 29)
    wmat = sym(rng, rng.uniform(-1.2, 1.2, size=3))
    F0 = rng.normal(size=(g.n, 3))
    spec = ModelSpec("gradient_flow", weights=WeightSet(W=wmat), tau=tau)
    traj = run_trajectory(spec, g, F0, 40)
    exact = closed_form_features(g, wmat, tau, 40, F0)
    assert np.abs(traj.final.direction - exact.direction).max() < 1e-10
    assert abs(traj.final.log_scale - exact.log_scale) < 1e-8


# --- regime classification --------------------------------------------------

def test_hfd_on_k2_with_negative_weight():
    rep = classify_regime(path(2), np.array([[-1.0]]), 0.5)
    assert rep.regime == "HFD"
    assert rep.rho_minus == pytest.approx(1.0, abs=1e-9)
    assert np.isinf(rep.step_bound)  # bipartite: no step-size ceiling


def test_lfd_on_k2_with_positive_weight():
    rep = classify_regime(path(2), np.array([[1.0]]), 0.5)
    assert rep.regime == "LFD"
    assert rep.rate_ratio is None


def test_boundary_when_growths_tie():
    # K_2 (lambda_max = 2), W = diag(1, -1): rho_minus = 1 = mu_top exactly
    rep = classify_regime(path(2), np.diag([1.0, -1.0]), 0.5)
    assert rep.regime == "Boundary"


def test_nonnegative_spectrum_without_positive_top_is_boundary():
    rep = classify_regime(path(2), np.zeros((2, 2)), 0.5)
    assert rep.regime == "Boundary"


def test_step_size_violation_on_non_bipartite():
    # C5: lambda_max ~ 1.809, bound = 2/(tau*(2-lambda_max)) ~ 20.9 at tau=0.5
    rep = classify_regime(cycle(5), np.array([[-25.0]]), 0.5)
    assert rep.regime == "StepSizeViolated"
    assert abs(rep.mu_bottom) > rep.step_bound


def test_classify_requires_connected():
    with pytest.raises(ValidationError):
        classify_regime(Graph(4, ((0, 1), (2, 3))), np.array([[-1.0]]), 0.5)


# --- rates ------------------------------------------------------------------

def test_rates_frozen_k2():
    # K_2, W = [[-1]], tau = 0.5: delta = -1, epsilon = 2, ratio = 1/3
    rates = convergence_rates(path(2), np.array([[-1.0]]), 0.5)
    assert rates.delta == pytest.approx(-1.0, abs=1e-9)
    assert rates.epsilon == pytest.approx(2.0, abs=1e-9)
    assert rates.ratio == pytest.approx(1.0 / 3.0, abs=1e-9)


def test_rates_refuse_non_hfd():
    with pytest.raises(RegimeError):
        convergence_rates(path(2), np.array([[1.0]]), 0.5)


def test_rate_ratio_bounds_every_subdominant_mode():
    rng = np.random.default_rng(77)
    hits = 0
    for trial in range(40):
        g = erdos_renyi(int(rng.integers(5, 12)), 0.45, int(rng.integers(1000)))
        lam = laplacian_spectrum(g).eigenvalues
        d = int(rng.integers(1, 5))
        wmat = sym(rng, rng.uniform(-1.5, 1.0, size=d))
        tau = float(rng.choice([0.25, 0.5]))
        rep = classify_regime(g, wmat, tau)
        if rep.regime != "HFD":
            continue
        hits += 1
        mu = np.linalg.eigvalsh(wmat)
        factors = np.abs(1.0 + tau * np.outer(1.0 - lam, mu)).ravel()
        top = 1.0 + tau * rep.rho_minus
        sub = factors[factors < top - 1e-9]
        if sub.size:
            assert sub.max() <= (1.0 + tau * rep.delta_hfd) + 1e-9
    assert hits >= 8  # the sweep must actually exercise HFD instances


# --- asymptotic profiles ----------------------------------------------------

def test_hfd_profile_is_top_frequency_block():
    g = complete_bipartite(2, 3)
    rng = np.random.default_rng(3)
    F0 = rng.normal(size=(g.n, 1))
    spec = ModelSpec("gradient_flow", weights=WeightSet(W=[[-1.0]]), tau=0.5)
    prof = asymptotic_profile(g, spec, F0)
    pair = laplacian_spectrum(g)
    phi_top = pair.eigenvectors[:, -1]
    coeff = float(phi_top @ F0[:, 0])
    expected = np.sign(coeff) * phi_top[:, None]
    assert prof.growth == pytest.approx(1.5, abs=1e-12)
    assert np.abs(prof.direction - expected).max() < 1e-12


def test_lfd_profile_is_degree_profile_times_top_channel():
    g = cycle(5)
    rng = np.random.default_rng(4)
    F0 = rng.normal(size=(g.n, 2))
    wmat = np.diag([1.0, 0.25])
    spec = ModelSpec("gradient_flow", weights=WeightSet(W=wmat), tau=0.5)
    prof = asymptotic_profile(g, spec, F0)
    phi0 = laplacian_spectrum(g).eigenvectors[:, 0]
    # top channel eigenvalue 1 lives on channel 0
    assert prof.growth == pytest.approx(1.5, abs=1e-12)
    assert np.abs(np.abs(prof.direction[:, 0]) - phi0).max() < 1e-12
    assert np.abs(prof.direction[:, 1]).max() < 1e-12


def test_profile_rejects_orthogonal_init():
    # init proportional to phi_0 has no high-frequency component at all
    g = path(2)
    spec = ModelSpec("gradient_flow", weights=WeightSet(W=[[-1.0]]), tau=0.5)
    with pytest.raises(DegenerateInputError):
        asymptotic_profile(g, spec, np.array([1.0, 1.0]))


def test_profile_refuses_boundary_regime():
    g = path(2)
    spec = ModelSpec("gradient_flow", weights=WeightSet(W=np.diag([1.0, -1.0])), tau=0.5)
    with pytest.raises(RegimeError):
        asymptotic_profile(g, spec, np.ones((2, 2)))


def test_no_residual_profile_requires_non_bipartite():
    g = complete_bipartite(3, 3)
    spec = ModelSpec("no_residual", weights=WeightSet(W=[[1.0]]), tau=0.5)
    with pytest.raises(HypothesisError):
        asymptotic_profile(g, spec, np.random.default_rng(0).normal(size=(6, 1)))


def test_no_residual_profile_rejects_mixed_sign_tie():
    g = cycle(5)
    spec = ModelSpec(
        "no_residual", weights=WeightSet(W=np.diag([2.0, -2.0])), tau=0.5
    )
    with pytest.raises(DegenerateInputError):
        asymptotic_profile(g, spec, np.ones((5, 2)))


def test_no_residual_profile_kernel_direction():
    g = cycle(5)
    rng = np.random.default_rng(6)
    F0 = rng.normal(size=(5, 2))
    spec = ModelSpec(
        "no_residual", weights=WeightSet(W=np.diag([2.0, -1.0])), tau=0.5
    )
    prof = asymptotic_profile(g, spec, F0)
    # dominant channel is the mu=2 one; frequency part collapses to phi_0
    assert np.abs(prof.direction[:, 1]).max() < 1e-12
    phi0 = laplacian_spectrum(g).eigenvectors[:, 0]
    col = prof.direction[:, 0]
    assert np.abs(np.abs(col) - phi0).max() < 1e-12
    assert prof.growth == pytest.approx(0.5 * 2.0, abs=1e-12)


def test_grand_profile_means():
    g = cycle(6)
    rng = np.random.default_rng(7)
    F0 = rng.normal(size=(6, 2))
    prof = asymptotic_profile(g, ModelSpec("grand_linear", tau=0.1), F0)
    assert prof.terminal is not None
    assert np.abs(prof.terminal - F0.mean(axis=0)[None, :]).max() < 1e-12
    assert prof.growth == pytest.approx(1.0)


def test_harmonic_profile_singular_w_keeps_kernel_component():
    g = path(4)
    rng = np.random.default_rng(8)
    F0 = rng.normal(size=(4, 2))
    wmat = np.diag([0.9, 0.0])  # channel 1 sits in ker W
    spec = ModelSpec("harmonic", weights=WeightSet(W=wmat), tau=0.2)
    prof = asymptotic_profile(g, spec, F0)
    traj = run_trajectory(spec, g, F0, 3000)
    final = traj.final.direction * np.exp(traj.final.log_scale)
    assert np.abs(final - prof.terminal).max() < 1e-6
    # the kernel channel never moves
    assert np.abs(prof.terminal[:, 1] - F0[:, 1]).max() < 1e-12
