"""Shared fixtures: the stock material, field setups, and pulse makers."""

from __future__ import annotations

import math

import numpy as np
import pytest

import donorspin as d


@pytest.fixture(scope="session")
def material():
    return d.load_material("zno-natural")


@pytest.fixture(scope="session")
def levels_5t(material):
    return d.LevelScheme.from_material(material, d.FieldConfig(5.0),
                                       2 * math.pi * 3.57e12)


@pytest.fixture(scope="session")
def levels_low_field(material):
    return d.LevelScheme.from_material(material, d.FieldConfig(0.1),
                                       2 * math.pi * 3.57e12)


@pytest.fixture(scope="session")
def quiet():
    return d.DissipatorSet()


@pytest.fixture(scope="session")
def lossy():
    return d.DissipatorSet(radiative_rate=1e9, t1_rate=1e3,
                           ground_dephasing_rate=2e6,
                           laser_dephasing_linear=1e-3,
                           laser_dephasing_quadratic=1e-16)


def pulse_for_angle(levels, angle, duration=1.9e-12, shape="gaussian"):
    template = d.PulseSpec(shape=shape, duration=duration, energy=1e-15)
    return d.PulseSpec(
        shape=shape, duration=duration,
        energy=d.energy_for_rotation_angle(template, levels, angle))


@pytest.fixture(scope="session")
def half_pi_pulse(levels_5t):
    return pulse_for_angle(levels_5t, math.pi / 2)


def spike_bath(detuning_rad_per_s, g_electron):
    """Bath whose every sample carries one fixed detuning.

    A single hyperfine field value with zero dispersion makes the
    characteristic function a pure phase, which turns ensemble
    averaging into deterministic propagation at that detuning.
    """
    field = detuning_rad_per_s * d.HBAR / (g_electron * d.BOHR_MAGNETON)
    return d.BathModel(ga_field_values=(field,), zn_dispersion=0.0,
                       electron_g=g_electron)


def random_density_matrix(rng, dim=4):
    a = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    rho = a @ a.conj().T
    return rho / np.trace(rho).real
