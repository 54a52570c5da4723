"""Energy functionals and their analytic fields.

A functional is a pool of principal variables plus a list of energy terms,
each term either a function of variable values or a direct function of the
density (and pairing tensor).  Terms carry an assignment to the irregular or
regular part; moving variables between the active set and the folded-in set
(`repartition`) changes the bookkeeping but never the composed energy of rho.

Derivative conventions, used consistently everywhere:

* density fields are matrices H with  dE = tr(H drho), i.e. H_{kl} is the
  derivative of E with respect to rho_{lk};
* gap fields are matrices D with  dE/dRe(kappa_{kl}) = 2 Re D_{kl}  and
  dE/dIm(kappa_{kl}) = 2 Im D_{kl}  for k < l (D antisymmetric), matching
  the usual definition D = -dE/dkappa* with unconstrained index sums;
* variable derivatives follow the density-field convention, so
  dQ = tr(D drho), and pairing-aware variables supply the gap-shaped
  counterpart.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import ConjugateMissing, DimensionError, InvalidMatrix, LabelError
from .matrixcore import antisymmetrize, as_matrix, hermitize

HERMITICITY_TOL = 1e-8


# ---------------------------------------------------------------------------
# principal variables


@dataclass(frozen=True)
class PrincipalVariable:
    """A scalar functional of the density (optionally the pairing tensor).

    `evaluator(rho, kappa=None)` returns the value; `derivative(rho,
    kappa=None)` the matrix D with dQ = tr(D drho); `kappa_derivative` (when
    the variable depends on kappa) the gap-shaped matrix.  `is_linear` marks
    constant derivatives, which downstream code may cache.
    """

    label: str
    kind: str = "custom"
    evaluator: Callable = None
    derivative: Callable = None
    kappa_derivative: Callable | None = None
    is_linear: bool = True

    @property
    def pairing_aware(self) -> bool:
        return self.kappa_derivative is not None


def site_density(site: int, num_sites: int, spacing: float = 1.0) -> PrincipalVariable:
    """rho(x) = rho_{xx} / a at one lattice site."""
    x = int(site)
    d = np.zeros((num_sites, num_sites), dtype=complex)
    d[x, x] = 1.0 / spacing
    d.setflags(write=False)
    return PrincipalVariable(
        label=f"rho[{x}]",
        kind="local_density",
        evaluator=lambda rho, kappa=None, _x=x, _a=spacing: (as_matrix(rho)[_x, _x] / _a).real,
        derivative=lambda rho=None, kappa=None, _d=d: _d,
    )


def kinetic_link_density(link: int, num_sites: int, spacing: float = 1.0) -> PrincipalVariable:
    """Kinetic density on the link (x, x+1) from forward-difference gradients:
    xi(x) = (rho_{xx} + rho_{x+1,x+1} - 2 Re rho_{x+1,x}) / a^3."""
    x = int(link)
    if not 0 <= x < num_sites - 1:
        raise DimensionError(f"link {x} outside 0..{num_sites - 2}")
    c = 1.0 / spacing ** 3
    d = np.zeros((num_sites, num_sites), dtype=complex)
    d[x, x] = c
    d[x + 1, x + 1] = c
    d[x, x + 1] = -c
    d[x + 1, x] = -c
    d.setflags(write=False)

    def _eval(rho, kappa=None, _x=x, _c=c):
        arr = as_matrix(rho)
        return (_c * (arr[_x, _x] + arr[_x + 1, _x + 1] - 2 * arr[_x + 1, _x].real)).real

    return PrincipalVariable(
        label=f"xi[{x}]",
        kind="kinetic_density",
        evaluator=_eval,
        derivative=lambda rho=None, kappa=None, _d=d: _d,
    )


def matrix_element(row: int, col: int, dimension: int) -> PrincipalVariable:
    """The single complex entry rho_{row,col}; declare together with its
    conjugate partner (col, row) or the assembled field cannot be hermitian."""
    k, l = int(row), int(col)
    d = np.zeros((dimension, dimension), dtype=complex)
    d[l, k] = 1.0  # dQ = tr(D drho) picks drho_{kl}
    d.setflags(write=False)
    return PrincipalVariable(
        label=f"rho[{k},{l}]",
        kind="matrix_element",
        evaluator=lambda rho, kappa=None, _k=k, _l=l: complex(as_matrix(rho)[_k, _l]),
        derivative=lambda rho=None, kappa=None, _d=d: _d,
    )


def full_matrix_variables(dimension: int) -> list:
    """Every rho_{kl}; conjugate partners come in pairs by construction."""
    return [matrix_element(k, l, dimension) for k in range(dimension) for l in range(dimension)]


def check_variable_derivative(var: PrincipalVariable, rho, kappa=None, h_step: float = 1e-6) -> float:
    """Max relative error of `derivative` against central differences."""
    rho = as_matrix(rho)
    d = np.asarray(var.derivative(rho, kappa), dtype=complex)
    m = rho.shape[0]
    scale = max(1.0, float(np.abs(d).max()))
    worst = 0.0
    for direction, (comp, i, j) in _density_directions(m):
        fd = (
            complex(var.evaluator(rho + h_step * direction, kappa))
            - complex(var.evaluator(rho - h_step * direction, kappa))
        ) / (2 * h_step)
        if comp == "diag":
            predicted = d[i, i]
        elif comp == "re":
            predicted = d[i, j] + d[j, i]
        else:
            predicted = 1.0j * (d[j, i] - d[i, j])
        worst = max(worst, abs(fd - predicted) / scale)
    return worst


# ---------------------------------------------------------------------------
# energy terms and the partitioned functional


@dataclass(frozen=True)
class EnergyTerm:
    """One additive contribution to the functional.

    Variable-based terms define `fn(values)` and `grad(values)` over the
    labels in `reads`.  Direct terms define `density_fn(rho, kappa)` with the
    matching `density_field` (and `pairing_field` when kappa-dependent);
    direct terms always live in the irregular part.
    """

    name: str
    reads: tuple = ()
    fn: Callable | None = None
    grad: Callable | None = None
    density_fn: Callable | None = None
    density_field: Callable | None = None
    pairing_field: Callable | None = None

    @property
    def direct(self) -> bool:
        return self.density_fn is not None


class KSFunctional:
    """Partitioned functional E_irr[rho(,kappa); q] + E_reg[q].

    `active` lists the labels currently treated as independent q-variables;
    terms assigned to the regular part may read only active labels.  The
    composed energy of rho is independent of the partitioning by construction,
    which is the assertable form of the repartitioning-equivalence property.
    """

    def __init__(self, variables, terms, active, assignment, name="functional"):
        vars_list = list(variables)
        labels = [v.label for v in vars_list]
        if len(set(labels)) != len(labels):
            raise LabelError("duplicate principal-variable labels")
        self.variables = {v.label: v for v in vars_list}
        self.terms = tuple(terms)
        names = [t.name for t in self.terms]
        if len(set(names)) != len(names):
            raise LabelError("duplicate term names")
        self.active = tuple(active)
        for label in self.active:
            if label not in self.variables:
                raise LabelError(f"unknown active label {label!r}")
        self.assignment = dict(assignment)
        for term in self.terms:
            part = self.assignment.get(term.name)
            if part not in ("irr", "reg"):
                raise LabelError(f"term {term.name!r} missing an irr/reg assignment")
            for label in term.reads:
                if label not in self.variables:
                    raise LabelError(f"term {term.name!r} reads unknown label {label!r}")
            if part == "reg":
                if term.direct:
                    raise LabelError(f"direct term {term.name!r} cannot sit in the regular part")
                missing = [l for l in term.reads if l not in self.active]
                if missing:
                    raise LabelError(
                        f"regular term {term.name!r} reads inactive labels {missing}"
                    )
        self.name = name

    # -- bookkeeping ---------------------------------------------------

    @property
    def pairing_aware(self) -> bool:
        return any(t.pairing_field is not None for t in self.terms) or any(
            v.pairing_aware for v in self.variables.values()
        )

    def _needed_labels(self):
        need = set(self.active)
        for term in self.terms:
            need.update(term.reads)
        return need

    def variable_values(self, rho, kappa=None) -> dict:
        return {
            label: self.variables[label].evaluator(rho, kappa)
            for label in self._needed_labels()
        }

    def q_of(self, rho, kappa=None) -> np.ndarray:
        return np.array(
            [complex(self.variables[a].evaluator(rho, kappa)) for a in self.active]
        )

    # -- energies --------------------------------------------------------

    def _term_value(self, term, values, rho, kappa):
        total = 0.0
        if term.fn is not None:
            total += float(np.real(term.fn({l: values[l] for l in term.reads})))
        if term.density_fn is not None:
            total += float(np.real(term.density_fn(rho, kappa)))
        return total

    def energy(self, rho, kappa=None) -> float:
        rho = as_matrix(rho)
        values = self.variable_values(rho, kappa)
        return sum(self._term_value(t, values, rho, kappa) for t in self.terms)

    def e_irr(self, rho, q, kappa=None) -> float:
        rho = as_matrix(rho)
        values = self._values_with_q(rho, q, kappa)
        return sum(
            self._term_value(t, values, rho, kappa)
            for t in self.terms
            if self.assignment[t.name] == "irr"
        )

    def e_reg(self, q) -> float:
        values = dict(zip(self.active, np.atleast_1d(q)))
        return sum(
            float(np.real(t.fn({l: values[l] for l in t.reads})))
            for t in self.terms
            if self.assignment[t.name] == "reg"
        )

    def _values_with_q(self, rho, q, kappa):
        values = dict(zip(self.active, np.atleast_1d(q)))
        for label in self._needed_labels():
            if label not in values:
                values[label] = self.variables[label].evaluator(rho, kappa)
        return values

    # -- fields -----------------------------------------------------------

    def ks_fields(self, rho):
        """(q, multipliers, trap potential Gamma, hamiltonian h) at rho."""
        q, lam, gamma, h, _ = self._assemble_fields(as_matrix(rho), None)
        return q, lam, gamma, h

    def ksbdg_fields(self, rho, kappa):
        """(q, multipliers, hamiltonian h, gap field Delta) at (rho, kappa)."""
        q, lam, _, h, delta = self._assemble_fields(as_matrix(rho), as_matrix(kappa))
        return q, lam, h, delta

    def fields(self, rho, kappa=None):
        """Uniform view used by gradient checks: h or (h, Delta)."""
        if kappa is None:
            return self.ks_fields(rho)[3]
        q, lam, h, delta = self.ksbdg_fields(rho, kappa)
        return h, delta

    def _assemble_fields(self, rho, kappa):
        m = rho.shape[0]
        values = self.variable_values(rho, kappa)
        grads = {
            t.name: (t.grad({l: values[l] for l in t.reads}) if t.grad is not None else {})
            for t in self.terms
        }
        lam = np.zeros(len(self.active), dtype=complex)
        for i, label in enumerate(self.active):
            lam[i] = sum(complex(grads[t.name].get(label, 0.0)) for t in self.terms)
        gamma = np.zeros((m, m), dtype=complex)
        for i, label in enumerate(self.active):
            gamma += lam[i] * np.asarray(self.variables[label].derivative(rho, kappa), dtype=complex)
        h = gamma.copy()
        delta = np.zeros((m, m), dtype=complex) if kappa is not None else None
        for term in self.terms:
            if self.assignment[term.name] != "irr":
                continue
            if term.density_field is not None:
                h += np.asarray(term.density_field(rho, kappa), dtype=complex)
            if delta is not None and term.pairing_field is not None:
                delta += np.asarray(term.pairing_field(rho, kappa), dtype=complex)
            for label in term.reads:
                if label in self.active:
                    continue
                coeff = complex(grads[term.name].get(label, 0.0))
                if coeff == 0.0:
                    continue
                var = self.variables[label]
                h += coeff * np.asarray(var.derivative(rho, kappa), dtype=complex)
                if delta is not None and var.kappa_derivative is not None:
                    delta += coeff * np.asarray(var.kappa_derivative(rho, kappa), dtype=complex)
        if delta is not None:
            for i, label in enumerate(self.active):
                var = self.variables[label]
                if var.kappa_derivative is not None:
                    delta += lam[i] * np.asarray(var.kappa_derivative(rho, kappa), dtype=complex)
        scale = max(1.0, float(np.abs(h).max()))
        if np.abs(h - h.conj().T).max() > HERMITICITY_TOL * scale:
            raise ConjugateMissing(
                "assembled hamiltonian is not hermitian; a complex principal "
                "variable is missing its conjugate partner"
            )
        h = hermitize(h)
        if delta is not None:
            dscale = max(1.0, float(np.abs(delta).max()))
            if np.abs(delta + delta.T).max() > HERMITICITY_TOL * dscale:
                raise ConjugateMissing("assembled gap field is not antisymmetric")
            delta = antisymmetrize(delta)
        q = np.array([complex(values[a]) for a in self.active])
        return q, lam, gamma, h, delta

    def core_matrix(self):
        """Field at vanishing density: the one-body skeleton used for the
        core initial guess."""
        dim = self._dimension_hint()
        zero = np.zeros((dim, dim), dtype=complex)
        if self.pairing_aware:
            return self.ksbdg_fields(zero, zero)[2]
        return self.ks_fields(zero)[3]

    def _dimension_hint(self):
        if getattr(self, "dimension", None):
            return self.dimension
        for var in self.variables.values():
            d = np.asarray(var.derivative(None))
            return d.shape[0]
        raise DimensionError("functional carries no dimension hint; set .dimension")


def ks_fields(functional: KSFunctional, rho):
    return functional.ks_fields(rho)


def ksbdg_fields(functional: KSFunctional, rho, kappa):
    return functional.ksbdg_fields(rho, kappa)


def repartition(functional: KSFunctional, move, direction: str) -> KSFunctional:
    """Move labels between the active q-set and the folded-in pool.

    `to_irregular` deactivates the labels and pulls every regular term that
    reads them into the irregular part; `to_regular` activates the labels and
    pushes pure-variable irregular terms whose reads became fully active back
    to the regular part.  The composed energy of rho is unchanged.
    """
    move = [move] if isinstance(move, str) else list(move)
    for label in move:
        if label not in functional.variables:
            raise LabelError(f"unknown label {label!r}")
    active = list(functional.active)
    assignment = dict(functional.assignment)
    if direction == "to_irregular":
        active = [a for a in active if a not in move]
        for term in functional.terms:
            if assignment[term.name] == "reg" and any(l in move for l in term.reads):
                assignment[term.name] = "irr"
    elif direction == "to_regular":
        for label in move:
            if label not in active:
                active.append(label)
        for term in functional.terms:
            if (
                assignment[term.name] == "irr"
                and not term.direct
                and term.reads
                and all(l in active for l in term.reads)
            ):
                assignment[term.name] = "reg"
    else:
        raise LabelError(f"unknown direction {direction!r}")
    out = KSFunctional(
        functional.variables.values(), functional.terms, active, assignment,
        name=functional.name,
    )
    out.dimension = getattr(functional, "dimension", None)
    return out


# ---------------------------------------------------------------------------
# hamiltonian-backed functionals


def hf_energy_and_field(t, vbar, rho):
    """Mean-field energy and hamiltonian of a two-body hamiltonian.

    E = tr(t rho) + (1/2) sum V_{kk'll'} rho_{lk} rho_{l'k'};
    h_{kl} = t_{kl} + sum V_{kk'll'} rho_{l'k'}.
    """
    t = as_matrix(t)
    rho = as_matrix(rho)
    vbar = np.asarray(vbar, dtype=complex)
    gamma = np.einsum("kKlL,LK->kl", vbar, rho)
    energy = float(np.trace(t @ rho).real + 0.5 * np.trace(gamma @ rho).real)
    return energy, hermitize(t + gamma)


def hfb_energy_and_fields(t, vbar, rho, kappa):
    """Adds the pairing channel: E += (1/4) sum V kappa*_{kk'} kappa_{ll'},
    with the gap field Delta_{kl} = (1/2) sum V_{klmm'} kappa_{mm'}."""
    kappa = as_matrix(kappa)
    vbar = np.asarray(vbar, dtype=complex)
    energy, h = hf_energy_and_field(t, vbar, rho)
    pair_energy = 0.25 * np.einsum("kKlL,kK,lL->", vbar, kappa.conj(), kappa)
    delta = 0.5 * np.einsum("klmn,mn->kl", vbar, kappa)
    return energy + float(pair_energy.real), h, antisymmetrize(delta)


def hf_from_hamiltonian(ham) -> KSFunctional:
    """Mean-field functional of a TwoBodyHamiltonian with an empty q-set."""
    term = EnergyTerm(
        name="mean_field",
        density_fn=lambda rho, kappa=None, _h=ham: hf_energy_and_field(_h.t, _h.vbar, rho)[0],
        density_field=lambda rho, kappa=None, _h=ham: hf_energy_and_field(_h.t, _h.vbar, rho)[1],
    )
    out = KSFunctional([], [term], active=(), assignment={"mean_field": "irr"},
                       name="hf_from_hamiltonian")
    out.dimension = ham.num_orbitals
    return out


def hfb_from_hamiltonian(ham) -> KSFunctional:
    """Pairing-aware functional of a TwoBodyHamiltonian with an empty q-set."""

    def _energy(rho, kappa, _h=ham):
        if kappa is None:
            return hf_energy_and_field(_h.t, _h.vbar, rho)[0]
        return hfb_energy_and_fields(_h.t, _h.vbar, rho, kappa)[0]

    def _field(rho, kappa, _h=ham):
        if kappa is None:
            return hf_energy_and_field(_h.t, _h.vbar, rho)[1]
        return hfb_energy_and_fields(_h.t, _h.vbar, rho, kappa)[1]

    term = EnergyTerm(
        name="mean_field_pairing",
        density_fn=_energy,
        density_field=_field,
        pairing_field=lambda rho, kappa, _h=ham: hfb_energy_and_fields(_h.t, _h.vbar, rho, kappa)[2],
    )
    out = KSFunctional([], [term], active=(), assignment={"mean_field_pairing": "irr"},
                       name="hfb_from_hamiltonian")
    out.dimension = ham.num_orbitals
    return out


# ---------------------------------------------------------------------------
# quasi-local 1D lattice functional


@dataclass(frozen=True)
class LatticeModel1D:
    """Spinless fermions on an open chain with a quasi-local energy density
    H(x) = xi(x)/2m + (t0/2) rho(x)^2 + (t3/12) rho(x)^(gamma+2) + U(x) rho(x).
    """

    num_sites: int
    spacing: float = 1.0
    mass: float = 1.0
    potential: tuple = ()
    t0: float = -2.0
    t3: float = 12.0
    gamma: float = 1.0

    def __post_init__(self):
        if self.num_sites < 2:
            raise DimensionError("lattice needs at least two sites")
        if self.spacing <= 0 or self.gamma <= 0:
            raise InvalidMatrix("spacing and gamma must be positive")
        pot = tuple(float(u) for u in (self.potential or (0.0,) * self.num_sites))
        if len(pot) != self.num_sites:
            raise DimensionError("need one external-potential value per site")
        object.__setattr__(self, "potential", pot)

    @classmethod
    def harmonic(cls, num_sites, spring=0.03, **kwargs):
        center = (num_sites - 1) / 2.0
        pot = tuple(spring * (x - center) ** 2 for x in range(num_sites))
        return cls(num_sites=num_sites, potential=pot, **kwargs)


def lattice_functional(model: LatticeModel1D, active="density",
                       pairing_strength: float | None = None) -> KSFunctional:
    """Partitioned functional for the 1D lattice model.

    `active` chooses the q-set: "density" (standard split: kinetic term folded
    into the irregular part), "density+kinetic" (everything regular, formal
    E_irr), or "none" (everything folded: pure density functional).
    """
    L, a, m = model.num_sites, model.spacing, model.mass
    rho_vars = [site_density(x, L, a) for x in range(L)]
    xi_vars = [kinetic_link_density(x, L, a) for x in range(L - 1)]
    rho_labels = tuple(v.label for v in rho_vars)
    xi_labels = tuple(v.label for v in xi_vars)

    def kinetic_fn(vals, _w=a / (2.0 * m)):
        return _w * sum(vals[l] for l in xi_labels)

    def kinetic_grad(vals, _w=a / (2.0 * m)):
        return {l: _w for l in xi_labels}

    pot = np.asarray(model.potential)

    def external_fn(vals, _a=a):
        return _a * sum(u * vals[l] for u, l in zip(pot, rho_labels))

    def external_grad(vals, _a=a):
        return {l: _a * u for u, l in zip(pot, rho_labels)}

    c2 = a * model.t0 / 2.0

    def contact_fn(vals):
        return c2 * sum(vals[l] ** 2 for l in rho_labels)

    def contact_grad(vals):
        return {l: 2.0 * c2 * vals[l] for l in rho_labels}

    c3 = a * model.t3 / 12.0
    p = model.gamma + 2.0

    def saturation_fn(vals):
        with np.errstate(invalid="ignore"):
            return c3 * float(np.sum(np.power(np.array([vals[l] for l in rho_labels]), p)))

    def saturation_grad(vals):
        with np.errstate(invalid="ignore"):
            dens = np.array([vals[l] for l in rho_labels])
            der = c3 * p * np.power(dens, p - 1.0)
        return dict(zip(rho_labels, der))

    terms = [
        EnergyTerm("kinetic", reads=xi_labels, fn=kinetic_fn, grad=kinetic_grad),
        EnergyTerm("external", reads=rho_labels, fn=external_fn, grad=external_grad),
        EnergyTerm("contact", reads=rho_labels, fn=contact_fn, grad=contact_grad),
        EnergyTerm("saturation", reads=rho_labels, fn=saturation_fn, grad=saturation_grad),
    ]
    if pairing_strength is not None:
        g = float(pairing_strength)

        def link_sum(kappa):
            arr = as_matrix(kappa)
            return sum(arr[x, x + 1] for x in range(L - 1))

        def pair_energy(rho, kappa, _g=g):
            if kappa is None:
                return 0.0
            s = link_sum(kappa)
            return -_g * (s * np.conj(s)).real

        def pair_field(rho, kappa, _g=g):
            s = link_sum(kappa)
            out = np.zeros((L, L), dtype=complex)
            for x in range(L - 1):
                out[x, x + 1] = -_g * s
                out[x + 1, x] = _g * s
            return out

        terms.append(
            EnergyTerm("link_condensate", density_fn=pair_energy, pairing_field=pair_field)
        )

    if active == "density":
        active_labels = rho_labels
    elif active == "density+kinetic":
        active_labels = rho_labels + xi_labels
    elif active == "none":
        active_labels = ()
    else:
        raise LabelError(f"unknown active set {active!r}")

    assignment = {}
    for term in terms:
        if term.direct:
            assignment[term.name] = "irr"
        elif term.reads and all(l in active_labels for l in term.reads):
            assignment[term.name] = "reg"
        else:
            assignment[term.name] = "irr"
    out = KSFunctional(rho_vars + xi_vars, terms, active_labels, assignment,
                       name=f"lattice1d[{active}]")
    out.dimension = L
    return out


def functional_from_config(cfg: dict) -> KSFunctional:
    """Functional from a definition mapping.

    Presets: hf_from_hamiltonian / hfb_from_hamiltonian (with a nested
    "hamiltonian" section), lattice1d, ks_partitioned (lattice1d plus an
    explicit "active" choice).
    """
    from .fock_oracle import hamiltonian_from_config

    cfg = dict(cfg)
    preset = cfg.pop("preset")
    if preset in ("hf_from_hamiltonian", "hfb_from_hamiltonian"):
        ham = hamiltonian_from_config(cfg.pop("hamiltonian"))
        return hf_from_hamiltonian(ham) if preset.startswith("hf_") else hfb_from_hamiltonian(ham)
    if preset in ("lattice1d", "ks_partitioned"):
        active = cfg.pop("active", "density")
        pairing = cfg.pop("pairing_strength", None)
        pot = cfg.pop("potential", None)
        spring = cfg.pop("spring", None)
        num_sites = int(cfg.pop("L"))
        if isinstance(pot, dict):
            if pot.get("kind", "harmonic") != "harmonic":
                raise LabelError(f"unknown potential kind {pot.get('kind')!r}")
            spring = float(pot.get("spring", 0.03))
            pot = "harmonic"
        if pot in (None, "harmonic") and spring is not None or pot == "harmonic":
            model = LatticeModel1D.harmonic(num_sites, spring=float(spring or 0.03), **cfg)
        else:
            model = LatticeModel1D(num_sites=num_sites, potential=tuple(pot) if pot else (), **cfg)
        return lattice_functional(model, active=active, pairing_strength=pairing)
    raise LabelError(f"unknown functional preset {preset!r}")


# ---------------------------------------------------------------------------
# finite-difference gradient checking


def _density_directions(m):
    for i in range(m):
        yield _unit(m, i, i, 1.0), ("diag", i, i)
    for i in range(m):
        for j in range(i + 1, m):
            d = np.zeros((m, m), dtype=complex)
            d[i, j] = d[j, i] = 1.0
            yield d, ("re", i, j)
            d = np.zeros((m, m), dtype=complex)
            d[i, j] = 1.0j
            d[j, i] = -1.0j
            yield d, ("im", i, j)


def _unit(m, i, j, v):
    d = np.zeros((m, m), dtype=complex)
    d[i, j] = v
    return d


def fd_gradient_check(functional, rho, kappa=None, h_step: float = 1e-5) -> float:
    """Max relative deviation of the analytic fields from central differences.

    Components with non-finite finite differences (evaluation off the
    functional's domain, e.g. fractional powers probed across zero density)
    report as +inf rather than raising.
    """
    rho = as_matrix(rho)
    m = rho.shape[0]
    energy = functional.energy
    if kappa is None:
        h = functional.fields(rho)
        fields_scale = max(1.0, float(np.abs(h).max()))
        delta = None
    else:
        kappa = as_matrix(kappa)
        h, delta = functional.fields(rho, kappa)
        fields_scale = max(1.0, float(np.abs(h).max()), float(np.abs(delta).max()))
    worst = 0.0

    def fd(plus, minus):
        try:
            ep = energy(*plus) if kappa is not None else energy(plus[0])
            em = energy(*minus) if kappa is not None else energy(minus[0])
        except (ValueError, FloatingPointError):
            return np.nan
        return (ep - em) / (2 * h_step)

    for direction, (comp, i, j) in _density_directions(m):
        plus = (rho + h_step * direction, kappa)
        minus = (rho - h_step * direction, kappa)
        value = fd(plus, minus)
        if comp == "diag":
            predicted = h[i, i].real
        elif comp == "re":
            predicted = 2 * h[i, j].real
        else:
            predicted = 2 * h[i, j].imag
        err = abs(value - predicted) / fields_scale
        worst = max(worst, err if np.isfinite(err) else np.inf)
    if kappa is not None and delta is not None:
        for i in range(m):
            for j in range(i + 1, m):
                for comp in ("re", "im"):
                    d = np.zeros((m, m), dtype=complex)
                    if comp == "re":
                        d[i, j], d[j, i] = 1.0, -1.0
                        predicted = 2 * delta[i, j].real
                    else:
                        d[i, j], d[j, i] = 1.0j, -1.0j
                        predicted = 2 * delta[i, j].imag
                    value = fd((rho, kappa + h_step * d), (rho, kappa - h_step * d))
                    err = abs(value - predicted) / fields_scale
                    worst = max(worst, err if np.isfinite(err) else np.inf)
    return float(worst)
