"""Built-in catalog of scalar fields on the plane.

Fields are looked up by name with keyword parameters, e.g.
``make_field("constant", value=10.0)``. Each field knows its value,
gradient, Hessian and bilaplacian in closed form, which the manufactured
solution checks and the exact-error norms rely on.
"""
import numpy as np

PI = np.pi


class Field:
    name = "field"

    def __init__(self, **params):
        self.params = params

    def __call__(self, x, y):
        raise NotImplementedError

    def gradient(self, x, y):
        raise NotImplementedError

    def hessian(self, x, y):
        raise NotImplementedError

    def laplacian(self, x, y):
        H = self.hessian(x, y)
        return H[..., 0, 0] + H[..., 1, 1]

    def bilaplacian(self, x, y):
        raise NotImplementedError

    def describe(self):
        return {"name": self.name, "params": dict(self.params)}

    def __repr__(self):
        args = ", ".join(f"{k}={v!r}" for k, v in self.params.items())
        return f"{self.name}({args})"


def _stack_hessian(hxx, hxy, hyy):
    hxx, hxy, hyy = np.broadcast_arrays(hxx, hxy, hyy)
    return np.stack([np.stack([hxx, hxy], -1), np.stack([hxy, hyy], -1)], -2)


class Constant(Field):
    name = "constant"

    def __init__(self, value=0.0):
        super().__init__(value=float(value))
        self.value = float(value)

    def __call__(self, x, y):
        return np.full(np.broadcast(x, y).shape, self.value)

    def gradient(self, x, y):
        return np.zeros(np.broadcast(x, y).shape + (2,))

    def hessian(self, x, y):
        return np.zeros(np.broadcast(x, y).shape + (2, 2))

    def bilaplacian(self, x, y):
        return np.zeros(np.broadcast(x, y).shape)


class SinSin(Field):
    """amplitude * sin(pi x) sin(pi y)"""

    name = "sinsin"

    def __init__(self, amplitude=1.0):
        super().__init__(amplitude=float(amplitude))
        self.a = float(amplitude)

    def __call__(self, x, y):
        return self.a * np.sin(PI * x) * np.sin(PI * y)

    def gradient(self, x, y):
        sx, sy = np.sin(PI * x), np.sin(PI * y)
        cx, cy = np.cos(PI * x), np.cos(PI * y)
        return self.a * PI * np.stack([cx * sy, sx * cy], -1)

    def hessian(self, x, y):
        sx, sy = np.sin(PI * x), np.sin(PI * y)
        cx, cy = np.cos(PI * x), np.cos(PI * y)
        c = self.a * PI**2
        return _stack_hessian(-c * sx * sy, c * cx * cy, -c * sx * sy)

    def bilaplacian(self, x, y):
        return 4.0 * PI**4 * self(x, y)


class ManufacturedRhs(SinSin):
    """Desired state (4 pi^4 beta + 1) sin(pi x) sin(pi y) whose optimal
    unconstrained state is sin(pi x) sin(pi y)."""

    name = "manufactured_rhs"

    def __init__(self, beta=1.0):
        super().__init__(amplitude=4.0 * PI**4 * float(beta) + 1.0)
        self.params = {"beta": float(beta)}


class Paraboloid(Field):
    """base + curvature * ((x - cx)^2 + (y - cy)^2)"""

    name = "paraboloid_obstacle"

    def __init__(self, base=0.05, curvature=0.5, cx=0.5, cy=0.5):
        super().__init__(base=float(base), curvature=float(curvature), cx=float(cx), cy=float(cy))
        self.base, self.k, self.cx, self.cy = float(base), float(curvature), float(cx), float(cy)

    def __call__(self, x, y):
        return self.base + self.k * ((x - self.cx) ** 2 + (y - self.cy) ** 2)

    def gradient(self, x, y):
        return 2.0 * self.k * np.stack(np.broadcast_arrays(x - self.cx, y - self.cy), -1)

    def hessian(self, x, y):
        shape = np.broadcast(x, y).shape
        return _stack_hessian(np.full(shape, 2 * self.k), np.zeros(shape), np.full(shape, 2 * self.k))

    def bilaplacian(self, x, y):
        return np.zeros(np.broadcast(x, y).shape)


class Quadratic(Field):
    """General quadratic c + bx x + by y + axx x^2 + axy x y + ayy y^2."""

    name = "quadratic"

    def __init__(self, c=0.0, bx=0.0, by=0.0, axx=0.0, axy=0.0, ayy=0.0):
        p = dict(c=c, bx=bx, by=by, axx=axx, axy=axy, ayy=ayy)
        super().__init__(**{k: float(v) for k, v in p.items()})
        self.p = self.params

    def __call__(self, x, y):
        p = self.p
        return p["c"] + p["bx"] * x + p["by"] * y + p["axx"] * x * x + p["axy"] * x * y + p["ayy"] * y * y

    def gradient(self, x, y):
        p = self.p
        return np.stack(np.broadcast_arrays(p["bx"] + 2 * p["axx"] * x + p["axy"] * y,
                                            p["by"] + p["axy"] * x + 2 * p["ayy"] * y), -1)

    def hessian(self, x, y):
        p = self.p
        shape = np.broadcast(x, y).shape
        return _stack_hessian(np.full(shape, 2 * p["axx"]), np.full(shape, p["axy"]),
                              np.full(shape, 2 * p["ayy"]))

    def bilaplacian(self, x, y):
        return np.zeros(np.broadcast(x, y).shape)


CATALOG = {cls.name: cls for cls in (Constant, SinSin, ManufacturedRhs, Paraboloid, Quadratic)}


def make_field(name, **params):
    """Instantiate a catalog field by name."""
    try:
        cls = CATALOG[name]
    except KeyError:
        raise ValueError(f"unknown field {name!r}; known: {sorted(CATALOG)}") from None
    try:
        return cls(**params)
    except TypeError as exc:
        raise ValueError(f"bad parameters for field {name!r}: {exc}") from None


def as_field(spec):
    """Accept a Field, a number, a name, or a ``{"name", "params"}`` mapping."""
    if isinstance(spec, Field):
        return spec
    if isinstance(spec, (int, float)):
        return Constant(spec)
    if isinstance(spec, str):
        return make_field(spec)
    if isinstance(spec, dict):
        return make_field(spec["name"], **spec.get("params", {}))
    raise TypeError(f"cannot build a field from {spec!r}")
