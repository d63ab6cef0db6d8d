import numpy as np
import pytest

from impscat import Box, Medium, PlaneWave, Sphere, TriMesh, compute_shape_matrices


@pytest.fixture(scope="session")
def medium():
    return Medium(epsilon0=1.0, mu0=1.0, omega=1.0)


@pytest.fixture(scope="session")
def plane_wave():
    return PlaneWave(amplitude=[1.0, 0.0, 0.0], direction=[0.0, 0.0, 1.0])


@pytest.fixture(scope="session")
def sphere_matrices():
    return compute_shape_matrices(Sphere(radius=1.0), order=32)


@pytest.fixture(scope="session")
def unit_box():
    return Box(lo=[0.0, 0.0, 0.0], hi=[1.0, 1.0, 1.0])


def cube_mesh(edge=1.0):
    """Closed, outward-oriented cube mesh with 12 triangles."""
    e = edge
    v = np.array(
        [
            [0, 0, 0], [e, 0, 0], [e, e, 0], [0, e, 0],
            [0, 0, e], [e, 0, e], [e, e, e], [0, e, e],
        ],
        dtype=float,
    )
    f = np.array(
        [
            [0, 2, 1], [0, 3, 2],  # bottom (z=0), normal -z
            [4, 5, 6], [4, 6, 7],  # top (z=e), normal +z
            [0, 1, 5], [0, 5, 4],  # y=0, normal -y
            [2, 3, 7], [2, 7, 6],  # y=e, normal +y
            [1, 2, 6], [1, 6, 5],  # x=e, normal +x
            [3, 0, 4], [3, 4, 7],  # x=0, normal -x
        ]
    )
    return TriMesh(v, f)


def icosphere(n_subdiv=2, radius=1.0):
    """Icosahedron subdivided n times and projected to the sphere."""
    phi = (1.0 + np.sqrt(5.0)) / 2.0
    verts = np.array(
        [
            [-1, phi, 0], [1, phi, 0], [-1, -phi, 0], [1, -phi, 0],
            [0, -1, phi], [0, 1, phi], [0, -1, -phi], [0, 1, -phi],
            [phi, 0, -1], [phi, 0, 1], [-phi, 0, -1], [-phi, 0, 1],
        ],
        dtype=float,
    )
    verts /= np.linalg.norm(verts, axis=1)[:, None]
    faces = [
        (0, 11, 5), (0, 5, 1), (0, 1, 7), (0, 7, 10), (0, 10, 11),
        (1, 5, 9), (5, 11, 4), (11, 10, 2), (10, 7, 6), (7, 1, 8),
        (3, 9, 4), (3, 4, 2), (3, 2, 6), (3, 6, 8), (3, 8, 9),
        (4, 9, 5), (2, 4, 11), (6, 2, 10), (8, 6, 7), (9, 8, 1),
    ]
    verts = [tuple(v) for v in verts]
    for _ in range(n_subdiv):
        cache = {}
        new_faces = []

        def midpoint(i, j):
            key = (min(i, j), max(i, j))
            if key not in cache:
                m = np.asarray(verts[i]) + np.asarray(verts[j])
                m /= np.linalg.norm(m)
                verts.append(tuple(m))
                cache[key] = len(verts) - 1
            return cache[key]

        for a, b, c in faces:
            ab, bc, ca = midpoint(a, b), midpoint(b, c), midpoint(c, a)
            new_faces += [(a, ab, ca), (b, bc, ab), (c, ca, bc), (ab, bc, ca)]
        faces = new_faces
    return TriMesh(radius * np.asarray(verts, dtype=float), np.asarray(faces))
