"""Experiment orchestration: dataset synthesis, training runs, sweeps, reports.

A Scenario pins every knob of an experiment. Each run derives its own seed
stream from (master_seed, run_id), so runs are independent, reproducible, and
safe to execute in parallel; aggregation sorts by (run_id, algorithm) so the
output never depends on completion order.
"""

from __future__ import annotations

import csv
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from . import baselines, featpipe, gscm, optim
from .featpipe import Codebook, FeatureVector
from .gscm import ChannelVector, Geometry, GscmParams
from .neuralnet import NetShape, predict_batch

MIN_USER_CLEARANCE = 0.1  # meters; users this close to an object are resampled


@dataclass
class Scenario:
    """Full experiment configuration (geometry, propagation, learning, runs)."""

    radius_m: float = 700.0
    n_antennas: int = 100
    n_scatterers: int = 20
    n_small_cells: int = 5
    small_cell_positions: tuple = ()  # empty -> default ring layout
    rician_k_db: float = 10.0
    pathloss_exponent: float = 2.0
    wavelength_m: float = 0.15
    quant_levels: int = 16
    hidden_units: int = 50
    lambda_reg: float = 1e-4
    max_iters: int = 200
    reg_include_bias: bool = False
    n_users: int = 2000
    n_runs: int = 50
    train_fraction: float = 0.5
    knn_k_list: tuple = (24, 32, 40, 48)
    master_seed: int = 1
    jobs: int = 1

    def __post_init__(self):
        if self.n_users < 2:
            raise ValueError("n_users must be >= 2")
        if not 0.0 < self.train_fraction < 1.0:
            raise ValueError("train_fraction must be in (0, 1)")
        for name in (
            "radius_m",
            "n_antennas",
            "n_small_cells",
            "quant_levels",
            "hidden_units",
            "max_iters",
            "n_runs",
            "wavelength_m",
            "jobs",
        ):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.n_scatterers < 0:
            raise ValueError("n_scatterers must be >= 0")
        if self.quant_levels < 2:
            raise ValueError("quant_levels must be >= 2")
        if any(k < 1 for k in self.knn_k_list):
            raise ValueError("knn_k_list entries must be >= 1")

    def cell_layout(self) -> np.ndarray:
        """Configured cell positions, or an even ring at half the coverage radius."""
        if len(self.small_cell_positions) > 0:
            pts = np.asarray(self.small_cell_positions, dtype=float).reshape(-1, 2)
            if len(pts) != self.n_small_cells:
                raise ValueError(
                    f"{len(pts)} small_cell_positions given, n_small_cells={self.n_small_cells}"
                )
            return pts
        k = self.n_small_cells
        angles = np.pi * np.arange(1, k + 1) / (k + 1)
        r = 0.5 * self.radius_m
        return np.column_stack([r * np.cos(angles), r * np.sin(angles)])

    def gscm_params(self) -> GscmParams:
        return GscmParams(
            rician_k_db=self.rician_k_db, pathloss_exponent=self.pathloss_exponent
        )

    def make_geometry(self, scatterers: np.ndarray, gains: np.ndarray) -> Geometry:
        return Geometry(
            macro_array_origin=np.zeros(2),
            array_orientation=np.array([1.0, 0.0]),
            n_antennas=self.n_antennas,
            antenna_spacing=self.wavelength_m / 2.0,
            small_cell_positions=self.cell_layout(),
            scatterer_positions=scatterers,
            scatterer_gains=gains,
            coverage_radius=self.radius_m,
            wavelength=self.wavelength_m,
        )


@dataclass
class LabeledSample:
    """One user: location, both channels, the true best cell, and (later) features."""

    location: np.ndarray
    h_o: ChannelVector
    h_u: ChannelVector
    label: int
    feature: FeatureVector | None = None


@dataclass
class RunResult:
    run_id: int
    algorithm: str
    n_antennas: int
    n_scatterers: int
    test_accuracy: float
    note: str = ""


def derive_seed(*keys) -> int:
    """Stable integer seed from a tuple of integers (fixed splitting rule)."""
    ss = np.random.SeedSequence([int(k) for k in keys])
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def _sample_users(rng, scenario: Scenario, geometry: Geometry, n: int) -> np.ndarray:
    """Uniform users over the half-disc, resampling near-collisions."""
    obstacles = np.vstack(
        [
            geometry.macro_array_origin[None, :],
            geometry.small_cell_positions,
            geometry.scatterer_positions.reshape(-1, 2),
        ]
    )
    users = gscm.sample_half_disc(rng, n, scenario.radius_m)
    for _ in range(100):
        d = np.linalg.norm(users[:, None, :] - obstacles[None, :, :], axis=2)
        bad = np.min(d, axis=1) < MIN_USER_CLEARANCE
        if not bad.any():
            break
        users[bad] = gscm.sample_half_disc(rng, int(bad.sum()), scenario.radius_m)
    return users


def generate_dataset(scenario: Scenario, run_seed: int) -> list[LabeledSample]:
    """Fresh scatterers, reflection coefficients, and users for one run."""
    scat = gscm.place_scatterers(
        derive_seed(run_seed, 0),
        scenario.n_scatterers,
        scenario.make_geometry(np.empty((0, 2)), np.empty(0, dtype=complex)),
    )
    gains = gscm.draw_scatterer_gains(derive_seed(run_seed, 1), scenario.n_scatterers)
    geometry = scenario.make_geometry(scat, gains)
    params = scenario.gscm_params()
    rng = np.random.default_rng(derive_seed(run_seed, 2))
    users = _sample_users(rng, scenario, geometry, scenario.n_users)

    h_o_all = gscm.batch_array_channels(users, geometry, params)
    h_u_all = gscm.batch_cell_channels(users, geometry, params)
    labels = np.argmax(np.abs(h_u_all), axis=1)
    return [
        LabeledSample(
            location=users[i],
            h_o=ChannelVector(h_o_all[i], role="observable"),
            h_u=ChannelVector(h_u_all[i], role="unobservable"),
            label=int(labels[i]),
        )
        for i in range(len(users))
    ]


def split(dataset: list, train_fraction: float, seed: int):
    """Seeded shuffle into disjoint, exhaustive (train, test) lists."""
    if not 0.0 < train_fraction < 1.0:
        raise ValueError("train_fraction must be in (0, 1)")
    order = np.random.default_rng(seed).permutation(len(dataset))
    n_train = int(round(train_fraction * len(dataset)))
    train = [dataset[i] for i in order[:n_train]]
    test = [dataset[i] for i in order[n_train:]]
    return train, test


def build_features(train, test, scenario: Scenario) -> Codebook:
    """Train the codebook on the training split only; featurize both splits."""
    train_logmags = [
        featpipe.log_compress(featpipe.angular_magnitude(s.h_o)) for s in train
    ]
    codebook = featpipe.lloyd_train(
        np.concatenate(train_logmags), scenario.quant_levels
    )
    for s, lm in zip(train, train_logmags):
        s.feature = featpipe.quantize_normalize(lm, codebook)
    for s in test:
        s.feature = featpipe.make_feature(s.h_o, codebook)
    return codebook


def _accuracy(predicted: np.ndarray, labels: np.ndarray) -> float:
    return float(np.mean(np.asarray(predicted) == np.asarray(labels)))


ALL_ALGORITHMS = ("NN-CR", "NN-LO", "KNN", "RS")


def run_once(
    scenario: Scenario, run_seed: int, algorithms=ALL_ALGORITHMS
) -> list[RunResult]:
    """One full run: generate, split, train every requested algorithm, score."""
    dataset = generate_dataset(scenario, run_seed)
    train, test = split(dataset, scenario.train_fraction, derive_seed(run_seed, 3))
    test_labels = np.array([s.label for s in test])
    opts = optim.OptimOptions(max_iters=scenario.max_iters)
    results = []

    def add(name, acc, note=""):
        results.append(
            RunResult(
                run_id=0,
                algorithm=name,
                n_antennas=scenario.n_antennas,
                n_scatterers=scenario.n_scatterers,
                test_accuracy=acc,
                note=note,
            )
        )

    if "NN-CR" in algorithms:
        build_features(train, test, scenario)
        shape = NetShape(
            (scenario.n_antennas, scenario.hidden_units, scenario.n_small_cells)
        )
        params, report = optim.train(
            train,
            shape,
            scenario.lambda_reg,
            opts,
            seed=derive_seed(run_seed, 4),
            reg_include_bias=scenario.reg_include_bias,
        )
        x_test = np.vstack([s.feature.values for s in test])
        add("NN-CR", _accuracy(predict_batch(params, x_test), test_labels), report.stop_reason)

    if "NN-LO" in algorithms:
        params, report = baselines.nnlo_train(
            [s.location for s in train],
            [s.label for s in train],
            scenario.radius_m,
            scenario.n_small_cells,
            hidden_units=scenario.hidden_units,
            lam=scenario.lambda_reg,
            opts=opts,
            seed=derive_seed(run_seed, 5),
            reg_include_bias=scenario.reg_include_bias,
        )
        pred = baselines.nnlo_predict(
            params, [s.location for s in test], scenario.radius_m
        )
        add("NN-LO", _accuracy(pred, test_labels), report.stop_reason)

    if "KNN" in algorithms:
        queries = np.vstack([baselines.stack_channel(s.h_o) for s in test])
        train_channels = [s.h_o for s in train]
        train_labels = [s.label for s in train]
        for k in scenario.knn_k_list:
            model = baselines.build_knn(train_channels, train_labels, k)
            add(f"KNN(k={k})", _accuracy(baselines.knn_predict_batch(model, queries), test_labels))

    if "RS" in algorithms:
        rng = np.random.default_rng(derive_seed(run_seed, 6))
        pred = np.array(
            [baselines.rs_predict(rng, scenario.n_small_cells) for _ in test]
        )
        add("RS", _accuracy(pred, test_labels))

    return results


def _run_indexed(args):
    scenario, run_id, algorithms = args
    run_seed = derive_seed(scenario.master_seed, run_id)
    results = run_once(scenario, run_seed, algorithms)
    for r in results:
        r.run_id = run_id
    return results


def run_experiment(scenario: Scenario, algorithms=ALL_ALGORITHMS) -> list[RunResult]:
    """All runs of one scenario; parallel across runs when jobs > 1."""
    tasks = [(scenario, run_id, algorithms) for run_id in range(scenario.n_runs)]
    if scenario.jobs > 1:
        with ProcessPoolExecutor(max_workers=scenario.jobs) as pool:
            chunks = list(pool.map(_run_indexed, tasks))
    else:
        chunks = [_run_indexed(t) for t in tasks]
    results = [r for chunk in chunks for r in chunk]
    results.sort(key=lambda r: (r.run_id, r.algorithm))
    return results


def aggregate(results: list[RunResult]) -> list[tuple]:
    """Rows (algorithm, n_antennas, n_scatterers, mean_acc, std_acc, n_runs)."""
    groups = {}
    for r in results:
        groups.setdefault((r.algorithm, r.n_antennas, r.n_scatterers), []).append(
            r.test_accuracy
        )
    rows = []
    for key in sorted(groups):
        accs = np.array(groups[key])
        rows.append(key + (float(accs.mean()), float(accs.std()), len(accs)))
    return rows


def sweep(
    scenario: Scenario, antennas_list, scatterers_list, algorithms=("NN-CR",)
) -> list[RunResult]:
    """Cartesian grid over antenna / scatterer counts with a shared seed stream."""
    results = []
    for n_ant in antennas_list:
        for n_scat in scatterers_list:
            cfg = replace(scenario, n_antennas=n_ant, n_scatterers=n_scat)
            results.extend(run_experiment(cfg, algorithms))
    return results


def channel_pair_distance(
    user_a, user_b, geometry: Geometry, params: GscmParams
) -> tuple[float, float]:
    """(geographical distance, distance between unit-normalized array responses)."""
    users = np.vstack([user_a, user_b])
    h = gscm.batch_array_channels(users, geometry, params)
    h_unit = h / np.linalg.norm(h, axis=1)[:, None]
    return (
        float(np.linalg.norm(users[0] - users[1])),
        float(np.linalg.norm(h_unit[0] - h_unit[1])),
    )


def distance_study(scenario: Scenario, n_pairs: int) -> list[tuple]:
    """Rows (pair_id, geo_dist_m, channel_dist) over freshly drawn user pairs.

    Each pair gets its own scatterer drop, mirroring independent simulation
    runs of the invertibility experiment.
    """
    if n_pairs < 1:
        raise ValueError("n_pairs must be >= 1")
    rows = []
    for pair_id in range(n_pairs):
        pair_seed = derive_seed(scenario.master_seed, 7, pair_id)
        empty = scenario.make_geometry(np.empty((0, 2)), np.empty(0, dtype=complex))
        scat = gscm.place_scatterers(
            derive_seed(pair_seed, 0), scenario.n_scatterers, empty
        )
        gains = gscm.draw_scatterer_gains(derive_seed(pair_seed, 1), scenario.n_scatterers)
        geometry = scenario.make_geometry(scat, gains)
        rng = np.random.default_rng(derive_seed(pair_seed, 2))
        users = _sample_users(rng, scenario, geometry, 2)
        geo, chan = channel_pair_distance(
            users[0], users[1], geometry, scenario.gscm_params()
        )
        rows.append((pair_id, geo, chan))
    return rows


def decile_minima(rows: list[tuple]) -> list[float]:
    """Minimum channel distance within each geographical-distance decile."""
    geo = np.array([r[1] for r in rows])
    chan = np.array([r[2] for r in rows])
    edges = np.quantile(geo, np.linspace(0, 1, 11))
    minima = []
    for i in range(10):
        if i < 9:
            mask = (geo >= edges[i]) & (geo < edges[i + 1])
        else:
            mask = (geo >= edges[i]) & (geo <= edges[i + 1])
        minima.append(float(chan[mask].min()) if mask.any() else np.nan)
    return minima


def write_results_csv(results: list[RunResult], path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["run_id", "algorithm", "n_antennas", "n_scatterers", "accuracy"])
        for r in results:
            w.writerow(
                [r.run_id, r.algorithm, r.n_antennas, r.n_scatterers, repr(r.test_accuracy)]
            )


def write_aggregate_csv(rows: list[tuple], path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(
            ["algorithm", "n_antennas", "n_scatterers", "mean_acc", "std_acc", "n_runs"]
        )
        for alg, n_ant, n_scat, mean, std, n in rows:
            w.writerow([alg, n_ant, n_scat, repr(mean), repr(std), n])


def write_distance_csv(rows: list[tuple], path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["pair_id", "geo_dist_m", "channel_dist"])
        for pair_id, geo, chan in rows:
            w.writerow([pair_id, repr(geo), repr(chan)])


def write_geometry_csv(geometry: Geometry, path, users=None) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["kind", "x", "y"])
        for kind, x, y in gscm.geometry_table(geometry, users):
            w.writerow([kind, repr(x), repr(y)])
