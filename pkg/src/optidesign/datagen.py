"""Synthetic pools, random baselines, and the cold-start rating pipeline.

Pool generator: A_e entries i.i.d. N(0, 1/p), R_e = noise_var * I,
R_theta = prior_var * I, H = I, theta_bar = 0, all driven by numpy's seeded
PCG64 generator (reproducible within this implementation).

SNR convention for the dB sweeps: the axis is referenced to the prior signal
energy E||theta||^2 = p * prior_var, i.e.

    noise_var = p * prior_var * 10^(-snr_db / 10).

The mean per-experiment information trace is then
E[gamma_e] = n_e / noise_var = (n_e / (p * prior_var)) * 10^(snr_db/10).

Ratings side: a CSV `user,movie,rating[,genre]` is loaded into a table; each
movie becomes one scalar-observation experiment whose row collects the movie's
training-user ratings (missing entries imputed as zero or the movie mean), and
test users are scored by MAE over their held-out ratings plus a
favorite-genre error rate.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from . import model
from .errors import DimensionMismatch, EmptyTraining, ParseError

__all__ = [
    "SynthSpec",
    "RatingsTable",
    "RecsysEval",
    "synth_pool",
    "random_design",
    "noise_var_for_snr_db",
    "load_ratings",
    "save_ratings",
    "synth_ratings",
    "build_recsys_pool",
    "evaluate_recsys",
]


@dataclass(frozen=True)
class SynthSpec:
    """Parameters of the synthetic pool generator."""

    p: int
    n_e: int
    pool_size: int
    noise_var: float
    prior_var: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if min(self.p, self.n_e, self.pool_size) < 1:
            raise ValueError("p, n_e and pool_size must be positive")
        if self.noise_var <= 0 or self.prior_var <= 0:
            raise ValueError("noise_var and prior_var must be positive")


def noise_var_for_snr_db(snr_db: float, p: int, prior_var: float = 1.0) -> float:
    """Noise variance realizing a given SNR in dB (see module docstring)."""
    return p * prior_var * 10.0 ** (-snr_db / 10.0)


def synth_pool(spec: SynthSpec) -> model.Pool:
    """Generate a pool from a SynthSpec; deterministic for a given seed."""
    rng = np.random.default_rng(spec.seed)
    A_all = rng.normal(0.0, np.sqrt(1.0 / spec.p), size=(spec.pool_size, spec.n_e, spec.p))
    R = spec.noise_var * np.eye(spec.n_e)
    experiments = tuple(
        model.make_experiment(i, A_all[i], R) for i in range(spec.pool_size)
    )
    return model.Pool(
        experiments=experiments,
        prior_mean=np.zeros(spec.p),
        prior_cov=spec.prior_var * np.eye(spec.p),
        target=np.eye(spec.p),
    )


def random_design(pool: model.Pool, k: int, seed: int) -> model.Design:
    """k i.i.d. uniform draws over the pool, with replacement."""
    if pool.n_experiments == 0:
        raise ValueError("pool is empty")
    rng = np.random.default_rng(seed)
    ids = pool.ids
    draws = rng.integers(0, len(ids), size=k)
    return model.Design.from_ids(ids[i] for i in draws)


# ---------------------------------------------------------------------------
# Ratings ingestion and the cold-start pipeline.


@dataclass
class RatingsTable:
    """Users x movies rating matrix with NaN marking missing entries."""

    users: tuple[str, ...]
    movies: tuple[str, ...]
    ratings: np.ndarray = field(repr=False)
    genres: tuple[str | None, ...] = ()

    def __post_init__(self):
        self.users = tuple(self.users)
        self.movies = tuple(self.movies)
        self.ratings = np.asarray(self.ratings, dtype=float)
        if self.ratings.shape != (len(self.users), len(self.movies)):
            raise DimensionMismatch(
                f"ratings shape {self.ratings.shape} does not match "
                f"{len(self.users)} users x {len(self.movies)} movies"
            )
        if not self.genres:
            self.genres = (None,) * len(self.movies)
        self.genres = tuple(self.genres)
        if len(self.genres) != len(self.movies):
            raise DimensionMismatch("one genre entry per movie required")
        self._user_index = {u: i for i, u in enumerate(self.users)}
        self._movie_index = {m: j for j, m in enumerate(self.movies)}

    @property
    def has_genres(self) -> bool:
        return any(g is not None for g in self.genres)

    def user_row(self, user: str) -> np.ndarray:
        return self.ratings[self._user_index[user]]


def load_ratings(path) -> RatingsTable:
    """Parse a `user,movie,rating[,genre]` CSV into a RatingsTable.

    Users and movies are ordered lexicographically. Raises ParseError (with
    the 1-based line number) on malformed rows, duplicate (user, movie) pairs,
    or conflicting genre labels for one movie.
    """
    entries: dict[tuple[str, str], float] = {}
    genre_of: dict[str, str] = {}
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ParseError("empty file", 1) from None
        header = [h.strip().lower() for h in header]
        if header not in (["user", "movie", "rating"], ["user", "movie", "rating", "genre"]):
            raise ParseError(
                "header must be user,movie,rating or user,movie,rating,genre", 1
            )
        with_genre = len(header) == 4
        for line_no, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise ParseError(f"expected {len(header)} fields, got {len(row)}", line_no)
            user, movie = row[0].strip(), row[1].strip()
            if not user or not movie:
                raise ParseError("empty user or movie id", line_no)
            try:
                rating = float(row[2])
            except ValueError:
                raise ParseError(f"rating {row[2]!r} is not a number", line_no) from None
            if not np.isfinite(rating):
                raise ParseError(f"rating {rating} is not finite", line_no)
            if (user, movie) in entries:
                raise ParseError(f"duplicate rating for ({user}, {movie})", line_no)
            entries[(user, movie)] = rating
            if with_genre:
                genre = row[3].strip()
                if not genre:
                    raise ParseError("empty genre label", line_no)
                if genre_of.get(movie, genre) != genre:
                    raise ParseError(
                        f"movie {movie} labeled {genre!r} but earlier {genre_of[movie]!r}",
                        line_no,
                    )
                genre_of[movie] = genre
    users = tuple(sorted({u for u, _ in entries}))
    movies = tuple(sorted({m for _, m in entries}))
    ratings = np.full((len(users), len(movies)), np.nan)
    u_idx = {u: i for i, u in enumerate(users)}
    m_idx = {m: j for j, m in enumerate(movies)}
    for (u, m), r in entries.items():
        ratings[u_idx[u], m_idx[m]] = r
    genres = tuple(genre_of.get(m) for m in movies) if genre_of else ()
    return RatingsTable(users=users, movies=movies, ratings=ratings, genres=genres)


def save_ratings(table: RatingsTable, path) -> None:
    """Write a RatingsTable back to the CSV interchange format."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        if table.has_genres:
            writer.writerow(["user", "movie", "rating", "genre"])
        else:
            writer.writerow(["user", "movie", "rating"])
        for i, user in enumerate(table.users):
            for j, movie in enumerate(table.movies):
                r = table.ratings[i, j]
                if np.isnan(r):
                    continue
                if table.has_genres:
                    writer.writerow([user, movie, repr(float(r)), table.genres[j]])
                else:
                    writer.writerow([user, movie, repr(float(r))])


def synth_ratings(
    n_users: int,
    n_movies: int,
    rank: int,
    noise_sd: float,
    seed: int,
    n_genres: int = 4,
    offset: float = 3.0,
    missing_frac: float = 0.0,
) -> RatingsTable:
    """Low-rank-plus-noise ratings with genre structure.

    ratings = offset + U V^T / sqrt(rank) + noise_sd * N, where each movie's
    factor is drawn around a genre center so favorite-genre prediction is a
    meaningful task. rank=1 with noise_sd=0 and offset=0 gives an exactly
    rank-1 (outer product) table.
    """
    rng = np.random.default_rng(seed)
    genres = tuple(f"g{i}" for i in range(n_genres))
    movie_genre = tuple(genres[j % n_genres] for j in range(n_movies))
    centers = rng.normal(0.0, 1.0, size=(n_genres, rank))
    U = rng.normal(0.0, 1.0, size=(n_users, rank))
    if rank == 1 and noise_sd == 0.0 and offset == 0.0:
        # Strictly positive factors keep the outer-product table well scaled.
        U = rng.uniform(0.5, 1.5, size=(n_users, 1))
        V = rng.uniform(0.5, 1.5, size=(n_movies, 1))
    else:
        V = np.vstack(
            [centers[j % n_genres] + 0.5 * rng.normal(size=rank) for j in range(n_movies)]
        )
    ratings = offset + U @ V.T / np.sqrt(rank)
    if noise_sd > 0:
        ratings = ratings + noise_sd * rng.standard_normal(ratings.shape)
    if missing_frac > 0:
        mask = rng.random(ratings.shape) < missing_frac
        ratings = np.where(mask, np.nan, ratings)
    users = tuple(f"u{i:04d}" for i in range(n_users))
    movies = tuple(f"m{j:04d}" for j in range(n_movies))
    return RatingsTable(users=users, movies=movies, ratings=ratings, genres=movie_genre)


def build_recsys_pool(
    table: RatingsTable,
    training_users: tuple[str, ...] | list[str],
    noise_var: float = 1.0,
    prior_var: float = 100.0,
    impute: str = "zero",
) -> model.Pool:
    """One scalar experiment per movie from the training users' ratings.

    Experiment id j corresponds to table.movies[j]; its 1 x p observation row
    holds the training users' ratings of that movie with missing entries
    imputed (zeros, or the movie's training mean). A movie with no training
    ratings at all is rejected.
    """
    training_users = list(training_users)
    if not training_users:
        raise EmptyTraining("no training users supplied")
    if len(set(training_users)) != len(training_users):
        raise ValueError("training users must be distinct")
    missing = [u for u in training_users if u not in table._user_index]
    if missing:
        raise ValueError(f"training users not in table: {missing[:5]}")
    if impute not in ("zero", "mean"):
        raise ValueError(f"impute must be 'zero' or 'mean', got {impute!r}")
    p = len(training_users)
    rows = np.vstack([table.user_row(u) for u in training_users])  # p x movies
    experiments = []
    for j, movie in enumerate(table.movies):
        col = rows[:, j].copy()
        observed = ~np.isnan(col)
        if not observed.any():
            raise EmptyTraining(f"movie {movie} has no training ratings")
        fill = 0.0 if impute == "zero" else float(col[observed].mean())
        col[~observed] = fill
        experiments.append(model.make_experiment(j, col.reshape(1, p), [[noise_var]]))
    return model.Pool(
        experiments=tuple(experiments),
        prior_mean=np.zeros(p),
        prior_cov=prior_var * np.eye(p),
        target=np.eye(p),
    )


@dataclass(frozen=True)
class RecsysEval:
    mae: float
    genre_error_rate: float | None
    n_eval_entries: int
    n_users_scored: int


def evaluate_recsys(
    pool: model.Pool,
    table: RatingsTable,
    test_users: tuple[str, ...] | list[str],
    design: model.Design,
) -> RecsysEval:
    """Score a survey design on held-out users.

    Each test user answers the designed movies they have actually rated (a
    designed movie the user never rated is simply dropped from that user's
    survey); their preference vector is estimated and every other movie they
    rated is predicted. MAE pools absolute errors over all such entries.
    Favorite-genre prediction takes the argmax over genres of the mean
    predicted rating (all movies), against the argmax of the user's mean
    observed rating; ties break to the lexicographically smallest genre.
    """
    test_users = list(test_users)
    unknown = [u for u in test_users if u not in table._user_index]
    if unknown:
        raise ValueError(f"test users not in table: {unknown[:5]}")
    designed = design.counts
    abs_errors: list[float] = []
    genre_hits = 0
    genre_total = 0
    users_scored = 0
    genre_names = sorted({g for g in table.genres if g is not None})
    A_rows = np.vstack([pool.experiment(j).A[0] for j in range(len(table.movies))])
    for user in test_users:
        row = table.user_row(user)
        available = {
            j: row[j] for j in designed if not np.isnan(row[j])
        }
        if available:
            sub = model.Design.from_counts({j: designed[j] for j in available})
            obs = {j: np.repeat(available[j], designed[j]) for j in available}
            theta_hat = model.estimate(pool, sub, obs).z_hat
        else:
            theta_hat = pool.target @ pool.prior_mean
        predicted = A_rows @ theta_hat
        eval_idx = [
            j
            for j in range(len(table.movies))
            if j not in designed and not np.isnan(row[j])
        ]
        if not eval_idx:
            continue
        users_scored += 1
        abs_errors.extend(np.abs(predicted[eval_idx] - row[eval_idx]))
        if genre_names:
            pred_best = _argmax_genre(genre_names, table.genres, predicted, None)
            true_mask = ~np.isnan(row)
            true_best = _argmax_genre(genre_names, table.genres, row, true_mask)
            if true_best is not None:
                genre_total += 1
                genre_hits += int(pred_best == true_best)
    if not abs_errors:
        raise ValueError("no evaluable (user, movie) entries outside the design")
    genre_error = None
    if genre_total:
        genre_error = 1.0 - genre_hits / genre_total
    return RecsysEval(
        mae=float(np.mean(abs_errors)),
        genre_error_rate=genre_error,
        n_eval_entries=len(abs_errors),
        n_users_scored=users_scored,
    )


def _argmax_genre(genre_names, movie_genres, values, mask) -> str | None:
    """Genre with the highest mean value; ties lexicographic; None if empty."""
    best_name, best_mean = None, -np.inf
    for name in genre_names:  # genre_names sorted, so first win = lexicographic
        idx = [
            j
            for j, g in enumerate(movie_genres)
            if g == name and (mask is None or mask[j])
        ]
        if not idx:
            continue
        mean = float(np.mean([values[j] for j in idx]))
        if mean > best_mean + 1e-12:
            best_name, best_mean = name, mean
    return best_name
